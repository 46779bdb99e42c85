//! Adam optimizer state over a flat parameter buffer.

use super::Real;

/// Moment estimates plus hyperparameters for one parameter buffer.
///
/// The canonical constants are beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step_count: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> AdamState<T> {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            step_count: 0,
            lr: T::from_f64(lr),
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len(), "params do not match adam state");
        assert_eq!(grads.len(), self.m.len(), "grads do not match adam state");
        self.step_count += 1;
        let t = self.step_count as i32;
        let one = T::one();
        let bias1 = one - self.beta1.powi(t);
        let bias2 = one - self.beta2.powi(t);
        // Folded correction: lr_t * m / (sqrt(v) + eps') with
        // lr_t = lr * sqrt(1-b2^t) / (1-b1^t) matches the bias-corrected form
        // up to eps placement; we keep the textbook form for exactness.
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] = params[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut st = AdamState::<f64>::new(3, 0.01);
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        st.step(&mut p, &[0.0; 3]);
        assert_eq!(p, before);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        // Scalar param 1.0, grad 1.0, lr 0.01: m_hat = v_hat = 1, so
        // delta = lr / (1 + eps) ~ lr.
        let mut st = AdamState::<f64>::new(1, 0.01);
        let mut p = vec![1.0];
        st.step(&mut p, &[1.0]);
        assert!((p[0] - 0.99).abs() < 1e-6, "got {}", p[0]);
    }

    /// Reference Adam recurrence run independently of `AdamState`.
    fn reference_adam(lr: f64, grads: &[f64], p0: f64) -> Vec<f64> {
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let (mut m, mut v, mut p) = (0.0, 0.0, p0);
        let mut out = Vec::new();
        for (k, g) in grads.iter().enumerate() {
            let t = (k + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1_pow(b1, t));
            let vh = v / (1.0 - b1_pow(b2, t));
            p -= lr * mh / (vh.sqrt() + eps);
            out.push(p);
        }
        out
    }

    fn b1_pow(b: f64, t: i32) -> f64 {
        b.powi(t)
    }

    #[test]
    fn constant_gradient_update_magnitude_stabilizes() {
        let grads = [0.5, 0.5];
        let want = reference_adam(0.01, &grads, 1.0);
        let mut st = AdamState::<f64>::new(1, 0.01);
        let mut p = vec![1.0];
        st.step(&mut p, &[0.5]);
        let d1 = (1.0 - p[0]).abs();
        let p_after_1 = p[0];
        st.step(&mut p, &[0.5]);
        let d2 = (p_after_1 - p[0]).abs();
        assert!((p[0] - want[1]).abs() < 1e-12);
        assert!(d2 <= d1 * 1.01, "d1={d1} d2={d2}");
    }

    #[test]
    #[should_panic]
    fn shape_mismatch_panics() {
        let mut st = AdamState::<f64>::new(2, 0.01);
        let mut p = vec![0.0; 3];
        st.step(&mut p, &[0.0; 3]);
    }
}
