//! SDF autodecoder: maps (voxel-local coordinate, latent code) to a truncated
//! signed distance.
//!
//! The MLP output passes through a tanh, producing values in (-1, 1) that are
//! scaled by the truncation distance. Training targets go through the same
//! squashing: the raw SDF is scaled so that the tanh interval
//! [-tanh_clamp, tanh_clamp] covers `encode_span` scene units (two voxel side
//! lengths by default), then tanh is applied. Losses are computed in that tanh
//! space; multiply by `truncation` to convert residuals to scene units.

use crate::error::{Error, Result};
use crate::nn::{Mlp, Real, Tape};

/// Per-voxel latent vector; entries must stay finite.
pub type LatentCode<T> = Vec<T>;

/// Mapping between raw SDF values (scene units) and the network's tanh space.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SdfEncoding {
    /// Decoder output range: decoded values lie in (-truncation, truncation).
    pub truncation: f64,
    /// Raw SDF magnitude mapped to ±tanh_clamp by [`SdfEncoding::encode_target`].
    pub encode_span: f64,
    pub tanh_clamp: f64,
}

impl SdfEncoding {
    /// Default configuration for a grid of the given voxel size: truncation of
    /// two voxel sides, with [-0.9, 0.9] in tanh space covering that same span.
    pub fn for_voxel_size(voxel_size: f64) -> Self {
        Self {
            truncation: 2.0 * voxel_size,
            encode_span: 2.0 * voxel_size,
            tanh_clamp: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.truncation > 0.0 && self.encode_span > 0.0) {
            return Err(Error::Config(
                "truncation and encode_span must be positive".into(),
            ));
        }
        if !(self.tanh_clamp > 0.0 && self.tanh_clamp < 1.0) {
            return Err(Error::Config("tanh_clamp must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Gain applied to raw SDF before the tanh; solves
    /// `tanh(scale * encode_span) = tanh_clamp`.
    #[inline]
    pub fn target_scale(&self) -> f64 {
        self.tanh_clamp.atanh() / self.encode_span
    }

    /// Squash a raw SDF (scene units) into the (-1, 1) tanh-space target that
    /// the network output is trained against. Total and monotone in `raw_sdf`.
    #[inline]
    pub fn encode_target(&self, raw_sdf: f64) -> f64 {
        (raw_sdf * self.target_scale()).tanh()
    }

    /// Clamp a raw SDF to the representable band.
    #[inline]
    pub fn clamp(&self, raw_sdf: f64) -> f64 {
        raw_sdf.clamp(-self.truncation, self.truncation)
    }
}

/// Reusable buffers for decoding (network input + tape).
#[derive(Debug, Clone)]
pub struct DecodeScratch<T> {
    input: Vec<T>,
    tape: Tape<T>,
}

impl<T: Real> DecodeScratch<T> {
    pub fn new() -> Self {
        Self {
            input: Vec::new(),
            tape: Tape::new(),
        }
    }
}

impl<T: Real> Default for DecodeScratch<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Shared autodecoder for local shapes: a leaky-ReLU MLP over
/// `[code, local position]` with tanh output scaling.
#[derive(Debug, Clone)]
pub struct Decoder<T> {
    mlp: Mlp<T>,
    code_dim: usize,
    pos_dim: usize,
    pub encoding: SdfEncoding,
}

impl<T: Real> Decoder<T> {
    pub fn new(mlp: Mlp<T>, code_dim: usize, encoding: SdfEncoding) -> Result<Self> {
        encoding.validate()?;
        let input_dim = mlp.spec().input_dim;
        if code_dim == 0 || code_dim >= input_dim {
            return Err(Error::Config(format!(
                "code_dim {code_dim} incompatible with input_dim {input_dim}"
            )));
        }
        let pos_dim = input_dim - code_dim;
        if pos_dim != 2 && pos_dim != 3 {
            return Err(Error::Config(format!(
                "input_dim - code_dim must be 2 or 3, got {pos_dim}"
            )));
        }
        if mlp.spec().output_dim != 1 {
            return Err(Error::Config("decoder MLP must have one output".into()));
        }
        Ok(Self {
            mlp,
            code_dim,
            pos_dim,
            encoding,
        })
    }

    pub fn mlp(&self) -> &Mlp<T> {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp<T> {
        &mut self.mlp
    }

    pub fn code_dim(&self) -> usize {
        self.code_dim
    }

    /// Spatial dimensionality (3 for scenes, 2 for the planar study).
    pub fn pos_dim(&self) -> usize {
        self.pos_dim
    }

    fn fill_input(&self, scratch: &mut DecodeScratch<T>, code: &[T], local_pos: &[f64]) {
        assert_eq!(
            code.len(),
            self.code_dim,
            "code has {} entries, decoder expects {}",
            code.len(),
            self.code_dim
        );
        assert_eq!(
            local_pos.len(),
            self.pos_dim,
            "position has {} entries, decoder expects {}",
            local_pos.len(),
            self.pos_dim
        );
        scratch.input.clear();
        scratch.input.extend_from_slice(code);
        scratch
            .input
            .extend(local_pos.iter().map(|p| T::from_f64(*p)));
    }

    /// Run the network; returns the raw pre-tanh output and leaves the tape in
    /// `scratch` for a subsequent backward pass.
    pub fn forward(&self, scratch: &mut DecodeScratch<T>, code: &[T], local_pos: &[f64]) -> T {
        self.fill_input(scratch, code, local_pos);
        let input = std::mem::take(&mut scratch.input);
        self.mlp.forward(&input, &mut scratch.tape);
        scratch.input = input;
        scratch.tape.output()[0]
    }

    /// `forward` for positions already in the network scalar type (hot paths).
    pub fn forward_t(&self, scratch: &mut DecodeScratch<T>, code: &[T], local_pos: &[T]) -> T {
        assert_eq!(code.len(), self.code_dim);
        assert_eq!(local_pos.len(), self.pos_dim);
        scratch.input.clear();
        scratch.input.extend_from_slice(code);
        scratch.input.extend_from_slice(local_pos);
        let input = std::mem::take(&mut scratch.input);
        self.mlp.forward(&input, &mut scratch.tape);
        scratch.input = input;
        scratch.tape.output()[0]
    }

    /// Tanh-space output in (-1, 1); the quantity trained against
    /// [`SdfEncoding::encode_target`].
    pub fn decode_tanh(&self, scratch: &mut DecodeScratch<T>, code: &[T], local_pos: &[f64]) -> T {
        self.forward(scratch, code, local_pos).tanh()
    }

    /// Truncated SDF in scene units, strictly inside (-truncation, truncation).
    pub fn decode(&self, scratch: &mut DecodeScratch<T>, code: &[T], local_pos: &[f64]) -> f64 {
        self.decode_tanh(scratch, code, local_pos).as_f64() * self.encoding.truncation
    }

    /// Allocation-free-ish convenience decode (builds a scratch internally).
    pub fn decode_alloc(&self, code: &[T], local_pos: &[f64]) -> f64 {
        let mut scratch = DecodeScratch::new();
        self.decode(&mut scratch, code, local_pos)
    }

    /// Backward pass through the network recorded in `scratch`.
    ///
    /// `upstream` is dL/d(pre-tanh output). Parameter gradients accumulate
    /// into `param_grads` when given; the gradient w.r.t. the code lands in
    /// `code_grad` (position gradients are discarded).
    pub fn backward(
        &self,
        scratch: &mut DecodeScratch<T>,
        upstream: T,
        param_grads: Option<&mut [T]>,
        code_grad: &mut [T],
        input_grad_buf: &mut Vec<T>,
    ) {
        assert_eq!(code_grad.len(), self.code_dim);
        input_grad_buf.clear();
        input_grad_buf.resize(self.mlp.spec().input_dim, T::zero());
        self.mlp
            .backward(&scratch.tape, &[upstream], param_grads, input_grad_buf);
        for (g, src) in code_grad.iter_mut().zip(input_grad_buf.iter()) {
            *g += *src;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::MlpSpec;

    fn toy_decoder() -> Decoder<f64> {
        let spec = MlpSpec::new(8 + 3, 16, 4, 1);
        let mlp = Mlp::init(spec, 42).unwrap();
        Decoder::new(mlp, 8, SdfEncoding::for_voxel_size(0.1)).unwrap()
    }

    #[test]
    fn zero_network_decodes_zero() {
        let spec = MlpSpec::new(8 + 3, 16, 4, 1);
        let mlp = Mlp::<f64>::zeros(spec).unwrap();
        let dec = Decoder::new(mlp, 8, SdfEncoding::for_voxel_size(0.1)).unwrap();
        let sdf = dec.decode_alloc(&vec![0.3; 8], &[0.1, -0.2, 0.05]);
        assert_eq!(sdf, 0.0);
    }

    #[test]
    fn decode_stays_inside_truncation() {
        let dec = toy_decoder();
        let trunc = dec.encoding.truncation;
        let mut scratch = DecodeScratch::new();
        for k in 0..50 {
            let code: Vec<f64> = (0..8).map(|i| ((i * k) as f64 * 0.37).sin() * 3.0).collect();
            let p = [(k as f64 * 0.11).sin(), (k as f64 * 0.07).cos(), 0.3];
            let sdf = dec.decode(&mut scratch, &code, &p);
            assert!(sdf.abs() < trunc, "|{sdf}| >= {trunc}");
        }
    }

    #[test]
    fn code_dim_mismatch_panics_or_errors() {
        let dec = toy_decoder();
        let r = std::panic::catch_unwind(|| dec.decode_alloc(&vec![0.0; 5], &[0.0, 0.0, 0.0]));
        assert!(r.is_err());
    }

    #[test]
    fn encode_target_fixed_points() {
        let enc = SdfEncoding::for_voxel_size(0.1);
        assert_eq!(enc.encode_target(0.0), 0.0);
        // Raw SDF of two voxel side lengths lands on the clamp value.
        let v = enc.encode_target(0.2);
        assert!((v - 0.9).abs() < 1e-6, "got {v}");
        // Asymptotic behavior.
        assert!(enc.encode_target(1e9) > 0.999_999);
        assert!(enc.encode_target(1e9) < 1.0 + 1e-12);
    }

    #[test]
    fn encode_target_is_monotone() {
        let enc = SdfEncoding::for_voxel_size(0.05);
        let mut prev = f64::NEG_INFINITY;
        let mut x = -0.5;
        while x <= 0.5 {
            let t = enc.encode_target(x);
            assert!(t > prev);
            prev = t;
            x += 0.01;
        }
    }

    #[test]
    fn backward_gradient_matches_fd_through_tanh() {
        let dec = toy_decoder();
        let code: Vec<f64> = (0..8).map(|i| 0.05 * (i as f64 + 1.0)).collect();
        let pos = [0.12, -0.4, 0.3];
        // Loss = tanh(net([code, pos])); upstream on pre-tanh output is 1 - tanh^2.
        let mut scratch = DecodeScratch::new();
        let pre = dec.forward(&mut scratch, &code, &pos);
        let up = 1.0 - pre.tanh() * pre.tanh();
        let mut cg = vec![0.0; 8];
        let mut buf = Vec::new();
        dec.backward(&mut scratch, up, None, &mut cg, &mut buf);

        let h = 1e-6;
        for i in 0..8 {
            let mut cp = code.clone();
            cp[i] += h;
            let lp = dec.decode_alloc(&cp, &pos) / dec.encoding.truncation;
            cp[i] -= 2.0 * h;
            let lm = dec.decode_alloc(&cp, &pos) / dec.encoding.truncation;
            let fd = (lp - lm) / (2.0 * h);
            let rel = (cg[i] - fd).abs() / fd.abs().max(1e-6);
            assert!(rel < 1e-4, "code grad {i}: {} vs {fd}", cg[i]);
        }
    }
}
