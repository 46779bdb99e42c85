//! Minimal dense-network engine: a leaky-ReLU MLP with exact reverse-mode
//! gradients for both parameters and inputs, plus an Adam optimizer.
//!
//! The scalar type is generic so the same code runs in `f32` for production
//! training and in `f64` for gradient-check tests. Parameters live in one flat
//! buffer laid out `[W1, b1, W2, b2, ...]` with row-major `(out x in)` weight
//! matrices, which keeps optimizer steps, checkpointing, and finite-difference
//! probes trivial.
//!
//! Shape mismatches are programmer error and panic via `assert!`; invalid
//! configurations return [`Error::Config`].

mod adam;

pub use adam::AdamState;

use std::fmt;
use std::ops::{AddAssign, MulAssign, SubAssign};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Scalar used by the network stack. Implemented for `f32` and `f64`.
pub trait Real:
    num_traits::Float
    + AddAssign
    + SubAssign
    + MulAssign
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Network architecture: `num_layers` affine layers with leaky ReLUs between
/// them and no activation after the last (callers wrap the output as needed).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub output_dim: usize,
    pub leaky_slope: f64,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dim: usize, num_layers: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            num_layers,
            output_dim,
            leaky_slope: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.num_layers == 0 {
            return Err(Error::Config(format!(
                "mlp dims must be positive, got {self:?}"
            )));
        }
        if self.num_layers > 1 && self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be positive".into()));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config(format!(
                "leaky_slope must lie in (0, 1), got {}",
                self.leaky_slope
            )));
        }
        Ok(())
    }

    /// `(in, out)` per affine layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.num_layers);
        for l in 0..self.num_layers {
            let i = if l == 0 { self.input_dim } else { self.hidden_dim };
            let o = if l + 1 == self.num_layers {
                self.output_dim
            } else {
                self.hidden_dim
            };
            dims.push((i, o));
        }
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| o * i + o).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerLayout {
    w_start: usize,
    b_start: usize,
    in_dim: usize,
    out_dim: usize,
}

/// A dense network with flat parameter storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    spec: MlpSpec,
    layout: Vec<LayerLayout>,
    params: Vec<T>,
}

fn build_layout(spec: &MlpSpec) -> Vec<LayerLayout> {
    let mut layout = Vec::with_capacity(spec.num_layers);
    let mut off = 0;
    for (in_dim, out_dim) in spec.layer_dims() {
        layout.push(LayerLayout {
            w_start: off,
            b_start: off + out_dim * in_dim,
            in_dim,
            out_dim,
        });
        off += out_dim * in_dim + out_dim;
    }
    layout
}

impl<T: Real> Mlp<T> {
    /// Fan-in-scaled uniform init `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`,
    /// biases zero; deterministic for a fixed seed.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = build_layout(&spec);
        let n = spec.param_count();
        let mut params = vec![T::zero(); n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for lay in &layout {
            let limit = 1.0 / (lay.in_dim as f64).sqrt();
            for w in &mut params[lay.w_start..lay.w_start + lay.out_dim * lay.in_dim] {
                *w = T::from_f64(rng.random_range(-limit..limit));
            }
            // biases stay zero
        }
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    /// All-zero parameters (used by tests and as a blank slate for loading).
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let layout = build_layout(&spec);
        let n = spec.param_count();
        Ok(Self {
            spec,
            layout,
            params: vec![T::zero(); n],
        })
    }

    pub fn from_params(spec: MlpSpec, params: Vec<T>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::Config(format!(
                "parameter buffer has {} entries, spec needs {}",
                params.len(),
                spec.param_count()
            )));
        }
        let layout = build_layout(&spec);
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn num_layers(&self) -> usize {
        self.layout.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Row-major `(out x in)` weight matrix of layer `l`.
    pub fn weights(&self, l: usize) -> &[T] {
        let lay = self.layout[l];
        &self.params[lay.w_start..lay.w_start + lay.out_dim * lay.in_dim]
    }

    pub fn biases(&self, l: usize) -> &[T] {
        let lay = self.layout[l];
        &self.params[lay.b_start..lay.b_start + lay.out_dim]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [T] {
        let lay = self.layout[l];
        &mut self.params[lay.w_start..lay.w_start + lay.out_dim * lay.in_dim]
    }

    pub fn biases_mut(&mut self, l: usize) -> &mut [T] {
        let lay = self.layout[l];
        &mut self.params[lay.b_start..lay.b_start + lay.out_dim]
    }

    pub fn layer_dim(&self, l: usize) -> (usize, usize) {
        let lay = self.layout[l];
        (lay.in_dim, lay.out_dim)
    }

    /// Forward pass recording intermediates into `tape`; the output lives in
    /// `tape.output()`. The tape may be reused across calls.
    pub fn forward(&self, input: &[T], tape: &mut Tape<T>) {
        assert_eq!(
            input.len(),
            self.spec.input_dim,
            "input len {} does not match input_dim {}",
            input.len(),
            self.spec.input_dim
        );
        tape.ensure_shape(&self.spec);
        tape.input.clear();
        tape.input.extend_from_slice(input);

        let slope = T::from_f64(self.spec.leaky_slope);
        let n_layers = self.layout.len();
        for (l, lay) in self.layout.iter().enumerate() {
            let last = l + 1 == n_layers;
            let x: &[T] = if l == 0 { &tape.input } else { &tape.post[l - 1] };
            let pre = &mut tape.pre[l];
            for o in 0..lay.out_dim {
                let row = &self.params[lay.w_start + o * lay.in_dim..lay.w_start + (o + 1) * lay.in_dim];
                let mut sum = self.params[lay.b_start + o];
                for (w, xv) in row.iter().zip(x.iter()) {
                    sum += *w * *xv;
                }
                pre[o] = sum;
            }
            if !last {
                let (pre, post) = (&tape.pre[l], &mut tape.post[l]);
                for (p, q) in pre.iter().zip(post.iter_mut()) {
                    *q = if *p > T::zero() { *p } else { slope * *p };
                }
            }
        }
        tape.recorded = true;
    }

    /// Convenience forward that allocates its own tape and returns the output.
    pub fn forward_alloc(&self, input: &[T]) -> Vec<T> {
        let mut tape = Tape::new();
        self.forward(input, &mut tape);
        tape.output().to_vec()
    }

    /// Reverse-mode gradients for the forward pass recorded in `tape`.
    ///
    /// `upstream` is dL/d(output). Parameter gradients are *accumulated* into
    /// `param_grads` when provided (pass `None` to skip them, e.g. when only
    /// the input gradient is needed); `input_grad` is overwritten.
    pub fn backward(
        &self,
        tape: &Tape<T>,
        upstream: &[T],
        mut param_grads: Option<&mut [T]>,
        input_grad: &mut [T],
    ) {
        assert!(tape.recorded, "backward called with a blank tape");
        assert_eq!(
            tape.input.len(),
            self.spec.input_dim,
            "tape does not match this network's input_dim"
        );
        assert_eq!(
            tape.pre.last().map(|v| v.len()),
            Some(self.spec.output_dim),
            "tape does not match this network's output_dim"
        );
        assert_eq!(upstream.len(), self.spec.output_dim);
        assert_eq!(input_grad.len(), self.spec.input_dim);
        if let Some(g) = param_grads.as_deref() {
            assert_eq!(g.len(), self.params.len());
        }

        let slope = T::from_f64(self.spec.leaky_slope);
        let n_layers = self.layout.len();
        // dz for the current layer; dx buffer for the layer below.
        let mut dz: Vec<T> = upstream.to_vec();
        let mut dx: Vec<T> = Vec::new();
        for l in (0..n_layers).rev() {
            let lay = self.layout[l];
            let x: &[T] = if l == 0 { &tape.input } else { &tape.post[l - 1] };
            if l + 1 != n_layers {
                // dz currently holds dL/d(post activation); push through leaky ReLU.
                let pre = &tape.pre[l];
                for (d, p) in dz.iter_mut().zip(pre.iter()) {
                    if *p <= T::zero() {
                        *d *= slope;
                    }
                }
            }
            if let Some(grads) = param_grads.as_deref_mut() {
                for (o, dzo) in dz.iter().enumerate() {
                    let row =
                        &mut grads[lay.w_start + o * lay.in_dim..lay.w_start + (o + 1) * lay.in_dim];
                    for (g, xv) in row.iter_mut().zip(x.iter()) {
                        *g += *dzo * *xv;
                    }
                    grads[lay.b_start + o] += *dzo;
                }
            }
            // dx = W^T dz
            dx.clear();
            dx.resize(lay.in_dim, T::zero());
            for (o, dzo) in dz.iter().enumerate() {
                let row = &self.params[lay.w_start + o * lay.in_dim..lay.w_start + (o + 1) * lay.in_dim];
                for (d, w) in dx.iter_mut().zip(row.iter()) {
                    *d += *w * *dzo;
                }
            }
            std::mem::swap(&mut dz, &mut dx);
        }
        input_grad.copy_from_slice(&dz);
    }
}

/// Recorded intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    input: Vec<T>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<T>>,
    /// Post-activation of each hidden layer (last layer has none).
    post: Vec<Vec<T>>,
    recorded: bool,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            input: Vec::new(),
            pre: Vec::new(),
            post: Vec::new(),
            recorded: false,
        }
    }

    fn ensure_shape(&mut self, spec: &MlpSpec) {
        let dims = spec.layer_dims();
        if self.pre.len() != dims.len() || self.pre.iter().zip(&dims).any(|(v, d)| v.len() != d.1) {
            self.pre = dims.iter().map(|d| vec![T::zero(); d.1]).collect();
            self.post = dims
                .iter()
                .take(dims.len().saturating_sub(1))
                .map(|d| vec![T::zero(); d.1])
                .collect();
        }
        self.recorded = false;
    }

    /// Output of the recorded forward pass (last layer pre-activation).
    pub fn output(&self) -> &[T] {
        assert!(self.recorded, "tape holds no forward pass");
        self.pre.last().expect("tape holds no layers")
    }
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}
