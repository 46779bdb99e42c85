//! Prior training: joint optimization of the shared decoder and per-patch
//! latent codes over a corpus of local SDF patches.
//!
//! The per-voxel objective is a weighted mean L1 between the decoder's
//! tanh-space output and the squashed SDF target, plus an L2 code regularizer
//! weighted by 1/sigma^2. Decoder gradients sum over the voxels of a batch;
//! code gradients never cross voxels (voxel-major batching).
//!
//! Determinism: batches, sample picks, and code initialization derive from
//! per-(step, patch) seeds, and parallel gradient reduction happens over a
//! fixed number of chunks folded in order, so results are bit-identical for
//! any worker count.

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::decoder::{DecodeScratch, Decoder, SdfEncoding};
use crate::error::{Error, Result};
use crate::latent_grid::{LatentGrid, VoxelIndex, CODE_INIT_SIGMA};
use crate::math::Vec3;
use crate::nn::{AdamState, Real};
use crate::sampling::primitives::PrimitiveShape;
use crate::sampling::{sample_scene_sdf, SceneSampleConfig, SdfSample};

/// One observation expressed in a voxel's normalized local frame, with the
/// target already squashed to tanh space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSample<T> {
    pub pos: [T; 3],
    pub target: T,
    pub weight: T,
}

/// Per-voxel training set for one scene.
#[derive(Debug, Clone)]
pub struct Patch<T> {
    pub scene: u32,
    pub voxel: VoxelIndex,
    pub samples: Vec<LocalSample<T>>,
}

#[derive(Debug, Clone, Default)]
pub struct PatchDataset<T> {
    pub patches: Vec<Patch<T>>,
}

impl<T> PatchDataset<T> {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn sample_count(&self) -> usize {
        self.patches.iter().map(|p| p.samples.len()).sum()
    }
}

/// Replicate each sample into every allocated voxel whose extended receptive
/// field contains it, re-expressing positions in that voxel's normalized local
/// frame (SDF values unchanged, then squashed to tanh space).
pub fn assign_local_samples<T: Real>(
    grid: &LatentGrid<T>,
    samples: &[SdfSample],
    encoding: &SdfEncoding,
) -> std::collections::BTreeMap<VoxelIndex, Vec<LocalSample<T>>> {
    let mut map: std::collections::BTreeMap<VoxelIndex, Vec<LocalSample<T>>> =
        grid.iter().map(|(idx, _)| (*idx, Vec::new())).collect();
    for s in samples {
        let target = T::from_f64(encoding.encode_target(s.sdf));
        let weight = T::from_f64(s.weight);
        for idx in grid.voxels_for_sample(s.position) {
            let l = grid.to_local_normalized(idx, s.position);
            map.get_mut(&idx).expect("assigned voxel is allocated").push(LocalSample {
                pos: [T::from_f64(l[0]), T::from_f64(l[1]), T::from_f64(l[2])],
                target,
                weight,
            });
        }
    }
    map
}

/// Positions considered "on the surface" for allocation purposes: samples
/// whose |sdf| is within a quarter of the truncation band.
pub fn surface_positions(samples: &[SdfSample], truncation: f64) -> Vec<Vec3> {
    samples
        .iter()
        .filter(|s| s.sdf.abs() <= 0.25 * truncation)
        .map(|s| s.position)
        .collect()
}

/// Grid settings shared by every scene of a corpus.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct GridTemplate {
    pub origin: Vec3,
    pub voxel_size: f64,
    pub receptive_radius_factor: f64,
}

impl GridTemplate {
    pub fn instantiate<T: Real>(&self, code_dim: usize, seed: u64) -> Result<LatentGrid<T>> {
        let mut g = LatentGrid::new(self.origin, self.voxel_size, code_dim, seed)?;
        g.receptive_radius_factor = self.receptive_radius_factor;
        Ok(g)
    }
}

/// Build the patch corpus from primitive scenes: sample each scene's SDF,
/// allocate voxels from near-surface positions, and gather each voxel's
/// extended-field samples.
pub fn build_patch_dataset<T: Real>(
    scenes: &[Vec<PrimitiveShape>],
    template: &GridTemplate,
    sampler: &SceneSampleConfig,
    encoding: &SdfEncoding,
    code_dim: usize,
) -> Result<PatchDataset<T>> {
    if scenes.is_empty() {
        return Err(Error::Data("corpus has no scenes".into()));
    }
    let mut patches = Vec::new();
    for (si, shapes) in scenes.iter().enumerate() {
        let cfg = SceneSampleConfig {
            seed: sampler.seed.wrapping_add(si as u64).wrapping_mul(0x9e37_79b9),
            ..*sampler
        };
        let samples = sample_scene_sdf(shapes, &cfg)?;
        if samples.is_empty() {
            return Err(Error::Data(format!("scene {si} produced no samples")));
        }
        let mut grid: LatentGrid<T> = template.instantiate(code_dim, cfg.seed)?;
        grid.allocate(&surface_positions(&samples, encoding.truncation));
        if grid.is_empty() {
            return Err(Error::Data(format!(
                "scene {si} has no near-surface samples to allocate from"
            )));
        }
        for (voxel, locals) in assign_local_samples(&grid, &samples, encoding) {
            patches.push(Patch {
                scene: si as u32,
                voxel,
                samples: locals,
            });
        }
    }
    Ok(PatchDataset { patches })
}

/// Weighted mean L1 in tanh space plus the code regularizer
/// `reg_weight * ||code||^2`. An empty sample list yields the regularizer only.
pub fn loss<T: Real>(
    decoder: &Decoder<T>,
    code: &[T],
    samples: &[LocalSample<T>],
    reg_weight: f64,
    scratch: &mut DecodeScratch<T>,
) -> f64 {
    let mut data = 0.0f64;
    let mut wsum = 0.0f64;
    for s in samples {
        let pre = decoder.forward_t(scratch, code, &s.pos);
        let resid = (pre.tanh() - s.target).as_f64().abs();
        data += s.weight.as_f64() * resid;
        wsum += s.weight.as_f64();
    }
    let data_term = if wsum > 0.0 { data / wsum } else { 0.0 };
    let reg: f64 = code.iter().map(|z| z.as_f64() * z.as_f64()).sum::<f64>() * reg_weight;
    data_term + reg
}

/// Loss plus gradients. Decoder parameter gradients accumulate into
/// `param_grads` when given; the code gradient is written to `code_grad`
/// (overwritten). Returns the loss (data term plus regularizer).
pub fn loss_and_grads<T: Real>(
    decoder: &Decoder<T>,
    code: &[T],
    samples: &[LocalSample<T>],
    reg_weight: f64,
    mut param_grads: Option<&mut [T]>,
    code_grad: &mut [T],
    scratch: &mut DecodeScratch<T>,
    input_grad_buf: &mut Vec<T>,
) -> f64 {
    for g in code_grad.iter_mut() {
        *g = T::zero();
    }
    let wsum: f64 = samples.iter().map(|s| s.weight.as_f64()).sum();
    let mut data = 0.0f64;
    if wsum > 0.0 {
        let inv_wsum = T::from_f64(1.0 / wsum);
        for s in samples {
            let pre = decoder.forward_t(scratch, code, &s.pos);
            let th = pre.tanh();
            let resid = th - s.target;
            data += s.weight.as_f64() * resid.as_f64().abs();
            // d|r|/d pre = sign(r) * (1 - tanh^2), averaged with the weights.
            let sign = if resid > T::zero() {
                T::one()
            } else if resid < T::zero() {
                -T::one()
            } else {
                T::zero()
            };
            let upstream = sign * (T::one() - th * th) * s.weight * inv_wsum;
            decoder.backward(
                scratch,
                upstream,
                param_grads.as_deref_mut(),
                code_grad,
                input_grad_buf,
            );
        }
    }
    let two_reg = T::from_f64(2.0 * reg_weight);
    for (g, z) in code_grad.iter_mut().zip(code.iter()) {
        *g += two_reg * *z;
    }
    let reg: f64 = code.iter().map(|z| z.as_f64() * z.as_f64()).sum::<f64>() * reg_weight;
    let data_term = if wsum > 0.0 { data / wsum } else { 0.0 };
    data_term + reg
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_voxels: usize,
    pub samples_per_voxel_per_step: usize,
    pub lr: f64,
    /// Fractions of the total step count at which the learning rate decays.
    pub lr_decay_at: [f64; 2],
    pub lr_decay_factor: f64,
    /// Code prior sigma; the regularizer weight is 1/sigma^2.
    pub sigma_reg: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_voxels: 64,
            samples_per_voxel_per_step: 16,
            lr: 0.01,
            lr_decay_at: [0.5, 0.75],
            lr_decay_factor: 0.5,
            sigma_reg: 100.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn reg_weight(&self) -> f64 {
        1.0 / (self.sigma_reg * self.sigma_reg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_voxels == 0 || self.samples_per_voxel_per_step == 0 {
            return Err(Error::Config(
                "epochs, batch_voxels, and samples_per_voxel_per_step must be positive".into(),
            ));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if !(self.sigma_reg > 0.0) {
            return Err(Error::Config("sigma_reg must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
}

#[derive(Debug)]
pub struct TrainResult<T> {
    pub decoder: Decoder<T>,
    /// Final per-patch codes, parallel to `dataset.patches`.
    pub codes: Vec<Vec<T>>,
    pub loss_curve: Vec<EpochLoss>,
    pub steps_run: usize,
}

fn mix_seed(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    let mut h = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for v in [a, b] {
        h ^= v.wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
    }
    h
}

/// Number of deterministic reduction chunks for decoder gradients; fixed so
/// results do not depend on the worker count.
const GRAD_CHUNKS: usize = 8;

/// Jointly optimize decoder parameters and all per-patch codes with Adam.
///
/// Aborts with a numerical error if the loss stops being finite.
pub fn train_prior<T: Real>(
    dataset: &PatchDataset<T>,
    decoder: Decoder<T>,
    config: &TrainConfig,
) -> Result<TrainResult<T>> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Data("patch dataset is empty".into()));
    }
    let mut decoder = decoder;
    let n_patches = dataset.patches.len();
    let code_dim = decoder.code_dim();
    let reg_weight = config.reg_weight();

    // Code init mirrors the grid's allocation-time distribution.
    let normal = Normal::new(0.0, CODE_INIT_SIGMA).expect("valid sigma");
    let mut codes: Vec<Vec<T>> = (0..n_patches)
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0xc0de, p as u64, 0));
            (0..code_dim)
                .map(|_| T::from_f64(normal.sample(&mut rng)))
                .collect()
        })
        .collect();

    let n_params = decoder.mlp().params().len();
    let mut adam_decoder = AdamState::<T>::new(n_params, config.lr);
    let mut adam_codes: Vec<AdamState<T>> = (0..n_patches)
        .map(|_| AdamState::new(code_dim, config.lr))
        .collect();

    let steps_per_epoch = n_patches.div_ceil(config.batch_voxels);
    let total_steps = config.epochs * steps_per_epoch;
    let decay_steps = [
        ((total_steps as f64) * config.lr_decay_at[0]).floor() as usize,
        ((total_steps as f64) * config.lr_decay_at[1]).floor() as usize,
    ];

    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut param_grad_sum: Vec<T> = vec![T::zero(); n_params];
    let mut lr = config.lr;

    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n_patches).collect();
        {
            use rand::seq::SliceRandom;
            let mut rng =
                ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x0e0c, epoch as u64, 0));
            order.shuffle(&mut rng);
        }
        let mut epoch_loss_sum = 0.0f64;
        let mut epoch_loss_count = 0usize;
        for batch_start in (0..n_patches).step_by(config.batch_voxels) {
            // Learning-rate schedule: two decays at the configured fractions.
            if decay_steps.contains(&step) && step > 0 {
                lr *= config.lr_decay_factor;
                adam_decoder.lr = T::from_f64(lr);
                for st in &mut adam_codes {
                    st.lr = T::from_f64(lr);
                }
            }
            let batch: &[usize] =
                &order[batch_start..(batch_start + config.batch_voxels).min(n_patches)];

            // Parallel per-patch forward/backward over a fixed chunk count;
            // chunk results fold in order, so any worker count gives the same
            // bits.
            let chunk_len = batch.len().div_ceil(GRAD_CHUNKS).max(1);
            let chunk_results: Vec<(Vec<T>, Vec<(usize, Vec<T>, f64)>)> = batch
                .par_chunks(chunk_len)
                .map(|chunk| {
                    let mut pg = vec![T::zero(); n_params];
                    let mut scratch = DecodeScratch::new();
                    let mut igb = Vec::new();
                    let mut per_patch = Vec::with_capacity(chunk.len());
                    for &pi in chunk {
                        let patch = &dataset.patches[pi];
                        let code = &codes[pi];
                        let picked = pick_samples(
                            &patch.samples,
                            config.samples_per_voxel_per_step,
                            mix_seed(config.seed, 0x5a3f, step as u64, pi as u64),
                        );
                        let mut cg = vec![T::zero(); code_dim];
                        let l = loss_and_grads(
                            &decoder,
                            code,
                            &picked,
                            reg_weight,
                            Some(&mut pg),
                            &mut cg,
                            &mut scratch,
                            &mut igb,
                        );
                        per_patch.push((pi, cg, l));
                    }
                    (pg, per_patch)
                })
                .collect();

            for g in param_grad_sum.iter_mut() {
                *g = T::zero();
            }
            let mut step_loss = 0.0f64;
            let mut step_count = 0usize;
            for (pg, per_patch) in chunk_results {
                for (dst, src) in param_grad_sum.iter_mut().zip(pg.iter()) {
                    *dst += *src;
                }
                for (pi, cg, l) in per_patch {
                    if !l.is_finite() {
                        return Err(Error::Numerical(format!(
                            "loss diverged at step {step} (patch {pi}): {l}"
                        )));
                    }
                    adam_codes[pi].step(&mut codes[pi], &cg);
                    step_loss += l;
                    step_count += 1;
                }
            }
            adam_decoder.step(decoder.mlp_mut().params_mut(), &param_grad_sum);
            epoch_loss_sum += step_loss;
            epoch_loss_count += step_count;
            step += 1;
        }
        loss_curve.push(EpochLoss {
            epoch,
            mean_loss: epoch_loss_sum / epoch_loss_count.max(1) as f64,
            lr,
        });
    }

    Ok(TrainResult {
        decoder,
        codes,
        loss_curve,
        steps_run: step,
    })
}

/// Deterministic minibatch pick: all samples when the request covers them,
/// otherwise a without-replacement draw from a per-(step, patch) stream.
fn pick_samples<T: Copy>(samples: &[LocalSample<T>], want: usize, seed: u64) -> Vec<LocalSample<T>> {
    if samples.len() <= want {
        return samples.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    index_sample(&mut rng, samples.len(), want)
        .iter()
        .map(|i| samples[i])
        .collect()
}
