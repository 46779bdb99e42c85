//! Scene encoding: with decoder weights frozen, optimize each allocated
//! voxel's latent code against the samples in its extended receptive field.
//!
//! Voxels are fully independent (each owns its code, Adam state, and RNG
//! stream seeded from the voxel index), so encoding in parallel produces the
//! same bits as encoding sequentially.

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decoder::{DecodeScratch, Decoder};
use crate::error::{Error, Result};
use crate::latent_grid::{LatentGrid, VoxelIndex};
use crate::math::Vec3;
use crate::nn::{AdamState, Real};
use crate::sampling::SdfSample;
use crate::training::{assign_local_samples, loss, loss_and_grads, LocalSample};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EncodeConfig {
    pub iterations: usize,
    pub lr: f64,
    /// Code prior sigma; regularizer weight is 1/sigma^2.
    pub sigma_reg: f64,
    /// Early exit when the loss improvement over a 50-iteration window drops
    /// below this value. Ignored when `early_exit` is off.
    pub convergence_tol: f64,
    pub early_exit: bool,
    /// Samples drawn per iteration per voxel (the whole set when smaller).
    pub samples_per_step: usize,
    pub seed: u64,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            lr: 0.01,
            sigma_reg: 100.0,
            convergence_tol: 1e-4,
            early_exit: true,
            samples_per_step: 128,
            seed: 0,
        }
    }
}

impl EncodeConfig {
    pub fn reg_weight(&self) -> f64 {
        1.0 / (self.sigma_reg * self.sigma_reg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_step == 0 {
            return Err(Error::Config("samples_per_step must be positive".into()));
        }
        if self.convergence_tol < 0.0 {
            return Err(Error::Config("convergence_tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Size of the trailing window used for the early-exit check.
const CONVERGENCE_WINDOW: usize = 50;

#[derive(Debug, Clone)]
pub struct EncodeStats {
    /// Final per-voxel loss (data term + regularizer), index-ordered.
    pub per_voxel_loss: Vec<(VoxelIndex, f64)>,
    /// Voxels without any sample in their extended field; their codes kept
    /// the allocation-time initialization.
    pub empty_voxels: Vec<VoxelIndex>,
    pub mean_loss: f64,
    pub total_iterations: usize,
}

/// MAP encoding of a scene: every allocated voxel's code is optimized
/// independently with Adam over its extended-field samples.
///
/// Zero iterations leave all codes unchanged (and report their current loss).
pub fn encode_scene<T: Real>(
    decoder: &Decoder<T>,
    grid: &mut LatentGrid<T>,
    samples: &[SdfSample],
    config: &EncodeConfig,
) -> Result<EncodeStats> {
    config.validate()?;
    if grid.code_dim() != decoder.code_dim() {
        return Err(Error::Config(format!(
            "grid code_dim {} does not match decoder code_dim {}",
            grid.code_dim(),
            decoder.code_dim()
        )));
    }
    let assignments = assign_local_samples(grid, samples, &decoder.encoding);
    let reg_weight = config.reg_weight();

    let voxels: Vec<VoxelIndex> = grid.indices();
    let jobs: Vec<(VoxelIndex, Vec<T>, &Vec<LocalSample<T>>)> = voxels
        .iter()
        .map(|idx| {
            let code = grid.code(*idx).expect("allocated").clone();
            (*idx, code, assignments.get(idx).expect("assigned"))
        })
        .collect();

    let results: Vec<(VoxelIndex, Vec<T>, f64, usize, bool)> = jobs
        .into_par_iter()
        .map(|(idx, mut code, locals)| {
            let mut scratch = DecodeScratch::new();
            if locals.is_empty() {
                let l = loss(decoder, &code, locals, reg_weight, &mut scratch);
                return (idx, code, l, 0, true);
            }
            let mut adam = AdamState::<T>::new(code.len(), config.lr);
            let mut rng = ChaCha8Rng::seed_from_u64(voxel_seed(config.seed, idx));
            let mut cg = vec![T::zero(); code.len()];
            let mut igb = Vec::new();
            let mut window: Vec<f64> = Vec::with_capacity(CONVERGENCE_WINDOW + 1);
            let mut iters = 0usize;
            for _ in 0..config.iterations {
                let picked: Vec<LocalSample<T>> = if locals.len() <= config.samples_per_step {
                    locals.clone()
                } else {
                    index_sample(&mut rng, locals.len(), config.samples_per_step)
                        .iter()
                        .map(|i| locals[i])
                        .collect()
                };
                let l = loss_and_grads(
                    decoder,
                    &code,
                    &picked,
                    reg_weight,
                    None,
                    &mut cg,
                    &mut scratch,
                    &mut igb,
                );
                if !l.is_finite() {
                    return (idx, code, l, iters, false);
                }
                adam.step(&mut code, &cg);
                iters += 1;
                window.push(l);
                if config.early_exit && window.len() > CONVERGENCE_WINDOW {
                    let old = window[window.len() - 1 - CONVERGENCE_WINDOW];
                    if old - l < config.convergence_tol {
                        break;
                    }
                }
            }
            let final_loss = loss(decoder, &code, locals, reg_weight, &mut scratch);
            (idx, code, final_loss, iters, false)
        })
        .collect();

    let mut stats = EncodeStats {
        per_voxel_loss: Vec::with_capacity(results.len()),
        empty_voxels: Vec::new(),
        mean_loss: 0.0,
        total_iterations: 0,
    };
    let mut loss_sum = 0.0;
    for (idx, code, l, iters, empty) in results {
        if !l.is_finite() {
            return Err(Error::Numerical(format!(
                "encoding diverged in voxel {idx:?}: loss {l}"
            )));
        }
        grid.set_code(idx, code)?;
        stats.per_voxel_loss.push((idx, l));
        stats.total_iterations += iters;
        loss_sum += l;
        if empty {
            stats.empty_voxels.push(idx);
        }
    }
    stats.mean_loss = loss_sum / stats.per_voxel_loss.len().max(1) as f64;
    Ok(stats)
}

fn voxel_seed(seed: u64, idx: VoxelIndex) -> u64 {
    let mut h = seed ^ 0x5eed_c0de_5eed_c0de;
    for v in [idx.i, idx.j, idx.k] {
        h ^= (v as u32 as u64)
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
    }
    h
}

/// Indicator-rule SDF query: decode with the containing voxel's code in its
/// normalized local frame; `None` outside the allocated set.
pub fn query_sdf<T: Real>(
    decoder: &Decoder<T>,
    grid: &LatentGrid<T>,
    scratch: &mut DecodeScratch<T>,
    world_pos: Vec3,
) -> Option<f64> {
    let idx = grid.voxel_for_query(world_pos)?;
    let code = grid.code(idx)?;
    let local = grid.to_local_normalized(idx, world_pos);
    Some(decoder.decode(scratch, code, &local))
}

/// Shared immutable view of an encoded scene implementing the SDF-source
/// closure shape used by `meshing::extract`.
pub struct GridSdf<'a, T> {
    pub decoder: &'a Decoder<T>,
    pub grid: &'a LatentGrid<T>,
}

impl<T: Real> GridSdf<'_, T> {
    pub fn sample(&self, p: Vec3) -> Option<f64> {
        let mut scratch = DecodeScratch::new();
        query_sdf(self.decoder, self.grid, &mut scratch, p)
    }
}

/// Cross-face decode disagreement: for pairs of allocated voxels sharing a
/// face, sample points on that face and decode them from both sides. Returns
/// all |difference| values (scene units).
pub fn boundary_disagreement<T: Real>(
    decoder: &Decoder<T>,
    grid: &LatentGrid<T>,
    points_per_face: usize,
    seed: u64,
) -> Vec<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scratch = DecodeScratch::new();
    let mut out = Vec::new();
    let v = grid.voxel_size();
    for (idx, code_a) in grid.iter() {
        // Positive-direction neighbors only, so each face is visited once.
        for axis in 0..3 {
            let mut nb = *idx;
            match axis {
                0 => nb.i += 1,
                1 => nb.j += 1,
                _ => nb.k += 1,
            }
            let Some(code_b) = grid.code(nb) else { continue };
            let base = grid.center(*idx);
            for _ in 0..points_per_face {
                // A point on the shared face.
                let mut p = [
                    base[0] + rng.random_range(-0.5..0.5) * v,
                    base[1] + rng.random_range(-0.5..0.5) * v,
                    base[2] + rng.random_range(-0.5..0.5) * v,
                ];
                p[axis] = base[axis] + 0.5 * v;
                let la = grid.to_local_normalized(*idx, p);
                let lb = grid.to_local_normalized(nb, p);
                let da = decoder.decode(&mut scratch, code_a, &la);
                let db = decoder.decode(&mut scratch, code_b, &lb);
                out.push((da - db).abs());
            }
        }
    }
    out
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
