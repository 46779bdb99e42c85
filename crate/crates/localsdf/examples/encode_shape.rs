//! Encode a held-out blobby shape with a primitive-trained prior and report
//! the near-surface SDF error against the analytic ground truth.
//!
//! Run with: `cargo run --release --example encode_shape`
//! Reuses `examples_out/prior.dls` when present (run the `train_prior`
//! example first to avoid retraining here).

use localsdf::decoder::DecodeScratch;
use localsdf::inference::{encode_scene, query_sdf, EncodeConfig};
use localsdf::latent_grid::LatentGrid;
use localsdf::math::normalize;
use localsdf::metrics::sdf_rmse_relative;
use localsdf::pipeline::{run_train_prior, TrainPriorParams};
use localsdf::sampling::{sample_scene_sdf, scene_bounds, scene_sdf, SceneSampleConfig};
use localsdf::training::surface_positions;
use localsdf::{io, synth};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> localsdf::Result<()> {
    let out_dir = std::path::Path::new("examples_out");
    std::fs::create_dir_all(out_dir)?;
    let ckpt_path = out_dir.join("prior.dls");
    if !ckpt_path.exists() {
        println!("no prior checkpoint found; training a small one first...");
        run_train_prior(&TrainPriorParams {
            primitives: 60,
            scenes: 2,
            extent: 1.0,
            voxel_size: 0.05,
            code_dim: 64,
            hidden_dim: 128,
            steps: 4000,
            surface_samples_per_scene: 40_000,
            uniform_samples_per_scene: 10_000,
            seed: 1,
            out: ckpt_path.clone(),
            ..TrainPriorParams::default()
        })?;
    }
    let decoder = io::load_checkpoint(&ckpt_path)?.decoder;
    let voxel = decoder.encoding.encode_span / 2.0;

    // A smooth union of spheres/ellipsoids the prior has never seen.
    let shapes = synth::blobby_shape(0.5, 42);
    let samples = sample_scene_sdf(
        &shapes,
        &SceneSampleConfig {
            n_surface: 60_000,
            n_uniform: 15_000,
            sigma_near: 0.25 * voxel,
            sigma_far: 1.0 * voxel,
            truncation: decoder.encoding.truncation,
            seed: 7,
        },
    )?;

    let mut grid = LatentGrid::<f32>::new([-0.5, -0.5, -0.5], voxel, decoder.code_dim(), 7)?;
    grid.allocate(&surface_positions(&samples, decoder.encoding.truncation));
    println!("allocated {} voxels", grid.len());
    let stats = encode_scene(&decoder, &mut grid, &samples, &EncodeConfig::default())?;
    println!("mean per-voxel loss {:.5}", stats.mean_loss);

    // Probe the field near the surface and compare with the analytic SDF.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut probes = Vec::new();
    while probes.len() < 20_000 {
        let dir = normalize([
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ]);
        let r = rng.random_range(0.0..0.4);
        let p = [dir[0] * r, dir[1] * r, dir[2] * r];
        if scene_sdf(&shapes, p).abs() <= 0.25 * voxel {
            probes.push(p);
        }
    }
    let diag = scene_bounds(&shapes).diagonal();
    let rmse = sdf_rmse_relative(
        |p| {
            let mut scratch = DecodeScratch::new();
            query_sdf(&decoder, &grid, &mut scratch, p)
        },
        |p| scene_sdf(&shapes, p),
        &probes,
        diag,
    )?;
    println!(
        "near-surface SDF RMSE: {:.4}% of the bounding-box diagonal ({:.2} mm)",
        rmse * 100.0,
        rmse * diag * 1000.0
    );
    io::save_checkpoint::<f32>(&out_dir.join("blob.dls"), &decoder, None, Some(&grid))?;
    println!("encoded grid: {}", out_dir.join("blob.dls").display());
    Ok(())
}
