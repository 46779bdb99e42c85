//! Train a small shape prior on random primitive scenes and save it.
//!
//! Run with: `cargo run --release --example train_prior`
//! Writes `examples_out/prior.dls` plus a loss curve CSV and a run manifest.
//! This is a scaled-down configuration that finishes in about a minute; see
//! the README for the full-scale settings.

use localsdf::pipeline::{run_train_prior, TrainPriorParams};

fn main() -> localsdf::Result<()> {
    let out_dir = std::path::Path::new("examples_out");
    std::fs::create_dir_all(out_dir)?;
    let params = TrainPriorParams {
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
        out: out_dir.join("prior.dls"),
        ..TrainPriorParams::default()
    };
    let outcome = run_train_prior(&params)?;
    println!(
        "trained on {} patches in {} steps, final loss {:.5} ({:.1} s)",
        outcome.patches,
        outcome.steps_run,
        outcome.final_loss,
        outcome.wall_ms as f64 / 1e3
    );
    println!("checkpoint: {}", outcome.checkpoint.display());
    println!("loss curve: {}", outcome.loss_csv.display());
    println!("manifest:   {}", outcome.manifest.display());
    Ok(())
}
