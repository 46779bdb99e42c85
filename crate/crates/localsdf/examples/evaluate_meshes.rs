//! Metric comparison of two meshes: Chamfer, mesh accuracy (90th percentile),
//! and completion at a 7 mm threshold.
//!
//! Run with: `cargo run --release --example evaluate_meshes`
//! Generates an icosphere ground truth and a slightly perturbed prediction.

use localsdf::math::normalize;
use localsdf::metrics::{chamfer, completion, mesh_accuracy};
use localsdf::pipeline::sample_surface_points;
use localsdf::synth::icosphere;

fn main() -> localsdf::Result<()> {
    let gt = icosphere(0.25, 4);
    // Prediction: the same sphere with a small radial bump.
    let mut pred = icosphere(0.25, 3);
    for v in &mut pred.vertices {
        let n = normalize(*v);
        let bump = 0.003 * (v[0] * 40.0).sin();
        for a in 0..3 {
            v[a] += n[a] * bump;
        }
    }
    let gt_pts = sample_surface_points(&gt, 30_000, 1)?;
    let pred_pts = sample_surface_points(&pred, 30_000, 2)?;

    let cd = chamfer(&pred_pts, &gt_pts)?;
    let acc = mesh_accuracy(&pred_pts, &gt_pts)?;
    let comp = completion(&gt_pts, &pred_pts, 0.007)?;
    println!("chamfer (squared, x1e3): {:.6}", cd * 1e3);
    println!("mesh accuracy p90:       {:.5} m", acc);
    println!("completion @ 7 mm:       {:.4}", comp);
    Ok(())
}
