//! Planar receptive-field sweep: how far beyond its own cell should a latent
//! code see during training? Reports test SDF error per radius and writes
//! contour images.
//!
//! Run with: `cargo run --release --example receptive_field_2d`

use localsdf::demo2d::{run_sweep, Demo2dConfig};

fn main() -> localsdf::Result<()> {
    let out_dir = std::path::Path::new("examples_out/demo2d");
    let cfg = Demo2dConfig::default();
    println!(
        "sweeping receptive-field radii {:?} (cell size {} px)...",
        cfg.radius_factors, cfg.cell_size
    );
    let result = run_sweep(&cfg, Some(out_dir))?;
    println!("{} active cells", result.active_cells);
    for o in &result.outcomes {
        println!(
            "radius {:.2} x cell: test error {:.4} px",
            o.radius_factor, o.test_error_px
        );
    }
    println!("contour images in {}", out_dir.display());
    Ok(())
}
