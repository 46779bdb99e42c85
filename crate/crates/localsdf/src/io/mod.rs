//! File formats: checkpoints, meshes (OBJ/PLY), depth frames, CSV reports,
//! and PPM images.
//!
//! Binary formats are little-endian with magic + version headers; loaders
//! validate and reject rather than guess. Round trips are bit-exact.

pub mod checkpoint;
pub mod csv_io;
pub mod depth_io;
pub mod mesh_io;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use csv_io::{
    load_samples, save_eval_report, save_loss_curve, save_radius_sweep, save_samples,
};
pub use depth_io::{load_depth, save_depth};
pub use mesh_io::{load_mesh, load_obj, load_ply, save_mesh, save_obj, save_ply};

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Minimal binary PPM (P6) writer for diagnostic images.
pub fn save_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    assert_eq!(rgb.len(), width * height * 3);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P6\n{width} {height}\n255\n")?;
    f.write_all(rgb)?;
    Ok(())
}
