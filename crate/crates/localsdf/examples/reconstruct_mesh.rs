//! Extract a mesh from an encoded latent grid with masked marching cubes.
//!
//! Run with: `cargo run --release --example reconstruct_mesh`
//! Expects `examples_out/blob.dls` from the `encode_shape` example (runs it
//! implicitly via the library when missing), then writes `blob.obj`.

use localsdf::inference::GridSdf;
use localsdf::meshing::{extract, ExtractionConfig};
use localsdf::pipeline::grid_region;
use localsdf::{io, Error};

fn main() -> localsdf::Result<()> {
    let out_dir = std::path::Path::new("examples_out");
    let grid_path = out_dir.join("blob.dls");
    if !grid_path.exists() {
        return Err(Error::Data(format!(
            "{} not found: run the encode_shape example first",
            grid_path.display()
        )));
    }
    let ckpt = io::load_checkpoint(&grid_path)?;
    let grid = ckpt
        .grid
        .ok_or_else(|| Error::Data("checkpoint holds no grid".into()))?;
    let source = GridSdf {
        decoder: &ckpt.decoder,
        grid: &grid,
    };
    let cfg = ExtractionConfig::new(grid.voxel_size() / 8.0);
    let (mesh, stats) = extract(&|p| source.sample(p), grid_region(&grid), &[], &cfg);
    println!(
        "extracted {} vertices / {} triangles ({} cells had no field)",
        mesh.vertices.len(),
        mesh.triangles.len(),
        stats.unavailable_cells
    );
    let out = out_dir.join("blob.obj");
    io::save_mesh(&mesh, &out)?;
    println!("mesh: {}", out.display());
    Ok(())
}
