//! Classical TSDF fusion baseline: render a synthetic scan set of a primitive
//! scene, fuse the depth frames into a truncated SDF volume, and extract the
//! mesh.
//!
//! Run with: `cargo run --release --example tsdf_fusion`

use localsdf::math::{Aabb, RigidTransform, MAT3_IDENTITY};
use localsdf::meshing::{extract, ExtractionConfig};
use localsdf::pipeline::fuse_frames;
use localsdf::sampling::{render_depth_primitives, PrimitiveKind, PrimitiveShape};
use localsdf::{io, synth};

fn main() -> localsdf::Result<()> {
    let out_dir = std::path::Path::new("examples_out");
    std::fs::create_dir_all(out_dir)?;
    let shapes = vec![
        PrimitiveShape::new(
            PrimitiveKind::Box {
                half_extents: [0.18, 0.12, 0.15],
            },
            RigidTransform::from_axis_angle([0.0, 1.0, 0.0], 0.4, [0.0, 0.0, 0.0]),
        ),
        PrimitiveShape::new(
            PrimitiveKind::Sphere { radius: 0.1 },
            RigidTransform {
                rotation: MAT3_IDENTITY,
                translation: [0.0, 0.2, 0.0],
            },
        ),
    ];
    let cam = synth::default_camera(160, 120);
    let mut frames = Vec::new();
    for (i, pose) in synth::camera_ring([0.0; 3], 1.0, 10).iter().enumerate() {
        let frame = render_depth_primitives(&shapes, &cam, pose, 4.0)?;
        io::save_depth(&frame, &out_dir.join(format!("scan_{i:02}.dlsd")))?;
        frames.push(frame);
    }
    println!("rendered {} depth frames", frames.len());

    let voxel = 0.01;
    let vol = fuse_frames(&frames, voxel, 3.0, 1.0, None)?;
    println!("fused volume: {} observed voxels", vol.observed_voxel_count());

    let region = Aabb::new([-0.4, -0.4, -0.4], [0.4, 0.45, 0.4]);
    let (mesh, _) = extract(&|p| vol.query(p), region, &[], &ExtractionConfig::new(voxel));
    println!(
        "fusion mesh: {} vertices / {} triangles",
        mesh.vertices.len(),
        mesh.triangles.len()
    );
    let out = out_dir.join("fusion.obj");
    io::save_mesh(&mesh, &out)?;
    println!("mesh: {}", out.display());
    Ok(())
}
