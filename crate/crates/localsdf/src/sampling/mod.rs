//! Sample generation: (position, truncated SDF, weight) triples from analytic
//! primitives, triangle meshes, and depth frames.

pub mod depth;
pub mod mesh_sdf;
pub mod primitives;

pub use depth::{
    add_depth_noise, render_depth_mesh, render_depth_primitives, samples_from_depth,
    CameraIntrinsics, DepthFrame, DepthSampleConfig,
};
pub use mesh_sdf::{sample_mesh, MeshSdf};
pub use primitives::{sample_scene_sdf, scene_bounds, scene_sdf, PrimitiveKind, PrimitiveShape, SceneSampleConfig};

use crate::error::{Error, Result};
use crate::math::Vec3;

/// One observation of the field: a position, the truncated SDF there, and a
/// confidence weight in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfSample {
    pub position: Vec3,
    pub sdf: f64,
    pub weight: f64,
}

/// Smallest weight assigned by [`weight_for_depth`].
pub const MIN_DEPTH_WEIGHT: f64 = 0.05;

/// Inverse-depth confidence: `clamp(z_ref / z, 0.05, 1)`. Closer observations
/// weigh more, following the usual fusion weighting.
pub fn weight_for_depth(z: f64, z_ref: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Data(format!("depth must be positive, got {z}")));
    }
    if !(z_ref > 0.0) {
        return Err(Error::Data(format!(
            "reference depth must be positive, got {z_ref}"
        )));
    }
    Ok((z_ref / z).clamp(MIN_DEPTH_WEIGHT, 1.0))
}
