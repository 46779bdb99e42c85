//! Depth frames: pinhole rendering of synthetic scenes, backprojection,
//! normal estimation, and SDF sample extraction.
//!
//! Depth is the camera-space z of the hit point (projective depth), 0 where
//! no surface was hit. Pixel (u, v) spans the continuous square
//! [u, u+1) x [v, v+1); its ray passes through (u + 0.5, v + 0.5).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{weight_for_depth, SdfSample};
use crate::error::{Error, Result};
use crate::math::{add, cross, dist, dot, normalize, scale, sub, RigidTransform, Vec3};
use crate::mesh::TriangleMesh;
use crate::sampling::mesh_sdf::ray_triangle;
use crate::sampling::primitives::{scene_sdf, PrimitiveShape};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    /// Symmetric camera with the given horizontal field of view (radians).
    pub fn with_fov(width: u32, height: u32, fov_x: f64) -> Self {
        let fx = width as f64 / (2.0 * (fov_x / 2.0).tan());
        Self {
            width,
            height,
            fx,
            fy: fx,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }
}

/// A dense depth image with intrinsics and camera-to-world pose.
///
/// Stored in `f32` end to end so file round trips are bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub width: u32,
    pub height: u32,
    pub fx: f32,
    pub fy: f32,
    pub cx: f32,
    pub cy: f32,
    /// Row-major 4x4 camera-to-world matrix.
    pub pose: [f32; 16],
    /// Row-major depth, `width * height` entries, 0 = invalid.
    pub depth: Vec<f32>,
}

impl DepthFrame {
    pub fn new(intrinsics: &CameraIntrinsics, pose: &RigidTransform) -> Result<Self> {
        if intrinsics.width == 0 || intrinsics.height == 0 {
            return Err(Error::Config("depth frame must not be 0x0".into()));
        }
        if !(intrinsics.fx > 0.0 && intrinsics.fy > 0.0) {
            return Err(Error::Config("focal lengths must be positive".into()));
        }
        let mut mat = [0.0f32; 16];
        for r in 0..3 {
            for c in 0..3 {
                mat[r * 4 + c] = pose.rotation[r][c] as f32;
            }
            mat[r * 4 + 3] = pose.translation[r] as f32;
        }
        mat[15] = 1.0;
        Ok(Self {
            width: intrinsics.width,
            height: intrinsics.height,
            fx: intrinsics.fx as f32,
            fy: intrinsics.fy as f32,
            cx: intrinsics.cx as f32,
            cy: intrinsics.cy as f32,
            pose: mat,
            depth: vec![0.0; (intrinsics.width * intrinsics.height) as usize],
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Format("depth frame must not be 0x0".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Format("focal lengths must be positive".into()));
        }
        if self.depth.len() != (self.width * self.height) as usize {
            return Err(Error::Format(format!(
                "depth buffer has {} entries for {}x{}",
                self.depth.len(),
                self.width,
                self.height
            )));
        }
        if self.depth.iter().any(|d| *d < 0.0 || !d.is_finite()) {
            return Err(Error::Format("depth values must be finite and >= 0".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn depth_at(&self, u: u32, v: u32) -> f32 {
        self.depth[(v * self.width + u) as usize]
    }

    #[inline]
    pub fn set_depth(&mut self, u: u32, v: u32, z: f32) {
        self.depth[(v * self.width + u) as usize] = z;
    }

    pub fn pose_transform(&self) -> RigidTransform {
        let m = &self.pose;
        RigidTransform {
            rotation: [
                [m[0] as f64, m[1] as f64, m[2] as f64],
                [m[4] as f64, m[5] as f64, m[6] as f64],
                [m[8] as f64, m[9] as f64, m[10] as f64],
            ],
            translation: [m[3] as f64, m[7] as f64, m[11] as f64],
        }
    }

    pub fn camera_position(&self) -> Vec3 {
        [self.pose[3] as f64, self.pose[7] as f64, self.pose[11] as f64]
    }

    /// Camera-space ray direction through pixel (u, v), unnormalized (z = 1).
    #[inline]
    pub fn ray_dir_cam(&self, u: u32, v: u32) -> Vec3 {
        [
            (u as f64 + 0.5 - self.cx as f64) / self.fx as f64,
            (v as f64 + 0.5 - self.cy as f64) / self.fy as f64,
            1.0,
        ]
    }

    /// World point of pixel (u, v) at camera-space depth `z`.
    pub fn backproject(&self, u: u32, v: u32, z: f64) -> Vec3 {
        let d = self.ray_dir_cam(u, v);
        self.pose_transform().apply(scale(d, z))
    }

    /// Backprojected world points of all valid pixels.
    pub fn valid_points(&self) -> Vec<Vec3> {
        let pose = self.pose_transform();
        let mut out = Vec::new();
        for v in 0..self.height {
            for u in 0..self.width {
                let z = self.depth_at(u, v) as f64;
                if z > 0.0 {
                    out.push(pose.apply(scale(self.ray_dir_cam(u, v), z)));
                }
            }
        }
        out
    }
}

fn render_rows<F>(intrinsics: &CameraIntrinsics, pose: &RigidTransform, hit_z: F) -> Result<DepthFrame>
where
    F: Fn(Vec3, Vec3) -> f64 + Sync,
{
    let mut frame = DepthFrame::new(intrinsics, pose)?;
    let width = intrinsics.width;
    let origin = pose.translation;
    let rows: Vec<Vec<f32>> = (0..intrinsics.height)
        .into_par_iter()
        .map(|v| {
            let mut row = vec![0.0f32; width as usize];
            for (u, out) in row.iter_mut().enumerate() {
                let dir_cam = [
                    (u as f64 + 0.5 - intrinsics.cx) / intrinsics.fx,
                    (v as f64 + 0.5 - intrinsics.cy) / intrinsics.fy,
                    1.0,
                ];
                let dir_world = pose.rotate(dir_cam);
                let z = hit_z(origin, dir_world);
                *out = z as f32;
            }
            row
        })
        .collect();
    for (v, row) in rows.into_iter().enumerate() {
        let base = v * width as usize;
        frame.depth[base..base + width as usize].copy_from_slice(&row);
    }
    Ok(frame)
}

/// Ray-cast a primitive scene into a depth frame by sphere tracing.
/// Returns camera-space z per pixel, 0 where nothing is hit within `max_range`.
pub fn render_depth_primitives(
    shapes: &[PrimitiveShape],
    intrinsics: &CameraIntrinsics,
    pose: &RigidTransform,
    max_range: f64,
) -> Result<DepthFrame> {
    render_rows(intrinsics, pose, |origin, dir_world| {
        if shapes.is_empty() {
            return 0.0;
        }
        // dir_world has |dir_cam| length; normalize for marching, remember
        // the camera-space z component per unit of ray length.
        let len = crate::math::norm(dir_world);
        let dir = scale(dir_world, 1.0 / len);
        let z_per_t = 1.0 / len; // dir_cam z == 1
        let mut t = 0.0;
        for _ in 0..256 {
            let p = add(origin, scale(dir, t));
            let d = scene_sdf(shapes, p);
            if d < 1e-7 * max_range {
                return (t * z_per_t).max(0.0);
            }
            t += d;
            if t > max_range {
                return 0.0;
            }
        }
        0.0
    })
}

/// Ray-cast a triangle mesh into a depth frame (closest hit per pixel).
pub fn render_depth_mesh(
    mesh: &TriangleMesh,
    intrinsics: &CameraIntrinsics,
    pose: &RigidTransform,
    max_range: f64,
) -> Result<DepthFrame> {
    let tris: Vec<[Vec3; 3]> = (0..mesh.triangles.len())
        .map(|t| mesh.triangle_vertices(t))
        .collect();
    render_rows(intrinsics, pose, |origin, dir_world| {
        let len = crate::math::norm(dir_world);
        let dir = scale(dir_world, 1.0 / len);
        let mut best = f64::INFINITY;
        for [a, b, c] in &tris {
            if let Some(t) = ray_triangle(origin, dir, *a, *b, *c) {
                best = best.min(t);
            }
        }
        if best.is_finite() && best <= max_range {
            best / len // camera z = t * (1/|dir_cam|)
        } else {
            0.0
        }
    })
}

/// Settings for [`samples_from_depth`].
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DepthSampleConfig {
    /// Offset of the +/- samples along the estimated surface normal.
    pub displacement: f64,
    /// Spacing of free-space samples along each observation ray.
    pub free_space_step: f64,
    pub truncation: f64,
    /// Reference depth for the inverse-depth weighting.
    pub weight_ref_depth: f64,
}

impl DepthSampleConfig {
    /// Metric-scene defaults: 1.5 cm displacement.
    pub fn metric(truncation: f64, free_space_step: f64) -> Self {
        Self {
            displacement: 0.015,
            free_space_step,
            truncation,
            weight_ref_depth: 1.0,
        }
    }
}

/// Turn one depth frame into SDF samples.
///
/// Per valid pixel (positive depth, interior, with valid 4-neighborhood):
/// a zero-SDF sample at the backprojected point, one displaced `+d` along the
/// outward normal with sdf `+d`, one at `-d` with sdf `-d`, and free-space
/// samples along the ray from the camera stopping one truncation short of the
/// surface. Normals come from central differences of backprojected points,
/// oriented toward the camera. All samples of a pixel share the inverse-depth
/// weight.
pub fn samples_from_depth(frame: &DepthFrame, cfg: &DepthSampleConfig) -> Result<Vec<SdfSample>> {
    frame.validate()?;
    if !(cfg.displacement > 0.0 && cfg.free_space_step > 0.0 && cfg.truncation > 0.0) {
        return Err(Error::Config(
            "displacement, free_space_step, and truncation must be positive".into(),
        ));
    }
    let pose = frame.pose_transform();
    let cam = pose.translation;
    let mut out = Vec::new();
    if frame.width < 3 || frame.height < 3 {
        return Ok(out);
    }
    let point_at = |u: u32, v: u32| -> Option<Vec3> {
        let z = frame.depth_at(u, v) as f64;
        if z > 0.0 {
            Some(pose.apply(scale(frame.ray_dir_cam(u, v), z)))
        } else {
            None
        }
    };
    for v in 1..frame.height - 1 {
        for u in 1..frame.width - 1 {
            let z = frame.depth_at(u, v) as f64;
            if z <= 0.0 {
                continue;
            }
            let (Some(px), Some(mx), Some(py), Some(my)) = (
                point_at(u + 1, v),
                point_at(u - 1, v),
                point_at(u, v + 1),
                point_at(u, v - 1),
            ) else {
                continue;
            };
            let p = pose.apply(scale(frame.ray_dir_cam(u, v), z));
            let n_raw = cross(sub(px, mx), sub(py, my));
            if crate::math::norm(n_raw) < 1e-12 {
                continue;
            }
            let mut n = normalize(n_raw);
            if dot(n, sub(cam, p)) < 0.0 {
                n = scale(n, -1.0);
            }
            let w = weight_for_depth(z, cfg.weight_ref_depth)?;
            out.push(SdfSample {
                position: p,
                sdf: 0.0,
                weight: w,
            });
            out.push(SdfSample {
                position: add(p, scale(n, cfg.displacement)),
                sdf: cfg.displacement,
                weight: w,
            });
            out.push(SdfSample {
                position: sub(p, scale(n, cfg.displacement)),
                sdf: -cfg.displacement,
                weight: w,
            });
            // Free-space samples along the ray, one truncation short of the hit.
            let ray = sub(p, cam);
            let t_hit = crate::math::norm(ray);
            let dir = scale(ray, 1.0 / t_hit);
            let mut t = cfg.free_space_step;
            while t < t_hit - cfg.truncation {
                out.push(SdfSample {
                    position: add(cam, scale(dir, t)),
                    sdf: (t_hit - t).min(cfg.truncation),
                    weight: w,
                });
                t += cfg.free_space_step;
            }
        }
    }
    Ok(out)
}

/// Additive Gaussian noise on valid depths (invalid pixels stay invalid).
/// Noisy depths are clamped to stay positive.
pub fn add_depth_noise(frame: &DepthFrame, sigma: f64, seed: u64) -> DepthFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite");
    let mut out = frame.clone();
    for d in &mut out.depth {
        if *d > 0.0 {
            let noisy = *d as f64 + normal.sample(&mut rng);
            *d = noisy.max(1e-4) as f32;
        }
    }
    out
}

/// Euclidean distance between each valid depth point and the camera center
/// (used by extraction-mask construction). Equals depth only for the center ray.
pub fn ray_lengths(frame: &DepthFrame) -> Vec<f64> {
    let cam = frame.camera_position();
    frame.valid_points().iter().map(|p| dist(*p, cam)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RigidTransform;
    use crate::sampling::primitives::PrimitiveKind;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::with_fov(64, 48, 60f64.to_radians())
    }

    fn sphere_scene() -> Vec<PrimitiveShape> {
        vec![PrimitiveShape::new(
            PrimitiveKind::Sphere { radius: 1.0 },
            RigidTransform::identity(),
        )]
    }

    #[test]
    fn center_pixel_depth_is_distance_minus_radius() {
        let cam_pose = RigidTransform::look_at([0.0, 0.0, -3.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let frame = render_depth_primitives(&sphere_scene(), &camera(), &cam_pose, 10.0).unwrap();
        let z = frame.depth_at(32, 24) as f64;
        assert!((z - 2.0).abs() < 1e-3, "center depth {z}, want 2");
    }

    #[test]
    fn empty_scene_renders_all_zero() {
        let cam_pose = RigidTransform::identity();
        let frame = render_depth_primitives(&[], &camera(), &cam_pose, 10.0).unwrap();
        assert!(frame.depth.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn translating_camera_shifts_center_depth() {
        let p1 = RigidTransform::look_at([0.0, 0.0, -3.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let p2 = RigidTransform::look_at([0.0, 0.0, -2.9], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let f1 = render_depth_primitives(&sphere_scene(), &camera(), &p1, 10.0).unwrap();
        let f2 = render_depth_primitives(&sphere_scene(), &camera(), &p2, 10.0).unwrap();
        let d1 = f1.depth_at(32, 24) as f64;
        let d2 = f2.depth_at(32, 24) as f64;
        assert!((d1 - d2 - 0.1).abs() < 1e-4, "{d1} - {d2} != 0.1");
    }

    /// Head-on plane: displaced samples must sit at z = 2 -/+ d with sdf +/- d.
    #[test]
    fn plane_frame_produces_symmetric_displaced_samples() {
        // A thin box acting as the plane z = 2 (front face at z = 2).
        let plane = vec![PrimitiveShape::new(
            PrimitiveKind::Box {
                half_extents: [10.0, 10.0, 0.5],
            },
            RigidTransform {
                rotation: crate::math::MAT3_IDENTITY,
                translation: [0.0, 0.0, 2.5],
            },
        )];
        let pose = RigidTransform::identity(); // camera at origin looking +z
        let frame = render_depth_primitives(&plane, &camera(), &pose, 10.0).unwrap();
        let cfg = DepthSampleConfig {
            displacement: 0.05,
            free_space_step: 0.25,
            truncation: 0.2,
            weight_ref_depth: 2.0,
        };
        let samples = samples_from_depth(&frame, &cfg).unwrap();
        assert!(!samples.is_empty());
        let mut checked = 0;
        for s in &samples {
            if (s.sdf - 0.05).abs() < 1e-12 {
                assert!((s.position[2] - 1.95).abs() < 2e-3, "+d at z {}", s.position[2]);
                checked += 1;
            } else if (s.sdf + 0.05).abs() < 1e-12 {
                assert!((s.position[2] - 2.05).abs() < 2e-3, "-d at z {}", s.position[2]);
                checked += 1;
            }
        }
        assert!(checked > 100);
        // Non-free-space samples carry |sdf| in {0, d}; free-space ones equal
        // the truncation by the clamp rule.
        for s in &samples {
            let a = s.sdf.abs();
            assert!(
                a < 1e-12 || (a - 0.05).abs() < 1e-12 || (a - 0.2).abs() < 1e-12,
                "unexpected sdf {}",
                s.sdf
            );
        }
        assert!(samples.iter().any(|s| (s.sdf - 0.2).abs() < 1e-12));
    }

    #[test]
    fn sample_count_matches_construction() {
        let plane = vec![PrimitiveShape::new(
            PrimitiveKind::Box {
                half_extents: [10.0, 10.0, 0.5],
            },
            RigidTransform {
                rotation: crate::math::MAT3_IDENTITY,
                translation: [0.0, 0.0, 2.5],
            },
        )];
        let pose = RigidTransform::identity();
        let frame = render_depth_primitives(&plane, &camera(), &pose, 10.0).unwrap();
        let cfg = DepthSampleConfig {
            displacement: 0.05,
            free_space_step: 0.25,
            truncation: 0.2,
            weight_ref_depth: 2.0,
        };
        let samples = samples_from_depth(&frame, &cfg).unwrap();
        let surface = samples.iter().filter(|s| s.sdf.abs() < 0.2 - 1e-9).count() / 2
            + samples.iter().filter(|s| s.sdf == 0.0).count() / 2;
        // Every valid pixel contributes exactly 3 band samples.
        let zero = samples.iter().filter(|s| s.sdf == 0.0).count();
        let plus = samples.iter().filter(|s| (s.sdf - 0.05).abs() < 1e-12).count();
        let minus = samples.iter().filter(|s| (s.sdf + 0.05).abs() < 1e-12).count();
        assert_eq!(zero, plus);
        assert_eq!(zero, minus);
        let _ = surface;
        // Determinism.
        let again = samples_from_depth(&frame, &cfg).unwrap();
        assert_eq!(samples, again);
    }

    #[test]
    fn zero_valid_pixels_gives_empty_list() {
        let frame = DepthFrame::new(&camera(), &RigidTransform::identity()).unwrap();
        let cfg = DepthSampleConfig::metric(0.1, 0.05);
        assert!(samples_from_depth(&frame, &cfg).unwrap().is_empty());
    }

    #[test]
    fn noise_preserves_invalid_pixels() {
        let plane = sphere_scene();
        let pose = RigidTransform::look_at([0.0, 0.0, -3.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let frame = render_depth_primitives(&plane, &camera(), &pose, 10.0).unwrap();
        let noisy = add_depth_noise(&frame, 0.01, 3);
        for (a, b) in frame.depth.iter().zip(&noisy.depth) {
            if *a == 0.0 {
                assert_eq!(*b, 0.0);
            } else {
                assert!(*b > 0.0);
            }
        }
    }
}
