//! Classical TSDF fusion baseline: projective truncated signed distances
//! integrated into a dense voxel grid with running weighted averages
//! (Curless & Levoy style).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::sampling::{weight_for_depth, DepthFrame};

/// Dense truncated-SDF volume. `tsdf` is stored in units of the truncation
/// distance (clamped to [-1, 1]); voxels with zero weight hold the
/// uninitialized sentinel 1.
#[derive(Debug, Clone)]
pub struct TsdfVolume {
    pub origin: Vec3,
    pub voxel_size: f64,
    pub dims: [usize; 3],
    pub truncation: f64,
    tsdf: Vec<f32>,
    weight: Vec<f32>,
    /// Optional cap on accumulated weight (off by default).
    pub max_weight: Option<f64>,
}

impl TsdfVolume {
    pub fn new(origin: Vec3, voxel_size: f64, dims: [usize; 3], truncation: f64) -> Result<Self> {
        if !(voxel_size > 0.0 && truncation > 0.0) {
            return Err(Error::Config(
                "voxel_size and truncation must be positive".into(),
            ));
        }
        if dims.iter().any(|d| *d == 0) {
            return Err(Error::Config("volume dims must be positive".into()));
        }
        let n = dims[0] * dims[1] * dims[2];
        Ok(Self {
            origin,
            voxel_size,
            dims,
            truncation,
            tsdf: vec![1.0; n],
            weight: vec![0.0; n],
            max_weight: None,
        })
    }

    /// Volume covering `bounds` padded by one truncation on each side, at the
    /// standard truncation of 3 voxel sizes.
    pub fn covering(bounds: crate::math::Aabb, voxel_size: f64) -> Result<Self> {
        let truncation = 3.0 * voxel_size;
        let padded = bounds.padded(truncation);
        let ext = padded.extent();
        let dims = [
            (ext[0] / voxel_size).ceil() as usize + 1,
            (ext[1] / voxel_size).ceil() as usize + 1,
            (ext[2] / voxel_size).ceil() as usize + 1,
        ];
        Self::new(padded.min, voxel_size, dims, truncation)
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    /// Voxel center in world coordinates.
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        [
            self.origin[0] + (i as f64 + 0.5) * self.voxel_size,
            self.origin[1] + (j as f64 + 0.5) * self.voxel_size,
            self.origin[2] + (k as f64 + 0.5) * self.voxel_size,
        ]
    }

    pub fn tsdf_at(&self, i: usize, j: usize, k: usize) -> f32 {
        self.tsdf[self.index(i, j, k)]
    }

    pub fn weight_at(&self, i: usize, j: usize, k: usize) -> f32 {
        self.weight[self.index(i, j, k)]
    }

    /// Fuse one depth frame: every voxel projecting onto a valid pixel with
    /// projective distance `d = depth - voxel_cam_z > -truncation` receives a
    /// weighted-average update with the inverse-depth weight.
    pub fn integrate(&mut self, frame: &DepthFrame, weight_ref_depth: f64) -> Result<()> {
        frame.validate()?;
        let world_to_cam = frame.pose_transform().inverse();
        let (fx, fy, cx, cy) = (
            frame.fx as f64,
            frame.fy as f64,
            frame.cx as f64,
            frame.cy as f64,
        );
        let dims = self.dims;
        let nxy = dims[0] * dims[1];
        let trunc = self.truncation;
        let max_weight = self.max_weight;
        let origin = self.origin;
        let voxel_size = self.voxel_size;
        // Slabs along z are independent; results are written in place.
        self.tsdf
            .par_chunks_mut(nxy)
            .zip(self.weight.par_chunks_mut(nxy))
            .enumerate()
            .for_each(|(k, (tsdf_slab, weight_slab))| {
                for j in 0..dims[1] {
                    for i in 0..dims[0] {
                        let center = [
                            origin[0] + (i as f64 + 0.5) * voxel_size,
                            origin[1] + (j as f64 + 0.5) * voxel_size,
                            origin[2] + (k as f64 + 0.5) * voxel_size,
                        ];
                        let pc = world_to_cam.apply(center);
                        if pc[2] <= 0.0 {
                            continue;
                        }
                        let uf = fx * pc[0] / pc[2] + cx;
                        let vf = fy * pc[1] / pc[2] + cy;
                        if uf < 0.0 || vf < 0.0 {
                            continue;
                        }
                        let (u, v) = (uf.floor() as u32, vf.floor() as u32);
                        if u >= frame.width || v >= frame.height {
                            continue;
                        }
                        let depth = frame.depth_at(u, v) as f64;
                        if depth <= 0.0 {
                            continue;
                        }
                        let d = depth - pc[2];
                        if d < -trunc {
                            continue; // far behind the surface: no evidence
                        }
                        let d_norm = (d / trunc).min(1.0);
                        let w_new = weight_for_depth(depth, weight_ref_depth)
                            .expect("depth checked positive");
                        let slot = j * dims[0] + i;
                        let w_old = weight_slab[slot] as f64;
                        let t_old = if w_old > 0.0 { tsdf_slab[slot] as f64 } else { 0.0 };
                        let w_sum = w_old + w_new;
                        tsdf_slab[slot] = ((w_old * t_old + w_new * d_norm) / w_sum) as f32;
                        let capped = match max_weight {
                            Some(cap) => w_sum.min(cap),
                            None => w_sum,
                        };
                        weight_slab[slot] = capped as f32;
                    }
                }
            });
        Ok(())
    }

    /// Trilinear interpolation of `tsdf * truncation` over the 8 surrounding
    /// voxel centers; `None` out of bounds or when any corner is unobserved.
    pub fn query(&self, p: Vec3) -> Option<f64> {
        let g = [
            (p[0] - self.origin[0]) / self.voxel_size - 0.5,
            (p[1] - self.origin[1]) / self.voxel_size - 0.5,
            (p[2] - self.origin[2]) / self.voxel_size - 0.5,
        ];
        let base = [g[0].floor(), g[1].floor(), g[2].floor()];
        let f = [g[0] - base[0], g[1] - base[1], g[2] - base[2]];
        let b = [base[0] as i64, base[1] as i64, base[2] as i64];
        for a in 0..3 {
            if b[a] < 0 || b[a] + 1 >= self.dims[a] as i64 {
                return None;
            }
        }
        let (i0, j0, k0) = (b[0] as usize, b[1] as usize, b[2] as usize);
        let mut value = 0.0;
        for dk in 0..2 {
            for dj in 0..2 {
                for di in 0..2 {
                    let idx = self.index(i0 + di, j0 + dj, k0 + dk);
                    if self.weight[idx] <= 0.0 {
                        return None;
                    }
                    let w = (if di == 1 { f[0] } else { 1.0 - f[0] })
                        * (if dj == 1 { f[1] } else { 1.0 - f[1] })
                        * (if dk == 1 { f[2] } else { 1.0 - f[2] });
                    value += w * self.tsdf[idx] as f64;
                }
            }
        }
        Some(value * self.truncation)
    }

    /// Centers of voxels with positive weight (diagnostics).
    pub fn observed_voxel_count(&self) -> usize {
        self.weight.iter().filter(|w| **w > 0.0).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Aabb, RigidTransform, MAT3_IDENTITY};
    use crate::sampling::{render_depth_primitives, CameraIntrinsics, PrimitiveKind, PrimitiveShape};

    fn plane_frame() -> DepthFrame {
        // Plane z = 2 via a thick box; camera at the origin looking +z.
        let plane = vec![PrimitiveShape::new(
            PrimitiveKind::Box {
                half_extents: [10.0, 10.0, 0.5],
            },
            RigidTransform {
                rotation: MAT3_IDENTITY,
                translation: [0.0, 0.0, 2.5],
            },
        )];
        let cam = CameraIntrinsics::with_fov(64, 48, 60f64.to_radians());
        render_depth_primitives(&plane, &cam, &RigidTransform::identity(), 10.0).unwrap()
    }

    #[test]
    fn plane_zero_crossing_near_surface() {
        let mut vol = TsdfVolume::new([-0.5, -0.5, 0.5], 0.05, [20, 20, 60], 0.15).unwrap();
        vol.integrate(&plane_frame(), 2.0).unwrap();
        // Walk the column of voxels through the image center.
        let i = 10;
        let j = 10;
        let mut crossing = None;
        for k in 0..59 {
            let a = vol.tsdf_at(i, j, k);
            let b = vol.tsdf_at(i, j, k + 1);
            if vol.weight_at(i, j, k) > 0.0 && vol.weight_at(i, j, k + 1) > 0.0 && a > 0.0 && b <= 0.0
            {
                crossing = Some(vol.voxel_center(i, j, k)[2]);
                break;
            }
        }
        let z = crossing.expect("no zero crossing found");
        assert!((z - 2.0).abs() < 0.05 + 1e-9, "crossing at z = {z}");
    }

    #[test]
    fn integrating_same_frame_twice_is_average_fixed_point() {
        let frame = plane_frame();
        let mut once = TsdfVolume::new([-0.5, -0.5, 0.5], 0.05, [20, 20, 60], 0.15).unwrap();
        once.integrate(&frame, 2.0).unwrap();
        let mut twice = once.clone();
        twice.integrate(&frame, 2.0).unwrap();
        for k in 0..60 {
            for j in 0..20 {
                for i in 0..20 {
                    assert_eq!(once.tsdf_at(i, j, k), twice.tsdf_at(i, j, k));
                    let (w1, w2) = (once.weight_at(i, j, k), twice.weight_at(i, j, k));
                    assert!((w2 - 2.0 * w1).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn voxels_far_behind_surface_untouched() {
        let frame = plane_frame();
        let mut vol = TsdfVolume::new([-0.25, -0.25, 0.5], 0.05, [10, 10, 80], 0.15).unwrap();
        vol.integrate(&frame, 2.0).unwrap();
        // Center column: voxels beyond z = 2 + truncation keep zero weight.
        for k in 0..80 {
            let z = vol.voxel_center(5, 5, k)[2];
            if z > 2.0 + 0.15 + 0.05 {
                assert_eq!(vol.weight_at(5, 5, k), 0.0, "voxel at z = {z} touched");
                assert_eq!(vol.tsdf_at(5, 5, k), 1.0);
            }
        }
    }

    #[test]
    fn weights_never_decrease_and_order_is_stable() {
        let frame = plane_frame();
        let f2 = {
            let cam = CameraIntrinsics::with_fov(64, 48, 60f64.to_radians());
            let pose =
                RigidTransform::look_at([0.3, 0.2, -0.1], [0.0, 0.0, 2.0], [0.0, 1.0, 0.0]);
            let plane = vec![PrimitiveShape::new(
                PrimitiveKind::Box {
                    half_extents: [10.0, 10.0, 0.5],
                },
                RigidTransform {
                    rotation: MAT3_IDENTITY,
                    translation: [0.0, 0.0, 2.5],
                },
            )];
            render_depth_primitives(&plane, &cam, &pose, 10.0).unwrap()
        };
        let mut ab = TsdfVolume::new([-0.5, -0.5, 0.5], 0.1, [10, 10, 30], 0.3).unwrap();
        let before: Vec<f32> = ab.weight.clone();
        ab.integrate(&frame, 2.0).unwrap();
        let mid: Vec<f32> = ab.weight.clone();
        for (b, m) in before.iter().zip(&mid) {
            assert!(m >= b);
        }
        ab.integrate(&f2, 2.0).unwrap();
        for (m, a) in mid.iter().zip(&ab.weight) {
            assert!(a >= m);
        }

        let mut ba = TsdfVolume::new([-0.5, -0.5, 0.5], 0.1, [10, 10, 30], 0.3).unwrap();
        ba.integrate(&f2, 2.0).unwrap();
        ba.integrate(&frame, 2.0).unwrap();
        for idx in 0..ab.tsdf.len() {
            assert!(
                (ab.tsdf[idx] - ba.tsdf[idx]).abs() < 1e-5,
                "order dependence at {idx}: {} vs {}",
                ab.tsdf[idx],
                ba.tsdf[idx]
            );
        }
    }

    #[test]
    fn query_matches_reference_trilinear() {
        use rand::Rng;
        use rand::SeedableRng;
        let frame = plane_frame();
        let mut vol = TsdfVolume::new([-0.5, -0.5, 0.5], 0.05, [20, 20, 60], 0.15).unwrap();
        vol.integrate(&frame, 2.0).unwrap();

        // Straight-line trilinear reimplementation over voxel centers.
        let reference = |p: Vec3| -> Option<f64> {
            let gx = (p[0] - vol.origin[0]) / vol.voxel_size - 0.5;
            let gy = (p[1] - vol.origin[1]) / vol.voxel_size - 0.5;
            let gz = (p[2] - vol.origin[2]) / vol.voxel_size - 0.5;
            let (x0, y0, z0) = (gx.floor(), gy.floor(), gz.floor());
            let (fx, fy, fz) = (gx - x0, gy - y0, gz - z0);
            let (x0, y0, z0) = (x0 as i64, y0 as i64, z0 as i64);
            if x0 < 0 || y0 < 0 || z0 < 0 {
                return None;
            }
            let (x1, y1, z1) = (x0 + 1, y0 + 1, z0 + 1);
            if x1 >= 20 || y1 >= 20 || z1 >= 60 {
                return None;
            }
            let val = |i: i64, j: i64, k: i64| -> Option<f64> {
                if vol.weight_at(i as usize, j as usize, k as usize) > 0.0 {
                    Some(vol.tsdf_at(i as usize, j as usize, k as usize) as f64)
                } else {
                    None
                }
            };
            let c000 = val(x0, y0, z0)?;
            let c100 = val(x1, y0, z0)?;
            let c010 = val(x0, y1, z0)?;
            let c110 = val(x1, y1, z0)?;
            let c001 = val(x0, y0, z1)?;
            let c101 = val(x1, y0, z1)?;
            let c011 = val(x0, y1, z1)?;
            let c111 = val(x1, y1, z1)?;
            let c00 = c000 * (1.0 - fx) + c100 * fx;
            let c10 = c010 * (1.0 - fx) + c110 * fx;
            let c01 = c001 * (1.0 - fx) + c101 * fx;
            let c11 = c011 * (1.0 - fx) + c111 * fx;
            let c0 = c00 * (1.0 - fy) + c10 * fy;
            let c1 = c01 * (1.0 - fy) + c11 * fy;
            Some((c0 * (1.0 - fz) + c1 * fz) * vol.truncation)
        };

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut compared = 0;
        for _ in 0..500 {
            let p = [
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(0.5..3.5),
            ];
            let got = vol.query(p);
            let want = reference(p);
            match (got, want) {
                (Some(a), Some(b)) => {
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                    compared += 1;
                }
                (None, None) => {}
                other => panic!("availability mismatch at {p:?}: {other:?}"),
            }
        }
        assert!(compared > 50);
    }

    #[test]
    fn query_at_voxel_center_returns_stored_value() {
        let frame = plane_frame();
        let mut vol = TsdfVolume::new([-0.5, -0.5, 0.5], 0.05, [20, 20, 60], 0.15).unwrap();
        vol.integrate(&frame, 2.0).unwrap();
        // Find an interior voxel whose whole neighborhood is observed.
        'outer: for k in 1..59 {
            for j in 1..19 {
                for i in 1..19 {
                    let mut all = true;
                    for dk in -1i64..=1 {
                        for dj in -1i64..=1 {
                            for di in -1i64..=1 {
                                if vol.weight_at(
                                    (i as i64 + di) as usize,
                                    (j as i64 + dj) as usize,
                                    (k as i64 + dk) as usize,
                                ) <= 0.0
                                {
                                    all = false;
                                }
                            }
                        }
                    }
                    if all {
                        let c = vol.voxel_center(i, j, k);
                        let q = vol.query(c).unwrap();
                        let want = vol.tsdf_at(i, j, k) as f64 * vol.truncation;
                        assert!((q - want).abs() < 1e-9, "{q} vs {want}");
                        break 'outer;
                    }
                }
            }
        }
    }

    #[test]
    fn covering_builds_reasonable_dims() {
        let vol = TsdfVolume::covering(Aabb::new([0.0; 3], [1.0; 3]), 0.1).unwrap();
        assert!(vol.dims.iter().all(|d| *d >= 10));
        assert!((vol.truncation - 0.3).abs() < 1e-15);
    }
}
