//! Analytic signed distance functions for simple solids and scene sampling.
//!
//! Distances are exact for spheres, boxes (outside), and capped cylinders;
//! the ellipsoid uses the usual tight first-order bound. A scene is a list of
//! posed primitives whose SDF composes by min (union).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::SdfSample;
use crate::error::{Error, Result};
use crate::math::{add, norm, scale, Aabb, RigidTransform, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrimitiveKind {
    Sphere { radius: f64 },
    Box { half_extents: Vec3 },
    Ellipsoid { semi_axes: Vec3 },
    Cylinder { radius: f64, half_height: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveShape {
    pub kind: PrimitiveKind,
    pub pose: RigidTransform,
}

impl PrimitiveShape {
    pub fn new(kind: PrimitiveKind, pose: RigidTransform) -> Self {
        Self { kind, pose }
    }

    /// Signed distance at a world-space point; negative inside.
    pub fn sdf(&self, world: Vec3) -> f64 {
        let p = self.pose.apply_inverse(world);
        match self.kind {
            PrimitiveKind::Sphere { radius } => norm(p) - radius,
            PrimitiveKind::Box { half_extents } => {
                let q = [
                    p[0].abs() - half_extents[0],
                    p[1].abs() - half_extents[1],
                    p[2].abs() - half_extents[2],
                ];
                let outside = [q[0].max(0.0), q[1].max(0.0), q[2].max(0.0)];
                norm(outside) + q[0].max(q[1]).max(q[2]).min(0.0)
            }
            PrimitiveKind::Ellipsoid { semi_axes } => {
                let k0 = norm([
                    p[0] / semi_axes[0],
                    p[1] / semi_axes[1],
                    p[2] / semi_axes[2],
                ]);
                let k1 = norm([
                    p[0] / (semi_axes[0] * semi_axes[0]),
                    p[1] / (semi_axes[1] * semi_axes[1]),
                    p[2] / (semi_axes[2] * semi_axes[2]),
                ]);
                if k1 == 0.0 {
                    // Center: exact distance is the smallest semi-axis.
                    -semi_axes[0].min(semi_axes[1]).min(semi_axes[2])
                } else {
                    k0 * (k0 - 1.0) / k1
                }
            }
            PrimitiveKind::Cylinder {
                radius,
                half_height,
            } => {
                let dr = (p[0] * p[0] + p[1] * p[1]).sqrt() - radius;
                let dz = p[2].abs() - half_height;
                let outside = (dr.max(0.0).powi(2) + dz.max(0.0).powi(2)).sqrt();
                outside + dr.max(dz).min(0.0)
            }
        }
    }

    /// Radius of a sphere around the pose origin that encloses the shape.
    pub fn bounding_radius(&self) -> f64 {
        match self.kind {
            PrimitiveKind::Sphere { radius } => radius,
            PrimitiveKind::Box { half_extents } => norm(half_extents),
            PrimitiveKind::Ellipsoid { semi_axes } => {
                semi_axes[0].max(semi_axes[1]).max(semi_axes[2])
            }
            PrimitiveKind::Cylinder {
                radius,
                half_height,
            } => (radius * radius + half_height * half_height).sqrt(),
        }
    }

    /// Approximate surface area, used to weight sampling across shapes.
    pub fn surface_area(&self) -> f64 {
        use std::f64::consts::PI;
        match self.kind {
            PrimitiveKind::Sphere { radius } => 4.0 * PI * radius * radius,
            PrimitiveKind::Box { half_extents: h } => {
                8.0 * (h[0] * h[1] + h[1] * h[2] + h[0] * h[2])
            }
            PrimitiveKind::Ellipsoid { semi_axes: s } => {
                // Thomsen approximation.
                let p = 1.6075;
                let (a, b, c) = (s[0].powf(p), s[1].powf(p), s[2].powf(p));
                4.0 * PI * ((a * b + a * c + b * c) / 3.0).powf(1.0 / p)
            }
            PrimitiveKind::Cylinder {
                radius,
                half_height,
            } => 2.0 * PI * radius * (2.0 * half_height) + 2.0 * PI * radius * radius,
        }
    }

    /// A point on the surface (world space). Uniform for spheres, boxes, and
    /// cylinders; area-skewed but full-coverage for ellipsoids.
    pub fn surface_sample<R: Rng>(&self, rng: &mut R) -> Vec3 {
        let local = match self.kind {
            PrimitiveKind::Sphere { radius } => scale(unit_vector(rng), radius),
            PrimitiveKind::Box { half_extents: h } => {
                let areas = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
                let total = 2.0 * (areas[0] + areas[1] + areas[2]);
                let mut pick = rng.random_range(0.0..total);
                let mut face = 0usize;
                let mut sign = 1.0;
                'outer: for a in 0..3 {
                    for s in [1.0, -1.0] {
                        if pick < areas[a] {
                            face = a;
                            sign = s;
                            break 'outer;
                        }
                        pick -= areas[a];
                    }
                }
                let mut p = [0.0; 3];
                p[face] = sign * h[face];
                for a in 0..3 {
                    if a != face {
                        p[a] = rng.random_range(-h[a]..h[a]);
                    }
                }
                p
            }
            PrimitiveKind::Ellipsoid { semi_axes } => {
                let u = unit_vector(rng);
                [
                    u[0] * semi_axes[0],
                    u[1] * semi_axes[1],
                    u[2] * semi_axes[2],
                ]
            }
            PrimitiveKind::Cylinder {
                radius,
                half_height,
            } => {
                use std::f64::consts::PI;
                let side = 2.0 * PI * radius * 2.0 * half_height;
                let caps = 2.0 * PI * radius * radius;
                if rng.random_range(0.0..side + caps) < side {
                    let ang = rng.random_range(0.0..2.0 * PI);
                    [
                        radius * ang.cos(),
                        radius * ang.sin(),
                        rng.random_range(-half_height..half_height),
                    ]
                } else {
                    let ang = rng.random_range(0.0..2.0 * PI);
                    let r = radius * rng.random_range(0.0f64..1.0).sqrt();
                    let z = if rng.random_bool(0.5) { half_height } else { -half_height };
                    [r * ang.cos(), r * ang.sin(), z]
                }
            }
        };
        self.pose.apply(local)
    }
}

fn unit_vector<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = norm(v);
        if n > 1e-6 && n <= 1.0 {
            return scale(v, 1.0 / n);
        }
    }
}

/// Union SDF of a scene: min over the shapes.
pub fn scene_sdf(shapes: &[PrimitiveShape], p: Vec3) -> f64 {
    shapes
        .iter()
        .map(|s| s.sdf(p))
        .fold(f64::INFINITY, f64::min)
}

/// Bounding box of all shapes' bounding spheres.
pub fn scene_bounds(shapes: &[PrimitiveShape]) -> Aabb {
    let mut b = Aabb::empty();
    for s in shapes {
        let r = s.bounding_radius();
        b.grow(add(s.pose.translation, [r; 3]));
        b.grow(add(s.pose.translation, [-r; 3]));
    }
    b
}

/// Settings for [`sample_scene_sdf`].
#[derive(Debug, Clone, Copy)]
pub struct SceneSampleConfig {
    pub n_surface: usize,
    pub n_uniform: usize,
    /// Isotropic jitter scales applied alternately to surface points.
    pub sigma_near: f64,
    pub sigma_far: f64,
    pub truncation: f64,
    pub seed: u64,
}

/// Draw SDF samples from a primitive scene: surface points jittered at two
/// Gaussian scales, plus uniform samples in the scene bounding box. Values are
/// exact union SDFs clamped to the truncation band; all weights are 1.
pub fn sample_scene_sdf(shapes: &[PrimitiveShape], cfg: &SceneSampleConfig) -> Result<Vec<SdfSample>> {
    if shapes.is_empty() {
        return Err(Error::Data("scene has no shapes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bounds = scene_bounds(shapes).padded(cfg.truncation);
    let mut out = Vec::with_capacity(cfg.n_surface + cfg.n_uniform);

    let weights: Vec<f64> = shapes.iter().map(|s| s.surface_area()).collect();
    let total_area: f64 = weights.iter().sum();
    let near = Normal::new(0.0, cfg.sigma_near).map_err(|e| Error::Config(e.to_string()))?;
    let far = Normal::new(0.0, cfg.sigma_far).map_err(|e| Error::Config(e.to_string()))?;

    for s in 0..cfg.n_surface {
        let mut pick = rng.random_range(0.0..total_area);
        let mut shape = &shapes[0];
        for (sh, w) in shapes.iter().zip(&weights) {
            if pick < *w {
                shape = sh;
                break;
            }
            pick -= w;
        }
        let base = shape.surface_sample(&mut rng);
        let dist = if s % 2 == 0 { &near } else { &far };
        let p = [
            base[0] + dist.sample(&mut rng),
            base[1] + dist.sample(&mut rng),
            base[2] + dist.sample(&mut rng),
        ];
        let sdf = scene_sdf(shapes, p).clamp(-cfg.truncation, cfg.truncation);
        out.push(SdfSample {
            position: p,
            sdf,
            weight: 1.0,
        });
    }
    for _ in 0..cfg.n_uniform {
        let p = [
            rng.random_range(bounds.min[0]..bounds.max[0]),
            rng.random_range(bounds.min[1]..bounds.max[1]),
            rng.random_range(bounds.min[2]..bounds.max[2]),
        ];
        let sdf = scene_sdf(shapes, p).clamp(-cfg.truncation, cfg.truncation);
        out.push(SdfSample {
            position: p,
            sdf,
            weight: 1.0,
        });
    }
    Ok(out)
}
