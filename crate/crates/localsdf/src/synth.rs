//! Synthetic geometry builders shared by the pipeline, the examples, and the
//! test suites: icospheres, random primitive corpora, a blobby held-out test
//! shape, and camera rigs around an object.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::math::{normalize, scale, RigidTransform, Vec3};
use crate::mesh::TriangleMesh;
use crate::sampling::{CameraIntrinsics, PrimitiveKind, PrimitiveShape};

/// Icosahedron subdivided `subdivisions` times and projected onto a sphere of
/// the given radius.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = vec![
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .into_iter()
    .map(|v| scale(normalize(v), radius))
    .collect();
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for [a, b, c] in triangles {
            let mut mid = |x: u32, y: u32, vertices: &mut Vec<Vec3>| -> u32 {
                let key = (x.min(y), x.max(y));
                *midpoints.entry(key).or_insert_with(|| {
                    let m = scale(
                        normalize([
                            vertices[x as usize][0] + vertices[y as usize][0],
                            vertices[x as usize][1] + vertices[y as usize][1],
                            vertices[x as usize][2] + vertices[y as usize][2],
                        ]),
                        radius,
                    );
                    vertices.push(m);
                    (vertices.len() - 1) as u32
                })
            };
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        triangles = next;
    }
    TriangleMesh::new(vertices, triangles)
}

/// Random-pose primitive corpus inside a cubic region of side `extent`.
/// Sizes are drawn relative to `feature_scale` (roughly the voxel size the
/// prior will be trained at, so every shape spans a handful of voxels).
pub fn random_primitive_scene(
    count: usize,
    extent: f64,
    feature_scale: f64,
    seed: u64,
) -> Vec<PrimitiveShape> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shapes = Vec::with_capacity(count);
    let margin = 3.0 * feature_scale;
    for _ in 0..count {
        let size = |rng: &mut ChaCha8Rng| rng.random_range(1.0 * feature_scale..3.0 * feature_scale);
        let kind = match rng.random_range(0..4) {
            0 => PrimitiveKind::Sphere { radius: size(&mut rng) },
            1 => PrimitiveKind::Box {
                half_extents: [size(&mut rng), size(&mut rng), size(&mut rng)],
            },
            2 => PrimitiveKind::Ellipsoid {
                semi_axes: [size(&mut rng), size(&mut rng), size(&mut rng)],
            },
            _ => PrimitiveKind::Cylinder {
                radius: size(&mut rng),
                half_height: size(&mut rng),
            },
        };
        let axis = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let axis = if crate::math::norm(axis) < 1e-6 { [0.0, 0.0, 1.0] } else { axis };
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let translation = [
            rng.random_range(margin..extent - margin),
            rng.random_range(margin..extent - margin),
            rng.random_range(margin..extent - margin),
        ];
        shapes.push(PrimitiveShape::new(
            kind,
            RigidTransform::from_axis_angle(axis, angle, translation),
        ));
    }
    shapes
}

/// Smooth held-out test shape: an overlapping union of spheres and ellipsoids
/// around the origin, spanning roughly `diameter` scene units.
pub fn blobby_shape(diameter: f64, seed: u64) -> Vec<PrimitiveShape> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r0 = diameter / 4.0;
    let mut shapes = vec![PrimitiveShape::new(
        PrimitiveKind::Sphere { radius: r0 },
        RigidTransform::identity(),
    )];
    for _ in 0..5 {
        let dir = normalize([
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ]);
        let offset = scale(dir, rng.random_range(0.6 * r0..1.3 * r0));
        let kind = if rng.random_bool(0.5) {
            PrimitiveKind::Sphere {
                radius: rng.random_range(0.5 * r0..0.9 * r0),
            }
        } else {
            PrimitiveKind::Ellipsoid {
                semi_axes: [
                    rng.random_range(0.5 * r0..0.9 * r0),
                    rng.random_range(0.5 * r0..0.9 * r0),
                    rng.random_range(0.5 * r0..0.9 * r0),
                ],
            }
        };
        let axis = normalize([
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ]);
        shapes.push(PrimitiveShape::new(
            kind,
            RigidTransform::from_axis_angle(axis, rng.random_range(0.0..std::f64::consts::TAU), offset),
        ));
    }
    shapes
}

/// `n` camera poses on a ring of the given radius around `center`, all looking
/// at the center, alternating slightly above and below the equator.
pub fn camera_ring(center: Vec3, radius: f64, n: usize) -> Vec<RigidTransform> {
    (0..n)
        .map(|i| {
            let ang = std::f64::consts::TAU * i as f64 / n as f64;
            let elev: f64 = if i % 2 == 0 { 0.35 } else { -0.35 };
            let eye = [
                center[0] + radius * ang.cos() * elev.cos(),
                center[1] + radius * elev.sin(),
                center[2] + radius * ang.sin() * elev.cos(),
            ];
            RigidTransform::look_at(eye, center, [0.0, 1.0, 0.0])
        })
        .collect()
}

/// Small depth camera used by the synthetic experiments.
pub fn default_camera(width: u32, height: u32) -> CameraIntrinsics {
    CameraIntrinsics::with_fov(width, height, 60f64.to_radians())
}
