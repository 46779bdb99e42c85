//! Marching-cubes isosurface extraction from any SDF query source, restricted
//! by an observation-distance mask.
//!
//! The source returns `None` where the field is unavailable (unallocated
//! space); cells with any unavailable corner are skipped, as are cells whose
//! corners stray farther than `mask_radius` from the nearest observed point.
//! A corner value exactly equal to the iso value counts as outside, which
//! avoids degenerate zero-area sign patterns.

pub mod tables;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::math::{Aabb, Vec3};
use crate::mesh::TriangleMesh;
use crate::spatial::KdTree;
use tables::{CORNER_OFFSETS, EDGE_CORNERS, EDGE_TABLE, TRI_TABLE};

#[derive(Debug, Clone, Copy)]
pub struct ExtractionConfig {
    /// Query lattice spacing.
    pub sample_resolution: f64,
    /// Only extract cells whose corners are all within this distance of an
    /// observed point; `None` disables masking.
    pub mask_radius: Option<f64>,
    pub iso_value: f64,
}

impl ExtractionConfig {
    pub fn new(sample_resolution: f64) -> Self {
        Self {
            sample_resolution,
            mask_radius: None,
            iso_value: 0.0,
        }
    }

    pub fn with_mask(mut self, radius: f64) -> Self {
        self.mask_radius = Some(radius);
        self
    }
}

/// Exact Euclidean distance from `query` to the nearest of `points`
/// (+inf for an empty set).
pub fn nearest_observation_distance(points: &[Vec3], query: Vec3) -> f64 {
    KdTree::build(points).nearest_distance(query)
}

/// Statistics from one extraction run.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractionStats {
    /// Lattice cells skipped by the observation mask.
    pub masked_cells: usize,
    /// Cells skipped because a corner had no field value.
    pub unavailable_cells: usize,
    pub emitted_triangles: usize,
}

/// Marching cubes over `region` at the configured lattice spacing.
///
/// `observed` feeds the extraction mask; it may be empty when
/// `config.mask_radius` is `None`. Deterministic for fixed inputs.
pub fn extract<F>(
    source: &F,
    region: Aabb,
    observed: &[Vec3],
    config: &ExtractionConfig,
) -> (TriangleMesh, ExtractionStats)
where
    F: Fn(Vec3) -> Option<f64> + Sync,
{
    let mut stats = ExtractionStats::default();
    if region.is_empty() || !(config.sample_resolution > 0.0) {
        return (TriangleMesh::default(), stats);
    }
    let h = config.sample_resolution;
    let ext = region.extent();
    let nx = (ext[0] / h).ceil().max(1.0) as usize;
    let ny = (ext[1] / h).ceil().max(1.0) as usize;
    let nz = (ext[2] / h).ceil().max(1.0) as usize;
    // Lattice points per axis = cells + 1.
    let (px, py, pz) = (nx + 1, ny + 1, nz + 1);
    let point = |i: usize, j: usize, k: usize| -> Vec3 {
        [
            region.min[0] + i as f64 * h,
            region.min[1] + j as f64 * h,
            region.min[2] + k as f64 * h,
        ]
    };
    let pidx = |i: usize, j: usize, k: usize| -> usize { (k * py + j) * px + i };

    // Mask pass: which lattice points sit near an observation.
    let mask: Option<Vec<bool>> = config.mask_radius.map(|radius| {
        let tree = KdTree::build(observed);
        (0..pz)
            .into_par_iter()
            .flat_map_iter(|k| {
                let tree = &tree;
                (0..py).flat_map(move |j| {
                    (0..px).map(move |i| tree.nearest_distance(point(i, j, k)) <= radius)
                })
            })
            .collect()
    });

    // Field pass: evaluate only lattice points that can contribute.
    let values: Vec<Option<f64>> = (0..pz)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mask = mask.as_deref();
            (0..py).flat_map(move |j| {
                (0..px).map(move |i| {
                    if let Some(m) = mask {
                        if !m[pidx(i, j, k)] {
                            return None;
                        }
                    }
                    source(point(i, j, k))
                })
            })
        })
        .collect();

    // Cell pass (sequential: cheap relative to field evaluation, and keeps
    // vertex ordering deterministic).
    let mut mesh = TriangleMesh::default();
    // Key: (lattice point index of the edge's low corner, axis).
    let mut edge_vertex: HashMap<(usize, u8), u32> = HashMap::new();
    let iso = config.iso_value;
    for ck in 0..nz {
        for cj in 0..ny {
            for ci in 0..nx {
                let corner_pidx: [usize; 8] = std::array::from_fn(|c| {
                    let [dx, dy, dz] = CORNER_OFFSETS[c];
                    pidx(ci + dx, cj + dy, ck + dz)
                });
                if let Some(m) = mask.as_deref() {
                    if corner_pidx.iter().any(|&pi| !m[pi]) {
                        stats.masked_cells += 1;
                        continue;
                    }
                }
                let mut vals = [0.0f64; 8];
                let mut missing = false;
                for (c, &pi) in corner_pidx.iter().enumerate() {
                    match values[pi] {
                        Some(v) => vals[c] = v,
                        None => {
                            missing = true;
                            break;
                        }
                    }
                }
                if missing {
                    stats.unavailable_cells += 1;
                    continue;
                }
                let mut cube_index = 0usize;
                for (c, v) in vals.iter().enumerate() {
                    // Exactly-iso corners count as outside.
                    if *v < iso {
                        cube_index |= 1 << c;
                    }
                }
                if EDGE_TABLE[cube_index] == 0 {
                    continue;
                }
                let tri_row = &TRI_TABLE[cube_index];
                let mut t = 0;
                while tri_row[t] != -1 {
                    let mut tri = [0u32; 3];
                    for (slot, &e) in tri_row[t..t + 3].iter().enumerate() {
                        let e = e as usize;
                        let [ca, cb] = EDGE_CORNERS[e];
                        // Canonical key: the edge's low lattice point plus axis.
                        let (lo, hi) = if corner_pidx[ca] < corner_pidx[cb] {
                            (ca, cb)
                        } else {
                            (cb, ca)
                        };
                        let axis = {
                            let a = CORNER_OFFSETS[lo];
                            let b = CORNER_OFFSETS[hi];
                            if a[0] != b[0] {
                                0u8
                            } else if a[1] != b[1] {
                                1
                            } else {
                                2
                            }
                        };
                        let key = (corner_pidx[lo], axis);
                        let next_index = mesh.vertices.len() as u32;
                        let vi = *edge_vertex.entry(key).or_insert_with(|| {
                            let va = vals[lo];
                            let vb = vals[hi];
                            let t_lin = (iso - va) / (vb - va);
                            let [ax, ay, az] = CORNER_OFFSETS[lo];
                            let pa = point(ci + ax, cj + ay, ck + az);
                            let [bx, by, bz] = CORNER_OFFSETS[hi];
                            let pb = point(ci + bx, cj + by, ck + bz);
                            mesh.vertices.push([
                                pa[0] + t_lin * (pb[0] - pa[0]),
                                pa[1] + t_lin * (pb[1] - pa[1]),
                                pa[2] + t_lin * (pb[2] - pa[2]),
                            ]);
                            next_index
                        });
                        tri[slot] = vi;
                    }
                    if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                        mesh.triangles.push(tri);
                    }
                    t += 3;
                }
            }
        }
    }
    stats.emitted_triangles = mesh.triangles.len();
    (mesh, stats)
}
