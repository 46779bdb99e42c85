//! Indexed triangle mesh.

use crate::error::{Error, Result};
use crate::math::{cross, norm, sub, Aabb, Vec3};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            triangles,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Indices in range and no non-finite vertices.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(Error::Data(format!(
                        "triangle {t} references vertex {v}, mesh has {n}"
                    )));
                }
            }
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::Data(format!("vertex {i} is not finite: {v:?}")));
            }
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    pub fn triangle_vertices(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    /// Unnormalized face normal (right-hand winding).
    pub fn face_normal_raw(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle_vertices(t);
        cross(sub(b, a), sub(c, a))
    }

    /// V - E + F over the vertex/edge/face counts actually referenced;
    /// 2 for a closed mesh of sphere topology.
    pub fn euler_characteristic(&self) -> i64 {
        use std::collections::BTreeSet;
        let mut used: BTreeSet<u32> = BTreeSet::new();
        let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                used.insert(a);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        used.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }
}
