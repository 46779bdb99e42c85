//! Small fixed-size vector/matrix helpers and rigid transforms.
//!
//! Positions and geometry run in `f64`; the network side has its own scalar
//! type (see [`crate::nn::Real`]).

pub type Vec3 = [f64; 3];

/// Row-major 3x3 matrix.
pub type Mat3 = [[f64; 3]; 3];

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm_sq(a: Vec3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

#[inline]
pub fn dist_sq(a: Vec3, b: Vec3) -> f64 {
    norm_sq(sub(a, b))
}

#[inline]
pub fn normalize(a: Vec3) -> Vec3 {
    let n = norm(a);
    if n > 0.0 {
        scale(a, 1.0 / n)
    } else {
        [0.0, 0.0, 0.0]
    }
}

/// L-infinity norm.
#[inline]
pub fn linf(a: Vec3) -> f64 {
    a[0].abs().max(a[1].abs()).max(a[2].abs())
}

#[inline]
pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

#[inline]
pub fn mat_transpose(m: &Mat3) -> Mat3 {
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let bt = mat_transpose(b);
    let mut out = [[0.0; 3]; 3];
    for (i, row) in a.iter().enumerate() {
        for (j, col) in bt.iter().enumerate() {
            out[i][j] = dot(*row, *col);
        }
    }
    out
}

pub const MAT3_IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Rotation matrix around a unit axis (Rodrigues).
pub fn rotation_axis_angle(axis: Vec3, angle: f64) -> Mat3 {
    let [x, y, z] = normalize(axis);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

/// Rigid body transform: `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: MAT3_IDENTITY,
            translation: [0.0; 3],
        }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        Self {
            rotation: rotation_axis_angle(axis, angle),
            translation,
        }
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        add(mat_vec(&self.rotation, p), self.translation)
    }

    /// Inverse map; relies on the rotation being orthonormal.
    #[inline]
    pub fn apply_inverse(&self, p: Vec3) -> Vec3 {
        mat_vec(&mat_transpose(&self.rotation), sub(p, self.translation))
    }

    /// Rotate a direction (no translation).
    #[inline]
    pub fn rotate(&self, d: Vec3) -> Vec3 {
        mat_vec(&self.rotation, d)
    }

    pub fn inverse(&self) -> Self {
        let rt = mat_transpose(&self.rotation);
        Self {
            rotation: rt,
            translation: scale(mat_vec(&rt, self.translation), -1.0),
        }
    }

    /// `self` applied after `other`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: mat_mul(&self.rotation, &other.rotation),
            translation: add(mat_vec(&self.rotation, other.translation), self.translation),
        }
    }

    /// Camera convention helper: place the camera at `eye` with its +z axis
    /// looking at `target`, producing the camera-to-world transform.
    pub fn look_at(eye: Vec3, target: Vec3, up_hint: Vec3) -> Self {
        let fwd = normalize(sub(target, eye));
        let mut right = cross(fwd, up_hint);
        if norm(right) < 1e-9 {
            right = cross(fwd, [1.0, 0.0, 0.0]);
            if norm(right) < 1e-9 {
                right = cross(fwd, [0.0, 1.0, 0.0]);
            }
        }
        let right = normalize(right);
        let down = cross(fwd, right);
        // Columns of R are the camera axes expressed in world coordinates:
        // x -> right, y -> down (image rows grow downward), z -> forward.
        Self {
            rotation: [
                [right[0], down[0], fwd[0]],
                [right[1], down[1], fwd[1]],
                [right[2], down[2], fwd[2]],
            ],
            translation: eye,
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    /// Empty box ready to absorb points via [`Aabb::grow`].
    pub fn empty() -> Self {
        Self {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(*p);
        }
        b
    }

    pub fn grow(&mut self, p: Vec3) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.min[a] > self.max[a])
    }

    pub fn center(&self) -> Vec3 {
        scale(add(self.min, self.max), 0.5)
    }

    pub fn extent(&self) -> Vec3 {
        sub(self.max, self.min)
    }

    pub fn diagonal(&self) -> f64 {
        norm(self.extent())
    }

    pub fn padded(&self, pad: f64) -> Self {
        Self {
            min: sub(self.min, [pad; 3]),
            max: add(self.max, [pad; 3]),
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}
