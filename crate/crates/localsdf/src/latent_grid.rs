//! Sparse voxel partition of space holding one latent code per allocated
//! voxel.
//!
//! Voxels are half-open boxes `[origin + idx*V, origin + (idx+1)*V)` per axis,
//! so a point exactly on a shared face belongs to the voxel with the larger
//! index along that axis. Queries use the indicator rule (the containing voxel
//! only); training-sample assignment uses the extended L-infinity receptive
//! field of radius `receptive_radius_factor * voxel_size` around each voxel
//! center (1.5 by default).
//!
//! Codes are initialized from a per-voxel RNG keyed on (grid seed, index), so
//! allocation results are independent of point order and allocation is
//! idempotent. After allocation the index structure is treated as frozen;
//! per-voxel code updates never touch other voxels' state.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::nn::Real;

/// Integer coordinates of a voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct VoxelIndex {
    pub i: i32,
    pub j: i32,
    pub k: i32,
}

impl VoxelIndex {
    pub fn new(i: i32, j: i32, k: i32) -> Self {
        Self { i, j, k }
    }
}

/// Standard deviation of the zero-mean Gaussian code initialization.
pub const CODE_INIT_SIGMA: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct LatentGrid<T> {
    origin: Vec3,
    voxel_size: f64,
    code_dim: usize,
    /// Extended receptive field radius in units of voxel size.
    pub receptive_radius_factor: f64,
    /// Extra shell of voxels allocated around observed ones (0 = off).
    pub dilation_shell: u32,
    seed: u64,
    codes: BTreeMap<VoxelIndex, Vec<T>>,
}

impl<T: Real> LatentGrid<T> {
    pub fn new(origin: Vec3, voxel_size: f64, code_dim: usize, seed: u64) -> Result<Self> {
        if !(voxel_size > 0.0) {
            return Err(Error::Config(format!(
                "voxel_size must be positive, got {voxel_size}"
            )));
        }
        if code_dim == 0 {
            return Err(Error::Config("code_dim must be positive".into()));
        }
        Ok(Self {
            origin,
            voxel_size,
            code_dim,
            receptive_radius_factor: 1.5,
            dilation_shell: 0,
            seed,
            codes: BTreeMap::new(),
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn code_dim(&self) -> usize {
        self.code_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Index of the (half-open) voxel containing `p`, allocated or not.
    pub fn world_to_index(&self, p: Vec3) -> VoxelIndex {
        VoxelIndex {
            i: ((p[0] - self.origin[0]) / self.voxel_size).floor() as i32,
            j: ((p[1] - self.origin[1]) / self.voxel_size).floor() as i32,
            k: ((p[2] - self.origin[2]) / self.voxel_size).floor() as i32,
        }
    }

    pub fn center(&self, idx: VoxelIndex) -> Vec3 {
        [
            self.origin[0] + (idx.i as f64 + 0.5) * self.voxel_size,
            self.origin[1] + (idx.j as f64 + 0.5) * self.voxel_size,
            self.origin[2] + (idx.k as f64 + 0.5) * self.voxel_size,
        ]
    }

    /// Voxel-local coordinates `p - center(idx)` in scene units.
    pub fn to_local(&self, idx: VoxelIndex, p: Vec3) -> Vec3 {
        let c = self.center(idx);
        [p[0] - c[0], p[1] - c[1], p[2] - c[2]]
    }

    /// Voxel-local coordinates divided by the voxel size, so points inside the
    /// voxel map to [-0.5, 0.5) per axis. This is the frame fed to the decoder.
    pub fn to_local_normalized(&self, idx: VoxelIndex, p: Vec3) -> Vec3 {
        let l = self.to_local(idx, p);
        [
            l[0] / self.voxel_size,
            l[1] / self.voxel_size,
            l[2] / self.voxel_size,
        ]
    }

    fn init_code(&self, idx: VoxelIndex) -> Vec<T> {
        // Mix grid seed and index so initialization is order-independent.
        let mut h = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for v in [idx.i, idx.j, idx.k] {
            h ^= (v as u32 as u64).wrapping_add(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(h << 6)
                .wrapping_add(h >> 2);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let normal = Normal::new(0.0, CODE_INIT_SIGMA).expect("valid sigma");
        (0..self.code_dim)
            .map(|_| T::from_f64(normal.sample(&mut rng)))
            .collect()
    }

    fn allocate_index(&mut self, idx: VoxelIndex) -> bool {
        if self.codes.contains_key(&idx) {
            return false;
        }
        let code = self.init_code(idx);
        self.codes.insert(idx, code);
        true
    }

    /// Allocate exactly the voxels containing at least one of `points`
    /// (plus the optional dilation shell). Idempotent; returns the sorted set
    /// of voxels containing points.
    pub fn allocate(&mut self, points: &[Vec3]) -> Vec<VoxelIndex> {
        let mut touched: Vec<VoxelIndex> = points.iter().map(|p| self.world_to_index(*p)).collect();
        touched.sort_unstable();
        touched.dedup();
        for idx in &touched {
            self.allocate_index(*idx);
        }
        if self.dilation_shell > 0 {
            let r = self.dilation_shell as i32;
            for idx in touched.clone() {
                for di in -r..=r {
                    for dj in -r..=r {
                        for dk in -r..=r {
                            self.allocate_index(VoxelIndex::new(idx.i + di, idx.j + dj, idx.k + dk));
                        }
                    }
                }
            }
        }
        touched
    }

    /// All allocated voxels whose center lies within
    /// `receptive_radius_factor * voxel_size` of `p` under the L-infinity
    /// norm (strictly), always including the containing voxel if allocated.
    pub fn voxels_for_sample(&self, p: Vec3) -> Vec<VoxelIndex> {
        let r = self.receptive_radius_factor;
        let containing = self.world_to_index(p);
        let mut out = Vec::new();
        // Center of voxel i along an axis sits at (i + 0.5) * V from origin;
        // |c/V - i - 0.5| < r gives the open index interval below.
        let mut lo = [0i32; 3];
        let mut hi = [0i32; 3];
        for a in 0..3 {
            let c = (p[a] - self.origin[a]) / self.voxel_size;
            lo[a] = (c - 0.5 - r).floor() as i32 + 1; // smallest i with i > c - 0.5 - r
            hi[a] = {
                let top = c - 0.5 + r; // need i < top
                let f = top.ceil() as i32 - 1;
                f
            };
        }
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    let idx = VoxelIndex::new(i, j, k);
                    if self.codes.contains_key(&idx) {
                        out.push(idx);
                    }
                }
            }
        }
        if self.codes.contains_key(&containing) && !out.contains(&containing) {
            out.push(containing);
            out.sort_unstable();
        }
        out
    }

    /// Indicator-rule lookup: the allocated voxel containing `p`, if any.
    pub fn voxel_for_query(&self, p: Vec3) -> Option<VoxelIndex> {
        let idx = self.world_to_index(p);
        if self.codes.contains_key(&idx) {
            Some(idx)
        } else {
            None
        }
    }

    pub fn code(&self, idx: VoxelIndex) -> Option<&Vec<T>> {
        self.codes.get(&idx)
    }

    pub fn code_mut(&mut self, idx: VoxelIndex) -> Option<&mut Vec<T>> {
        self.codes.get_mut(&idx)
    }

    /// Insert or replace a code (used by the checkpoint loader).
    pub fn set_code(&mut self, idx: VoxelIndex, code: Vec<T>) -> Result<()> {
        if code.len() != self.code_dim {
            return Err(Error::Config(format!(
                "code has {} entries, grid stores {}",
                code.len(),
                self.code_dim
            )));
        }
        self.codes.insert(idx, code);
        Ok(())
    }

    /// Deterministic (index-ordered) iteration over allocated voxels.
    pub fn iter(&self) -> impl Iterator<Item = (&VoxelIndex, &Vec<T>)> {
        self.codes.iter()
    }

    pub fn indices(&self) -> Vec<VoxelIndex> {
        self.codes.keys().copied().collect()
    }
}
