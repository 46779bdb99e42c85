//! Checkpoint format (`DLS1`): decoder weights plus optional optimizer state
//! and latent grid, all little-endian.
//!
//! Layout:
//! - magic `DLS1`, version `u32` (currently 1)
//! - `u32 x5`: input_dim, hidden_dim, num_layers, output_dim, code_dim
//! - `f64 x4`: leaky_slope, truncation, encode_span, tanh_clamp
//! - flags `u8` (bit 0: Adam state present, bit 1: latent grid present)
//! - layer tensors as `f32`, row-major, in flat `[W1, b1, W2, b2, ...]` order
//! - Adam state (optional): step_count `u64`; lr, beta1, beta2, eps `f64`;
//!   first and second moments as `f32 x param_count` each
//! - latent grid (optional): origin `f64 x3`, voxel_size `f64`,
//!   receptive_radius_factor `f64`, grid seed `u64`, entry count `u64`, then
//!   per entry `i32 x3` index + `f32 x code_dim` code, in index order
//!
//! Tensors are stored as `f32`; saving from an `f32` model and loading it back
//! reproduces every tensor bit-exactly.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::decoder::{Decoder, SdfEncoding};
use crate::error::{Error, Result};
use crate::latent_grid::{LatentGrid, VoxelIndex};
use crate::nn::{AdamState, Mlp, MlpSpec, Real};

pub const MAGIC: &[u8; 4] = b"DLS1";
pub const VERSION: u32 = 1;

/// Everything a checkpoint can carry.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub decoder: Decoder<f32>,
    pub adam: Option<AdamState<f32>>,
    pub grid: Option<LatentGrid<f32>>,
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f32_slice<W: Write, T: Real>(w: &mut W, vals: &[T]) -> Result<()> {
    for v in vals {
        w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("truncated checkpoint while reading {what}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<R, 4>(r, what)?))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<R, 8>(r, what)?))
}

fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<R, 8>(r, what)?))
}

fn read_i32<R: Read>(r: &mut R, what: &str) -> Result<i32> {
    Ok(i32::from_le_bytes(read_exact::<R, 4>(r, what)?))
}

fn read_f32_vec<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<f32>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(f32::from_le_bytes(read_exact::<R, 4>(r, what)?));
    }
    Ok(out)
}

/// Write a checkpoint. Tensors are converted to `f32` on disk.
pub fn save_checkpoint<T: Real>(
    path: &Path,
    decoder: &Decoder<T>,
    adam: Option<&AdamState<T>>,
    grid: Option<&LatentGrid<T>>,
) -> Result<()> {
    if let Some(g) = grid {
        if g.code_dim() != decoder.code_dim() {
            return Err(Error::Config(
                "grid code_dim does not match decoder".into(),
            ));
        }
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;
    let spec = decoder.mlp().spec();
    write_u32(&mut w, spec.input_dim as u32)?;
    write_u32(&mut w, spec.hidden_dim as u32)?;
    write_u32(&mut w, spec.num_layers as u32)?;
    write_u32(&mut w, spec.output_dim as u32)?;
    write_u32(&mut w, decoder.code_dim() as u32)?;
    write_f64(&mut w, spec.leaky_slope)?;
    write_f64(&mut w, decoder.encoding.truncation)?;
    write_f64(&mut w, decoder.encoding.encode_span)?;
    write_f64(&mut w, decoder.encoding.tanh_clamp)?;
    let mut flags = 0u8;
    if adam.is_some() {
        flags |= 1;
    }
    if grid.is_some() {
        flags |= 2;
    }
    w.write_all(&[flags])?;
    write_f32_slice(&mut w, decoder.mlp().params())?;
    if let Some(a) = adam {
        write_u64(&mut w, a.step_count)?;
        write_f64(&mut w, a.lr.as_f64())?;
        write_f64(&mut w, a.beta1.as_f64())?;
        write_f64(&mut w, a.beta2.as_f64())?;
        write_f64(&mut w, a.eps.as_f64())?;
        write_f32_slice(&mut w, &a.m)?;
        write_f32_slice(&mut w, &a.v)?;
    }
    if let Some(g) = grid {
        for c in g.origin() {
            write_f64(&mut w, c)?;
        }
        write_f64(&mut w, g.voxel_size())?;
        write_f64(&mut w, g.receptive_radius_factor)?;
        write_u64(&mut w, g.seed())?;
        write_u64(&mut w, g.len() as u64)?;
        for (idx, code) in g.iter() {
            w.write_all(&idx.i.to_le_bytes())?;
            w.write_all(&idx.j.to_le_bytes())?;
            w.write_all(&idx.k.to_le_bytes())?;
            write_f32_slice(&mut w, code)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load and validate a checkpoint.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let magic = read_exact::<_, 4>(&mut r, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version} (supported: {VERSION})"
        )));
    }
    let input_dim = read_u32(&mut r, "input_dim")? as usize;
    let hidden_dim = read_u32(&mut r, "hidden_dim")? as usize;
    let num_layers = read_u32(&mut r, "num_layers")? as usize;
    let output_dim = read_u32(&mut r, "output_dim")? as usize;
    let code_dim = read_u32(&mut r, "code_dim")? as usize;
    let leaky_slope = read_f64(&mut r, "leaky_slope")?;
    let truncation = read_f64(&mut r, "truncation")?;
    let encode_span = read_f64(&mut r, "encode_span")?;
    let tanh_clamp = read_f64(&mut r, "tanh_clamp")?;
    let flags = read_exact::<_, 1>(&mut r, "flags")?[0];

    let mut spec = MlpSpec::new(input_dim, hidden_dim, num_layers, output_dim);
    spec.leaky_slope = leaky_slope;
    spec.validate()
        .map_err(|e| Error::Format(format!("inconsistent checkpoint header: {e}")))?;
    let n_params = spec.param_count();
    let params = read_f32_vec(&mut r, n_params, "layer tensors")?;
    let mlp = Mlp::from_params(spec, params)
        .map_err(|e| Error::Format(format!("bad tensor payload: {e}")))?;
    let encoding = SdfEncoding {
        truncation,
        encode_span,
        tanh_clamp,
    };
    let decoder = Decoder::new(mlp, code_dim, encoding)
        .map_err(|e| Error::Format(format!("inconsistent decoder dims: {e}")))?;

    let adam = if flags & 1 != 0 {
        let step_count = read_u64(&mut r, "adam step")?;
        let lr = read_f64(&mut r, "adam lr")?;
        let beta1 = read_f64(&mut r, "adam beta1")?;
        let beta2 = read_f64(&mut r, "adam beta2")?;
        let eps = read_f64(&mut r, "adam eps")?;
        let m = read_f32_vec(&mut r, n_params, "adam m")?;
        let v = read_f32_vec(&mut r, n_params, "adam v")?;
        let mut st = AdamState::<f32>::new(n_params, lr);
        st.step_count = step_count;
        st.beta1 = beta1 as f32;
        st.beta2 = beta2 as f32;
        st.eps = eps as f32;
        st.m = m;
        st.v = v;
        Some(st)
    } else {
        None
    };

    let grid = if flags & 2 != 0 {
        let origin = [
            read_f64(&mut r, "grid origin")?,
            read_f64(&mut r, "grid origin")?,
            read_f64(&mut r, "grid origin")?,
        ];
        let voxel_size = read_f64(&mut r, "voxel_size")?;
        let factor = read_f64(&mut r, "receptive factor")?;
        let seed = read_u64(&mut r, "grid seed")?;
        let count = read_u64(&mut r, "entry count")? as usize;
        let mut g = LatentGrid::<f32>::new(origin, voxel_size, code_dim, seed)
            .map_err(|e| Error::Format(format!("bad grid header: {e}")))?;
        g.receptive_radius_factor = factor;
        for _ in 0..count {
            let idx = VoxelIndex::new(
                read_i32(&mut r, "voxel index")?,
                read_i32(&mut r, "voxel index")?,
                read_i32(&mut r, "voxel index")?,
            );
            let code = read_f32_vec(&mut r, code_dim, "code")?;
            g.set_code(idx, code)
                .map_err(|e| Error::Format(format!("bad code entry: {e}")))?;
        }
        Some(g)
    } else {
        None
    };

    // Reject trailing garbage.
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }

    Ok(Checkpoint {
        decoder,
        adam,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn toy() -> (Decoder<f32>, AdamState<f32>, LatentGrid<f32>) {
        let spec = MlpSpec::new(8 + 3, 16, 4, 1);
        let dec = Decoder::new(
            Mlp::init(spec, 3).unwrap(),
            8,
            SdfEncoding::for_voxel_size(0.1),
        )
        .unwrap();
        let mut adam = AdamState::new(dec.mlp().params().len(), 0.01);
        adam.step_count = 42;
        adam.m[0] = 0.5;
        adam.v[7] = 0.25;
        let mut grid = LatentGrid::new([0.1, -0.2, 0.3], 0.1, 8, 77).unwrap();
        grid.allocate(&[[0.15, 0.0, 0.35], [0.55, 0.1, 0.35], [-1.0, -1.0, -1.0]]);
        (dec, adam, grid)
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let (dec, adam, grid) = toy();
        let dir = tempdir().unwrap();
        let path = dir.path().join("ckpt.dls");
        save_checkpoint(&path, &dec, Some(&adam), Some(&grid)).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.decoder.mlp().params(), dec.mlp().params());
        assert_eq!(loaded.decoder.mlp().spec(), dec.mlp().spec());
        assert_eq!(loaded.decoder.encoding, dec.encoding);
        let ladam = loaded.adam.as_ref().unwrap();
        assert_eq!(ladam.m, adam.m);
        assert_eq!(ladam.v, adam.v);
        assert_eq!(ladam.step_count, 42);
        let lgrid = loaded.grid.as_ref().unwrap();
        assert_eq!(lgrid.len(), grid.len());
        assert_eq!(lgrid.origin(), grid.origin());
        assert_eq!(lgrid.seed(), grid.seed());
        for ((ia, ca), (ib, cb)) in lgrid.iter().zip(grid.iter()) {
            assert_eq!(ia, ib);
            assert_eq!(ca, cb);
        }
        // Double round trip produces identical bytes.
        let path2 = dir.path().join("ckpt2.dls");
        save_checkpoint(&path2, &loaded.decoder, loaded.adam.as_ref(), loaded.grid.as_ref())
            .unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let (dec, _, _) = toy();
        let dir = tempdir().unwrap();
        let path = dir.path().join("ckpt.dls");
        save_checkpoint::<f32>(&path, &dec, None, None).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let (dec, _, _) = toy();
        let dir = tempdir().unwrap();
        let path = dir.path().join("ckpt.dls");
        save_checkpoint::<f32>(&path, &dec, None, None).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9;
        std::fs::write(&path, &bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let (dec, _, grid) = toy();
        let dir = tempdir().unwrap();
        let path = dir.path().join("ckpt.dls");
        save_checkpoint::<f32>(&path, &dec, None, Some(&grid)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn empty_grid_roundtrips() {
        let (dec, _, _) = toy();
        let grid = LatentGrid::<f32>::new([0.0; 3], 0.2, 8, 0).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("ckpt.dls");
        save_checkpoint(&path, &dec, None, Some(&grid)).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.grid.unwrap().len(), 0);
    }
}
