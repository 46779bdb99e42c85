//! Depth frame format (`DLSD`): magic, `u32` width/height, `f32` fx, fy, cx,
//! cy, `f32 x16` row-major camera-to-world matrix, then row-major `f32`
//! depth. Little-endian throughout; round trips are bit-exact.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sampling::DepthFrame;

pub const MAGIC: &[u8; 4] = b"DLSD";

pub fn save_depth(frame: &DepthFrame, path: &Path) -> Result<()> {
    frame.validate().map_err(|e| Error::Data(e.to_string()))?;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&frame.width.to_le_bytes())?;
    w.write_all(&frame.height.to_le_bytes())?;
    for v in [frame.fx, frame.fy, frame.cx, frame.cy] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in frame.pose {
        w.write_all(&v.to_le_bytes())?;
    }
    for d in &frame.depth {
        w.write_all(&d.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_depth(path: &Path) -> Result<DepthFrame> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated depth file".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad depth magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut BufReader<std::fs::File>| -> Result<u32> {
        r.read_exact(&mut u32buf)
            .map_err(|_| Error::Format("truncated depth header".into()))?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let width = read_u32(&mut r)?;
    let height = read_u32(&mut r)?;
    if width == 0 || height == 0 {
        return Err(Error::Format("depth frame must not be 0x0".into()));
    }
    let mut f32buf = [0u8; 4];
    let mut read_f32 = |r: &mut BufReader<std::fs::File>, what: &str| -> Result<f32> {
        r.read_exact(&mut f32buf)
            .map_err(|_| Error::Format(format!("truncated depth file while reading {what}")))?;
        Ok(f32::from_le_bytes(f32buf))
    };
    let fx = read_f32(&mut r, "fx")?;
    let fy = read_f32(&mut r, "fy")?;
    let cx = read_f32(&mut r, "cx")?;
    let cy = read_f32(&mut r, "cy")?;
    let mut pose = [0.0f32; 16];
    for v in pose.iter_mut() {
        *v = read_f32(&mut r, "pose")?;
    }
    let n = (width as usize) * (height as usize);
    let mut depth = Vec::with_capacity(n);
    for _ in 0..n {
        depth.push(read_f32(&mut r, "depth payload")?);
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after depth payload".into()));
    }
    let frame = DepthFrame {
        width,
        height,
        fx,
        fy,
        cx,
        cy,
        pose,
        depth,
    };
    frame.validate()?;
    Ok(frame)
}
