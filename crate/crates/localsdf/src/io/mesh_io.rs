//! Mesh I/O: ASCII OBJ (v/f lines, 1-based indices) and binary little-endian
//! PLY. Non-triangular faces are fan-triangulated on load; the writer emits
//! OBJ by default (`save_mesh` picks by extension).
//!
//! Vertices are written with the shortest `f32` round-trip representation, so
//! save/load reproduces coordinates exactly at `f32` precision.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

pub fn save_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") | Some("PLY") => save_ply(mesh, path),
        _ => save_obj(mesh, path),
    }
}

pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") | Some("PLY") => load_ply(path),
        _ => load_obj(path),
    }
}

pub fn save_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v[0] as f32, v[1] as f32, v[2] as f32)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn load_obj(path: &Path) -> Result<TriangleMesh> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut mesh = TriangleMesh::default();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in coords.iter_mut() {
                    let tok = parts
                        .next()
                        .ok_or_else(|| parse_err(path, lineno, "vertex needs 3 coordinates"))?;
                    *c = tok
                        .parse::<f64>()
                        .map_err(|_| parse_err(path, lineno, format!("bad coordinate '{tok}'")))?;
                }
                mesh.vertices.push(coords);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in parts {
                    // Accept i, i/j, i/j/k, i//k; only the vertex index is used.
                    let v = tok.split('/').next().unwrap_or("");
                    let i: i64 = v
                        .parse()
                        .map_err(|_| parse_err(path, lineno, format!("bad face index '{tok}'")))?;
                    if i <= 0 {
                        return Err(parse_err(
                            path,
                            lineno,
                            format!("face index {i} must be positive (1-based)"),
                        ));
                    }
                    let zero_based = (i - 1) as usize;
                    if zero_based >= mesh.vertices.len() {
                        return Err(parse_err(
                            path,
                            lineno,
                            format!(
                                "face references vertex {i}, only {} defined",
                                mesh.vertices.len()
                            ),
                        ));
                    }
                    idx.push(zero_based as u32);
                }
                if idx.len() < 3 {
                    return Err(parse_err(path, lineno, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            // Comments, normals, texcoords, groups, materials: ignored.
            _ => {}
        }
    }
    Ok(mesh)
}

pub fn save_ply(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    )?;
    for v in &mesh.vertices {
        for c in v {
            w.write_all(&(*c as f32).to_le_bytes())?;
        }
    }
    for t in &mesh.triangles {
        w.write_all(&[3u8])?;
        for i in t {
            w.write_all(&i.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_ply(path: &Path) -> Result<TriangleMesh> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut header = Vec::new();
    // Read the header byte-wise up to end_header.
    loop {
        let mut line = Vec::new();
        loop {
            let mut b = [0u8; 1];
            if r.read(&mut b)? == 0 {
                return Err(Error::Format("ply: unterminated header".into()));
            }
            if b[0] == b'\n' {
                break;
            }
            line.push(b[0]);
        }
        let text = String::from_utf8_lossy(&line).trim().to_string();
        let done = text == "end_header";
        header.push(text);
        if done {
            break;
        }
        if header.len() > 100 {
            return Err(Error::Format("ply: header too long".into()));
        }
    }
    if header.first().map(String::as_str) != Some("ply") {
        return Err(Error::Format("ply: missing magic".into()));
    }
    if !header
        .iter()
        .any(|l| l == "format binary_little_endian 1.0")
    {
        return Err(Error::Format(
            "ply: only binary_little_endian 1.0 is supported".into(),
        ));
    }
    let mut n_vertices = None;
    let mut n_faces = None;
    let mut current = None;
    let mut vertex_props: Vec<String> = Vec::new();
    for line in &header {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("element") => {
                let kind = parts.next().unwrap_or("");
                let count: usize = parts
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::Format("ply: bad element count".into()))?;
                match kind {
                    "vertex" => {
                        n_vertices = Some(count);
                        current = Some("vertex");
                    }
                    "face" => {
                        n_faces = Some(count);
                        current = Some("face");
                    }
                    other => {
                        return Err(Error::Format(format!("ply: unsupported element '{other}'")))
                    }
                }
            }
            Some("property") => {
                if current == Some("vertex") {
                    vertex_props.push(line.clone());
                } else if current == Some("face")
                    && line != "property list uchar uint vertex_indices"
                    && line != "property list uchar int vertex_indices"
                {
                    return Err(Error::Format(format!("ply: unsupported face property '{line}'")));
                }
            }
            _ => {}
        }
    }
    let expected = ["property float x", "property float y", "property float z"];
    if vertex_props != expected {
        return Err(Error::Format(format!(
            "ply: vertex properties must be exactly float x, y, z (got {vertex_props:?})"
        )));
    }
    let n_vertices = n_vertices.ok_or_else(|| Error::Format("ply: no vertex element".into()))?;
    let n_faces = n_faces.unwrap_or(0);

    let mut mesh = TriangleMesh::default();
    let mut f32buf = [0u8; 4];
    for _ in 0..n_vertices {
        let mut v = [0.0f64; 3];
        for c in v.iter_mut() {
            r.read_exact(&mut f32buf)
                .map_err(|_| Error::Format("ply: truncated vertex data".into()))?;
            *c = f32::from_le_bytes(f32buf) as f64;
        }
        mesh.vertices.push(v);
    }
    for _ in 0..n_faces {
        let mut cnt = [0u8; 1];
        r.read_exact(&mut cnt)
            .map_err(|_| Error::Format("ply: truncated face data".into()))?;
        let n = cnt[0] as usize;
        if n < 3 {
            return Err(Error::Format(format!("ply: face with {n} vertices")));
        }
        let mut idx = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut f32buf)
                .map_err(|_| Error::Format("ply: truncated face data".into()))?;
            let i = u32::from_le_bytes(f32buf);
            if i as usize >= mesh.vertices.len() {
                return Err(Error::Format(format!("ply: face index {i} out of range")));
            }
            idx.push(i);
        }
        for k in 1..idx.len() - 1 {
            mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
        }
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("ply: trailing bytes".into()));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tetrahedron() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.25, 0.0],
                [0.0, 0.0, 0.5],
            ],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
    }

    #[test]
    fn obj_roundtrip_preserves_f32_vertices_and_faces() {
        let mesh = tetrahedron();
        let dir = tempdir().unwrap();
        let path = dir.path().join("tet.obj");
        save_obj(&mesh, &path).unwrap();
        let loaded = load_obj(&path).unwrap();
        assert_eq!(loaded.triangles, mesh.triangles);
        for (a, b) in loaded.vertices.iter().zip(&mesh.vertices) {
            for c in 0..3 {
                assert_eq!(a[c] as f32, b[c] as f32);
            }
        }
    }

    #[test]
    fn obj_quad_faces_fan_triangulate() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("quad.obj");
        std::fs::write(
            &path,
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n",
        )
        .unwrap();
        let mesh = load_obj(&path).unwrap();
        assert_eq!(mesh.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_out_of_range_index_reports_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n").unwrap();
        let err = load_obj(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn obj_malformed_coordinate_reports_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.obj");
        std::fs::write(&path, "v 0 zero 0\n").unwrap();
        let err = load_obj(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn ply_roundtrip_bit_exact() {
        let mesh = tetrahedron();
        let dir = tempdir().unwrap();
        let path = dir.path().join("tet.ply");
        save_ply(&mesh, &path).unwrap();
        let loaded = load_ply(&path).unwrap();
        assert_eq!(loaded.triangles, mesh.triangles);
        for (a, b) in loaded.vertices.iter().zip(&mesh.vertices) {
            for c in 0..3 {
                assert_eq!(a[c] as f32, b[c] as f32);
            }
        }
        // Save the loaded mesh again: byte-identical files.
        let path2 = dir.path().join("tet2.ply");
        save_ply(&loaded, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn ply_truncated_rejected() {
        let mesh = tetrahedron();
        let dir = tempdir().unwrap();
        let path = dir.path().join("tet.ply");
        save_ply(&mesh, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(load_ply(&path).is_err());
    }

    #[test]
    fn save_mesh_picks_format_by_extension() {
        let mesh = tetrahedron();
        let dir = tempdir().unwrap();
        let obj = dir.path().join("m.obj");
        let ply = dir.path().join("m.ply");
        save_mesh(&mesh, &obj).unwrap();
        save_mesh(&mesh, &ply).unwrap();
        assert!(std::fs::read_to_string(&obj).unwrap().starts_with("v "));
        assert!(std::fs::read(&ply).unwrap().starts_with(b"ply\n"));
        assert_eq!(load_mesh(&obj).unwrap().triangles, mesh.triangles);
        assert_eq!(load_mesh(&ply).unwrap().triangles, mesh.triangles);
    }
}
