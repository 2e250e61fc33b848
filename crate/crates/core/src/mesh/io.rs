//! OBJ and OFF readers, OBJ writers (faces, polylines, grouped faces).
//!
//! The OBJ reader understands one extension, a comment line
//! `#@period <lx> <ly>`, which marks the planar vertex grid as a flat torus
//! with the given periods. Other readers simply ignore it.

use std::io::{BufRead, Write};
use std::str::FromStr;

use super::{HalfEdgeMesh, Vec3, VertexId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Off,
}

impl MeshFormat {
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "off" => Some(MeshFormat::Off),
            _ => None,
        }
    }
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "off" => Ok(MeshFormat::Off),
            other => Err(Error::Config(format!("unknown mesh format '{other}'"))),
        }
    }
}

pub fn load_mesh<R: BufRead>(source: R, format: MeshFormat) -> Result<HalfEdgeMesh> {
    match format {
        MeshFormat::Obj => read_obj(source),
        MeshFormat::Off => read_off(source),
    }
}

pub fn load_mesh_file(path: &std::path::Path, format: Option<MeshFormat>) -> Result<HalfEdgeMesh> {
    let format = match format.or_else(|| MeshFormat::from_path(path)) {
        Some(f) => f,
        None => return Err(Error::Config(format!("cannot infer mesh format of {}", path.display()))),
    };
    let file = std::fs::File::open(path)?;
    load_mesh(std::io::BufReader::new(file), format)
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::parse(line, "missing coordinate"))?;
    tok.parse::<f64>()
        .map_err(|_| Error::parse(line, format!("bad number '{tok}'")))
}

fn read_obj<R: BufRead>(source: R) -> Result<HalfEdgeMesh> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    let mut period = None;
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("#@period") {
            let mut it = rest.split_whitespace();
            let lx = parse_f64(it.next(), lineno)?;
            let ly = parse_f64(it.next(), lineno)?;
            if !(lx > 0.0 && ly > 0.0) {
                return Err(Error::parse(lineno, "periods must be positive"));
            }
            period = Some([lx, ly]);
            continue;
        }
        let mut it = trimmed.split_whitespace();
        match it.next() {
            Some("v") => {
                let x = parse_f64(it.next(), lineno)?;
                let y = parse_f64(it.next(), lineno)?;
                let z = match it.next() {
                    Some(t) => parse_f64(Some(t), lineno)?,
                    None => 0.0,
                };
                positions.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let mut idxs = Vec::with_capacity(3);
                for tok in it {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| Error::parse(lineno, format!("bad face index '{tok}'")))?;
                    let resolved = if i > 0 {
                        (i - 1) as usize
                    } else if i < 0 && (-i) as usize <= positions.len() {
                        positions.len() - (-i) as usize
                    } else {
                        return Err(Error::parse(lineno, format!("face index {i} out of range")));
                    };
                    idxs.push(resolved);
                }
                if idxs.len() != 3 {
                    return Err(Error::NonTriangle {
                        line: lineno,
                        count: idxs.len(),
                    });
                }
                faces.push([idxs[0], idxs[1], idxs[2]]);
            }
            _ => {}
        }
    }
    for (f, tri) in faces.iter().enumerate() {
        if tri.iter().any(|&v| v >= positions.len()) {
            return Err(Error::parse(0, format!("face {f} references a missing vertex")));
        }
    }
    if faces.is_empty() {
        return Err(Error::parse(0, "no faces"));
    }
    HalfEdgeMesh::from_faces(positions, &faces, period)
}

fn read_off<R: BufRead>(source: R) -> Result<HalfEdgeMesh> {
    // Tokens with their line numbers, comments stripped.
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("");
        tokens.extend(content.split_whitespace().map(|t| (idx + 1, t.to_string())));
    }
    let mut it = tokens.into_iter();
    match it.next() {
        Some((_, h)) if h == "OFF" => {}
        Some((l, h)) => return Err(Error::parse(l, format!("expected OFF header, got '{h}'"))),
        None => return Err(Error::parse(1, "empty file")),
    }
    let next_usize = |it: &mut std::vec::IntoIter<(usize, String)>, what: &str| -> Result<(usize, usize)> {
        let (l, t) = it
            .next()
            .ok_or_else(|| Error::parse(0, format!("unexpected end of file reading {what}")))?;
        let v = t
            .parse::<usize>()
            .map_err(|_| Error::parse(l, format!("bad {what} '{t}'")))?;
        Ok((l, v))
    };
    let (_, nv) = next_usize(&mut it, "vertex count")?;
    let (_, nf) = next_usize(&mut it, "face count")?;
    let (_, _ne) = next_usize(&mut it, "edge count")?;
    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut c = [0.0; 3];
        for slot in &mut c {
            let (l, t) = it
                .next()
                .ok_or_else(|| Error::parse(0, "unexpected end of file in vertex block"))?;
            *slot = t.parse().map_err(|_| Error::parse(l, format!("bad number '{t}'")))?;
        }
        positions.push(Vec3::new(c[0], c[1], c[2]));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, count) = next_usize(&mut it, "face size")?;
        let mut idxs = Vec::with_capacity(count);
        for _ in 0..count {
            let (l, v) = next_usize(&mut it, "face index")?;
            if v >= nv {
                return Err(Error::parse(l, format!("face index {v} out of range")));
            }
            idxs.push(v);
        }
        if count != 3 {
            return Err(Error::NonTriangle { line, count });
        }
        faces.push([idxs[0], idxs[1], idxs[2]]);
    }
    HalfEdgeMesh::from_faces(positions, &faces, None)
}

/// Writes the mesh as OBJ (1-based indices). Periodic meshes carry a
/// `#@period` line.
pub fn write_obj<W: Write>(mesh: &HalfEdgeMesh, out: &mut W) -> std::io::Result<()> {
    if let Some([lx, ly]) = mesh.period() {
        writeln!(out, "#@period {lx:.16e} {ly:.16e}")?;
    }
    for p in mesh.positions() {
        writeln!(out, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
    }
    for f in 0..mesh.n_faces() {
        let [a, b, c] = mesh.face_vertices(f);
        writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1)?;
    }
    Ok(())
}

/// Writes a set of polylines as OBJ `l` records, one group per polyline.
pub fn write_obj_polylines<W: Write>(polylines: &[(String, Vec<Vec3>)], out: &mut W) -> std::io::Result<()> {
    let mut base = 1usize;
    for (name, pts) in polylines {
        if pts.len() < 2 {
            continue;
        }
        writeln!(out, "g {name}")?;
        for p in pts {
            writeln!(out, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
        }
        let ids: Vec<String> = (0..pts.len()).map(|i| (base + i).to_string()).collect();
        writeln!(out, "l {}", ids.join(" "))?;
        base += pts.len();
    }
    Ok(())
}

/// Writes labelled polygon groups (`g <name>` followed by one `f` per polygon).
pub fn write_obj_groups<W: Write>(groups: &[(String, Vec<Vec<Vec3>>)], out: &mut W) -> std::io::Result<()> {
    let mut base = 1usize;
    for (name, polys) in groups {
        writeln!(out, "g {name}")?;
        for poly in polys {
            for p in poly {
                writeln!(out, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
            }
            let ids: Vec<String> = (0..poly.len()).map(|i| (base + i).to_string()).collect();
            writeln!(out, "f {}", ids.join(" "))?;
            base += poly.len();
        }
    }
    Ok(())
}

/// Convenience for tests and generators: mesh from raw arrays.
pub fn mesh_from_arrays(positions: &[[f64; 3]], faces: &[[VertexId; 3]]) -> Result<HalfEdgeMesh> {
    HalfEdgeMesh::from_faces(
        positions.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
        faces,
        None,
    )
}
