//! Wavefront OBJ reading and writing (positions and triangular faces only).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::surface::ball::V3;
use crate::surface::TriMesh;

fn parse_index(token: &str, count: usize, line: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let i: i64 = head
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad face index {token:?}")))?;
    let idx = if i > 0 { i - 1 } else { count as i64 + i };
    if i == 0 || idx < 0 || idx >= count as i64 {
        return Err(Error::Parse(format!("line {line}: face index {i} out of range")));
    }
    Ok(idx as usize)
}

/// Vertices and fan-triangulated faces of an OBJ document.
pub fn parse_obj_raw(text: &str) -> Result<(Vec<V3>, Vec<[usize; 3]>)> {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let c: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Parse(format!("line {line}: bad vertex")))?;
                if c.len() != 3 || c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parse(format!(
                        "line {line}: a vertex needs 3 finite coordinates"
                    )));
                }
                verts.push(V3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = tokens
                    .map(|t| parse_index(t, verts.len(), line))
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(Error::Parse(format!("line {line}: a face needs at least 3 vertices")));
                }
                for j in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[j], idx[j + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((verts, faces))
}

pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let (v, f) = parse_obj_raw(text)?;
    TriMesh::new(v, f)
}

pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text).map_err(|e| match e {
        Error::Parse(m) | Error::InvalidMesh(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// OBJ text with shortest round-trip float formatting.
pub fn format_obj(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}
