//! ASCII OBJ writing and reading (`v`, `vn`, `f` records only).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::TriMesh;

#[derive(Debug, Error)]
pub enum ObjError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot export an empty mesh")]
    Empty,
}

pub fn write_obj(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(64 * (mesh.vertices.len() + mesh.triangles.len()));
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {:.9} {:.9} {:.9}", v[0], v[1], v[2]);
    }
    for n in &mesh.normals {
        let _ = writeln!(s, "vn {:.6} {:.6} {:.6}", n[0], n[1], n[2]);
    }
    let with_normals = mesh.normals.len() == mesh.vertices.len();
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| i + 1);
        if with_normals {
            let _ = writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}");
        } else {
            let _ = writeln!(s, "f {a} {b} {c}");
        }
    }
    s
}

/// Scales `mesh` so its longest bounding-box edge is `longest_mm` and writes
/// it to `path`. Returns the scaled mesh.
pub fn export_obj(mesh: &TriMesh, path: &Path, longest_mm: f64) -> Result<TriMesh, ObjError> {
    if mesh.is_empty() {
        return Err(ObjError::Empty);
    }
    let scaled = mesh.scaled_to_longest(longest_mm);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| ObjError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, write_obj(&scaled)).map_err(|source| ObjError::Io { path: path.to_path_buf(), source })?;
    Ok(scaled)
}

fn parse_floats(parts: &[&str], line: usize) -> Result<[f64; 3], ObjError> {
    if parts.len() < 3 {
        return Err(ObjError::Parse { line, message: "expected three coordinates".into() });
    }
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = parts[k].parse().map_err(|e| ObjError::Parse { line, message: format!("`{}`: {e}", parts[k]) })?;
    }
    Ok(out)
}

fn resolve(token: &str, count: usize, line: usize) -> Result<u32, ObjError> {
    let first = token.split('/').next().unwrap_or("");
    let raw: i64 = first.parse().map_err(|e| ObjError::Parse { line, message: format!("`{token}`: {e}") })?;
    let idx = if raw > 0 { raw - 1 } else { count as i64 + raw };
    if raw == 0 || idx < 0 || idx >= count as i64 {
        return Err(ObjError::Parse { line, message: format!("vertex index {raw} out of range") });
    }
    Ok(idx as u32)
}

/// Parses an OBJ document; polygons are fan-triangulated.
pub fn parse_obj(text: &str) -> Result<TriMesh, ObjError> {
    let mut mesh = TriMesh::default();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut parts = content.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        match tag {
            "v" => mesh.vertices.push(parse_floats(&rest, line)?),
            "vn" => mesh.normals.push(parse_floats(&rest, line)?),
            "f" => {
                if rest.len() < 3 {
                    return Err(ObjError::Parse { line, message: "face needs at least three vertices".into() });
                }
                let ids = rest.iter().map(|t| resolve(t, mesh.vertices.len(), line)).collect::<Result<Vec<_>, _>>()?;
                for q in 1..ids.len() - 1 {
                    mesh.triangles.push([ids[0], ids[q], ids[q + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

pub fn read_obj(path: &Path) -> Result<TriMesh, ObjError> {
    let text = fs::read_to_string(path).map_err(|source| ObjError::Io { path: path.to_path_buf(), source })?;
    parse_obj(&text)
}
