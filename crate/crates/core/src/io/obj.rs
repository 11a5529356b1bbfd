use std::fmt::Write as _;
use std::path::Path;

use super::{read_bytes, write_bytes, IoError};
use crate::geom::{Point3, TriangleMesh};

/// Parses `v` and `f` records; polygons are fan-triangulated, negative indices
/// count back from the last vertex. Everything else is ignored.
pub fn parse_obj(text: &str, path: &Path) -> Result<(Vec<Point3>, Vec<[u32; 3]>), IoError> {
    let mut verts = Vec::new();
    let mut tris = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let err = |message: String| IoError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| err(format!("bad coordinate `{t}`")))
                    })
                    .collect::<Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(err("vertex needs 3 coordinates".into()));
                }
                let p = Point3::new(c[0], c[1], c[2]);
                if !p.is_finite() {
                    return Err(err("non-finite vertex".into()));
                }
                verts.push(p);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let k: i64 = first
                        .parse()
                        .map_err(|_| err(format!("bad face index `{t}`")))?;
                    let resolved = match k {
                        0 => return Err(err("face index 0".into())),
                        k if k > 0 => k - 1,
                        k => verts.len() as i64 + k,
                    };
                    if resolved < 0 || resolved >= verts.len() as i64 {
                        return Err(err(format!("face index {k} out of range")));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(err("face needs at least 3 vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    tris.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((verts, tris))
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<(Vec<Point3>, Vec<[u32; 3]>), IoError> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|_| IoError::format(path, "not UTF-8"))?;
    parse_obj(&text, path)
}

pub fn write_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut s = String::new();
    for v in mesh.vertices() {
        writeln!(s, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for f in mesh.indices() {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    write_bytes(path.as_ref(), s.as_bytes())
}
