use std::collections::HashMap;
use std::path::Path;

use super::{read_bytes, write_bytes, IoError};
use crate::geom::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

/// One element block of a PLY file. Scalar properties are stored column-wise,
/// list properties row-wise.
#[derive(Debug, Clone, Default)]
pub struct PlyElement {
    pub name: String,
    pub count: usize,
    pub scalars: HashMap<String, Vec<f64>>,
    pub lists: HashMap<String, Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default)]
pub struct PlyData {
    pub elements: Vec<PlyElement>,
}

impl PlyData {
    pub fn element(&self, name: &str) -> Option<&PlyElement> {
        self.elements.iter().find(|e| e.name == name)
    }
}

#[derive(PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
}

/// Reads ASCII or binary little-endian PLY.
pub fn read_ply(path: impl AsRef<Path>) -> Result<PlyData, IoError> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let bad = |m: String| IoError::format(path, m);

    let end =
        find_subslice(&bytes, b"end_header").ok_or_else(|| bad("missing end_header".into()))?;
    let mut body = end + b"end_header".len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) == Some(&b'\n') {
        body += 1;
    }
    let header =
        std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing `ply` magic".into()));
    }
    let mut format = None;
    let mut decls: Vec<(String, usize, Vec<Property>)> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", _] => format = Some(Format::Ascii),
            ["format", "binary_little_endian", _] => format = Some(Format::BinaryLe),
            ["format", other, ..] => return Err(bad(format!("unsupported format `{other}`"))),
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| bad(format!("bad element count `{count}`")))?;
                decls.push((name.to_string(), count, Vec::new()));
            }
            ["property", "list", ct, it, name] => {
                let (ct, it) = Scalar::parse(ct)
                    .zip(Scalar::parse(it))
                    .ok_or_else(|| bad(format!("bad list types in `{line}`")))?;
                decls
                    .last_mut()
                    .ok_or_else(|| bad("property before element".into()))?
                    .2
                    .push(Property::List(name.to_string(), ct, it));
            }
            ["property", ty, name] => {
                let ty =
                    Scalar::parse(ty).ok_or_else(|| bad(format!("bad property type `{ty}`")))?;
                decls
                    .last_mut()
                    .ok_or_else(|| bad("property before element".into()))?
                    .2
                    .push(Property::Scalar(name.to_string(), ty));
            }
            _ => return Err(bad(format!("unrecognized header line `{line}`"))),
        }
    }
    let format = format.ok_or_else(|| bad("missing format line".into()))?;

    let mut data = PlyData::default();
    let mut cursor = Cursor {
        bytes: &bytes[body..],
        pos: 0,
        ascii: format == Format::Ascii,
    };
    for (name, count, props) in decls {
        let mut el = PlyElement {
            name,
            count,
            ..Default::default()
        };
        for p in &props {
            match p {
                Property::Scalar(n, _) => {
                    el.scalars.insert(n.clone(), Vec::with_capacity(count));
                }
                Property::List(n, ..) => {
                    el.lists.insert(n.clone(), Vec::with_capacity(count));
                }
            }
        }
        for _ in 0..count {
            for p in &props {
                match p {
                    Property::Scalar(n, ty) => {
                        let v = cursor
                            .next(*ty)
                            .ok_or_else(|| bad("unexpected end of data".into()))?;
                        el.scalars.get_mut(n).unwrap().push(v);
                    }
                    Property::List(n, ct, it) => {
                        let len = cursor
                            .next(*ct)
                            .ok_or_else(|| bad("unexpected end of data".into()))?;
                        if !(len >= 0.0) {
                            return Err(bad("negative list length".into()));
                        }
                        let row = (0..len as usize)
                            .map(|_| cursor.next(*it))
                            .collect::<Option<Vec<f64>>>()
                            .ok_or_else(|| bad("unexpected end of data".into()))?;
                        el.lists.get_mut(n).unwrap().push(row);
                    }
                }
            }
        }
        data.elements.push(el);
    }
    Ok(data)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    ascii: bool,
}

impl Cursor<'_> {
    fn next(&mut self, ty: Scalar) -> Option<f64> {
        if self.ascii {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            let start = self.pos;
            while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            std::str::from_utf8(&self.bytes[start..self.pos])
                .ok()?
                .parse()
                .ok()
        } else {
            let n = ty.size();
            let b = self.bytes.get(self.pos..self.pos + n)?;
            self.pos += n;
            Some(ty.read_le(b))
        }
    }
}

fn find_subslice(h: &[u8], n: &[u8]) -> Option<usize> {
    h.windows(n.len()).position(|w| w == n)
}

fn vertex_points(path: &Path, data: &PlyData) -> Result<Vec<Point3>, IoError> {
    let v = data
        .element("vertex")
        .ok_or_else(|| IoError::format(path, "no vertex element"))?;
    let col = |n: &str| {
        v.scalars
            .get(n)
            .ok_or_else(|| IoError::format(path, format!("vertex has no `{n}` property")))
    };
    let (x, y, z) = (col("x")?, col("y")?, col("z")?);
    let pts: Vec<Point3> = (0..v.count)
        .map(|i| Point3::new(x[i], y[i], z[i]))
        .collect();
    if let Some(i) = pts.iter().position(|p| !p.is_finite()) {
        return Err(IoError::NonFiniteValue {
            path: path.to_path_buf(),
            record: i,
        });
    }
    Ok(pts)
}

/// Vertex positions and intensities (0 where the file has none).
pub fn read_ply_points(path: impl AsRef<Path>) -> Result<(Vec<Point3>, Vec<f64>), IoError> {
    let path = path.as_ref();
    let data = read_ply(path)?;
    let pts = vertex_points(path, &data)?;
    let intensity = data
        .element("vertex")
        .and_then(|v| v.scalars.get("intensity").cloned())
        .unwrap_or_else(|| vec![0.0; pts.len()]);
    Ok((pts, intensity))
}

/// Vertices and fan-triangulated faces.
pub fn read_ply_mesh(path: impl AsRef<Path>) -> Result<(Vec<Point3>, Vec<[u32; 3]>), IoError> {
    let path = path.as_ref();
    let data = read_ply(path)?;
    let pts = vertex_points(path, &data)?;
    let face = data
        .element("face")
        .ok_or_else(|| IoError::format(path, "no face element"))?;
    let rows = face
        .lists
        .get("vertex_indices")
        .or_else(|| face.lists.get("vertex_index"))
        .ok_or_else(|| IoError::format(path, "face has no vertex_indices list"))?;
    let mut tris = Vec::new();
    for row in rows {
        let idx: Vec<u32> = row.iter().map(|&v| v as u32).collect();
        for k in 1..idx.len().saturating_sub(1) {
            tris.push([idx[0], idx[k], idx[k + 1]]);
        }
    }
    Ok((pts, tris))
}

pub fn encode_ply(points: &[Point3], intensities: &[f64]) -> Vec<u8> {
    assert_eq!(points.len(), intensities.len());
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty float intensity\nend_header\n",
        points.len()
    );
    let mut out = header.into_bytes();
    out.reserve(points.len() * 16);
    for (p, &i) in points.iter().zip(intensities) {
        for v in [p.x, p.y, p.z, i] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_ply(
    points: &[Point3],
    intensities: &[f64],
    path: impl AsRef<Path>,
) -> Result<(), IoError> {
    write_bytes(path.as_ref(), &encode_ply(points, intensities))
}
