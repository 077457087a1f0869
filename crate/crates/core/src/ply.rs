//! PLY 1.0 reader and writer for vertex-only point clouds.
//!
//! Supports `ascii` and `binary_little_endian` bodies. The vertex element must
//! carry `x`, `y`, `z`; `red`/`green`/`blue` and `nx`/`ny`/`nz` are picked up
//! when all three components are present. Other elements (faces, edges) are
//! skipped with a warning.

use std::io::Write;

use crate::cloud::DEFAULT_BIT_DEPTH;
use crate::{Error, PointCloud, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
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
            Self::I8 => f64::from(b[0] as i8),
            Self::U8 => f64::from(b[0]),
            Self::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            Self::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            Self::I32 => f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Self::U32 => f64::from(u32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Self::F32 => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(ScalarType, String),
    List(ScalarType, ScalarType),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    body_offset: usize,
}

fn perr(offset: usize, message: impl Into<String>) -> Error {
    Error::Ply {
        offset,
        message: message.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut offset = 0usize;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut line_no = 0usize;

    loop {
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(perr(offset, "header not terminated by end_header"));
        };
        let line_start = offset;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| perr(line_start, "header line is not valid UTF-8"))?
            .trim_end_matches('\r');
        offset += nl + 1;
        line_no += 1;

        if line_no == 1 {
            if line != "ply" {
                return Err(perr(0, "missing 'ply' magic"));
            }
            continue;
        }
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                let kind = tok.next().unwrap_or_default();
                let version = tok.next().unwrap_or_default();
                if version != "1.0" {
                    return Err(perr(line_start, format!("unsupported PLY version '{version}'")));
                }
                encoding = Some(match kind {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLittleEndian,
                    other => return Err(perr(line_start, format!("unsupported format '{other}'"))),
                });
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| perr(line_start, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| perr(line_start, format!("element '{name}' has no valid count")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| perr(line_start, "property before any element"))?;
                let ty = tok.next().unwrap_or_default();
                let prop = if ty == "list" {
                    let count_ty = tok.next().unwrap_or_default();
                    let item_ty = tok.next().unwrap_or_default();
                    let c = ScalarType::from_name(count_ty)
                        .ok_or_else(|| perr(line_start, format!("unsupported property type '{count_ty}'")))?;
                    let i = ScalarType::from_name(item_ty)
                        .ok_or_else(|| perr(line_start, format!("unsupported property type '{item_ty}'")))?;
                    Property::List(c, i)
                } else {
                    let name = tok.next().unwrap_or_default();
                    let t = ScalarType::from_name(ty)
                        .ok_or_else(|| perr(line_start, format!("unsupported property type '{ty}'")))?;
                    Property::Scalar(t, name.to_string())
                };
                element.properties.push(prop);
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(perr(line_start, format!("unexpected header keyword '{other}'")));
            }
        }
    }

    let encoding = encoding.ok_or_else(|| perr(offset, "header has no format line"))?;
    Ok(Header {
        encoding,
        elements,
        body_offset: offset,
    })
}

/// Column indices of the vertex attributes we understand.
struct VertexLayout {
    xyz: [usize; 3],
    rgb: Option<[usize; 3]>,
    normal: Option<[usize; 3]>,
}

impl VertexLayout {
    fn resolve(element: &Element, at: usize) -> Result<Self> {
        let find = |name: &str| {
            element
                .properties
                .iter()
                .position(|p| matches!(p, Property::Scalar(_, n) if n == name))
        };
        let triple = |names: [&str; 3]| -> Option<[usize; 3]> {
            Some([find(names[0])?, find(names[1])?, find(names[2])?])
        };
        let xyz = triple(["x", "y", "z"]).ok_or_else(|| perr(at, "vertex element lacks x/y/z properties"))?;
        Ok(Self {
            xyz,
            rgb: triple(["red", "green", "blue"]),
            normal: triple(["nx", "ny", "nz"]),
        })
    }
}

/// Parses an ASCII or binary little-endian PLY stream into a point cloud.
pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| perr(header.body_offset, "no vertex element"))?;
    let layout = VertexLayout::resolve(&header.elements[vertex_pos], header.body_offset)?;
    for e in header
        .elements
        .iter()
        .filter(|e| e.name != "vertex" && e.count > 0)
    {
        log::warn!("ignoring PLY element '{}' ({} entries)", e.name, e.count);
    }

    let mut reader = BodyReader::new(bytes, header.body_offset, header.encoding);
    let mut cloud = PointCloud::default();
    let mut row = Vec::new();
    for (ei, element) in header.elements.iter().enumerate() {
        if ei != vertex_pos {
            for _ in 0..element.count {
                reader.skip_row(element)?;
            }
            continue;
        }
        let n = element.count;
        cloud.positions.reserve_exact(n);
        let mut colors = layout.rgb.map(|_| Vec::with_capacity(n));
        let mut normals = layout.normal.map(|_| Vec::with_capacity(n));
        for _ in 0..n {
            reader.read_row(element, &mut row)?;
            cloud.positions.push(layout.xyz.map(|i| row[i]));
            if let (Some(idx), Some(c)) = (layout.rgb, colors.as_mut()) {
                c.push(idx.map(|i| row[i].round().clamp(0.0, 255.0) as u8));
            }
            if let (Some(idx), Some(nv)) = (layout.normal, normals.as_mut()) {
                nv.push(idx.map(|i| row[i]));
            }
        }
        cloud.colors = colors;
        cloud.normals = normals;
    }
    cloud.bit_depth = infer_bit_depth(&cloud);
    Ok(cloud)
}

/// Smallest bit depth covering the coordinates (at least the 10-bit default).
fn infer_bit_depth(cloud: &PointCloud) -> u32 {
    let max = cloud
        .positions
        .iter()
        .flat_map(|p| p.iter().copied())
        .fold(0.0f64, f64::max);
    let needed = 64 - (max.ceil() as u64).leading_zeros();
    needed.max(DEFAULT_BIT_DEPTH)
}

struct BodyReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    encoding: Encoding,
}

impl<'a> BodyReader<'a> {
    fn new(bytes: &'a [u8], pos: usize, encoding: Encoding) -> Self {
        Self { bytes, pos, encoding }
    }

    fn scalar(&mut self, ty: ScalarType) -> Result<f64> {
        match self.encoding {
            Encoding::BinaryLittleEndian => {
                let end = self.pos + ty.size();
                if end > self.bytes.len() {
                    return Err(perr(self.pos, "truncated body"));
                }
                let v = ty.read_le(&self.bytes[self.pos..end]);
                self.pos = end;
                Ok(v)
            }
            Encoding::Ascii => {
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                    self.pos += 1;
                }
                let start = self.pos;
                while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(perr(start, "truncated body"));
                }
                let tok = std::str::from_utf8(&self.bytes[start..self.pos])
                    .map_err(|_| perr(start, "non-UTF-8 token"))?;
                tok.parse::<f64>()
                    .map_err(|_| perr(start, format!("invalid number '{tok}'")))
            }
        }
    }

    fn read_row(&mut self, element: &Element, row: &mut Vec<f64>) -> Result<()> {
        row.clear();
        for prop in &element.properties {
            match prop {
                Property::Scalar(t, _) => row.push(self.scalar(*t)?),
                Property::List(ct, it) => {
                    let at = self.pos;
                    let n = self.scalar(*ct)?;
                    if n < 0.0 || n.fract() != 0.0 {
                        return Err(perr(at, "invalid list length"));
                    }
                    for _ in 0..n as usize {
                        self.scalar(*it)?;
                    }
                    row.push(f64::NAN);
                }
            }
        }
        Ok(())
    }

    fn skip_row(&mut self, element: &Element) -> Result<()> {
        let mut scratch = Vec::new();
        self.read_row(element, &mut scratch)
    }
}

/// Property type used for a float attribute so that values survive exactly.
fn float_type(values: impl Iterator<Item = f64>) -> &'static str {
    let mut single = true;
    for v in values {
        if f64::from(v as f32) != v {
            single = false;
            break;
        }
    }
    if single {
        "float"
    } else {
        "double"
    }
}

/// Serializes a cloud as PLY. Float attributes are written as `float` when
/// every value is exactly representable in single precision and as `double`
/// otherwise, so `parse_ply(write_ply(c))` reproduces `c` bit for bit.
pub fn write_ply(cloud: &PointCloud, encoding: Encoding) -> Result<Vec<u8>> {
    cloud.validate_lengths()?;
    let pos_ty = float_type(cloud.positions.iter().flat_map(|p| p.iter().copied()));
    let nrm_ty = cloud
        .normals
        .as_ref()
        .map(|n| float_type(n.iter().flat_map(|p| p.iter().copied())));

    let mut out = Vec::with_capacity(64 + cloud.len() * 16);
    let format = match encoding {
        Encoding::Ascii => "ascii",
        Encoding::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(out, "ply\nformat {format} 1.0\nelement vertex {}", cloud.len())?;
    for c in ["x", "y", "z"] {
        writeln!(out, "property {pos_ty} {c}")?;
    }
    if cloud.colors.is_some() {
        for c in ["red", "green", "blue"] {
            writeln!(out, "property uchar {c}")?;
        }
    }
    if let Some(t) = nrm_ty {
        for c in ["nx", "ny", "nz"] {
            writeln!(out, "property {t} {c}")?;
        }
    }
    writeln!(out, "end_header")?;

    let put_float = |out: &mut Vec<u8>, ty: &str, v: f64| match ty {
        "float" => out.extend_from_slice(&(v as f32).to_le_bytes()),
        _ => out.extend_from_slice(&v.to_le_bytes()),
    };
    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        let c = cloud.colors.as_ref().map(|c| c[i]);
        let n = cloud.normals.as_ref().map(|n| n[i]);
        match encoding {
            Encoding::Ascii => {
                write!(out, "{} {} {}", p[0], p[1], p[2])?;
                if let Some(c) = c {
                    write!(out, " {} {} {}", c[0], c[1], c[2])?;
                }
                if let Some(n) = n {
                    write!(out, " {} {} {}", n[0], n[1], n[2])?;
                }
                out.push(b'\n');
            }
            Encoding::BinaryLittleEndian => {
                for v in p {
                    put_float(&mut out, pos_ty, v);
                }
                if let Some(c) = c {
                    out.extend_from_slice(&c);
                }
                if let (Some(n), Some(t)) = (n, nrm_ty) {
                    for v in n {
                        put_float(&mut out, t, v);
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn read_ply_file(path: impl AsRef<std::path::Path>) -> Result<PointCloud> {
    parse_ply(&std::fs::read(path)?)
}

pub fn write_ply_file(
    path: impl AsRef<std::path::Path>,
    cloud: &PointCloud,
    encoding: Encoding,
) -> Result<()> {
    std::fs::write(path, write_ply(cloud, encoding)?)?;
    Ok(())
}

impl PointCloud {
    fn validate_lengths(&self) -> Result<()> {
        let n = self.len();
        let bad = self.colors.as_ref().is_some_and(|c| c.len() != n)
            || self.normals.as_ref().is_some_and(|v| v.len() != n);
        if bad {
            return Err(Error::DimensionMismatch(
                "attribute length differs from point count".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_single_colored_vertex() {
        let src = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n\
property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n0 0 0 255 0 0\n";
        let c = parse_ply(src).unwrap();
        assert_eq!(c.positions, vec![[0.0; 3]]);
        assert_eq!(c.colors, Some(vec![[255, 0, 0]]));
        assert!(c.normals.is_none());
    }

    #[test]
    fn hand_written_binary_le() {
        let mut src =
            b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
                .to_vec();
        for v in [1.5f32, -2.0, 3.25, 0.0, 1.0, 1023.0] {
            src.extend_from_slice(&v.to_le_bytes());
        }
        let c = parse_ply(&src).unwrap();
        assert_eq!(c.positions, vec![[1.5, -2.0, 3.25], [0.0, 1.0, 1023.0]]);
        assert!(c.colors.is_none());
        assert_eq!(write_ply(&c, Encoding::BinaryLittleEndian).unwrap(), src);
    }

    #[test]
    fn truncated_ascii_body() {
        let src = b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 1 1\n";
        match parse_ply(src) {
            Err(Error::Ply { offset, message }) => {
                assert_eq!(offset, src.len());
                assert!(message.contains("truncated"));
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_binary_body_reports_offset() {
        let mut src = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        let header_len = src.len();
        src.extend_from_slice(&[0u8; 16]);
        match parse_ply(&src) {
            Err(Error::Ply { offset, .. }) => assert_eq!(offset, header_len + 16),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_headers() {
        assert!(parse_ply(b"plx\n").is_err());
        assert!(parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n").is_err());
        assert!(parse_ply(b"ply\nformat binary_big_endian 1.0\nend_header\n").is_err());
        let bad_type = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float128 x\nend_header\n";
        match parse_ply(bad_type) {
            Err(Error::Ply { offset, message }) => {
                assert_eq!(offset, "ply\nformat ascii 1.0\nelement vertex 1\n".len());
                assert!(message.contains("float128"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn faces_are_skipped() {
        let src = b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n\
element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        assert_eq!(parse_ply(src).unwrap().len(), 3);
    }

    #[test]
    fn empty_cloud_writes_header_only() {
        let out = write_ply(&PointCloud::default(), Encoding::Ascii).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert!(text.contains("element vertex 0\n"));
        assert!(text.ends_with("end_header\n"));
        assert!(parse_ply(&out).unwrap().is_empty());
    }

    #[test]
    fn ascii_one_row() {
        let c = PointCloud::new(vec![[1.0, 2.0, 3.0]])
            .with_colors(vec![[4, 5, 6]])
            .unwrap();
        let text = String::from_utf8(write_ply(&c, Encoding::Ascii).unwrap()).unwrap();
        let body = text.split("end_header\n").nth(1).unwrap();
        assert_eq!(body, "1 2 3 4 5 6\n");
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn arb_cloud() -> impl Strategy<Value = PointCloud> {
            (0usize..100, any::<bool>(), any::<bool>(), any::<bool>()).prop_flat_map(
                |(n, colored, with_normals, integral)| {
                    (
                        prop::collection::vec(prop::array::uniform3(-1e4f64..1e4), n),
                        prop::collection::vec(prop::array::uniform3(any::<u8>()), n),
                        prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), n),
                    )
                        .prop_map(move |(p, c, nv)| {
                            let p = if integral {
                                p.into_iter().map(|v| v.map(f64::round)).collect()
                            } else {
                                p
                            };
                            let mut cloud = PointCloud::new(p);
                            if colored {
                                cloud.colors = Some(c);
                            }
                            if with_normals {
                                cloud.normals = Some(
                                    nv.into_iter()
                                        .map(|v| {
                                            let l = crate::cloud::norm(v).max(1e-9);
                                            v.map(|x| x / l)
                                        })
                                        .collect(),
                                );
                            }
                            cloud
                        })
                },
            )
        }

        proptest! {
            #[test]
            fn roundtrip_both_encodings(c in arb_cloud()) {
                for enc in [Encoding::Ascii, Encoding::BinaryLittleEndian] {
                    let bytes = write_ply(&c, enc).unwrap();
                    let back = parse_ply(&bytes).unwrap();
                    prop_assert_eq!(&back.positions, &c.positions);
                    prop_assert_eq!(&back.colors, &c.colors);
                    prop_assert_eq!(&back.normals, &c.normals);
                    if enc == Encoding::BinaryLittleEndian {
                        prop_assert_eq!(write_ply(&back, enc).unwrap(), bytes);
                    }
                }
            }
        }
    }
}
