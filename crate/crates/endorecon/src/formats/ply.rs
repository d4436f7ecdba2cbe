//! PLY meshes and sparse clouds.
//!
//! Meshes are written as binary little-endian PLY with float positions,
//! optional uchar colours and `uint` face indices. The reader accepts ASCII
//! and both binary encodings, ignores unknown elements and properties, and
//! fan-triangulates polygons.

use endorecon_core::{SparsePointCloud, TriangleMesh, Vec3};

use super::ByteReader;
use crate::error::FormatError;

type FResult<T> = std::result::Result<T, FormatError>;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

impl Element {
    fn find(&self, name: &str) -> Option<usize> {
        self.props.iter().position(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Field {
    Scalar(f64),
    List(Vec<f64>),
}

impl Field {
    fn scalar(&self) -> f64 {
        match self {
            Field::Scalar(x) => *x,
            Field::List(_) => f64::NAN,
        }
    }
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    body: usize,
}

fn parse_header(bytes: &[u8]) -> FResult<Header> {
    let mut pos = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut first = true;
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| FormatError::new(pos, "PLY header is not terminated by end_header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| FormatError::new(pos, "PLY header is not valid text"))?
            .trim_end_matches('\r');
        let at = pos;
        pos += end + 1;
        let words: Vec<&str> = line.split_whitespace().collect();
        if first {
            if words != ["ply"] {
                return Err(FormatError::new(0, "missing ply magic line"));
            }
            first = false;
            continue;
        }
        let bad = |what: &str| FormatError::new(at, format!("malformed {what} line `{line}`"));
        match words.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                encoding = Some(match words.get(1).copied() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::BinaryLe,
                    Some("binary_big_endian") => Encoding::BinaryBe,
                    _ => return Err(bad("format")),
                });
            }
            Some("element") => {
                let [_, name, count] = words[..] else { return Err(bad("element")) };
                let count = count.parse().map_err(|_| bad("element"))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| bad("property"))?;
                let ty = |s: &str| Scalar::parse(s).ok_or_else(|| bad("property"));
                let prop = match words[..] {
                    [_, "list", c, i, name] => {
                        let count = ty(c)?;
                        if !count.is_integer() {
                            return Err(bad("property"));
                        }
                        Property { name: name.to_string(), kind: PropKind::List { count, item: ty(i)? } }
                    }
                    [_, t, name] => Property { name: name.to_string(), kind: PropKind::Scalar(ty(t)?) },
                    _ => return Err(bad("property")),
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(_) => return Err(bad("header")),
        }
    }
    let encoding = encoding.ok_or_else(|| FormatError::new(0, "PLY header has no format line"))?;
    Ok(Header { encoding, elements, body: pos })
}

enum Body<'a> {
    Binary { r: ByteReader<'a>, big_endian: bool },
    Ascii { text: &'a [u8], pos: usize },
}

impl Body<'_> {
    fn offset(&self) -> usize {
        match self {
            Body::Binary { r, .. } => r.offset(),
            Body::Ascii { pos, .. } => *pos,
        }
    }

    fn skip_whitespace(&mut self) {
        if let Body::Ascii { text, pos } = self {
            while *pos < text.len() && text[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
        }
    }

    fn scalar(&mut self, ty: Scalar) -> FResult<f64> {
        match self {
            Body::Binary { r, big_endian } => {
                let b = r.take(ty.size())?;
                let mut a = [0u8; 8];
                a[..b.len()].copy_from_slice(b);
                if *big_endian {
                    a[..b.len()].reverse();
                }
                Ok(match ty {
                    Scalar::I8 => a[0] as i8 as f64,
                    Scalar::U8 => a[0] as f64,
                    Scalar::I16 => i16::from_le_bytes([a[0], a[1]]) as f64,
                    Scalar::U16 => u16::from_le_bytes([a[0], a[1]]) as f64,
                    Scalar::I32 => i32::from_le_bytes([a[0], a[1], a[2], a[3]]) as f64,
                    Scalar::U32 => u32::from_le_bytes([a[0], a[1], a[2], a[3]]) as f64,
                    Scalar::F32 => f32::from_le_bytes([a[0], a[1], a[2], a[3]]) as f64,
                    Scalar::F64 => f64::from_le_bytes(a),
                })
            }
            Body::Ascii { .. } => {
                self.skip_whitespace();
                let Body::Ascii { text, pos } = self else { unreachable!() };
                let start = *pos;
                while *pos < text.len() && !text[*pos].is_ascii_whitespace() {
                    *pos += 1;
                }
                if start == *pos {
                    return Err(FormatError::new(start, "unexpected end of file"));
                }
                let token = std::str::from_utf8(&text[start..*pos]).unwrap_or("");
                let value = if ty.is_integer() {
                    token.parse::<i64>().ok().map(|v| v as f64)
                } else {
                    token.parse::<f64>().ok()
                };
                value.ok_or_else(|| FormatError::new(start, format!("cannot parse `{token}` as a number")))
            }
        }
    }

    fn field(&mut self, kind: &PropKind) -> FResult<Field> {
        match *kind {
            PropKind::Scalar(ty) => Ok(Field::Scalar(self.scalar(ty)?)),
            PropKind::List { count, item } => {
                let at = self.offset();
                let n = self.scalar(count)?;
                if n < 0.0 {
                    return Err(FormatError::new(at, "negative list length"));
                }
                (0..n as usize).map(|_| self.scalar(item)).collect::<FResult<_>>().map(Field::List)
            }
        }
    }
}

/// Walks every element row, handing `(element, row offset, fields)` to `visit`.
fn parse_body(
    bytes: &[u8],
    mut visit: impl FnMut(&Element, usize, &[Field]) -> FResult<()>,
) -> FResult<Vec<Element>> {
    let header = parse_header(bytes)?;
    let mut body = match header.encoding {
        Encoding::Ascii => Body::Ascii { text: bytes, pos: header.body },
        Encoding::BinaryLe => Body::Binary { r: ByteReader::at(bytes, header.body), big_endian: false },
        Encoding::BinaryBe => Body::Binary { r: ByteReader::at(bytes, header.body), big_endian: true },
    };
    let mut row = Vec::new();
    for el in &header.elements {
        for _ in 0..el.count {
            body.skip_whitespace();
            let at = body.offset();
            row.clear();
            for p in &el.props {
                row.push(body.field(&p.kind)?);
            }
            visit(el, at, &row)?;
        }
    }
    Ok(header.elements)
}

fn finite(x: f64, at: usize) -> FResult<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(FormatError::new(at, "non-finite vertex coordinate"))
    }
}

fn color_channel(x: f64, ty: &PropKind) -> u8 {
    match ty {
        PropKind::Scalar(Scalar::F32 | Scalar::F64) => (x * 255.0).round().clamp(0.0, 255.0) as u8,
        _ => x.clamp(0.0, 255.0) as u8,
    }
}

/// Reads a mesh with required `x y z`, optional `red green blue` and a
/// `vertex_indices` (or `vertex_index`) face list.
pub fn read_mesh(bytes: &[u8]) -> FResult<TriangleMesh> {
    let header = parse_header(bytes)?;
    let vertex_el = header
        .elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| FormatError::new(0, "PLY has no vertex element"))?;
    let xyz: Vec<usize> = ["x", "y", "z"]
        .iter()
        .map(|n| vertex_el.find(n).ok_or_else(|| FormatError::new(0, format!("vertex element lacks `{n}`"))))
        .collect::<FResult<_>>()?;
    let rgb: Option<Vec<usize>> = ["red", "green", "blue"].iter().map(|n| vertex_el.find(n)).collect();
    let face_prop = header
        .elements
        .iter()
        .find(|e| e.name == "face")
        .and_then(|e| e.find("vertex_indices").or_else(|| e.find("vertex_index")));

    let mut vertices = Vec::with_capacity(vertex_el.count);
    let mut colors = rgb.as_ref().map(|_| Vec::with_capacity(vertex_el.count));
    let mut triangles = Vec::new();
    let n_vertices = vertex_el.count;
    parse_body(bytes, |el, at, row| {
        match el.name.as_str() {
            "vertex" => {
                vertices.push(Vec3::new(
                    finite(row[xyz[0]].scalar(), at)?,
                    finite(row[xyz[1]].scalar(), at)?,
                    finite(row[xyz[2]].scalar(), at)?,
                ));
                if let (Some(rgb), Some(colors)) = (&rgb, colors.as_mut()) {
                    colors.push([0, 1, 2].map(|c| color_channel(row[rgb[c]].scalar(), &el.props[rgb[c]].kind)));
                }
            }
            "face" => {
                let Some(fp) = face_prop else { return Ok(()) };
                let Field::List(idx) = &row[fp] else {
                    return Err(FormatError::new(at, "face indices are not a list"));
                };
                if idx.len() < 3 {
                    return Err(FormatError::new(at, "face with fewer than 3 vertices"));
                }
                if let Some(&bad) = idx.iter().find(|&&i| i < 0.0 || i >= n_vertices as f64) {
                    return Err(FormatError::new(at, format!("vertex index {bad} out of range")));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0] as u32, idx[k] as u32, idx[k + 1] as u32]);
                }
            }
            _ => {}
        }
        Ok(())
    })?;
    TriangleMesh::new(vertices, colors, triangles).map_err(|e| FormatError::new(header.body, e.to_string()))
}

/// Binary little-endian mesh with float positions and, when present, uchar colours.
pub fn write_mesh(mesh: &TriangleMesh) -> Vec<u8> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header += &format!("element vertex {}\n", mesh.vertices.len());
    header += "property float x\nproperty float y\nproperty float z\n";
    if mesh.colors.is_some() {
        header += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    }
    header += &format!("element face {}\n", mesh.triangles.len());
    header += "property list uchar uint vertex_indices\nend_header\n";
    let mut out = header.into_bytes();
    for (i, v) in mesh.vertices.iter().enumerate() {
        for x in [v.x, v.y, v.z] {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
        if let Some(c) = &mesh.colors {
            out.extend_from_slice(&c[i]);
        }
    }
    for t in &mesh.triangles {
        out.push(3);
        for i in t {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    out
}

/// ASCII cloud: double `x y z` plus a `uint` list of observing frame ids.
pub fn write_cloud(cloud: &SparsePointCloud) -> Vec<u8> {
    let mut out = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         property list uint uint visibility\nend_header\n",
        cloud.len()
    );
    for (p, vis) in cloud.points.iter().zip(&cloud.visibility) {
        out += &format!("{} {} {} {}", p.x, p.y, p.z, vis.len());
        for f in vis {
            out += &format!(" {f}");
        }
        out.push('\n');
    }
    out.into_bytes()
}

pub fn read_cloud(bytes: &[u8]) -> FResult<SparsePointCloud> {
    let header = parse_header(bytes)?;
    let el = header
        .elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| FormatError::new(0, "PLY has no vertex element"))?;
    let xyz: Vec<usize> = ["x", "y", "z"]
        .iter()
        .map(|n| el.find(n).ok_or_else(|| FormatError::new(0, format!("vertex element lacks `{n}`"))))
        .collect::<FResult<_>>()?;
    let vis = el.find("visibility").ok_or_else(|| FormatError::new(0, "vertex element lacks `visibility`"))?;
    let mut points = Vec::with_capacity(el.count);
    let mut visibility = Vec::with_capacity(el.count);
    parse_body(bytes, |el, at, row| {
        if el.name != "vertex" {
            return Ok(());
        }
        points.push(Vec3::new(
            finite(row[xyz[0]].scalar(), at)?,
            finite(row[xyz[1]].scalar(), at)?,
            finite(row[xyz[2]].scalar(), at)?,
        ));
        let Field::List(ids) = &row[vis] else {
            return Err(FormatError::new(at, "visibility is not a list"));
        };
        if ids.iter().any(|&f| f < 0.0 || f > u32::MAX as f64) {
            return Err(FormatError::new(at, "frame id out of range"));
        }
        visibility.push(ids.iter().map(|&f| f as u32).collect());
        Ok(())
    })?;
    SparsePointCloud::new(points, visibility).map_err(|e| FormatError::new(header.body, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use endorecon_core::mesh::tetrahedron;

    #[test]
    fn binary_mesh_round_trip() {
        let mut mesh = tetrahedron();
        mesh.colors = Some(vec![[1, 2, 3], [4, 5, 6], [7, 8, 9], [255, 0, 128]]);
        assert_eq!(read_mesh(&write_mesh(&mesh)).unwrap(), mesh);
        mesh.colors = None;
        assert_eq!(read_mesh(&write_mesh(&mesh)).unwrap(), mesh);
    }

    #[test]
    fn ascii_quads_are_fan_triangulated() {
        let text = "ply\nformat ascii 1.0\ncomment unit square\nelement vertex 4\nproperty float x\n\
                    property float y\nproperty float z\nproperty float nx\nelement face 1\n\
                    property list uchar int vertex_index\nend_header\n\
                    0 0 0 9\n1 0 0 9\n1 1 0 9\n0 1 0 9\n4 0 1 2 3\n";
        let mesh = read_mesh(text.as_bytes()).unwrap();
        assert_eq!(mesh.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert!((mesh.surface_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn big_endian_with_extra_element() {
        let mut bytes = b"ply\nformat binary_big_endian 1.0\nelement vertex 3\nproperty double x\n\
                          property double y\nproperty double z\nelement face 1\n\
                          property list uchar ushort vertex_indices\nelement edge 1\nproperty int a\nend_header\n"
            .to_vec();
        for v in [[0.0f64, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]] {
            for x in v {
                bytes.extend_from_slice(&x.to_be_bytes());
            }
        }
        bytes.push(3);
        for i in [0u16, 1, 2] {
            bytes.extend_from_slice(&i.to_be_bytes());
        }
        bytes.extend_from_slice(&7i32.to_be_bytes());
        let mesh = read_mesh(&bytes).unwrap();
        assert_eq!(mesh.vertices[1], Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(mesh.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn errors_report_offsets() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n\
                    end_header\n0 0 0\n1 oops 0\n";
        let err = read_mesh(text.as_bytes()).unwrap_err();
        assert_eq!(err.offset as usize, text.find("oops").unwrap());
        let err = read_mesh(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float y\nend_header\n0\n").unwrap_err();
        assert!(err.message.contains("`x`"));
        assert!(read_mesh(b"plx\n").is_err());
        let face = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n\
                    element face 1\nproperty list uchar uint vertex_indices\nend_header\n0 0 0\n3 0 0 5\n";
        assert_eq!(read_mesh(face.as_bytes()).unwrap_err().offset as usize, face.find("3 0 0 5").unwrap());
    }

    #[test]
    fn cloud_round_trip_is_exact() {
        let cloud = SparsePointCloud::new(
            vec![Vec3::new(0.1, -2.0 / 3.0, 1e-17), Vec3::new(5.0, 6.0, 7.0)],
            vec![vec![0, 3, 4_000_000_000], vec![]],
        )
        .unwrap();
        assert_eq!(read_cloud(&write_cloud(&cloud)).unwrap(), cloud);
    }
}
