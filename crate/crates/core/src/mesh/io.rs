//! OBJ and PLY geometry IO. Only positions and faces are read; normals,
//! texture coordinates and materials are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::validate::{check_indices, remove_degenerate_faces};
use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<MeshFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

impl FromStr for MeshFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            other => Err(Error::param("format", format!("unknown mesh format `{other}`"))),
        }
    }
}

/// Load and validate a mesh. Polygons are fan-triangulated from their first
/// vertex and degenerate faces are dropped.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mesh = match format {
        MeshFormat::Obj => {
            let text = String::from_utf8_lossy(&bytes);
            parse_obj(&text)?
        }
        MeshFormat::Ply => parse_ply(&bytes)?,
    };
    finish_load(mesh)
}

fn finish_load(mesh: TriangleMesh) -> Result<TriangleMesh> {
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    check_indices(&mesh)?;
    let (mesh, _) = remove_degenerate_faces(&mesh);
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(mesh)
}

pub fn save_mesh(mesh: &TriangleMesh, path: &Path, format: MeshFormat) -> Result<()> {
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    check_indices(mesh)?;
    let bytes = match format {
        MeshFormat::Obj => write_obj(mesh).into_bytes(),
        MeshFormat::Ply => write_ply(mesh),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let loc = || format!("line {}", lineno + 1);
        match tokens.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| Error::parse(loc(), "vertex needs 3 coordinates"))?;
                    *slot = tok
                        .parse::<f64>()
                        .map_err(|e| Error::parse(loc(), format!("bad coordinate `{tok}`: {e}")))?;
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in tokens {
                    let idx_str = tok.split('/').next().unwrap_or("");
                    let idx: i64 = idx_str
                        .parse()
                        .map_err(|e| Error::parse(loc(), format!("bad index `{tok}`: {e}")))?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        return Err(Error::parse(loc(), "index 0 is invalid in OBJ"));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(Error::IndexOutOfRange {
                            face: faces.len(),
                            index: idx,
                            vertex_count: vertices.len(),
                        });
                    }
                    poly.push(resolved as u32);
                }
                if poly.len() < 3 {
                    return Err(Error::parse(loc(), "face needs at least 3 vertices"));
                }
                for i in 1..poly.len() - 1 {
                    faces.push([poly[0], poly[i], poly[i + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriangleMesh::new(vertices, faces))
}

pub(crate) fn write_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 24);
    write_obj_body(&mut s, mesh, 0);
    s
}

/// Append `v`/`f` records with face indices offset by `base` vertices.
pub(crate) fn write_obj_body(s: &mut String, mesh: &TriangleMesh, base: usize) {
    for v in &mesh.vertices {
        // `{}` prints the shortest representation that round-trips exactly.
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(
            s,
            "f {} {} {}",
            f[0] as usize + 1 + base,
            f[1] as usize + 1 + base,
            f[2] as usize + 1 + base
        );
    }
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
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
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

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

const FACE_LABEL_PROPERTY: &str = "part";

fn parse_ply(bytes: &[u8]) -> Result<TriangleMesh> {
    // Header is ASCII and ends with "end_header\n".
    let marker = b"end_header";
    let hpos = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::parse("byte 0", "missing end_header"))?;
    let mut body_start = hpos + marker.len();
    while body_start < bytes.len() && bytes[body_start] != b'\n' {
        body_start += 1;
    }
    body_start += 1;
    let header = std::str::from_utf8(&bytes[..hpos])
        .map_err(|_| Error::parse("byte 0", "header is not ASCII"))?;

    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::parse("line 1", "missing `ply` magic"));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in lines.enumerate() {
        let loc = || format!("header line {}", i + 2);
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.first().copied() {
            Some("format") => {
                binary = Some(match t.get(1).copied() {
                    Some("ascii") => false,
                    Some("binary_little_endian") => true,
                    other => {
                        return Err(Error::parse(loc(), format!("unsupported format {other:?}")))
                    }
                })
            }
            Some("element") => {
                let name = t.get(1).ok_or_else(|| Error::parse(loc(), "element name"))?;
                let count = t
                    .get(2)
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(loc(), "element count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(loc(), "property before element"))?;
                let prop = if t.get(1) == Some(&"list") {
                    let count = t.get(2).and_then(|s| Scalar::parse(s));
                    let item = t.get(3).and_then(|s| Scalar::parse(s));
                    match (count, item, t.get(4)) {
                        (Some(count), Some(item), Some(name)) => Property::List {
                            name: name.to_string(),
                            count,
                            item,
                        },
                        _ => return Err(Error::parse(loc(), "malformed list property")),
                    }
                } else {
                    match (t.get(1).and_then(|s| Scalar::parse(s)), t.get(2)) {
                        (Some(ty), Some(name)) => Property::Scalar {
                            name: name.to_string(),
                            ty,
                        },
                        _ => return Err(Error::parse(loc(), "malformed property")),
                    }
                };
                el.props.push(prop);
            }
            _ => {}
        }
    }
    let binary = binary.ok_or_else(|| Error::parse("header", "missing format line"))?;
    let body = &bytes[body_start.min(bytes.len())..];

    let mut reader: Box<dyn ValueReader> = if binary {
        Box::new(BinaryReader {
            data: body,
            pos: 0,
            base: body_start,
        })
    } else {
        Box::new(AsciiReader::new(body))
    };

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut labels = Vec::new();
    let mut has_labels = false;
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            let mut poly: Vec<i64> = Vec::new();
            let mut label = None;
            for p in &el.props {
                match p {
                    Property::Scalar { name, ty } => {
                        let v = reader.next(*ty)?;
                        match (el.name.as_str(), name.as_str()) {
                            ("vertex", "x") => xyz[0] = v,
                            ("vertex", "y") => xyz[1] = v,
                            ("vertex", "z") => xyz[2] = v,
                            ("face", FACE_LABEL_PROPERTY) => label = Some(v as u32),
                            _ => {}
                        }
                    }
                    Property::List { name, count, item } => {
                        let n = reader.next(*count)? as usize;
                        let capture = el.name == "face"
                            && (name == "vertex_indices" || name == "vertex_index");
                        for _ in 0..n {
                            let v = reader.next(*item)?;
                            if capture {
                                poly.push(v as i64);
                            }
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2])),
                "face" => {
                    if poly.len() < 3 {
                        return Err(Error::parse(reader.location(), "face needs at least 3 vertices"));
                    }
                    for &i in &poly {
                        if i < 0 || i as usize >= vertices.len().max(vertex_count(&elements)) {
                            return Err(Error::IndexOutOfRange {
                                face: faces.len(),
                                index: i,
                                vertex_count: vertex_count(&elements),
                            });
                        }
                    }
                    if let Some(l) = label {
                        has_labels = true;
                        for _ in 1..poly.len() - 1 {
                            labels.push(l);
                        }
                    }
                    for i in 1..poly.len() - 1 {
                        faces.push([poly[0] as u32, poly[i] as u32, poly[i + 1] as u32]);
                    }
                }
                _ => {}
            }
        }
    }
    let mut mesh = TriangleMesh::new(vertices, faces);
    if has_labels && labels.len() == mesh.faces.len() {
        mesh.face_labels = Some(labels);
    }
    Ok(mesh)
}

fn vertex_count(elements: &[Element]) -> usize {
    elements
        .iter()
        .find(|e| e.name == "vertex")
        .map_or(0, |e| e.count)
}

trait ValueReader {
    fn next(&mut self, ty: Scalar) -> Result<f64>;
    fn location(&self) -> String;
}

struct BinaryReader<'a> {
    data: &'a [u8],
    pos: usize,
    base: usize,
}

impl ValueReader for BinaryReader<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64> {
        let n = ty.size();
        if self.pos + n > self.data.len() {
            return Err(Error::parse(self.location(), "unexpected end of binary body"));
        }
        let v = ty.read_le(&self.data[self.pos..self.pos + n]);
        self.pos += n;
        Ok(v)
    }

    fn location(&self) -> String {
        format!("byte {}", self.base + self.pos)
    }
}

struct AsciiReader<'a> {
    tokens: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> AsciiReader<'a> {
    fn new(body: &'a [u8]) -> Self {
        let text = std::str::from_utf8(body).unwrap_or("");
        let tokens = text
            .lines()
            .enumerate()
            .flat_map(|(l, line)| line.split_whitespace().map(move |t| (l, t)))
            .collect();
        AsciiReader { tokens, pos: 0 }
    }
}

impl ValueReader for AsciiReader<'_> {
    fn next(&mut self, _ty: Scalar) -> Result<f64> {
        let (_, tok) = *self
            .tokens
            .get(self.pos)
            .ok_or_else(|| Error::parse(self.location(), "unexpected end of ascii body"))?;
        let v = tok
            .parse::<f64>()
            .map_err(|e| Error::parse(self.location(), format!("bad value `{tok}`: {e}")))?;
        self.pos += 1;
        Ok(v)
    }

    fn location(&self) -> String {
        let line = self.tokens.get(self.pos).map_or(0, |t| t.0);
        format!("body line {}", line + 1)
    }
}

/// Binary little-endian PLY with double positions; face labels, when
/// present, are written as an `int part` face property.
pub(crate) fn write_ply(mesh: &TriangleMesh) -> Vec<u8> {
    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\ncomment sharpmesh\n");
    let _ = writeln!(header, "element vertex {}", mesh.vertices.len());
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    let _ = writeln!(header, "element face {}", mesh.faces.len());
    header.push_str("property list uchar int vertex_indices\n");
    if mesh.face_labels.is_some() {
        let _ = writeln!(header, "property int {FACE_LABEL_PROPERTY}");
    }
    header.push_str("end_header\n");
    let mut out = header.into_bytes();
    out.reserve(mesh.vertices.len() * 24 + mesh.faces.len() * 17);
    for v in &mesh.vertices {
        for c in v.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for (i, f) in mesh.faces.iter().enumerate() {
        out.push(3);
        for &idx in f {
            out.extend_from_slice(&(idx as i32).to_le_bytes());
        }
        if let Some(labels) = &mesh.face_labels {
            out.extend_from_slice(&(labels[i] as i32).to_le_bytes());
        }
    }
    out
}
