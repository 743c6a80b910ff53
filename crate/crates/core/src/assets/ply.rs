//! PLY in `ascii` and `binary_little_endian`. Vertex properties: `x y z`,
//! `nx ny nz`, `red green blue` (8-bit or float), `u v` / `s t` /
//! `texture_u texture_v`, and the surfel extension `tx ty tz blen`.
//! Elements `face` (polygon lists, fan triangulated) and `edge`
//! (`vertex1 vertex2`) are read; any other element is skipped.

use std::path::Path;

use glam::{DVec2, DVec3};

use super::LoadReport;
use crate::error::{Error, Result};
use crate::geom::Mesh;

#[derive(Clone, Copy, Debug, PartialEq)]
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
}

#[derive(Clone, Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
}

/// Value source over either encoding.
trait Reader {
    fn scalar(&mut self, ty: Scalar) -> std::result::Result<f64, String>;
}

struct AsciiReader<'a> {
    tokens: std::iter::Peekable<std::str::SplitAsciiWhitespace<'a>>,
}

impl Reader for AsciiReader<'_> {
    fn scalar(&mut self, _ty: Scalar) -> std::result::Result<f64, String> {
        let tok = self.tokens.next().ok_or("unexpected end of data")?;
        tok.parse::<f64>().map_err(|_| format!("bad number `{tok}`"))
    }
}

struct BinaryReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Reader for BinaryReader<'_> {
    fn scalar(&mut self, ty: Scalar) -> std::result::Result<f64, String> {
        let n = ty.size();
        let b = self.data.get(self.pos..self.pos + n).ok_or("unexpected end of data")?;
        self.pos += n;
        Ok(match ty {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b.try_into().unwrap()),
        })
    }
}

pub fn parse(bytes: &[u8], path: &Path) -> Result<(Mesh, LoadReport)> {
    let (format, elements, body) = parse_header(bytes).map_err(|m| Error::parse(path, format!("header: {m}")))?;
    let mut vertex_rows: Vec<Vec<f64>> = Vec::new();
    let mut vertex_props: Vec<Property> = Vec::new();
    let mut faces: Vec<Vec<u32>> = Vec::new();
    let mut edges: Vec<[u32; 2]> = Vec::new();

    let data = &bytes[body..];
    let text;
    let mut ascii;
    let mut binary;
    let reader: &mut dyn Reader = match format {
        Format::Ascii => {
            text = std::str::from_utf8(data).map_err(|_| Error::parse(path, "ascii body is not UTF-8"))?;
            ascii = AsciiReader { tokens: text.split_ascii_whitespace().peekable() };
            &mut ascii
        }
        Format::BinaryLe => {
            binary = BinaryReader { data, pos: 0 };
            &mut binary
        }
    };

    for el in &elements {
        for row in 0..el.count {
            let ctx = |m: String| Error::parse(path, format!("element `{}` #{row}: {m}", el.name));
            let mut scalars = Vec::with_capacity(el.props.len());
            let mut list: Option<Vec<u32>> = None;
            for p in &el.props {
                match p {
                    Property::Scalar { ty, .. } => scalars.push(reader.scalar(*ty).map_err(ctx)?),
                    Property::List { count, item, name } => {
                        let n = reader.scalar(*count).map_err(ctx)?;
                        if !(n >= 0.0 && n.fract() == 0.0) {
                            return Err(ctx(format!("bad list length {n}")));
                        }
                        let mut items = Vec::with_capacity(n as usize);
                        for _ in 0..n as usize {
                            items.push(reader.scalar(*item).map_err(ctx)?);
                        }
                        if name == "vertex_indices" || name == "vertex_index" {
                            if items.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                                return Err(ctx("negative or fractional vertex index".into()));
                            }
                            list = Some(items.into_iter().map(|v| v as u32).collect());
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => vertex_rows.push(scalars),
                "face" => {
                    let l = list.ok_or_else(|| ctx("face without vertex_indices".into()))?;
                    if l.len() < 3 {
                        return Err(ctx("face with fewer than 3 vertices".into()));
                    }
                    faces.push(l);
                }
                "edge" => {
                    let names: Vec<&str> = el.props.iter().filter(|p| matches!(p, Property::Scalar { .. })).map(|p| p.name()).collect();
                    let get = |n: &str| names.iter().position(|x| *x == n).map(|i| scalars[i]);
                    if let (Some(a), Some(b)) = (get("vertex1"), get("vertex2")) {
                        edges.push([a as u32, b as u32]);
                    }
                }
                _ => {}
            }
        }
        if el.name == "vertex" {
            vertex_props = el.props.clone();
        }
    }

    let scalar_names: Vec<(&str, Scalar)> = vertex_props
        .iter()
        .filter_map(|p| match p {
            Property::Scalar { name, ty } => Some((name.as_str(), *ty)),
            _ => None,
        })
        .collect();
    let col = |n: &str| scalar_names.iter().position(|(x, _)| *x == n);
    let col3 = |a, b, c| Some([col(a)?, col(b)?, col(c)?]);
    let col2 = |a, b| Some([col(a)?, col(b)?]);
    let pos = col3("x", "y", "z").ok_or_else(|| Error::parse(path, "vertex element lacks x, y, z"))?;

    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut mesh = Mesh::new(name);
    let v3 = |r: &Vec<f64>, c: [usize; 3]| DVec3::new(r[c[0]], r[c[1]], r[c[2]]);
    mesh.v = vertex_rows.iter().map(|r| v3(r, pos)).collect();
    if let Some(c) = col3("nx", "ny", "nz") {
        mesh.n = vertex_rows.iter().map(|r| v3(r, c)).collect();
    }
    if let Some(c) = col3("red", "green", "blue") {
        let eight_bit = scalar_names[c[0]].1 == Scalar::U8;
        mesh.c = vertex_rows
            .iter()
            .map(|r| {
                let rgb = v3(r, c);
                if eight_bit {
                    super::srgb8_to_linear(rgb)
                } else {
                    rgb
                }
            })
            .collect();
        mesh.material.mode = crate::geom::VisualizationMode::PerVertexColor;
    }
    if let Some(c) = col2("u", "v").or_else(|| col2("s", "t")).or_else(|| col2("texture_u", "texture_v")) {
        mesh.uv = vertex_rows.iter().map(|r| DVec2::new(r[c[0]], r[c[1]])).collect();
    }
    if let Some(c) = col3("tx", "ty", "tz") {
        mesh.t = vertex_rows.iter().map(|r| v3(r, c)).collect();
        if let Some(b) = col("blen") {
            mesh.b = vertex_rows.iter().map(|r| r[b]).collect();
        }
    }
    let nv = mesh.v.len() as u32;
    for poly in &faces {
        if let Some(bad) = poly.iter().find(|&&i| i >= nv) {
            return Err(Error::parse(path, format!("face index {bad} out of range (have {nv} vertices)")));
        }
        for k in 1..poly.len() - 1 {
            mesh.f.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    if let Some(bad) = edges.iter().flatten().find(|&&i| i >= nv) {
        return Err(Error::parse(path, format!("edge index {bad} out of range (have {nv} vertices)")));
    }
    mesh.e = edges;
    let report = super::sanitize(&mut mesh);
    Ok((mesh, report))
}

fn parse_header(bytes: &[u8]) -> std::result::Result<(Format, Vec<Element>, usize), String> {
    let mut pos = 0;
    let mut next_line = || -> std::result::Result<String, String> {
        let rest = &bytes[pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or("unterminated header")?;
        pos += end + 1;
        Ok(String::from_utf8_lossy(&rest[..end]).trim_end_matches('\r').to_string())
    };
    if next_line()?.trim() != "ply" {
        return Err("missing `ply` magic".into());
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = next_line()?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => format = Some(Format::Ascii),
            ["format", "binary_little_endian", _] => format = Some(Format::BinaryLe),
            ["format", other, _] => return Err(format!("unsupported format `{other}`")),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| format!("bad element count `{count}`"))?,
                props: vec![],
            }),
            ["property", "list", count, item, name] => {
                let el = elements.last_mut().ok_or("property before element")?;
                el.props.push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(count).ok_or_else(|| format!("bad type `{count}`"))?,
                    item: Scalar::parse(item).ok_or_else(|| format!("bad type `{item}`"))?,
                });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or("property before element")?;
                el.props
                    .push(Property::Scalar { name: name.to_string(), ty: Scalar::parse(ty).ok_or_else(|| format!("bad type `{ty}`"))? });
            }
            _ => return Err(format!("unrecognized header line `{line}`")),
        }
    }
    Ok((format.ok_or("missing format line")?, elements, pos))
}

/// Serializes `mesh` as binary little-endian PLY, including the surfel
/// properties when present.
pub fn write_binary(mesh: &Mesh) -> Vec<u8> {
    let mut h = String::from("ply\nformat binary_little_endian 1.0\n");
    h += &format!("element vertex {}\nproperty float x\nproperty float y\nproperty float z\n", mesh.v.len());
    if !mesh.n.is_empty() {
        h += "property float nx\nproperty float ny\nproperty float nz\n";
    }
    if !mesh.c.is_empty() {
        h += "property float red\nproperty float green\nproperty float blue\n";
    }
    if !mesh.t.is_empty() {
        h += "property float tx\nproperty float ty\nproperty float tz\n";
        if !mesh.b.is_empty() {
            h += "property float blen\n";
        }
    }
    if !mesh.f.is_empty() {
        h += &format!("element face {}\nproperty list uchar int vertex_indices\n", mesh.f.len());
    }
    if !mesh.e.is_empty() {
        h += &format!("element edge {}\nproperty int vertex1\nproperty int vertex2\n", mesh.e.len());
    }
    h += "end_header\n";
    let mut out = h.into_bytes();
    let f = |out: &mut Vec<u8>, x: f64| out.extend_from_slice(&(x as f32).to_le_bytes());
    for k in 0..mesh.v.len() {
        for c in mesh.v[k].to_array() {
            f(&mut out, c);
        }
        for attr in [&mesh.n, &mesh.c, &mesh.t] {
            if !attr.is_empty() {
                for c in attr[k].to_array() {
                    f(&mut out, c);
                }
            }
        }
        if !mesh.t.is_empty() && !mesh.b.is_empty() {
            f(&mut out, mesh.b[k]);
        }
    }
    for tri in &mesh.f {
        out.push(3);
        for i in tri {
            out.extend_from_slice(&(*i as i32).to_le_bytes());
        }
    }
    for e in &mesh.e {
        for i in e {
            out.extend_from_slice(&(*i as i32).to_le_bytes());
        }
    }
    out
}
