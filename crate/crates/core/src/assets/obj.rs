//! Wavefront OBJ: `v` (optionally with rgb), `vt`, `vn`, `f` (fan
//! triangulated), `l` polylines, and `map_Kd` from the first material.

use std::collections::HashMap;
use std::path::Path;

use glam::{DVec2, DVec3};

use super::LoadReport;
use crate::error::{Error, Result};
use crate::geom::Mesh;
use crate::math::Rgb;

type Corner = (usize, Option<usize>, Option<usize>);

struct Raw {
    v: Vec<DVec3>,
    c: Vec<Rgb>,
    vt: Vec<DVec2>,
    vn: Vec<DVec3>,
    faces: Vec<Vec<Corner>>,
    lines: Vec<Vec<usize>>,
    mtllib: Option<String>,
    material: Option<String>,
}

pub fn parse(text: &str, path: &Path) -> Result<(Mesh, LoadReport)> {
    let raw = parse_raw(text, path)?;
    build(raw, path)
}

fn parse_raw(text: &str, path: &Path) -> Result<Raw> {
    let mut raw = Raw { v: vec![], c: vec![], vt: vec![], vn: vec![], faces: vec![], lines: vec![], mtllib: None, material: None };
    for (lineno, line) in text.lines().enumerate() {
        let err = |m: String| Error::parse(path, format!("line {}: {m}", lineno + 1));
        let line = line.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        let Some(tag) = it.next() else { continue };
        let rest: Vec<&str> = it.collect();
        let floats = |n: usize| -> Result<Vec<f64>> {
            if rest.len() < n {
                return Err(err(format!("`{tag}` needs {n} numbers")));
            }
            rest.iter().map(|s| s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")))).collect()
        };
        match tag {
            "v" => {
                let x = floats(3)?;
                raw.v.push(DVec3::new(x[0], x[1], x[2]));
                if x.len() >= 6 {
                    raw.c.push(Rgb::new(x[3], x[4], x[5]));
                }
            }
            "vt" => {
                let x = floats(2)?;
                raw.vt.push(DVec2::new(x[0], x[1]));
            }
            "vn" => {
                let x = floats(3)?;
                raw.vn.push(DVec3::new(x[0], x[1], x[2]));
            }
            "f" => {
                if rest.len() < 3 {
                    return Err(err("face needs at least 3 vertices".into()));
                }
                let corners = rest
                    .iter()
                    .map(|s| parse_corner(s, raw.v.len(), raw.vt.len(), raw.vn.len()).map_err(&err))
                    .collect::<Result<Vec<_>>>()?;
                raw.faces.push(corners);
            }
            "l" => {
                let idx = rest
                    .iter()
                    .map(|s| {
                        let first = s.split('/').next().unwrap_or("");
                        resolve(first, raw.v.len()).map_err(&err)
                    })
                    .collect::<Result<Vec<_>>>()?;
                raw.lines.push(idx);
            }
            "mtllib" => raw.mtllib = rest.first().map(|s| s.to_string()),
            "usemtl" if raw.material.is_none() => raw.material = rest.first().map(|s| s.to_string()),
            _ => {}
        }
    }
    if !raw.c.is_empty() && raw.c.len() != raw.v.len() {
        log::warn!("{}: vertex colors on only some vertices, ignored", path.display());
        raw.c.clear();
    }
    Ok(raw)
}

fn resolve(s: &str, count: usize) -> std::result::Result<usize, String> {
    let i: i64 = s.parse().map_err(|_| format!("bad index `{s}`"))?;
    let idx = if i > 0 { i - 1 } else { count as i64 + i };
    if i == 0 || idx < 0 || idx as usize >= count {
        return Err(format!("index {i} out of range (have {count})"));
    }
    Ok(idx as usize)
}

fn parse_corner(s: &str, nv: usize, nt: usize, nn: usize) -> std::result::Result<Corner, String> {
    let mut parts = s.split('/');
    let v = resolve(parts.next().unwrap_or(""), nv)?;
    let vt = match parts.next() {
        Some("") | None => None,
        Some(t) => Some(resolve(t, nt)?),
    };
    let vn = match parts.next() {
        Some("") | None => None,
        Some(n) => Some(resolve(n, nn)?),
    };
    Ok((v, vt, vn))
}

fn build(raw: Raw, path: &Path) -> Result<(Mesh, LoadReport)> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut mesh = Mesh::new(name);
    // Keep the position indexing when every position uses one uv/normal pair.
    let mut attr_of: HashMap<usize, (Option<usize>, Option<usize>)> = HashMap::new();
    let consistent = raw.faces.iter().flatten().all(|&(v, t, n)| *attr_of.entry(v).or_insert((t, n)) == (t, n));
    let has_vt = raw.faces.iter().flatten().any(|c| c.1.is_some());
    let has_vn = raw.faces.iter().flatten().any(|c| c.2.is_some());
    let mut polys: Vec<Vec<u32>> = Vec::with_capacity(raw.faces.len());
    let mut edges: Vec<[u32; 2]> = Vec::new();
    if consistent {
        mesh.v = raw.v.clone();
        mesh.c = raw.c.clone();
        if has_vt {
            mesh.uv = (0..raw.v.len()).map(|i| attr_of.get(&i).and_then(|a| a.0).map_or(DVec2::ZERO, |t| raw.vt[t])).collect();
        }
        if has_vn {
            mesh.n = (0..raw.v.len()).map(|i| attr_of.get(&i).and_then(|a| a.1).map_or(DVec3::ZERO, |n| raw.vn[n])).collect();
        }
        polys = raw.faces.iter().map(|f| f.iter().map(|c| c.0 as u32).collect()).collect();
        for l in &raw.lines {
            edges.extend(l.windows(2).map(|w| [w[0] as u32, w[1] as u32]));
        }
    } else {
        let mut index: HashMap<Corner, u32> = HashMap::new();
        let mut first_copy: HashMap<usize, u32> = HashMap::new();
        for face in &raw.faces {
            let mut poly = Vec::with_capacity(face.len());
            for &corner in face {
                let id = *index.entry(corner).or_insert_with(|| {
                    let id = mesh.v.len() as u32;
                    mesh.v.push(raw.v[corner.0]);
                    if !raw.c.is_empty() {
                        mesh.c.push(raw.c[corner.0]);
                    }
                    if has_vt {
                        mesh.uv.push(corner.1.map_or(DVec2::ZERO, |t| raw.vt[t]));
                    }
                    if has_vn {
                        mesh.n.push(corner.2.map_or(DVec3::ZERO, |n| raw.vn[n]));
                    }
                    first_copy.entry(corner.0).or_insert(id);
                    id
                });
                poly.push(id);
            }
            polys.push(poly);
        }
        for l in &raw.lines {
            let ids: Vec<Option<u32>> = l.iter().map(|v| first_copy.get(v).copied()).collect();
            edges.extend(ids.windows(2).filter_map(|w| Some([w[0]?, w[1]?])));
        }
        if raw.lines.iter().flatten().any(|v| !first_copy.contains_key(v)) {
            log::warn!("{}: polyline vertices not used by any face were skipped", path.display());
        }
    }
    for poly in &polys {
        for k in 1..poly.len() - 1 {
            mesh.f.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    mesh.e = edges;
    if let (Some(lib), Some(mat)) = (&raw.mtllib, &raw.material) {
        load_diffuse_map(&mut mesh, path, lib, mat);
    }
    let report = super::sanitize(&mut mesh);
    Ok((mesh, report))
}

fn load_diffuse_map(mesh: &mut Mesh, obj_path: &Path, lib: &str, material: &str) {
    let dir = obj_path.parent().unwrap_or(Path::new("."));
    let Ok(text) = std::fs::read_to_string(dir.join(lib)) else {
        log::warn!("material library {lib} not readable, ignored");
        return;
    };
    let mut current = None;
    for line in text.lines() {
        let mut it = line.split_whitespace();
        match (it.next(), it.next()) {
            (Some("newmtl"), Some(name)) => current = Some(name == material),
            (Some("map_Kd"), Some(file)) if current == Some(true) => {
                match super::load_texture(&dir.join(file)) {
                    Ok(tex) => {
                        mesh.material.albedo_texture = Some(std::sync::Arc::new(tex));
                        mesh.material.mode = crate::geom::VisualizationMode::Textured;
                    }
                    Err(e) => log::warn!("diffuse map ignored: {e}"),
                }
                return;
            }
            _ => {}
        }
    }
}
