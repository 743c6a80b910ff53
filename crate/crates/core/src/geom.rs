//! Object representation: per-vertex matrices plus optional connectivity,
//! in the layout used by matrix-oriented geometry libraries.

use std::sync::Arc;

use glam::{DVec2, DVec3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Pose, Rgb};

pub const NORMAL_UNIT_TOLERANCE: f64 = 1e-4;
pub const TANGENT_ORTHO_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisualizationMode {
    #[default]
    SolidColor,
    PerVertexColor,
    Textured,
}

/// Linear-light RGB texture sampled with repeat wrapping.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture {
    pub width: usize,
    pub height: usize,
    pub texels: Vec<Rgb>,
}

impl Texture {
    pub fn new(width: usize, height: usize, texels: Vec<Rgb>) -> Self {
        assert_eq!(texels.len(), width * height);
        Self { width, height, texels }
    }

    /// Bilinear lookup; `uv` origin is the bottom-left corner as in OBJ.
    pub fn sample(&self, uv: DVec2) -> Rgb {
        let x = uv.x.rem_euclid(1.0) * self.width as f64 - 0.5;
        let y = (1.0 - uv.y.rem_euclid(1.0)) * self.height as f64 - 0.5;
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let wrap = |v: f64, n: usize| (v as i64).rem_euclid(n as i64) as usize;
        let (xa, xb) = (wrap(x0, self.width), wrap(x0 + 1.0, self.width));
        let (ya, yb) = (wrap(y0, self.height), wrap(y0 + 1.0, self.height));
        let at = |x: usize, y: usize| self.texels[y * self.width + x];
        let top = at(xa, ya) * (1.0 - fx) + at(xb, ya) * fx;
        let bottom = at(xa, yb) * (1.0 - fx) + at(xb, yb) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    pub albedo: Rgb,
    pub metalness: f64,
    pub roughness: f64,
    pub albedo_texture: Option<Arc<Texture>>,
    pub mode: VisualizationMode,
}

impl Default for Material {
    fn default() -> Self {
        Self { albedo: Rgb::splat(0.75), metalness: 0.0, roughness: 0.5, albedo_texture: None, mode: VisualizationMode::SolidColor }
    }
}

impl Material {
    /// Clamps the scalar parameters into `[0, 1]`.
    pub fn sanitized(mut self) -> Self {
        self.albedo = self.albedo.clamp(Rgb::ZERO, Rgb::ONE);
        self.metalness = self.metalness.clamp(0.0, 1.0);
        self.roughness = self.roughness.clamp(0.0, 1.0);
        self
    }
}

/// A renderable object. Every per-vertex matrix is either empty (absent) or
/// has exactly one row per vertex.
///
/// `t` rows are tangent directions whose length is the surfel half-extent
/// along the tangent; `b` holds only the bitangent length, the direction is
/// recovered as `n × t̂`.
#[derive(Clone, Debug, Default)]
pub struct Mesh {
    pub name: String,
    pub v: Vec<DVec3>,
    pub n: Vec<DVec3>,
    pub c: Vec<Rgb>,
    pub t: Vec<DVec3>,
    pub b: Vec<f64>,
    pub uv: Vec<DVec2>,
    pub f: Vec<[u32; 3]>,
    pub e: Vec<[u32; 2]>,
    pub material: Material,
    pub local_pose: Pose,
    pub parent: Option<String>,
    pub visible: bool,
    pub casts_shadow: bool,
    /// Forces a render mode instead of inferring it from the populated matrices.
    pub render_mode: Option<crate::scene::RenderMode>,
}

impl Mesh {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), visible: true, casts_shadow: true, ..Default::default() }
    }

    pub fn from_vertices(name: impl Into<String>, v: Vec<DVec3>) -> Self {
        Self { v, ..Self::new(name) }
    }

    pub fn vertex_count(&self) -> usize {
        self.v.len()
    }

    pub fn has_normals(&self) -> bool {
        !self.n.is_empty()
    }

    pub fn has_tangents(&self) -> bool {
        !self.t.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.v.len();
        let bad = |what: String| Err(Error::InvalidArgument(format!("mesh `{}`: {what}", self.name)));
        for (label, len) in [("N", self.n.len()), ("C", self.c.len()), ("T", self.t.len()), ("B", self.b.len()), ("UV", self.uv.len())] {
            if len != 0 && len != n {
                return bad(format!("{label} has {len} rows, expected {n}"));
            }
        }
        if !self.b.is_empty() && self.t.is_empty() {
            return bad("B present without T".into());
        }
        if let Some(face) = self.f.iter().find(|f| f.iter().any(|&i| i as usize >= n)) {
            return bad(format!("face {face:?} indexes past {n} vertices"));
        }
        if let Some(edge) = self.e.iter().find(|e| e.iter().any(|&i| i as usize >= n)) {
            return bad(format!("edge {edge:?} indexes past {n} vertices"));
        }
        if let Some(i) = self.n.iter().position(|nn| (nn.length() - 1.0).abs() > NORMAL_UNIT_TOLERANCE) {
            return bad(format!("normal {i} is not unit length"));
        }
        if !self.n.is_empty() {
            for (i, (nn, tt)) in self.n.iter().zip(&self.t).enumerate() {
                let dir = tt.normalize_or_zero();
                if nn.dot(dir).abs() >= TANGENT_ORTHO_TOLERANCE {
                    return bad(format!("tangent {i} is not orthogonal to its normal"));
                }
            }
        }
        self.local_pose.validate()
    }

    /// Area-weighted vertex normals from `f`. Meshes without faces are left
    /// untouched so they keep rendering as point clouds.
    pub fn compute_normals(&mut self) {
        if self.f.is_empty() {
            return;
        }
        let mut acc = vec![DVec3::ZERO; self.v.len()];
        for &[a, b, c] in &self.f {
            let (a, b, c) = (a as usize, b as usize, c as usize);
            // Cross product length is twice the area, so this is area weighted.
            let face_n = (self.v[b] - self.v[a]).cross(self.v[c] - self.v[a]);
            acc[a] += face_n;
            acc[b] += face_n;
            acc[c] += face_n;
        }
        self.n = acc.into_iter().map(|n| n.try_normalize().unwrap_or(DVec3::Z)).collect();
    }

    /// Unique undirected edges of the triangle list, for wireframe overlays.
    pub fn edges_from_faces(&self) -> Vec<[u32; 2]> {
        let mut edges: Vec<[u32; 2]> =
            self.f.iter().flat_map(|&[a, b, c]| [[a, b], [b, c], [c, a]]).map(|[a, b]| if a < b { [a, b] } else { [b, a] }).collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

/// Recovers the bitangent from its stored length: `b_len · (n × t)`.
pub fn recover_bitangent(n: DVec3, t: DVec3, b_len: f64) -> Result<DVec3> {
    if !(n.is_finite() && t.is_finite() && b_len.is_finite()) {
        return Err(Error::InvalidArgument("non-finite bitangent input".into()));
    }
    Ok(n.cross(t) * b_len)
}

/// World pose of `meshes[index]`, composing local poses from the root down.
pub fn world_pose(meshes: &[Mesh], index: usize) -> Result<Pose> {
    let mut chain = vec![index];
    let mut current = index;
    while let Some(parent) = &meshes[current].parent {
        let Some(p) = meshes.iter().position(|m| &m.name == parent) else {
            return Err(Error::UnknownParent { child: meshes[current].name.clone(), parent: parent.clone() });
        };
        if chain.contains(&p) {
            let mut names: Vec<String> = chain.iter().map(|&i| meshes[i].name.clone()).collect();
            names.push(meshes[p].name.clone());
            return Err(Error::GraphCycle(names));
        }
        chain.push(p);
        current = p;
    }
    Ok(chain.iter().rev().fold(Pose::IDENTITY, |acc, &i| acc.compose(&meshes[i].local_pose)))
}

/// Bounding sphere centered on the AABB midpoint.
pub fn bounding_sphere<I>(points: I) -> Result<(DVec3, f64)>
where
    I: IntoIterator<Item = DVec3>,
    I::IntoIter: Clone,
{
    let iter = points.into_iter();
    let (lo, hi) = iter
        .clone()
        .fold(None, |acc: Option<(DVec3, DVec3)>, p| match acc {
            None => Some((p, p)),
            Some((lo, hi)) => Some((lo.min(p), hi.max(p))),
        })
        .ok_or(Error::EmptyScene)?;
    let center = (lo + hi) * 0.5;
    let radius = iter.map(|p| p.distance(center)).fold(0.0, f64::max);
    Ok((center, radius))
}

/// Returns a copy with vertex data moved into the frame of `pose`.
pub fn apply_transform(mesh: &Mesh, pose: &Pose) -> Result<Mesh> {
    pose.validate()?;
    let mut out = mesh.clone();
    if pose.is_identity() {
        return Ok(out);
    }
    out.v.iter_mut().for_each(|p| *p = pose.transform_point(*p));
    out.n.iter_mut().for_each(|n| *n = pose.transform_direction(*n));
    // T rows carry the surfel radius in their length, so they scale too.
    out.t.iter_mut().for_each(|t| *t = pose.transform_direction(*t) * pose.scale);
    out.b.iter_mut().for_each(|b| *b *= pose.scale);
    Ok(out)
}
