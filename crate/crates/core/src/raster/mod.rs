//! Passes that turn geometry into G-Buffer texels, depth maps and line
//! overlays. All inputs are world-space meshes.

mod triangle;

pub use triangle::{rasterize_triangle, Fragment, SUBPIXEL_BITS};

use glam::{DVec2, DVec3};

use crate::error::{Error, Result};
use crate::gbuffer::{GBuffer, Precision, Sample, BACKGROUND_DEPTH};
use crate::geom::{Mesh, VisualizationMode};
use crate::image::HdrImage;
use crate::math::{Pose, Rgb};
use crate::scene::Camera;

pub const SHADOW_MAP_SIZE: usize = 1024;
/// Surfel fragments within this fraction of the scene scale behind the
/// front-most surfel blend with it.
pub const SURFEL_DEPTH_BAND: f64 = 1e-3;
/// Floor of the surfel splat kernel `1 - (u² + v²)`.
pub const SURFEL_MIN_WEIGHT: f64 = 0.05;
/// Relative depth slack for the line overlay test.
pub const LINE_DEPTH_BIAS: f64 = 5e-3;

/// Linear depths rendered from a light (or any camera).
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub camera: Camera,
    pub depths: Vec<f32>,
}

impl DepthMap {
    pub fn new(camera: Camera) -> Self {
        Self { depths: vec![BACKGROUND_DEPTH; camera.width * camera.height], camera }
    }

    pub fn width(&self) -> usize {
        self.camera.width
    }

    pub fn height(&self) -> usize {
        self.camera.height
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.depths[j * self.camera.width + i]
    }

    #[inline]
    fn test_and_set(&mut self, i: usize, j: usize, depth: f64) {
        let k = j * self.camera.width + i;
        let d = depth as f32;
        if d < self.depths[k] {
            self.depths[k] = d;
        }
    }
}

/// One splat: rectangle spanned by `tangent` and `bitangent` half-axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfelQuad {
    pub center: DVec3,
    /// Unit tangent scaled by its half-extent.
    pub tangent: DVec3,
    /// Unit bitangent scaled by its half-extent.
    pub bitangent: DVec3,
    pub normal: DVec3,
    pub albedo: Rgb,
    pub metalness: f64,
    pub roughness: f64,
}

impl SurfelQuad {
    /// Builds the splat basis for vertex `k`: `|T_k|` is the tangent radius,
    /// `B_k` the bitangent radius, direction `n × t̂`.
    pub fn from_vertex(mesh: &Mesh, k: usize) -> Result<Option<SurfelQuad>> {
        let n = mesh.n[k];
        let t = mesh.t[k];
        let r_t = t.length();
        let r_b = mesh.b.get(k).copied().unwrap_or(r_t);
        if !(r_t > 0.0 && r_b > 0.0) {
            return Ok(None);
        }
        let t_hat = t / r_t;
        let b_hat = crate::geom::recover_bitangent(n, t_hat, 1.0)?;
        Ok(Some(SurfelQuad {
            center: mesh.v[k],
            tangent: t_hat * r_t,
            bitangent: b_hat * r_b,
            normal: n,
            albedo: vertex_albedo(mesh, k),
            metalness: mesh.material.metalness,
            roughness: mesh.material.roughness,
        }))
    }
}

fn vertex_albedo(mesh: &Mesh, k: usize) -> Rgb {
    match mesh.material.mode {
        VisualizationMode::PerVertexColor if !mesh.c.is_empty() => mesh.c[k],
        VisualizationMode::Textured if !mesh.uv.is_empty() => match &mesh.material.albedo_texture {
            Some(tex) => tex.sample(mesh.uv[k]),
            None => mesh.material.albedo,
        },
        _ if !mesh.c.is_empty() && mesh.f.is_empty() => mesh.c[k],
        _ => mesh.material.albedo,
    }
}

fn view_vertices(mesh: &Mesh, view: &Pose) -> Vec<DVec3> {
    mesh.v.iter().map(|p| view.transform_point(*p)).collect()
}

/// Writes a triangle mesh into a byte G-Buffer with keep-nearest depth test.
/// Back faces are drawn with their shading normal flipped toward the viewer.
pub fn rasterize_mesh(mesh: &Mesh, camera: &Camera, gbuffer: &mut GBuffer) -> Result<()> {
    if mesh.f.is_empty() {
        return Err(Error::WrongPass { pass: "mesh", reason: format!("`{}` has no faces", mesh.name) });
    }
    check_dims(camera, gbuffer)?;
    let view = camera.view_from_world();
    let verts = view_vertices(mesh, &view);
    let mat = &mesh.material;
    for &[a, b, c] in &mesh.f {
        let ids = [a as usize, b as usize, c as usize];
        let tri = ids.map(|i| verts[i]);
        let face_n = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
        // Eye is at the view-space origin.
        let back_facing = face_n.dot(-tri[0]) < 0.0;
        let world_face_n = camera.pose.transform_direction(face_n).try_normalize();
        rasterize_triangle(camera, tri, 0..camera.height, &mut |f: Fragment| {
            if (f.depth as f32) >= gbuffer.depth(f.x, f.y) {
                return;
            }
            let w = [f.bary.x, f.bary.y, f.bary.z];
            let interp3 = |attr: &[DVec3]| attr[ids[0]] * w[0] + attr[ids[1]] * w[1] + attr[ids[2]] * w[2];
            let interp2 = |attr: &[DVec2]| attr[ids[0]] * w[0] + attr[ids[1]] * w[1] + attr[ids[2]] * w[2];
            let albedo = match mat.mode {
                VisualizationMode::PerVertexColor if !mesh.c.is_empty() => interp3(&mesh.c),
                VisualizationMode::Textured if !mesh.uv.is_empty() => match &mat.albedo_texture {
                    Some(tex) => tex.sample(interp2(&mesh.uv)),
                    None => mat.albedo,
                },
                _ => mat.albedo,
            };
            let normal =
                if mesh.n.is_empty() { world_face_n } else { interp3(&mesh.n).try_normalize() }.map(|n| if back_facing { -n } else { n });
            gbuffer.write(f.x, f.y, &Sample { albedo, normal, metalness: mat.metalness, roughness: mat.roughness, depth: f.depth });
        });
    }
    Ok(())
}

/// One pixel per vertex at the nearest pixel center; normals channel zeroed.
pub fn rasterize_points(mesh: &Mesh, camera: &Camera, gbuffer: &mut GBuffer) -> Result<()> {
    check_dims(camera, gbuffer)?;
    let view = camera.view_from_world();
    for (k, p) in mesh.v.iter().enumerate() {
        let Some((i, j, depth)) = point_pixel(camera, view.transform_point(*p)) else { continue };
        if (depth as f32) < gbuffer.depth(i, j) {
            let s = Sample {
                albedo: vertex_albedo(mesh, k),
                normal: None,
                metalness: mesh.material.metalness,
                roughness: mesh.material.roughness,
                depth,
            };
            gbuffer.write(i, j, &s);
        }
    }
    Ok(())
}

fn point_pixel(camera: &Camera, view: DVec3) -> Option<(usize, usize, f64)> {
    if -view.z < camera.near {
        return None;
    }
    let p = camera.project_view(view)?;
    let (i, j) = (p.x.floor(), p.y.floor());
    if i < 0.0 || j < 0.0 || i >= camera.width as f64 || j >= camera.height as f64 {
        return None;
    }
    Some((i as usize, j as usize, p.depth))
}

/// Visits every surviving (inside-ellipse) fragment of one surfel as
/// `(x, y, depth, weight)`.
fn splat_fragments(camera: &Camera, view: &Pose, s: &SurfelQuad, emit: &mut impl FnMut(usize, usize, f64, f64)) {
    let c = view.transform_point(s.center);
    let t = view.transform_direction(s.tangent);
    let b = view.transform_direction(s.bitangent);
    let n = view.transform_direction(s.normal);
    let corners = [c - t - b, c + t - b, c + t + b, c - t + b];
    let (rt2, rb2) = (t.length_squared(), b.length_squared());
    let plane_d = c.dot(n);
    let mut on_fragment = |f: Fragment| {
        let ray = camera.view_ray(f.x as f64 + 0.5, f.y as f64 + 0.5);
        let denom = ray.dot(n);
        if denom.abs() < 1e-12 {
            return;
        }
        let q = ray * (plane_d / denom);
        let rel = q - c;
        let (u, v) = (rel.dot(t) / rt2, rel.dot(b) / rb2);
        let r2 = u * u + v * v;
        if r2 > 1.0 {
            return;
        }
        let depth = -q.z;
        if depth <= 0.0 {
            return;
        }
        emit(f.x, f.y, depth, (1.0 - r2).max(SURFEL_MIN_WEIGHT));
    };
    rasterize_triangle(camera, [corners[0], corners[1], corners[2]], 0..camera.height, &mut on_fragment);
    rasterize_triangle(camera, [corners[0], corners[2], corners[3]], 0..camera.height, &mut on_fragment);
}

fn surfel_quads(mesh: &Mesh) -> Result<Vec<SurfelQuad>> {
    if mesh.n.is_empty() || mesh.t.is_empty() {
        return Err(Error::WrongPass { pass: "surfel", reason: format!("`{}` lacks normals or tangents", mesh.name) });
    }
    let mut out = Vec::with_capacity(mesh.v.len());
    for k in 0..mesh.v.len() {
        if let Some(q) = SurfelQuad::from_vertex(mesh, k)? {
            out.push(q);
        }
    }
    Ok(out)
}

/// Splats surfels into a float G-Buffer. A visibility pass finds the
/// front-most surfel depth per pixel; the accumulation pass then blends every
/// fragment within `SURFEL_DEPTH_BAND · scene_scale` of it, in vertex order.
pub fn rasterize_surfels(mesh: &Mesh, camera: &Camera, gbuffer: &mut GBuffer, scene_scale: f64) -> Result<()> {
    if gbuffer.precision() != Precision::Half16 {
        return Err(Error::WrongPass { pass: "surfel", reason: "surfels need a Half16 G-Buffer".into() });
    }
    check_dims(camera, gbuffer)?;
    let quads = surfel_quads(mesh)?;
    let view = camera.view_from_world();
    let mut front = vec![f64::INFINITY; camera.width * camera.height];
    for q in &quads {
        splat_fragments(camera, &view, q, &mut |x, y, depth, _| {
            let k = y * camera.width + x;
            front[k] = front[k].min(depth);
        });
    }
    let band = SURFEL_DEPTH_BAND * scene_scale;
    let eye = camera.position();
    for q in &quads {
        let normal = if q.normal.dot(eye - q.center) < 0.0 { -q.normal } else { q.normal };
        let sample = |depth| Sample { albedo: q.albedo, normal: Some(normal), metalness: q.metalness, roughness: q.roughness, depth };
        let mut result = Ok(());
        splat_fragments(camera, &view, q, &mut |x, y, depth, w| {
            if depth <= front[y * camera.width + x] + band && result.is_ok() {
                result = gbuffer.accumulate(x, y, &sample(depth), w);
            }
        });
        result?;
    }
    Ok(())
}

/// Depth-only render of shadow casters from `camera`.
pub fn render_depth_only<'a>(objects: impl IntoIterator<Item = &'a Mesh>, camera: &Camera) -> DepthMap {
    let mut map = DepthMap::new(*camera);
    let view = camera.view_from_world();
    for mesh in objects {
        if !mesh.casts_shadow || !mesh.visible {
            continue;
        }
        if !mesh.f.is_empty() {
            let verts = view_vertices(mesh, &view);
            for &[a, b, c] in &mesh.f {
                let tri = [verts[a as usize], verts[b as usize], verts[c as usize]];
                rasterize_triangle(camera, tri, 0..camera.height, &mut |f: Fragment| map.test_and_set(f.x, f.y, f.depth));
            }
        } else if let Ok(quads) = surfel_quads(mesh) {
            for q in &quads {
                splat_fragments(camera, &view, q, &mut |x, y, depth, _| map.test_and_set(x, y, depth));
            }
        } else {
            for p in &mesh.v {
                if let Some((i, j, depth)) = point_pixel(camera, view.transform_point(*p)) {
                    map.test_and_set(i, j, depth);
                }
            }
        }
    }
    map
}

/// Draws `mesh.e` straight into the composed image. Pixels are written only
/// where the line is not behind the G-Buffer depth (with a small relative
/// bias), so hidden edges stay hidden.
pub fn rasterize_lines(mesh: &Mesh, camera: &Camera, image: &mut HdrImage, depth: &[f32], color: Rgb) -> Result<()> {
    if (image.width, image.height) != (camera.width, camera.height) || depth.len() != image.width * image.height {
        return Err(Error::Assembly("line overlay target does not match the camera".into()));
    }
    let view = camera.view_from_world();
    for &[a, b] in &mesh.e {
        let (mut p, mut q) = (view.transform_point(mesh.v[a as usize]), view.transform_point(mesh.v[b as usize]));
        // Near-plane clip in view space.
        let (dp, dq) = (-p.z - camera.near, -q.z - camera.near);
        if dp < 0.0 && dq < 0.0 {
            continue;
        }
        if dp < 0.0 {
            p = p.lerp(q, dp / (dp - dq));
        } else if dq < 0.0 {
            q = q.lerp(p, dq / (dq - dp));
        }
        let (Some(sp), Some(sq)) = (camera.project_view(p), camera.project_view(q)) else { continue };
        draw_segment(camera, image, depth, color, (sp.x, sp.y, sp.depth), (sq.x, sq.y, sq.depth));
    }
    Ok(())
}

fn draw_segment(camera: &Camera, image: &mut HdrImage, depth: &[f32], color: Rgb, a: (f64, f64, f64), b: (f64, f64, f64)) {
    let (w, h) = (camera.width as f64, camera.height as f64);
    // Liang-Barsky against the viewport rectangle.
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [(-dx, a.0), (dx, w - 1e-9 - a.0), (-dy, a.1), (dy, h - 1e-9 - a.1)] {
        if p == 0.0 {
            if q < 0.0 {
                return;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 > t1 {
        return;
    }
    // Perspective-correct depth: 1/z is affine in screen space.
    let (inv_a, inv_b) = (1.0 / a.2, 1.0 / b.2);
    let at = |t: f64| (a.0 + dx * t, a.1 + dy * t);
    let (s, e) = (at(t0), at(t1));
    let (x0, y0) = (s.0.floor() as i64, s.1.floor() as i64);
    let (x1, y1) = (e.0.floor() as i64, e.1.floor() as i64);
    let steps_x = (x1 - x0).abs();
    let steps_y = -(y1 - y0).abs();
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let total = steps_x.max(-steps_y).max(1) as f64;
    let (mut x, mut y, mut err) = (x0, y0, steps_x + steps_y);
    let mut n = 0.0;
    loop {
        if (0..camera.width as i64).contains(&x) && (0..camera.height as i64).contains(&y) {
            let t = t0 + (t1 - t0) * (n / total);
            let z = 1.0 / (inv_a + (inv_b - inv_a) * t);
            let k = y as usize * camera.width + x as usize;
            let stored = depth[k] as f64;
            if z <= stored + LINE_DEPTH_BIAS * z {
                image.pixels[k] = color;
            }
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= steps_y {
            err += steps_y;
            x += sx;
        }
        if e2 <= steps_x {
            err += steps_x;
            y += sy;
        }
        n += 1.0;
    }
}

fn check_dims(camera: &Camera, gbuffer: &GBuffer) -> Result<()> {
    if (camera.width, camera.height) != (gbuffer.width, gbuffer.height) {
        return Err(Error::Assembly(format!(
            "G-Buffer is {}x{} but the camera is {}x{}",
            gbuffer.width, gbuffer.height, camera.width, camera.height
        )));
    }
    Ok(())
}
