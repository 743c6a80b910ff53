//! Per-pixel lighting and the compose pass.

use glam::DVec3;
use rayon::prelude::*;

use crate::brdf::{cook_torrance, f0};
use crate::error::{Error, Result};
use crate::gbuffer::GBuffer;
use crate::ibl::{ambient_weights, IblSet};
use crate::image::{HdrImage, ScalarImage};
use crate::math::{Pose, Rgb};
use crate::raster::{DepthMap, SHADOW_MAP_SIZE};
use crate::scene::{Background, Camera, EffectSettings, PointLight};

pub use crate::brdf::{cook_torrance as brdf_cook_torrance, BrdfSample};

/// Constant term of the shadow bias, in scene-scale units.
pub const SHADOW_BIAS: f64 = 5e-3;
/// Slope term of the shadow bias, multiplied by `tan θ`.
pub const SHADOW_SLOPE_BIAS: f64 = 2e-2;
/// Upper clamp on `tan θ` in the slope term.
pub const MAX_BIAS_SLOPE: f64 = 10.0;
/// Shadow frusta cover the scene sphere with this margin.
pub const SHADOW_FOV_MARGIN: f64 = 1.05;
pub const MAX_SHADOW_FOV: f64 = 160.0 * std::f64::consts::PI / 180.0;

/// Everything the lighting model needs at one visible point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub position: DVec3,
    pub normal: DVec3,
    /// Unit direction toward the eye.
    pub view: DVec3,
    pub albedo: Rgb,
    pub metalness: f64,
    pub roughness: f64,
}

/// Decodes pixel `(i, j)`; `None` for background and for pixels without
/// a normal (point clouds).
pub fn surface_at(gbuffer: &GBuffer, camera: &Camera, i: usize, j: usize) -> Option<SurfacePoint> {
    let t = gbuffer.read(i, j)?;
    let normal = t.normal?;
    let position = camera.pose.transform_point(camera.view_ray(i as f64 + 0.5, j as f64 + 0.5) * t.depth);
    let view = (camera.position() - position).normalize();
    Some(SurfacePoint { position, normal, view, albedo: t.albedo, metalness: t.metalness, roughness: t.roughness })
}

/// Camera that sees the whole scene sphere from `light`.
pub fn light_camera(light: &PointLight, center: DVec3, radius: f64) -> Camera {
    let r = if radius > 0.0 { radius } else { 1.0 };
    let offset = center - light.position;
    let dist = offset.length();
    let (target, fov, near) = if dist <= r * SHADOW_FOV_MARGIN {
        let target = if dist > 0.0 { center } else { light.position - DVec3::Y };
        (target, MAX_SHADOW_FOV, r * 1e-3)
    } else {
        let fov = (2.0 * (r / dist).asin() * SHADOW_FOV_MARGIN).min(MAX_SHADOW_FOV);
        (center, fov, (dist - r * SHADOW_FOV_MARGIN).max(r * 1e-3))
    };
    let up = if offset.normalize_or_zero().dot(DVec3::Y).abs() > 0.99 { DVec3::Z } else { DVec3::Y };
    Camera {
        pose: Pose::looking_at(light.position, target, up),
        vertical_fov: fov,
        near,
        far: dist + r * SHADOW_FOV_MARGIN * 2.0,
        width: SHADOW_MAP_SIZE,
        height: SHADOW_MAP_SIZE,
    }
}

/// Fraction of the 3x3 taps around the projected texel that see `position`.
pub fn visibility_pcf(position: DVec3, normal: DVec3, light: &PointLight, map: &DepthMap, scene_scale: f64) -> f64 {
    let Some(p) = map.camera.project(position) else { return 1.0 };
    let (w, h) = (map.width() as i64, map.height() as i64);
    let (ci, cj) = (p.x.floor() as i64, p.y.floor() as i64);
    if ci < 0 || cj < 0 || ci >= w || cj >= h || p.depth < map.camera.near {
        return 1.0;
    }
    let to_light = (light.position - position).normalize_or_zero();
    let cos = normal.dot(to_light).clamp(1e-6, 1.0);
    let tan = ((1.0 - cos * cos).sqrt() / cos).min(MAX_BIAS_SLOPE);
    let bias = scene_scale * (SHADOW_BIAS + SHADOW_SLOPE_BIAS * tan);
    let mut lit = 0u32;
    for dj in -1..=1 {
        for di in -1..=1 {
            let (i, j) = (ci + di, cj + dj);
            if i < 0 || j < 0 || i >= w || j >= h || p.depth <= map.get(i as usize, j as usize) as f64 + bias {
                lit += 1;
            }
        }
    }
    lit as f64 / 9.0
}

/// Sum of point-light contributions with inverse-square falloff.
/// `shadows[k]` is the depth map of `lights[k]`, if it casts shadows.
pub fn direct_lighting(p: &SurfacePoint, lights: &[PointLight], shadows: &[Option<&DepthMap>], scene_scale: f64) -> Rgb {
    let mut sum = Rgb::ZERO;
    for (k, light) in lights.iter().enumerate() {
        let d = light.position - p.position;
        let d2 = d.length_squared();
        if d2 <= 0.0 {
            continue;
        }
        let wi = d / d2.sqrt();
        let nl = p.normal.dot(wi);
        if nl <= 0.0 {
            continue;
        }
        let f = cook_torrance(p.normal, p.view, wi, p.albedo, p.metalness, p.roughness).f_r;
        let vis = match shadows.get(k).copied().flatten() {
            Some(map) if light.casts_shadow => visibility_pcf(p.position, p.normal, light, map, scene_scale),
            _ => 1.0,
        };
        if vis > 0.0 {
            sum += f * light.color * (light.intensity / d2 * nl * vis);
        }
    }
    sum
}

/// Split-sum ambient term scaled by `ao`. `None` when no environment is
/// baked.
pub fn ambient_ibl(p: &SurfacePoint, ibl: Option<&IblSet>, ao: f64, multiscatter: bool) -> Option<Rgb> {
    let ibl = ibl?;
    let nv = p.normal.dot(p.view).max(1e-4);
    let (a, b) = ibl.lut.lookup(nv, p.roughness);
    let w = ambient_weights(f0(p.albedo, p.metalness), a, b, multiscatter);
    let r = p.normal * (2.0 * p.normal.dot(p.view)) - p.view;
    let irradiance = ibl.diffuse(p.normal);
    let specular = ibl.specular(r, p.roughness) * w.specular + irradiance * w.multiscatter;
    let diffuse = w.diffuse * p.albedo * (1.0 - p.metalness) * irradiance;
    Some((specular + diffuse) * ao)
}

/// Inputs of the compose pass. Effect maps are optional; a missing map
/// contributes a factor of 1.
pub struct ComposeInputs<'a> {
    pub gbuffer: &'a GBuffer,
    pub camera: &'a Camera,
    pub lights: &'a [PointLight],
    pub shadows: &'a [Option<&'a DepthMap>],
    pub ibl: Option<&'a IblSet>,
    /// Half-resolution ambient occlusion, upsampled bilinearly.
    pub ao: Option<&'a ScalarImage>,
    /// Full-resolution eye-dome factor for point-cloud pixels.
    pub edl: Option<&'a ScalarImage>,
    pub effects: &'a EffectSettings,
    pub scene_scale: f64,
}

pub fn background(camera: &Camera, ibl: Option<&IblSet>, bg: Background, i: usize, j: usize) -> Rgb {
    match (bg, ibl) {
        (Background::SolidColor(c), _) => c,
        (Background::EnvMap, Some(ibl)) => ibl.background(camera.pixel_direction(i, j)),
        (Background::EnvMap, None) => Rgb::ZERO,
    }
}

/// Lit HDR frame before bloom and line overlays.
pub fn compose(inp: &ComposeInputs) -> Result<HdrImage> {
    let (w, h) = (inp.camera.width, inp.camera.height);
    if (inp.gbuffer.width, inp.gbuffer.height) != (w, h) {
        return Err(Error::Assembly("G-Buffer does not match the camera".into()));
    }
    if inp.edl.is_some_and(|e| (e.width, e.height) != (w, h)) {
        return Err(Error::Assembly("EDL map does not match the camera".into()));
    }
    if inp.lights.len() < inp.shadows.len() {
        return Err(Error::Assembly("more shadow maps than lights".into()));
    }
    let mut image = HdrImage::new(w, h);
    image.pixels.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
        for (i, out) in row.iter_mut().enumerate() {
            *out = shade_pixel(inp, i, j);
        }
    });
    Ok(image)
}

fn shade_pixel(inp: &ComposeInputs, i: usize, j: usize) -> Rgb {
    let Some(texel) = inp.gbuffer.read(i, j) else {
        return background(inp.camera, inp.ibl, inp.effects.background, i, j);
    };
    let ao = inp.ao.map_or(1.0, |m| m.sample_uv((i as f64 + 0.5) / inp.camera.width as f64, (j as f64 + 0.5) / inp.camera.height as f64));
    if texel.normal.is_none() {
        let edl = inp.edl.map_or(1.0, |e| e.get(i, j));
        return texel.albedo * edl * ao;
    }
    let p = surface_at(inp.gbuffer, inp.camera, i, j).expect("covered pixel with a normal");
    let direct = direct_lighting(&p, inp.lights, inp.shadows, inp.scene_scale);
    let ambient = ambient_ibl(&p, inp.ibl, ao, inp.effects.multiscatter).unwrap_or(Rgb::ZERO);
    direct + ambient
}
