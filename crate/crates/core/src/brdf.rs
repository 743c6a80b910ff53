//! Microfacet terms shared by direct shading and the IBL precomputation.
//!
//! `D` is GGX with `α = roughness²`, `G` is the separable Smith form with
//! Schlick-GGX `k = α / 2`, `F` is Schlick. Every term is symmetric in the
//! two directions, so `f_r(o, i) == f_r(i, o)` bit for bit.

use std::f64::consts::PI;

use glam::DVec3;

use crate::math::Rgb;

pub const ROUGHNESS_FLOOR: f64 = 0.045;
/// Dielectric reflectance at normal incidence.
pub const DIELECTRIC_F0: f64 = 0.04;
/// Keeps the specular denominator finite at grazing angles.
pub const SPECULAR_EPSILON: f64 = 1e-4;

#[inline]
pub fn alpha(roughness: f64) -> f64 {
    let r = roughness.clamp(ROUGHNESS_FLOOR, 1.0);
    r * r
}

#[inline]
pub fn d_ggx(n_dot_h: f64, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    let t = n_dot_h * n_dot_h * (a2 - 1.0) + 1.0;
    a2 / (PI * t * t)
}

#[inline]
pub fn g1_schlick(n_dot_x: f64, k: f64) -> f64 {
    n_dot_x / (n_dot_x * (1.0 - k) + k)
}

#[inline]
pub fn g_smith(n_dot_v: f64, n_dot_l: f64, alpha: f64) -> f64 {
    let k = alpha * 0.5;
    g1_schlick(n_dot_v, k) * g1_schlick(n_dot_l, k)
}

#[inline]
pub fn fresnel_schlick(f0: Rgb, v_dot_h: f64) -> Rgb {
    f0 + (Rgb::ONE - f0) * (1.0 - v_dot_h).clamp(0.0, 1.0).powi(5)
}

#[inline]
pub fn f0(albedo: Rgb, metalness: f64) -> Rgb {
    Rgb::splat(DIELECTRIC_F0).lerp(albedo, metalness)
}

/// GGX half vector in the local frame (`+z` = normal).
#[inline]
pub fn sample_ggx_half(u: f64, v: f64, alpha: f64) -> DVec3 {
    let a2 = alpha * alpha;
    let cos_t = ((1.0 - u) / (1.0 + (a2 - 1.0) * u)).max(0.0).sqrt();
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = 2.0 * PI * v;
    DVec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t)
}

/// Cook-Torrance evaluation with its individual terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrdfSample {
    pub f_r: Rgb,
    pub d: f64,
    pub g: f64,
    pub f: Rgb,
}

/// `f_r` for unit normal `n`, outgoing `o` and incident `i`. Zero below
/// either horizon.
pub fn cook_torrance(n: DVec3, o: DVec3, i: DVec3, albedo: Rgb, metalness: f64, roughness: f64) -> BrdfSample {
    let nv = n.dot(o);
    let nl = n.dot(i);
    if nv <= 0.0 || nl <= 0.0 {
        return BrdfSample { f_r: Rgb::ZERO, d: 0.0, g: 0.0, f: Rgb::ZERO };
    }
    let h = (o + i).normalize();
    let nh = n.dot(h).max(0.0);
    let vh = (0.5 * (1.0 + o.dot(i))).max(0.0).sqrt();
    let a = alpha(roughness);
    let d = d_ggx(nh, a);
    let g = g_smith(nv, nl, a);
    let f = fresnel_schlick(f0(albedo, metalness), vh);
    let specular = f * (d * g / (4.0 * nv * nl + SPECULAR_EPSILON));
    let diffuse = (Rgb::ONE - f) * (1.0 - metalness) * albedo / PI;
    BrdfSample { f_r: diffuse + specular, d, g, f }
}
