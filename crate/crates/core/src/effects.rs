//! Screen-space effects computed from the G-Buffer or the lit frame.

use glam::DVec3;
use rayon::prelude::*;

use crate::gbuffer::GBuffer;
use crate::image::{HdrImage, ScalarImage};
use crate::math::{cosine_hemisphere, hammersley, luminance, mix64, tangent_frame, unit_f64, Rgb};
use crate::scene::Camera;

pub const DEFAULT_SSAO_SAMPLES: usize = 16;
/// Occlusion bias as a fraction of the SSAO radius.
pub const SSAO_BIAS: f64 = 0.01;
/// Depth similarity sigma of the AO blur, as a fraction of scene scale.
pub const BLUR_DEPTH_SIGMA: f64 = 0.02;
const BLUR_SPATIAL_SIGMA: f64 = 1.5;
/// Soft-knee width as a fraction of the bloom threshold.
pub const BLOOM_KNEE: f64 = 0.5;
pub const MAX_BLOOM_LEVELS: usize = 6;

#[inline]
fn half(n: usize) -> usize {
    n.div_ceil(2)
}

/// Depth at the full-resolution pixel each half-resolution texel stands for.
pub fn half_res_depth(gbuffer: &GBuffer) -> ScalarImage {
    let (w, h) = (half(gbuffer.width), half(gbuffer.height));
    let mut out = ScalarImage::filled(w, h, f64::INFINITY);
    for j in 0..h {
        for i in 0..w {
            out.set(i, j, gbuffer.depth(2 * i, 2 * j) as f64);
        }
    }
    out
}

/// Normal-oriented hemisphere ambient occlusion at half resolution.
/// `1` means unoccluded. A non-positive radius disables the pass.
pub fn ssao(gbuffer: &GBuffer, camera: &Camera, radius: f64, samples: usize, seed: u64) -> ScalarImage {
    let (w, h) = (half(gbuffer.width), half(gbuffer.height));
    let mut out = ScalarImage::filled(w, h, 1.0);
    if !(radius > 0.0) || samples == 0 {
        return out;
    }
    let n = samples as u32;
    let kernel: Vec<DVec3> = (0..n)
        .map(|k| {
            let (u, v) = hammersley(k, n, seed);
            let s = (k as f64 + 0.5) / n as f64;
            // Denser near the center of the hemisphere.
            cosine_hemisphere(u, v) * (0.1 + 0.9 * s * s)
        })
        .collect();
    let view = camera.view_from_world();
    let bias = SSAO_BIAS * radius;
    out.values.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
        for (i, ao) in row.iter_mut().enumerate() {
            let (x, y) = (2 * i, 2 * j);
            let Some(t) = gbuffer.read(x, y) else { continue };
            let p = camera.view_ray(x as f64 + 0.5, y as f64 + 0.5) * t.depth;
            let normal = match t.normal {
                Some(nw) => view.transform_direction(nw).normalize(),
                None => -p.normalize(),
            };
            let (tx, ty) = tangent_frame(normal);
            let angle = 2.0 * std::f64::consts::PI * unit_f64(mix64(seed ^ ((y * gbuffer.width + x) as u64)));
            let (sin, cos) = angle.sin_cos();
            let (rx, ry) = (tx * cos + ty * sin, ty * cos - tx * sin);
            let mut occluded = 0usize;
            for d in &kernel {
                let s = p + (rx * d.x + ry * d.y + normal * d.z) * radius;
                let Some(q) = camera.project_view(s) else { continue };
                let (qi, qj) = (q.x.floor(), q.y.floor());
                if qi < 0.0 || qj < 0.0 || qi >= gbuffer.width as f64 || qj >= gbuffer.height as f64 {
                    continue;
                }
                let stored = gbuffer.depth(qi as usize, qj as usize) as f64;
                if stored < q.depth - bias && (t.depth - stored).abs() < radius {
                    occluded += 1;
                }
            }
            *ao = 1.0 - occluded as f64 / samples as f64;
        }
    });
    out
}

/// 5x5 Gaussian weighted by depth similarity. Taps more than three depth
/// sigmas away from the center are ignored.
pub fn bilateral_blur(ao: &ScalarImage, depth: &ScalarImage, scene_scale: f64) -> ScalarImage {
    assert_eq!((ao.width, ao.height), (depth.width, depth.height), "AO and depth dims differ");
    let sigma_d = (BLUR_DEPTH_SIGMA * scene_scale).max(f64::MIN_POSITIVE);
    let mut out = ao.clone();
    let (w, h) = (ao.width as i64, ao.height as i64);
    out.values.par_chunks_mut(ao.width).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            let dc = depth.get(i, j);
            if !dc.is_finite() {
                continue;
            }
            let (mut sum, mut wsum) = (0.0, 0.0);
            for dj in -2i64..=2 {
                for di in -2i64..=2 {
                    let (x, y) = (i as i64 + di, j as i64 + dj);
                    if x < 0 || y < 0 || x >= w || y >= h {
                        continue;
                    }
                    let dn = depth.get(x as usize, y as usize);
                    let dd = dn - dc;
                    if !dn.is_finite() || dd.abs() > 3.0 * sigma_d {
                        continue;
                    }
                    let g = (-((di * di + dj * dj) as f64) / (2.0 * BLUR_SPATIAL_SIGMA * BLUR_SPATIAL_SIGMA)).exp()
                        * (-(dd * dd) / (2.0 * sigma_d * sigma_d)).exp();
                    sum += g * ao.get(x as usize, y as usize);
                    wsum += g;
                }
            }
            *v = (sum / wsum).clamp(0.0, 1.0);
        }
    });
    out
}

/// Eye-dome factor in `(0, 1]` from log-depth differences to the eight
/// neighbors. Background pixels and neighbors contribute nothing.
pub fn edl(depth: &ScalarImage, strength: f64) -> ScalarImage {
    let mut out = ScalarImage::filled(depth.width, depth.height, 1.0);
    if strength <= 0.0 {
        return out;
    }
    let (w, h) = (depth.width as i64, depth.height as i64);
    out.values.par_chunks_mut(depth.width).enumerate().for_each(|(j, row)| {
        for (i, f) in row.iter_mut().enumerate() {
            let dc = depth.get(i, j);
            if !(dc.is_finite() && dc > 0.0) {
                continue;
            }
            let lc = dc.ln();
            let mut response = 0.0;
            for (di, dj) in [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
                let (x, y) = (i as i64 + di, j as i64 + dj);
                if x < 0 || y < 0 || x >= w || y >= h {
                    continue;
                }
                let dn = depth.get(x as usize, y as usize);
                if dn.is_finite() && dn > 0.0 {
                    response += (lc - dn.ln()).max(0.0);
                }
            }
            *f = (-strength * response).exp();
        }
    });
    out
}

/// Per-pixel bright-pass weight: 0 up to the threshold, a quadratic ramp
/// over the knee, then 1.
#[inline]
pub fn bright_weight(lum: f64, threshold: f64) -> f64 {
    if lum <= threshold {
        return 0.0;
    }
    let knee = BLOOM_KNEE * threshold;
    if lum >= threshold + knee {
        1.0
    } else {
        let t = (lum - threshold) / knee;
        t * t
    }
}

/// 2x box downsample to `ceil(w/2) x ceil(h/2)`.
pub fn downsample(img: &HdrImage) -> HdrImage {
    let (w, h) = (half(img.width), half(img.height));
    HdrImage::from_fn(w, h, |i, j| {
        let mut sum = Rgb::ZERO;
        let mut n = 0.0;
        for (x, y) in [(2 * i, 2 * j), (2 * i + 1, 2 * j), (2 * i, 2 * j + 1), (2 * i + 1, 2 * j + 1)] {
            if x < img.width && y < img.height {
                sum += img.get(x, y);
                n += 1.0;
            }
        }
        sum / n
    })
}

const GAUSS9: [f64; 9] = {
    // exp(-k² / 8) for k = -4..=4 (σ = 2), normalized below.
    [0.135335283, 0.324652467, 0.606530660, 0.882496903, 1.0, 0.882496903, 0.606530660, 0.324652467, 0.135335283]
};

/// Separable 9-tap Gaussian with edge clamping.
pub fn gaussian9(img: &HdrImage) -> HdrImage {
    let norm: f64 = GAUSS9.iter().sum();
    let pass = |src: &HdrImage, horizontal: bool| {
        HdrImage::from_fn(src.width, src.height, |i, j| {
            let mut sum = Rgb::ZERO;
            for (k, wgt) in GAUSS9.iter().enumerate() {
                let o = k as i64 - 4;
                let (x, y) = if horizontal {
                    ((i as i64 + o).clamp(0, src.width as i64 - 1) as usize, j)
                } else {
                    (i, (j as i64 + o).clamp(0, src.height as i64 - 1) as usize)
                };
                sum += src.get(x, y) * *wgt;
            }
            sum / norm
        })
    };
    pass(&pass(img, true), false)
}

/// Bright-map pyramid. Level 1 is full resolution; levels 2..L are
/// downsampled then blurred.
pub fn bloom_pyramid(hdr: &HdrImage, threshold: f64, levels: usize) -> Vec<HdrImage> {
    let levels = levels.clamp(1, MAX_BLOOM_LEVELS);
    let bright = HdrImage::from_fn(hdr.width, hdr.height, |i, j| {
        let c = hdr.get(i, j);
        c * bright_weight(luminance(c), threshold)
    });
    let mut pyramid = vec![bright];
    let mut current = pyramid[0].clone();
    for _ in 1..levels {
        current = downsample(&current);
        pyramid.push(gaussian9(&current));
    }
    pyramid
}

/// Additive bloom layer: every level upsampled to full resolution, summed
/// and scaled by `1 / L`.
pub fn bloom(hdr: &HdrImage, threshold: f64, levels: usize) -> HdrImage {
    let pyramid = bloom_pyramid(hdr, threshold, levels);
    let l = pyramid.len() as f64;
    let (w, h) = (hdr.width, hdr.height);
    let mut layer = HdrImage::new(w, h);
    layer.pixels.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
        for (i, out) in row.iter_mut().enumerate() {
            let mut sum = Rgb::ZERO;
            // A texel of level k covers 2^k full-resolution pixels per axis.
            for (k, level) in pyramid.iter().enumerate() {
                let inv = 1.0 / (1u64 << k) as f64;
                sum += level.sample_bilinear((i as f64 + 0.5) * inv, (j as f64 + 0.5) * inv);
            }
            *out = sum / l;
        }
    });
    layer
}
