//! Tone mapping and display encoding. Order: bloom is added before tone
//! mapping, gamma encoding comes last.

use rayon::prelude::*;

use crate::image::{HdrImage, LdrImage};
use crate::math::Rgb;
use crate::scene::ToneMapper;

pub const DEFAULT_GAMMA: f64 = 2.2;

/// Rational ACES fit, clamped to `[0, 1]`.
#[inline]
pub fn aces(x: f64) -> f64 {
    const A: f64 = 2.51;
    const B: f64 = 0.03;
    const C: f64 = 2.43;
    const D: f64 = 0.59;
    const E: f64 = 0.14;
    let x = x.max(0.0);
    (x * (A * x + B) / (x * (C * x + D) + E)).clamp(0.0, 1.0)
}

#[inline]
pub fn reinhard(x: f64) -> f64 {
    let x = x.max(0.0);
    if x.is_infinite() {
        1.0
    } else {
        x / (1.0 + x)
    }
}

pub fn tonemap_pixel(c: Rgb, op: ToneMapper) -> Rgb {
    let f = match op {
        ToneMapper::Aces => aces,
        ToneMapper::Reinhard => reinhard,
    };
    Rgb::new(f(c.x), f(c.y), f(c.z))
}

pub fn tonemap_aces(hdr: &HdrImage) -> HdrImage {
    tonemap(hdr, ToneMapper::Aces)
}

pub fn tonemap_reinhard(hdr: &HdrImage) -> HdrImage {
    tonemap(hdr, ToneMapper::Reinhard)
}

pub fn tonemap(hdr: &HdrImage, op: ToneMapper) -> HdrImage {
    HdrImage { width: hdr.width, height: hdr.height, pixels: hdr.pixels.par_iter().map(|c| tonemap_pixel(*c, op)).collect() }
}

#[inline]
pub fn encode_gamma(x: f64, gamma: f64) -> u8 {
    (255.0 * x.clamp(0.0, 1.0).powf(1.0 / gamma)).round() as u8
}

#[inline]
pub fn decode_gamma(b: u8, gamma: f64) -> f64 {
    (b as f64 / 255.0).powf(gamma)
}

/// Quantizes linear `[0, 1]` values to gamma-encoded bytes.
pub fn gamma_correct(linear: &HdrImage, gamma: f64) -> LdrImage {
    let data = linear.pixels.par_iter().map(|c| [encode_gamma(c.x, gamma), encode_gamma(c.y, gamma), encode_gamma(c.z, gamma)]).collect();
    LdrImage { width: linear.width, height: linear.height, data }
}

/// Tone map then gamma encode.
pub fn to_ldr(hdr: &HdrImage, op: ToneMapper, gamma: f64) -> LdrImage {
    gamma_correct(&tonemap(hdr, op), gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        assert_eq!(aces(0.0), 0.0);
        assert_eq!(reinhard(0.0), 0.0);
        assert_eq!(reinhard(1.0), 0.5);
        assert!(aces(100.0) >= 0.99);
        assert_eq!(encode_gamma(0.0, 2.2), 0);
        assert_eq!(encode_gamma(1.0, 2.2), 255);
        assert_eq!(encode_gamma(0.5, 2.2), 186);
    }

    #[test]
    fn monotone_sweeps() {
        let xs: Vec<f64> = (0..10_000).map(|k| k as f64 * 1e-3).collect();
        for f in [aces, reinhard] {
            assert!(xs.windows(2).all(|w| f(w[0]) <= f(w[1])));
            assert!(xs.iter().all(|x| (0.0..=1.0).contains(&f(*x))));
        }
    }

    #[test]
    fn gamma_round_trips_bytes() {
        for g in [1.0, 1.8, 2.2, 2.4] {
            for b in 0..=255u8 {
                assert_eq!(encode_gamma(decode_gamma(b, g), g), b);
            }
        }
        for b in 0..=255u8 {
            assert_eq!(encode_gamma(b as f64 / 255.0, 1.0), b);
        }
    }
}
