//! Four-target G-Buffer.
//!
//! | target | format        | R      | G     | B      | A      |
//! |--------|---------------|--------|-------|--------|--------|
//! | rt0    | RGBA8 / float | albedo | albedo| albedo | weight |
//! | rt1    | RGB8 / float  | normal | normal| normal | unused |
//! | rt2    | RG8 / float   | metal  | rough | unused | unused |
//! | rt3    | R32           | depth  |       |        |        |
//!
//! Positions are never stored; they are rebuilt from the linear view-space
//! depth in rt3. Unused channels stay zero.

use glam::DVec3;

use crate::error::{Error, Result};
use crate::image::{rgb01_to_ldr, LdrImage, ScalarImage};
use crate::math::Rgb;
use crate::scene::Camera;

/// Accumulated weight at or below this marks a pixel as background.
pub const WEIGHT_EPSILON: f32 = 1e-4;
pub const BACKGROUND_DEPTH: f32 = f32::INFINITY;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    /// Unsigned bytes; each write overwrites.
    Byte8,
    /// Floating-point accumulation for splatting. Stored as `f32`, which is
    /// at least as precise as the half floats it stands in for.
    Half16,
}

#[derive(Clone, Debug, PartialEq)]
enum Targets {
    Byte8 { rt0: Vec<[u8; 4]>, rt1: Vec<[u8; 4]>, rt2: Vec<[u8; 4]> },
    Half16 { rt0: Vec<[f32; 4]>, rt1: Vec<[f32; 4]>, rt2: Vec<[f32; 4]> },
}

/// Attributes written for one fragment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub albedo: Rgb,
    /// `None` for geometry without normals (point clouds).
    pub normal: Option<DVec3>,
    pub metalness: f64,
    pub roughness: f64,
    pub depth: f64,
}

/// Decoded contents of one covered pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Texel {
    pub albedo: Rgb,
    pub normal: Option<DVec3>,
    pub metalness: f64,
    pub roughness: f64,
    pub depth: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    targets: Targets,
    rt3: Vec<f32>,
    normalized: bool,
}

impl GBuffer {
    pub fn new(width: usize, height: usize, precision: Precision) -> Self {
        let n = width * height;
        let targets = match precision {
            Precision::Byte8 => Targets::Byte8 { rt0: vec![[0; 4]; n], rt1: vec![[0; 4]; n], rt2: vec![[0; 4]; n] },
            Precision::Half16 => Targets::Half16 { rt0: vec![[0.0; 4]; n], rt1: vec![[0.0; 4]; n], rt2: vec![[0.0; 4]; n] },
        };
        Self { width, height, targets, rt3: vec![BACKGROUND_DEPTH; n], normalized: false }
    }

    pub fn for_camera(camera: &Camera, precision: Precision) -> Self {
        Self::new(camera.width, camera.height, precision)
    }

    pub fn precision(&self) -> Precision {
        match self.targets {
            Targets::Byte8 { .. } => Precision::Byte8,
            Targets::Half16 { .. } => Precision::Half16,
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn depth(&self, i: usize, j: usize) -> f32 {
        self.rt3[self.idx(i, j)]
    }

    pub fn depths(&self) -> &[f32] {
        &self.rt3
    }

    pub fn depth_image(&self) -> ScalarImage {
        ScalarImage { width: self.width, height: self.height, values: self.rt3.iter().map(|&d| d as f64).collect() }
    }

    /// Raw channel values of rt0..rt2 at a pixel, bytes widened to `f32`.
    pub fn raw_channels(&self, i: usize, j: usize) -> [[f32; 4]; 3] {
        let k = self.idx(i, j);
        let widen = |b: [u8; 4]| b.map(|c| c as f32);
        match &self.targets {
            Targets::Byte8 { rt0, rt1, rt2 } => [widen(rt0[k]), widen(rt1[k]), widen(rt2[k])],
            Targets::Half16 { rt0, rt1, rt2 } => [rt0[k], rt1[k], rt2[k]],
        }
    }

    /// Overwrites a pixel (byte mode) with weight 1.
    pub fn write(&mut self, i: usize, j: usize, s: &Sample) {
        let k = self.idx(i, j);
        self.rt3[k] = s.depth as f32;
        match &mut self.targets {
            Targets::Byte8 { rt0, rt1, rt2 } => {
                let a = s.albedo.clamp(Rgb::ZERO, Rgb::ONE);
                rt0[k] = [quantize(a.x), quantize(a.y), quantize(a.z), 255];
                rt1[k] = match s.normal {
                    Some(n) => {
                        let [x, y, z] = encode_normal(n);
                        [x, y, z, 0]
                    }
                    None => [0; 4],
                };
                rt2[k] = [quantize(s.metalness), quantize(s.roughness), 0, 0];
            }
            Targets::Half16 { rt0, rt1, rt2 } => {
                let n = s.normal.unwrap_or(DVec3::ZERO);
                rt0[k] = [s.albedo.x as f32, s.albedo.y as f32, s.albedo.z as f32, 1.0];
                rt1[k] = [n.x as f32, n.y as f32, n.z as f32, 0.0];
                rt2[k] = [s.metalness as f32, s.roughness as f32, 0.0, 0.0];
            }
        }
    }

    /// Additive splat of `weight · attributes` (float mode). Depth keeps the
    /// nearest contributing fragment.
    pub fn accumulate(&mut self, i: usize, j: usize, s: &Sample, weight: f64) -> Result<()> {
        let k = self.idx(i, j);
        let Targets::Half16 { rt0, rt1, rt2 } = &mut self.targets else {
            return Err(Error::WrongPass { pass: "surfel", reason: "accumulation requires a Half16 G-Buffer".into() });
        };
        let w = weight as f32;
        let n = s.normal.unwrap_or(DVec3::ZERO);
        let add = |t: &mut [f32; 4], v: [f32; 4]| t.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        add(&mut rt0[k], [s.albedo.x as f32 * w, s.albedo.y as f32 * w, s.albedo.z as f32 * w, w]);
        add(&mut rt1[k], [n.x as f32 * w, n.y as f32 * w, n.z as f32 * w, 0.0]);
        add(&mut rt2[k], [s.metalness as f32 * w, s.roughness as f32 * w, 0.0, 0.0]);
        self.rt3[k] = self.rt3[k].min(s.depth as f32);
        self.normalized = false;
        Ok(())
    }

    /// Reads back a covered pixel; `None` for background.
    pub fn read(&self, i: usize, j: usize) -> Option<Texel> {
        let k = self.idx(i, j);
        let depth = self.rt3[k];
        if !depth.is_finite() {
            return None;
        }
        match &self.targets {
            Targets::Byte8 { rt0, rt1, rt2 } => {
                let (a, n, m) = (rt0[k], rt1[k], rt2[k]);
                if a[3] == 0 {
                    return None;
                }
                let normal = if n[..3] == [0, 0, 0] { None } else { Some(decode_normal([n[0], n[1], n[2]]).0) };
                Some(Texel {
                    albedo: Rgb::new(dequantize(a[0]), dequantize(a[1]), dequantize(a[2])),
                    normal,
                    metalness: dequantize(m[0]),
                    roughness: dequantize(m[1]),
                    depth: depth as f64,
                    weight: dequantize(a[3]),
                })
            }
            Targets::Half16 { rt0, rt1, rt2 } => {
                let (a, n, m) = (rt0[k], rt1[k], rt2[k]);
                if a[3] <= WEIGHT_EPSILON {
                    return None;
                }
                let normal = DVec3::new(n[0] as f64, n[1] as f64, n[2] as f64).try_normalize();
                Some(Texel {
                    albedo: Rgb::new(a[0] as f64, a[1] as f64, a[2] as f64),
                    normal,
                    metalness: m[0] as f64,
                    roughness: m[1] as f64,
                    depth: depth as f64,
                    weight: a[3] as f64,
                })
            }
        }
    }

    /// Byte G-Buffer widened into float storage, values decoded.
    pub fn promote(&self) -> GBuffer {
        let mut out = GBuffer::new(self.width, self.height, Precision::Half16);
        out.rt3.clone_from(&self.rt3);
        if let (Targets::Byte8 { rt0, rt1, rt2 }, Targets::Half16 { rt0: h0, rt1: h1, rt2: h2 }) = (&self.targets, &mut out.targets) {
            for k in 0..rt0.len() {
                let (a, n, m) = (rt0[k], rt1[k], rt2[k]);
                h0[k] = [a[0], a[1], a[2], a[3]].map(|c| dequantize(c) as f32);
                if n[..3] != [0, 0, 0] {
                    let d = decode_normal([n[0], n[1], n[2]]).0;
                    h1[k] = [d.x as f32, d.y as f32, d.z as f32, 0.0];
                }
                h2[k] = [dequantize(m[0]) as f32, dequantize(m[1]) as f32, 0.0, 0.0];
            }
        } else {
            out = self.clone();
        }
        out
    }

    /// Divides accumulated attributes by the weight in rt0.a. Covered pixels
    /// end with weight 1; pixels at or below [`WEIGHT_EPSILON`] become
    /// background.
    pub fn normalize_accumulated(&mut self) -> Result<()> {
        if self.normalized {
            return Ok(());
        }
        let Targets::Half16 { rt0, rt1, rt2 } = &mut self.targets else {
            return Err(Error::WrongPass { pass: "normalize", reason: "requires a Half16 G-Buffer".into() });
        };
        for k in 0..rt0.len() {
            let w = rt0[k][3];
            if w > WEIGHT_EPSILON {
                let inv = 1.0 / w;
                rt0[k] = [rt0[k][0] * inv, rt0[k][1] * inv, rt0[k][2] * inv, 1.0];
                let n = DVec3::new(rt1[k][0] as f64, rt1[k][1] as f64, rt1[k][2] as f64);
                rt1[k] = match n.try_normalize() {
                    Some(n) => [n.x as f32, n.y as f32, n.z as f32, 0.0],
                    None => [0.0; 4],
                };
                rt2[k] = [rt2[k][0] * inv, rt2[k][1] * inv, 0.0, 0.0];
            } else {
                rt0[k] = [0.0; 4];
                rt1[k] = [0.0; 4];
                rt2[k] = [0.0; 4];
                self.rt3[k] = BACKGROUND_DEPTH;
            }
        }
        self.normalized = true;
        Ok(())
    }

    /// Copies every pixel of `other` that is nearer than the current one.
    pub fn merge_nearest(&mut self, other: &GBuffer) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::Assembly("G-Buffer merge with mismatched dimensions".into()));
        }
        for j in 0..self.height {
            for i in 0..self.width {
                if let Some(t) = other.read(i, j) {
                    if (t.depth as f32) < self.depth(i, j) {
                        let s =
                            Sample { albedo: t.albedo, normal: t.normal, metalness: t.metalness, roughness: t.roughness, depth: t.depth };
                        self.write(i, j, &s);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn covered_count(&self) -> usize {
        (0..self.height).flat_map(|j| (0..self.width).map(move |i| (i, j))).filter(|&(i, j)| self.read(i, j).is_some()).count()
    }

    /// Channel visualizations in the order albedo, normals, metal-rough, depth, weight.
    pub fn debug_images(&self) -> Vec<(&'static str, LdrImage)> {
        let texels: Vec<Option<Texel>> =
            (0..self.height).flat_map(|j| (0..self.width).map(move |i| (i, j))).map(|(i, j)| self.read(i, j)).collect();
        let (w, h) = (self.width, self.height);
        let albedo = rgb01_to_ldr(w, h, texels.iter().map(|t| t.map_or(DVec3::ZERO, |t| t.albedo)));
        let normals = rgb01_to_ldr(w, h, texels.iter().map(|t| t.and_then(|t| t.normal).map_or(DVec3::ZERO, |n| (n + 1.0) * 0.5)));
        let metal_rough = rgb01_to_ldr(w, h, texels.iter().map(|t| t.map_or(DVec3::ZERO, |t| DVec3::new(t.metalness, t.roughness, 0.0))));
        let finite: Vec<f64> = self.rt3.iter().filter(|d| d.is_finite()).map(|&d| d as f64).collect();
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(0.0, f64::max);
        let depth = self.depth_image().to_ldr(if lo.is_finite() { lo } else { 0.0 }, hi);
        let weight =
            ScalarImage { width: w, height: h, values: texels.iter().map(|t| t.map_or(0.0, |t| t.weight)).collect() }.to_ldr(0.0, 1.0);
        vec![("albedo", albedo), ("normals", normals), ("metal_rough", metal_rough), ("depth", depth), ("weight", weight)]
    }
}

#[inline]
fn quantize(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

#[inline]
fn dequantize(b: u8) -> f64 {
    b as f64 / 255.0
}

/// Scaled-offset normal encoding, `round((n + 1) / 2 · 255)` with halves rounding up.
pub fn encode_normal(n: DVec3) -> [u8; 3] {
    let e = |c: f64| ((c.clamp(-1.0, 1.0) + 1.0) * 0.5 * 255.0 + 0.5).floor() as u8;
    [e(n.x), e(n.y), e(n.z)]
}

/// Inverse of [`encode_normal`]. The flag is set when the bytes decode to a
/// (near) zero vector, in which case `+z` is returned.
pub fn decode_normal(b: [u8; 3]) -> (DVec3, bool) {
    let v = DVec3::new(b[0] as f64, b[1] as f64, b[2] as f64) / 255.0 * 2.0 - 1.0;
    if v.length_squared() < 1e-4 {
        (DVec3::Z, true)
    } else {
        (v.normalize(), false)
    }
}

/// World position of pixel `(i, j)` at linear depth; `None` for background.
pub fn reconstruct_position(depth: f64, pixel: (usize, usize), camera: &Camera) -> Option<DVec3> {
    if !(depth.is_finite() && depth > 0.0) {
        return None;
    }
    let view = camera.view_ray(pixel.0 as f64 + 0.5, pixel.1 as f64 + 0.5) * depth;
    Some(camera.view_from_world().inverse().transform_point(view))
}
