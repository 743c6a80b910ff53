use glam::DVec3;

use crate::math::Rgb;

/// Linear floating-point frame, row-major from the top-left pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct HdrImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl HdrImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, Rgb::ZERO)
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        Self { width, height, pixels: vec![color; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                pixels.push(f(i, j));
            }
        }
        Self { width, height, pixels }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Rgb {
        self.pixels[j * self.width + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, c: Rgb) {
        self.pixels[j * self.width + i] = c;
    }

    /// Bilinear lookup at continuous pixel coordinates, clamped to the edge.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Rgb {
        let x = (x - 0.5).clamp(0.0, (self.width - 1) as f64);
        let y = (y - 0.5).clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn is_valid(&self) -> bool {
        self.pixels.iter().all(|p| p.is_finite() && p.min_element() >= 0.0)
    }

    pub fn max_luminance(&self) -> f64 {
        self.pixels.iter().map(|p| crate::math::luminance(*p)).fold(0.0, f64::max)
    }
}

/// 8-bit gamma-encoded RGB, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LdrImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[u8; 3]>,
}

impl LdrImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![[0; 3]; width * height] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> [u8; 3] {
        self.data[j * self.width + i]
    }

    pub fn as_bytes(&self) -> Vec<u8> {
        self.data.iter().flatten().copied().collect()
    }

    /// Mean absolute per-channel difference in `[0, 1]` units.
    pub fn mean_abs_diff(&self, other: &LdrImage) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let total: u64 = self.data.iter().zip(&other.data).flat_map(|(a, b)| (0..3).map(move |c| a[c].abs_diff(b[c]) as u64)).sum();
        total as f64 / (self.data.len() * 3) as f64 / 255.0
    }
}

/// Scalar single-channel image (depth, ambient occlusion, effect factors).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ScalarImage {
    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Self { width, height, values: vec![v; width * height] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.width + i] = v;
    }

    /// Bilinear lookup at normalized `[0,1]²` coordinates, clamped.
    pub fn sample_uv(&self, u: f64, v: f64) -> f64 {
        let x = (u * self.width as f64 - 0.5).clamp(0.0, (self.width - 1) as f64);
        let y = (v * self.height as f64 - 0.5).clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Grayscale visualization mapping `[lo, hi]` to black..white.
    pub fn to_ldr(&self, lo: f64, hi: f64) -> LdrImage {
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        let data = self
            .values
            .iter()
            .map(|v| {
                let g = if v.is_finite() { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
                let b = (g * 255.0).round() as u8;
                [b; 3]
            })
            .collect();
        LdrImage { width: self.width, height: self.height, data }
    }
}

/// Encodes a unit-range vector image for debugging dumps.
pub fn rgb01_to_ldr(width: usize, height: usize, pixels: impl Iterator<Item = DVec3>) -> LdrImage {
    let data = pixels
        .map(|p| {
            let c = p.clamp(DVec3::ZERO, DVec3::ONE) * 255.0;
            [c.x.round() as u8, c.y.round() as u8, c.z.round() as u8]
        })
        .collect();
    LdrImage { width, height, data }
}
