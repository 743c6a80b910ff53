use rayon::prelude::*;

use crate::brdf::{alpha, g_smith, sample_ggx_half};
use crate::math::hammersley;

/// Split-sum table of `(A, B)` with `∫ f cos = F0·A + B`. Row `j` is
/// roughness, column `i` is `n·v`, both sampled at cell centers.
#[derive(Clone, Debug, PartialEq)]
pub struct BrdfLut {
    pub size: usize,
    pub values: Vec<[f64; 2]>,
}

impl BrdfLut {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> [f64; 2] {
        self.values[j * self.size + i]
    }

    /// Bilinear lookup with edge clamping.
    pub fn lookup(&self, n_dot_v: f64, roughness: f64) -> (f64, f64) {
        let s = self.size as f64;
        let x = (n_dot_v.clamp(0.0, 1.0) * s - 0.5).clamp(0.0, s - 1.0);
        let y = (roughness.clamp(0.0, 1.0) * s - 0.5).clamp(0.0, s - 1.0);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.size - 1), (y0 + 1).min(self.size - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t];
        let v = lerp(lerp(self.get(x0, y0), self.get(x1, y0), fx), lerp(self.get(x0, y1), self.get(x1, y1), fx), fy);
        (v[0], v[1])
    }
}

/// GGX importance-sampled estimate of `(A, B)` for one table cell.
pub fn integrate_brdf(n_dot_v: f64, roughness: f64, samples: u32, seed: u64) -> (f64, f64) {
    let nv = n_dot_v.clamp(1e-4, 1.0);
    let v = glam::DVec3::new((1.0 - nv * nv).sqrt(), 0.0, nv);
    let a = alpha(roughness);
    let (mut sa, mut sb) = (0.0, 0.0);
    for k in 0..samples {
        let (u1, u2) = hammersley(k, samples, seed);
        let h = sample_ggx_half(u1, u2, a);
        let vh = v.dot(h);
        let l = h * (2.0 * vh) - v;
        if l.z <= 0.0 || vh <= 0.0 {
            continue;
        }
        let g_vis = g_smith(nv, l.z, a) * vh / (h.z * nv);
        let fc = (1.0 - vh).powi(5);
        sa += (1.0 - fc) * g_vis;
        sb += fc * g_vis;
    }
    (sa / samples as f64, sb / samples as f64)
}

pub fn compute_brdf_lut(size: usize, samples: u32, seed: u64) -> BrdfLut {
    let values = (0..size * size)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % size, k / size);
            let (a, b) = integrate_brdf((i as f64 + 0.5) / size as f64, (j as f64 + 0.5) / size as f64, samples, seed);
            [a, b]
        })
        .collect();
    BrdfLut { size, values }
}
