//! Image-based lighting: cubemap resampling, diffuse and specular
//! prefiltering, the split-sum BRDF table and multi-scatter weights.

pub mod cubemap;
mod lut;

pub use cubemap::{equirect_to_cubemap, CubeLevel, EnvCubemap};
pub use lut::{compute_brdf_lut, integrate_brdf, BrdfLut};

use std::f64::consts::PI;

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::brdf::{alpha, d_ggx, sample_ggx_half};
use crate::error::{Error, Result};
use crate::image::HdrImage;
use crate::math::{cosine_hemisphere, hammersley, tangent_frame, Rgb};

pub const MIN_IRRADIANCE_SAMPLES: u32 = 4096;
pub const MIN_SPECULAR_SAMPLES: u32 = 1024;
pub const MIN_LUT_SAMPLES: u32 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BakeSettings {
    pub face_size: usize,
    pub specular_mips: usize,
    pub irradiance_size: usize,
    pub irradiance_samples: u32,
    pub specular_samples: u32,
    pub lut_size: usize,
    pub lut_samples: u32,
    pub seed: u64,
}

impl Default for BakeSettings {
    fn default() -> Self {
        Self {
            face_size: 128,
            specular_mips: 5,
            irradiance_size: 32,
            irradiance_samples: MIN_IRRADIANCE_SAMPLES,
            specular_samples: MIN_SPECULAR_SAMPLES,
            lut_size: 64,
            lut_samples: MIN_LUT_SAMPLES,
            seed: 0,
        }
    }
}

impl BakeSettings {
    /// Smaller faces for baking on the fly before a render.
    pub fn preview() -> Self {
        Self { face_size: 64, irradiance_size: 16, lut_size: 32, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.face_size == 0 || self.irradiance_size == 0 || self.lut_size < 16 {
            return bad("IBL face sizes must be positive and lut_size at least 16");
        }
        if self.specular_mips < 2 {
            return bad("specular_mips must be at least 2");
        }
        if self.irradiance_samples < MIN_IRRADIANCE_SAMPLES {
            return bad("irradiance_samples must be at least 4096");
        }
        if self.specular_samples < MIN_SPECULAR_SAMPLES || self.lut_samples < MIN_LUT_SAMPLES {
            return bad("specular and LUT sample counts must be at least 1024");
        }
        Ok(())
    }
}

/// Baked lighting for one environment.
#[derive(Clone, PartialEq)]
pub struct IblSet {
    /// Source radiance with a box-filtered mip chain.
    pub environment: EnvCubemap,
    /// Stores `E(n) / π`, the outgoing radiance of a white Lambertian.
    pub irradiance: CubeLevel,
    /// Mip `m` is prefiltered at roughness `m / (mips - 1)`.
    pub specular: EnvCubemap,
    pub lut: BrdfLut,
    pub settings: BakeSettings,
    pub sanitized_texels: usize,
}

impl std::fmt::Debug for IblSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IblSet")
            .field("face_size", &self.environment.face_size())
            .field("specular_mips", &self.specular.mip_count())
            .field("irradiance_size", &self.irradiance.size)
            .field("lut_size", &self.lut.size)
            .field("sanitized_texels", &self.sanitized_texels)
            .finish()
    }
}

impl IblSet {
    pub fn bake(equirect: &HdrImage, settings: &BakeSettings) -> Result<IblSet> {
        settings.validate()?;
        if equirect.width == 0 || equirect.height == 0 {
            return Err(Error::InvalidArgument("environment image is empty".into()));
        }
        let (base, sanitized_texels) = equirect_to_cubemap(equirect, settings.face_size);
        Ok(Self::bake_cubemap(base, settings, sanitized_texels))
    }

    pub fn bake_cubemap(base: CubeLevel, settings: &BakeSettings, sanitized_texels: usize) -> IblSet {
        let environment = EnvCubemap::with_box_chain(base);
        let irradiance = prefilter_irradiance(&environment, settings.irradiance_size, settings.irradiance_samples, settings.seed);
        let specular = prefilter_specular(&environment, settings.specular_mips, settings.specular_samples, settings.seed);
        let lut = compute_brdf_lut(settings.lut_size, settings.lut_samples, settings.seed);
        IblSet { environment, irradiance, specular, lut, settings: *settings, sanitized_texels }
    }

    /// Constant-radiance environment, the white furnace.
    pub fn uniform(radiance: Rgb, settings: &BakeSettings) -> IblSet {
        Self::bake_cubemap(CubeLevel::filled(settings.face_size, radiance), settings, 0)
    }

    pub fn background(&self, dir: DVec3) -> Rgb {
        self.environment.sample(dir)
    }

    /// `E(n) / π` for a unit normal.
    pub fn diffuse(&self, n: DVec3) -> Rgb {
        self.irradiance.sample(n)
    }

    /// Prefiltered radiance along `r` at `roughness`.
    pub fn specular(&self, r: DVec3, roughness: f64) -> Rgb {
        let lod = roughness.clamp(0.0, 1.0) * (self.specular.mip_count() - 1) as f64;
        self.specular.sample_lod(r, lod)
    }
}

/// `log2` mip offset for a sample of density `pdf` among `n` on a source
/// with `texel_solid_angle` at mip 0.
#[inline]
fn source_lod(pdf: f64, n: u32, texel_solid_angle: f64) -> f64 {
    if pdf <= 0.0 {
        return f64::INFINITY;
    }
    let sample_solid_angle = 1.0 / (n as f64 * pdf);
    (0.5 * (sample_solid_angle / texel_solid_angle).log2() + 1.0).max(0.0)
}

fn base_texel_solid_angle(env: &EnvCubemap) -> f64 {
    4.0 * PI / (6.0 * (env.face_size() * env.face_size()) as f64)
}

/// Cosine-weighted Monte Carlo estimate of `E(n) / π` per output texel.
pub fn prefilter_irradiance(env: &EnvCubemap, size: usize, samples: u32, seed: u64) -> CubeLevel {
    let omega_p = base_texel_solid_angle(env);
    let taps: Vec<(DVec3, f64)> = (0..samples)
        .map(|k| {
            let (u, v) = hammersley(k, samples, seed);
            let d = cosine_hemisphere(u, v);
            (d, source_lod(d.z / PI, samples, omega_p))
        })
        .collect();
    CubeLevel::from_fn(size, |n| {
        let (t, b) = tangent_frame(n);
        let mut sum = Rgb::ZERO;
        for &(d, lod) in &taps {
            sum += env.sample_lod(t * d.x + b * d.y + n * d.z, lod);
        }
        sum / samples as f64
    })
}

/// GGX-prefiltered mip chain with `N = V = R`. Mip 0 copies the source.
pub fn prefilter_specular(env: &EnvCubemap, mips: usize, samples: u32, seed: u64) -> EnvCubemap {
    let base = &env.levels[0];
    let omega_p = base_texel_solid_angle(env);
    let mut levels = vec![base.clone()];
    for m in 1..mips {
        let size = (base.size >> m).max(1);
        let a = alpha(m as f64 / (mips - 1) as f64);
        let taps: Vec<(DVec3, f64)> = (0..samples)
            .filter_map(|k| {
                let (u, v) = hammersley(k, samples, seed);
                let h = sample_ggx_half(u, v, a);
                let l = DVec3::new(2.0 * h.z * h.x, 2.0 * h.z * h.y, 2.0 * h.z * h.z - 1.0);
                (l.z > 0.0).then(|| (l, source_lod(d_ggx(h.z, a) / 4.0, samples, omega_p)))
            })
            .collect();
        levels.push(CubeLevel::from_fn(size, |n| {
            let (t, b) = tangent_frame(n);
            let mut sum = Rgb::ZERO;
            let mut weight = 0.0;
            for &(l, lod) in &taps {
                sum += env.sample_lod(t * l.x + b * l.y + n * l.z, lod) * l.z;
                weight += l.z;
            }
            sum / weight
        }));
    }
    EnvCubemap { levels }
}

/// Energy split for ambient lighting at one pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmbientWeights {
    /// Multiplies the prefiltered specular radiance.
    pub specular: Rgb,
    /// Multi-scatter specular energy, multiplies the irradiance term.
    pub multiscatter: Rgb,
    /// Multiplies `albedo · (1 - metalness) · irradiance`.
    pub diffuse: Rgb,
}

/// Single-scatter split-sum weights, plus the multi-scatter compensation when
/// `multiscatter` is set. `(a, b)` come from the BRDF table.
pub fn ambient_weights(f0: Rgb, a: f64, b: f64, multiscatter: bool) -> AmbientWeights {
    let fss_ess = f0 * a + Rgb::splat(b);
    if !multiscatter {
        return AmbientWeights { specular: fss_ess, multiscatter: Rgb::ZERO, diffuse: Rgb::ONE - fss_ess };
    }
    let e_ms = 1.0 - (a + b);
    let f_avg = f0 + (Rgb::ONE - f0) / 21.0;
    let f_ms = fss_ess * f_avg / (Rgb::ONE - f_avg * e_ms);
    let ms = f_ms * e_ms;
    AmbientWeights { specular: fss_ess, multiscatter: ms, diffuse: Rgb::ONE - fss_ess - ms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::HdrImage;

    fn fast() -> BakeSettings {
        BakeSettings { face_size: 16, specular_mips: 4, irradiance_size: 4, lut_size: 16, ..BakeSettings::default() }
    }

    #[test]
    fn settings_enforce_minimum_samples() {
        assert!(BakeSettings::default().validate().is_ok());
        assert!(BakeSettings { irradiance_samples: 100, ..fast() }.validate().is_err());
        assert!(BakeSettings { specular_mips: 0, ..fast() }.validate().is_err());
    }

    #[test]
    fn uniform_environment_stays_uniform() {
        let c = Rgb::new(0.5, 1.0, 2.0);
        let set = IblSet::uniform(c, &fast());
        for t in set.irradiance.texels() {
            assert!((*t - c).abs().max_element() < 1e-9);
        }
        for level in &set.specular.levels {
            for t in level.texels() {
                assert!((*t - c).abs().max_element() < 1e-9);
            }
        }
    }

    #[test]
    fn irradiance_of_sky_hemisphere() {
        // Radiance 1 above the horizon: E/π = (1 + n.y) / 2 for normals in the y-z plane.
        let img = HdrImage::from_fn(128, 64, |_, j| if j < 32 { Rgb::ONE } else { Rgb::ZERO });
        let set = IblSet::bake(&img, &BakeSettings { irradiance_size: 8, ..fast() }).unwrap();
        for (n, expected) in [(DVec3::Y, 1.0), (DVec3::NEG_Y, 0.0), (DVec3::Z, 0.5)] {
            let got = set.diffuse(n).x;
            assert!((got - expected).abs() < 0.05, "{n}: {got}");
        }
    }

    #[test]
    fn specular_mips_low_pass() {
        let img = HdrImage::from_fn(64, 32, |i, j| {
            let d = cubemap::equirect_to_direction((i as f64 + 0.5) / 64.0, (j as f64 + 0.5) / 32.0);
            let checker = if (i / 4 + j / 4) % 2 == 0 { 0.5 } else { 0.0 };
            Rgb::splat((2.0 * d.x).exp() + checker)
        });
        let set = IblSet::bake(&img, &fast()).unwrap();
        // Measured at the mip-0 texel directions so every level shares a domain.
        let dirs: Vec<DVec3> =
            (0..6).flat_map(|f| (0..16).flat_map(move |j| (0..16).map(move |i| cubemap::texel_direction(f, i, j, 16)))).collect();
        let variance = |l: &CubeLevel| {
            let xs: Vec<f64> = dirs.iter().map(|d| l.sample(*d).x).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
        };
        let v: Vec<f64> = set.specular.levels.iter().map(variance).collect();
        assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{v:?}");
        assert_eq!(set.specular.levels[0], set.environment.levels[0]);
    }

    #[test]
    fn furnace_weights_conserve_energy() {
        for (a, b) in [(0.9, 0.05), (0.5, 0.1), (0.2, 0.02)] {
            let w = ambient_weights(Rgb::ONE, a, b, true);
            let total = w.specular + w.multiscatter;
            assert!((total - Rgb::ONE).abs().max_element() < 1e-12, "{total}");
            let d = ambient_weights(Rgb::splat(0.04), a, b, true);
            let total = d.specular + d.multiscatter + d.diffuse;
            assert!((total - Rgb::ONE).abs().max_element() < 1e-12);
        }
    }
}
