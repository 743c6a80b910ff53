use glam::DVec3;
use rayon::prelude::*;

use crate::image::HdrImage;
use crate::math::Rgb;

/// Face order `+X, -X, +Y, -Y, +Z, -Z`, OpenGL orientation.
pub const FACE_COUNT: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct CubeLevel {
    pub size: usize,
    pub faces: [Vec<Rgb>; FACE_COUNT],
}

impl CubeLevel {
    pub fn filled(size: usize, value: Rgb) -> Self {
        Self { size, faces: std::array::from_fn(|_| vec![value; size * size]) }
    }

    /// Builds a level by evaluating `f` at every texel-center direction.
    pub fn from_fn(size: usize, f: impl Fn(DVec3) -> Rgb + Sync) -> Self {
        let faces = std::array::from_fn(|face| {
            let mut texels = vec![Rgb::ZERO; size * size];
            texels.par_chunks_mut(size).enumerate().for_each(|(j, row)| {
                for (i, t) in row.iter_mut().enumerate() {
                    *t = f(texel_direction(face, i, j, size));
                }
            });
            texels
        });
        Self { size, faces }
    }

    #[inline]
    pub fn texel(&self, face: usize, i: usize, j: usize) -> Rgb {
        self.faces[face][j * self.size + i]
    }

    /// Bilinear lookup within the face hit by `dir`, clamped at face edges.
    pub fn sample(&self, dir: DVec3) -> Rgb {
        let (face, u, v) = direction_to_face(dir);
        let s = self.size as f64;
        let x = ((u + 1.0) * 0.5 * s - 0.5).clamp(0.0, s - 1.0);
        let y = ((v + 1.0) * 0.5 * s - 0.5).clamp(0.0, s - 1.0);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.size - 1), (y0 + 1).min(self.size - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = self.texel(face, x0, y0) * (1.0 - fx) + self.texel(face, x1, y0) * fx;
        let bottom = self.texel(face, x0, y1) * (1.0 - fx) + self.texel(face, x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// 2x2 box downsample; odd sizes keep the last column/row.
    pub fn downsample(&self) -> CubeLevel {
        let size = (self.size / 2).max(1);
        let faces = std::array::from_fn(|face| {
            let mut out = Vec::with_capacity(size * size);
            for j in 0..size {
                for i in 0..size {
                    let (i0, j0) = ((2 * i).min(self.size - 1), (2 * j).min(self.size - 1));
                    let (i1, j1) = ((2 * i + 1).min(self.size - 1), (2 * j + 1).min(self.size - 1));
                    out.push(
                        (self.texel(face, i0, j0) + self.texel(face, i1, j0) + self.texel(face, i0, j1) + self.texel(face, i1, j1)) * 0.25,
                    );
                }
            }
            out
        });
        CubeLevel { size, faces }
    }

    pub fn texels(&self) -> impl Iterator<Item = &Rgb> {
        self.faces.iter().flatten()
    }

    /// Solid-angle weighted mean radiance over the sphere.
    pub fn mean_radiance(&self) -> Rgb {
        let mut sum = Rgb::ZERO;
        let mut weight = 0.0;
        for face in 0..FACE_COUNT {
            for j in 0..self.size {
                for i in 0..self.size {
                    let w = texel_solid_angle(i, j, self.size);
                    sum += self.texel(face, i, j) * w;
                    weight += w;
                }
            }
        }
        sum / weight
    }
}

/// Cubemap with a mip chain; level 0 is the finest.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvCubemap {
    pub levels: Vec<CubeLevel>,
}

impl EnvCubemap {
    pub fn single(level: CubeLevel) -> Self {
        Self { levels: vec![level] }
    }

    pub fn face_size(&self) -> usize {
        self.levels[0].size
    }

    pub fn mip_count(&self) -> usize {
        self.levels.len()
    }

    /// Appends box-filtered levels down to 1x1.
    pub fn with_box_chain(level: CubeLevel) -> Self {
        let mut levels = vec![level];
        while levels.last().unwrap().size > 1 {
            let next = levels.last().unwrap().downsample();
            levels.push(next);
        }
        Self { levels }
    }

    pub fn sample(&self, dir: DVec3) -> Rgb {
        self.levels[0].sample(dir)
    }

    /// Trilinear lookup at fractional mip `lod`, clamped to the chain.
    pub fn sample_lod(&self, dir: DVec3, lod: f64) -> Rgb {
        let max = (self.levels.len() - 1) as f64;
        let lod = lod.clamp(0.0, max);
        let lo = lod.floor() as usize;
        let hi = (lo + 1).min(self.levels.len() - 1);
        let f = lod - lo as f64;
        let a = self.levels[lo].sample(dir);
        if f == 0.0 || lo == hi {
            return a;
        }
        a * (1.0 - f) + self.levels[hi].sample(dir) * f
    }

    pub fn is_valid(&self) -> bool {
        self.levels.iter().all(|l| l.texels().all(|t| t.is_finite() && t.min_element() >= 0.0))
    }
}

/// Direction through the center of texel `(i, j)` of `face`.
pub fn texel_direction(face: usize, i: usize, j: usize, size: usize) -> DVec3 {
    let u = 2.0 * (i as f64 + 0.5) / size as f64 - 1.0;
    let v = 2.0 * (j as f64 + 0.5) / size as f64 - 1.0;
    face_direction(face, u, v)
}

pub fn face_direction(face: usize, u: f64, v: f64) -> DVec3 {
    let d = match face {
        0 => DVec3::new(1.0, -v, -u),
        1 => DVec3::new(-1.0, -v, u),
        2 => DVec3::new(u, 1.0, v),
        3 => DVec3::new(u, -1.0, -v),
        4 => DVec3::new(u, -v, 1.0),
        _ => DVec3::new(-u, -v, -1.0),
    };
    d.normalize()
}

/// Face index and face coordinates `u, v ∈ [-1, 1]` hit by `d`.
pub fn direction_to_face(d: DVec3) -> (usize, f64, f64) {
    let a = d.abs();
    if a.x >= a.y && a.x >= a.z {
        if d.x > 0.0 {
            (0, -d.z / a.x, -d.y / a.x)
        } else {
            (1, d.z / a.x, -d.y / a.x)
        }
    } else if a.y >= a.z {
        if d.y > 0.0 {
            (2, d.x / a.y, d.z / a.y)
        } else {
            (3, d.x / a.y, -d.z / a.y)
        }
    } else if d.z > 0.0 {
        (4, d.x / a.z, -d.y / a.z)
    } else {
        (5, -d.x / a.z, -d.y / a.z)
    }
}

/// Exact solid angle subtended by texel `(i, j)` of a face of `size`.
pub fn texel_solid_angle(i: usize, j: usize, size: usize) -> f64 {
    let area = |x: f64, y: f64| (x * y).atan2((x * x + y * y + 1.0).sqrt());
    let inv = 2.0 / size as f64;
    let (x0, y0) = (i as f64 * inv - 1.0, j as f64 * inv - 1.0);
    let (x1, y1) = (x0 + inv, y0 + inv);
    area(x0, y0) - area(x0, y1) - area(x1, y0) + area(x1, y1)
}

/// Equirect texture coordinates in `[0,1]²` for a direction. `+z` maps to
/// the image center, `+y` to the top row.
pub fn direction_to_equirect(d: DVec3) -> (f64, f64) {
    let u = 0.5 + d.x.atan2(d.z) / (2.0 * std::f64::consts::PI);
    let v = d.y.clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
    (u, v)
}

pub fn equirect_to_direction(u: f64, v: f64) -> DVec3 {
    let phi = (u - 0.5) * 2.0 * std::f64::consts::PI;
    let theta = v * std::f64::consts::PI;
    DVec3::new(theta.sin() * phi.sin(), theta.cos(), theta.sin() * phi.cos())
}

/// Bilinear equirect lookup, wrapping horizontally and clamping vertically.
pub fn sample_equirect(img: &HdrImage, d: DVec3) -> Rgb {
    let (u, v) = direction_to_equirect(d);
    let x = u * img.width as f64 - 0.5;
    let y = (v * img.height as f64 - 0.5).clamp(0.0, (img.height - 1) as f64);
    let (x0f, y0) = (x.floor(), y.floor() as usize);
    let (fx, fy) = (x - x0f, y - y0 as f64);
    let wrap = |x: i64| x.rem_euclid(img.width as i64) as usize;
    let (xa, xb) = (wrap(x0f as i64), wrap(x0f as i64 + 1));
    let y1 = (y0 + 1).min(img.height - 1);
    let top = img.get(xa, y0) * (1.0 - fx) + img.get(xb, y0) * fx;
    let bottom = img.get(xa, y1) * (1.0 - fx) + img.get(xb, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resamples an equirect panorama into a cubemap. Non-finite or negative
/// source texels are replaced by zero; their count is returned.
pub fn equirect_to_cubemap(equirect: &HdrImage, face_size: usize) -> (CubeLevel, usize) {
    let mut clean = equirect.clone();
    let mut sanitized = 0;
    for p in &mut clean.pixels {
        if !p.is_finite() || p.min_element() < 0.0 {
            *p = Rgb::ZERO;
            sanitized += 1;
        }
    }
    if sanitized > 0 {
        log::warn!("{sanitized} non-finite or negative environment texels set to zero");
    }
    (CubeLevel::from_fn(face_size, |d| sample_equirect(&clean, d)), sanitized)
}
