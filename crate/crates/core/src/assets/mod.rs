//! File formats: meshes, Radiance HDR, PNG, scene descriptions and baked
//! IBL sets. Every writer is atomic (temporary file, then rename).

mod ibl_io;
pub mod obj;
pub mod ply;
pub mod rgbe;
mod scene_file;

pub use ibl_io::{load_ibl, save_ibl, IBL_MANIFEST};
pub use scene_file::{parse_scene, parse_scene_value, LoadedScene, OutputSpec};

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use glam::DVec3;

use crate::error::{Error, Result};
use crate::geom::{Mesh, Texture};
use crate::image::{HdrImage, LdrImage};
use crate::math::Rgb;

/// What the loader had to repair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Vertices dropped for non-finite attributes.
    pub dropped_vertices: usize,
    /// Faces and edges dropped because they referenced a dropped vertex.
    pub dropped_primitives: usize,
    /// Normals that could not be normalized and were replaced.
    pub repaired_normals: usize,
}

/// 8-bit display color to linear, with the output gamma.
pub fn srgb8_to_linear(c: DVec3) -> Rgb {
    (c / 255.0).clamp(Rgb::ZERO, Rgb::ONE).powf(crate::post::DEFAULT_GAMMA)
}

/// Drops non-finite vertices, normalizes normals and makes tangents
/// orthogonal to their normals while keeping their length.
pub fn sanitize(mesh: &mut Mesh) -> LoadReport {
    let mut report = LoadReport::default();
    let n = mesh.v.len();
    let finite = |k: usize| {
        mesh.v[k].is_finite()
            && mesh.n.get(k).is_none_or(|x| x.is_finite())
            && mesh.c.get(k).is_none_or(|x| x.is_finite())
            && mesh.t.get(k).is_none_or(|x| x.is_finite())
            && mesh.b.get(k).is_none_or(|x| x.is_finite())
            && mesh.uv.get(k).is_none_or(|x| x.is_finite())
    };
    let keep: Vec<bool> = (0..n).map(finite).collect();
    if keep.iter().any(|k| !k) {
        let mut remap = vec![u32::MAX; n];
        let mut next = 0u32;
        for (k, &ok) in keep.iter().enumerate() {
            if ok {
                remap[k] = next;
                next += 1;
            }
        }
        report.dropped_vertices = n - next as usize;
        fn filter<T: Copy>(v: &mut Vec<T>, keep: &[bool]) {
            if !v.is_empty() {
                let mut it = keep.iter();
                v.retain(|_| *it.next().unwrap());
            }
        }
        filter(&mut mesh.v, &keep);
        filter(&mut mesh.n, &keep);
        filter(&mut mesh.c, &keep);
        filter(&mut mesh.t, &keep);
        filter(&mut mesh.b, &keep);
        filter(&mut mesh.uv, &keep);
        let (nf, ne) = (mesh.f.len(), mesh.e.len());
        mesh.f = mesh.f.iter().filter(|f| f.iter().all(|&i| keep[i as usize])).map(|f| f.map(|i| remap[i as usize])).collect();
        mesh.e = mesh.e.iter().filter(|e| e.iter().all(|&i| keep[i as usize])).map(|e| e.map(|i| remap[i as usize])).collect();
        report.dropped_primitives = nf - mesh.f.len() + ne - mesh.e.len();
        log::warn!("`{}`: dropped {} non-finite vertices and {} primitives", mesh.name, report.dropped_vertices, report.dropped_primitives);
    }
    if !mesh.n.is_empty() {
        let mut fallback: Option<Vec<DVec3>> = None;
        for k in 0..mesh.n.len() {
            if let Some(u) = mesh.n[k].try_normalize() {
                mesh.n[k] = u;
                continue;
            }
            report.repaired_normals += 1;
            let computed = fallback.get_or_insert_with(|| {
                let mut m = Mesh { v: mesh.v.clone(), f: mesh.f.clone(), ..Mesh::default() };
                m.compute_normals();
                if m.n.is_empty() {
                    vec![DVec3::Z; mesh.v.len()]
                } else {
                    m.n
                }
            });
            mesh.n[k] = computed[k];
        }
        if report.repaired_normals > 0 {
            log::warn!("`{}`: replaced {} degenerate normals", mesh.name, report.repaired_normals);
        }
    }
    if !mesh.t.is_empty() && !mesh.n.is_empty() {
        for (t, n) in mesh.t.iter_mut().zip(&mesh.n) {
            let len = t.length();
            let ortho = *t - *n * n.dot(*t);
            *t = ortho.try_normalize().map_or_else(|| crate::math::tangent_frame(*n).0 * len, |d| d * len);
        }
    }
    report
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    load_mesh_with_report(path).map(|(m, _)| m)
}

pub fn load_mesh_with_report(path: &Path) -> Result<(Mesh, LoadReport)> {
    let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).unwrap_or_default();
    match ext.as_str() {
        "obj" => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            obj::parse(&text, path)
        }
        "ply" => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            ply::parse(&bytes, path)
        }
        _ => Err(Error::parse(path, "unsupported mesh format (expected .obj or .ply)")),
    }
}

pub fn load_hdr(path: &Path) -> Result<HdrImage> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    rgbe::read(BufReader::new(file)).map_err(|e| match e {
        rgbe::RgbeError::Io(io) => Error::io(path, io),
        other => Error::parse(path, other.to_string()),
    })
}

pub fn write_hdr(img: &HdrImage, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    rgbe::write(&mut bytes, img).map_err(|e| Error::io(path, e))?;
    write_atomic(path, &bytes)
}

/// PNG, 8-bit RGB.
pub fn encode_png(img: &LdrImage) -> Vec<u8> {
    let mut out = Vec::new();
    let encoder = image::codecs::png::PngEncoder::new(&mut out);
    image::ImageEncoder::write_image(encoder, &img.as_bytes(), img.width as u32, img.height as u32, image::ExtendedColorType::Rgb8)
        .expect("in-memory PNG encoding");
    out
}

pub fn write_png(img: &LdrImage, path: &Path) -> Result<()> {
    write_atomic(path, &encode_png(img))
}

pub fn read_png(path: &Path) -> Result<LdrImage> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image { path: path.into(), message: other.to_string() },
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.pixels().map(|p| p.0).collect();
    Ok(LdrImage { width: w as usize, height: h as usize, data })
}

/// Linear-light texture from an 8-bit image file.
pub fn load_texture(path: &Path) -> Result<Texture> {
    let ldr = read_png(path)?;
    let texels = ldr.data.iter().map(|p| srgb8_to_linear(DVec3::new(p[0] as f64, p[1] as f64, p[2] as f64))).collect();
    Ok(Texture::new(ldr.width, ldr.height, texels))
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().ok_or_else(|| Error::parse(path, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = LdrImage { width: 7, height: 3, data: (0..21).map(|k| [(k * 12) as u8, (255 - k * 7) as u8, (k * k) as u8]).collect() };
        write_png(&img, &p).unwrap();
        assert_eq!(read_png(&p).unwrap(), img);
        let black = LdrImage::new(1, 1);
        write_png(&black, &p).unwrap();
        assert_eq!(read_png(&p).unwrap(), black);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn hdr_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.hdr");
        let img = HdrImage::from_fn(33, 9, |i, j| Rgb::new(i as f64 * 0.37 + 0.01, (j as f64).exp(), 0.5));
        write_hdr(&img, &p).unwrap();
        let back = load_hdr(&p).unwrap();
        for (a, b) in img.pixels.iter().zip(&back.pixels) {
            assert!((*a - *b).abs().max_element() / a.max_element() < 0.01);
        }
    }

    #[test]
    fn missing_files_are_io_errors() {
        let e = load_mesh(Path::new("/nonexistent/x.ply")).unwrap_err();
        assert!(e.is_io() && e.to_string().contains("/nonexistent/x.ply"));
        assert!(load_hdr(Path::new("/nonexistent/x.hdr")).unwrap_err().is_io());
        assert!(!load_mesh(Path::new("x.stl")).unwrap_err().is_io());
    }

    #[test]
    fn sanitize_drops_non_finite_vertices() {
        let mut m = Mesh::from_vertices("m", vec![DVec3::ZERO, DVec3::new(f64::NAN, 0.0, 0.0), DVec3::X, DVec3::Y]);
        m.f = vec![[0, 1, 2], [0, 2, 3]];
        m.n = vec![DVec3::Z * 3.0, DVec3::Z, DVec3::ZERO, DVec3::Z];
        let r = sanitize(&mut m);
        assert_eq!(r, LoadReport { dropped_vertices: 1, dropped_primitives: 1, repaired_normals: 1 });
        assert_eq!(m.f, vec![[0, 1, 2]]);
        assert!(m.n.iter().all(|n| (n.length() - 1.0).abs() < 1e-12));
        m.validate().unwrap();
    }
}
