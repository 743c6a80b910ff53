use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_hdr, write_atomic, write_hdr};
use crate::error::{Error, Result};
use crate::ibl::{BakeSettings, BrdfLut, CubeLevel, EnvCubemap, IblSet};
use crate::image::HdrImage;
use crate::math::Rgb;

pub const IBL_MANIFEST: &str = "manifest.json";
const FORMAT: &str = "pbrview-ibl";
const FACE_SUFFIX: [&str; 6] = ["px", "nx", "py", "ny", "pz", "nz"];

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    settings: BakeSettings,
    sanitized_texels: usize,
    face_order: Vec<String>,
    environment: Vec<String>,
    irradiance: Vec<String>,
    specular: Vec<Vec<String>>,
    brdf_lut: String,
}

fn face_names(prefix: &str) -> Vec<String> {
    FACE_SUFFIX.iter().map(|s| format!("{prefix}_{s}.hdr")).collect()
}

fn save_level(dir: &Path, level: &CubeLevel, names: &[String]) -> Result<()> {
    for (face, name) in names.iter().enumerate() {
        let img = HdrImage { width: level.size, height: level.size, pixels: level.faces[face].clone() };
        write_hdr(&img, &dir.join(name))?;
    }
    Ok(())
}

fn load_level(dir: &Path, names: &[String]) -> Result<CubeLevel> {
    if names.len() != 6 {
        return Err(Error::parse(dir.join(IBL_MANIFEST), "a cube level needs six faces"));
    }
    let mut size = 0;
    let mut faces: [Vec<Rgb>; 6] = Default::default();
    for (face, name) in names.iter().enumerate() {
        let path = dir.join(name);
        let img = load_hdr(&path)?;
        if img.width != img.height || (face > 0 && img.width != size) {
            return Err(Error::parse(path, "cube faces must be square and equally sized"));
        }
        size = img.width;
        faces[face] = img.pixels;
    }
    Ok(CubeLevel { size, faces })
}

/// Writes the manifest plus one Radiance file per cube face and the BRDF
/// table (`A` in red, `B` in green).
pub fn save_ibl(set: &IblSet, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        format: FORMAT.into(),
        version: 1,
        settings: set.settings,
        sanitized_texels: set.sanitized_texels,
        face_order: FACE_SUFFIX.iter().map(|s| s.to_string()).collect(),
        environment: face_names("environment"),
        irradiance: face_names("irradiance"),
        specular: (0..set.specular.mip_count()).map(|m| face_names(&format!("specular_m{m}"))).collect(),
        brdf_lut: "brdf_lut.hdr".into(),
    };
    save_level(dir, &set.environment.levels[0], &manifest.environment)?;
    save_level(dir, &set.irradiance, &manifest.irradiance)?;
    for (level, names) in set.specular.levels.iter().zip(&manifest.specular) {
        save_level(dir, level, names)?;
    }
    let lut =
        HdrImage { width: set.lut.size, height: set.lut.size, pixels: set.lut.values.iter().map(|[a, b]| Rgb::new(*a, *b, 0.0)).collect() };
    write_hdr(&lut, &dir.join(&manifest.brdf_lut))?;
    let path = dir.join(IBL_MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&path, json.as_bytes())?;
    Ok(path)
}

/// Loads a set written by [`save_ibl`]; `path` is the directory or its
/// manifest.
pub fn load_ibl(path: &Path) -> Result<IblSet> {
    let (dir, manifest_path) = if path.is_dir() {
        (path.to_path_buf(), path.join(IBL_MANIFEST))
    } else {
        (path.parent().unwrap_or(Path::new(".")).to_path_buf(), path.to_path_buf())
    };
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(&manifest_path, e.to_string()))?;
    if m.format != FORMAT || m.version != 1 {
        return Err(Error::parse(&manifest_path, format!("unsupported IBL manifest {} v{}", m.format, m.version)));
    }
    let environment = EnvCubemap::with_box_chain(load_level(&dir, &m.environment)?);
    let irradiance = load_level(&dir, &m.irradiance)?;
    let specular = EnvCubemap { levels: m.specular.iter().map(|names| load_level(&dir, names)).collect::<Result<_>>()? };
    if specular.levels.is_empty() {
        return Err(Error::parse(&manifest_path, "specular chain is empty"));
    }
    let lut_img = load_hdr(&dir.join(&m.brdf_lut))?;
    if lut_img.width != lut_img.height {
        return Err(Error::parse(dir.join(&m.brdf_lut), "BRDF table must be square"));
    }
    let lut = BrdfLut { size: lut_img.width, values: lut_img.pixels.iter().map(|p| [p.x, p.y]).collect() };
    Ok(IblSet { environment, irradiance, specular, lut, settings: m.settings, sanitized_texels: m.sanitized_texels })
}
