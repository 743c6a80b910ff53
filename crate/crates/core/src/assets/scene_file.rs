//! JSON scene description. Unknown keys are reported as warnings with their
//! JSON pointer; type errors fail with the pointer of the offending value.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use glam::DVec3;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geom::{Mesh, VisualizationMode};
use crate::ibl::{BakeSettings, IblSet};
use crate::math::{Pose, Rgb};
use crate::scene::{Camera, EffectSettings, PointLight, RenderMode, Scene, SceneSetup, DEFAULT_FOV};

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    pub width: usize,
    pub height: usize,
    pub path: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { width: 640, height: 480, path: PathBuf::from("out.png") }
    }
}

#[derive(Deserialize)]
struct SceneDoc {
    environment: Option<PathBuf>,
    objects: Vec<ObjectDoc>,
    camera: Option<CameraDoc>,
    lights: Option<Vec<PointLight>>,
    #[serde(default)]
    effects: EffectSettings,
    #[serde(default)]
    output: OutputSpec,
}

#[derive(Deserialize)]
struct ObjectDoc {
    name: Option<String>,
    mesh: PathBuf,
    #[serde(default)]
    pose: Pose,
    parent: Option<String>,
    #[serde(default)]
    material: MaterialDoc,
    render_mode: Option<RenderMode>,
    #[serde(default = "yes")]
    visible: bool,
    #[serde(default = "yes")]
    casts_shadow: bool,
    /// Adds the triangle edges as a line overlay.
    #[serde(default)]
    wireframe: bool,
}

fn yes() -> bool {
    true
}

#[derive(Default, Deserialize)]
struct MaterialDoc {
    albedo: Option<Rgb>,
    metalness: Option<f64>,
    roughness: Option<f64>,
    mode: Option<VisualizationMode>,
}

#[derive(Deserialize)]
struct CameraDoc {
    pose: Option<Pose>,
    position: Option<DVec3>,
    target: Option<DVec3>,
    #[serde(default = "up")]
    up: DVec3,
    #[serde(default = "default_fov_deg")]
    fov_deg: f64,
    near: Option<f64>,
    far: Option<f64>,
}

fn up() -> DVec3 {
    DVec3::Y
}

fn default_fov_deg() -> f64 {
    DEFAULT_FOV.to_degrees()
}

/// A parsed scene file: a setup whose automatic parameters are not yet
/// resolved, so resolution and seed can still be overridden.
#[derive(Clone, Debug)]
pub struct LoadedScene {
    pub setup: SceneSetup,
    pub output: OutputSpec,
    pub warnings: Vec<String>,
}

impl LoadedScene {
    /// Sets the output size, keeping an explicit camera's pose and fov.
    pub fn set_resolution(&mut self, width: usize, height: usize) {
        self.output.width = width;
        self.output.height = height;
        self.setup.width = width;
        self.setup.height = height;
        if let Some(c) = &mut self.setup.camera {
            c.width = width;
            c.height = height;
        }
    }

    pub fn finalize(self) -> Result<Scene> {
        self.setup.finalize()
    }
}

pub fn parse_scene(path: &Path) -> Result<LoadedScene> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, format!("line {} column {}: {e}", e.line(), e.column())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scene_value(value, base)
}

/// Parses an already decoded document; relative paths resolve against `base`.
pub fn parse_scene_value(value: Value, base: &Path) -> Result<LoadedScene> {
    let mut warnings = Vec::new();
    let doc: SceneDoc = {
        let mut on_ignored = |p: serde_ignored::Path| warnings.push(format!("unknown key `{}` ignored", pointer_of_ignored(&p)));
        let de = serde_ignored::Deserializer::new(value, &mut on_ignored);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Schema { pointer: pointer_of(e.path()), message: e.inner().to_string() })?
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    doc.effects.validate().map_err(|e| schema("/effects", e))?;
    if doc.output.width == 0 || doc.output.height == 0 {
        return Err(Error::Schema { pointer: "/output".into(), message: "width and height must be positive".into() });
    }

    let mut objects = Vec::with_capacity(doc.objects.len());
    for (k, o) in doc.objects.iter().enumerate() {
        let path = resolve(base, &o.mesh);
        let mut mesh = crate::assets::load_mesh(&path)?;
        if let Some(name) = &o.name {
            mesh.name = name.clone();
        }
        mesh.local_pose = o.pose;
        mesh.parent = o.parent.clone();
        mesh.visible = o.visible;
        mesh.casts_shadow = o.casts_shadow;
        mesh.render_mode = o.render_mode;
        let m = &mut mesh.material;
        if let Some(a) = o.material.albedo {
            m.albedo = a;
        }
        if let Some(x) = o.material.metalness {
            m.metalness = x;
        }
        if let Some(x) = o.material.roughness {
            m.roughness = x;
        }
        if let Some(mode) = o.material.mode {
            m.mode = mode;
        }
        *m = m.clone().sanitized();
        if o.wireframe {
            let mut e = mesh.edges_from_faces();
            e.extend_from_slice(&mesh.e);
            e.sort_unstable();
            e.dedup();
            mesh.e = e;
        }
        if !mesh.f.is_empty() && mesh.n.is_empty() {
            mesh.compute_normals();
        }
        mesh.validate().map_err(|e| schema(&format!("/objects/{k}"), e))?;
        objects.push(mesh);
    }
    if objects.is_empty() {
        return Err(Error::Schema { pointer: "/objects".into(), message: "at least one object is required".into() });
    }

    let (w, h) = (doc.output.width, doc.output.height);
    let camera = match &doc.camera {
        None => None,
        Some(c) => Some(explicit_camera(c, &objects, w, h)?),
    };
    let environment = match &doc.environment {
        None => None,
        Some(p) => Some(Arc::new(load_environment(&resolve(base, p))?)),
    };
    let mut output = doc.output;
    output.path = resolve(base, &output.path);
    let setup = SceneSetup { objects, camera, lights: doc.lights, environment, effects: doc.effects, width: w, height: h };
    Ok(LoadedScene { setup, output, warnings })
}

/// A `.hdr` panorama is baked with preview settings; a directory or
/// manifest is loaded as a baked set.
pub fn load_environment(path: &Path) -> Result<IblSet> {
    let is_hdr = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("hdr"));
    if is_hdr {
        IblSet::bake(&crate::assets::load_hdr(path)?, &BakeSettings::preview())
    } else {
        crate::assets::load_ibl(path)
    }
}

fn explicit_camera(c: &CameraDoc, objects: &[Mesh], width: usize, height: usize) -> Result<Camera> {
    let pose = match (c.pose, c.position, c.target) {
        (Some(p), None, None) => p,
        (None, Some(eye), Some(target)) => {
            if (target - eye).length_squared() == 0.0 {
                return Err(Error::Schema { pointer: "/camera/target".into(), message: "target equals position".into() });
            }
            Pose::looking_at(eye, target, c.up)
        }
        _ => return Err(Error::Schema { pointer: "/camera".into(), message: "give either `pose` or both `position` and `target`".into() }),
    };
    let (center, radius) = crate::scene::world_bounds(objects)?;
    let r = if radius > 0.0 { radius } else { 1.0 };
    let dist = (pose.translation - center).length();
    let camera = Camera {
        pose,
        vertical_fov: c.fov_deg.to_radians(),
        near: c.near.unwrap_or_else(|| (dist - 2.5 * r).max(r / 100.0)),
        far: c.far.unwrap_or(dist + 2.5 * r),
        width,
        height,
    };
    camera.validate().map_err(|e| schema("/camera", e))?;
    Ok(camera)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn schema(pointer: &str, e: Error) -> Error {
    Error::Schema { pointer: pointer.into(), message: e.to_string() }
}

fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out += &format!("/{index}"),
            Segment::Map { key } => out += &format!("/{}", escape(key)),
            Segment::Enum { variant } => out += &format!("/{}", escape(variant)),
            Segment::Unknown => {}
        }
    }
    if out.is_empty() {
        "/".into()
    } else {
        out
    }
}

fn pointer_of_ignored(path: &serde_ignored::Path) -> String {
    use serde_ignored::Path as P;
    match path {
        P::Root => String::new(),
        P::Seq { parent, index } => format!("{}/{index}", pointer_of_ignored(parent)),
        P::Map { parent, key } => format!("{}/{}", pointer_of_ignored(parent), escape(key)),
        P::Some { parent } | P::NewtypeStruct { parent } | P::NewtypeVariant { parent } => pointer_of_ignored(parent),
    }
}
