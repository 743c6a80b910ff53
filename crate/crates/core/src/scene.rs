//! Camera, lights, effect settings, and the automatic parameter inference
//! that lets an unconfigured scene render sensibly at any unit scale.

use std::f64::consts::PI;
use std::sync::Arc;

use glam::{DQuat, DVec3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Mesh};
use crate::ibl::IblSet;
use crate::math::{Pose, Rgb};

/// Irradiance the key light delivers at the scene center.
pub const TARGET_IRRADIANCE: f64 = 5.0;
/// Light distance from the scene center, in bounding radii.
pub const LIGHT_DISTANCE_RADII: f64 = 3.0;
pub const DEFAULT_FOV: f64 = 50.0 * PI / 180.0;
pub const FRAMING_MARGIN: f64 = 1.1;
/// Default viewing elevation of the auto camera above the horizon.
pub const AUTO_CAMERA_ELEVATION: f64 = 15.0 * PI / 180.0;
pub const SSAO_RADIUS_FRACTION: f64 = 0.05;
pub const MAX_BLOOM_LEVELS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    MeshPbr,
    PointCloudEdl,
    Surfel,
    Lines,
}

/// Picks how an object is drawn from which of its matrices are populated.
pub fn select_render_mode(mesh: &Mesh) -> RenderMode {
    if !mesh.f.is_empty() {
        RenderMode::MeshPbr
    } else if mesh.has_normals() && mesh.has_tangents() {
        RenderMode::Surfel
    } else {
        RenderMode::PointCloudEdl
    }
}

/// Whether the object also gets the forward line overlay.
pub fn wants_lines(mesh: &Mesh) -> bool {
    !mesh.e.is_empty()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    /// World-from-camera; the camera looks down its local -z axis with +y up.
    pub pose: Pose,
    pub vertical_fov: f64,
    pub near: f64,
    pub far: f64,
    pub width: usize,
    pub height: usize,
}

/// A point projected into a camera's pixel grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projected {
    pub x: f64,
    pub y: f64,
    /// Linear view-space depth (positive in front of the camera).
    pub depth: f64,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        self.pose.validate()?;
        if !(self.near > 0.0 && self.far > self.near && self.far.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "camera planes must satisfy 0 < near < far (near {}, far {})",
                self.near, self.far
            )));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < PI) {
            return Err(Error::InvalidArgument(format!("camera fov {} outside (0, pi)", self.vertical_fov)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("camera viewport must be at least 1x1".into()));
        }
        Ok(())
    }

    pub fn aspect(&self) -> f64 {
        self.width as f64 / self.height as f64
    }

    pub fn tan_half_fov(&self) -> f64 {
        (self.vertical_fov * 0.5).tan()
    }

    pub fn horizontal_fov(&self) -> f64 {
        2.0 * (self.tan_half_fov() * self.aspect()).atan()
    }

    pub fn position(&self) -> DVec3 {
        self.pose.translation
    }

    pub fn forward(&self) -> DVec3 {
        self.pose.transform_direction(-DVec3::Z)
    }

    /// Rigid inverse of the camera pose (camera poses carry unit scale).
    pub fn view_from_world(&self) -> Pose {
        Pose { scale: 1.0, ..self.pose }.inverse()
    }

    /// Projects a view-space point; `None` behind the camera.
    #[inline]
    pub fn project_view(&self, p: DVec3) -> Option<Projected> {
        let depth = -p.z;
        if depth <= 0.0 {
            return None;
        }
        let th = self.tan_half_fov();
        let ndc_x = p.x / (depth * th * self.aspect());
        let ndc_y = p.y / (depth * th);
        Some(Projected { x: (ndc_x + 1.0) * 0.5 * self.width as f64, y: (1.0 - ndc_y) * 0.5 * self.height as f64, depth })
    }

    pub fn project(&self, world: DVec3) -> Option<Projected> {
        self.project_view(self.view_from_world().transform_point(world))
    }

    /// View-space ray through a continuous pixel position with `z = -1`.
    #[inline]
    pub fn view_ray(&self, x: f64, y: f64) -> DVec3 {
        let th = self.tan_half_fov();
        let ndc_x = 2.0 * x / self.width as f64 - 1.0;
        let ndc_y = 1.0 - 2.0 * y / self.height as f64;
        DVec3::new(ndc_x * th * self.aspect(), ndc_y * th, -1.0)
    }

    /// World-space unit direction through the center of pixel `(i, j)`.
    pub fn pixel_direction(&self, i: usize, j: usize) -> DVec3 {
        self.pose.transform_direction(self.view_ray(i as f64 + 0.5, j as f64 + 0.5)).normalize()
    }

    /// Orbits around `center`: yaw about world up, pitch about the camera's
    /// right axis, then dolly scales the distance by `exp(dolly)`.
    pub fn orbit(&self, center: DVec3, yaw: f64, pitch: f64, dolly: f64) -> Camera {
        if yaw == 0.0 && pitch == 0.0 && dolly == 0.0 {
            return *self;
        }
        let offset = self.position() - center;
        let right = self.pose.transform_direction(DVec3::X);
        let rot = DQuat::from_axis_angle(DVec3::Y, yaw) * DQuat::from_axis_angle(right, pitch);
        let new_offset = rot * offset * dolly.exp();
        let rotation = (rot * self.pose.rotation).normalize();
        let scale_ratio = dolly.exp();
        Camera {
            pose: Pose { rotation, translation: center + new_offset, scale: 1.0 },
            near: self.near * scale_ratio,
            far: self.far * scale_ratio,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightRole {
    Key,
    Fill,
    Rim,
    #[default]
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointLight {
    pub position: DVec3,
    #[serde(default = "white")]
    pub color: Rgb,
    /// Radiant intensity; irradiance at distance `d` is `intensity / d²`.
    pub intensity: f64,
    #[serde(default = "yes")]
    pub casts_shadow: bool,
    #[serde(default)]
    pub role: LightRole,
}

fn white() -> Rgb {
    Rgb::ONE
}

fn yes() -> bool {
    true
}

impl PointLight {
    pub fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) || !self.position.is_finite() {
            return Err(Error::InvalidArgument("light intensity must be finite and >= 0".into()));
        }
        if !(self.color.min_element() >= 0.0 && self.color.is_finite()) {
            return Err(Error::InvalidArgument("light color must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn irradiance_at(&self, p: DVec3) -> f64 {
        self.intensity / self.position.distance_squared(p)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToneMapper {
    #[default]
    Aces,
    Reinhard,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    #[default]
    EnvMap,
    SolidColor(Rgb),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectSettings {
    pub ssao_enabled: bool,
    /// World units. `None` until inferred from the scene scale.
    pub ssao_radius: Option<f64>,
    pub ssao_samples: usize,
    pub bloom_enabled: bool,
    pub bloom_threshold: f64,
    pub bloom_levels: usize,
    pub edl_strength: f64,
    pub shadows_enabled: bool,
    pub multiscatter: bool,
    pub tonemap: ToneMapper,
    pub gamma: f64,
    pub background: Background,
    pub line_color: Rgb,
    pub seed: u64,
}

impl Default for EffectSettings {
    fn default() -> Self {
        Self {
            ssao_enabled: true,
            ssao_radius: None,
            ssao_samples: 16,
            bloom_enabled: true,
            bloom_threshold: 1.0,
            bloom_levels: MAX_BLOOM_LEVELS,
            edl_strength: 1.0,
            shadows_enabled: true,
            multiscatter: true,
            tonemap: ToneMapper::Aces,
            gamma: 2.2,
            background: Background::EnvMap,
            line_color: Rgb::new(0.02, 0.02, 0.02),
            seed: 0,
        }
    }
}

impl EffectSettings {
    /// Everything off: compose output goes straight to tone mapping.
    pub fn disabled() -> Self {
        Self { ssao_enabled: false, bloom_enabled: false, edl_strength: 0.0, shadows_enabled: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_BLOOM_LEVELS).contains(&self.bloom_levels) {
            return Err(Error::InvalidArgument(format!("bloom_levels must be in [1, {MAX_BLOOM_LEVELS}]")));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument("gamma must be positive".into()));
        }
        if !(self.edl_strength >= 0.0) {
            return Err(Error::InvalidArgument("edl_strength must be >= 0".into()));
        }
        if self.ssao_radius.is_some_and(|r| !(r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument("ssao_radius must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Camera looking at the bounding sphere from a distance that fits it in
/// the narrower of the two field-of-view angles.
pub fn auto_frame_camera(center: DVec3, radius: f64, width: usize, height: usize) -> Result<Camera> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument("viewport must be at least 1x1".into()));
    }
    let radius = effective_radius(radius);
    let aspect = width as f64 / height as f64;
    let horizontal = 2.0 * ((DEFAULT_FOV * 0.5).tan() * aspect).atan();
    let fit_fov = DEFAULT_FOV.min(horizontal);
    let distance = camera_distance(radius, fit_fov);
    let dir = DVec3::new(0.0, AUTO_CAMERA_ELEVATION.sin(), AUTO_CAMERA_ELEVATION.cos());
    Ok(Camera {
        pose: Pose::looking_at(center + dir * distance, center, DVec3::Y),
        vertical_fov: DEFAULT_FOV,
        near: (distance - 2.5 * radius).max(radius / 100.0),
        far: distance + 2.5 * radius,
        width,
        height,
    })
}

/// Distance at which a sphere of `radius` fills `fov` with the framing margin.
pub fn camera_distance(radius: f64, fov: f64) -> f64 {
    radius / (fov * 0.5).sin() * FRAMING_MARGIN
}

/// Degenerate (single point) scenes fall back to unit scale for framing.
fn effective_radius(radius: f64) -> f64 {
    if radius > 0.0 {
        radius
    } else {
        1.0
    }
}

/// Distance at which a light of `intensity` delivers `target` irradiance.
pub fn light_distance(intensity: f64, target: f64) -> f64 {
    (intensity / target).sqrt()
}

/// Key, fill and rim lights placed around the camera-to-center axis.
pub fn auto_setup_lights(center: DVec3, radius: f64, camera: &Camera) -> Result<[PointLight; 3]> {
    let radius = effective_radius(radius);
    let distance = LIGHT_DISTANCE_RADII * radius;
    let key_intensity = TARGET_IRRADIANCE * distance * distance;
    debug_assert!((light_distance(key_intensity, TARGET_IRRADIANCE) - distance).abs() <= 1e-9 * distance);

    let toward_camera = (camera.position() - center).try_normalize().unwrap_or(DVec3::Z);
    let mut up = DVec3::Y - toward_camera * toward_camera.dot(DVec3::Y);
    if up.length_squared() < 1e-12 {
        up = camera.pose.transform_direction(DVec3::Y);
    }
    let up = up.normalize();
    let right = up.cross(toward_camera).normalize();

    let place = |azimuth_deg: f64, elevation_deg: f64| {
        let (a, e) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        let planar = toward_camera * a.cos() + right * a.sin();
        center + (planar * e.cos() + up * e.sin()) * distance
    };
    let light =
        |role, position, ratio: f64| PointLight { position, color: Rgb::ONE, intensity: key_intensity * ratio, casts_shadow: true, role };
    Ok([
        light(LightRole::Key, place(45.0, 45.0), 1.0),
        light(LightRole::Fill, place(-45.0, 0.0), 0.4),
        light(LightRole::Rim, place(180.0, 60.0), 0.8),
    ])
}

pub fn auto_ssao_radius(scene_scale: f64) -> f64 {
    SSAO_RADIUS_FRACTION * scene_scale
}

/// Lerps translation and scale, slerps rotation along the shorter arc.
pub fn interpolate_pose(p0: &Pose, p1: &Pose, t: f64) -> Pose {
    let t = if (0.0..=1.0).contains(&t) {
        t
    } else {
        log::warn!("interpolation parameter {t} clamped to [0, 1]");
        t.clamp(0.0, 1.0)
    };
    if t == 0.0 || p0 == p1 {
        return *p0;
    }
    if t == 1.0 {
        return *p1;
    }
    Pose {
        rotation: p0.rotation.slerp(p1.rotation, t).normalize(),
        translation: p0.translation.lerp(p1.translation, t),
        scale: p0.scale + (p1.scale - p0.scale) * t,
    }
}

/// Which values were inferred rather than supplied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoFlags {
    pub camera: bool,
    pub lights: bool,
    pub ssao_radius: bool,
}

/// User-facing scene description before automatic parameters are resolved.
#[derive(Clone, Debug, Default)]
pub struct SceneSetup {
    pub objects: Vec<Mesh>,
    pub camera: Option<Camera>,
    pub lights: Option<Vec<PointLight>>,
    pub environment: Option<Arc<IblSet>>,
    pub effects: EffectSettings,
    pub width: usize,
    pub height: usize,
}

/// A fully resolved scene ready to render.
#[derive(Clone, Debug)]
pub struct Scene {
    pub objects: Vec<Mesh>,
    pub lights: Vec<PointLight>,
    pub camera: Camera,
    pub environment: Option<Arc<IblSet>>,
    pub effects: EffectSettings,
    pub auto: AutoFlags,
}

impl SceneSetup {
    pub fn new(objects: Vec<Mesh>, width: usize, height: usize) -> Self {
        Self { objects, width, height, ..Default::default() }
    }

    /// Resolves every unset parameter from the scene bounds. User values
    /// always take precedence.
    pub fn finalize(self) -> Result<Scene> {
        for m in &self.objects {
            m.validate()?;
        }
        self.effects.validate()?;
        let (center, radius) = world_bounds(&self.objects)?;
        let mut auto = AutoFlags::default();

        let camera = match self.camera {
            Some(c) => c,
            None => {
                auto.camera = true;
                auto_frame_camera(center, radius, self.width, self.height)?
            }
        };
        camera.validate()?;

        let lights = match self.lights {
            Some(l) => l,
            None => {
                auto.lights = true;
                auto_setup_lights(center, radius, &camera)?.to_vec()
            }
        };
        for l in &lights {
            l.validate()?;
        }

        let mut effects = self.effects;
        if effects.ssao_radius.is_none() {
            auto.ssao_radius = true;
            let r = auto_ssao_radius(radius);
            effects.ssao_radius = Some(r);
            if r == 0.0 {
                effects.ssao_enabled = false;
            }
        }
        Ok(Scene { objects: self.objects, lights, camera, environment: self.environment, effects, auto })
    }
}

impl Scene {
    /// Bounding sphere of all visible objects in world space.
    pub fn bounds(&self) -> Result<(DVec3, f64)> {
        world_bounds(&self.objects)
    }

    /// Radius of the bounding sphere, the unit for every scale-relative constant.
    pub fn scale(&self) -> Result<f64> {
        Ok(self.bounds()?.1)
    }
}

/// World-space bounding sphere of the visible objects.
pub fn world_bounds(objects: &[Mesh]) -> Result<(DVec3, f64)> {
    let mut points = Vec::new();
    for (i, m) in objects.iter().enumerate() {
        if !m.visible {
            continue;
        }
        let pose = geom::world_pose(objects, i)?;
        points.extend(m.v.iter().map(|p| pose.transform_point(*p)));
    }
    geom::bounding_sphere(points.iter().copied())
}
