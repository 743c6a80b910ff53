//! Frame orchestration. Pass order: shadow maps (stale lights only),
//! G-Buffer, SSAO and EDL, compose, bloom, line overlay, tone map + gamma.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::effects::{bilateral_blur, bloom, edl, half_res_depth, ssao};
use crate::error::{Error, Result};
use crate::gbuffer::{GBuffer, Precision};
use crate::geom::{apply_transform, world_pose, Mesh};
use crate::image::{HdrImage, LdrImage, ScalarImage};
use crate::math::Pose;
use crate::post::to_ldr;
use crate::raster::{rasterize_lines, rasterize_mesh, rasterize_points, rasterize_surfels, render_depth_only, DepthMap};
use crate::scene::{interpolate_pose, select_render_mode, wants_lines, Camera, PointLight, RenderMode, Scene};
use crate::shade::{compose, light_camera, ComposeInputs};

/// Work done so far; shadow counts let callers observe cache hits.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PassCounters {
    pub frames: u64,
    pub shadow_maps_rendered: u64,
    pub shadow_maps_reused: u64,
    pub gbuffer_passes: u64,
    pub ssao_passes: u64,
    pub edl_passes: u64,
    pub bloom_passes: u64,
    pub line_passes: u64,
    /// Wall-clock milliseconds of the most recent frame, by pass.
    pub last_frame_ms: PassTimings,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PassTimings {
    pub shadows: f64,
    pub gbuffer: f64,
    pub effects: f64,
    pub compose: f64,
    pub post: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
struct ShadowEntry {
    key: u64,
    map: Arc<DepthMap>,
}

/// State carried between frames. Shadow maps are reused while neither the
/// light nor the shadow-casting geometry changes.
#[derive(Clone, Debug, Default)]
pub struct FrameCaches {
    shadows: Vec<Option<ShadowEntry>>,
    pub counters: PassCounters,
}

impl FrameCaches {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Everything a frame produces.
#[derive(Clone, Debug)]
pub struct Frame {
    pub hdr: HdrImage,
    pub ldr: LdrImage,
    pub gbuffer: GBuffer,
    /// Blurred half-resolution ambient occlusion, when SSAO ran.
    pub ao: Option<ScalarImage>,
}

fn hash_f64(h: &mut DefaultHasher, x: f64) {
    x.to_bits().hash(h);
}

fn hash_pose(h: &mut DefaultHasher, p: &Pose) {
    for x in p.rotation.to_array() {
        hash_f64(h, x);
    }
    for x in p.translation.to_array() {
        hash_f64(h, x);
    }
    hash_f64(h, p.scale);
}

/// Content key of everything that can change a shadow map except the light.
fn caster_key(objects: &[Mesh]) -> u64 {
    let mut h = DefaultHasher::new();
    for (k, m) in objects.iter().enumerate() {
        k.hash(&mut h);
        m.name.hash(&mut h);
        (m.visible, m.casts_shadow, m.render_mode, &m.parent).hash(&mut h);
        hash_pose(&mut h, &m.local_pose);
        for p in &m.v {
            for x in p.to_array() {
                hash_f64(&mut h, x);
            }
        }
        m.f.hash(&mut h);
        for t in &m.t {
            for x in t.to_array() {
                hash_f64(&mut h, x);
            }
        }
        for b in &m.b {
            hash_f64(&mut h, *b);
        }
        for n in &m.n {
            for x in n.to_array() {
                hash_f64(&mut h, x);
            }
        }
    }
    h.finish()
}

fn light_key(base: u64, light: &PointLight) -> u64 {
    let mut h = DefaultHasher::new();
    base.hash(&mut h);
    for x in light.position.to_array() {
        hash_f64(&mut h, x);
    }
    h.finish()
}

fn mode_of(mesh: &Mesh) -> RenderMode {
    mesh.render_mode.unwrap_or_else(|| select_render_mode(mesh))
}

/// Objects transformed into world space, in scene order.
pub fn world_objects(objects: &[Mesh]) -> Result<Vec<Mesh>> {
    (0..objects.len()).map(|k| apply_transform(&objects[k], &world_pose(objects, k)?)).collect()
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Renders one frame of `scene`, reusing and refreshing `caches`.
pub fn render_frame(scene: &Scene, caches: &mut FrameCaches) -> Result<Frame> {
    let start = Instant::now();
    let cam = &scene.camera;
    let (center, radius) = scene.bounds()?;
    let scale = if radius > 0.0 { radius } else { 1.0 };
    let world = world_objects(&scene.objects).map_err(|e| e.in_pass("transform"))?;
    let fx = &scene.effects;
    let mut timings = PassTimings::default();

    // Shadow maps.
    let t = Instant::now();
    caches.shadows.resize(scene.lights.len(), None);
    let base = caster_key(&scene.objects);
    let mut shadow_maps: Vec<Option<Arc<DepthMap>>> = vec![None; scene.lights.len()];
    if fx.shadows_enabled {
        for (k, light) in scene.lights.iter().enumerate() {
            if !light.casts_shadow {
                continue;
            }
            let key = light_key(base, light);
            let map = match &caches.shadows[k] {
                Some(e) if e.key == key => {
                    caches.counters.shadow_maps_reused += 1;
                    e.map.clone()
                }
                _ => {
                    let casters = world.iter().filter(|m| m.visible && mode_of(m) != RenderMode::Lines);
                    let map = Arc::new(render_depth_only(casters, &light_camera(light, center, radius)));
                    caches.counters.shadow_maps_rendered += 1;
                    caches.shadows[k] = Some(ShadowEntry { key, map: map.clone() });
                    map
                }
            };
            shadow_maps[k] = Some(map);
        }
    }
    timings.shadows = ms(t);

    // G-Buffer.
    let t = Instant::now();
    let mut gbuffer = GBuffer::for_camera(cam, Precision::Byte8);
    let mut surfels: Option<GBuffer> = None;
    let mut any_points = false;
    for m in world.iter().filter(|m| m.visible) {
        match mode_of(m) {
            RenderMode::MeshPbr => rasterize_mesh(m, cam, &mut gbuffer).map_err(|e| e.in_pass("gbuffer"))?,
            RenderMode::PointCloudEdl => {
                any_points = true;
                rasterize_points(m, cam, &mut gbuffer).map_err(|e| e.in_pass("gbuffer"))?
            }
            RenderMode::Surfel => {
                let g = surfels.get_or_insert_with(|| GBuffer::for_camera(cam, Precision::Half16));
                rasterize_surfels(m, cam, g, scale).map_err(|e| e.in_pass("gbuffer"))?
            }
            RenderMode::Lines => {}
        }
    }
    if let Some(mut s) = surfels {
        s.normalize_accumulated()?;
        gbuffer.merge_nearest(&s)?;
    }
    caches.counters.gbuffer_passes += 1;
    timings.gbuffer = ms(t);

    // Screen-space effects.
    let t = Instant::now();
    let ao = match fx.ssao_radius {
        Some(r) if fx.ssao_enabled && r > 0.0 => {
            caches.counters.ssao_passes += 1;
            let raw = ssao(&gbuffer, cam, r, fx.ssao_samples, fx.seed);
            Some(bilateral_blur(&raw, &half_res_depth(&gbuffer), scale))
        }
        _ => None,
    };
    let edl_map = if any_points && fx.edl_strength > 0.0 {
        caches.counters.edl_passes += 1;
        Some(edl(&gbuffer.depth_image(), fx.edl_strength))
    } else {
        None
    };
    timings.effects = ms(t);

    // Compose.
    let t = Instant::now();
    let shadow_refs: Vec<Option<&DepthMap>> = shadow_maps.iter().map(|m| m.as_deref()).collect();
    let inputs = ComposeInputs {
        gbuffer: &gbuffer,
        camera: cam,
        lights: &scene.lights,
        shadows: &shadow_refs,
        ibl: scene.environment.as_deref(),
        ao: ao.as_ref(),
        edl: edl_map.as_ref(),
        effects: fx,
        scene_scale: scale,
    };
    let mut hdr = compose(&inputs).map_err(|e| e.in_pass("compose"))?;
    timings.compose = ms(t);

    // Bloom, lines, post.
    let t = Instant::now();
    if fx.bloom_enabled {
        caches.counters.bloom_passes += 1;
        let layer = bloom(&hdr, fx.bloom_threshold, fx.bloom_levels);
        for (p, b) in hdr.pixels.iter_mut().zip(&layer.pixels) {
            *p += *b;
        }
    }
    let depth = gbuffer.depths();
    for m in world.iter().filter(|m| m.visible && (wants_lines(m) || mode_of(m) == RenderMode::Lines)) {
        rasterize_lines(m, cam, &mut hdr, depth, fx.line_color).map_err(|e| e.in_pass("lines"))?;
        caches.counters.line_passes += 1;
    }
    let ldr = to_ldr(&hdr, fx.tonemap, fx.gamma);
    timings.post = ms(t);

    timings.total = ms(start);
    caches.counters.frames += 1;
    caches.counters.last_frame_ms = timings;
    Ok(Frame { hdr, ldr, gbuffer, ao })
}

/// Camera poses of a trajectory sampled at `t = i / fps` seconds. Segment
/// `k` runs from `key_poses[k]` to `key_poses[k + 1]` over `durations[k]`.
/// The sequence is left-closed: the final key pose is not emitted.
pub fn trajectory_poses(key_poses: &[Pose], durations: &[f64], fps: f64) -> Result<Vec<Pose>> {
    if key_poses.len() < 2 {
        return Err(Error::InvalidArgument("a trajectory needs at least two key poses".into()));
    }
    if durations.len() != key_poses.len() - 1 {
        return Err(Error::InvalidArgument(format!(
            "{} key poses need {} durations, got {}",
            key_poses.len(),
            key_poses.len() - 1,
            durations.len()
        )));
    }
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::InvalidArgument("fps must be positive".into()));
    }
    if durations.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidArgument("durations must be positive".into()));
    }
    for p in key_poses {
        p.validate()?;
    }
    let total: f64 = durations.iter().sum();
    let frames = (total * fps).round() as usize;
    let mut out = Vec::with_capacity(frames);
    let mut segment = 0;
    let mut seg_start = 0.0;
    for i in 0..frames {
        let time = i as f64 / fps;
        while segment + 1 < durations.len() && time >= seg_start + durations[segment] {
            seg_start += durations[segment];
            segment += 1;
        }
        let t = ((time - seg_start) / durations[segment]).clamp(0.0, 1.0);
        out.push(interpolate_pose(&key_poses[segment], &key_poses[segment + 1], t));
    }
    Ok(out)
}

/// Renders every trajectory frame, handing each to `sink` in order.
pub fn render_trajectory(
    scene: &Scene,
    key_poses: &[Pose],
    durations: &[f64],
    fps: f64,
    caches: &mut FrameCaches,
    mut sink: impl FnMut(usize, &Frame) -> Result<()>,
) -> Result<usize> {
    let poses = trajectory_poses(key_poses, durations, fps)?;
    let mut shot = scene.clone();
    for (i, pose) in poses.iter().enumerate() {
        shot.camera = Camera { pose: *pose, ..scene.camera };
        let frame = render_frame(&shot, caches)?;
        sink(i, &frame)?;
    }
    Ok(poses.len())
}
