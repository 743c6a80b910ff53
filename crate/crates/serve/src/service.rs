//! Live scene state, the edit log, and the render worker.
//!
//! Every accepted edit bumps `version`. The worker renders the newest version
//! it sees, so a burst of edits coalesces into one frame, and a frame with
//! sequence number `s` reflects every edit acknowledged with version `<= s`.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;

use glam::DVec3;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tokio::sync::watch;

use pbrview_core::assets::{encode_png, parse_scene_value, write_atomic};
use pbrview_core::math::{Pose, Rgb};
use pbrview_core::pipeline::{render_frame, render_trajectory, FrameCaches, PassCounters};
use pbrview_core::scene::{select_render_mode, AutoFlags, Camera, EffectSettings, PointLight, RenderMode, Scene};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

pub type ServiceResult<T> = Result<T, ServiceError>;

fn bad(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::BadRequest(e.to_string())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One published frame. `seq` is the edit version it reflects.
#[derive(Debug)]
pub struct FrameMsg {
    pub seq: u64,
    pub outcome: Result<EncodedFrame, String>,
}

#[derive(Debug)]
pub struct EncodedFrame {
    pub png: Arc<Vec<u8>>,
    pub digest: String,
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Relative paths in posted scenes resolve against this directory.
    pub scene_root: PathBuf,
    /// Recordings are written to numbered subdirectories of this directory.
    pub record_root: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { scene_root: PathBuf::from("."), record_root: std::env::temp_dir().join("pbrview-records") }
    }
}

/// Editable slice of the scene, addressed by `PATCH /param` pointers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub camera: Camera,
    pub lights: Vec<PointLight>,
    pub effects: EffectSettings,
    pub objects: Vec<ObjectParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectParams {
    pub name: String,
    pub pose: Pose,
    pub visible: bool,
    pub casts_shadow: bool,
    pub albedo: Rgb,
    pub metalness: f64,
    pub roughness: f64,
}

impl Params {
    fn of(scene: &Scene) -> Self {
        Params {
            camera: scene.camera,
            lights: scene.lights.clone(),
            effects: scene.effects.clone(),
            objects: scene
                .objects
                .iter()
                .map(|m| ObjectParams {
                    name: m.name.clone(),
                    pose: m.local_pose,
                    visible: m.visible,
                    casts_shadow: m.casts_shadow,
                    albedo: m.material.albedo,
                    metalness: m.material.metalness,
                    roughness: m.material.roughness,
                })
                .collect(),
        }
    }

    fn validate(&self, scene: &Scene) -> ServiceResult<()> {
        self.camera.validate().map_err(bad)?;
        self.effects.validate().map_err(bad)?;
        for l in &self.lights {
            l.validate().map_err(bad)?;
        }
        if self.objects.len() != scene.objects.len() {
            return Err(bad("objects cannot be added or removed through /param"));
        }
        for (o, m) in self.objects.iter().zip(&scene.objects) {
            if o.name != m.name {
                return Err(bad("object names are read-only"));
            }
            o.pose.validate().map_err(bad)?;
            let unit = |x: f64| (0.0..=1.0).contains(&x);
            if !(unit(o.metalness) && unit(o.roughness) && o.albedo.min_element() >= 0.0 && o.albedo.max_element() <= 1.0) {
                return Err(bad(format!("material of `{}` must lie in [0, 1]", o.name)));
            }
        }
        Ok(())
    }

    fn apply(self, scene: &mut Scene) {
        if self.camera != scene.camera {
            scene.auto.camera = false;
        }
        if self.lights != scene.lights {
            scene.auto.lights = false;
        }
        if self.effects.ssao_radius != scene.effects.ssao_radius {
            scene.auto.ssao_radius = false;
        }
        scene.camera = self.camera;
        scene.lights = self.lights;
        scene.effects = self.effects;
        for (o, m) in self.objects.into_iter().zip(&mut scene.objects) {
            m.local_pose = o.pose;
            m.visible = o.visible;
            m.casts_shadow = o.casts_shadow;
            m.material.albedo = o.albedo;
            m.material.metalness = o.metalness;
            m.material.roughness = o.roughness;
        }
    }
}

/// Body of `POST /camera`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum CameraEdit {
    Absolute {
        pose: Pose,
    },
    Orbit {
        #[serde(default)]
        yaw: f64,
        #[serde(default)]
        pitch: f64,
        #[serde(default)]
        dolly: f64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct ObjectSummary {
    pub name: String,
    pub render_mode: RenderMode,
    pub vertices: usize,
    pub faces: usize,
    pub edges: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SceneSummary {
    pub version: u64,
    pub objects: Vec<ObjectSummary>,
    pub bounds: Bounds,
    pub auto: AutoFlags,
    pub camera: Camera,
    pub lights: Vec<PointLight>,
    pub ssao_radius: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bounds {
    pub center: DVec3,
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrameRef {
    pub seq: u64,
    pub digest: Option<String>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StateView {
    pub version: u64,
    pub scene_loaded: bool,
    pub camera: Option<Camera>,
    pub lights: Vec<PointLight>,
    pub effects: Option<EffectSettings>,
    pub auto: Option<AutoFlags>,
    pub counters: PassCounters,
    pub keyposes: usize,
    pub recording: bool,
    pub last_frame: Option<FrameRef>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PatchAck {
    pub pointer: String,
    pub value: Value,
    pub version: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KeyposeAck {
    pub index: usize,
    pub count: usize,
    pub pose: Pose,
}

/// Body of `POST /record`. Segments default to one second each.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordRequest {
    pub fps: f64,
    #[serde(default)]
    pub durations: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecordResult {
    pub frames: usize,
    pub digests: Vec<String>,
    pub archive: PathBuf,
}

struct Shared {
    scene: Option<Scene>,
    version: u64,
    keyposes: Vec<Pose>,
    counters: PassCounters,
    recording: bool,
    recordings: u64,
    shutdown: bool,
}

struct Inner {
    config: ServiceConfig,
    shared: Mutex<Shared>,
    wake: Condvar,
    frames: watch::Sender<Option<Arc<FrameMsg>>>,
}

struct Worker {
    inner: Arc<Inner>,
    handle: Option<JoinHandle<()>>,
}

impl Drop for Worker {
    fn drop(&mut self) {
        self.inner.lock().shutdown = true;
        self.inner.wake.notify_all();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Inner {
    fn lock(&self) -> MutexGuard<'_, Shared> {
        self.shared.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// Handle to the live scene. Clones share state; the render worker stops when
/// the last clone is dropped.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
    _worker: Arc<Worker>,
}

impl Service {
    pub fn new(config: ServiceConfig) -> Self {
        let (frames, _) = watch::channel(None);
        let inner = Arc::new(Inner {
            config,
            shared: Mutex::new(Shared {
                scene: None,
                version: 0,
                keyposes: Vec::new(),
                counters: PassCounters::default(),
                recording: false,
                recordings: 0,
                shutdown: false,
            }),
            wake: Condvar::new(),
            frames,
        });
        let worker_inner = inner.clone();
        let handle = std::thread::Builder::new()
            .name("pbrview-render".into())
            .spawn(move || render_loop(&worker_inner))
            .expect("spawn render thread");
        Service { _worker: Arc::new(Worker { inner: inner.clone(), handle: Some(handle) }), inner }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    /// Subscribes to published frames; the receiver always holds the latest.
    pub fn frames(&self) -> watch::Receiver<Option<Arc<FrameMsg>>> {
        self.inner.frames.subscribe()
    }

    /// Waits until a frame reflecting at least `version` has been published.
    pub async fn frame_at_least(&self, version: u64) -> Arc<FrameMsg> {
        let mut rx = self.frames();
        let msg = rx.wait_for(|m| m.as_ref().is_some_and(|m| m.seq >= version)).await.expect("render worker alive");
        msg.clone().expect("checked above")
    }

    fn bump(&self, shared: &mut Shared) -> u64 {
        shared.version += 1;
        self.inner.wake.notify_all();
        shared.version
    }

    /// Replaces the live scene. Accepts a scene document, or `{"path": ...}`
    /// naming a scene file.
    pub fn load_scene(&self, body: Value) -> ServiceResult<SceneSummary> {
        let root = &self.inner.config.scene_root;
        let loaded = match body.as_object().and_then(|o| if o.len() == 1 { o.get("path") } else { None }) {
            Some(Value::String(p)) => pbrview_core::assets::parse_scene(&root.join(p)),
            Some(_) => return Err(bad("`path` must be a string")),
            None => parse_scene_value(body, root),
        }
        .map_err(bad)?;
        let warnings = loaded.warnings.clone();
        let scene = loaded.finalize().map_err(bad)?;
        let (center, radius) = scene.bounds().map_err(bad)?;
        let mut shared = self.inner.lock();
        shared.scene = Some(scene);
        shared.keyposes.clear();
        let version = self.bump(&mut shared);
        let scene = shared.scene.as_ref().expect("just stored");
        Ok(SceneSummary {
            version,
            objects: scene
                .objects
                .iter()
                .map(|m| ObjectSummary {
                    name: m.name.clone(),
                    render_mode: m.render_mode.unwrap_or_else(|| select_render_mode(m)),
                    vertices: m.v.len(),
                    faces: m.f.len(),
                    edges: m.e.len(),
                })
                .collect(),
            bounds: Bounds { center, radius },
            auto: scene.auto,
            camera: scene.camera,
            lights: scene.lights.clone(),
            ssao_radius: scene.effects.ssao_radius,
            warnings,
        })
    }

    pub fn state(&self) -> StateView {
        let shared = self.inner.lock();
        let last = self.inner.frames.borrow().clone();
        let scene = shared.scene.as_ref();
        StateView {
            version: shared.version,
            scene_loaded: scene.is_some(),
            camera: scene.map(|s| s.camera),
            lights: scene.map(|s| s.lights.clone()).unwrap_or_default(),
            effects: scene.map(|s| s.effects.clone()),
            auto: scene.map(|s| s.auto),
            counters: shared.counters.clone(),
            keyposes: shared.keyposes.len(),
            recording: shared.recording,
            last_frame: last.map(|m| FrameRef {
                seq: m.seq,
                digest: m.outcome.as_ref().ok().map(|f| f.digest.clone()),
                error: m.outcome.as_ref().err().cloned(),
            }),
        }
    }

    /// Current editable parameters as JSON.
    pub fn params(&self) -> ServiceResult<Value> {
        let shared = self.inner.lock();
        let scene = shared.scene.as_ref().ok_or_else(no_scene)?;
        serde_json::to_value(Params::of(scene)).map_err(|e| ServiceError::Internal(e.to_string()))
    }

    /// Sets the value at a JSON pointer into [`Params`]. Unknown pointers are
    /// `NotFound`; values that fail to decode or validate are `BadRequest`.
    pub fn patch(&self, pointer: &str, value: Value) -> ServiceResult<PatchAck> {
        let mut shared = self.inner.lock();
        let scene = shared.scene.as_mut().ok_or_else(no_scene)?;
        let current = Params::of(scene);
        let mut doc = serde_json::to_value(&current).map_err(|e| ServiceError::Internal(e.to_string()))?;
        if pointer.is_empty() {
            return Err(bad("pointer must not be empty"));
        }
        *doc.pointer_mut(pointer).ok_or_else(|| ServiceError::NotFound(format!("no parameter at `{pointer}`")))? = value;
        let next: Params = serde_json::from_value(doc).map_err(|e| bad(format!("`{pointer}`: {e}")))?;
        next.validate(scene)?;
        let echo = serde_json::to_value(&next).ok().and_then(|d| d.pointer(pointer).cloned()).unwrap_or(Value::Null);
        if next == current {
            return Ok(PatchAck { pointer: pointer.into(), value: echo, version: shared.version });
        }
        next.apply(scene);
        let version = self.bump(&mut shared);
        Ok(PatchAck { pointer: pointer.into(), value: echo, version })
    }

    pub fn camera(&self, edit: CameraEdit) -> ServiceResult<Camera> {
        let mut shared = self.inner.lock();
        let scene = shared.scene.as_mut().ok_or_else(no_scene)?;
        let next = match edit {
            CameraEdit::Absolute { pose } => {
                pose.validate().map_err(bad)?;
                Camera { pose, ..scene.camera }
            }
            CameraEdit::Orbit { yaw, pitch, dolly } => {
                if !(yaw.is_finite() && pitch.is_finite() && dolly.is_finite()) {
                    return Err(bad("orbit deltas must be finite"));
                }
                let (center, _) = scene.bounds().map_err(bad)?;
                scene.camera.orbit(center, yaw, pitch, dolly)
            }
        };
        next.validate().map_err(bad)?;
        if next != scene.camera {
            scene.camera = next;
            scene.auto.camera = false;
            self.bump(&mut shared);
        }
        Ok(next)
    }

    pub fn add_keypose(&self) -> ServiceResult<KeyposeAck> {
        let mut shared = self.inner.lock();
        let pose = shared.scene.as_ref().ok_or_else(no_scene)?.camera.pose;
        shared.keyposes.push(pose);
        Ok(KeyposeAck { index: shared.keyposes.len() - 1, count: shared.keyposes.len(), pose })
    }

    pub fn keyposes(&self) -> Vec<Pose> {
        self.inner.lock().keyposes.clone()
    }

    pub fn clear_keyposes(&self) {
        self.inner.lock().keyposes.clear();
    }

    /// Renders the key-pose trajectory of the current scene snapshot into a
    /// fresh directory of numbered PNGs. Blocks for the whole recording.
    pub fn record(&self, req: &RecordRequest) -> ServiceResult<RecordResult> {
        let (scene, poses, dir) = {
            let mut shared = self.inner.lock();
            if shared.recording {
                return Err(ServiceError::Conflict("a recording is already in progress".into()));
            }
            let scene = shared.scene.clone().ok_or_else(no_scene)?;
            if shared.keyposes.len() < 2 {
                return Err(bad("recording needs at least two key poses"));
            }
            shared.recording = true;
            shared.recordings += 1;
            let dir = self.inner.config.record_root.join(format!("record_{:04}_{}", shared.recordings, std::process::id()));
            (scene, shared.keyposes.clone(), dir)
        };
        let result = record_frames(&scene, &poses, req, &dir);
        self.inner.lock().recording = false;
        result
    }
}

fn no_scene() -> ServiceError {
    ServiceError::BadRequest("no scene loaded".into())
}

fn record_frames(scene: &Scene, poses: &[Pose], req: &RecordRequest, dir: &Path) -> ServiceResult<RecordResult> {
    let durations = req.durations.clone().unwrap_or_else(|| vec![1.0; poses.len() - 1]);
    std::fs::create_dir_all(dir).map_err(|e| ServiceError::Internal(format!("{}: {e}", dir.display())))?;
    let mut digests = Vec::new();
    let frames = render_trajectory(scene, poses, &durations, req.fps, &mut FrameCaches::new(), |i, frame| {
        let png = encode_png(&frame.ldr);
        digests.push(sha256_hex(&png));
        write_atomic(&dir.join(format!("frame_{i:05}.png")), &png)
    })
    .map_err(|e| if e.is_io() { ServiceError::Internal(e.to_string()) } else { bad(e) })?;
    Ok(RecordResult { frames, digests, archive: dir.to_path_buf() })
}

fn render_loop(inner: &Inner) {
    let mut caches = FrameCaches::new();
    let mut rendered = 0;
    loop {
        let (scene, version) = {
            let mut shared = inner.lock();
            while !shared.shutdown && (shared.scene.is_none() || shared.version == rendered) {
                shared = inner.wake.wait(shared).unwrap_or_else(|p| p.into_inner());
            }
            if shared.shutdown {
                return;
            }
            (shared.scene.clone().expect("checked above"), shared.version)
        };
        let outcome = render_frame(&scene, &mut caches)
            .map(|frame| {
                let png = encode_png(&frame.ldr);
                EncodedFrame { digest: sha256_hex(&png), png: Arc::new(png) }
            })
            .map_err(|e| e.to_string());
        if let Err(e) = &outcome {
            log::error!("frame {version}: {e}");
        }
        rendered = version;
        inner.lock().counters = caches.counters.clone();
        inner.frames.send_replace(Some(Arc::new(FrameMsg { seq: version, outcome })));
    }
}
