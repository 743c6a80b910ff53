//! HTTP and WebSocket surface of [`Service`].

use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::service::{CameraEdit, FrameMsg, RecordRequest, Service, ServiceError};

/// Longest `GET /frame` waits for a frame at the requested sequence number.
pub const FRAME_WAIT: Duration = Duration::from_secs(60);

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Reply = Result<Response, ServiceError>;

fn ok(v: impl serde::Serialize) -> Reply {
    Ok(Json(v).into_response())
}

/// Decodes a JSON body, mapping any failure to 400.
fn body<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::BadRequest(format!("malformed body: {e}")))
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/scene", post(post_scene))
        .route("/state", get(get_state))
        .route("/params", get(get_params))
        .route("/param", patch(patch_param))
        .route("/camera", post(post_camera))
        .route("/keypose", post(post_keypose))
        .route("/keyposes", get(get_keyposes).delete(delete_keyposes))
        .route("/record", post(post_record))
        .route("/frame", get(get_frame))
        .route("/frames", get(frames_ws))
        .with_state(service)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn post_scene(State(s): State<Service>, bytes: axum::body::Bytes) -> Reply {
    let doc: Value = body(&bytes)?;
    ok(blocking(move || s.load_scene(doc)).await?)
}

async fn get_state(State(s): State<Service>) -> Reply {
    ok(s.state())
}

async fn get_params(State(s): State<Service>) -> Reply {
    ok(s.params()?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatchBody {
    #[serde(alias = "path")]
    pointer: String,
    value: Value,
}

async fn patch_param(State(s): State<Service>, bytes: axum::body::Bytes) -> Reply {
    let b: PatchBody = body(&bytes)?;
    ok(s.patch(&b.pointer, b.value)?)
}

async fn post_camera(State(s): State<Service>, bytes: axum::body::Bytes) -> Reply {
    let edit: CameraEdit = body(&bytes)?;
    let camera = s.camera(edit)?;
    ok(json!({ "camera": camera, "version": s.state().version }))
}

async fn post_keypose(State(s): State<Service>) -> Reply {
    ok(s.add_keypose()?)
}

async fn get_keyposes(State(s): State<Service>) -> Reply {
    ok(s.keyposes())
}

async fn delete_keyposes(State(s): State<Service>) -> Reply {
    s.clear_keyposes();
    ok(json!({ "count": 0 }))
}

async fn post_record(State(s): State<Service>, bytes: axum::body::Bytes) -> Reply {
    let req: RecordRequest = body(&bytes)?;
    if !(req.fps > 0.0 && req.fps.is_finite()) {
        return Err(ServiceError::BadRequest("fps must be positive".into()));
    }
    ok(blocking(move || s.record(&req)).await?)
}

#[derive(Deserialize)]
struct FrameQuery {
    #[serde(default)]
    min_seq: Option<u64>,
}

fn png_response(msg: &FrameMsg) -> Reply {
    match &msg.outcome {
        Ok(frame) => {
            let mut r = (*frame.png).clone().into_response();
            let h = r.headers_mut();
            h.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
            h.insert("x-frame-seq", HeaderValue::from(msg.seq));
            h.insert("x-frame-digest", HeaderValue::from_str(&frame.digest).expect("hex is ascii"));
            Ok(r)
        }
        Err(e) => Err(ServiceError::Internal(format!("frame {} failed: {e}", msg.seq))),
    }
}

/// Latest frame as PNG; with `min_seq`, waits until a frame at least that new exists.
async fn get_frame(State(s): State<Service>, Query(q): Query<FrameQuery>) -> Reply {
    let state = s.state();
    if !state.scene_loaded {
        return Err(ServiceError::NotFound("no scene loaded".into()));
    }
    let want = q.min_seq.unwrap_or(state.version).min(state.version);
    let msg = tokio::time::timeout(FRAME_WAIT, s.frame_at_least(want))
        .await
        .map_err(|_| ServiceError::Internal("timed out waiting for frame".into()))?;
    png_response(&msg)
}

async fn frames_ws(State(s): State<Service>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| stream_frames(s, socket))
}

/// Binary message layout: 8-byte big-endian sequence number, then the PNG.
pub fn frame_message(seq: u64, png: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + png.len());
    out.extend_from_slice(&seq.to_be_bytes());
    out.extend_from_slice(png);
    out
}

fn encode(msg: &FrameMsg) -> Message {
    match &msg.outcome {
        Ok(f) => Message::Binary(frame_message(msg.seq, &f.png).into()),
        Err(e) => Message::Text(json!({ "seq": msg.seq, "error": e }).to_string().into()),
    }
}

#[derive(Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum ClientEdit {
    Param { pointer: String, value: Value },
    Camera(CameraEdit),
    Keypose,
}

fn apply_client_edit(s: &Service, text: &str) -> Value {
    let result =
        serde_json::from_str::<ClientEdit>(text).map_err(|e| ServiceError::BadRequest(format!("malformed edit: {e}"))).and_then(|edit| {
            match edit {
                ClientEdit::Param { pointer, value } => s.patch(&pointer, value).map(|a| json!(a)),
                ClientEdit::Camera(c) => s.camera(c).map(|c| json!({ "camera": c })),
                ClientEdit::Keypose => s.add_keypose().map(|a| json!(a)),
            }
        });
    match result {
        Ok(v) => json!({ "ok": true, "version": s.state().version, "result": v }),
        Err(e) => json!({ "ok": false, "error": e.to_string() }),
    }
}

async fn stream_frames(s: Service, mut socket: WebSocket) {
    let mut rx = s.frames();
    let mut last_sent = None;
    loop {
        let pending = rx.borrow_and_update().clone();
        if let Some(msg) = pending.filter(|m| last_sent != Some(m.seq)) {
            last_sent = Some(msg.seq);
            if socket.send(encode(&msg)).await.is_err() {
                return;
            }
        }
        tokio::select! {
            changed = rx.changed() => if changed.is_err() { return },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(t))) => {
                    let reply = apply_client_edit(&s, t.as_str());
                    if socket.send(Message::Text(reply.to_string().into())).await.is_err() {
                        return;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
