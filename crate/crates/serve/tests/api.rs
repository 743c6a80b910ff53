use std::path::Path;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use glam::DVec3;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use pbrview_core::assets::ply::write_binary;
use pbrview_core::pipeline::{render_trajectory, FrameCaches};
use pbrview_core::primitives::{cuboid, uv_sphere};
use pbrview_serve::service::sha256_hex;
use pbrview_serve::{router, Service, ServiceConfig};

struct Fixture {
    _dir: tempfile::TempDir,
    service: Service,
    app: Router,
}

fn scene_doc() -> Value {
    json!({
        "objects": [
            { "name": "ball", "mesh": "ball.ply", "material": { "albedo": [0.8, 0.3, 0.2], "roughness": 0.4 } },
            { "name": "base", "mesh": "base.ply", "material": { "roughness": 0.7 } }
        ],
        "effects": { "bloom_threshold": 0.8 },
        "output": { "width": 96, "height": 72 }
    })
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    write_meshes(dir.path());
    let config = ServiceConfig { scene_root: dir.path().to_path_buf(), record_root: dir.path().join("records") };
    let service = Service::new(config);
    Fixture { app: router(service.clone()), service, _dir: dir }
}

fn write_meshes(dir: &Path) {
    std::fs::write(dir.join("ball.ply"), write_binary(&uv_sphere("ball", DVec3::new(0.0, 0.5, 0.0), 0.5, 24, 12))).unwrap();
    std::fs::write(dir.join("base.ply"), write_binary(&cuboid("base", DVec3::ZERO, DVec3::new(1.2, 0.05, 1.2)))).unwrap();
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes, _) = raw(app, method, uri, body.map(|b| b.to_string())).await;
    let v = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, v)
}

async fn raw(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>, axum::http::HeaderMap) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes, headers)
}

/// Digest of the first frame reflecting every edit up to `version`.
async fn digest_at(app: &Router, version: u64) -> String {
    let (status, png, headers) = raw(app, "GET", &format!("/frame?min_seq={version}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let digest = headers["x-frame-digest"].to_str().unwrap().to_string();
    assert_eq!(digest, sha256_hex(&png));
    assert!(headers["x-frame-seq"].to_str().unwrap().parse::<u64>().unwrap() >= version);
    digest
}

async fn load(f: &Fixture) -> Value {
    let (status, summary) = call(&f.app, "POST", "/scene", Some(scene_doc())).await;
    assert_eq!(status, StatusCode::OK, "{summary}");
    summary
}

#[tokio::test]
async fn scene_summary_reports_objects_and_auto_values() {
    let f = fixture();
    let s = load(&f).await;
    assert_eq!(s["objects"][0]["name"], "ball");
    assert_eq!(s["objects"][0]["render_mode"], "mesh_pbr");
    assert_eq!(s["objects"][1]["faces"], 12);
    assert_eq!(s["auto"], json!({ "camera": true, "lights": true, "ssao_radius": true }));
    assert_eq!(s["lights"].as_array().unwrap().len(), 3);
    assert!(s["bounds"]["radius"].as_f64().unwrap() > 1.0);
    assert!(s["ssao_radius"].as_f64().unwrap() > 0.0);
}

#[tokio::test]
async fn requests_without_scene_are_rejected() {
    let f = fixture();
    let (status, _) = call(&f.app, "PATCH", "/param", Some(json!({ "pointer": "/lights/0/intensity", "value": 1.0 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) = raw(&f.app, "GET", "/frame", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, state) = call(&f.app, "GET", "/state", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["scene_loaded"], false);
}

#[tokio::test]
async fn patch_changes_frame_and_repeating_it_does_not() {
    let f = fixture();
    let v0 = load(&f).await["version"].as_u64().unwrap();
    let d0 = digest_at(&f.app, v0).await;

    let (status, ack) = call(&f.app, "PATCH", "/param", Some(json!({ "pointer": "/lights/0/intensity", "value": 40.0 }))).await;
    assert_eq!(status, StatusCode::OK, "{ack}");
    assert_eq!(ack["value"], 40.0);
    let v1 = ack["version"].as_u64().unwrap();
    assert!(v1 > v0);
    let d1 = digest_at(&f.app, v1).await;
    assert_ne!(d0, d1);

    let (_, again) = call(&f.app, "PATCH", "/param", Some(json!({ "pointer": "/lights/0/intensity", "value": 40.0 }))).await;
    assert_eq!(again["version"].as_u64().unwrap(), v1);
    assert_eq!(digest_at(&f.app, v1).await, d1);

    let (_, state) = call(&f.app, "GET", "/state", None).await;
    assert_eq!(state["lights"][0]["intensity"], 40.0);
    assert_eq!(state["auto"]["lights"], false);
    assert_eq!(state["last_frame"]["digest"], d1);
}

#[tokio::test]
async fn patch_errors_map_to_status_codes() {
    let f = fixture();
    load(&f).await;
    let cases = [
        (json!({ "pointer": "/lights/9/intensity", "value": 1.0 }), StatusCode::NOT_FOUND),
        (json!({ "pointer": "/nope", "value": 1.0 }), StatusCode::NOT_FOUND),
        (json!({ "pointer": "/lights/0/intensity", "value": "bright" }), StatusCode::BAD_REQUEST),
        (json!({ "pointer": "/lights/0/intensity", "value": -1.0 }), StatusCode::BAD_REQUEST),
        (json!({ "pointer": "/objects/0/roughness", "value": 2.0 }), StatusCode::BAD_REQUEST),
        (json!({ "value": 1.0 }), StatusCode::BAD_REQUEST),
    ];
    for (body, want) in cases {
        let (status, reply) = call(&f.app, "PATCH", "/param", Some(body.clone())).await;
        assert_eq!(status, want, "{body} -> {reply}");
        assert!(reply["error"].is_string());
    }
    let (status, _, _) = raw(&f.app, "PATCH", "/param", Some("{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn identity_orbit_leaves_frame_unchanged() {
    let f = fixture();
    let v0 = load(&f).await["version"].as_u64().unwrap();
    let d0 = digest_at(&f.app, v0).await;
    let (status, reply) = call(&f.app, "POST", "/camera", Some(json!({ "yaw": 0.0, "pitch": 0.0, "dolly": 0.0 }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reply["version"].as_u64().unwrap(), v0);
    assert_eq!(digest_at(&f.app, v0).await, d0);

    let (_, moved) = call(&f.app, "POST", "/camera", Some(json!({ "yaw": 0.3 }))).await;
    let v1 = moved["version"].as_u64().unwrap();
    assert_ne!(digest_at(&f.app, v1).await, d0);

    let (_, params) = call(&f.app, "GET", "/params", None).await;
    let back = json!({ "pose": reply["camera"]["pose"] });
    let (_, restored) = call(&f.app, "POST", "/camera", Some(back)).await;
    assert_eq!(restored["camera"]["pose"], reply["camera"]["pose"]);
    assert_ne!(params["camera"]["pose"], reply["camera"]["pose"]);
    assert_eq!(digest_at(&f.app, restored["version"].as_u64().unwrap()).await, d0);
}

#[tokio::test]
async fn record_matches_live_frame_and_direct_trajectory() {
    let f = fixture();
    let v0 = load(&f).await["version"].as_u64().unwrap();
    let live = digest_at(&f.app, v0).await;
    let (_, k0) = call(&f.app, "POST", "/keypose", None).await;
    assert_eq!(k0["count"], 1);
    call(&f.app, "POST", "/camera", Some(json!({ "yaw": 0.8, "dolly": 0.2 }))).await;
    call(&f.app, "POST", "/keypose", None).await;
    let (_, poses) = call(&f.app, "GET", "/keyposes", None).await;
    assert_eq!(poses.as_array().unwrap().len(), 2);

    let (status, rec) = call(&f.app, "POST", "/record", Some(json!({ "fps": 10 }))).await;
    assert_eq!(status, StatusCode::OK, "{rec}");
    assert_eq!(rec["frames"], 10);
    let digests: Vec<String> = serde_json::from_value(rec["digests"].clone()).unwrap();
    assert_eq!(digests[0], live);
    let archive = Path::new(rec["archive"].as_str().unwrap());
    for (i, d) in digests.iter().enumerate() {
        let png = std::fs::read(archive.join(format!("frame_{i:05}.png"))).unwrap();
        assert_eq!(&sha256_hex(&png), d);
    }

    // The same trajectory rendered straight through the library.
    let mut loaded = pbrview_core::assets::parse_scene_value(scene_doc(), &f.service.config().scene_root).unwrap();
    loaded.set_resolution(96, 72);
    let scene = loaded.finalize().unwrap();
    let key: Vec<_> = serde_json::from_value(poses).unwrap();
    let mut direct = Vec::new();
    render_trajectory(&scene, &key, &[1.0], 10.0, &mut FrameCaches::new(), |_, fr| {
        direct.push(sha256_hex(&pbrview_core::assets::encode_png(&fr.ldr)));
        Ok(())
    })
    .unwrap();
    assert_eq!(direct, digests);
}

#[tokio::test]
async fn record_needs_two_poses_and_positive_fps() {
    let f = fixture();
    load(&f).await;
    call(&f.app, "POST", "/keypose", None).await;
    let (status, _) = call(&f.app, "POST", "/record", Some(json!({ "fps": 10 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    call(&f.app, "POST", "/keypose", None).await;
    let (status, _) = call(&f.app, "POST", "/record", Some(json!({ "fps": 0 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&f.app, "DELETE", "/keyposes", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(f.service.keyposes().len(), 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_record_conflicts() {
    let f = fixture();
    load(&f).await;
    call(&f.app, "POST", "/keypose", None).await;
    call(&f.app, "POST", "/camera", Some(json!({ "yaw": 0.5 }))).await;
    call(&f.app, "POST", "/keypose", None).await;
    let app = f.app.clone();
    let long = tokio::spawn(async move { call(&app, "POST", "/record", Some(json!({ "fps": 60, "durations": [4.0] }))).await });
    let mut seen = false;
    for _ in 0..2000 {
        if f.service.state().recording {
            seen = true;
            break;
        }
        tokio::time::sleep(Duration::from_millis(1)).await;
    }
    assert!(seen, "recording never started");
    let (status, _) = call(&f.app, "POST", "/record", Some(json!({ "fps": 10 }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, rec) = long.await.unwrap();
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["frames"], 240);
    assert!(!f.service.state().recording);
}

fn edits() -> Vec<Value> {
    vec![
        json!({ "pointer": "/effects/ssao_enabled", "value": false }),
        json!({ "pointer": "/lights/1/color", "value": [1.0, 0.5, 0.2] }),
        json!({ "pointer": "/objects/0/metalness", "value": 1.0 }),
        json!({ "pointer": "/effects/tonemap", "value": "reinhard" }),
        json!({ "pointer": "/objects/1/pose/translation", "value": [0.0, -0.1, 0.0] }),
    ]
}

#[tokio::test]
async fn replaying_edits_reproduces_state_and_frame() {
    let mut finals = Vec::new();
    for _ in 0..2 {
        let f = fixture();
        load(&f).await;
        for e in edits() {
            let (status, r) = call(&f.app, "PATCH", "/param", Some(e)).await;
            assert_eq!(status, StatusCode::OK, "{r}");
        }
        let (_, params) = call(&f.app, "GET", "/params", None).await;
        let version = f.service.state().version;
        finals.push((params, version, digest_at(&f.app, version).await));
    }
    assert_eq!(finals[0], finals[1]);
}

#[tokio::test]
async fn burst_of_edits_ends_on_last_edit() {
    let f = fixture();
    load(&f).await;
    let mut last = 0;
    for k in 0..20 {
        let (_, ack) = call(&f.app, "PATCH", "/param", Some(json!({ "pointer": "/lights/0/intensity", "value": 10.0 + k as f64 }))).await;
        last = ack["version"].as_u64().unwrap();
    }
    let burst = digest_at(&f.app, last).await;

    let g = fixture();
    load(&g).await;
    let (_, ack) = call(&g.app, "PATCH", "/param", Some(json!({ "pointer": "/lights/0/intensity", "value": 29.0 }))).await;
    assert_eq!(digest_at(&g.app, ack["version"].as_u64().unwrap()).await, burst);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn frame_stream_pushes_sequenced_pngs_and_accepts_edits() {
    use futures::{SinkExt, StreamExt};
    use tokio_tungstenite::tungstenite::Message;

    let f = fixture();
    let v0 = load(&f).await["version"].as_u64().unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = f.app.clone();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/frames")).await.unwrap();

    let next_frame = |msg: Message| match msg {
        Message::Binary(b) => Some((u64::from_be_bytes(b[..8].try_into().unwrap()), b[8..].to_vec())),
        _ => None,
    };
    let mut seqs = Vec::new();
    while seqs.last().is_none_or(|s| *s < v0) {
        let m = ws.next().await.unwrap().unwrap();
        if let Some((seq, png)) = next_frame(m) {
            assert_eq!(&png[1..4], b"PNG");
            seqs.push(seq);
        }
    }

    let edit = json!({ "op": "param", "pointer": "/effects/bloom_enabled", "value": false });
    ws.send(Message::Text(edit.to_string().into())).await.unwrap();
    let mut acked = None;
    loop {
        let m = tokio::time::timeout(Duration::from_secs(60), ws.next()).await.unwrap().unwrap().unwrap();
        match m {
            Message::Text(t) => {
                let v: Value = serde_json::from_str(t.as_str()).unwrap();
                assert_eq!(v["ok"], true, "{v}");
                acked = v["version"].as_u64();
            }
            other => {
                let (seq, png) = next_frame(other).unwrap();
                seqs.push(seq);
                if acked.is_some_and(|a| seq >= a) {
                    assert_eq!(sha256_hex(&png), digest_at(&f.app, seq).await);
                    break;
                }
            }
        }
    }
    assert!(seqs.windows(2).all(|w| w[0] < w[1]), "{seqs:?}");

    ws.send(Message::Text("{\"op\":\"bogus\"}".into())).await.unwrap();
    loop {
        if let Message::Text(t) = ws.next().await.unwrap().unwrap() {
            let v: Value = serde_json::from_str(t.as_str()).unwrap();
            assert_eq!(v["ok"], false);
            break;
        }
    }
}
