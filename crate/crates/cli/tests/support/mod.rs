//! Shared fixtures for the CLI test targets.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Output;

use glam::DVec3;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use pbrview_core::assets::{ply::write_binary, write_hdr};
use pbrview_core::geom::Mesh;
use pbrview_core::image::HdrImage;
use pbrview_core::primitives::{cuboid, fibonacci_sphere, ground_plane, uv_sphere};

pub const BIN: &str = env!("CARGO_BIN_EXE_pbrview");

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn pbrview(args: &[&str]) -> Output {
    std::process::Command::new(BIN).args(args).output().expect("spawn pbrview")
}

pub fn sha256_file(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).expect("read output")))
}

/// Sky gradient with a small, very bright sun.
pub fn sky(width: usize, height: usize) -> HdrImage {
    let sun = DVec3::new(0.4, 0.6, 0.3).normalize();
    HdrImage::from_fn(width, height, |i, j| {
        let theta = PI * (j as f64 + 0.5) / height as f64;
        let phi = 2.0 * PI * ((i as f64 + 0.5) / width as f64 - 0.5);
        let d = DVec3::new(theta.sin() * phi.sin(), theta.cos(), theta.sin() * phi.cos());
        if d.dot(sun) > (3.0f64).to_radians().cos() {
            return DVec3::splat(60.0);
        }
        let up = d.y.max(0.0);
        let sky = DVec3::new(0.9, 0.95, 1.0).lerp(DVec3::new(0.35, 0.55, 1.0), up) * 1.2;
        let ground = DVec3::new(0.3, 0.25, 0.2) * 0.6;
        if d.y >= 0.0 {
            sky
        } else {
            ground
        }
    })
}

pub fn write_mesh(dir: &Path, file: &str, mesh: &Mesh) -> String {
    std::fs::write(dir.join(file), write_binary(mesh)).expect("write mesh");
    file.to_string()
}

/// Writes the composite demo scene into `dir`: a triangle mesh of about
/// `triangles` faces on a ground plane, a colored point cloud, a wire cage,
/// and a sky environment, with every effect on. Returns the scene path.
pub fn write_demo(dir: &Path, triangles: usize, width: usize, height: usize) -> PathBuf {
    let rings = ((triangles as f64 / 2.0 / 1.3).sqrt().round() as usize).max(4);
    let segments = (triangles / (2 * rings - 2)).max(3);
    let ball = uv_sphere("ball", DVec3::new(-0.6, 0.7, 0.0), 0.7, segments, rings);
    let mut cloud = fibonacci_sphere("cloud", DVec3::new(1.0, 0.5, 0.3), 0.5, 20_000);
    cloud.c = cloud.v.iter().map(|p| ((*p - DVec3::new(1.0, 0.5, 0.3)) / 0.5 + 1.0) * 0.5).collect();
    let floor = ground_plane("floor", DVec3::ZERO, 2.5, 8);
    let cage = cuboid("cage", DVec3::new(1.0, 0.5, 0.3), DVec3::splat(0.6));
    write_hdr(&sky(256, 128), &dir.join("sky.hdr")).expect("write sky");
    let doc = json!({
        "environment": "sky.hdr",
        "objects": [
            { "name": "ball", "mesh": write_mesh(dir, "ball.ply", &ball),
              "material": { "albedo": [0.95, 0.64, 0.54], "metalness": 1.0, "roughness": 0.3 } },
            { "name": "cloud", "mesh": write_mesh(dir, "cloud.ply", &cloud) },
            { "name": "floor", "mesh": write_mesh(dir, "floor.ply", &floor),
              "material": { "albedo": [0.6, 0.6, 0.6], "roughness": 0.8 } },
            { "name": "cage", "mesh": write_mesh(dir, "cage.ply", &cage), "wireframe": true, "render_mode": "lines" }
        ],
        "effects": { "ssao_enabled": true, "bloom_enabled": true, "shadows_enabled": true, "edl_strength": 1.0, "seed": 7 },
        "output": { "width": width, "height": height, "path": "demo.png" }
    });
    write_json(&dir.join("demo.json"), &doc)
}

pub fn write_json(path: &Path, v: &Value) -> PathBuf {
    std::fs::write(path, serde_json::to_vec_pretty(v).unwrap()).expect("write json");
    path.to_path_buf()
}
