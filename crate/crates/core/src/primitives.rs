//! Procedural test and demo geometry.

use std::f64::consts::PI;

use glam::{DVec2, DVec3};

use crate::geom::Mesh;
use crate::math::tangent_frame;

/// Latitude-longitude sphere with smooth normals, `segments` around and
/// `rings` from pole to pole.
pub fn uv_sphere(name: &str, center: DVec3, radius: f64, segments: usize, rings: usize) -> Mesh {
    let (segments, rings) = (segments.max(3), rings.max(2));
    let mut m = Mesh::new(name);
    for r in 0..=rings {
        let theta = PI * r as f64 / rings as f64;
        for s in 0..=segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            let n = DVec3::new(theta.sin() * phi.sin(), theta.cos(), theta.sin() * phi.cos());
            m.v.push(center + radius * n);
            m.n.push(n);
            m.uv.push(DVec2::new(s as f64 / segments as f64, r as f64 / rings as f64));
        }
    }
    let row = segments as u32 + 1;
    for r in 0..rings as u32 {
        for s in 0..segments as u32 {
            let (a, b, c, d) = (r * row + s, r * row + s + 1, (r + 1) * row + s, (r + 1) * row + s + 1);
            if r != 0 {
                m.f.push([a, c, b]);
            }
            if r + 1 != rings as u32 {
                m.f.push([b, c, d]);
            }
        }
    }
    m
}

/// `count` points spread evenly over a sphere on a Fibonacci spiral.
pub fn fibonacci_sphere(name: &str, center: DVec3, radius: f64, count: usize) -> Mesh {
    let golden = PI * (3.0 - 5f64.sqrt());
    let v = (0..count)
        .map(|k| {
            let y = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
            let r = (1.0 - y * y).sqrt();
            let phi = golden * k as f64;
            center + radius * DVec3::new(r * phi.cos(), y, r * phi.sin())
        })
        .collect();
    Mesh::from_vertices(name, v)
}

/// Fibonacci sphere as square surfels whose half-extent overlaps neighbors.
pub fn surfel_sphere(name: &str, center: DVec3, radius: f64, count: usize) -> Mesh {
    let mut m = fibonacci_sphere(name, center, radius, count);
    let half = 0.75 * radius * (4.0 * PI / count as f64).sqrt();
    for p in &m.v {
        let n = (*p - center).normalize();
        let (t, _) = tangent_frame(n);
        m.n.push(n);
        m.t.push(t * half);
        m.b.push(half);
    }
    m
}

/// Axis-aligned box with flat per-face normals.
pub fn cuboid(name: &str, center: DVec3, half: DVec3) -> Mesh {
    let mut m = Mesh::new(name);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut n = DVec3::ZERO;
            n[axis] = sign;
            let mut u = DVec3::ZERO;
            u[(axis + 1) % 3] = 1.0;
            let w = n.cross(u);
            let base = m.v.len() as u32;
            for (a, b) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                m.v.push(center + half * (n + a * u + b * w));
                m.n.push(n);
            }
            m.f.push([base, base + 1, base + 2]);
            m.f.push([base, base + 2, base + 3]);
        }
    }
    m
}

/// Square in the `y = height` plane facing +y, split into `cells²` quads.
pub fn ground_plane(name: &str, center: DVec3, half: f64, cells: usize) -> Mesh {
    let cells = cells.max(1);
    let mut m = Mesh::new(name);
    for j in 0..=cells {
        for i in 0..=cells {
            let (u, v) = (i as f64 / cells as f64, j as f64 / cells as f64);
            m.v.push(center + DVec3::new((2.0 * u - 1.0) * half, 0.0, (2.0 * v - 1.0) * half));
            m.n.push(DVec3::Y);
            m.uv.push(DVec2::new(u, v));
        }
    }
    let row = cells as u32 + 1;
    for j in 0..cells as u32 {
        for i in 0..cells as u32 {
            let a = j * row + i;
            m.f.push([a, a + row, a + 1]);
            m.f.push([a + 1, a + row, a + row + 1]);
        }
    }
    m
}
