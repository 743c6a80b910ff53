//! Fixed-point triangle setup and traversal.
//!
//! Screen positions are snapped to 1/256 pixel and edge functions are
//! evaluated in exact integer arithmetic, so the top-left rule makes shared
//! edges watertight.

use glam::DVec3;

use crate::scene::Camera;

pub const SUBPIXEL_BITS: u32 = 8;
const SUBPIXEL: f64 = (1 << SUBPIXEL_BITS) as f64;
const HALF_PIXEL: i64 = 1 << (SUBPIXEL_BITS - 1);
/// Side guard band in pixels; triangles beyond it are clipped in view space.
const GUARD_BAND: f64 = (1 << 20) as f64;

/// A clipped polygon vertex: view-space position plus barycentric weights
/// relative to the original, unclipped triangle.
#[derive(Clone, Copy, Debug)]
struct ClipVertex {
    view: DVec3,
    bary: DVec3,
}

/// A visible fragment of a triangle.
#[derive(Clone, Copy, Debug)]
pub struct Fragment {
    pub x: usize,
    pub y: usize,
    /// Linear view-space depth.
    pub depth: f64,
    /// Perspective-correct barycentrics of the original triangle.
    pub bary: DVec3,
}

/// Signed distance-like plane test in view space (`>= 0` is inside).
#[derive(Clone, Copy)]
struct Plane {
    normal: DVec3,
    offset: f64,
}

impl Plane {
    #[inline]
    fn eval(&self, p: DVec3) -> f64 {
        self.normal.dot(p) + self.offset
    }
}

fn clip_planes(camera: &Camera) -> [Plane; 5] {
    let th = camera.tan_half_fov();
    // Screen x = (ndc + 1) / 2 · W, so a guard of G pixels is ndc 2G/W + 1.
    let gx = (2.0 * GUARD_BAND / camera.width as f64 + 1.0) * th * camera.aspect();
    let gy = (2.0 * GUARD_BAND / camera.height as f64 + 1.0) * th;
    [
        Plane { normal: DVec3::new(0.0, 0.0, -1.0), offset: -camera.near },
        // x <= gx · depth, with depth = -z.
        Plane { normal: DVec3::new(-1.0, 0.0, -gx), offset: 0.0 },
        Plane { normal: DVec3::new(1.0, 0.0, -gx), offset: 0.0 },
        Plane { normal: DVec3::new(0.0, -1.0, -gy), offset: 0.0 },
        Plane { normal: DVec3::new(0.0, 1.0, -gy), offset: 0.0 },
    ]
}

fn clip_polygon(poly: &mut Vec<ClipVertex>, scratch: &mut Vec<ClipVertex>, plane: Plane) {
    scratch.clear();
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let (da, db) = (plane.eval(a.view), plane.eval(b.view));
        if da >= 0.0 {
            scratch.push(a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            let t = da / (da - db);
            scratch.push(ClipVertex { view: a.view.lerp(b.view, t), bary: a.bary.lerp(b.bary, t) });
        }
    }
    std::mem::swap(poly, scratch);
}

/// Rasterizes one view-space triangle, calling `emit` for every pixel center
/// it covers. Rows outside `rows` are skipped.
pub fn rasterize_triangle(camera: &Camera, view: [DVec3; 3], rows: std::ops::Range<usize>, emit: &mut impl FnMut(Fragment)) {
    let planes = clip_planes(camera);
    let needs_clip = planes.iter().any(|pl| view.iter().any(|v| pl.eval(*v) < 0.0));
    let mut poly: Vec<ClipVertex> =
        view.iter().zip([DVec3::X, DVec3::Y, DVec3::Z]).map(|(&v, b)| ClipVertex { view: v, bary: b }).collect();
    if needs_clip {
        let mut scratch = Vec::with_capacity(8);
        for pl in planes {
            clip_polygon(&mut poly, &mut scratch, pl);
            if poly.len() < 3 {
                return;
            }
        }
    }
    // Fan-triangulate the clipped polygon; fans share edges exactly because
    // the snapped vertices are shared.
    let snapped: Vec<Option<(i64, i64, f64)>> = poly
        .iter()
        .map(|v| camera.project_view(v.view).map(|p| ((p.x * SUBPIXEL).round() as i64, (p.y * SUBPIXEL).round() as i64, p.depth)))
        .collect();
    for k in 1..poly.len() - 1 {
        let ids = [0, k, k + 1];
        let (Some(a), Some(b), Some(c)) = (snapped[0], snapped[k], snapped[k + 1]) else {
            continue;
        };
        raster_snapped(camera, [a, b, c], ids.map(|i| poly[i].bary), rows.clone(), emit);
    }
}

#[inline]
fn orient(ax: i64, ay: i64, bx: i64, by: i64, px: i64, py: i64) -> i64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Top-left rule for an edge whose interior lies on its positive side in
/// y-down screen space.
#[inline]
fn is_top_left(ax: i64, ay: i64, bx: i64, by: i64) -> bool {
    let (dx, dy) = (bx - ax, by - ay);
    dy < 0 || (dy == 0 && dx > 0)
}

fn raster_snapped(
    camera: &Camera,
    mut v: [(i64, i64, f64); 3],
    mut bary: [DVec3; 3],
    rows: std::ops::Range<usize>,
    emit: &mut impl FnMut(Fragment),
) {
    let mut area = orient(v[0].0, v[0].1, v[1].0, v[1].1, v[2].0, v[2].1);
    if area == 0 {
        return;
    }
    if area < 0 {
        v.swap(1, 2);
        bary.swap(1, 2);
        area = -area;
    }
    let (w, h) = (camera.width as i64, camera.height as i64);
    let min_x = v.iter().map(|p| p.0).min().unwrap();
    let max_x = v.iter().map(|p| p.0).max().unwrap();
    let min_y = v.iter().map(|p| p.1).min().unwrap();
    let max_y = v.iter().map(|p| p.1).max().unwrap();
    // Pixel i has its center at i·S + S/2.
    let px0 = ((min_x - HALF_PIXEL) as f64 / SUBPIXEL).ceil().max(0.0) as i64;
    let px1 = (((max_x - HALF_PIXEL) as f64 / SUBPIXEL).floor() as i64).min(w - 1);
    let py0 = (((min_y - HALF_PIXEL) as f64 / SUBPIXEL).ceil() as i64).max(rows.start as i64).max(0);
    let py1 = (((max_y - HALF_PIXEL) as f64 / SUBPIXEL).floor() as i64).min(rows.end as i64 - 1).min(h - 1);
    if px0 > px1 || py0 > py1 {
        return;
    }

    // Edge k is opposite vertex k.
    let edges = [(1, 2), (2, 0), (0, 1)];
    let bias: [i64; 3] = edges.map(|(a, b)| if is_top_left(v[a].0, v[a].1, v[b].0, v[b].1) { 0 } else { -1 });
    let step_x: [i64; 3] = edges.map(|(a, b)| -(v[b].1 - v[a].1) * (1 << SUBPIXEL_BITS));
    let step_y: [i64; 3] = edges.map(|(a, b)| (v[b].0 - v[a].0) * (1 << SUBPIXEL_BITS));
    let origin_x = px0 * (1 << SUBPIXEL_BITS) + HALF_PIXEL;
    let origin_y = py0 * (1 << SUBPIXEL_BITS) + HALF_PIXEL;
    let mut row_w: [i64; 3] = edges.map(|(a, b)| orient(v[a].0, v[a].1, v[b].0, v[b].1, origin_x, origin_y));

    let inv_area = 1.0 / area as f64;
    let inv_depth = [1.0 / v[0].2, 1.0 / v[1].2, 1.0 / v[2].2];
    for py in py0..=py1 {
        let mut e = row_w;
        for px in px0..=px1 {
            if e[0] + bias[0] >= 0 && e[1] + bias[1] >= 0 && e[2] + bias[2] >= 0 {
                let l = [e[0] as f64 * inv_area, e[1] as f64 * inv_area, e[2] as f64 * inv_area];
                let persp = [l[0] * inv_depth[0], l[1] * inv_depth[1], l[2] * inv_depth[2]];
                let sum = persp[0] + persp[1] + persp[2];
                let depth = 1.0 / sum;
                let pc = [persp[0] * depth, persp[1] * depth, persp[2] * depth];
                let b = bary[0] * pc[0] + bary[1] * pc[1] + bary[2] * pc[2];
                emit(Fragment { x: px as usize, y: py as usize, depth, bary: b });
            }
            for k in 0..3 {
                e[k] += step_x[k];
            }
        }
        for k in 0..3 {
            row_w[k] += step_y[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Pose;
    use proptest::prelude::*;

    /// Camera whose pixel grid maps view-space `(x, y)` at depth 1 to pixels
    /// `x · W/2 + W/2`; handy for placing vertices in pixel units.
    fn camera(w: usize, h: usize) -> Camera {
        Camera { pose: Pose::IDENTITY, vertical_fov: std::f64::consts::FRAC_PI_2, near: 0.01, far: 100.0, width: w, height: h }
    }

    /// View-space point that projects to pixel coordinates `(px, py)` at depth `d`.
    fn at_pixel(cam: &Camera, px: f64, py: f64, d: f64) -> DVec3 {
        cam.view_ray(px, py) * d
    }

    fn coverage(cam: &Camera, tris: &[[DVec3; 3]]) -> Vec<u32> {
        let mut counts = vec![0u32; cam.width * cam.height];
        for t in tris {
            rasterize_triangle(cam, *t, 0..cam.height, &mut |f| counts[f.y * cam.width + f.x] += 1);
        }
        counts
    }

    /// Brute-force oracle: exact point-in-triangle over pixel centers, with
    /// vertices on a half-pixel lattice so all arithmetic is integral.
    fn oracle(w: usize, h: usize, tri: [(i64, i64); 3]) -> Vec<u32> {
        let o = |a: (i64, i64), b: (i64, i64), p: (i64, i64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        let area = o(tri[0], tri[1], tri[2]);
        let mut out = vec![0; w * h];
        for j in 0..h as i64 {
            for i in 0..w as i64 {
                let p = (2 * i + 1, 2 * j + 1);
                let inside = (0..3).all(|k| {
                    let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                    let e = o(a, b, p) * area.signum();
                    let (dx, dy) = if area > 0 { (b.0 - a.0, b.1 - a.1) } else { (a.0 - b.0, a.1 - b.1) };
                    e > 0 || (e == 0 && (dy < 0 || (dy == 0 && dx > 0)))
                });
                out[(j as usize) * w + i as usize] = inside as u32;
            }
        }
        out
    }

    fn lattice_tri(cam: &Camera, t: [(i64, i64); 3]) -> [DVec3; 3] {
        t.map(|(x, y)| at_pixel(cam, x as f64 / 2.0, y as f64 / 2.0, 1.0))
    }

    #[test]
    fn half_of_two_by_two() {
        let cam = camera(2, 2);
        // Covers exactly half the viewport area with no center on an edge.
        let t = [(0, 0), (4, 0), (2, 4)];
        let got = coverage(&cam, &[lattice_tri(&cam, t)]);
        assert_eq!(got, oracle(2, 2, t));
        assert_eq!(got.iter().sum::<u32>(), 2);
    }

    #[test]
    fn diagonal_split_assigns_edge_centers_once() {
        let cam = camera(2, 2);
        let (a, b) = ([(0, 0), (4, 0), (0, 4)], [(4, 0), (4, 4), (0, 4)]);
        assert_eq!(coverage(&cam, &[lattice_tri(&cam, a)]), oracle(2, 2, a));
        assert_eq!(coverage(&cam, &[lattice_tri(&cam, b)]), oracle(2, 2, b));
        assert_eq!(coverage(&cam, &[lattice_tri(&cam, a), lattice_tri(&cam, b)]), vec![1, 1, 1, 1]);
    }

    #[test]
    fn full_screen_quad_covers_everything_once() {
        let cam = camera(16, 12);
        let c = |x, y| at_pixel(&cam, x, y, 3.0);
        let quad = [[c(0.0, 0.0), c(16.0, 0.0), c(16.0, 12.0)], [c(0.0, 0.0), c(16.0, 12.0), c(0.0, 12.0)]];
        assert!(coverage(&cam, &quad).iter().all(|&n| n == 1));
    }

    #[test]
    fn depth_is_perspective_correct() {
        let cam = camera(32, 32);
        // A plane tilted in depth: linear view depth must match the plane.
        // Vertices on the pixel lattice, so snapping leaves them in place.
        let tri = [at_pixel(&cam, 2.0, 3.0, 2.0), at_pixel(&cam, 30.0, 5.0, 6.0), at_pixel(&cam, 12.0, 30.0, 4.0)];
        let n = (tri[1] - tri[0]).cross(tri[2] - tri[0]).normalize();
        rasterize_triangle(&cam, tri, 0..32, &mut |f| {
            let ray = cam.view_ray(f.x as f64 + 0.5, f.y as f64 + 0.5);
            let t = tri[0].dot(n) / ray.dot(n);
            assert!((f.depth - t).abs() < 1e-9 * t);
            let p = tri[0] * f.bary.x + tri[1] * f.bary.y + tri[2] * f.bary.z;
            assert!((p - ray * t).length() < 1e-9);
        });
    }

    #[test]
    fn near_clipped_triangle_stays_on_screen_side() {
        let cam = camera(16, 16);
        let tri = [DVec3::new(-1.0, -1.0, -2.0), DVec3::new(1.0, -1.0, -2.0), DVec3::new(0.0, 1.0, 5.0)];
        let mut n = 0;
        rasterize_triangle(&cam, tri, 0..16, &mut |f| {
            assert!(f.depth >= cam.near - 1e-12);
            n += 1;
        });
        assert!(n > 0);
        let behind = [DVec3::new(-1.0, -1.0, 2.0), DVec3::new(1.0, -1.0, 2.0), DVec3::new(0.0, 1.0, 2.0)];
        assert_eq!(coverage(&cam, &[behind]).iter().sum::<u32>(), 0);
    }

    proptest! {
        #[test]
        fn matches_oracle_and_shared_edges_are_watertight(
            a in (-8i64..40, -8i64..40), b in (-8i64..40, -8i64..40),
            c in (-8i64..40, -8i64..40), d in (-8i64..40, -8i64..40),
        ) {
            let cam = camera(16, 16);
            let side = |q: (i64, i64)| (b.0 - a.0) * (q.1 - a.1) - (b.1 - a.1) * (q.0 - a.0);
            prop_assume!(side(c) * side(d) < 0);
            let (t1, t2) = ([a, b, c], [b, a, d]);
            let c1 = coverage(&cam, &[lattice_tri(&cam, t1)]);
            let c2 = coverage(&cam, &[lattice_tri(&cam, t2)]);
            prop_assert_eq!(&c1, &oracle(16, 16, t1));
            prop_assert_eq!(&c2, &oracle(16, 16, t2));
            // No double writes, and every center on the open shared edge
            // belongs to exactly one side.
            let on_edge = |k: usize| {
                let p = (2 * (k % 16) as i64 + 1, 2 * (k / 16) as i64 + 1);
                side(p) == 0 && {
                    let t = (p.0 - a.0) * (b.0 - a.0) + (p.1 - a.1) * (b.1 - a.1);
                    t > 0 && t < (b.0 - a.0).pow(2) + (b.1 - a.1).pow(2)
                }
            };
            for k in 0..c1.len() {
                prop_assert!(c1[k] + c2[k] <= 1);
                if on_edge(k) {
                    prop_assert_eq!(c1[k] + c2[k], 1);
                }
            }
        }
    }
}
