//! Small numeric helpers shared across passes: rigid poses, colors and
//! deterministic sample sequences.

use glam::{DQuat, DVec3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear RGB triple. Channels are unbounded for radiance, `[0, 1]` for
/// reflectances.
pub type Rgb = DVec3;

pub const QUAT_NORM_TOLERANCE: f64 = 1e-6;

/// Similarity transform applied as scale, then rotate, then translate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub rotation: DQuat,
    pub translation: DVec3,
    pub scale: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose {
    pub const IDENTITY: Pose = Pose { rotation: DQuat::IDENTITY, translation: DVec3::ZERO, scale: 1.0 };

    pub fn new(rotation: DQuat, translation: DVec3, scale: f64) -> Self {
        Self { rotation, translation, scale }
    }

    pub fn from_translation(translation: DVec3) -> Self {
        Self { translation, ..Self::IDENTITY }
    }

    pub fn from_rotation(rotation: DQuat) -> Self {
        Self { rotation, ..Self::IDENTITY }
    }

    /// Camera-style pose at `eye` whose local -z axis points at `target`.
    pub fn looking_at(eye: DVec3, target: DVec3, up: DVec3) -> Self {
        let forward = (target - eye).normalize();
        let up = if forward.cross(up).length_squared() < 1e-12 {
            // Looking straight along `up`; any perpendicular axis works.
            forward.any_orthonormal_vector()
        } else {
            up
        };
        let right = forward.cross(up).normalize();
        let true_up = right.cross(forward);
        let basis = glam::DMat3::from_cols(right, true_up, -forward);
        Self { rotation: DQuat::from_mat3(&basis).normalize(), translation: eye, scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.rotation.length();
        if !norm.is_finite() || (norm - 1.0).abs() > QUAT_NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!("pose rotation is not a unit quaternion (|q| = {norm})")));
        }
        if !self.translation.is_finite() {
            return Err(Error::InvalidArgument("pose translation is not finite".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidArgument(format!("pose scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }

    #[inline]
    pub fn transform_point(&self, p: DVec3) -> DVec3 {
        self.rotation * (p * self.scale) + self.translation
    }

    /// Rotation only: uniform scale never changes a direction.
    #[inline]
    pub fn transform_direction(&self, d: DVec3) -> DVec3 {
        self.rotation * d
    }

    /// `self ∘ child`: the pose of `child` expressed in the frame `self` maps from.
    pub fn compose(&self, child: &Pose) -> Pose {
        Pose {
            rotation: (self.rotation * child.rotation).normalize(),
            translation: self.transform_point(child.translation),
            scale: self.scale * child.scale,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv_rot = self.rotation.inverse();
        let inv_scale = 1.0 / self.scale;
        Pose { rotation: inv_rot, translation: -(inv_rot * self.translation) * inv_scale, scale: inv_scale }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

/// Wire form of a pose: quaternion stored as `[w, x, y, z]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PoseRepr {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default = "identity_wxyz")]
    pub rotation_quat_wxyz: [f64; 4],
    #[serde(default = "one")]
    pub scale: f64,
}

fn identity_wxyz() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

fn one() -> f64 {
    1.0
}

impl From<PoseRepr> for Pose {
    fn from(r: PoseRepr) -> Self {
        let [w, x, y, z] = r.rotation_quat_wxyz;
        Pose { rotation: DQuat::from_xyzw(x, y, z, w), translation: DVec3::from_array(r.translation), scale: r.scale }
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        PoseRepr {
            translation: p.translation.to_array(),
            rotation_quat_wxyz: [p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z],
            scale: p.scale,
        }
    }
}

/// Rec. 709 luminance of a linear color.
#[inline]
pub fn luminance(c: Rgb) -> f64 {
    0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z
}

/// SplitMix64 finalizer; used as a stateless hash for per-pixel seeds.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform double in `[0, 1)` from the top 53 bits of a hash.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn radical_inverse_vdc(bits: u32) -> f64 {
    bits.reverse_bits() as f64 * (1.0 / 4_294_967_296.0)
}

/// Hammersley point `i` of `n`, rotated by a Cranley-Patterson shift derived
/// from `seed` so different seeds give different but equally well-spread sets.
#[inline]
pub fn hammersley(i: u32, n: u32, seed: u64) -> (f64, f64) {
    let (mut u, mut v) = (i as f64 / n as f64, radical_inverse_vdc(i));
    if seed != 0 {
        let h = mix64(seed);
        u = (u + unit_f64(h)).fract();
        v = (v + unit_f64(mix64(h))).fract();
    }
    (u, v)
}

/// Orthonormal basis `(tangent, bitangent)` around unit `n`.
#[inline]
pub fn tangent_frame(n: DVec3) -> (DVec3, DVec3) {
    let up = if n.z.abs() < 0.999 { DVec3::Z } else { DVec3::X };
    let t = up.cross(n).normalize();
    (t, n.cross(t))
}

#[inline]
pub fn to_world(local: DVec3, n: DVec3) -> DVec3 {
    let (t, b) = tangent_frame(n);
    t * local.x + b * local.y + n * local.z
}

/// Cosine-weighted direction in the `+z` hemisphere.
#[inline]
pub fn cosine_hemisphere(u: f64, v: f64) -> DVec3 {
    let r = u.sqrt();
    let phi = 2.0 * std::f64::consts::PI * v;
    DVec3::new(r * phi.cos(), r * phi.sin(), (1.0 - u).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inverse_undoes_pose() {
        let p = Pose::new(DQuat::from_rotation_y(0.7), DVec3::new(1.0, -2.0, 3.0), 2.5);
        let x = DVec3::new(0.3, 0.4, -5.0);
        let back = p.inverse().transform_point(p.transform_point(x));
        assert_abs_diff_eq!(back.x, x.x, epsilon = 1e-12);
        assert_abs_diff_eq!(back.z, x.z, epsilon = 1e-12);
    }

    #[test]
    fn looking_at_points_minus_z_at_target() {
        let p = Pose::looking_at(DVec3::new(0.0, 0.0, 5.0), DVec3::ZERO, DVec3::Y);
        let fwd = p.transform_direction(-DVec3::Z);
        assert_abs_diff_eq!(fwd.z, -1.0, epsilon = 1e-12);
        let p = Pose::looking_at(DVec3::new(0.0, 5.0, 0.0), DVec3::ZERO, DVec3::Y);
        assert_abs_diff_eq!(p.transform_direction(-DVec3::Z).y, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_pose_rejected() {
        let mut p = Pose::IDENTITY;
        p.scale = 0.0;
        assert!(p.validate().is_err());
        p = Pose::IDENTITY;
        p.rotation = DQuat::from_xyzw(0.0, 0.0, 0.0, 2.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn pose_wire_form_is_wxyz() {
        let p: Pose = serde_json::from_str(r#"{"rotation_quat_wxyz":[0,0,0,1]}"#).unwrap();
        assert_eq!(p.rotation, DQuat::from_xyzw(0.0, 0.0, 1.0, 0.0));
        assert_eq!(p.scale, 1.0);
    }
}
