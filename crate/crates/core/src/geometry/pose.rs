use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Tolerance used when validating caller-supplied quaternions.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Rigid transform: rotation followed by translation, `x ↦ R·x + t`.
///
/// The orientation is stored as a unit quaternion. When written to files or
/// the wire it is encoded scalar-first, `[w, x, y, z]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn from_translation(position: Vector3<f64>) -> Self {
        Self::new(position, UnitQuaternion::identity())
    }

    /// Planar pose: translation plus a rotation of `yaw` radians about +z.
    pub fn from_xy_yaw(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self::new(
            Vector3::new(x, y, z),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
        )
    }

    /// Scalar-first quaternion components.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn from_position_wxyz(position: [f64; 3], wxyz: [f64; 4]) -> Result<Self> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        check_unit(&q)?;
        // Keep already-unit input bit-exact so serialized poses round-trip.
        let orientation = if (q.norm() - 1.0).abs() <= 4.0 * f64::EPSILON {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Ok(Self::new(Vector3::from(position), orientation))
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let mut orientation = self.orientation * other.orientation;
        orientation.renormalize();
        Pose {
            position: self.orientation * other.position + self.position,
            orientation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose {
            position: -(inv * self.position),
            orientation: inv,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * p + self.position
    }

    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.inverse_transform_vector(&(p - self.position))
    }

    pub fn rotate_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * v
    }

    pub fn translation_error(&self, other: &Pose) -> f64 {
        (self.position - other.position).norm()
    }

    /// Rotation distance `1 − ⟨r, r̄⟩²` to another pose's orientation.
    pub fn rotation_distance_to(&self, other: &Pose) -> f64 {
        unit_rotation_distance(&self.orientation, &other.orientation)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
    }
}

/// Maps an object-frame point into the world frame.
pub fn transform_keypoint_to_world(pose: &Pose, p: &Vector3<f64>) -> Vector3<f64> {
    pose.transform_point(p)
}

fn check_unit(q: &Quaternion<f64>) -> Result<()> {
    let n = q.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "quaternion norm {n} is not within {UNIT_NORM_TOLERANCE} of 1"
        )));
    }
    Ok(())
}

/// `1 − ⟨r, r̄⟩²` for raw quaternions; both must be unit-norm.
///
/// Symmetric, in `[0, 1]`, and blind to the quaternion double cover.
pub fn rotation_distance(r: &Quaternion<f64>, r_bar: &Quaternion<f64>) -> Result<f64> {
    check_unit(r)?;
    check_unit(r_bar)?;
    let dot = r.coords.dot(&r_bar.coords);
    Ok((1.0 - dot * dot).clamp(0.0, 1.0))
}

pub fn unit_rotation_distance(r: &UnitQuaternion<f64>, r_bar: &UnitQuaternion<f64>) -> f64 {
    let dot = r.coords.dot(&r_bar.coords);
    (1.0 - dot * dot).clamp(0.0, 1.0)
}

/// Left-multiplied exponential-map update `exp(δθ) ⊗ q`, renormalised.
pub fn integrate_orientation(q: &UnitQuaternion<f64>, delta: &Vector3<f64>) -> UnitQuaternion<f64> {
    let mut out = UnitQuaternion::from_scaled_axis(*delta) * q;
    out.renormalize();
    out
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PoseRepr {
            position: self.position.into(),
            orientation: self.wxyz(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        Pose::from_position_wxyz(repr.position, repr.orientation)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn q_axis_angle(axis: Vector3<f64>, angle: f64) -> Quaternion<f64> {
        *UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).quaternion()
    }

    #[test]
    fn rotation_distance_examples() {
        let id = Quaternion::identity();
        assert_eq!(rotation_distance(&id, &id).unwrap(), 0.0);
        let flip_x = q_axis_angle(Vector3::x(), PI);
        assert!((rotation_distance(&id, &flip_x).unwrap() - 1.0).abs() < 1e-12);
        // dot = cos(45°) = √2/2, so 1 − 1/2.
        let quarter_z = q_axis_angle(Vector3::z(), FRAC_PI_2);
        assert!((rotation_distance(&id, &quarter_z).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rotation_distance_rejects_non_unit() {
        let q = Quaternion::new(1.1, 0.0, 0.0, 0.0);
        assert!(matches!(
            rotation_distance(&q, &Quaternion::identity()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn keypoint_transform_examples() {
        let p = Vector3::new(0.05, 0.0, 0.0);
        assert_eq!(transform_keypoint_to_world(&Pose::identity(), &p), p);
        let shifted = Pose::from_translation(Vector3::new(0.1, 0.0, 0.0));
        assert!((transform_keypoint_to_world(&shifted, &p) - Vector3::new(0.15, 0.0, 0.0)).norm() < 1e-15);
        let half_turn = Pose::from_xy_yaw(0.0, 0.0, 0.0, PI);
        assert!((transform_keypoint_to_world(&half_turn, &p) - Vector3::new(-0.05, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn serde_is_scalar_first() {
        let pose = Pose::from_xy_yaw(0.1, 0.2, 0.3, FRAC_PI_2);
        let json = serde_json::to_string(&pose).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let w = v["orientation"][0].as_f64().unwrap();
        assert!((w - (FRAC_PI_2 / 2.0).cos()).abs() < 1e-15);
        let back: Pose = serde_json::from_str(&json).unwrap();
        assert!(back.translation_error(&pose) < 1e-15);
        assert!(back.rotation_distance_to(&pose) < 1e-15);
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            prop::array::uniform3(-1.0f64..1.0),
            -PI..PI,
        )
            .prop_filter_map("degenerate axis", |(t, a, angle)| {
                let axis = Vector3::from(a);
                (axis.norm() > 1e-3).then(|| {
                    Pose::new(
                        Vector3::from(t),
                        UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle),
                    )
                })
            })
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(p in arb_pose()) {
            let e = p.compose(&p.inverse());
            prop_assert!(e.position.norm() < 1e-9);
            prop_assert!(e.rotation_distance_to(&Pose::identity()) < 1e-9);
            prop_assert!((e.orientation.norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn compose_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!(l.translation_error(&r) < 1e-9);
            prop_assert!(l.rotation_distance_to(&r) < 1e-9);
        }

        #[test]
        fn rotation_distance_sign_and_symmetry(a in arb_pose(), b in arb_pose()) {
            let qa = *a.orientation.quaternion();
            let qb = *b.orientation.quaternion();
            prop_assert!(rotation_distance(&qa, &-qa).unwrap() < 1e-12);
            let ab = rotation_distance(&qa, &qb).unwrap();
            let ba = rotation_distance(&qb, &qa).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
        }
    }
}
