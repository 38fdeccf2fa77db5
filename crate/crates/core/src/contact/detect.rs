use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::params::{DynamicsParams, Plane, Scene};
use crate::geometry::{ObjectModel, Pose};

/// Object pose plus end-effector point: the nine configuration DOFs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub object_pose: Pose,
    pub ee_position: Vector3<f64>,
}

impl SystemState {
    pub fn new(object_pose: Pose, ee_position: Vector3<f64>) -> Self {
        Self {
            object_pose,
            ee_position,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.object_pose.is_finite() && self.ee_position.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodyPair {
    /// First body end-effector, second body object.
    EeObject,
    /// First body object, second body ground.
    ObjectGround,
    /// First body object, second body the wall with this index.
    ObjectWall(usize),
}

/// A candidate contact.
///
/// `normal` points into the free half-space of the second body, so the gap
/// grows when the first body moves along it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub pair: BodyPair,
    /// World point on the second body's surface (ee pairs) or the object
    /// corner (environment pairs).
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// Signed gap, negative in penetration.
    pub gap: f64,
    pub tangents: [Vector3<f64>; 2],
}

/// Orthonormal tangent pair completing `n` to a right-handed frame.
pub fn tangent_basis(n: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = (helper - n * n.dot(&helper)).normalize();
    let t2 = n.cross(&t1);
    [t1, t2]
}

fn plane_contact(pair: BodyPair, plane: &Plane, point: Vector3<f64>) -> Contact {
    Contact {
        pair,
        point,
        normal: plane.normal,
        gap: plane.distance(&point),
        tangents: tangent_basis(&plane.normal),
    }
}

/// All candidate contacts within `max_gap`, ordered: end-effector contacts
/// (box order), ground corners (asset order), then wall corners.
pub fn detect_contacts(
    state: &SystemState,
    object: &ObjectModel,
    scene: &Scene,
    params: &DynamicsParams,
) -> Vec<Contact> {
    let mut out = Vec::new();
    let pose = &state.object_pose;
    let ee_local = pose.inverse_transform_point(&state.ee_position);

    for (bi, b) in object.boxes.iter().enumerate() {
        let q = b.closest(&ee_local);
        let gap = q.distance - params.ee_radius;
        if gap > params.max_gap {
            continue;
        }
        // A witness buried inside another piece is not on the union surface.
        let buried = object
            .boxes
            .iter()
            .enumerate()
            .any(|(j, other)| j != bi && other.signed_distance(&q.point) < -1e-9);
        if buried {
            continue;
        }
        let normal = pose.rotate_vector(&q.normal);
        out.push(Contact {
            pair: BodyPair::EeObject,
            point: pose.transform_point(&q.point),
            normal,
            gap,
            tangents: tangent_basis(&normal),
        });
    }

    let corners: Vec<Vector3<f64>> = object
        .corners()
        .filter(|c| object.signed_distance(c) > -1e-9)
        .map(|c| pose.transform_point(&c))
        .collect();
    let ground = Plane::ground();
    for c in &corners {
        if ground.distance(c) <= params.max_gap {
            out.push(plane_contact(BodyPair::ObjectGround, &ground, *c));
        }
    }
    for (wi, wall) in scene.walls.iter().enumerate() {
        for c in &corners {
            if wall.distance(c) <= params.max_gap {
                out.push(plane_contact(BodyPair::ObjectWall(wi), wall, *c));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoxPiece, KeypointMode};

    fn cube() -> ObjectModel {
        ObjectModel::new(
            "cube",
            vec![BoxPiece::new(Vector3::zeros(), Vector3::repeat(0.05))],
            0.2,
            0.0005,
            0.1,
            KeypointMode::AllFaces,
            0,
        )
        .unwrap()
    }

    #[test]
    fn ee_near_face_gives_one_contact() {
        let params = DynamicsParams::default();
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, 1.0));
        let ee = Vector3::new(0.05 + params.ee_radius + 0.001, 0.01, 1.0);
        let contacts = detect_contacts(&SystemState::new(pose, ee), &cube(), &Scene::default(), &params);
        assert_eq!(contacts.len(), 1);
        let c = contacts[0];
        assert_eq!(c.pair, BodyPair::EeObject);
        assert!((c.gap - 0.001).abs() < 1e-12);
        assert!((c.normal - Vector3::x()).norm() < 1e-12);
        assert!(c.normal.dot(&c.tangents[0]).abs() < 1e-15);
        assert!(c.tangents[0].dot(&c.tangents[1]).abs() < 1e-15);
    }

    #[test]
    fn far_apart_gives_nothing() {
        let params = DynamicsParams::default();
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, 1.0));
        let ee = Vector3::new(1.0, 0.0, 1.0);
        assert!(detect_contacts(&SystemState::new(pose, ee), &cube(), &Scene::default(), &params).is_empty());
    }

    #[test]
    fn resting_cube_has_four_ground_contacts() {
        let params = DynamicsParams::default();
        let pose = Pose::from_translation(Vector3::new(0.1, -0.2, 0.05));
        let contacts = detect_contacts(
            &SystemState::new(pose, Vector3::new(0.0, 0.0, 0.5)),
            &cube(),
            &Scene::default(),
            &params,
        );
        assert_eq!(contacts.len(), 4);
        assert!(contacts
            .iter()
            .all(|c| c.pair == BodyPair::ObjectGround && c.gap.abs() <= 1e-9));
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        for n in [Vector3::x(), Vector3::z(), Vector3::new(1.0, 2.0, -3.0).normalize()] {
            let [t1, t2] = tangent_basis(&n);
            assert!((t1.norm() - 1.0).abs() < 1e-14 && (t2.norm() - 1.0).abs() < 1e-14);
            assert!(t1.dot(&n).abs() < 1e-14 && t2.dot(&n).abs() < 1e-14 && t1.dot(&t2).abs() < 1e-14);
        }
    }
}
