use nalgebra::Vector3;

use super::detect::{BodyPair, Contact, SystemState};
use super::params::{DynamicsParams, Vector9};
use crate::{Error, Result};

/// Linearised dual-cone facets of every candidate contact.
///
/// Velocity layout is `[v_object (3), ω_object world (3), v_ee (3)]`.
#[derive(Clone, Debug, Default)]
pub struct FacetSystem {
    /// Row `j` maps system velocity to the rate of facet gap `j`.
    pub jacobian: Vec<Vector9>,
    pub phi: Vec<f64>,
    /// Unit force generator of each facet, acting on the first body.
    pub directions: Vec<Vector3<f64>>,
    /// Index of the owning contact for each facet.
    pub contact_index: Vec<usize>,
}

impl FacetSystem {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Generators `e_j = (n + μ t_j)/‖n + μ t_j‖` with `t_j` evenly spaced.
pub fn facet_directions(contact: &Contact, mu: f64, count: usize) -> Vec<Vector3<f64>> {
    let [t1, t2] = contact.tangents;
    (0..count)
        .map(|j| {
            let angle = std::f64::consts::TAU * j as f64 / count as f64;
            let t = t1 * angle.cos() + t2 * angle.sin();
            (contact.normal + t * mu).normalize()
        })
        .collect()
}

pub fn build_facets(contacts: &[Contact], state: &SystemState, params: &DynamicsParams) -> Result<FacetSystem> {
    let center = state.object_pose.position;
    let n_d = params.facets_per_contact;
    let mut sys = FacetSystem {
        jacobian: Vec::with_capacity(contacts.len() * n_d),
        phi: Vec::with_capacity(contacts.len() * n_d),
        directions: Vec::with_capacity(contacts.len() * n_d),
        contact_index: Vec::with_capacity(contacts.len() * n_d),
    };
    for (ci, c) in contacts.iter().enumerate() {
        let len = c.normal.norm();
        if !(len.is_finite() && (len - 1.0).abs() < 1e-6) {
            return Err(Error::Internal(format!("contact {ci} has a degenerate normal")));
        }
        let r = c.point - center;
        for e in facet_directions(c, params.mu, n_d) {
            // Object point velocity is v + ω × r, so eᵀ(v + ω × r) = e·v + (r × e)·ω.
            let lever = r.cross(&e);
            let row = match c.pair {
                BodyPair::EeObject => Vector9::from([-e.x, -e.y, -e.z, -lever.x, -lever.y, -lever.z, e.x, e.y, e.z]),
                BodyPair::ObjectGround | BodyPair::ObjectWall(_) => {
                    Vector9::from([e.x, e.y, e.z, lever.x, lever.y, lever.z, 0.0, 0.0, 0.0])
                }
            };
            sys.jacobian.push(row);
            sys.phi.push(c.gap * c.normal.dot(&e));
            sys.directions.push(e);
            sys.contact_index.push(ci);
        }
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::detect::tangent_basis;
    use crate::geometry::Pose;

    fn contact(pair: BodyPair, normal: Vector3<f64>, gap: f64) -> Contact {
        Contact {
            pair,
            point: Vector3::new(0.05, 0.0, 0.0),
            normal,
            gap,
            tangents: tangent_basis(&normal),
        }
    }

    fn state() -> SystemState {
        SystemState::new(Pose::identity(), Vector3::new(0.07, 0.0, 0.0))
    }

    #[test]
    fn four_unit_directions_per_contact() {
        let params = DynamicsParams::default();
        let c = contact(BodyPair::EeObject, Vector3::x(), 0.002);
        let sys = build_facets(&[c, c], &state(), &params).unwrap();
        assert_eq!(sys.len(), 8);
        for e in &sys.directions {
            assert!((e.norm() - 1.0).abs() < 1e-14);
            // On the boundary of the friction cone: tangential/normal = μ.
            let n = e.dot(&Vector3::x());
            assert!(((e - Vector3::x() * n).norm() / n - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn frictionless_limit() {
        let params = DynamicsParams {
            mu: 0.0,
            ..DynamicsParams::default()
        };
        let c = contact(BodyPair::ObjectGround, Vector3::z(), -0.003);
        let sys = build_facets(&[c], &state(), &params).unwrap();
        for (e, phi) in sys.directions.iter().zip(&sys.phi) {
            assert_eq!(*e, Vector3::z());
            assert_eq!(*phi, -0.003);
        }
    }

    #[test]
    fn normal_approach_rate() {
        let params = DynamicsParams::default();
        let n = Vector3::x();
        let c = contact(BodyPair::EeObject, n, 0.001);
        let sys = build_facets(&[c], &state(), &params).unwrap();
        // End-effector moving towards the face at 0.2 m/s.
        let v_ee = Vector3::new(-0.2, 0.0, 0.0);
        let mut v = Vector9::zeros();
        v.fixed_rows_mut::<3>(6).copy_from(&v_ee);
        for (row, e) in sys.jacobian.iter().zip(&sys.directions) {
            let expected = n.dot(e) * n.dot(&v_ee);
            assert!((row.dot(&v) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_normal_is_internal_error() {
        let params = DynamicsParams::default();
        let mut c = contact(BodyPair::ObjectGround, Vector3::z(), 0.0);
        c.normal = Vector3::zeros();
        assert!(matches!(build_facets(&[c], &state(), &params), Err(Error::Internal(_))));
    }
}
