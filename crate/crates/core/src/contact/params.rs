use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vector9 = SVector<f64, 9>;

/// How the dual-cone impulse law is evaluated inside one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContactSolve {
    /// Single evaluation of the max-law at the contact-free predicted motion.
    ClosedForm,
    /// The max-law evaluated at the end-of-step motion it produces (its fixed
    /// point), found by minimising the equivalent convex energy. The
    /// closed-form value is the first iterate of this solve.
    #[default]
    Implicit,
}

/// Parameters of the quasi-dynamic stepper.
///
/// `robot_stiffness` and `contact_stiffness` are step-normalised: the
/// physical stiffness in N/m is the stored value divided by `h²`. With that
/// reading the robot block of the mass matrix, `h²·K_r` in SI, is exactly
/// the stored `robot_stiffness`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    pub h: f64,
    pub robot_stiffness: f64,
    pub contact_stiffness: f64,
    pub mu: f64,
    pub mass: f64,
    pub inertia: f64,
    pub facets_per_contact: usize,
    /// Contacts are generated once the gap drops below this (m).
    pub max_gap: f64,
    pub ee_radius: f64,
    /// Magnitude of gravity, acting along −z.
    pub gravity: f64,
    pub solve: ContactSolve,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            h: 0.01,
            robot_stiffness: 0.01,
            contact_stiffness: 5.0,
            mu: 0.5,
            mass: 0.2,
            inertia: 0.0005,
            facets_per_contact: 4,
            max_gap: 0.01,
            ee_radius: 0.008,
            gravity: 9.81,
            solve: ContactSolve::Implicit,
        }
    }
}

impl DynamicsParams {
    /// End-effector impedance stiffness in N/m.
    pub fn robot_stiffness_si(&self) -> f64 {
        self.robot_stiffness / (self.h * self.h)
    }

    /// Dual-cone spring stiffness in N/m.
    pub fn contact_stiffness_si(&self) -> f64 {
        self.contact_stiffness / (self.h * self.h)
    }

    /// `diag(m, m, m, i, i, i, h²K_r, h²K_r, h²K_r)`.
    pub fn mass_diagonal(&self) -> Vector9 {
        let mr = self.h * self.h * self.robot_stiffness_si();
        let (m, i) = (self.mass, self.inertia);
        Vector9::from([m, m, m, i, i, i, mr, mr, mr])
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("K_r", self.robot_stiffness),
            ("K", self.contact_stiffness),
            ("m", self.mass),
            ("i", self.inertia),
            ("max_gap", self.max_gap),
            ("ee_radius", self.ee_radius),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::InvalidArgument(format!("mu must be non-negative, got {}", self.mu)));
        }
        if self.facets_per_contact < 3 {
            return Err(Error::InvalidArgument("facets_per_contact must be at least 3".into()));
        }
        if !self.gravity.is_finite() {
            return Err(Error::InvalidArgument("gravity must be finite".into()));
        }
        Ok(())
    }
}

/// Half-space boundary `normal·x = offset`; the free side is `normal·x > offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn ground() -> Self {
        Self {
            normal: Vector3::z(),
            offset: 0.0,
        }
    }

    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Static environment: the ground plane `z = 0` plus optional walls.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub walls: Vec<Plane>,
}

impl Scene {
    /// Minimum distance from a point to any environment surface, clamped at 0.
    pub fn clearance(&self, p: &Vector3<f64>) -> f64 {
        let ground = Plane::ground().distance(p);
        self.walls
            .iter()
            .map(|w| w.distance(p))
            .fold(ground, f64::min)
            .max(0.0)
    }
}
