use nalgebra::{Cholesky, SMatrix, Vector3};

use super::detect::{detect_contacts, Contact, SystemState};
use super::facets::{build_facets, FacetSystem};
use super::params::{ContactSolve, DynamicsParams, Scene, Vector9};
use crate::geometry::{integrate_orientation, ObjectModel, Pose};
use crate::{Error, Result};

type Matrix9 = SMatrix<f64, 9, 9>;

const MAX_NEWTON_ITERATIONS: usize = 60;
const GRADIENT_TOLERANCE: f64 = 1e-10;

/// External force and torque on the object (world frame, about its origin).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub next_state: SystemState,
    /// Facet forces, one per facet of `facets`.
    pub lambda: Vec<f64>,
    /// Per-contact force `Σ_j λ_j e_j` on the contact's first body (N).
    pub contact_forces: Vec<Vector3<f64>>,
    pub contacts: Vec<Contact>,
    pub facets: FacetSystem,
    /// `h·v⁺`.
    pub displacement: Vector9,
}

/// Generalised force `τ(u)`: object gravity and external wrench, then the
/// end-effector impedance force `K_r·u`.
pub fn generalized_force(u: &Vector3<f64>, params: &DynamicsParams, external: &Wrench) -> Vector9 {
    let mut tau = Vector9::zeros();
    let gravity = Vector3::new(0.0, 0.0, -params.mass * params.gravity);
    tau.fixed_rows_mut::<3>(0).copy_from(&(gravity + external.force));
    tau.fixed_rows_mut::<3>(3).copy_from(&external.torque);
    tau.fixed_rows_mut::<3>(6).copy_from(&(u * params.robot_stiffness_si()));
    tau
}

fn facet_forces(facets: &FacetSystem, disp: &Vector9, stiffness: f64) -> Vec<f64> {
    facets
        .jacobian
        .iter()
        .zip(&facets.phi)
        .map(|(row, phi)| (-stiffness * (phi + row.dot(disp))).max(0.0))
        .collect()
}

fn energy(disp: &Vector9, md: &Vector9, tau: &Vector9, facets: &FacetSystem, stiffness: f64) -> f64 {
    let inertial = 0.5 * disp.component_mul(md).dot(disp) - tau.dot(disp);
    let springs: f64 = facets
        .jacobian
        .iter()
        .zip(&facets.phi)
        .map(|(row, phi)| {
            let pen = (-(phi + row.dot(disp))).max(0.0);
            pen * pen
        })
        .sum();
    inertial + 0.5 * stiffness * springs
}

/// Minimises `½ΔᵀM̄Δ − τᵀΔ + K/2·Σ max(−(φ̃ + J̃Δ), 0)²` with `M̄ = M/h²`.
/// Its stationarity condition is `MΔ/h² = τ + J̃ᵀλ`, the impulse law with λ
/// evaluated at the end of the step.
fn implicit_displacement(free: Vector9, md: &Vector9, tau: &Vector9, facets: &FacetSystem, stiffness: f64) -> Result<Vector9> {
    let mut disp = free;
    let mut active: Vec<bool> = Vec::new();
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let residual: Vec<f64> = facets
            .jacobian
            .iter()
            .zip(&facets.phi)
            .map(|(row, phi)| phi + row.dot(&disp))
            .collect();
        let now_active: Vec<bool> = residual.iter().map(|s| *s < 0.0).collect();
        let mut grad = disp.component_mul(md) - tau;
        let mut hess = Matrix9::from_diagonal(md);
        for ((row, s), on) in facets.jacobian.iter().zip(&residual).zip(&now_active) {
            if *on {
                grad += row * (stiffness * s);
                hess += row * row.transpose() * stiffness;
            }
        }
        let scale = 1.0 + tau.amax();
        if grad.amax() <= GRADIENT_TOLERANCE * scale && now_active == active {
            return Ok(disp);
        }
        let chol = Cholesky::new(hess).ok_or_else(|| Error::Internal("contact Hessian is not positive definite".into()))?;
        let step = -chol.solve(&grad);
        let e0 = energy(&disp, md, tau, facets, stiffness);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let trial = disp + step * t;
            if energy(&trial, md, tau, facets, stiffness) <= e0 + 1e-4 * t * slope || t < 1e-12 {
                disp = trial;
                break;
            }
            t *= 0.5;
        }
        if step.amax() * t < 1e-16 {
            return Ok(disp);
        }
        active = now_active;
    }
    Ok(disp)
}

/// Contact-free displacement `h²M⁻¹τ(u)`.
pub fn free_displacement(tau: &Vector9, params: &DynamicsParams) -> Vector9 {
    let h2 = params.h * params.h;
    tau.component_div(&params.mass_diagonal()) * h2
}

/// One quasi-dynamic complementarity-free step.
///
/// `λ = max(−K(φ̃ + J̃Δ), 0)` and `Mv⁺ = hτ(u) + hJ̃ᵀλ`, `Δ = hv⁺`. In
/// [`ContactSolve::ClosedForm`] the law is evaluated once at `Δ = h²M⁻¹τ`;
/// in [`ContactSolve::Implicit`] at its own fixed point. Velocity does not
/// persist between steps.
pub fn comfree_step(
    state: &SystemState,
    u: &Vector3<f64>,
    params: &DynamicsParams,
    object: &ObjectModel,
    scene: &Scene,
    external: &Wrench,
) -> Result<StepResult> {
    if !state.is_finite() {
        return Err(Error::InvalidArgument("state has non-finite coordinates".into()));
    }
    if !u.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("command has non-finite components".into()));
    }
    if !(external.force.iter().chain(external.torque.iter()).all(|v| v.is_finite())) {
        return Err(Error::InvalidArgument("external wrench has non-finite components".into()));
    }

    let contacts = detect_contacts(state, object, scene, params);
    let facets = build_facets(&contacts, state, params)?;
    let tau = generalized_force(u, params, external);
    let md = params.mass_diagonal() / (params.h * params.h);
    let free = free_displacement(&tau, params);
    let stiffness = params.contact_stiffness_si();

    let disp = if facets.is_empty() {
        free
    } else {
        match params.solve {
            ContactSolve::ClosedForm => {
                let lambda = facet_forces(&facets, &free, stiffness);
                let mut push = Vector9::zeros();
                for (row, l) in facets.jacobian.iter().zip(&lambda) {
                    push += row * *l;
                }
                free + push.component_div(&md)
            }
            ContactSolve::Implicit => implicit_displacement(free, &md, &tau, &facets, stiffness)?,
        }
    };

    let lambda = match params.solve {
        ContactSolve::ClosedForm => facet_forces(&facets, &free, stiffness),
        ContactSolve::Implicit => facet_forces(&facets, &disp, stiffness),
    };
    let mut contact_forces = vec![Vector3::zeros(); contacts.len()];
    for ((l, e), ci) in lambda.iter().zip(&facets.directions).zip(&facets.contact_index) {
        contact_forces[*ci] += e * *l;
    }

    let pose = &state.object_pose;
    let next_pose = Pose::new(
        pose.position + disp.fixed_rows::<3>(0),
        integrate_orientation(&pose.orientation, &disp.fixed_rows::<3>(3).into_owned()),
    );
    let next_state = SystemState::new(next_pose, state.ee_position + disp.fixed_rows::<3>(6));
    if !next_state.is_finite() {
        return Err(Error::Internal("step produced a non-finite state".into()));
    }
    Ok(StepResult {
        next_state,
        lambda,
        contact_forces,
        contacts,
        facets,
        displacement: disp,
    })
}
