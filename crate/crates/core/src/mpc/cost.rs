use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::params::MpcParams;
use crate::contact::{comfree_step, Scene, SystemState, Wrench};
use crate::geometry::{unit_rotation_distance, ObjectModel, Pose};
use crate::Result;

/// The MPC-side view of a contact intention: where to touch and how hard to
/// pull the object toward its target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntentionCondition {
    /// Contact location in the object frame.
    pub contact_point_obj: Vector3<f64>,
    pub w_pos: f64,
    pub w_ori: f64,
    pub target_pose: Pose,
}

/// `w_c·‖ee − T(c̄)‖²`.
pub fn running_cost(ee_pos: &Vector3<f64>, object_pose: &Pose, intention: &IntentionCondition, w_c: f64) -> f64 {
    let contact = object_pose.transform_point(&intention.contact_point_obj);
    w_c * (ee_pos - contact).norm_squared()
}

/// `w_pos·‖p − p̄‖² + w_ori·(1 − ⟨r, r̄⟩²)`.
pub fn terminal_cost(object_pose: &Pose, intention: &IntentionCondition) -> f64 {
    let target = &intention.target_pose;
    let e_pos = (object_pose.position - target.position).norm_squared();
    let e_ori = unit_rotation_distance(&object_pose.orientation, &target.orientation);
    intention.w_pos * e_pos + intention.w_ori * e_ori
}

/// Clamps every component to the control box.
pub fn clamp_command(u: &Vector3<f64>, range: f64) -> Vector3<f64> {
    u.map(|v| v.clamp(-range, range))
}

/// Simulates the (clamped) sequence and returns the cost and the `H + 1`
/// visited states.
pub fn rollout(
    state: &SystemState,
    u_sequence: &[Vector3<f64>],
    intention: &IntentionCondition,
    params: &MpcParams,
    object: &ObjectModel,
    scene: &Scene,
) -> Result<(f64, Vec<SystemState>)> {
    let mut states = Vec::with_capacity(u_sequence.len() + 1);
    let mut s = *state;
    let mut cost = 0.0;
    states.push(s);
    for u in u_sequence {
        cost += running_cost(&s.ee_position, &s.object_pose, intention, params.w_c);
        let u = clamp_command(u, params.control_range_scale);
        s = comfree_step(&s, &u, &params.dynamics, object, scene, &Wrench::default())?.next_state;
        states.push(s);
    }
    cost += terminal_cost(&s.object_pose, intention);
    Ok((cost, states))
}

/// `Σ_{t<H} running(s_t) + terminal(s_H)` under the stepper recursion.
pub fn rollout_cost(
    state: &SystemState,
    u_sequence: &[Vector3<f64>],
    intention: &IntentionCondition,
    params: &MpcParams,
    object: &ObjectModel,
    scene: &Scene,
) -> Result<f64> {
    rollout(state, u_sequence, intention, params, object, scene).map(|(c, _)| c)
}
