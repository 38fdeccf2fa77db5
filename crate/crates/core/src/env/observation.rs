use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::config::{RewardWeights, SuccessThresholds};
use crate::contact::{Scene, SystemState};
use crate::geometry::{ObjectModel, Pose};

/// Object-centric observation, every entry divided by the object's
/// characteristic size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Keypoints in the object frame.
    pub keypoints: Vec<Vector3<f64>>,
    /// Per-keypoint displacement to its target location, object frame.
    pub goal_flow: Vec<Vector3<f64>>,
    /// Distance of each world keypoint to the nearest environment surface.
    pub clearance: Vec<f64>,
}

impl Observation {
    /// Mean scaled flow norm, the negated dense reward.
    pub fn mean_flow(&self) -> f64 {
        if self.goal_flow.is_empty() {
            return 0.0;
        }
        self.goal_flow.iter().map(|d| d.norm()).sum::<f64>() / self.goal_flow.len() as f64
    }
}

pub fn build_observation(state: &SystemState, object: &ObjectModel, target: &Pose, scene: &Scene) -> Observation {
    let current = &state.object_pose;
    let relative = current.inverse().compose(target);
    let scale = object.characteristic_size;
    let mut obs = Observation {
        keypoints: Vec::with_capacity(object.keypoints.len()),
        goal_flow: Vec::with_capacity(object.keypoints.len()),
        clearance: Vec::with_capacity(object.keypoints.len()),
    };
    for p in &object.keypoints {
        obs.keypoints.push(p / scale);
        obs.goal_flow.push((relative.transform_point(p) - p) / scale);
        obs.clearance.push(scene.clearance(&current.transform_point(p)) / scale);
    }
    obs
}

/// `(w1·r_dense + w2·r_target)(1 + r_feasible) + w3·r_feasible`, with
/// `r_dense = −mean_flow`.
pub fn compute_reward(mean_flow: f64, at_target: bool, infeasible: bool, weights: &RewardWeights) -> f64 {
    let r_dense = -mean_flow;
    let r_target = if at_target { 1.0 } else { 0.0 };
    let r_feasible = if infeasible { -1.0 } else { 0.0 };
    (weights.w1 * r_dense + weights.w2 * r_target) * (1.0 + r_feasible) + weights.w3 * r_feasible
}

/// Both thresholds, strictly.
pub fn check_success(pose: &Pose, target: &Pose, thresholds: &SuccessThresholds) -> bool {
    pose.translation_error(target) < thresholds.translation && pose.rotation_distance_to(target) < thresholds.rotation
}
