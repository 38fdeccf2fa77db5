use std::sync::Arc;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::assets::AssetLibrary;
use super::config::{PerturbationKind, PoseDistribution, TaskConfig};
use super::observation::{build_observation, check_success, compute_reward, Observation};
use crate::contact::{comfree_step, BodyPair, DynamicsParams, Scene, SystemState, Wrench};
use crate::geometry::{ObjectModel, Pose};
use crate::mpc::{clamp_command, IntentionCondition, SamplingMpc};
use crate::policy::ContactIntention;
use crate::{Error, Result};

/// Half-width of the box the object must stay inside (m).
pub const WORKSPACE_LIMIT: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Decisions taken so far, including this one.
    pub decision: usize,
    pub object_pose: Pose,
    /// Mean scaled keypoint flow after the decision.
    pub mean_flow: f64,
    /// The selected keypoint was below the feasibility threshold.
    pub infeasible: bool,
    /// Control steps spent in this decision (reposition plus MPC).
    pub control_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
    pub info: StepInfo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Reposition,
    Mpc,
}

/// A contact as seen at the start of a logged control step, with the force
/// it transmitted to its first body.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub pair: BodyPair,
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub gap: f64,
    pub force: Vector3<f64>,
}

/// One line of a trajectory log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrajectoryRecord {
    Episode {
        seed: u64,
        object: String,
        initial_state: SystemState,
        target_pose: Pose,
    },
    Control {
        decision: usize,
        t: usize,
        phase: Phase,
        u: Vector3<f64>,
        state: SystemState,
        contacts: Vec<ContactRecord>,
    },
    Decision {
        decision: usize,
        intention: ContactIntention,
        reward: f64,
        done: bool,
        success: bool,
        infeasible: bool,
        mean_flow: f64,
        object_pose: Pose,
    },
}

/// Loaded task: presets resolved and assets sampled, ready to spawn episodes.
#[derive(Clone, Debug)]
pub struct Environment {
    config: Arc<TaskConfig>,
    objects: Vec<Arc<ObjectModel>>,
    scene: Arc<Scene>,
}

impl Environment {
    pub fn new(config: TaskConfig, assets: &AssetLibrary) -> Result<Self> {
        config.validate()?;
        let objects = config
            .objects
            .iter()
            .map(|name| assets.load(name).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        let scene = Scene {
            walls: config.walls.clone(),
        };
        Ok(Self {
            config: Arc::new(config),
            objects,
            scene: Arc::new(scene),
        })
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn objects(&self) -> &[Arc<ObjectModel>] {
        &self.objects
    }

    /// Starts an episode. Everything random in it derives from `seed`.
    pub fn reset(&self, seed: u64) -> Result<Episode> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let object_index = rng.random_range(0..self.objects.len());
        let object = &self.objects[object_index];
        let initial = sample_resting_pose(&self.config.init, object, &mut rng);
        let target = sample_resting_pose(&self.config.target, object, &mut rng);
        self.start(seed, rng, object_index, initial, target)
    }

    /// Starts an episode from given poses instead of sampled ones; the
    /// solver and perturbation streams still derive from `seed`.
    pub fn reset_with_poses(&self, seed: u64, object_index: usize, initial: Pose, target: Pose) -> Result<Episode> {
        if object_index >= self.objects.len() {
            return Err(Error::InvalidArgument(format!("object index {object_index} out of range")));
        }
        if !(initial.is_finite() && target.is_finite()) {
            return Err(Error::InvalidArgument("poses must be finite".into()));
        }
        self.start(seed, ChaCha8Rng::seed_from_u64(seed), object_index, initial, target)
    }

    fn start(&self, seed: u64, mut rng: ChaCha8Rng, object_index: usize, initial: Pose, target: Pose) -> Result<Episode> {
        let object = self.objects[object_index].clone();
        let mpc = SamplingMpc::with_seed(self.config.mpc.clone(), rng.next_u64())?;
        let true_dynamics = DynamicsParams {
            mass: object.mass,
            inertia: object.inertia,
            ..self.config.mpc.dynamics
        };
        let state = SystemState::new(initial, Vector3::from(self.config.ee_home));
        let mut episode = Episode {
            config: self.config.clone(),
            object,
            scene: self.scene.clone(),
            seed,
            state,
            target,
            decision: 0,
            control_steps: 0,
            done: false,
            success: false,
            mpc,
            rng,
            true_dynamics,
            log: None,
        };
        episode.success = episode.at_target();
        episode.done = episode.success;
        Ok(episode)
    }
}

fn sample_resting_pose(dist: &PoseDistribution, object: &ObjectModel, rng: &mut ChaCha8Rng) -> Pose {
    let x = rng.random_range(dist.xy_min[0]..=dist.xy_max[0]);
    let y = rng.random_range(dist.xy_min[1]..=dist.xy_max[1]);
    let yaw = rng.random_range(dist.yaw_deg[0]..=dist.yaw_deg[1]).to_radians();
    let mut orientation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
    if dist.flip_x {
        orientation *= UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
    }
    let lowest = object
        .corners()
        .map(|c| (orientation * c).z)
        .fold(f64::INFINITY, f64::min);
    Pose::new(Vector3::new(x, y, -lowest), orientation)
}

/// A running episode. Cloning gives an independent snapshot that continues
/// the same random streams; snapshots never carry the log.
#[derive(Debug)]
pub struct Episode {
    config: Arc<TaskConfig>,
    object: Arc<ObjectModel>,
    scene: Arc<Scene>,
    seed: u64,
    state: SystemState,
    target: Pose,
    decision: usize,
    control_steps: usize,
    done: bool,
    success: bool,
    mpc: SamplingMpc,
    rng: ChaCha8Rng,
    true_dynamics: DynamicsParams,
    log: Option<Vec<TrajectoryRecord>>,
}

impl Clone for Episode {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            object: self.object.clone(),
            scene: self.scene.clone(),
            seed: self.seed,
            state: self.state,
            target: self.target,
            decision: self.decision,
            control_steps: self.control_steps,
            done: self.done,
            success: self.success,
            mpc: self.mpc.clone(),
            rng: self.rng.clone(),
            true_dynamics: self.true_dynamics,
            log: None,
        }
    }
}

impl Episode {
    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn object(&self) -> &ObjectModel {
        &self.object
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn target(&self) -> &Pose {
        &self.target
    }

    pub fn decision(&self) -> usize {
        self.decision
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn is_success(&self) -> bool {
        self.success
    }

    /// Starts recording a trajectory log, beginning with the episode header.
    pub fn enable_logging(&mut self) {
        self.log = Some(vec![TrajectoryRecord::Episode {
            seed: self.seed,
            object: self.object.name.clone(),
            initial_state: self.state,
            target_pose: self.target,
        }]);
    }

    pub fn log(&self) -> Option<&[TrajectoryRecord]> {
        self.log.as_deref()
    }

    pub fn take_log(&mut self) -> Option<Vec<TrajectoryRecord>> {
        self.log.take()
    }

    pub fn observation(&self) -> Observation {
        build_observation(&self.state, &self.object, &self.target, &self.scene)
    }

    fn at_target(&self) -> bool {
        check_success(&self.state.object_pose, &self.target, &self.config.success)
    }

    /// Scaled clearance of keypoint `index` is below the feasibility threshold.
    pub fn is_infeasible(&self, index: usize) -> bool {
        let world = self.state.object_pose.transform_point(&self.object.keypoints[index]);
        self.scene.clearance(&world) / self.object.characteristic_size < self.config.feasibility_threshold
    }

    /// The MPC condition implied by an intention in this episode.
    pub fn condition(&self, intention: &ContactIntention) -> IntentionCondition {
        IntentionCondition {
            contact_point_obj: self.object.keypoints[intention.keypoint_index],
            w_pos: intention.w_pos(),
            w_ori: intention.w_ori(),
            target_pose: self.target,
        }
    }

    /// Runs one high-level decision: feasibility check, reposition, then `T`
    /// MPC control steps with the intention frozen.
    pub fn apply_intention(&mut self, intention: &ContactIntention) -> Result<StepOutcome> {
        self.begin(intention)?;
        let infeasible = self.is_infeasible(intention.keypoint_index);
        let start = self.control_steps;
        self.reposition(intention.keypoint_index)?;
        self.control(intention, infeasible, start)
    }

    fn begin(&self, intention: &ContactIntention) -> Result<()> {
        if self.done {
            return Err(Error::InvalidState("episode is finished".into()));
        }
        intention.validate()?;
        if intention.keypoint_index >= self.object.keypoints.len() {
            return Err(Error::InvalidArgument(format!(
                "index out of range: keypoint {} (< {})",
                intention.keypoint_index,
                self.object.keypoints.len()
            )));
        }
        Ok(())
    }

    /// First half of a decision, exposed so searches can share it across
    /// weight pairs. Returns the feasibility flag and the step counter at
    /// the start of the decision, to be passed to [`Episode::finish_decision`].
    pub fn start_decision(&mut self, keypoint_index: usize) -> Result<(bool, usize)> {
        self.begin(&ContactIntention {
            keypoint_index,
            w_pos_index: 1,
            w_ori_index: 0,
        })?;
        let infeasible = self.is_infeasible(keypoint_index);
        let start = self.control_steps;
        self.reposition(keypoint_index)?;
        Ok((infeasible, start))
    }

    /// Second half of a decision started with [`Episode::start_decision`]
    /// for the same keypoint.
    pub fn finish_decision(&mut self, intention: &ContactIntention, started: (bool, usize)) -> Result<StepOutcome> {
        intention.validate()?;
        self.control(intention, started.0, started.1)
    }

    fn advance(&mut self, u: Vector3<f64>, phase: Phase, perturb: bool) -> Result<()> {
        let mut params = self.true_dynamics;
        let mut wrench = Wrench::default();
        if perturb {
            let p = self.config.perturbation;
            match p.kind {
                PerturbationKind::None => {}
                PerturbationKind::ExternalForce => {
                    let normal = Normal::new(0.0, p.force_sigma).map_err(|e| Error::Config(e.to_string()))?;
                    wrench.force = Vector3::from_fn(|_, _| normal.sample(&mut self.rng));
                    wrench.torque = Vector3::from_fn(|_, _| normal.sample(&mut self.rng));
                }
                PerturbationKind::Friction => {
                    params.mu *= self.rng.random_range(p.friction_range[0]..=p.friction_range[1]);
                }
            }
        }
        let result = comfree_step(&self.state, &u, &params, &self.object, &self.scene, &wrench)?;
        self.state = result.next_state;
        self.control_steps += 1;
        if self.state.object_pose.position.amax() > WORKSPACE_LIMIT {
            return Err(Error::InvalidState("object left the workspace".into()));
        }
        if let Some(log) = &mut self.log {
            log.push(TrajectoryRecord::Control {
                decision: self.decision,
                t: self.control_steps,
                phase,
                u,
                state: self.state,
                contacts: result
                    .contacts
                    .iter()
                    .zip(&result.contact_forces)
                    .map(|(c, f)| ContactRecord {
                        pair: c.pair,
                        point: c.point,
                        normal: c.normal,
                        gap: c.gap,
                        force: *f,
                    })
                    .collect(),
            });
        }
        if self.at_target() {
            self.success = true;
        }
        Ok(())
    }

    /// Lift above the object, travel over the approach point, descend.
    fn reposition(&mut self, keypoint_index: usize) -> Result<()> {
        let rp = self.config.reposition;
        let pose = self.state.object_pose;
        let point = pose.transform_point(&self.object.keypoints[keypoint_index]);
        let normal = pose.rotate_vector(&self.object.keypoint_normals[keypoint_index]);
        let approach = point + normal * (self.true_dynamics.ee_radius + rp.standoff_margin);
        let top = self
            .object
            .corners()
            .map(|c| pose.transform_point(&c).z)
            .fold(f64::NEG_INFINITY, f64::max);
        let lift = (top + rp.lift).max(approach.z);
        let ee = self.state.ee_position;
        let waypoints = [
            Vector3::new(ee.x, ee.y, lift.max(ee.z)),
            Vector3::new(approach.x, approach.y, lift.max(ee.z)),
            approach,
        ];
        let range = self.config.mpc.control_range_scale;
        let mut steps = 0;
        for w in waypoints {
            while !self.success && steps < rp.max_steps && (w - self.state.ee_position).amax() > rp.tolerance {
                let u = clamp_command(&(w - self.state.ee_position), range);
                self.advance(u, Phase::Reposition, false)?;
                steps += 1;
            }
        }
        Ok(())
    }

    fn control(&mut self, intention: &ContactIntention, infeasible: bool, start: usize) -> Result<StepOutcome> {
        let condition = self.condition(intention);
        self.mpc.reset_warm_start();
        for _ in 0..self.config.mpc.steps_per_decision {
            if self.success {
                break;
            }
            let (u, _) = self.mpc.step(&self.state, &condition, &self.object, &self.scene)?;
            self.advance(u, Phase::Mpc, true)?;
        }
        self.decision += 1;
        let observation = self.observation();
        let mean_flow = observation.mean_flow();
        let reward = compute_reward(mean_flow, self.success, infeasible, &self.config.reward);
        self.done = self.success || self.decision >= self.config.episode_limit;
        let info = StepInfo {
            decision: self.decision,
            object_pose: self.state.object_pose,
            mean_flow,
            infeasible,
            control_steps: self.control_steps - start,
        };
        if let Some(log) = &mut self.log {
            log.push(TrajectoryRecord::Decision {
                decision: self.decision,
                intention: *intention,
                reward,
                done: self.done,
                success: self.success,
                infeasible,
                mean_flow,
                object_pose: self.state.object_pose,
            });
        }
        Ok(StepOutcome {
            observation,
            reward,
            done: self.done,
            success: self.success,
            info,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(config: TaskConfig) -> Environment {
        Environment::new(config, &AssetLibrary::bundled()).unwrap()
    }

    #[test]
    fn reset_is_deterministic_and_resting() {
        let e = env(TaskConfig::pushing());
        let a = e.reset(7).unwrap();
        let b = e.reset(7).unwrap();
        assert_eq!(a.state(), b.state());
        assert_eq!(a.target(), b.target());
        let p = a.state().object_pose;
        assert!(p.position.x.abs() <= 0.25 && p.position.y.abs() <= 0.25);
        assert!((p.position.z - 0.05).abs() < 1e-12);
        assert_eq!(a.state().ee_position, Vector3::new(0.0, 0.0, 0.3));
        assert_ne!(e.reset(8).unwrap().target(), a.target());
    }

    #[test]
    fn reorientation_target_is_flipped() {
        let e = env(TaskConfig::reorientation());
        let ep = e.reset(3).unwrap();
        let up = ep.target().rotate_vector(&Vector3::z());
        assert!((up + Vector3::z()).norm() < 1e-12);
        assert!((ep.target().position.z - 0.05).abs() < 1e-12);
        assert!(ep.state().object_pose.position.x.abs() <= 0.1);
    }

    #[test]
    fn bottom_keypoint_is_infeasible_and_costs_one() {
        let e = env(TaskConfig::reorientation());
        let mut ep = e.reset(1).unwrap();
        let bottom = ep
            .object()
            .keypoint_normals
            .iter()
            .position(|n| n.z < -0.5)
            .unwrap();
        let intention = ContactIntention::new(bottom, 2, 0).unwrap();
        assert!(ep.is_infeasible(bottom));
        let out = ep.apply_intention(&intention).unwrap();
        assert!(out.info.infeasible);
        assert_eq!(out.reward, -1.0);
    }

    #[test]
    fn reposition_reaches_standoff() {
        let e = env(TaskConfig::pushing());
        let mut ep = e.reset(5).unwrap();
        let side = ep
            .object()
            .keypoint_normals
            .iter()
            .position(|n| n.z.abs() < 0.5)
            .unwrap();
        ep.start_decision(side).unwrap();
        let pose = ep.state().object_pose;
        let kp = pose.transform_point(&ep.object().keypoints[side]);
        let n = pose.rotate_vector(&ep.object().keypoint_normals[side]);
        let expected = kp + n * (0.008 + 0.01);
        assert!((ep.state().ee_position - expected).norm() < 1e-5);
    }

    #[test]
    fn split_decision_matches_apply() {
        let e = env(TaskConfig::pushing());
        let ep = e.reset(11).unwrap();
        let intention = ContactIntention::new(17, 2, 1).unwrap();
        let mut a = ep.clone();
        let out_a = a.apply_intention(&intention).unwrap();
        let mut b = ep.clone();
        let started = b.start_decision(17).unwrap();
        let out_b = b.finish_decision(&intention, started).unwrap();
        assert_eq!(out_a, out_b);
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn finished_episode_rejects_actions() {
        let mut config = TaskConfig::pushing();
        config.episode_limit = 1;
        config.mpc.steps_per_decision = 1;
        let e = env(config);
        let mut ep = e.reset(2).unwrap();
        let i = ContactIntention::new(0, 1, 0).unwrap();
        let out = ep.apply_intention(&i).unwrap();
        assert!(out.done);
        assert!(matches!(ep.apply_intention(&i), Err(Error::InvalidState(_))));
    }

    #[test]
    fn logging_records_every_step() {
        let mut config = TaskConfig::pushing();
        config.mpc.steps_per_decision = 3;
        let e = env(config);
        let mut ep = e.reset(4).unwrap();
        ep.enable_logging();
        let out = ep.apply_intention(&ContactIntention::new(30, 1, 1).unwrap()).unwrap();
        let log = ep.log().unwrap();
        let controls = log
            .iter()
            .filter(|r| matches!(r, TrajectoryRecord::Control { .. }))
            .count();
        assert_eq!(controls, out.info.control_steps);
        assert!(matches!(log[0], TrajectoryRecord::Episode { .. }));
        assert!(matches!(log.last(), Some(TrajectoryRecord::Decision { .. })));
        assert!(ep.clone().log().is_none());
    }
}
