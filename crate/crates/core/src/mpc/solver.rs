use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{clamp_command, rollout, IntentionCondition};
use super::params::MpcParams;
use crate::contact::{Scene, SystemState};
use crate::geometry::ObjectModel;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub u_sequence: Vec<Vector3<f64>>,
    pub predicted_cost: f64,
    pub predicted_states: Vec<SystemState>,
    /// Best cost after seeding and after each sampler iteration.
    pub iteration_costs: Vec<f64>,
}

/// Predictive-sampling solver with one-step-shift warm start.
///
/// Owns its random stream, so a clone continues the same sequence
/// independently of the original.
#[derive(Clone, Debug)]
pub struct SamplingMpc {
    params: MpcParams,
    rng: ChaCha8Rng,
    previous: Option<Vec<Vector3<f64>>>,
}

struct Candidate {
    u: Vec<Vector3<f64>>,
    cost: f64,
}

impl SamplingMpc {
    pub fn new(params: MpcParams) -> Result<Self> {
        let seed = params.sampler.seed;
        Self::with_seed(params, seed)
    }

    pub fn with_seed(params: MpcParams, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            previous: None,
        })
    }

    pub fn params(&self) -> &MpcParams {
        &self.params
    }

    /// Forgets the cached plan so the next solve starts from zero.
    pub fn reset_warm_start(&mut self) {
        self.previous = None;
    }

    /// The incumbent the next `solve` will start from, if any.
    pub fn warm_start(&self) -> Option<Vec<Vector3<f64>>> {
        self.previous.as_ref().map(|prev| {
            let mut shifted: Vec<_> = prev.iter().skip(1).copied().collect();
            shifted.resize(self.params.horizon, Vector3::zeros());
            shifted
        })
    }

    fn evaluate(
        &self,
        state: &SystemState,
        u: &[Vector3<f64>],
        intention: &IntentionCondition,
        object: &ObjectModel,
        scene: &Scene,
    ) -> f64 {
        match rollout(state, u, intention, &self.params, object, scene) {
            Ok((c, _)) if c.is_finite() => c,
            _ => f64::INFINITY,
        }
    }

    pub fn solve(
        &mut self,
        state: &SystemState,
        intention: &IntentionCondition,
        object: &ObjectModel,
        scene: &Scene,
    ) -> Result<Plan> {
        let horizon = self.params.horizon;
        let range = self.params.control_range_scale;
        let zero = vec![Vector3::zeros(); horizon];

        let mut seeds = vec![zero];
        if let Some(warm) = self.warm_start() {
            seeds.push(warm.iter().map(|u| clamp_command(u, range)).collect());
        }
        let mut best = self.pick(state, intention, object, scene, seeds, None);
        let mut iteration_costs = vec![best.cost];

        let sampler = self.params.sampler.clone();
        let noise = Normal::new(0.0, sampler.noise_scale).map_err(|e| Error::Config(e.to_string()))?;
        for _ in 0..sampler.num_iterations {
            let samples: Vec<Vec<Vector3<f64>>> = (0..sampler.num_samples)
                .map(|_| {
                    best.u
                        .iter()
                        .map(|u| {
                            let d = Vector3::from_fn(|_, _| noise.sample(&mut self.rng));
                            clamp_command(&(u + d), range)
                        })
                        .collect()
                })
                .collect();
            best = self.pick(state, intention, object, scene, samples, Some(best));
            iteration_costs.push(best.cost);
        }

        if !best.cost.is_finite() {
            return Err(Error::SolverFailure("every sampled rollout was non-finite".into()));
        }
        let (predicted_cost, predicted_states) = rollout(state, &best.u, intention, &self.params, object, scene)?;
        self.previous = Some(best.u.clone());
        Ok(Plan {
            u_sequence: best.u,
            predicted_cost,
            predicted_states,
            iteration_costs,
        })
    }

    /// Evaluates `candidates` (possibly in parallel) and returns the lowest
    /// cost, preferring the incumbent and then the lowest index on ties.
    fn pick(
        &self,
        state: &SystemState,
        intention: &IntentionCondition,
        object: &ObjectModel,
        scene: &Scene,
        candidates: Vec<Vec<Vector3<f64>>>,
        incumbent: Option<Candidate>,
    ) -> Candidate {
        let costs: Vec<f64> = candidates
            .par_iter()
            .map(|u| self.evaluate(state, u, intention, object, scene))
            .collect();
        let mut best = incumbent;
        for (u, cost) in candidates.into_iter().zip(costs) {
            if best.as_ref().is_none_or(|b| cost < b.cost) {
                best = Some(Candidate { u, cost });
            }
        }
        best.expect("at least one candidate")
    }

    /// Solves and returns the first command. A solver failure falls back to
    /// the zero command with no plan.
    pub fn step(
        &mut self,
        state: &SystemState,
        intention: &IntentionCondition,
        object: &ObjectModel,
        scene: &Scene,
    ) -> Result<(Vector3<f64>, Option<Plan>)> {
        match self.solve(state, intention, object, scene) {
            Ok(plan) => Ok((plan.u_sequence[0], Some(plan))),
            Err(Error::SolverFailure(_)) => {
                self.previous = None;
                Ok((Vector3::zeros(), None))
            }
            Err(e) => Err(e),
        }
    }
}
