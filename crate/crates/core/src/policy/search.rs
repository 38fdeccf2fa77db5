use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::intention::{admissible_weight_pairs, ContactIntention};
use crate::env::{Episode, Observation};
use crate::geometry::farthest_point_subsample;
use crate::Result;

/// `mask_i = D_i ≥ threshold`.
pub fn feasibility_mask(obs: &Observation, threshold: f64) -> Vec<bool> {
    obs.clearance.iter().map(|d| *d >= threshold).collect()
}

fn feasible_indices(mask: &[bool]) -> Vec<usize> {
    let feasible: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if feasible.is_empty() {
        (0..mask.len()).collect()
    } else {
        feasible
    }
}

/// Uniform over feasible keypoints × admissible weight pairs, or over all
/// keypoints when none is feasible.
pub fn random_intention(mask: &[bool], rng: &mut impl Rng) -> ContactIntention {
    let keypoints = feasible_indices(mask);
    let pairs = admissible_weight_pairs();
    let (w_pos_index, w_ori_index) = pairs[rng.random_range(0..pairs.len())];
    ContactIntention {
        keypoint_index: keypoints[rng.random_range(0..keypoints.len())],
        w_pos_index,
        w_ori_index,
    }
}

/// A high-level policy driving an episode one decision at a time.
pub trait Policy: Send {
    fn act(&mut self, episode: &Episode, observation: &Observation) -> Result<ContactIntention>;
}

pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, episode: &Episode, observation: &Observation) -> Result<ContactIntention> {
        let mask = feasibility_mask(observation, episode.config().feasibility_threshold);
        Ok(random_intention(&mask, &mut self.rng))
    }
}

/// Score of one simulated candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub intention: ContactIntention,
    /// Mean scaled flow after the decision; lower is better.
    pub score: f64,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub intention: ContactIntention,
    /// Every simulated candidate in canonical order.
    pub evaluations: Vec<Evaluation>,
}

/// Rollout-scoring search over subsampled keypoints and weight pairs.
#[derive(Clone, Debug)]
pub struct GreedySearch {
    pub candidates: usize,
    pub weight_pairs: Vec<(usize, usize)>,
}

impl GreedySearch {
    pub fn new(candidates: usize) -> Self {
        Self {
            candidates,
            weight_pairs: admissible_weight_pairs(),
        }
    }

    /// Simulates candidates on snapshots of `episode`, which is left
    /// untouched. A successful candidate is selected immediately; otherwise
    /// the lowest score wins, ties going to the canonical order
    /// `(keypoint_index, w_pos_index, w_ori_index)`.
    pub fn search(&self, episode: &Episode, observation: &Observation, rng: &mut impl Rng) -> Result<SearchResult> {
        let mask = feasibility_mask(observation, episode.config().feasibility_threshold);
        if !mask.iter().any(|m| *m) {
            let intention = random_intention(&mask, rng);
            return Ok(SearchResult {
                intention,
                evaluations: Vec::new(),
            });
        }
        let feasible = feasible_indices(&mask);
        let start = rng.random_range(0..feasible.len());
        let mut keypoints = farthest_point_subsample(&episode.object().keypoints, &feasible, self.candidates, start);
        keypoints.sort_unstable();

        // Each keypoint shares one reposition across its weight pairs and
        // stops at its first success; the reduction below only depends on
        // canonical order, so evaluation order does not matter.
        let per_keypoint: Vec<Vec<Evaluation>> = keypoints
            .par_iter()
            .map(|&k| self.evaluate_keypoint(episode, k))
            .collect::<Result<_>>()?;
        let evaluations: Vec<Evaluation> = per_keypoint.into_iter().flatten().collect();

        let chosen = evaluations
            .iter()
            .find(|e| e.success)
            .or_else(|| {
                evaluations
                    .iter()
                    .fold(None::<&Evaluation>, |best, e| match best {
                        Some(b) if !(e.score < b.score) => Some(b),
                        _ => Some(e),
                    })
            })
            .expect("at least one candidate");
        Ok(SearchResult {
            intention: chosen.intention,
            evaluations,
        })
    }

    fn evaluate_keypoint(&self, episode: &Episode, keypoint_index: usize) -> Result<Vec<Evaluation>> {
        let mut base = episode.clone();
        let started = base.start_decision(keypoint_index)?;
        let mut out = Vec::with_capacity(self.weight_pairs.len());
        for &(w_pos_index, w_ori_index) in &self.weight_pairs {
            let intention = ContactIntention {
                keypoint_index,
                w_pos_index,
                w_ori_index,
            };
            let outcome = base.clone().finish_decision(&intention, started)?;
            let score = if outcome.info.mean_flow.is_finite() {
                outcome.info.mean_flow
            } else {
                f64::INFINITY
            };
            out.push(Evaluation {
                intention,
                score,
                success: outcome.success,
            });
            if outcome.success {
                break;
            }
        }
        Ok(out)
    }
}

pub struct GreedyPolicy {
    search: GreedySearch,
    rng: ChaCha8Rng,
}

impl GreedyPolicy {
    pub fn new(candidates: usize, seed: u64) -> Self {
        Self {
            search: GreedySearch::new(candidates),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for GreedyPolicy {
    fn act(&mut self, episode: &Episode, observation: &Observation) -> Result<ContactIntention> {
        Ok(self.search.search(episode, observation, &mut self.rng)?.intention)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{AssetLibrary, Environment, TaskConfig};
    use nalgebra::Vector3;

    fn episode(seed: u64) -> Episode {
        let mut config = TaskConfig::pushing();
        config.mpc.sampler.num_samples = 8;
        config.mpc.steps_per_decision = 5;
        Environment::new(config, &AssetLibrary::bundled()).unwrap().reset(seed).unwrap()
    }

    #[test]
    fn mask_follows_threshold() {
        let ep = episode(0);
        let obs = ep.observation();
        let mask = feasibility_mask(&obs, 0.02);
        let pose = ep.state().object_pose;
        for ((m, p), n) in mask.iter().zip(&ep.object().keypoints).zip(&ep.object().keypoint_normals) {
            let world_clearance = pose.transform_point(p).z.max(0.0);
            assert_eq!(*m, world_clearance >= 0.02 * 0.1);
            if n.z < -0.5 {
                assert!(!*m);
            }
        }
        assert!(mask.iter().filter(|m| **m).count() > 128);
        assert!(feasibility_mask(&obs, 0.0).iter().all(|m| *m));
    }

    #[test]
    fn lifted_object_is_all_feasible() {
        let obs = Observation {
            keypoints: vec![Vector3::zeros(); 4],
            goal_flow: vec![Vector3::zeros(); 4],
            clearance: vec![10.0, 9.5, 10.5, 10.0],
        };
        assert!(feasibility_mask(&obs, 0.02).iter().all(|m| *m));
    }

    #[test]
    fn random_respects_mask_and_pairs() {
        let mut mask = vec![false; 256];
        mask[3] = true;
        mask[200] = true;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let i = random_intention(&mask, &mut rng);
            assert!(i.keypoint_index == 3 || i.keypoint_index == 200);
            assert!(i.validate().is_ok());
        }
        let a = random_intention(&mask, &mut ChaCha8Rng::seed_from_u64(1));
        let b = random_intention(&mask, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        let none = random_intention(&[false; 256], &mut rng);
        assert!(none.keypoint_index < 256);
    }

    #[test]
    fn single_candidate_is_returned() {
        let ep = episode(2);
        let obs = ep.observation();
        let search = GreedySearch {
            candidates: 1,
            weight_pairs: vec![(3, 2)],
        };
        let r = search.search(&ep, &obs, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.evaluations.len(), 1);
        assert_eq!(r.intention, r.evaluations[0].intention);
        assert_eq!((r.intention.w_pos_index, r.intention.w_ori_index), (3, 2));
    }

    #[test]
    fn selection_is_best_evaluated_and_deterministic() {
        let ep = episode(3);
        let obs = ep.observation();
        let search = GreedySearch {
            candidates: 3,
            weight_pairs: vec![(1, 0), (4, 0), (2, 3)],
        };
        let a = search.search(&ep, &obs, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = search.search(&ep, &obs, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let chosen = a.evaluations.iter().find(|e| e.intention == a.intention).unwrap();
        if !chosen.success {
            assert!(a.evaluations.iter().all(|e| chosen.score <= e.score));
        }
        // Re-simulating the chosen intention reproduces its score.
        let mut replay = ep.clone();
        let out = replay.apply_intention(&a.intention).unwrap();
        assert_eq!(out.info.mean_flow, chosen.score);
    }
}
