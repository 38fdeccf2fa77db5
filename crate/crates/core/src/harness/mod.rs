//! Batch episode runner, perturbation sweeps, reports and log replay.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{AssetLibrary, Environment, Episode, PerturbationKind, TaskConfig, TrajectoryRecord};
use crate::geometry::Pose;
use crate::policy::{ContactIntention, GreedyPolicy, Policy, RandomPolicy};
use crate::{Error, Result};

/// Offset separating policy random streams from episode streams.
const POLICY_SEED_SALT: u64 = 0x0005_eed0_fa11_c0de;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Random,
    Greedy,
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "greedy" => Ok(Self::Greedy),
            "bridge" => Err(Error::Config(
                "the bridge policy is driven by an external client; use `serve`".into(),
            )),
            other => Err(Error::Config(format!("unknown policy '{other}'"))),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::Greedy => "greedy",
        })
    }
}

pub fn make_policy(kind: PolicyKind, config: &TaskConfig, seed: u64) -> Box<dyn Policy> {
    let seed = seed ^ POLICY_SEED_SALT;
    match kind {
        PolicyKind::Random => Box::new(RandomPolicy::new(seed)),
        PolicyKind::Greedy => Box::new(GreedyPolicy::new(config.greedy.candidates, seed)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub object: String,
    pub success: bool,
    pub num_decisions: usize,
    pub wall_time_s: f64,
    pub final_pose: Option<Pose>,
    pub translation_error: Option<f64>,
    pub rotation_distance: Option<f64>,
    /// Set when the trial aborted with a runtime failure.
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub trials: usize,
    pub success_rate: f64,
    /// Population standard deviation of the per-trial success indicator.
    pub success_std: f64,
    pub mean_decisions: f64,
    pub std_decisions: f64,
    pub failures: usize,
}

impl Aggregates {
    pub fn from_trials(trials: &[TrialRecord]) -> Self {
        let n = trials.len();
        if n == 0 {
            return Self {
                trials: 0,
                success_rate: 0.0,
                success_std: 0.0,
                mean_decisions: 0.0,
                std_decisions: 0.0,
                failures: 0,
            };
        }
        let (success_rate, success_std) = mean_std(trials.iter().map(|t| if t.success { 1.0 } else { 0.0 }));
        let (mean_decisions, std_decisions) = mean_std(trials.iter().map(|t| t.num_decisions as f64));
        Self {
            trials: n,
            success_rate,
            success_std,
            mean_decisions,
            std_decisions,
            failures: trials.iter().filter(|t| t.error.is_some()).count(),
        }
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub policy: PolicyKind,
    pub perturbation: PerturbationKind,
    /// Sorted by seed.
    pub trials: Vec<TrialRecord>,
    pub aggregates: Aggregates,
}

impl RunReport {
    pub fn all_completed(&self) -> bool {
        self.trials.iter().all(|t| t.error.is_none())
    }

    /// The report with wall-clock fields zeroed, for determinism checks.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for t in &mut r.trials {
            t.wall_time_s = 0.0;
        }
        r
    }

    /// Appends one line per trial and a final summary line.
    pub fn append_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        for t in &self.trials {
            writeln!(f, "{}", serde_json::json!({"kind": "trial", "policy": self.policy, "perturbation": self.perturbation, "record": t}))?;
        }
        writeln!(
            f,
            "{}",
            serde_json::json!({"kind": "summary", "policy": self.policy, "perturbation": self.perturbation, "aggregates": self.aggregates})
        )?;
        Ok(())
    }

    pub fn summary_table(&self) -> String {
        let a = &self.aggregates;
        format!(
            "{:<8} {:<15} {:>6} {:>16} {:>18} {:>8}",
            self.policy.to_string(),
            format!("{:?}", self.perturbation).to_lowercase(),
            a.trials,
            format!("{:.3} ± {:.3}", a.success_rate, a.success_std),
            format!("{:.2} ± {:.2}", a.mean_decisions, a.std_decisions),
            a.failures
        )
    }

    pub fn summary_header() -> String {
        format!(
            "{:<8} {:<15} {:>6} {:>16} {:>18} {:>8}",
            "policy", "perturbation", "trials", "success", "decisions", "failed"
        )
    }
}

/// Drives one episode to completion with a policy.
pub fn run_episode(episode: &mut Episode, policy: &mut dyn Policy) -> Result<()> {
    while !episode.is_done() {
        let obs = episode.observation();
        let intention = policy.act(episode, &obs)?;
        episode.apply_intention(&intention)?;
    }
    Ok(())
}

pub fn run_trial(
    env: &Environment,
    policy: PolicyKind,
    seed: u64,
    log: bool,
) -> (TrialRecord, Option<Vec<TrajectoryRecord>>) {
    let start = Instant::now();
    let mut record = TrialRecord {
        seed,
        object: String::new(),
        success: false,
        num_decisions: 0,
        wall_time_s: 0.0,
        final_pose: None,
        translation_error: None,
        rotation_distance: None,
        error: None,
    };
    let mut episode = match env.reset(seed) {
        Ok(e) => e,
        Err(e) => {
            record.error = Some(e.to_string());
            return (record, None);
        }
    };
    if log {
        episode.enable_logging();
    }
    record.object = episode.object().name.clone();
    let mut p = make_policy(policy, env.config(), seed);
    if let Err(e) = run_episode(&mut episode, p.as_mut()) {
        record.error = Some(e.to_string());
    }
    let pose = episode.state().object_pose;
    record.success = episode.is_success() && record.error.is_none();
    record.num_decisions = episode.decision();
    record.final_pose = Some(pose);
    record.translation_error = Some(pose.translation_error(episode.target()));
    record.rotation_distance = Some(pose.rotation_distance_to(episode.target()));
    record.wall_time_s = start.elapsed().as_secs_f64();
    (record, episode.take_log())
}

pub fn write_trajectory(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r).map_err(|e| Error::Internal(e.to_string()))?)?;
    }
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// When set, each trial's trajectory is appended to `trial_<seed>.jsonl` here.
    pub trajectory_dir: Option<std::path::PathBuf>,
}

/// Runs `trials` episodes with seeds `seed, seed + 1, …`.
pub fn run_benchmark(
    config: &TaskConfig,
    assets: &AssetLibrary,
    policy: PolicyKind,
    trials: usize,
    seed: u64,
    options: &RunOptions,
) -> Result<RunReport> {
    let env = Environment::new(config.clone(), assets)?;
    let log = options.trajectory_dir.is_some();
    let results: Vec<(TrialRecord, Option<Vec<TrajectoryRecord>>)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(&env, policy, seed.wrapping_add(i), log))
        .collect();
    let mut records = Vec::with_capacity(results.len());
    for (record, traj) in results {
        if let (Some(dir), Some(traj)) = (&options.trajectory_dir, traj) {
            std::fs::create_dir_all(dir)?;
            write_trajectory(&dir.join(format!("trial_{}.jsonl", record.seed)), &traj)?;
        }
        records.push(record);
    }
    records.sort_by_key(|r| r.seed);
    let aggregates = Aggregates::from_trials(&records);
    Ok(RunReport {
        policy,
        perturbation: config.perturbation.kind,
        trials: records,
        aggregates,
    })
}

/// One report per perturbation kind, on the same seeds.
pub fn run_perturbation_sweep(
    config: &TaskConfig,
    assets: &AssetLibrary,
    policy: PolicyKind,
    kinds: &[PerturbationKind],
    trials: usize,
    seed: u64,
    options: &RunOptions,
) -> Result<Vec<RunReport>> {
    kinds
        .iter()
        .map(|kind| {
            let mut c = config.clone();
            c.perturbation.kind = *kind;
            let opts = RunOptions {
                trajectory_dir: options
                    .trajectory_dir
                    .as_ref()
                    .map(|d| d.join(format!("{kind:?}").to_lowercase())),
            };
            run_benchmark(&c, assets, policy, trials, seed, &opts)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayResult {
    pub seed: u64,
    pub intentions: Vec<ContactIntention>,
    pub final_pose: Pose,
    pub logged_final_pose: Option<Pose>,
}

impl ReplayResult {
    /// Largest absolute coordinate difference from the logged final pose,
    /// comparing quaternions up to sign.
    pub fn max_deviation(&self) -> Option<f64> {
        let logged = self.logged_final_pose?;
        let dp = (self.final_pose.position - logged.position).amax();
        let a = self.final_pose.orientation.coords;
        let b = logged.orientation.coords;
        let dq = (a - b).amax().min((a + b).amax());
        Some(dp.max(dq))
    }
}

/// The seed and intention sequence of a trajectory log.
pub fn logged_intentions(records: &[TrajectoryRecord]) -> Result<(u64, Vec<ContactIntention>)> {
    let seed = match records.first() {
        Some(TrajectoryRecord::Episode { seed, .. }) => *seed,
        _ => return Err(Error::Config("trajectory log does not start with an episode record".into())),
    };
    let intentions = records
        .iter()
        .filter_map(|r| match r {
            TrajectoryRecord::Decision { intention, .. } => Some(*intention),
            _ => None,
        })
        .collect();
    Ok((seed, intentions))
}

/// Re-executes a logged intention sequence from the logged seed.
pub fn replay(config: &TaskConfig, assets: &AssetLibrary, records: &[TrajectoryRecord]) -> Result<ReplayResult> {
    let (seed, intentions) = logged_intentions(records)?;
    let env = Environment::new(config.clone(), assets)?;
    let mut episode = env.reset(seed)?;
    for i in &intentions {
        episode.apply_intention(i)?;
    }
    let logged_final_pose = records.iter().rev().find_map(|r| match r {
        TrajectoryRecord::Decision { object_pose, .. } => Some(*object_pose),
        _ => None,
    });
    Ok(ReplayResult {
        seed,
        intentions,
        final_pose: episode.state().object_pose,
        logged_final_pose,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_config() -> TaskConfig {
        let mut c = TaskConfig::pushing();
        c.episode_limit = 2;
        c.mpc.steps_per_decision = 4;
        c.mpc.sampler.num_samples = 4;
        c
    }

    #[test]
    fn zero_trials_is_empty() {
        let r = run_benchmark(&fast_config(), &AssetLibrary::bundled(), PolicyKind::Random, 0, 0, &RunOptions::default())
            .unwrap();
        assert!(r.trials.is_empty());
        assert_eq!(r.aggregates.trials, 0);
        assert!(r.all_completed());
    }

    #[test]
    fn aggregates_match_records() {
        let mk = |seed, success, n| TrialRecord {
            seed,
            object: "cube".into(),
            success,
            num_decisions: n,
            wall_time_s: 0.0,
            final_pose: None,
            translation_error: None,
            rotation_distance: None,
            error: None,
        };
        let a = Aggregates::from_trials(&[mk(0, true, 4), mk(1, false, 8), mk(2, true, 6), mk(3, true, 2)]);
        assert_eq!(a.success_rate, 0.75);
        assert!((a.success_std - (0.75f64 * 0.25).sqrt()).abs() < 1e-15);
        assert_eq!(a.mean_decisions, 5.0);
        assert!((a.std_decisions - 5.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn policy_names() {
        assert_eq!("greedy".parse::<PolicyKind>().unwrap(), PolicyKind::Greedy);
        assert!(matches!("bridge".parse::<PolicyKind>(), Err(Error::Config(_))));
        assert!(matches!("other".parse::<PolicyKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn replay_reproduces_random_run() {
        let config = fast_config();
        let env = Environment::new(config.clone(), &AssetLibrary::bundled()).unwrap();
        let (record, log) = run_trial(&env, PolicyKind::Random, 21, true);
        let log = log.unwrap();
        let r = replay(&config, &AssetLibrary::bundled(), &log).unwrap();
        assert_eq!(r.seed, 21);
        assert_eq!(r.intentions.len(), record.num_decisions);
        assert_eq!(r.max_deviation().unwrap(), 0.0);
    }
}
