//! Episode lifecycle, object-centric observations and rewards.

mod assets;
mod config;
mod episode;
mod observation;

pub use assets::{AssetLibrary, ASSET_DIR_ENV};
pub use config::{
    apply_override, GreedyParams, Perturbation, PerturbationKind, PoseDistribution, RepositionParams, RewardWeights,
    SuccessThresholds, Task, TaskConfig,
};
pub use episode::{ContactRecord, Environment, Episode, Phase, StepInfo, StepOutcome, TrajectoryRecord, WORKSPACE_LIMIT};
pub use observation::{build_observation, check_success, compute_reward, Observation};
