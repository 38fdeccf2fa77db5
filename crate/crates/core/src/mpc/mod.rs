//! Intention-conditioned receding-horizon control.

mod cost;
mod params;
mod solver;

pub use cost::{clamp_command, rollout, rollout_cost, running_cost, terminal_cost, IntentionCondition};
pub use params::{MpcParams, SamplerParams};
pub use solver::{Plan, SamplingMpc};
