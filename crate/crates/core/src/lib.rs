//! Hierarchical contact-intention manipulation at desk scale.
//!
//! The crate is layered bottom-up:
//!
//! - [`geometry`]: poses, union-of-boxes object assets, keypoint sampling and
//!   the pose error metrics.
//! - [`contact`]: contact detection against the end-effector and the
//!   environment, dual-cone facet construction and the quasi-dynamic
//!   complementarity-free stepper.
//! - [`mpc`]: intention-conditioned receding-horizon sampling MPC.
//! - [`env`]: the abstract end-effector episode (observation, reward,
//!   success, reposition maneuver, perturbations, trajectory logs).
//! - [`policy`]: the contact-intention action space plus the random and
//!   greedy rollout-search policies.
//! - [`harness`]: batch runs, perturbation sweeps and reports.
//! - [`bridge`]: length-prefixed JSON protocol that lets an out-of-process
//!   policy drive episodes.
//!
//! Quaternions are scalar-first (`[w, x, y, z]`) everywhere they cross a
//! file or wire boundary.

pub mod bridge;
pub mod contact;
pub mod env;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mpc;
pub mod policy;

pub use error::{Error, Result};
