//! Contact-intention action space and the built-in high-level policies.

mod intention;
mod search;

pub use intention::{admissible_weight_pairs, ContactIntention, W_ORI, W_POS};
pub use search::{
    feasibility_mask, random_intention, Evaluation, GreedyPolicy, GreedySearch, Policy, RandomPolicy, SearchResult,
};
