use serde::{Deserialize, Serialize};

use crate::geometry::NUM_KEYPOINTS;
use crate::{Error, Result};

/// Position-weight grid.
pub const W_POS: [f64; 5] = [0.0, 50.0, 100.0, 150.0, 200.0];
/// Orientation-weight grid.
pub const W_ORI: [f64; 5] = [0.0, 2.0, 4.0, 6.0, 8.0];

/// The higher-level action: one contact keypoint plus a weight pair that
/// defines the post-contact subgoal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContactIntention {
    pub keypoint_index: usize,
    pub w_pos_index: usize,
    pub w_ori_index: usize,
}

impl ContactIntention {
    pub fn new(keypoint_index: usize, w_pos_index: usize, w_ori_index: usize) -> Result<Self> {
        let i = Self {
            keypoint_index,
            w_pos_index,
            w_ori_index,
        };
        i.validate()?;
        Ok(i)
    }

    pub fn validate(&self) -> Result<()> {
        if self.keypoint_index >= NUM_KEYPOINTS || self.w_pos_index >= W_POS.len() || self.w_ori_index >= W_ORI.len() {
            return Err(Error::InvalidArgument(format!(
                "index out of range: keypoint {} (< {NUM_KEYPOINTS}), w_pos {} (< {}), w_ori {} (< {})",
                self.keypoint_index,
                self.w_pos_index,
                W_POS.len(),
                self.w_ori_index,
                W_ORI.len()
            )));
        }
        if self.w_pos_index == 0 && self.w_ori_index == 0 {
            return Err(Error::InvalidArgument("weight pair (0, 0) is not admissible".into()));
        }
        Ok(())
    }

    pub fn w_pos(&self) -> f64 {
        W_POS[self.w_pos_index]
    }

    pub fn w_ori(&self) -> f64 {
        W_ORI[self.w_ori_index]
    }
}

/// The 24 admissible `(w_pos_index, w_ori_index)` pairs in canonical order.
pub fn admissible_weight_pairs() -> Vec<(usize, usize)> {
    (0..W_POS.len())
        .flat_map(|p| (0..W_ORI.len()).map(move |o| (p, o)))
        .filter(|&(p, o)| p != 0 || o != 0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_and_pairs() {
        let pairs = admissible_weight_pairs();
        assert_eq!(pairs.len(), 24);
        assert!(!pairs.contains(&(0, 0)));
        assert_eq!(pairs[0], (0, 1));
        let mut sorted = pairs.clone();
        sorted.sort();
        assert_eq!(sorted, pairs);
    }

    #[test]
    fn validation() {
        assert!(ContactIntention::new(255, 4, 4).is_ok());
        assert!(ContactIntention::new(256, 1, 0).is_err());
        assert!(ContactIntention::new(0, 5, 0).is_err());
        assert!(ContactIntention::new(0, 0, 0).is_err());
        let i = ContactIntention::new(3, 2, 1).unwrap();
        assert_eq!((i.w_pos(), i.w_ori()), (100.0, 2.0));
    }
}
