//! Pose algebra, union-of-boxes assets and keypoint sampling.

mod asset;
mod keypoints;
mod pose;
mod shape;

pub use asset::{AssetFile, ObjectModel};
pub use keypoints::{farthest_point_subsample, sample_keypoints, KeypointMode, KeypointSet, DEDUP_TOLERANCE, NUM_KEYPOINTS};
pub use pose::{
    integrate_orientation, rotation_distance, transform_keypoint_to_world, unit_rotation_distance, Pose,
    UNIT_NORM_TOLERANCE,
};
pub use shape::{union_signed_distance, BoxPiece, Face, SurfaceQuery};
