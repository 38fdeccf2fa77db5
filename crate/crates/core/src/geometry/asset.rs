use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::keypoints::{buried, sample_keypoints, KeypointMode, NUM_KEYPOINTS};
use super::shape::{union_signed_distance, BoxPiece, Face};
use crate::{Error, Result};

/// Union-of-boxes rigid object with its keypoint set.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectModel {
    pub name: String,
    pub boxes: Vec<BoxPiece>,
    pub mass: f64,
    /// Isotropic rotational inertia (kg·m²).
    pub inertia: f64,
    pub characteristic_size: f64,
    pub keypoint_mode: KeypointMode,
    pub keypoint_seed: u64,
    pub keypoints: Vec<Vector3<f64>>,
    /// Outward normal of the face each keypoint lies on (object frame).
    pub keypoint_normals: Vec<Vector3<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BoxEntry {
    center: [f64; 3],
    half_extents: [f64; 3],
}

/// On-disk asset layout (TOML).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssetFile {
    pub name: String,
    pub mass: f64,
    pub inertia: f64,
    pub characteristic_size: f64,
    pub keypoint_mode: KeypointMode,
    pub keypoint_seed: u64,
    boxes: Vec<BoxEntry>,
    /// Optional inline cache; verified against regeneration on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keypoints: Option<Vec<[f64; 3]>>,
}

impl ObjectModel {
    /// Builds the model and samples its keypoints.
    pub fn new(
        name: impl Into<String>,
        boxes: Vec<BoxPiece>,
        mass: f64,
        inertia: f64,
        characteristic_size: f64,
        keypoint_mode: KeypointMode,
        keypoint_seed: u64,
    ) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::InvalidAsset("asset has no boxes".into()));
        }
        for (i, b) in boxes.iter().enumerate() {
            if !b.half_extents.iter().all(|&h| h > 0.0 && h.is_finite()) || !b.center.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidAsset(format!("box {i} needs finite, strictly positive half-extents")));
            }
        }
        if !(mass > 0.0 && inertia > 0.0 && characteristic_size > 0.0) {
            return Err(Error::InvalidAsset("mass, inertia and characteristic_size must be positive".into()));
        }
        let set = sample_keypoints(&boxes, NUM_KEYPOINTS, keypoint_mode, keypoint_seed)?;
        Ok(Self {
            name: name.into(),
            boxes,
            mass,
            inertia,
            characteristic_size,
            keypoint_mode,
            keypoint_seed,
            keypoints: set.points,
            keypoint_normals: set.normals,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: AssetFile = toml::from_str(text).map_err(|e| Error::InvalidAsset(e.to_string()))?;
        let boxes = file
            .boxes
            .iter()
            .map(|b| BoxPiece::new(Vector3::from(b.center), Vector3::from(b.half_extents)))
            .collect();
        let model = Self::new(
            file.name,
            boxes,
            file.mass,
            file.inertia,
            file.characteristic_size,
            file.keypoint_mode,
            file.keypoint_seed,
        )?;
        if let Some(cached) = file.keypoints {
            let stale = cached.len() != model.keypoints.len()
                || cached
                    .iter()
                    .zip(&model.keypoints)
                    .any(|(c, k)| (Vector3::from(*c) - k).norm() > 1e-9);
            if stale {
                return Err(Error::InvalidAsset("inline keypoint cache does not match the seed".into()));
            }
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidAsset(msg) => Error::InvalidAsset(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self, with_keypoints: bool) -> String {
        let file = AssetFile {
            name: self.name.clone(),
            mass: self.mass,
            inertia: self.inertia,
            characteristic_size: self.characteristic_size,
            keypoint_mode: self.keypoint_mode,
            keypoint_seed: self.keypoint_seed,
            boxes: self
                .boxes
                .iter()
                .map(|b| BoxEntry {
                    center: b.center.into(),
                    half_extents: b.half_extents.into(),
                })
                .collect(),
            keypoints: with_keypoints.then(|| self.keypoints.iter().map(|k| (*k).into()).collect()),
        };
        toml::to_string(&file).expect("asset serialization")
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        union_signed_distance(&self.boxes, p)
    }

    /// Object-frame axis-aligned bounds of the union.
    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for b in &self.boxes {
            lo = lo.inf(&b.min());
            hi = hi.sup(&b.max());
        }
        (lo, hi)
    }

    pub fn corners(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.boxes.iter().flat_map(|b| b.corners())
    }

    /// Outward normal of the union surface at an object-frame surface point,
    /// if the point lies on an exposed box face.
    pub fn surface_normal(&self, p: &Vector3<f64>) -> Option<Vector3<f64>> {
        for (bi, b) in self.boxes.iter().enumerate() {
            for face in Face::all() {
                let n = face.normal();
                let local = p - b.center;
                let on_plane = (local[face.axis] - f64::from(face.sign) * b.half_extents[face.axis]).abs() < 1e-9;
                let within = (0..3).all(|a| a == face.axis || local[a].abs() <= b.half_extents[a] + 1e-9);
                if on_plane && within && !buried(&self.boxes, bi, p, &n) {
                    return Some(n);
                }
            }
        }
        None
    }
}
