use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::shape::{BoxPiece, Face};
use crate::{Error, Result};

/// Keypoints per object.
pub const NUM_KEYPOINTS: usize = 256;

/// Offset used to decide whether a surface patch is buried inside another box.
pub const DEDUP_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeypointMode {
    /// Only faces whose normal is ±x or ±y.
    SideFaces,
    AllFaces,
}

impl KeypointMode {
    fn admits(&self, face: Face) -> bool {
        match self {
            KeypointMode::SideFaces => face.axis != 2,
            KeypointMode::AllFaces => true,
        }
    }
}

/// Sampled keypoints with the outward normal of the face each one came from.
#[derive(Clone, Debug, PartialEq)]
pub struct KeypointSet {
    pub points: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
}

/// True when a point on `face` of box `owner` is covered by another box,
/// i.e. it is not on the surface of the union.
pub(crate) fn buried(boxes: &[BoxPiece], owner: usize, p: &Vector3<f64>, normal: &Vector3<f64>) -> bool {
    let probe = p + normal * DEDUP_TOLERANCE;
    boxes.iter().enumerate().any(|(j, b)| {
        j != owner && (b.signed_distance(&probe) < 0.0 || b.signed_distance(p) < -DEDUP_TOLERANCE)
    })
}

/// Area-weighted rejection sampling of `n` points on the admissible surface
/// of a union of boxes. Deterministic for a fixed seed.
pub fn sample_keypoints(boxes: &[BoxPiece], n: usize, mode: KeypointMode, seed: u64) -> Result<KeypointSet> {
    let mut faces = Vec::new();
    let mut cumulative = Vec::new();
    let mut total = 0.0;
    for (bi, b) in boxes.iter().enumerate() {
        for face in Face::all() {
            if !mode.admits(face) {
                continue;
            }
            let area = b.face_area(face);
            if area > 0.0 {
                total += area;
                faces.push((bi, face));
                cumulative.push(total);
            }
        }
    }
    if faces.is_empty() || total <= 0.0 {
        return Err(Error::InvalidAsset("admissible keypoint surface has zero area".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let max_attempts = 1000 * n.max(1);
    let mut attempts = 0;
    while points.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InvalidAsset(
                "admissible keypoint surface is entirely inside the union".into(),
            ));
        }
        let pick = rng.random::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= pick).min(faces.len() - 1);
        let (bi, face) = faces[idx];
        let p = boxes[bi].face_point(face, rng.random(), rng.random());
        let normal = face.normal();
        if buried(boxes, bi, &p, &normal) {
            continue;
        }
        points.push(p);
        normals.push(normal);
    }
    Ok(KeypointSet { points, normals })
}

/// Farthest-point subsampling of `points`, restricted to `candidates`.
/// Returns indices into `points` in selection order.
pub fn farthest_point_subsample(points: &[Vector3<f64>], candidates: &[usize], k: usize, start: usize) -> Vec<usize> {
    if candidates.is_empty() || k == 0 {
        return Vec::new();
    }
    let k = k.min(candidates.len());
    let mut chosen = vec![candidates[start % candidates.len()]];
    let mut dist: Vec<f64> = candidates
        .iter()
        .map(|&c| (points[c] - points[chosen[0]]).norm_squared())
        .collect();
    while chosen.len() < k {
        let (best, _) = dist
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        let next = candidates[best];
        chosen.push(next);
        for (i, &c) in candidates.iter().enumerate() {
            dist[i] = dist[i].min((points[c] - points[next]).norm_squared());
        }
    }
    chosen
}
