use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Axis-aligned box in the object frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxPiece {
    pub center: Vector3<f64>,
    pub half_extents: Vector3<f64>,
}

/// Closest surface feature of a box to a query point.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceQuery {
    /// Signed distance, negative inside.
    pub distance: f64,
    /// Closest point on the box surface.
    pub point: Vector3<f64>,
    /// Outward unit normal at `point`, oriented towards the query point when
    /// outside.
    pub normal: Vector3<f64>,
}

/// One face of a box: `axis` in 0..3, `sign` ±1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub sign: i8,
}

impl Face {
    pub fn normal(&self) -> Vector3<f64> {
        let mut n = Vector3::zeros();
        n[self.axis] = f64::from(self.sign);
        n
    }

    pub fn all() -> [Face; 6] {
        let mut out = [Face { axis: 0, sign: 1 }; 6];
        for axis in 0..3 {
            out[2 * axis] = Face { axis, sign: 1 };
            out[2 * axis + 1] = Face { axis, sign: -1 };
        }
        out
    }
}

impl BoxPiece {
    pub fn new(center: Vector3<f64>, half_extents: Vector3<f64>) -> Self {
        Self {
            center,
            half_extents,
        }
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        let d = (p - self.center).abs() - self.half_extents;
        let outside = d.map(|v| v.max(0.0)).norm();
        let inside = d.max().min(0.0);
        outside + inside
    }

    pub fn closest(&self, p: &Vector3<f64>) -> SurfaceQuery {
        let local = p - self.center;
        let h = self.half_extents;
        let q = local.abs() - h;
        if q.max() > 0.0 {
            let clamped = Vector3::new(
                local.x.clamp(-h.x, h.x),
                local.y.clamp(-h.y, h.y),
                local.z.clamp(-h.z, h.z),
            );
            let diff = local - clamped;
            let dist = diff.norm();
            let normal = if dist > 1e-12 {
                diff / dist
            } else {
                self.face_normal_for(&local, &q)
            };
            SurfaceQuery {
                distance: dist,
                point: clamped + self.center,
                normal,
            }
        } else {
            // Inside or on the surface: exit through the nearest face.
            let axis = q.imax();
            let sign = if local[axis] >= 0.0 { 1.0 } else { -1.0 };
            let mut point = local;
            point[axis] = sign * h[axis];
            let mut normal = Vector3::zeros();
            normal[axis] = sign;
            SurfaceQuery {
                distance: q[axis],
                point: point + self.center,
                normal,
            }
        }
    }

    fn face_normal_for(&self, local: &Vector3<f64>, q: &Vector3<f64>) -> Vector3<f64> {
        let axis = q.imax();
        let mut n = Vector3::zeros();
        n[axis] = if local[axis] >= 0.0 { 1.0 } else { -1.0 };
        n
    }

    /// The eight corners, ordered by the bit pattern (x, y, z) of the sign.
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let mut out = [Vector3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let s = Vector3::new(
                if i & 1 == 0 { -1.0 } else { 1.0 },
                if i & 2 == 0 { -1.0 } else { 1.0 },
                if i & 4 == 0 { -1.0 } else { 1.0 },
            );
            *c = self.center + s.component_mul(&self.half_extents);
        }
        out
    }

    pub fn face_area(&self, face: Face) -> f64 {
        let (a, b) = other_axes(face.axis);
        4.0 * self.half_extents[a] * self.half_extents[b]
    }

    /// Point on `face` for face-local coordinates `(s, t) ∈ [0, 1]²`.
    pub fn face_point(&self, face: Face, s: f64, t: f64) -> Vector3<f64> {
        let (a, b) = other_axes(face.axis);
        let h = self.half_extents;
        let mut local = Vector3::zeros();
        local[face.axis] = f64::from(face.sign) * h[face.axis];
        local[a] = (2.0 * s - 1.0) * h[a];
        local[b] = (2.0 * t - 1.0) * h[b];
        self.center + local
    }

    pub fn min(&self) -> Vector3<f64> {
        self.center - self.half_extents
    }

    pub fn max(&self) -> Vector3<f64> {
        self.center + self.half_extents
    }
}

fn other_axes(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Signed distance to a union of boxes (exact outside, conservative inside).
pub fn union_signed_distance(boxes: &[BoxPiece], p: &Vector3<f64>) -> f64 {
    boxes
        .iter()
        .map(|b| b.signed_distance(p))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube() -> BoxPiece {
        BoxPiece::new(Vector3::zeros(), Vector3::repeat(0.05))
    }

    #[test]
    fn point_box_distance_outside_face() {
        let b = unit_cube();
        let q = b.closest(&Vector3::new(0.06, 0.01, -0.02));
        assert!((q.distance - 0.01).abs() < 1e-15);
        assert_eq!(q.normal, Vector3::x());
        assert!((q.point - Vector3::new(0.05, 0.01, -0.02)).norm() < 1e-15);
    }

    #[test]
    fn point_box_distance_edge_region() {
        let b = unit_cube();
        let q = b.closest(&Vector3::new(0.08, 0.09, 0.0));
        assert!((q.distance - 0.05).abs() < 1e-12);
        assert!((q.normal - Vector3::new(0.6, 0.8, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn inside_exits_nearest_face() {
        let b = unit_cube();
        let q = b.closest(&Vector3::new(0.0, -0.045, 0.0));
        assert!((q.distance + 0.005).abs() < 1e-15);
        assert_eq!(q.normal, -Vector3::y());
        assert!((b.signed_distance(&Vector3::new(0.0, -0.045, 0.0)) - q.distance).abs() < 1e-15);
    }

    #[test]
    fn corners_lie_on_box() {
        for c in unit_cube().corners() {
            assert!(c.iter().all(|v| (v.abs() - 0.05).abs() < 1e-15));
        }
    }
}
