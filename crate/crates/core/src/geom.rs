//! Closed-polyline geometry for RoA/TLRoA boundaries: orientation, area,
//! point membership, neighbor translation, and self-intersection repair.

use crate::params::State;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Metadata carried with an estimated boundary.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub scenario_hash: String,
    pub sample_count: usize,
    pub sampler_loss: Option<f64>,
    /// Neighbor index if the curve was translated by 2*pi*k.
    pub neighbor_k: i32,
    /// Set when a self-intersection was repaired or the sampler goal unmet.
    pub warnings: Vec<String>,
}

/// Closed, positively oriented polyline in the (delta, delta_dot) plane.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub vertices: Vec<State>,
    /// Backward horizon that produced the curve [s].
    pub t_back: f64,
    pub metadata: CurveMetadata,
}

/// Distance below which a point counts as lying on an edge (and inside).
pub const EDGE_TOL: f64 = 1e-12;

impl BoundaryCurve {
    /// Build from ordered vertices: enforces counterclockwise orientation
    /// and repairs self-intersections by discarding the smaller loop.
    pub fn new(mut vertices: Vec<State>, t_back: f64, mut metadata: CurveMetadata) -> Self {
        assert!(vertices.len() >= 3, "boundary needs at least 3 vertices");
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        if let Some(repaired) = repair_self_intersection(&vertices) {
            metadata
                .warnings
                .push("self-intersecting boundary repaired by dropping the smaller loop".into());
            vertices = repaired;
            if signed_area(&vertices) < 0.0 {
                vertices.reverse();
            }
        }
        BoundaryCurve {
            vertices,
            t_back,
            metadata,
        }
    }

    /// Every vertex shifted by (2*pi*k, 0).
    pub fn translated(&self, k: i32) -> BoundaryCurve {
        let shift = 2.0 * PI * k as f64;
        let mut meta = self.metadata.clone();
        meta.neighbor_k = self.metadata.neighbor_k + k;
        BoundaryCurve {
            vertices: self
                .vertices
                .iter()
                .map(|v| State::new(v.x1 + shift, v.x2))
                .collect(),
            t_back: self.t_back,
            metadata: meta,
        }
    }

    /// Even-odd ray-casting membership; points within `EDGE_TOL` of an edge
    /// count as inside.
    pub fn contains(&self, p: State) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if point_segment_distance(p, a, b) <= EDGE_TOL {
                return true;
            }
            // Horizontal ray toward +x1; half-open rule on x2 avoids double
            // counting at shared vertices.
            if (a.x2 > p.x2) != (b.x2 > p.x2) {
                let x_cross = a.x1 + (p.x2 - a.x2) / (b.x2 - a.x2) * (b.x1 - a.x1);
                if p.x1 < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Shoelace area; positive for the enforced counterclockwise orientation.
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn is_simple(&self) -> bool {
        find_self_intersection(&self.vertices).is_none()
    }
}

pub fn signed_area(vertices: &[State]) -> f64 {
    let n = vertices.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        s += a.x1 * b.x2 - b.x1 * a.x2;
    }
    s / 2.0
}

fn point_segment_distance(p: State, a: State, b: State) -> f64 {
    let abx = b.x1 - a.x1;
    let aby = b.x2 - a.x2;
    let apx = p.x1 - a.x1;
    let apy = p.x2 - a.x2;
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    };
    let dx = apx - t * abx;
    let dy = apy - t * aby;
    (dx * dx + dy * dy).sqrt()
}

/// Symmetric Hausdorff distance between two closed polylines.
pub fn hausdorff_distance(a: &[State], b: &[State]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

fn directed_hausdorff(from: &[State], to: &[State]) -> f64 {
    let n = to.len();
    from.iter()
        .map(|p| {
            (0..n)
                .map(|i| point_segment_distance(*p, to[i], to[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn segments_properly_intersect(p1: State, p2: State, q1: State, q2: State) -> Option<State> {
    let d1x = p2.x1 - p1.x1;
    let d1y = p2.x2 - p1.x2;
    let d2x = q2.x1 - q1.x1;
    let d2y = q2.x2 - q1.x2;
    let denom = d1x * d2y - d1y * d2x;
    if denom == 0.0 {
        return None;
    }
    let sx = q1.x1 - p1.x1;
    let sy = q1.x2 - p1.x2;
    let t = (sx * d2y - sy * d2x) / denom;
    let u = (sx * d1y - sy * d1x) / denom;
    let eps = 1e-12;
    if t > eps && t < 1.0 - eps && u > eps && u < 1.0 - eps {
        Some(State::new(p1.x1 + t * d1x, p1.x2 + t * d1y))
    } else {
        None
    }
}

/// First proper crossing between non-adjacent edges, as
/// (edge_i, edge_j, crossing point) with i < j.
fn find_self_intersection(vertices: &[State]) -> Option<(usize, usize, State)> {
    let n = vertices.len();
    for i in 0..n {
        let a1 = vertices[i];
        let a2 = vertices[(i + 1) % n];
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue; // adjacent through the wrap-around
            }
            let b1 = vertices[j];
            let b2 = vertices[(j + 1) % n];
            if let Some(x) = segments_properly_intersect(a1, a2, b1, b2) {
                return Some((i, j, x));
            }
        }
    }
    None
}

/// Split a figure-eight at its first crossing and keep the larger loop.
/// Returns None when the polyline is already simple. Repeats until simple
/// (bounded by the vertex count).
fn repair_self_intersection(vertices: &[State]) -> Option<Vec<State>> {
    let mut current = vertices.to_vec();
    let mut repaired = false;
    for _ in 0..vertices.len() {
        match find_self_intersection(&current) {
            None => break,
            Some((i, j, x)) => {
                // Loop A: x -> v[i+1..=j] -> x ; loop B: the complement.
                let mut loop_a = vec![x];
                loop_a.extend_from_slice(&current[(i + 1)..=j]);
                let mut loop_b = vec![x];
                loop_b.extend_from_slice(&current[(j + 1)..]);
                loop_b.extend_from_slice(&current[..=i]);
                current = if signed_area(&loop_a).abs() >= signed_area(&loop_b).abs() {
                    loop_a
                } else {
                    loop_b
                };
                repaired = true;
            }
        }
    }
    repaired.then_some(current)
}
