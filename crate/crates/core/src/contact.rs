//! Soft unilateral contact: channel walls and non-adjacent ball overlap.
//!
//! Each penetration depth δ contributes ½kδ². Walls are line segments in the
//! xy plane and act on the xy components of ball centers only. A closed
//! channel region can be used instead of loose walls; its signed distance
//! keeps pushing a ball back even after its center has crossed the boundary.

use serde::{Deserialize, Serialize};

use crate::chain::Vec3;

/// A wall segment in the xy plane, coordinates in m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Wall {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Self {
        Self { a, b }
    }

    /// Closest point on the segment to `p` (xy only).
    pub fn closest_point(&self, p: [f64; 2]) -> [f64; 2] {
        let ab = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let ap = [p[0] - self.a[0], p[1] - self.a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let t = if len2 > 0.0 {
            ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        [self.a[0] + t * ab[0], self.a[1] + t * ab[1]]
    }

    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let q = self.closest_point(p);
        (p[0] - q[0]).hypot(p[1] - q[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    pub energy: f64,
    /// ∂E/∂pᵢ for every ball.
    pub gradient: Vec<Vec3>,
    pub max_penetration: f64,
}

/// Wall penalty for balls of radius `radius` with stiffness `k` (J/m²).
pub fn wall_penalty(positions: &[Vec3], walls: &[Wall], radius: f64, k: f64) -> Penalty {
    let mut energy = 0.0;
    let mut gradient = vec![Vec3::zeros(); positions.len()];
    let mut max_penetration: f64 = 0.0;
    for (i, p) in positions.iter().enumerate() {
        let pt = [p.x, p.y];
        for w in walls {
            let q = w.closest_point(pt);
            let dx = pt[0] - q[0];
            let dy = pt[1] - q[1];
            let dist = dx.hypot(dy);
            let delta = radius - dist;
            if delta <= 0.0 {
                continue;
            }
            max_penetration = max_penetration.max(delta);
            energy += 0.5 * k * delta * delta;
            if dist > 0.0 {
                // d(dist)/dp = (p - q)/dist
                gradient[i].x -= k * delta * dx / dist;
                gradient[i].y -= k * delta * dy / dist;
            }
        }
    }
    Penalty {
        energy,
        gradient,
        max_penetration,
    }
}

/// Penalty against leaving the closed polygon `region` (xy, counter-clockwise
/// or clockwise). Penetration is `radius - signed distance`, with the signed
/// distance positive inside.
pub fn region_penalty(positions: &[Vec3], region: &[[f64; 2]], radius: f64, k: f64) -> Penalty {
    let mut energy = 0.0;
    let mut gradient = vec![Vec3::zeros(); positions.len()];
    let mut max_penetration: f64 = 0.0;
    let n = region.len();
    for (i, p) in positions.iter().enumerate() {
        let pt = [p.x, p.y];
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for e in 0..n {
            let w = Wall::new(region[e], region[(e + 1) % n]);
            let q = w.closest_point(pt);
            let dist = (pt[0] - q[0]).hypot(pt[1] - q[1]);
            if dist < best.0 {
                best = (dist, q);
            }
        }
        let (dist, q) = best;
        let inside = crate::navigation::point_in_polygon(pt, region);
        let signed = if inside { dist } else { -dist };
        let delta = radius - signed;
        if delta <= 0.0 || !dist.is_finite() {
            continue;
        }
        max_penetration = max_penetration.max(delta);
        energy += 0.5 * k * delta * delta;
        if dist > 0.0 {
            // d(signed)/dp = ±(p - q)/dist, pointing into the region
            let s = if inside { 1.0 } else { -1.0 };
            gradient[i].x -= k * delta * s * (pt[0] - q[0]) / dist;
            gradient[i].y -= k * delta * s * (pt[1] - q[1]) / dist;
        }
    }
    Penalty {
        energy,
        gradient,
        max_penetration,
    }
}

/// Overlap penalty between balls at least two apart in the chain.
pub fn self_contact_penalty(positions: &[Vec3], diameter: f64, k: f64) -> Penalty {
    let mut energy = 0.0;
    let mut gradient = vec![Vec3::zeros(); positions.len()];
    let mut max_penetration: f64 = 0.0;
    for i in 0..positions.len() {
        for j in i + 2..positions.len() {
            let r = positions[j] - positions[i];
            let dist = r.norm();
            let delta = diameter - dist;
            if delta <= 0.0 {
                continue;
            }
            max_penetration = max_penetration.max(delta);
            energy += 0.5 * k * delta * delta;
            if dist > 0.0 {
                let g = r * (-k * delta / dist);
                gradient[j] += g;
                gradient[i] -= g;
            }
        }
    }
    Penalty {
        energy,
        gradient,
        max_penetration,
    }
}
