//! Bending energy of the elastic skin (or rod) and gravitational energy.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One constant-curvature skin segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BendSegment {
    pub theta: f64,
    pub rho: f64,
    pub modulus: f64,
    pub second_moment: f64,
}

impl BendSegment {
    /// Builds the segment spanning the joint at `p` between its neighbours.
    pub fn from_points(
        p_prev: Vector3<f64>,
        p: Vector3<f64>,
        p_next: Vector3<f64>,
        diameter: f64,
        modulus: f64,
        second_moment: f64,
    ) -> Result<Self> {
        let theta = bend_angle(p_prev, p, p_next)?;
        let rho = if theta == 0.0 {
            f64::INFINITY
        } else {
            curvature_radius(theta, diameter)?
        };
        Ok(Self {
            theta,
            rho,
            modulus,
            second_moment,
        })
    }

    pub fn energy(&self, diameter: f64) -> f64 {
        segment_bend_energy(self.theta, diameter, self.modulus, self.second_moment)
    }
}

/// A point mass for the gravity term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassPoint {
    pub mass: f64,
    pub position: Vector3<f64>,
}

/// Turning angle at `p` between the segments `p_prev → p` and `p → p_next`, in [0, π].
pub fn bend_angle(p_prev: Vector3<f64>, p: Vector3<f64>, p_next: Vector3<f64>) -> Result<f64> {
    let a = p - p_prev;
    let b = p_next - p;
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return Err(Error::DegenerateGeometry(
            "zero-length segment in bend angle".into(),
        ));
    }
    Ok(angle_between(&a, &b))
}

pub(crate) fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Radius of the arc through the contact points of a joint bent by `theta`.
pub fn curvature_radius(theta: f64, diameter: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < std::f64::consts::PI) {
        return Err(Error::DegenerateGeometry(format!(
            "bend angle {theta} outside (0, π) has no finite curvature radius"
        )));
    }
    Ok(0.5 * diameter / (0.5 * theta).tan())
}

/// Strain energy E·I·θ/(2ρ) of one segment, evaluated as (E·I/d)·θ·tan(θ/2).
pub fn segment_bend_energy(theta: f64, diameter: f64, modulus: f64, second_moment: f64) -> f64 {
    bend_energy(theta, modulus * second_moment / diameter)
}

/// θ·tan(θ/2) scaled by the joint stiffness `k = E·I/d`.
pub(crate) fn bend_energy(theta: f64, k: f64) -> f64 {
    k * theta * (0.5 * theta).tan()
}

/// (dU/dθ)/sin θ for the joint energy, finite at θ = 0 (limit `k`).
///
/// With unit segment directions `a`, `b` the Euclidean gradient of the
/// joint energy is `-c·b` with respect to `a` and `-c·a` with respect to `b`
/// once projected onto the respective tangent spaces.
pub(crate) fn bend_gradient_coefficient(theta: f64, k: f64) -> f64 {
    let half = 0.5 * theta;
    let c = half.cos();
    let sinc = if half.abs() < 1e-4 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    k * (0.5 / (c * c) + 0.5 / (sinc * c * c * c))
}

/// Total skin energy over the interior joints of an ordered point list.
///
/// `stiffness[i]` is the E·I product used at point `i`; a single entry is
/// broadcast to all joints. Fewer than three points give zero energy plus a
/// diagnostic message.
pub fn total_skin_energy(
    points: &[Vector3<f64>],
    stiffness: &[f64],
    diameter: f64,
) -> Result<(f64, Option<String>)> {
    if points.len() < 3 {
        return Ok((
            0.0,
            Some(format!("{} points carry no bending joints", points.len())),
        ));
    }
    if stiffness.len() != 1 && stiffness.len() != points.len() {
        return Err(Error::InvalidInput(format!(
            "stiffness list has {} entries for {} points",
            stiffness.len(),
            points.len()
        )));
    }
    let mut total = 0.0;
    for i in 1..points.len() - 1 {
        let ei = if stiffness.len() == 1 {
            stiffness[0]
        } else {
            stiffness[i]
        };
        let theta = bend_angle(points[i - 1], points[i], points[i + 1])?;
        total += bend_energy(theta, ei / diameter);
    }
    Ok((total, None))
}

/// Gravitational energy Σ mᵢ·g·(up·pᵢ); grows with height along `up`.
pub fn gravity_energy(masses: &[MassPoint], g_magnitude: f64, up: Vector3<f64>) -> Result<f64> {
    if g_magnitude < 0.0 {
        return Err(Error::InvalidInput(
            "gravity magnitude must be non-negative".into(),
        ));
    }
    Ok(masses
        .iter()
        .map(|m| m.mass * g_magnitude * up.dot(&m.position))
        .sum())
}

/// Second moment of area of an annulus (solid rod when `inner` is zero).
pub fn annulus_second_moment(outer: f64, inner: f64) -> f64 {
    std::f64::consts::PI * (outer.powi(4) - inner.powi(4)) / 64.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const D: f64 = 0.9e-3;

    fn v(x: f64, y: f64) -> Vector3<f64> {
        Vector3::new(x, y, 0.0)
    }

    #[test]
    fn bend_angle_examples() {
        assert_eq!(
            bend_angle(v(0.0, 0.0), v(D, 0.0), v(2.0 * D, 0.0)).unwrap(),
            0.0
        );
        assert_relative_eq!(
            bend_angle(v(0.0, 0.0), v(D, 0.0), v(D, D)).unwrap(),
            PI / 2.0,
            epsilon = 1e-15
        );
        let t = 40f64.to_radians();
        let got = bend_angle(v(0.0, 0.0), v(D, 0.0), v(D + D * t.cos(), D * t.sin())).unwrap();
        assert_relative_eq!(got, t, epsilon = 1e-14);
        assert!(bend_angle(v(0.0, 0.0), v(0.0, 0.0), v(1.0, 0.0)).is_err());
    }

    #[test]
    fn curvature_radius_examples() {
        assert_relative_eq!(
            curvature_radius(PI / 2.0, D).unwrap(),
            0.45e-3,
            max_relative = 1e-12
        );
        assert!(curvature_radius(1e-9, D).unwrap() > 1e5);
        let rho0 = 2.7e-3;
        let theta = 2.0 * (D / (2.0 * rho0)).atan();
        assert_relative_eq!(
            curvature_radius(theta, D).unwrap(),
            rho0,
            max_relative = 1e-12
        );
        assert!(curvature_radius(PI, D).is_err());
        assert!(curvature_radius(0.0, D).is_err());
    }

    #[test]
    fn segment_energy_examples() {
        let i = annulus_second_moment(1.0e-3, 0.9e-3);
        assert_relative_eq!(i, 1.689e-14, max_relative = 1e-3);
        assert_eq!(segment_bend_energy(0.0, D, 42.7e3, i), 0.0);
        assert_relative_eq!(
            segment_bend_energy(PI / 2.0, D, 42.7e3, i),
            1.258e-6,
            max_relative = 1e-3
        );
        assert_relative_eq!(
            segment_bend_energy(0.7, D, 42.7e3, 2.0 * i),
            2.0 * segment_bend_energy(0.7, D, 42.7e3, i),
            max_relative = 1e-15
        );
    }

    #[test]
    fn skin_energy_sums_joints() {
        let i = annulus_second_moment(1.0e-3, 0.9e-3);
        let ei = 42.7e3 * i;
        let straight: Vec<_> = (0..10).map(|k| v(k as f64 * D, 0.0)).collect();
        assert_eq!(total_skin_energy(&straight, &[ei], D).unwrap().0, 0.0);

        let mut kinked = straight.clone();
        for (k, p) in kinked.iter_mut().enumerate().skip(5) {
            *p = v(4.0 * D, (k - 4) as f64 * D);
        }
        let (e, _) = total_skin_energy(&kinked, &[ei], D).unwrap();
        assert_relative_eq!(
            e,
            segment_bend_energy(PI / 2.0, D, 42.7e3, i),
            max_relative = 1e-12
        );

        // regular polygon arc: every interior joint turns by the same angle
        let step = 0.3;
        let mut arc = vec![v(0.0, 0.0)];
        for k in 0..8 {
            let a = k as f64 * step;
            let last = *arc.last().unwrap();
            arc.push(last + v(D * a.cos(), D * a.sin()));
        }
        let (e, _) = total_skin_energy(&arc, &[ei], D).unwrap();
        assert_relative_eq!(
            e,
            7.0 * segment_bend_energy(step, D, 42.7e3, i),
            max_relative = 1e-9
        );

        let (e, note) = total_skin_energy(&straight[..2], &[ei], D).unwrap();
        assert_eq!(e, 0.0);
        assert!(note.is_some());
    }

    #[test]
    fn gravity_examples() {
        let ball = MassPoint {
            mass: 0.13e-3,
            position: Vector3::new(0.0, 0.0, 0.01),
        };
        let up = Vector3::z();
        assert_relative_eq!(
            gravity_energy(&[ball], 9.81, up).unwrap(),
            1.275e-5,
            max_relative = 1e-3
        );
        assert_eq!(gravity_energy(&[ball], 0.0, up).unwrap(), 0.0);
        let moved = MassPoint {
            position: Vector3::new(0.3, -0.2, 0.01),
            ..ball
        };
        assert_eq!(
            gravity_energy(&[moved], 9.81, up).unwrap(),
            gravity_energy(&[ball], 9.81, up).unwrap()
        );
        assert!(gravity_energy(&[ball], -1.0, up).is_err());
    }

    #[test]
    fn gradient_coefficient_matches_derivative() {
        let k = 3.0;
        for &theta in &[1e-6, 0.1, 1.0, 2.5] {
            let h = 1e-6;
            let de = (bend_energy(theta + h, k) - bend_energy(theta - h, k)) / (2.0 * h);
            assert_relative_eq!(
                bend_gradient_coefficient(theta, k) * theta.sin(),
                de,
                max_relative = 1e-6
            );
        }
        assert_relative_eq!(bend_gradient_coefficient(0.0, k), k, max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn energy_consistent_with_radius(theta in 1e-6..3.1f64) {
            let e = segment_bend_energy(theta, D, 42.7e3, 1.7e-14);
            let rho = curvature_radius(theta, D).unwrap();
            let back = e * 2.0 * rho / (42.7e3 * 1.7e-14);
            prop_assert!((back - theta).abs() <= 1e-12 * theta);
        }

        #[test]
        fn energy_increasing(a in 0.0..3.1f64, b in 0.0..3.1f64) {
            prop_assume!(a < b);
            prop_assert!(segment_bend_energy(a, D, 1.0, 1.0) < segment_bend_energy(b, D, 1.0, 1.0));
        }

        #[test]
        fn bend_angle_reversal(ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in -1.0..1.0f64,
                               cx in -1.0..1.0f64, cy in -1.0..1.0f64, cz in -1.0..1.0f64) {
            let a = Vector3::new(ax, ay, az);
            let c = Vector3::new(cx, cy, cz);
            prop_assume!(a.norm() > 1e-3 && c.norm() > 1e-3);
            let b = Vector3::zeros();
            prop_assert!((bend_angle(a, b, c).unwrap() - bend_angle(c, b, a).unwrap()).abs() < 1e-14);
        }

        #[test]
        fn skin_energy_rigid_invariant(angles in prop::collection::vec(-1.0..1.0f64, 6), rot in -3.0..3.0f64, tx in -1.0..1.0f64) {
            let mut pts = vec![Vector3::zeros()];
            let mut dir = 0.0;
            for a in &angles {
                dir += a;
                let last = *pts.last().unwrap();
                pts.push(last + Vector3::new(dir.cos(), dir.sin(), 0.3 * a) * D);
            }
            let r = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), rot);
            let moved: Vec<_> = pts.iter().map(|p| r * p + Vector3::new(tx, 0.1, 0.0)).collect();
            let e0 = total_skin_energy(&pts, &[1e-9], D).unwrap().0;
            let e1 = total_skin_energy(&moved, &[1e-9], D).unwrap().0;
            prop_assert!((e0 - e1).abs() <= 1e-10 * e0.abs().max(1e-18));
        }

        #[test]
        fn gravity_linear(mass in 0.0..1.0f64, g in 0.0..20.0f64, z in -1.0..1.0f64) {
            let p = MassPoint { mass, position: Vector3::new(0.2, 0.1, z) };
            let e1 = gravity_energy(&[p], g, Vector3::z()).unwrap();
            let e2 = gravity_energy(&[p], 2.0 * g, Vector3::z()).unwrap();
            let e3 = gravity_energy(&[MassPoint { mass: 2.0 * mass, ..p }], g, Vector3::z()).unwrap();
            prop_assert!((e2 - 2.0 * e1).abs() <= 1e-15 * e1.abs().max(1e-300));
            prop_assert!((e3 - 2.0 * e1).abs() <= 1e-15 * e1.abs().max(1e-300));
        }
    }
}
