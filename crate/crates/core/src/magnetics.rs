//! Point-dipole fields and magnetic potential energies.
//!
//! Every magnet in the model (chain balls, the tip magnet, distributed rod
//! elements and the external steering magnet) is treated as a point dipole.
//! The pair helpers also return the partial derivatives needed by the
//! solver, so the energy and its gradient are always computed from the
//! same closed form.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permeability in T·m/A.
pub const MU0: f64 = 4.0e-7 * PI;

/// Default separation below which field evaluation is refused.
pub const DEFAULT_R_MIN: f64 = 1.0e-6;

const MU0_OVER_4PI: f64 = 1.0e-7;

/// A point dipole with position in m and moment in A·m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dipole {
    pub position: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl Dipole {
    pub fn new(position: Vector3<f64>, moment: Vector3<f64>) -> Self {
        Self { position, moment }
    }
}

/// A homogeneous field in T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformField {
    pub b: Vector3<f64>,
}

impl UniformField {
    /// Largest accepted field magnitude in T.
    pub const MAX_MAGNITUDE: f64 = 1.0;

    pub fn new(b: Vector3<f64>) -> Result<Self> {
        if !b.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInput(
                "uniform field has non-finite components".into(),
            ));
        }
        if b.norm() > Self::MAX_MAGNITUDE {
            return Err(Error::InvalidInput(format!(
                "uniform field magnitude {:.4} T exceeds {} T",
                b.norm(),
                Self::MAX_MAGNITUDE
            )));
        }
        Ok(Self { b })
    }

    /// Field of magnitude `tesla` along the (not necessarily unit) direction.
    pub fn along(tesla: f64, direction: Vector3<f64>) -> Result<Self> {
        let n = direction.norm();
        if n == 0.0 {
            return Err(Error::InvalidInput("field direction is zero".into()));
        }
        Self::new(direction * (tesla / n))
    }
}

/// Magnetic flux density at offset `r` from a dipole of moment `m`.
pub fn dipole_field(r: Vector3<f64>, m: Vector3<f64>) -> Result<Vector3<f64>> {
    dipole_field_guarded(r, m, DEFAULT_R_MIN)
}

/// Same as [`dipole_field`] with an explicit singularity guard radius.
pub fn dipole_field_guarded(r: Vector3<f64>, m: Vector3<f64>, r_min: f64) -> Result<Vector3<f64>> {
    let dist = r.norm();
    if dist < r_min {
        return Err(Error::Singularity {
            first: "field point".into(),
            second: "dipole".into(),
            distance: dist,
        });
    }
    Ok(field_unchecked(r, m))
}

pub(crate) fn field_unchecked(r: Vector3<f64>, m: Vector3<f64>) -> Vector3<f64> {
    let r2 = r.norm_squared();
    let dist = r2.sqrt();
    let inv_r3 = 1.0 / (r2 * dist);
    let rhat = r / dist;
    (rhat * (3.0 * m.dot(&rhat)) - m) * (MU0_OVER_4PI * inv_r3)
}

/// Potential energy −m·B of a dipole in a field.
pub fn dipole_energy(m: Vector3<f64>, b: Vector3<f64>) -> f64 {
    -m.dot(&b)
}

/// Interaction energy of two dipoles `a` and `b` separated by `r` (from a to b)
/// together with ∂U/∂a, ∂U/∂b and ∂U/∂r.
pub(crate) struct PairTerms {
    pub energy: f64,
    pub d_a: Vector3<f64>,
    pub d_b: Vector3<f64>,
    pub d_r: Vector3<f64>,
}

pub(crate) fn pair_terms(r: Vector3<f64>, a: Vector3<f64>, b: Vector3<f64>) -> PairTerms {
    let r2 = r.norm_squared();
    let dist = r2.sqrt();
    let inv_r3 = 1.0 / (r2 * dist);
    let inv_r5 = inv_r3 / r2;
    let ar = a.dot(&r);
    let br = b.dot(&r);
    let ab = a.dot(&b);
    let k = MU0_OVER_4PI;

    let energy = -k * (3.0 * ar * br * inv_r5 - ab * inv_r3);
    let d_a = -(r * (3.0 * br * inv_r5) - b * inv_r3) * k;
    let d_b = -(r * (3.0 * ar * inv_r5) - a * inv_r3) * k;
    let d_r = -(a * (3.0 * br * inv_r5)
        + b * (3.0 * ar * inv_r5)
        + r * (3.0 * ab * inv_r5 - 15.0 * ar * br * inv_r5 / r2))
        * k;
    PairTerms {
        energy,
        d_a,
        d_b,
        d_r,
    }
}

/// Mutual energy of a set of dipoles, each unordered pair counted once.
pub fn chain_pair_energy(dipoles: &[Dipole]) -> Result<f64> {
    let mut total = 0.0;
    for (i, di) in dipoles.iter().enumerate() {
        for (j, dj) in dipoles.iter().enumerate().skip(i + 1) {
            let r = dj.position - di.position;
            if r.norm() < DEFAULT_R_MIN {
                return Err(Error::Singularity {
                    first: format!("ball {}", i + 1),
                    second: format!("ball {}", j + 1),
                    distance: r.norm(),
                });
            }
            total += dipole_energy(dj.moment, field_unchecked(r, di.moment));
        }
    }
    Ok(total)
}

/// Energy of the external magnet acting on a chain, with warnings for balls
/// closer than the magnet diameter (where the point-dipole model degrades).
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalEnergy {
    pub energy: f64,
    pub warnings: Vec<String>,
}

pub fn external_magnet_energy(
    chain: &[Dipole],
    magnet: &Dipole,
    magnet_diameter: Option<f64>,
) -> Result<ExternalEnergy> {
    let mut energy = 0.0;
    let mut warnings = Vec::new();
    for (i, ball) in chain.iter().enumerate() {
        let r = ball.position - magnet.position;
        let dist = r.norm();
        if dist < DEFAULT_R_MIN {
            return Err(Error::Singularity {
                first: format!("ball {}", i + 1),
                second: "external magnet".into(),
                distance: dist,
            });
        }
        if let Some(diam) = magnet_diameter {
            if dist <= diam {
                warnings.push(format!(
                    "ball {} is {:.1} mm from the external magnet, inside its {:.1} mm diameter; dipole model may be inaccurate",
                    i + 1,
                    dist * 1e3,
                    diam * 1e3
                ));
            }
        }
        energy += dipole_energy(ball.moment, field_unchecked(r, magnet.moment));
    }
    Ok(ExternalEnergy { energy, warnings })
}

/// Moment of a uniformly magnetized body, |m| = B_r V / μ₀.
pub fn moment_from_remanence(remanence: f64, volume: f64) -> f64 {
    remanence * volume / MU0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const M_BALL: f64 = 4.495e-4;

    fn sphere_volume(d: f64) -> f64 {
        PI / 6.0 * d.powi(3)
    }

    #[test]
    fn on_axis_field_matches_closed_form() {
        let b = dipole_field(Vector3::new(0.0, 0.0, 0.01), Vector3::new(0.0, 0.0, M_BALL)).unwrap();
        let closed = MU0 * M_BALL / (2.0 * PI * 1e-6);
        assert_relative_eq!(b.z, closed, max_relative = 1e-12);
        assert_relative_eq!(b.z, 8.99e-5, max_relative = 1e-3);
        assert_eq!(b.x, 0.0);
        assert_eq!(b.y, 0.0);
    }

    #[test]
    fn equatorial_field_is_half_and_reversed() {
        let r = 0.01;
        let b = dipole_field(Vector3::new(r, 0.0, 0.0), Vector3::new(0.0, 0.0, M_BALL)).unwrap();
        assert_relative_eq!(
            b.z,
            -MU0 * M_BALL / (4.0 * PI * r.powi(3)),
            max_relative = 1e-12
        );
        let axial =
            dipole_field(Vector3::new(0.0, 0.0, r), Vector3::new(0.0, 0.0, M_BALL)).unwrap();
        assert_relative_eq!(axial.norm() / b.norm(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_moment_gives_zero_field() {
        let b = dipole_field(Vector3::new(0.3, -0.2, 0.1), Vector3::zeros()).unwrap();
        assert_eq!(b, Vector3::zeros());
    }

    #[test]
    fn singular_offset_is_rejected() {
        let err = dipole_field(Vector3::new(1e-7, 0.0, 0.0), Vector3::x()).unwrap_err();
        assert!(matches!(err, Error::Singularity { .. }));
    }

    #[test]
    fn dipole_energy_examples() {
        let m = Vector3::new(0.0, 0.0, M_BALL);
        assert_relative_eq!(
            dipole_energy(m, Vector3::new(0.0, 0.0, 0.04)),
            -1.798e-5,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            dipole_energy(m, Vector3::new(0.0, 0.0, -0.04)),
            1.798e-5,
            max_relative = 1e-12
        );
        assert_eq!(dipole_energy(m, Vector3::new(0.04, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn touching_experimental_pair() {
        let d = 3.175e-3;
        let m = moment_from_remanence(1.32, sphere_volume(d));
        assert_relative_eq!(m, 1.760e-2, max_relative = 1e-3);
        let a = Dipole::new(Vector3::zeros(), Vector3::new(m, 0.0, 0.0));
        let b = Dipole::new(Vector3::new(d, 0.0, 0.0), Vector3::new(m, 0.0, 0.0));
        let e = chain_pair_energy(&[a, b]).unwrap();
        assert_relative_eq!(
            e,
            -MU0 * m * m / (2.0 * PI * d.powi(3)),
            max_relative = 1e-12
        );
        assert_relative_eq!(e, -1.936e-3, max_relative = 1e-3);

        let flipped = Dipole::new(b.position, -b.moment);
        let e_anti = chain_pair_energy(&[a, flipped]).unwrap();
        assert_relative_eq!(e_anti, -e, max_relative = 1e-12);
    }

    #[test]
    fn three_ball_chain_is_sum_of_pairs() {
        let d = 0.9e-3;
        let mom = Vector3::new(M_BALL, 0.0, 0.0);
        let balls: Vec<_> = (0..3)
            .map(|i| Dipole::new(Vector3::new(i as f64 * d, 0.0, 0.0), mom))
            .collect();
        let touching = chain_pair_energy(&balls[..2]).unwrap();
        let total = chain_pair_energy(&balls).unwrap();
        assert_relative_eq!(total, touching * (2.0 + 1.0 / 8.0), max_relative = 1e-12);
    }

    #[test]
    fn coincident_balls_name_the_pair() {
        let balls = [
            Dipole::new(Vector3::zeros(), Vector3::x()),
            Dipole::new(Vector3::new(1.0, 0.0, 0.0), Vector3::x()),
            Dipole::new(Vector3::zeros(), Vector3::x()),
        ];
        match chain_pair_energy(&balls).unwrap_err() {
            Error::Singularity { first, second, .. } => {
                assert_eq!(first, "ball 1");
                assert_eq!(second, "ball 3");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn external_magnet_on_axis() {
        let me = moment_from_remanence(1.48, PI * 0.0381f64.powi(2) * 0.0381);
        assert_relative_eq!(me, 204.6, max_relative = 1e-3);
        let magnet = Dipole::new(Vector3::zeros(), Vector3::new(me, 0.0, 0.0));
        let ball = Dipole::new(Vector3::new(0.2, 0.0, 0.0), Vector3::new(M_BALL, 0.0, 0.0));
        let b = MU0 * me / (2.0 * PI * 0.008);
        assert_relative_eq!(b, 5.12e-3, max_relative = 1e-3);
        let out = external_magnet_energy(&[ball], &magnet, Some(0.0762)).unwrap();
        assert_relative_eq!(out.energy, -M_BALL * b, max_relative = 1e-12);
        assert!(out.warnings.is_empty());

        assert_eq!(
            external_magnet_energy(&[], &magnet, None).unwrap().energy,
            0.0
        );

        // equatorial ball with its moment perpendicular to the local field
        let side = Dipole::new(Vector3::new(0.0, 0.2, 0.0), Vector3::new(0.0, 0.0, M_BALL));
        assert_eq!(
            external_magnet_energy(&[side], &magnet, None)
                .unwrap()
                .energy,
            0.0
        );
    }

    #[test]
    fn close_magnet_warns_without_failing() {
        let magnet = Dipole::new(Vector3::zeros(), Vector3::new(200.0, 0.0, 0.0));
        let ball = Dipole::new(Vector3::new(0.05, 0.0, 0.0), Vector3::new(M_BALL, 0.0, 0.0));
        let out = external_magnet_energy(&[ball], &magnet, Some(0.0762)).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.energy < 0.0);
    }

    #[test]
    fn pair_terms_agree_with_field_form() {
        let r = Vector3::new(1.1e-3, -0.4e-3, 0.3e-3);
        let a = Vector3::new(1e-4, 2e-4, -3e-4);
        let b = Vector3::new(-2e-4, 1e-4, 4e-4);
        let t = pair_terms(r, a, b);
        assert_relative_eq!(
            t.energy,
            -b.dot(&field_unchecked(r, a)),
            max_relative = 1e-12
        );
        let h = 1e-10;
        for k in 0..3 {
            let mut e = Vector3::zeros();
            e[k] = h;
            let fd = (pair_terms(r + e, a, b).energy - pair_terms(r - e, a, b).energy) / (2.0 * h);
            assert_relative_eq!(t.d_r[k], fd, max_relative = 1e-5);
        }
        assert_relative_eq!(t.d_a, -field_unchecked(r, b), max_relative = 1e-12);
        assert_relative_eq!(t.d_b, -field_unchecked(r, a), max_relative = 1e-12);
    }

    fn arb_vec(scale: f64) -> impl Strategy<Value = Vector3<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_map(move |(x, y, z)| Vector3::new(x, y, z) * scale)
    }

    proptest! {
        #[test]
        fn field_is_divergence_free(r in arb_vec(0.05), m in arb_vec(1e-3)) {
            prop_assume!(r.norm() > 5e-3);
            let h = 1e-7;
            let mut div = 0.0;
            for k in 0..3 {
                let mut e = Vector3::zeros();
                e[k] = h;
                div += (field_unchecked(r + e, m)[k] - field_unchecked(r - e, m)[k]) / (2.0 * h);
            }
            let scale = field_unchecked(r, m).norm().max(1e-30) / r.norm();
            prop_assert!(div.abs() < 1e-6 * scale);
        }

        #[test]
        fn pair_energy_invariant_under_rigid_motion(
            pts in prop::collection::vec(arb_vec(5e-3), 4),
            moms in prop::collection::vec(arb_vec(1e-3), 4),
            axis in arb_vec(1.0),
            angle in -3.0..3.0f64,
            shift in arb_vec(0.1),
        ) {
            prop_assume!(axis.norm() > 0.1);
            for i in 0..4 { for j in i + 1..4 { prop_assume!((pts[i] - pts[j]).norm() > 5e-4); } }
            let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
            let set: Vec<_> = pts.iter().zip(&moms).map(|(p, m)| Dipole::new(*p, *m)).collect();
            let moved: Vec<_> = set.iter().map(|d| Dipole::new(rot * d.position + shift, rot * d.moment)).collect();
            let reversed: Vec<_> = set.iter().rev().copied().collect();
            let e0 = chain_pair_energy(&set).unwrap();
            let scale: f64 = {
                let mut s = 0.0;
                for i in 0..4 { for j in i + 1..4 {
                    s += pair_terms(pts[j] - pts[i], moms[i], moms[j]).energy.abs();
                } }
                s
            };
            prop_assert!((chain_pair_energy(&moved).unwrap() - e0).abs() <= 1e-10 * scale);
            prop_assert!((chain_pair_energy(&reversed).unwrap() - e0).abs() <= 1e-12 * scale);
        }

        #[test]
        fn pair_energy_scales_inverse_cube(
            pts in prop::collection::vec(arb_vec(5e-3), 3),
            moms in prop::collection::vec(arb_vec(1e-3), 3),
            s in 0.2..5.0f64,
        ) {
            for i in 0..3 { for j in i + 1..3 { prop_assume!((pts[i] - pts[j]).norm() > 5e-4); } }
            let set: Vec<_> = pts.iter().zip(&moms).map(|(p, m)| Dipole::new(*p, *m)).collect();
            let scaled: Vec<_> = set.iter().map(|d| Dipole::new(d.position * s, d.moment)).collect();
            let e0 = chain_pair_energy(&set).unwrap();
            let e1 = chain_pair_energy(&scaled).unwrap();
            let mut mag = 0.0;
            for i in 0..3 { for j in i + 1..3 {
                mag += pair_terms(pts[j] - pts[i], moms[i], moms[j]).energy.abs();
            } }
            prop_assert!((e1 * s.powi(3) - e0).abs() <= 1e-10 * mag);
        }
    }
}
