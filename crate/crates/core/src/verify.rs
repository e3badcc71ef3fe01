//! Self-checks behind `ballchain verify`: gradient agreement on random
//! configurations, equilibrium invariants and a grid-search oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainConfig, EnergyTerms, FieldSource, Gravity, Vec3};
use crate::design::{BallChainDesign, DesignSpec};
use crate::error::Result;
use crate::magnetics::{chain_pair_energy, UniformField};
use crate::mechanics::angle_between;
use crate::scenario::preset;
use crate::shape::{solve_shape, Extent, InitialShape, Shape, ShapeProblem};
use crate::solver::{check_gradient, SolveOptions};

/// Uniformly distributed unit vector.
pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random chain: each link bends from the previous by up to `max_bend` rad,
/// dipoles point anywhere.
pub fn random_chain(
    n: usize,
    diameter: f64,
    max_bend: f64,
    rng: &mut impl Rng,
) -> Result<ChainConfig> {
    let mut links: Vec<Vec3> = Vec::with_capacity(n.saturating_sub(1));
    let mut prev = Vec3::x();
    for _ in 1..n {
        let axis = random_unit(rng).cross(&prev);
        let next = if axis.norm() < 1e-6 {
            prev
        } else {
            let rot = nalgebra::Rotation3::from_axis_angle(
                &nalgebra::Unit::new_normalize(axis),
                rng.random_range(0.0..max_bend),
            );
            (rot * prev).normalize()
        };
        links.push(next);
        prev = next;
    }
    let mut free = links;
    for _ in 1..n {
        free.push(random_unit(rng));
    }
    ChainConfig::from_free(diameter, Vec3::zeros(), Vec3::x(), &free)
}

/// [`random_chain`] redrawn until no non-adjacent balls overlap.
pub fn random_admissible_chain(
    n: usize,
    diameter: f64,
    max_bend: f64,
    rng: &mut impl Rng,
) -> Result<ChainConfig> {
    loop {
        let c = random_chain(n, diameter, max_bend, rng)?;
        if c.overlaps().is_empty() {
            return Ok(c);
        }
    }
}

/// Worst gradient error over random configurations of one problem variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCase {
    pub n: usize,
    pub skin: bool,
    pub gravity: bool,
    pub configs: usize,
    pub max_relative_error: f64,
}

/// Runs `configs` random admissible configurations for each n, with and
/// without skin and gravity.
pub fn gradient_suite(ns: &[usize], configs: usize, seed: u64) -> Result<Vec<GradientCase>> {
    let design = BallChainDesign::experimental();
    let mut cases = Vec::new();
    for &n in ns {
        for (skin, gravity) in [(false, false), (true, false), (false, true), (true, true)] {
            cases.push((n, skin, gravity));
        }
    }
    cases
        .par_iter()
        .enumerate()
        .map(|(k, &(n, skin, gravity))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let mut worst: f64 = 0.0;
            for _ in 0..configs {
                let field = FieldSource::Uniform(UniformField::along(0.04, random_unit(&mut rng))?);
                let mut problem =
                    ShapeProblem::new(DesignSpec::BallChain(design), Extent::Balls(n), field);
                problem.terms = EnergyTerms {
                    skin,
                    ..EnergyTerms::default()
                };
                if gravity {
                    problem.gravity = Some(Gravity {
                        g: 9.81,
                        up: random_unit(&mut rng),
                    });
                }
                let shape = Shape::Chain(random_admissible_chain(
                    n,
                    design.ball_diameter,
                    1.2,
                    &mut rng,
                )?);
                let model = problem.model()?;
                let x = shape.as_chain().expect("chain").free_vectors();
                worst = worst.max(check_gradient(model.as_ref(), &x)?.max_relative_error);
            }
            Ok(GradientCase {
                n,
                skin,
                gravity,
                configs,
                max_relative_error: worst,
            })
        })
        .collect()
}

/// One named check with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// Largest angle (rad) of any link or dipole away from the base tangent.
pub fn max_deviation(c: &ChainConfig) -> f64 {
    c.link_dirs
        .iter()
        .chain(&c.dipole_dirs)
        .map(|v| angle_between(v, &c.base_tangent))
        .fold(0.0, f64::max)
}

/// Planar three-ball oracle: coarse grid over the four in-plane angles,
/// then compass search around the best cells. Returns (angles rad, energy J)
/// with the first link pointing forward.
pub fn planar_three_ball_oracle(problem: &ShapeProblem, grid_deg: f64) -> Result<([f64; 4], f64)> {
    let DesignSpec::BallChain(d) = problem.design else {
        return Err(crate::Error::InvalidInput(
            "oracle needs a ball chain".into(),
        ));
    };
    let dir = |a: f64| Vec3::new(a.cos(), a.sin(), 0.0);
    let energy = |p: &[f64; 4]| -> f64 {
        ChainConfig::from_free(
            d.ball_diameter,
            Vec3::zeros(),
            Vec3::x(),
            &[dir(p[0]), dir(p[1]), dir(p[2]), dir(p[3])],
        )
        .and_then(|c| problem.energy(&Shape::Chain(c)))
        .map_or(f64::INFINITY, |e| e.total)
    };
    let steps = (360.0 / grid_deg).round() as usize;
    let h = std::f64::consts::TAU / steps as f64;
    let mut cells: Vec<([f64; 4], f64)> = (0..steps.pow(2))
        .into_par_iter()
        .flat_map_iter(|ab| {
            let (a, b) = (ab / steps, ab % steps);
            (0..steps.pow(2)).map(move |cd| (a, b, cd / steps, cd % steps))
        })
        .map(|(a, b, c, e)| {
            let p = [a as f64 * h, b as f64 * h, c as f64 * h, e as f64 * h];
            (p, energy(&p))
        })
        .collect();
    cells.sort_by(|x, y| x.1.total_cmp(&y.1));
    let mut best = ([0.0; 4], f64::INFINITY);
    for (start, f0) in cells.into_iter().take(8) {
        let (mut p, mut f, mut step) = (start, f0, h);
        while step > 1e-10 {
            let mut moved = false;
            for k in 0..4 {
                for s in [step, -step] {
                    let mut q = p;
                    q[k] += s;
                    let fq = energy(&q);
                    if fq < f {
                        (p, f, moved) = (q, fq, true);
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if f < best.1 {
            best = (p, f);
        }
    }
    // without gravity or a clamped base, reversing every link leaves the energy unchanged
    if best.0[0].cos() < 0.0 {
        best.0[0] += std::f64::consts::PI;
        best.0[1] += std::f64::consts::PI;
    }
    Ok(best)
}

/// Full self-check list used by the CLI.
pub fn run_checks(seed: u64, configs: usize) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for c in gradient_suite(&[3, 5, 10], configs, seed)? {
        out.push(check(
            &format!("gradient n={} skin={} gravity={}", c.n, c.skin, c.gravity),
            c.max_relative_error < 1e-6,
            format!(
                "max relative error {:.2e} over {} configs",
                c.max_relative_error, c.configs
            ),
        ));
    }

    let aligned = preset("aligned")?;
    let sol = solve_shape(
        &aligned.problem()?,
        &aligned.solve_options()?,
        &InitialShape::Straight,
    )?;
    let dev = max_deviation(sol.shape.as_chain().expect("chain"));
    out.push(check(
        "aligned field fixed point",
        dev < 1e-6,
        format!("max angle {dev:.2e} rad"),
    ));

    let mut monotone = true;
    let mut planar: f64 = 0.0;
    for name in ["experiment_down", "experiment_up"] {
        let s = preset(name)?;
        let scale = s.problem()?.model()?.energy_scale();
        let problem = s.problem()?;
        let sol = solve_shape(&problem, &s.solve_options()?, &InitialShape::Straight)?;
        planar = sol
            .shape
            .points()
            .iter()
            .map(|p| p.y.abs())
            .fold(planar, f64::max);
        monotone &= sol
            .stats
            .energy_trace
            .windows(2)
            .all(|w| w[1] <= w[0] + 64.0 * f64::EPSILON * (w[0].abs() + scale));
    }
    out.push(check(
        "planar scenarios stay planar",
        planar < 1e-10,
        format!("max out-of-plane {planar:.2e} m"),
    ));
    out.push(check(
        "accepted iterates are energy-monotone",
        monotone,
        String::new(),
    ));

    let d = BallChainDesign::experimental();
    let straight = ChainConfig::straight(3, d.ball_diameter, Vec3::zeros(), Vec3::x())?;
    let u0 = chain_pair_energy(&straight.dipoles(d.ball_moment))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut above = 0;
    for _ in 0..1000 {
        let c = random_chain(3, d.ball_diameter, 0.5, &mut rng)?;
        if chain_pair_energy(&c.dipoles(d.ball_moment))? > u0 {
            above += 1;
        }
    }
    out.push(check(
        "zero-field straight chain is the dipole minimum",
        above == 1000,
        format!("{above}/1000 random configurations above U_b = {u0:.4e} J"),
    ));

    let field = FieldSource::Uniform(UniformField::along(0.04, Vec3::y())?);
    let mut problem = ShapeProblem::new(DesignSpec::BallChain(d), Extent::Balls(3), field);
    problem.terms.skin = false;
    let sol = solve_shape(&problem, &SolveOptions::default(), &InitialShape::Straight)?;
    let (angles, e_oracle) = planar_three_ball_oracle(&problem, 10.0)?;
    let c = sol.shape.as_chain().expect("chain");
    let solver_angles = [
        c.link_dirs[0].y.atan2(c.link_dirs[0].x),
        c.link_dirs[1].y.atan2(c.link_dirs[1].x),
        c.dipole_dirs[1].y.atan2(c.dipole_dirs[1].x),
        c.dipole_dirs[2].y.atan2(c.dipole_dirs[2].x),
    ];
    let worst = solver_angles
        .iter()
        .zip(angles)
        .map(|(a, b)| {
            (a - b + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI
        })
        .map(|x| x.abs().to_degrees())
        .fold(0.0, f64::max);
    let rel = (sol.energy.total - e_oracle).abs() / e_oracle.abs();
    out.push(check(
        "three-ball grid-search oracle",
        worst < 0.5 && rel < 1e-9,
        format!("max angle difference {worst:.2e}°, relative energy difference {rel:.2e}"),
    ));
    Ok(out)
}
