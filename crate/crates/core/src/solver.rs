//! Limited-memory quasi-Newton descent on a product of unit spheres.
//!
//! Search directions come from the L-BFGS two-loop recursion applied to the
//! tangent-space gradient. Each trial step moves every vector along its
//! tangent direction and is retracted back onto the sphere by
//! normalization. A backtracking line search (Armijo condition) keeps the
//! energy from increasing. Once the predicted decrease drops below the
//! floating-point resolution of the energy, steps are accepted when they
//! reduce the gradient norm and stay within that resolution.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::Vec3;
use crate::error::{Error, Result};
use crate::model::EnergyModel;

/// Stop reason reported when `max_iterations` runs out.
pub const ITERATION_LIMIT: &str = "iteration limit reached";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Gradient-norm tolerance relative to the model's energy scale (per radian).
    pub grad_tol: f64,
    /// Relative energy change allowed over the last five iterations at convergence.
    pub energy_tol: f64,
    /// Smallest line-search step (in radians of rotation) before giving up.
    pub step_tol: f64,
    pub memory: usize,
    /// Largest rotation of any single vector in one step, rad.
    pub max_rotation: f64,
    pub gradient: GradientMode,
    /// Extra randomized starts for cold solves; lowest energy wins.
    pub restarts: usize,
    /// Perturbation amplitude of the restarts, rad.
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            grad_tol: 1e-10,
            energy_tol: 1e-12,
            step_tol: 1e-16,
            memory: 12,
            max_rotation: 0.5,
            gradient: GradientMode::Analytic,
            restarts: 4,
            perturbation: 0.05,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput(
                "max_iterations must be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("grad_tol", self.grad_tol),
            ("energy_tol", self.energy_tol),
            ("step_tol", self.step_tol),
            ("max_rotation", self.max_rotation),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if self.memory == 0 {
            return Err(Error::InvalidInput("memory must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Norm of the tangent-space gradient at the returned point, J/rad.
    pub grad_norm: f64,
    /// Absolute gradient tolerance that was applied, J/rad.
    pub grad_tol: f64,
    pub reason: String,
    /// Energy of every accepted iterate, starting with the initial point.
    pub energy_trace: Vec<f64>,
}

impl SolveStats {
    pub fn hit_iteration_limit(&self) -> bool {
        !self.converged && self.reason == ITERATION_LIMIT
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<Vec3>,
    pub energy: f64,
    pub stats: SolveStats,
}

fn dot(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u.dot(v)).sum()
}

fn norm(a: &[Vec3]) -> f64 {
    dot(a, a).sqrt()
}

fn project(x: &[Vec3], v: &mut [Vec3]) {
    for (vi, xi) in v.iter_mut().zip(x) {
        *vi -= xi * vi.dot(xi);
    }
}

fn retract(x: &[Vec3], dir: &[Vec3], alpha: f64) -> Vec<Vec3> {
    x.iter()
        .zip(dir)
        .map(|(xi, di)| (xi + di * alpha).normalize())
        .collect()
}

/// Orthonormal tangent basis at a unit vector.
pub(crate) fn tangent_basis(u: &Vec3) -> (Vec3, Vec3) {
    let e = if u.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let t1 = (e - u * e.dot(u)).normalize();
    let t2 = u.cross(&t1);
    (t1, t2)
}

/// Projected gradient at `x`, analytic or by central differences.
fn gradient(
    model: &dyn EnergyModel,
    x: &[Vec3],
    mode: GradientMode,
    evals: &mut usize,
) -> Result<(f64, Vec<Vec3>)> {
    let mut g = vec![Vec3::zeros(); x.len()];
    match mode {
        GradientMode::Analytic => {
            let f = model.evaluate(x, Some(&mut g))?;
            *evals += 1;
            project(x, &mut g);
            Ok((f, g))
        }
        GradientMode::FiniteDifference => {
            let f = model.evaluate(x, None)?;
            *evals += 1;
            let h = 1e-7;
            let mut probe = x.to_vec();
            for i in 0..x.len() {
                let (t1, t2) = tangent_basis(&x[i]);
                for t in [t1, t2] {
                    probe[i] = (x[i] + t * h).normalize();
                    let fp = model.evaluate(&probe, None)?;
                    probe[i] = (x[i] - t * h).normalize();
                    let fm = model.evaluate(&probe, None)?;
                    *evals += 2;
                    g[i] += t * ((fp - fm) / (2.0 * h));
                }
                probe[i] = x[i];
            }
            Ok((f, g))
        }
    }
}

/// Minimizes `model` starting from `x0` (which must consist of unit vectors).
pub fn minimize(model: &dyn EnergyModel, x0: &[Vec3], options: &SolveOptions) -> Result<Minimum> {
    options.validate()?;
    if x0.len() != model.num_vectors() {
        return Err(Error::InvalidInput(format!(
            "initial point has {} vectors, model expects {}",
            x0.len(),
            model.num_vectors()
        )));
    }
    for v in x0 {
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(
                "initial vectors must be unit norm".into(),
            ));
        }
    }
    let mut x: Vec<Vec3> = x0.iter().map(|v| v.normalize()).collect();
    let scale = model.energy_scale();
    let gtol = options.grad_tol * scale;
    let mut evals = 0;
    let (mut f, mut g) = gradient(model, &x, options.gradient, &mut evals)?;
    let mut trace = vec![f];
    let mut gnorm = norm(&g);
    let mut memory: VecDeque<(Vec<Vec3>, Vec<Vec3>, f64)> = VecDeque::new();
    let noise = 64.0 * f64::EPSILON;

    let stable = |trace: &[f64], f: f64| -> bool {
        let tail = &trace[trace.len().saturating_sub(6)..];
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo <= options.energy_tol * f.abs().max(scale)
    };

    let mut iterations = 0;
    let mut reason = String::from(ITERATION_LIMIT);
    let mut converged = false;
    while iterations < options.max_iterations {
        if gnorm <= gtol && stable(&trace, f) {
            converged = true;
            reason = "gradient and energy tolerances met".into();
            break;
        }
        if x.is_empty() {
            converged = true;
            reason = "no free parameters".into();
            break;
        }

        // two-loop recursion
        let mut q: Vec<Vec3> = g.clone();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= yi * a;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += si * (a - b);
            }
        }
        let mut dir: Vec<Vec3> = q.iter().map(|v| -v).collect();
        project(&x, &mut dir);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) || !slope.is_finite() {
            memory.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }

        let biggest = dir.iter().map(|d| d.norm()).fold(0.0, f64::max);
        let mut alpha = if memory.is_empty() {
            (0.1 / biggest).min(1e30)
        } else {
            1.0
        };
        if alpha * biggest > options.max_rotation {
            alpha = options.max_rotation / biggest;
        }

        let mut accepted = None;
        while alpha * biggest > options.step_tol {
            let xn = retract(&x, &dir, alpha);
            let trial = gradient(model, &xn, options.gradient, &mut evals);
            let (fn_, gn) = match trial {
                Ok(v) => v,
                // singular trial points are treated as infinitely bad
                Err(Error::Singularity { .. }) => {
                    alpha *= 0.5;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let armijo = fn_ <= f + 1e-4 * alpha * slope;
            // below the resolution of the energy, progress is judged by the gradient
            let resolution = noise * (f.abs() + scale);
            let unresolved = (alpha * slope).abs() <= resolution && fn_ <= f + resolution;
            if fn_.is_finite() && (armijo || (unresolved && norm(&gn) < gnorm)) {
                accepted = Some((xn, fn_, gn));
                break;
            }
            alpha *= 0.5;
        }

        let Some((xn, fn_, gn)) = accepted else {
            if !memory.is_empty() {
                memory.clear();
                continue;
            }
            reason = "line search could not reduce the energy".into();
            converged = gnorm <= gtol;
            break;
        };

        // secant pair, transported to the new tangent space by projection
        let mut s: Vec<Vec3> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        project(&xn, &mut s);
        let mut g_old = g.clone();
        project(&xn, &mut g_old);
        let y: Vec<Vec3> = gn.iter().zip(&g_old).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        for (ps, py, _) in memory.iter_mut() {
            project(&xn, ps);
            project(&xn, py);
        }
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            memory.push_back((s, y, 1.0 / sy));
            if memory.len() > options.memory {
                memory.pop_front();
            }
        }

        x = xn;
        f = fn_;
        g = gn;
        gnorm = norm(&g);
        trace.push(f);
        iterations += 1;
    }

    Ok(Minimum {
        x,
        energy: f,
        stats: SolveStats {
            converged,
            iterations,
            evaluations: evals,
            grad_norm: gnorm,
            grad_tol: gtol,
            reason,
            energy_trace: trace,
        },
    })
}

/// Normal of the plane shared by the free vectors and the scenario
/// directions, or `None` when the problem is genuinely three-dimensional.
pub fn shared_plane(model: &dyn EnergyModel, x: &[Vec3]) -> Option<Vec3> {
    let vecs: Vec<Vec3> = model
        .scenario_directions()
        .into_iter()
        .chain(x.iter().copied())
        .filter(|v| v.norm() > 0.0)
        .map(|v| v.normalize())
        .collect();
    let first = *vecs.first()?;
    let mut best = (0.0, Vec3::zeros());
    for v in &vecs {
        let c = first.cross(v);
        if c.norm() > best.0 {
            best = (c.norm(), c);
        }
    }
    let normal = if best.0 < 1e-9 {
        // everything is collinear; pick a deterministic plane through it
        let c = first.cross(&Vec3::z());
        if c.norm() > 1e-6 {
            Vec3::z()
        } else {
            Vec3::y()
        }
    } else {
        best.1.normalize()
    };
    vecs.iter()
        .all(|v| v.dot(&normal).abs() <= 1e-12)
        .then_some(normal)
}

/// Small random rotation of every free vector; stays in `plane` when given.
pub fn perturb(x: &[Vec3], amplitude: f64, plane: Option<Vec3>, rng: &mut impl Rng) -> Vec<Vec3> {
    x.iter()
        .map(|v| match plane {
            Some(n) => {
                let a = rng.random_range(-amplitude..amplitude);
                let rot =
                    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(n), a);
                (rot * v).normalize()
            }
            None => {
                let (t1, t2) = tangent_basis(v);
                let a = rng.random_range(-amplitude..amplitude);
                let b = rng.random_range(-amplitude..amplitude);
                (v + t1 * a + t2 * b).normalize()
            }
        })
        .collect()
}

/// Minimizes from `x0` and from `options.restarts` perturbed copies of it,
/// keeping the lowest converged energy.
pub fn minimize_multistart(
    model: &dyn EnergyModel,
    x0: &[Vec3],
    options: &SolveOptions,
) -> Result<Minimum> {
    let mut best = minimize(model, x0, options)?;
    if options.restarts == 0 || x0.is_empty() {
        return Ok(best);
    }
    let plane = shared_plane(model, x0);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let noise = 64.0 * f64::EPSILON * (best.energy.abs() + model.energy_scale());
    for _ in 0..options.restarts {
        let start = perturb(x0, options.perturbation, plane, &mut rng);
        let cand = minimize(model, &start, options)?;
        let better = match (cand.stats.converged, best.stats.converged) {
            (true, false) => true,
            (false, true) => false,
            _ => cand.energy < best.energy - noise,
        };
        if better {
            best = cand;
        }
    }
    Ok(best)
}

/// Analytic versus five-point finite-difference gradient comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    /// Worst per-component relative error; components are compared against
    /// max(|analytic|, |numeric|, 1% of the model energy scale).
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub energy: f64,
    pub energy_scale: f64,
}

pub fn check_gradient(model: &dyn EnergyModel, x: &[Vec3]) -> Result<GradientCheck> {
    let mut g = vec![Vec3::zeros(); x.len()];
    let energy = model.evaluate(x, Some(&mut g))?;
    project(x, &mut g);
    let scale = model.energy_scale();
    let h = 1e-7;
    let mut probe = x.to_vec();
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for i in 0..x.len() {
        let (t1, t2) = tangent_basis(&x[i]);
        for t in [t1, t2] {
            let mut at = |s: f64| -> Result<f64> {
                probe[i] = (x[i] + t * (s * h)).normalize();
                model.evaluate(&probe, None)
            };
            let numeric = (-at(2.0)? + 8.0 * at(1.0)? - 8.0 * at(-1.0)? + at(-2.0)?) / (12.0 * h);
            probe[i] = x[i];
            let analytic = g[i].dot(&t);
            let err = (analytic - numeric).abs();
            let denom = analytic.abs().max(numeric.abs()).max(0.01 * scale);
            max_abs = max_abs.max(err);
            max_rel = max_rel.max(err / denom);
        }
    }
    Ok(GradientCheck {
        max_relative_error: max_rel,
        max_absolute_error: max_abs,
        energy,
        energy_scale: scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// U = -Σ k_i u_i·a_i + c Σ (1 - u_i·u_{i+1}); smooth with a known minimum.
    struct Toy {
        targets: Vec<Vec3>,
        couple: f64,
    }

    impl EnergyModel for Toy {
        fn num_vectors(&self) -> usize {
            self.targets.len()
        }
        fn energy_scale(&self) -> f64 {
            1.0
        }
        fn evaluate(&self, x: &[Vec3], grad: Option<&mut [Vec3]>) -> Result<f64> {
            let mut e = 0.0;
            let mut g = vec![Vec3::zeros(); x.len()];
            for (i, (u, a)) in x.iter().zip(&self.targets).enumerate() {
                e -= u.dot(a);
                g[i] -= a;
                if i + 1 < x.len() {
                    e += self.couple * (1.0 - u.dot(&x[i + 1]));
                    g[i] -= x[i + 1] * self.couple;
                    g[i + 1] -= u * self.couple;
                }
            }
            if let Some(out) = grad {
                out.copy_from_slice(&g);
            }
            Ok(e)
        }
        fn scenario_directions(&self) -> Vec<Vec3> {
            self.targets.clone()
        }
    }

    #[test]
    fn converges_to_targets_without_coupling() {
        let targets = vec![
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 1.0).normalize(),
        ];
        let toy = Toy {
            targets: targets.clone(),
            couple: 0.0,
        };
        let m = minimize(&toy, &[Vec3::x(), Vec3::x()], &SolveOptions::default()).unwrap();
        assert!(m.stats.converged, "{:?}", m.stats);
        for (u, a) in m.x.iter().zip(&targets) {
            assert!((u - a).norm() < 1e-9);
        }
        for w in m.stats.energy_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn finite_difference_mode_agrees() {
        let toy = Toy {
            targets: vec![Vec3::y(), Vec3::z(), Vec3::new(-1.0, 0.2, 0.0).normalize()],
            couple: 0.7,
        };
        let x0 = vec![Vec3::x(); 3];
        let a = minimize(&toy, &x0, &SolveOptions::default()).unwrap();
        let opts = SolveOptions {
            gradient: GradientMode::FiniteDifference,
            grad_tol: 1e-7,
            ..Default::default()
        };
        let b = minimize(&toy, &x0, &opts).unwrap();
        assert!(a.stats.converged && b.stats.converged);
        assert!((a.energy - b.energy).abs() < 1e-10);
    }

    #[test]
    fn gradient_check_on_toy() {
        let toy = Toy {
            targets: vec![Vec3::y(), Vec3::new(0.3, -0.2, 0.9).normalize()],
            couple: 1.3,
        };
        let x = vec![Vec3::new(0.6, 0.8, 0.0), Vec3::new(0.0, 0.6, 0.8)];
        let c = check_gradient(&toy, &x).unwrap();
        assert!(c.max_relative_error < 1e-7, "{c:?}");
    }

    #[test]
    fn rejects_bad_options_and_inputs() {
        let toy = Toy {
            targets: vec![Vec3::y()],
            couple: 0.0,
        };
        let bad = SolveOptions {
            grad_tol: 0.0,
            ..Default::default()
        };
        assert!(minimize(&toy, &[Vec3::x()], &bad).is_err());
        assert!(minimize(&toy, &[Vec3::x() * 2.0], &SolveOptions::default()).is_err());
        assert!(minimize(&toy, &[], &SolveOptions::default()).is_err());
    }

    #[test]
    fn planar_perturbation_stays_in_plane() {
        let toy = Toy {
            targets: vec![Vec3::y(), Vec3::x()],
            couple: 0.5,
        };
        let x = vec![Vec3::x(), Vec3::new(0.6, 0.8, 0.0)];
        let plane = shared_plane(&toy, &x).unwrap();
        assert!((plane.z.abs() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for v in perturb(&x, 0.3, Some(plane), &mut rng) {
            assert!(v.z.abs() < 1e-15);
        }
        let spatial = Toy {
            targets: vec![Vec3::y(), Vec3::z()],
            couple: 0.5,
        };
        assert!(shared_plane(&spatial, &x).is_none());
    }
}
