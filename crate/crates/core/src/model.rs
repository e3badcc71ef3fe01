//! Energy models on a product of unit spheres, with analytic gradients.
//!
//! A model maps a list of unit vectors (its free parameters) to an energy.
//! Gradients are Euclidean (∂U/∂u for each vector); the solver projects them
//! onto the tangent spaces.

use crate::chain::{EnergyBreakdown, EnergyTerms, FieldSource, Gravity, RodLayout, Vec3};
use crate::contact::{self, Wall};
use crate::design::BallChainDesign;
use crate::error::{Error, Result};
use crate::magnetics::{pair_terms, DEFAULT_R_MIN, MU0};
use crate::mechanics::{angle_between, bend_energy, bend_gradient_coefficient};

pub trait EnergyModel: Sync {
    /// Number of free unit vectors.
    fn num_vectors(&self) -> usize;

    /// Characteristic energy magnitude, used for relative tolerances.
    fn energy_scale(&self) -> f64;

    /// Energy and, when `grad` is given, its Euclidean gradient.
    fn evaluate(&self, x: &[Vec3], grad: Option<&mut [Vec3]>) -> Result<f64>;

    /// Fixed directions of the scenario (field, gravity, mount) that, together
    /// with the free vectors, decide whether the problem is planar.
    fn scenario_directions(&self) -> Vec<Vec3>;
}

/// Channel walls for navigation solves.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSettings {
    pub walls: Vec<Wall>,
    /// Closed channel interior; when present it replaces `walls`.
    pub region: Option<Vec<[f64; 2]>>,
    /// Wall penalty stiffness, J/m².
    pub stiffness: f64,
}

impl ContactSettings {
    pub fn penalty(&self, positions: &[Vec3], radius: f64) -> contact::Penalty {
        match &self.region {
            Some(r) => contact::region_penalty(positions, r, radius, self.stiffness),
            None => contact::wall_penalty(positions, &self.walls, radius, self.stiffness),
        }
    }
}

/// Ball chain with its base ball fixed at `base` with dipole along `tangent`.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub design: BallChainDesign,
    pub n: usize,
    pub base: Vec3,
    pub tangent: Vec3,
    pub field: FieldSource,
    pub gravity: Option<Gravity>,
    pub terms: EnergyTerms,
    pub contact: Option<ContactSettings>,
}

impl ChainModel {
    pub fn links(&self) -> usize {
        self.n - 1
    }

    /// Energy split by term; same sum as [`EnergyModel::evaluate`].
    pub fn breakdown(&self, x: &[Vec3]) -> Result<EnergyBreakdown> {
        let mut parts = Parts::default();
        self.eval_parts(x, None, &mut parts)?;
        Ok(EnergyBreakdown::new(
            parts.chain,
            parts.external,
            parts.elastic,
            parts.gravity,
            parts.contact,
        ))
    }

    fn eval_parts(&self, x: &[Vec3], grad: Option<&mut [Vec3]>, parts: &mut Parts) -> Result<f64> {
        let nl = self.links();
        if x.len() != 2 * nl {
            return Err(Error::InvalidInput(format!(
                "chain model expects {} vectors, got {}",
                2 * nl,
                x.len()
            )));
        }
        let d = self.design.ball_diameter;
        let mom = self.design.ball_moment;
        let links = &x[..nl];
        let mut dirs = Vec::with_capacity(self.n);
        dirs.push(self.tangent);
        dirs.extend_from_slice(&x[nl..]);
        let pos = crate::chain::positions_from_links(self.base, d, links);

        let want_grad = grad.is_some();
        let mut gp = vec![Vec3::zeros(); self.n];
        let mut gm = vec![Vec3::zeros(); self.n];
        let mut gl = vec![Vec3::zeros(); nl];

        // ball-ball dipole interaction
        for i in 0..self.n {
            let a = dirs[i] * mom;
            for j in i + 1..self.n {
                let r = pos[j] - pos[i];
                if r.norm() < DEFAULT_R_MIN {
                    return Err(Error::Singularity {
                        first: format!("ball {}", i + 1),
                        second: format!("ball {}", j + 1),
                        distance: r.norm(),
                    });
                }
                let t = pair_terms(r, a, dirs[j] * mom);
                parts.chain += t.energy;
                if want_grad {
                    gm[i] += t.d_a * mom;
                    gm[j] += t.d_b * mom;
                    gp[j] += t.d_r;
                    gp[i] -= t.d_r;
                }
            }
        }

        match &self.field {
            FieldSource::Uniform(u) => {
                for i in 0..self.n {
                    parts.external -= mom * dirs[i].dot(&u.b);
                    gm[i] -= u.b * mom;
                }
            }
            FieldSource::Magnet { dipole, .. } => {
                for i in 0..self.n {
                    let r = pos[i] - dipole.position;
                    if r.norm() < DEFAULT_R_MIN {
                        return Err(Error::Singularity {
                            first: format!("ball {}", i + 1),
                            second: "external magnet".into(),
                            distance: r.norm(),
                        });
                    }
                    let t = pair_terms(r, dipole.moment, dirs[i] * mom);
                    parts.external += t.energy;
                    if want_grad {
                        gm[i] += t.d_b * mom;
                        gp[i] += t.d_r;
                    }
                }
            }
        }

        if self.terms.skin && self.design.skin.is_some() {
            let k = self.design.skin_stiffness() / d;
            if self.terms.clamped_base && nl > 0 {
                let theta = angle_between(&self.tangent, &links[0]);
                parts.elastic += bend_energy(theta, k);
                if want_grad {
                    gl[0] -= self.tangent * bend_gradient_coefficient(theta, k);
                }
            }
            for j in 1..nl {
                let theta = angle_between(&links[j - 1], &links[j]);
                parts.elastic += bend_energy(theta, k);
                if want_grad {
                    let c = bend_gradient_coefficient(theta, k);
                    gl[j - 1] -= links[j] * c;
                    gl[j] -= links[j - 1] * c;
                }
            }
        }

        if let Some(g) = &self.gravity {
            let w = self.design.ball_mass * g.g;
            for (i, p) in pos.iter().enumerate() {
                parts.gravity += w * g.up.dot(p);
                gp[i] += g.up * w;
            }
        }

        if let Some(c) = &self.contact {
            let pen = c.penalty(&pos, 0.5 * d);
            parts.contact += pen.energy;
            for (g, pg) in gp.iter_mut().zip(&pen.gradient) {
                *g += pg;
            }
        }
        if self.terms.self_contact {
            let pen = contact::self_contact_penalty(&pos, d, self.design.contact_stiffness());
            parts.contact += pen.energy;
            for (g, pg) in gp.iter_mut().zip(&pen.gradient) {
                *g += pg;
            }
        }

        if let Some(grad) = grad {
            // p_j depends on link k for every j > k with ∂p_j/∂u_k = d·I
            let mut suffix = Vec3::zeros();
            for k in (0..nl).rev() {
                suffix += gp[k + 1];
                grad[k] = gl[k] + suffix * d;
            }
            grad[nl..2 * nl].copy_from_slice(&gm[1..=nl]);
        }
        Ok(parts.chain + parts.external + parts.elastic + parts.gravity + parts.contact)
    }
}

#[derive(Debug, Default)]
struct Parts {
    chain: f64,
    external: f64,
    elastic: f64,
    gravity: f64,
    contact: f64,
}

impl EnergyModel for ChainModel {
    fn num_vectors(&self) -> usize {
        2 * self.links()
    }

    fn energy_scale(&self) -> f64 {
        let n = self.n as f64;
        let d = self.design.ball_diameter;
        let m = self.design.ball_moment;
        let pair = MU0 * m * m / (2.0 * std::f64::consts::PI * d.powi(3));
        let field = self
            .field
            .field_at(&self.base)
            .map(|b| b.norm())
            .unwrap_or(0.0)
            * m;
        let skin = if self.terms.skin {
            self.design.skin_stiffness() / d
        } else {
            0.0
        };
        let grav = self
            .gravity
            .map_or(0.0, |g| self.design.ball_mass * g.g * d);
        (n * (pair + field + skin + grav)).max(f64::MIN_POSITIVE)
    }

    fn evaluate(&self, x: &[Vec3], grad: Option<&mut [Vec3]>) -> Result<f64> {
        let mut parts = Parts::default();
        self.eval_parts(x, grad, &mut parts)
    }

    fn scenario_directions(&self) -> Vec<Vec3> {
        let mut v = vec![self.tangent];
        match &self.field {
            FieldSource::Uniform(u) => v.push(u.b),
            FieldSource::Magnet { dipole, .. } => {
                v.push(dipole.moment);
                v.push(dipole.position - self.base);
            }
        }
        if let Some(g) = &self.gravity {
            v.push(g.up);
        }
        if self.contact.is_some() {
            v.push(Vec3::x());
            v.push(Vec3::y());
        }
        v
    }
}

/// Clamped rod with free segment directions.
#[derive(Debug, Clone)]
pub struct RodModel {
    pub layout: RodLayout,
    pub base: Vec3,
    pub tangent: Vec3,
    pub field: FieldSource,
}

impl RodModel {
    /// Full list of segment directions from the free vectors.
    pub fn segment_dirs(&self, x: &[Vec3]) -> Vec<Vec3> {
        let mut dirs = vec![self.tangent; self.layout.fixed_segments];
        dirs.extend_from_slice(x);
        dirs
    }

    pub fn breakdown(&self, x: &[Vec3]) -> Result<EnergyBreakdown> {
        let (elastic, external) = self.eval_split(x, None)?;
        Ok(EnergyBreakdown::new(0.0, external, elastic, 0.0, 0.0))
    }

    fn eval_split(&self, x: &[Vec3], grad: Option<&mut [Vec3]>) -> Result<(f64, f64)> {
        let m = self.layout.segments();
        let fixed = self.layout.fixed_segments;
        if x.len() + fixed != m {
            return Err(Error::InvalidInput(format!(
                "rod model expects {} vectors, got {}",
                m - fixed,
                x.len()
            )));
        }
        let dirs = self.segment_dirs(x);
        let want_grad = grad.is_some();
        let mut g = vec![Vec3::zeros(); m];

        let mut elastic = 0.0;
        for k in 0..m {
            let prev = if k == 0 { self.tangent } else { dirs[k - 1] };
            let stiff = self.layout.joint_stiffness[k];
            let theta = angle_between(&prev, &dirs[k]);
            elastic += bend_energy(theta, stiff);
            if want_grad {
                let c = bend_gradient_coefficient(theta, stiff);
                g[k] -= prev * c;
                if k > 0 {
                    g[k - 1] -= dirs[k] * c;
                }
            }
        }

        let mut external = 0.0;
        match &self.field {
            FieldSource::Uniform(u) => {
                for k in 0..m {
                    let mu = self.layout.segment_moments[k];
                    if mu != 0.0 {
                        external -= mu * dirs[k].dot(&u.b);
                        g[k] -= u.b * mu;
                    }
                }
            }
            FieldSource::Magnet { dipole, .. } => {
                let lens = &self.layout.segment_lengths;
                let mut start = self.base;
                let mut gc = vec![Vec3::zeros(); m];
                for k in 0..m {
                    let mu = self.layout.segment_moments[k];
                    let centre = start + dirs[k] * (0.5 * lens[k]);
                    start += dirs[k] * lens[k];
                    if mu == 0.0 {
                        continue;
                    }
                    let r = centre - dipole.position;
                    if r.norm() < DEFAULT_R_MIN {
                        return Err(Error::Singularity {
                            first: format!("segment {}", k + 1),
                            second: "external magnet".into(),
                            distance: r.norm(),
                        });
                    }
                    let t = pair_terms(r, dipole.moment, dirs[k] * mu);
                    external += t.energy;
                    g[k] += t.d_b * mu;
                    gc[k] = t.d_r;
                }
                if want_grad {
                    // centre_k = base + Σ_{j<k} l_j u_j + l_k/2 u_k
                    let mut suffix = Vec3::zeros();
                    for k in (0..m).rev() {
                        g[k] += gc[k] * (0.5 * lens[k]) + suffix * lens[k];
                        suffix += gc[k];
                    }
                }
            }
        }

        if let Some(grad) = grad {
            grad.copy_from_slice(&g[fixed..]);
        }
        Ok((elastic, external))
    }
}

impl EnergyModel for RodModel {
    fn num_vectors(&self) -> usize {
        self.layout.segments() - self.layout.fixed_segments
    }

    fn energy_scale(&self) -> f64 {
        let b = self
            .field
            .field_at(&self.base)
            .map(|b| b.norm())
            .unwrap_or(0.0);
        let magnetic: f64 = self.layout.segment_moments.iter().map(|m| m * b).sum();
        let elastic: f64 = self.layout.joint_stiffness.iter().sum();
        (magnetic + elastic).max(f64::MIN_POSITIVE)
    }

    fn evaluate(&self, x: &[Vec3], grad: Option<&mut [Vec3]>) -> Result<f64> {
        let (e, m) = self.eval_split(x, grad)?;
        Ok(e + m)
    }

    fn scenario_directions(&self) -> Vec<Vec3> {
        let mut v = vec![self.tangent];
        match &self.field {
            FieldSource::Uniform(u) => v.push(u.b),
            FieldSource::Magnet { dipole, .. } => {
                v.push(dipole.moment);
                v.push(dipole.position - self.base);
            }
        }
        v
    }
}

/// Magnetic energy U_b + U_e of a ball chain and its gradient with respect to
/// the free vectors (links, then dipoles of balls 2..n), projected onto the
/// tangent spaces.
pub fn magnetic_gradients(
    config: &crate::chain::ChainConfig,
    design: &BallChainDesign,
    field: &FieldSource,
) -> Result<(f64, Vec<Vec3>)> {
    let model = ChainModel {
        design: *design,
        n: config.n(),
        base: config.base_position,
        tangent: config.base_tangent,
        field: *field,
        gravity: None,
        terms: EnergyTerms {
            skin: false,
            clamped_base: false,
            self_contact: false,
        },
        contact: None,
    };
    let x = config.free_vectors();
    let mut g = vec![Vec3::zeros(); x.len()];
    let e = model.evaluate(&x, Some(&mut g))?;
    for (gi, xi) in g.iter_mut().zip(&x) {
        *gi -= xi * gi.dot(xi);
    }
    Ok((e, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{total_energy, ChainConfig};
    use crate::magnetics::{self, UniformField};
    use approx::assert_relative_eq;

    fn perturbed_config(n: usize, d: f64) -> ChainConfig {
        let mut c = ChainConfig::straight(n, d, Vec3::new(0.001, -0.002, 0.0), Vec3::x()).unwrap();
        for k in 0..n - 1 {
            let a = 0.3 * (k as f64 + 1.0);
            c.link_dirs[k] = Vec3::new(a.cos(), a.sin(), 0.2 * (k as f64).sin()).normalize();
            c.dipole_dirs[k + 1] = Vec3::new((a + 0.2).cos(), (a + 0.2).sin(), -0.1).normalize();
        }
        c
    }

    #[test]
    fn model_energy_matches_reference_sum() {
        let design = BallChainDesign::experimental();
        let c = perturbed_config(6, design.ball_diameter);
        let field = FieldSource::Magnet {
            dipole: magnetics::Dipole::new(Vec3::new(0.2, 0.0, -0.2), Vec3::new(204.6, 0.0, 0.0)),
            diameter: Some(0.0762),
        };
        let terms = EnergyTerms {
            skin: true,
            clamped_base: true,
            self_contact: true,
        };
        let g = Gravity::default();
        let model = ChainModel {
            design,
            n: 6,
            base: c.base_position,
            tangent: c.base_tangent,
            field,
            gravity: Some(g),
            terms,
            contact: None,
        };
        let reference = total_energy(&c, &design, &field, Some(&g), terms).unwrap();
        let fast = model.breakdown(&c.free_vectors()).unwrap();
        assert_relative_eq!(fast.chain, reference.chain, max_relative = 1e-12);
        assert_relative_eq!(fast.external, reference.external, max_relative = 1e-12);
        assert_relative_eq!(fast.elastic, reference.elastic, max_relative = 1e-10);
        assert_relative_eq!(fast.gravity, reference.gravity, max_relative = 1e-12);
        assert_relative_eq!(fast.contact, reference.contact, max_relative = 1e-12);
    }

    #[test]
    fn aligned_straight_chain_has_zero_magnetic_gradient() {
        let design = BallChainDesign::table();
        let c = ChainConfig::straight(8, design.ball_diameter, Vec3::zeros(), Vec3::x()).unwrap();
        let field = FieldSource::Uniform(UniformField::new(Vec3::new(0.04, 0.0, 0.0)).unwrap());
        let (e, g) = magnetic_gradients(&c, &design, &field).unwrap();
        let gmax = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(gmax <= 1e-10 * e.abs(), "{gmax} vs {e}");
    }

    #[test]
    fn doubling_moments_quadruples_chain_gradient() {
        let design = BallChainDesign::table();
        let c = perturbed_config(5, design.ball_diameter);
        let strong = BallChainDesign {
            ball_moment: 2.0 * design.ball_moment,
            ..design
        };
        let (_, g1) = magnetic_gradients(&c, &design, &FieldSource::zero()).unwrap();
        let (_, g2) = magnetic_gradients(&c, &strong, &FieldSource::zero()).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            for k in 0..3 {
                if a[k].abs() > 1e-12 {
                    assert_relative_eq!(b[k] / a[k], 4.0, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn rod_model_matches_rod_energy() {
        use crate::chain::{rod_energy, RodShape};
        use crate::design::{design_from_table, DesignKind};
        let design = design_from_table(DesignKind::TipMagnet);
        let layout = RodLayout::for_design(&design, 0.005).unwrap();
        let mut shape = RodShape::straight(layout.clone(), Vec3::zeros(), Vec3::x()).unwrap();
        for (k, d) in shape.segment_dirs.iter_mut().enumerate() {
            let a = 0.2 * k as f64;
            *d = Vec3::new(a.cos(), a.sin(), 0.0);
        }
        let field = FieldSource::Magnet {
            dipole: magnetics::Dipole::new(Vec3::new(0.05, 0.05, 0.0), Vec3::new(0.0, 50.0, 0.0)),
            diameter: None,
        };
        let model = RodModel {
            layout,
            base: Vec3::zeros(),
            tangent: Vec3::x(),
            field,
        };
        let reference = rod_energy(&shape, &design, &field).unwrap();
        let fast = model.breakdown(&shape.segment_dirs).unwrap();
        assert_relative_eq!(fast.elastic, reference.elastic, max_relative = 1e-12);
        assert_relative_eq!(fast.external, reference.external, max_relative = 1e-12);
    }
}
