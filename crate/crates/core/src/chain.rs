//! Shape parameterization and total-energy assembly.
//!
//! A ball chain is described by the directions of its links and the
//! directions of its dipoles. Ball positions follow by accumulating links of
//! one diameter each, so the contact constraint holds by construction and
//! the free parameters are `2(n-1)` unit vectors, i.e. `4n - 4` scalars.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::design::{BallChainDesign, DesignSpec, DistributedDesign, TipMagnetDesign};
use crate::error::{Error, Result};
use crate::magnetics::{self, Dipole, UniformField};
use crate::mechanics::{self, MassPoint};

pub type Vec3 = Vector3<f64>;

/// Where the steering field comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSource {
    Uniform(UniformField),
    Magnet {
        dipole: Dipole,
        /// Physical diameter, used only for the dipole-validity warning.
        diameter: Option<f64>,
    },
}

impl FieldSource {
    pub fn zero() -> Self {
        FieldSource::Uniform(UniformField { b: Vec3::zeros() })
    }

    /// Field in T at a point.
    pub fn field_at(&self, p: &Vec3) -> Result<Vec3> {
        match self {
            FieldSource::Uniform(u) => Ok(u.b),
            FieldSource::Magnet { dipole, .. } => {
                magnetics::dipole_field(p - dipole.position, dipole.moment)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gravity {
    pub g: f64,
    pub up: Vec3,
}

impl Default for Gravity {
    fn default() -> Self {
        Self {
            g: 9.81,
            up: Vec3::z(),
        }
    }
}

/// Switches for optional energy terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyTerms {
    pub skin: bool,
    /// Adds a skin joint between the fixed base tangent and the first link.
    pub clamped_base: bool,
    /// Penalty against overlap of non-adjacent balls.
    pub self_contact: bool,
}

impl Default for EnergyTerms {
    fn default() -> Self {
        Self {
            skin: true,
            clamped_base: false,
            self_contact: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// Ball-ball dipole interaction.
    pub chain: f64,
    /// External field acting on the magnetic content.
    pub external: f64,
    /// Bending of skin or rod.
    pub elastic: f64,
    pub gravity: f64,
    /// Wall and self-contact penalties.
    pub contact: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(chain: f64, external: f64, elastic: f64, gravity: f64, contact: f64) -> Self {
        Self {
            chain,
            external,
            elastic,
            gravity,
            contact,
            total: chain + external + elastic + gravity + contact,
        }
    }
}

/// Contact-preserving configuration of an `n`-ball chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub diameter: f64,
    pub base_position: Vec3,
    /// Direction of the first ball's dipole; fixed by the mount.
    pub base_tangent: Vec3,
    /// `n - 1` unit vectors from ball i to ball i+1.
    pub link_dirs: Vec<Vec3>,
    /// `n` unit dipole directions; the first equals `base_tangent`.
    pub dipole_dirs: Vec<Vec3>,
}

impl ChainConfig {
    /// Straight chain along the base tangent with all dipoles aligned.
    pub fn straight(
        n: usize,
        diameter: f64,
        base_position: Vec3,
        base_tangent: Vec3,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("chain needs at least one ball".into()));
        }
        let t = unit(base_tangent, "base tangent")?;
        Ok(Self {
            diameter,
            base_position,
            base_tangent: t,
            link_dirs: vec![t; n - 1],
            dipole_dirs: vec![t; n],
        })
    }

    /// Rebuilds a configuration from the solver's free vectors
    /// (links first, then dipoles of balls 2..n).
    pub fn from_free(
        diameter: f64,
        base_position: Vec3,
        base_tangent: Vec3,
        free: &[Vec3],
    ) -> Result<Self> {
        if !free.len().is_multiple_of(2) {
            return Err(Error::InvalidInput("free vector count must be even".into()));
        }
        let links = free.len() / 2;
        let t = unit(base_tangent, "base tangent")?;
        let mut dipole_dirs = Vec::with_capacity(links + 1);
        dipole_dirs.push(t);
        dipole_dirs.extend_from_slice(&free[links..]);
        let cfg = Self {
            diameter,
            base_position,
            base_tangent: t,
            link_dirs: free[..links].to_vec(),
            dipole_dirs,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.dipole_dirs.len()
    }

    /// Number of scalar free parameters, two per free unit vector.
    pub fn parameter_count(&self) -> usize {
        4 * self.n() - 4
    }

    pub fn free_vectors(&self) -> Vec<Vec3> {
        let mut v = self.link_dirs.clone();
        v.extend_from_slice(&self.dipole_dirs[1..]);
        v
    }

    pub fn positions(&self) -> Vec<Vec3> {
        positions_from_links(self.base_position, self.diameter, &self.link_dirs)
    }

    pub fn tip(&self) -> Vec3 {
        *self
            .positions()
            .last()
            .expect("chain has at least one ball")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dipole_dirs.is_empty() || self.link_dirs.len() + 1 != self.dipole_dirs.len() {
            return Err(Error::InvalidInput(format!(
                "chain has {} links for {} dipoles",
                self.link_dirs.len(),
                self.dipole_dirs.len()
            )));
        }
        for v in self.link_dirs.iter().chain(&self.dipole_dirs) {
            if (v.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "direction {v:?} is not unit norm"
                )));
            }
        }
        if (self.dipole_dirs[0] - self.base_tangent).norm() > 1e-12 {
            return Err(Error::InvalidInput(
                "first dipole must follow the base tangent".into(),
            ));
        }
        Ok(())
    }

    /// Non-adjacent ball pairs closer than one diameter.
    pub fn overlaps(&self) -> Vec<(usize, usize, f64)> {
        let p = self.positions();
        let mut out = Vec::new();
        for i in 0..p.len() {
            for j in i + 2..p.len() {
                let dist = (p[j] - p[i]).norm();
                if dist < self.diameter * (1.0 - 1e-6) {
                    out.push((i, j, dist));
                }
            }
        }
        out
    }

    /// Bend angles at the interior balls.
    pub fn joint_angles(&self) -> Vec<f64> {
        self.link_dirs
            .windows(2)
            .map(|w| mechanics::angle_between(&w[0], &w[1]))
            .collect()
    }

    pub fn dipoles(&self, moment: f64) -> Vec<Dipole> {
        self.positions()
            .into_iter()
            .zip(&self.dipole_dirs)
            .map(|(p, m)| Dipole::new(p, m * moment))
            .collect()
    }
}

pub(crate) fn positions_from_links(base: Vec3, step: f64, links: &[Vec3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(links.len() + 1);
    let mut p = base;
    out.push(p);
    for l in links {
        p += l * step;
        out.push(p);
    }
    out
}

pub(crate) fn unit(v: Vec3, what: &str) -> Result<Vec3> {
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} must be a nonzero finite vector"
        )));
    }
    Ok(v / n)
}

/// Total potential energy of a ball-chain configuration.
///
/// This is the reference route built from the public energy primitives; the
/// solver evaluates the same sum together with its gradient in
/// [`crate::model::ChainModel`].
pub fn total_energy(
    config: &ChainConfig,
    design: &BallChainDesign,
    field: &FieldSource,
    gravity: Option<&Gravity>,
    terms: EnergyTerms,
) -> Result<EnergyBreakdown> {
    config.validate()?;
    let dipoles = config.dipoles(design.ball_moment);
    let chain = magnetics::chain_pair_energy(&dipoles)?;
    let external = match field {
        FieldSource::Uniform(u) => dipoles
            .iter()
            .map(|d| magnetics::dipole_energy(d.moment, u.b))
            .sum(),
        FieldSource::Magnet { dipole, diameter } => {
            magnetics::external_magnet_energy(&dipoles, dipole, *diameter)?.energy
        }
    };
    let mut elastic = 0.0;
    if terms.skin && design.skin.is_some() {
        let ei = design.skin_stiffness();
        let mut pts = config.positions();
        if terms.clamped_base {
            pts.insert(
                0,
                config.base_position - config.base_tangent * config.diameter,
            );
        }
        elastic = mechanics::total_skin_energy(&pts, &[ei], config.diameter)?.0;
    }
    let gravity = match gravity {
        Some(g) => {
            let masses: Vec<_> = config
                .positions()
                .into_iter()
                .map(|position| MassPoint {
                    mass: design.ball_mass,
                    position,
                })
                .collect();
            mechanics::gravity_energy(&masses, g.g, g.up)?
        }
        None => 0.0,
    };
    let contact = if terms.self_contact {
        crate::contact::self_contact_penalty(
            &config.positions(),
            config.diameter,
            design.contact_stiffness(),
        )
        .energy
    } else {
        0.0
    };
    Ok(EnergyBreakdown::new(
        chain, external, elastic, gravity, contact,
    ))
}

/// Discretized rod: segment lengths, per-segment magnetic moments and the
/// bending stiffness of each joint (joint 0 is the clamp at the base).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodLayout {
    pub segment_lengths: Vec<f64>,
    pub segment_moments: Vec<f64>,
    /// E·I / (bending length) for joints 0..m-1; joint k sits at the start of segment k.
    pub joint_stiffness: Vec<f64>,
    /// The segment whose midpoint is reported as the tip, or `None` for the rod end.
    pub tip_segment: Option<usize>,
    /// Leading segments held straight by the mount (a fully clamped magnet).
    pub fixed_segments: usize,
}

impl RodLayout {
    /// Rod of total length `length` (m) for a tip-magnet design.
    pub fn tip_magnet(design: &TipMagnetDesign, length: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::InvalidInput("rod length must be positive".into()));
        }
        let magnet = design.magnet_length.min(length);
        let flexible = length - magnet;
        let m = if flexible > 1e-12 {
            (flexible / design.pitch - 1e-9).ceil().max(1.0) as usize
        } else {
            0
        };
        let h = if m > 0 {
            flexible / m as f64
        } else {
            design.pitch
        };
        let k = design.bending_stiffness() / h;
        // end joints cover half a segment each
        let mut joint_stiffness = vec![k; m + 1];
        if m > 0 {
            joint_stiffness[0] = 2.0 * k;
            joint_stiffness[m] = 2.0 * k;
        }
        let mut segment_lengths = vec![h; m];
        segment_lengths.push(magnet);
        let mut segment_moments = vec![0.0; m];
        segment_moments.push(design.tip_moment);
        Ok(Self {
            segment_lengths,
            segment_moments,
            joint_stiffness,
            tip_segment: Some(m),
            fixed_segments: if m == 0 { 1 } else { 0 },
        })
    }

    /// Rod of total length `length` (m) with distributed magnetization.
    pub fn distributed(design: &DistributedDesign, length: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::InvalidInput("rod length must be positive".into()));
        }
        let m = (length / design.pitch - 1e-9).ceil().max(1.0) as usize;
        let h = length / m as f64;
        let k = design.bending_stiffness() / h;
        let mut joint_stiffness = vec![k; m];
        joint_stiffness[0] = 2.0 * k;
        Ok(Self {
            segment_lengths: vec![h; m],
            segment_moments: vec![design.moment_per_length * h; m],
            joint_stiffness,
            tip_segment: None,
            fixed_segments: 0,
        })
    }

    pub fn for_design(design: &DesignSpec, length: f64) -> Result<Self> {
        match design {
            DesignSpec::TipMagnet(d) => Self::tip_magnet(d, length),
            DesignSpec::DistributedParticles(d) => Self::distributed(d, length),
            DesignSpec::BallChain(_) => Err(Error::InvalidInput(
                "ball-chain designs use the chain parameterization, not a rod layout".into(),
            )),
        }
    }

    pub fn segments(&self) -> usize {
        self.segment_lengths.len()
    }
}

/// Centerline of a discretized rod.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodShape {
    pub layout: RodLayout,
    pub base_position: Vec3,
    pub base_tangent: Vec3,
    /// Unit direction of each segment.
    pub segment_dirs: Vec<Vec3>,
}

impl RodShape {
    pub fn straight(layout: RodLayout, base_position: Vec3, base_tangent: Vec3) -> Result<Self> {
        let t = unit(base_tangent, "base tangent")?;
        let m = layout.segments();
        Ok(Self {
            layout,
            base_position,
            base_tangent: t,
            segment_dirs: vec![t; m],
        })
    }

    pub fn points(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.segment_dirs.len() + 1);
        let mut p = self.base_position;
        out.push(p);
        for (d, l) in self.segment_dirs.iter().zip(&self.layout.segment_lengths) {
            p += d * *l;
            out.push(p);
        }
        out
    }

    pub fn tip(&self) -> Vec3 {
        let pts = self.points();
        match self.layout.tip_segment {
            Some(k) => (pts[k] + pts[k + 1]) * 0.5,
            None => *pts.last().expect("rod has points"),
        }
    }

    /// Moment-carrying elements as dipoles at segment midpoints.
    pub fn dipoles(&self) -> Vec<Dipole> {
        let pts = self.points();
        self.segment_dirs
            .iter()
            .enumerate()
            .filter(|(k, _)| self.layout.segment_moments[*k] != 0.0)
            .map(|(k, d)| {
                Dipole::new(
                    (pts[k] + pts[k + 1]) * 0.5,
                    d * self.layout.segment_moments[k],
                )
            })
            .collect()
    }
}

/// Energy of a rod design: bending over the discretized centerline plus the
/// external-field energy of its magnetic elements.
pub fn rod_energy(
    shape: &RodShape,
    design: &DesignSpec,
    field: &FieldSource,
) -> Result<EnergyBreakdown> {
    if matches!(design, DesignSpec::BallChain(_)) {
        return Err(Error::InvalidInput(
            "rod_energy requires a tip-magnet or distributed design".into(),
        ));
    }
    let mut dirs = vec![shape.base_tangent];
    dirs.extend_from_slice(&shape.segment_dirs);
    let elastic: f64 = dirs
        .windows(2)
        .zip(&shape.layout.joint_stiffness)
        .map(|(w, k)| mechanics::bend_energy(mechanics::angle_between(&w[0], &w[1]), *k))
        .sum();
    let dipoles = shape.dipoles();
    let external = match field {
        FieldSource::Uniform(u) => dipoles
            .iter()
            .map(|d| magnetics::dipole_energy(d.moment, u.b))
            .sum(),
        FieldSource::Magnet { dipole, diameter } => {
            magnetics::external_magnet_energy(&dipoles, dipole, *diameter)?.energy
        }
    };
    Ok(EnergyBreakdown::new(0.0, external, elastic, 0.0, 0.0))
}
