//! Equilibrium shapes: problem description, single solves and continuation.

use serde::{Deserialize, Serialize};

use crate::chain::{
    ChainConfig, EnergyBreakdown, EnergyTerms, FieldSource, Gravity, RodLayout, RodShape, Vec3,
};
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::magnetics;
use crate::model::{ChainModel, ContactSettings, EnergyModel, RodModel};
use crate::solver::{self, GradientCheck, SolveOptions, SolveStats};

/// Size of the device: a ball count or a length in m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extent {
    Balls(usize),
    Length(f64),
}

/// Everything needed to compute one equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeProblem {
    pub design: DesignSpec,
    pub extent: Extent,
    pub base_position: Vec3,
    pub base_tangent: Vec3,
    pub field: FieldSource,
    pub gravity: Option<Gravity>,
    pub terms: EnergyTerms,
    pub contact: Option<ContactSettings>,
}

impl ShapeProblem {
    /// Problem at the origin along +x with no gravity, contact or clamp.
    pub fn new(design: DesignSpec, extent: Extent, field: FieldSource) -> Self {
        Self {
            design,
            extent,
            base_position: Vec3::zeros(),
            base_tangent: Vec3::x(),
            field,
            gravity: None,
            terms: EnergyTerms::default(),
            contact: None,
        }
    }

    /// Ball count for chains; `round(length / d)` when given a length.
    pub fn ball_count(&self) -> Result<usize> {
        let DesignSpec::BallChain(d) = &self.design else {
            return Err(Error::InvalidInput(
                "ball count is defined for ball chains only".into(),
            ));
        };
        let n = match self.extent {
            Extent::Balls(n) => n,
            Extent::Length(l) => {
                if !(l > 0.0) {
                    return Err(Error::InvalidInput("length must be positive".into()));
                }
                (l / d.ball_diameter).round().max(1.0) as usize
            }
        };
        if n == 0 {
            return Err(Error::InvalidInput("chain needs at least one ball".into()));
        }
        Ok(n)
    }

    fn rod_length(&self) -> Result<f64> {
        match self.extent {
            Extent::Length(l) if l > 0.0 => Ok(l),
            Extent::Length(_) => Err(Error::InvalidInput("length must be positive".into())),
            Extent::Balls(_) => Err(Error::InvalidInput(
                "rod designs need a length, not a ball count".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        crate::chain::unit(self.base_tangent, "base tangent")?;
        if let Some(g) = &self.gravity {
            if !(g.g >= 0.0) {
                return Err(Error::InvalidInput(
                    "gravity magnitude must be non-negative".into(),
                ));
            }
            crate::chain::unit(g.up, "gravity up direction")?;
        }
        if let Some(c) = &self.contact {
            if !(c.stiffness > 0.0) {
                return Err(Error::InvalidInput(
                    "contact stiffness must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Energy model over the free unit vectors.
    pub fn model(&self) -> Result<Box<dyn EnergyModel>> {
        self.validate()?;
        let tangent = self.base_tangent.normalize();
        match &self.design {
            DesignSpec::BallChain(d) => {
                let mut gravity = self.gravity;
                if let Some(g) = gravity.as_mut() {
                    g.up = g.up.normalize();
                }
                Ok(Box::new(ChainModel {
                    design: *d,
                    n: self.ball_count()?,
                    base: self.base_position,
                    tangent,
                    field: self.field,
                    gravity,
                    terms: self.terms,
                    contact: self.contact.clone(),
                }))
            }
            _ => {
                if self.gravity.is_some() || self.contact.is_some() {
                    return Err(Error::InvalidInput(
                        "gravity and contact are supported for ball chains only".into(),
                    ));
                }
                Ok(Box::new(RodModel {
                    layout: RodLayout::for_design(&self.design, self.rod_length()?)?,
                    base: self.base_position,
                    tangent,
                    field: self.field,
                }))
            }
        }
    }

    /// Straight reference shape along the base tangent.
    pub fn straight(&self) -> Result<Shape> {
        let t = self.base_tangent;
        match &self.design {
            DesignSpec::BallChain(d) => Ok(Shape::Chain(ChainConfig::straight(
                self.ball_count()?,
                d.ball_diameter,
                self.base_position,
                t,
            )?)),
            _ => Ok(Shape::Rod(RodShape::straight(
                RodLayout::for_design(&self.design, self.rod_length()?)?,
                self.base_position,
                t,
            )?)),
        }
    }

    fn free_vectors(&self, shape: &Shape) -> Result<Vec<Vec3>> {
        let reference = self.straight()?;
        match (shape, &reference) {
            (Shape::Chain(c), Shape::Chain(r)) if c.n() == r.n() => {
                c.validate()?;
                Ok(c.free_vectors())
            }
            (Shape::Rod(s), Shape::Rod(r)) if s.segment_dirs.len() == r.segment_dirs.len() => {
                Ok(s.segment_dirs[s.layout.fixed_segments..].to_vec())
            }
            _ => Err(Error::InvalidInput(
                "initial shape does not match the problem size or design".into(),
            )),
        }
    }

    fn shape_from(&self, x: &[Vec3]) -> Result<Shape> {
        match self.straight()? {
            Shape::Chain(c) => Ok(Shape::Chain(ChainConfig::from_free(
                c.diameter,
                c.base_position,
                c.base_tangent,
                x,
            )?)),
            Shape::Rod(mut r) => {
                let fixed = r.layout.fixed_segments;
                r.segment_dirs[fixed..].copy_from_slice(x);
                Ok(Shape::Rod(r))
            }
        }
    }

    /// Energy of a given shape, split by term.
    pub fn energy(&self, shape: &Shape) -> Result<EnergyBreakdown> {
        let x = self.free_vectors(shape)?;
        self.breakdown(&x)
    }

    fn breakdown(&self, x: &[Vec3]) -> Result<EnergyBreakdown> {
        let tangent = self.base_tangent.normalize();
        match &self.design {
            DesignSpec::BallChain(d) => ChainModel {
                design: *d,
                n: self.ball_count()?,
                base: self.base_position,
                tangent,
                field: self.field,
                gravity: self.gravity.map(|g| Gravity {
                    up: g.up.normalize(),
                    ..g
                }),
                terms: self.terms,
                contact: self.contact.clone(),
            }
            .breakdown(x),
            _ => RodModel {
                layout: RodLayout::for_design(&self.design, self.rod_length()?)?,
                base: self.base_position,
                tangent,
                field: self.field,
            }
            .breakdown(x),
        }
    }
}

/// A ball-chain configuration or a rod centerline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Chain(ChainConfig),
    Rod(RodShape),
}

impl Shape {
    /// Distal ball center, or the rod tip point.
    pub fn tip(&self) -> Vec3 {
        match self {
            Shape::Chain(c) => c.tip(),
            Shape::Rod(r) => r.tip(),
        }
    }

    /// Ball centers, or rod node points.
    pub fn points(&self) -> Vec<Vec3> {
        match self {
            Shape::Chain(c) => c.positions(),
            Shape::Rod(r) => r.points(),
        }
    }

    /// Unit dipole direction at every point that carries one.
    pub fn dipole_directions(&self) -> Vec<Vec3> {
        match self {
            Shape::Chain(c) => c.dipole_dirs.clone(),
            Shape::Rod(r) => r.dipoles().iter().map(|d| d.moment.normalize()).collect(),
        }
    }

    pub fn as_chain(&self) -> Option<&ChainConfig> {
        match self {
            Shape::Chain(c) => Some(c),
            Shape::Rod(_) => None,
        }
    }
}

/// Where the solver starts.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialShape {
    Straight,
    /// Warm start from an earlier equilibrium (no restarts).
    Previous(Shape),
    /// User-provided configuration (no restarts).
    Explicit(Shape),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSolution {
    pub shape: Shape,
    pub energy: EnergyBreakdown,
    pub stats: SolveStats,
    /// Non-adjacent ball pairs (0-based) closer than one diameter, with their distance in m.
    pub overlaps: Vec<(usize, usize, f64)>,
    pub warnings: Vec<String>,
}

impl ShapeSolution {
    pub fn converged(&self) -> bool {
        self.stats.converged
    }
}

/// Minimizes the total energy of `problem`.
///
/// Cold starts from the straight shape use `options.restarts` randomized
/// restarts; warm and explicit starts run a single local descent so that
/// continuation stays on its branch.
pub fn solve_shape(
    problem: &ShapeProblem,
    options: &SolveOptions,
    initial: &InitialShape,
) -> Result<ShapeSolution> {
    let model = problem.model()?;
    let (x0, restarts) = match initial {
        InitialShape::Straight => (
            problem.free_vectors(&problem.straight()?)?,
            options.restarts,
        ),
        InitialShape::Previous(s) | InitialShape::Explicit(s) => (problem.free_vectors(s)?, 0),
    };
    let opts = SolveOptions {
        restarts,
        ..*options
    };
    let min = solver::minimize_multistart(model.as_ref(), &x0, &opts)?;
    finish(problem, &min.x, min.stats)
}

fn finish(problem: &ShapeProblem, x: &[Vec3], stats: SolveStats) -> Result<ShapeSolution> {
    let shape = problem.shape_from(x)?;
    let energy = problem.breakdown(x)?;
    let mut warnings = Vec::new();
    let overlaps = match &shape {
        Shape::Chain(c) => c.overlaps(),
        Shape::Rod(_) => Vec::new(),
    };
    if !overlaps.is_empty() {
        warnings.push(format!(
            "{} non-adjacent ball pair(s) overlap",
            overlaps.len()
        ));
    }
    if let FieldSource::Magnet {
        dipole,
        diameter: Some(dia),
    } = problem.field
    {
        let pts = shape.points();
        let dips: Vec<_> = pts
            .iter()
            .map(|p| magnetics::Dipole::new(*p, Vec3::x()))
            .collect();
        let ext = magnetics::external_magnet_energy(&dips, &dipole, Some(dia))?;
        warnings.extend(ext.warnings);
    }
    if !stats.converged {
        warnings.push(format!("solver did not converge: {}", stats.reason));
    }
    Ok(ShapeSolution {
        shape,
        energy,
        overlaps,
        stats,
        warnings,
    })
}

/// Solves `problem` for each field in order, seeding every solve with the
/// previous equilibrium. A non-converged step is kept in the output
/// (flagged) and the next step restarts from the straight shape.
pub fn continuation_sweep(
    problem: &ShapeProblem,
    fields: &[FieldSource],
    options: &SolveOptions,
) -> Result<Vec<ShapeSolution>> {
    continuation_from(problem, fields, options, InitialShape::Straight)
}

/// [`continuation_sweep`] with an explicit seed for the first step.
pub fn continuation_from(
    problem: &ShapeProblem,
    fields: &[FieldSource],
    options: &SolveOptions,
    first: InitialShape,
) -> Result<Vec<ShapeSolution>> {
    if fields.is_empty() {
        return Err(Error::InvalidInput("field sequence is empty".into()));
    }
    let mut out: Vec<ShapeSolution> = Vec::with_capacity(fields.len());
    let mut seed = first;
    for field in fields {
        let step = ShapeProblem {
            field: *field,
            ..problem.clone()
        };
        let sol = solve_shape(&step, options, &seed)?;
        seed = if sol.converged() {
            InitialShape::Previous(sol.shape.clone())
        } else {
            InitialShape::Straight
        };
        out.push(sol);
    }
    Ok(out)
}

/// Analytic versus five-point finite-difference gradient at `shape`.
pub fn verify_gradient(problem: &ShapeProblem, shape: &Shape) -> Result<GradientCheck> {
    let model = problem.model()?;
    let x = problem.free_vectors(shape)?;
    solver::check_gradient(model.as_ref(), &x)
}
