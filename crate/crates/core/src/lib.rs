//! Quasi-static shape simulation of magnetic ball-chain robots and
//! continuum-rod comparison designs.
//!
//! The crate computes equilibrium shapes by minimizing total potential
//! energy (dipole interactions, external field, elastic bending, gravity and
//! optional wall contact) over the directions of the chain links and ball
//! dipoles. On top of the solver it provides workspace scans, channel
//! navigation sessions and JSON scenario handling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod contact;
pub mod design;
pub mod error;
pub mod magnetics;
pub mod mechanics;
pub mod model;
pub mod navigation;
pub mod output;
pub mod scenario;
pub mod shape;
pub mod solver;
pub mod verify;
pub mod workspace;

pub use chain::{
    ChainConfig, EnergyBreakdown, EnergyTerms, FieldSource, Gravity, RodLayout, RodShape, Vec3,
};
pub use design::{
    design_from_table, BallChainDesign, DesignKind, DesignSpec, DistributedDesign, TipMagnetDesign,
};
pub use error::{Error, Result};
pub use magnetics::{Dipole, UniformField};
pub use output::{run_navigation_script, run_solve, run_workspace, solve_scenario, SolveReport};
pub use scenario::{magnet_pose_from_psi, preset, DesignSelection, FieldSpec, Scenario};
pub use shape::{
    continuation_sweep, solve_shape, verify_gradient, Extent, InitialShape, Shape, ShapeProblem,
    ShapeSolution,
};
pub use solver::{GradientMode, SolveOptions, SolveStats};
