//! Scenario files: the user-facing description of a run.
//!
//! Files use mm, mT and degrees, with the unit in the key name where it is
//! not obvious (`length_mm`, `magnitude_mT`). Everything is converted to SI
//! when a [`ShapeProblem`] is built. Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::{EnergyTerms, FieldSource, Gravity, Vec3};
use crate::design::{
    BallChainDesign, DesignKind, DesignSpec, DistributedDesign, TipMagnetDesign, NDFEB_DENSITY,
};
use crate::error::{Error, Result};
use crate::magnetics::{moment_from_remanence, Dipole, UniformField};
use crate::navigation::{autopilot_script, NavigationScript};
use crate::shape::{Extent, ShapeProblem};
use crate::solver::SolveOptions;
use crate::workspace::ScanSettings;

/// Deserializes JSON; errors name the key path (`field.magnitude_mT`) and
/// the line and column.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        what: what.into(),
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

/// Bench gimbal lever arms, m.
pub const PSI_V1: f64 = 0.15;
pub const PSI_V2: f64 = 0.20;
pub const PSI_V3: f64 = 0.35;

/// Which constants a design starts from before overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignPreset {
    /// Comparison-table constants.
    #[default]
    Table,
    /// 3.175 mm bench spheres (ball chains only).
    Experimental,
}

/// A design kind, its preset, and optional per-field overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSelection {
    pub kind: DesignKind,
    #[serde(default)]
    pub preset: DesignPreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball_diameter_mm: Option<f64>,
    #[serde(
        default,
        rename = "remanence_T",
        skip_serializing_if = "Option::is_none"
    )]
    pub remanence_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball_mass_g: Option<f64>,
    /// 0 removes the skin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skin_thickness_mm: Option<f64>,
    #[serde(
        default,
        rename = "skin_modulus_kPa",
        skip_serializing_if = "Option::is_none"
    )]
    pub skin_modulus_kpa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rod_diameter_mm: Option<f64>,
    #[serde(
        default,
        rename = "rod_modulus_kPa",
        skip_serializing_if = "Option::is_none"
    )]
    pub rod_modulus_kpa: Option<f64>,
    #[serde(
        default,
        rename = "tip_moment_Am2",
        skip_serializing_if = "Option::is_none"
    )]
    pub tip_moment_am2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnet_length_mm: Option<f64>,
    #[serde(
        default,
        rename = "moment_per_length_Am",
        skip_serializing_if = "Option::is_none"
    )]
    pub moment_per_length_am: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_mm: Option<f64>,
}

impl DesignSelection {
    pub fn preset(kind: DesignKind, preset: DesignPreset) -> Self {
        Self {
            kind,
            preset,
            ball_diameter_mm: None,
            remanence_t: None,
            ball_mass_g: None,
            skin_thickness_mm: None,
            skin_modulus_kpa: None,
            rod_diameter_mm: None,
            rod_modulus_kpa: None,
            tip_moment_am2: None,
            magnet_length_mm: None,
            moment_per_length_am: None,
            pitch_mm: None,
        }
    }

    pub fn table(kind: DesignKind) -> Self {
        Self::preset(kind, DesignPreset::Table)
    }

    fn reject(&self, allowed: &[&str]) -> Result<()> {
        let set = [
            ("ball_diameter_mm", self.ball_diameter_mm.is_some()),
            ("remanence_T", self.remanence_t.is_some()),
            ("ball_mass_g", self.ball_mass_g.is_some()),
            ("skin_thickness_mm", self.skin_thickness_mm.is_some()),
            ("skin_modulus_kPa", self.skin_modulus_kpa.is_some()),
            ("rod_diameter_mm", self.rod_diameter_mm.is_some()),
            ("rod_modulus_kPa", self.rod_modulus_kpa.is_some()),
            ("tip_moment_Am2", self.tip_moment_am2.is_some()),
            ("magnet_length_mm", self.magnet_length_mm.is_some()),
            ("moment_per_length_Am", self.moment_per_length_am.is_some()),
            ("pitch_mm", self.pitch_mm.is_some()),
        ];
        for (key, present) in set {
            if present && !allowed.contains(&key) {
                return Err(Error::InvalidInput(format!(
                    "design key `{key}` does not apply to {}",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    /// Resolves the selection to SI design constants.
    pub fn resolve(&self) -> Result<DesignSpec> {
        let spec = match self.kind {
            DesignKind::BallChain => DesignSpec::BallChain(self.ball_chain()?),
            kind if self.preset == DesignPreset::Experimental => {
                return Err(Error::InvalidInput(format!(
                    "the experimental preset exists for ball chains only, not {kind}"
                )));
            }
            DesignKind::TipMagnet => {
                self.reject(&[
                    "rod_diameter_mm",
                    "rod_modulus_kPa",
                    "tip_moment_Am2",
                    "magnet_length_mm",
                    "pitch_mm",
                ])?;
                let base = TipMagnetDesign::table();
                DesignSpec::TipMagnet(TipMagnetDesign {
                    rod_diameter: self.rod_diameter_mm.map_or(base.rod_diameter, |v| v * 1e-3),
                    modulus: self.rod_modulus_kpa.map_or(base.modulus, |v| v * 1e3),
                    tip_moment: self.tip_moment_am2.unwrap_or(base.tip_moment),
                    magnet_length: self
                        .magnet_length_mm
                        .map_or(base.magnet_length, |v| v * 1e-3),
                    pitch: self.pitch_mm.map_or(base.pitch, |v| v * 1e-3),
                    ..base
                })
            }
            DesignKind::DistributedParticles => {
                self.reject(&[
                    "rod_diameter_mm",
                    "rod_modulus_kPa",
                    "moment_per_length_Am",
                    "pitch_mm",
                ])?;
                let base = DistributedDesign::table();
                DesignSpec::DistributedParticles(DistributedDesign {
                    rod_diameter: self.rod_diameter_mm.map_or(base.rod_diameter, |v| v * 1e-3),
                    modulus: self.rod_modulus_kpa.map_or(base.modulus, |v| v * 1e3),
                    moment_per_length: self.moment_per_length_am.unwrap_or(base.moment_per_length),
                    pitch: self.pitch_mm.map_or(base.pitch, |v| v * 1e-3),
                    ..base
                })
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    fn ball_chain(&self) -> Result<BallChainDesign> {
        self.reject(&[
            "ball_diameter_mm",
            "remanence_T",
            "ball_mass_g",
            "skin_thickness_mm",
            "skin_modulus_kPa",
        ])?;
        let base = match self.preset {
            DesignPreset::Table => BallChainDesign::table(),
            DesignPreset::Experimental => BallChainDesign::experimental(),
        };
        let skin = base.skin.expect("presets carry a skin");
        let d = self
            .ball_diameter_mm
            .map_or(base.ball_diameter, |v| v * 1e-3);
        let br = self.remanence_t.unwrap_or(base.remanence);
        let t = self
            .skin_thickness_mm
            .map_or(0.5 * (skin.outer_diameter - skin.inner_diameter), |v| {
                v * 1e-3
            });
        let e = self.skin_modulus_kpa.map_or(skin.modulus, |v| v * 1e3);
        if !(t >= 0.0) {
            return Err(Error::InvalidInput(
                "skin thickness must be non-negative".into(),
            ));
        }
        let mut out = BallChainDesign::from_material(d, br, t, e);
        out.ball_mass = match self.ball_mass_g {
            Some(g) => g * 1e-3,
            None if self.ball_diameter_mm.is_none() => base.ball_mass,
            None => NDFEB_DENSITY * PI / 6.0 * d.powi(3),
        };
        if t == 0.0 {
            out.skin = None;
        }
        out.validate()?;
        Ok(out)
    }
}

/// Sign of the external magnet's dipole along x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipoleSign {
    #[default]
    Plus,
    Minus,
}

impl DipoleSign {
    pub fn value(self) -> f64 {
        match self {
            DipoleSign::Plus => 1.0,
            DipoleSign::Minus => -1.0,
        }
    }
}

/// Cylindrical permanent magnet, file units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderMagnet {
    pub diameter_mm: f64,
    pub length_mm: f64,
    #[serde(rename = "remanence_T")]
    pub remanence_t: f64,
}

impl Default for CylinderMagnet {
    /// N52, 76.2 mm diameter, 38.1 mm long.
    fn default() -> Self {
        Self {
            diameter_mm: 76.2,
            length_mm: 38.1,
            remanence_t: 1.48,
        }
    }
}

impl CylinderMagnet {
    /// Moment magnitude in A·m².
    pub fn moment(&self) -> f64 {
        let r = 0.5 * self.diameter_mm * 1e-3;
        moment_from_remanence(self.remanence_t, PI * r * r * self.length_mm * 1e-3)
    }

    fn validate(&self) -> Result<()> {
        if [self.diameter_mm, self.length_mm, self.remanence_t]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
        {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "magnet dimensions and remanence must be positive".into(),
            ))
        }
    }
}

fn default_v1() -> f64 {
    PSI_V1 * 1e3
}
fn default_v2() -> f64 {
    PSI_V2 * 1e3
}
fn default_v3() -> f64 {
    PSI_V3 * 1e3
}

/// External field description, file units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// Uniform field; direction by azimuth in the x-y plane and elevation toward +z.
    Uniform {
        #[serde(rename = "magnitude_mT")]
        magnitude_mt: f64,
        #[serde(default)]
        angle_deg: f64,
        #[serde(default)]
        elevation_deg: f64,
    },
    /// Point dipole at a fixed pose.
    Magnet {
        position_mm: [f64; 3],
        #[serde(rename = "moment_Am2")]
        moment_am2: [f64; 3],
        #[serde(default)]
        diameter_mm: Option<f64>,
    },
    /// Gimbal-mounted cylinder magnet posed by the angle ψ.
    Psi {
        psi_deg: f64,
        #[serde(default)]
        sign: DipoleSign,
        #[serde(default = "default_v1")]
        v1_mm: f64,
        #[serde(default = "default_v2")]
        v2_mm: f64,
        #[serde(default = "default_v3")]
        v3_mm: f64,
        #[serde(default)]
        magnet: CylinderMagnet,
    },
}

impl FieldSpec {
    pub fn uniform(magnitude_mt: f64, angle_deg: f64) -> Self {
        FieldSpec::Uniform {
            magnitude_mt,
            angle_deg,
            elevation_deg: 0.0,
        }
    }

    pub fn psi(psi_deg: f64, sign: DipoleSign) -> Self {
        FieldSpec::Psi {
            psi_deg,
            sign,
            v1_mm: default_v1(),
            v2_mm: default_v2(),
            v3_mm: default_v3(),
            magnet: CylinderMagnet::default(),
        }
    }

    /// SI field source.
    pub fn source(&self) -> Result<FieldSource> {
        match *self {
            FieldSpec::Uniform {
                magnitude_mt,
                angle_deg,
                elevation_deg,
            } => {
                let (a, e) = (angle_deg.to_radians(), elevation_deg.to_radians());
                let dir = Vec3::new(a.cos() * e.cos(), a.sin() * e.cos(), e.sin());
                Ok(FieldSource::Uniform(UniformField::along(
                    magnitude_mt * 1e-3,
                    dir,
                )?))
            }
            FieldSpec::Magnet {
                position_mm,
                moment_am2,
                diameter_mm,
            } => {
                let p = Vec3::from(position_mm) * 1e-3;
                let m = Vec3::from(moment_am2);
                if !p.iter().chain(m.iter()).all(|v| v.is_finite()) {
                    return Err(Error::InvalidInput("magnet pose must be finite".into()));
                }
                if let Some(dia) = diameter_mm {
                    if !(dia > 0.0) {
                        return Err(Error::InvalidInput(
                            "magnet diameter must be positive".into(),
                        ));
                    }
                }
                Ok(FieldSource::Magnet {
                    dipole: Dipole::new(p, m),
                    diameter: diameter_mm.map(|d| d * 1e-3),
                })
            }
            FieldSpec::Psi {
                psi_deg,
                sign,
                v1_mm,
                v2_mm,
                v3_mm,
                magnet,
            } => {
                magnet.validate()?;
                if ![psi_deg, v1_mm, v2_mm, v3_mm].iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidInput(
                        "magnet pose parameters must be finite".into(),
                    ));
                }
                let dipole = magnet_pose_from_psi(
                    psi_deg,
                    v1_mm * 1e-3,
                    v2_mm * 1e-3,
                    v3_mm * 1e-3,
                    sign,
                    magnet.moment(),
                );
                Ok(FieldSource::Magnet {
                    dipole,
                    diameter: Some(magnet.diameter_mm * 1e-3),
                })
            }
        }
    }

    /// Same spec with the swept angle replaced.
    fn with_sweep(&self, over: SweepAxis, value: f64) -> Result<Self> {
        let mut out = *self;
        match (over, &mut out) {
            (SweepAxis::Psi, FieldSpec::Psi { psi_deg, .. }) => *psi_deg = value,
            (SweepAxis::Angle, FieldSpec::Uniform { angle_deg, .. }) => *angle_deg = value,
            (SweepAxis::Psi, _) => {
                return Err(Error::InvalidInput(
                    "a psi sweep needs a `psi` field".into(),
                ))
            }
            (SweepAxis::Angle, _) => {
                return Err(Error::InvalidInput(
                    "an angle sweep needs a `uniform` field".into(),
                ))
            }
        }
        Ok(out)
    }
}

/// Pose of the gimbal magnet: p_e = (v3 - v1 sin ψ, 0, v1 cos ψ - v2), m = ±|m| x̂.
pub fn magnet_pose_from_psi(
    psi_deg: f64,
    v1: f64,
    v2: f64,
    v3: f64,
    sign: DipoleSign,
    moment: f64,
) -> Dipole {
    let psi = psi_deg.to_radians();
    Dipole::new(
        Vec3::new(v3 - v1 * psi.sin(), 0.0, v1 * psi.cos() - v2),
        Vec3::new(sign.value() * moment, 0.0, 0.0),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseSpec {
    pub position_mm: [f64; 3],
    pub tangent: [f64; 3],
}

impl Default for BaseSpec {
    fn default() -> Self {
        Self {
            position_mm: [0.0; 3],
            tangent: [1.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GravitySpec {
    pub enabled: bool,
    pub g_mps2: f64,
    /// Direction opposite to gravity.
    pub up: [f64; 3],
}

impl Default for GravitySpec {
    fn default() -> Self {
        Self {
            enabled: false,
            g_mps2: 9.81,
            up: [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Gimbal angle of a `psi` field.
    Psi,
    /// Azimuth of a `uniform` field.
    Angle,
}

/// Continuation over a list of field angles, each solve seeded by the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub over: SweepAxis,
    pub values_deg: Vec<f64>,
}

fn default_field_mt() -> f64 {
    40.0
}
fn default_angles() -> Vec<f64> {
    (0..=180).map(f64::from).collect()
}
fn default_lengths() -> Vec<f64> {
    (1..=20).map(f64::from).collect()
}
fn yes() -> bool {
    true
}

/// Workspace scan grid and the designs to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceSpec {
    /// Designs to scan; empty means the scenario's own design.
    #[serde(default)]
    pub designs: Vec<DesignSelection>,
    #[serde(default = "default_field_mt", rename = "field_mT")]
    pub field_mt: f64,
    #[serde(default = "default_angles")]
    pub angles_deg: Vec<f64>,
    #[serde(default = "default_lengths")]
    pub lengths_mm: Vec<f64>,
    #[serde(default = "yes")]
    pub parallel: bool,
}

impl Default for WorkspaceSpec {
    fn default() -> Self {
        Self {
            designs: Vec::new(),
            field_mt: default_field_mt(),
            angles_deg: default_angles(),
            lengths_mm: default_lengths(),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub svg: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { svg: true }
    }
}

fn default_name() -> String {
    "scenario".into()
}

/// One run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    /// Seeds every randomized restart in the run; replaces `solver.seed`.
    #[serde(default)]
    pub seed: u64,
    pub design: DesignSelection,
    /// Ball count (ball chains).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balls: Option<usize>,
    /// Device length; for ball chains rounded to whole balls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_mm: Option<f64>,
    #[serde(default)]
    pub base: BaseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub gravity: GravitySpec,
    #[serde(default)]
    pub terms: EnergyTerms,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workspace: Option<WorkspaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub navigation: Option<NavigationScript>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl Scenario {
    /// Minimal scenario for `design` with defaults everywhere else.
    pub fn new(name: impl Into<String>, design: DesignSelection) -> Self {
        Self {
            name: name.into(),
            seed: 0,
            design,
            balls: None,
            length_mm: None,
            base: BaseSpec::default(),
            field: None,
            gravity: GravitySpec::default(),
            terms: EnergyTerms::default(),
            solver: SolveOptions::default(),
            sweep: None,
            workspace: None,
            navigation: None,
            outputs: OutputSpec::default(),
        }
    }

    /// Parses JSON, reporting the offending key path and line on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        parse_json(text, "scenario")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse {
                what,
                path: key,
                message,
            } => Error::Parse {
                what: format!("{what} {}", path.display()),
                path: key,
                message,
            },
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios serialize")
    }

    /// Solver options with the scenario seed applied.
    pub fn solve_options(&self) -> Result<SolveOptions> {
        let opts = SolveOptions {
            seed: self.seed,
            ..self.solver
        };
        opts.validate()?;
        Ok(opts)
    }

    fn extent(&self, design: &DesignSpec) -> Result<Extent> {
        match (self.balls, self.length_mm) {
            (Some(_), Some(_)) => Err(Error::InvalidInput(
                "give either `balls` or `length_mm`, not both".into(),
            )),
            (Some(n), None) if design.kind() == DesignKind::BallChain => Ok(Extent::Balls(n)),
            (Some(_), None) => Err(Error::InvalidInput(
                "rod designs take `length_mm`, not `balls`".into(),
            )),
            (None, Some(l)) => Ok(Extent::Length(l * 1e-3)),
            (None, None) => Err(Error::InvalidInput("missing `balls` or `length_mm`".into())),
        }
    }

    /// Single-solve problem for the scenario field (or `field` when given).
    pub fn problem_with(&self, field: &FieldSpec) -> Result<ShapeProblem> {
        let design = self.design.resolve()?;
        let extent = self.extent(&design)?;
        let mut problem = ShapeProblem::new(design, extent, field.source()?);
        problem.base_position = Vec3::from(self.base.position_mm) * 1e-3;
        problem.base_tangent = Vec3::from(self.base.tangent);
        problem.terms = self.terms;
        if self.gravity.enabled {
            problem.gravity = Some(Gravity {
                g: self.gravity.g_mps2,
                up: Vec3::from(self.gravity.up),
            });
        }
        problem.validate()?;
        Ok(problem)
    }

    pub fn field_spec(&self) -> Result<&FieldSpec> {
        self.field
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("scenario has no `field`".into()))
    }

    pub fn problem(&self) -> Result<ShapeProblem> {
        self.problem_with(self.field_spec()?)
    }

    /// Field of every solve in order: the sweep values, or the single field.
    pub fn field_sequence(&self) -> Result<Vec<FieldSpec>> {
        let base = self.field_spec()?;
        match &self.sweep {
            None => Ok(vec![*base]),
            Some(s) if s.values_deg.is_empty() => {
                Err(Error::InvalidInput("sweep has no values".into()))
            }
            Some(s) => s
                .values_deg
                .iter()
                .map(|v| base.with_sweep(s.over, *v))
                .collect(),
        }
    }

    /// Designs and grid of the workspace scan.
    pub fn scan_settings(&self) -> Result<(Vec<DesignSpec>, ScanSettings)> {
        let ws = self.workspace.clone().unwrap_or_default();
        let designs = if ws.designs.is_empty() {
            vec![self.design.resolve()?]
        } else {
            ws.designs
                .iter()
                .map(DesignSelection::resolve)
                .collect::<Result<_>>()?
        };
        let settings = ScanSettings {
            field_tesla: ws.field_mt * 1e-3,
            angles_deg: ws.angles_deg,
            lengths_mm: ws.lengths_mm,
            skin: self.terms.skin,
            parallel: ws.parallel,
            options: self.solve_options()?,
        };
        settings.validate()?;
        Ok((designs, settings))
    }
}

/// Built-in scenario names.
pub fn preset_names() -> Vec<String> {
    let mut names: Vec<String> = ["aligned", "experiment_down", "experiment_up", "workspace"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend(
        crate::navigation::BUILTIN_TURNS
            .iter()
            .map(|t| format!("navigate_turn{t}")),
    );
    names
}

/// Built-in scenarios.
///
/// * `aligned`: ten table balls, 40 mT along the chain.
/// * `experiment_down` / `experiment_up`: bench chain under the gimbal magnet,
///   ψ swept 30, 60, 75, 90 with the dipole along +x, or 90, 75, 60, 30 along -x.
/// * `workspace`: the three designs at 40 mT over 0..180° and 1..20 mm.
/// * `navigate_turnNN`: steering script through a built-in bifurcation.
pub fn preset(name: &str) -> Result<Scenario> {
    match name {
        "aligned" => {
            let mut s = Scenario::new(name, DesignSelection::table(DesignKind::BallChain));
            s.balls = Some(10);
            s.field = Some(FieldSpec::uniform(40.0, 0.0));
            Ok(s)
        }
        "experiment_down" | "experiment_up" => {
            let down = name == "experiment_down";
            let mut s = Scenario::new(
                name,
                DesignSelection::preset(DesignKind::BallChain, DesignPreset::Experimental),
            );
            s.balls = Some(10);
            s.gravity.enabled = true;
            let (sign, values) = if down {
                (DipoleSign::Plus, vec![30.0, 60.0, 75.0, 90.0])
            } else {
                (DipoleSign::Minus, vec![90.0, 75.0, 60.0, 30.0])
            };
            s.field = Some(FieldSpec::psi(values[0], sign));
            s.sweep = Some(SweepSpec {
                over: SweepAxis::Psi,
                values_deg: values,
            });
            Ok(s)
        }
        "workspace" => {
            let mut s = Scenario::new(name, DesignSelection::table(DesignKind::BallChain));
            s.workspace = Some(WorkspaceSpec {
                designs: DesignKind::ALL
                    .iter()
                    .map(|k| DesignSelection::table(*k))
                    .collect(),
                ..WorkspaceSpec::default()
            });
            Ok(s)
        }
        _ => {
            let turn = name
                .strip_prefix("navigate_turn")
                .and_then(|t| t.parse::<u32>().ok())
                .filter(|t| crate::navigation::BUILTIN_TURNS.contains(t))
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "unknown preset `{name}` (known: {})",
                        preset_names().join(", ")
                    ))
                })?;
            let mut s = Scenario::new(
                name,
                DesignSelection::preset(DesignKind::BallChain, DesignPreset::Experimental),
            );
            s.navigation = Some(autopilot_script(turn)?);
            Ok(s)
        }
    }
}
