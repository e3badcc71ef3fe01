//! Quasi-static insertion of a ball chain into planar bifurcating channels.
//!
//! The chain grows at the entry: each inserted ball becomes the new base
//! ball (fixed position and dipole along the insertion axis) and pushes the
//! rest of the chain one diameter forward. After every command the
//! equilibrium is re-solved from the previous shape with channel walls
//! acting as soft penalties.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::{ChainConfig, EnergyTerms, FieldSource, Vec3};
use crate::contact::Wall;
use crate::design::{BallChainDesign, DesignSpec};
use crate::error::{Error, Result};
use crate::magnetics::{Dipole, UniformField};
use crate::model::ContactSettings;
use crate::shape::{solve_shape, Extent, InitialShape, ShapeProblem};
use crate::solver::SolveOptions;

/// Wall penalty stiffness used by the built-in scenes, J/m².
pub const DEFAULT_WALL_STIFFNESS: f64 = 1.0e5;

/// Turning angles of the built-in bifurcation scenes, deg.
pub const BUILTIN_TURNS: [u32; 5] = [90, 120, 135, 150, 165];

/// A named target region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub name: String,
    /// Closed polygon in mm.
    pub polygon_mm: Vec<[f64; 2]>,
}

/// Scene file contents; all lengths in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub name: String,
    pub width_mm: f64,
    pub walls_mm: Vec<[[f64; 2]; 2]>,
    pub entry_mm: [f64; 2],
    #[serde(default)]
    pub axis_deg: f64,
    /// Interior of the channel network; enables collision detection.
    #[serde(default)]
    pub region_mm: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub branches: Vec<Branch>,
}

/// Planar channel network in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScene {
    pub name: String,
    pub width: f64,
    pub walls: Vec<Wall>,
    pub entry: Vec3,
    pub axis: Vec3,
    pub region: Option<Vec<[f64; 2]>>,
    /// Branch polygons in m.
    pub branches: Vec<(String, Vec<[f64; 2]>)>,
}

fn rot(a: f64) -> [f64; 2] {
    [a.cos(), a.sin()]
}

fn add(p: [f64; 2], q: [f64; 2], s: f64) -> [f64; 2] {
    [p[0] + s * q[0], p[1] + s * q[1]]
}

impl ChannelScene {
    /// Y-shaped junction at the origin: trunk along -x, straight branch
    /// along +x and a side branch turning by `turn_deg` to the left.
    pub fn bifurcation(turn_deg: f64, width: f64) -> Result<Self> {
        if !(turn_deg > 0.0 && turn_deg < 180.0) {
            return Err(Error::InvalidInput(
                "turning angle must lie in (0, 180) degrees".into(),
            ));
        }
        if !(width > 0.0) {
            return Err(Error::InvalidInput("channel width must be positive".into()));
        }
        let phi = turn_deg.to_radians();
        let h = 0.5 * width;
        let b = rot(phi);
        let nb = [-b[1], b[0]];
        // corners between adjacent rays sit on their bisectors
        let outer = add([0.0, 0.0], rot(0.5 * phi), h / (0.5 * phi).sin());
        let septum = add(
            [0.0, 0.0],
            rot(0.5 * (phi + PI)),
            h / (0.5 * (PI - phi)).sin(),
        );
        let trunk = septum[0].abs().max(3.0 * width) + 4.0 * width;
        let reach = 12.0 * width;
        let outer_end = add(outer, b, reach);
        let septum_end = add(septum, b, reach);
        let walls = vec![
            Wall::new([-trunk, -h], [reach, -h]),
            Wall::new([-trunk, h], septum),
            Wall::new(septum, septum_end),
            Wall::new(outer, outer_end),
            Wall::new(outer, [reach, h]),
            Wall::new([-trunk, -h], [-trunk, h]),
            Wall::new(outer_end, septum_end),
            Wall::new([reach, -h], [reach, h]),
        ];
        let region = vec![
            [-trunk, -h],
            [reach, -h],
            [reach, h],
            outer,
            outer_end,
            septum_end,
            septum,
            [-trunk, h],
        ];
        // beyond both corners along the branch axis
        let start = (outer[0] * b[0] + outer[1] * b[1]).max(septum[0] * b[0] + septum[1] * b[1]);
        let far = start + reach;
        let branch = vec![
            add(add([0.0, 0.0], b, start), nb, -h),
            add(add([0.0, 0.0], b, far), nb, -h),
            add(add([0.0, 0.0], b, far), nb, h),
            add(add([0.0, 0.0], b, start), nb, h),
        ];
        let straight = vec![
            [outer[0].max(h), -h],
            [reach, -h],
            [reach, h],
            [outer[0].max(h), h],
        ];
        Ok(Self {
            name: format!("turn{}", turn_deg.round() as i64),
            width,
            walls,
            entry: Vec3::new(-trunk + 0.6 * width, 0.0, 0.0),
            axis: Vec3::x(),
            region: Some(region),
            branches: vec![("branch".into(), branch), ("straight".into(), straight)],
        })
    }

    /// Built-in scene by name (`turn90`, `turn120`, `turn135`, `turn150`, `turn165`).
    pub fn builtin(name: &str) -> Result<Self> {
        let turn = name
            .strip_prefix("turn")
            .and_then(|t| t.parse::<u32>().ok())
            .filter(|t| BUILTIN_TURNS.contains(t))
            .ok_or_else(|| Error::InvalidInput(format!("unknown scene `{name}`")))?;
        Self::bifurcation(f64::from(turn), 5.0e-3)
    }

    pub fn builtin_names() -> Vec<String> {
        BUILTIN_TURNS.iter().map(|t| format!("turn{t}")).collect()
    }

    pub fn from_file(file: &SceneFile) -> Result<Self> {
        let mm = |p: [f64; 2]| [p[0] * 1e-3, p[1] * 1e-3];
        if file.walls_mm.is_empty() {
            return Err(Error::InvalidInput("scene has no walls".into()));
        }
        if !(file.width_mm > 0.0) {
            return Err(Error::InvalidInput("channel width must be positive".into()));
        }
        for br in &file.branches {
            if br.polygon_mm.len() < 3 {
                return Err(Error::InvalidInput(format!(
                    "branch `{}` needs at least 3 vertices",
                    br.name
                )));
            }
        }
        let a = file.axis_deg.to_radians();
        Ok(Self {
            name: file.name.clone(),
            width: file.width_mm * 1e-3,
            walls: file
                .walls_mm
                .iter()
                .map(|w| Wall::new(mm(w[0]), mm(w[1])))
                .collect(),
            entry: Vec3::new(file.entry_mm[0] * 1e-3, file.entry_mm[1] * 1e-3, 0.0),
            axis: Vec3::new(a.cos(), a.sin(), 0.0),
            region: file
                .region_mm
                .as_ref()
                .map(|r| r.iter().map(|p| mm(*p)).collect()),
            branches: file
                .branches
                .iter()
                .map(|b| {
                    (
                        b.name.clone(),
                        b.polygon_mm.iter().map(|p| mm(*p)).collect(),
                    )
                })
                .collect(),
        })
    }

    pub fn to_file(&self) -> SceneFile {
        let mm = |p: [f64; 2]| [p[0] * 1e3, p[1] * 1e3];
        SceneFile {
            name: self.name.clone(),
            width_mm: self.width * 1e3,
            walls_mm: self.walls.iter().map(|w| [mm(w.a), mm(w.b)]).collect(),
            entry_mm: [self.entry.x * 1e3, self.entry.y * 1e3],
            axis_deg: self.axis.y.atan2(self.axis.x).to_degrees(),
            region_mm: self
                .region
                .as_ref()
                .map(|r| r.iter().map(|p| mm(*p)).collect()),
            branches: self
                .branches
                .iter()
                .map(|(n, p)| Branch {
                    name: n.clone(),
                    polygon_mm: p.iter().map(|q| mm(*q)).collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: SceneFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            what: "scene".into(),
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        Self::from_file(&file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Built-in name or path to a scene file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if name_or_path.ends_with(".json") || Path::new(name_or_path).exists() {
            Self::load(Path::new(name_or_path))
        } else {
            Self::builtin(name_or_path)
        }
    }

    /// Name of the first branch whose polygon contains `p`.
    pub fn branch_at(&self, p: &Vec3) -> Option<&str> {
        self.branches
            .iter()
            .find(|(_, poly)| point_in_polygon([p.x, p.y], poly))
            .map(|(n, _)| n.as_str())
    }

    pub fn branch(&self, name: &str) -> Option<&[[f64; 2]]> {
        self.branches
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p.as_slice())
    }

    pub fn inside(&self, p: &Vec3) -> bool {
        self.region
            .as_ref()
            .is_none_or(|r| point_in_polygon([p.x, p.y], r))
    }
}

/// Even-odd rule containment.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Steering field state in file units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldState {
    Uniform {
        angle_deg: f64,
        #[serde(rename = "magnitude_mT")]
        magnitude_mt: f64,
    },
    Magnet {
        position_mm: [f64; 3],
        /// A·m².
        moment: [f64; 3],
    },
}

impl FieldState {
    pub fn source(&self) -> Result<FieldSource> {
        match *self {
            FieldState::Uniform {
                angle_deg,
                magnitude_mt,
            } => {
                let a = angle_deg.to_radians();
                Ok(FieldSource::Uniform(UniformField::along(
                    magnitude_mt * 1e-3,
                    Vec3::new(a.cos(), a.sin(), 0.0),
                )?))
            }
            FieldState::Magnet {
                position_mm,
                moment,
            } => {
                let p = Vec3::from(position_mm) * 1e-3;
                let m = Vec3::from(moment);
                if !(p.iter().chain(m.iter()).all(|v| v.is_finite())) {
                    return Err(Error::InvalidInput("magnet pose must be finite".into()));
                }
                Ok(FieldSource::Magnet {
                    dipole: Dipole::new(p, m),
                    diameter: None,
                })
            }
        }
    }
}

/// One session command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Advance {
        length_mm: f64,
    },
    Retract {
        length_mm: f64,
    },
    SetField {
        angle_deg: f64,
        #[serde(rename = "magnitude_mT", default)]
        magnitude_mt: Option<f64>,
    },
    SetMagnetPose {
        position_mm: [f64; 3],
        moment: [f64; 3],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSettings {
    /// J/m².
    pub wall_stiffness: f64,
    pub skin: bool,
    #[serde(rename = "field_mT")]
    pub field_mt: f64,
    pub options: SolveOptions,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            wall_stiffness: DEFAULT_WALL_STIFFNESS,
            skin: true,
            field_mt: 40.0,
            options: SolveOptions {
                restarts: 0,
                max_iterations: 20000,
                ..SolveOptions::default()
            },
        }
    }
}

/// State after one command; serialized as one line of the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub command: Option<Command>,
    pub inserted_length_mm: f64,
    pub balls: usize,
    pub field: FieldState,
    pub positions_mm: Vec<[f64; 3]>,
    pub dipoles: Vec<[f64; 3]>,
    pub tip_mm: [f64; 3],
    pub tip_region: Option<String>,
    pub converged: bool,
    pub iterations: usize,
    /// Solve did not converge; the session continues from its best iterate.
    pub jammed: bool,
    /// A ball center left the channel network.
    pub collision: bool,
    pub max_penetration_mm: f64,
    pub energy_j: f64,
}

/// Stateful insertion session.
#[derive(Debug, Clone)]
pub struct NavigationSession {
    pub scene: ChannelScene,
    pub design: BallChainDesign,
    pub settings: SessionSettings,
    inserted_length: f64,
    field: FieldState,
    shape: ChainConfig,
    log: Vec<LogEntry>,
}

impl NavigationSession {
    /// Session with one ball at the entry and the field along the insertion axis.
    pub fn new(
        scene: ChannelScene,
        design: BallChainDesign,
        settings: SessionSettings,
    ) -> Result<Self> {
        design.validate()?;
        if scene.width <= design.ball_diameter {
            return Err(Error::InvalidInput(format!(
                "channel width {:.3} mm does not exceed the ball diameter {:.3} mm",
                scene.width * 1e3,
                design.ball_diameter * 1e3
            )));
        }
        if !(settings.wall_stiffness > 0.0) {
            return Err(Error::InvalidInput(
                "wall stiffness must be positive".into(),
            ));
        }
        let design = if settings.skin {
            design
        } else {
            BallChainDesign {
                skin: None,
                ..design
            }
        };
        let axis_deg = scene.axis.y.atan2(scene.axis.x).to_degrees();
        let shape = ChainConfig::straight(1, design.ball_diameter, scene.entry, scene.axis)?;
        let mut s = Self {
            inserted_length: design.ball_diameter,
            field: FieldState::Uniform {
                angle_deg: axis_deg,
                magnitude_mt: settings.field_mt,
            },
            scene,
            design,
            settings,
            shape,
            log: Vec::new(),
        };
        s.field.source()?;
        s.solve(None)?;
        Ok(s)
    }

    /// Session on a built-in scene with the bench-prototype balls.
    pub fn builtin(scene: &str) -> Result<Self> {
        Self::new(
            ChannelScene::builtin(scene)?,
            BallChainDesign::experimental(),
            SessionSettings::default(),
        )
    }

    pub fn inserted_length(&self) -> f64 {
        self.inserted_length
    }

    pub fn field(&self) -> FieldState {
        self.field
    }

    pub fn shape(&self) -> &ChainConfig {
        &self.shape
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn last(&self) -> &LogEntry {
        self.log
            .last()
            .expect("session always has an initial entry")
    }

    /// Log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.log {
            out.push_str(&serde_json::to_string(e).expect("log entries serialize"));
            out.push('\n');
        }
        out
    }

    fn ball_count(&self, length: f64) -> usize {
        ((length / self.design.ball_diameter) + 1e-9)
            .floor()
            .max(1.0) as usize
    }

    /// Applies one command, re-solves and returns the new log entry.
    pub fn step(&mut self, command: Command) -> Result<&LogEntry> {
        let d = self.design.ball_diameter;
        match command {
            Command::Advance { length_mm } | Command::Retract { length_mm } => {
                let dl = length_mm * 1e-3;
                if !(dl > 0.0) || dl > d * (1.0 + 1e-12) {
                    return Err(Error::InvalidInput(format!(
                        "step length must lie in (0, {:.4}] mm",
                        d * 1e3
                    )));
                }
                let advancing = matches!(command, Command::Advance { .. });
                let target = if advancing {
                    self.inserted_length + dl
                } else {
                    (self.inserted_length - dl).max(d)
                };
                let n = self.ball_count(target);
                self.resize(n);
                self.inserted_length = target;
            }
            Command::SetField {
                angle_deg,
                magnitude_mt,
            } => {
                let f = FieldState::Uniform {
                    angle_deg,
                    magnitude_mt: magnitude_mt.unwrap_or(match self.field {
                        FieldState::Uniform { magnitude_mt, .. } => magnitude_mt,
                        FieldState::Magnet { .. } => self.settings.field_mt,
                    }),
                };
                f.source()?;
                self.field = f;
            }
            Command::SetMagnetPose {
                position_mm,
                moment,
            } => {
                let f = FieldState::Magnet {
                    position_mm,
                    moment,
                };
                f.source()?;
                self.field = f;
            }
        }
        self.solve(Some(command))?;
        Ok(self.last())
    }

    /// Adds balls at the entry (pushing the chain forward) or removes them.
    fn resize(&mut self, n: usize) {
        let axis = self.scene.axis;
        while self.shape.n() < n {
            self.shape.link_dirs.insert(0, axis);
            self.shape.dipole_dirs.insert(0, axis);
        }
        while self.shape.n() > n {
            self.shape.link_dirs.remove(0);
            self.shape.dipole_dirs.remove(0);
            self.shape.dipole_dirs[0] = axis;
        }
    }

    fn contact(&self) -> ContactSettings {
        ContactSettings {
            walls: self.scene.walls.clone(),
            region: self.scene.region.clone(),
            stiffness: self.settings.wall_stiffness,
        }
    }

    fn problem(&self) -> Result<ShapeProblem> {
        Ok(ShapeProblem {
            design: DesignSpec::BallChain(self.design),
            extent: Extent::Balls(self.shape.n()),
            base_position: self.scene.entry,
            base_tangent: self.scene.axis,
            field: self.field.source()?,
            gravity: None,
            terms: EnergyTerms {
                skin: self.settings.skin,
                clamped_base: true,
                self_contact: true,
            },
            contact: Some(self.contact()),
        })
    }

    fn solve(&mut self, command: Option<Command>) -> Result<()> {
        let problem = self.problem()?;
        let sol = solve_shape(
            &problem,
            &self.settings.options,
            &InitialShape::Previous(crate::shape::Shape::Chain(self.shape.clone())),
        )?;
        let crate::shape::Shape::Chain(cfg) = sol.shape else {
            unreachable!("ball-chain problems return chain shapes")
        };
        self.shape = cfg;
        let pos = self.shape.positions();
        let r = 0.5 * self.design.ball_diameter;
        let pen = self.contact().penalty(&pos, r);
        let collision = pos.iter().any(|p| !self.scene.inside(p));
        let tip = self.shape.tip();
        let mm = |v: &Vec3| [v.x * 1e3, v.y * 1e3, v.z * 1e3];
        self.log.push(LogEntry {
            step: self.log.len(),
            command,
            inserted_length_mm: self.inserted_length * 1e3,
            balls: self.shape.n(),
            field: self.field,
            positions_mm: pos.iter().map(mm).collect(),
            dipoles: self
                .shape
                .dipole_dirs
                .iter()
                .map(|v| [v.x, v.y, v.z])
                .collect(),
            tip_mm: mm(&tip),
            tip_region: self.scene.branch_at(&tip).map(str::to_owned),
            converged: sol.stats.converged,
            iterations: sol.stats.iterations,
            jammed: !sol.stats.converged,
            collision,
            max_penetration_mm: pen.max_penetration * 1e3,
            energy_j: sol.energy.total,
        });
        Ok(())
    }
}

/// Scripted headless run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavigationScript {
    /// Built-in scene name or path to a scene file.
    pub scene: String,
    /// Branch the tip must end in, if asserted.
    #[serde(default)]
    pub target_branch: Option<String>,
    #[serde(default)]
    pub settings: SessionSettings,
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone)]
pub struct ScriptOutcome {
    pub session: NavigationSession,
    /// `Some(true)` when a declared target branch contains the final tip.
    pub reached_target: Option<bool>,
}

impl ScriptOutcome {
    pub fn max_penetration_mm(&self) -> f64 {
        self.session
            .log()
            .iter()
            .map(|e| e.max_penetration_mm)
            .fold(0.0, f64::max)
    }

    pub fn jammed_steps(&self) -> usize {
        self.session.log().iter().filter(|e| e.jammed).count()
    }
}

/// Runs `script` with the bench-prototype balls.
pub fn run_script(script: &NavigationScript) -> Result<ScriptOutcome> {
    run_script_with(script, BallChainDesign::experimental())
}

pub fn run_script_with(
    script: &NavigationScript,
    design: BallChainDesign,
) -> Result<ScriptOutcome> {
    let scene = ChannelScene::resolve(&script.scene)?;
    if let Some(t) = &script.target_branch {
        if scene.branch(t).is_none() {
            return Err(Error::InvalidInput(format!(
                "scene has no branch named `{t}`"
            )));
        }
    }
    let mut session = NavigationSession::new(scene, design, script.settings)?;
    for c in &script.commands {
        session.step(*c)?;
    }
    let reached_target = script
        .target_branch
        .as_ref()
        .map(|t| session.last().tip_region.as_deref() == Some(t.as_str()));
    Ok(ScriptOutcome {
        session,
        reached_target,
    })
}

/// Steering script for a built-in bifurcation: insert with the field along
/// the trunk until the tip is 10 mm before the junction, rotate the field to
/// the branch direction in 15° increments, then insert six more balls.
pub fn autopilot_script(turn_deg: u32) -> Result<NavigationScript> {
    let scene = ChannelScene::builtin(&format!("turn{turn_deg}"))?;
    let d = BallChainDesign::experimental().ball_diameter;
    let half = 0.5 * d * 1e3;
    let mut commands = Vec::new();
    // balls needed for the tip to reach x = -10 mm
    let balls = ((-10.0e-3 - scene.entry.x) / d).ceil() as usize + 1;
    for _ in 0..2 * (balls - 1) {
        commands.push(Command::Advance { length_mm: half });
    }
    let target = f64::from(turn_deg);
    let mut angle = 0.0;
    while angle < target {
        angle = (angle + 15.0).min(target);
        commands.push(Command::SetField {
            angle_deg: angle,
            magnitude_mt: None,
        });
    }
    for _ in 0..12 {
        commands.push(Command::Advance { length_mm: half });
    }
    Ok(NavigationScript {
        scene: scene.name,
        target_branch: Some("branch".into()),
        settings: SessionSettings::default(),
        commands,
    })
}
