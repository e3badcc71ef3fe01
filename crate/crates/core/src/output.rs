//! Run drivers and file emission: shape CSV, JSON reports and SVG plots.
//!
//! All writers are deterministic: the same scenario and seed give
//! byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain::EnergyBreakdown;
use crate::design::DesignKind;
use crate::error::{Error, Result};
use crate::navigation::{run_script_with, Command, NavigationScript, ScriptOutcome};
use crate::scenario::{FieldSpec, Scenario};
use crate::shape::{continuation_from, InitialShape, ShapeSolution};
use crate::workspace::{half_disk, scan_designs, WorkspaceScan};

/// One equilibrium in file units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub scenario: String,
    pub step: usize,
    pub design: DesignKind,
    pub field: FieldSpec,
    pub positions_mm: Vec<[f64; 3]>,
    /// Unit dipole directions.
    pub dipoles: Vec<[f64; 3]>,
    pub tip_mm: [f64; 3],
    #[serde(rename = "energy_J")]
    pub energy_j: EnergyBreakdown,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_norm: f64,
    pub reason: String,
    /// Pairs of non-adjacent balls closer than one diameter.
    pub overlaps: usize,
    pub warnings: Vec<String>,
}

impl SolveReport {
    fn new(scenario: &Scenario, step: usize, field: FieldSpec, sol: &ShapeSolution) -> Self {
        let mm = |v: crate::Vec3| [clean(v.x * 1e3), clean(v.y * 1e3), clean(v.z * 1e3)];
        let unit = |v: &crate::Vec3| [clean(v.x), clean(v.y), clean(v.z)];
        Self {
            scenario: scenario.name.clone(),
            step,
            design: scenario.design.kind,
            field,
            positions_mm: sol.shape.points().into_iter().map(mm).collect(),
            dipoles: sol.shape.dipole_directions().iter().map(unit).collect(),
            tip_mm: mm(sol.shape.tip()),
            energy_j: sol.energy,
            converged: sol.converged(),
            iterations: sol.stats.iterations,
            evaluations: sol.stats.evaluations,
            grad_norm: sol.stats.grad_norm,
            reason: sol.stats.reason.clone(),
            overlaps: sol.overlaps.len(),
            warnings: sol.warnings.clone(),
        }
    }

    /// CSV with one row per ball (or rod node carrying a dipole).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,x_mm,y_mm,z_mm,dipole_x,dipole_y,dipole_z\n");
        let n = self.positions_mm.len().min(self.dipoles.len());
        let skip = self.positions_mm.len() - n;
        for (k, (p, d)) in self.positions_mm[skip..]
            .iter()
            .zip(&self.dipoles)
            .enumerate()
        {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                k + 1,
                p[0],
                p[1],
                p[2],
                d[0],
                d[1],
                d[2]
            )
            .expect("string write");
        }
        out
    }
}

/// Drops the sign of negative zero so files do not show `-0`.
fn clean(v: f64) -> f64 {
    v + 0.0
}

/// Solves every field of the scenario (the sweep, or the single field).
pub fn solve_scenario(scenario: &Scenario) -> Result<Vec<SolveReport>> {
    let fields = scenario.field_sequence()?;
    let problem = scenario.problem_with(&fields[0])?;
    let sources = fields
        .iter()
        .map(FieldSpec::source)
        .collect::<Result<Vec<_>>>()?;
    let sols = continuation_from(
        &problem,
        &sources,
        &scenario.solve_options()?,
        InitialShape::Straight,
    )?;
    Ok(sols
        .iter()
        .zip(&fields)
        .enumerate()
        .map(|(k, (s, f))| SolveReport::new(scenario, k, *f, s))
        .collect())
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone)]
pub struct SolveRun {
    pub reports: Vec<SolveReport>,
    pub files: Vec<PathBuf>,
}

/// Solves and writes `<name>_shape.csv` (one per sweep step when sweeping),
/// `<name>_energy.json` and optionally `<name>_side.svg` into `out`.
pub fn run_solve(scenario: &Scenario, out: &Path) -> Result<SolveRun> {
    let reports = solve_scenario(scenario)?;
    ensure_dir(out)?;
    let mut files = Vec::new();
    let name = &scenario.name;
    if reports.len() == 1 {
        write(
            out.join(format!("{name}_shape.csv")),
            &reports[0].to_csv(),
            &mut files,
        )?;
    } else {
        for r in &reports {
            write(
                out.join(format!("{name}_shape_{:02}.csv", r.step)),
                &r.to_csv(),
                &mut files,
            )?;
        }
    }
    write(
        out.join(format!("{name}_energy.json")),
        &json(&reports),
        &mut files,
    )?;
    if scenario.outputs.svg {
        write(
            out.join(format!("{name}_side.svg")),
            &side_view(&reports),
            &mut files,
        )?;
    }
    Ok(SolveRun { reports, files })
}

/// Side view of every step. The vertical axis is z when the shapes leave
/// the x-y plane more than the x-z plane, y otherwise.
pub fn side_view(reports: &[SolveReport]) -> String {
    let span = |k: usize| {
        let vals = reports
            .iter()
            .flat_map(|r| r.positions_mm.iter().map(move |p| p[k]));
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
            (l.min(v), h.max(v))
        });
        hi - lo
    };
    let vertical = if span(2) > span(1) { 2 } else { 1 };
    let label = if vertical == 2 { "z (mm)" } else { "y (mm)" };
    let mut plot = Plot::new(
        reports.first().map_or("shape", |r| r.scenario.as_str()),
        "x (mm)",
        label,
    );
    for r in reports {
        plot.series.push(Series {
            label: field_label(&r.field),
            points: r.positions_mm.iter().map(|p| [p[0], p[vertical]]).collect(),
            closed: false,
            markers: true,
        });
    }
    plot.render()
}

fn field_label(f: &FieldSpec) -> String {
    match f {
        FieldSpec::Uniform {
            magnitude_mt,
            angle_deg,
            ..
        } => format!("{magnitude_mt} mT at {angle_deg}°"),
        FieldSpec::Magnet { .. } => "magnet".into(),
        FieldSpec::Psi { psi_deg, sign, .. } => {
            let s = if sign.value() > 0.0 { "+x" } else { "-x" };
            format!("ψ = {psi_deg}°, {s}")
        }
    }
}

/// One row of the workspace summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceSummary {
    pub design: DesignKind,
    pub area_mm2: f64,
    pub volume_mm3: f64,
    /// Half disk of the longest length: reach of an ideal base revolute joint.
    pub bound_mm2: f64,
    pub within_bound: bool,
    pub max_reversed_angle_deg: f64,
    pub nonconverged_cells: usize,
}

impl WorkspaceSummary {
    pub fn from_scan(scan: &WorkspaceScan) -> Self {
        let l = scan.lengths_mm.last().copied().unwrap_or(0.0);
        let bound = 0.5 * std::f64::consts::PI * l * l;
        Self {
            design: scan.design,
            area_mm2: scan.area_mm2,
            volume_mm3: scan.volume_mm3,
            bound_mm2: bound,
            within_bound: scan.area_mm2 <= bound * (1.0 + 1e-9),
            max_reversed_angle_deg: scan
                .reversed_tip_angles()
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max),
            nonconverged_cells: scan.converged.iter().flatten().filter(|c| !**c).count(),
        }
    }
}

pub fn summary_csv(rows: &[WorkspaceSummary]) -> String {
    let mut out = String::from(
        "design,area_mm2,volume_mm3,bound_mm2,within_bound,max_reversed_angle_deg,nonconverged_cells\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{:.3},{:.3},{:.3},{},{:.3},{}",
            r.design,
            r.area_mm2,
            r.volume_mm3,
            r.bound_mm2,
            r.within_bound,
            r.max_reversed_angle_deg,
            r.nonconverged_cells
        )
        .expect("string write");
    }
    out
}

#[derive(Debug, Clone)]
pub struct WorkspaceRun {
    pub scans: Vec<WorkspaceScan>,
    pub summary: Vec<WorkspaceSummary>,
    pub files: Vec<PathBuf>,
}

/// Scans the scenario designs; writes `<name>_workspace.json`,
/// `<name>_workspace_summary.csv` and optionally `<name>_workspace.svg`.
pub fn run_workspace(scenario: &Scenario, out: &Path) -> Result<WorkspaceRun> {
    let (designs, settings) = scenario.scan_settings()?;
    let scans = scan_designs(&designs, &settings)?;
    let summary: Vec<_> = scans.iter().map(WorkspaceSummary::from_scan).collect();
    ensure_dir(out)?;
    let mut files = Vec::new();
    let name = &scenario.name;
    write(
        out.join(format!("{name}_workspace.json")),
        &json(&scans),
        &mut files,
    )?;
    write(
        out.join(format!("{name}_workspace_summary.csv")),
        &summary_csv(&summary),
        &mut files,
    )?;
    if scenario.outputs.svg {
        write(
            out.join(format!("{name}_workspace.svg")),
            &workspace_plot(name, &scans),
            &mut files,
        )?;
    }
    Ok(WorkspaceRun {
        scans,
        summary,
        files,
    })
}

/// Boundaries of every scan, with the ideal half disk for reference.
pub fn workspace_plot(title: &str, scans: &[WorkspaceScan]) -> String {
    let mut plot = Plot::new(title, "x (mm)", "y (mm)");
    if let Some(l) = scans
        .iter()
        .filter_map(|s| s.lengths_mm.last())
        .cloned()
        .reduce(f64::max)
    {
        plot.series.push(Series {
            label: "revolute joint".into(),
            points: half_disk(l, 2.0),
            closed: true,
            markers: false,
        });
    }
    for s in scans {
        plot.series.push(Series {
            label: format!("{} ({:.0} mm²)", s.design, s.area_mm2),
            points: s.polygon(),
            closed: true,
            markers: false,
        });
    }
    plot.render()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationSummary {
    pub scene: String,
    pub steps: usize,
    pub target_branch: Option<String>,
    pub reached_target: Option<bool>,
    pub final_tip_region: Option<String>,
    pub jammed_steps: usize,
    pub collisions: usize,
    pub max_penetration_mm: f64,
}

impl NavigationSummary {
    pub fn from_outcome(script: &NavigationScript, outcome: &ScriptOutcome) -> Self {
        let log = outcome.session.log();
        Self {
            scene: outcome.session.scene.name.clone(),
            steps: log.len() - 1,
            target_branch: script.target_branch.clone(),
            reached_target: outcome.reached_target,
            final_tip_region: outcome.session.last().tip_region.clone(),
            jammed_steps: outcome.jammed_steps(),
            collisions: log.iter().filter(|e| e.collision).count(),
            max_penetration_mm: outcome.max_penetration_mm(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NavigationRun {
    pub outcome: ScriptOutcome,
    pub summary: NavigationSummary,
    pub files: Vec<PathBuf>,
}

/// Parses a command file: a JSON array of commands.
pub fn parse_commands(text: &str) -> Result<Vec<Command>> {
    crate::scenario::parse_json(text, "command file")
}

/// Runs the scenario's navigation script headlessly; `commands` replaces
/// the script's own list when given. Writes `<name>_navigation.jsonl`,
/// `<name>_navigation_summary.json` and optionally `<name>_navigation.svg`.
pub fn run_navigation_script(
    scenario: &Scenario,
    commands: Option<Vec<Command>>,
    out: &Path,
) -> Result<NavigationRun> {
    let mut script = scenario
        .navigation
        .clone()
        .ok_or_else(|| Error::InvalidInput("scenario has no `navigation` section".into()))?;
    if let Some(c) = commands {
        script.commands = c;
    }
    let crate::DesignSpec::BallChain(design) = scenario.design.resolve()? else {
        return Err(Error::InvalidInput(
            "navigation needs a ball-chain design".into(),
        ));
    };
    let outcome = run_script_with(&script, design)?;
    let summary = NavigationSummary::from_outcome(&script, &outcome);
    ensure_dir(out)?;
    let mut files = Vec::new();
    let name = &scenario.name;
    write(
        out.join(format!("{name}_navigation.jsonl")),
        &outcome.session.log_jsonl(),
        &mut files,
    )?;
    write(
        out.join(format!("{name}_navigation_summary.json")),
        &json(&summary),
        &mut files,
    )?;
    if scenario.outputs.svg {
        write(
            out.join(format!("{name}_navigation.svg")),
            &navigation_plot(&outcome),
            &mut files,
        )?;
    }
    Ok(NavigationRun {
        outcome,
        summary,
        files,
    })
}

/// Channel walls with the final chain shape.
pub fn navigation_plot(outcome: &ScriptOutcome) -> String {
    let s = &outcome.session;
    let mut plot = Plot::new(&s.scene.name, "x (mm)", "y (mm)");
    for w in &s.scene.walls {
        plot.series.push(Series {
            label: String::new(),
            points: vec![[w.a[0] * 1e3, w.a[1] * 1e3], [w.b[0] * 1e3, w.b[1] * 1e3]],
            closed: false,
            markers: false,
        });
    }
    plot.series.push(Series {
        label: "chain".into(),
        points: s.last().positions_mm.iter().map(|p| [p[0], p[1]]).collect(),
        closed: false,
        markers: true,
    });
    plot.render()
}

/// A polyline on a [`Plot`].
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
    /// Draw a dot at every vertex.
    pub markers: bool,
}

/// Equal-aspect 2D polyline plot with mm ticks.
#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const MARGIN: f64 = 64.0;

fn tick_step(span: f64) -> f64 {
    let raw = span / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let pts = self.series.iter().flat_map(|s| s.points.iter());
        let (mut x0, mut x1, mut y0, mut y1) = pts.fold(
            (
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), p| (a.min(p[0]), b.max(p[0]), c.min(p[1]), d.max(p[1])),
        );
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let pad = 0.05 * (x1 - x0).max(y1 - y0).max(1.0);
        (x0, x1, y0, y1) = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);
        let (w, h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
        let scale = (w / (x1 - x0)).min(h / (y1 - y0));
        let ox = MARGIN + 0.5 * (w - scale * (x1 - x0));
        let oy = MARGIN + 0.5 * (h + scale * (y1 - y0));
        let sx = |x: f64| ox + scale * (x - x0);
        let sy = |y: f64| oy - scale * (y - y0);

        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(o, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (left, right, top, bottom) = (sx(x0), sx(x1), sy(y1), sy(y0));
        let _ = writeln!(
            o,
            r#"<rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            right - left,
            bottom - top
        );
        let step = tick_step((x1 - x0).max(y1 - y0));
        let mut t = (x0 / step).ceil() * step;
        while t <= x1 {
            let x = sx(t);
            let _ = writeln!(
                o,
                r#"<line x1="{x:.1}" y1="{bottom:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                bottom + 5.0,
                bottom + 18.0,
                clean(t)
            );
            t += step;
        }
        let mut t = (y0 / step).ceil() * step;
        while t <= y1 {
            let y = sy(t);
            let _ = writeln!(
                o,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{left:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                left - 5.0,
                left - 8.0,
                y + 4.0,
                clean(t)
            );
            t += step;
        }
        let _ = writeln!(
            o,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            0.5 * (left + right),
            bottom + 38.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            o,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
            left - 44.0,
            0.5 * (top + bottom),
            left - 44.0,
            0.5 * (top + bottom),
            escape(&self.y_label)
        );

        let mut legend = 0;
        for (k, s) in self.series.iter().enumerate() {
            let color = if s.label.is_empty() {
                "#444444"
            } else {
                PALETTE[k % PALETTE.len()]
            };
            let coords: Vec<String> = s
                .points
                .iter()
                .map(|p| format!("{:.2},{:.2}", sx(p[0]), sy(p[1])))
                .collect();
            let tag = if s.closed { "polygon" } else { "polyline" };
            let _ = writeln!(
                o,
                r#"<{tag} points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                coords.join(" ")
            );
            if s.markers {
                for p in &s.points {
                    let _ = writeln!(
                        o,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                        sx(p[0]),
                        sy(p[1])
                    );
                }
            }
            if !s.label.is_empty() {
                let y = top + 16.0 + 16.0 * legend as f64;
                let _ = writeln!(
                    o,
                    r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                    left + 8.0,
                    left + 28.0,
                    left + 34.0,
                    y + 4.0,
                    escape(&s.label)
                );
                legend += 1;
            }
        }
        o.push_str("</svg>\n");
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(tick_step(20.0), 5.0);
        assert_eq!(tick_step(8.0), 1.0);
        assert_eq!(tick_step(0.3), 0.05);
    }

    #[test]
    fn plot_is_well_formed() {
        let mut p = Plot::new("a<b", "x (mm)", "y (mm)");
        p.series.push(Series {
            label: "one".into(),
            points: vec![[0.0, 0.0], [1.0, 2.0]],
            closed: false,
            markers: true,
        });
        let svg = p.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
