//! Python bindings.
//!
//! ```python
//! import pyballchain as bc
//! s = bc.Scenario.preset("experiment_down")
//! for r in s.solve():
//!     print(r.tip_mm, r.energy["total"])
//! ```
//!
//! Structured values (energies, log entries) come back as plain dicts and
//! lists; units follow the scenario files (mm, mT, degrees).

use std::path::PathBuf;

use ballchain::navigation::{
    ChannelScene, Command, NavigationSession as CoreSession, SessionSettings,
};
use ballchain::output::parse_commands;
use ballchain::scenario::{
    self, parse_json, preset, preset_names, CylinderMagnet, DesignSelection, DipoleSign,
};
use ballchain::{
    magnetics, workspace, BallChainDesign, DesignSpec, Error, Scenario as CoreScenario,
    SolveReport, Vec3,
};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

type Triple = (f64, f64, f64);

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Parse { .. } | Error::InvalidInput(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Any serializable value as Python objects, via `json.loads`.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn paths(files: &[PathBuf]) -> Vec<String> {
    files.iter().map(|p| p.display().to_string()).collect()
}

/// A run description; see `Scenario.preset` and `Scenario.from_json`.
#[pyclass(module = "pyballchain", skip_from_py_object)]
#[derive(Clone)]
struct Scenario {
    inner: CoreScenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: preset(name).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CoreScenario::from_json(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: CoreScenario::load(&path).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn skin(&self) -> bool {
        self.inner.terms.skin
    }

    #[setter]
    fn set_skin(&mut self, on: bool) {
        self.inner.terms.skin = on;
    }

    /// Replaces the design by the table constants of `kind`.
    fn set_design(&mut self, kind: &str) -> PyResult<()> {
        self.inner.design = DesignSelection::table(kind.parse().map_err(err)?);
        Ok(())
    }

    /// Solves every field of the scenario; the GIL is released meanwhile.
    fn solve(&self, py: Python<'_>) -> PyResult<Vec<SolveResult>> {
        let s = self.inner.clone();
        let reports = py
            .detach(move || ballchain::solve_scenario(&s))
            .map_err(err)?;
        Ok(reports
            .into_iter()
            .map(|inner| SolveResult { inner })
            .collect())
    }

    /// Writes the solve outputs into `out`; returns the file paths.
    fn run_solve(&self, py: Python<'_>, out: PathBuf) -> PyResult<Vec<String>> {
        let s = self.inner.clone();
        let run = py
            .detach(move || ballchain::run_solve(&s, &out))
            .map_err(err)?;
        Ok(paths(&run.files))
    }

    /// Runs the workspace scan; returns the summary rows as dicts.
    fn run_workspace<'py>(&self, py: Python<'py>, out: PathBuf) -> PyResult<Bound<'py, PyAny>> {
        let s = self.inner.clone();
        let run = py
            .detach(move || ballchain::run_workspace(&s, &out))
            .map_err(err)?;
        to_py(py, &run.summary)
    }

    /// Runs the navigation script; `commands` is an optional JSON array
    /// replacing the script's own commands. Returns the summary dict.
    #[pyo3(signature = (out, commands=None))]
    fn run_navigation<'py>(
        &self,
        py: Python<'py>,
        out: PathBuf,
        commands: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let commands = commands.map(parse_commands).transpose().map_err(err)?;
        let s = self.inner.clone();
        let run = py
            .detach(move || ballchain::run_navigation_script(&s, commands, &out))
            .map_err(err)?;
        to_py(py, &run.summary)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, design={})",
            self.inner.name, self.inner.design.kind
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

/// One equilibrium.
#[pyclass(module = "pyballchain", frozen)]
struct SolveResult {
    inner: SolveReport,
}

#[pymethods]
impl SolveResult {
    #[getter]
    fn step(&self) -> usize {
        self.inner.step
    }

    #[getter]
    fn positions_mm(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .positions_mm
            .iter()
            .map(|p| (p[0], p[1], p[2]))
            .collect()
    }

    #[getter]
    fn dipoles(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .dipoles
            .iter()
            .map(|p| (p[0], p[1], p[2]))
            .collect()
    }

    #[getter]
    fn tip_mm(&self) -> (f64, f64, f64) {
        let t = self.inner.tip_mm;
        (t[0], t[1], t[2])
    }

    /// Energy terms in J.
    #[getter]
    fn energy<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.energy_j)
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("reports serialize")
    }

    fn __repr__(&self) -> String {
        let t = self.inner.tip_mm;
        format!(
            "SolveResult(step={}, converged={}, tip_mm=({:.4}, {:.4}, {:.4}))",
            self.inner.step, self.inner.converged, t[0], t[1], t[2]
        )
    }
}

/// Interactive insertion into a channel scene, one command at a time.
#[pyclass(module = "pyballchain")]
struct NavigationSession {
    inner: CoreSession,
}

#[pymethods]
impl NavigationSession {
    /// `scene` is a built-in name or a scene file path; `settings` is a JSON
    /// object of session settings.
    #[new]
    #[pyo3(signature = (scene, settings=None))]
    fn new(py: Python<'_>, scene: &str, settings: Option<&str>) -> PyResult<Self> {
        let settings: SessionSettings = match settings {
            Some(text) => parse_json(text, "session settings").map_err(err)?,
            None => SessionSettings::default(),
        };
        let scene = ChannelScene::resolve(scene).map_err(err)?;
        let inner = py
            .detach(move || CoreSession::new(scene, BallChainDesign::experimental(), settings))
            .map_err(err)?;
        Ok(Self { inner })
    }

    /// Applies a command given as JSON (`{"command": "advance", "length_mm": 1.5}`);
    /// returns the new log entry.
    fn step<'py>(&mut self, py: Python<'py>, command: &str) -> PyResult<Bound<'py, PyAny>> {
        let c: Command = parse_json(command, "command").map_err(err)?;
        self.apply(py, c)
    }

    fn advance<'py>(&mut self, py: Python<'py>, length_mm: f64) -> PyResult<Bound<'py, PyAny>> {
        self.apply(py, Command::Advance { length_mm })
    }

    fn retract<'py>(&mut self, py: Python<'py>, length_mm: f64) -> PyResult<Bound<'py, PyAny>> {
        self.apply(py, Command::Retract { length_mm })
    }

    #[pyo3(signature = (angle_deg, magnitude_mT=None))]
    #[allow(non_snake_case)]
    fn set_field<'py>(
        &mut self,
        py: Python<'py>,
        angle_deg: f64,
        magnitude_mT: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        self.apply(
            py,
            Command::SetField {
                angle_deg,
                magnitude_mt: magnitude_mT,
            },
        )
    }

    #[getter]
    fn balls(&self) -> usize {
        self.inner.last().balls
    }

    #[getter]
    fn tip_mm(&self) -> (f64, f64, f64) {
        let t = self.inner.last().tip_mm;
        (t[0], t[1], t[2])
    }

    #[getter]
    fn tip_region(&self) -> Option<String> {
        self.inner.last().tip_region.clone()
    }

    #[getter]
    fn positions_mm(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .last()
            .positions_mm
            .iter()
            .map(|p| (p[0], p[1], p[2]))
            .collect()
    }

    /// Latest log entry.
    fn state<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.last())
    }

    fn log_jsonl(&self) -> String {
        self.inner.log_jsonl()
    }
}

impl NavigationSession {
    fn apply<'py>(&mut self, py: Python<'py>, c: Command) -> PyResult<Bound<'py, PyAny>> {
        let entry = self.inner.step(c).map_err(err)?.clone();
        to_py(py, &entry)
    }
}

/// Gimbal magnet pose for angle ψ: returns (position m, moment A·m²).
#[pyfunction]
#[pyo3(signature = (psi_deg, v1=scenario::PSI_V1, v2=scenario::PSI_V2, v3=scenario::PSI_V3, sign=1, moment=None))]
fn magnet_pose_from_psi(
    psi_deg: f64,
    v1: f64,
    v2: f64,
    v3: f64,
    sign: i32,
    moment: Option<f64>,
) -> PyResult<(Triple, Triple)> {
    let sign = match sign {
        1 => DipoleSign::Plus,
        -1 => DipoleSign::Minus,
        _ => return Err(PyValueError::new_err("sign must be +1 or -1")),
    };
    let m = moment.unwrap_or_else(|| CylinderMagnet::default().moment());
    let d = scenario::magnet_pose_from_psi(psi_deg, v1, v2, v3, sign, m);
    let t = |v: Vec3| (v.x, v.y, v.z);
    Ok((t(d.position), t(d.moment)))
}

/// Dipole field in T at offset `r` (m) from a moment `m` (A·m²).
#[pyfunction]
fn dipole_field(r: (f64, f64, f64), m: (f64, f64, f64)) -> PyResult<(f64, f64, f64)> {
    let b =
        magnetics::dipole_field(Vec3::new(r.0, r.1, r.2), Vec3::new(m.0, m.1, m.2)).map_err(err)?;
    Ok((b.x, b.y, b.z))
}

/// Potential energy -m·B in J.
#[pyfunction]
fn dipole_energy(m: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    magnetics::dipole_energy(Vec3::new(m.0, m.1, m.2), Vec3::new(b.0, b.1, b.2))
}

/// Shoelace area of a simple polygon.
#[pyfunction]
fn polygon_area(points: Vec<(f64, f64)>) -> PyResult<f64> {
    let poly: Vec<[f64; 2]> = points.into_iter().map(|(x, y)| [x, y]).collect();
    workspace::planar_area(&poly).map_err(err)
}

/// Volume of the polygon revolved about the x axis.
#[pyfunction]
fn revolved_volume(points: Vec<(f64, f64)>) -> PyResult<f64> {
    let poly: Vec<[f64; 2]> = points.into_iter().map(|(x, y)| [x, y]).collect();
    workspace::revolved_volume(&poly).map_err(err)
}

/// Design constants (SI) of a design kind, as a dict.
#[pyfunction]
fn design_table<'py>(py: Python<'py>, kind: &str) -> PyResult<Bound<'py, PyAny>> {
    let spec: DesignSpec = ballchain::design_from_table(kind.parse().map_err(err)?);
    to_py(py, &spec)
}

#[pyfunction]
fn scenario_presets() -> Vec<String> {
    preset_names()
}

#[pyfunction]
fn scene_names() -> Vec<String> {
    ChannelScene::builtin_names()
}

/// Self-checks as (name, passed, detail) tuples.
#[pyfunction]
#[pyo3(signature = (seed=0, configs=20))]
fn verify(py: Python<'_>, seed: u64, configs: usize) -> PyResult<Vec<(String, bool, String)>> {
    let checks = py
        .detach(move || ballchain::verify::run_checks(seed, configs))
        .map_err(err)?;
    Ok(checks
        .into_iter()
        .map(|c| (c.name, c.passed, c.detail))
        .collect())
}

#[pymodule]
pub fn pyballchain(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<SolveResult>()?;
    m.add_class::<NavigationSession>()?;
    m.add_function(wrap_pyfunction!(magnet_pose_from_psi, m)?)?;
    m.add_function(wrap_pyfunction!(dipole_field, m)?)?;
    m.add_function(wrap_pyfunction!(dipole_energy, m)?)?;
    m.add_function(wrap_pyfunction!(polygon_area, m)?)?;
    m.add_function(wrap_pyfunction!(revolved_volume, m)?)?;
    m.add_function(wrap_pyfunction!(design_table, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_presets, m)?)?;
    m.add_function(wrap_pyfunction!(scene_names, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
