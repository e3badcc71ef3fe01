//! Planar workspace of a design under a rotating uniform field.
//!
//! For every device length the field is rotated from parallel (0°) to
//! anti-parallel (180°) with continuation, and the tip positions are
//! recorded. Three tip loci bound the reachable region:
//!
//! * A: tips at 0° over all lengths (straight shapes),
//! * B: tips at the largest length over all angles,
//! * C: tips at 180° over all lengths.
//!
//! The closed polygon A → B → reversed C gives the planar area, and its
//! revolution about the base axis gives the workspace volume.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{FieldSource, Vec3};
use crate::design::{DesignKind, DesignSpec};
use crate::error::{Error, Result};
use crate::magnetics::UniformField;
use crate::shape::{continuation_sweep, Extent, ShapeProblem};
use crate::solver::SolveOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub field_tesla: f64,
    pub angles_deg: Vec<f64>,
    pub lengths_mm: Vec<f64>,
    /// Include skin bending for ball chains.
    pub skin: bool,
    /// Solve lengths on the rayon thread pool.
    pub parallel: bool,
    pub options: SolveOptions,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            field_tesla: 0.04,
            angles_deg: (0..=180).map(f64::from).collect(),
            lengths_mm: (1..=20).map(f64::from).collect(),
            skin: true,
            parallel: true,
            options: SolveOptions::default(),
        }
    }
}

impl ScanSettings {
    pub fn validate(&self) -> Result<()> {
        UniformField::along(self.field_tesla, Vec3::x())?;
        for (name, grid) in [("angle", &self.angles_deg), ("length", &self.lengths_mm)] {
            if grid.is_empty() {
                return Err(Error::InvalidInput(format!("{name} grid is empty")));
            }
            if grid.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidInput(format!(
                    "{name} grid must be strictly increasing"
                )));
            }
            if grid.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} grid has non-finite entries"
                )));
            }
        }
        if self.lengths_mm[0] <= 0.0 {
            return Err(Error::InvalidInput("lengths must be positive".into()));
        }
        self.options.validate()
    }
}

/// Field in the scan plane at `angle_deg` from the base tangent (+x).
pub fn planar_field(tesla: f64, angle_deg: f64) -> Result<FieldSource> {
    let a = angle_deg.to_radians();
    Ok(FieldSource::Uniform(UniformField::along(
        tesla,
        Vec3::new(a.cos(), a.sin(), 0.0),
    )?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceScan {
    pub design: DesignKind,
    pub field_mt: f64,
    pub angles_deg: Vec<f64>,
    pub lengths_mm: Vec<f64>,
    /// Tip positions in mm, indexed `[angle][length]`.
    pub tips_mm: Vec<Vec<[f64; 3]>>,
    /// Solver convergence per cell, indexed like `tips_mm`.
    pub converged: Vec<Vec<bool>>,
    pub boundary_a: Vec<[f64; 2]>,
    pub boundary_b: Vec<[f64; 2]>,
    pub boundary_c: Vec<[f64; 2]>,
    pub area_mm2: f64,
    pub volume_mm3: f64,
    pub warnings: Vec<String>,
}

impl WorkspaceScan {
    /// Closed boundary: origin, A forward, B, C reversed.
    pub fn polygon(&self) -> Vec<[f64; 2]> {
        boundary_polygon(&self.boundary_a, &self.boundary_b, &self.boundary_c)
    }

    /// Polar angle (deg, about the base) of the tip at 180° for each length.
    pub fn reversed_tip_angles(&self) -> Vec<f64> {
        let Some(row) = self.tips_mm.last() else {
            return Vec::new();
        };
        row.iter().map(|t| polar_angle_deg(t[0], t[1])).collect()
    }
}

pub fn polar_angle_deg(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        0.0
    } else {
        y.atan2(x).to_degrees()
    }
}

/// Scans one design over the angle and length grids.
pub fn scan(design: &DesignSpec, settings: &ScanSettings) -> Result<WorkspaceScan> {
    settings.validate()?;
    design.validate()?;
    let design = if settings.skin {
        *design
    } else {
        design.without_skin()
    };
    let fields: Vec<FieldSource> = settings
        .angles_deg
        .iter()
        .map(|a| planar_field(settings.field_tesla, *a))
        .collect::<Result<_>>()?;

    let row = |length_mm: &f64| -> Result<Vec<([f64; 3], bool)>> {
        let problem = ShapeProblem::new(design, Extent::Length(length_mm * 1e-3), fields[0]);
        let sols = continuation_sweep(&problem, &fields, &settings.options)?;
        Ok(sols
            .iter()
            .map(|s| {
                let t = s.shape.tip() * 1e3;
                ([t.x, t.y, t.z], s.converged())
            })
            .collect())
    };
    let rows: Vec<Vec<([f64; 3], bool)>> = if settings.parallel {
        settings
            .lengths_mm
            .par_iter()
            .map(row)
            .collect::<Result<_>>()?
    } else {
        settings.lengths_mm.iter().map(row).collect::<Result<_>>()?
    };

    let na = settings.angles_deg.len();
    let nl = settings.lengths_mm.len();
    let mut tips = vec![vec![[0.0; 3]; nl]; na];
    let mut converged = vec![vec![false; nl]; na];
    for (j, r) in rows.iter().enumerate() {
        for (i, (t, c)) in r.iter().enumerate() {
            tips[i][j] = *t;
            converged[i][j] = *c;
        }
    }

    let mut warnings = Vec::new();
    let mut pick = |i: usize, j: usize, out: &mut Vec<[f64; 2]>| {
        if converged[i][j] {
            out.push([tips[i][j][0], tips[i][j][1]]);
        } else {
            warnings.push(format!(
                "cell at {}° / {} mm did not converge and is excluded from the boundary",
                settings.angles_deg[i], settings.lengths_mm[j]
            ));
        }
    };
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut c = Vec::new();
    for j in 0..nl {
        pick(0, j, &mut a);
    }
    for i in 0..na {
        pick(i, nl - 1, &mut b);
    }
    for j in 0..nl {
        pick(na - 1, j, &mut c);
    }
    let out_of_plane = tips
        .iter()
        .flatten()
        .map(|t| t[2].abs())
        .fold(0.0, f64::max);
    if out_of_plane > 1e-7 {
        warnings.push(format!(
            "tips leave the scan plane by up to {out_of_plane:.3e} mm"
        ));
    }

    let polygon = boundary_polygon(&a, &b, &c);
    let area = planar_area(&polygon)?;
    let volume = revolved_volume(&polygon)?;
    if area <= 1e-9 {
        warnings.push("workspace region is degenerate (zero area)".into());
    }
    Ok(WorkspaceScan {
        design: design.kind(),
        field_mt: settings.field_tesla * 1e3,
        angles_deg: settings.angles_deg.clone(),
        lengths_mm: settings.lengths_mm.clone(),
        tips_mm: tips,
        converged,
        boundary_a: a,
        boundary_b: b,
        boundary_c: c,
        area_mm2: area,
        volume_mm3: volume,
        warnings,
    })
}

/// Scans several designs; results come back in input order.
pub fn scan_designs(designs: &[DesignSpec], settings: &ScanSettings) -> Result<Vec<WorkspaceScan>> {
    if settings.parallel {
        designs.par_iter().map(|d| scan(d, settings)).collect()
    } else {
        designs.iter().map(|d| scan(d, settings)).collect()
    }
}

/// Origin, A forward, B, then C reversed, with repeated points removed.
pub fn boundary_polygon(a: &[[f64; 2]], b: &[[f64; 2]], c: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    for p in a.iter().chain(b).chain(c.iter().rev()) {
        let last = out.last().expect("nonempty");
        if (p[0] - last[0]).hypot(p[1] - last[1]) > 1e-9 {
            out.push(*p);
        }
    }
    while out.len() > 1 {
        let p = out[out.len() - 1];
        if p[0].hypot(p[1]) > 1e-9 {
            break;
        }
        out.pop();
    }
    out
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// First proper crossing between non-adjacent edges of a closed polygon.
pub fn find_self_intersection(poly: &[[f64; 2]]) -> Option<[f64; 2]> {
    let n = poly.len();
    if n < 4 {
        return None;
    }
    let edge = |i: usize| (poly[i], poly[(i + 1) % n]);
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (p1, p2) = edge(i);
            let (q1, q2) = edge(j);
            let d1 = orient(q1, q2, p1);
            let d2 = orient(q1, q2, p2);
            let d3 = orient(p1, p2, q1);
            let d4 = orient(p1, p2, q2);
            if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                let t = d1 / (d1 - d2);
                return Some([p1[0] + t * (p2[0] - p1[0]), p1[1] + t * (p2[1] - p1[1])]);
            }
        }
    }
    None
}

/// Shoelace area of a closed polygon (absolute value).
pub fn planar_area(poly: &[[f64; 2]]) -> Result<f64> {
    if let Some([x, y]) = find_self_intersection(poly) {
        return Err(Error::SelfIntersection { x, y });
    }
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    Ok(0.5 * twice.abs())
}

/// Volume swept by revolving the polygon about the x axis (Pappus).
pub fn revolved_volume(poly: &[[f64; 2]]) -> Result<f64> {
    let scale = poly
        .iter()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(0.0, f64::max);
    if let Some(p) = poly.iter().find(|p| p[1] < -1e-9 * scale.max(1.0)) {
        return Err(Error::AxisCrossing { y: p[1] });
    }
    let n = poly.len();
    // V = 2π ∬ y dA = (π/3) Σ (x_i y_{i+1} - x_{i+1} y_i)(y_i + y_{i+1})
    let s: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            (a[0] * b[1] - b[0] * a[1]) * (a[1] + b[1])
        })
        .sum();
    Ok((PI / 3.0 * s).abs())
}

/// Boundary of an ideal revolute joint of length `radius`: a half disk.
pub fn half_disk(radius: f64, step_deg: f64) -> Vec<[f64; 2]> {
    let steps = (180.0 / step_deg).round() as usize;
    let mut out = vec![[0.0, 0.0]];
    for k in 0..=steps {
        let a = (k as f64 * 180.0 / steps as f64).to_radians();
        out.push([radius * a.cos(), radius * a.sin()]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn square_and_degenerate_areas() {
        let sq = [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]];
        assert_relative_eq!(planar_area(&sq).unwrap(), 100.0);
        assert_eq!(planar_area(&[[1.0, 2.0]]).unwrap(), 0.0);
        assert_eq!(revolved_volume(&[[1.0, 2.0]]).unwrap(), 0.0);
    }

    #[test]
    fn bowtie_is_rejected_at_its_crossing() {
        let bow = [[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0]];
        match planar_area(&bow) {
            Err(Error::SelfIntersection { x, y }) => {
                assert_relative_eq!(x, 1.0, epsilon = 1e-12);
                assert_relative_eq!(y, 1.0, epsilon = 1e-12);
            }
            other => panic!("expected self-intersection, got {other:?}"),
        }
    }

    #[test]
    fn polygon_drops_duplicate_points() {
        let a = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let b = [[2.0, 0.0], [0.0, 2.0]];
        let c = [[0.0, 0.0], [0.0, 2.0]];
        let p = boundary_polygon(&a, &b, &c);
        assert_eq!(p, vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 2.0]]);
        assert_relative_eq!(planar_area(&p).unwrap(), 2.0);
    }

    #[test]
    fn axis_crossing_is_an_error() {
        let tri = [[0.0, 0.0], [1.0, -1.0], [1.0, 1.0]];
        assert!(matches!(
            revolved_volume(&tri),
            Err(Error::AxisCrossing { .. })
        ));
    }

    #[test]
    fn settings_reject_unsorted_grids() {
        let s = ScanSettings {
            angles_deg: vec![0.0, 10.0, 5.0],
            ..Default::default()
        };
        assert!(s.validate().is_err());
        let s = ScanSettings {
            lengths_mm: vec![],
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }
}
