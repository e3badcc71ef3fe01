//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use ballchain::TipMagnetDesign;

const MU0: f64 = 4.0e-7 * PI;

/// Planar energy of a three-ball chain: link angles `phi`, dipole angles of
/// balls 2 and 3 (ball 1 points along +x), field `b` along +y.
pub struct PlanarThree {
    pub d: f64,
    pub m: f64,
    pub b: f64,
}

impl PlanarThree {
    /// Pair energy for dipoles at angles `a`, `c` separated by `dist` along `dir`.
    fn pair(&self, a: f64, c: f64, dir: f64, dist: f64) -> f64 {
        MU0 * self.m * self.m / (4.0 * PI * dist.powi(3))
            * ((a - c).cos() - 3.0 * (a - dir).cos() * (c - dir).cos())
    }

    /// Distance and direction from ball 1 to ball 3.
    fn span(&self, p1: f64, p2: f64) -> (f64, f64) {
        let x = self.d * (p1.cos() + p2.cos());
        let y = self.d * (p1.sin() + p2.sin());
        (x.hypot(y), y.atan2(x))
    }

    pub fn energy(&self, p: &[f64; 4]) -> f64 {
        let [p1, p2, a2, a3] = *p;
        let (d13, dir13) = self.span(p1, p2);
        if d13 < self.d {
            return f64::INFINITY;
        }
        self.pair(0.0, a2, p1, self.d)
            + self.pair(a2, a3, p2, self.d)
            + self.pair(0.0, a3, dir13, d13)
            - self.m * self.b * (a2.sin() + a3.sin())
    }

    /// Exhaustive search on a `grid_deg` grid over all four angles, using
    /// separable lookup tables, followed by compass refinement of the best
    /// distinct cells.
    pub fn minimize(&self, grid_deg: f64) -> ([f64; 4], f64) {
        let s = (360.0 / grid_deg).round() as usize;
        let h = TAU / s as f64;
        let ang = |k: usize| k as f64 * h;
        let ext: Vec<f64> = (0..s).map(|k| -self.m * self.b * ang(k).sin()).collect();
        let t12: Vec<f64> = (0..s * s)
            .map(|i| self.pair(0.0, ang(i % s), ang(i / s), self.d))
            .collect();
        let mut t23 = vec![0.0; s * s * s];
        let mut t13 = vec![f64::INFINITY; s * s * s];
        for i in 0..s {
            for j in 0..s {
                for k in 0..s {
                    t23[(i * s + j) * s + k] = self.pair(ang(j), ang(k), ang(i), self.d);
                }
                let (d13, dir13) = self.span(ang(i), ang(j));
                if d13 >= self.d {
                    for k in 0..s {
                        t13[(i * s + j) * s + k] = self.pair(0.0, ang(k), dir13, d13);
                    }
                }
            }
        }
        let mut cells: Vec<(f64, [usize; 4])> = Vec::new();
        for i in 0..s {
            for j in 0..s {
                let row13 = &t13[(i * s + j) * s..(i * s + j + 1) * s];
                if row13[0].is_infinite() {
                    continue;
                }
                for a in 0..s {
                    let head = t12[i * s + a] + ext[a];
                    let row23 = &t23[(j * s + a) * s..(j * s + a + 1) * s];
                    let (mut best, mut bk) = (f64::INFINITY, 0);
                    for k in 0..s {
                        let e = row23[k] + row13[k] + ext[k];
                        if e < best {
                            (best, bk) = (e, k);
                        }
                    }
                    cells.push((head + best, [i, j, a, bk]));
                }
            }
        }
        cells.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out = ([0.0; 4], f64::INFINITY);
        for (_, c) in cells.iter().take(16) {
            let mut p = c.map(ang);
            let mut f = self.energy(&p);
            let mut step = h;
            while step > 1e-11 {
                let mut moved = false;
                for k in 0..4 {
                    for sgn in [1.0, -1.0] {
                        let mut q = p;
                        q[k] += sgn * step;
                        let fq = self.energy(&q);
                        if fq < f {
                            (p, f, moved) = (q, fq, true);
                        }
                    }
                }
                if !moved {
                    step *= 0.5;
                }
            }
            if f < out.1 {
                out = (p, f);
            }
        }
        // reversing both links leaves every term unchanged; report the forward one
        if out.0[0].cos() < 0.0 {
            out.0[0] += PI;
            out.0[1] += PI;
        }
        out
    }
}

/// Tip-magnet rod in a perpendicular uniform field, treated as a continuum
/// elastica. A uniform field exerts no net force, so the only load is the
/// couple m×B on the rigid magnet at the end of the flexible part:
/// EI θ'' = 0, θ(0) = 0, EI θ'(L_f) = m·B·cos θ(L_f).
/// The unknown initial curvature is found by shooting; positions follow by
/// integrating (cos θ, sin θ) with RK4.
pub fn elastica_tip(design: &TipMagnetDesign, length: f64, b: f64) -> [f64; 2] {
    let ei = design.bending_stiffness();
    let lf = length - design.magnet_length;
    let integrate = |kappa: f64| -> (f64, f64, f64) {
        let steps = 2000;
        let ds = lf / steps as f64;
        // state (θ, θ', x, y)
        let rhs = |st: [f64; 4]| [st[1], 0.0, st[0].cos(), st[0].sin()];
        let mut st = [0.0, kappa, 0.0, 0.0];
        for _ in 0..steps {
            let add = |a: [f64; 4], k: [f64; 4], f: f64| {
                [
                    a[0] + f * k[0],
                    a[1] + f * k[1],
                    a[2] + f * k[2],
                    a[3] + f * k[3],
                ]
            };
            let k1 = rhs(st);
            let k2 = rhs(add(st, k1, 0.5 * ds));
            let k3 = rhs(add(st, k2, 0.5 * ds));
            let k4 = rhs(add(st, k3, ds));
            for i in 0..4 {
                st[i] += ds / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        (st[0], st[2], st[3])
    };
    let residual = |kappa: f64| {
        let (theta, _, _) = integrate(kappa);
        ei * kappa - design.tip_moment * b * theta.cos()
    };
    let (mut lo, mut hi) = (0.0, FRAC_PI_2 / lf);
    assert!(residual(lo) < 0.0 && residual(hi) > 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (theta, x, y) = integrate(0.5 * (lo + hi));
    let half = 0.5 * design.magnet_length;
    [x + half * theta.cos(), y + half * theta.sin()]
}

/// Signed angle difference in degrees, wrapped to (-180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    ((a + PI).rem_euclid(TAU) - PI).to_degrees()
}
