//! Newton collocation for `phi phi''' = 1` on a graded mesh.
//!
//! On the left half the unknowns are nodal values of `phi`; finite
//! differences act on `phi - eta^2 ln(eta) / 2` and the third derivative of
//! the subtracted term is added back exactly. On the right half the unknowns
//! are `psi = phi / (d - eta)^{3/2}`, differentiated with the Leibniz rule.
//! Every mode of the linearised equation vanishes at `eta = d`, so the row
//! `phi(d) = 0` would constrain nothing there; with `psi` as unknown the
//! touchdown is built in and the equation itself, evaluated at `eta = d`,
//! reads `(3/8) psi(d)^2 = 1`.
//!
//! Rows: `phi(0) = 0`, `phi'(0) = 1`, one collocation row at the midpoint of
//! each cell `1..N-2`, and the endpoint row.

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::fd::{fornberg, window_start};
use crate::profile::{Method, Profile};
use crate::{Error, Grid, Result};

const WIDTH: usize = 6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollocationConfig {
    /// Newton stops once the max discrete residual is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest damping factor tried before giving up.
    pub min_damping: f64,
}

impl Default for CollocationConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50, min_damping: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollocationReport {
    pub iterations: usize,
    /// Max residual of the discrete system, `phi phi''' - mu` plus the
    /// boundary rows.
    pub residual: f64,
    /// Border unknown standing in for the right-hand side. `mu - 1` is the
    /// consistency error of the discretisation and shrinks with the grid.
    pub mu: f64,
    /// True when the residual dropped below `tol` or the step stopped
    /// contracting at working precision.
    pub converged: bool,
    /// Residual before each Newton step and after the last.
    pub history: Vec<f64>,
}

/// `(d - eta)^{3/2}` and its first three derivatives in `eta`.
fn weight(eta: f64, d: f64) -> [f64; 4] {
    let x = (d - eta).max(0.0);
    let r = x.sqrt();
    if x == 0.0 {
        return [0.0, 0.0, f64::INFINITY, f64::INFINITY];
    }
    [x * r, -1.5 * r, 0.75 / r, 0.375 / (x * r)]
}

/// Contact-line singular term `eta^2 ln(eta) / 2` and derivatives 1 and 3.
fn contact(eta: f64) -> (f64, f64, f64) {
    if eta <= 0.0 {
        return (0.0, 0.0, f64::INFINITY);
    }
    let l = eta.ln();
    (0.5 * eta * eta * l, eta * l + 0.5 * eta, 1.0 / eta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    Left,
    Right,
}

/// One collocation row.
struct Row {
    side: Side,
    start: usize,
    w: [[f64; WIDTH]; 4],
    /// Left rows: stencil sums of the contact term for value and third derivative.
    s0: f64,
    s3: f64,
    /// Left rows: exact contact term and its third derivative at the point.
    c0: f64,
    c3: f64,
    /// Right rows: weight function and derivatives at the point.
    x: [f64; 4],
}

struct System {
    n: usize,
    /// First node carrying a `psi` unknown.
    split: usize,
    /// `(d - eta_j)^{3/2}` at every node.
    xw: Vec<f64>,
    rows: Vec<Row>,
    slope: [f64; WIDTH],
    slope_shift: f64,
}

impl System {
    fn new(xs: &[f64], d: f64) -> Self {
        let n = xs.len();
        let split = xs.partition_point(|&e| e < 0.5 * d);
        let xw = xs.iter().map(|&e| weight(e, d)[0]).collect();
        let rows = (1..n - 1)
            .map(|i| {
                let z = 0.5 * (xs[i] + xs[i + 1]);
                let start = window_start(xs, z, WIDTH);
                let f = fornberg(z, &xs[start..start + WIDTH], 3);
                let mut w = [[0.0; WIDTH]; 4];
                for (k, wk) in w.iter_mut().enumerate() {
                    wk.copy_from_slice(&f[k]);
                }
                let side = if z < 0.5 * d { Side::Left } else { Side::Right };
                let (c0, _, c3) = contact(z);
                let mut row = Row { side, start, w, s0: 0.0, s3: 0.0, c0, c3, x: weight(z, d) };
                if side == Side::Left {
                    for j in 0..WIDTH {
                        let s = contact(xs[start + j]).0;
                        row.s0 += w[0][j] * s;
                        row.s3 += w[3][j] * s;
                    }
                }
                row
            })
            .collect();
        let f = fornberg(0.0, &xs[..WIDTH], 1);
        let mut slope = [0.0; WIDTH];
        slope.copy_from_slice(&f[1]);
        let slope_shift = (0..WIDTH).map(|j| slope[j] * contact(xs[j]).0).sum();
        Self { n, split, xw, rows, slope, slope_shift }
    }

    /// Value of node `j` in the variable a row of `side` differentiates,
    /// with its derivative in unknown `j`.
    fn local(&self, side: Side, u: &[f64], j: usize) -> (f64, f64) {
        match (side, j < self.split) {
            (Side::Left, true) | (Side::Right, false) => (u[j], 1.0),
            (Side::Left, false) => (self.xw[j] * u[j], self.xw[j]),
            (Side::Right, true) => (u[j] / self.xw[j], 1.0 / self.xw[j]),
        }
    }

    /// `(p, t)` = value and third derivative of `phi` at the row's point,
    /// with `dp/du_j`, `dt/du_j` over the stencil.
    fn eval_row(&self, row: &Row, u: &[f64]) -> (f64, f64, [f64; WIDTH], [f64; WIDTH]) {
        let mut q = [0.0; WIDTH];
        let mut c = [0.0; WIDTH];
        for j in 0..WIDTH {
            (q[j], c[j]) = self.local(row.side, u, row.start + j);
        }
        // Differences against a stencil value keep the rounding error of the
        // higher derivatives proportional to the local variation.
        let qc = q[WIDTH / 2];
        let dsum = |k: usize| (0..WIDTH).map(|j| row.w[k][j] * (q[j] - qc)).sum::<f64>();
        let val: f64 = (0..WIDTH).map(|j| row.w[0][j] * q[j]).sum();
        let mut dp = [0.0; WIDTH];
        let mut dt = [0.0; WIDTH];
        match row.side {
            Side::Left => {
                let p = val - row.s0 + row.c0;
                let t = dsum(3) - row.s3 + row.c3;
                for j in 0..WIDTH {
                    dp[j] = row.w[0][j] * c[j];
                    dt[j] = row.w[3][j] * c[j];
                }
                (p, t, dp, dt)
            }
            Side::Right => {
                let [x0, x1, x2, x3] = row.x;
                let p = x0 * val;
                let t = x3 * val + 3.0 * x2 * dsum(1) + 3.0 * x1 * dsum(2) + x0 * dsum(3);
                for j in 0..WIDTH {
                    dp[j] = x0 * row.w[0][j] * c[j];
                    dt[j] = (x3 * row.w[0][j] + 3.0 * x2 * row.w[1][j] + 3.0 * x1 * row.w[2][j] + x0 * row.w[3][j]) * c[j];
                }
                (p, t, dp, dt)
            }
        }
    }

    /// Banded rows `phi(0)`, `phi'(0) - 1` and `phi phi''' - mu` on cells
    /// `1..N-1`, followed by the border row `(3/8) psi(d)^2 - mu`.
    fn residual(&self, u: &[f64], mu: f64) -> Vec<f64> {
        let n = self.n;
        let mut r = vec![0.0; n + 1];
        r[0] = u[0];
        r[1] = (0..WIDTH).map(|j| self.slope[j] * u[j]).sum::<f64>() - self.slope_shift - 1.0;
        for (i, row) in self.rows.iter().enumerate() {
            let (p, t, _, _) = self.eval_row(row, u);
            r[i + 2] = p * t - mu;
        }
        r[n] = 0.375 * u[n - 1] * u[n - 1] - mu;
        r
    }

    fn jacobian(&self, u: &[f64]) -> BandMatrix {
        let n = self.n;
        let mut a = BandMatrix::zeros(n, 5, 4);
        a.add(0, 0, 1.0);
        for j in 0..WIDTH {
            a.add(1, j, self.slope[j]);
        }
        for (i, row) in self.rows.iter().enumerate() {
            let (p, t, dp, dt) = self.eval_row(row, u);
            for j in 0..WIDTH {
                a.add(i + 2, row.start + j, dp[j] * t + p * dt[j]);
            }
        }
        a
    }

    /// Newton correction `(du, dmu)` for the bordered system.
    fn newton_step(&self, u: &[f64], r: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = self.n;
        let a = self.jacobian(u);
        let mut y: Vec<f64> = r[..n].iter().map(|v| -v).collect();
        a.clone().solve(&mut y)?;
        // Column of d/dmu: -1 on the collocation rows.
        let mut z: Vec<f64> = (0..n).map(|i| if i >= 2 { -1.0 } else { 0.0 }).collect();
        a.solve(&mut z)?;
        let c = 0.75 * u[n - 1];
        let denom = -1.0 - c * z[n - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Singular(n));
        }
        let dmu = (-r[n] - c * y[n - 1]) / denom;
        let du = y.iter().zip(&z).map(|(y, z)| y - z * dmu).collect();
        Ok((du, dmu))
    }

    fn to_phi(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|j| if j < self.split { u[j] } else { self.xw[j] * u[j] }).collect()
    }

    fn from_phi(&self, xs: &[f64], phi: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut u: Vec<f64> = (0..n).map(|j| if j < self.split || j == n - 1 { phi[j] } else { phi[j] / self.xw[j] }).collect();
        // psi at d by quadratic extrapolation from the last three interior nodes.
        let w = fornberg(xs[n - 1], &xs[n - 4..n - 1], 0);
        u[n - 1] = (0..3).map(|k| w[0][k] * u[n - 4 + k]).sum();
        u
    }

    /// Nodal `phi'` with the same singular handling as the rows.
    fn slopes(&self, xs: &[f64], u: &[f64], d: f64) -> Vec<f64> {
        let n = self.n;
        let width = WIDTH + 1;
        (0..n)
            .map(|i| {
                let z = xs[i];
                if i == 0 {
                    // Same stencil as the slope row; the contact term has zero slope here.
                    return (0..WIDTH).map(|j| self.slope[j] * u[j]).sum::<f64>() - self.slope_shift;
                }
                let start = window_start(xs, z, width);
                let f = fornberg(z, &xs[start..start + width], 1);
                if i < self.split {
                    let v: f64 = (0..width)
                        .map(|k| {
                            let j = start + k;
                            f[1][k] * (self.local(Side::Left, u, j).0 - contact(xs[j]).0)
                        })
                        .sum();
                    v + contact(z).1
                } else {
                    let psi = u[i];
                    let dpsi: f64 = (0..width).map(|k| f[1][k] * self.local(Side::Right, u, start + k).0).sum();
                    let x = weight(z, d);
                    if i == n - 1 {
                        0.0
                    } else {
                        x[1] * psi + x[0] * dpsi
                    }
                }
            })
            .collect()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton from `init`. A step is halved until every interior value stays
/// positive; positivity is what separates the wave from discrete roots that
/// cross zero before `d`.
pub fn solve_collocation(grid: &Grid, init: &Profile, cfg: &CollocationConfig) -> Result<(Profile, CollocationReport)> {
    let xs = grid.nodes();
    let n = xs.len();
    let d = grid.d();
    if init.grid().len() != n || init.eta() != xs {
        return Err(Error::Grid("initial guess lives on a different grid".into()));
    }
    if let Some(i) = (1..n - 1).find(|&i| !(init.phi()[i] > 0.0)) {
        return Err(Error::Nonpositive { node: i, eta: xs[i], value: init.phi()[i] });
    }
    let sys = System::new(xs, d);
    let mut u = sys.from_phi(xs, init.phi());
    u[0] = 0.0;
    let mut mu = 1.0;
    let mut r = sys.residual(&u, mu);
    let mut res = max_abs(&r[..n]);
    let mut history = vec![res];
    let mut iterations = 0;
    let scale = max_abs(&u);
    let mut last_step = f64::INFINITY;
    let mut converged = res <= cfg.tol;
    while !converged && iterations < cfg.max_iter {
        iterations += 1;
        let (delta, dmu) = sys.newton_step(&u, &r)?;
        let mut lambda = 1.0;
        let (trial, trial_mu, rt) = loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + lambda * b).collect();
            let trial_mu = mu + lambda * dmu;
            if trial[1..].iter().all(|&v| v > 0.0) {
                let rt = sys.residual(&trial, trial_mu);
                if rt.iter().all(|v| v.is_finite()) {
                    break (trial, trial_mu, rt);
                }
            }
            lambda *= 0.5;
            if lambda < cfg.min_damping {
                return Err(Error::NewtonDivergence { iterations, residual: res });
            }
        };
        u = trial;
        mu = trial_mu;
        r = rt;
        res = max_abs(&r[..n]);
        history.push(res);
        // Past quadratic convergence the step is rounding noise and stops
        // shrinking while the third differences sit at their floor.
        let step = max_abs(&delta).max(dmu.abs()) / scale.max(1.0);
        let stalled = lambda == 1.0 && step <= 1e-8 && step > 0.5 * last_step;
        converged = res <= cfg.tol || stalled || step <= 1e-15;
        last_step = step;
    }
    if !converged {
        return Err(Error::NewtonDivergence { iterations, residual: res });
    }
    let dphi = sys.slopes(xs, &u, d);
    let mut phi = sys.to_phi(&u);
    phi[n - 1] = 0.0;
    let profile = Profile::new(grid.clone(), phi, dphi, Method::Collocation, None)?;
    Ok((profile, CollocationReport { iterations, residual: res, mu, converged, history }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{solve_shooting, ShootConfig};

    fn midpoint_guess(grid: &Grid) -> Profile {
        let a = 0.5 * (4.0 * 2f64.sqrt() / 3.0 + 4.0 * 6f64.sqrt() / 3.0);
        Profile::envelope(grid, a, Method::EnvelopeMax)
    }

    #[test]
    fn weight_derivatives_match_differences() {
        let (d, eta, h) = (0.5, 0.3, 1e-5);
        let w = weight(eta, d);
        let f = |e: f64| weight(e, d)[0];
        let fp = |e: f64| weight(e, d)[1];
        assert!((w[1] - (f(eta + h) - f(eta - h)) / (2.0 * h)).abs() < 1e-8);
        assert!((w[2] - (fp(eta + h) - fp(eta - h)) / (2.0 * h)).abs() < 1e-7);
    }

    #[test]
    fn converges_fast_and_matches_shooting() {
        let grid = Grid::standard(401).unwrap();
        let (p, rep) = solve_collocation(&grid, &midpoint_guess(&grid), &CollocationConfig::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 15, "{} iterations", rep.iterations);
        assert!(rep.residual <= 1e-8, "residual {}", rep.residual);
        assert!((rep.mu - 1.0).abs() < 1e-4);
        assert!(p.phi()[1..p.phi().len() - 1].iter().all(|&v| v > 0.0));
        assert!((p.dphi()[0] - 1.0).abs() < 1e-12);
        let shot = solve_shooting(&ShootConfig::default(), &grid).unwrap();
        let dist = p.sup_distance(&shot.profile, 0.0, 0.5);
        assert!(dist < 1e-5, "distance to shooting {dist}");
    }

    #[test]
    fn consistency_error_shrinks_with_grid() {
        let cfg = CollocationConfig::default();
        let mut prev = f64::INFINITY;
        for n in [201, 401, 801] {
            let grid = Grid::standard(n).unwrap();
            let (_, rep) = solve_collocation(&grid, &midpoint_guess(&grid), &cfg).unwrap();
            let e = (rep.mu - 1.0).abs();
            assert!(e < 0.5 * prev, "n={n}: {e} vs {prev}");
            prev = e;
        }
    }

    #[test]
    fn rejects_nonpositive_guess() {
        let grid = Grid::standard(101).unwrap();
        let mut phi = midpoint_guess(&grid).phi().to_vec();
        phi[40] = -1e-3;
        let dphi = vec![0.0; phi.len()];
        let bad = Profile::new(grid.clone(), phi, dphi, Method::External, None).unwrap();
        assert!(matches!(
            solve_collocation(&grid, &bad, &CollocationConfig::default()),
            Err(Error::Nonpositive { node: 40, .. })
        ));
    }
}
