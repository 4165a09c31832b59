//! Regularised kernel fixed-point iteration.
//!
//! For each level `k` the profile solves `v = Phi_k v` with
//! `Phi_k v = 1/k + 2 eta (d - eta) - int G(eta, t) / v(t) dt`. `Phi_k` is
//! monotone increasing in `v` and `v_0 = 1/k + 2 eta (d - eta)` lies above
//! the fixed point, so the sweeps decrease monotonically.
//!
//! The integrals use the separable form of the kernel,
//! `int G g = 2 eta^2 M - d int_0^eta (eta - t)^2 g`, with `g = 1/v` integrated
//! exactly per cell for piecewise linear `v`. This resolves the `1/k`
//! boundary layers without refining the mesh.

use serde::{Deserialize, Serialize};

use crate::profile::{Method, Profile};
use crate::quadrature::reciprocal_moments;
use crate::{Error, Grid, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSolveConfig {
    pub k_schedule: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub floor: f64,
    pub damping: f64,
}

impl Default for KernelSolveConfig {
    fn default() -> Self {
        Self { k_schedule: vec![1e2, 1e3, 1e4, 1e5, 1e6], tol: 1e-12, max_iter: 500, floor: 1e-14, damping: 1.0 }
    }
}

impl KernelSolveConfig {
    /// Default schedule truncated at `k_max`.
    pub fn up_to(k_max: f64) -> Self {
        let mut c = Self::default();
        c.k_schedule.retain(|&k| k <= k_max * (1.0 + 1e-12));
        if c.k_schedule.last().is_none_or(|&k| k < k_max * (1.0 - 1e-12)) {
            c.k_schedule.push(k_max);
        }
        c
    }

    fn validate(&self) -> Result<()> {
        let increasing = self.k_schedule.windows(2).all(|w| w[1] > w[0]);
        if self.k_schedule.is_empty() || !increasing || self.k_schedule[0] <= 0.0 {
            return Err(Error::Config("k_schedule must be a nonempty increasing list of positive levels".into()));
        }
        if !(self.tol > 0.0 && self.floor > 0.0 && self.damping > 0.0 && self.damping <= 1.0 && self.max_iter > 0) {
            return Err(Error::Config(format!(
                "need tol > 0, floor > 0, 0 < damping <= 1, max_iter > 0 (got {}, {}, {}, {})",
                self.tol, self.floor, self.damping, self.max_iter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KernelLevel {
    pub k: f64,
    pub profile: Profile,
    pub iterations: usize,
    pub last_change: f64,
}

#[derive(Debug, Clone)]
pub struct KernelSolve {
    pub levels: Vec<KernelLevel>,
    /// Log-aware extrapolation over the last three levels (last level minus
    /// `1/k` when fewer than three levels are available).
    pub limit: Profile,
    /// Largest level with the endpoint offset removed.
    pub offset_limit: Profile,
    /// Sup difference of the offset-subtracted last two levels.
    pub level_difference: f64,
    /// Sup difference between `limit` and `offset_limit`.
    pub extrapolation_shift: f64,
}

/// `v_0 = 1/k + 2 eta (d - eta)`.
pub fn initial_iterate(k: f64, grid: &Grid) -> Result<Profile> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("regularisation level k = {k} must be positive")));
    }
    let d = grid.d();
    let (phi, dphi) = grid.nodes().iter().map(|&e| (1.0 / k + 2.0 * e * (d - e), 2.0 * (d - 2.0 * e))).unzip();
    Profile::new(grid.clone(), phi, dphi, Method::Kernel, Some(k))
}

/// Cumulative `I_j(x_i) = int_0^{x_i} t^j / v(t) dt`, `j = 0, 1, 2`, with `v`
/// linear on each cell.
fn cumulative_moments(x: &[f64], v: &[f64]) -> [Vec<f64>; 3] {
    let n = x.len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n - 1 {
        let h = x[i + 1] - x[i];
        let mu = reciprocal_moments::<3>(v[i], v[i + 1] - v[i]);
        let a = x[i];
        let c0 = h * mu[0];
        let c1 = h * (a * mu[0] + h * mu[1]);
        let c2 = h * (a * a * mu[0] + 2.0 * a * h * mu[1] + h * h * mu[2]);
        out[0][i + 1] = out[0][i] + c0;
        out[1][i + 1] = out[1][i] + c1;
        out[2][i + 1] = out[2][i] + c2;
    }
    out
}

fn check_positive(v: &Profile) -> Result<()> {
    match v.phi().iter().position(|&x| !(x > 0.0)) {
        Some(i) => Err(Error::Nonpositive { node: i, eta: v.eta()[i], value: v.phi()[i] }),
        None => Ok(()),
    }
}

/// Values and derivatives of `Phi_k v` at the nodes of `v`.
fn green_map(x: &[f64], v: &[f64], k: f64, d: f64) -> (Vec<f64>, Vec<f64>) {
    let [i0, i1, i2] = cumulative_moments(x, v);
    let n = x.len();
    let m = d * d * i0[n - 1] - 2.0 * d * i1[n - 1] + i2[n - 1];
    x.iter()
        .enumerate()
        .map(|(i, &e)| {
            let left = e * e * i0[i] - 2.0 * e * i1[i] + i2[i];
            let val = 1.0 / k + 2.0 * e * (d - e) - (2.0 * e * e * m - d * left);
            let der = 2.0 * (d - 2.0 * e) - (4.0 * e * m - 2.0 * d * (e * i0[i] - i1[i]));
            (val, der)
        })
        .unzip()
}

/// `Phi_k v`, with derivative from the differentiated kernel.
pub fn apply_green_operator(v: &Profile, k: f64) -> Result<Profile> {
    check_positive(v)?;
    if !(k > 0.0) {
        return Err(Error::Domain(format!("regularisation level k = {k} must be positive")));
    }
    let (phi, dphi) = green_map(v.eta(), v.phi(), k, v.d());
    Profile::new(v.grid().clone(), phi, dphi, Method::Kernel, Some(k))
}

fn solve_level(cfg: &KernelSolveConfig, grid: &Grid, k: f64) -> Result<KernelLevel> {
    let x = grid.nodes();
    let d = grid.d();
    let n = x.len();
    let mut v = initial_iterate(k, grid)?.phi().to_vec();
    let mut dv = vec![0.0; n];
    // Roundoff allowance for the monotonicity assertion.
    let slack = 1e-13;
    for sweep in 1..=cfg.max_iter {
        let (next, dnext) = green_map(x, &v, k, d);
        let mut change = 0.0f64;
        for i in 0..n {
            let w = (1.0 - cfg.damping) * v[i] + cfg.damping * next[i];
            let excess = w - v[i];
            if excess > slack * v[i].max(1.0) {
                return Err(Error::NonMonotone { sweep, node: i, excess });
            }
            if i > 0 && i < n - 1 && w < cfg.floor {
                return Err(Error::BelowFloor { node: i, eta: x[i], value: w });
            }
            change = change.max(excess.abs());
            v[i] = w;
            dv[i] = (1.0 - cfg.damping) * dv[i] + cfg.damping * dnext[i];
        }
        if change < cfg.tol {
            let profile = Profile::new(grid.clone(), v, dv, Method::Kernel, Some(k))?;
            return Ok(KernelLevel { k, profile, iterations: sweep, last_change: change });
        }
        if sweep == cfg.max_iter {
            return Err(Error::NoConvergence { iterations: sweep, last_change: change });
        }
    }
    unreachable!("max_iter > 0 is validated")
}

fn offset_removed(level: &KernelLevel) -> (Vec<f64>, Vec<f64>) {
    let n = level.profile.phi().len();
    let mut phi: Vec<f64> = level.profile.phi().iter().map(|p| p - 1.0 / level.k).collect();
    phi[0] = 0.0;
    phi[n - 1] = 0.0;
    for p in &mut phi {
        *p = p.max(0.0);
    }
    (phi, level.profile.dphi().to_vec())
}

/// Solves every level of the schedule and extrapolates `k -> infinity`.
pub fn solve_kernel_iteration(cfg: &KernelSolveConfig, grid: &Grid) -> Result<KernelSolve> {
    cfg.validate()?;
    let levels = cfg.k_schedule.iter().map(|&k| solve_level(cfg, grid, k)).collect::<Result<Vec<_>>>()?;
    let n = grid.len();
    let last = levels.last().expect("schedule is nonempty");
    let (phi_top, dphi_top) = offset_removed(last);
    let offset_limit = Profile::new(grid.clone(), phi_top.clone(), dphi_top.clone(), Method::Kernel, None)?;
    let level_difference = match levels.len() {
        1 => f64::NAN,
        m => {
            let (prev, _) = offset_removed(&levels[m - 2]);
            prev.iter().zip(&phi_top).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        }
    };
    let limit = if levels.len() >= 3 {
        let tail = &levels[levels.len() - 3..];
        let w = extrapolation_weights([tail[0].k, tail[1].k, tail[2].k]);
        let parts: Vec<_> = tail.iter().map(offset_removed).collect();
        let mut phi = vec![0.0; n];
        let mut dphi = vec![0.0; n];
        for i in 0..n {
            for (j, (p, dp)) in parts.iter().enumerate() {
                phi[i] += w[j] * p[i];
                dphi[i] += w[j] * dp[i];
            }
        }
        phi[0] = 0.0;
        phi[n - 1] = 0.0;
        Profile::new(grid.clone(), phi, dphi, Method::Kernel, None)?
    } else {
        offset_limit.clone()
    };
    let extrapolation_shift =
        limit.phi().iter().zip(offset_limit.phi()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(KernelSolve { levels, limit, offset_limit, level_difference, extrapolation_shift })
}

/// Weights `w` with `sum_j w_j u(k_j) = c` whenever
/// `u(k) = c + a ln(k) / k + b / k`.
pub fn extrapolation_weights(k: [f64; 3]) -> [f64; 3] {
    // Rows: basis functions 1, ln k / k, 1/k; columns: levels. Solve M^T w = e_1.
    let m = [
        [1.0, 1.0, 1.0],
        [k[0].ln() / k[0], k[1].ln() / k[1], k[2].ln() / k[2]],
        [1.0 / k[0], 1.0 / k[1], 1.0 / k[2]],
    ];
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let full = det(m);
    let mut w = [0.0; 3];
    for (j, wj) in w.iter_mut().enumerate() {
        let mut a = m;
        for (r, row) in a.iter_mut().enumerate() {
            row[j] = if r == 0 { 1.0 } else { 0.0 };
        }
        *wj = det(a) / full;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green_kernel::{kernel_row_integrals, GreenKernel};
    use crate::quadrature::adaptive_simpson;

    #[test]
    fn initial_iterate_values() {
        let g = Grid::uniform(101, 0.5).unwrap();
        let v = initial_iterate(100.0, &g).unwrap();
        assert!((v.phi()[50] - 0.135).abs() < 1e-15);
        assert!((v.phi()[0] - 0.01).abs() < 1e-16);
        assert!(initial_iterate(0.0, &g).is_err());
    }

    #[test]
    fn constant_input_matches_closed_form() {
        let g = Grid::uniform(101, 0.5).unwrap();
        let v = Profile::new(g.clone(), vec![1.0; 101], vec![0.0; 101], Method::External, None).unwrap();
        let out = apply_green_operator(&v, 100.0).unwrap();
        let (l, r) = kernel_row_integrals(0.25).unwrap();
        assert!((out.phi()[50] - (0.135 - (l + r))).abs() < 1e-14);
        assert!((out.phi()[50] - 0.132395833).abs() < 1e-9);
        assert!((out.phi()[0] - 0.01).abs() < 1e-16);
        assert!((out.dphi()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_rule_matches_quadrature_on_a_linear_input() {
        let g = Grid::uniform(201, 0.5).unwrap();
        let vf = |t: f64| 1e-3 + 0.7 * t;
        let v = Profile::new(g.clone(), g.nodes().iter().map(|&t| vf(t)).collect(), vec![0.7; 201], Method::External, None)
            .unwrap();
        let out = apply_green_operator(&v, 1e3).unwrap();
        let k = GreenKernel::default();
        for &i in &[20usize, 77, 150] {
            let e = g.nodes()[i];
            let f = |t: f64| k.eval_unchecked(e, t) / vf(t);
            let want = 1e-3 + 2.0 * e * (0.5 - e) - adaptive_simpson(&f, 0.0, e, 1e-15) - adaptive_simpson(&f, e, 0.5, 1e-15);
            assert!((out.phi()[i] - want).abs() < 1e-12, "{} vs {want}", out.phi()[i]);
        }
    }

    #[test]
    fn rejects_nonpositive_input() {
        let g = Grid::uniform(101, 0.5).unwrap();
        let mut phi = vec![1.0; 101];
        phi[40] = 0.0;
        let v = Profile::new(g, phi, vec![0.0; 101], Method::External, None).unwrap();
        assert!(matches!(apply_green_operator(&v, 10.0), Err(Error::Nonpositive { node: 40, .. })));
    }

    #[test]
    fn weights_reproduce_the_model() {
        let ks = [1e4, 1e5, 1e6];
        let w = extrapolation_weights(ks);
        let u = |k: f64| 0.3 + 2.2 * k.ln() / k - 17.0 / k;
        let got: f64 = w.iter().zip(ks).map(|(w, k)| w * u(k)).sum();
        assert!((got - 0.3).abs() < 1e-12);
    }

    #[test]
    fn levels_converge_and_decrease() {
        let g = Grid::uniform(401, 0.5).unwrap();
        let cfg = KernelSolveConfig { k_schedule: vec![1e2, 1e3], ..Default::default() };
        let s = solve_kernel_iteration(&cfg, &g).unwrap();
        let (a, b) = (s.levels[0].profile.phi(), s.levels[1].profile.phi());
        assert!(a[1..400].iter().zip(&b[1..400]).all(|(x, y)| y <= x));
        assert!((s.levels[1].profile.dphi()[0] - 1.0).abs() < 1e-12);
    }
}
