//! Moving-frame evolution `f_t - v f_xi + (f^2 f_xixixi)_xi = 0` on `[0, w]`
//! with `f = 0` at both ends.
//!
//! Nodes `xi_i = i w / N`, `i = 0..=N`. The update is conservative: node `i`
//! changes by the difference of the face fluxes
//! `J_{i+1/2} = m (f_{i+2} - 3 f_{i+1} + 3 f_i - f_{i-1}) / h^3 - v (f_i + f_{i+1}) / 2`
//! with `m = (f_i^2 + f_{i+1}^2) / 2 + eps^2`, and the two boundary faces carry
//! no flux. Steps are backward Euler solved by damped Newton.

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::bounds::PhysicalFrame;
use crate::profile::Profile;
use crate::{Error, Result, D_TRAVELING};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Perturbation {
    None,
    /// `f -> f (1 + amp sin(mode pi xi / w))`.
    Sine { amp: f64, mode: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub frame: PhysicalFrame,
    pub n: usize,
    pub eps: f64,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub output_every: f64,
    pub perturbation: Perturbation,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            frame: PhysicalFrame { v: 1.0, theta: 1.0, w: D_TRAVELING },
            n: 400,
            eps: 1e-6,
            dt0: 1e-5,
            dt_min: 1e-12,
            dt_max: 1e-3,
            t_end: 0.05,
            output_every: 0.005,
            perturbation: Perturbation::None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let PhysicalFrame { v, theta, w } = self.frame;
        let bad = |m: String| Err(Error::Config(m));
        if !(v > 0.0 && theta > 0.0 && w > 0.0) {
            return bad(format!("need v, theta, w > 0 (got {v}, {theta}, {w})"));
        }
        let want = theta * theta * D_TRAVELING / v;
        if (w - want).abs() > 1e-12 * want {
            return bad(format!("w = {w} contradicts theta^2 d / v = {want}"));
        }
        if self.n < 100 {
            return bad(format!("n = {} is below the minimum of 100", self.n));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be >= 0, got {}", self.eps));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.output_every > 0.0 && self.output_every <= self.t_end) {
            return bad(format!("output_every must lie in (0, t_end], got {}", self.output_every));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt0 && self.dt0 <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min <= dt0 <= dt_max, got {}, {}, {}",
                self.dt_min, self.dt0, self.dt_max
            ));
        }
        if let Perturbation::Sine { amp, mode } = self.perturbation {
            if !(amp.abs() < 1.0 && mode >= 1) {
                return bad(format!("perturbation needs |amp| < 1 and mode >= 1, got {amp}, {mode}"));
            }
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.frame.w / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| i as f64 * self.h()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    /// Heights at all `n + 1` nodes; the end values are exactly zero.
    pub f: Vec<f64>,
}

/// The wave `theta^3 / v * phi(v xi / theta^2)` at the simulation nodes.
pub fn wave_on_nodes(cfg: &SimConfig, phi: &Profile) -> Vec<f64> {
    let PhysicalFrame { v, theta, .. } = cfg.frame;
    let scale = theta.powi(3) / v;
    let mut f: Vec<f64> = cfg.nodes().iter().map(|&xi| scale * phi.interpolate(v * xi / (theta * theta)).0).collect();
    f[0] = 0.0;
    f[cfg.n] = 0.0;
    f
}

pub fn build_initial(cfg: &SimConfig, phi: &Profile) -> Result<SimState> {
    cfg.validate()?;
    if (phi.d() - D_TRAVELING).abs() > 1e-12 {
        return Err(Error::Missing(format!("a wave profile on [0, 1/2] (got d = {})", phi.d())));
    }
    let mut f = wave_on_nodes(cfg, phi);
    if let Perturbation::Sine { amp, mode } = cfg.perturbation {
        let k = mode as f64 * std::f64::consts::PI / cfg.frame.w;
        for (fi, xi) in f.iter_mut().zip(cfg.nodes()) {
            *fi *= 1.0 + amp * (k * xi).sin();
        }
    }
    Ok(SimState { t: 0.0, f })
}

/// Trapezoid mass `int_0^w f`.
pub fn mass_of_state(state: &SimState, h: f64) -> f64 {
    let f = &state.f;
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    h * (f[1..n - 1].iter().sum::<f64>() + 0.5 * (f[0] + f[n - 1]))
}

/// The discrete operator, shared by stepping and diagnostics.
#[derive(Debug, Clone)]
pub struct Scheme {
    n: usize,
    h: f64,
    v: f64,
    eps2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub newton_iterations: usize,
    pub retries: usize,
    pub dt: f64,
}

const NEWTON_MAX: usize = 25;
/// Relative size of the last Newton correction at convergence.
const NEWTON_TOL: f64 = 1e-11;
/// Corrections below this are accepted without a residual decrease.
const NEWTON_FLOOR: f64 = 1e-8;

impl Scheme {
    pub fn new(cfg: &SimConfig) -> Self {
        Self { n: cfg.n, h: cfg.h(), v: cfg.frame.v, eps2: cfg.eps * cfg.eps }
    }

    fn mobility(&self, f: &[f64], i: usize) -> f64 {
        0.5 * (f[i] * f[i] + f[i + 1] * f[i + 1]) + self.eps2
    }

    fn third(&self, f: &[f64], i: usize) -> f64 {
        (f[i + 2] - 3.0 * f[i + 1] + 3.0 * f[i] - f[i - 1]) / self.h.powi(3)
    }

    /// Flux through face `i + 1/2`; zero on the two boundary faces.
    pub fn flux(&self, f: &[f64], i: usize) -> f64 {
        if i == 0 || i + 1 >= self.n {
            return 0.0;
        }
        self.mobility(f, i) * self.third(f, i) - 0.5 * self.v * (f[i] + f[i + 1])
    }

    /// Backward Euler residual for the interior nodes, scaled by `1 / h`.
    fn residual(&self, f: &[f64], old: &[f64], dt: f64) -> Vec<f64> {
        let c = dt / self.h;
        (1..self.n).map(|i| f[i] - old[i] + c * (self.flux(f, i) - self.flux(f, i - 1))).collect()
    }

    /// Size of the rounding error in [`Self::residual`], from the magnitudes
    /// that cancel in the third differences.
    fn residual_floor(&self, f: &[f64], dt: f64) -> f64 {
        let c = dt / self.h;
        let h3 = self.h.powi(3);
        let face = |i: usize| {
            if i == 0 || i + 1 >= self.n {
                return 0.0;
            }
            let spread = f[i + 2].abs() + 3.0 * f[i + 1].abs() + 3.0 * f[i].abs() + f[i - 1].abs();
            self.mobility(f, i) * spread / h3 + self.v * (f[i].abs() + f[i + 1].abs())
        };
        let worst = (1..self.n).map(|i| face(i) + face(i - 1)).fold(0.0, f64::max);
        16.0 * f64::EPSILON * c * worst
    }

    fn jacobian(&self, f: &[f64], dt: f64) -> BandMatrix {
        let m = self.n - 1;
        let c = dt / self.h;
        let h3 = self.h.powi(3);
        let mut a = BandMatrix::zeros(m, 2, 2);
        for j in 0..m {
            a.add(j, j, 1.0);
        }
        for i in 1..self.n - 1 {
            let mob = self.mobility(f, i);
            let d3 = self.third(f, i);
            let partials = [
                (i - 1, -mob / h3),
                (i, f[i] * d3 + 3.0 * mob / h3 - 0.5 * self.v),
                (i + 1, f[i + 1] * d3 - 3.0 * mob / h3 - 0.5 * self.v),
                (i + 2, mob / h3),
            ];
            // Face i + 1/2 leaves node i and enters node i + 1.
            for (col, dj) in partials {
                if col == 0 || col == self.n {
                    continue;
                }
                a.add(i - 1, col - 1, c * dj);
                a.add(i, col - 1, -c * dj);
            }
        }
        a
    }

    /// One backward Euler step of size `dt` by damped Newton. Fails when
    /// Newton stalls or the result has a negative height.
    pub fn implicit_step(&self, old: &[f64], dt: f64) -> Result<(Vec<f64>, usize)> {
        let mut f = old.to_vec();
        if dt == 0.0 {
            return Ok((f, 0));
        }
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale = norm(old).max(f64::MIN_POSITIVE);
        let mut r = self.residual(&f, old, dt);
        let mut last = f64::INFINITY;
        for it in 1..=NEWTON_MAX {
            let mut delta: Vec<f64> = r.iter().map(|v| -v).collect();
            self.jacobian(&f, dt).solve(&mut delta)?;
            let step = norm(&delta);
            let r0 = norm(&r);
            let floor = self.residual_floor(&f, dt);
            let mut lambda = 1.0;
            loop {
                let mut trial = f.clone();
                for (t, d) in trial[1..self.n].iter_mut().zip(&delta) {
                    *t += lambda * d;
                }
                let rt = self.residual(&trial, old, dt);
                let rn = norm(&rt);
                // Near the solution the residual sits at its rounding floor
                // and cannot be relied on to decrease.
                if rn.is_finite() && (rn <= (1.0 - 0.25 * lambda) * r0 || rn <= floor || step <= NEWTON_FLOOR * scale) {
                    f = trial;
                    r = rt;
                    break;
                }
                lambda *= 0.5;
                if lambda < 1e-4 {
                    return Err(Error::NewtonDivergence { iterations: it, residual: r0 });
                }
            }
            // Converged, or the corrections stopped contracting at noise level.
            let stalled = lambda == 1.0 && step <= NEWTON_FLOOR * scale && step > 0.5 * last;
            last = step;
            if lambda * step <= NEWTON_TOL * scale || stalled || (r0 <= floor && lambda == 1.0) {
                if let Some(i) = (1..self.n).find(|&i| f[i] < 0.0) {
                    return Err(Error::Nonpositive { node: i, eta: i as f64 * self.h, value: f[i] });
                }
                return Ok((f, it));
            }
        }
        Err(Error::NewtonDivergence { iterations: NEWTON_MAX, residual: norm(&r) })
    }

    /// `E = (1/2) int f_xi^2` from face differences.
    pub fn energy(&self, f: &[f64]) -> f64 {
        0.5 * f.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum::<f64>() / self.h
    }

    /// `D = int m f_xixixi^2` over the interior faces; the two boundary cells
    /// reuse the value of their neighbouring face.
    pub fn dissipation(&self, f: &[f64]) -> f64 {
        let cell = |i: usize| self.mobility(f, i) * self.third(f, i).powi(2);
        let inner: f64 = (1..self.n - 1).map(cell).sum();
        self.h * (inner + cell(1) + cell(self.n - 2))
    }

    /// Slope at `xi = 0` from the fit `a xi + b xi^2 ln xi + c xi^2` through
    /// the first three interior nodes, the local form of the wave there.
    pub fn slope_at_0(&self, f: &[f64]) -> f64 {
        let h = self.h;
        let a = nalgebra::Matrix3::from_fn(|r, c| {
            let x = (r + 1) as f64 * h;
            [x, x * x * x.ln(), x * x][c]
        });
        let b = nalgebra::Vector3::new(f[1], f[2], f[3]);
        a.lu().solve(&b).map_or(f64::NAN, |s| s[0])
    }

    /// Slope at `xi = w` via a right ghost node placed by quadratic
    /// extrapolation, then a central difference.
    pub fn slope_at_w(&self, f: &[f64]) -> f64 {
        let n = self.n;
        let ghost = 3.0 * f[n] - 3.0 * f[n - 1] + f[n - 2];
        (ghost - f[n - 1]) / (2.0 * self.h)
    }

    /// `(v / 2) (f_xi(0)^2 - f_xi(w)^2)` with the measured end slopes.
    pub fn boundary_term(&self, f: &[f64]) -> f64 {
        0.5 * self.v * (self.slope_at_0(f).powi(2) - self.slope_at_w(f).powi(2))
    }
}

/// Advances `state` by `dt`, halving the step on failure until the remaining
/// interval is covered.
pub fn advance_step(cfg: &SimConfig, state: &SimState, dt: f64) -> Result<(SimState, StepStats)> {
    let scheme = Scheme::new(cfg);
    let (f, stats) = step_with_retry(&scheme, cfg, &state.f, state.t, dt)?;
    Ok((SimState { t: state.t + dt, f }, stats))
}

fn step_with_retry(scheme: &Scheme, cfg: &SimConfig, f: &[f64], t: f64, dt: f64) -> Result<(Vec<f64>, StepStats)> {
    let mut retries = 0;
    let mut sub = dt;
    loop {
        match scheme.implicit_step(f, sub) {
            Ok((g, it)) if sub == dt => {
                return Ok((g, StepStats { newton_iterations: it, retries, dt }));
            }
            Ok(_) => {
                // A smaller step works; cover dt with two halves.
                let (mid, a) = step_with_retry(scheme, cfg, f, t, 0.5 * dt)?;
                let (end, b) = step_with_retry(scheme, cfg, &mid, t + 0.5 * dt, 0.5 * dt)?;
                let newton_iterations = a.newton_iterations + b.newton_iterations;
                return Ok((end, StepStats { newton_iterations, retries: 1 + a.retries + b.retries, dt }));
            }
            Err(Error::NewtonDivergence { .. } | Error::Nonpositive { .. } | Error::Singular(_)) => {
                retries += 1;
                sub *= 0.5;
                if sub < cfg.dt_min {
                    return Err(Error::StepUnderflow { t, dt: sub });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub boundary_term: f64,
    /// `|Delta E + int D - int P| / (Delta t max(|P|, v theta^2 / 2))` over
    /// the interval ending here; zero on the first row.
    pub balance_residual: f64,
    pub sup_error_vs_wave: f64,
    pub slope_at_w: f64,
    pub slope_at_0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSummary {
    pub per_interval: Vec<f64>,
    pub max: f64,
}

pub fn energy_balance_report(ledger: &EnergyLedger) -> Result<BalanceSummary> {
    if ledger.rows.len() < 3 {
        return Err(Error::Resolution(format!("energy balance needs 3 output times, got {}", ledger.rows.len())));
    }
    let per_interval: Vec<f64> = ledger.rows[1..].iter().map(|r| r.balance_residual).collect();
    let max = per_interval.iter().copied().fold(0.0, f64::max);
    Ok(BalanceSummary { per_interval, max })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Row {
    pub t: f64,
    /// `|f_xi(w, t)| > theta`: the first printed branch applies.
    pub first_branch: bool,
    pub sup_error: f64,
    pub first_bound: f64,
    pub shift: f64,
    /// `sup |f - wave - shift|`.
    pub second_residual: f64,
    pub first_satisfied: bool,
    pub second_satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Report {
    /// `(sqrt 6 / 6) theta w^{1/2}`.
    pub first_bound: f64,
    pub rows: Vec<Theorem3Row>,
    /// The sup error stayed below the first bound at every output time.
    pub first_bound_holds: bool,
    /// Earliest output time at which the shifted inequality fails, if any.
    pub second_fails_from: Option<f64>,
}

pub fn theorem3_report(cfg: &SimConfig, snapshots: &[SimState], wave: &[f64]) -> Theorem3Report {
    let PhysicalFrame { v, theta, w } = cfg.frame;
    let scheme = Scheme::new(cfg);
    let first_bound = 6f64.sqrt() / 6.0 * theta * w.sqrt();
    let rows: Vec<Theorem3Row> = snapshots
        .iter()
        .map(|s| {
            let shift = 2.0 * theta * w.sqrt() * (v * s.t).sqrt();
            let diff = s.f.iter().zip(wave).map(|(a, b)| a - b);
            let sup_error = diff.clone().fold(0.0f64, |m, d| m.max(d.abs()));
            let second_residual = diff.fold(0.0f64, |m, d| m.max((d - shift).abs()));
            Theorem3Row {
                t: s.t,
                first_branch: scheme.slope_at_w(&s.f).abs() > theta,
                sup_error,
                first_bound,
                shift,
                second_residual,
                first_satisfied: sup_error <= first_bound,
                second_satisfied: second_residual <= first_bound,
            }
        })
        .collect();
    Theorem3Report {
        first_bound,
        first_bound_holds: rows.iter().all(|r| r.first_satisfied),
        second_fails_from: rows.iter().find(|r| !r.second_satisfied).map(|r| r.t),
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub config: SimConfig,
    pub snapshots: Vec<SimState>,
    pub ledger: EnergyLedger,
    pub theorem3: Theorem3Report,
    pub balance: BalanceSummary,
    pub accepted_steps: usize,
    pub retries: usize,
    /// Largest `|mass(t) - mass(0)| / mass(0)` over accepted steps.
    pub max_mass_drift: f64,
    /// Smallest height seen after any accepted step.
    pub min_height: f64,
    /// `sup |f(., t_end) - wave|`.
    pub final_drift: f64,
    pub peak: f64,
}

pub fn run_simulation(cfg: &SimConfig, phi: &Profile) -> Result<SimulationResult> {
    let start = build_initial(cfg, phi)?;
    let wave = wave_on_nodes(cfg, phi);
    let scheme = Scheme::new(cfg);
    let h = cfg.h();
    let PhysicalFrame { v, theta, .. } = cfg.frame;
    let floor = 0.5 * v * theta * theta;

    let mass0 = mass_of_state(&start, h);
    let row = |s: &SimState, residual: f64| LedgerRow {
        t: s.t,
        mass: mass_of_state(s, h),
        energy: scheme.energy(&s.f),
        dissipation: scheme.dissipation(&s.f),
        boundary_term: scheme.boundary_term(&s.f),
        balance_residual: residual,
        sup_error_vs_wave: s.f.iter().zip(&wave).fold(0.0, |m, (a, b)| m.max((a - b).abs())),
        slope_at_w: scheme.slope_at_w(&s.f),
        slope_at_0: scheme.slope_at_0(&s.f),
    };

    let mut rows = vec![row(&start, 0.0)];
    let mut snapshots = vec![start.clone()];
    let mut state = start;
    let mut dt = cfg.dt0;
    let mut accepted = 0;
    let mut retries = 0;
    let mut max_mass_drift = 0.0f64;
    let mut min_height = f64::INFINITY;
    let mut int_d = 0.0;
    let mut int_p = 0.0;
    let mut e_prev = rows[0].energy;
    let mut t_prev = 0.0;
    let outputs = (cfg.t_end / cfg.output_every - 1e-9).ceil() as usize;

    for k in 1..=outputs {
        let target = (k as f64 * cfg.output_every).min(cfg.t_end);
        while state.t < target {
            let step = dt.min(target - state.t);
            let snap = target - state.t - step < 1e-3 * step;
            let step = if snap { target - state.t } else { step };
            let (f, stats) = match step_with_retry(&scheme, cfg, &state.f, state.t, step) {
                Ok(ok) => ok,
                Err(e) => return Err(e),
            };
            retries += stats.retries;
            accepted += 1;
            int_d += step * scheme.dissipation(&f);
            int_p += step * scheme.boundary_term(&f);
            state = SimState { t: if snap { target } else { state.t + step }, f };
            let m = mass_of_state(&state, h);
            max_mass_drift = max_mass_drift.max((m - mass0).abs() / mass0);
            min_height = state.f.iter().copied().fold(min_height, f64::min);
            if stats.retries > 0 {
                dt = (0.5 * step).max(cfg.dt_min);
            } else if stats.newton_iterations <= 4 && step >= dt {
                dt = (1.5 * dt).min(cfg.dt_max);
            }
        }
        let mut r = row(&state, 0.0);
        let span = state.t - t_prev;
        let p_scale = (int_p / span).abs().max(floor);
        r.balance_residual = (r.energy - e_prev + int_d - int_p).abs() / (span * p_scale);
        e_prev = r.energy;
        t_prev = state.t;
        int_d = 0.0;
        int_p = 0.0;
        rows.push(r);
        snapshots.push(state.clone());
    }

    let ledger = EnergyLedger { rows };
    let balance = energy_balance_report(&ledger)?;
    let theorem3 = theorem3_report(cfg, &snapshots, &wave);
    let peak = wave.iter().copied().fold(0.0, f64::max);
    let final_drift = ledger.rows.last().map_or(0.0, |r| r.sup_error_vs_wave);
    Ok(SimulationResult {
        config: cfg.clone(),
        snapshots,
        ledger,
        theorem3,
        balance,
        accepted_steps: accepted,
        retries,
        max_mass_drift,
        min_height,
        final_drift,
        peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{solve_shooting, ShootConfig};
    use crate::Grid;
    use std::sync::OnceLock;

    fn wave() -> &'static Profile {
        static WAVE: OnceLock<Profile> = OnceLock::new();
        WAVE.get_or_init(|| solve_shooting(&ShootConfig::default(), &Grid::standard(1001).unwrap()).unwrap().profile)
    }

    #[test]
    fn config_checks() {
        assert!(SimConfig::default().validate().is_ok());
        let mut c = SimConfig::default();
        c.frame.w = 0.7;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = SimConfig { n: 50, ..SimConfig::default() };
        assert!(c.validate().is_err());
        let c = SimConfig { perturbation: Perturbation::Sine { amp: 0.05, mode: 0 }, ..SimConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn initial_state_matches_wave_and_envelope() {
        let cfg = SimConfig::default();
        let s = build_initial(&cfg, wave()).unwrap();
        assert_eq!(s.f[0], 0.0);
        assert_eq!(s.f[cfg.n], 0.0);
        let (phi, _) = wave().interpolate(0.2);
        assert!((s.f[160] - phi).abs() < 1e-14);
        let peak = s.f.iter().copied().fold(0.0, f64::max);
        assert!((0.0620..=0.1073).contains(&peak), "{peak}");
        let m = mass_of_state(&s, cfg.h());
        assert!((2.0 / 105.0..=2.0 * 3f64.sqrt() / 105.0).contains(&m), "{m}");
    }

    #[test]
    fn scaled_frame_mass() {
        let frame = PhysicalFrame::new(1.0, 2.0).unwrap();
        let cfg = SimConfig { frame, ..SimConfig::default() };
        let s = build_initial(&cfg, wave()).unwrap();
        let m = mass_of_state(&s, cfg.h()) / 2f64.powi(5);
        assert!((2.0 / 105.0..=2.0 * 3f64.sqrt() / 105.0).contains(&m), "{m}");
    }

    #[test]
    fn zero_state_has_zero_mass() {
        let s = SimState { t: 0.0, f: vec![0.0; 401] };
        assert_eq!(mass_of_state(&s, 1.25e-3), 0.0);
    }

    #[test]
    fn zero_step_is_identity() {
        let cfg = SimConfig::default();
        let s = build_initial(&cfg, wave()).unwrap();
        let (next, _) = advance_step(&cfg, &s, 0.0).unwrap();
        assert_eq!(next.f, s.f);
    }

    #[test]
    fn one_step_from_wave_is_small_and_conservative() {
        let cfg = SimConfig::default();
        let s = build_initial(&cfg, wave()).unwrap();
        let (next, _) = advance_step(&cfg, &s, 1e-6).unwrap();
        let peak = s.f.iter().copied().fold(0.0, f64::max);
        let change = s.f.iter().zip(&next.f).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(change <= 1e-5 * peak, "{change}");
        let (m0, m1) = (mass_of_state(&s, cfg.h()), mass_of_state(&next, cfg.h()));
        assert!((m1 - m0).abs() <= 1e-10 * m0);
    }

    #[test]
    fn jacobian_matches_differences() {
        let cfg = SimConfig { n: 100, perturbation: Perturbation::Sine { amp: 0.1, mode: 2 }, ..SimConfig::default() };
        let scheme = Scheme::new(&cfg);
        let f = build_initial(&cfg, wave()).unwrap().f;
        let dt = 1e-4;
        let jac = scheme.jacobian(&f, dt);
        let base = scheme.residual(&f, &f, dt);
        for col in [1, 2, 50, 98, 99] {
            let mut g = f.clone();
            let step = 1e-7 * f[col].max(1e-3);
            g[col] += step;
            let r = scheme.residual(&g, &f, dt);
            for row in col.saturating_sub(3)..(col + 2).min(99) {
                let fd = (r[row] - base[row]) / step;
                let an = jac.get(row, col - 1);
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "({row}, {col}): {fd} vs {an}");
            }
        }
    }

    #[test]
    fn end_slopes_on_the_wave() {
        let cfg = SimConfig::default();
        let scheme = Scheme::new(&cfg);
        let f = build_initial(&cfg, wave()).unwrap().f;
        assert!((scheme.slope_at_0(&f) - 1.0).abs() < 1e-3);
        // Quadratic extrapolation against a 3/2-power touchdown.
        assert!(scheme.slope_at_w(&f).abs() < 0.05);
        assert!((scheme.boundary_term(&f) - 0.5).abs() < 0.01);
        assert!((scheme.dissipation(&f) - 0.5).abs() < 0.02);
    }

    #[test]
    fn theorem3_arithmetic() {
        let cfg = SimConfig::default();
        let f = build_initial(&cfg, wave()).unwrap().f;
        let snaps = [SimState { t: 0.0, f: f.clone() }, SimState { t: 0.04, f: f.clone() }, SimState { t: 0.045, f: f.clone() }];
        let r = theorem3_report(&cfg, &snaps, &f);
        assert!((r.first_bound - 0.288675).abs() < 1e-6);
        assert!((r.rows[1].shift - 0.282843).abs() < 1e-6);
        assert!(r.first_bound_holds);
        assert!(r.rows[1].second_satisfied);
        assert_eq!(r.second_fails_from, Some(0.045));
        assert!(r.rows.iter().all(|row| !row.first_branch));
    }

    #[test]
    fn balance_needs_three_rows() {
        let row = LedgerRow {
            t: 0.0,
            mass: 0.0,
            energy: 0.0,
            dissipation: 0.0,
            boundary_term: 0.0,
            balance_residual: 0.0,
            sup_error_vs_wave: 0.0,
            slope_at_w: 0.0,
            slope_at_0: 0.0,
        };
        let ledger = EnergyLedger { rows: vec![row.clone(), row] };
        assert!(energy_balance_report(&ledger).is_err());
    }

    #[test]
    fn short_run_is_stationary() {
        let cfg = SimConfig { t_end: 0.01, output_every: 0.0025, ..SimConfig::default() };
        let r = run_simulation(&cfg, wave()).unwrap();
        assert_eq!(r.ledger.rows.len(), 5);
        assert!(r.final_drift <= 0.02 * r.peak);
        assert!(r.max_mass_drift <= 1e-10);
        assert!(r.min_height >= 0.0);
        assert!(r.balance.max <= 0.01, "{:?}", r.balance);
        let e0 = r.ledger.rows[0].energy;
        assert!(r.ledger.rows.iter().all(|row| (row.energy - e0).abs() <= 1e-3 * e0));
    }
}
