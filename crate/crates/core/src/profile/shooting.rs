//! Shooting on the first-integral ODE `phi phi'' = phi'^2 / 2 + eta - d`.
//!
//! The only free parameter of the local expansion at the contact line is
//! `B` in `phi = eta + eta^2 ln(eta) / 2 + B eta^2`. Too small a `B` makes the
//! trajectory touch down before `d`; too large a `B` makes it touch down late
//! or turn back upward. `B` is bisected until the touchdown point lands on `d`.

use serde::{Deserialize, Serialize};

use crate::ode::{next_step, trial_step, Tolerances};
use crate::profile::{Method, Profile};
use crate::{Error, Grid, Result, D_TRAVELING};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShootConfig {
    pub eps: f64,
    pub b_bracket: (f64, f64),
    pub rtol: f64,
    pub atol: f64,
    /// Integration stops once `phi` drops below this near the right end.
    pub threshold: f64,
    /// Bisection stops when the bracket on `eta*` is this narrow.
    pub eta_tol: f64,
    pub max_bisections: usize,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            b_bracket: (-10.0, 10.0),
            rtol: 1e-12,
            atol: 1e-15,
            threshold: 1e-9,
            eta_tol: 1e-11,
            max_bisections: 200,
        }
    }
}

impl ShootConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.eps > 0.0
            && self.eps < 1e-2 * D_TRAVELING
            && self.b_bracket.0 < self.b_bracket.1
            && self.rtol > 0.0
            && self.atol > 0.0
            && self.threshold > 0.0
            && self.eta_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid shooting configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShootResult {
    pub profile: Profile,
    pub b_star: f64,
    /// Extrapolated touchdown point for `b_star`.
    pub eta_star: f64,
    pub bisections: usize,
    /// Where the integrator handed over to the 3/2-power tail.
    pub stop_eta: f64,
}

/// Series start `(phi, phi')` at `eps` for expansion coefficient `b`.
pub fn series_start(eps: f64, b: f64) -> (f64, f64) {
    let l = eps.ln();
    (eps + 0.5 * eps * eps * l + b * eps * eps, 1.0 + eps * l + 0.5 * eps + 2.0 * b * eps)
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    /// Trajectory fell below the threshold; `eta_star` is the extrapolated zero.
    Touchdown { eta: f64, phi: f64, eta_star: f64 },
    /// Trajectory turned upward again (or ran far past `d`) without touching down.
    Turnaround,
}

fn rhs(d: f64) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    move |eta, y| [y[1], (0.5 * y[1] * y[1] + eta - d) / y[0]]
}

/// Integrates from the series start. Records `(phi, phi')` at every entry of
/// `record` (sorted, above `eps`) reached before the stop.
fn integrate(b: f64, cfg: &ShootConfig, record: &[f64], out: &mut Vec<(f64, f64)>) -> Result<Outcome> {
    let d = D_TRAVELING;
    let f = rhs(d);
    let tol = Tolerances { rtol: cfg.rtol, atol: cfg.atol };
    let (p0, dp0) = series_start(cfg.eps, b);
    let mut t = cfg.eps;
    let mut y = [p0, dp0];
    let mut h = 1e-3 * cfg.eps;
    let mut next = 0;
    let mut past_max = false;
    let h_min = 1e-15;
    loop {
        if t > 2.0 * d {
            return Ok(Outcome::Turnaround);
        }
        let target = record.get(next).copied();
        let mut h_try = h;
        let mut clipped = false;
        if let Some(e) = target {
            if t + h_try >= e {
                h_try = e - t;
                clipped = true;
            }
        }
        let trial = trial_step(&f, t, &y, h_try, tol);
        let (y_new, err) = match trial {
            Some((yn, err)) if yn[0] > 0.0 => (yn, err),
            _ => {
                // Stepped through zero or blew up: shrink toward the event.
                h = 0.25 * h_try;
                if h < h_min {
                    return Err(Error::Integrator { eta: t, phi: y[0], dphi: y[1], reason: "step underflow".into() });
                }
                continue;
            }
        };
        if err > 1.0 {
            h = next_step(h_try, err);
            if h < h_min {
                return Err(Error::Integrator { eta: t, phi: y[0], dphi: y[1], reason: "step underflow".into() });
            }
            continue;
        }
        if y_new[0] < cfg.threshold {
            // Locate the threshold crossing inside the accepted step.
            let (mut lo, mut hi) = (0.0, h_try);
            let mut state = y;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                match trial_step(&f, t, &y, mid, tol) {
                    Some((ym, _)) if ym[0] >= cfg.threshold => {
                        lo = mid;
                        state = ym;
                    }
                    _ => hi = mid,
                }
                if hi - lo <= 1e-15 * (t + hi) {
                    break;
                }
            }
            let eta = t + lo;
            if state[1] >= 0.0 {
                return Ok(Outcome::Turnaround);
            }
            let eta_star = eta + 1.5 * state[0] / state[1].abs();
            return Ok(Outcome::Touchdown { eta, phi: state[0], eta_star });
        }
        t += h_try;
        y = y_new;
        if y[1] < 0.0 {
            past_max = true;
        } else if past_max {
            return Ok(Outcome::Turnaround);
        }
        if clipped {
            out.push((y[0], y[1]));
            next += 1;
        }
        h = next_step(if clipped { h.max(h_try) } else { h_try }, err);
    }
}

/// Signed touchdown mismatch: negative for early touchdown, positive for late
/// touchdown or turnaround.
fn mismatch(b: f64, cfg: &ShootConfig) -> Result<(f64, Outcome)> {
    let o = integrate(b, cfg, &[], &mut Vec::new())?;
    Ok(match o {
        Outcome::Touchdown { eta_star, .. } => (eta_star - D_TRAVELING, o),
        Outcome::Turnaround => (f64::INFINITY, o),
    })
}

/// Finds `B*` by bisection and samples the resulting profile on `grid`.
pub fn solve_shooting(cfg: &ShootConfig, grid: &Grid) -> Result<ShootResult> {
    cfg.validate()?;
    if (grid.d() - D_TRAVELING).abs() > 1e-15 {
        return Err(Error::ClosedFormUnavailable(grid.d()));
    }
    let (mut lo, mut hi) = cfg.b_bracket;
    let mut m_lo = mismatch(lo, cfg)?.0;
    let mut m_hi = mismatch(hi, cfg)?.0;
    let mut widen = 0;
    while !(m_lo < 0.0 && m_hi > 0.0) {
        if widen == 8 {
            return Err(Error::Bracket { lo, hi });
        }
        let w = hi - lo;
        if m_lo >= 0.0 {
            lo -= w;
            m_lo = mismatch(lo, cfg)?.0;
        }
        if m_hi <= 0.0 {
            hi += w;
            m_hi = mismatch(hi, cfg)?.0;
        }
        widen += 1;
    }
    let mut bisections = 0;
    let mut best = (lo, m_lo);
    while bisections < cfg.max_bisections {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (m, _) = mismatch(mid, cfg)?;
        bisections += 1;
        if m.abs() < best.1.abs() {
            best = (mid, m);
        }
        if m < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if m.abs() < cfg.eta_tol {
            break;
        }
    }
    let b_star = best.0;
    let nodes = grid.nodes();
    let inner: Vec<f64> = nodes.iter().copied().filter(|&e| e > cfg.eps && e < D_TRAVELING).collect();
    let mut samples = Vec::with_capacity(inner.len());
    let outcome = integrate(b_star, cfg, &inner, &mut samples)?;
    let Outcome::Touchdown { eta: stop_eta, phi: stop_phi, eta_star, .. } = outcome else {
        return Err(Error::Integrator {
            eta: D_TRAVELING,
            phi: f64::NAN,
            dphi: f64::NAN,
            reason: "converged trajectory did not touch down".into(),
        });
    };
    let a_loc = stop_phi / (eta_star - stop_eta).powf(1.5);
    let mut phi = Vec::with_capacity(nodes.len());
    let mut dphi = Vec::with_capacity(nodes.len());
    let mut it = samples.into_iter();
    for &e in nodes {
        let (p, dp) = if e == 0.0 {
            (0.0, 1.0)
        } else if e <= cfg.eps {
            series_start(e, b_star)
        } else if e >= D_TRAVELING {
            (0.0, 0.0)
        } else {
            match it.next() {
                Some(s) if s.0.is_finite() => s,
                _ => {
                    let x = (eta_star - e).max(0.0);
                    (a_loc * x.powf(1.5), -1.5 * a_loc * x.sqrt())
                }
            }
        };
        phi.push(p);
        dphi.push(dp);
    }
    let profile = Profile::new(grid.clone(), phi, dphi, Method::Shoot, None)?;
    Ok(ShootResult { profile, b_star, eta_star, bisections, stop_eta })
}
