//! Green's kernel of `u''' = g` with `u(0) = u(d) = 0`, `u'(0) = 0`.
//!
//! `G(eta, t) = 2 (t - d)^2 eta^2` for `eta <= t` and
//! `2 (t - d)^2 eta^2 - d (eta - t)^2` for `eta >= t`. The jump of `G_etaeta`
//! across `eta = t` is `-2d`, so at `d = 1/2` the representation reads
//! `u = a + 2 eta (d - eta) - int G u''' dt`: the kernel term enters with a
//! minus sign. [`representation_check`] pins this down on an exact cubic.

use serde::{Deserialize, Serialize};

use crate::quadrature::adaptive_simpson;
use crate::validation::Check;
use crate::{Error, Result, D_TRAVELING};

/// Slack allowed on domain checks for arguments computed in floating point.
const DOMAIN_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenKernel {
    pub d: f64,
    /// Sign applied to the kernel term of the representation formula.
    pub sign: f64,
}

impl Default for GreenKernel {
    fn default() -> Self {
        Self { d: D_TRAVELING, sign: -1.0 }
    }
}

impl GreenKernel {
    pub fn new(d: f64, sign: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Domain(format!("kernel length d = {d} must be positive")));
        }
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::Domain(format!("representation sign must be +1 or -1, got {sign}")));
        }
        Ok(Self { d, sign })
    }

    fn check(&self, eta: f64, t: f64) -> Result<()> {
        let ok = |x: f64| x >= -DOMAIN_SLACK && x <= self.d + DOMAIN_SLACK;
        if ok(eta) && ok(t) {
            Ok(())
        } else {
            Err(Error::Domain(format!("kernel argument (eta = {eta}, t = {t}) outside [0, {}]^2", self.d)))
        }
    }

    pub fn eval(&self, eta: f64, t: f64) -> Result<f64> {
        self.check(eta, t)?;
        Ok(self.eval_unchecked(eta, t))
    }

    pub fn deriv(&self, eta: f64, t: f64) -> Result<f64> {
        self.check(eta, t)?;
        Ok(self.deriv_unchecked(eta, t))
    }

    #[inline]
    pub fn eval_unchecked(&self, eta: f64, t: f64) -> f64 {
        let d = self.d;
        let base = 2.0 * (t - d).powi(2) * eta * eta;
        if eta <= t {
            base
        } else {
            base - d * (eta - t).powi(2)
        }
    }

    #[inline]
    pub fn deriv_unchecked(&self, eta: f64, t: f64) -> f64 {
        let d = self.d;
        let base = 4.0 * (t - d).powi(2) * eta;
        if eta <= t {
            base
        } else {
            base - 2.0 * d * (eta - t)
        }
    }

    /// `(int_0^eta G dt, int_eta^d G dt)`, closed form at `d = 1/2`, quadrature otherwise.
    pub fn row_integrals(&self, eta: f64) -> Result<(f64, f64)> {
        match kernel_row_integrals(eta) {
            Ok(v) if self.d == D_TRAVELING => Ok(v),
            Err(e) if self.d == D_TRAVELING => Err(e),
            _ => {
                self.check(eta, eta)?;
                Ok(self.row_integrals_quadrature(eta))
            }
        }
    }

    pub fn row_integrals_quadrature(&self, eta: f64) -> (f64, f64) {
        let f = |t: f64| self.eval_unchecked(eta, t);
        (adaptive_simpson(&f, 0.0, eta, 1e-15), adaptive_simpson(&f, eta, self.d, 1e-15))
    }
}

/// `G(eta, t)` for the default kernel (`d = 1/2`).
pub fn kernel_eval(eta: f64, t: f64) -> Result<f64> {
    GreenKernel::default().eval(eta, t)
}

/// `dG/deta (eta, t)` for the default kernel.
pub fn kernel_deriv_eval(eta: f64, t: f64) -> Result<f64> {
    GreenKernel::default().deriv(eta, t)
}

/// Closed-form `(int_0^eta G dt, int_eta^d G dt)` at `d = 1/2`.
pub fn kernel_row_integrals(eta: f64) -> Result<(f64, f64)> {
    let d = D_TRAVELING;
    GreenKernel::default().check(eta, eta)?;
    let left = 2.0 / 3.0 * eta.powi(3) * (d - eta) * (1.0 - eta);
    let right = 2.0 / 3.0 * eta * eta * (d - eta).powi(3);
    Ok((left, right))
}

/// Same as [`kernel_row_integrals`] but for an arbitrary `d`.
pub fn kernel_row_integrals_for(d: f64, eta: f64) -> Result<(f64, f64)> {
    if d != D_TRAVELING {
        return Err(Error::ClosedFormUnavailable(d));
    }
    kernel_row_integrals(eta)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepresentationCheck {
    pub g: f64,
    pub a: f64,
    pub sign: f64,
    pub samples: usize,
    pub max_deviation: f64,
    /// Representation value at `eta = d/2`.
    pub value_at_mid: f64,
    /// Exact solution at `eta = d/2`.
    pub exact_at_mid: f64,
}

/// Compares the exact solution of `u''' = g`, `u(0) = u(d) = a`, `u'(0) = 1`
/// with `a + 2 eta (d - eta) + sign * g * int G dt` on `samples` points.
pub fn representation_check(g: f64, a: f64, sign: f64, samples: usize) -> Result<RepresentationCheck> {
    let d = D_TRAVELING;
    let samples = samples.max(2);
    // u = a + eta + c2 eta^2 + g eta^3 / 6 with u(d) = a.
    let c2 = -1.0 / d - g * d / 6.0;
    let exact = |e: f64| a + e + c2 * e * e + g * e.powi(3) / 6.0;
    let repr = |e: f64| -> Result<f64> {
        let (l, r) = kernel_row_integrals(e)?;
        Ok(a + 2.0 * e * (d - e) + sign * g * (l + r))
    };
    let mut max_deviation = 0.0f64;
    for i in 0..samples {
        let e = d * i as f64 / (samples - 1) as f64;
        max_deviation = max_deviation.max((repr(e)? - exact(e)).abs());
    }
    Ok(RepresentationCheck {
        g,
        a,
        sign,
        samples,
        max_deviation,
        value_at_mid: repr(0.5 * d)?,
        exact_at_mid: exact(0.5 * d),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelBoundReport {
    pub resolution: usize,
    /// `sup G / (t^2 (d - t))` over interior source points.
    pub c_value: f64,
    /// `sup |G'| / (t (d - t))`.
    pub c_deriv: f64,
    /// `sup G / (t (d - t))`, the weaker weight that stays bounded.
    pub c_value_linear: f64,
    /// Where `c_value` was attained.
    pub c_value_argmax: (f64, f64),
}

/// Scans the kernel ratios on a `resolution x resolution` square, skipping
/// the source rows `t = 0` and `t = d`.
pub fn kernel_bound_scan(resolution: usize) -> Result<KernelBoundReport> {
    if resolution < 101 {
        return Err(Error::Domain(format!("scan resolution {resolution} below 101")));
    }
    let k = GreenKernel::default();
    let d = k.d;
    let step = d / (resolution - 1) as f64;
    let mut rep = KernelBoundReport {
        resolution,
        c_value: 0.0,
        c_deriv: 0.0,
        c_value_linear: 0.0,
        c_value_argmax: (0.0, 0.0),
    };
    for j in 1..resolution - 1 {
        let t = step * j as f64;
        let w = t * (d - t);
        for i in 0..resolution {
            let eta = step * i as f64;
            let g = k.eval_unchecked(eta, t);
            let ratio = g / (t * w);
            if ratio > rep.c_value {
                rep.c_value = ratio;
                rep.c_value_argmax = (eta, t);
            }
            rep.c_value_linear = rep.c_value_linear.max(g / w);
            rep.c_deriv = rep.c_deriv.max(k.deriv_unchecked(eta, t).abs() / w);
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelftestReport {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub representation_corrected: RepresentationCheck,
    pub representation_printed: RepresentationCheck,
    pub bounds: KernelBoundReport,
    pub bounds_refined: KernelBoundReport,
}

/// Runs every kernel invariant and the sign oracle.
pub fn selftest() -> Result<SelftestReport> {
    let k = GreenKernel::default();
    let d = k.d;
    let n = 101;
    let pts: Vec<f64> = (0..n).map(|i| d * i as f64 / (n - 1) as f64).collect();
    let mut checks = Vec::new();

    let mut min_g = f64::INFINITY;
    let mut max_branch_gap = 0.0f64;
    let mut max_boundary = 0.0f64;
    for &e in &pts {
        for &t in &pts {
            min_g = min_g.min(k.eval_unchecked(e, t));
        }
        let both = 2.0 * (e - d).powi(2) * e * e;
        max_branch_gap = max_branch_gap.max((both - k.eval_unchecked(e, e)).abs());
        max_boundary = max_boundary
            .max(k.eval_unchecked(0.0, e).abs())
            .max(k.deriv_unchecked(0.0, e).abs())
            .max(k.eval_unchecked(d, e).abs());
    }
    checks.push(Check::at_least("kernel_nonnegative", min_g, -1e-15));
    checks.push(Check::at_most("branch_continuity", max_branch_gap, 0.0));
    checks.push(Check::at_most("boundary_rows_vanish", max_boundary, 1e-15));

    // One-sided second differences of G in eta on each side of eta = t.
    let mut worst_jump = 0.0f64;
    for &t in &[0.1, 0.2, 0.25, 0.3, 0.4] {
        let h = 1e-3;
        let g = |e: f64| k.eval_unchecked(e, t);
        let right = (g(t + 2.0 * h) - 2.0 * g(t + h) + g(t)) / (h * h);
        let left = (g(t) - 2.0 * g(t - h) + g(t - 2.0 * h)) / (h * h);
        worst_jump = worst_jump.max((right - left + 2.0 * d).abs());
    }
    checks.push(Check::at_most("second_derivative_jump_is_minus_2d", worst_jump, 1e-6));

    let mut closed_vs_quad = 0.0f64;
    for &e in &pts {
        let (l, r) = kernel_row_integrals(e)?;
        let (lq, rq) = k.row_integrals_quadrature(e);
        closed_vs_quad = closed_vs_quad.max((l - lq).abs()).max((r - rq).abs());
    }
    checks.push(Check::at_most("row_integrals_closed_form_vs_quadrature", closed_vs_quad, 1e-10));

    let corrected = representation_check(6.0, 0.0, -1.0, n)?;
    let printed = representation_check(6.0, 0.0, 1.0, n)?;
    checks.push(Check::at_most("representation_sign_minus_one", corrected.max_deviation, 1e-10));
    checks.push(Check::report("representation_sign_plus_one_deviation", printed.max_deviation));

    let bounds = kernel_bound_scan(201)?;
    let bounds_refined = kernel_bound_scan(401)?;
    checks.push(Check::at_least("witness_ratio_at_quarter", bounds.c_value, 0.5));
    checks.push(Check::at_most(
        "c_deriv_refinement_stable",
        (bounds.c_deriv - bounds_refined.c_deriv).abs(),
        1e-3,
    ));
    checks.push(Check::at_most(
        "c_value_refinement_stable",
        (bounds.c_value - bounds_refined.c_value).abs(),
        1e-3,
    ));
    checks.push(Check::at_most(
        "c_value_linear_refinement_stable",
        (bounds.c_value_linear - bounds_refined.c_value_linear).abs(),
        1e-3,
    ));

    let passed = checks.iter().all(|c| c.passed);
    Ok(SelftestReport { passed, checks, representation_corrected: corrected, representation_printed: printed, bounds, bounds_refined })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_eval(0.0, 0.3).unwrap(), 0.0);
        assert!(close(kernel_eval(0.25, 0.25).unwrap(), 0.0078125, 1e-16));
        assert!(close(kernel_eval(0.4, 0.1).unwrap(), 0.0062, 1e-15));
        assert!(close(kernel_eval(0.5, 0.2).unwrap(), 0.0, 1e-15));
        assert!(kernel_eval(0.6, 0.1).is_err());
        assert!(kernel_eval(0.1, -0.1).is_err());
    }

    #[test]
    fn derivative_values() {
        assert_eq!(kernel_deriv_eval(0.0, 0.3).unwrap(), 0.0);
        assert!(close(kernel_deriv_eval(0.1, 0.3).unwrap(), 0.016, 1e-15));
        assert!(close(kernel_deriv_eval(0.4, 0.1).unwrap(), -0.044, 1e-15));
        let k = GreenKernel::default();
        let t = 0.3;
        assert!(close(k.deriv_unchecked(t - 1e-12, t), k.deriv_unchecked(t + 1e-12, t), 1e-10));
    }

    #[test]
    fn row_integrals() {
        assert_eq!(kernel_row_integrals(0.0).unwrap(), (0.0, 0.0));
        let (l, r) = kernel_row_integrals(0.25).unwrap();
        assert!(close(l, 0.001953125, 1e-15));
        assert!(close(r, 0.000651042, 1e-9));
        let (l, r) = kernel_row_integrals(0.5).unwrap();
        assert!(close(l, 0.0, 1e-16) && close(r, 0.0, 1e-16));
        assert!(matches!(kernel_row_integrals_for(0.7, 0.1), Err(Error::ClosedFormUnavailable(_))));
    }

    #[test]
    fn quadrature_fallback_for_other_lengths() {
        let k = GreenKernel::new(0.8, -1.0).unwrap();
        let (l, r) = k.row_integrals(0.3).unwrap();
        let lq = adaptive_simpson(&|t| k.eval_unchecked(0.3, t), 0.0, 0.3, 1e-14);
        assert!(close(l, lq, 1e-12) && r > 0.0);
    }

    #[test]
    fn sign_oracle() {
        let minus = representation_check(6.0, 0.0, -1.0, 101).unwrap();
        assert!(minus.max_deviation <= 1e-10);
        assert!(close(minus.exact_at_mid, 0.109375, 1e-15));
        let plus = representation_check(6.0, 0.0, 1.0, 101).unwrap();
        assert!(close(plus.value_at_mid, 0.140625, 1e-12));
        assert!(close((plus.value_at_mid - plus.exact_at_mid).abs(), 0.03125, 1e-12));
        let flat = representation_check(0.0, 0.3, 1.0, 101).unwrap();
        assert!(flat.max_deviation < 1e-15);
    }

    #[test]
    fn bound_scan_witness() {
        let r = kernel_bound_scan(101).unwrap();
        assert!(r.c_value >= 0.5);
        assert!(r.c_deriv.is_finite() && r.c_value_linear.is_finite());
        assert!(kernel_bound_scan(50).is_err());
    }

    #[test]
    fn linear_weight_ratio_is_refinement_stable() {
        let a = kernel_bound_scan(201).unwrap();
        let b = kernel_bound_scan(401).unwrap();
        assert!((a.c_deriv - b.c_deriv).abs() <= 1e-3);
        assert!((a.c_value_linear - b.c_value_linear).abs() <= 1e-3);
        // The t^2 weight is not integrable against G near t = 0.
        assert!(b.c_value > 1.5 * a.c_value);
    }
}
