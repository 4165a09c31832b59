//! Envelope bounds `A eta (d - eta)^{3/2}`, the coefficient gates that certify
//! them, the touchdown coefficient and a few integral functionals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::profile::Profile;
use crate::{Error, Result, D_TRAVELING};

/// `4 sqrt(2) / 3`.
pub const A1: f64 = 1.885_618_083_164_126_7;
/// `4 sqrt(6) / 3`.
pub const A2: f64 = 3.265_986_323_710_904;

/// Pass slack for the pointwise envelope margins.
pub const ENVELOPE_SLACK: f64 = 1e-8;

/// Normalised slope-norm threshold the integral estimate is compared with.
pub const SLOPE_THRESHOLD: f64 = 1.0 / 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub a1: f64,
    pub a2: f64,
    pub d: f64,
}

impl Default for Envelope {
    fn default() -> Self {
        Self { a1: A1, a2: A2, d: D_TRAVELING }
    }
}

impl Envelope {
    fn shape(&self, eta: f64) -> f64 {
        eta * (self.d - eta).max(0.0).powf(1.5)
    }

    pub fn lower(&self, eta: f64) -> f64 {
        self.a1 * self.shape(eta)
    }

    pub fn upper(&self, eta: f64) -> f64 {
        self.a2 * self.shape(eta)
    }
}

/// Lower and upper envelope at `eta`.
pub fn envelope_eval(eta: f64) -> Result<(f64, f64)> {
    let e = Envelope::default();
    if !(0.0..=e.d).contains(&eta) {
        return Err(Error::Domain(format!("eta = {eta} outside [0, {}]", e.d)));
    }
    Ok((e.lower(eta), e.upper(eta)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    /// `min(phi - phi_min)` over the grid.
    pub min_lower_margin: f64,
    /// `min(phi_max - phi)` over the grid.
    pub min_upper_margin: f64,
    /// Nodes `eta` where the two minima are attained. The end nodes, where
    /// every candidate vanishes, are left out.
    pub argmins: [f64; 2],
    pub lower_pass: bool,
    pub upper_pass: bool,
    pub slack: f64,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.lower_pass && self.upper_pass
    }
}

pub fn envelope_check(p: &Profile) -> EnvelopeReport {
    let env = Envelope { d: p.d(), ..Envelope::default() };
    let mut lower = (f64::INFINITY, 0.0);
    let mut upper = (f64::INFINITY, 0.0);
    let n = p.eta().len();
    for (&eta, &phi) in p.eta()[1..n - 1].iter().zip(&p.phi()[1..n - 1]) {
        let lo = phi - env.lower(eta);
        let hi = env.upper(eta) - phi;
        if lo < lower.0 {
            lower = (lo, eta);
        }
        if hi < upper.0 {
            upper = (hi, eta);
        }
    }
    EnvelopeReport {
        min_lower_margin: lower.0,
        min_upper_margin: upper.0,
        argmins: [lower.1, upper.1],
        lower_pass: lower.0 >= -ENVELOPE_SLACK,
        upper_pass: upper.0 >= -ENVELOPE_SLACK,
        slack: ENVELOPE_SLACK,
    }
}

/// Which comparison statement a trial coefficient supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateClass {
    /// Subsolution inequality holds and the maximum-principle sign condition
    /// is met: a certified lower bound.
    LowerCertified,
    /// Only the `phi phi'' >=` inequality holds.
    SupersolutionOnly,
    /// The reverse inequality holds: a certified upper bound.
    UpperCertified,
    None,
}

/// The three gate values of `A0^2 d^2`, derived from the extrema of the
/// polynomials behind each inequality rather than typed in.
pub fn gate_thresholds(d: f64) -> [f64; 3] {
    // (1/2) A^2 (d - 5 eta / 2)^2 <= 1 on [0, d]: worst at eta = d.
    let worst = (d - 2.5 * d).powi(2);
    let lower = 2.0 / worst * d * d;
    // 5 eta^2 - 4 d eta - 4 d^2 + 8 / A^2 >= 0: vertex at eta = 2d/5.
    let e = 0.4 * d;
    let vertex = 5.0 * e * e - 4.0 * d * e - 4.0 * d * d;
    let sup = 8.0 / -vertex * d * d;
    // The same quadratic <= 0 on [0, d]: worst at an endpoint.
    let ends = (-4.0 * d * d).max(5.0 * d * d - 8.0 * d * d);
    let upper = 8.0 / -ends * d * d;
    [lower, sup, upper]
}

/// Auxiliary polynomial with `phi0 phi0'' = (1/2) phi0'^2 + f` for the trial
/// function `phi0 = A0 eta (d - eta)^{3/2}`.
pub fn gate_polynomial(a0: f64, d: f64, eta: f64) -> f64 {
    let s6 = 6f64.sqrt();
    0.625 * a0 * a0 * (d - eta) * (eta - 2.0 * d * (1.0 - s6) / 5.0) * (eta - 2.0 * d * (1.0 + s6) / 5.0)
}

/// `(f(eta) - (eta - d)) / (d - eta)`, a quadratic; its sign decides both
/// differential inequalities pointwise.
fn gate_margin(a0: f64, d: f64, eta: f64) -> f64 {
    0.125 * a0 * a0 * (5.0 * eta * eta - 4.0 * d * eta - 4.0 * d * d) + 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub a0: f64,
    pub a0sq_d2: f64,
    pub class: GateClass,
    /// Classification from the grid scan alone.
    pub scan_class: GateClass,
    pub agree: bool,
    /// `max f` over the scan; the polynomial should never be positive.
    pub f_max: f64,
    /// Min and max of the pointwise margin over the scan.
    pub margin_range: [f64; 2],
    /// Where `phi0 phi0'' >= ...` fails worst, if it fails.
    pub super_fails_at: Option<f64>,
    /// Where `phi0 phi0'' <= ...` fails worst, if it fails.
    pub sub_fails_at: Option<f64>,
}

const GATE_SCAN: usize = 2001;
const GATE_TOL: f64 = 1e-12;

pub fn lemma_gate(a0: f64) -> Result<GateReport> {
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(Error::Domain(format!("gate coefficient must be positive, got {a0}")));
    }
    let d = D_TRAVELING;
    let q = a0 * a0 * d * d;
    let [t_lower, t_super, t_upper] = gate_thresholds(d);
    let class = if q <= t_lower * (1.0 + 1e-14) {
        GateClass::LowerCertified
    } else if q <= t_super * (1.0 + 1e-14) {
        GateClass::SupersolutionOnly
    } else if q >= t_upper * (1.0 - 1e-14) {
        GateClass::UpperCertified
    } else {
        GateClass::None
    };

    let mut f_max = f64::NEG_INFINITY;
    let mut lo = (f64::INFINITY, 0.0);
    let mut hi = (f64::NEG_INFINITY, 0.0);
    let mut sign_max = f64::NEG_INFINITY;
    for i in 0..GATE_SCAN {
        let eta = d * i as f64 / (GATE_SCAN - 1) as f64;
        f_max = f_max.max(gate_polynomial(a0, d, eta));
        let g = gate_margin(a0, d, eta);
        if g < lo.0 {
            lo = (g, eta);
        }
        if g > hi.0 {
            hi = (g, eta);
        }
        sign_max = sign_max.max(0.5 * a0 * a0 * (d - 2.5 * eta).powi(2) - 1.0);
    }
    let holds_super = lo.0 >= -GATE_TOL;
    let holds_sub = hi.0 <= GATE_TOL;
    let scan_class = if holds_super && sign_max <= GATE_TOL {
        GateClass::LowerCertified
    } else if holds_super {
        GateClass::SupersolutionOnly
    } else if holds_sub {
        GateClass::UpperCertified
    } else {
        GateClass::None
    };
    Ok(GateReport {
        a0,
        a0sq_d2: q,
        class,
        scan_class,
        agree: class == scan_class,
        f_max,
        margin_range: [lo.0, hi.0],
        super_fails_at: (!holds_super).then_some(lo.1),
        sub_fails_at: (!holds_sub).then_some(hi.1),
    })
}

/// Exponent of the leading correction to `phi ~ A x^{3/2}` at touchdown,
/// `x = d - eta`; the positive root of `4q^2 + 2q - 3 = 0`.
pub fn edge_correction_exponent() -> f64 {
    (13f64.sqrt() - 1.0) / 4.0
}

/// Fitting window for the touchdown coefficient, in `d - eta`.
pub const EDGE_WINDOW: (f64, f64) = (1e-4, 1e-2);
const EDGE_MIN_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCoefficient {
    pub estimate: f64,
    /// Spread of the estimate over sub-windows of the fit.
    pub interval: [f64; 2],
    /// Range allowed by the two envelopes, `[A1 d, A2 d]`.
    pub containment: [f64; 2],
    pub nodes: usize,
}

fn edge_fit(samples: &[(f64, f64)]) -> Option<f64> {
    let q = edge_correction_exponent();
    let a = DMatrix::from_fn(samples.len(), 3, |r, c| {
        let x = samples[r].0;
        [1.0, x.powf(q), x][c]
    });
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    a.svd(true, true).solve(&b, 1e-14).ok().map(|c| c[0])
}

/// Limit of `phi / (d - eta)^{3/2}` at `eta = d`, by least squares in the basis
/// `1, x^q, x` over the window `x = d - eta` in [`EDGE_WINDOW`].
pub fn edge_coefficient(p: &Profile) -> Result<EdgeCoefficient> {
    let d = p.d();
    let samples: Vec<(f64, f64)> = p
        .eta()
        .iter()
        .zip(p.phi())
        .filter_map(|(&eta, &phi)| {
            let x = d - eta;
            (x >= EDGE_WINDOW.0 && x <= EDGE_WINDOW.1).then(|| (x, phi / x.powf(1.5)))
        })
        .collect();
    if samples.len() < EDGE_MIN_NODES {
        return Err(Error::Resolution(format!(
            "{} nodes with d - eta in [{:e}, {:e}], need {EDGE_MIN_NODES}",
            samples.len(),
            EDGE_WINDOW.0,
            EDGE_WINDOW.1
        )));
    }
    let fail = || Error::Resolution("edge fit is rank deficient".into());
    let estimate = edge_fit(&samples).ok_or_else(fail)?;
    let mut lo = estimate;
    let mut hi = estimate;
    let split = (EDGE_WINDOW.0 * EDGE_WINDOW.1).sqrt();
    for part in [
        samples.iter().filter(|s| s.0 <= split).copied().collect::<Vec<_>>(),
        samples.iter().filter(|s| s.0 >= split).copied().collect(),
    ] {
        if part.len() >= EDGE_MIN_NODES / 2 {
            let e = edge_fit(&part).ok_or_else(fail)?;
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    Ok(EdgeCoefficient { estimate, interval: [lo, hi], containment: [A1 * d, A2 * d], nodes: samples.len() })
}

/// `int_0^d A eta (d - eta)^{3/2} d eta = (4/35) A d^{7/2}`.
pub fn envelope_mass(a: f64, d: f64) -> f64 {
    4.0 / 35.0 * a * d.powf(3.5)
}

/// `int_0^d (d/d eta [A eta (d - eta)^{3/2}])^2 d eta = (3/16) A^2 d^4`.
pub fn envelope_slope_norm(a: f64, d: f64) -> f64 {
    3.0 / 16.0 * a * a * d.powi(4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    /// Richardson estimate from the trapezoid rule on every second node.
    pub error: f64,
}

fn trapezoid(x: &[f64], y: &[f64], stride: usize) -> f64 {
    let idx: Vec<usize> = (0..x.len()).step_by(stride).chain(std::iter::once(x.len() - 1)).collect();
    idx.windows(2).filter(|w| w[0] != w[1]).map(|w| 0.5 * (x[w[1]] - x[w[0]]) * (y[w[0]] + y[w[1]])).sum()
}

fn integral(x: &[f64], y: &[f64]) -> Integral {
    let fine = trapezoid(x, y, 1);
    let coarse = trapezoid(x, y, 2);
    Integral { value: fine, error: (fine - coarse).abs() / 3.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassStats {
    pub value: f64,
    pub error: f64,
    /// `[mass(phi_min), mass(phi_max)]`.
    pub interval: [f64; 2],
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeNormStats {
    pub value: f64,
    pub error: f64,
    pub threshold_1_24: f64,
    /// Outcome of `value <= 1/24`, recorded only.
    pub satisfied: bool,
}

/// Mass `int phi` and slope norm `int phi'^2` with error bars.
pub fn mass_and_slope_stats(p: &Profile) -> (MassStats, SlopeNormStats) {
    let d = p.d();
    let m = integral(p.eta(), p.phi());
    let sq: Vec<f64> = p.dphi().iter().map(|v| v * v).collect();
    let s = integral(p.eta(), &sq);
    let interval = [envelope_mass(A1, d), envelope_mass(A2, d)];
    (
        MassStats {
            value: m.value,
            error: m.error,
            interval,
            within: m.value >= interval[0] && m.value <= interval[1],
        },
        SlopeNormStats {
            value: s.value,
            error: s.error,
            threshold_1_24: SLOPE_THRESHOLD,
            satisfied: s.value <= SLOPE_THRESHOLD,
        },
    )
}

/// Lab-frame geometry of the ridge: rear contact line `s1 = v t`, front
/// contact line `s2 = s1 + w`, with `w = theta^2 d / v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalFrame {
    pub v: f64,
    pub theta: f64,
    pub w: f64,
}

impl PhysicalFrame {
    pub fn new(v: f64, theta: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite() && theta > 0.0 && theta.is_finite()) {
            return Err(Error::Domain(format!("need v > 0 and theta > 0, got v = {v}, theta = {theta}")));
        }
        Ok(Self { v, theta, w: theta * theta * D_TRAVELING / v })
    }

    pub fn s1(&self, t: f64) -> f64 {
        self.v * t
    }

    pub fn s2(&self, t: f64) -> f64 {
        self.s1(t) + self.w
    }
}

/// Envelope coefficients in the lab frame, `A_i d`.
pub fn corrected_coeffs() -> [f64; 2] {
    [A1 * D_TRAVELING, A2 * D_TRAVELING]
}

/// The lab-frame coefficients as they appear in the printed corollary, which
/// omit the factor `d`.
pub fn as_printed_coeffs() -> [f64; 2] {
    [A1, A2]
}

/// Lower and upper bounds on the film height at `(x, t)`.
pub fn physical_envelope(x: f64, t: f64, frame: &PhysicalFrame) -> Result<(f64, f64)> {
    let (s1, s2) = (frame.s1(t), frame.s2(t));
    if !(x >= s1 && x <= s2) {
        return Err(Error::Domain(format!("x = {x} outside [{s1}, {s2}]")));
    }
    let shape = frame.v.sqrt() * (x - s1) / (s2 - s1) * (s2 - x).powf(1.5);
    let [c1, c2] = corrected_coeffs();
    Ok((c1 * shape, c2 * shape))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corollary {
    pub corrected_coeffs: [f64; 2],
    pub as_printed_coeffs: [f64; 2],
}

/// Everything `ridgewave bounds` reports about one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub envelope: EnvelopeReport,
    pub edge_coefficient: EdgeCoefficient,
    pub mass: MassStats,
    pub slope_norm: SlopeNormStats,
    pub corollary: Corollary,
    pub passed: bool,
}

pub fn bounds_report(p: &Profile) -> Result<BoundsReport> {
    let envelope = envelope_check(p);
    let edge = edge_coefficient(p)?;
    let (mass, slope_norm) = mass_and_slope_stats(p);
    let passed = envelope.passed()
        && mass.within
        && edge.estimate >= edge.containment[0]
        && edge.estimate <= edge.containment[1] + 0.01;
    Ok(BoundsReport {
        envelope,
        edge_coefficient: edge,
        mass,
        slope_norm,
        corollary: Corollary { corrected_coeffs: corrected_coeffs(), as_printed_coeffs: as_printed_coeffs() },
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Method;
    use crate::{Grid, EDGE_COEFFICIENT};

    #[test]
    fn coefficient_constants() {
        assert!((A1 - 4.0 * 2f64.sqrt() / 3.0).abs() < 1e-15);
        assert!((A2 - 4.0 * 6f64.sqrt() / 3.0).abs() < 1e-15);
        assert!((A1 * A1 / 4.0 - 8.0 / 9.0).abs() < 1e-15);
        assert!((A2 * A2 / 4.0 - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_values() {
        assert_eq!(envelope_eval(0.0).unwrap(), (0.0, 0.0));
        assert_eq!(envelope_eval(0.5).unwrap(), (0.0, 0.0));
        let (lo, hi) = envelope_eval(0.2).unwrap();
        assert!((lo - 0.0619677).abs() < 5e-8, "{lo}");
        assert!((hi - 0.1073313).abs() < 5e-8, "{hi}");
        assert!(envelope_eval(0.6).is_err());
    }

    #[test]
    fn envelope_check_on_envelopes() {
        let g = Grid::standard(201).unwrap();
        let top = Profile::envelope(&g, A2, Method::EnvelopeMax);
        let r = envelope_check(&top);
        assert!(r.passed());
        assert!(r.min_upper_margin.abs() < 1e-15);
        assert!(r.min_lower_margin > 0.0);

        let over = Profile::envelope(&g, 1.01 * A2, Method::External);
        let r = envelope_check(&over);
        assert!(!r.upper_pass && r.lower_pass);
        assert!(r.min_upper_margin < 0.0);
        let (lo, hi) = envelope_eval(r.argmins[1]).unwrap();
        assert!(lo <= hi);
        // The worst violation sits at the envelope maximum, eta = d / 2.5.
        assert!((r.argmins[1] - 0.2).abs() < 0.01);
    }

    #[test]
    fn gate_thresholds_exact() {
        let [a, b, c] = gate_thresholds(0.5);
        assert_eq!(a, 8.0 / 9.0);
        assert_eq!(b, 5.0 / 3.0);
        assert_eq!(c, 8.0 / 3.0);
    }

    #[test]
    fn gate_examples() {
        let r = lemma_gate(2.0).unwrap();
        assert_eq!(r.class, GateClass::SupersolutionOnly);
        assert!(r.agree);
        let r = lemma_gate(A1).unwrap();
        assert_eq!(r.class, GateClass::LowerCertified);
        assert!(r.agree);
        let r = lemma_gate(A2).unwrap();
        assert_eq!(r.class, GateClass::UpperCertified);
        assert!(r.agree);
        let r = lemma_gate(2.8).unwrap();
        assert_eq!(r.class, GateClass::None);
        assert!(r.agree);
        assert!(r.super_fails_at.is_some() && r.sub_fails_at.is_some());
        assert!(r.f_max <= 1e-15);
        assert!(lemma_gate(0.0).is_err());
    }

    #[test]
    fn gate_polynomial_at_contact() {
        let f0 = gate_polynomial(1.0, 0.5, 0.0);
        assert!((f0 + 0.0625).abs() < 1e-15);
        // f(0) = -(1/2) phi0'(0)^2 with phi0'(0) = A0 d^{3/2}.
        assert!((f0 + 0.5 * 0.5f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn closed_form_functionals() {
        assert!((envelope_slope_norm(A1, 0.5) - 1.0 / 24.0).abs() < 1e-12);
        assert!((envelope_slope_norm(A2, 0.5) - 1.0 / 8.0).abs() < 1e-12);
        assert!((envelope_mass(A1, 0.5) - 2.0 / 105.0).abs() < 1e-12);
        assert!((envelope_mass(A2, 0.5) - 2.0 * 3f64.sqrt() / 105.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let g = Grid::standard(2001).unwrap();
        for a in [A1, A2] {
            let p = Profile::envelope(&g, a, Method::External);
            let (m, s) = mass_and_slope_stats(&p);
            assert!((m.value - envelope_mass(a, 0.5)).abs() < 1e-7, "{}", m.value);
            assert!((s.value - envelope_slope_norm(a, 0.5)).abs() < 1e-5, "{}", s.value);
            assert!(m.error < 1e-6);
        }
    }

    #[test]
    fn edge_fit_on_envelopes() {
        let g = Grid::standard(401).unwrap();
        for (a, want) in [(A2, 1.632993161855452), (A1, 0.942809041582063)] {
            let e = edge_coefficient(&Profile::envelope(&g, a, Method::External)).unwrap();
            assert!((e.estimate - want).abs() < 1e-9, "{} vs {want}", e.estimate);
        }
        let coarse = Grid::uniform(101, 0.5).unwrap();
        assert!(matches!(edge_coefficient(&Profile::envelope(&coarse, A2, Method::External)), Err(Error::Resolution(_))));
    }

    #[test]
    fn correction_exponent_root() {
        let q = edge_correction_exponent();
        assert!((4.0 * q * q + 2.0 * q - 3.0).abs() < 1e-15);
    }

    #[test]
    fn physical_envelope_identity_frame() {
        let f = PhysicalFrame::new(1.0, 1.0).unwrap();
        assert_eq!(f.w, 0.5);
        let (lo, hi) = physical_envelope(0.2, 0.0, &f).unwrap();
        let (a, b) = envelope_eval(0.2).unwrap();
        assert!((lo - a).abs() < 1e-15 && (hi - b).abs() < 1e-15);
        assert_eq!(physical_envelope(0.0, 0.0, &f).unwrap(), (0.0, 0.0));
        assert!(physical_envelope(0.6, 0.0, &f).is_err());
        assert_eq!(PhysicalFrame::new(1.0, 2.0).unwrap().w, 2.0);
    }

    #[test]
    fn physical_envelope_upper_coefficient_matches_edge() {
        let f = PhysicalFrame::new(1.0, 1.0).unwrap();
        let x = f.s2(0.0) - 1e-8;
        let (_, hi) = physical_envelope(x, 0.0, &f).unwrap();
        assert!((hi / (f.s2(0.0) - x).powf(1.5) - EDGE_COEFFICIENT).abs() < 1e-6);
        assert!((corrected_coeffs()[1] - EDGE_COEFFICIENT).abs() < 1e-15);
    }
}
