//! Check records and the end-to-end validation ledger.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    edge_coefficient, envelope_check, envelope_slope_norm, gate_thresholds, lemma_gate, mass_and_slope_stats, A1, A2,
};
use crate::green_kernel::{kernel_row_integrals, representation_check, GreenKernel};
use crate::io;
use crate::profile::{self, profile_diagnostics, solve_collocation, CollocationConfig, CollocationReport, Method, Profile};
use crate::simulator::{run_simulation, Perturbation, SimConfig, SimulationResult};
use crate::{Grid, Result, D_TRAVELING, EDGE_COEFFICIENT};

/// One pass/fail line of a ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// Comparison bound; `None` for report-only entries.
    pub threshold: Option<f64>,
    pub relation: Relation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Report,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value <= threshold, value, threshold: Some(threshold), relation: Relation::AtMost }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value >= threshold, value, threshold: Some(threshold), relation: Relation::AtLeast }
    }

    pub fn report(name: &str, value: f64) -> Self {
        Self { name: name.into(), passed: true, value, threshold: None, relation: Relation::Report }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            passed: ok,
            value: if ok { 1.0 } else { 0.0 },
            threshold: Some(1.0),
            relation: Relation::AtLeast,
        }
    }
}

/// Which criteria `validate` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Kernel, profile and bounds criteria only.
    Fast,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Not run in this mode; does not count against the overall pass.
    Skipped,
}

/// One acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u32,
    pub description: String,
    /// Headline number; `None` when skipped or when the computation failed.
    pub measured: Option<f64>,
    pub expected: String,
    pub tolerance: f64,
    pub status: Status,
    pub pass: bool,
    pub elapsed_ms: f64,
    /// Every sub-check behind the headline, including report-only ones.
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mode: Mode,
    pub criteria: Vec<Criterion>,
    pub total_ms: f64,
    pub pass: bool,
}

/// Acceptance tolerances, pinned here so that reports and tests share them.
pub mod tol {
    pub const CLOSED_VS_QUADRATURE: f64 = 1e-10;
    pub const BOUNDARY_ROWS: f64 = 1e-14;
    pub const REPRESENTATION: f64 = 1e-10;
    pub const PRINTED_SIGN_DEVIATION: f64 = 0.03125;
    pub const PROFILE_AGREEMENT: f64 = 1e-5;
    pub const AGREEMENT_WINDOW: (f64, f64) = (0.01, 0.49);
    pub const RESIDUAL: f64 = 1e-6;
    pub const ENVELOPE_SLACK: f64 = 1e-8;
    pub const SLOPE_AT_D: f64 = 1e-3;
    pub const EDGE: f64 = 0.01;
    pub const CLOSED_FORM: f64 = 1e-12;
    pub const STATIONARY_DRIFT: f64 = 0.02;
    pub const DRIFT_REDUCTION: f64 = 1.5;
    pub const BALANCE: f64 = 0.01;
    pub const DISSIPATION: f64 = 0.02;
    pub const MASS: f64 = 1e-10;
    pub const FIRST_BOUND: f64 = 0.288675;
    /// Second-branch failure is expected once `t` exceeds this.
    pub const SECOND_BRANCH_ONSET: f64 = 0.0417;
    pub const PROFILE_NODES: usize = 2001;
    pub const PERTURB_AMP: f64 = 0.05;
}

/// Profiles and runs shared between criteria, built on first use.
#[derive(Default)]
struct Context {
    profiles: Option<Profiles>,
    runs: Option<Runs>,
}

struct Profiles {
    kernel: Profile,
    shoot: Profile,
    colloc: Profile,
    colloc_report: CollocationReport,
}

struct Runs {
    stationary: SimulationResult,
    stationary_fine: SimulationResult,
    perturbed: SimulationResult,
    elapsed_400_ms: f64,
}

impl Context {
    fn profiles(&mut self) -> Result<&Profiles> {
        if self.profiles.is_none() {
            let grid = Grid::standard(tol::PROFILE_NODES)?;
            let kernel = profile::solve(Method::Kernel, &grid, 1e6)?;
            let shoot = profile::solve(Method::Shoot, &grid, 1e6)?;
            let (colloc, colloc_report) =
                solve_collocation(&grid, &profile::envelope_midpoint(&grid), &CollocationConfig::default())?;
            self.profiles = Some(Profiles { kernel, shoot, colloc, colloc_report });
        }
        Ok(self.profiles.as_ref().expect("just built"))
    }

    fn runs(&mut self) -> Result<&Runs> {
        if self.runs.is_none() {
            let wave = self.profiles()?.shoot.clone();
            let base = SimConfig::default();
            let clock = Instant::now();
            let stationary = run_simulation(&base, &wave)?;
            let elapsed_400_ms = ms(clock);
            let stationary_fine = run_simulation(&SimConfig { n: 2 * base.n, ..base.clone() }, &wave)?;
            let perturbed = run_simulation(
                &SimConfig { perturbation: Perturbation::Sine { amp: tol::PERTURB_AMP, mode: 1 }, ..base },
                &wave,
            )?;
            self.runs = Some(Runs { stationary, stationary_fine, perturbed, elapsed_400_ms });
        }
        Ok(self.runs.as_ref().expect("just built"))
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Headline, expectation, tolerance and sub-checks of one criterion.
struct Outcome {
    measured: f64,
    expected: String,
    tolerance: f64,
    checks: Vec<Check>,
}

const DESCRIPTIONS: [&str; 10] = [
    "kernel closed forms match quadrature; boundary rows vanish",
    "representation oracle reproduces the cubic; the opposite sign is off by 0.03125",
    "kernel, shooting and collocation profiles agree; ODE residuals small",
    "profile lies between the two envelopes with one slope sign change",
    "edge coefficient phi/(d-eta)^(3/2) tends to sqrt(8/3)",
    "mass interval, envelope slope norms and coefficient gate thresholds",
    "simulated wave stays stationary and the drift shrinks under refinement",
    "discrete energy balance, dissipation level and mass conservation",
    "first-branch error bound holds; second-branch failure recorded",
    "rerunning the checks gives identical results",
];

fn criterion_1() -> Result<Outcome> {
    let k = GreenKernel::default();
    let d = D_TRAVELING;
    let pts: Vec<f64> = (0..101).map(|i| d * i as f64 / 100.0).collect();
    let mut closed_vs_quad = 0.0f64;
    let mut boundary = 0.0f64;
    for &e in &pts {
        let (l, r) = kernel_row_integrals(e)?;
        let (lq, rq) = k.row_integrals_quadrature(e);
        closed_vs_quad = closed_vs_quad.max((l - lq).abs()).max((r - rq).abs());
        boundary = boundary
            .max(k.eval_unchecked(0.0, e).abs())
            .max(k.deriv_unchecked(0.0, e).abs())
            .max(k.eval_unchecked(d, e).abs());
    }
    Ok(Outcome {
        measured: closed_vs_quad,
        expected: "0".into(),
        tolerance: tol::CLOSED_VS_QUADRATURE,
        checks: vec![
            Check::at_most("closed_form_vs_quadrature", closed_vs_quad, tol::CLOSED_VS_QUADRATURE),
            Check::at_most("boundary_rows", boundary, tol::BOUNDARY_ROWS),
        ],
    })
}

fn criterion_2() -> Result<Outcome> {
    let minus = representation_check(6.0, 0.0, -1.0, 101)?;
    let plus = representation_check(6.0, 0.0, 1.0, 101)?;
    let plus_gap = (plus.value_at_mid - plus.exact_at_mid).abs();
    Ok(Outcome {
        measured: minus.max_deviation,
        expected: "u(0.25) = 0.109375 reproduced".into(),
        tolerance: tol::REPRESENTATION,
        checks: vec![
            Check::at_most("sign_minus_max_deviation", minus.max_deviation, tol::REPRESENTATION),
            Check::at_most("sign_minus_value_at_quarter", (minus.value_at_mid - 0.109375).abs(), tol::REPRESENTATION),
            Check::at_most(
                "sign_plus_deviation_is_1_32",
                (plus_gap - tol::PRINTED_SIGN_DEVIATION).abs(),
                tol::CLOSED_FORM,
            ),
            Check::report("sign_plus_deviation_at_quarter", plus_gap),
        ],
    })
}

fn criterion_3(cx: &mut Context) -> Result<Outcome> {
    let p = cx.profiles()?;
    let (lo, hi) = tol::AGREEMENT_WINDOW;
    let dist = |a: &Profile, b: &Profile| a.sup_distance(b, lo, hi).max(b.sup_distance(a, lo, hi));
    let pairs = [
        ("shoot_vs_collocation", dist(&p.shoot, &p.colloc)),
        ("shoot_vs_kernel", dist(&p.shoot, &p.kernel)),
        ("collocation_vs_kernel", dist(&p.colloc, &p.kernel)),
    ];
    let mut checks: Vec<Check> = pairs.iter().map(|(n, v)| Check::at_most(n, *v, tol::PROFILE_AGREEMENT)).collect();
    let ds = profile_diagnostics(&p.shoot);
    checks.push(Check::at_most("shoot_residual_ode3", ds.residual_ode3_sup, tol::RESIDUAL));
    checks.push(Check::at_most("shoot_residual_first_integral", ds.residual_first_integral_sup, tol::RESIDUAL));
    let dc = profile_diagnostics(&p.colloc);
    checks.push(Check::flag("collocation_converged", p.colloc_report.converged));
    checks.push(Check::report("collocation_residual_ode3", dc.residual_ode3_sup));
    checks.push(Check::report("collocation_residual_first_integral", dc.residual_first_integral_sup));
    checks.push(Check::report("collocation_discrete_residual", p.colloc_report.residual));
    checks.push(Check::report("collocation_consistency_mu_minus_1", p.colloc_report.mu - 1.0));
    let dk = profile_diagnostics(&p.kernel);
    checks.push(Check::report("kernel_residual_ode3", dk.residual_ode3_sup));
    checks.push(Check::report("kernel_residual_first_integral", dk.residual_first_integral_sup));
    Ok(Outcome {
        measured: pairs.iter().map(|x| x.1).fold(0.0, f64::max),
        expected: "pairwise sup distance on [0.01, 0.49]".into(),
        tolerance: tol::PROFILE_AGREEMENT,
        checks,
    })
}

fn criterion_4(cx: &mut Context) -> Result<Outcome> {
    let p = cx.profiles()?;
    let env = envelope_check(&p.shoot);
    let diag = profile_diagnostics(&p.shoot);
    let mut checks = vec![
        Check::at_least("lower_margin", env.min_lower_margin, -tol::ENVELOPE_SLACK),
        Check::at_least("upper_margin", env.min_upper_margin, -tol::ENVELOPE_SLACK),
        Check::flag("one_slope_sign_change", diag.dphi_sign_changes == 1),
        Check::at_most("abs_dphi_at_d", diag.dphi_at_d.abs(), tol::SLOPE_AT_D),
    ];
    for (name, q) in [("collocation", &p.colloc), ("kernel", &p.kernel)] {
        let e = envelope_check(q);
        checks.push(Check::report(&format!("{name}_lower_margin"), e.min_lower_margin));
        checks.push(Check::report(&format!("{name}_upper_margin"), e.min_upper_margin));
    }
    Ok(Outcome {
        measured: env.min_lower_margin.min(env.min_upper_margin),
        expected: ">= 0".into(),
        tolerance: tol::ENVELOPE_SLACK,
        checks,
    })
}

fn criterion_5(cx: &mut Context) -> Result<Outcome> {
    let p = cx.profiles()?;
    let e = edge_coefficient(&p.shoot)?;
    let mut checks = vec![Check::at_most("edge_error", (e.estimate - EDGE_COEFFICIENT).abs(), tol::EDGE)];
    if let Ok(c) = edge_coefficient(&p.colloc) {
        checks.push(Check::report("collocation_edge_estimate", c.estimate));
    }
    Ok(Outcome { measured: e.estimate, expected: format!("{EDGE_COEFFICIENT:.6}"), tolerance: tol::EDGE, checks })
}

fn criterion_6(cx: &mut Context) -> Result<Outcome> {
    let p = cx.profiles()?;
    let d = D_TRAVELING;
    let (mass, slope) = mass_and_slope_stats(&p.shoot);
    let gates = gate_thresholds(d);
    let exact = gates == [8.0 / 9.0, 5.0 / 3.0, 8.0 / 3.0];
    let disagreements = [0.5, 0.9, 1.3, 1.8, 1.9, 2.4, 2.6, 3.0, 3.3, 4.0]
        .iter()
        .map(|&a| lemma_gate(a).map(|g| !g.agree))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&x| x)
        .count();
    let cf = tol::CLOSED_FORM;
    Ok(Outcome {
        measured: mass.value,
        expected: "[0.0190476, 0.0329914]".into(),
        tolerance: 0.0,
        checks: vec![
            Check::flag("mass_in_interval", mass.within),
            Check::at_most("mass_lower_endpoint", (mass.interval[0] - 2.0 / 105.0).abs(), cf),
            Check::at_most("mass_upper_endpoint", (mass.interval[1] - 2.0 * 3f64.sqrt() / 105.0).abs(), cf),
            Check::at_most("slope_norm_lower_envelope", (envelope_slope_norm(A1, d) - 1.0 / 24.0).abs(), cf),
            Check::at_most("slope_norm_upper_envelope", (envelope_slope_norm(A2, d) - 1.0 / 8.0).abs(), cf),
            Check::flag("gate_thresholds_exact", exact),
            Check::at_most("gate_scan_disagreements", disagreements as f64, 0.0),
            Check::report("slope_norm", slope.value),
            Check::report("slope_norm_at_most_1_24", if slope.satisfied { 1.0 } else { 0.0 }),
        ],
    })
}

fn max_drift(r: &SimulationResult) -> f64 {
    r.ledger.rows.iter().map(|x| x.sup_error_vs_wave).fold(0.0, f64::max) / r.peak
}

fn criterion_7(cx: &mut Context) -> Result<Outcome> {
    let r = cx.runs()?;
    let coarse = max_drift(&r.stationary);
    let fine = max_drift(&r.stationary_fine);
    Ok(Outcome {
        measured: coarse,
        expected: "<= 0.02 of peak".into(),
        tolerance: tol::STATIONARY_DRIFT,
        checks: vec![
            Check::at_most("relative_drift_n400", coarse, tol::STATIONARY_DRIFT),
            Check::at_least("drift_reduction_n800", coarse / fine, tol::DRIFT_REDUCTION),
            Check::report("relative_drift_n800", fine),
            Check::report("runtime_ms_n400", r.elapsed_400_ms),
        ],
    })
}

fn criterion_8(cx: &mut Context) -> Result<Outcome> {
    let r = cx.runs()?;
    let st = &r.stationary;
    let floor = 0.5 * st.config.frame.v * st.config.frame.theta.powi(2);
    let diss = st.ledger.rows.iter().map(|x| (x.dissipation - floor).abs() / floor).fold(0.0, f64::max);
    let e0 = st.ledger.rows[0].energy;
    let e_change = st.ledger.rows.iter().map(|x| (x.energy - e0).abs() / e0).fold(0.0, f64::max);
    let worst = st.balance.max.max(r.perturbed.balance.max);
    Ok(Outcome {
        measured: worst,
        expected: "<= 1% relative".into(),
        tolerance: tol::BALANCE,
        checks: vec![
            Check::at_most("balance_stationary", st.balance.max, tol::BALANCE),
            Check::at_most("balance_perturbed", r.perturbed.balance.max, tol::BALANCE),
            Check::at_most("dissipation_vs_half", diss, tol::DISSIPATION),
            Check::at_most("mass_drift_stationary", st.max_mass_drift, tol::MASS),
            Check::at_most("mass_drift_perturbed", r.perturbed.max_mass_drift, tol::MASS),
            Check::at_least("min_height_stationary", st.min_height, 0.0),
            Check::at_least("min_height_perturbed", r.perturbed.min_height, 0.0),
            Check::report("stationary_energy_relative_change", e_change),
        ],
    })
}

fn criterion_9(cx: &mut Context) -> Result<Outcome> {
    let r = cx.runs()?;
    let st = &r.stationary.theorem3;
    let pt = &r.perturbed.theorem3;
    let t_end = r.stationary.config.t_end;
    let onset = st.second_fails_from;
    let onset_ok = onset.is_some_and(|t| t > tol::SECOND_BRANCH_ONSET && t <= t_end);
    Ok(Outcome {
        measured: st.first_bound,
        expected: format!("{}", tol::FIRST_BOUND),
        tolerance: 1e-6,
        checks: vec![
            Check::at_most("first_bound_value", (st.first_bound - tol::FIRST_BOUND).abs(), 1e-6),
            Check::flag("first_bound_stationary", st.first_bound_holds),
            Check::flag("first_bound_perturbed", pt.first_bound_holds),
            Check::flag("second_branch_fails_after_onset", onset_ok),
            Check::report("second_branch_fails_from", onset.unwrap_or(f64::NAN)),
            Check::report("perturbed_second_branch_fails_from", pt.second_fails_from.unwrap_or(f64::NAN)),
        ],
    })
}

fn finish(id: u32, outcome: Result<Outcome>, elapsed_ms: f64) -> Criterion {
    let description = DESCRIPTIONS[id as usize - 1].to_string();
    match outcome {
        Ok(o) => {
            let pass = o.checks.iter().all(|c| c.passed);
            Criterion {
                id,
                description,
                measured: Some(o.measured),
                expected: o.expected,
                tolerance: o.tolerance,
                status: if pass { Status::Pass } else { Status::Fail },
                pass,
                elapsed_ms,
                checks: o.checks,
                error: None,
            }
        }
        Err(e) => Criterion {
            id,
            description,
            measured: None,
            expected: String::new(),
            tolerance: 0.0,
            status: Status::Fail,
            pass: false,
            elapsed_ms,
            checks: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

fn skipped(id: u32) -> Criterion {
    Criterion {
        id,
        description: DESCRIPTIONS[id as usize - 1].to_string(),
        measured: None,
        expected: String::new(),
        tolerance: 0.0,
        status: Status::Skipped,
        pass: true,
        elapsed_ms: 0.0,
        checks: Vec::new(),
        error: None,
    }
}

/// Criteria 1 to 9 plus digests of the CSV artifacts they produced.
fn evaluate(mode: Mode) -> (Vec<Criterion>, Vec<String>) {
    let mut cx = Context::default();
    let mut out = Vec::new();
    for id in 1..=9u32 {
        if mode == Mode::Fast && id >= 7 {
            out.push(skipped(id));
            continue;
        }
        let clock = Instant::now();
        let o = match id {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(&mut cx),
            4 => criterion_4(&mut cx),
            5 => criterion_5(&mut cx),
            6 => criterion_6(&mut cx),
            7 => criterion_7(&mut cx),
            8 => criterion_8(&mut cx),
            _ => criterion_9(&mut cx),
        };
        out.push(finish(id, o, ms(clock)));
    }
    let mut digests = Vec::new();
    if let Some(p) = &cx.profiles {
        for q in [&p.kernel, &p.shoot, &p.colloc] {
            digests.push(io::sha256_hex(&io::profile_csv(q)));
        }
    }
    if let Some(r) = &cx.runs {
        for s in [&r.stationary, &r.stationary_fine, &r.perturbed] {
            digests.push(io::sha256_hex(&io::ledger_csv(&s.ledger)));
        }
    }
    (out, digests)
}

fn without_timing(c: &[Criterion]) -> Vec<u8> {
    let mut c = c.to_vec();
    for x in &mut c {
        x.elapsed_ms = 0.0;
        x.checks.retain(|k| !k.name.starts_with("runtime"));
    }
    io::json_bytes(&c)
}

/// Runs the acceptance criteria. Criterion 10 evaluates everything a
/// second time and compares the serialized results and CSV digests.
pub fn validate(mode: Mode) -> ValidationReport {
    let clock = Instant::now();
    let (first, digests) = evaluate(mode);
    let (second, digests_again) = evaluate(mode);
    let t10 = Instant::now();
    let same_report = without_timing(&first) == without_timing(&second);
    let same_files = digests == digests_again;
    let mismatches = (!same_report) as u32 + (!same_files) as u32;
    let c10 = finish(
        10,
        Ok(Outcome {
            measured: mismatches as f64,
            expected: "0 mismatches".into(),
            tolerance: 0.0,
            checks: vec![
                Check::flag("report_identical", same_report),
                Check::flag("csv_digests_identical", same_files),
                Check::report("artifacts_compared", digests.len() as f64),
            ],
        }),
        ms(t10),
    );
    let mut criteria = first;
    criteria.push(c10);
    let pass = criteria.iter().all(|c| c.pass);
    ValidationReport { mode, criteria, total_ms: ms(clock), pass }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_relations() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_least("a", 0.5, 1.0).passed);
        assert!(!Check::flag("a", false).passed);
        let r = Check::report("a", f64::NAN);
        assert!(r.passed && r.threshold.is_none());
    }

    #[test]
    fn closed_form_criteria_pass() {
        for o in [criterion_1().unwrap(), criterion_2().unwrap()] {
            assert!(o.checks.iter().all(|c| c.passed), "{:?}", o.checks);
        }
    }

    #[test]
    fn fast_mode_lists_every_id_once() {
        let r = validate(Mode::Fast);
        let ids: Vec<u32> = r.criteria.iter().map(|c| c.id).collect();
        assert_eq!(ids, (1..=10).collect::<Vec<_>>());
        for c in &r.criteria {
            assert_eq!(c.status == Status::Skipped, (7..=9).contains(&c.id));
        }
        assert_eq!(r.pass, r.criteria.iter().all(|c| c.pass));
    }

    #[test]
    fn errors_become_failed_criteria() {
        let c = finish(3, Err(crate::Error::Config("boom".into())), 1.0);
        assert!(!c.pass && c.status == Status::Fail && c.measured.is_none());
        assert_eq!(c.error.as_deref(), Some("invalid configuration: boom"));
    }
}
