//! The `ridgewave` command line: argument parsing, config resolution,
//! dispatch and file output.
//!
//! Exit codes: 0 success, 1 failed checks or a solver that gave up, 2 bad
//! input (usage, config, missing or malformed files, unwritable paths).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{bounds_report, PhysicalFrame};
use crate::green_kernel::selftest;
use crate::profile::{self, Method, Profile};
use crate::simulator::{run_simulation, Perturbation, SimConfig};
use crate::validation::{self, Check, Mode, Status};
use crate::{io, Error, Grid, Result, D_TRAVELING};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Nodes of the wave profile handed to the simulator.
pub const WAVE_NODES: usize = 2001;

/// Relative mismatch in `w = theta^2 d / v` treated as rounding and fixed
/// silently apart from a warning.
const W_ROUNDING: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "ridgewave", version, about = "Thin-film traveling-wave profiles, bounds and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kernel invariants and the representation sign oracle.
    Greens {
        #[arg(long)]
        selftest: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the wave profile.
    Profile {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1e6)]
        k_max: f64,
        #[arg(long, default_value = "profile.csv")]
        out: PathBuf,
    },
    /// Envelope, edge and functional checks on a profile CSV.
    Bounds {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value = "bounds.json")]
        out: PathBuf,
    },
    /// Moving-frame simulation from a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Run the acceptance criteria.
    Validate {
        #[arg(long)]
        fast: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Kernel,
    Shoot,
    Collocate,
    All,
}

impl MethodArg {
    fn solvers(self) -> Vec<Method> {
        match self {
            MethodArg::Kernel => vec![Method::Kernel],
            MethodArg::Shoot => vec![Method::Shoot],
            MethodArg::Collocate => vec![Method::Collocation],
            MethodArg::All => vec![Method::Kernel, Method::Shoot, Method::Collocation],
        }
    }
}

/// Provenance block embedded in every JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Fully resolved configuration, defaults included.
    pub config: Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub version: String,
    /// SHA-256 of the compact JSON of `config`.
    pub config_digest: String,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: Value) -> Self {
        let config_digest = io::sha256_hex(&serde_json::to_vec(&config).expect("json values serialize"));
        Self {
            subcommand: subcommand.into(),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_digest,
            warnings: Vec::new(),
        }
    }

    fn input(mut self, key: &str, path: &Path) -> Self {
        self.inputs.insert(key.into(), path.display().to_string());
        self
    }

    fn output(mut self, key: &str, path: &Path) -> Self {
        self.outputs.insert(key.into(), path.display().to_string());
        self
    }
}

/// A report with the manifest attached at the top level.
#[derive(Serialize)]
struct WithManifest<'a, T: Serialize> {
    #[serde(flatten)]
    report: &'a T,
    manifest: &'a RunManifest,
}

fn write_json<T: Serialize>(path: &Path, report: &T, manifest: &RunManifest) -> Result<()> {
    io::write_file(path, &io::json_bytes(&WithManifest { report, manifest }))
}

/// `[sim]` table of a simulation config. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub n: Option<usize>,
    pub w: Option<f64>,
    pub v: Option<f64>,
    pub theta: Option<f64>,
    pub eps: Option<f64>,
    pub dt0: Option<f64>,
    pub t_end: Option<f64>,
    pub output_every: Option<f64>,
    pub perturb_amp: Option<f64>,
    /// Wavenumber of the sine perturbation.
    pub perturb_mode: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    sim: SimSection,
}

/// Parses TOML text into a validated config plus warnings about values
/// that were derived to keep `w = theta^2 d / v`.
pub fn parse_sim_config(text: &str) -> Result<(SimConfig, Vec<String>)> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    resolve_sim(&file.sim)
}

pub fn resolve_sim(s: &SimSection) -> Result<(SimConfig, Vec<String>)> {
    let d = D_TRAVELING;
    let mut warnings = Vec::new();
    let positive = |name: &str, x: Option<f64>| match x {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::Config(format!("{name} must be positive, got {x}"))),
        _ => Ok(()),
    };
    positive("w", s.w)?;
    positive("v", s.v)?;
    positive("theta", s.theta)?;

    let (mut v, mut theta) = (s.v.unwrap_or(1.0), s.theta.unwrap_or(1.0));
    if let Some(w) = s.w {
        match (s.theta, s.v) {
            (Some(_), Some(_)) => {
                let want = theta * theta * d / v;
                let rel = (w - want).abs() / want;
                if rel > W_ROUNDING {
                    return Err(Error::Config(format!(
                        "contradictory keys: w = {w} but theta^2 d / v = {want} (theta = {theta}, v = {v})"
                    )));
                }
                if rel > 0.0 {
                    warnings.push(format!("w corrected from {w} to theta^2 d / v = {want}"));
                }
            }
            (Some(_), None) => {
                v = theta * theta * d / w;
                warnings.push(format!("v derived from w and theta: v = {v}"));
            }
            (None, _) => {
                theta = (w * v / d).sqrt();
                warnings.push(format!("theta derived from w and v: theta = {theta}"));
            }
        }
    }
    let frame = PhysicalFrame::new(v, theta)?;

    let base = SimConfig::default();
    let perturbation = match s.perturb_amp {
        Some(amp) if amp != 0.0 => Perturbation::Sine { amp, mode: s.perturb_mode.unwrap_or(1) },
        _ => {
            if s.perturb_mode.is_some() {
                warnings.push("perturb_mode ignored because perturb_amp is 0 or absent".into());
            }
            Perturbation::None
        }
    };
    let dt0 = s.dt0.unwrap_or(base.dt0);
    let cfg = SimConfig {
        frame,
        n: s.n.unwrap_or(base.n),
        eps: s.eps.unwrap_or(base.eps),
        dt0,
        dt_min: base.dt_min.min(dt0),
        dt_max: base.dt_max.max(dt0),
        t_end: s.t_end.unwrap_or(base.t_end),
        output_every: s.output_every.unwrap_or(base.output_every),
        perturbation,
    };
    cfg.validate()?;
    Ok((cfg, warnings))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Missing(_)
        | Error::Malformed { .. }
        | Error::Io { .. }
        | Error::Grid(_)
        | Error::Domain(_)
        | Error::ClosedFormUnavailable(_) => EXIT_INPUT,
        _ => EXIT_FAILED,
    }
}

/// Parses `args` (program name first), runs the subcommand and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
        }
    };
    let outcome = match cli.command {
        Command::Greens { selftest, out } => greens(selftest, out.as_deref()),
        Command::Profile { method, n, k_max, out } => profile_cmd(method, n, k_max, &out),
        Command::Bounds { profile, out } => bounds_cmd(&profile, &out),
        Command::Simulate { config, outdir } => simulate_cmd(&config, &outdir),
        Command::Validate { fast, out } => validate_cmd(fast, out.as_deref()),
    };
    match outcome {
        Ok(passed) if passed => EXIT_OK,
        Ok(_) => EXIT_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        let verdict = if c.threshold.is_none() {
            "info"
        } else if c.passed {
            "ok"
        } else {
            "FAIL"
        };
        println!("{verdict:>4}  {:<44} {:.6e}", c.name, c.value);
    }
}

fn greens(selftest_flag: bool, out: Option<&Path>) -> Result<bool> {
    if !selftest_flag {
        return Err(Error::Config("greens needs --selftest".into()));
    }
    let report = selftest()?;
    print_checks(&report.checks);
    if let Some(out) = out {
        let manifest = RunManifest::new("greens", json!({ "selftest": true })).output("report", out);
        write_json(out, &report, &manifest)?;
    }
    Ok(report.passed)
}

fn profile_cmd(method: MethodArg, n: usize, k_max: f64, out: &Path) -> Result<bool> {
    if !(k_max > 0.0 && k_max.is_finite()) {
        return Err(Error::Config(format!("k-max must be positive and finite, got {k_max}")));
    }
    let grid = Grid::standard(n)?;
    let mut solved: Vec<(Method, Profile)> = Vec::new();
    for m in method.solvers() {
        solved.push((m, profile::solve(m, &grid, k_max)?));
    }
    if method != MethodArg::All {
        io::write_file(out, &io::profile_csv(&solved[0].1))?;
        println!("wrote {} ({} rows, method {})", out.display(), n, solved[0].0.as_str());
        return Ok(true);
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("profile");
    for (m, p) in &solved {
        let tag = if *m == Method::Collocation { "collocate" } else { m.as_str() };
        let path = out.with_file_name(format!("{stem}_{tag}.csv"));
        io::write_file(&path, &io::profile_csv(p))?;
        if *m == Method::Shoot {
            io::write_file(out, &io::profile_csv(p))?;
        }
    }
    let (lo, hi) = validation::tol::AGREEMENT_WINDOW;
    let mut ok = true;
    for i in 0..solved.len() {
        for j in i + 1..solved.len() {
            let (a, b) = (&solved[i].1, &solved[j].1);
            let dist = a.sup_distance(b, lo, hi).max(b.sup_distance(a, lo, hi));
            ok &= dist <= validation::tol::PROFILE_AGREEMENT;
            println!("{:>11} vs {:<11} sup distance {dist:.3e}", solved[i].0.as_str(), solved[j].0.as_str());
        }
    }
    println!("wrote {} (shooting) and per-method files", out.display());
    Ok(ok)
}

fn bounds_cmd(profile_path: &Path, out: &Path) -> Result<bool> {
    let bytes = std::fs::read(profile_path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => Error::Missing(profile_path.display().to_string()),
        _ => Error::Io { path: profile_path.to_path_buf(), source },
    })?;
    let p = io::read_profile_csv(profile_path)?;
    let report = bounds_report(&p)?;
    let manifest = RunManifest::new("bounds", json!({ "profile_sha256": io::sha256_hex(&bytes) }))
        .input("profile", profile_path)
        .output("report", out);
    write_json(out, &report, &manifest)?;
    let e = &report.envelope;
    println!("envelope margins  lower {:.3e}  upper {:.3e}", e.min_lower_margin, e.min_upper_margin);
    println!("edge coefficient  {:.6}", report.edge_coefficient.estimate);
    println!("mass              {:.7} in [{:.7}, {:.7}]", report.mass.value, report.mass.interval[0], report.mass.interval[1]);
    println!("slope norm        {:.7} (<= 1/24: {})", report.slope_norm.value, report.slope_norm.satisfied);
    Ok(report.passed)
}

#[derive(Serialize)]
struct SimSummary<'a> {
    theorem3: &'a crate::simulator::Theorem3Report,
    balance: &'a crate::simulator::BalanceSummary,
    accepted_steps: usize,
    retries: usize,
    max_mass_drift: f64,
    min_height: f64,
    final_drift: f64,
    peak: f64,
    snapshots: usize,
    checks: Vec<Check>,
    passed: bool,
}

fn simulate_cmd(config: &Path, outdir: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(config).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => Error::Missing(config.display().to_string()),
        _ => Error::Io { path: config.to_path_buf(), source },
    })?;
    let (cfg, warnings) = parse_sim_config(&text)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let wave = profile::reference_profile(WAVE_NODES)?;
    let res = run_simulation(&cfg, &wave)?;

    let xi = cfg.nodes();
    for (k, s) in res.snapshots.iter().enumerate() {
        io::write_file(&io::snapshot_path(outdir, k), &io::snapshot_csv(&xi, s))?;
    }
    let ledger = outdir.join("ledger.csv");
    io::write_file(&ledger, &io::ledger_csv(&res.ledger))?;

    let checks = vec![
        Check::at_most("mass_drift", res.max_mass_drift, validation::tol::MASS),
        Check::at_least("min_height", res.min_height, 0.0),
        Check::flag("first_bound_holds", res.theorem3.first_bound_holds),
        Check::at_most("balance_residual", res.balance.max, validation::tol::BALANCE),
    ];
    let passed = checks.iter().all(|c| c.passed);
    print_checks(&checks);
    let summary = SimSummary {
        theorem3: &res.theorem3,
        balance: &res.balance,
        accepted_steps: res.accepted_steps,
        retries: res.retries,
        max_mass_drift: res.max_mass_drift,
        min_height: res.min_height,
        final_drift: res.final_drift,
        peak: res.peak,
        snapshots: res.snapshots.len(),
        checks,
        passed,
    };
    let summary_path = outdir.join("summary.json");
    let mut manifest = RunManifest::new("simulate", json!({ "sim": cfg, "wave_nodes": WAVE_NODES }))
        .input("config", config)
        .output("ledger", &ledger)
        .output("snapshots", &io::snapshot_path(outdir, 0).with_file_name("snapshot_*.csv"))
        .output("summary", &summary_path);
    manifest.warnings = warnings;
    write_json(&summary_path, &summary, &manifest)?;
    Ok(passed)
}

fn validate_cmd(fast: bool, out: Option<&Path>) -> Result<bool> {
    let mode = if fast { Mode::Fast } else { Mode::Full };
    let report = validation::validate(mode);
    for c in &report.criteria {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "skip",
        };
        let measured = c.measured.map_or("-".to_string(), |m| format!("{m:.6e}"));
        println!("[{tag}] {:>2}  {:<80} measured {measured}", c.id, c.description);
        if let Some(e) = &c.error {
            println!("          error: {e}");
        }
        for k in c.checks.iter().filter(|k| !k.passed) {
            println!("          failed: {} = {:.6e}", k.name, k.value);
        }
    }
    println!("overall: {}", if report.pass { "PASS" } else { "FAIL" });
    if let Some(out) = out {
        let manifest = RunManifest::new("validate", json!({ "mode": mode })).output("report", out);
        write_json(out, &report, &manifest)?;
    }
    Ok(report.pass)
}
