//! Traveling-wave profiles and the three solvers that produce them.

use serde::{Deserialize, Serialize};

use crate::bounds::{A1, A2};
use crate::{Error, Grid, Result};

pub mod collocation;
pub mod diagnostics;
pub mod kernel;
pub mod shooting;

pub use collocation::{solve_collocation, CollocationConfig, CollocationReport};
pub use diagnostics::{profile_diagnostics, Diagnostics};
pub use kernel::{apply_green_operator, initial_iterate, solve_kernel_iteration, KernelSolve, KernelSolveConfig};
pub use shooting::{series_start, solve_shooting, ShootConfig, ShootResult};

/// Which construction produced a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Kernel,
    Shoot,
    Collocation,
    EnvelopeMin,
    EnvelopeMax,
    /// Read back from a file of unknown origin.
    External,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Kernel => "kernel",
            Method::Shoot => "shoot",
            Method::Collocation => "collocation",
            Method::EnvelopeMin => "envelope-min",
            Method::EnvelopeMax => "envelope-max",
            Method::External => "external",
        }
    }
}

/// Samples of `phi` and `phi'` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    grid: Grid,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    method: Method,
    /// Regularisation level; `None` for the `k -> infinity` limit.
    k: Option<f64>,
}

impl Profile {
    pub fn new(grid: Grid, phi: Vec<f64>, dphi: Vec<f64>, method: Method, k: Option<f64>) -> Result<Self> {
        if phi.len() != grid.len() || dphi.len() != grid.len() {
            return Err(Error::Grid(format!(
                "profile has {} / {} samples for {} nodes",
                phi.len(),
                dphi.len(),
                grid.len()
            )));
        }
        if let Some(i) = phi.iter().chain(&dphi).position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite profile sample at position {i}")));
        }
        Ok(Self { grid, phi, dphi, method, k })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eta(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn dphi(&self) -> &[f64] {
        &self.dphi
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn k(&self) -> Option<f64> {
        self.k
    }

    pub fn d(&self) -> f64 {
        self.grid.d()
    }

    /// The envelope `a * eta * (d - eta)^{3/2}` sampled exactly.
    pub fn envelope(grid: &Grid, a: f64, method: Method) -> Self {
        let d = grid.d();
        let (phi, dphi) = grid
            .nodes()
            .iter()
            .map(|&e| {
                let x = (d - e).max(0.0);
                (a * e * x.powf(1.5), a * x.sqrt() * (d - 2.5 * e))
            })
            .unzip();
        Self { grid: grid.clone(), phi, dphi, method, k: None }
    }

    /// Piecewise cubic Hermite interpolation of `(phi, phi')`.
    pub fn interpolate(&self, eta: f64) -> (f64, f64) {
        let x = self.grid.nodes();
        if eta <= x[0] {
            return (self.phi[0], self.dphi[0]);
        }
        if eta >= x[x.len() - 1] {
            let n = x.len() - 1;
            return (self.phi[n], self.dphi[n]);
        }
        let i = self.grid.locate(eta);
        let h = x[i + 1] - x[i];
        let t = (eta - x[i]) / h;
        let (p0, p1, m0, m1) = (self.phi[i], self.phi[i + 1], self.dphi[i] * h, self.dphi[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        let dv = ((6.0 * t2 - 6.0 * t) * p0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * p1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        (v, dv)
    }

    /// Resamples onto another grid with the same `d`.
    pub fn resample(&self, grid: &Grid) -> Self {
        let (phi, dphi) = grid.nodes().iter().map(|&e| self.interpolate(e)).unzip();
        Self { grid: grid.clone(), phi, dphi, method: self.method, k: self.k }
    }

    /// Sup-norm distance to `other` over nodes of `self` inside `[lo, hi]`.
    pub fn sup_distance(&self, other: &Profile, lo: f64, hi: f64) -> f64 {
        self.eta()
            .iter()
            .zip(&self.phi)
            .filter(|(&e, _)| e >= lo && e <= hi)
            .map(|(&e, &p)| (p - other.interpolate(e).0).abs())
            .fold(0.0, f64::max)
    }
}

/// Midpoint `(A1 + A2)/2` of the two envelopes, the Newton starting guess.
pub fn envelope_midpoint(grid: &Grid) -> Profile {
    Profile::envelope(grid, 0.5 * (A1 + A2), Method::EnvelopeMax)
}

/// Runs one solver on `grid`. `k_max` only affects the kernel iteration.
pub fn solve(method: Method, grid: &Grid, k_max: f64) -> Result<Profile> {
    match method {
        Method::Kernel => Ok(solve_kernel_iteration(&KernelSolveConfig::up_to(k_max), grid)?.limit),
        Method::Shoot => Ok(solve_shooting(&ShootConfig::default(), grid)?.profile),
        Method::Collocation => {
            let (p, rep) = solve_collocation(grid, &envelope_midpoint(grid), &CollocationConfig::default())?;
            if !rep.converged {
                return Err(Error::NewtonDivergence { iterations: rep.iterations, residual: rep.residual });
            }
            Ok(p)
        }
        other => Err(Error::Config(format!("{} is not a solver", other.as_str()))),
    }
}

/// Shooting profile on the standard graded grid; the wave used by the
/// simulator and the bounds checks.
pub fn reference_profile(n_nodes: usize) -> Result<Profile> {
    solve(Method::Shoot, &Grid::standard(n_nodes)?, f64::INFINITY)
}
