//! Shape and residual diagnostics of a sampled profile.

use serde::{Deserialize, Serialize};

use crate::fd::Stencil;
use crate::profile::Profile;

/// Stencil width for derivatives of `phi'`.
const WIDTH: usize = 7;

/// Trim width as a fraction of `d`.
pub const TRIM_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub dphi_sign_changes: usize,
    pub max_eta: f64,
    pub max_phi: f64,
    pub dphi_at_0: f64,
    pub dphi_at_d: f64,
    pub trim: f64,
    pub residual_ode3_sup: f64,
    pub residual_first_integral_sup: f64,
    /// `(d - eta, phi / (d - eta)^{3/2})` for `d - eta` in `[1e-4, 1e-2] * 2d`.
    pub edge_samples: Vec<(f64, f64)>,
    #[serde(skip)]
    pub residual_ode3: Vec<f64>,
    #[serde(skip)]
    pub residual_first_integral: Vec<f64>,
}

/// Pointwise `|phi phi''' - 1|` and `|phi phi'' - phi'^2/2 - eta + d|`, with
/// `phi''` and `phi'''` differentiated from the sampled `phi'`.
pub fn pointwise_residuals(p: &Profile) -> (Vec<f64>, Vec<f64>) {
    let eta = p.eta();
    let d = p.d();
    let (phi, dphi) = (p.phi(), p.dphi());
    let width = WIDTH.min(eta.len());
    eta.iter()
        .enumerate()
        .map(|(i, &e)| {
            let s = Stencil::new(eta, e, width, 2);
            let d2 = s.apply(1, |j| dphi[j]);
            let d3 = s.apply(2, |j| dphi[j]);
            ((phi[i] * d3 - 1.0).abs(), (phi[i] * d2 - 0.5 * dphi[i] * dphi[i] - e + d).abs())
        })
        .unzip()
}

pub fn profile_diagnostics(p: &Profile) -> Diagnostics {
    let eta = p.eta();
    let d = p.d();
    let n = eta.len();
    let (phi, dphi) = (p.phi(), p.dphi());

    // Sign changes of phi' over the open interval; exact zeros are skipped.
    let mut changes = 0;
    let mut last = 0.0f64;
    for &v in &dphi[..n - 1] {
        if v != 0.0 {
            if last != 0.0 && v.signum() != last.signum() {
                changes += 1;
            }
            last = v;
        }
    }

    let imax = (0..n).max_by(|&a, &b| phi[a].total_cmp(&phi[b])).unwrap_or(0);
    let (max_eta, max_phi) = refine_max(p, imax);

    let interior: Vec<usize> = (1..n - 1).collect();
    let dphi_at_0 = slope_at_contact(&eta[1..5], &dphi[1..5]);
    // phi' ~ -c sqrt(d - eta): extrapolate linearly in sqrt(d - eta).
    let tail: Vec<usize> = interior.iter().rev().take(3).rev().copied().collect();
    let sx: Vec<f64> = tail.iter().map(|&i| (d - eta[i]).sqrt()).collect();
    let sy: Vec<f64> = tail.iter().map(|&i| dphi[i]).collect();
    let dphi_at_d = extrapolate(&sx, &sy, 0.0);

    let trim = TRIM_FRACTION * d;
    let (r3, r1) = pointwise_residuals(p);
    let mut sup3 = 0.0f64;
    let mut sup1 = 0.0f64;
    for i in 0..n {
        if eta[i] >= trim && eta[i] <= d - trim {
            sup3 = sup3.max(r3[i]);
            sup1 = sup1.max(r1[i]);
        }
    }
    let edge_samples = (0..n)
        .filter_map(|i| {
            let x = d - eta[i];
            (x >= 2e-4 * d && x <= 2e-2 * d).then(|| (x, phi[i] / x.powf(1.5)))
        })
        .collect();

    Diagnostics {
        dphi_sign_changes: changes,
        max_eta,
        max_phi,
        dphi_at_0,
        dphi_at_d,
        trim,
        residual_ode3_sup: sup3,
        residual_first_integral_sup: sup1,
        edge_samples,
        residual_ode3: r3,
        residual_first_integral: r1,
    }
}

/// Locates the zero of `phi'` next to node `imax` by Hermite interpolation.
fn refine_max(p: &Profile, imax: usize) -> (f64, f64) {
    let eta = p.eta();
    let dphi = p.dphi();
    let n = eta.len();
    let (a, b) = if imax + 1 < n && dphi[imax] > 0.0 {
        (imax, imax + 1)
    } else if imax > 0 {
        (imax - 1, imax)
    } else {
        return (eta[imax], p.phi()[imax]);
    };
    let (mut lo, mut hi) = (eta[a], eta[b]);
    if p.interpolate(lo).1 * p.interpolate(hi).1 > 0.0 {
        return (eta[imax], p.phi()[imax]);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if p.interpolate(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let m = 0.5 * (lo + hi);
    (m, p.interpolate(m).0)
}

/// Value at 0 of the interpolant of `ys` in the basis `1, x ln x, x, x^2`,
/// which matches the local expansion of `phi'` at the contact line.
fn slope_at_contact(xs: &[f64], ys: &[f64]) -> f64 {
    let a = nalgebra::Matrix4::from_fn(|r, c| {
        let x = xs[r];
        [1.0, x * x.ln(), x, x * x][c]
    });
    let b = nalgebra::Vector4::from_column_slice(&ys[..4]);
    a.lu().solve(&b).map_or(f64::NAN, |sol| sol[0])
}

/// Lagrange extrapolation through `(xs, ys)` to `x`.
fn extrapolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let w = crate::fd::fornberg(x, xs, 0);
    w[0].iter().zip(ys).map(|(w, y)| w * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Method;
    use crate::Grid;

    #[test]
    fn envelope_shape() {
        let g = Grid::standard(801).unwrap();
        let p = Profile::envelope(&g, 1.0, Method::EnvelopeMin);
        let dg = profile_diagnostics(&p);
        assert_eq!(dg.dphi_sign_changes, 1);
        assert!((dg.max_eta - 0.2).abs() < 1e-9);
        assert!(dg.dphi_at_d.abs() < 1e-5, "{}", dg.dphi_at_d);
        assert!((dg.dphi_at_0 - 0.5f64.powf(1.5)).abs() < 1e-7, "{}", dg.dphi_at_0);
        for &(x, r) in &dg.edge_samples {
            assert!((r - (0.5 - x)).abs() < 1e-8);
        }
    }

    #[test]
    fn residuals_vanish_on_a_cubic_with_matching_data() {
        // phi = 1 + eta^3/6 solves phi''' = 1 only where phi = 1; use the identity
        // with a polynomial to check the stencils instead.
        let g = Grid::uniform(201, 0.5).unwrap();
        let phi: Vec<f64> = g.nodes().iter().map(|e| e * e * e).collect();
        let dphi: Vec<f64> = g.nodes().iter().map(|e| 3.0 * e * e).collect();
        let p = Profile::new(g, phi, dphi, Method::External, None).unwrap();
        let (r3, _) = pointwise_residuals(&p);
        for (e, r) in p.eta().iter().zip(&r3) {
            assert!((r - (6.0 * e.powi(3) - 1.0).abs()).abs() < 1e-8);
        }
    }
}
