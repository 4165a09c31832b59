//! Scalar quadrature used by oracles and by the product-integration rules.

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Moments `mu_m = int_0^1 s^m / (v0 + delta * s) ds` for `m = 0..=M`,
/// assuming `v0 > 0` and `v0 + delta > 0`.
pub fn reciprocal_moments<const M: usize>(v0: f64, delta: f64) -> [f64; M] {
    let mut mu = [0.0; M];
    let r = delta / v0;
    if r.abs() < 0.5 {
        // Geometric series in -r; 60 terms reach 2^-60.
        let mut pw = 1.0;
        for n in 0..60 {
            for (m, slot) in mu.iter_mut().enumerate() {
                *slot += pw / (m + n + 1) as f64;
            }
            pw *= -r;
            if pw.abs() < 1e-18 {
                break;
            }
        }
        for slot in &mut mu {
            *slot /= v0;
        }
    } else {
        mu[0] = r.ln_1p() / delta;
        for m in 1..M {
            mu[m] = (1.0 / m as f64 - v0 * mu[m - 1]) / delta;
        }
    }
    mu
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_on_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn moments_match_quadrature_in_both_branches() {
        for &(v0, dl) in &[(1.0, 0.3), (1.0, -0.2), (1e-3, 0.5), (0.5, -0.49), (2.0, 0.0)] {
            let mu = reciprocal_moments::<4>(v0, dl);
            for (m, &got) in mu.iter().enumerate() {
                let want = adaptive_simpson(&|s: f64| s.powi(m as i32) / (v0 + dl * s), 0.0, 1.0, 1e-14);
                assert!((got - want).abs() <= 1e-11 * want.abs().max(1.0), "v0={v0} dl={dl} m={m}: {got} vs {want}");
            }
        }
    }
}
