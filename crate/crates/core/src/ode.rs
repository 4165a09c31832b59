//! Adaptive Dormand–Prince 5(4) stepping for small autonomous-in-form systems.

/// Butcher tableau of the Dormand–Prince pair.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

/// One trial step of size `h` from `(t, y)`. Returns the fifth-order
/// solution and the scaled error norm (`<= 1` means acceptable), or `None`
/// if a stage evaluation produced a non-finite value.
pub fn trial_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
    tol: Tolerances,
) -> Option<([f64; N], f64)> {
    let mut k = [[0.0; N]; 7];
    for s in 0..7 {
        let mut ys = *y;
        for (r, a) in A[s].iter().enumerate().take(s) {
            for i in 0..N {
                ys[i] += h * a * k[r][i];
            }
        }
        if ys.iter().any(|v| !v.is_finite()) {
            return None;
        }
        k[s] = f(t + C[s] * h, &ys);
        if k[s].iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    let mut y5 = *y;
    let mut err = 0.0f64;
    for i in 0..N {
        let mut e = 0.0;
        for s in 0..7 {
            y5[i] += h * B5[s] * k[s][i];
            e += h * (B5[s] - B4[s]) * k[s][i];
        }
        let scale = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
        err = err.max((e / scale).abs());
    }
    Some((y5, err))
}

/// Step-size update after a trial with error norm `err`.
pub fn next_step(h: f64, err: f64) -> f64 {
    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
    h * fac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_harmonic_oscillator() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let tol = Tolerances { rtol: 1e-11, atol: 1e-14 };
        let (mut t, mut y, mut h) = (0.0f64, [1.0f64, 0.0], 1e-3f64);
        let end = 2.0 * std::f64::consts::PI;
        while t < end {
            let hh = h.min(end - t);
            let (yn, err) = trial_step(&f, t, &y, hh, tol).unwrap();
            if err <= 1.0 {
                t += hh;
                y = yn;
            }
            h = next_step(hh, err);
        }
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }
}
