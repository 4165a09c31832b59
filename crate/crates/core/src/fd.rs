//! Finite-difference weights on arbitrary node sets.

/// Fornberg's recursion: weights for derivatives `0..=order` at `z`
/// from samples at `xs`. Returns `w[k][j]`, the weight of sample `j` in
/// the `k`-th derivative.
pub fn fornberg(z: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First index of a `width`-point window centred on `z` inside `xs`.
pub fn window_start(xs: &[f64], z: f64, width: usize) -> usize {
    let n = xs.len();
    debug_assert!(width <= n);
    let i = xs.partition_point(|&x| x < z);
    i.saturating_sub(width / 2).min(n - width)
}

/// A precomputed stencil: node indices `start..start + weights[0].len()`.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub start: usize,
    pub weights: Vec<Vec<f64>>,
}

impl Stencil {
    pub fn new(xs: &[f64], z: f64, width: usize, order: usize) -> Self {
        let start = window_start(xs, z, width);
        let weights = fornberg(z, &xs[start..start + width], order);
        Self { start, weights }
    }

    pub fn width(&self) -> usize {
        self.weights[0].len()
    }

    /// Applies the `k`-th derivative weights to `f(x_j)` supplied by `values`.
    pub fn apply(&self, k: usize, values: impl Fn(usize) -> f64) -> f64 {
        self.weights[k]
            .iter()
            .enumerate()
            .map(|(j, w)| w * values(self.start + j))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_polynomials() {
        let xs = [0.0, 0.1, 0.25, 0.3, 0.55, 0.7];
        let z = 0.33;
        let w = fornberg(z, &xs, 3);
        // p(x) = x^5 - 2x^3 + x
        let p = |x: f64| x.powi(5) - 2.0 * x.powi(3) + x;
        let exact = [
            p(z),
            5.0 * z.powi(4) - 6.0 * z * z + 1.0,
            20.0 * z.powi(3) - 12.0 * z,
            60.0 * z * z - 12.0,
        ];
        for k in 0..4 {
            let approx: f64 = w[k].iter().zip(&xs).map(|(c, &x)| c * p(x)).sum();
            assert!((approx - exact[k]).abs() < 1e-9, "k={k}: {approx} vs {}", exact[k]);
        }
    }

    #[test]
    fn windows_stay_inside() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(window_start(&xs, -1.0, 4), 0);
        assert_eq!(window_start(&xs, 4.5, 4), 3);
        assert_eq!(window_start(&xs, 100.0, 4), 6);
    }
}
