//! Banded LU factorisation with partial pivoting.

use crate::{Error, Result};

/// A square matrix with `kl` sub- and `ku` super-diagonals, stored by
/// columns with room for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self { n, kl, ku, ld, ab: vec![0.0; ld * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + self.ld * j
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i <= j + self.kl && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.ab[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Adds `v` to entry `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band kl={} ku={}", self.kl, self.ku);
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.ab[self.idx(i, j)] * x[j];
            }
        }
        y
    }

    /// Factorises in place and solves `A x = b`, overwriting `b`.
    pub fn solve(mut self, b: &mut [f64]) -> Result<()> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        let ld = self.ld;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = ld * j;
            let mut p = 0;
            let mut best = self.ab[col + kv].abs();
            for i in 1..=km {
                let a = self.ab[col + kv + i].abs();
                if a > best {
                    best = a;
                    p = i;
                }
            }
            ipiv[j] = j + p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(j));
            }
            ju = ju.max((j + self.ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let bb = self.idx(j + p, c);
                    self.ab.swap(a, bb);
                }
            }
            let piv = self.ab[col + kv];
            for i in 1..=km {
                self.ab[col + kv + i] /= piv;
            }
            for c in j + 1..=ju {
                let a = self.ab[self.idx(j, c)];
                if a != 0.0 {
                    for i in 1..=km {
                        let l = self.ab[col + kv + i];
                        let k = self.idx(j + i, c);
                        self.ab[k] -= l * a;
                    }
                }
            }
        }
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            b.swap(j, ipiv[j]);
            let bj = b[j];
            for i in 1..=km {
                b[j + i] -= self.ab[ld * j + kv + i] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[ld * j + kv];
            let bj = b[j];
            for i in j.saturating_sub(kv)..j {
                b[i] -= self.ab[self.idx(i, j)] * bj;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_against_dense_product() {
        let n = 40;
        let (kl, ku) = (3, 2);
        let mut a = BandMatrix::zeros(n, kl, ku);
        let mut seed = 12345u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for j in 0..n {
            for i in j.saturating_sub(ku)..=(j + kl).min(n - 1) {
                a.add(i, j, rnd());
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = a.mul_vec(&x);
        a.solve(&mut b).unwrap();
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        a.add(1, 2, 1.0);
        a.add(2, 1, 1.0);
        a.add(2, 2, 1.0);
        let mut b = vec![2.0, 4.0, 5.0];
        a.solve(&mut b).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-14);
        assert!((b[1] - 2.0).abs() < 1e-14);
        assert!((b[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn reports_singular() {
        let a = BandMatrix::zeros(4, 1, 1);
        let mut b = vec![1.0; 4];
        assert!(matches!(a.solve(&mut b), Err(Error::Singular(0))));
    }
}
