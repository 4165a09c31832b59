//! Discretized η-domain `[0, d]`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, D_TRAVELING};

/// Smallest admissible node count for any profile grid.
pub const MIN_NODES: usize = 101;

/// How nodes are distributed over `[0, d]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    /// Power grading toward both endpoints: `eta = d * s^g / (s^g + (1 - s)^g)`
    /// for uniformly spaced `s`, so the spacing near each end scales like `s^(g-1)`.
    Power { gamma: f64 },
    /// Coordinates supplied from outside, e.g. read back from a file.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    d: f64,
    nodes: Vec<f64>,
    grading: Grading,
}

impl Grid {
    pub fn uniform(n_nodes: usize, d: f64) -> Result<Self> {
        Self::build(n_nodes, d, Grading::Uniform)
    }

    pub fn graded(n_nodes: usize, d: f64, gamma: f64) -> Result<Self> {
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(Error::Grid(format!("grading exponent must be >= 1, got {gamma}")));
        }
        Self::build(n_nodes, d, Grading::Power { gamma })
    }

    /// The default grid used by the profile solvers: `n_nodes` on `[0, 1/2]`
    /// graded with exponent 1.5.
    pub fn standard(n_nodes: usize) -> Result<Self> {
        Self::graded(n_nodes, D_TRAVELING, 1.5)
    }

    pub fn build(n_nodes: usize, d: f64, grading: Grading) -> Result<Self> {
        if n_nodes < MIN_NODES {
            return Err(Error::Grid(format!(
                "need at least {MIN_NODES} nodes, got {n_nodes}"
            )));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Grid(format!("domain length must be positive, got {d}")));
        }
        let n = n_nodes - 1;
        let mut nodes: Vec<f64> = (0..=n)
            .map(|i| {
                let s = i as f64 / n as f64;
                match grading {
                    Grading::Uniform | Grading::Explicit => d * s,
                    Grading::Power { gamma } => {
                        let a = s.powf(gamma);
                        let b = (1.0 - s).powf(gamma);
                        d * a / (a + b)
                    }
                }
            })
            .collect();
        nodes[0] = 0.0;
        nodes[n] = d;
        Self::from_nodes(nodes, grading)
    }

    /// Wraps explicit coordinates; they must start at 0 and increase strictly.
    pub fn from_nodes(nodes: Vec<f64>, grading: Grading) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::Grid(format!(
                "need at least {MIN_NODES} nodes, got {}",
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Grid(format!("first node must be 0, got {}", nodes[0])));
        }
        if let Some(w) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Grid(format!(
                "nodes must increase strictly (violated at index {})",
                w + 1
            )));
        }
        let d = *nodes.last().expect("non-empty");
        Ok(Self { d, nodes, grading })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    /// Index of the last node `<= eta`.
    pub fn locate(&self, eta: f64) -> usize {
        match self.nodes.partition_point(|&x| x <= eta) {
            0 => 0,
            k => (k - 1).min(self.nodes.len() - 2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        for g in [Grid::uniform(101, 0.5).unwrap(), Grid::graded(257, 0.5, 1.5).unwrap()] {
            assert_eq!(g.nodes()[0], 0.0);
            assert_eq!(*g.nodes().last().unwrap(), 0.5);
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn graded_grid_is_symmetric_and_clustered() {
        let g = Grid::graded(401, 0.5, 2.0).unwrap();
        let x = g.nodes();
        let n = x.len() - 1;
        for i in 0..=n {
            assert!((x[i] + x[n - i] - 0.5).abs() < 1e-15);
        }
        assert!(x[1] - x[0] < (x[n / 2 + 1] - x[n / 2]) / 50.0);
    }

    #[test]
    fn rejects_small_or_unsorted() {
        assert!(Grid::uniform(100, 0.5).is_err());
        let mut v: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        v.swap(5, 6);
        assert!(Grid::from_nodes(v, Grading::Uniform).is_err());
        assert!(Grid::uniform(150, -1.0).is_err());
    }

    #[test]
    fn locate_brackets() {
        let g = Grid::uniform(101, 1.0).unwrap();
        assert_eq!(g.locate(0.0), 0);
        assert_eq!(g.locate(0.015), 1);
        assert_eq!(g.locate(1.0), 99);
    }
}
