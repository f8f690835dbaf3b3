//! Continuous-time rate graphs and their stationary populations.

use nalgebra::{DMatrix, DVector};

use super::NvError;

/// Directed graph of first-order transitions `from -> to` with rates in MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct RateGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl RateGraph {
    pub fn new(n: usize) -> Self {
        RateGraph {
            n,
            edges: Vec::new(),
        }
    }

    /// Adds a transition; zero rates are kept out of the graph.
    pub fn add(&mut self, from: usize, to: usize, rate: f64) {
        assert!(from < self.n && to < self.n, "state index out of range");
        if rate != 0.0 && from != to {
            self.edges.push((from, to, rate));
        }
    }

    /// Generator `M` with `dn/dt = M n`.
    pub fn generator(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(a, b, r) in &self.edges {
            m[(b, a)] += r;
            m[(a, a)] -= r;
        }
        m
    }

    /// `dn/dt` for populations `n`.
    pub fn derivative(&self, n: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(a, b, r) in &self.edges {
            let flow = r * n[a];
            d[a] -= flow;
            d[b] += flow;
        }
        d
    }

    /// Number of closed communicating classes (sets nothing leaves). The
    /// stationary state is unique exactly when this is one.
    pub fn closed_classes(&self) -> usize {
        let n = self.n;
        let mut reach = vec![vec![false; n]; n];
        for (i, row) in reach.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(a, b, r) in &self.edges {
            if r > 0.0 {
                reach[a][b] = true;
            }
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        // i is in a closed class iff everything reachable from i reaches back
        let closed: Vec<bool> = (0..n)
            .map(|i| (0..n).all(|j| !reach[i][j] || reach[j][i]))
            .collect();
        // count classes by their smallest member
        (0..n)
            .filter(|&i| closed[i] && (0..i).all(|j| !(reach[i][j] && reach[j][i])))
            .count()
    }

    /// Solves `M n = 0`, `Σ n = 1` by replacing the last balance row with the
    /// normalisation.
    pub fn steady_state(&self) -> Result<Vec<f64>, NvError> {
        if self.edges.iter().any(|e| !(e.2 >= 0.0 && e.2.is_finite())) {
            return Err(NvError::InvalidRate);
        }
        if self.closed_classes() != 1 {
            return Err(NvError::SingularSystem);
        }
        let mut a = self.generator();
        let last = self.n - 1;
        for j in 0..self.n {
            a[(last, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(self.n);
        rhs[last] = 1.0;
        let x = a.lu().solve(&rhs).ok_or(NvError::SingularSystem)?;
        let mut pops: Vec<f64> = x.iter().copied().collect();
        if pops.iter().any(|p| !p.is_finite()) {
            return Err(NvError::SingularSystem);
        }
        // round-off can leave tiny negatives on near-empty states
        for p in &mut pops {
            if *p < 0.0 && *p > -1e-12 {
                *p = 0.0;
            }
        }
        let total: f64 = pops.iter().sum();
        pops.iter_mut().for_each(|p| *p /= total);
        Ok(pops)
    }
}
