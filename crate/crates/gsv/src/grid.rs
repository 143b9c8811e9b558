//! Uniform time grid on [0, T].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform discretization of [0, T] with `n` steps and nodes t_i = i T / n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub n: usize,
    pub horizon: f64,
}

impl PathGrid {
    pub fn new(n: usize, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("grid needs n >= 1".into()));
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidInput(
                "grid horizon must be finite and > 0".into(),
            ));
        }
        Ok(Self { n, horizon })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n);
        i as f64 * self.horizon / self.n as f64
    }

    /// All n + 1 nodes including both endpoints.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    /// Largest node index i >= 1 with t_i <= t (plus a small tolerance for
    /// nodes that should land exactly on t).
    pub fn last_node_at_or_before(&self, t: f64) -> Option<usize> {
        let dt = self.dt();
        let k = ((t + 1e-12 * self.horizon) / dt).floor() as usize;
        let k = k.min(self.n);
        if k == 0 {
            None
        } else {
            Some(k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_uniform_and_pinned() {
        let g = PathGrid::new(4, 2.0).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(4), 2.0);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(PathGrid::new(0, 1.0).is_err());
        assert!(PathGrid::new(3, 0.0).is_err());
        assert!(PathGrid::new(3, f64::NAN).is_err());
    }

    #[test]
    fn node_lookup_handles_exact_hits() {
        let g = PathGrid::new(64, 1.0).unwrap();
        assert_eq!(g.last_node_at_or_before(0.5), Some(32));
        assert_eq!(g.last_node_at_or_before(1.0), Some(64));
        assert_eq!(g.last_node_at_or_before(0.001), None);
    }
}
