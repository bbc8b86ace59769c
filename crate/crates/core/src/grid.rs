use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[-L, L)` with `N` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n: usize,
    half_width: f64,
}

impl Grid1D {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "grid size must be a power of two >= 16, got {n}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParams(format!("half-width must be > 0, got {half_width}")));
        }
        Ok(Self { n, half_width })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Frequency spacing `π/L`.
    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Signed integer wavenumber of FFT bin `k`.
    pub fn wavenumber(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    pub fn xi(&self, k: usize) -> f64 {
        self.wavenumber(k) as f64 * self.dxi()
    }

    /// Frequencies in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.xi(k)).collect()
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.dx()
    }
}

/// Radial nodes `r_0 < r_1 < ... < r_{N-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 4 {
            return Err(Error::InvalidParams("radial grid needs at least 4 nodes".into()));
        }
        if nodes[0] < 0.0 || nodes.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidParams("radial nodes must be finite and >= 0".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("radial nodes must be strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    /// `n` equispaced nodes from `0` to `r_max` inclusive.
    pub fn uniform(n: usize, r_max: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidParams("radial grid needs at least 4 nodes".into()));
        }
        let h = r_max / (n - 1) as f64;
        Self::from_nodes((0..n).map(|j| j as f64 * h).collect())
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

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Spacing if the grid is uniform (to relative 1e-9), else `None`.
    pub fn uniform_spacing(&self) -> Option<f64> {
        let h = self.nodes[1] - self.nodes[0];
        let ok = self
            .nodes
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
        ok.then_some(h)
    }

    /// Index of the last node `<= r`.
    pub fn locate(&self, r: f64) -> usize {
        match self.nodes.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid1D::new(8, 1.0).is_err());
        assert!(Grid1D::new(48, 1.0).is_err());
        assert!(Grid1D::new(64, 0.0).is_err());
    }

    #[test]
    fn frequency_grid_is_symmetric() {
        let g = Grid1D::new(32, 4.0).unwrap();
        let xs = g.frequencies();
        assert_eq!(xs[0], 0.0);
        assert!((xs[1] + xs[31]).abs() < 1e-15);
        assert!((g.dx() * g.dxi() - 2.0 * PI / 32.0).abs() < 1e-15);
        let nodes = g.nodes();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn radial_grid_checks_order() {
        assert!(RadialGrid::from_nodes(vec![0.0, 1.0, 1.0, 2.0]).is_err());
        let g = RadialGrid::uniform(11, 10.0).unwrap();
        assert_eq!(g.uniform_spacing(), Some(1.0));
        assert_eq!(g.locate(3.5), 3);
        assert_eq!(g.locate(10.0), 10);
    }
}
