use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, RadialGrid};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Physical,
    Frequency,
}

/// Complex samples on a [`Grid1D`]. Frequency-space fields hold continuous
/// Fourier transform values `∫ f(x) e^{-ixξ} dx` at the grid frequencies in
/// FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid1D,
    pub values: Vec<C64>,
    pub space: Space,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<C64>, space: Space) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Self { grid, values, space })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> C64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values, space: Space::Physical }
    }

    pub fn from_real_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.len()], space: Space::Physical }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn ensure_physical(&self) -> Result<()> {
        match self.space {
            Space::Physical => Ok(()),
            Space::Frequency => Err(Error::GridMismatch("expected a physical-space field".into())),
        }
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid && self.space == other.space {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect(), space: self.space }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            space: self.space,
        })
    }

    pub fn scale(&self, c: C64) -> Field {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise product with a real weight sampled at the grid nodes.
    pub fn weighted(&self, w: impl Fn(f64) -> f64) -> Field {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| v * w(self.grid.x(j)))
            .collect();
        Field { grid: self.grid, values, space: self.space }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Field {
        self.map(|v| v.conj())
    }
}

/// Complex samples on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub grid: RadialGrid,
    pub values: Vec<C64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a radial grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("radial field values"));
        }
        Ok(Self { grid, values })
    }

    /// Trapezoid integral of `|f|^p r^{d-1} |S^{d-1}|`, raised to `1/p`.
    pub fn lp_norm(&self, d: usize, p: f64) -> f64 {
        let r = self.grid.nodes();
        if p.is_infinite() {
            return self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        let w = |i: usize| self.values[i].norm().powf(p) * r[i].powi(d as i32 - 1);
        let integral: f64 = (0..r.len() - 1)
            .map(|i| 0.5 * (r[i + 1] - r[i]) * (w(i) + w(i + 1)))
            .sum();
        (sphere_area(d) * integral).powf(1.0 / p)
    }
}

/// Surface measure of the unit sphere `S^{d-1}`; `2` for `d = 1`.
pub fn sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            let half = d as f64 / 2.0;
            2.0 * PI.powf(half) / gamma(half)
        }
    }
}

fn gamma(x: f64) -> f64 {
    // Lanczos, g = 7
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let t = x + 7.5;
        let a = C[1..].iter().enumerate().fold(C[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// Pair `(Z_1, Z_2)` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    pub z1: Vec<C64>,
    pub z2: Vec<C64>,
}

impl VectorField2 {
    pub fn new(z1: Vec<C64>, z2: Vec<C64>) -> Result<Self> {
        if z1.len() != z2.len() {
            return Err(Error::GridMismatch("vector components differ in length".into()));
        }
        Ok(Self { z1, z2 })
    }

    /// Lift a scalar field to the symmetric subspace `(ε, ε̄)`.
    pub fn symmetric(eps: &[C64]) -> Self {
        Self { z1: eps.to_vec(), z2: eps.iter().map(|v| v.conj()).collect() }
    }

    /// Max deviation from `Z_2 = conj(Z_1)`, relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.z1.iter().chain(&self.z2).map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        self.z1
            .iter()
            .zip(&self.z2)
            .map(|(a, b)| (a.conj() - b).norm())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn stacked(&self) -> Vec<C64> {
        self.z1.iter().chain(&self.z2).copied().collect()
    }

    pub fn from_stacked(v: &[C64]) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(Error::GridMismatch("stacked vector has odd length".into()));
        }
        let n = v.len() / 2;
        Ok(Self { z1: v[..n].to_vec(), z2: v[n..].to_vec() })
    }
}
