//! The deformed Schrödinger group `e^{itΔ_b}`, `Δ_b = Δ + ib(d/2 + x·∇)`.
//!
//! On the Fourier side the group is a dilation times a chirp:
//! `û(t,ξ) = e^{bdt/2} û₀(e^{bt}ξ) e^{-iφ(t)|ξ|²}` with
//! `φ(t) = (e^{2bt} - 1)/(2b)`. The dilated spectrum is evaluated exactly at
//! the scaled nodes with a chirp transform of the (zero-extended) box data.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Space};
use crate::grid::Grid1D;
use crate::spectral::{chirp_transform, evaluate_at_points, fft, ifft, spectrum_at_scaled_frequencies, to_frequency};
use crate::C64;

pub const DEFAULT_OVERSAMPLE: f64 = 2.0;

/// `(e^{2bt} - 1)/(2b)`, continuous at `b = 0`.
pub fn chirp_time(b: f64, t: f64) -> f64 {
    if b == 0.0 {
        t
    } else {
        (2.0 * b * t).exp_m1() / (2.0 * b)
    }
}

/// Free time `t' = (1 - e^{-2bτ})/(2b)` and dilation `λ = e^{-bτ}` with
/// `(e^{iτΔ_b}u₀)(y) = λ^{d/2} (e^{it'Δ}u₀)(λy)`.
pub fn rescaling(b: f64, tau: f64) -> (f64, f64) {
    (-chirp_time(b, -tau), (-b * tau).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorPlan {
    pub grid: Grid1D,
    pub b: f64,
    pub t: f64,
    pub oversample: f64,
    /// `e^{bt}`.
    pub scale: f64,
    /// `φ(t)`.
    pub chirp: f64,
}

impl PropagatorPlan {
    /// Fails with [`Error::FrequencyOverflow`] once `|bt| > ln(oversample)`,
    /// i.e. once data band-limited to `Nyquist/oversample` would leave the band.
    pub fn new(grid: Grid1D, b: f64, t: f64, oversample: f64) -> Result<Self> {
        if !(b.is_finite() && t.is_finite()) {
            return Err(Error::NonFinite("propagator b or t"));
        }
        if !(oversample >= 2.0) {
            return Err(Error::InvalidParams(format!("oversample must be >= 2, got {oversample}")));
        }
        let scale = (b * t).exp();
        if (b * t).abs() > oversample.ln() * (1.0 + 1e-12) {
            return Err(Error::FrequencyOverflow { scale: (b * t).abs().exp(), limit: oversample });
        }
        Ok(Self { grid, b, t, oversample, scale, chirp: chirp_time(b, t) })
    }

    /// Largest `|t|` this grid can take in one exact step.
    pub fn budget(b: f64, oversample: f64) -> f64 {
        if b == 0.0 {
            f64::INFINITY
        } else {
            oversample.ln() / b.abs()
        }
    }

    /// Spectrum of `e^{itΔ_b}u₀` at the grid frequencies, FFT order.
    pub fn spectrum(&self, u0: &Field) -> Result<Field> {
        u0.ensure_physical()?;
        u0.ensure_finite("propagate input")?;
        if u0.grid != self.grid {
            return Err(Error::GridMismatch("field grid differs from plan grid".into()));
        }
        let g = self.grid;
        let nyq = g.nyquist();
        let amp = (0.5 * self.b * self.t).exp();
        let raw = if self.scale == 1.0 {
            to_frequency(u0)?.values
        } else {
            spectrum_at_scaled_frequencies(u0, self.scale)?
        };
        let values = raw
            .into_iter()
            .enumerate()
            .map(|(k, v)| {
                let xi = g.xi(k);
                // band-limited extension: nothing lives beyond Nyquist
                if (self.scale * xi).abs() > nyq * (1.0 + 1e-12) {
                    C64::new(0.0, 0.0)
                } else {
                    v * amp * C64::from_polar(1.0, -self.chirp * xi * xi)
                }
            })
            .collect();
        Ok(Field { grid: g, values, space: Space::Frequency })
    }

    pub fn apply(&self, u0: &Field) -> Result<Field> {
        if self.t == 0.0 {
            u0.ensure_physical()?;
            return Ok(u0.clone());
        }
        crate::spectral::to_physical(&self.spectrum(u0)?)
    }
}

/// `e^{itΔ_b}u₀` with the default oversampling budget.
pub fn propagate(u0: &Field, t: f64, b: f64) -> Result<Field> {
    PropagatorPlan::new(u0.grid, b, t, DEFAULT_OVERSAMPLE)?.apply(u0)
}

pub fn propagate_with(u0: &Field, t: f64, b: f64, oversample: f64) -> Result<Field> {
    PropagatorPlan::new(u0.grid, b, t, oversample)?.apply(u0)
}

/// `e^{itΔ}u₀` as the multiplier `e^{-it|ξ|²}`.
pub fn free_schrodinger(u0: &Field, t: f64) -> Result<Field> {
    u0.ensure_physical()?;
    u0.ensure_finite("free_schrodinger input")?;
    if !t.is_finite() {
        return Err(Error::NonFinite("time"));
    }
    let g = u0.grid;
    let mut spec = fft(&u0.values);
    for (k, v) in spec.iter_mut().enumerate() {
        let xi = g.xi(k);
        *v *= C64::from_polar(1.0, -t * xi * xi);
    }
    Ok(Field { grid: g, values: ifft(&spec), space: Space::Physical })
}

/// `e^{iτΔ_b}u₀` computed from the free group by the self-similar change of
/// variables. Independent of the Fourier-side dilation in [`propagate`].
pub fn propagate_via_rescaling(u0: &Field, tau: f64, b: f64) -> Result<Field> {
    propagate_via_rescaling_with(u0, tau, b, DEFAULT_OVERSAMPLE)
}

pub fn propagate_via_rescaling_with(u0: &Field, tau: f64, b: f64, oversample: f64) -> Result<Field> {
    if !(b > 0.0) {
        return Err(Error::InvalidParams(format!("rescaling path needs b > 0, got {b}")));
    }
    if (b * tau).abs() > oversample.ln() * (1.0 + 1e-12) {
        return Err(Error::FrequencyOverflow { scale: (b * tau).abs().exp(), limit: oversample });
    }
    let (t, lambda) = rescaling(b, tau);
    let g = u0.grid;
    let free = to_frequency(&free_schrodinger(u0, t)?)?;
    let vals = evaluate_at_points(&free, lambda * g.x(0), lambda * g.dx(), g.len())?;
    let amp = lambda.sqrt();
    Field::new(g, vals.into_iter().map(|v| v * amp).collect(), Space::Physical)
}

/// Supremum of the kernel of `e^{itΔ_b}` in one to three dimensions,
/// `(4π)^{-d/2} |sinh(bt)/b|^{-d/2}`. The constant is fixed by the `b → 0`
/// limit, the free kernel `(4π|t|)^{-d/2}`.
pub fn dispersive_norm_l1_linf(t: f64, b: f64, d: usize) -> Result<f64> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::InvalidParams(format!("kernel is singular at t = {t}")));
    }
    if d == 0 {
        return Err(Error::InvalidParams("d must be positive".into()));
    }
    let s = if b == 0.0 { t.abs() } else { ((b * t).sinh() / b).abs() };
    Ok((4.0 * PI * s).powf(-0.5 * d as f64))
}

/// The enlarged admissible region for `Δ_b`, `b > 0`.
pub fn admissible(q: f64, p: f64, d: usize) -> bool {
    if q.is_infinite() && p == 2.0 {
        return true;
    }
    if q.is_infinite() && p.is_infinite() {
        return false;
    }
    if q == 2.0 && p.is_infinite() {
        return false;
    }
    let df = d as f64;
    q >= 2.0 && p > 2.0 && 2.0 / q + df / p >= df / 2.0
}

fn lp_sum(values: impl Iterator<Item = f64>, h: f64, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        (values.map(|a| a.powf(p)).sum::<f64>() * h).powf(1.0 / p)
    }
}

/// `‖e^{itΔ}u₀‖_{L^p}` for any `t ≥ 0`.
///
/// Short times use the spectral multiplier on the grid. Once the chirp
/// `e^{i|y|²/4t}` is resolved on the support of `u₀`, the far-field form
/// `|u(t,x)| = (4πt)^{-1/2} |ĝ(x/2t)|`, `g = e^{i|y|²/4t}u₀`, is used
/// instead, which never wraps around the box.
pub fn free_lp_norm(u0: &Field, t: f64, p: f64) -> Result<f64> {
    u0.ensure_physical()?;
    if !(p >= 1.0) || t < 0.0 {
        return Err(Error::InvalidParams(format!("need p >= 1 and t >= 0, got p = {p}, t = {t}")));
    }
    let g = u0.grid;
    let dx = g.dx();
    let peak = u0.max_abs();
    if peak == 0.0 {
        return Ok(0.0);
    }
    let support = (0..g.len()).filter(|&j| u0.values[j].norm() > 1e-13 * peak).map(|j| g.x(j).abs()).fold(0.0, f64::max);
    let spec = fft(&u0.values);
    let speak = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let band = (0..g.len()).filter(|&k| spec[k].norm() > 1e-13 * speak).map(|k| g.xi(k).abs()).fold(0.0, f64::max);
    let nyq = g.nyquist();
    if band >= 0.5 * nyq {
        return Err(Error::InvalidParams("data not band-limited to half the Nyquist frequency".into()));
    }
    let t_switch = support / (2.0 * (nyq - band)) * 2.0;
    if t <= t_switch {
        let u = free_schrodinger(u0, t)?;
        return Ok(lp_sum(u.values.iter().map(|v| v.norm()), dx, p));
    }
    let chirped: Vec<C64> = (0..g.len()).map(|j| u0.values[j] * C64::from_polar(1.0, g.x(j).powi(2) / (4.0 * t))).collect();
    let refine = 4;
    let m = refine * g.len();
    let deta = g.dxi() / refine as f64;
    let ghat = chirp_transform(&chirped, g.x(0), dx, -nyq, deta, m, -1.0);
    let amp = (4.0 * PI * t).powf(-0.5);
    if p.is_infinite() {
        return Ok(amp * dx * ghat.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    let integral: f64 = ghat.iter().map(|v| (v.norm() * dx).powf(p)).sum::<f64>() * deta;
    Ok(amp * (2.0 * t * integral).powf(1.0 / p))
}

/// `‖e^{itΔ_b}u₀‖_{L^p}` in one dimension, through the exact identity
/// `‖e^{itΔ_b}u₀‖_p = λ^{1/2-1/p} ‖e^{it'Δ}u₀‖_p`.
pub fn deformed_lp_norm(u0: &Field, t: f64, b: f64, p: f64) -> Result<f64> {
    if b < 0.0 {
        return Err(Error::InvalidParams("b must be >= 0".into()));
    }
    let (tf, lambda) = if b == 0.0 { (t, 1.0) } else { rescaling(b, t) };
    let expo = if p.is_infinite() { 0.5 } else { 0.5 - 1.0 / p };
    Ok(lambda.powf(expo) * free_lp_norm(u0, tf, p)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrichartzSample {
    pub q: f64,
    pub p: f64,
    pub b: f64,
    pub times: Vec<f64>,
    /// Running value of `∫₀^t ‖u‖_p^q`, or of `sup_{s≤t} ‖u(s)‖_p` when `q = ∞`.
    pub running: Vec<f64>,
    pub total: f64,
    pub saturated: bool,
}

/// Samples `∫₀^T ‖e^{itΔ_b}u₀‖_{L^p}^q dt` on `t = 0` plus `n_t` log-spaced
/// times in `[T·10^{-4}, T]`, trapezoid in `t`. The integral counts as
/// saturated when the last decade contributes less than `10^{-6}` of it.
pub fn strichartz_sample(u0: &Field, q: f64, p: f64, b: f64, t_end: f64, n_t: usize) -> Result<StrichartzSample> {
    if !(q >= 1.0 && p >= 2.0) {
        return Err(Error::InvalidParams(format!("need q >= 1 and p >= 2, got ({q}, {p})")));
    }
    if !(t_end > 0.0) || n_t < 2 {
        return Err(Error::InvalidParams("need T > 0 and at least two times".into()));
    }
    let mut times = vec![0.0];
    let lo = (t_end * 1e-4).ln();
    let hi = t_end.ln();
    times.extend((0..n_t).map(|i| (lo + (hi - lo) * i as f64 / (n_t - 1) as f64).exp()));
    let values: Vec<f64> = times.iter().map(|&t| deformed_lp_norm(u0, t, b, p)).collect::<Result<_>>()?;
    let mut running = Vec::with_capacity(times.len());
    if q.is_infinite() {
        let mut m: f64 = 0.0;
        for v in &values {
            m = m.max(*v);
            running.push(m);
        }
    } else {
        let mut acc = 0.0;
        running.push(0.0);
        for i in 1..times.len() {
            acc += 0.5 * (times[i] - times[i - 1]) * (values[i].powf(q) + values[i - 1].powf(q));
            running.push(acc);
        }
    }
    let total = *running.last().unwrap();
    let decade = times.iter().position(|&t| t >= t_end / 10.0 * (1.0 - 1e-12)).unwrap();
    let saturated = if q.is_infinite() {
        running[decade] >= total * (1.0 - 1e-9)
    } else {
        total - running[decade] < 1e-6 * total
    };
    Ok(StrichartzSample { q, p, b, times, running, total, saturated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{norm, NormKind};

    fn gauss(g: Grid1D) -> Field {
        Field::from_real_fn(g, |x| (-x * x / 2.0).exp())
    }

    fn rel_l2(a: &Field, b: &Field) -> f64 {
        norm(&a.sub(b).unwrap(), NormKind::Lp(2.0)).unwrap() / norm(b, NormKind::Lp(2.0)).unwrap()
    }

    #[test]
    fn identity_at_zero_time() {
        let g = Grid1D::new(256, 20.0).unwrap();
        let u0 = gauss(g);
        assert_eq!(propagate(&u0, 0.0, 1.0).unwrap(), u0);
    }

    #[test]
    fn free_gaussian_closed_form() {
        let g = Grid1D::new(1024, 40.0).unwrap();
        let t = 0.7;
        let u = free_schrodinger(&gauss(g), t).unwrap();
        let exact = Field::from_fn(g, |x| {
            let w = C64::new(1.0, 2.0 * t);
            w.powf(-0.5) * (-(x * x) / (2.0 * w)).exp()
        });
        assert!(u.sub(&exact).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn matches_rescaling_oracle() {
        let g = Grid1D::new(512, 32.0).unwrap();
        let u0 = gauss(g);
        let a = propagate(&u0, 0.5, 1.0).unwrap();
        let o = propagate_via_rescaling(&u0, 0.5, 1.0).unwrap();
        assert!(rel_l2(&a, &o) < 1e-8, "{}", rel_l2(&a, &o));
    }

    #[test]
    fn overflow_is_an_error() {
        let g = Grid1D::new(64, 10.0).unwrap();
        let e = propagate(&gauss(g), 1.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::FrequencyOverflow { .. }));
    }

    #[test]
    fn kernel_constant() {
        let k = dispersive_norm_l1_linf(1.0, 1.0, 1).unwrap();
        assert!((k - (4.0 * PI * 1f64.sinh()).powf(-0.5)).abs() < 1e-15);
        assert!((k - 0.26015).abs() < 1e-4);
        assert!(dispersive_norm_l1_linf(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn admissible_examples() {
        assert!(admissible(f64::INFINITY, 2.0, 3));
        assert!(!admissible(2.0, f64::INFINITY, 1));
        assert!(admissible(4.0, f64::INFINITY, 1));
        assert!(!admissible(2.0, 2.0, 1));
    }

    #[test]
    fn far_field_norm_matches_grid_norm() {
        let g = Grid1D::new(2048, 120.0).unwrap();
        let u0 = gauss(g);
        for &t in &[0.5, 2.0, 6.0] {
            let direct = norm(&free_schrodinger(&u0, t).unwrap(), NormKind::Lp(4.0)).unwrap();
            let ff = free_lp_norm(&u0, t, 4.0).unwrap();
            assert!((direct - ff).abs() < 1e-9 * direct, "t = {t}: {direct} vs {ff}");
        }
    }
}
