//! Transforms, Fourier multipliers and norms on [`Grid1D`] fields.
//!
//! Conventions: `f̂(ξ) = ∫ f(x) e^{-ixξ} dx`, `D^α = F^{-1} |ξ|^α F`, and
//! `‖f‖²_{L²} = (2π)^{-1} ‖f̂‖²_{L²}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Space};
use crate::C64;

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<RwLock<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(p) = cache.read().unwrap().get(&n) {
        return p.clone();
    }
    let mut planner = FftPlanner::new();
    let p = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
    cache.write().unwrap().entry(n).or_insert(p).clone()
}

/// Unnormalized forward DFT `X_k = Σ x_j e^{-2πijk/N}`.
pub fn fft(values: &[C64]) -> Vec<C64> {
    let mut buf = values.to_vec();
    plans(buf.len()).0.process(&mut buf);
    buf
}

/// Inverse DFT including the `1/N` factor.
pub fn ifft(values: &[C64]) -> Vec<C64> {
    let mut buf = values.to_vec();
    plans(buf.len()).1.process(&mut buf);
    let s = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= s);
    buf
}

/// Continuous Fourier transform samples at the grid frequencies.
pub fn to_frequency(f: &Field) -> Result<Field> {
    f.ensure_physical()?;
    let g = f.grid;
    let dx = g.dx();
    let mut spec = fft(&f.values);
    for (k, v) in spec.iter_mut().enumerate() {
        let sign = if g.wavenumber(k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        *v *= dx * sign;
    }
    Ok(Field { grid: g, values: spec, space: Space::Frequency })
}

pub fn to_physical(f: &Field) -> Result<Field> {
    if f.space != Space::Frequency {
        return Err(Error::GridMismatch("expected a frequency-space field".into()));
    }
    let g = f.grid;
    let dx = g.dx();
    let scaled: Vec<C64> = f
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let sign = if g.wavenumber(k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            v * (sign / dx)
        })
        .collect();
    Ok(Field { grid: g, values: ifft(&scaled), space: Space::Physical })
}

/// Chirp-z evaluation of `Σ_j v_j exp(s·i (x0 + j dx)(η0 + k dη))` for
/// `k = 0..m`, with `s = -1` (forward) or `+1` (inverse orientation).
///
/// Uses the Bluestein factorization `jk = (j² + k² - (k-j)²)/2`, so every
/// output node is evaluated exactly rather than interpolated.
pub fn chirp_transform(values: &[C64], x0: f64, dx: f64, eta0: f64, deta: f64, m: usize, sign: f64) -> Vec<C64> {
    let n = values.len();
    if m == 0 || n == 0 {
        return vec![C64::new(0.0, 0.0); m];
    }
    let theta = sign * dx * deta;
    let size = (n + m - 1).next_power_of_two();
    let mut a = vec![C64::new(0.0, 0.0); size];
    for (j, &v) in values.iter().enumerate() {
        let jf = j as f64;
        let phase = sign * jf * dx * eta0 + 0.5 * theta * jf * jf;
        a[j] = v * C64::from_polar(1.0, phase);
    }
    let mut kernel = vec![C64::new(0.0, 0.0); size];
    for q in 0..m.max(n) {
        let qf = q as f64;
        let c = C64::from_polar(1.0, -0.5 * theta * qf * qf);
        if q < m {
            kernel[q] = c;
        }
        if q > 0 && q < n {
            kernel[size - q] = c;
        }
    }
    let fa = fft(&a);
    let fk = fft(&kernel);
    let prod: Vec<C64> = fa.iter().zip(&fk).map(|(x, y)| x * y).collect();
    let conv = ifft(&prod);
    (0..m)
        .map(|k| {
            let kf = k as f64;
            let eta = eta0 + kf * deta;
            let phase = sign * x0 * eta + 0.5 * theta * kf * kf;
            conv[k] * C64::from_polar(1.0, phase)
        })
        .collect()
}

/// Continuous Fourier transform of the grid data (zero outside the box)
/// evaluated at `scale · ξ_k` for every grid frequency, in FFT order.
pub fn spectrum_at_scaled_frequencies(f: &Field, scale: f64) -> Result<Vec<C64>> {
    f.ensure_physical()?;
    let g = f.grid;
    let n = g.len();
    let half = n / 2;
    let deta = scale * g.dxi();
    let eta0 = -(half as f64) * deta;
    let vals = chirp_transform(&f.values, g.x(0), g.dx(), eta0, deta, n, -1.0);
    // vals[i] sits at wavenumber i - N/2; reorder into FFT order.
    let dx = g.dx();
    Ok((0..n)
        .map(|k| {
            let w = g.wavenumber(k);
            vals[(w + half as i64) as usize] * dx
        })
        .collect())
}

/// Band-limited evaluation of a frequency-space field at arbitrary physical
/// points `x0 + j·h`, `j = 0..m`.
pub fn evaluate_at_points(spec: &Field, x0: f64, h: f64, m: usize) -> Result<Vec<C64>> {
    if spec.space != Space::Frequency {
        return Err(Error::GridMismatch("expected a frequency-space field".into()));
    }
    let g = spec.grid;
    let n = g.len();
    let half = n / 2;
    // reorder to ascending wavenumbers -N/2..N/2-1
    let mut asc = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        asc[(g.wavenumber(k) + half as i64) as usize] = spec.values[k];
    }
    // the Nyquist bin is split evenly between ±N/2 so real data stays real
    let nyq = asc[0] * 0.5;
    asc[0] = nyq;
    let xi0 = -(half as f64) * g.dxi();
    let mut out = chirp_transform(&asc, xi0, g.dxi(), x0, h, m, 1.0);
    for (j, v) in out.iter_mut().enumerate() {
        let x = x0 + j as f64 * h;
        *v += nyq * C64::from_polar(1.0, (half as f64) * g.dxi() * x);
        *v *= g.dxi() / (2.0 * PI);
    }
    Ok(out)
}

/// `D^α f` as the Fourier multiplier `|ξ|^α`. For `α < 0` the zero mode is
/// set to zero, so `D^{-σ}` acts as a pseudo-inverse.
pub fn fractional_derivative(f: &Field, alpha: f64) -> Result<Field> {
    f.ensure_physical()?;
    f.ensure_finite("fractional_derivative input")?;
    if !alpha.is_finite() {
        return Err(Error::NonFinite("alpha"));
    }
    if alpha == 0.0 {
        return Ok(f.clone());
    }
    let g = f.grid;
    let mut spec = fft(&f.values);
    for (k, v) in spec.iter_mut().enumerate() {
        let xi = g.xi(k).abs();
        *v *= if xi == 0.0 { 0.0 } else { xi.powf(alpha) };
    }
    Ok(Field { grid: g, values: ifft(&spec), space: Space::Physical })
}

/// Multiply the spectrum by an arbitrary symbol `m(ξ)`.
pub fn apply_multiplier(f: &Field, symbol: impl Fn(f64) -> C64) -> Result<Field> {
    f.ensure_physical()?;
    let g = f.grid;
    let mut spec = fft(&f.values);
    for (k, v) in spec.iter_mut().enumerate() {
        *v *= symbol(g.xi(k));
    }
    Ok(Field { grid: g, values: ifft(&spec), space: Space::Physical })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    /// `‖f‖_{L^p}`, `p = ∞` allowed.
    Lp(f64),
    /// `‖D^σ f‖_{L^p}`.
    HomSobolev(f64, f64),
    /// `‖⟨x⟩^δ f‖_{L²}`.
    WeightedL2(f64),
}

impl NormKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NormKind::Lp(p) => p >= 1.0,
            NormKind::HomSobolev(s, p) => p >= 1.0 && s > -0.5 && s <= 1.0,
            NormKind::WeightedL2(delta) => delta >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid norm {self:?}")))
        }
    }
}

fn lp_of_values(values: &[C64], dx: f64, p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    } else if p == 2.0 {
        (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx).sqrt()
    } else {
        (values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * dx).powf(1.0 / p)
    }
}

/// Riemann zeta function by Euler-Maclaurin summation; any real `s != 1`
/// with `s > -17`.
pub fn zeta(s: f64) -> f64 {
    const B2K: [f64; 9] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
        43867.0 / 798.0,
    ];
    let n = 20.0_f64;
    let mut sum: f64 = (1..20).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial s(s+1)...(s+2k-2) / (2k)!
    let mut coef = s / 2.0;
    let mut pow = n.powf(-s - 1.0);
    for (k, b) in B2K.iter().enumerate() {
        sum += b * coef * pow;
        let m = 2.0 * (k as f64 + 1.0);
        coef *= (s + m - 1.0) * (s + m) / ((m + 1.0) * (m + 2.0));
        pow /= n * n;
    }
    sum
}

/// `‖f‖^2_{Ḣ^σ}` from the discrete spectrum. The sum over grid frequencies
/// is corrected for the `|ξ|^{2σ}` kink at the origin (Navot's extension of
/// Euler-Maclaurin), with the needed even derivatives of `|f̂|²` at `ξ = 0`
/// taken from central differences of the samples.
pub fn hom_sobolev_sq(f: &Field, sigma: f64) -> Result<f64> {
    f.ensure_physical()?;
    let g = f.grid;
    let n = g.len();
    let spec = fft(&f.values);
    let s: f64 = spec
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let xi = g.xi(k).abs();
            let w = if sigma == 0.0 {
                1.0
            } else if xi == 0.0 {
                0.0
            } else {
                xi.powf(2.0 * sigma)
            };
            w * v.norm_sqr()
        })
        .sum();
    let raw = s * g.dx() / n as f64;
    if sigma == 0.0 || n < 16 {
        return Ok(raw);
    }
    let h = g.dxi();
    let scale = g.dx() * g.dx() / (2.0 * PI);
    let gs = |k: i64| spec[k.rem_euclid(n as i64) as usize].norm_sqr() * scale;
    let ge = |k: i64| 0.5 * (gs(k) + gs(-k));
    const D2: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    const D4: [f64; 5] = [91.0 / 8.0, -122.0 / 15.0, 169.0 / 60.0, -2.0 / 5.0, 7.0 / 240.0];
    let g0 = ge(0);
    let mut g2 = D2[0] * g0;
    let mut g4 = D4[0] * g0;
    for k in 1..5 {
        g2 += 2.0 * D2[k] * ge(k as i64);
        g4 += 2.0 * D4[k] * ge(k as i64);
    }
    g2 /= h * h;
    g4 /= h.powi(4);
    let e = 2.0 * sigma;
    let corr = 2.0
        * (zeta(-e) * g0 * h.powf(e + 1.0)
            + zeta(-e - 2.0) * g2 / 2.0 * h.powf(e + 3.0)
            + zeta(-e - 4.0) * g4 / 24.0 * h.powf(e + 5.0));
    Ok(raw - corr)
}

pub fn norm(f: &Field, kind: NormKind) -> Result<f64> {
    kind.validate()?;
    f.ensure_physical()?;
    f.ensure_finite("norm input")?;
    let dx = f.grid.dx();
    Ok(match kind {
        NormKind::Lp(p) => lp_of_values(&f.values, dx, p),
        NormKind::HomSobolev(s, p) if p == 2.0 => hom_sobolev_sq(f, s)?.sqrt(),
        NormKind::HomSobolev(s, p) => lp_of_values(&fractional_derivative(f, s)?.values, dx, p),
        NormKind::WeightedL2(delta) => {
            let w = f.weighted(|x| (1.0 + x * x).powf(0.5 * delta));
            lp_of_values(&w.values, dx, 2.0)
        }
    })
}

/// Plain `L²` norm of a frequency-space field via Plancherel.
pub fn frequency_l2(spec: &Field) -> f64 {
    (spec.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * spec.grid.dxi() / (2.0 * PI)).sqrt()
}

/// Double integral `∬ |f(x-y) - f(x)|² / |y|^{1+2δ} dy dx` in one dimension.
///
/// The `y`-integral uses the grid spacing; the cell `|y| < dx/2` is
/// replaced by its Taylor value `‖f'‖² ∫ |y|^{1-2δ}`, and `|y|` beyond
/// half the box (where the supports no longer overlap) by the analytic tail
/// `2‖f‖² Y^{-2δ}/δ`.
pub fn gagliardo_seminorm(f: &Field, delta: f64) -> Result<f64> {
    f.ensure_physical()?;
    f.ensure_finite("gagliardo input")?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParams(format!("delta must lie in (0,1), got {delta}")));
    }
    let g = f.grid;
    let n = g.len();
    let dx = g.dx();
    let mut padded = f.values.clone();
    padded.resize(2 * n, C64::new(0.0, 0.0));
    let m_max = n / 2;
    let mut total = 0.0;
    for m in 1..=m_max {
        let y = m as f64 * dx;
        // Σ_x |f(x-y) - f(x)|² is even in y, so count y > 0 twice
        let s: f64 = (0..n + m)
            .map(|j| {
                let back = if j >= m { padded[j - m] } else { C64::new(0.0, 0.0) };
                (back - padded[j]).norm_sqr()
            })
            .sum::<f64>()
            * 2.0;
        let w = if m == m_max { 0.5 } else { 1.0 };
        total += w * s * dx * dx / y.powf(1.0 + 2.0 * delta);
    }
    let mass: f64 = f.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
    let deriv = apply_multiplier(f, |xi| C64::new(0.0, xi))?;
    let grad_sq: f64 = deriv.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
    let h = 0.5 * dx;
    let core = grad_sq * 2.0 * h.powf(2.0 - 2.0 * delta) / (2.0 - 2.0 * delta);
    let y_tail = m_max as f64 * dx;
    let tail = 2.0 * mass * y_tail.powf(-2.0 * delta) / delta;
    Ok(total + core + tail)
}

/// Smooth radial cutoff: `1` on `[0, 1/2]`, `0` on `[1, ∞)`, `C^∞` between.
pub fn cutoff(s: f64) -> f64 {
    let s = s.abs();
    if s <= 0.5 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        smooth_step(2.0 - 2.0 * s)
    }
}

/// `C^∞` step: `0` for `t <= 0`, `1` for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    fn e(t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            (-1.0 / t).exp()
        }
    }
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        e(t) / (e(t) + e(1.0 - t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowedNorm {
    pub value: f64,
    /// Radius actually used.
    pub radius: f64,
    /// Set when the requested radius exceeded the grid and was clamped.
    pub clamped: bool,
}

/// Norm of `f · φ(|x|/R)`.
pub fn windowed_norm(f: &Field, radius: f64, kind: NormKind) -> Result<WindowedNorm> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParams(format!("window radius must be > 0, got {radius}")));
    }
    let limit = f.grid.half_width();
    let (r, clamped) = if radius > limit { (limit, true) } else { (radius, false) };
    let cut = f.weighted(|x| cutoff(x / r));
    Ok(WindowedNorm { value: norm(&cut, kind)?, radius: r, clamped })
}
