//! Extended resolvent families `R_b^±(z)` in one dimension.
//!
//! On each frequency ray `ξ = ωρ`, `ω = ±1`, the resolvent solves
//! `(ρ² + ib(1/2 + ρ∂_ρ) − z) R̂ = f̂`, so that
//!
//! `R̂(r) = (i/b) r^{-1/2-iz/b} e^{ir²/2b} I(r)`, `I(r) = ∫_r^∞ g` or `−∫_0^r g`,
//!
//! with `g(ρ) = ρ^{-1/2+iz/b} e^{-iρ²/2b} f̂(ωρ)`. The upper integral is used
//! for `R^+` with `b > 0` and for `R^-` with `b < 0`.
//!
//! Ray functions are lazy [`RaySource`]s. A resolvent keeps Legendre
//! coefficients of `g` on panels short enough that the phase moves by at most
//! `π/8`, so evaluating it anywhere costs `O(1)` and resolvents compose.

use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;
use std::sync::{Arc, OnceLock};

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Space};
use crate::fit::{loglog_slope, LineFit};
use crate::grid::Grid1D;
use crate::spectral::{self, apply_multiplier};
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const NQ: usize = 12;
/// Lower end of every ray mesh; the rest of `(0, RHO_MIN)` is handled by the
/// leading power law.
const RHO_MIN: f64 = 1e-8;
const MAX_PANELS: usize = 400_000;
/// Safety margin on the validity regions, as a fraction of `|b|`.
pub const REGION_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub z: C64,
    pub branch: Branch,
}

impl fmt::Display for SpectralPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.branch == Branch::Plus { "+" } else { "-" };
        write!(f, "R{s}({:.4}{:+.4}i)", self.z.re, self.z.im)
    }
}

impl SpectralPoint {
    pub fn plus(z: C64) -> Self {
        Self { z, branch: Branch::Plus }
    }

    pub fn minus(z: C64) -> Self {
        Self { z, branch: Branch::Minus }
    }

    /// `Im z > −|b|/2` for the plus family, `Im z < |b|/2` for the minus
    /// family, each tightened by `0.05|b|`.
    pub fn check(&self, b: f64) -> Result<()> {
        if !(b.is_finite() && b != 0.0) {
            return Err(Error::InvalidParams(format!("b must be finite and nonzero, got {b}")));
        }
        if !(self.z.re.is_finite() && self.z.im.is_finite()) {
            return Err(Error::InvalidParams("spectral parameter must be finite".into()));
        }
        let bound = (0.5 - REGION_MARGIN) * b.abs();
        let ok = match self.branch {
            Branch::Plus => self.z.im > -bound,
            Branch::Minus => self.z.im < bound,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::OutsideRegion(format!("{self} with b = {b} (|Im z| limit {bound:.4})")))
        }
    }

    fn upward(&self, b: f64) -> bool {
        (self.branch == Branch::Plus) == (b > 0.0)
    }
}

/// Physical-space `Δ_b f = f'' + ib(f/2 + x f')`.
pub fn apply_delta_b(f: &Field, b: f64) -> Result<Field> {
    f.ensure_physical()?;
    let lap = apply_multiplier(f, |xi| C64::new(-xi * xi, 0.0))?;
    let grad = apply_multiplier(f, |xi| C64::new(0.0, xi))?;
    let g = f.grid;
    let values = (0..g.len())
        .map(|j| lap.values[j] + I * b * (0.5 * f.values[j] + g.x(j) * grad.values[j]))
        .collect();
    Ok(Field { grid: g, values, space: Space::Physical })
}

/// Frequency-side form `−ξ² f̂ − ib(f̂/2 + ξ ∂_ξ f̂)`, with `∂_ξ f̂` the
/// transform of `−ix f`.
pub fn delta_b_frequency(f: &Field, b: f64) -> Result<Field> {
    let spec = spectral::to_frequency(f)?;
    let xf = f.weighted(|x| x).scale(C64::new(0.0, -1.0));
    let dspec = spectral::to_frequency(&xf)?;
    let g = f.grid;
    let values = (0..g.len())
        .map(|k| {
            let xi = g.xi(k);
            -xi * xi * spec.values[k] - I * b * (0.5 * spec.values[k] + xi * dspec.values[k])
        })
        .collect();
    Ok(Field { grid: g, values, space: Space::Frequency })
}

struct Rule {
    s: [f64; NQ],
    w: [f64; NQ],
    /// `proj[n][k]` maps node values to Legendre coefficients.
    proj: [[f64; NQ]; NQ],
}

fn legendre(t: f64, out: &mut [f64; NQ + 1]) {
    out[0] = 1.0;
    out[1] = t;
    for n in 1..NQ {
        out[n + 1] = ((2 * n + 1) as f64 * t * out[n] - n as f64 * out[n - 1]) / (n + 1) as f64;
    }
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let gl = GaussLegendre::new(NonZeroUsize::new(NQ).unwrap());
        let mut s = [0.0; NQ];
        let mut w = [0.0; NQ];
        for (k, &(x, wt)) in gl.as_node_weight_pairs().iter().enumerate() {
            s[k] = x;
            w[k] = wt;
        }
        let mut proj = [[0.0; NQ]; NQ];
        let mut p = [0.0; NQ + 1];
        for k in 0..NQ {
            legendre(s[k], &mut p);
            for n in 0..NQ {
                proj[n][k] = (2 * n + 1) as f64 / 2.0 * w[k] * p[n];
            }
        }
        Rule { s, w, proj }
    })
}

/// Degree-11 Legendre interpolant of a function on `[a, a + 2h]`.
#[derive(Clone)]
struct Panel {
    a: f64,
    h: f64,
    coef: [C64; NQ],
}

impl Panel {
    fn new(a: f64, b: f64, f: &dyn Fn(f64) -> C64) -> Self {
        let r = rule();
        let h = 0.5 * (b - a);
        let vals: Vec<C64> = r.s.iter().map(|&s| f(a + h * (1.0 + s))).collect();
        let mut coef = [C64::new(0.0, 0.0); NQ];
        for (n, c) in coef.iter_mut().enumerate() {
            *c = (0..NQ).map(|k| vals[k] * r.proj[n][k]).sum();
        }
        Self { a, h, coef }
    }

    fn integral(&self) -> C64 {
        self.coef[0] * (2.0 * self.h)
    }

    /// `∫_a^r` of the interpolant.
    fn partial(&self, r: f64) -> C64 {
        let t = ((r - self.a) / self.h - 1.0).clamp(-1.0, 1.0);
        let mut p = [0.0; NQ + 1];
        legendre(t, &mut p);
        let mut acc = self.coef[0] * (t + 1.0);
        for n in 1..NQ {
            acc += self.coef[n] * ((p[n + 1] - p[n - 1]) / (2 * n + 1) as f64);
        }
        acc * self.h
    }
}

fn gl_integral(a: f64, b: f64, f: &dyn Fn(f64) -> C64) -> C64 {
    let r = rule();
    let h = 0.5 * (b - a);
    (0..NQ).map(|k| f(a + h * (1.0 + r.s[k])) * r.w[k]).sum::<C64>() * h
}

fn cpow(rho: f64, p: C64) -> C64 {
    (p * rho.ln()).exp()
}

/// Mesh on `[lo, hi]`: doubling panels up to `min(hi/4, 1/4)`, uniform
/// panels after that, each split so `rate · width ≤ per_panel`.
fn mesh(lo: f64, hi: f64, rate: &dyn Fn(f64) -> f64, per_panel: f64) -> Result<Vec<f64>> {
    let h0 = (hi / 4.0).min(0.25);
    let mut base = vec![lo];
    let mut e = lo;
    while e * 2.0 < h0 {
        e *= 2.0;
        base.push(e);
    }
    let mut k = 1.0;
    while k * h0 < hi * (1.0 - 1e-12) {
        if k * h0 > e {
            base.push(k * h0);
        }
        k += 1.0;
    }
    base.push(hi);
    let mut edges = vec![lo];
    for w in base.windows(2) {
        let (a, b) = (w[0], w[1]);
        let r = rate(a).max(rate(b));
        let n = ((r * (b - a) / per_panel).ceil() as usize).max(1);
        if edges.len() + n > MAX_PANELS {
            return Err(Error::Quadrature(format!(
                "more than {MAX_PANELS} panels needed on [{lo:.2e}, {hi:.3}] (rate {r:.3e} at {a:.3e})"
            )));
        }
        for j in 1..=n {
            edges.push(if j == n { b } else { a + (b - a) * j as f64 / n as f64 });
        }
    }
    Ok(edges)
}

/// `Σ amp ρ^power · e^{i chirp ρ²}`, the exact form of a ray function beyond
/// its cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Tail {
    pub chirp: f64,
    pub terms: Vec<(C64, C64)>,
}

impl Tail {
    pub fn eval(&self, rho: f64) -> C64 {
        let s: C64 = self.terms.iter().map(|&(a, p)| a * cpow(rho, p)).sum();
        s * C64::from_polar(1.0, self.chirp * rho * rho)
    }

    /// `∫_c^∞ |tail|²`.
    fn l2_sq_from(&self, c: f64) -> Result<f64> {
        let mut acc = C64::new(0.0, 0.0);
        for &(a1, p1) in &self.terms {
            for &(a2, p2) in &self.terms {
                let q = p1 + p2.conj();
                if q.re >= -1.0 {
                    return Err(Error::Quadrature(format!("tail ρ^{:.3} is not square integrable", q.re / 2.0)));
                }
                acc -= a1 * a2.conj() * cpow(c, q + 1.0) / (q + 1.0);
            }
        }
        Ok(acc.re)
    }
}

/// A function on the half line `ρ ≥ 0`.
pub trait RaySource: Send + Sync {
    fn eval(&self, rho: f64) -> C64;
    /// The function equals its [`Tail`] (or zero) beyond this radius.
    fn cap(&self) -> f64;
    fn tail(&self) -> Option<Tail>;
    /// Upper bound for `|d arg/dρ|` near `ρ`.
    fn phase_rate(&self, rho: f64) -> f64;
    /// Exponent `a` of the leading behaviour `c ρ^a` as `ρ → 0`.
    fn lead(&self) -> C64;
}

/// `ρ ↦ f̂(ωρ)` evaluated by the exact trigonometric sum over grid nodes.
pub struct FourierRay {
    x0: f64,
    dx: f64,
    w: Vec<C64>,
    omega: f64,
    cap: f64,
    rate: f64,
}

impl FourierRay {
    fn from_field(f: &Field, omega: f64, cap: f64) -> Self {
        let g = f.grid;
        let peak = f.max_abs();
        let keep = |v: &C64| v.norm() > 1e-300_f64.max(1e-18 * peak);
        let j0 = f.values.iter().position(keep).unwrap_or(0);
        let j1 = f.values.iter().rposition(keep).unwrap_or(0);
        let mass: f64 = f.values.iter().map(|v| v.norm_sqr()).sum();
        let (mut mean, mut var) = (0.0, 0.0);
        if mass > 0.0 {
            mean = (0..g.len()).map(|j| g.x(j) * f.values[j].norm_sqr()).sum::<f64>() / mass;
            var = (0..g.len()).map(|j| (g.x(j) - mean).powi(2) * f.values[j].norm_sqr()).sum::<f64>() / mass;
        }
        Self {
            x0: g.x(j0),
            dx: g.dx(),
            w: f.values[j0..=j1.max(j0)].iter().map(|v| v * g.dx()).collect(),
            omega,
            cap,
            rate: mean.abs() + 3.0 * var.sqrt(),
        }
    }
}

impl RaySource for FourierRay {
    fn eval(&self, rho: f64) -> C64 {
        if rho > self.cap {
            return C64::new(0.0, 0.0);
        }
        let xi = self.omega * rho;
        let step = C64::from_polar(1.0, -self.dx * xi);
        let mut e = C64::from_polar(1.0, -self.x0 * xi);
        let mut acc = C64::new(0.0, 0.0);
        for &w in &self.w {
            acc += w * e;
            e *= step;
        }
        acc
    }

    fn cap(&self) -> f64 {
        self.cap
    }

    fn tail(&self) -> Option<Tail> {
        None
    }

    fn phase_rate(&self, _rho: f64) -> f64 {
        self.rate
    }

    fn lead(&self) -> C64 {
        C64::new(0.0, 0.0)
    }
}

/// `ρ^power · inner(ρ)`.
struct Weighted {
    inner: Arc<dyn RaySource>,
    power: f64,
}

impl RaySource for Weighted {
    fn eval(&self, rho: f64) -> C64 {
        if rho <= 0.0 {
            return C64::new(0.0, 0.0);
        }
        self.inner.eval(rho) * rho.powf(self.power)
    }

    fn cap(&self) -> f64 {
        self.inner.cap()
    }

    fn tail(&self) -> Option<Tail> {
        self.inner.tail().map(|mut t| {
            t.terms.iter_mut().for_each(|(_, p)| *p += self.power);
            t
        })
    }

    fn phase_rate(&self, rho: f64) -> f64 {
        self.inner.phase_rate(rho)
    }

    fn lead(&self) -> C64 {
        self.inner.lead() + self.power
    }
}

/// `Σ c_k s_k(ρ)`.
struct Combination {
    terms: Vec<(C64, Arc<dyn RaySource>)>,
    tail: Option<Tail>,
}

impl Combination {
    fn new(terms: Vec<(C64, Arc<dyn RaySource>)>) -> Result<Self> {
        let mut tail: Option<Tail> = None;
        for (c, s) in &terms {
            if let Some(t) = s.tail() {
                let scaled: Vec<(C64, C64)> = t.terms.iter().map(|&(a, p)| (a * c, p)).collect();
                match &mut tail {
                    None => tail = Some(Tail { chirp: t.chirp, terms: scaled }),
                    Some(acc) => {
                        if (acc.chirp - t.chirp).abs() > 1e-12 * acc.chirp.abs() {
                            return Err(Error::Quadrature("cannot combine tails with different chirps".into()));
                        }
                        acc.terms.extend(scaled);
                    }
                }
            }
        }
        Ok(Self { terms, tail })
    }
}

impl RaySource for Combination {
    fn eval(&self, rho: f64) -> C64 {
        self.terms.iter().map(|(c, s)| c * s.eval(rho)).sum()
    }

    fn cap(&self) -> f64 {
        self.terms.iter().map(|(_, s)| s.cap()).fold(0.0, f64::max)
    }

    fn tail(&self) -> Option<Tail> {
        self.tail.clone()
    }

    fn phase_rate(&self, rho: f64) -> f64 {
        self.terms.iter().map(|(_, s)| s.phase_rate(rho)).fold(0.0, f64::max)
    }

    fn lead(&self) -> C64 {
        self.terms
            .iter()
            .map(|(_, s)| s.lead())
            .min_by(|a, b| a.re.total_cmp(&b.re))
            .unwrap_or(C64::new(0.0, 0.0))
    }
}

/// One ray of `R_b^±(z)` applied to a source.
pub struct RayResolvent {
    src: Arc<dyn RaySource>,
    z: C64,
    b: f64,
    upward: bool,
    edges: Vec<f64>,
    panels: Vec<Panel>,
    /// `cum[i] = ∫_{RHO_MIN}^{edges[i]} g`.
    cum: Vec<C64>,
    /// `∫_0^{RHO_MIN} g` for the lower family, `∫_cap^∞ g` for the upper one.
    bottom: C64,
    top: C64,
    tail: Option<Tail>,
    lead: C64,
    cap: f64,
}

impl RayResolvent {
    pub fn new(src: Arc<dyn RaySource>, pt: SpectralPoint, b: f64) -> Result<Self> {
        pt.check(b)?;
        let z = pt.z;
        let upward = pt.upward(b);
        let a0 = C64::new(-0.5, 0.0) + I * z / b;
        let cap = src.cap();
        if cap <= 2.0 * RHO_MIN {
            return Err(Error::InvalidParams("source has no frequency content".into()));
        }
        let g = |rho: f64| (a0 * rho.ln() - I * rho * rho / (2.0 * b)).exp() * src.eval(rho);
        let rate = |rho: f64| rho / b.abs() + z.re.abs() / (b.abs() * rho) + src.phase_rate(rho);
        let edges = mesh(RHO_MIN, cap, &rate, PI / 8.0)?;
        let panels: Vec<Panel> = edges.windows(2).map(|w| Panel::new(w[0], w[1], &g)).collect();
        let mut cum = Vec::with_capacity(edges.len());
        cum.push(C64::new(0.0, 0.0));
        for p in &panels {
            let last = *cum.last().unwrap();
            cum.push(last + p.integral());
        }
        if !cum.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Quadrature(format!("non-finite panel integral for {pt}")));
        }
        let a_int = a0 + src.lead();
        let bottom = if upward {
            C64::new(0.0, 0.0)
        } else {
            if a_int.re <= -1.0 {
                return Err(Error::Quadrature(format!(
                    "integrand ρ^{:.3} is not integrable at 0 for {pt}",
                    a_int.re
                )));
            }
            g(RHO_MIN) * RHO_MIN / (a_int + 1.0)
        };

        // Source tail terms become integrand terms c ρ^s once the chirps cancel.
        let mut int_terms = Vec::new();
        if let Some(t) = src.tail() {
            let chirp = 1.0 / (2.0 * b);
            if (t.chirp - chirp).abs() > 1e-12 * chirp.abs() {
                return Err(Error::Quadrature(format!("source tail chirp {} does not cancel for {pt}", t.chirp)));
            }
            for &(amp, p) in &t.terms {
                let s = p + a0;
                if (s + 1.0).norm() < 1e-12 {
                    return Err(Error::Quadrature("logarithmic tail integral".into()));
                }
                if upward && s.re >= -1.0 {
                    return Err(Error::OutsideRegion(format!(
                        "{pt}: tail ρ^{:.3} of the inner factor is not integrable (ordering of Im parts)",
                        s.re
                    )));
                }
                int_terms.push((amp, s));
            }
        }
        let pre = I / b;
        let hp = C64::new(-0.5, 0.0) - I * z / b;
        let top: C64 = int_terms.iter().map(|&(c, s)| -c * cpow(cap, s + 1.0) / (s + 1.0)).sum();
        let total = bottom + *cum.last().unwrap();
        let tail = if upward {
            (!int_terms.is_empty()).then(|| Tail {
                chirp: 1.0 / (2.0 * b),
                terms: int_terms.iter().map(|&(c, s)| (pre * (-c / (s + 1.0)), s + 1.0 + hp)).collect(),
            })
        } else {
            let konst = -(total - int_terms.iter().map(|&(c, s)| c * cpow(cap, s + 1.0) / (s + 1.0)).sum::<C64>());
            let mut terms = vec![(pre * konst, hp)];
            terms.extend(int_terms.iter().map(|&(c, s)| (pre * (-c / (s + 1.0)), s + 1.0 + hp)));
            Some(Tail { chirp: 1.0 / (2.0 * b), terms })
        };
        let lead = if upward && hp.re < src.lead().re { hp } else { src.lead() };
        Ok(Self { src, z, b, upward, edges, panels, cum, bottom, top, tail, lead, cap })
    }

    /// `I(r)` before the prefactor.
    fn integral_to(&self, r: f64) -> C64 {
        let i = self.edges.partition_point(|&e| e <= r).saturating_sub(1).min(self.panels.len() - 1);
        let part = self.cum[i] + self.panels[i].partial(r);
        if self.upward {
            self.top + (self.cum[self.panels.len()] - part)
        } else {
            -(self.bottom + part)
        }
    }

    fn prefactor(&self, r: f64) -> C64 {
        let hp = C64::new(-0.5, 0.0) - I * self.z / self.b;
        (I / self.b) * (hp * r.ln() + I * r * r / (2.0 * self.b)).exp()
    }

    pub fn panels(&self) -> usize {
        self.panels.len()
    }
}

impl RaySource for RayResolvent {
    fn eval(&self, r: f64) -> C64 {
        if r <= 0.0 {
            return C64::new(0.0, 0.0);
        }
        if r > self.cap {
            return self.tail.as_ref().map_or(C64::new(0.0, 0.0), |t| t.eval(r));
        }
        if r < RHO_MIN {
            return self.eval(RHO_MIN) * cpow(r / RHO_MIN, self.lead);
        }
        self.prefactor(r) * self.integral_to(r)
    }

    fn cap(&self) -> f64 {
        self.cap
    }

    fn tail(&self) -> Option<Tail> {
        self.tail.clone()
    }

    fn phase_rate(&self, rho: f64) -> f64 {
        rho / self.b.abs() + self.z.re.abs() / (self.b.abs() * rho) + self.src.phase_rate(rho)
    }

    fn lead(&self) -> C64 {
        self.lead
    }
}

/// Both rays of a frequency-side function on a grid's frequency line.
#[derive(Clone)]
pub struct Spectrum {
    grid: Grid1D,
    rays: [Arc<dyn RaySource>; 2],
}

impl Spectrum {
    /// Spectrum of a physical field; its transform must have decayed to
    /// `1e-8` of the peak before the Nyquist frequency.
    pub fn of_field(f: &Field) -> Result<Self> {
        f.ensure_physical()?;
        f.ensure_finite("resolvent input")?;
        let g = f.grid;
        let spec = spectral::to_frequency(f)?;
        let peak = spec.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let n = g.len();
        let edge = spec.values[n / 2 - 2..n / 2 + 3].iter().map(|v| v.norm()).fold(0.0, f64::max);
        if edge > 1e-8 * peak {
            return Err(Error::InvalidParams(format!(
                "input spectrum is not resolved: |f̂| near Nyquist is {:.2e} of the peak",
                edge / peak
            )));
        }
        let last = |omega: i64| {
            (1..n / 2)
                .rev()
                .find(|&m| {
                    let k = if omega > 0 { m } else { n - m };
                    spec.values[k].norm() > 1e-14 * peak
                })
                .unwrap_or(0)
        };
        let cap = |omega: i64| ((last(omega) + 2) as f64 * g.dxi()).min(g.nyquist());
        Ok(Self {
            grid: g,
            rays: [
                Arc::new(FourierRay::from_field(f, 1.0, cap(1))),
                Arc::new(FourierRay::from_field(f, -1.0, cap(-1))),
            ],
        })
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn ray(&self, omega: usize) -> &Arc<dyn RaySource> {
        &self.rays[omega]
    }

    pub fn eval(&self, xi: f64) -> C64 {
        if xi >= 0.0 {
            self.rays[0].eval(xi)
        } else {
            self.rays[1].eval(-xi)
        }
    }

    pub fn resolvent(&self, pt: SpectralPoint, b: f64) -> Result<Spectrum> {
        let r0 = RayResolvent::new(self.rays[0].clone(), pt, b)?;
        let r1 = RayResolvent::new(self.rays[1].clone(), pt, b)?;
        Ok(Self { grid: self.grid, rays: [Arc::new(r0), Arc::new(r1)] })
    }

    /// Multiplier `|ξ|^power`.
    pub fn weighted(&self, power: f64) -> Spectrum {
        let w = |r: &Arc<dyn RaySource>| -> Arc<dyn RaySource> { Arc::new(Weighted { inner: r.clone(), power }) };
        Self { grid: self.grid, rays: [w(&self.rays[0]), w(&self.rays[1])] }
    }

    pub fn combine(terms: &[(C64, &Spectrum)]) -> Result<Spectrum> {
        let grid = terms
            .first()
            .ok_or_else(|| Error::InvalidParams("empty combination".into()))?
            .1
            .grid;
        let mut rays: Vec<Arc<dyn RaySource>> = Vec::with_capacity(2);
        for omega in 0..2 {
            let t = terms.iter().map(|(c, s)| (*c, s.rays[omega].clone())).collect();
            rays.push(Arc::new(Combination::new(t)?));
        }
        let [r0, r1]: [Arc<dyn RaySource>; 2] = rays.try_into().ok().unwrap();
        Ok(Self { grid, rays: [r0, r1] })
    }

    /// Samples at the grid frequencies in FFT order.
    pub fn grid_values(&self) -> Vec<C64> {
        (0..self.grid.len()).map(|k| self.eval(self.grid.xi(k))).collect()
    }

    pub fn on_grid(&self) -> Result<Field> {
        Field::new(self.grid, self.grid_values(), Space::Frequency)
    }

    pub fn to_physical(&self) -> Result<Field> {
        spectral::to_physical(&self.on_grid()?)
    }

    /// Continuous `‖·‖_{L²}` of the inverse transform, `(2π)^{-1/2}‖S‖_{L²(dξ)}`.
    pub fn l2_norm(&self) -> Result<f64> {
        let mut acc = 0.0;
        for ray in &self.rays {
            acc += ray_l2_sq(ray.as_ref())?;
        }
        Ok((acc / (2.0 * PI)).sqrt())
    }
}

fn ray_l2_sq(src: &dyn RaySource) -> Result<f64> {
    let cap = src.cap();
    let edges = mesh(RHO_MIN, cap, &|r| src.phase_rate(r), PI / 4.0)?;
    let sq = |r: f64| C64::new(src.eval(r).norm_sqr(), 0.0);
    let mut acc: f64 = edges.windows(2).map(|w| gl_integral(w[0], w[1], &sq).re).sum();
    let q = 2.0 * src.lead().re + 1.0;
    if q <= 0.0 {
        return Err(Error::Quadrature(format!("ray function ~ρ^{:.3} is not square integrable at 0", src.lead().re)));
    }
    acc += src.eval(RHO_MIN).norm_sqr() * RHO_MIN / q;
    if let Some(t) = src.tail() {
        acc += t.l2_sq_from(cap)?;
    }
    Ok(acc)
}

/// `R_b^±(z) f` on the grid. The frequency `ξ = 0`, where the representation
/// can be singular, is set to zero.
pub fn resolvent_apply(f: &Field, pt: SpectralPoint, b: f64) -> Result<Field> {
    Spectrum::of_field(f)?.resolvent(pt, b)?.to_physical()
}

/// `±i ∫_0^T e^{±itΔ_b} e^{±itz} e^{-bσt} f dt`, evaluated node by node in
/// frequency through the exact group `e^{bτ/2} f̂(e^{bτ}ξ) e^{-iφ(τ)ξ²}`.
/// With `σ = 0` this is the Laplace-transform definition of `R_b^±(z)`.
pub fn resolvent_via_time_integral_weighted(
    f: &Field,
    pt: SpectralPoint,
    b: f64,
    t_max: f64,
    sigma: f64,
) -> Result<Field> {
    pt.check(b)?;
    let s = pt.branch.sign();
    let z = pt.z;
    let kappa = s * z.im + b * sigma;
    if !(t_max > 0.0) || kappa <= 0.0 || (-kappa * t_max).exp() >= 1e-8 {
        return Err(Error::Quadrature(format!(
            "tail bound e^(-{kappa:.4}·{t_max}) is not below 1e-8 for {pt}"
        )));
    }
    let spec = Spectrum::of_field(f)?;
    let g = f.grid;
    let mut values = vec![C64::new(0.0, 0.0); g.len()];
    for (k, out) in values.iter_mut().enumerate() {
        let xi = g.xi(k);
        if xi == 0.0 {
            continue;
        }
        let ray = &spec.rays[if xi > 0.0 { 0 } else { 1 }];
        let rho = xi.abs();
        let cap = ray.cap();
        let growing = s * b > 0.0;
        let t_end = if growing {
            if rho >= cap {
                continue;
            }
            t_max.min((cap / rho).ln() / b.abs())
        } else {
            t_max
        };
        let fr = ray.phase_rate(rho);
        let rate = |t: f64| {
            let tau = s * t;
            z.re.abs() + (2.0 * b * tau).exp() * rho * rho + fr * b.abs() * (b * tau).exp() * rho + 1.0
        };
        let integrand = |t: f64| {
            let tau = s * t;
            let phi = (2.0 * b * tau).exp_m1() / (2.0 * b);
            let amp = (b * tau / 2.0).exp() * ray.eval((b * tau).exp() * rho);
            amp * (I * (tau * z - phi * rho * rho)).exp() * (-s * b * sigma * t).exp()
        };
        let mut acc = C64::new(0.0, 0.0);
        let mut t = 0.0;
        while t < t_end {
            let mut dt = (PI / 8.0 / rate(t)).min(0.5);
            let r_end = rate((t + dt).min(t_end));
            if r_end > rate(t) {
                dt = PI / 8.0 / r_end;
            }
            let t1 = (t + dt).min(t_end);
            acc += gl_integral(t, t1, &integrand);
            t = t1;
        }
        *out = s * I * acc;
    }
    spectral::to_physical(&Field::new(g, values, Space::Frequency)?)
}

pub fn resolvent_via_time_integral(f: &Field, pt: SpectralPoint, b: f64, t_max: f64) -> Result<Field> {
    resolvent_via_time_integral_weighted(f, pt, b, t_max, 0.0)
}

/// `‖a − b‖ / ‖b‖` over grid frequencies (equivalently grid `L²`).
fn rel_diff(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn grid_norm(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative `L²` discrepancy between two fields on the same grid.
pub fn relative_l2(a: &Field, reference: &Field) -> Result<f64> {
    a.same_grid(reference)?;
    Ok(rel_diff(&a.values, &reference.values))
}

/// `‖(−Δ_b − z) R f − f‖ / ‖f‖`, sampled at the nonzero grid frequencies.
/// The dilation part `ξ∂_ξ` is an eighth-order difference in `ln|ξ|`.
pub fn inversion_residual(f: &Field, pt: SpectralPoint, b: f64) -> Result<f64> {
    const C: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let spec = Spectrum::of_field(f)?;
    let res = spec.resolvent(pt, b)?;
    let g = f.grid;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..g.len() {
        let xi = g.xi(k);
        if xi == 0.0 {
            continue;
        }
        let rho = xi.abs();
        let ray = &res.rays[if xi > 0.0 { 0 } else { 1 }];
        let delta = (1e-2_f64).min(0.05 * b.abs() / (rho * rho + pt.z.norm() + 1.0));
        let mut dil = C64::new(0.0, 0.0);
        for (m, c) in C.iter().enumerate() {
            let h = (m + 1) as f64 * delta;
            dil += *c * (ray.eval(rho * h.exp()) - ray.eval(rho * (-h).exp()));
        }
        dil /= delta;
        let fh = spec.eval(xi);
        let r = (rho * rho + I * b / 2.0 - pt.z) * ray.eval(rho) + I * b * dil - fh;
        num += r.norm_sqr();
        den += fh.norm_sqr();
    }
    Ok((num / den).sqrt())
}

/// `‖R⁺(z)f − R⁺(z₂)f − (z − z₂)R⁺(z)R⁺(z₂)f‖ / ‖f‖`.
pub fn resolvent_identity_residual(f: &Field, z: C64, z2: C64, b: f64) -> Result<f64> {
    let spec = Spectrum::of_field(f)?;
    let r1 = spec.resolvent(SpectralPoint::plus(z), b)?;
    let r2 = spec.resolvent(SpectralPoint::plus(z2), b)?;
    let r12 = r2.resolvent(SpectralPoint::plus(z), b)?;
    identity_defect(&spec, &r1, &r2, &r12, z - z2)
}

/// `‖R⁺(z)f − R⁻(w)f − (z − w)R⁺(z)R⁻(w)f‖ / ‖f‖`, requiring `Im z > Im w`.
pub fn mixed_identity_residual(f: &Field, z: C64, w: C64, b: f64) -> Result<f64> {
    if z.im <= w.im {
        return Err(Error::OutsideRegion(format!("mixed identity needs Im z > Im w, got {} and {}", z.im, w.im)));
    }
    let spec = Spectrum::of_field(f)?;
    let r1 = spec.resolvent(SpectralPoint::plus(z), b)?;
    let r2 = spec.resolvent(SpectralPoint::minus(w), b)?;
    let r12 = r2.resolvent(SpectralPoint::plus(z), b)?;
    identity_defect(&spec, &r1, &r2, &r12, z - w)
}

fn identity_defect(f: &Spectrum, r1: &Spectrum, r2: &Spectrum, r12: &Spectrum, dz: C64) -> Result<f64> {
    let (a, b, c) = (r1.grid_values(), r2.grid_values(), r12.grid_values());
    let d: Vec<C64> = (0..a.len()).map(|k| a[k] - b[k] - dz * c[k]).collect();
    Ok(grid_norm(&d) / grid_norm(&f.grid_values()))
}

/// Relative discrepancy between `D^σ R⁺(z) D^{-σ} f` and `R⁺(z + ibσ) f`.
pub fn sigma_shift_check(f: &Field, z: C64, b: f64, sigma: f64) -> Result<f64> {
    let spec = Spectrum::of_field(f)?;
    let lhs = spec.weighted(-sigma).resolvent(SpectralPoint::plus(z), b)?.weighted(sigma);
    let rhs = spec.resolvent(SpectralPoint::plus(z + I * b * sigma), b)?;
    Ok(rel_diff(&lhs.grid_values(), &rhs.grid_values()))
}

/// Relative discrepancy between the weighted time integral at `z` and the
/// representation formula at `z + ibσ`.
pub fn sigma_shift_time_check(f: &Field, z: C64, b: f64, sigma: f64, t_max: f64) -> Result<f64> {
    let lhs = resolvent_via_time_integral_weighted(f, SpectralPoint::plus(z), b, t_max, sigma)?;
    let rhs = resolvent_apply(f, SpectralPoint::plus(z + I * b * sigma), b)?;
    relative_l2(&lhs, &rhs)
}

/// `‖conj(R_b^±(z) f) − R_{-b}^∓(z̄) f̄‖ / ‖R_b^±(z) f‖`.
pub fn conjugation_defect(f: &Field, pt: SpectralPoint, b: f64) -> Result<f64> {
    let lhs = resolvent_apply(f, pt, b)?.conj();
    let swapped = SpectralPoint {
        z: pt.z.conj(),
        branch: if pt.branch == Branch::Plus { Branch::Minus } else { Branch::Plus },
    };
    let rhs = resolvent_apply(&f.conj(), swapped, -b)?;
    relative_l2(&rhs, &lhs)
}

/// `‖R⁺(z)f − R⁻(z)f‖ / ‖R⁺(z)f‖` on the grid, for real `z`.
pub fn branch_mismatch(f: &Field, z: f64, b: f64) -> Result<f64> {
    let spec = Spectrum::of_field(f)?;
    let zc = C64::new(z, 0.0);
    let p = spec.resolvent(SpectralPoint::plus(zc), b)?.grid_values();
    let m = spec.resolvent(SpectralPoint::minus(zc), b)?.grid_values();
    Ok(rel_diff(&m, &p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScan {
    pub lambdas: Vec<f64>,
    pub y: f64,
    /// `‖R⁺(λ + iy) f‖_{L²}`.
    pub single: Vec<f64>,
    /// `‖(R⁺(λ + iy) − R⁻(λ − iy)) f‖_{L²}`.
    pub difference: Vec<f64>,
    /// Log-log fits over the entries with `λ ≥ 10`.
    pub single_fit: Option<LineFit>,
    pub difference_fit: Option<LineFit>,
}

/// Norms of `R⁺(λ + iy) f` and of the branch difference along `λ`. Only
/// `p = 2` is supported; norms are computed by Plancherel on the continuous
/// frequency line.
pub fn lambda_decay_scan(f: &Field, y: f64, b: f64, lambdas: &[f64], p: f64) -> Result<LambdaScan> {
    if p != 2.0 {
        return Err(Error::InvalidParams(format!("only p = 2 is supported, got {p}")));
    }
    if y <= 0.0 {
        return Err(Error::OutsideRegion(format!("need y > 0 for p = 2, got {y}")));
    }
    let spec = Spectrum::of_field(f)?;
    let mut single = Vec::with_capacity(lambdas.len());
    let mut difference = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let rp = spec.resolvent(SpectralPoint::plus(C64::new(lam, y)), b)?;
        let rm = spec.resolvent(SpectralPoint::minus(C64::new(lam, -y)), b)?;
        single.push(rp.l2_norm()?);
        let one = C64::new(1.0, 0.0);
        difference.push(Spectrum::combine(&[(one, &rp), (-one, &rm)])?.l2_norm()?);
    }
    let fit = |vals: &[f64]| -> Option<LineFit> {
        let (x, v): (Vec<f64>, Vec<f64>) =
            lambdas.iter().zip(vals).filter(|(l, _)| **l >= 10.0).map(|(l, v)| (*l, *v)).unzip();
        (x.len() >= 3).then(|| loglog_slope(&x, &v).ok()).flatten()
    };
    Ok(LambdaScan {
        lambdas: lambdas.to_vec(),
        y,
        single_fit: fit(&single),
        difference_fit: fit(&difference),
        single,
        difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        Grid1D::new(256, 20.0).unwrap()
    }

    fn gauss(g: Grid1D) -> Field {
        Field::from_real_fn(g, |x| (-x * x / 2.0).exp())
    }

    #[test]
    fn delta_b_on_gaussian() {
        let g = grid();
        let b = 0.7;
        let out = apply_delta_b(&gauss(g), b).unwrap();
        let err = (0..g.len())
            .map(|j| {
                let x = g.x(j);
                let e = (-x * x / 2.0).exp();
                let exact = C64::new((x * x - 1.0) * e, b * (0.5 - x * x) * e);
                (out.values[j] - exact).norm()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn delta_b_frequency_side_agrees() {
        let g = grid();
        let f = Field::from_fn(g, |x| C64::from_polar((-(x - 1.0).powi(2)).exp(), 0.5 * x));
        let phys = spectral::to_frequency(&apply_delta_b(&f, 1.3).unwrap()).unwrap();
        let freq = delta_b_frequency(&f, 1.3).unwrap();
        let scale = freq.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = phys.values.iter().zip(&freq.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8 * scale, "{err}");
    }

    #[test]
    fn legendre_panel_integrates_exactly() {
        let p = Panel::new(0.5, 1.5, &|x| C64::new(x.powi(5), x));
        let exact = |r: f64| C64::new((r.powi(6) - 0.5f64.powi(6)) / 6.0, (r * r - 0.25) / 2.0);
        assert!((p.partial(1.2) - exact(1.2)).norm() < 1e-13);
        assert!((p.integral() - exact(1.5)).norm() < 1e-13);
    }

    #[test]
    fn region_checks() {
        assert!(SpectralPoint::plus(C64::new(0.0, -0.44)).check(1.0).is_ok());
        assert!(SpectralPoint::plus(C64::new(0.0, -0.46)).check(1.0).is_err());
        assert!(SpectralPoint::minus(C64::new(0.0, 0.46)).check(-1.0).is_err());
        assert!(SpectralPoint::minus(C64::new(0.0, -3.0)).check(1.0).is_ok());
        assert!(SpectralPoint::plus(C64::new(0.0, 1.0)).check(0.0).is_err());
    }

    #[test]
    fn inversion_gaussian() {
        let r = inversion_residual(&gauss(grid()), SpectralPoint::plus(C64::new(0.3, 0.2)), 1.0).unwrap();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn matches_time_integral() {
        let g = grid();
        let f = gauss(g);
        for (pt, b) in [
            (SpectralPoint::plus(C64::new(0.3, 0.2)), 1.0),
            (SpectralPoint::minus(C64::new(0.3, -0.3)), 1.0),
            (SpectralPoint::plus(C64::new(-0.4, 0.25)), -0.8),
        ] {
            let a = resolvent_apply(&f, pt, b).unwrap();
            let o = resolvent_via_time_integral(&f, pt, b, 120.0).unwrap();
            let e = relative_l2(&a, &o).unwrap();
            assert!(e < 1e-5, "{pt} b={b}: {e}");
        }
    }

    #[test]
    fn identities() {
        let f = gauss(grid());
        let r = resolvent_identity_residual(&f, C64::new(0.5, 0.3), C64::new(-0.2, 0.6), 1.0).unwrap();
        assert!(r < 1e-5, "{r}");
        let same = resolvent_identity_residual(&f, C64::new(0.5, 0.3), C64::new(0.5, 0.3), 1.0).unwrap();
        assert!(same < 1e-12);
        let m = mixed_identity_residual(&f, C64::new(0.5, 0.3), C64::new(-0.2, -0.1), 1.0).unwrap();
        assert!(m < 1e-5, "{m}");
        assert!(mixed_identity_residual(&f, C64::new(0.5, 0.1), C64::new(0.0, 0.2), 1.0).is_err());
    }

    #[test]
    fn sigma_shift() {
        let g = grid();
        let f = Field::from_real_fn(g, |x| x * (-x * x / 2.0).exp());
        assert!(sigma_shift_check(&f, C64::new(0.4, 0.1), 1.0, 0.0).unwrap() < 1e-12);
        let d = sigma_shift_check(&f, C64::new(0.4, 0.1), 1.0, 0.25).unwrap();
        assert!(d < 1e-5, "{d}");
        let t = sigma_shift_time_check(&f, C64::new(0.4, 0.1), 1.0, 0.25, 120.0).unwrap();
        assert!(t < 1e-5, "{t}");
    }

    #[test]
    fn conjugation_and_linearity() {
        let g = grid();
        let f = Field::from_fn(g, |x| C64::from_polar((-(x - 0.5).powi(2)).exp(), 0.3 * x));
        let h = Field::from_real_fn(g, |x| (-x * x / 3.0).exp());
        let pt = SpectralPoint::plus(C64::new(0.3, 0.2));
        assert!(conjugation_defect(&f, pt, 1.0).unwrap() < 1e-10);
        let (a, c) = (C64::new(0.7, -1.1), C64::new(-0.4, 2.0));
        let mix = f.scale(a).add(&h.scale(c)).unwrap();
        let lhs = resolvent_apply(&mix, pt, 1.0).unwrap();
        let rhs = resolvent_apply(&f, pt, 1.0)
            .unwrap()
            .scale(a)
            .add(&resolvent_apply(&h, pt, 1.0).unwrap().scale(c))
            .unwrap();
        assert!(relative_l2(&lhs, &rhs).unwrap() < 1e-12);
    }

    #[test]
    fn branches_differ_on_real_axis() {
        let d = branch_mismatch(&gauss(grid()), 0.5, 1.0).unwrap();
        assert!(d > 1e-3, "{d}");
    }

    #[test]
    fn rejects_unresolved_input() {
        let g = Grid1D::new(64, 20.0).unwrap();
        let f = Field::from_real_fn(g, |x| (-x * x * 20.0).exp());
        assert!(Spectrum::of_field(&f).is_err());
    }
}
