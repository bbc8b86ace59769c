//! Radially symmetric self-similar profiles
//! `Q'' + (d-1)/r Q' - Q + ib(αQ + rQ') + Q|Q|^{p-1} = 0`, `α = 2/(p-1)`,
//! found by shooting on `(Q(0), b)` with `Q'(0) = 0`.
//!
//! Far field: the admissible branch is `Q ~ c r^{-α - i/b}`; the other branch
//! is the chirp `Q ~ A e^{-ibr²/2} r^{α-d+i/b}`. The shooting objective is the
//! amplitude `A`, read off from `Q'`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RadialField;
use crate::fit::loglog_slope;
use crate::grid::RadialGrid;
use crate::ode::{integrate, OdeOptions, OdeSystem, Stop};
use crate::params::ModelParams;
use crate::C64;

/// The profile equation without the range checks of [`ModelParams`], so the
/// classical soliton (`b = 0`) can be used as a test case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileEquation {
    /// Dimension; real values are accepted so that branches can be
    /// continued between integer dimensions.
    pub d: f64,
    pub p: f64,
    pub b: f64,
}

impl ProfileEquation {
    pub fn new(d: f64, p: f64, b: f64) -> Result<Self> {
        if !(d >= 1.0) || !(p > 1.0) || !(b >= 0.0) || !b.is_finite() {
            return Err(Error::InvalidParams(format!("bad profile equation d = {d}, p = {p}, b = {b}")));
        }
        Ok(Self { d, p, b })
    }

    pub fn from_params(m: &ModelParams) -> Self {
        Self { d: m.d as f64, p: m.p, b: m.b }
    }

    pub fn alpha(&self) -> f64 {
        2.0 / (self.p - 1.0)
    }

    /// `Q''` from the equation; the `r = 0` value uses `Q'(0) = 0`.
    pub fn second_derivative(&self, r: f64, q: C64, qp: C64) -> C64 {
        let ib = C64::new(0.0, self.b);
        let nl = q * q.norm().powf(self.p - 1.0);
        if r == 0.0 {
            return (q - ib * self.alpha() * q - nl) / self.d;
        }
        -(self.d - 1.0) / r * qp + q - ib * (self.alpha() * q + r * qp) - nl
    }

    /// Left-hand side of the equation given `Q''`.
    pub fn residual(&self, r: f64, q: C64, qp: C64, qpp: C64) -> C64 {
        let ib = C64::new(0.0, self.b);
        let lap = if r == 0.0 { qpp * self.d } else { qpp + (self.d - 1.0) / r * qp };
        lap - q + ib * (self.alpha() * q + r * qp) + q * q.norm().powf(self.p - 1.0)
    }

    /// `|Q'|²/2 - |Q|²/2 + |Q|^{p+1}/(p+1)`; conserved when `b = 0`, `d = 1`.
    pub fn energy(&self, q: C64, qp: C64) -> f64 {
        0.5 * qp.norm_sqr() - 0.5 * q.norm_sqr() + q.norm().powf(self.p + 1.0) / (self.p + 1.0)
    }
}

impl OdeSystem for ProfileEquation {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, r: f64, y: &[f64], dy: &mut [f64]) {
        let q = C64::new(y[0], y[1]);
        let qp = C64::new(y[2], y[3]);
        let qpp = self.second_derivative(r, q, qp);
        dy[0] = qp.re;
        dy[1] = qp.im;
        dy[2] = qpp.re;
        dy[3] = qpp.im;
    }
}

pub fn profile_rhs(r: f64, q: C64, qp: C64, eq: &ProfileEquation) -> C64 {
    eq.second_derivative(r, q, qp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileEvent {
    /// `|Q|` exceeded the overflow bound.
    Overflow { r: f64 },
    /// `Q` went through zero (sign change of a real trajectory, or `|Q|`
    /// below `10^{-10} Q(0)`).
    ZeroCrossing { r: f64 },
}

#[derive(Debug, Clone)]
pub struct ProfileTrajectory {
    pub r: Vec<f64>,
    pub q: Vec<C64>,
    pub qp: Vec<C64>,
    pub energy: Vec<f64>,
    pub event: Option<ProfileEvent>,
    pub steps: usize,
}

const OVERFLOW: f64 = 1e6;

/// Integrate from `Q(0) = q0`, `Q'(0) = 0` through the given nodes (first
/// node must be 0).
pub fn integrate_on_nodes(q0: f64, eq: &ProfileEquation, nodes: &[f64], opts: &OdeOptions) -> Result<ProfileTrajectory> {
    if !(q0 > 0.0) {
        return Err(Error::InvalidParams(format!("Q(0) must be > 0, got {q0}")));
    }
    if nodes.first() != Some(&0.0) {
        return Err(Error::InvalidParams("profile nodes must start at r = 0".into()));
    }
    let mut event = None;
    let mut prev_re = q0;
    let tr = integrate(eq, nodes, &[q0, 0.0, 0.0, 0.0], opts, |_, r, y| {
        let q = C64::new(y[0], y[1]);
        let a = q.norm();
        if a > OVERFLOW * q0.max(1.0) {
            event = Some(ProfileEvent::Overflow { r });
            return true;
        }
        let real = y[1].abs() <= 1e-12 * a;
        if a < 1e-10 * q0 || (real && prev_re * y[0] < 0.0) {
            event = Some(ProfileEvent::ZeroCrossing { r });
            return true;
        }
        prev_re = y[0];
        false
    })?;
    let q: Vec<C64> = tr.y.iter().map(|y| C64::new(y[0], y[1])).collect();
    let qp: Vec<C64> = tr.y.iter().map(|y| C64::new(y[2], y[3])).collect();
    let energy = q.iter().zip(&qp).map(|(a, b)| eq.energy(*a, *b)).collect();
    debug_assert!(event.is_some() == matches!(tr.stop, Stop::Event { .. }));
    Ok(ProfileTrajectory { r: tr.t, q, qp, energy, event, steps: tr.steps })
}

/// Integrate onto a uniform grid of spacing close to `h` on `[0, r_max]`.
pub fn integrate_profile(q0: f64, eq: &ProfileEquation, r_max: f64, h: f64, opts: &OdeOptions) -> Result<ProfileTrajectory> {
    if !(r_max > 0.0 && h > 0.0) {
        return Err(Error::InvalidParams("need r_max > 0 and h > 0".into()));
    }
    let n = (r_max / h).ceil() as usize + 1;
    let grid = RadialGrid::uniform(n.max(4), r_max)?;
    integrate_on_nodes(q0, eq, grid.nodes(), opts)
}

/// Chirp phase `br²/2`.
fn chirp_phase(b: f64, r: f64) -> f64 {
    0.5 * b * r * r
}

/// Nodes on `[0, r2]`: coarse up to `r1`, then 16 per chirp period.
fn window_nodes(b: f64, r1: f64, r2: f64) -> Vec<f64> {
    let mut nodes: Vec<f64> = Vec::new();
    let coarse = (r1 / 0.5).ceil() as usize;
    for i in 0..coarse {
        nodes.push(r1 * i as f64 / coarse as f64);
    }
    let s1 = chirp_phase(b, r1);
    let s2 = chirp_phase(b, r2);
    let m = ((s2 - s1) / (2.0 * PI) * 16.0).ceil() as usize;
    for i in 0..=m {
        let s = s1 + (s2 - s1) * i as f64 / m as f64;
        nodes.push((2.0 * s / b).sqrt());
    }
    nodes
}

/// Amplitude of the chirped far-field branch of the trajectory, estimated on
/// `[r1, r2]` by demodulating `Q'` and averaging with a Hann weight in the
/// phase variable `s = br²/2`.
pub fn demodulate(eq: &ProfileEquation, r: &[f64], qp: &[C64], r1: f64, r2: f64) -> Result<C64> {
    let b = eq.b;
    let s1 = chirp_phase(b, r1);
    let s2 = chirp_phase(b, r2);
    if s2 - s1 < 10.0 * PI {
        return Err(Error::InvalidParams(format!(
            "fit window [{r1}, {r2}] spans {:.2} chirp periods, need at least 5",
            (s2 - s1) / (2.0 * PI)
        )));
    }
    let expo = C64::new(eq.alpha() - eq.d + 1.0, 1.0 / b);
    let ib = C64::new(0.0, -b);
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for i in 0..r.len().saturating_sub(1) {
        let (ra, rb) = (r[i], r[i + 1]);
        if ra < r1 * (1.0 - 1e-12) || rb > r2 * (1.0 + 1e-12) {
            continue;
        }
        let val = |j: usize| {
            let s = chirp_phase(b, r[j]);
            let w = (PI * (s - s1) / (s2 - s1)).sin().powi(2);
            let d = qp[j] * C64::from_polar(1.0, s) / (ib * C64::new(r[j], 0.0).powc(expo));
            (w, d)
        };
        let ds = chirp_phase(b, rb) - chirp_phase(b, ra);
        let (wa, da) = val(i);
        let (wb, db) = val(i + 1);
        num += 0.5 * ds * (da * wa + db * wb);
        den += 0.5 * ds * (wa + wb);
    }
    if den == 0.0 {
        return Err(Error::InvalidParams("fit window contains no nodes".into()));
    }
    Ok(num / den)
}

/// Default fit window: the outer 20% of `[0, r_max]`.
pub fn default_window(r_max: f64) -> (f64, f64) {
    (0.8 * r_max, r_max)
}

pub fn shooting_objective(q0: f64, eq: &ProfileEquation, window: (f64, f64), opts: &OdeOptions) -> Result<C64> {
    let (r1, r2) = window;
    if !(r1 > 0.0 && r2 > r1) {
        return Err(Error::InvalidParams(format!("bad fit window [{r1}, {r2}]")));
    }
    if chirp_phase(eq.b, r2) - chirp_phase(eq.b, r1) < 10.0 * PI {
        return Err(Error::InvalidParams(format!("fit window [{r1}, {r2}] shorter than 5 chirp periods")));
    }
    let nodes = window_nodes(eq.b, r1, r2);
    let tr = integrate_on_nodes(q0, eq, &nodes, opts)?;
    if let Some(ev) = tr.event {
        let r = match ev {
            ProfileEvent::Overflow { r } | ProfileEvent::ZeroCrossing { r } => r,
        };
        return Err(Error::Integrator { r, reason: format!("trajectory rejected: {ev:?}") });
    }
    demodulate(eq, &tr.r, &tr.qp, r1, r2)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub r_max: f64,
    /// Spacing of the stored profile.
    pub h: f64,
    pub rtol: f64,
    pub atol: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Coarse scan resolution over the bracket before Newton.
    pub scan: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self { r_max: 100.0, h: 0.01, rtol: 1e-11, atol: 1e-14, tol: 1e-10, max_iter: 100, scan: 0 }
    }
}

impl ShootingConfig {
    fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, ..OdeOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct Profile {
    pub params: ModelParams,
    pub grid: RadialGrid,
    pub q: Vec<C64>,
    pub qp: Vec<C64>,
    pub b_star: f64,
    pub q0: f64,
    /// Mean of `r^α |Q|` over the outer decade.
    pub c_p: f64,
    /// `(max - min)/mean` of `r^α |Q|` over the outer decade.
    pub flatness: f64,
    /// `sup r^{(p+1)/(p-1)} |Q'|` over the outer decade.
    pub dq_decay: f64,
    /// Final `|objective|`.
    pub objective: f64,
    pub iterations: usize,
}

/// Far-field summary `(c_p, flatness, dq_decay)` over `[r_max/10, r_max]`.
pub fn far_field(eq: &ProfileEquation, r: &[f64], q: &[C64], qp: &[C64]) -> (f64, f64, f64) {
    let r_max = *r.last().unwrap();
    let a = eq.alpha();
    let mut vals = Vec::new();
    let mut dq: f64 = 0.0;
    for i in 0..r.len() {
        if r[i] >= 0.1 * r_max {
            vals.push(r[i].powf(a) * q[i].norm());
            dq = dq.max(r[i].powf((eq.p + 1.0) / (eq.p - 1.0)) * qp[i].norm());
        }
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
    let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
    (mean, (hi - lo) / mean, dq)
}

impl Profile {
    pub fn equation(&self) -> ProfileEquation {
        ProfileEquation { d: self.params.d as f64, p: self.params.p, b: self.b_star }
    }

    pub fn min_abs(&self) -> f64 {
        self.q.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }

    /// Log-log slope of `|Q|` over the outer decade.
    pub fn far_field_slope(&self) -> Result<f64> {
        let r_max = self.grid.r_max();
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .grid
            .nodes()
            .iter()
            .zip(&self.q)
            .filter(|(r, _)| **r >= 0.1 * r_max)
            .map(|(r, q)| (*r, q.norm()))
            .unzip();
        Ok(loglog_slope(&x, &y)?.slope)
    }

    pub fn field(&self) -> Result<RadialField> {
        RadialField::new(self.grid.clone(), self.q.clone())
    }

    /// Profile invariants: non-vanishing, far-field flatness below 1%.
    pub fn check(&self) -> Result<()> {
        if !(self.min_abs() > 0.0) {
            return Err(Error::InvalidParams("profile vanishes on the grid".into()));
        }
        if !(self.flatness < 0.01) {
            return Err(Error::InvalidParams(format!("far-field flatness {:.3e} >= 1%", self.flatness)));
        }
        Ok(())
    }
}

/// Build a [`Profile`] from converged shooting data.
pub fn build_profile(params: &ModelParams, q0: f64, b_star: f64, cfg: &ShootingConfig, objective: f64, iterations: usize) -> Result<Profile> {
    let eq = ProfileEquation { d: params.d as f64, p: params.p, b: b_star };
    let tr = integrate_profile(q0, &eq, cfg.r_max, cfg.h, &cfg.ode())?;
    if let Some(ev) = tr.event {
        return Err(Error::Integrator { r: cfg.r_max, reason: format!("converged trajectory rejected: {ev:?}") });
    }
    let (c_p, flatness, dq_decay) = far_field(&eq, &tr.r, &tr.q, &tr.qp);
    Ok(Profile {
        params: params.with_b(b_star)?,
        grid: RadialGrid::from_nodes(tr.r)?,
        q: tr.q,
        qp: tr.qp,
        b_star,
        q0,
        c_p,
        flatness,
        dq_decay,
        objective,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonResult {
    pub q0: f64,
    pub b: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Damped Newton on `(Q(0), b)` with a forward-difference Jacobian; `d` and
/// `p` are taken from `eq`, whose `b` is ignored.
pub fn newton_shoot(
    eq: &ProfileEquation,
    start: (f64, f64),
    window: (f64, f64),
    opts: &OdeOptions,
    tol: f64,
    max_iter: usize,
    landscape: &mut Vec<(f64, f64, f64)>,
) -> Result<NewtonResult> {
    let eval = |q0: f64, b: f64| -> Option<C64> {
        if !(q0 > 0.0 && b > 0.0) {
            return None;
        }
        shooting_objective(q0, &ProfileEquation { b, ..*eq }, window, opts).ok()
    };
    let mut x = [start.0, start.1];
    let Some(mut fx) = eval(x[0], x[1]) else {
        return Err(Error::NoConvergence { iterations: 0, residual: f64::INFINITY, landscape: landscape.clone() });
    };
    landscape.push((x[0], x[1], fx.norm()));
    for it in 0..max_iter {
        if fx.norm() < tol {
            return Ok(NewtonResult { q0: x[0], b: x[1], residual: fx.norm(), iterations: it });
        }
        let hq = 1e-6 * x[0];
        let hb = 1e-6 * x[1];
        let fail = |it: usize, r: f64, l: &Vec<(f64, f64, f64)>| Error::NoConvergence { iterations: it, residual: r, landscape: l.clone() };
        let (Some(fq), Some(fb)) = (eval(x[0] + hq, x[1]), eval(x[0], x[1] + hb)) else {
            return Err(fail(it, fx.norm(), landscape));
        };
        let jq = (fq - fx) / hq;
        let jb = (fb - fx) / hb;
        // real 2x2 system [jq jb] (dq, db) = -fx
        let det = jq.re * jb.im - jb.re * jq.im;
        if det == 0.0 || !det.is_finite() {
            return Err(fail(it, fx.norm(), landscape));
        }
        let dq = (-fx.re * jb.im + jb.re * fx.im) / det;
        let db = (-jq.re * fx.im + jq.im * fx.re) / det;
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-4 {
            let cand = [x[0] + step * dq, x[1] + step * db];
            if let Some(fc) = eval(cand[0], cand[1]) {
                if fc.norm() < fx.norm() {
                    x = cand;
                    fx = fc;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        landscape.push((x[0], x[1], fx.norm()));
        if !accepted {
            return Err(fail(it + 1, fx.norm(), landscape));
        }
    }
    if fx.norm() < tol {
        return Ok(NewtonResult { q0: x[0], b: x[1], residual: fx.norm(), iterations: max_iter });
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: fx.norm(), landscape: landscape.clone() })
}

/// Newton from the best point of an optional coarse scan over the bracket
/// (or from the bracket centre), then the converged profile on the storage
/// grid.
pub fn find_profile(params: &ModelParams, q0_range: (f64, f64), b_range: (f64, f64), cfg: &ShootingConfig) -> Result<Profile> {
    let window = default_window(cfg.r_max);
    let opts = cfg.ode();
    let eq = ProfileEquation::from_params(params);
    let mut landscape: Vec<(f64, f64, f64)> = Vec::new();
    let mut start = (0.5 * (q0_range.0 + q0_range.1), 0.5 * (b_range.0 + b_range.1));
    if cfg.scan >= 2 {
        let n = cfg.scan;
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let q0 = q0_range.0 + (q0_range.1 - q0_range.0) * i as f64 / (n - 1) as f64;
                let b = b_range.0 + (b_range.1 - b_range.0) * j as f64 / (n - 1) as f64;
                let a = shooting_objective(q0, &ProfileEquation { b, ..eq }, window, &opts).map_or(f64::INFINITY, |v| v.norm());
                landscape.push((q0, b, a));
                if a < best {
                    best = a;
                    start = (q0, b);
                }
            }
        }
    }
    let res = newton_shoot(&eq, start, window, &opts, cfg.tol, cfg.max_iter, &mut landscape)?;
    build_profile(params, res.q0, res.b, cfg, res.residual, res.iterations)
}

/// Sixth-order central second difference on a uniform grid, using the even
/// extension `Q(-r) = Q(r)` near the origin.
pub fn second_difference(q: &[C64], h: f64) -> Vec<Option<C64>> {
    const W: [f64; 4] = [-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
    let n = q.len();
    let at = |i: isize| -> Option<C64> {
        let j = i.unsigned_abs();
        (j < n).then(|| q[j])
    };
    (0..n as isize)
        .map(|i| {
            let mut acc = at(i)? * W[0];
            for k in 1..4isize {
                acc += (at(i - k)? + at(i + k)?) * W[k as usize];
            }
            Some(acc / (h * h))
        })
        .collect()
}

/// `sup |ΔQ - Q + ib(αQ + rQ') + Q|Q|^{p-1}|` with `Q''` by finite
/// differences and `Q'` from the stored samples. The last three nodes have
/// no centred stencil and are skipped.
pub fn profile_residual(prof: &Profile) -> Result<f64> {
    let h = prof
        .grid
        .uniform_spacing()
        .ok_or_else(|| Error::GridMismatch("profile residual needs a uniform grid".into()))?;
    let eq = prof.equation();
    let qpp = second_difference(&prof.q, h);
    let r = prof.grid.nodes();
    let mut sup: f64 = 0.0;
    for i in 0..r.len() {
        if let Some(d2) = qpp[i] {
            sup = sup.max(eq.residual(r[i], prof.q[i], prof.qp[i], d2).norm());
        }
    }
    Ok(sup)
}

#[derive(Debug, Clone)]
pub struct Potentials {
    pub w1: RadialField,
    pub w2: RadialField,
    /// `sup r² |W1|` over the outer decade.
    pub decay_w1: f64,
    /// `((p+1)/2) c_p^{p-1}`, the far-field target of `r² W1`.
    pub target: f64,
}

/// `W1 = (p+1)/2 |Q|^{p-1}` and `W2 = (p-1)/2 Q² |Q|^{p-3}`.
pub fn potentials_from_profile(prof: &Profile) -> Result<Potentials> {
    prof.check()?;
    let p = prof.params.p;
    let w1: Vec<C64> = prof.q.iter().map(|q| C64::new(0.5 * (p + 1.0) * q.norm().powf(p - 1.0), 0.0)).collect();
    let w2: Vec<C64> = prof.q.iter().map(|q| 0.5 * (p - 1.0) * q * q * q.norm().powf(p - 3.0)).collect();
    let r = prof.grid.nodes();
    let r_max = prof.grid.r_max();
    let decay_w1 = r
        .iter()
        .zip(&w1)
        .filter(|(r, _)| **r >= 0.1 * r_max)
        .map(|(r, w)| r * r * w.re)
        .fold(0.0, f64::max);
    Ok(Potentials {
        w1: RadialField::new(prof.grid.clone(), w1)?,
        w2: RadialField::new(prof.grid.clone(), w2)?,
        decay_w1,
        target: 0.5 * (p + 1.0) * prof.c_p.powf(p - 1.0),
    })
}

/// Linear interpolation of complex samples.
pub fn interpolate(r: &[f64], v: &[C64], x: f64) -> C64 {
    if x <= r[0] {
        return v[0];
    }
    let n = r.len();
    if x >= r[n - 1] {
        return v[n - 1];
    }
    let i = match r.binary_search_by(|a| a.partial_cmp(&x).unwrap()) {
        Ok(i) => return v[i],
        Err(i) => i - 1,
    };
    let t = (x - r[i]) / (r[i + 1] - r[i]);
    v[i] * (1.0 - t) + v[i + 1] * t
}

impl Profile {
    /// Cubic Hermite interpolation of `Q` using the stored `Q'`.
    pub fn eval(&self, x: f64) -> C64 {
        let r = self.grid.nodes();
        let x = x.abs();
        let n = r.len();
        if x >= r[n - 1] {
            // continue along the admissible branch
            let a = C64::new(-self.params.alpha(), -1.0 / self.b_star);
            return self.q[n - 1] * C64::new(x / r[n - 1], 0.0).powc(a);
        }
        let i = r.partition_point(|&a| a <= x).saturating_sub(1).min(n - 2);
        let h = r[i + 1] - r[i];
        let t = (x - r[i]) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        self.q[i] * h00 + self.qp[i] * (h10 * h) + self.q[i + 1] * h01 + self.qp[i + 1] * (h11 * h)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = &self.params;
        let _ = writeln!(s, "# d {}", m.d);
        let _ = writeln!(s, "# p {:e}", m.p);
        let _ = writeln!(s, "# sigma {:e}", m.sigma);
        let _ = writeln!(s, "# b_star {:e}", self.b_star);
        let _ = writeln!(s, "# Q0 {:e}", self.q0);
        let _ = writeln!(s, "# c_p {:e}", self.c_p);
        let _ = writeln!(s, "# flatness {:e}", self.flatness);
        let _ = writeln!(s, "# dq_decay {:e}", self.dq_decay);
        let _ = writeln!(s, "# objective {:e}", self.objective);
        let _ = writeln!(s, "# iterations {}", self.iterations);
        let _ = writeln!(s, "# r re_Q im_Q re_dQ im_dQ");
        for ((r, q), qp) in self.grid.nodes().iter().zip(&self.q).zip(&self.qp) {
            let _ = writeln!(s, "{:e} {:e} {:e} {:e} {:e}", r, q.re, q.im, qp.re, qp.im);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header = std::collections::HashMap::new();
        let mut r = Vec::new();
        let mut q = Vec::new();
        let mut qp = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if let (Some(k), Some(v), None) = (it.next(), it.next(), it.next()) {
                    header.insert(k.to_string(), v.to_string());
                }
                continue;
            }
            let cols: Vec<f64> = line
                .split_whitespace()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", ln + 1)))?;
            if cols.len() != 5 {
                return Err(Error::Format(format!("line {}: expected 5 columns, got {}", ln + 1, cols.len())));
            }
            r.push(cols[0]);
            q.push(C64::new(cols[1], cols[2]));
            qp.push(C64::new(cols[3], cols[4]));
        }
        let get = |k: &str| -> Result<f64> {
            header
                .get(k)
                .ok_or_else(|| Error::Format(format!("missing header field {k}")))?
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("header {k}: {e}")))
        };
        let d = get("d")? as usize;
        let b_star = get("b_star")?;
        let params = crate::params::derive_params(d, get("p")?, b_star, get("sigma")?)?;
        Ok(Profile {
            params,
            grid: RadialGrid::from_nodes(r)?,
            q,
            qp,
            b_star,
            q0: get("Q0")?,
            c_p: get("c_p")?,
            flatness: get("flatness")?,
            dq_decay: get("dq_decay")?,
            objective: get("objective")?,
            iterations: get("iterations")? as usize,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soliton_balance_and_nonlinearity() {
        let eq = ProfileEquation::new(1.0, 3.0, 0.0).unwrap();
        let one = C64::new(1.0, 0.0);
        assert_eq!(profile_rhs(1.0, one, C64::new(0.0, 0.0), &eq), C64::new(0.0, 0.0));
        let q = C64::new(0.7, 0.2);
        let qp = C64::new(0.1, -0.3);
        let a = profile_rhs(1.3, q * 2.0, qp * 2.0, &eq);
        let b = profile_rhs(1.3, q, qp, &eq) * 2.0;
        assert!((a - b).norm() > 1e-3);
    }

    #[test]
    fn origin_series_matches_small_radius() {
        let eq = ProfileEquation::new(3.0, 3.0, 0.9).unwrap();
        let q0 = C64::new(1.8, 0.0);
        let at0 = eq.second_derivative(0.0, q0, C64::new(0.0, 0.0));
        // Q'(r) ≈ Q''(0) r near the origin
        let r = 1e-6;
        let q = q0 + at0 * (0.5 * r * r);
        let near = eq.second_derivative(r, q, at0 * r);
        assert!((near - at0).norm() < 1e-8, "{}", (near - at0).norm());
    }

    #[test]
    fn classical_soliton() {
        let eq = ProfileEquation::new(1.0, 3.0, 0.0).unwrap();
        let tr = integrate_profile(2f64.sqrt(), &eq, 8.0, 0.01, &OdeOptions::default()).unwrap();
        for (r, q) in tr.r.iter().zip(&tr.q) {
            let exact = 2f64.sqrt() / r.cosh();
            assert!((q.re - exact).abs() < 1e-6 && q.im.abs() < 1e-14, "r = {r}");
        }
    }

    #[test]
    fn zero_crossing_event() {
        let eq = ProfileEquation::new(1.0, 3.0, 0.0).unwrap();
        let tr = integrate_profile(2.0, &eq, 20.0, 0.01, &OdeOptions::default()).unwrap();
        assert!(matches!(tr.event, Some(ProfileEvent::ZeroCrossing { .. })));
        assert!(tr.energy.iter().all(|e| e.is_finite()));
    }

    #[test]
    fn short_window_rejected() {
        let eq = ProfileEquation::new(1.0, 7.0, 0.25).unwrap();
        let e = shooting_objective(1.0, &eq, (10.0, 10.5), &OdeOptions::default()).unwrap_err();
        assert!(e.is_validation());
    }

    #[test]
    fn second_difference_is_sixth_order() {
        let h = 0.05;
        let q: Vec<C64> = (0..200).map(|i| C64::new((i as f64 * h).cos(), 0.0)).collect();
        let d2 = second_difference(&q, h);
        for (i, v) in d2.iter().enumerate().take(190) {
            let exact = -(i as f64 * h).cos();
            assert!((v.unwrap().re - exact).abs() < 1e-9);
        }
        assert!(d2[199].is_none());
    }
}
