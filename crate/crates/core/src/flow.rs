//! Renormalized flow `∂_τ v = i(Δ_b - 1 - ibs_c)v + i|v|^{p-1}v` on a
//! one-dimensional periodic box, so that `Q_b` is a stationary solution.
//!
//! Steps are Strang-split: half a nonlinear phase rotation, one exact linear
//! step through the deformed group, another half rotation. An absorbing
//! layer near the box edge removes the outgoing radiation shed by the
//! non-`L²` tail of the profile.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::fit::{fit_line, fit_rate, LineFit, RateFit};
use crate::grid::Grid1D;
use crate::params::ModelParams;
use crate::ode::OdeOptions;
use crate::profile::{integrate_on_nodes, Profile, ProfileEquation};
use crate::propagator::{PropagatorPlan, DEFAULT_OVERSAMPLE};
use crate::spectral::{evaluate_at_points, hom_sobolev_sq, norm, smooth_step, to_frequency, NormKind};
use crate::C64;

/// Absorbing layer. Damping rises smoothly from zero at `inner·L` to its
/// full rate at `0.85·L` and stays there up to the box edge. On top of the
/// rate, the outermost tenth of the box is cut off every step: the exact
/// linear step reads the data as zero outside the box, so anything left at
/// the edge acts like a jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sponge {
    pub inner: f64,
    /// Damping rate per unit `τ`.
    pub strength: f64,
}

impl Default for Sponge {
    fn default() -> Self {
        Self { inner: 0.7, strength: 40.0 }
    }
}

pub const SPONGE_OUTER: f64 = 0.85;
const EDGE: f64 = 0.9;

impl Sponge {
    /// Damping profile in `[0, 1]`.
    pub fn profile(&self, grid: &Grid1D) -> Vec<f64> {
        let l = grid.half_width();
        let (a, b) = (self.inner * l, SPONGE_OUTER * l);
        grid.nodes().iter().map(|x| smooth_step((x.abs() - a) / (b - a))).collect()
    }

    /// Multiplicative mask for a time slice `dt`.
    pub fn mask(&self, grid: &Grid1D, dt: f64) -> Vec<f64> {
        let l = grid.half_width();
        self.profile(grid)
            .into_iter()
            .zip(grid.nodes())
            .map(|(g, x)| (-self.strength * dt * g).exp() * (1.0 - smooth_step((x.abs() - EDGE * l) / ((1.0 - EDGE) * l))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub dtau: f64,
    pub tau_end: f64,
    pub sponge: Option<Sponge>,
    /// Record diagnostics every `cadence` steps.
    pub cadence: usize,
    /// Norms are measured on `|x| <= window·L`.
    pub window: f64,
    pub oversample: f64,
    /// `false` switches the flow to its linear part.
    pub nonlinear: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dtau: 0.01,
            tau_end: 1.0,
            sponge: Some(Sponge::default()),
            cadence: 5,
            window: 0.6,
            oversample: DEFAULT_OVERSAMPLE,
            nonlinear: true,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self, b: f64) -> Result<()> {
        if !(self.dtau > 0.0) || !(self.tau_end >= 0.0) {
            return Err(Error::InvalidParams(format!("need dtau > 0 and tau_end >= 0, got {} and {}", self.dtau, self.tau_end)));
        }
        let budget = PropagatorPlan::budget(b, self.oversample);
        if self.dtau > budget {
            return Err(Error::InvalidParams(format!("dtau = {} exceeds the rescale budget {budget:.4}", self.dtau)));
        }
        if self.cadence == 0 {
            return Err(Error::InvalidParams("cadence must be >= 1".into()));
        }
        if let Some(s) = self.sponge {
            if !(s.inner >= 0.7 && s.inner < SPONGE_OUTER) || !(s.strength >= 0.0) {
                return Err(Error::InvalidParams(format!("sponge inner fraction must lie in [0.7, 0.85), got {}", s.inner)));
            }
            if self.window > s.inner {
                return Err(Error::InvalidParams("measurement window reaches into the sponge".into()));
            }
        }
        if !(self.window > 0.0 && self.window <= 1.0) {
            return Err(Error::InvalidParams(format!("window fraction must lie in (0, 1], got {}", self.window)));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.tau_end / self.dtau).round() as usize
    }
}

fn require_1d(params: &ModelParams) -> Result<()> {
    if params.d != 1 {
        return Err(Error::InvalidParams(format!(
            "the flow runs on a line; radial data in d = {} has no Cartesian box here",
            params.d
        )));
    }
    Ok(())
}

/// Exact solution of `i∂_τ v = -|v|^{p-1}v` over `dtau`.
pub fn nonlinear_substep(v: &Field, dtau: f64, p: f64) -> Field {
    v.map(|z| z * C64::from_polar(1.0, dtau * z.norm().powf(p - 1.0)))
}

/// `e^{i·dtau·(Δ_b - 1 - ibs_c)} v`.
pub fn linear_substep(v: &Field, dtau: f64, params: &ModelParams) -> Result<Field> {
    require_1d(params)?;
    let plan = PropagatorPlan::new(v.grid, params.b, dtau, DEFAULT_OVERSAMPLE)?;
    linear_with(&plan, v, params)
}

fn linear_with(plan: &PropagatorPlan, v: &Field, params: &ModelParams) -> Result<Field> {
    let dt = plan.t;
    let c = C64::from_polar((params.b * params.s_c * dt).exp(), -dt);
    Ok(plan.apply(v)?.scale(c))
}

/// One Strang step without absorption.
pub fn strang_step(v: &Field, dtau: f64, params: &ModelParams) -> Result<Field> {
    let cfg = FlowConfig { dtau, sponge: None, ..FlowConfig::default() };
    Stepper::new(v.grid, &cfg, params)?.step(v)
}

/// Precomputed pieces of a fixed-step integrator.
pub struct Stepper {
    plan: PropagatorPlan,
    params: ModelParams,
    dtau: f64,
    nonlinear: bool,
    half_mask: Option<Vec<f64>>,
}

impl Stepper {
    pub fn new(grid: Grid1D, cfg: &FlowConfig, params: &ModelParams) -> Result<Self> {
        require_1d(params)?;
        cfg.validate(params.b)?;
        Ok(Self {
            plan: PropagatorPlan::new(grid, params.b, cfg.dtau, cfg.oversample)?,
            params: *params,
            dtau: cfg.dtau,
            nonlinear: cfg.nonlinear,
            half_mask: cfg.sponge.map(|s| s.mask(&grid, 0.5 * cfg.dtau)),
        })
    }

    fn absorb(&self, v: &mut Field) {
        if let Some(m) = &self.half_mask {
            for (z, w) in v.values.iter_mut().zip(m) {
                *z *= *w;
            }
        }
    }

    /// `S(dτ/2) N(dτ/2) L(dτ) N(dτ/2) S(dτ/2)`; the absorber is split
    /// symmetrically so that refining `dτ` does not change its strength.
    pub fn step(&self, v: &Field) -> Result<Field> {
        let mut w = v.clone();
        self.absorb(&mut w);
        let p = self.params.p;
        let h = 0.5 * self.dtau;
        if self.nonlinear {
            w = nonlinear_substep(&w, h, p);
        }
        w = linear_with(&self.plan, &w, &self.params)?;
        if self.nonlinear {
            w = nonlinear_substep(&w, h, p);
        }
        self.absorb(&mut w);
        Ok(w)
    }
}

/// Smooth indicator of the measurement window: one on `|x| <= 0.8·wL`,
/// zero beyond `wL`.
pub fn interior_window(grid: &Grid1D, window: f64) -> Vec<f64> {
    let r = window * grid.half_width();
    grid.nodes().iter().map(|x| 1.0 - smooth_step((x.abs() - 0.8 * r) / (0.2 * r))).collect()
}

pub fn windowed(f: &Field, w: &[f64]) -> Field {
    let mut g = f.clone();
    for (z, c) in g.values.iter_mut().zip(w) {
        *z *= *c;
    }
    g
}

/// `Q_b(|x|)` on a Cartesian grid. The profile ODE is integrated from the
/// origin straight onto the node radii `k·dx`, so the samples carry the
/// integrator's accuracy rather than an interpolant's; the spectral
/// Laplacian of a merely `C¹` resampling would be far off.
pub fn resample_profile(prof: &Profile, grid: &Grid1D) -> Result<Field> {
    prof.check()?;
    let n = grid.len();
    let half = n / 2;
    let dx = grid.dx();
    let nodes: Vec<f64> = (0..=half).map(|k| k as f64 * dx).collect();
    let eq = ProfileEquation::from_params(&prof.params.with_b(prof.b_star)?);
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-15, ..OdeOptions::default() };
    let tr = integrate_on_nodes(prof.q0, &eq, &nodes, &opts)?;
    if tr.q.len() != nodes.len() {
        return Err(Error::InvalidParams(format!("profile ODE stopped early: {:?}", tr.event)));
    }
    let vals = (0..n)
        .map(|j| {
            let k = if j >= half { j - half } else { half - j };
            tr.q[k]
        })
        .collect();
    Field::new(*grid, vals, crate::field::Space::Physical)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: RateFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub taus: Vec<f64>,
    /// `‖χ(v - Q_b)‖_{Ḣ^σ}`, `χ` the interior window.
    pub hsigma_eps: Vec<f64>,
    /// `‖χv‖_{Ḣ^{s_c}}`.
    pub hsc_v: Vec<f64>,
    /// `‖χv‖_{L^{p_c}}`.
    pub lpc_v: Vec<f64>,
    pub fits: Vec<NamedFit>,
    /// Reason the run stopped early, if it did.
    pub aborted: Option<String>,
}

impl DiagnosticsSeries {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,hsigma_eps,hsc_v,lpc_v\n");
        for i in 0..self.len() {
            let _ = writeln!(s, "{:e},{:e},{:e},{:e}", self.taus[i], self.hsigma_eps[i], self.hsc_v[i], self.lpc_v[i]);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut out = DiagnosticsSeries {
            taus: vec![],
            hsigma_eps: vec![],
            hsc_v: vec![],
            lpc_v: vec![],
            fits: vec![],
            aborted: None,
        };
        for (k, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", k + 1)))?;
            if v.len() != 4 {
                return Err(Error::Format(format!("line {}: expected 4 columns", k + 1)));
            }
            out.taus.push(v[0]);
            out.hsigma_eps.push(v[1]);
            out.hsc_v.push(v[2]);
            out.lpc_v.push(v[3]);
        }
        Ok(out)
    }
}

pub struct FlowRun {
    pub series: DiagnosticsSeries,
    pub state: Field,
    pub tau: f64,
}

struct Probe<'a> {
    params: &'a ModelParams,
    reference: &'a Field,
    window: Vec<f64>,
}

impl Probe<'_> {
    fn measure(&self, v: &Field) -> Result<(f64, f64, f64)> {
        let wv = windowed(v, &self.window);
        let eps = windowed(&v.sub(self.reference)?, &self.window);
        Ok((
            hom_sobolev_sq(&eps, self.params.sigma)?.sqrt(),
            hom_sobolev_sq(&wv, self.params.s_c)?.sqrt(),
            norm(&wv, NormKind::Lp(self.params.p_c))?,
        ))
    }
}

/// Runs the flow from `v0`, recording `ε = v - reference` and the critical
/// norms every `cadence` steps. Stops early, keeping the partial series,
/// when a norm leaves `10^6` times its initial size or turns non-finite.
pub fn evolve(v0: &Field, reference: &Field, cfg: &FlowConfig, params: &ModelParams) -> Result<FlowRun> {
    v0.ensure_physical()?;
    v0.same_grid(reference)?;
    let stepper = Stepper::new(v0.grid, cfg, params)?;
    let probe = Probe { params, reference, window: interior_window(&v0.grid, cfg.window) };
    let mut series = DiagnosticsSeries {
        taus: vec![],
        hsigma_eps: vec![],
        hsc_v: vec![],
        lpc_v: vec![],
        fits: vec![],
        aborted: None,
    };
    let mut v = v0.clone();
    let first = probe.measure(&v)?;
    let scale0 = [first.0, first.1, first.2];
    let record = |s: &mut DiagnosticsSeries, tau: f64, m: (f64, f64, f64)| {
        s.taus.push(tau);
        s.hsigma_eps.push(m.0);
        s.hsc_v.push(m.1);
        s.lpc_v.push(m.2);
    };
    record(&mut series, 0.0, first);
    let n = cfg.steps();
    let mut tau = 0.0;
    for k in 1..=n {
        let next = stepper.step(&v)?;
        tau = k as f64 * cfg.dtau;
        if !next.is_finite() {
            series.aborted = Some(format!("non-finite state at tau = {tau:.4}"));
            break;
        }
        v = next;
        if k % cfg.cadence == 0 || k == n {
            let m = probe.measure(&v)?;
            let blown = [m.0, m.1, m.2].iter().zip(&scale0).any(|(a, a0)| !a.is_finite() || (*a0 > 0.0 && *a > 1e6 * a0));
            record(&mut series, tau, m);
            if blown {
                series.aborted = Some(format!("norm exceeded 1e6 x initial at tau = {tau:.4}"));
                break;
            }
        }
    }
    Ok(FlowRun { series, state: v, tau })
}

/// Cartesian-to-radial map for even data: trigonometric interpolation at
/// the cell centres `r_j = (j + 1/2)h`.
pub fn radial_samples(f: &Field, h: f64, n: usize) -> Result<Vec<C64>> {
    let spec = to_frequency(f)?;
    evaluate_at_points(&spec, 0.5 * h, h, n)
}

/// Radial-to-Cartesian map: cubic interpolation between cell centres, even
/// through the origin, tapered to zero over the last fifth of `[0, nh]`.
pub fn cartesian_from_radial(values: &[C64], h: f64, grid: &Grid1D) -> Result<Field> {
    let n = values.len();
    if n < 4 {
        return Err(Error::InvalidParams("need at least four radial samples".into()));
    }
    let r_end = n as f64 * h;
    let at = |j: isize| -> C64 {
        if j < 0 {
            values[(-j - 1) as usize]
        } else if j as usize >= n {
            C64::new(0.0, 0.0)
        } else {
            values[j as usize]
        }
    };
    let vals = grid
        .nodes()
        .iter()
        .map(|x| {
            let s = x.abs();
            if s >= r_end {
                return C64::new(0.0, 0.0);
            }
            let u = s / h - 0.5;
            let j = u.floor() as isize;
            let t = u - j as f64;
            let (p0, p1, p2, p3) = (at(j - 1), at(j), at(j + 1), at(j + 2));
            // Catmull-Rom
            let c = p1 + (p2 - p0) * (0.5 * t) + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * (0.5 * t * t)
                + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * (0.5 * t * t * t);
            c * (1.0 - smooth_step((s - 0.8 * r_end) / (0.2 * r_end)))
        })
        .collect();
    Field::new(*grid, vals, crate::field::Space::Physical)
}

/// Applies a projector acting on stacked `(ε, ε̄)` radial vectors to an even
/// Cartesian perturbation and returns the first component.
pub fn project_perturbation(eps: &Field, projector: &faer::Mat<C64>, h: f64) -> Result<Field> {
    let dim = projector.nrows();
    if dim % 2 != 0 || projector.ncols() != dim {
        return Err(Error::InvalidParams("projector must be square of even size".into()));
    }
    let n = dim / 2;
    let z = radial_samples(eps, h, n)?;
    let mut stacked = z.clone();
    stacked.extend(z.iter().map(|c| c.conj()));
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..dim).map(|j| projector[(i, j)] * stacked[j]).sum();
    }
    cartesian_from_radial(&out, h, &eps.grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResult {
    pub series: DiagnosticsSeries,
    /// Fit of `log ‖ε‖_{Ḣ^σ}` against `τ`.
    pub rate: RateFit,
    /// Expected `-b(σ - s_c)`.
    pub expected: f64,
    /// `τ` at which `‖ε‖` first exceeded ten times its initial size.
    pub departure: Option<f64>,
    pub unstable_mode_dominated: bool,
}

/// Evolves `Q_b + ε₀` and fits the decay of `‖ε‖_{Ḣ^σ}`. `q` is `Q_b` on
/// the flow grid.
pub fn perturbation_experiment(q: &Field, eps0: &Field, cfg: &FlowConfig, params: &ModelParams, seed: u64) -> Result<PerturbationResult> {
    let w = interior_window(&q.grid, cfg.window);
    let e0 = hom_sobolev_sq(&windowed(eps0, &w), params.sigma)?.sqrt();
    let q_norm = hom_sobolev_sq(&windowed(q, &w), params.sigma)?.sqrt();
    if e0 > 1e-3 * q_norm * (1.0 + 1e-9) {
        return Err(Error::InvalidParams(format!(
            "perturbation {e0:.3e} exceeds 1e-3 of the profile norm {q_norm:.3e}"
        )));
    }
    let v0 = q.add(eps0)?;
    let run = evolve(&v0, q, cfg, params)?;
    let mut series = run.series;
    let mut end = series.len();
    let mut departure = None;
    if let Some(i) = series.hsigma_eps.iter().position(|e| *e > 10.0 * series.hsigma_eps[0]) {
        departure = Some(series.taus[i]);
        end = i;
    }
    let (taus, logs): (Vec<f64>, Vec<f64>) = series.taus[..end]
        .iter()
        .zip(&series.hsigma_eps[..end])
        .filter(|(_, e)| **e > 0.0)
        .map(|(t, e)| (*t, e.ln()))
        .unzip();
    let rate = fit_rate(&taus, &logs, 0.1, 200, seed)?;
    series.fits.push(NamedFit { name: "log_hsigma_eps".into(), fit: rate });
    Ok(PerturbationResult {
        series,
        rate,
        expected: -params.b * (params.sigma - params.s_c),
        departure,
        unstable_mode_dominated: departure.is_some(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalNormFit {
    /// `‖v‖²_{Ḣ^{s_c}}` against `τ`.
    pub hsc_sq: LineFit,
    /// `‖v‖^{p_c}_{L^{p_c}}` against `τ`.
    pub lpc_pow: LineFit,
    pub window: (f64, f64),
    /// Set when the fit was cut short by a plateau.
    pub plateau: Option<f64>,
    /// Growth factor of `‖v‖_{Ḣ^{s_c}}` across the fit window.
    pub growth: f64,
}

/// Affine fits of the squared critical Sobolev norm and the `p_c`-th power
/// of the critical Lebesgue norm, restricted to the stretch before the
/// windowed norm saturates. The plateau starts where the growth rate of
/// `‖v‖²_{Ḣ^{s_c}}` falls below half of its peak after the transient.
pub fn critical_norm_track(series: &DiagnosticsSeries, p_c: f64) -> Result<CriticalNormFit> {
    let n = series.len();
    if n < 8 {
        return Err(Error::InvalidParams("series too short for a growth fit".into()));
    }
    let sq: Vec<f64> = series.hsc_v.iter().map(|v| v * v).collect();
    let pw: Vec<f64> = series.lpc_v.iter().map(|v| v.powf(p_c)).collect();
    let skip = n / 10;
    let rate: Vec<f64> = (0..n - 1).map(|i| (sq[i + 1] - sq[i]) / (series.taus[i + 1] - series.taus[i])).collect();
    let peak_at = (skip..n - 1).max_by(|&a, &b| rate[a].partial_cmp(&rate[b]).unwrap()).unwrap_or(skip);
    let peak = rate[peak_at];
    let stop = (peak_at..n - 1).find(|&i| rate[i] < 0.5 * peak);
    let end = stop.map(|i| i + 1).unwrap_or(n).max(skip + 3);
    let t = &series.taus[skip..end];
    let hsc_sq = fit_line(t, &sq[skip..end])?;
    let lpc_pow = fit_line(t, &pw[skip..end])?;
    Ok(CriticalNormFit {
        hsc_sq,
        lpc_pow,
        window: (t[0], *t.last().unwrap()),
        plateau: stop.map(|i| series.taus[i]),
        growth: series.hsc_v[end - 1] / series.hsc_v[skip],
    })
}

/// Static growth laws of the cutoff norms `‖Q_b φ(·/R)‖²_{Ḣ^{s_c}}` and
/// `‖Q_b φ(·/R)‖^{p_c}_{L^{p_c}}` against `ln R`. A region of size
/// `R₀e^{bτ}` turns these into `τ`-slopes after multiplying by `b`.
pub fn static_critical_slopes(q: &Field, radii: &[f64], params: &ModelParams) -> Result<(LineFit, LineFit)> {
    let mut lr = Vec::new();
    let mut hs = Vec::new();
    let mut lp = Vec::new();
    for &r in radii {
        let cut = q.weighted(|x| crate::spectral::cutoff(x / r));
        lr.push(r.ln());
        hs.push(hom_sobolev_sq(&cut, params.s_c)?);
        lp.push(norm(&cut, NormKind::Lp(params.p_c))?.powf(params.p_c));
    }
    Ok((fit_line(&lr, &hs)?, fit_line(&lr, &lp)?))
}

/// Blowup variables back to physical ones with `λ(t) = √(2b(T - t))`:
/// `t = T(1 - e^{-2bτ})` and `u(x) = λ^{-2/(p-1)} v(x/λ) e^{iτ}` on the grid
/// shrunk by `λ`.
pub fn physical_reconstruction(v: &Field, tau: f64, params: &ModelParams, t_blow: f64) -> Result<(Field, f64)> {
    if !(tau >= 0.0) || !(t_blow > 0.0) {
        return Err(Error::InvalidParams(format!("need tau >= 0 and T > 0, got {tau} and {t_blow}")));
    }
    let b = params.b;
    let t = -t_blow * (-2.0 * b * tau).exp_m1();
    let lambda = (2.0 * b * t_blow).sqrt() * (-b * tau).exp();
    let grid = Grid1D::new(v.grid.len(), lambda * v.grid.half_width())?;
    let c = C64::from_polar(lambda.powf(-params.alpha()), tau);
    Ok((Field::new(grid, v.values.iter().map(|z| z * c).collect(), v.space)?, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params;

    fn params() -> ModelParams {
        derive_params(1, 7.0, 1.0, 0.3).unwrap()
    }

    fn gauss(g: Grid1D) -> Field {
        Field::from_fn(g, |x| C64::new((-x * x).exp(), 0.3 * x * (-x * x / 2.0).exp()))
    }

    #[test]
    fn nonlinear_substep_is_phase_only() {
        let g = Grid1D::new(64, 5.0).unwrap();
        let v = gauss(g);
        let w = nonlinear_substep(&v, 0.37, 7.0);
        for (a, b) in v.values.iter().zip(&w.values) {
            assert!((a.norm() - b.norm()).abs() < 1e-14);
        }
        let one = Field::from_real_fn(g, |_| 1.0);
        let r = nonlinear_substep(&one, 0.25, 7.0);
        assert!((r.values[3].arg() - 0.25).abs() < 1e-15);
        assert_eq!(nonlinear_substep(&v, 0.0, 7.0).values, v.values);
    }

    #[test]
    fn linear_substep_isometry_and_contraction() {
        let m = params();
        let g = Grid1D::new(512, 30.0).unwrap();
        let v = gauss(g);
        let dt = 0.3;
        let w = linear_substep(&v, dt, &m).unwrap();
        let a = hom_sobolev_sq(&v, m.s_c).unwrap().sqrt();
        let b = hom_sobolev_sq(&w, m.s_c).unwrap().sqrt();
        assert!((a - b).abs() < 1e-9 * a, "{a} {b}");
        let a = hom_sobolev_sq(&v, m.sigma).unwrap().sqrt();
        let b = hom_sobolev_sq(&w, m.sigma).unwrap().sqrt();
        let expect = (-m.b * (m.sigma - m.s_c) * dt).exp();
        assert!((b / a - expect).abs() < 1e-9);
    }

    #[test]
    fn linear_only_step_matches_linear_substep() {
        let m = params();
        let g = Grid1D::new(256, 20.0).unwrap();
        let v = gauss(g);
        let cfg = FlowConfig { dtau: 0.05, sponge: None, nonlinear: false, ..FlowConfig::default() };
        let a = Stepper::new(g, &cfg, &m).unwrap().step(&v).unwrap();
        let b = linear_substep(&v, 0.05, &m).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn zero_data_stays_zero() {
        let m = params();
        let g = Grid1D::new(128, 20.0).unwrap();
        let z = Field::zeros(g);
        let cfg = FlowConfig { tau_end: 0.2, ..FlowConfig::default() };
        let run = evolve(&z, &z, &cfg, &m).unwrap();
        assert!(run.state.max_abs() == 0.0);
        assert!(run.series.hsc_v.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn plain_nls_conserves_mass() {
        let mut m = derive_params(1, 7.0, 1.0, 0.3).unwrap();
        m.b = 0.0;
        let g = Grid1D::new(256, 20.0).unwrap();
        let v = gauss(g);
        let cfg = FlowConfig { dtau: 0.01, tau_end: 1.0, sponge: None, ..FlowConfig::default() };
        let st = Stepper::new(g, &cfg, &m).unwrap();
        let m0 = norm(&v, NormKind::Lp(2.0)).unwrap();
        let mut w = v;
        for _ in 0..100 {
            w = st.step(&w).unwrap();
        }
        assert!((norm(&w, NormKind::Lp(2.0)).unwrap() - m0).abs() < 1e-8 * m0);
    }

    #[test]
    fn config_rejects_shallow_sponge_and_large_step() {
        let mut cfg = FlowConfig { sponge: Some(Sponge { inner: 0.5, strength: 1.0 }), ..FlowConfig::default() };
        assert!(cfg.validate(1.0).is_err());
        cfg.sponge = None;
        cfg.dtau = 1.0;
        assert!(cfg.validate(1.0).is_err());
    }

    #[test]
    fn reconstruction_conventions() {
        let m = params();
        let g = Grid1D::new(128, 10.0).unwrap();
        let v = gauss(g);
        let tb = 1.0 / (2.0 * m.b);
        let (u, t) = physical_reconstruction(&v, 0.0, &m, tb).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(u.values, v.values);
        let a = hom_sobolev_sq(&v, m.s_c).unwrap().sqrt();
        for tau in [0.5, 1.5, 3.0] {
            let (u, t) = physical_reconstruction(&v, tau, &m, tb).unwrap();
            let c = hom_sobolev_sq(&u, m.s_c).unwrap().sqrt();
            assert!((c - a).abs() < 1e-10 * a);
            let s = hom_sobolev_sq(&u, m.sigma).unwrap().sqrt() * (tb - t).powf(0.5 * (m.sigma - m.s_c));
            let s0 = hom_sobolev_sq(&v, m.sigma).unwrap().sqrt() * tb.powf(0.5 * (m.sigma - m.s_c));
            assert!((s - s0).abs() < 1e-10 * s0);
        }
    }

    #[test]
    fn radial_round_trip() {
        let g = Grid1D::new(512, 20.0).unwrap();
        let f = Field::from_real_fn(g, |x| (-x * x).exp());
        let h = 0.05;
        let z = radial_samples(&f, h, 200).unwrap();
        for (j, v) in z.iter().enumerate() {
            let r = (j as f64 + 0.5) * h;
            assert!((v.re - (-r * r).exp()).abs() < 1e-12);
        }
        let back = cartesian_from_radial(&z, h, &g).unwrap();
        assert!(back.sub(&f).unwrap().max_abs() < 1e-4);
    }

    #[test]
    fn csv_round_trip() {
        let s = DiagnosticsSeries {
            taus: vec![0.0, 0.5],
            hsigma_eps: vec![1e-3, 5e-4],
            hsc_v: vec![1.0, 1.1],
            lpc_v: vec![2.0, 2.2],
            fits: vec![],
            aborted: None,
        };
        assert_eq!(DiagnosticsSeries::from_csv(&s.to_csv()).unwrap(), s);
    }
}
