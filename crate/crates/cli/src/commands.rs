use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value as Json};
use ssblow::flow::{
    self, critical_norm_track, evolve, interior_window, perturbation_experiment, project_perturbation,
    resample_profile, static_critical_slopes, windowed, FlowConfig, Sponge,
};
use ssblow::linearized::{assemble_h, discrete_spectrum, j_symmetry_check, resonance_residual, riesz_projections, SpectralWindow};
use ssblow::params::critical_regularity;
use ssblow::plot::{admissible_map, line_plot, Axes, Series};
use ssblow::profile::{find_profile, profile_residual, Profile, ShootingConfig};
use ssblow::propagator::{admissible, dispersive_norm_l1_linf, propagate_with, strichartz_sample};
use ssblow::resolvent::{self as rv, SpectralPoint};
use ssblow::spectral::{cutoff, hom_sobolev_sq, norm, NormKind};
use ssblow::{derive_params, fit, Field, Grid1D, ModelParams, C64};

use crate::config::{sha256_hex, Settings};
use crate::output::{output_root, RunDir};
use crate::{Cli, CliError, Command, FlowArgs, GridArgs, ProfileArgs};

type Res<T> = Result<T, CliError>;

pub fn execute(cli: Cli) -> Res<PathBuf> {
    let name = cli.command.name();
    let mut s = Settings::load(cli.config.as_deref(), name)?;
    let root = output_root(cli.out.clone(), &mut s)?;
    let seed = s.get("seed", cli.seed, 1u64)?;
    match cli.command {
        Command::Propagate { grid, b, t, oversample, width, input } => {
            propagate_cmd(&mut s, &root, grid, b, t, oversample, width, input)
        }
        Command::DispersiveBench { d, b, tmax, points } => dispersive_cmd(&mut s, &root, d, b, tmax, points),
        Command::StrichartzMap { grid, b, t_end, n_t, cells } => strichartz_cmd(&mut s, &root, grid, b, t_end, n_t, cells),
        Command::ResolventCheck { grid, b, z_re, z_im, y, sigma, lambdas } => {
            resolvent_cmd(&mut s, &root, grid, b, C64::new(z_re.unwrap_or(0.3), z_im.unwrap_or(0.2)), y, sigma, lambdas)
        }
        Command::Profile { prof } => profile_cmd(&mut s, &root, prof),
        Command::Spectrum { prof, radial_n, radial_r, threshold } => {
            spectrum_cmd(&mut s, &root, prof, radial_n, radial_r, threshold)
        }
        Command::Evolve { prof, grid, flow } => evolve_cmd(&mut s, &root, prof, grid, flow, seed),
        Command::Perturb { prof, grid, flow, amplitude, project, radial_n, radial_r } => {
            perturb_cmd(&mut s, &root, prof, grid, flow, amplitude, project, radial_n, radial_r, seed)
        }
        Command::Critnorm { prof, grid, flow, r0 } => critnorm_cmd(&mut s, &root, prof, grid, flow, r0, seed),
    }
}

fn grid_from(s: &mut Settings, g: &GridArgs, n: usize, l: f64) -> Res<Grid1D> {
    let n = s.get("n", g.n, n)?;
    let l = s.get("half_width", g.half_width, l)?;
    Ok(Grid1D::new(n, l)?)
}

fn field_csv(f: &Field) -> String {
    let mut out = String::from("x,re,im\n");
    for (j, v) in f.values.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", f.grid.x(j), v.re, v.im);
    }
    out
}

fn read_field_csv(path: &Path) -> Res<Field> {
    let text = std::fs::read_to_string(path)?;
    let bad = |m: &str| CliError::Lib(ssblow::Error::Format(format!("{}: {m}", path.display())));
    let mut xs = Vec::new();
    let mut vals = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(&e.to_string()))?;
        if cols.len() != 3 {
            return Err(bad("expected columns x,re,im"));
        }
        xs.push(cols[0]);
        vals.push(C64::new(cols[1], cols[2]));
    }
    if xs.len() < 2 {
        return Err(bad("too few rows"));
    }
    let g = Grid1D::new(xs.len(), -xs[0])?;
    if xs.iter().enumerate().any(|(j, &x)| (x - g.x(j)).abs() > 1e-9 * g.half_width()) {
        return Err(bad("nodes are not the uniform grid on [-L, L)"));
    }
    Ok(Field::new(g, vals, ssblow::Space::Physical)?)
}

#[allow(clippy::too_many_arguments)]
fn propagate_cmd(
    s: &mut Settings,
    root: &Path,
    grid: GridArgs,
    b: Option<f64>,
    t: Option<f64>,
    oversample: Option<f64>,
    width: Option<f64>,
    input: Option<PathBuf>,
) -> Res<PathBuf> {
    let b = s.get("b", b, 1.0)?;
    let t = s.get("t", t, 0.5)?;
    let os = s.get("oversample", oversample, ssblow::propagator::DEFAULT_OVERSAMPLE)?;
    let input: Option<String> = s.get_opt("input", input.map(|p| p.display().to_string()))?;
    let u0 = match &input {
        Some(p) => read_field_csv(Path::new(p))?,
        None => {
            let g = grid_from(s, &grid, 256, 20.0)?;
            let w = s.get("width", width, 1.0)?;
            Field::from_real_fn(g, |x| (-x * x / (2.0 * w * w)).exp())
        }
    };
    let u = propagate_with(&u0, t, b, os)?;
    let mut run = RunDir::create(root, "propagate", &s.hash())?;
    if let Some(p) = &input {
        run.provenance("input", json!({ "path": p, "sha256": sha256_hex(&std::fs::read(p)?) }));
    }
    run.write("input.csv", field_csv(&u0))?;
    run.write("output.csv", field_csv(&u))?;
    let l2 = |f: &Field| norm(f, NormKind::Lp(2.0));
    run.write_json(
        "summary.json",
        &json!({ "t": t, "b": b, "l2_in": l2(&u0)?, "l2_out": l2(&u)?, "n": u0.grid.len(), "half_width": u0.grid.half_width() }),
    )?;
    run.finish(s)?;
    Ok(run_dir(root, "propagate", s))
}

fn run_dir(root: &Path, cmd: &str, s: &Settings) -> PathBuf {
    root.join(format!("{cmd}-{}", &s.hash()[..12]))
}

fn dispersive_cmd(s: &mut Settings, root: &Path, d: Option<usize>, b: Option<f64>, tmax: Option<f64>, points: Option<usize>) -> Res<PathBuf> {
    let d = s.get("d", d, 1usize)?;
    let b = s.get("b", b, 1.0)?;
    let tmax = s.get("tmax", tmax, 10.0)?;
    let points = s.get("points", points, 200usize)?;
    if !(b > 0.0) || !(tmax > 0.01 / b) || points < 10 {
        return Err(CliError::Usage("need b > 0, tmax > 0.01/b and at least 10 points".into()));
    }
    let (lo, hi) = ((0.01 / b).ln(), tmax.ln());
    let ts: Vec<f64> = (0..points).map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp()).collect();
    let ks: Vec<f64> = ts.iter().map(|&t| dispersive_norm_l1_linf(t, b, d)).collect::<Result<_, _>>()?;
    let free: Vec<f64> = ts.iter().map(|&t| (4.0 * std::f64::consts::PI * t).powf(-0.5 * d as f64)).collect();
    let mut csv = String::from("t,K,K_free\n");
    for i in 0..points {
        let _ = writeln!(csv, "{},{},{}", ts[i], ks[i], free[i]);
    }
    let (x, y): (Vec<f64>, Vec<f64>) =
        ts.iter().zip(&ks).filter(|(t, _)| **t >= 3.0 / b && **t <= 10.0 / b).map(|(t, k)| (*t, k.ln())).unzip();
    let expected = -(d as f64) * b / 2.0;
    let slope = if x.len() >= 3 { Some(fit::fit_line(&x, &y)?.slope) } else { None };
    let small = ks[0] / free[0];
    let mut run = RunDir::create(root, "dispersive-bench", &s.hash())?;
    run.write("kernel.csv", csv)?;
    let plot = line_plot(
        &format!("K(t), d = {d}, b = {b}"),
        "t",
        "K(t)",
        &[Series::new("K", ts.clone(), ks.clone()), Series::new("free", ts, free)],
        Axes::LogLog,
    )?;
    run.write("kernel.svg", plot)?;
    let slope_ok = slope.map(|m| ((m - expected) / expected).abs() <= 0.02);
    run.write_json(
        "summary.json",
        &json!({
            "late_slope": slope, "expected_slope": expected, "late_slope_within_2pct": slope_ok,
            "short_time_ratio": small, "short_time_within_1pct": (small - 1.0).abs() < 0.01,
        }),
    )?;
    run.finish(s)?;
    Ok(run_dir(root, "dispersive-bench", s))
}

#[allow(clippy::too_many_arguments)]
fn strichartz_cmd(
    s: &mut Settings,
    root: &Path,
    grid: GridArgs,
    b: Option<f64>,
    t_end: Option<f64>,
    n_t: Option<usize>,
    cells: Option<usize>,
) -> Res<PathBuf> {
    let g = grid_from(s, &grid, 1024, 40.0)?;
    let b = s.get("b", b, 1.0)?;
    let t_end = s.get("t_end", t_end, 1000.0)?;
    let n_t = s.get("n_t", n_t, 120usize)?;
    let cells = s.get("cells", cells, 40usize)?;
    let u0 = Field::from_real_fn(g, |x| (-x * x / 2.0).exp());
    let inf = f64::INFINITY;
    let qs = [2.0, 4.0, 8.0, 16.0, inf];
    let ps = [3.0, 4.0, 6.0, 10.0, inf];
    let mut csv = String::from("q,p,b,admissible,saturated,total\n");
    let mut rows = Vec::new();
    let mut run_pair = |q: f64, p: f64, bb: f64, csv: &mut String| -> Res<bool> {
        let smp = strichartz_sample(&u0, q, p, bb, t_end, n_t)?;
        let adm = admissible(q, p, 1);
        let _ = writeln!(csv, "{q},{p},{bb},{adm},{},{}", smp.saturated, smp.total);
        rows.push(json!({ "q": q, "p": p, "b": bb, "admissible": adm, "saturated": smp.saturated }));
        Ok(smp.saturated)
    };
    let mut saturated_admissible = 0;
    for &q in &qs {
        for &p in &ps {
            if admissible(q, p, 1) && run_pair(q, p, b, &mut csv)? {
                saturated_admissible += 1;
            }
        }
    }
    let control = run_pair(2.0, 4.0, 0.0, &mut csv)?;
    let mut run = RunDir::create(root, "strichartz-map", &s.hash())?;
    run.write("admissible.svg", admissible_map(&[1, 2, 3], cells)?)?;
    run.write("samples.csv", csv)?;
    run.write_json(
        "summary.json",
        &json!({ "saturated_admissible_pairs": saturated_admissible, "free_control_saturated": control, "pairs": rows }),
    )?;
    run.finish(s)?;
    Ok(run_dir(root, "strichartz-map", s))
}

/// Schwartz-class inputs shared by the resolvent checks.
pub fn resolvent_inputs(g: Grid1D) -> Vec<(&'static str, Field)> {
    vec![
        ("gauss", Field::from_real_fn(g, |x| (-x * x / 2.0).exp())),
        ("narrow", Field::from_real_fn(g, |x| (-x * x).exp())),
        ("shifted", Field::from_real_fn(g, |x| (-(x - 1.5).powi(2) / 2.0).exp())),
        ("modulated", Field::from_fn(g, |x| C64::from_polar((-x * x / 2.0).exp(), 0.8 * x))),
        ("odd", Field::from_real_fn(g, |x| x * (-x * x / 2.0).exp())),
        ("sech2", Field::from_real_fn(g, |x| 1.0 / x.cosh().powi(2))),
    ]
}

#[allow(clippy::too_many_arguments)]
fn resolvent_cmd(
    s: &mut Settings,
    root: &Path,
    grid: GridArgs,
    b: Option<f64>,
    z: C64,
    y: Option<f64>,
    sigma: Option<f64>,
    lambdas: Option<Vec<f64>>,
) -> Res<PathBuf> {
    let g = grid_from(s, &grid, 256, 20.0)?;
    let b = s.get("b", b, 1.0)?;
    let z = C64::new(s.get("z_re", Some(z.re), 0.3)?, s.get("z_im", Some(z.im), 0.2)?);
    let y = s.get("y", y, 0.6 * b)?;
    let sigma = s.get("sigma", sigma, 0.25)?;
    let lambdas = s.get("lambdas", lambdas, vec![0.0, 10.0, 15.0, 20.0, 30.0, 50.0, 75.0, 100.0, 150.0, 200.0, 300.0])?;
    let z2 = C64::new(-0.2, z.im + 0.4);
    let w = C64::new(-0.2, z.im - 0.3);
    let t_max = 40.0 / z.im.max(0.05);
    let mut csv = String::from("input,inversion_plus,inversion_minus,oracle,identity,mixed_identity,sigma_shift\n");
    let mut worst = [0.0f64; 6];
    for (name, f) in resolvent_inputs(g) {
        let inv_p = rv::inversion_residual(&f, SpectralPoint::plus(z), b)?;
        let inv_m = rv::inversion_residual(&f, SpectralPoint::minus(z.conj()), b)?;
        let oracle = rv::relative_l2(
            &rv::resolvent_apply(&f, SpectralPoint::plus(z), b)?,
            &rv::resolvent_via_time_integral(&f, SpectralPoint::plus(z), b, t_max)?,
        )?;
        let id = rv::resolvent_identity_residual(&f, z, z2, b)?;
        let mixed = rv::mixed_identity_residual(&f, z, w, b)?;
        // The shift needs f̂(0) = 0 so that |ξ|^{-σ}f̂ stays bounded.
        let zero_mean = f.sub(&Field::from_real_fn(g, |x| (-x * x / 8.0).exp()).scale(mean_ratio(&f)?))?;
        let shift = rv::sigma_shift_check(&zero_mean, z, b, sigma)?;
        let vals = [inv_p, inv_m, oracle, id, mixed, shift];
        for (m, v) in worst.iter_mut().zip(vals) {
            *m = m.max(v);
        }
        let _ = writeln!(csv, "{name},{inv_p:e},{inv_m:e},{oracle:e},{id:e},{mixed:e},{shift:e}");
    }
    let gauss = Field::from_real_fn(g, |x| (-x * x / 2.0).exp());
    let scan = rv::lambda_decay_scan(&gauss, y, b, &lambdas, 2.0)?;
    let mut lcsv = String::from("lambda,single,difference\n");
    for i in 0..lambdas.len() {
        let _ = writeln!(lcsv, "{},{},{}", lambdas[i], scan.single[i], scan.difference[i]);
    }
    let pos: Vec<usize> = (0..lambdas.len()).filter(|&i| lambdas[i] > 0.0).collect();
    let pick = |v: &[f64]| pos.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let plot = line_plot(
        "resolvent decay in λ",
        "λ",
        "L² norm",
        &[
            Series::new("R+(λ+iy)f", pick(&lambdas), pick(&scan.single)),
            Series::new("(R+ - R-)f", pick(&lambdas), pick(&scan.difference)),
        ],
        Axes::LogLog,
    )?;
    let mut run = RunDir::create(root, "resolvent-check", &s.hash())?;
    run.write("suite.csv", csv)?;
    run.write("lambda_scan.csv", lcsv)?;
    run.write("lambda_scan.svg", plot)?;
    run.write_json(
        "summary.json",
        &json!({
            "z": [z.re, z.im], "z2": [z2.re, z2.im], "w": [w.re, w.im], "b": b,
            "worst": {
                "inversion_plus": worst[0], "inversion_minus": worst[1], "oracle": worst[2],
                "identity": worst[3], "mixed_identity": worst[4], "sigma_shift": worst[5],
            },
            "single_slope": scan.single_fit.map(|f| f.slope),
            "difference_slope": scan.difference_fit.map(|f| f.slope),
            "lambda_zero_single": scan.single.first(),
        }),
    )?;
    run.finish(s)?;
    Ok(run_dir(root, "resolvent-check", s))
}

/// `∫f / ∫e^{-x²/8}`, the multiple of the wide Gaussian with the same mean.
fn mean_ratio(f: &Field) -> Res<C64> {
    let g = f.grid;
    let sum: C64 = f.values.iter().sum();
    let gs: f64 = (0..g.len()).map(|j| (-g.x(j).powi(2) / 8.0).exp()).sum();
    Ok(sum / gs)
}

fn model_params(s: &mut Settings, a: &ProfileArgs) -> Res<ModelParams> {
    let d = s.get("d", a.d, 1usize)?;
    let p = s.get("p", a.p, 7.0)?;
    let sc = critical_regularity(d, p);
    let top = (d as f64 / 2.0).min(1.0);
    let sigma = s.get("sigma", a.sigma, sc + 0.2 * (top - sc))?;
    Ok(derive_params(d, p, 1.0, sigma)?)
}

fn load_profile(s: &mut Settings, a: &ProfileArgs, run_prov: &mut Vec<(String, Json)>) -> Res<Profile> {
    let path: Option<String> = s.get_opt("profile", a.profile.as_ref().map(|p| p.display().to_string()))?;
    if let Some(p) = path {
        let text = std::fs::read_to_string(&p)?;
        let mut prof = Profile::from_text(&text)?;
        run_prov.push(("profile".into(), json!({ "path": p, "sha256": sha256_hex(text.as_bytes()) })));
        if let Some(sig) = s.get_opt("sigma", a.sigma)? {
            prof.params = prof.params.with_sigma(sig)?;
        }
        return Ok(prof);
    }
    let m = model_params(s, a)?;
    let br = s.get("bracket", a.bracket.clone(), vec![1.15, 1.16, 1.38, 1.39])?;
    if br.len() != 4 {
        return Err(CliError::Usage("bracket needs four numbers q0_min,q0_max,b_min,b_max".into()));
    }
    let cfg = ShootingConfig {
        r_max: s.get("r_max", a.r_max, 100.0)?,
        scan: s.get("scan", a.scan, 0usize)?,
        ..ShootingConfig::default()
    };
    let prof = find_profile(&m, (br[0], br[1]), (br[2], br[3]), &cfg)?;
    run_prov.push(("profile".into(), json!({ "computed": true, "q0": prof.q0, "b_star": prof.b_star })));
    Ok(prof)
}

fn finish_prov(run: &mut RunDir, prov: Vec<(String, Json)>) {
    for (k, v) in prov {
        run.provenance(&k, v);
    }
}

fn profile_cmd(s: &mut Settings, root: &Path, a: ProfileArgs) -> Res<PathBuf> {
    let mut prov = Vec::new();
    let prof = load_profile(s, &a, &mut prov)?;
    prof.check()?;
    let residual = profile_residual(&prof)?;
    let sup = prof.q.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let slope = prof.far_field_slope()?;
    let expected = -2.0 / (prof.params.p - 1.0);
    let mut run = RunDir::create(root, "profile", &s.hash())?;
    finish_prov(&mut run, prov);
    run.write("profile.txt", prof.to_text())?;
    let r = prof.grid.nodes().to_vec();
    let abs: Vec<f64> = prof.q.iter().map(|v| v.norm()).collect();
    run.write("profile.svg", line_plot("|Q_b|", "r", "|Q|", &[Series::new("|Q|", r[1..].to_vec(), abs[1..].to_vec())], Axes::LogLog)?)?;
    run.write_json(
        "summary.json",
        &json!({
            "d": prof.params.d, "p": prof.params.p, "q0": prof.q0, "b_star": prof.b_star,
            "c_p": prof.c_p, "flatness": prof.flatness, "objective": prof.objective, "iterations": prof.iterations,
            "residual": residual, "residual_over_sup": residual / sup, "min_abs": prof.min_abs(),
            "far_field_slope": slope, "expected_slope": expected,
        }),
    )?;
    run.finish(s)?;
    Ok(run_dir(root, "profile", s))
}

fn spectrum_cmd(
    s: &mut Settings,
    root: &Path,
    a: ProfileArgs,
    radial_n: Option<usize>,
    radial_r: Option<f64>,
    threshold: Option<f64>,
) -> Res<PathBuf> {
    let mut prov = Vec::new();
    let prof = load_profile(s, &a, &mut prov)?;
    let n = s.get("radial_n", radial_n, 300usize)?;
    let r = s.get("radial_r", radial_r, 15.0)?;
    let thr = s.get("threshold", threshold, 0.1)?;
    let op = assemble_h(&prof, n, r, Some(prof.params.sigma))?;
    let win = SpectralWindow { re_min: -5.0, re_max: 5.0, im_min: -5.0, im_max: 5.0 };
    let es = discrete_spectrum(&op, win, thr)?;
    let pr = riesz_projections(&op, &es)?;
    let plain = assemble_h(&prof, n, r, None)?;
    let res = resonance_residual(&plain, &prof)?;
    let mut run = RunDir::create(root, "spectrum", &s.hash())?;
    finish_prov(&mut run, prov);
    run.write("eigen.txt", es.to_text())?;
    let (unstable, stable) = es.split();
    let pair = |v: &[C64]| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
    run.write_json(
        "summary.json",
        &json!({
            "tagged": pair(&es.tagged()), "unstable": pair(&unstable), "stable": pair(&stable),
            "essential_line": es.essential_line, "j_symmetry": j_symmetry_check(&es),
            "window_diameter": win.diameter(), "rank": pr.rank, "idempotence": pr.idempotence,
            "commutation": pr.commutation, "biorthogonality": es.biorthogonality, "resonance_residual": res,
        }),
    )?;
    run.finish(s)?;
    Ok(run_dir(root, "spectrum", s))
}

fn flow_config(s: &mut Settings, f: &FlowArgs, dtau: f64, tau_end: f64, cadence: usize) -> Res<FlowConfig> {
    let base = FlowConfig::default();
    let strength = s.get("sponge_strength", f.sponge_strength, Sponge::default().strength)?;
    let inner = s.get("sponge_inner", f.sponge_inner, Sponge::default().inner)?;
    Ok(FlowConfig {
        dtau: s.get("dtau", f.dtau, dtau)?,
        tau_end: s.get("tau_end", f.tau_end, tau_end)?,
        cadence: s.get("cadence", f.cadence, cadence)?,
        window: s.get("window", f.window, base.window)?,
        sponge: (strength > 0.0).then_some(Sponge { inner, strength }),
        ..base
    })
}

fn sidecar(series: &flow::DiagnosticsSeries, s: &Settings, g: Grid1D, seed: u64, extra: Json, prov: &[(String, Json)]) -> Json {
    json!({
        "fits": series.fits,
        "aborted": series.aborted,
        "config_hash": s.hash(),
        "provenance": {
            "profile": prov.iter().find(|(k, _)| k == "profile").map(|(_, v)| v.clone()),
            "grid": { "n": g.len(), "half_width": g.half_width() },
            "seed": seed,
        },
        "result": extra,
    })
}

fn series_plot(series: &flow::DiagnosticsSeries, title: &str) -> Res<String> {
    Ok(line_plot(
        title,
        "τ",
        "norm",
        &[
            Series::new("Ḣ^σ of ε", series.taus.clone(), series.hsigma_eps.clone()),
            Series::new("Ḣ^sc of v", series.taus.clone(), series.hsc_v.clone()),
            Series::new("L^pc of v", series.taus.clone(), series.lpc_v.clone()),
        ],
        Axes::LogY,
    )?)
}

fn evolve_cmd(s: &mut Settings, root: &Path, a: ProfileArgs, grid: GridArgs, f: FlowArgs, seed: u64) -> Res<PathBuf> {
    let mut prov = Vec::new();
    let prof = load_profile(s, &a, &mut prov)?;
    let m = prof.params;
    let g = grid_from(s, &grid, 1024, 48.0)?;
    let cfg = flow_config(s, &f, 1e-4, 5.0 / m.b, 200)?;
    let q = resample_profile(&prof, &g)?;
    let mut out = evolve(&q, &q, &cfg, &m)?;
    let wq = windowed(&q, &interior_window(&g, cfg.window));
    let scale = hom_sobolev_sq(&wq, m.sigma)?.sqrt();
    let drift = out.series.hsigma_eps.iter().cloned().fold(0.0, f64::max) / scale;
    if out.series.len() >= 4 {
        let hsc: Vec<f64> = out.series.hsc_v.iter().map(|v| v.ln()).collect();
        let rf = fit::fit_rate(&out.series.taus, &hsc, 0.1, 200, seed)?;
        out.series.fits.push(flow::NamedFit { name: "log_hsc_v".into(), fit: rf });
    }
    let mut run = RunDir::create(root, "evolve", &s.hash())?;
    run.write("diagnostics.csv", out.series.to_csv())?;
    run.write_json("diagnostics.json", &sidecar(&out.series, s, g, seed, json!({ "relative_drift": drift, "tau": out.tau }), &prov))?;
    run.write("diagnostics.svg", series_plot(&out.series, "fixed-point run")?)?;
    finish_prov(&mut run, prov);
    run.finish(s)?;
    Ok(run_dir(root, "evolve", s))
}

#[allow(clippy::too_many_arguments)]
fn perturb_cmd(
    s: &mut Settings,
    root: &Path,
    a: ProfileArgs,
    grid: GridArgs,
    f: FlowArgs,
    amplitude: Option<f64>,
    project: Option<bool>,
    radial_n: Option<usize>,
    radial_r: Option<f64>,
    seed: u64,
) -> Res<PathBuf> {
    let mut prov = Vec::new();
    let prof = load_profile(s, &a, &mut prov)?;
    let m = prof.params;
    let g = grid_from(s, &grid, 1024, 48.0)?;
    let cfg = flow_config(s, &f, 1e-3, 6.0, 20)?;
    let amp = s.get("amplitude", amplitude, 1e-4)?;
    let project = s.get("project", project, true)?;
    let q = resample_profile(&prof, &g)?;
    let mut eps = Field::from_fn(g, |x| C64::new((-x * x).exp(), 0.5 * x * x * (-x * x).exp()) * amp);
    if project {
        let n = s.get("radial_n", radial_n, 300usize)?;
        let r = s.get("radial_r", radial_r, 15.0)?;
        let op = assemble_h(&prof, n, r, None)?;
        let win = SpectralWindow { re_min: -5.0, re_max: 5.0, im_min: -5.0, im_max: 5.0 };
        let es = discrete_spectrum(&op, win, 0.1)?;
        let pr = riesz_projections(&op, &es)?;
        eps = project_perturbation(&eps, &pr.p_ess, r / n as f64)?;
    }
    let res = perturbation_experiment(&q, &eps, &cfg, &m, seed)?;
    let rel = (res.rate.fit.slope - res.expected) / res.expected;
    let extra = json!({
        "rate": res.rate, "expected": res.expected, "relative_error": rel,
        "departure": res.departure, "unstable_mode_dominated": res.unstable_mode_dominated,
        "window_length": res.rate.window.1 - res.rate.window.0,
        "required_window": 3.0 / (m.b * (m.sigma - m.s_c)),
    });
    let mut run = RunDir::create(root, "perturb", &s.hash())?;
    run.write("diagnostics.csv", res.series.to_csv())?;
    run.write_json("diagnostics.json", &sidecar(&res.series, s, g, seed, extra, &prov))?;
    run.write("diagnostics.svg", series_plot(&res.series, "perturbation")?)?;
    finish_prov(&mut run, prov);
    run.finish(s)?;
    Ok(run_dir(root, "perturb", s))
}

#[allow(clippy::too_many_arguments)]
fn critnorm_cmd(
    s: &mut Settings,
    root: &Path,
    a: ProfileArgs,
    grid: GridArgs,
    f: FlowArgs,
    r0: Option<f64>,
    seed: u64,
) -> Res<PathBuf> {
    let mut prov = Vec::new();
    let prof = load_profile(s, &a, &mut prov)?;
    let m = prof.params;
    let g = grid_from(s, &grid, 8192, 256.0)?;
    let cfg = flow_config(s, &f, 2e-3, 3.0, 20)?;
    let r0 = s.get("r0", r0, 10.0)?;
    let q = resample_profile(&prof, &g)?;
    let v0 = q.weighted(|x| cutoff(x / r0));
    let out = evolve(&v0, &q, &cfg, &m)?;
    let fitres = critical_norm_track(&out.series, m.p_c)?;
    let radii: Vec<f64> = (0..12).map(|k| r0 * 1.3f64.powi(k)).filter(|r| *r < 0.5 * g.half_width()).collect();
    let (hs, lp) = static_critical_slopes(&q, &radii, &m)?;
    let agree = |dynamic: f64, stat: f64| ((dynamic - stat * m.b) / (stat * m.b)).abs();
    let extra = json!({
        "fit": fitres, "static_hsc_slope_times_b": hs.slope * m.b, "static_lpc_slope_times_b": lp.slope * m.b,
        "hsc_relative_gap": agree(fitres.hsc_sq.slope, hs.slope), "lpc_relative_gap": agree(fitres.lpc_pow.slope, lp.slope),
    });
    let mut run = RunDir::create(root, "critnorm", &s.hash())?;
    run.write("diagnostics.csv", out.series.to_csv())?;
    run.write_json("diagnostics.json", &sidecar(&out.series, s, g, seed, extra, &prov))?;
    run.write("diagnostics.svg", series_plot(&out.series, "critical norms")?)?;
    finish_prov(&mut run, prov);
    run.finish(s)?;
    Ok(run_dir(root, "critnorm", s))
}
