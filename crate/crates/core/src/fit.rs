//! Least-squares line fits used by the rate diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParams("line fit needs >= 2 paired samples".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("line fit samples"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParams("line fit with constant abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LineFit { slope, intercept, r_squared, n: x.len() })
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub fit: LineFit,
    /// 95% residual-bootstrap interval for the slope.
    pub slope_ci: (f64, f64),
    /// Abscissa window used after dropping the transient.
    pub window: (f64, f64),
}

/// Line fit with the first `transient` fraction of samples discarded and a
/// residual bootstrap for the slope interval.
pub fn fit_rate(x: &[f64], y: &[f64], transient: f64, resamples: usize, seed: u64) -> Result<RateFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidParams("rate fit needs paired samples".into()));
    }
    let skip = ((x.len() as f64) * transient.clamp(0.0, 0.9)).floor() as usize;
    let (xs, ys) = (&x[skip..], &y[skip..]);
    let fit = fit_line(xs, ys)?;
    let resid: Vec<f64> = xs.iter().zip(ys).map(|(a, b)| b - fit.intercept - fit.slope * a).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes = Vec::with_capacity(resamples);
    let mut yb = vec![0.0; xs.len()];
    for _ in 0..resamples {
        for (i, a) in xs.iter().enumerate() {
            yb[i] = fit.intercept + fit.slope * a + resid[rng.gen_range(0..resid.len())];
        }
        slopes.push(fit_line(xs, &yb)?.slope);
    }
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci = if slopes.is_empty() {
        (fit.slope, fit.slope)
    } else {
        let lo = slopes[((slopes.len() as f64) * 0.025) as usize];
        let hi = slopes[(((slopes.len() as f64) * 0.975) as usize).min(slopes.len() - 1)];
        (lo, hi)
    };
    Ok(RateFit { fit, slope_ci: ci, window: (xs[0], *xs.last().unwrap()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bootstrap_is_seed_deterministic() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, a)| -0.5 * a + 0.01 * ((i * 7 % 5) as f64 - 2.0)).collect();
        let a = fit_rate(&x, &y, 0.1, 200, 7).unwrap();
        let b = fit_rate(&x, &y, 0.1, 200, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.slope_ci.0 <= a.fit.slope && a.fit.slope <= a.slope_ci.1);
        assert!((a.window.0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(fit_line(&[1.0], &[2.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[2.0, 3.0]).is_err());
    }
}
