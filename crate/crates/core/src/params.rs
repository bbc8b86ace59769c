use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of a run with the exponents derived from `(d, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub p: f64,
    pub b: f64,
    /// Critical regularity `d/2 - 2/(p-1)`.
    pub s_c: f64,
    pub sigma: f64,
    /// Critical Lebesgue exponent `2d/(d - 2 s_c)`.
    pub p_c: f64,
    /// Embedding exponent `d/(d + 2 - 2 s_c)`.
    pub alpha_c: f64,
}

pub fn critical_regularity(d: usize, p: f64) -> f64 {
    d as f64 / 2.0 - 2.0 / (p - 1.0)
}

pub fn derive_params(d: usize, p: f64, b: f64, sigma: f64) -> Result<ModelParams> {
    if d < 1 {
        return Err(Error::InvalidParams(format!("dimension must be >= 1, got {d}")));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParams(format!("nonlinearity p must be > 1, got {p}")));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParams(format!("rate b must be > 0, got {b}")));
    }
    if !sigma.is_finite() {
        return Err(Error::NonFinite("sigma"));
    }
    let df = d as f64;
    let s_c = critical_regularity(d, p);
    let upper = f64::min(1.0, df / 2.0);
    if !(s_c > 0.0 && s_c < upper) {
        return Err(Error::InvalidParams(format!(
            "s_c = {s_c:.6} outside (0, {upper}) for d = {d}, p = {p}"
        )));
    }
    if !(sigma > s_c && sigma < upper) {
        return Err(Error::InvalidParams(format!(
            "sigma = {sigma} outside (s_c, min(1, d/2)) = ({s_c:.6}, {upper})"
        )));
    }
    Ok(ModelParams {
        d,
        p,
        b,
        s_c,
        sigma,
        p_c: 2.0 * df / (df - 2.0 * s_c),
        alpha_c: df / (df + 2.0 - 2.0 * s_c),
    })
}

impl ModelParams {
    /// Self-similar decay exponent `2/(p-1)`; also equals `d/2 - s_c`.
    pub fn alpha(&self) -> f64 {
        2.0 / (self.p - 1.0)
    }

    pub fn with_b(&self, b: f64) -> Result<Self> {
        derive_params(self.d, self.p, b, self.sigma)
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        derive_params(self.d, self.p, self.b, sigma)
    }

    /// Flow experiments additionally need `sigma < alpha_c`.
    pub fn check_flow_regularity(&self) -> Result<()> {
        if self.sigma < self.alpha_c {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "flow runs need sigma < alpha_c = {:.6}, got {}",
                self.alpha_c, self.sigma
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_septic() {
        let m = derive_params(1, 7.0, 0.1, 0.2).unwrap();
        assert!((m.s_c - 1.0 / 6.0).abs() < 1e-15);
        assert!((m.alpha_c - 0.375).abs() < 1e-15);
        assert!((m.p_c - 3.0).abs() < 1e-14);
    }

    #[test]
    fn three_dimensional_cubic() {
        let m = derive_params(3, 3.0, 0.5, 0.55).unwrap();
        assert!((m.s_c - 0.5).abs() < 1e-15);
        assert!((m.p_c - 3.0).abs() < 1e-14);
        assert!((m.alpha_c - 0.75).abs() < 1e-15);
    }

    #[test]
    fn mass_critical_rejected() {
        assert!(matches!(derive_params(1, 5.0, 0.1, 0.2), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn sigma_out_of_range() {
        assert!(derive_params(1, 7.0, 0.1, 0.1).is_err());
        assert!(derive_params(1, 7.0, 0.1, 0.5).is_err());
        assert!(derive_params(1, 7.0, -1.0, 0.2).is_err());
    }

    #[test]
    fn flow_regularity_gate() {
        let m = derive_params(1, 7.0, 0.1, 0.3).unwrap();
        assert!(m.check_flow_regularity().is_ok());
        let m = derive_params(1, 7.0, 0.1, 0.45).unwrap();
        assert!(m.check_flow_regularity().is_err());
    }

    #[test]
    fn alpha_matches_exponent_identity() {
        let m = derive_params(3, 3.0, 0.5, 0.55).unwrap();
        assert!((m.alpha() - (1.5 - m.s_c)).abs() < 1e-15);
        // alpha_c = d (1/2 - 1/(p+1))
        assert!((m.alpha_c - 3.0 * (0.5 - 1.0 / 4.0)).abs() < 1e-15);
    }
}
