//! The matrix operator obtained by linearizing the profile equation,
//! `ℋ = (A + W1, W2; -W̄2, -Ā - W1)`, `A = Δ_b - 1 - ib s_c`, on a radial grid.
//!
//! The grid is cell centred, `r_j = (j + 1/2) h`, with a reflecting face at
//! the origin and a homogeneous Dirichlet ghost node at `(N + 1/2) h`. Both pieces of `Δ_b` are
//! written in flux form: `Δ` symmetric and `(ib/2)(r∂_r + ∂_r r·)` skew in the
//! weighted inner product `Σ r_j^{d-1} h`. The discrete `Δ_b` is therefore
//! similar to a Hermitian matrix, as the continuum operator is self-adjoint,
//! and the assembly satisfies `JℋJ = -ℋ̄` exactly.

use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::Profile;
use crate::C64;

#[derive(Debug, Clone)]
pub struct OperatorDisc {
    pub d: usize,
    pub b: f64,
    pub s_c: f64,
    /// `Some(σ)` for the conjugated assembly `D^σ ℋ D^{-σ}`.
    pub sigma: Option<f64>,
    pub h: f64,
    pub r: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<C64>,
    pub matrix: Mat<C64>,
    /// Set when `h` exceeds one eighth of the local chirp wavelength
    /// `2π/(bR)` at the outer radius.
    pub coarse_warning: bool,
}

impl OperatorDisc {
    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.r.len()
    }

    /// Quadrature weight of node `j` (same for both components).
    pub fn weight(&self, j: usize) -> f64 {
        self.r[j].powi(self.d as i32 - 1) * self.h
    }

    /// Imaginary part of the essential line, `b(σ - s_c)` (or `-b s_c`).
    pub fn essential_line(&self) -> f64 {
        self.b * (self.sigma.unwrap_or(0.0) - self.s_c)
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.matrix[(i, j)] * v[j]).sum()).collect()
    }

    /// Weighted `L²` norm of a stacked vector over nodes with `r <= r_cut`.
    pub fn norm(&self, v: &[C64], r_cut: f64) -> f64 {
        let n = self.n();
        (0..n)
            .filter(|&j| self.r[j] <= r_cut)
            .map(|j| self.weight(j) * (v[j].norm_sqr() + v[n + j].norm_sqr()))
            .sum::<f64>()
            .sqrt()
    }
}

/// Real tridiagonal pieces of the radial `Δ` and of `r∂_r + d/2` in flux form,
/// as `(lower, diag, upper)` for `L` and `(lower, upper)` for `S`.
fn radial_stencils(d: usize, n: usize, h: f64) -> (Vec<[f64; 3]>, Vec<[f64; 2]>) {
    let face = |j: f64| (j * h).max(0.0);
    let w = |j: usize| ((j as f64 + 0.5) * h).powi(d as i32 - 1);
    let k = |f: f64| if d == 1 { 1.0 } else { face(f).powi(d as i32 - 1) };
    let mut lap = Vec::with_capacity(n);
    let mut skew = Vec::with_capacity(n);
    for j in 0..n {
        let jf = j as f64;
        // reflecting face at r = 0: no flux
        let k_lo = if j == 0 { 0.0 } else { k(jf) };
        let k_hi = k(jf + 1.0);
        let wj = w(j);
        lap.push([k_lo / (wj * h * h), -(k_lo + k_hi) / (wj * h * h), k_hi / (wj * h * h)]);
        let c_lo = if j == 0 { 0.0 } else { face(jf).powi(d as i32) / (2.0 * h) };
        let c_hi = face(jf + 1.0).powi(d as i32) / (2.0 * h);
        skew.push([-c_lo / wj, c_hi / wj]);
    }
    (lap, skew)
}

/// Core assembly from sampled potentials; `b = 0` is allowed here.
pub fn assemble_with_potentials(
    d: usize,
    b: f64,
    s_c: f64,
    h: f64,
    w1: Vec<f64>,
    w2: Vec<C64>,
    sigma: Option<f64>,
) -> Result<OperatorDisc> {
    let n = w1.len();
    if n < 4 || w2.len() != n {
        return Err(Error::GridMismatch("potential samples must share a grid of >= 4 nodes".into()));
    }
    if !(h > 0.0) || d == 0 || !b.is_finite() {
        return Err(Error::InvalidParams("bad operator parameters".into()));
    }
    if w1.iter().any(|v| !v.is_finite()) || w2.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("potentials"));
    }
    let r: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * h).collect();
    let (lap, skew) = radial_stencils(d, n, h);
    let shift = C64::new(-1.0, -b * s_c + b * sigma.unwrap_or(0.0));
    let mut m = Mat::<C64>::zeros(2 * n, 2 * n);
    let ib = C64::new(0.0, b);
    for j in 0..n {
        // A = L + ib S + shift, block 2 = -conj(A)
        let diag = C64::new(lap[j][1], 0.0) + shift;
        m[(j, j)] = diag + w1[j];
        m[(n + j, n + j)] = -diag.conj() - w1[j];
        if j > 0 {
            let a = C64::new(lap[j][0], 0.0) + ib * skew[j][0];
            m[(j, j - 1)] = a;
            m[(n + j, n + j - 1)] = -a.conj();
        }
        if j + 1 < n {
            let a = C64::new(lap[j][2], 0.0) + ib * skew[j][1];
            m[(j, j + 1)] = a;
            m[(n + j, n + j + 1)] = -a.conj();
        }
        m[(j, n + j)] = w2[j];
        m[(n + j, j)] = -w2[j].conj();
    }
    let r_max = n as f64 * h;
    let coarse_warning = b > 0.0 && h > 2.0 * std::f64::consts::PI / (8.0 * b * r_max);
    Ok(OperatorDisc { d, b, s_c, sigma, h, r, w1, w2, matrix: m, coarse_warning })
}

/// `ℋ` around the profile on `n` cells of `[0, r_max]`.
pub fn assemble_h(prof: &Profile, n: usize, r_max: f64, sigma: Option<f64>) -> Result<OperatorDisc> {
    prof.check()?;
    if r_max > prof.grid.r_max() {
        return Err(Error::InvalidParams(format!(
            "operator radius {r_max} exceeds the stored profile radius {}",
            prof.grid.r_max()
        )));
    }
    let h = r_max / n as f64;
    let p = prof.params.p;
    let (mut w1, mut w2) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for j in 0..n {
        let q = prof.eval((j as f64 + 0.5) * h);
        w1.push(0.5 * (p + 1.0) * q.norm().powf(p - 1.0));
        w2.push(0.5 * (p - 1.0) * q * q * q.norm().powf(p - 3.0));
    }
    assemble_with_potentials(prof.params.d, prof.b_star, prof.params.s_c, h, w1, w2, sigma)
}

/// `ℋ` with the potentials switched off.
pub fn assemble_free(d: usize, b: f64, s_c: f64, n: usize, r_max: f64, sigma: Option<f64>) -> Result<OperatorDisc> {
    assemble_with_potentials(d, b, s_c, r_max / n as f64, vec![0.0; n], vec![C64::new(0.0, 0.0); n], sigma)
}

/// `‖ℋ(iQ, -iQ̄)‖ / ‖(iQ, -iQ̄)‖` over `r <= R/2`, away from the outer face.
pub fn resonance_residual(op: &OperatorDisc, prof: &Profile) -> Result<f64> {
    let n = op.n();
    let mut v = vec![C64::new(0.0, 0.0); 2 * n];
    for j in 0..n {
        let q = prof.eval(op.r[j]);
        v[j] = C64::new(0.0, 1.0) * q;
        v[n + j] = C64::new(0.0, -1.0) * q.conj();
    }
    resonance_residual_of(op, &v)
}

pub fn resonance_residual_of(op: &OperatorDisc, v: &[C64]) -> Result<f64> {
    let cut = 0.5 * op.n() as f64 * op.h;
    let den = op.norm(v, cut);
    if den == 0.0 {
        return Err(Error::InvalidParams("resonance test vector is zero".into()));
    }
    Ok(op.norm(&op.apply(v), cut) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl SpectralWindow {
    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    pub fn diameter(&self) -> f64 {
        (self.re_max - self.re_min).hypot(self.im_max - self.im_min)
    }
}

#[derive(Debug, Clone)]
pub struct EigenSet {
    pub eigenvalues: Vec<C64>,
    /// Right eigenvectors as columns, unit weighted norm.
    pub right: Mat<C64>,
    /// Left eigenvectors of tagged modes, scaled so that `w^* v = 1`.
    pub left: Vec<Option<Vec<C64>>>,
    /// Weighted norm of the outer 30% of the grid over the full norm.
    pub localization: Vec<f64>,
    pub discrete: Vec<bool>,
    pub essential_line: f64,
    pub window: SpectralWindow,
    pub threshold: f64,
    /// Largest `|w_j^* v_k - δ_jk|` among tagged modes.
    pub biorthogonality: f64,
}

impl EigenSet {
    pub fn tagged(&self) -> Vec<C64> {
        self.eigenvalues.iter().zip(&self.discrete).filter(|(_, t)| **t).map(|(z, _)| *z).collect()
    }

    /// Tagged modes below (`E_u`) and above (`E_s`) the essential line.
    pub fn split(&self) -> (Vec<C64>, Vec<C64>) {
        self.tagged().into_iter().partition(|z| z.im <= self.essential_line)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// One row per eigenvalue: `re im localization tag`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# re im localization tag\n");
        for i in 0..self.eigenvalues.len() {
            let z = self.eigenvalues[i];
            let tag = if self.discrete[i] { "discrete" } else { "continuum-artifact" };
            let _ = writeln!(s, "{:e} {:e} {:e} {}", z.re, z.im, self.localization[i], tag);
        }
        s
    }
}

fn column(m: &Mat<C64>, k: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, k)]).collect()
}

/// Left eigenvector for `z` by inverse iteration on `ℋ^* - z̄`.
fn left_vector(op: &OperatorDisc, z: C64, right: &[C64]) -> Result<Vec<C64>> {
    let n = op.dim();
    let mut a = Mat::<C64>::zeros(n, n);
    let shift = z.conj() + C64::new(1e-10, 1e-10) * (1.0 + z.norm());
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = op.matrix[(j, i)].conj();
        }
        a[(i, i)] -= shift;
    }
    let lu = a.partial_piv_lu();
    let mut w = Mat::<C64>::zeros(n, 1);
    for i in 0..n {
        w[(i, 0)] = right[i];
    }
    for _ in 0..3 {
        w = lu.solve(&w);
        let s = (0..n).map(|i| w[(i, 0)].norm_sqr()).sum::<f64>().sqrt();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Eigen("inverse iteration for a left vector broke down".into()));
        }
        for i in 0..n {
            w[(i, 0)] /= s;
        }
    }
    let w: Vec<C64> = (0..n).map(|i| w[(i, 0)]).collect();
    let dot: C64 = w.iter().zip(right).map(|(a, b)| a.conj() * b).sum();
    if dot.norm() < 1e-12 {
        return Err(Error::Eigen(format!("left and right vectors orthogonal at z = {z}")));
    }
    // scale so that w^* v = 1
    let s = dot.conj().inv();
    Ok(w.into_iter().map(|x| x * s).collect())
}

/// Full eigendecomposition; modes inside `window` whose outer-30% weight is
/// below `threshold` are tagged discrete.
pub fn discrete_spectrum(op: &OperatorDisc, window: SpectralWindow, threshold: f64) -> Result<EigenSet> {
    let n = op.n();
    let dim = op.dim();
    if dim > 4096 {
        return Err(Error::InvalidParams(format!("dense eigensolve limited to 4096 rows, got {dim}")));
    }
    let evd = op.matrix.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let vals: Vec<C64> = evd.S().column_vector().iter().cloned().collect();
    let u = evd.U();
    let mut right = Mat::<C64>::zeros(dim, dim);
    let r_out = 0.7 * n as f64 * op.h;
    let mut localization = Vec::with_capacity(dim);
    let mut discrete = Vec::with_capacity(dim);
    for k in 0..dim {
        let v: Vec<C64> = (0..dim).map(|i| u[(i, k)]).collect();
        let total = op.norm(&v, f64::INFINITY);
        let inner = op.norm(&v, r_out);
        let outer = (total * total - inner * inner).max(0.0).sqrt();
        let loc = if total > 0.0 { outer / total } else { 1.0 };
        for i in 0..dim {
            right[(i, k)] = if total > 0.0 { v[i] / total } else { v[i] };
        }
        localization.push(loc);
        discrete.push(loc < threshold && window.contains(vals[k]));
    }
    let mut left = vec![None; dim];
    for k in 0..dim {
        if discrete[k] {
            left[k] = Some(left_vector(op, vals[k], &column(&right, k))?);
        }
    }
    let tagged: Vec<usize> = (0..dim).filter(|&k| discrete[k]).collect();
    let mut bio: f64 = 0.0;
    for &j in &tagged {
        let w = left[j].as_ref().unwrap();
        for &k in &tagged {
            let dot: C64 = w.iter().zip(column(&right, k)).map(|(a, b)| a.conj() * b).sum();
            let target = if j == k { 1.0 } else { 0.0 };
            bio = bio.max((dot - target).norm());
        }
    }
    Ok(EigenSet {
        eigenvalues: vals,
        right,
        left,
        localization,
        discrete,
        essential_line: op.essential_line(),
        window,
        threshold,
        biorthogonality: bio,
    })
}

/// Hausdorff distance between the tagged set and its image under `z ↦ -z̄`.
pub fn j_symmetry_check(eigs: &EigenSet) -> f64 {
    let a = eigs.tagged();
    let b: Vec<C64> = a.iter().map(|z| -z.conj()).collect();
    hausdorff(&a, &b)
}

pub fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one = |x: &[C64], y: &[C64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

#[derive(Debug, Clone)]
pub struct Projections {
    pub p_disc: Mat<C64>,
    pub p_ess: Mat<C64>,
    pub rank: usize,
    /// `‖P² - P‖_F`.
    pub idempotence: f64,
    /// `‖Pℋ - ℋP‖_F / ‖ℋ‖_F`.
    pub commutation: f64,
}

/// `P_disc = Σ v_k w_k^*` over tagged modes and `P_ess = I - P_disc`.
/// Tagged modes with nearly parallel right vectors form a cluster whose
/// projector is `V (W^* V)^{-1} W^*`.
pub fn riesz_projections(op: &OperatorDisc, eigs: &EigenSet) -> Result<Projections> {
    let dim = op.dim();
    let tagged: Vec<usize> = (0..eigs.eigenvalues.len()).filter(|&k| eigs.discrete[k]).collect();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &k in &tagged {
        let vk = column(&eigs.right, k);
        let found = clusters.iter_mut().find(|c| {
            let vj = column(&eigs.right, c[0]);
            let dot: C64 = vj.iter().zip(&vk).map(|(a, b)| a.conj() * b).sum();
            let nj: f64 = vj.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let nk: f64 = vk.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            dot.norm() > (1.0 - 1e-6) * nj * nk
        });
        match found {
            Some(c) => c.push(k),
            None => clusters.push(vec![k]),
        }
    }
    let mut p = Mat::<C64>::zeros(dim, dim);
    for c in &clusters {
        let m = c.len();
        let mut v = Mat::<C64>::zeros(dim, m);
        let mut w = Mat::<C64>::zeros(dim, m);
        for (a, &k) in c.iter().enumerate() {
            let wk = eigs.left[k].as_ref().ok_or_else(|| Error::Eigen("missing left vector".into()))?;
            for i in 0..dim {
                v[(i, a)] = eigs.right[(i, k)];
                w[(i, a)] = wk[i];
            }
        }
        let g = w.adjoint() * &v;
        let ginv = g.partial_piv_lu().solve(Mat::<C64>::identity(m, m));
        if ginv.col_iter().flat_map(|c| c.iter().cloned().collect::<Vec<_>>()).any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::Eigen("defective cluster: Gram matrix of left/right vectors is singular".into()));
        }
        p += &v * &ginv * w.adjoint();
    }
    let p_ess = Mat::<C64>::identity(dim, dim) - &p;
    let p2 = &p * &p;
    let idempotence = (&p2 - &p).norm_l2();
    let ph = &p * &op.matrix;
    let hp = &op.matrix * &p;
    let commutation = (&ph - &hp).norm_l2() / op.matrix.norm_l2();
    Ok(Projections { p_disc: p, p_ess, rank: tagged.len(), idempotence, commutation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn free_b0_matches_discrete_laplacian() {
        let n = 40;
        let h = 0.25;
        let op = assemble_free(1, 0.0, 0.0, n, n as f64 * h, None).unwrap();
        let mut ev: Vec<f64> = op.matrix.eigen().unwrap().S().column_vector().iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expect = Vec::new();
        for k in 0..n {
            let theta = (k as f64 + 0.5) * PI / (n as f64 + 0.5);
            let lam = -4.0 / (h * h) * (theta / 2.0).sin().powi(2);
            expect.push(lam - 1.0);
            expect.push(-(lam - 1.0));
        }
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ev.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn block_pattern() {
        let n = 8;
        let w1: Vec<f64> = (0..n).map(|j| 1.0 + j as f64).collect();
        let w2: Vec<C64> = (0..n).map(|j| C64::new(0.3, 0.1 * j as f64)).collect();
        let a = assemble_with_potentials(1, 0.7, 0.2, 0.5, w1.clone(), w2.clone(), None).unwrap();
        let z = assemble_free(1, 0.7, 0.2, n, 4.0, None).unwrap();
        for i in 0..2 * n {
            for j in 0..2 * n {
                let diff = a.matrix[(i, j)] - z.matrix[(i, j)];
                let expect = match (i < n, j < n) {
                    (true, true) if i == j => C64::new(w1[i], 0.0),
                    (false, false) if i == j => C64::new(-w1[i - n], 0.0),
                    (true, false) if j == i + n => w2[i],
                    (false, true) if i == j + n => -w2[j].conj(),
                    _ => C64::new(0.0, 0.0),
                };
                assert!((diff - expect).norm() < 1e-15);
                // J ℋ J = -conj(ℋ)
                let (ii, jj) = ((i + n) % (2 * n), (j + n) % (2 * n));
                assert!((a.matrix[(ii, jj)] + a.matrix[(i, j)].conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn conjugation_is_a_diagonal_shift() {
        let plain = assemble_free(3, 0.9, 0.5, 16, 8.0, None).unwrap();
        let conj = assemble_free(3, 0.9, 0.5, 16, 8.0, Some(0.7)).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                let want = if i == j { C64::new(0.0, 0.9 * 0.7) } else { C64::new(0.0, 0.0) };
                assert!((conj.matrix[(i, j)] - plain.matrix[(i, j)] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn hausdorff_of_symmetric_sets() {
        let a = vec![C64::new(1.0, 2.0), C64::new(-1.0, 2.0), C64::new(0.0, -0.5)];
        let b: Vec<C64> = a.iter().map(|z| -z.conj()).collect();
        assert!(hausdorff(&a, &b) < 1e-15);
        assert_eq!(hausdorff(&[], &[]), 0.0);
    }
}
