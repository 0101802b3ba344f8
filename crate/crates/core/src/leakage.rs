//! Interference-leakage evaluation and its quadratic reformulations.
//!
//! The leakage of a scattering matrix Theta is
//! IL = sum over ordered pairs (l, k), l != k, of ||H_lk + F_k Theta G_l^H||_F^2.
//!
//! Provides:
//! - direct evaluation and the equivalent quadratic form
//!   IL(r) = tr(T) + r^H Sigma r + 2 Re(r^H s), with r = vec(Theta) for a
//!   full surface (Kronecker-structured Sigma) or r = diag(Theta) for a
//!   diagonal one (Hadamard-structured Sigma)
//! - the stacked linear operator J with IL = ||J vec(Theta) + h||^2, plus its
//!   restriction to the symmetric subspace, used by the relax-then-project
//!   solver and by least-squares analyses
//! - a dimension-counting feasibility predicate for zero leakage
//! - equivalent-channel assembly and post-beamforming leakage
//!
//! All functions are pure.

use ndarray::linalg::kron;
use ndarray::{s, Array1, Array2};
use ndarray_linalg::c64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{dagger, eigh_c, frob2, outer, unvec_col, vec_col};

/// Ordered interfering pairs (l, k) with l != k, k-major to keep every
/// stacked operator and quadratic form in one canonical row order.
pub fn pairs(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(k * (k - 1));
    for kk in 0..k {
        for l in 0..k {
            if l != kk {
                out.push((l, kk));
            }
        }
    }
    out
}

/// Total direct-link interference power sum ||H_lk||_F^2 over l != k.
pub fn direct_interference_power(ch: &ChannelSet) -> f64 {
    pairs(ch.k()).iter().map(|&(l, k)| frob2(&ch.h[l][k])).sum()
}

/// Leakage of a scattering matrix: sum ||H_lk + F_k Theta G_l^H||_F^2.
pub fn interference_leakage(ch: &ChannelSet, theta: &Array2<c64>) -> Result<f64> {
    let m = ch.m();
    if theta.dim() != (m, m) {
        return Err(Error::Dimension(format!(
            "interference_leakage: theta is {}x{}, expected {}x{}",
            theta.nrows(),
            theta.ncols(),
            m,
            m
        )));
    }
    let mut il = 0.0;
    for (l, k) in pairs(ch.k()) {
        let e = &ch.h[l][k] + &ch.f[k].dot(theta).dot(&dagger(&ch.g[l]));
        il += frob2(&e);
    }
    Ok(il)
}

/// Which vectorization the quadratic form uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadMode {
    /// r = vec(Theta), Sigma is M^2 x M^2 with Kronecker blocks.
    Bdris,
    /// r = diag(Theta), Sigma is M x M with Hadamard blocks.
    Diagonal,
}

/// Quadratic form data: IL(r) = t_trace + r^H Sigma r + 2 Re(r^H s).
#[derive(Debug, Clone)]
pub struct IlQuadraticForm {
    /// Hermitian positive semidefinite system matrix.
    pub sigma_big: Array2<c64>,
    /// Linear term; always lies in the column span of `sigma_big`.
    pub s_vec: Array1<c64>,
    /// Constant term sum ||H_lk||_F^2.
    pub t_trace: f64,
    pub mode: QuadMode,
}

impl IlQuadraticForm {
    /// Evaluate the form at a coefficient vector r.
    pub fn eval(&self, r: &Array1<c64>) -> Result<f64> {
        if r.len() != self.s_vec.len() {
            return Err(Error::Dimension(format!(
                "quadratic form: r has length {}, expected {}",
                r.len(),
                self.s_vec.len()
            )));
        }
        let rc = r.mapv(|z| z.conj());
        let quad = rc.dot(&self.sigma_big.dot(r)).re;
        let lin = 2.0 * rc.dot(&self.s_vec).re;
        Ok(self.t_trace + quad + lin)
    }

    /// Numerical rank of `sigma_big` with threshold `tol_rel * lambda_max`.
    pub fn sigma_rank(&self, tol_rel: f64) -> Result<usize> {
        let (w, _) = eigh_c(&self.sigma_big)?;
        let wmax = w.iter().cloned().fold(0.0f64, f64::max);
        Ok(w.iter().filter(|&&x| x > tol_rel * wmax).count())
    }
}

/// Build the quadratic form of the leakage in the requested mode.
pub fn il_quadratic_form(ch: &ChannelSet, mode: QuadMode) -> Result<IlQuadraticForm> {
    ch.validate()?;
    let m = ch.m();
    let prs = pairs(ch.k());
    let mut t_trace = 0.0;
    let mut smat = Array2::<c64>::zeros((m, m));
    for &(l, k) in &prs {
        t_trace += frob2(&ch.h[l][k]);
        let c = dagger(&ch.f[k]).dot(&ch.h[l][k]).dot(&ch.g[l]);
        smat += &c;
    }
    match mode {
        QuadMode::Bdris => {
            let mut sigma = Array2::<c64>::zeros((m * m, m * m));
            for &(l, k) in &prs {
                let gg = ch.g[l].t().dot(&ch.g[l].mapv(|z| z.conj()));
                let ff = dagger(&ch.f[k]).dot(&ch.f[k]);
                sigma += &kron(&gg, &ff);
            }
            Ok(IlQuadraticForm { sigma_big: sigma, s_vec: vec_col(&smat), t_trace, mode })
        }
        QuadMode::Diagonal => {
            let mut sigma = Array2::<c64>::zeros((m, m));
            for &(l, k) in &prs {
                let gg = ch.g[l].t().dot(&ch.g[l].mapv(|z| z.conj()));
                let ff = dagger(&ch.f[k]).dot(&ch.f[k]);
                sigma += &(&gg * &ff);
            }
            let s = smat.diag().to_owned();
            Ok(IlQuadraticForm { sigma_big: sigma, s_vec: s, t_trace, mode })
        }
    }
}

/// Dimension-counting predicate for zero leakage with an unconstrained
/// surface: true iff M^2 (or M(M+1)/2 when restricted to symmetric
/// matrices) is at least the total cross-link dimension
/// sum over l != k of N_R(k) N_T(l).
///
/// Requires M >= every antenna count involved. This is the classical
/// counting argument; see the crate tests for where generic channels fall
/// short of it.
pub fn zero_il_feasible(n_rx: &[usize], n_tx: &[usize], m: usize, symmetric: bool) -> Result<bool> {
    if n_rx.len() != n_tx.len() || n_rx.len() < 2 {
        return Err(Error::InvalidConfig(
            "zero_il_feasible: need matching per-user dimension lists of length >= 2".into(),
        ));
    }
    let maxdim = n_rx.iter().chain(n_tx.iter()).cloned().max().unwrap_or(0);
    if m < maxdim {
        return Err(Error::Contract(format!(
            "zero_il_feasible: m = {} below max antenna count {}",
            m, maxdim
        )));
    }
    let kk = n_rx.len();
    let mut need = 0usize;
    for k in 0..kk {
        for l in 0..kk {
            if l != k {
                need += n_rx[k] * n_tx[l];
            }
        }
    }
    let have = if symmetric { m * (m + 1) / 2 } else { m * m };
    Ok(have >= need)
}

/// Equivalent channels H_lk + F_k Theta G_l^H for all (l, k), including l = k.
pub fn effective_channels(ch: &ChannelSet, theta: &Array2<c64>) -> Result<Vec<Vec<Array2<c64>>>> {
    let m = ch.m();
    if theta.dim() != (m, m) {
        return Err(Error::Dimension(format!(
            "effective_channels: theta is {}x{}, expected {}x{}",
            theta.nrows(),
            theta.ncols(),
            m,
            m
        )));
    }
    let k = ch.k();
    let mut out = Vec::with_capacity(k);
    for l in 0..k {
        let ft = theta.dot(&dagger(&ch.g[l])); // M x Nt, shared across receivers
        let mut row = Vec::with_capacity(k);
        for kk in 0..k {
            row.push(&ch.h[l][kk] + &ch.f[kk].dot(&ft));
        }
        out.push(row);
    }
    Ok(out)
}

/// Per-user precoders and unitary decoders.
#[derive(Debug, Clone)]
pub struct Beamformers {
    /// Precoders, `v[k]` is Nt x d; tr(V V^H) <= P_t.
    pub v: Vec<Array2<c64>>,
    /// Decoders, `u[k]` is Nr x d with orthonormal columns.
    pub u: Vec<Array2<c64>>,
}

impl Beamformers {
    pub fn k(&self) -> usize {
        self.v.len()
    }

    /// Check decoder orthonormality and the per-user power budget.
    pub fn validate(&self, pt_mw: f64, tol: f64) -> Result<()> {
        if self.v.len() != self.u.len() || self.v.is_empty() {
            return Err(Error::Dimension("beamformers: v and u must have equal nonzero length".into()));
        }
        for k in 0..self.v.len() {
            let d = self.u[k].ncols();
            let gram = dagger(&self.u[k]).dot(&self.u[k]);
            let eye = Array2::<c64>::eye(d);
            let defect = (&gram - &eye).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if defect > tol {
                return Err(Error::Contract(format!(
                    "beamformers: decoder {} not orthonormal, defect {:.3e}",
                    k, defect
                )));
            }
            let power = frob2(&self.v[k]);
            if power > pt_mw * (1.0 + 1e-9) {
                return Err(Error::Contract(format!(
                    "beamformers: precoder {} power {:.6e} exceeds budget {:.6e}",
                    k, power, pt_mw
                )));
            }
        }
        Ok(())
    }
}

/// Leakage after beamforming on precomputed equivalent channels:
/// sum over l != k of ||U_k^H Ht_lk V_l||_F^2.
pub fn beamformed_leakage(eff: &[Vec<Array2<c64>>], v: &[Array2<c64>], u: &[Array2<c64>]) -> f64 {
    let k = eff.len();
    let mut il = 0.0;
    for &(l, kk) in &pairs(k) {
        let x = dagger(&u[kk]).dot(&eff[l][kk]).dot(&v[l]);
        il += frob2(&x);
    }
    il
}

/// Leakage after beamforming, assembling the equivalent channels internally.
pub fn il_with_beamformers(ch: &ChannelSet, theta: &Array2<c64>, bf: &Beamformers) -> Result<f64> {
    if bf.k() != ch.k() {
        return Err(Error::Dimension("il_with_beamformers: beamformer count != user count".into()));
    }
    let eff = effective_channels(ch, theta)?;
    Ok(beamformed_leakage(&eff, &bf.v, &bf.u))
}

// ---------- stacked linear operators ----------

/// Stacked operator (J, h) with IL(Theta) = ||J vec(Theta) + h||^2.
///
/// Row blocks follow [`pairs`]; the column for vec index (i, j) is
/// vec(f_i g_j^H) of the pair's F and G columns.
pub fn stacked_design_full(ch: &ChannelSet) -> Result<(Array2<c64>, Array1<c64>)> {
    ch.validate()?;
    let m = ch.m();
    let prs = pairs(ch.k());
    let (nr, nt) = (ch.nr(), ch.nt());
    let block = nr * nt;
    let rows = prs.len() * block;
    let mut j = Array2::<c64>::zeros((rows, m * m));
    let mut h = Array1::<c64>::zeros(rows);
    let mut r0 = 0;
    for &(l, k) in &prs {
        h.slice_mut(s![r0..r0 + block]).assign(&vec_col(&ch.h[l][k]));
        let mut c = 0;
        for jj in 0..m {
            let gcol = ch.g[l].column(jj).mapv(|z| z.conj());
            for ii in 0..m {
                let col = outer(&ch.f[k].column(ii), &gcol.view());
                j.slice_mut(s![r0..r0 + block, c]).assign(&vec_col(&col));
                c += 1;
            }
        }
        r0 += block;
    }
    Ok((j, h))
}

/// Stacked operator restricted to the symmetric subspace: (A, h) with
/// IL = ||A x + h||^2 where Theta = unvec(N x) and N is the orthonormal
/// symmetric basis. Built column by column without forming J or N.
pub fn stacked_design_symmetric(ch: &ChannelSet) -> Result<(Array2<c64>, Array1<c64>)> {
    ch.validate()?;
    let m = ch.m();
    let prs = pairs(ch.k());
    let (nr, nt) = (ch.nr(), ch.nt());
    let block = nr * nt;
    let rows = prs.len() * block;
    let cols = m * (m + 1) / 2;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut a = Array2::<c64>::zeros((rows, cols));
    let mut h = Array1::<c64>::zeros(rows);
    let mut r0 = 0;
    for &(l, k) in &prs {
        h.slice_mut(s![r0..r0 + block]).assign(&vec_col(&ch.h[l][k]));
        let mut c = 0;
        for i in 0..m {
            for jj in i..m {
                let gj = ch.g[l].column(jj).mapv(|z| z.conj());
                let v = vec_col(&outer(&ch.f[k].column(i), &gj.view()));
                if i == jj {
                    let mut dst = a.slice_mut(s![r0..r0 + block, c]);
                    dst += &v;
                } else {
                    let gi = ch.g[l].column(i).mapv(|z| z.conj());
                    let w = vec_col(&outer(&ch.f[k].column(jj), &gi.view()));
                    let mix = (&v + &w).mapv(|z| z * inv_sqrt2);
                    let mut dst = a.slice_mut(s![r0..r0 + block, c]);
                    dst += &mix;
                }
                c += 1;
            }
        }
        r0 += block;
    }
    Ok((a, h))
}

/// Minimum-norm least-squares solution x of min ||A x + h|| through the
/// smaller Gram matrix; null directions of A contribute nothing.
pub fn lstsq_min_norm(a: &Array2<c64>, h: &Array1<c64>) -> Result<Array1<c64>> {
    let (rows, cols) = a.dim();
    if h.len() != rows {
        return Err(Error::Dimension("lstsq_min_norm: rhs length mismatch".into()));
    }
    let ah = dagger(a);
    if rows <= cols {
        let gram = a.dot(&ah);
        let (w, u) = eigh_c(&gram)?;
        let wmax = w.iter().cloned().fold(0.0f64, f64::max);
        let beta = dagger(&u).dot(h);
        let mut y = Array1::<c64>::zeros(rows);
        for i in 0..rows {
            if w[i] > 1e-14 * wmax.max(f64::MIN_POSITIVE) {
                y[i] = beta[i] / w[i];
            }
        }
        Ok(ah.dot(&u.dot(&y)).mapv(|z| -z))
    } else {
        let gram = ah.dot(a);
        let (w, u) = eigh_c(&gram)?;
        let wmax = w.iter().cloned().fold(0.0f64, f64::max);
        let beta = dagger(&u).dot(&ah.dot(h));
        let mut y = Array1::<c64>::zeros(cols);
        for i in 0..cols {
            if w[i] > 1e-14 * wmax.max(f64::MIN_POSITIVE) {
                y[i] = beta[i] / w[i];
            }
        }
        Ok(u.dot(&y).mapv(|z| -z))
    }
}

/// Result of the unconstrained least-squares leakage minimization.
#[derive(Debug, Clone)]
pub struct RelaxedSolution {
    /// Minimizer, reshaped to M x M (symmetric when the symmetric basis was used).
    pub theta: Array2<c64>,
    /// Achieved leakage ||A x + h||^2.
    pub residual_il: f64,
    /// Achieved leakage relative to the direct-channel power tr(T).
    pub rel_residual: f64,
}

/// Minimize the leakage over an unconstrained Theta (test-mode analysis: no
/// unitarity, no trace cap). With `symmetric` the search space is restricted
/// to symmetric matrices.
pub fn relaxed_min_il(ch: &ChannelSet, symmetric: bool) -> Result<RelaxedSolution> {
    let m = ch.m();
    let (a, h) = if symmetric { stacked_design_symmetric(ch)? } else { stacked_design_full(ch)? };
    let x = lstsq_min_norm(&a, &h)?;
    let resid = &a.dot(&x) + &h;
    let residual_il = frob2(&resid);
    let tr_t = frob2(&h);
    let theta = if symmetric {
        let n = crate::linalg::symmetric_nullspace_basis(m)?;
        unvec_col(&n.dot(&x), m, m)?
    } else {
        unvec_col(&x, m, m)?
    };
    Ok(RelaxedSolution {
        theta,
        residual_il,
        rel_residual: residual_il / tr_t.max(f64::MIN_POSITIVE),
    })
}
