//! Active beamforming on the equivalent channels.
//!
//! Four precoder/decoder designs over the channels H_lk + F_k Theta G_l^H:
//! - [`svd_precoders`]: per-user singular beams with waterfilled powers,
//!   interference oblivious
//! - [`min_il_beamformers`]: alternating smallest-eigenvector updates that
//!   minimize the post-beamforming leakage, with a reciprocal transmit step
//! - [`max_sinr_beamformers`]: per-stream MMSE-direction alternation on the
//!   forward and reciprocal networks, equal per-stream power
//! - [`max_sr_beamformers`]: sum-rate maximization by repeatedly maximizing
//!   a touching concave lower bound of every user rate; each inner problem
//!   has a closed-form solution after a multiplier bisection
//!
//! Rates are reported in bits; the surrogate algebra runs in nats and is
//! converted once at the boundary.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{c64, Cholesky, Inverse, Solve, UPLO};

use crate::error::{Error, Result};
use crate::leakage::{beamformed_leakage, Beamformers};
use crate::linalg::{dagger, eigh_c, hermitize, outer};

const LN2: f64 = std::f64::consts::LN_2;

// ---------- log-determinants ----------

/// log det of a Hermitian positive definite matrix (nats), Cholesky route.
pub fn logdet_hermitian_cholesky(a: &Array2<c64>) -> Result<f64> {
    let l = a.cholesky(UPLO::Lower)?;
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)].norm();
        if !(d > 0.0) {
            return Err(Error::Numerical("logdet: non-positive pivot".into()));
        }
        acc += d.ln();
    }
    Ok(2.0 * acc)
}

/// log det of a Hermitian positive definite matrix (nats), eigenvalue route.
/// Kept as an independent cross-check of the Cholesky route.
pub fn logdet_hermitian_eigh(a: &Array2<c64>) -> Result<f64> {
    let (w, _) = eigh_c(a)?;
    let mut acc = 0.0;
    for &x in w.iter() {
        if !(x > 0.0) {
            return Err(Error::Numerical("logdet: non-positive eigenvalue".into()));
        }
        acc += x.ln();
    }
    Ok(acc)
}

// ---------- waterfilling ----------

/// Waterfilling power allocation: maximize sum log(1 + g_i p_i / sigma2)
/// subject to sum p_i <= p_t, p_i >= 0.
///
/// Active-set iteration: propose a water level over the currently active
/// gains, drop any stream pushed negative, repeat. Satisfies the KKT
/// conditions exactly on exit; streams with zero gain get zero power.
pub fn waterfill(gains: &[f64], p_t: f64, sigma2: f64) -> Vec<f64> {
    let n = gains.len();
    let mut p = vec![0.0; n];
    let mut active: Vec<usize> = (0..n).filter(|&i| gains[i] > 0.0).collect();
    while !active.is_empty() {
        let inv_sum: f64 = active.iter().map(|&i| sigma2 / gains[i]).sum();
        let level = (p_t + inv_sum) / active.len() as f64;
        let proposal: Vec<f64> = active.iter().map(|&i| level - sigma2 / gains[i]).collect();
        if proposal.iter().cloned().fold(f64::INFINITY, f64::min) >= -1e-15 {
            for (&i, &pi) in active.iter().zip(proposal.iter()) {
                p[i] = pi.max(0.0);
            }
            break;
        }
        active = active
            .iter()
            .zip(proposal.iter())
            .filter(|(_, &pi)| pi > 0.0)
            .map(|(&i, _)| i)
            .collect();
    }
    p
}

/// Rate of user k in bits: log2 det(I + (sigma2 I + interference)^-1 S_kk)
/// with S_lk = (Ht_lk V_l)(Ht_lk V_l)^H, computed as a difference of
/// Hermitian log-determinants.
pub fn rate_of_user(eff: &[Vec<Array2<c64>>], v: &[Array2<c64>], sigma2: f64, k: usize) -> Result<f64> {
    let kq = eff.len();
    if k >= kq || v.len() != kq {
        return Err(Error::Dimension("rate_of_user: index or precoder count out of range".into()));
    }
    let nr = eff[0][k].nrows();
    let mut r = Array2::<c64>::eye(nr).mapv(|z| z * sigma2);
    for l in 0..kq {
        if l == k {
            continue;
        }
        let hv = eff[l][k].dot(&v[l]);
        r += &hv.dot(&dagger(&hv));
    }
    let hk = eff[k][k].dot(&v[k]);
    let total = &r + &hk.dot(&dagger(&hk));
    let num = logdet_hermitian_cholesky(&hermitize(&total))?;
    let den = logdet_hermitian_cholesky(&hermitize(&r))?;
    Ok(((num - den) / LN2).max(0.0))
}

/// Sum of all user rates in bits.
pub fn sum_rate(eff: &[Vec<Array2<c64>>], v: &[Array2<c64>], sigma2: f64) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..eff.len() {
        acc += rate_of_user(eff, v, sigma2, k)?;
    }
    Ok(acc)
}

// ---------- SVD precoders ----------

/// Interference-oblivious design: per user, transmit along the right
/// singular vectors of the own-link channel with waterfilled powers over the
/// squared singular values, decode with the matched left singular vectors.
/// Streams whose waterfilled power is zero keep zero columns, so the stream
/// count adapts to the channel.
pub fn svd_precoders(eff: &[Vec<Array2<c64>>], p_t: f64, sigma2: f64, d: usize) -> Result<Beamformers> {
    use ndarray_linalg::SVD;
    let kq = eff.len();
    let mut v = Vec::with_capacity(kq);
    let mut u = Vec::with_capacity(kq);
    for k in 0..kq {
        let hkk = &eff[k][k];
        let (u_opt, sg, vt_opt) = hkk.svd(true, true)?;
        let uk = u_opt.expect("svd u");
        let vt = vt_opt.expect("svd vt");
        let dd = d.min(sg.len());
        let gains: Vec<f64> = sg.iter().take(dd).map(|&s| s * s).collect();
        let powers = waterfill(&gains, p_t, sigma2);
        let vk_full = dagger(&vt); // right singular vectors as columns
        let mut vk = vk_full.slice(s![.., ..dd]).to_owned();
        for j in 0..dd {
            let scale = powers[j].sqrt();
            vk.column_mut(j).mapv_inplace(|z| z * scale);
        }
        v.push(vk);
        u.push(uk.slice(s![.., ..dd]).to_owned());
    }
    Ok(Beamformers { v, u })
}

// ---------- leakage-minimizing beamformers ----------

fn smallest_eigvecs(s_mat: &Array2<c64>, d: usize) -> Result<Array2<c64>> {
    let (_, vecs) = eigh_c(&hermitize(s_mat))?;
    Ok(vecs.slice(s![.., ..d]).to_owned())
}

/// Alternating leakage minimization.
///
/// Decoders take the d smallest eigenvectors of the received interference
/// covariance S_k = sum over l != k of (Ht_lk V_l)(Ht_lk V_l)^H; precoders
/// take the mirrored update on the reversed links and carry equal per-stream
/// power p_t/d. The returned trace holds the leakage after every half-step
/// (decoder update, then precoder update), and is non-increasing.
pub fn min_il_beamformers(
    eff: &[Vec<Array2<c64>>],
    d: usize,
    p_t: f64,
    iters: usize,
    v0: Option<&[Array2<c64>]>,
    rel_tol: f64,
) -> Result<(Beamformers, Vec<f64>)> {
    let kq = eff.len();
    let nt = eff[0][0].ncols();
    let nr = eff[0][0].nrows();
    if d == 0 || d > nt.min(nr) {
        return Err(Error::Dimension(format!(
            "min_il_beamformers: d = {} must satisfy 1 <= d <= min(nt, nr) = {}",
            d,
            nt.min(nr)
        )));
    }
    let scale = (p_t / d as f64).sqrt();
    let mut v: Vec<Array2<c64>> = match v0 {
        Some(init) => init.to_vec(),
        None => {
            // deterministic start: first d identity columns, equal power
            let mut eye = Array2::<c64>::zeros((nt, d));
            for j in 0..d {
                eye[(j, j)] = c64::new(1.0, 0.0);
            }
            (0..kq).map(|_| eye.mapv(|z| z * scale)).collect()
        }
    };
    let mut u: Vec<Array2<c64>> = vec![Array2::zeros((nr, d)); kq];
    let mut trace = Vec::new();
    for it in 0..iters {
        for k in 0..kq {
            let mut s_mat = Array2::<c64>::zeros((nr, nr));
            for l in 0..kq {
                if l == k {
                    continue;
                }
                let hv = eff[l][k].dot(&v[l]);
                s_mat += &hv.dot(&dagger(&hv));
            }
            u[k] = smallest_eigvecs(&s_mat, d)?;
        }
        trace.push(beamformed_leakage(eff, &v, &u));
        for l in 0..kq {
            let mut t_mat = Array2::<c64>::zeros((nt, nt));
            for k in 0..kq {
                if k == l {
                    continue;
                }
                let hu = dagger(&eff[l][k]).dot(&u[k]);
                t_mat += &hu.dot(&dagger(&hu));
            }
            v[l] = smallest_eigvecs(&t_mat, d)?.mapv(|z| z * scale);
        }
        trace.push(beamformed_leakage(eff, &v, &u));
        if it > 0 && rel_tol > 0.0 {
            let prev = trace[trace.len() - 3];
            let cur = trace[trace.len() - 1];
            if (prev - cur).abs() <= rel_tol * prev.max(1e-300) {
                break;
            }
        }
    }
    Ok((Beamformers { v, u }, trace))
}

// ---------- SINR-maximizing beamformers ----------

/// Per-stream alternation. For stream m of user k the receive filter is the
/// normalized solution of B u = h with h the effective direct-stream channel
/// and B the noise-plus-interference covariance of every other stream; the
/// transmit side repeats the update on the reciprocal network (conjugated
/// links, roles of u and v exchanged). Streams carry equal power p_t/d; the
/// returned decoders are re-orthonormalized by QR to make them valid
/// unitary combiners.
pub fn max_sinr_beamformers(
    eff: &[Vec<Array2<c64>>],
    d: usize,
    p_t: f64,
    sigma2: f64,
    iters: usize,
) -> Result<Beamformers> {
    use ndarray_linalg::QR;
    let kq = eff.len();
    let nt = eff[0][0].ncols();
    let nr = eff[0][0].nrows();
    if d == 0 || d > nt.min(nr) {
        return Err(Error::Dimension(format!(
            "max_sinr_beamformers: d = {} must satisfy 1 <= d <= min(nt, nr) = {}",
            d,
            nt.min(nr)
        )));
    }
    let ps = p_t / d as f64;
    let unit = |n: usize, j: usize| {
        let mut e = Array1::<c64>::zeros(n);
        e[j % n] = c64::new(1.0, 0.0);
        e
    };
    let mut vs: Vec<Vec<Array1<c64>>> = (0..kq).map(|_| (0..d).map(|m| unit(nt, m)).collect()).collect();
    let mut us: Vec<Vec<Array1<c64>>> = (0..kq).map(|_| (0..d).map(|m| unit(nr, m)).collect()).collect();
    let solve_reg = |b: &Array2<c64>, h: &Array1<c64>| -> Result<Array1<c64>> {
        match b.solve(h) {
            Ok(x) => Ok(x),
            Err(_) => {
                let n = b.nrows();
                let tr: f64 = (0..n).map(|i| b[(i, i)].re).sum();
                let eps = 1e-12 * tr / n as f64;
                let reg = b + &Array2::<c64>::eye(n).mapv(|z| z * eps);
                Ok(reg.solve(h)?)
            }
        }
    };
    for _ in 0..iters {
        for k in 0..kq {
            for m in 0..d {
                let mut b = Array2::<c64>::eye(nr).mapv(|z| z * sigma2);
                for l in 0..kq {
                    for j in 0..d {
                        if l == k && j == m {
                            continue;
                        }
                        let hv = eff[l][k].dot(&vs[l][j]);
                        let hvc = hv.mapv(|z| z.conj());
                        b += &outer(&hv.view(), &hvc.view()).mapv(|z| z * ps);
                    }
                }
                let h = eff[k][k].dot(&vs[k][m]);
                let x = solve_reg(&b, &h)?;
                let nrm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                us[k][m] = if nrm > 0.0 { x.mapv(|z| z / nrm) } else { x };
            }
        }
        for k in 0..kq {
            for m in 0..d {
                let mut b = Array2::<c64>::eye(nt).mapv(|z| z * sigma2);
                for l in 0..kq {
                    for j in 0..d {
                        if l == k && j == m {
                            continue;
                        }
                        let hu = dagger(&eff[k][l]).dot(&us[l][j]);
                        let huc = hu.mapv(|z| z.conj());
                        b += &outer(&hu.view(), &huc.view()).mapv(|z| z * ps);
                    }
                }
                let h = dagger(&eff[k][k]).dot(&us[k][m]);
                let x = solve_reg(&b, &h)?;
                let nrm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                vs[k][m] = if nrm > 0.0 { x.mapv(|z| z / nrm) } else { x };
            }
        }
    }
    let mut v = Vec::with_capacity(kq);
    let mut u = Vec::with_capacity(kq);
    for k in 0..kq {
        let mut vk = Array2::<c64>::zeros((nt, d));
        for m in 0..d {
            vk.column_mut(m).assign(&vs[k][m].mapv(|z| z * ps.sqrt()));
        }
        v.push(vk);
        let mut uk = Array2::<c64>::zeros((nr, d));
        for m in 0..d {
            uk.column_mut(m).assign(&us[k][m]);
        }
        let (q, _) = uk.qr()?;
        u.push(q.slice(s![.., ..d]).to_owned());
    }
    Ok(Beamformers { v, u })
}

// ---------- sum-rate surrogate and MM loop ----------

/// Coefficients of the concave lower bound of each user rate, expanded at
/// the precoders V-bar.
///
/// For user k, with R the noise-plus-interference covariance at the
/// expansion point and Tot the all-links covariance:
/// a = log det(I + Lam^H R^-1 Lam) - tr(Lam^H R^-1 Lam) (nats),
/// A = R^-1 Lam, B = R^-1 - Tot^-1 (Hermitian, positive semidefinite),
/// where Lam = Ht_kk Vbar_k. Only the own-link term carries a linear part;
/// this index pattern is what makes the bound touch at the expansion point.
#[derive(Debug, Clone)]
pub struct SurrogateCoefficients {
    /// Constant terms, nats.
    pub a: Vec<f64>,
    /// Linear-term matrices A_k = R_k^-1 Ht_kk Vbar_k.
    pub a_mat: Vec<Array2<c64>>,
    /// Quadratic-term matrices B_k, Hermitian PSD.
    pub b_mat: Vec<Array2<c64>>,
}

/// Build the surrogate coefficients at the expansion precoders `v_bar`.
pub fn surrogate_coefficients(
    eff: &[Vec<Array2<c64>>],
    v_bar: &[Array2<c64>],
    sigma2: f64,
) -> Result<SurrogateCoefficients> {
    let kq = eff.len();
    if v_bar.len() != kq {
        return Err(Error::Dimension("surrogate_coefficients: precoder count mismatch".into()));
    }
    let mut a = Vec::with_capacity(kq);
    let mut a_mat = Vec::with_capacity(kq);
    let mut b_mat = Vec::with_capacity(kq);
    for k in 0..kq {
        let nr = eff[0][k].nrows();
        let mut ri = Array2::<c64>::eye(nr).mapv(|z| z * sigma2);
        let mut tot = Array2::<c64>::eye(nr).mapv(|z| z * sigma2);
        for l in 0..kq {
            let hv = eff[l][k].dot(&v_bar[l]);
            let gram = hv.dot(&dagger(&hv));
            tot += &gram;
            if l != k {
                ri += &gram;
            }
        }
        let rinv = hermitize(&ri).inv()?;
        let lam = eff[k][k].dot(&v_bar[k]);
        let rl = rinv.dot(&lam);
        let lrl = dagger(&lam).dot(&rl);
        let inner = &Array2::<c64>::eye(lam.ncols()) + &lrl;
        let logdet = logdet_hermitian_cholesky(&hermitize(&inner))?;
        let tr_term: f64 = lrl.diag().iter().map(|z| z.re).sum();
        a.push(logdet - tr_term);
        a_mat.push(rl);
        let b = &rinv - &hermitize(&tot).inv()?;
        b_mat.push(hermitize(&b));
    }
    Ok(SurrogateCoefficients { a, a_mat, b_mat })
}

/// Evaluate the surrogate sum, in bits, at precoders `v`.
pub fn surrogate_value(
    eff: &[Vec<Array2<c64>>],
    v: &[Array2<c64>],
    coeffs: &SurrogateCoefficients,
    sigma2: f64,
) -> Result<f64> {
    let kq = eff.len();
    let mut total = 0.0;
    for k in 0..kq {
        let nr = eff[0][k].nrows();
        let mut s_mat = Array2::<c64>::eye(nr).mapv(|z| z * sigma2);
        for l in 0..kq {
            let hv = eff[l][k].dot(&v[l]);
            s_mat += &hv.dot(&dagger(&hv));
        }
        // Re tr(A_k V_k^H Ht_kk^H)
        let prod = coeffs.a_mat[k].dot(&dagger(&v[k])).dot(&dagger(&eff[k][k]));
        let lin = prod.diag().iter().map(|z| z.re).sum::<f64>();
        let quad = coeffs.b_mat[k].dot(&s_mat).diag().iter().map(|z| z.re).sum::<f64>();
        total += coeffs.a[k] + 2.0 * lin - quad;
    }
    Ok(total / LN2)
}

/// Sum-rate maximization by majorize-maximize.
///
/// Starting from `v_init` (default: SVD precoders), each iteration rebuilds
/// the surrogate at the current precoders and maximizes it. The surrogate
/// separates per transmitter; each update is V_l = (D_l + mu I)^-1 C_l with
/// D_l = sum_k Ht_lk^H B_k Ht_lk and C_l = Ht_ll^H A_l, where mu >= 0 is
/// bisected so that tr(V V^H) <= p_t. The true sum rate is non-decreasing
/// across iterations; the returned trace records it per iteration (bits).
pub fn max_sr_beamformers(
    eff: &[Vec<Array2<c64>>],
    v_init: Option<&[Array2<c64>]>,
    p_t: f64,
    sigma2: f64,
    mm_iters: usize,
    d: usize,
) -> Result<(Beamformers, Vec<f64>)> {
    use ndarray_linalg::SVD;
    let kq = eff.len();
    let nt = eff[0][0].ncols();
    let mut v: Vec<Array2<c64>> = match v_init {
        Some(init) => init.to_vec(),
        None => svd_precoders(eff, p_t, sigma2, d)?.v,
    };
    let mut srs = vec![sum_rate(eff, &v, sigma2)?];
    for it in 0..mm_iters {
        let coeffs = surrogate_coefficients(eff, &v, sigma2)?;
        let mut v_next = Vec::with_capacity(kq);
        for l in 0..kq {
            let mut d_mat = Array2::<c64>::zeros((nt, nt));
            for k in 0..kq {
                d_mat += &dagger(&eff[l][k]).dot(&coeffs.b_mat[k]).dot(&eff[l][k]);
            }
            let d_mat = hermitize(&d_mat);
            let c_mat = dagger(&eff[l][l]).dot(&coeffs.a_mat[l]);
            let (lam_raw, e) = eigh_c(&d_mat)?;
            let lam: Vec<f64> = lam_raw.iter().map(|&x| x.max(0.0)).collect();
            let ec = dagger(&e).dot(&c_mat);
            let row_norms: Vec<f64> =
                (0..nt).map(|i| ec.row(i).iter().map(|z| z.norm_sqr()).sum()).collect();
            let pow_at = |mu: f64| -> f64 {
                row_norms
                    .iter()
                    .zip(lam.iter())
                    .map(|(&rn, &li)| rn / ((li + mu) * (li + mu)))
                    .sum()
            };
            let lam_min = lam.first().cloned().unwrap_or(0.0);
            let lam_max = lam.last().cloned().unwrap_or(0.0);
            let mu = if lam_min > 1e-14 * lam_max.max(f64::MIN_POSITIVE) && pow_at(0.0) <= p_t {
                0.0
            } else {
                let total: f64 = row_norms.iter().sum();
                let mut hi = (total / p_t).sqrt().max(1e-30);
                let mut guard = 0;
                while pow_at(hi) > p_t {
                    hi *= 2.0;
                    guard += 1;
                    if guard > 400 {
                        return Err(Error::Numerical("max_sr: power bisection bracket failed".into()));
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if pow_at(mid) > p_t {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-12 * hi.max(1e-30) {
                        break;
                    }
                }
                hi
            };
            let mut scaled = ec.clone();
            for i in 0..nt {
                let f = 1.0 / (lam[i] + mu);
                scaled.row_mut(i).mapv_inplace(|z| z * f);
            }
            v_next.push(e.dot(&scaled));
        }
        v = v_next;
        srs.push(sum_rate(eff, &v, sigma2)?);
        if it > 2 {
            let prev = srs[srs.len() - 2];
            let cur = srs[srs.len() - 1];
            if (cur - prev).abs() <= 1e-8 * prev.abs().max(1e-300) {
                break;
            }
        }
    }
    // matched decoders from the final own-link products
    let mut u = Vec::with_capacity(kq);
    for k in 0..kq {
        let hv = eff[k][k].dot(&v[k]);
        let (u_opt, _sg, _) = hv.svd(true, false)?;
        let uk = u_opt.expect("svd u");
        let cols = v[k].ncols().min(uk.ncols());
        u.push(uk.slice(s![.., ..cols]).to_owned());
    }
    Ok((Beamformers { v, u }, srs))
}
