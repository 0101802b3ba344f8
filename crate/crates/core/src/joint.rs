//! Joint leakage minimization over precoders, decoders, and the scattering
//! matrix.
//!
//! Three-step alternation per outer iteration:
//! 1. decoders from the d smallest eigenvectors of the received interference
//!    covariance
//! 2. precoders from the mirrored update on the reversed links
//! 3. scattering matrix by warm-started geodesic descent on the precoded
//!    channels (own-link terms drop out of the objective, so the inner
//!    problem sees the d x d cross channels only)
//!
//! The joint objective is non-increasing after every individual step. The
//! loop starts from the no-surface beamformers and stops once an outer
//! iteration reduces the objective by less than a fraction of the
//! no-surface leakage.

use std::time::Instant;

use ndarray::Array2;
use ndarray_linalg::c64;

use crate::channel::ChannelSet;
use crate::error::Result;
use crate::leakage::{beamformed_leakage, effective_channels, Beamformers};
use crate::linalg::{dagger, TOL_UNITARY};
use crate::optim::{minimize_il_mo, IterTrace, OptimizerOptions, ScatteringMatrix};
use crate::precoding::min_il_beamformers;

/// Output of [`joint_min_il`].
#[derive(Debug, Clone)]
pub struct JointResult {
    pub scattering: ScatteringMatrix,
    pub beamformers: Beamformers,
    /// Joint leakage after each outer iteration, starting with the value at
    /// the initial beamformers and identity scattering matrix.
    pub trace: IterTrace,
    /// Per outer iteration: leakage entering the iteration, after the
    /// decoder step, after the precoder step, after the scattering step.
    pub step_ils: Vec<[f64; 4]>,
    /// Leakage of the no-surface beamformer fixed point used as the
    /// stopping reference.
    pub il_no_ris: f64,
}

/// Joint minimization of the post-beamforming leakage.
///
/// `opts.max_iters` caps the outer iterations (default intent: 100);
/// `opts.rel_tol` is the stopping fraction of the no-surface leakage
/// (default intent: 1e-4). The inner manifold solver runs a fixed
/// 100-iteration budget, warm-started from the previous factor, which keeps
/// every outer step a descent step.
pub fn joint_min_il(
    ch: &ChannelSet,
    d: usize,
    p_t: f64,
    opts: &OptimizerOptions,
) -> Result<JointResult> {
    opts.validate()?;
    ch.validate()?;
    let start = Instant::now();
    let kq = ch.k();
    let m = ch.m();
    let (nt, nr) = (ch.nt(), ch.nr());

    // no-surface starting point: alternate on the direct channels alone
    let direct: Vec<Vec<Array2<c64>>> =
        (0..kq).map(|l| (0..kq).map(|k| ch.h[l][k].clone()).collect()).collect();
    let (bf0, tr0) = min_il_beamformers(&direct, d, p_t, 100, None, 1e-9)?;
    let il_no_ris = *tr0.last().expect("nonempty trace");
    let mut v = bf0.v;
    let mut u = bf0.u;

    let mut theta = Array2::<c64>::eye(m);
    let mut q = Array2::<c64>::eye(m);
    let inner_opts = OptimizerOptions { max_iters: 100, rel_tol: 1e-8, mu0: None, ..opts.clone() };

    let eff0 = effective_channels(ch, &theta)?;
    let mut trace = vec![beamformed_leakage(&eff0, &v, &u)];
    let mut step_ils = Vec::new();
    for _ in 0..opts.max_iters {
        let eff = effective_channels(ch, &theta)?;
        // step 1: decoders
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
        let s1 = beamformed_leakage(&eff, &v, &u);
        // step 2: precoders on the reversed links
        let scale = (p_t / d as f64).sqrt();
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
        let s2 = beamformed_leakage(&eff, &v, &u);
        // step 3: scattering matrix on the precoded channels
        let sub = precoded_channels(ch, &v, &u);
        let mo = minimize_il_mo(&sub, &q, &inner_opts)?;
        q = mo.q;
        theta = mo.scattering.theta.clone();
        let s3 = mo.trace.final_il();
        let prev = *trace.last().expect("nonempty");
        step_ils.push([prev, s1, s2, s3]);
        trace.push(s3);
        if prev - s3 < opts.rel_tol * il_no_ris {
            break;
        }
    }
    let scattering = ScatteringMatrix { theta, architecture: crate::optim::Architecture::Fully };
    debug_assert!(scattering.validate(TOL_UNITARY).is_ok());
    let iterations = trace.len() - 1;
    Ok(JointResult {
        scattering,
        beamformers: Beamformers { v, u },
        trace: IterTrace { il_values: trace, wall_time: start.elapsed(), iterations },
        step_ils,
        il_no_ris,
    })
}

fn smallest_eigvecs(s_mat: &Array2<c64>, d: usize) -> Result<Array2<c64>> {
    use crate::linalg::{eigh_c, hermitize};
    let (_, vecs) = eigh_c(&hermitize(s_mat))?;
    Ok(vecs.slice(ndarray::s![.., ..d]).to_owned())
}

/// Channels seen by the scattering subproblem after fixing the beamformers:
/// direct parts U_k^H H_lk V_l (d x d), surface parts U_k^H F_k and V_l^H G_l.
fn precoded_channels(ch: &ChannelSet, v: &[Array2<c64>], u: &[Array2<c64>]) -> ChannelSet {
    let kq = ch.k();
    let h = (0..kq)
        .map(|l| (0..kq).map(|k| dagger(&u[k]).dot(&ch.h[l][k]).dot(&v[l])).collect())
        .collect();
    let f = (0..kq).map(|k| dagger(&u[k]).dot(&ch.f[k])).collect();
    let g = (0..kq).map(|l| dagger(&v[l]).dot(&ch.g[l])).collect();
    ChannelSet { h, f, g, noise_power: ch.noise_power }
}
