//! Dense complex-matrix utilities used by the optimizers.
//!
//! Provides:
//! - Takagi factorization A = Q diag(sigma) Q^T of complex symmetric matrices,
//!   robust to repeated and zero singular values
//! - commutation matrix and the orthonormal basis of the symmetric subspace
//!   (the null space of I - P under vec)
//! - matrix exponential of skew-Hermitian matrices via eigendecomposition,
//!   with the spectrum exposed separately so line searches can rescale steps
//!   without refactorizing
//! - projection of a complex symmetric matrix onto the symmetric unitary set,
//!   through the Takagi route and an SVD-partition cross-check route
//! - seeded complex Gaussian and Haar-random unitary draws, plus the seed
//!   derivation scheme used to give every Monte-Carlo trial its own stream
//!
//! All routines are pure functions; RNG state is owned by the caller.

use ndarray::{s, Array1, Array2, ArrayBase, Data, Dimension};
use ndarray_linalg::{c64, Eigh, QR, SVD, UPLO};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative tolerance for unitarity checks.
pub const TOL_UNITARY: f64 = 1e-8;
/// Relative tolerance for symmetry / skew-symmetry checks.
pub const TOL_SYM: f64 = 1e-8;
/// Relative tolerance for reconstruction contracts.
pub const TOL_RECON: f64 = 1e-8;

// ---------- small helpers ----------

/// Frobenius norm of any complex array.
pub fn frob<S, D>(a: &ArrayBase<S, D>) -> f64
where
    S: Data<Elem = c64>,
    D: Dimension,
{
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Squared Frobenius norm.
pub fn frob2<S, D>(a: &ArrayBase<S, D>) -> f64
where
    S: Data<Elem = c64>,
    D: Dimension,
{
    a.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Conjugate transpose.
pub fn dagger<S>(a: &ArrayBase<S, ndarray::Ix2>) -> Array2<c64>
where
    S: Data<Elem = c64>,
{
    a.t().mapv(|z| z.conj())
}

/// Hermitian part (a + a^H)/2.
pub fn hermitize(a: &Array2<c64>) -> Array2<c64> {
    let ad = dagger(a);
    (a + &ad).mapv(|z| z * 0.5)
}

/// True if every entry is finite.
pub fn all_finite<S, D>(a: &ArrayBase<S, D>) -> bool
where
    S: Data<Elem = c64>,
    D: Dimension,
{
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Outer product a b^T (caller conjugates b if needed).
pub fn outer(a: &ndarray::ArrayView1<c64>, b: &ndarray::ArrayView1<c64>) -> Array2<c64> {
    let (m, n) = (a.len(), b.len());
    Array2::from_shape_fn((m, n), |(i, j)| a[i] * b[j])
}

/// Column-major vectorization vec(A).
pub fn vec_col(a: &Array2<c64>) -> Array1<c64> {
    Array1::from_iter(a.t().iter().cloned())
}

/// Inverse of [`vec_col`]: reshape a length m*n vector into an m x n matrix
/// filled column by column.
pub fn unvec_col(v: &Array1<c64>, m: usize, n: usize) -> Result<Array2<c64>> {
    if v.len() != m * n {
        return Err(Error::Dimension(format!(
            "unvec: vector length {} != {}x{}",
            v.len(),
            m,
            n
        )));
    }
    let by_rows = Array2::from_shape_vec((n, m), v.to_vec())
        .map_err(|e| Error::Dimension(e.to_string()))?;
    Ok(by_rows.t().to_owned())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending and
/// eigenvectors in columns, a = V diag(w) V^H.
///
/// The backend returns complex eigenvectors conjugated relative to that
/// convention (for either memory order of the input), so they are
/// conjugated here; see the regression test on reconstruction.
pub fn eigh_c(a: &Array2<c64>) -> Result<(Array1<f64>, Array2<c64>)> {
    let (w, v) = a.eigh(UPLO::Lower)?;
    Ok((w, v.mapv(|z| z.conj())))
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
pub fn eigh_r(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    Ok(a.eigh(UPLO::Lower)?)
}

// ---------- seeded randomness ----------

/// One round of the splitmix64 mixer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Collapse a tuple of seed components into one 64-bit seed.
///
/// Used to key per-trial RNG streams by (master seed, sweep index, trial)
/// so that trials are independent and insensitive to execution order.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut s = 0x243F_6A88_85A3_08D3u64;
    for &p in parts {
        s = splitmix64(s.wrapping_add(splitmix64(p)));
    }
    s
}

/// Deterministic RNG from a single seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic RNG for one trial of one sweep.
pub fn trial_rng(master_seed: u64, sweep_index: u64, trial: u64) -> ChaCha8Rng {
    seeded_rng(derive_seed(&[master_seed, sweep_index, trial]))
}

/// m x n matrix with i.i.d. CN(0,1) entries.
pub fn crandn<R: Rng>(rng: &mut R, m: usize, n: usize) -> Array2<c64> {
    let f = std::f64::consts::FRAC_1_SQRT_2;
    Array2::from_shape_simple_fn((m, n), || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64::new(re * f, im * f)
    })
}

/// Haar-distributed random unitary via QR of a complex Gaussian with the
/// R diagonal phase-normalized.
pub fn random_unitary<R: Rng>(m: usize, rng: &mut R) -> Result<Array2<c64>> {
    if m == 0 {
        return Err(Error::InvalidConfig("random_unitary: m must be >= 1".into()));
    }
    let a = crandn(rng, m, m);
    let (mut q, r) = a.qr()?;
    for j in 0..m {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c64::new(1.0, 0.0) };
        q.column_mut(j).mapv_inplace(|z| z * ph);
    }
    Ok(q)
}

// ---------- commutation matrix and symmetric basis ----------

/// Permutation P with P vec(A) = vec(A^T) for every m x m matrix A.
pub fn commutation_matrix(m: usize) -> Result<Array2<c64>> {
    if m == 0 {
        return Err(Error::InvalidConfig("commutation_matrix: m must be >= 1".into()));
    }
    let mm = m * m;
    let mut p = Array2::<c64>::zeros((mm, mm));
    for i in 0..m {
        for j in 0..m {
            // vec(A^T)[i + j m] = A[j, i] = vec(A)[j + i m]
            p[(i + j * m, j + i * m)] = c64::new(1.0, 0.0);
        }
    }
    Ok(p)
}

/// Orthonormal basis N (m^2 x m(m+1)/2) of the symmetric subspace:
/// unvec(N x) is symmetric for every x, and (I - P) N = 0.
///
/// Built analytically from index pairs i <= j; diagonal pairs give a unit
/// vector, off-diagonal pairs the normalized sum of the two mirrored units.
pub fn symmetric_nullspace_basis(m: usize) -> Result<Array2<c64>> {
    if m == 0 {
        return Err(Error::InvalidConfig("symmetric_nullspace_basis: m must be >= 1".into()));
    }
    let cols = m * (m + 1) / 2;
    let mut n = Array2::<c64>::zeros((m * m, cols));
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut c = 0;
    for i in 0..m {
        for j in i..m {
            if i == j {
                n[(i + j * m, c)] = c64::new(1.0, 0.0);
            } else {
                n[(i + j * m, c)] = c64::new(inv_sqrt2, 0.0);
                n[(j + i * m, c)] = c64::new(inv_sqrt2, 0.0);
            }
            c += 1;
        }
    }
    Ok(n)
}

// ---------- Takagi factorization ----------

/// Result of [`takagi`]: a = q diag(sigma) q^T with q unitary and sigma the
/// singular values of a in descending order.
#[derive(Debug, Clone)]
pub struct TakagiFactors {
    pub q: Array2<c64>,
    pub sigma: Array1<f64>,
}

/// Takagi factorization of a complex symmetric matrix.
///
/// Method: from the SVD a = U diag(sigma) V^H, the coupling Z = U^H conj(V)
/// is block-diagonal over clusters of equal singular values, and symmetric
/// unitary on each cluster with positive sigma. Each cluster block is phase
/// split as Z_c = W W^T: singletons take the half-angle phase directly;
/// larger clusters diagonalize the real part of Z_c, break ties with the
/// imaginary part, and then take half-angle phases of the resulting
/// near-diagonal. Clusters at sigma = 0 keep the U columns unchanged.
/// Q = U blkdiag(W) then satisfies the reconstruction contract.
pub fn takagi(a: &Array2<c64>) -> Result<TakagiFactors> {
    let m = square_dim(a, "takagi")?;
    let asym = frob(&(a - &a.t().to_owned()));
    if asym > TOL_SYM * frob(a) {
        return Err(Error::Contract(format!(
            "takagi: input not symmetric, ||A - A^T|| = {:.3e}",
            asym
        )));
    }
    let (u_opt, sg, vt_opt) = a.svd(true, true)?;
    let u = u_opt.expect("svd with u requested");
    let vt = vt_opt.expect("svd with vt requested");
    // Z = U^H conj(V) = U^H V^T^H^T ... with V = vt^H this is U^H vt^T.
    let z = dagger(&u).dot(&vt.t());
    let mut q = u.clone();
    let smax = if m > 0 { sg[0] } else { 0.0 };
    let tol = 1e-8 * smax.max(1.0);
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j + 1 < m && (sg[j + 1] - sg[i]).abs() <= tol {
            j += 1;
        }
        let len = j - i + 1;
        if sg[i] <= tol {
            // zero cluster: any orthonormal completion works, keep U columns
        } else if len == 1 {
            let ph = c64::from_polar(1.0, z[(i, i)].arg() / 2.0);
            for r in 0..m {
                q[(r, i)] = u[(r, i)] * ph;
            }
        } else {
            let zc_raw = z.slice(s![i..=j, i..=j]).to_owned();
            let zc = (&zc_raw + &zc_raw.t().to_owned()).mapv(|v| v * 0.5);
            let ar = zc.mapv(|v| v.re);
            let br = zc.mapv(|v| v.im);
            let (da, mut r) = eigh_r(&ar)?;
            // within degenerate eigenvalues of the real part, rotate to
            // diagonalize the projected imaginary part as well
            let mut p = 0;
            while p < len {
                let mut qq = p;
                while qq + 1 < len && (da[qq + 1] - da[p]).abs() <= 1e-8 {
                    qq += 1;
                }
                if qq > p {
                    let rsub = r.slice(s![.., p..=qq]).to_owned();
                    let bc = rsub.t().dot(&br).dot(&rsub);
                    let bcs = (&bc + &bc.t().to_owned()).mapv(|v| v * 0.5);
                    let (_db, rb) = eigh_r(&bcs)?;
                    let rotated = rsub.dot(&rb);
                    r.slice_mut(s![.., p..=qq]).assign(&rotated);
                }
                p = qq + 1;
            }
            let rc = r.mapv(|v| c64::new(v, 0.0));
            let dmat = rc.t().dot(&zc).dot(&rc);
            let mut w = rc;
            for t in 0..len {
                let d = dmat[(t, t)];
                let ph = if d.norm() > 0.0 {
                    c64::from_polar(1.0, d.arg() / 2.0)
                } else {
                    c64::new(1.0, 0.0)
                };
                w.column_mut(t).mapv_inplace(|v| v * ph);
            }
            let qcols = u.slice(s![.., i..=j]).dot(&w);
            q.slice_mut(s![.., i..=j]).assign(&qcols);
        }
        i = j + 1;
    }
    Ok(TakagiFactors { q, sigma: sg })
}

impl TakagiFactors {
    /// Reconstruction q diag(sigma) q^T.
    pub fn reconstruct(&self) -> Array2<c64> {
        let m = self.q.nrows();
        let mut qs = self.q.clone();
        for j in 0..m {
            let s = self.sigma[j];
            qs.column_mut(j).mapv_inplace(|z| z * s);
        }
        qs.dot(&self.q.t())
    }
}

// ---------- skew-Hermitian exponential ----------

/// Spectrum (lambda, W) of a skew-Hermitian b, such that b = W diag(i lambda) W^H.
///
/// Exposed separately so callers can evaluate exp(mu b) for many mu from one
/// factorization.
pub fn skew_spectrum(b: &Array2<c64>) -> Result<(Array1<f64>, Array2<c64>)> {
    square_dim(b, "skew_spectrum")?;
    let skew_defect = frob(&(b + &dagger(b)));
    if skew_defect > TOL_SYM * frob(b).max(1.0) {
        return Err(Error::Contract(format!(
            "skew_spectrum: input not skew-Hermitian, ||B + B^H|| = {:.3e}",
            skew_defect
        )));
    }
    // -i b is Hermitian
    let h = hermitize(&b.mapv(|z| z * c64::new(0.0, -1.0)));
    eigh_c(&h)
}

/// exp(mu b) for skew-Hermitian b given its spectrum from [`skew_spectrum`].
pub fn rotation_from_spectrum(lam: &Array1<f64>, w: &Array2<c64>, mu: f64) -> Array2<c64> {
    let mut wp = w.clone();
    for j in 0..lam.len() {
        let ph = c64::from_polar(1.0, mu * lam[j]);
        wp.column_mut(j).mapv_inplace(|z| z * ph);
    }
    wp.dot(&dagger(w))
}

/// Matrix exponential of a skew-Hermitian matrix; result is unitary.
pub fn expm_skew_hermitian(b: &Array2<c64>) -> Result<Array2<c64>> {
    let (lam, w) = skew_spectrum(b)?;
    Ok(rotation_from_spectrum(&lam, &w, 1.0))
}

// ---------- projection onto symmetric unitary matrices ----------

/// Nearest symmetric unitary matrix through the Takagi route: theta -> Q Q^T.
pub fn project_to_unitary(theta: &Array2<c64>) -> Result<Array2<c64>> {
    let f = takagi(theta)?;
    Ok(f.q.dot(&f.q.t()))
}

/// Cross-check route for [`project_to_unitary`]: from the SVD
/// theta = U diag(s) V^H, keep the U columns of the numerically nonzero
/// singular directions, complete with conjugated V columns, and multiply
/// back by V^H.
pub fn project_to_unitary_svd(theta: &Array2<c64>) -> Result<Array2<c64>> {
    let m = square_dim(theta, "project_to_unitary_svd")?;
    let (u_opt, sg, vt_opt) = theta.svd(true, true)?;
    let u = u_opt.expect("svd with u requested");
    let vt = vt_opt.expect("svd with vt requested");
    let tol = 1e-8 * sg[0].max(1.0);
    let d = sg.iter().filter(|&&s| s > tol).count();
    let mut b = Array2::<c64>::zeros((m, m));
    b.slice_mut(s![.., ..d]).assign(&u.slice(s![.., ..d]));
    // conj(V) columns d.. equal the transposed rows of vt
    let vbar = vt.t();
    b.slice_mut(s![.., d..]).assign(&vbar.slice(s![.., d..]));
    Ok(b.dot(&vt))
}

fn square_dim(a: &Array2<c64>, who: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "{}: matrix is {}x{}, expected square",
            who,
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}
