//! Two-stage beamforming for surface-assisted multi-user MIMO links.
//!
//! A reconfigurable scattering surface sits between K transmitter-receiver
//! pairs that interfere with each other. Stage one shapes the surface
//! response to cancel cross-link interference; stage two designs transmit
//! precoders and receive combiners on the resulting effective channels.
//!
//! Capabilities:
//!
//! - geometric channel generation with distance-dependent path loss,
//!   Rayleigh direct links, and rank-one Rician surface links
//! - interference leakage as a quadratic form in the vectorized surface
//!   response, for fully-, group-, and single-connected architectures
//! - leakage minimization by Riemannian descent on the symmetric unitary
//!   manifold, by relax-then-project least squares, by per-group block
//!   descent, and by coordinate descent over diagonal phases
//! - precoder designs: interference-blind SVD with waterfilling, leakage
//!   minimizing subspace alternation, per-stream SINR maximization, and a
//!   sum-rate surrogate ascent
//! - joint alternation of surface response and beamformers against residual
//!   leakage after combining
//! - batch experiment runner with seeded, reproducible Monte-Carlo sweeps
//!   and CSV / JSON-lines output
//!
//! The numerical backbone is `ndarray` with an OpenBLAS-backed LAPACK.

extern crate blas_src;

pub mod channel;
pub mod error;
pub mod joint;
pub mod leakage;
pub mod linalg;
pub mod metrics;
pub mod optim;
pub mod precoding;
pub mod runner;

pub use error::{Error, Result};
