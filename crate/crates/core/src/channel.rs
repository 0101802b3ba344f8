//! Simulation scenario and channel draws.
//!
//! Geometry: K transmitters on the left edge and K receivers on the right
//! edge of a square, antenna height 1.5 m, with a reconfigurable surface at a
//! configurable position. Direct Tx-Rx links are Rayleigh with a steep
//! path-loss exponent; the links through the surface are Rician with a
//! rank-one line-of-sight component built from uniform-linear-array steering
//! vectors and a gentler exponent.
//!
//! Conventions:
//! - all linear powers are in milliwatts, path loss enters as a field scale
//!   sqrt(PL_lin) on each channel matrix
//! - distances are 3-D Euclidean
//! - `h[l][k]` is the channel from transmitter l to receiver k (Nr x Nt);
//!   `f[k]` maps the surface to receiver k (Nr x M); `g[l]` maps
//!   transmitter l to the surface (Nt x M)

use ndarray::Array1;
use ndarray::Array2;
use ndarray_linalg::c64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, crandn, outer};
use crate::optim::Architecture;

/// Everything needed to reproduce one experiment: geometry, antenna counts,
/// stream counts, power, bandwidth, noise figure, fading parameters, seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Number of transmit/receive pairs.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Transmit antennas per user.
    #[serde(default = "default_antennas")]
    pub nt: usize,
    /// Receive antennas per user.
    #[serde(default = "default_antennas")]
    pub nr: usize,
    /// Streams per user.
    #[serde(default = "default_d")]
    pub d: usize,
    /// Number of surface elements.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Surface circuit topology.
    #[serde(default)]
    pub architecture: Architecture,
    /// Surface position (x, y, z) in meters.
    #[serde(default = "default_ris_position")]
    pub ris_position: [f64; 3],
    /// Side of the deployment square in meters.
    #[serde(default = "default_square_side")]
    pub square_side: f64,
    /// Transmit power per user in dBm.
    #[serde(default = "default_pt_dbm")]
    pub pt_dbm: f64,
    /// Bandwidth in Hz (sets the noise floor).
    #[serde(default = "default_bandwidth_hz")]
    pub bandwidth_hz: f64,
    /// Receiver noise figure in dB.
    #[serde(default = "default_noise_figure_db")]
    pub noise_figure_db: f64,
    /// Path-loss exponent of the direct links.
    #[serde(default = "default_alpha_direct")]
    pub alpha_direct: f64,
    /// Path-loss exponent of the surface links.
    #[serde(default = "default_alpha_ris")]
    pub alpha_ris: f64,
    /// Rician factor of the surface links (LoS over scattered power).
    #[serde(default = "default_rician_gamma")]
    pub rician_gamma: f64,
    /// Monte-Carlo trials per sweep point.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Master RNG seed.
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    3
}
fn default_antennas() -> usize {
    3
}
fn default_d() -> usize {
    2
}
fn default_m() -> usize {
    40
}
fn default_ris_position() -> [f64; 3] {
    [40.0, 25.0, 5.0]
}
fn default_square_side() -> f64 {
    50.0
}
fn default_pt_dbm() -> f64 {
    20.0
}
fn default_bandwidth_hz() -> f64 {
    40e6
}
fn default_noise_figure_db() -> f64 {
    10.0
}
fn default_alpha_direct() -> f64 {
    3.75
}
fn default_alpha_ris() -> f64 {
    2.0
}
fn default_rician_gamma() -> f64 {
    3.0
}
fn default_trials() -> usize {
    20
}

impl Default for ScenarioConfig {
    /// Three 3x3 users with 2 streams each, a 40-element surface at
    /// (40, 25, 5) in a 50 m square, 20 dBm per user over 40 MHz.
    fn default() -> Self {
        ScenarioConfig {
            k: default_k(),
            nt: default_antennas(),
            nr: default_antennas(),
            d: default_d(),
            m: default_m(),
            architecture: Architecture::Fully,
            ris_position: default_ris_position(),
            square_side: default_square_side(),
            pt_dbm: default_pt_dbm(),
            bandwidth_hz: default_bandwidth_hz(),
            noise_figure_db: default_noise_figure_db(),
            alpha_direct: default_alpha_direct(),
            alpha_ris: default_alpha_ris(),
            rician_gamma: default_rician_gamma(),
            trials: default_trials(),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Validate cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!("k = {} but at least 2 users are required", self.k)));
        }
        if self.nt == 0 || self.nr == 0 || self.m == 0 {
            return Err(Error::InvalidConfig("nt, nr, m must all be >= 1".into()));
        }
        if self.d == 0 || self.d > self.nt.min(self.nr) {
            return Err(Error::InvalidConfig(format!(
                "d = {} must satisfy 1 <= d <= min(nt, nr) = {}",
                self.d,
                self.nt.min(self.nr)
            )));
        }
        match self.architecture {
            Architecture::Diagonal => {}
            Architecture::Group(mg) => {
                if mg == 0 || self.m % mg != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "group size {} must divide m = {}",
                        mg, self.m
                    )));
                }
                if self.m < self.nt.max(self.nr) {
                    return Err(Error::InvalidConfig(format!(
                        "m = {} must be >= max(nt, nr) = {} for a beyond-diagonal surface",
                        self.m,
                        self.nt.max(self.nr)
                    )));
                }
            }
            Architecture::Fully | Architecture::RelaxedSymmetric => {
                if self.m < self.nt.max(self.nr) {
                    return Err(Error::InvalidConfig(format!(
                        "m = {} must be >= max(nt, nr) = {} for a beyond-diagonal surface",
                        self.m,
                        self.nt.max(self.nr)
                    )));
                }
            }
        }
        if !(self.square_side > 0.0 && self.bandwidth_hz > 0.0) {
            return Err(Error::InvalidConfig("square_side and bandwidth_hz must be positive".into()));
        }
        if self.rician_gamma < 0.0 {
            return Err(Error::InvalidConfig("rician_gamma must be >= 0".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        Ok(())
    }

    /// Transmit power in linear mW.
    pub fn pt_mw(&self) -> f64 {
        10f64.powf(self.pt_dbm / 10.0)
    }

    /// Noise power in linear mW.
    pub fn noise_power_mw(&self) -> Result<f64> {
        Ok(10f64.powf(noise_power_dbm(self.bandwidth_hz, self.noise_figure_db)? / 10.0))
    }
}

/// Transmitter and receiver coordinates in meters.
///
/// Users are spread evenly along the left (x = 0) and right (x = side) edges
/// at height 1.5 m.
pub fn node_positions(config: &ScenarioConfig) -> Result<(Vec<[f64; 3]>, Vec<[f64; 3]>)> {
    if config.k < 2 {
        return Err(Error::InvalidConfig("node_positions: k must be >= 2".into()));
    }
    let side = config.square_side;
    let mut tx = Vec::with_capacity(config.k);
    let mut rx = Vec::with_capacity(config.k);
    for i in 0..config.k {
        let y = side * i as f64 / (config.k - 1) as f64;
        tx.push([0.0, y, 1.5]);
        rx.push([side, y, 1.5]);
    }
    Ok((tx, rx))
}

/// Distance-dependent path loss in dB (negative): -28 - 10 alpha log10(r).
pub fn path_loss_db(r_m: f64, alpha: f64) -> Result<f64> {
    if !(r_m > 0.0) {
        return Err(Error::InvalidConfig(format!("path_loss_db: distance {} must be > 0", r_m)));
    }
    Ok(-28.0 - 10.0 * alpha * r_m.log10())
}

/// Linear path-loss factor.
pub fn path_loss_lin(r_m: f64, alpha: f64) -> Result<f64> {
    Ok(10f64.powf(path_loss_db(r_m, alpha)? / 10.0))
}

/// Thermal noise power over a bandwidth plus noise figure, in dBm.
pub fn noise_power_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::InvalidConfig("noise_power_dbm: bandwidth must be > 0".into()));
    }
    Ok(-174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}

/// Unit-modulus steering vector of an n-element half-wavelength ULA toward
/// azimuth theta: entries exp(i pi k sin theta).
pub fn steering(n: usize, theta: f64) -> Array1<c64> {
    let s = theta.sin();
    Array1::from_iter((0..n).map(|k| c64::from_polar(1.0, std::f64::consts::PI * k as f64 * s)))
}

/// One draw of all channels in a scenario.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// Direct channels, `h[l][k]` from Tx l to Rx k, each Nr x Nt.
    pub h: Vec<Vec<Array2<c64>>>,
    /// Surface-to-receiver channels, `f[k]` is Nr x M.
    pub f: Vec<Array2<c64>>,
    /// Transmitter-to-surface channels, `g[l]` is Nt x M.
    pub g: Vec<Array2<c64>>,
    /// Noise power sigma^2 in linear mW.
    pub noise_power: f64,
}

impl ChannelSet {
    pub fn k(&self) -> usize {
        self.h.len()
    }
    pub fn nr(&self) -> usize {
        self.h[0][0].nrows()
    }
    pub fn nt(&self) -> usize {
        self.h[0][0].ncols()
    }
    pub fn m(&self) -> usize {
        self.f[0].ncols()
    }

    /// Check internal dimension consistency and finiteness.
    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k < 2 || self.f.len() != k || self.g.len() != k {
            return Err(Error::Dimension("channel set: per-user lists must all have length k >= 2".into()));
        }
        let (nr, nt, m) = (self.nr(), self.nt(), self.m());
        for l in 0..k {
            if self.h[l].len() != k {
                return Err(Error::Dimension("channel set: h must be k x k".into()));
            }
            for kk in 0..k {
                if self.h[l][kk].dim() != (nr, nt) || !all_finite(&self.h[l][kk]) {
                    return Err(Error::Dimension(format!("channel set: h[{}][{}] invalid", l, kk)));
                }
            }
            if self.f[l].dim() != (nr, m) || !all_finite(&self.f[l]) {
                return Err(Error::Dimension(format!("channel set: f[{}] invalid", l)));
            }
            if self.g[l].dim() != (nt, m) || !all_finite(&self.g[l]) {
                return Err(Error::Dimension(format!("channel set: g[{}] invalid", l)));
            }
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::Dimension("channel set: noise power must be positive".into()));
        }
        Ok(())
    }
}

fn dist(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    p.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Rician mixture sqrt(pl) (sqrt(g/(1+g)) L + sqrt(1/(1+g)) W) with W drawn
/// CN(0,1) i.i.d. and L supplied by the caller.
fn rician(rng: &mut impl Rng, pl: f64, gamma: f64, los: &Array2<c64>) -> Array2<c64> {
    let (rows, cols) = los.dim();
    let w = crandn(rng, rows, cols);
    let a = (gamma / (1.0 + gamma)).sqrt();
    let b = (1.0 / (1.0 + gamma)).sqrt();
    let scale = pl.sqrt();
    let mut out = los.mapv(|z| z * a);
    out.zip_mut_with(&w, |o, &wv| *o = (*o + wv * b) * scale);
    out
}

/// Draw one full channel set for a scenario.
///
/// Draw order is fixed (all direct links row-major, then the f links, then
/// the g links) so a given RNG stream always produces the same set.
pub fn draw_channels(config: &ScenarioConfig, rng: &mut impl Rng) -> Result<ChannelSet> {
    config.validate()?;
    let (tx, rx) = node_positions(config)?;
    let ris = config.ris_position;
    let kq = config.k;
    let (nt, nr, m) = (config.nt, config.nr, config.m);

    let mut h = Vec::with_capacity(kq);
    for l in 0..kq {
        let mut row = Vec::with_capacity(kq);
        for kk in 0..kq {
            let r = dist(&tx[l], &rx[kk]);
            let pl = path_loss_lin(r, config.alpha_direct)?;
            let w = crandn(rng, nr, nt);
            row.push(w.mapv(|z| z * pl.sqrt()));
        }
        h.push(row);
    }

    let gamma = config.rician_gamma;
    let mut f = Vec::with_capacity(kq);
    for kk in 0..kq {
        let r = dist(&ris, &rx[kk]);
        let pl = path_loss_lin(r, config.alpha_ris)?;
        // azimuths in the xy-plane: arrival at the receiver, departure at the surface
        let th_rx = (ris[1] - rx[kk][1]).atan2(ris[0] - rx[kk][0]);
        let th_ris = (rx[kk][1] - ris[1]).atan2(rx[kk][0] - ris[0]);
        let a_rx = steering(nr, th_rx);
        let a_ris = steering(m, th_ris).mapv(|z| z.conj());
        let los = outer(&a_rx.view(), &a_ris.view());
        f.push(rician(rng, pl, gamma, &los));
    }

    let mut g = Vec::with_capacity(kq);
    for l in 0..kq {
        let r = dist(&tx[l], &ris);
        let pl = path_loss_lin(r, config.alpha_ris)?;
        let th_tx = (ris[1] - tx[l][1]).atan2(ris[0] - tx[l][0]);
        let th_ris = (tx[l][1] - ris[1]).atan2(tx[l][0] - ris[0]);
        let a_tx = steering(nt, th_tx);
        let a_ris = steering(m, th_ris).mapv(|z| z.conj());
        let los = outer(&a_tx.view(), &a_ris.view());
        g.push(rician(rng, pl, gamma, &los));
    }

    let set = ChannelSet { h, f, g, noise_power: config.noise_power_mw()? };
    set.validate()?;
    Ok(set)
}
