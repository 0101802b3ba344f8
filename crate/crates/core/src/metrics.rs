//! Scalar figures of merit and Monte-Carlo aggregation.

use ndarray::Array2;
use ndarray_linalg::c64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::leakage::{direct_interference_power, interference_leakage};
use crate::optim::IterTrace;

/// Interference change in dB brought by a scattering matrix:
/// 10 log10(IL(Theta) / IL without any surface). Negative when the surface
/// reduces interference.
pub fn delta_inr_db(ch: &ChannelSet, theta: &Array2<c64>) -> Result<f64> {
    let denom = direct_interference_power(ch);
    if !(denom > 0.0) {
        return Err(Error::Numerical(
            "delta_inr_db: direct-channel interference power is zero, metric undefined".into(),
        ));
    }
    let num = interference_leakage(ch, theta)?;
    Ok(10.0 * (num / denom).log10())
}

/// Aggregate interference per stream over the noise power, in dB. Negative
/// values mean the residual interference sits below the noise floor.
pub fn interference_to_noise_db(il: f64, streams: usize, sigma2: f64) -> f64 {
    10.0 * (il / (streams as f64 * sigma2)).log10()
}

/// Everything recorded for one Monte-Carlo draw.
#[derive(Debug, Clone)]
pub struct TrialResult {
    /// Stage-one leakage of the returned scattering matrix.
    pub il: f64,
    pub delta_inr_db: f64,
    /// Per-user rates in bits.
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    /// Optional solver trace for convergence studies.
    pub trace: Option<IterTrace>,
}

/// Domain in which ratio metrics are averaged across trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AverageDomain {
    /// Average the dB values (default for interference ratios).
    Db,
    /// Average linear values, convert to dB at the end.
    Linear,
}

/// Mean, standard deviation, and count of one metric.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    MetricSummary { mean, std: var.sqrt(), count: n }
}

/// Trial aggregate: interference metric in the requested domain, rates
/// always in the linear domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub delta_inr_db: MetricSummary,
    pub sum_rate: MetricSummary,
    pub domain: AverageDomain,
}

/// Aggregate a nonempty batch of trials.
pub fn aggregate(results: &[TrialResult], domain: AverageDomain) -> Result<AggregateSummary> {
    if results.is_empty() {
        return Err(Error::InvalidConfig("aggregate: empty result list".into()));
    }
    let delta = match domain {
        AverageDomain::Db => {
            let vals: Vec<f64> = results.iter().map(|r| r.delta_inr_db).collect();
            summarize(&vals)
        }
        AverageDomain::Linear => {
            let vals: Vec<f64> = results.iter().map(|r| 10f64.powf(r.delta_inr_db / 10.0)).collect();
            let lin = summarize(&vals);
            MetricSummary { mean: 10.0 * lin.mean.log10(), std: lin.std, count: lin.count }
        }
    };
    let rates: Vec<f64> = results.iter().map(|r| r.sum_rate).collect();
    Ok(AggregateSummary { delta_inr_db: delta, sum_rate: summarize(&rates), domain })
}
