//! Chain quality: autocorrelation, thinning, effective sample size, split-R̂.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::Chain;

/// Default acceptable autocorrelation band, |acf| ≤ 0.1.
pub const DEFAULT_THRESHOLD_BAND: f64 = 0.1;
/// Largest lag inspected by [`required_thinning`].
pub const THINNING_MAX_LAG: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfReport {
    pub parameter: String,
    pub lags: Vec<usize>,
    pub acf: Vec<f64>,
    pub threshold_band: f64,
    /// Smallest lag from which every computed |acf| stays inside the band;
    /// `max_lag + 1` when even the last lag is outside it.
    pub first_lag_within_band: usize,
}

/// Normalized autocovariance with the biased (divide-by-N) estimator, for
/// lags `0..=max_lag`.
pub fn acf(xs: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = xs.len();
    if max_lag == 0 || n <= max_lag {
        return Err(Error::InsufficientData(format!("{n} draws for max lag {max_lag}")));
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|d| d * d).sum::<f64>();
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::Domain("zero variance".into()));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for k in 1..=max_lag {
        out.push(autocov_sum(&centered, k) / c0);
    }
    Ok(out)
}

fn autocov_sum(centered: &[f64], lag: usize) -> f64 {
    centered.iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum()
}

pub fn autocorrelation(chain: &Chain, parameter: &str, max_lag: usize, threshold_band: f64) -> Result<AcfReport> {
    let xs = chain.column_by_name(parameter)?;
    let acf = acf(&xs, max_lag)?;
    let first_lag_within_band = (0..=max_lag)
        .rev()
        .take_while(|&k| acf[k].abs() <= threshold_band)
        .last()
        .unwrap_or(max_lag + 1);
    Ok(AcfReport {
        parameter: parameter.to_string(),
        lags: (0..=max_lag).collect(),
        acf,
        threshold_band,
        first_lag_within_band,
    })
}

/// Keeps draws `0, n, 2n, ...`.
pub fn thin(chain: &Chain, n: usize) -> Chain {
    assert!(n >= 1, "thinning factor must be positive");
    Chain {
        draws: chain.draws.iter().step_by(n).cloned().collect(),
        thinning_applied: chain.thinning_applied * n,
        ..chain.clone()
    }
}

/// Smallest thinning factor after which |acf[k]| ≤ `threshold_band` for
/// every lag `1 ≤ k ≤ min(20, thinned_len / 10)`, searched up to `len / 10`.
pub fn required_thinning_for(xs: &[f64], threshold_band: f64) -> Result<usize> {
    let n = xs.len();
    if n < 100 {
        return Err(Error::InsufficientData(format!("{n} draws; at least 100 needed to choose a thinning factor")));
    }
    let max_factor = n / 10;
    for factor in 1..=max_factor {
        let thinned: Vec<f64> = xs.iter().step_by(factor).copied().collect();
        let max_lag = THINNING_MAX_LAG.min(thinned.len() / 10).max(1);
        let rho = acf(&thinned, max_lag)?;
        if rho[1..].iter().all(|r| r.abs() <= threshold_band) {
            return Ok(factor);
        }
    }
    Err(Error::NoFiniteThinning { max_factor, band: threshold_band })
}

/// The largest per-parameter thinning requirement of a chain.
pub fn required_thinning(chain: &Chain, threshold_band: f64) -> Result<usize> {
    (0..chain.dim())
        .map(|i| required_thinning_for(&chain.column(i), threshold_band))
        .try_fold(1, |acc, r| r.map(|n| acc.max(n)))
}

/// ESS = N / (1 + 2 Σ ρ_k), truncating the sum with Geyer's initial positive
/// (and monotone) sequence of paired autocorrelations. Capped at N.
pub fn ess_of(xs: &[f64]) -> Result<f64> {
    let n = xs.len();
    if n < 100 {
        return Err(Error::InsufficientData(format!("{n} draws; at least 100 needed for ESS")));
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|d| d * d).sum::<f64>();
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::Domain("zero variance".into()));
    }
    let rho = |k: usize| autocov_sum(&centered, k) / c0;

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho(2 * m) + rho(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        m += 1;
    }
    // antithetic chains can drive tau below 1; the estimate is capped at N
    Ok(n as f64 / tau.max(1.0))
}

pub fn effective_sample_size(chain: &Chain, parameter: &str) -> Result<f64> {
    ess_of(&chain.column_by_name(parameter)?)
}

/// Split-R̂: every chain is cut in half (dropping a middle draw when the
/// length is odd) and the between/within variance ratio is taken over the
/// halves.
pub fn split_rhat(chains: &[Chain], parameter: &str) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Shape(format!("split-R̂ needs at least 2 chains, got {}", chains.len())));
    }
    let len = chains[0].len();
    if len < 4 || chains.iter().any(|c| c.len() != len) {
        return Err(Error::Shape("split-R̂ needs chains of equal length ≥ 4".into()));
    }
    let half = len / 2;
    let mut halves = Vec::with_capacity(2 * chains.len());
    for chain in chains {
        let xs = chain.column_by_name(parameter)?;
        halves.push(xs[..half].to_vec());
        halves.push(xs[len - half..].to_vec());
    }
    Ok(rhat_of(&halves))
}

fn rhat_of(seqs: &[Vec<f64>]) -> f64 {
    let m = seqs.len() as f64;
    let n = seqs[0].len() as f64;
    let means: Vec<f64> = seqs.iter().map(|s| s.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let between = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let within = seqs
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    let var_plus = (n - 1.0) / n * within + between / n;
    (var_plus / within).sqrt()
}
