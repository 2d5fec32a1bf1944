//! Prior and posterior predictive sampling, and simulation-based calibration.
//!
//! Calibration draws `θ_i` from the prior, simulates main-channel counts at
//! `θ_i`, samples the posterior for those counts and keeps `L` draws. If the
//! whole pipeline is correct, the pooled posterior draws are distributed as
//! the prior and the rank of `θ_i` among its own `L` draws is uniform on
//! `{0, …, L}`.

use rand::Rng;
use rand_distr::{Distribution as _, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{expected_rates, ParameterSpace, Posterior};
use crate::priors::PriorSet;
use crate::samplers::{chain_rng, sample_stream, Chain, SamplerConfig};
use crate::stats;
use crate::workspace::ModelSpec;

pub const DEFAULT_POSTERIOR_DRAWS: usize = 63;
pub const DEFAULT_RANK_BINS: usize = 20;
pub const MIN_PSEUDO_EXPERIMENTS: usize = 100;
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictiveKind {
    Prior,
    Posterior,
}

impl std::str::FromStr for PredictiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prior" => Ok(Self::Prior),
            "posterior" => Ok(Self::Posterior),
            other => Err(Error::Config(format!("unknown predictive kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSamples {
    pub kind: PredictiveKind,
    /// `draws[d][c][b]`: draw, channel, bin.
    pub draws: Vec<Vec<Vec<u64>>>,
    pub theta_draws: Vec<Vec<f64>>,
    pub param_names: Vec<String>,
    pub channel_names: Vec<String>,
    pub seed: u64,
}

impl PredictiveSamples {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Counts of one bin across all draws.
    pub fn bin_counts(&self, channel: usize, bin: usize) -> Vec<u64> {
        self.draws.iter().map(|d| d[channel][bin]).collect()
    }
}

/// One Poisson count per bin at rates `nu`.
pub fn poisson_counts<R: Rng + ?Sized>(nu: &[Vec<f64>], rng: &mut R) -> Vec<Vec<u64>> {
    nu.iter()
        .map(|channel| {
            channel
                .iter()
                .map(|&rate| {
                    if rate > 0.0 {
                        Poisson::new(rate).expect("positive finite rate").sample(rng) as u64
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect()
}

/// A prior draw restricted to the parameter bounds the samplers use.
fn sample_prior<R: Rng + ?Sized>(priors: &PriorSet, space: &ParameterSpace, rng: &mut R) -> Result<Vec<f64>> {
    priors
        .distributions()
        .iter()
        .zip(&space.bounds)
        .map(|(d, &(lo, hi))| d.sample_truncated(lo, hi, rng))
        .collect()
}

fn channel_names(spec: &ModelSpec) -> Vec<String> {
    spec.channels.iter().map(|c| c.name.clone()).collect()
}

/// `θ ~ priors` (truncated to the default parameter bounds), then
/// `n_cb ~ Poisson(ν_cb(θ))`.
pub fn prior_predictive(spec: &ModelSpec, priors: &PriorSet, n_draws: usize, seed: u64) -> Result<PredictiveSamples> {
    let space = ParameterSpace::new(spec, priors)?;
    prior_predictive_in(spec, priors, &space, n_draws, seed)
}

pub fn prior_predictive_in(
    spec: &ModelSpec,
    priors: &PriorSet,
    space: &ParameterSpace,
    n_draws: usize,
    seed: u64,
) -> Result<PredictiveSamples> {
    priors.check_against(spec)?;
    let mut rng = chain_rng(seed, 0);
    let mut draws = Vec::with_capacity(n_draws);
    let mut theta_draws = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let theta = sample_prior(priors, space, &mut rng)?;
        draws.push(poisson_counts(&expected_rates(spec, &theta)?, &mut rng));
        theta_draws.push(theta);
    }
    Ok(PredictiveSamples {
        kind: PredictiveKind::Prior,
        draws,
        theta_draws,
        param_names: spec.parameter_order(),
        channel_names: channel_names(spec),
        seed,
    })
}

/// One Poisson replicate of the main channels per retained chain draw.
pub fn posterior_predictive(spec: &ModelSpec, chain: &Chain, seed: u64) -> Result<PredictiveSamples> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    if chain.param_names != spec.parameter_order() {
        return Err(Error::Shape(format!(
            "chain parameters {:?} do not match model parameters {:?}",
            chain.param_names,
            spec.parameter_order()
        )));
    }
    let mut rng = chain_rng(seed, 0);
    let draws = chain
        .draws
        .iter()
        .map(|theta| Ok(poisson_counts(&expected_rates(spec, theta)?, &mut rng)))
        .collect::<Result<_>>()?;
    Ok(PredictiveSamples {
        kind: PredictiveKind::Posterior,
        draws,
        theta_draws: chain.draws.clone(),
        param_names: chain.param_names.clone(),
        channel_names: channel_names(spec),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub n_pseudo: usize,
    /// Posterior draws kept per pseudo-experiment (`L`).
    pub n_posterior: usize,
    /// Single-chain budget for each pseudo-experiment; its seed is the
    /// calibration seed.
    pub sampler: SamplerConfig,
    pub rank_bins: usize,
    pub alpha: f64,
    /// Fresh prior draws for the pooled comparison; defaults to the pooled
    /// posterior size.
    pub n_prior_reference: Option<usize>,
}

impl CalibrationConfig {
    pub fn new(n_pseudo: usize, sampler: SamplerConfig) -> Self {
        Self {
            n_pseudo,
            n_posterior: DEFAULT_POSTERIOR_DRAWS,
            sampler,
            rank_bins: DEFAULT_RANK_BINS,
            alpha: 0.01,
            n_prior_reference: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pseudo < MIN_PSEUDO_EXPERIMENTS {
            return Err(Error::Config(format!(
                "n-pseudo below minimum: {} < {MIN_PSEUDO_EXPERIMENTS}",
                self.n_pseudo
            )));
        }
        if self.n_posterior == 0 {
            return Err(Error::Config("at least one posterior draw per pseudo-experiment is needed".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.sampler.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoFailure {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterComparison {
    pub parameter: String,
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub chi2_statistic: f64,
    pub chi2_dof: usize,
    pub chi2_pvalue: f64,
    pub rank_histogram: Vec<usize>,
    pub rank_expected: Vec<f64>,
}

impl ParameterComparison {
    pub fn ks_passed(&self) -> bool {
        self.ks_statistic < self.ks_critical
    }

    pub fn chi2_passed(&self, alpha: f64) -> bool {
        self.chi2_pvalue > alpha
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub n_pseudo: usize,
    pub n_failed: usize,
    pub failures: Vec<PseudoFailure>,
    /// Posterior draws kept per successful pseudo-experiment.
    pub n_posterior: usize,
    /// Stride between kept draws within each pseudo-experiment's chain.
    pub stride: usize,
    pub alpha: f64,
    pub param_names: Vec<String>,
    pub true_parameters: Vec<Vec<f64>>,
    pub aggregated_posterior_draws: Vec<Vec<f64>>,
    pub prior_reference_draws: Vec<Vec<f64>>,
    /// `rank_statistics[p][i]`: rank of parameter `p` for experiment `i`.
    pub rank_statistics: Vec<Vec<usize>>,
    /// Sample size used for the pooled side of the KS critical value: the
    /// number of pseudo-experiments, since draws within one experiment are
    /// correlated.
    pub ks_effective_n: usize,
    pub comparison: Vec<ParameterComparison>,
}

impl CalibrationResult {
    pub fn ranks_uniform(&self) -> bool {
        self.comparison.iter().all(|c| c.chi2_passed(self.alpha))
    }

    pub fn pooled_matches_prior(&self) -> bool {
        self.comparison.iter().all(ParameterComparison::ks_passed)
    }

    pub fn passed(&self) -> bool {
        self.ranks_uniform() && self.pooled_matches_prior()
    }

    pub fn pooled_column(&self, p: usize) -> Vec<f64> {
        self.aggregated_posterior_draws.iter().map(|r| r[p]).collect()
    }

    pub fn prior_column(&self, p: usize) -> Vec<f64> {
        self.prior_reference_draws.iter().map(|r| r[p]).collect()
    }
}

struct PseudoOutcome {
    truth: Vec<f64>,
    kept: Vec<Vec<f64>>,
}

/// Stream layout: experiment `i` draws `θ_i` and its data on stream `2i`
/// and samples on stream `2i + 1`; prior reference draws use the last
/// stream.
pub fn calibration_run(spec: &ModelSpec, priors: &PriorSet, cfg: &CalibrationConfig) -> Result<CalibrationResult> {
    let space = ParameterSpace::new(spec, priors)?;
    calibration_run_in(spec, priors, &space, cfg)
}

pub fn calibration_run_in(
    spec: &ModelSpec,
    priors: &PriorSet,
    space: &ParameterSpace,
    cfg: &CalibrationConfig,
) -> Result<CalibrationResult> {
    cfg.validate()?;
    priors.check_against(spec)?;
    let seed = cfg.sampler.seed;
    let n_posterior = cfg.n_posterior.min(cfg.sampler.n_draws);
    let stride = cfg.sampler.n_draws / n_posterior;
    let dim = space.dim();

    let outcomes: Vec<std::result::Result<PseudoOutcome, String>> = (0..cfg.n_pseudo)
        .into_par_iter()
        .map(|i| {
            let run = || -> Result<PseudoOutcome> {
                let mut rng = chain_rng(seed, 2 * i as u64);
                let truth = sample_prior(priors, space, &mut rng)?;
                let counts = poisson_counts(&expected_rates(spec, &truth)?, &mut rng);
                let posterior = Posterior::with_space(spec, priors, space.clone(), &counts)?;
                let chain = sample_stream(&posterior, &cfg.sampler, 2 * i as u64 + 1)?;
                let kept = chain.draws.into_iter().step_by(stride).take(n_posterior).collect();
                Ok(PseudoOutcome { truth, kept })
            };
            run().map_err(|e| e.to_string())
        })
        .collect();

    let mut failures = Vec::new();
    let mut true_parameters = Vec::new();
    let mut aggregated = Vec::new();
    let mut ranks = vec![Vec::new(); dim];
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                for (p, rank) in ranks.iter_mut().enumerate() {
                    rank.push(o.kept.iter().filter(|row| row[p] < o.truth[p]).count());
                }
                true_parameters.push(o.truth);
                aggregated.extend(o.kept);
            }
            Err(message) => failures.push(PseudoFailure { index, message }),
        }
    }
    let n_failed = failures.len();
    if n_failed as f64 > MAX_FAILURE_FRACTION * cfg.n_pseudo as f64 {
        return Err(Error::CalibrationAborted { failed: n_failed, total: cfg.n_pseudo });
    }

    let n_reference = cfg.n_prior_reference.unwrap_or(aggregated.len()).max(1);
    let mut rng = chain_rng(seed, u64::MAX);
    let reference = (0..n_reference)
        .map(|_| sample_prior(priors, space, &mut rng))
        .collect::<Result<Vec<_>>>()?;

    let n_ok = cfg.n_pseudo - n_failed;
    let names = space.names.clone();
    let comparison = (0..dim)
        .map(|p| {
            let pooled: Vec<f64> = aggregated.iter().map(|r| r[p]).collect();
            let prior: Vec<f64> = reference.iter().map(|r| r[p]).collect();
            let (observed, expected, chi2) = stats::rank_uniformity_test(&ranks[p], n_posterior, cfg.rank_bins);
            ParameterComparison {
                parameter: names[p].clone(),
                ks_statistic: stats::ks_statistic_two_sample(&pooled, &prior),
                ks_critical: stats::ks_critical_two_sample(n_ok, n_reference, cfg.alpha),
                chi2_statistic: chi2.statistic,
                chi2_dof: chi2.dof,
                chi2_pvalue: chi2.p_value,
                rank_histogram: observed,
                rank_expected: expected,
            }
        })
        .collect();

    Ok(CalibrationResult {
        n_pseudo: cfg.n_pseudo,
        n_failed,
        failures,
        n_posterior,
        stride,
        alpha: cfg.alpha,
        param_names: names,
        true_parameters,
        aggregated_posterior_draws: aggregated,
        prior_reference_draws: reference,
        rank_statistics: ranks,
        ks_effective_n: n_ok,
        comparison,
    })
}
