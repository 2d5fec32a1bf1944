//! Markov chain samplers: Hamiltonian Monte Carlo and random-walk
//! Metropolis-Hastings, plus multi-chain orchestration.
//!
//! Every chain draws from its own ChaCha8 stream `(seed, stream)`; streams of
//! one seed never overlap, so chain `i` of [`run_chains`] uses stream `i`.

mod hmc;
mod mh;
pub mod targets;

pub use hmc::{hmc_sample, hmc_sample_stream, leapfrog, LeapfrogOutcome, PhasePoint, DIVERGENCE_THRESHOLD};
pub use mh::{mh_sample, mh_sample_stream, reflect_into};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Posterior;

/// A log density known up to a constant, `-inf` outside its support.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x{i}")).collect()
    }

    fn initial_point(&self) -> Vec<f64>;

    /// Closed box containing the support; MH reflects proposals into it.
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(f64::NEG_INFINITY, f64::INFINITY); self.dim()]
    }

    fn log_density(&self, theta: &[f64]) -> Result<f64>;
}

pub trait GradientTarget: LogDensity {
    /// Writes the gradient into `grad` and returns the log density, or
    /// returns `-inf` (leaving `grad` unspecified) outside the support.
    fn log_density_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64>;
}

impl LogDensity for Posterior {
    fn dim(&self) -> usize {
        Posterior::dim(self)
    }

    fn param_names(&self) -> Vec<String> {
        self.space().names.clone()
    }

    fn initial_point(&self) -> Vec<f64> {
        self.space().init.clone()
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        self.space().bounds.clone()
    }

    fn log_density(&self, theta: &[f64]) -> Result<f64> {
        Posterior::log_density(self, theta)
    }
}

impl GradientTarget for Posterior {
    fn log_density_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        Posterior::log_density_and_gradient(self, theta, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Hmc,
    Mh,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hmc" => Ok(SamplerKind::Hmc),
            "mh" => Ok(SamplerKind::Mh),
            other => Err(Error::Config(format!("unknown sampler `{other}` (expected hmc or mh)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmcSettings {
    pub step_size: f64,
    pub n_leapfrog: usize,
}

impl Default for HmcSettings {
    fn default() -> Self {
        Self { step_size: 0.1, n_leapfrog: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhSettings {
    /// Random-walk standard deviation per parameter; a single entry applies
    /// to every parameter.
    pub proposal_scale: Vec<f64>,
}

impl Default for MhSettings {
    fn default() -> Self {
        Self { proposal_scale: vec![0.1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub n_draws: usize,
    pub n_warmup: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub hmc: HmcSettings,
    pub mh: MhSettings,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Hmc,
            n_draws: 1000,
            n_warmup: 500,
            n_chains: 4,
            seed: 0,
            hmc: HmcSettings::default(),
            mh: MhSettings::default(),
        }
    }
}

impl SamplerConfig {
    pub fn hmc(n_draws: usize, step_size: f64, n_leapfrog: usize) -> Self {
        Self { kind: SamplerKind::Hmc, n_draws, hmc: HmcSettings { step_size, n_leapfrog }, ..Self::default() }
    }

    pub fn mh(n_draws: usize, proposal_scale: Vec<f64>) -> Self {
        Self { kind: SamplerKind::Mh, n_draws, mh: MhSettings { proposal_scale }, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_warmup(mut self, n_warmup: usize) -> Self {
        self.n_warmup = n_warmup;
        self
    }

    pub fn with_chains(mut self, n_chains: usize) -> Self {
        self.n_chains = n_chains;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::Config("n_draws must be positive".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::Config("n_chains must be positive".into()));
        }
        match self.kind {
            SamplerKind::Hmc => {
                let s = self.hmc.step_size;
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::Config(format!("step_size must be positive, got {s}")));
                }
                if self.hmc.n_leapfrog == 0 {
                    return Err(Error::Config("n_leapfrog must be positive".into()));
                }
            }
            SamplerKind::Mh => {
                let scales = &self.mh.proposal_scale;
                if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return Err(Error::Config(format!("proposal scales must be positive, got {scales:?}")));
                }
            }
        }
        Ok(())
    }

    /// Proposal scales expanded to `dim` entries.
    pub(crate) fn proposal_scales(&self, dim: usize) -> Result<Vec<f64>> {
        match self.mh.proposal_scale.len() {
            1 => Ok(vec![self.mh.proposal_scale[0]; dim]),
            n if n == dim => Ok(self.mh.proposal_scale.clone()),
            n => Err(Error::Config(format!("{n} proposal scales for {dim} parameters"))),
        }
    }
}

/// Posterior draws and sampler bookkeeping for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// One row per retained draw.
    pub draws: Vec<Vec<f64>>,
    pub param_names: Vec<String>,
    pub sampler: SamplerKind,
    pub acceptance_rate: f64,
    pub n_accepted: usize,
    pub n_proposed: usize,
    pub divergence_count: usize,
    pub seed: u64,
    pub stream: u64,
    pub thinning_applied: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.param_names.len()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.draws.iter().map(|row| row[index]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .param_index(name)
            .ok_or_else(|| Error::Shape(format!("chain has no parameter `{name}`")))?;
        Ok(self.column(i))
    }

    pub fn mean(&self, index: usize) -> f64 {
        self.draws.iter().map(|r| r[index]).sum::<f64>() / self.len() as f64
    }

    /// All draws of several chains stacked in chain order.
    pub fn concat(chains: &[Chain]) -> Result<Chain> {
        let first = chains.first().ok_or(Error::EmptyChain)?;
        if chains.iter().any(|c| c.param_names != first.param_names) {
            return Err(Error::Shape("chains have different parameters".into()));
        }
        let n_accepted = chains.iter().map(|c| c.n_accepted).sum();
        let n_proposed: usize = chains.iter().map(|c| c.n_proposed).sum();
        Ok(Chain {
            draws: chains.iter().flat_map(|c| c.draws.iter().cloned()).collect(),
            n_accepted,
            n_proposed,
            acceptance_rate: if n_proposed == 0 { 0.0 } else { n_accepted as f64 / n_proposed as f64 },
            divergence_count: chains.iter().map(|c| c.divergence_count).sum(),
            ..first.clone()
        })
    }
}

/// The generator for stream `stream` of `seed`.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs the configured sampler on stream `stream`.
pub fn sample_stream<T: GradientTarget + ?Sized>(target: &T, cfg: &SamplerConfig, stream: u64) -> Result<Chain> {
    match cfg.kind {
        SamplerKind::Hmc => hmc_sample_stream(target, cfg, stream),
        SamplerKind::Mh => mh_sample_stream(target, cfg, stream),
    }
}

/// Runs `cfg.n_chains` independent chains, chain `i` on stream `i`. Results
/// are ordered by chain index.
pub fn run_chains<T: GradientTarget + ?Sized>(target: &T, cfg: &SamplerConfig) -> Result<Vec<Chain>> {
    cfg.validate()?;
    (0..cfg.n_chains)
        .into_par_iter()
        .map(|i| {
            sample_stream(target, cfg, i as u64).map_err(|e| Error::InChain { index: i, source: Box::new(e) })
        })
        .collect()
}

fn finish_chain(
    draws: Vec<Vec<f64>>,
    param_names: Vec<String>,
    sampler: SamplerKind,
    n_accepted: usize,
    divergence_count: usize,
    cfg: &SamplerConfig,
    stream: u64,
) -> Chain {
    let n_proposed = draws.len();
    Chain {
        draws,
        param_names,
        sampler,
        acceptance_rate: n_accepted as f64 / n_proposed as f64,
        n_accepted,
        n_proposed,
        divergence_count,
        seed: cfg.seed,
        stream,
        thinning_applied: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::targets::NormalTarget;
    use super::*;
    use crate::diagnostics::split_rhat;

    #[test]
    fn chains_use_distinct_streams() {
        let target = NormalTarget::standard(1);
        let cfg = SamplerConfig::hmc(200, 0.3, 10).with_chains(4).with_seed(11);
        let chains = run_chains(&target, &cfg).unwrap();
        assert_eq!(chains.len(), 4);
        for i in 0..4 {
            assert_eq!(chains[i].stream, i as u64);
            for j in 0..i {
                assert_ne!(chains[i].draws, chains[j].draws);
            }
        }
    }

    #[test]
    fn single_chain_matches_direct_call() {
        let target = NormalTarget::standard(2);
        for cfg in [
            SamplerConfig::hmc(100, 0.2, 10).with_chains(1).with_seed(5),
            SamplerConfig::mh(100, vec![1.0]).with_chains(1).with_seed(5),
        ] {
            let chains = run_chains(&target, &cfg).unwrap();
            let direct = sample_stream(&target, &cfg, 0).unwrap();
            assert_eq!(chains[0], direct);
        }
    }

    #[test]
    fn four_chains_on_standard_normal_mix() {
        let target = NormalTarget::standard(1);
        let cfg = SamplerConfig::hmc(2000, 0.25, 12).with_chains(4).with_seed(3);
        let chains = run_chains(&target, &cfg).unwrap();
        let rhat = split_rhat(&chains, "x0").unwrap();
        assert!(rhat < 1.01, "rhat {rhat}");
    }

    #[test]
    fn chain_errors_carry_index() {
        let target = NormalTarget::standard(2);
        let cfg = SamplerConfig::mh(10, vec![1.0, 1.0, 1.0]).with_chains(2);
        match run_chains(&target, &cfg) {
            Err(Error::InChain { index: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::hmc(10, 0.0, 5).validate().is_err());
        assert!(SamplerConfig::hmc(10, 0.1, 0).validate().is_err());
        assert!(SamplerConfig::hmc(0, 0.1, 5).validate().is_err());
        assert!(SamplerConfig::mh(10, vec![]).validate().is_err());
        assert!(SamplerConfig::mh(10, vec![-1.0]).validate().is_err());
        assert!(SamplerConfig::default().validate().is_ok());
    }
}
