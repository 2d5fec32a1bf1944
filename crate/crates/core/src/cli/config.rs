//! Run configuration files and their merge with command-line flags.
//!
//! ```json
//! {
//!   "workspace": "three_bin.json",
//!   "priors": {"mu": {"normal": [0.0, 2.0]}},
//!   "sampler": {"kind": "hmc", "n_draws": 1000, "seed": 1, "hmc": {"step_size": 0.1, "n_leapfrog": 20}},
//!   "output_dir": "out",
//!   "thin_band": 0.1,
//!   "predict": {"n_draws": 2000},
//!   "calibrate": {"n_pseudo": 300, "n_posterior": 63}
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the file.
//! Flags win over file values; the seed falls back to `HISTBAYES_SEED`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::priors::{Distribution, UrPrior};
use crate::samplers::{SamplerConfig, SamplerKind};

pub const SEED_ENV: &str = "HISTBAYES_SEED";
pub const CALIBRATION_DRAWS: usize = 500;
pub const CALIBRATION_WARMUP: usize = 500;
pub const DEFAULT_PREDICTIVE_DRAWS: usize = 1000;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmcBlock {
    pub step_size: Option<f64>,
    pub n_leapfrog: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MhBlock {
    pub proposal_scale: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerBlock {
    pub kind: Option<SamplerKind>,
    pub n_draws: Option<usize>,
    pub n_warmup: Option<usize>,
    pub n_chains: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub hmc: HmcBlock,
    #[serde(default)]
    pub mh: MhBlock,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictBlock {
    pub n_draws: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateBlock {
    pub n_pseudo: Option<usize>,
    /// Posterior draws kept per pseudo-experiment.
    pub n_posterior: Option<usize>,
    pub n_draws: Option<usize>,
    pub n_warmup: Option<usize>,
    pub rank_bins: Option<usize>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub workspace: Option<PathBuf>,
    /// Ur-priors by parameter (or shape modifier) name.
    #[serde(default)]
    pub priors: BTreeMap<String, Distribution>,
    /// A previously written `priors_resolved.json`, used verbatim instead of
    /// rebuilding priors from `priors`.
    pub resolved_priors: Option<PathBuf>,
    #[serde(default)]
    pub sampler: SamplerBlock,
    pub output_dir: Option<PathBuf>,
    pub thin_band: Option<f64>,
    #[serde(default)]
    pub predict: PredictBlock,
    #[serde(default)]
    pub calibrate: CalibrateBlock,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn workspace_path(&self) -> Option<PathBuf> {
        self.workspace.as_deref().map(|p| self.resolve(p))
    }

    pub fn resolved_priors_path(&self) -> Option<PathBuf> {
        self.resolved_priors.as_deref().map(|p| self.resolve(p))
    }

    pub fn output_path(&self) -> Option<PathBuf> {
        self.output_dir.as_deref().map(|p| self.resolve(p))
    }

    pub fn ur_priors(&self) -> Result<Vec<UrPrior>> {
        self.priors
            .iter()
            .map(|(name, d)| UrPrior::new(name.clone(), *d))
            .collect()
    }
}

/// Sampler-related flag values; `None` defers to the config file.
#[derive(Debug, Clone, Default)]
pub struct SamplerOverrides {
    pub kind: Option<SamplerKind>,
    pub n_draws: Option<usize>,
    pub n_warmup: Option<usize>,
    pub n_chains: Option<usize>,
    pub seed: Option<u64>,
    pub step_size: Option<f64>,
    pub n_leapfrog: Option<usize>,
    pub proposal_scale: Option<Vec<f64>>,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Flags, then the config file, then the library defaults.
pub fn merge_sampler(block: &SamplerBlock, flags: &SamplerOverrides) -> Result<SamplerConfig> {
    let d = SamplerConfig::default();
    let seed = match flags.seed.or(block.seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(d.seed),
    };
    let mut cfg = SamplerConfig {
        kind: flags.kind.or(block.kind).unwrap_or(d.kind),
        n_draws: flags.n_draws.or(block.n_draws).unwrap_or(d.n_draws),
        n_warmup: flags.n_warmup.or(block.n_warmup).unwrap_or(d.n_warmup),
        n_chains: flags.n_chains.or(block.n_chains).unwrap_or(d.n_chains),
        seed,
        ..d
    };
    cfg.hmc.step_size = flags.step_size.or(block.hmc.step_size).unwrap_or(cfg.hmc.step_size);
    cfg.hmc.n_leapfrog = flags.n_leapfrog.or(block.hmc.n_leapfrog).unwrap_or(cfg.hmc.n_leapfrog);
    if let Some(s) = flags.proposal_scale.clone().or_else(|| block.mh.proposal_scale.clone()) {
        cfg.mh.proposal_scale = s;
    }
    cfg.validate()?;
    Ok(cfg)
}
