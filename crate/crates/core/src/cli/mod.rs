//! The `histbayes` command line.
//!
//! | exit | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | configuration, input file or usage error |
//! | 2 | invalid model (workspace or priors) |
//! | 3 | sampling failure |
//! | 4 | calibration failure |
//!
//! Every command is deterministic given its configuration and seed:
//! re-running it rewrites byte-identical artifacts.

pub mod config;
pub mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::diagnostics::{self, DEFAULT_THRESHOLD_BAND, THINNING_MAX_LAG};
use crate::error::{Error, Result};
use crate::model::{ParameterSpace, Posterior};
use crate::predictive::{self, CalibrationConfig, CalibrationResult, PredictiveKind, PredictiveSamples};
use crate::priors::{build_priors, PriorSet};
use crate::samplers::{run_chains, Chain, SamplerConfig, SamplerKind};
use crate::workspace::{parse_workspace, ModelSpec, ObservationSet};
use config::{merge_sampler, RunConfig, SamplerOverrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_SAMPLING: i32 = 3;
pub const EXIT_CALIBRATION: i32 = 4;

/// Lags written to `acf.csv`.
const ACF_REPORT_LAGS: usize = 2 * THINNING_MAX_LAG;
const OVERLAY_BINS: usize = 40;

#[derive(Debug, Parser)]
#[command(name = "histbayes", version, about = "Bayesian inference for HistFactory-style binned models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the posterior; writes chains.csv, chains_meta.json, priors_resolved.json
    Sample(Common),
    /// ACF, thinning, ESS and split-R̂ of a chains file; writes diagnostics.json, acf.csv
    Diagnose {
        chains_csv: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Prior or posterior predictive counts; writes predictive.csv, summary.json
    Predict {
        #[arg(long, value_parser = parse_kind)]
        kind: PredictiveKind,
        /// Chains file, required for `--kind posterior`
        chains_csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulation-based calibration; writes calibration.json, ranks.csv and histograms
    Calibrate {
        #[arg(long)]
        n_pseudo: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workspace: Option<PathBuf>,
    #[arg(long, value_parser = parse_sampler)]
    sampler: Option<SamplerKind>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    leapfrog_steps: Option<usize>,
    /// Comma-separated; one value applies to every parameter
    #[arg(long, value_delimiter = ',')]
    proposal_scale: Option<Vec<f64>>,
    #[arg(long)]
    thin_band: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_sampler(s: &str) -> std::result::Result<SamplerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_kind(s: &str) -> std::result::Result<PredictiveKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn overrides(&self) -> SamplerOverrides {
        SamplerOverrides {
            kind: self.sampler,
            n_draws: self.draws,
            n_warmup: self.warmup,
            n_chains: self.chains,
            seed: self.seed,
            step_size: self.step_size,
            n_leapfrog: self.leapfrog_steps,
            proposal_scale: self.proposal_scale.clone(),
        }
    }

    fn run_config(&self) -> Result<RunConfig> {
        match &self.config {
            Some(p) => RunConfig::load(p),
            None => Ok(RunConfig::default()),
        }
    }

    fn output_dir(&self, cfg: &RunConfig) -> Result<PathBuf> {
        let dir = self.out.clone().or_else(|| cfg.output_path()).unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn thin_band(&self, cfg: &RunConfig) -> Result<f64> {
        let band = self.thin_band.or(cfg.thin_band).unwrap_or(DEFAULT_THRESHOLD_BAND);
        if !(band > 0.0 && band < 1.0) {
            return Err(Error::Config(format!("thin band must lie in (0, 1), got {band}")));
        }
        Ok(band)
    }

    fn load_model(&self, cfg: &RunConfig) -> Result<(ModelSpec, ObservationSet)> {
        let path = self
            .workspace
            .clone()
            .or_else(|| cfg.workspace_path())
            .ok_or_else(|| Error::Config("no workspace given (use --workspace or the config `workspace` key)".into()))?;
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read workspace {}: {e}", path.display())))?;
        parse_workspace(&text)
    }
}

fn resolve_priors(cfg: &RunConfig, spec: &ModelSpec, obs: &ObservationSet) -> Result<PriorSet> {
    match cfg.resolved_priors_path() {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read priors {}: {e}", path.display())))?;
            let priors = PriorSet::from_json(&text)?;
            priors.check_against(spec)?;
            Ok(priors)
        }
        None => build_priors(spec, &cfg.ur_priors()?, obs),
    }
}

/// Default exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Syntax(_)
        | Error::Schema { .. }
        | Error::Validation(_)
        | Error::Dimension { .. }
        | Error::Domain(_)
        | Error::ImproperPrior(_) => EXIT_MODEL,
        Error::Initialization | Error::NonFiniteGradient(_) | Error::InChain { .. } | Error::CalibrationAborted { .. } => {
            EXIT_SAMPLING
        }
        Error::Config(_)
        | Error::MissingPrior(_)
        | Error::InsufficientData(_)
        | Error::NoFiniteThinning { .. }
        | Error::Shape(_)
        | Error::EmptyChain
        | Error::Io(_) => EXIT_CONFIG,
    }
}

struct Failure {
    code: i32,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Self { code: exit_code(&error), error }
    }
}

fn with_code(code: i32) -> impl Fn(Error) -> Failure {
    move |error| Failure { code, error }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Sample(common) => cmd_sample(&common),
        Command::Diagnose { chains_csv, common } => cmd_diagnose(&chains_csv, &common),
        Command::Predict { kind, chains_csv, common } => cmd_predict(kind, chains_csv.as_deref(), &common),
        Command::Calibrate { n_pseudo, common } => cmd_calibrate(n_pseudo, &common),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, error }) => {
            eprintln!("error: {error}");
            let mut source = std::error::Error::source(&error);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            code
        }
    }
}

#[derive(Serialize)]
struct ChainMeta {
    chain: usize,
    seed: u64,
    stream: u64,
    acceptance_rate: f64,
    n_accepted: usize,
    n_proposed: usize,
    divergence_count: usize,
}

#[derive(Serialize)]
struct ChainsMeta<'a> {
    sampler: &'a SamplerConfig,
    parameters: &'a ParameterSpace,
    chains: Vec<ChainMeta>,
}

fn cmd_sample(common: &Common) -> CmdResult {
    let cfg = common.run_config()?;
    let sampler = merge_sampler(&cfg.sampler, &common.overrides())?;
    let (spec, obs) = common.load_model(&cfg)?;
    let priors = resolve_priors(&cfg, &spec, &obs)?;
    let posterior = Posterior::new(&spec, &priors, &obs.main)?;
    let chains = run_chains(&posterior, &sampler).map_err(with_code(EXIT_SAMPLING))?;

    let out = common.output_dir(&cfg)?;
    io::write_chains_csv(&out.join("chains.csv"), &chains)?;
    let meta = ChainsMeta {
        sampler: &sampler,
        parameters: posterior.space(),
        chains: chains
            .iter()
            .enumerate()
            .map(|(i, c)| ChainMeta {
                chain: i,
                seed: c.seed,
                stream: c.stream,
                acceptance_rate: c.acceptance_rate,
                n_accepted: c.n_accepted,
                n_proposed: c.n_proposed,
                divergence_count: c.divergence_count,
            })
            .collect(),
    };
    io::write_json(&out.join("chains_meta.json"), &meta)?;
    std::fs::write(out.join("priors_resolved.json"), priors.to_json() + "\n").map_err(Error::from)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ParameterDiagnostics {
    parameter: String,
    /// Maximum over chains; `None` when no factor reaches the band.
    required_thinning: Option<usize>,
    per_chain_thinning: Vec<Option<usize>>,
    /// Summed over chains.
    ess: f64,
    split_rhat: Option<f64>,
    mean: f64,
    sd: f64,
}

#[derive(Serialize)]
struct DiagnosticsReport {
    threshold_band: f64,
    n_chains: usize,
    draws_per_chain: Vec<usize>,
    /// Largest factor over all parameters.
    required_thinning: Option<usize>,
    parameters: Vec<ParameterDiagnostics>,
}

/// ACF averaged over chains, up to `max_lag` or the shortest chain.
fn mean_acf(columns: &[Vec<f64>], max_lag: usize) -> Result<Vec<f64>> {
    let shortest = columns.iter().map(Vec::len).min().unwrap_or(0);
    let max_lag = max_lag.min(shortest.saturating_sub(1));
    let mut sum = vec![0.0; max_lag + 1];
    for col in columns {
        for (s, r) in sum.iter_mut().zip(diagnostics::acf(col, max_lag)?) {
            *s += r;
        }
    }
    Ok(sum.into_iter().map(|s| s / columns.len() as f64).collect())
}

fn cmd_diagnose(chains_csv: &Path, common: &Common) -> CmdResult {
    let fail = with_code(EXIT_CONFIG);
    let cfg = common.run_config().map_err(&fail)?;
    let band = common.thin_band(&cfg).map_err(&fail)?;
    let chains = io::read_chains_csv(chains_csv).map_err(&fail)?;
    let shortest = chains.iter().map(Chain::len).min().unwrap_or(0);
    if shortest < 100 {
        return Err(fail(Error::InsufficientData(format!(
            "insufficient draws: {shortest} in the shortest chain, at least 100 needed"
        ))));
    }

    let names = chains[0].param_names.clone();
    let same_length = chains.iter().all(|c| c.len() == chains[0].len());
    let mut parameters = Vec::new();
    let mut acf_rows = Vec::new();
    for (p, name) in names.iter().enumerate() {
        let columns: Vec<Vec<f64>> = chains.iter().map(|c| c.column(p)).collect();
        let per_chain_thinning = columns
            .iter()
            .map(|col| match diagnostics::required_thinning_for(col, band) {
                Ok(n) => Ok(Some(n)),
                Err(Error::NoFiniteThinning { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()
            .map_err(&fail)?;
        let required = per_chain_thinning.iter().copied().collect::<Option<Vec<_>>>().map(|v| v.into_iter().max().unwrap_or(1));
        let ess = columns.iter().map(|c| diagnostics::ess_of(c)).sum::<Result<f64>>().map_err(&fail)?;
        let split_rhat = if chains.len() >= 2 && same_length {
            Some(diagnostics::split_rhat(&chains, name).map_err(&fail)?)
        } else {
            None
        };
        let pooled: Vec<f64> = columns.concat();
        parameters.push(ParameterDiagnostics {
            parameter: name.clone(),
            required_thinning: required,
            per_chain_thinning,
            ess,
            split_rhat,
            mean: crate::stats::mean(&pooled),
            sd: crate::stats::variance(&pooled).sqrt(),
        });

        let raw = mean_acf(&columns, ACF_REPORT_LAGS).map_err(&fail)?;
        let k = required.unwrap_or(1);
        let thinned_cols: Vec<Vec<f64>> = columns.iter().map(|c| c.iter().step_by(k).copied().collect()).collect();
        let thinned = mean_acf(&thinned_cols, ACF_REPORT_LAGS).map_err(&fail)?;
        for (lag, r) in raw.iter().enumerate() {
            let t = thinned.get(lag).map(|x| io::fmt_f64(*x)).unwrap_or_default();
            acf_rows.push(vec![name.clone(), lag.to_string(), io::fmt_f64(*r), t]);
        }
    }
    let report = DiagnosticsReport {
        threshold_band: band,
        n_chains: chains.len(),
        draws_per_chain: chains.iter().map(Chain::len).collect(),
        required_thinning: parameters
            .iter()
            .map(|p| p.required_thinning)
            .collect::<Option<Vec<_>>>()
            .map(|v| v.into_iter().max().unwrap_or(1)),
        parameters,
    };

    let out = common.output_dir(&cfg).map_err(&fail)?;
    io::write_json(&out.join("diagnostics.json"), &report).map_err(&fail)?;
    io::write_csv(&out.join("acf.csv"), &["parameter", "lag", "acf_raw", "acf_thinned"], acf_rows).map_err(&fail)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct BinSummary {
    channel: String,
    bin: usize,
    observed: u64,
    mean: f64,
    central_68: [u64; 2],
    central_95: [u64; 2],
    central_99: [u64; 2],
}

#[derive(Serialize)]
struct PredictSummary {
    kind: PredictiveKind,
    n_draws: usize,
    seed: u64,
    bins: Vec<BinSummary>,
}

/// Inverse empirical CDF of sorted counts.
fn count_quantile(sorted: &[u64], q: f64) -> u64 {
    // the tolerance keeps 0.84 * 100 from rounding up to 85
    let k = (q * sorted.len() as f64 - 1e-9).ceil() as usize;
    sorted[k.clamp(1, sorted.len()) - 1]
}

fn central(sorted: &[u64], mass: f64) -> [u64; 2] {
    [count_quantile(sorted, (1.0 - mass) / 2.0), count_quantile(sorted, (1.0 + mass) / 2.0)]
}

fn summarize(pred: &PredictiveSamples, obs: &ObservationSet) -> PredictSummary {
    let mut bins = Vec::new();
    for (c, name) in pred.channel_names.iter().enumerate() {
        for (b, &observed) in obs.main[c].iter().enumerate() {
            let mut counts = pred.bin_counts(c, b);
            counts.sort_unstable();
            bins.push(BinSummary {
                channel: name.clone(),
                bin: b,
                observed,
                mean: counts.iter().sum::<u64>() as f64 / counts.len() as f64,
                central_68: central(&counts, 0.68),
                central_95: central(&counts, 0.95),
                central_99: central(&counts, 0.99),
            });
        }
    }
    PredictSummary { kind: pred.kind, n_draws: pred.len(), seed: pred.seed, bins }
}

fn cmd_predict(kind: PredictiveKind, chains_csv: Option<&Path>, common: &Common) -> CmdResult {
    let cfg = common.run_config()?;
    let sampler = merge_sampler(&cfg.sampler, &common.overrides())?;
    let (spec, obs) = common.load_model(&cfg)?;
    let pred = match kind {
        PredictiveKind::Prior => {
            let priors = resolve_priors(&cfg, &spec, &obs)?;
            let n = common.draws.or(cfg.predict.n_draws).unwrap_or(config::DEFAULT_PREDICTIVE_DRAWS);
            predictive::prior_predictive(&spec, &priors, n, sampler.seed)?
        }
        PredictiveKind::Posterior => {
            let path = chains_csv
                .ok_or_else(|| Error::Config("posterior predictive needs a chains file".into()))?;
            let chain = Chain::concat(&io::read_chains_csv(path)?)?;
            predictive::posterior_predictive(&spec, &chain, sampler.seed).map_err(with_code(EXIT_CONFIG))?
        }
    };
    if pred.is_empty() {
        return Err(Error::Config("no predictive draws requested".into()).into());
    }

    let out = common.output_dir(&cfg)?;
    let rows = pred.draws.iter().enumerate().flat_map(|(d, draw)| {
        let names = &pred.channel_names;
        draw.iter().enumerate().flat_map(move |(c, counts)| {
            counts
                .iter()
                .enumerate()
                .map(move |(b, n)| vec![d.to_string(), names[c].clone(), b.to_string(), n.to_string()])
        })
    });
    io::write_csv(&out.join("predictive.csv"), &["draw", "channel", "bin", "count"], rows)?;
    io::write_json(&out.join("summary.json"), &summarize(&pred, &obs))?;
    Ok(EXIT_OK)
}

fn rank_histogram_rows(res: &CalibrationResult) -> Vec<Vec<String>> {
    let n_values = res.n_posterior + 1;
    let mut rows = Vec::new();
    for c in &res.comparison {
        let n_bins = c.rank_histogram.len();
        for (b, (obs, exp)) in c.rank_histogram.iter().zip(&c.rank_expected).enumerate() {
            let ranks: Vec<usize> = (0..n_values).filter(|r| r * n_bins / n_values == b).collect();
            rows.push(vec![
                c.parameter.clone(),
                b.to_string(),
                ranks.first().copied().unwrap_or(0).to_string(),
                ranks.last().copied().unwrap_or(0).to_string(),
                obs.to_string(),
                io::fmt_f64(*exp),
            ]);
        }
    }
    rows
}

/// Density histograms of pooled posterior and prior draws on a shared grid.
fn overlay_rows(res: &CalibrationResult) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (p, name) in res.param_names.iter().enumerate() {
        let pooled = res.pooled_column(p);
        let prior = res.prior_column(p);
        let (lo, hi) = pooled
            .iter()
            .chain(&prior)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        let width = if hi > lo { (hi - lo) / OVERLAY_BINS as f64 } else { 1.0 };
        let density = |xs: &[f64]| {
            let mut h = vec![0.0; OVERLAY_BINS];
            for &x in xs {
                let b = (((x - lo) / width) as usize).min(OVERLAY_BINS - 1);
                h[b] += 1.0;
            }
            h.into_iter().map(|c| c / (xs.len() as f64 * width)).collect::<Vec<_>>()
        };
        let (dp, dq) = (density(&pooled), density(&prior));
        for b in 0..OVERLAY_BINS {
            rows.push(vec![
                name.clone(),
                io::fmt_f64(lo + b as f64 * width),
                io::fmt_f64(lo + (b + 1) as f64 * width),
                io::fmt_f64(dp[b]),
                io::fmt_f64(dq[b]),
            ]);
        }
    }
    rows
}

fn cmd_calibrate(n_pseudo: Option<usize>, common: &Common) -> CmdResult {
    let cfg = common.run_config()?;
    let cal = &cfg.calibrate;
    let mut flags = common.overrides();
    flags.n_draws = flags.n_draws.or(cal.n_draws).or(Some(config::CALIBRATION_DRAWS));
    flags.n_warmup = flags.n_warmup.or(cal.n_warmup).or(Some(config::CALIBRATION_WARMUP));
    flags.n_chains = Some(1);
    let sampler = merge_sampler(&cfg.sampler, &flags)?;
    let n_pseudo = n_pseudo.or(cal.n_pseudo).unwrap_or(300);
    let mut cal_cfg = CalibrationConfig::new(n_pseudo, sampler);
    cal_cfg.n_posterior = cal.n_posterior.unwrap_or(cal_cfg.n_posterior);
    cal_cfg.rank_bins = cal.rank_bins.unwrap_or(cal_cfg.rank_bins);
    cal_cfg.alpha = cal.alpha.unwrap_or(cal_cfg.alpha);
    cal_cfg.validate()?;

    let (spec, obs) = common.load_model(&cfg)?;
    let priors = resolve_priors(&cfg, &spec, &obs)?;
    let res = predictive::calibration_run(&spec, &priors, &cal_cfg)?;

    let out = common.output_dir(&cfg)?;
    io::write_json(&out.join("calibration.json"), &res)?;
    let failed: std::collections::BTreeSet<usize> = res.failures.iter().map(|f| f.index).collect();
    let rank_rows = (0..res.n_pseudo).filter(|i| !failed.contains(i)).enumerate().map(|(k, i)| {
        let mut row = vec![i.to_string()];
        row.extend(res.rank_statistics.iter().map(|r| r[k].to_string()));
        row
    });
    let mut header = vec!["experiment"];
    header.extend(res.param_names.iter().map(String::as_str));
    io::write_csv(&out.join("ranks.csv"), &header, rank_rows)?;
    io::write_csv(
        &out.join("rank_histogram.csv"),
        &["parameter", "bin", "rank_lo", "rank_hi", "observed", "expected"],
        rank_histogram_rows(&res),
    )?;
    io::write_csv(
        &out.join("pooled_histogram.csv"),
        &["parameter", "bin_lo", "bin_hi", "pooled_posterior_density", "prior_density"],
        overlay_rows(&res),
    )?;

    for c in &res.comparison {
        eprintln!(
            "{}: rank chi2 p = {:.4}, pooled KS = {:.4} (critical {:.4})",
            c.parameter, c.chi2_pvalue, c.ks_statistic, c.ks_critical
        );
    }
    if !res.ranks_uniform() {
        eprintln!("calibration failure: rank statistics are not uniform at alpha = {}", res.alpha);
        return Ok(EXIT_CALIBRATION);
    }
    Ok(EXIT_OK)
}
