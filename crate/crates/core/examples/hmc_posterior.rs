//! Four HMC chains on the three-bin model.

use histbayes::diagnostics::{effective_sample_size, split_rhat};
use histbayes::samplers::run_chains;
use histbayes::workspace::parse_workspace;
use histbayes::{build_priors, Chain, Distribution, Posterior, SamplerConfig, UrPrior};

fn main() -> histbayes::Result<()> {
    let (spec, obs) = parse_workspace(include_str!("data/three_bin.json"))?;
    let ur = [
        UrPrior::new("mu", Distribution::Normal { mean: 0.0, sd: 2.0 })?,
        UrPrior::new("bkg_norm", Distribution::Normal { mean: 0.0, sd: 2.0 })?,
    ];
    let posterior = Posterior::new(&spec, &build_priors(&spec, &ur, &obs)?, &obs.main)?;

    let cfg = SamplerConfig::hmc(2000, 0.05, 20).with_seed(1);
    let chains = run_chains(&posterior, &cfg)?;
    for (i, c) in chains.iter().enumerate() {
        println!("chain {i}: acceptance {:.3}, divergences {}", c.acceptance_rate, c.divergence_count);
    }
    let all = Chain::concat(&chains)?;
    for (p, name) in all.param_names.iter().enumerate() {
        let col = all.column(p);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt();
        println!(
            "{name:<9} mean {mean:.4} sd {sd:.4} ess {:.0} split-R {:.4}",
            effective_sample_size(&all, name)?,
            split_rhat(&chains, name)?
        );
    }
    Ok(())
}
