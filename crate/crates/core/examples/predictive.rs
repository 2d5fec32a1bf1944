//! Prior and posterior predictive counts against the observed data.

use histbayes::predictive::{posterior_predictive, prior_predictive};
use histbayes::samplers::run_chains;
use histbayes::workspace::parse_workspace;
use histbayes::{build_priors, Chain, Distribution, Posterior, SamplerConfig, UrPrior};

fn band(mut counts: Vec<u64>) -> (f64, u64, u64) {
    counts.sort_unstable();
    let n = counts.len();
    let mean = counts.iter().sum::<u64>() as f64 / n as f64;
    (mean, counts[n / 40], counts[n - 1 - n / 40])
}

fn main() -> histbayes::Result<()> {
    let (spec, obs) = parse_workspace(include_str!("data/three_bin.json"))?;
    let ur = [
        UrPrior::new("mu", Distribution::Normal { mean: 0.0, sd: 2.0 })?,
        UrPrior::new("bkg_norm", Distribution::Normal { mean: 0.0, sd: 2.0 })?,
    ];
    let priors = build_priors(&spec, &ur, &obs)?;
    let posterior = Posterior::new(&spec, &priors, &obs.main)?;
    let chain = Chain::concat(&run_chains(&posterior, &SamplerConfig::hmc(1000, 0.05, 20).with_seed(2))?)?;

    let prior = prior_predictive(&spec, &priors, 4000, 5)?;
    let post = posterior_predictive(&spec, &chain, 5)?;
    println!("bin  observed   prior mean [95%]        posterior mean [95%]");
    for (b, n) in obs.main[0].iter().enumerate() {
        let (pm, plo, phi) = band(prior.bin_counts(0, b));
        let (qm, qlo, qhi) = band(post.bin_counts(0, b));
        println!("{b:>3}  {n:>8}   {pm:>6.1} [{plo:>3}, {phi:>3}]      {qm:>6.1} [{qlo:>3}, {qhi:>3}]");
    }
    Ok(())
}
