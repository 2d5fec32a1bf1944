//! Thinning needed by HMC and by random-walk MH on the same posterior.

use histbayes::diagnostics::{autocorrelation, required_thinning, thin, DEFAULT_THRESHOLD_BAND};
use histbayes::samplers::{hmc_sample, mh_sample};
use histbayes::workspace::parse_workspace;
use histbayes::{build_priors, Distribution, Posterior, SamplerConfig, UrPrior};

fn main() -> histbayes::Result<()> {
    let (spec, obs) = parse_workspace(include_str!("data/three_bin.json"))?;
    let ur = [
        UrPrior::new("mu", Distribution::Normal { mean: 0.0, sd: 2.0 })?,
        UrPrior::new("bkg_norm", Distribution::Normal { mean: 0.0, sd: 2.0 })?,
    ];
    let posterior = Posterior::new(&spec, &build_priors(&spec, &ur, &obs)?, &obs.main)?;

    let n = 20_000;
    let hmc = hmc_sample(&posterior, &SamplerConfig::hmc(n, 0.05, 20).with_seed(3))?;
    let mh = mh_sample(&posterior, &SamplerConfig::mh(n, vec![0.25, 0.05]).with_seed(3))?;
    for chain in [&hmc, &mh] {
        let k = required_thinning(chain, DEFAULT_THRESHOLD_BAND)?;
        let raw = autocorrelation(chain, "mu", 5, DEFAULT_THRESHOLD_BAND)?;
        let thinned = autocorrelation(&thin(chain, k), "mu", 5, DEFAULT_THRESHOLD_BAND)?;
        println!("{:?}: acceptance {:.2}, thin by {k}", chain.sampler, chain.acceptance_rate);
        println!("  acf(mu) raw     {:?}", raw.acf.iter().map(|r| format!("{r:+.2}")).collect::<Vec<_>>());
        println!("  acf(mu) thinned {:?}", thinned.acf.iter().map(|r| format!("{r:+.2}")).collect::<Vec<_>>());
    }
    Ok(())
}
