//! Simulation-based calibration, with a crippled sampler as a negative control.

use histbayes::predictive::{calibration_run, CalibrationConfig};
use histbayes::workspace::parse_workspace;
use histbayes::{build_priors, Distribution, SamplerConfig, UrPrior};

fn main() -> histbayes::Result<()> {
    let (spec, obs) = parse_workspace(include_str!("data/three_bin.json"))?;
    let ur = [
        UrPrior::new("mu", Distribution::Normal { mean: 0.0, sd: 2.0 })?,
        UrPrior::new("bkg_norm", Distribution::Normal { mean: 0.0, sd: 2.0 })?,
    ];
    let priors = build_priors(&spec, &ur, &obs)?;

    let good = SamplerConfig::hmc(500, 0.05, 10).with_warmup(500).with_chains(1).with_seed(7);
    let crippled = SamplerConfig::mh(10, vec![1e-9]).with_warmup(0).with_chains(1).with_seed(7);
    for (label, sampler) in [("hmc", good), ("crippled", crippled)] {
        let res = calibration_run(&spec, &priors, &CalibrationConfig::new(200, sampler))?;
        println!("{label}: L = {}, failed {}", res.n_posterior, res.n_failed);
        for c in &res.comparison {
            println!(
                "  {:<9} rank chi2 p {:.4}  pooled KS {:.4} (critical {:.4})",
                c.parameter, c.chi2_pvalue, c.ks_statistic, c.ks_critical
            );
        }
        println!("  passed: {}", res.passed());
    }
    Ok(())
}
