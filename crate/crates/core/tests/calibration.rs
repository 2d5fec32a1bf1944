//! Pooled posteriors of many pseudo-experiments on the three-bin model.

use histbayes::predictive::{calibration_run, CalibrationConfig};
use histbayes::workspace::parse_workspace;
use histbayes::{build_priors, Distribution, SamplerConfig, UrPrior};

#[test]
fn pooled_posterior_matches_prior_with_3000_experiments() {
    let (spec, obs) = parse_workspace(include_str!("../examples/data/three_bin.json")).unwrap();
    let ur = [
        UrPrior::new("mu", Distribution::Normal { mean: 0.0, sd: 2.0 }).unwrap(),
        UrPrior::new("bkg_norm", Distribution::Normal { mean: 0.0, sd: 2.0 }).unwrap(),
    ];
    let priors = build_priors(&spec, &ur, &obs).unwrap();
    let sampler = SamplerConfig::hmc(500, 0.05, 10).with_warmup(500).with_chains(1).with_seed(31);
    let res = calibration_run(&spec, &priors, &CalibrationConfig::new(3000, sampler)).unwrap();
    assert_eq!(res.n_failed, 0);
    assert_eq!(res.aggregated_posterior_draws.len(), 3000 * 63);
    for c in &res.comparison {
        assert!(c.ks_passed(), "{c:?}");
    }
}
