//! Closed-form priors for constrained parameters.

use histbayes::priors::{gamma_conjugate_update, gamma_rescale_to_factor, gaussian_conjugate_update};
use histbayes::workspace::parse_workspace;
use histbayes::{build_priors, Distribution, UrPrior};

fn main() -> histbayes::Result<()> {
    // a normal ur-prior updated by a Gaussian auxiliary measurement
    let (m, s) = gaussian_conjugate_update(0.0, 2.0, 1.0, 1.0)?;
    println!("Normal(0, 2) with a = 1 +- 1      -> Normal({m:.4}, {s:.4})");

    // a gamma ur-prior updated by an auxiliary count, then expressed as a factor
    let (shape, rate) = gamma_conjugate_update(1.0, 1.0, 10.0)?;
    println!("Gamma(1, 1) with a = 10 counts    -> Gamma({shape}, {rate}) on the rate");
    println!("                                  -> {} on the factor", gamma_rescale_to_factor(shape, rate, 10.0)?);

    let (spec, obs) = parse_workspace(include_str!("data/three_bin.json"))?;
    let ur = [
        UrPrior::new("mu", Distribution::Normal { mean: 0.0, sd: 2.0 })?,
        UrPrior::new("bkg_norm", Distribution::Normal { mean: 0.0, sd: 2.0 })?,
    ];
    let priors = build_priors(&spec, &ur, &obs)?;
    for e in priors.entries() {
        println!("{:<9} {}", e.name, e.prior);
    }
    Ok(())
}
