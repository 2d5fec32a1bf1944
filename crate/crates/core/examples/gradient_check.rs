//! Forward-mode gradients against central differences.

use histbayes::workspace::parse_workspace;
use histbayes::{build_priors, Distribution, Posterior, UrPrior};

fn main() -> histbayes::Result<()> {
    let (spec, obs) = parse_workspace(include_str!("data/three_bin.json"))?;
    let ur = [
        UrPrior::new("mu", Distribution::Normal { mean: 0.0, sd: 2.0 })?,
        UrPrior::new("bkg_norm", Distribution::Normal { mean: 0.0, sd: 2.0 })?,
    ];
    let posterior = Posterior::new(&spec, &build_priors(&spec, &ur, &obs)?, &obs.main)?;
    let h = 1e-5;
    for theta in [[0.5, 0.9], [1.0, 1.0], [3.0, 1.2]] {
        let grad = posterior.gradient(&theta)?;
        print!("theta = {theta:?}:");
        for i in 0..2 {
            let (mut up, mut down) = (theta, theta);
            up[i] += h;
            down[i] -= h;
            let fd = (posterior.log_density(&up)? - posterior.log_density(&down)?) / (2.0 * h);
            print!("  d{i}: exact {:+.8} fd {:+.8}", grad[i], fd);
        }
        println!();
    }
    Ok(())
}
