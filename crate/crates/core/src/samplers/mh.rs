use rand::Rng;
use rand_distr::StandardNormal;

use super::{chain_rng, finish_chain, Chain, LogDensity, SamplerConfig, SamplerKind};
use crate::error::{Error, Result};

/// Folds `x` back into `[lo, hi]` by mirror reflection at the bounds.
/// Reflection keeps a symmetric proposal symmetric.
pub fn reflect_into(x: f64, lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let width = hi - lo;
            let mut y = (x - lo).rem_euclid(2.0 * width);
            if y > width {
                y = 2.0 * width - y;
            }
            lo + y
        }
        (true, false) if x < lo => 2.0 * lo - x,
        (false, true) if x > hi => 2.0 * hi - x,
        _ => x,
    }
}

pub fn mh_sample<T: LogDensity + ?Sized>(target: &T, cfg: &SamplerConfig) -> Result<Chain> {
    mh_sample_stream(target, cfg, 0)
}

/// Gaussian random-walk Metropolis-Hastings with per-parameter scales and
/// proposals reflected into the target's bounds.
pub fn mh_sample_stream<T: LogDensity + ?Sized>(target: &T, cfg: &SamplerConfig, stream: u64) -> Result<Chain> {
    cfg.validate()?;
    let dim = target.dim();
    let scales = cfg.proposal_scales(dim)?;
    let bounds = target.bounds();
    let mut rng = chain_rng(cfg.seed, stream);

    let mut current = target.initial_point();
    let mut current_lp = target.log_density(&current)?;
    if !current_lp.is_finite() {
        return Err(Error::Initialization);
    }

    let mut proposal = vec![0.0; dim];
    let mut draws = Vec::with_capacity(cfg.n_draws);
    let mut n_accepted = 0;
    for iter in 0..cfg.n_warmup + cfg.n_draws {
        let sampling = iter >= cfg.n_warmup;
        for i in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            let (lo, hi) = bounds[i];
            proposal[i] = reflect_into(current[i] + scales[i] * z, lo, hi);
        }
        let lp = target.log_density(&proposal)?;
        let u: f64 = rng.random();
        if lp > f64::NEG_INFINITY && u.ln() < lp - current_lp {
            current.copy_from_slice(&proposal);
            current_lp = lp;
            if sampling {
                n_accepted += 1;
            }
        }
        if sampling {
            draws.push(current.clone());
        }
    }
    Ok(finish_chain(draws, target.param_names(), SamplerKind::Mh, n_accepted, 0, cfg, stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::targets::NormalTarget;

    #[test]
    fn reflection_stays_in_bounds() {
        assert_eq!(reflect_into(1.5, 0.0, 1.0), 0.5);
        assert_eq!(reflect_into(-0.25, 0.0, 1.0), 0.25);
        assert!((reflect_into(3.75, 0.0, 1.0) - 0.25).abs() < 1e-15);
        assert_eq!(reflect_into(-2.0, 0.0, f64::INFINITY), 2.0);
        assert_eq!(reflect_into(5.0, f64::NEG_INFINITY, 4.0), 3.0);
        assert_eq!(reflect_into(7.0, f64::NEG_INFINITY, f64::INFINITY), 7.0);
    }

    #[test]
    fn standard_normal_moments() {
        let target = NormalTarget::standard(1);
        let chain = mh_sample(&target, &SamplerConfig::mh(20_000, vec![2.4]).with_seed(1)).unwrap();
        let xs = chain.column(0);
        let ess = crate::diagnostics::effective_sample_size(&chain, "x0").unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!(mean.abs() < 3.0 * (var / ess).sqrt(), "mean {mean} ess {ess}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn vanishing_proposal_accepts_everything() {
        let target = NormalTarget::standard(2);
        let chain = mh_sample(&target, &SamplerConfig::mh(2000, vec![1e-8]).with_seed(2)).unwrap();
        assert!(chain.acceptance_rate > 0.999, "{}", chain.acceptance_rate);
        let x0 = chain.draws[0][0];
        assert!(chain.draws.iter().all(|r| (r[0] - x0).abs() < 1e-5));
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let target = NormalTarget::standard(3);
        let cfg = SamplerConfig::mh(500, vec![0.5, 1.0, 2.0]).with_seed(42).with_warmup(50);
        assert_eq!(mh_sample(&target, &cfg).unwrap(), mh_sample(&target, &cfg).unwrap());
        let other = mh_sample(&target, &cfg.clone().with_seed(43)).unwrap();
        assert_ne!(mh_sample(&target, &cfg).unwrap().draws, other.draws);
    }

    /// Discrete target on 21 points; the random walk on the index lattice is
    /// checked for detailed balance through its empirical transition counts.
    #[test]
    fn detailed_balance_on_a_grid() {
        struct Grid;
        impl LogDensity for Grid {
            fn dim(&self) -> usize {
                1
            }
            fn initial_point(&self) -> Vec<f64> {
                vec![10.0]
            }
            fn bounds(&self) -> Vec<(f64, f64)> {
                vec![(-0.5, 20.5)]
            }
            fn log_density(&self, x: &[f64]) -> Result<f64> {
                let k = x[0].round();
                Ok(-0.5 * ((k - 8.0) / 4.0).powi(2))
            }
        }
        let cfg = SamplerConfig::mh(1_000_000, vec![3.0]).with_seed(8).with_warmup(0);
        let chain = mh_sample(&Grid, &cfg).unwrap();
        let idx: Vec<usize> = chain.draws.iter().map(|r| r[0].round() as usize).collect();
        let mut t = vec![[0usize; 21]; 21];
        for w in idx.windows(2) {
            t[w[0]][w[1]] += 1;
        }
        // flows i→j and j→i for a stationary reversible chain agree
        for i in 0..21 {
            for j in (i + 1)..21 {
                let (a, b) = (t[i][j] as f64, t[j][i] as f64);
                if a + b < 50.0 {
                    continue;
                }
                let z = (a - b) / (a + b).sqrt();
                assert!(z.abs() < 5.0, "flow {i}->{j}: {a} vs {b}");
            }
        }
    }
}
