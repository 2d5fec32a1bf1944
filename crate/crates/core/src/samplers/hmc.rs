use rand::Rng;
use rand_distr::StandardNormal;

use super::{chain_rng, finish_chain, Chain, GradientTarget, SamplerConfig, SamplerKind};
use crate::error::{Error, Result};

/// Trajectories whose Hamiltonian drifts by more than this are divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// Position, momentum and the cached log density/gradient at the position.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    pub log_density: f64,
    pub gradient: Vec<f64>,
}

impl PhasePoint {
    /// Potential plus kinetic energy for an identity mass matrix.
    pub fn hamiltonian(&self) -> f64 {
        -self.log_density + 0.5 * self.momentum.iter().map(|p| p * p).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeapfrogOutcome {
    Completed(PhasePoint),
    /// The position left the support after `steps` position updates.
    LeftSupport { steps: usize },
}

/// Integrates Hamiltonian dynamics with `n_steps` leapfrog steps:
/// a half momentum step, alternating full position/momentum steps, and a
/// closing half momentum step.
///
/// `log_density_grad` writes the gradient at its first argument into the
/// second and returns the log density (`-inf` outside the support).
pub fn leapfrog<F>(start: &PhasePoint, step_size: f64, n_steps: usize, mut log_density_grad: F) -> Result<LeapfrogOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let mut q = start.position.clone();
    let mut p = start.momentum.clone();
    let mut g = start.gradient.clone();
    let mut lp = start.log_density;

    for (pi, gi) in p.iter_mut().zip(&g) {
        *pi += 0.5 * step_size * gi;
    }
    for step in 0..n_steps {
        for (qi, pi) in q.iter_mut().zip(&p) {
            *qi += step_size * pi;
        }
        lp = log_density_grad(&q, &mut g)?;
        if lp == f64::NEG_INFINITY || lp.is_nan() {
            return Ok(LeapfrogOutcome::LeftSupport { steps: step + 1 });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(q));
        }
        let scale = if step + 1 == n_steps { 0.5 } else { 1.0 };
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += scale * step_size * gi;
        }
    }
    Ok(LeapfrogOutcome::Completed(PhasePoint { position: q, momentum: p, log_density: lp, gradient: g }))
}

pub fn hmc_sample<T: GradientTarget + ?Sized>(target: &T, cfg: &SamplerConfig) -> Result<Chain> {
    hmc_sample_stream(target, cfg, 0)
}

/// Metropolis-corrected HMC with standard-normal momenta and fixed step size
/// and trajectory length. Warmup iterations are discarded without adaptation.
pub fn hmc_sample_stream<T: GradientTarget + ?Sized>(target: &T, cfg: &SamplerConfig, stream: u64) -> Result<Chain> {
    cfg.validate()?;
    let dim = target.dim();
    let mut rng = chain_rng(cfg.seed, stream);
    let eval = |q: &[f64], g: &mut [f64]| target.log_density_and_gradient(q, g);

    let position = target.initial_point();
    let mut gradient = vec![0.0; dim];
    let log_density = eval(&position, &mut gradient)?;
    if !log_density.is_finite() {
        return Err(Error::Initialization);
    }
    if gradient.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient(position));
    }
    let mut current = PhasePoint { position, momentum: vec![0.0; dim], log_density, gradient };

    let (step_size, n_steps) = (cfg.hmc.step_size, cfg.hmc.n_leapfrog);
    let mut draws = Vec::with_capacity(cfg.n_draws);
    let mut n_accepted = 0;
    let mut divergences = 0;
    for iter in 0..cfg.n_warmup + cfg.n_draws {
        let sampling = iter >= cfg.n_warmup;
        for p in current.momentum.iter_mut() {
            *p = rng.sample(StandardNormal);
        }
        let h0 = current.hamiltonian();
        let outcome = leapfrog(&current, step_size, n_steps, eval)?;
        let u: f64 = rng.random();
        let accepted = match outcome {
            LeapfrogOutcome::LeftSupport { .. } => None,
            LeapfrogOutcome::Completed(proposal) => {
                let delta = proposal.hamiltonian() - h0;
                if !delta.is_finite() || delta.abs() > DIVERGENCE_THRESHOLD {
                    if sampling {
                        divergences += 1;
                    }
                    None
                } else if u.ln() < -delta {
                    Some(proposal)
                } else {
                    None
                }
            }
        };
        if let Some(next) = accepted {
            current = next;
            if sampling {
                n_accepted += 1;
            }
        }
        if sampling {
            draws.push(current.position.clone());
        }
    }
    Ok(finish_chain(draws, target.param_names(), SamplerKind::Hmc, n_accepted, divergences, cfg, stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::targets::NormalTarget;
    use crate::samplers::LogDensity;

    fn std_normal(q: &[f64], g: &mut [f64]) -> Result<f64> {
        for (gi, qi) in g.iter_mut().zip(q) {
            *gi = -qi;
        }
        Ok(-0.5 * q.iter().map(|x| x * x).sum::<f64>())
    }

    fn start(q: Vec<f64>, p: Vec<f64>) -> PhasePoint {
        let mut g = vec![0.0; q.len()];
        let lp = std_normal(&q, &mut g).unwrap();
        PhasePoint { position: q, momentum: p, log_density: lp, gradient: g }
    }

    fn completed(o: LeapfrogOutcome) -> PhasePoint {
        match o {
            LeapfrogOutcome::Completed(p) => p,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reversible_on_standard_normal() {
        for step in [0.01, 0.1, 0.5, 1.3] {
            let a = start(vec![1.0], vec![0.0]);
            let mut b = completed(leapfrog(&a, step, 17, std_normal).unwrap());
            b.momentum.iter_mut().for_each(|p| *p = -*p);
            let c = completed(leapfrog(&b, step, 17, std_normal).unwrap());
            assert!((c.position[0] - 1.0).abs() < 1e-10, "step {step}: {:?}", c.position);
            assert!(c.momentum[0].abs() < 1e-10);
        }
    }

    #[test]
    fn energy_error_is_second_order() {
        // Exact dynamics rotate (q, p); leapfrog's energy error over a fixed
        // time shrinks like step².
        let total_time = 1.0;
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| {
                let a = start(vec![1.0], vec![0.5]);
                let n = (total_time / h) as usize;
                let b = completed(leapfrog(&a, h, n, std_normal).unwrap());
                // compare to the analytic rotation
                let (q, p) = (1.0 * total_time.cos() + 0.5 * total_time.sin(), 0.5 * total_time.cos() - total_time.sin());
                assert!((b.position[0] - q).abs() < 10.0 * h * h);
                assert!((b.momentum[0] - p).abs() < 10.0 * h * h);
                (b.hamiltonian() - a.hamiltonian()).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.0..5.0).contains(&ratio), "ratio {ratio} in {errs:?}");
        }
    }

    #[test]
    fn free_particle_moves_linearly() {
        let flat = |_: &[f64], g: &mut [f64]| {
            g.iter_mut().for_each(|v| *v = 0.0);
            Ok(0.0)
        };
        let a = PhasePoint { position: vec![0.5, -1.0], momentum: vec![2.0, 0.3], log_density: 0.0, gradient: vec![0.0; 2] };
        let b = completed(leapfrog(&a, 0.1, 7, flat).unwrap());
        assert!((b.position[0] - (0.5 + 0.7 * 2.0)).abs() < 1e-12);
        assert!((b.position[1] - (-1.0 + 0.7 * 0.3)).abs() < 1e-12);
        assert_eq!(b.momentum, a.momentum);
    }

    #[test]
    fn one_step_preserves_volume() {
        // anisotropic, correlated Gaussian in 2-D
        let target = |q: &[f64], g: &mut [f64]| {
            let (x, y) = (q[0], q[1]);
            g[0] = -(2.0 * x + 0.6 * y);
            g[1] = -(0.6 * x + 0.5 * y);
            Ok(-(x * x + 0.6 * x * y + 0.25 * y * y))
        };
        let map = |z: [f64; 4]| -> [f64; 4] {
            let mut g = vec![0.0; 2];
            let lp = target(&z[..2], &mut g).unwrap();
            let a = PhasePoint { position: z[..2].to_vec(), momentum: z[2..].to_vec(), log_density: lp, gradient: g };
            let b = completed(leapfrog(&a, 0.3, 1, target).unwrap());
            [b.position[0], b.position[1], b.momentum[0], b.momentum[1]]
        };
        let points = [[0.3, -0.2, 1.0, 0.5], [1.5, 2.0, -0.7, 0.1], [-0.4, 0.9, 0.2, -1.3]];
        for z in points {
            let h = 1e-6;
            let mut jac = [[0.0; 4]; 4];
            for j in 0..4 {
                let (mut zp, mut zm) = (z, z);
                zp[j] += h;
                zm[j] -= h;
                let (fp, fm) = (map(zp), map(zm));
                for i in 0..4 {
                    jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            let det = det4(jac);
            assert!((det - 1.0).abs() < 1e-6, "det {det}");
        }
    }

    fn det4(m: [[f64; 4]; 4]) -> f64 {
        // Laplace expansion along the first row
        let minor = |skip: usize| -> f64 {
            let rows: Vec<[f64; 3]> = (1..4)
                .map(|r| {
                    let v: Vec<f64> = (0..4).filter(|&c| c != skip).map(|c| m[r][c]).collect();
                    [v[0], v[1], v[2]]
                })
                .collect();
            rows[0][0] * (rows[1][1] * rows[2][2] - rows[1][2] * rows[2][1])
                - rows[0][1] * (rows[1][0] * rows[2][2] - rows[1][2] * rows[2][0])
                + rows[0][2] * (rows[1][0] * rows[2][1] - rows[1][1] * rows[2][0])
        };
        (0..4).map(|c| if c % 2 == 0 { 1.0 } else { -1.0 } * m[0][c] * minor(c)).sum()
    }

    #[test]
    fn leaving_support_is_reported() {
        let half_line = |q: &[f64], g: &mut [f64]| {
            if q[0] <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            g[0] = 0.0;
            Ok(0.0)
        };
        let a = PhasePoint { position: vec![0.5], momentum: vec![-1.0], log_density: 0.0, gradient: vec![0.0] };
        assert_eq!(leapfrog(&a, 0.2, 10, half_line).unwrap(), LeapfrogOutcome::LeftSupport { steps: 3 });
    }

    #[test]
    fn standard_normal_moments() {
        let target = NormalTarget::standard(1);
        let chain = hmc_sample(&target, &SamplerConfig::hmc(5000, 0.3, 10).with_seed(7)).unwrap();
        let xs = chain.column(0);
        let ess = crate::diagnostics::effective_sample_size(&chain, "x0").unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!(mean.abs() < 3.0 * (var / ess).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
        assert!(chain.acceptance_rate > 0.9);
        assert_eq!(chain.n_accepted as f64 / chain.n_proposed as f64, chain.acceptance_rate);
    }

    #[test]
    fn non_finite_start_is_initialization_error() {
        struct Nowhere;
        impl LogDensity for Nowhere {
            fn dim(&self) -> usize {
                1
            }
            fn initial_point(&self) -> Vec<f64> {
                vec![0.0]
            }
            fn log_density(&self, _: &[f64]) -> Result<f64> {
                Ok(f64::NEG_INFINITY)
            }
        }
        impl GradientTarget for Nowhere {
            fn log_density_and_gradient(&self, _: &[f64], _: &mut [f64]) -> Result<f64> {
                Ok(f64::NEG_INFINITY)
            }
        }
        assert!(matches!(hmc_sample(&Nowhere, &SamplerConfig::hmc(10, 0.1, 3)), Err(Error::Initialization)));
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let target = NormalTarget::new(vec![1.0, -2.0], vec![0.5, 3.0]);
        let cfg = SamplerConfig::hmc(300, 0.2, 8).with_seed(99);
        assert_eq!(hmc_sample(&target, &cfg).unwrap(), hmc_sample(&target, &cfg).unwrap());
    }
}
