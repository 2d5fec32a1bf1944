//! Analytic targets for sampler validation.

use statrs::function::gamma::ln_gamma;

use super::{GradientTarget, LogDensity};
use crate::error::Result;

/// Independent normals, one per coordinate.
#[derive(Debug, Clone)]
pub struct NormalTarget {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl NormalTarget {
    pub fn new(mean: Vec<f64>, sd: Vec<f64>) -> Self {
        assert_eq!(mean.len(), sd.len());
        Self { mean, sd }
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }
}

impl LogDensity for NormalTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn initial_point(&self) -> Vec<f64> {
        self.mean.clone()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(x, (m, s))| -0.5 * ((x - m) / s).powi(2))
            .sum())
    }
}

impl GradientTarget for NormalTarget {
    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        for (g, (x, (m, s))) in grad.iter_mut().zip(x.iter().zip(self.mean.iter().zip(&self.sd))) {
            *g = -(x - m) / (s * s);
        }
        self.log_density(x)
    }
}

/// Gamma(shape, rate) on the positive half line.
#[derive(Debug, Clone)]
pub struct GammaTarget {
    pub shape: f64,
    pub rate: f64,
}

impl LogDensity for GammaTarget {
    fn dim(&self) -> usize {
        1
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![self.shape / self.rate]
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, f64::INFINITY)]
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        let x = x[0];
        if x <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - 1.0) * x.ln() - self.rate * x)
    }
}

impl GradientTarget for GammaTarget {
    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let lp = self.log_density(x)?;
        if lp.is_finite() {
            grad[0] = (self.shape - 1.0) / x[0] - self.rate;
        }
        Ok(lp)
    }
}
