//! Expected rates, Poisson likelihood and the unnormalized log posterior of a
//! binned model, with forward-mode gradients.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dual::{DualVector, Real};
use crate::error::{Error, Result};
use crate::priors::{Distribution, PriorSet};
use crate::workspace::{shape_parameter_name, ModelSpec, ModifierKind, ParamKind};

/// Bounds given to free parameters whose prior does not fix a range.
pub const DEFAULT_FREE_BOUNDS: (f64, f64) = (0.0, 10.0);
pub const DEFAULT_FREE_INIT: f64 = 1.0;
/// Constrained parameters are bounded at this many prior standard deviations
/// above (and, for Gaussian constraints, below) the prior mean.
pub const CONSTRAINT_BOUND_SDS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub names: Vec<String>,
    pub kinds: Vec<ParamKind>,
    pub bounds: Vec<(f64, f64)>,
    pub init: Vec<f64>,
}

impl ParameterSpace {
    /// Default bounds and starting point for every parameter of `spec`.
    ///
    /// Free parameters use the range of a uniform prior when given one and
    /// [`DEFAULT_FREE_BOUNDS`] otherwise, starting at 1. Constrained
    /// parameters act as non-negative multiplicative factors, bounded at
    /// [`CONSTRAINT_BOUND_SDS`] prior widths, and start at their prior mean.
    pub fn new(spec: &ModelSpec, priors: &PriorSet) -> Result<Self> {
        priors.check_against(spec)?;
        let mut bounds = Vec::with_capacity(spec.n_params());
        let mut init = Vec::with_capacity(spec.n_params());
        for (p, prior) in spec.parameters.iter().zip(priors.distributions()) {
            let (lo, hi) = match (p.kind, prior) {
                (ParamKind::Free, Distribution::Uniform { lo, hi }) => (lo, hi),
                (ParamKind::Free, _) => DEFAULT_FREE_BOUNDS,
                (_, d) => (
                    (d.mean() - CONSTRAINT_BOUND_SDS * d.sd()).max(0.0),
                    d.mean() + CONSTRAINT_BOUND_SDS * d.sd(),
                ),
            };
            if !(lo < hi) {
                return Err(Error::Domain(format!(
                    "empty range [{lo}, {hi}] for `{}` under prior {prior}",
                    p.name
                )));
            }
            let start = if p.kind == ParamKind::Free { DEFAULT_FREE_INIT } else { prior.mean() };
            bounds.push((lo, hi));
            init.push(clamp_inside(start, lo, hi));
        }
        Ok(Self {
            names: spec.parameter_order(),
            kinds: spec.parameters.iter().map(|p| p.kind).collect(),
            bounds,
            init,
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn with_bounds(mut self, name: &str, lo: f64, hi: f64) -> Result<Self> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("no parameter named `{name}`")))?;
        if !(lo < hi) {
            return Err(Error::Config(format!("empty range [{lo}, {hi}] for `{name}`")));
        }
        self.bounds[i] = (lo, hi);
        self.init[i] = clamp_inside(self.init[i], lo, hi);
        Ok(self)
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(&self.bounds)
            .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }
}

/// Keeps a starting value at least 1% of the range away from either bound.
fn clamp_inside(x: f64, lo: f64, hi: f64) -> f64 {
    let margin = 0.01 * (hi - lo);
    x.clamp(lo + margin, hi - margin)
}

#[derive(Debug, Clone)]
struct CompiledSample {
    offset: usize,
    nominal: Vec<f64>,
    norm: Vec<usize>,
    shape: Option<Vec<usize>>,
}

/// Modifier references resolved to parameter indices.
#[derive(Debug, Clone)]
struct Layout {
    n_params: usize,
    n_bins: usize,
    channel_bins: Vec<usize>,
    samples: Vec<CompiledSample>,
}

impl Layout {
    fn new(spec: &ModelSpec) -> Result<Self> {
        let index = |name: &str| {
            spec.parameter_index(name)
                .ok_or_else(|| Error::Domain(format!("modifier references undeclared parameter `{name}`")))
        };
        let mut samples = Vec::new();
        let mut offset = 0;
        for channel in &spec.channels {
            for sample in &channel.samples {
                if sample.nominal.len() != channel.n_bins {
                    return Err(Error::Shape(format!(
                        "sample `{}` has {} bins, channel `{}` has {}",
                        sample.name,
                        sample.nominal.len(),
                        channel.name,
                        channel.n_bins
                    )));
                }
                let mut norm = Vec::new();
                let mut shape = None;
                for m in &sample.modifiers {
                    match m.kind {
                        ModifierKind::FreeNorm | ModifierKind::GaussConstrainedNorm => norm.push(index(&m.parameter)?),
                        ModifierKind::PoissonConstrainedShape => {
                            let idx = (0..channel.n_bins)
                                .map(|b| index(&shape_parameter_name(&m.parameter, b)))
                                .collect::<Result<Vec<_>>>()?;
                            shape = Some(idx);
                        }
                    }
                }
                samples.push(CompiledSample { offset, nominal: sample.nominal.clone(), norm, shape });
            }
            offset += channel.n_bins;
        }
        Ok(Self {
            n_params: spec.n_params(),
            n_bins: offset,
            channel_bins: spec.channels.iter().map(|c| c.n_bins).collect(),
            samples,
        })
    }

    fn rates<T: Real>(&self, theta: &[T]) -> Vec<T> {
        let mut nu = vec![T::constant(0.0, self.n_params); self.n_bins];
        for s in &self.samples {
            let factor = s
                .norm
                .iter()
                .map(|&i| theta[i].clone())
                .reduce(|a, b| a * b);
            for (b, &nominal) in s.nominal.iter().enumerate() {
                let mut term = match &factor {
                    Some(f) => f.clone() * nominal,
                    None => T::constant(nominal, self.n_params),
                };
                if let Some(shape) = &s.shape {
                    term = term * theta[shape[b]].clone();
                }
                let slot = &mut nu[s.offset + b];
                *slot = std::mem::replace(slot, T::constant(0.0, 0)) + term;
            }
        }
        nu
    }

    fn split(&self, flat: Vec<f64>) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.channel_bins.len());
        let mut it = flat.into_iter();
        for &n in &self.channel_bins {
            out.push(it.by_ref().take(n).collect());
        }
        out
    }
}

/// Σ_b [n_b ln ν_b − ν_b − ln Γ(n_b + 1)], with 0·ln 0 = 0.
fn poisson_log_likelihood<T: Real>(nu: Vec<T>, counts: &[u64], log_factorials: &[f64], dim: usize) -> Result<T> {
    let mut total = T::constant(0.0, dim);
    for ((rate, &n), &lf) in nu.into_iter().zip(counts).zip(log_factorials) {
        let v = rate.value();
        if v < 0.0 || v.is_nan() {
            return Err(Error::Domain(format!("negative expected rate {v}")));
        }
        if v == 0.0 {
            if n > 0 {
                return Ok(T::constant(f64::NEG_INFINITY, dim));
            }
            total = total - rate;
            continue;
        }
        let term = if n == 0 {
            -rate
        } else {
            rate.clone().ln() * n as f64 - rate + (-lf)
        };
        total = total + term;
    }
    Ok(total)
}

fn log_factorials(counts: &[u64]) -> Vec<f64> {
    counts.iter().map(|&n| ln_gamma(n as f64 + 1.0)).collect()
}

fn check_theta(theta: &[f64], dim: usize) -> Result<()> {
    if theta.len() != dim {
        return Err(Error::Dimension { expected: dim, got: theta.len() });
    }
    if let Some(x) = theta.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite parameter value {x}")));
    }
    Ok(())
}

/// A model bound to its priors, parameter space and observed main counts:
/// the sampling target.
#[derive(Debug, Clone)]
pub struct Posterior {
    layout: Layout,
    priors: Vec<Distribution>,
    space: ParameterSpace,
    counts: Vec<u64>,
    log_factorials: Vec<f64>,
}

impl Posterior {
    pub fn new(spec: &ModelSpec, priors: &PriorSet, main: &[Vec<u64>]) -> Result<Self> {
        let space = ParameterSpace::new(spec, priors)?;
        Self::with_space(spec, priors, space, main)
    }

    pub fn with_space(spec: &ModelSpec, priors: &PriorSet, space: ParameterSpace, main: &[Vec<u64>]) -> Result<Self> {
        priors.check_against(spec)?;
        if space.names != spec.parameter_order() {
            return Err(Error::Shape("parameter space does not match the model".into()));
        }
        let layout = Layout::new(spec)?;
        let counts = flatten_counts(&layout, main)?;
        Ok(Self {
            log_factorials: log_factorials(&counts),
            counts,
            priors: priors.distributions(),
            space,
            layout,
        })
    }

    /// Same model and priors with different observed counts.
    pub fn with_counts(&self, main: &[Vec<u64>]) -> Result<Self> {
        let counts = flatten_counts(&self.layout, main)?;
        Ok(Self {
            log_factorials: log_factorials(&counts),
            counts,
            ..self.clone()
        })
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn priors(&self) -> &[Distribution] {
        &self.priors
    }

    pub fn dim(&self) -> usize {
        self.layout.n_params
    }

    /// Expected rates per channel.
    pub fn expected_rates(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_theta(theta, self.dim())?;
        Ok(self.layout.split(self.layout.rates(theta)))
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        check_theta(theta, self.dim())?;
        poisson_log_likelihood(self.layout.rates(theta), &self.counts, &self.log_factorials, 0)
    }

    /// Log likelihood plus log prior densities; `-inf` outside the support.
    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        check_theta(theta, self.dim())?;
        if !self.space.contains(theta) {
            return Ok(f64::NEG_INFINITY);
        }
        let mut lp = 0.0;
        for (x, prior) in theta.iter().zip(&self.priors) {
            lp += prior.log_pdf(*x);
        }
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        let ll = self.log_likelihood(theta)?;
        Ok(ll + lp)
    }

    fn strictly_inside(&self, theta: &[f64]) -> bool {
        theta.iter().zip(&self.space.bounds).zip(&self.priors).all(|((x, (lo, hi)), prior)| {
            let (plo, phi) = prior.support();
            *x > lo.max(plo) && *x < hi.min(phi)
        })
    }

    /// Log density and its gradient in one forward pass. Returns `-inf` and
    /// leaves `grad` untouched when `theta` is not strictly inside the support.
    pub fn log_density_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_theta(theta, self.dim())?;
        if !self.strictly_inside(theta) {
            return Ok(f64::NEG_INFINITY);
        }
        let dim = self.dim();
        let vars = DualVector::seed(theta);
        let mut total = poisson_log_likelihood(self.layout.rates(&vars), &self.counts, &self.log_factorials, dim)?;
        if total.value == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        for (x, prior) in vars.into_iter().zip(&self.priors) {
            total = total + prior.log_density(x);
        }
        grad.copy_from_slice(&total.partials);
        Ok(total.value)
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.dim()];
        let lp = self.log_density_and_gradient(theta, &mut grad)?;
        if lp == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("gradient requested outside the interior of the support at {theta:?}")));
        }
        Ok(grad)
    }
}

fn flatten_counts(layout: &Layout, main: &[Vec<u64>]) -> Result<Vec<u64>> {
    if main.len() != layout.channel_bins.len() {
        return Err(Error::Shape(format!(
            "{} observation vectors for {} channels",
            main.len(),
            layout.channel_bins.len()
        )));
    }
    for (i, (counts, &n)) in main.iter().zip(&layout.channel_bins).enumerate() {
        if counts.len() != n {
            return Err(Error::Shape(format!("channel {i}: {} counts for {n} bins", counts.len())));
        }
    }
    Ok(main.iter().flatten().copied().collect())
}

/// Expected rates ν_cb(θ) per channel.
pub fn expected_rates(spec: &ModelSpec, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
    let layout = Layout::new(spec)?;
    check_theta(theta, layout.n_params)?;
    Ok(layout.split(layout.rates(theta)))
}

/// Poisson log likelihood of the main measurement, including the −ln n!
/// constants.
pub fn log_likelihood_main(spec: &ModelSpec, theta: &[f64], main: &[Vec<u64>]) -> Result<f64> {
    let layout = Layout::new(spec)?;
    check_theta(theta, layout.n_params)?;
    let counts = flatten_counts(&layout, main)?;
    poisson_log_likelihood(layout.rates(theta), &counts, &log_factorials(&counts), 0)
}

pub fn log_posterior_unnorm(spec: &ModelSpec, theta: &[f64], priors: &PriorSet, main: &[Vec<u64>]) -> Result<f64> {
    Posterior::new(spec, priors, main)?.log_density(theta)
}

pub fn grad_log_posterior(spec: &ModelSpec, theta: &[f64], priors: &PriorSet, main: &[Vec<u64>]) -> Result<Vec<f64>> {
    Posterior::new(spec, priors, main)?.gradient(theta)
}
