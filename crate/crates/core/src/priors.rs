//! Prior construction.
//!
//! Free parameters keep the user's ur-prior. Constrained parameters get the
//! closed-form conjugate posterior of their auxiliary measurement, which then
//! acts as the prior of the main inference:
//!
//! * Gaussian measurement `a ~ N(χ, σ_aux)` with ur-prior `N(μ_ur, σ_ur)`
//!   gives `N(μ', σ')` with `σ'² = σ_aux²σ_ur² / (σ_aux² + σ_ur²)` and
//!   `μ' = σ'² (μ_ur/σ_ur² + a/σ_aux²)`.
//! * Poisson count `a ~ Poisson(χ)` with ur-prior `Gamma(α_ur, β_ur)` gives
//!   `Gamma(α_ur + a, β_ur + 1)` over χ, i.e. `Gamma(α_ur + a, a(β_ur + 1))`
//!   over the relative factor `γ = χ / a`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution as _, Gamma as GammaDist, Normal as NormalDist};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dual::Real;
use crate::error::{Error, Result};
use crate::workspace::{AuxObservation, ModelSpec, ObservationSet, ParamKind};

/// Vague ur-prior width for Gaussian constraints, in units of `sigma_aux`.
pub const VAGUE_NORMAL_SCALE: f64 = 1.0e3;
/// Vague Gamma ur-prior shape and rate.
pub const VAGUE_GAMMA: f64 = 1.0e-6;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A univariate prior. Gamma uses the shape/rate parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "DistributionRepr", try_from = "DistributionRepr")]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    Gamma { shape: f64, rate: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// JSON form: `{"normal": [mean, sd]}`, `{"gamma": [shape, rate]}`,
/// `{"uniform": [lo, hi]}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum DistributionRepr {
    Normal([f64; 2]),
    Gamma([f64; 2]),
    Uniform([f64; 2]),
}

impl From<Distribution> for DistributionRepr {
    fn from(d: Distribution) -> Self {
        match d {
            Distribution::Normal { mean, sd } => DistributionRepr::Normal([mean, sd]),
            Distribution::Gamma { shape, rate } => DistributionRepr::Gamma([shape, rate]),
            Distribution::Uniform { lo, hi } => DistributionRepr::Uniform([lo, hi]),
        }
    }
}

impl TryFrom<DistributionRepr> for Distribution {
    type Error = String;
    fn try_from(r: DistributionRepr) -> std::result::Result<Self, String> {
        let d = match r {
            DistributionRepr::Normal([mean, sd]) => Distribution::Normal { mean, sd },
            DistributionRepr::Gamma([shape, rate]) => Distribution::Gamma { shape, rate },
            DistributionRepr::Uniform([lo, hi]) => Distribution::Uniform { lo, hi },
        };
        if [d.params().0, d.params().1].iter().all(|v| v.is_finite()) {
            Ok(d)
        } else {
            Err("distribution parameters must be finite".into())
        }
    }
}

impl Distribution {
    fn params(&self) -> (f64, f64) {
        match *self {
            Distribution::Normal { mean, sd } => (mean, sd),
            Distribution::Gamma { shape, rate } => (shape, rate),
            Distribution::Uniform { lo, hi } => (lo, hi),
        }
    }

    pub fn is_proper(&self) -> bool {
        let (p, q) = self.params();
        p.is_finite()
            && q.is_finite()
            && match *self {
                Distribution::Normal { sd, .. } => sd > 0.0,
                Distribution::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
                Distribution::Uniform { lo, hi } => lo < hi,
            }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Normal { mean, .. } => mean,
            Distribution::Gamma { shape, rate } => shape / rate,
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            Distribution::Normal { sd, .. } => sd,
            Distribution::Gamma { shape, rate } => shape.sqrt() / rate,
            Distribution::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
        }
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Distribution::Gamma { .. } => (0.0, f64::INFINITY),
            Distribution::Uniform { lo, hi } => (lo, hi),
        }
    }

    /// Normalized log density; `-inf` outside the support.
    pub fn log_pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return f64::NEG_INFINITY;
        }
        if let Distribution::Gamma { shape, .. } = *self {
            if x == 0.0 {
                return if shape < 1.0 {
                    f64::INFINITY
                } else if shape == 1.0 {
                    self.log_density(x)
                } else {
                    f64::NEG_INFINITY
                };
            }
        }
        self.log_density(x)
    }

    /// Log density formula without support checks; the caller guarantees
    /// `x` lies strictly inside the support.
    pub fn log_density<T: Real>(&self, x: T) -> T {
        match *self {
            Distribution::Normal { mean, sd } => {
                let z = (x + (-mean)) * (1.0 / sd);
                z.clone() * z * (-0.5) + (-sd.ln() - LN_SQRT_2PI)
            }
            Distribution::Gamma { shape, rate } => {
                let norm = shape * rate.ln() - ln_gamma(shape);
                let linear = x.clone() * (-rate) + norm;
                if shape == 1.0 {
                    linear
                } else {
                    linear + x.ln() * (shape - 1.0)
                }
            }
            Distribution::Uniform { lo, hi } => x * 0.0 + (-(hi - lo).ln()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Normal { mean, sd } => NormalDist::new(mean, sd)
                .expect("proper normal")
                .sample(rng),
            Distribution::Gamma { shape, rate } => GammaDist::new(shape, 1.0 / rate)
                .expect("proper gamma")
                .sample(rng),
            Distribution::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }

    /// Rejection-samples the distribution restricted to `[lo, hi]`.
    pub fn sample_truncated<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
        const MAX_TRIES: usize = 1_000_000;
        for _ in 0..MAX_TRIES {
            let x = self.sample(rng);
            if x >= lo && x <= hi {
                return Ok(x);
            }
        }
        Err(Error::Domain(format!(
            "truncation [{lo}, {hi}] keeps too little mass of {self:?}"
        )))
    }
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Distribution::Normal { mean, sd } => write!(f, "Normal({mean}, {sd})"),
            Distribution::Gamma { shape, rate } => write!(f, "Gamma({shape}, {rate})"),
            Distribution::Uniform { lo, hi } => write!(f, "Uniform({lo}, {hi})"),
        }
    }
}

/// A prior stated before any observation is taken into account.
#[derive(Debug, Clone, PartialEq)]
pub struct UrPrior {
    pub parameter: String,
    pub family: Distribution,
}

impl UrPrior {
    /// Ur-priors admit the degenerate Gamma(0, 0) limit; everything else
    /// must be well formed.
    pub fn new(parameter: impl Into<String>, family: Distribution) -> Result<Self> {
        let parameter = parameter.into();
        let ok = match family {
            Distribution::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Distribution::Gamma { shape, rate } => {
                shape.is_finite() && rate.is_finite() && shape >= 0.0 && rate >= 0.0
            }
            Distribution::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(Self { parameter, family })
        } else {
            Err(Error::Domain(format!("invalid ur-prior {family} for `{parameter}`")))
        }
    }
}

/// Closed-form Normal-Normal update; returns `(mean, sd)` of the posterior.
pub fn gaussian_conjugate_update(mu_ur: f64, sigma_ur: f64, a: f64, sigma_aux: f64) -> Result<(f64, f64)> {
    if !(sigma_ur > 0.0 && sigma_aux > 0.0) || !sigma_ur.is_finite() || !sigma_aux.is_finite() {
        return Err(Error::Domain(format!(
            "scales must be positive and finite (sigma_ur = {sigma_ur}, sigma_aux = {sigma_aux})"
        )));
    }
    let (v_aux, v_ur) = (sigma_aux * sigma_aux, sigma_ur * sigma_ur);
    let variance = v_aux * v_ur / (v_aux + v_ur);
    let mean = variance * (mu_ur / v_ur + a / v_aux);
    Ok((mean, variance.sqrt()))
}

/// Closed-form Gamma-Poisson update for a single count; returns `(shape, rate)`.
pub fn gamma_conjugate_update(alpha_ur: f64, beta_ur: f64, a: f64) -> Result<(f64, f64)> {
    if !(a >= 0.0) || a.fract() != 0.0 || !a.is_finite() {
        return Err(Error::Domain(format!("auxiliary count must be a non-negative integer, got {a}")));
    }
    if !(alpha_ur >= 0.0 && beta_ur >= 0.0) || !alpha_ur.is_finite() || !beta_ur.is_finite() {
        return Err(Error::Domain(format!(
            "ur-hyperparameters must be non-negative (alpha = {alpha_ur}, beta = {beta_ur})"
        )));
    }
    let shape = alpha_ur + a;
    if shape <= 0.0 {
        return Err(Error::Domain("posterior shape is zero: improper Gamma posterior".into()));
    }
    Ok((shape, beta_ur + 1.0))
}

/// Re-expresses a Gamma posterior over an absolute rate as the prior over the
/// relative factor `γ = χ / a`.
pub fn gamma_rescale_to_factor(shape: f64, rate: f64, a: f64) -> Result<Distribution> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!(
            "cannot rescale to a relative factor with auxiliary count {a}"
        )));
    }
    Ok(Distribution::Gamma { shape, rate: a * rate })
}

/// Per-parameter priors, ordered like the model's parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSet {
    entries: Vec<PriorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorEntry {
    pub name: String,
    pub kind: ParamKind,
    pub prior: Distribution,
}

impl PriorSet {
    /// Checks that `entries` cover `spec`'s parameters in order and are proper.
    pub fn new(spec: &ModelSpec, entries: Vec<PriorEntry>) -> Result<Self> {
        let set = Self { entries };
        set.check_against(spec)?;
        Ok(set)
    }

    pub fn check_against(&self, spec: &ModelSpec) -> Result<()> {
        if self.entries.len() != spec.parameters.len()
            || self
                .entries
                .iter()
                .zip(&spec.parameters)
                .any(|(e, p)| e.name != p.name || e.kind != p.kind)
        {
            return Err(Error::Shape(format!(
                "priors {:?} do not cover parameters {:?}",
                self.names(),
                spec.parameter_order()
            )));
        }
        for e in &self.entries {
            if !e.prior.is_proper() {
                return Err(Error::ImproperPrior(e.name.clone()));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[PriorEntry] {
        &self.entries
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Distribution> {
        self.entries.iter().find(|e| e.name == name).map(|e| &e.prior)
    }

    pub fn distributions(&self) -> Vec<Distribution> {
        self.entries.iter().map(|e| e.prior).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("prior set serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("resolved priors: {e}")))
    }
}

/// Builds the prior set: ur-priors pass through for free parameters,
/// constrained parameters are updated against their auxiliary measurements.
///
/// Ur-priors for a Poisson-constrained shape may be keyed by the modifier name
/// (applies to every bin) or by the per-bin parameter name.
pub fn build_priors(spec: &ModelSpec, ur: &[UrPrior], obs: &ObservationSet) -> Result<PriorSet> {
    for u in ur {
        let known = spec
            .parameters
            .iter()
            .any(|p| p.name == u.parameter || p.modifier == u.parameter);
        if !known {
            return Err(Error::Config(format!("prior given for unknown parameter `{}`", u.parameter)));
        }
    }
    let lookup = |name: &str| ur.iter().find(|u| u.parameter == name).map(|u| u.family);

    let mut entries = Vec::with_capacity(spec.parameters.len());
    for p in &spec.parameters {
        let prior = match p.kind {
            ParamKind::Free => {
                let family = lookup(&p.name).ok_or_else(|| Error::MissingPrior(p.name.clone()))?;
                if !family.is_proper() {
                    return Err(Error::ImproperPrior(p.name.clone()));
                }
                family
            }
            ParamKind::GaussConstrained => {
                let Some(AuxObservation::Gaussian { a, sigma }) = obs.aux.get(&p.modifier) else {
                    return Err(Error::Domain(format!("missing Gaussian auxiliary measurement for `{}`", p.name)));
                };
                let (mu_ur, sigma_ur) = match lookup(&p.name) {
                    None => (0.0, VAGUE_NORMAL_SCALE * sigma),
                    Some(Distribution::Normal { mean, sd }) => (mean, sd),
                    Some(other) => {
                        return Err(Error::Domain(format!(
                            "ur-prior for Gaussian-constrained `{}` must be normal, got {other}",
                            p.name
                        )))
                    }
                };
                let (mean, sd) = gaussian_conjugate_update(mu_ur, sigma_ur, *a, *sigma)?;
                Distribution::Normal { mean, sd }
            }
            ParamKind::PoissonConstrained => {
                let bin = p.bin.unwrap_or(0);
                let count = match obs.aux.get(&p.modifier) {
                    Some(AuxObservation::Poisson { counts }) if bin < counts.len() => counts[bin],
                    _ => {
                        return Err(Error::Domain(format!("missing Poisson auxiliary count for `{}`", p.name)))
                    }
                };
                let (alpha_ur, beta_ur) = match lookup(&p.name).or_else(|| lookup(&p.modifier)) {
                    None => (VAGUE_GAMMA, VAGUE_GAMMA),
                    Some(Distribution::Gamma { shape, rate }) => (shape, rate),
                    Some(other) => {
                        return Err(Error::Domain(format!(
                            "ur-prior for Poisson-constrained `{}` must be gamma, got {other}",
                            p.name
                        )))
                    }
                };
                let (shape, rate) = gamma_conjugate_update(alpha_ur, beta_ur, count as f64)?;
                gamma_rescale_to_factor(shape, rate, count as f64)
                    .map_err(|e| Error::Domain(format!("`{}`: {e}", p.name)))?
            }
        };
        entries.push(PriorEntry { name: p.name.clone(), kind: p.kind, prior });
    }
    PriorSet::new(spec, entries)
}

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workspace::parse_workspace;

    /// Brute-force Bayes update on a grid: prior(x) * likelihood(a | x),
    /// normalized by the trapezoid rule.
    fn grid_posterior(mu_ur: f64, sigma_ur: f64, a: f64, sigma_aux: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let s = sigma_ur.min(sigma_aux);
        let lo = mu_ur.min(a) - 10.0 * s;
        let hi = mu_ur.max(a) + 10.0 * s;
        let h = (hi - lo) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
        let logs: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let zp = (x - mu_ur) / sigma_ur;
                let zl = (a - x) / sigma_aux;
                -0.5 * (zp * zp + zl * zl)
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let z = h * (w.iter().sum::<f64>() - 0.5 * (w[0] + w[n - 1]));
        (xs, w.into_iter().map(|v| v / z).collect())
    }

    #[test]
    fn gaussian_update_matches_grid_for_reference_case() {
        let (mean, sd) = gaussian_conjugate_update(0.0, 2.0, 1.0, 1.0).unwrap();
        assert!((mean - 0.8).abs() < 1e-15);
        assert!((sd - 0.8f64.sqrt()).abs() < 1e-15);
        let (xs, pdf) = grid_posterior(0.0, 2.0, 1.0, 1.0, 100_000);
        let dev = xs
            .iter()
            .zip(&pdf)
            .map(|(&x, &p)| (normal_pdf(x, mean, sd) - p).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-6, "max deviation {dev}");
    }

    #[test]
    fn gaussian_vague_limit_and_symmetry() {
        let (mean, sd) = gaussian_conjugate_update(0.0, 1e6, 1.5, 0.5).unwrap();
        assert!((mean - 1.5).abs() < 1e-9);
        assert!((sd - 0.5).abs() < 1e-9);
        let (mean, _) = gaussian_conjugate_update(0.0, 2.0, 0.0, 1.0).unwrap();
        assert_eq!(mean, 0.0);
        assert!(gaussian_conjugate_update(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(gaussian_conjugate_update(0.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn gaussian_vague_limit_is_monotone() {
        let (a, sigma_aux) = (1.5, 0.5);
        let mut last = (f64::INFINITY, f64::INFINITY);
        for sigma_ur in [10.0, 1e2, 1e3, 1e4] {
            let (m, s) = gaussian_conjugate_update(0.0, sigma_ur, a, sigma_aux).unwrap();
            let gap = ((m - a).abs(), (s - sigma_aux).abs());
            assert!(gap.0 < last.0 && gap.1 < last.1, "{sigma_ur}: {gap:?} vs {last:?}");
            last = gap;
        }
        assert!(last.0 < 1e-8 && last.1 < 1e-8);
    }

    #[test]
    fn gamma_update_examples() {
        assert_eq!(gamma_conjugate_update(0.0, 0.0, 5.0).unwrap(), (5.0, 1.0));
        assert_eq!(gamma_conjugate_update(2.0, 1.0, 3.0).unwrap(), (5.0, 2.0));
        assert!(gamma_conjugate_update(0.0, 0.0, 0.0).is_err());
        assert!(gamma_conjugate_update(1.0, 1.0, -1.0).is_err());
        assert!(gamma_conjugate_update(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn gamma_posterior_mean_tends_to_count() {
        let a = 7.0;
        let mut last = f64::INFINITY;
        for ur in [1.0, 1e-2, 1e-4, 1e-6] {
            let (s, r) = gamma_conjugate_update(ur, ur, a).unwrap();
            let gap = (s / r - a).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn gamma_rescale_examples() {
        let d = gamma_rescale_to_factor(4.0, 1.0, 4.0).unwrap();
        assert_eq!(d, Distribution::Gamma { shape: 4.0, rate: 4.0 });
        assert_eq!(d.mean(), 1.0);
        assert_eq!(
            gamma_rescale_to_factor(5.0, 2.0, 1.0).unwrap(),
            Distribution::Gamma { shape: 5.0, rate: 2.0 }
        );
        let d = gamma_rescale_to_factor(10.0, 1.0, 10.0).unwrap();
        assert!((d.sd().powi(2) - 0.1).abs() < 1e-15);
        assert!(gamma_rescale_to_factor(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn log_pdf_is_normalized() {
        for d in [
            Distribution::Normal { mean: 0.3, sd: 1.7 },
            Distribution::Gamma { shape: 3.5, rate: 2.0 },
            Distribution::Gamma { shape: 1.0, rate: 0.5 },
            Distribution::Uniform { lo: -1.0, hi: 2.0 },
        ] {
            let (lo, hi) = (d.mean() - 20.0 * d.sd(), d.mean() + 20.0 * d.sd());
            let n = 200_001;
            let h = (hi - lo) / (n - 1) as f64;
            let total: f64 = (0..n)
                .map(|i| {
                    let x = lo + i as f64 * h;
                    let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    w * d.log_pdf(x).exp()
                })
                .sum::<f64>()
                * h;
            assert!((total - 1.0).abs() < 1e-3, "{d}: {total}");
        }
    }

    const THREE_BIN: &str = r#"{
        "channels": [{"name": "sr", "samples": [
            {"name": "signal", "data": [5, 10, 15],
             "modifiers": [{"name": "mu", "type": "normfactor", "data": null}]},
            {"name": "background", "data": [50, 50, 50],
             "modifiers": [{"name": "bkg_norm", "type": "normsys_gauss", "data": null}]}
        ]}],
        "observations": [{"name": "sr", "data": [55, 60, 65]}],
        "aux": {"bkg_norm": {"a": 0.0, "sigma": 1.0}}
    }"#;

    #[test]
    fn build_priors_for_three_bin_model() {
        let (spec, obs) = parse_workspace(THREE_BIN).unwrap();
        let ur = vec![
            UrPrior::new("mu", Distribution::Normal { mean: 0.0, sd: 2.0 }).unwrap(),
            UrPrior::new("bkg_norm", Distribution::Normal { mean: 0.0, sd: 2.0 }).unwrap(),
        ];
        let priors = build_priors(&spec, &ur, &obs).unwrap();
        assert_eq!(priors.get("mu"), Some(&Distribution::Normal { mean: 0.0, sd: 2.0 }));
        match priors.get("bkg_norm") {
            Some(Distribution::Normal { mean, sd }) => {
                assert_eq!(*mean, 0.0);
                assert!((sd - 0.8f64.sqrt()).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        let missing = build_priors(&spec, &ur[1..], &obs);
        assert!(matches!(missing, Err(Error::MissingPrior(name)) if name == "mu"));
    }

    #[test]
    fn poisson_default_prior_is_vague_gamma() {
        let doc = r#"{"channels": [{"name": "c", "samples": [{"name": "b", "data": [10],
                        "modifiers": [{"name": "stat", "type": "shapesys_poisson"}]}]}],
                      "observations": [{"name": "c", "data": [9]}],
                      "aux": {"stat": {"a": [7]}}}"#;
        let (spec, obs) = parse_workspace(doc).unwrap();
        let priors = build_priors(&spec, &[], &obs).unwrap();
        let Some(Distribution::Gamma { shape, rate }) = priors.get("stat[0]") else { panic!() };
        assert!((shape - 7.0).abs() < 1e-5 && (rate - 7.0).abs() < 1e-4);
        assert!((shape / rate - 1.0).abs() < 1e-6);

        let zero = doc.replace("[7]", "[0]");
        let (spec, obs) = parse_workspace(&zero).unwrap();
        assert!(matches!(build_priors(&spec, &[], &obs), Err(Error::Domain(_))));
    }

    #[test]
    fn no_constrained_parameters_pass_through() {
        let doc = THREE_BIN
            .replace(r#"{"name": "bkg_norm", "type": "normsys_gauss", "data": null}"#, "")
            .replace(r#""aux": {"bkg_norm": {"a": 0.0, "sigma": 1.0}}"#, r#""aux": {}"#);
        let (spec, obs) = parse_workspace(&doc).unwrap();
        let ur = vec![UrPrior::new("mu", Distribution::Uniform { lo: 0.0, hi: 5.0 }).unwrap()];
        let priors = build_priors(&spec, &ur, &obs).unwrap();
        assert_eq!(priors.distributions(), vec![Distribution::Uniform { lo: 0.0, hi: 5.0 }]);
    }

    #[test]
    fn json_form_round_trips_bit_exactly() {
        let (spec, obs) = parse_workspace(THREE_BIN).unwrap();
        let ur = vec![UrPrior::new("mu", Distribution::Normal { mean: 0.1, sd: 2.0 / 3.0 }).unwrap()];
        let priors = build_priors(&spec, &ur, &obs).unwrap();
        let back = PriorSet::from_json(&priors.to_json()).unwrap();
        assert_eq!(back, priors);
        assert!(priors.to_json().contains("\"normal\""));
    }
}
