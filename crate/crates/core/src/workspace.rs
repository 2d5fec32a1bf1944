//! JSON workspace documents: a strict subset of the pyhf layout.
//!
//! ```json
//! {
//!   "channels": [
//!     {"name": "sr", "samples": [
//!       {"name": "signal", "data": [5, 10, 15],
//!        "modifiers": [{"name": "mu", "type": "normfactor", "data": null}]},
//!       {"name": "background", "data": [50, 50, 50],
//!        "modifiers": [{"name": "bkg_norm", "type": "normsys_gauss", "data": null}]}
//!     ]}
//!   ],
//!   "observations": [{"name": "sr", "data": [55, 60, 65]}],
//!   "aux": {"bkg_norm": {"a": 1.0, "sigma": 0.1}}
//! }
//! ```
//!
//! Unknown keys anywhere are rejected. Modifier `data` must be `null` (or
//! absent); auxiliary measurements live in the top-level `aux` map, keyed by
//! modifier name: `{"a", "sigma"}` for `normsys_gauss`, `{"a": [..]}` with one
//! count per bin for `shapesys_poisson`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModifierKind {
    /// `normfactor`: unconstrained multiplicative factor on the whole sample.
    #[serde(rename = "normfactor")]
    FreeNorm,
    /// `normsys_gauss`: the parameter value multiplies the whole sample and is
    /// constrained by a Gaussian auxiliary measurement.
    #[serde(rename = "normsys_gauss")]
    GaussConstrainedNorm,
    /// `shapesys_poisson`: one factor per bin, each constrained by a Poisson
    /// auxiliary count.
    #[serde(rename = "shapesys_poisson")]
    PoissonConstrainedShape,
}

impl ModifierKind {
    pub fn type_name(self) -> &'static str {
        match self {
            ModifierKind::FreeNorm => "normfactor",
            ModifierKind::GaussConstrainedNorm => "normsys_gauss",
            ModifierKind::PoissonConstrainedShape => "shapesys_poisson",
        }
    }

    pub fn param_kind(self) -> ParamKind {
        match self {
            ModifierKind::FreeNorm => ParamKind::Free,
            ModifierKind::GaussConstrainedNorm => ParamKind::GaussConstrained,
            ModifierKind::PoissonConstrainedShape => ParamKind::PoissonConstrained,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Modifier {
    pub kind: ModifierKind,
    pub parameter: String,
}

impl Modifier {
    pub fn new(kind: ModifierKind, parameter: impl Into<String>) -> Self {
        Self { kind, parameter: parameter.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub name: String,
    pub nominal: Vec<f64>,
    pub modifiers: Vec<Modifier>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub samples: Vec<Sample>,
    pub n_bins: usize,
}

impl Channel {
    /// Bin count taken from the first sample.
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Self {
        let n_bins = samples.first().map_or(0, |s| s.nominal.len());
        Self { name: name.into(), samples, n_bins }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Free,
    GaussConstrained,
    PoissonConstrained,
}

impl ParamKind {
    pub fn is_constrained(self) -> bool {
        !matches!(self, ParamKind::Free)
    }
}

/// One coordinate of the parameter vector.
///
/// `modifier` is the modifier name that introduced the parameter. For
/// Poisson-constrained shapes there is one parameter per bin, named
/// `"{modifier}[{bin}]"`, with `bin` set.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub kind: ParamKind,
    pub modifier: String,
    pub bin: Option<usize>,
}

pub fn shape_parameter_name(modifier: &str, bin: usize) -> String {
    format!("{modifier}[{bin}]")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub channels: Vec<Channel>,
    /// Free parameters first, then constrained ones, each group in
    /// declaration order.
    pub parameters: Vec<Parameter>,
}

impl ModelSpec {
    /// Builds a spec whose parameters are derived from the modifiers.
    pub fn from_channels(channels: Vec<Channel>) -> Self {
        let parameters = derive_parameters(&channels);
        Self { channels, parameters }
    }

    /// A model without data channels: the posterior is the prior.
    pub fn prior_only(parameters: Vec<Parameter>) -> Self {
        Self { channels: Vec::new(), parameters }
    }

    pub fn parameter_order(&self) -> Vec<String> {
        self.parameters.iter().map(|p| p.name.clone()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.parameters.len()
    }

    pub fn parameter_index(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn total_bins(&self) -> usize {
        self.channels.iter().map(|c| c.n_bins).sum()
    }

    /// Modifier names that need an auxiliary measurement, in declaration order.
    pub fn constrained_modifiers(&self) -> Vec<(String, ModifierKind)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for p in &self.parameters {
            if p.kind.is_constrained() && seen.insert(p.modifier.clone()) {
                let kind = match p.kind {
                    ParamKind::GaussConstrained => ModifierKind::GaussConstrainedNorm,
                    _ => ModifierKind::PoissonConstrainedShape,
                };
                out.push((p.modifier.clone(), kind));
            }
        }
        out
    }
}

fn derive_parameters(channels: &[Channel]) -> Vec<Parameter> {
    let mut seen = BTreeSet::new();
    let mut free = Vec::new();
    let mut constrained = Vec::new();
    for channel in channels {
        for sample in &channel.samples {
            for m in &sample.modifiers {
                if !seen.insert(m.parameter.clone()) {
                    continue;
                }
                match m.kind {
                    ModifierKind::FreeNorm => free.push(Parameter {
                        name: m.parameter.clone(),
                        kind: ParamKind::Free,
                        modifier: m.parameter.clone(),
                        bin: None,
                    }),
                    ModifierKind::GaussConstrainedNorm => constrained.push(Parameter {
                        name: m.parameter.clone(),
                        kind: ParamKind::GaussConstrained,
                        modifier: m.parameter.clone(),
                        bin: None,
                    }),
                    ModifierKind::PoissonConstrainedShape => {
                        for b in 0..channel.n_bins {
                            constrained.push(Parameter {
                                name: shape_parameter_name(&m.parameter, b),
                                kind: ParamKind::PoissonConstrained,
                                modifier: m.parameter.clone(),
                                bin: Some(b),
                            });
                        }
                    }
                }
            }
        }
    }
    free.extend(constrained);
    free
}

#[derive(Debug, Clone, PartialEq)]
pub enum AuxObservation {
    Gaussian { a: f64, sigma: f64 },
    Poisson { counts: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationSet {
    /// Observed counts, aligned with `ModelSpec::channels`.
    pub main: Vec<Vec<u64>>,
    /// Auxiliary measurements keyed by modifier name.
    pub aux: BTreeMap<String, AuxObservation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationFinding {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl ValidationFinding {
    fn error(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ValidationFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Checks every structural invariant of a model and its observations.
pub fn validate(spec: &ModelSpec, obs: &ObservationSet) -> Vec<ValidationFinding> {
    let mut out = Vec::new();

    let mut channel_names = BTreeSet::new();
    // modifier name -> (kind, number of samples using it)
    let mut usage: HashMap<&str, (ModifierKind, usize, usize)> = HashMap::new();
    for (ci, channel) in spec.channels.iter().enumerate() {
        let cpath = format!("channels[{ci}]");
        if !channel_names.insert(channel.name.as_str()) {
            out.push(ValidationFinding::error(
                &cpath,
                format!("duplicate channel name `{}`", channel.name),
            ));
        }
        if channel.n_bins == 0 {
            out.push(ValidationFinding::error(&cpath, format!("channel `{}` has no bins", channel.name)));
        }
        let mut sample_names = BTreeSet::new();
        for (si, sample) in channel.samples.iter().enumerate() {
            let spath = format!("{cpath}.samples[{si}]");
            if !sample_names.insert(sample.name.as_str()) {
                out.push(ValidationFinding::error(
                    &spath,
                    format!("duplicate sample name `{}` in channel `{}`", sample.name, channel.name),
                ));
            }
            if sample.nominal.len() != channel.n_bins {
                out.push(ValidationFinding::error(
                    format!("{spath}.data"),
                    format!(
                        "sample `{}` has {} bins, channel `{}` has {}",
                        sample.name,
                        sample.nominal.len(),
                        channel.name,
                        channel.n_bins
                    ),
                ));
            }
            for (b, v) in sample.nominal.iter().enumerate() {
                if !v.is_finite() {
                    out.push(ValidationFinding::error(format!("{spath}.data[{b}]"), "non-finite nominal rate"));
                } else if *v < 0.0 {
                    out.push(ValidationFinding::error(format!("{spath}.data[{b}]"), "negative nominal rate"));
                }
            }
            let n_shape = sample
                .modifiers
                .iter()
                .filter(|m| m.kind == ModifierKind::PoissonConstrainedShape)
                .count();
            if n_shape > 1 {
                out.push(ValidationFinding::error(
                    format!("{spath}.modifiers"),
                    format!("sample `{}` has {n_shape} shapesys_poisson modifiers (at most one allowed)", sample.name),
                ));
            }
            for (mi, m) in sample.modifiers.iter().enumerate() {
                let mpath = format!("{spath}.modifiers[{mi}]");
                let entry = usage.entry(m.parameter.as_str()).or_insert((m.kind, 0, channel.n_bins));
                if entry.0 != m.kind {
                    out.push(ValidationFinding::error(
                        &mpath,
                        format!(
                            "parameter `{}` used as both {} and {}",
                            m.parameter,
                            entry.0.type_name(),
                            m.kind.type_name()
                        ),
                    ));
                }
                entry.1 += 1;
                if m.kind == ModifierKind::PoissonConstrainedShape && entry.1 > 1 {
                    out.push(ValidationFinding::error(
                        &mpath,
                        format!("shapesys_poisson parameter `{}` is shared between samples", m.parameter),
                    ));
                }
                let declared = match m.kind {
                    ModifierKind::PoissonConstrainedShape => (0..channel.n_bins).all(|b| {
                        let name = shape_parameter_name(&m.parameter, b);
                        spec.parameters
                            .iter()
                            .any(|p| p.name == name && p.kind == ParamKind::PoissonConstrained)
                    }),
                    kind => spec
                        .parameters
                        .iter()
                        .any(|p| p.name == m.parameter && p.kind == kind.param_kind()),
                };
                if !declared {
                    out.push(ValidationFinding::error(
                        &mpath,
                        format!("modifier references undeclared parameter `{}`", m.parameter),
                    ));
                }
            }
        }
    }

    let mut param_names = BTreeSet::new();
    for (pi, p) in spec.parameters.iter().enumerate() {
        let ppath = format!("parameters[{pi}]");
        if !param_names.insert(p.name.as_str()) {
            out.push(ValidationFinding::error(&ppath, format!("duplicate parameter `{}`", p.name)));
        }
        if !spec.channels.is_empty() && !usage.contains_key(p.modifier.as_str()) {
            out.push(ValidationFinding::error(
                &ppath,
                format!("parameter `{}` is referenced by no modifier", p.name),
            ));
        }
    }
    // declaration order: free block before constrained block
    if let Some(first_constrained) = spec.parameters.iter().position(|p| p.kind.is_constrained()) {
        if spec.parameters[first_constrained..].iter().any(|p| !p.kind.is_constrained()) {
            out.push(ValidationFinding::error(
                "parameters",
                "free parameters must precede constrained parameters",
            ));
        }
    }

    if obs.main.len() != spec.channels.len() {
        out.push(ValidationFinding::error(
            "observations",
            format!("{} observation vectors for {} channels", obs.main.len(), spec.channels.len()),
        ));
    }
    for (ci, (channel, counts)) in spec.channels.iter().zip(&obs.main).enumerate() {
        if counts.len() != channel.n_bins {
            out.push(ValidationFinding::error(
                format!("observations[{ci}].data"),
                format!(
                    "channel `{}` has {} bins but {} observed counts",
                    channel.name,
                    channel.n_bins,
                    counts.len()
                ),
            ));
        }
    }

    let constrained = spec.constrained_modifiers();
    for (name, kind) in &constrained {
        let apath = format!("aux.{name}");
        match (kind, obs.aux.get(name)) {
            (_, None) => out.push(ValidationFinding::error(
                &apath,
                format!("missing auxiliary measurement for constrained parameter `{name}`"),
            )),
            (ModifierKind::GaussConstrainedNorm, Some(AuxObservation::Gaussian { a, sigma })) => {
                if !a.is_finite() {
                    out.push(ValidationFinding::error(format!("{apath}.a"), "non-finite auxiliary value"));
                }
                if !(sigma.is_finite() && *sigma > 0.0) {
                    out.push(ValidationFinding::error(format!("{apath}.sigma"), "sigma must be positive and finite"));
                }
            }
            (ModifierKind::PoissonConstrainedShape, Some(AuxObservation::Poisson { counts })) => {
                let n_bins = spec.parameters.iter().filter(|p| &p.modifier == name).count();
                if counts.len() != n_bins {
                    out.push(ValidationFinding::error(
                        format!("{apath}.a"),
                        format!("{} auxiliary counts for {n_bins} bins of `{name}`", counts.len()),
                    ));
                }
            }
            (_, Some(_)) => out.push(ValidationFinding::error(
                &apath,
                format!("auxiliary measurement for `{name}` does not match a {} modifier", kind.type_name()),
            )),
        }
    }
    for name in obs.aux.keys() {
        if !constrained.iter().any(|(n, _)| n == name) {
            out.push(ValidationFinding::error(
                format!("aux.{name}"),
                format!("auxiliary measurement `{name}` matches no constrained parameter"),
            ));
        }
    }

    out
}

// ---------------------------------------------------------------------------
// Wire format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkspace {
    channels: Vec<RawChannel>,
    observations: Vec<RawObservation>,
    #[serde(default)]
    aux: BTreeMap<String, RawAux>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    name: String,
    samples: Vec<RawSample>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    name: String,
    data: Vec<f64>,
    modifiers: Vec<RawModifier>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModifier {
    name: String,
    #[serde(rename = "type")]
    kind: ModifierKind,
    #[serde(default)]
    data: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObservation {
    name: String,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawAux {
    Gaussian(RawGaussAux),
    Poisson(RawPoissonAux),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGaussAux {
    a: f64,
    sigma: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoissonAux {
    a: Vec<f64>,
}

fn to_count(v: f64) -> Option<u64> {
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < 9.0e15).then_some(v as u64)
}

/// Parses and validates a workspace document.
pub fn parse_workspace(text: &str) -> Result<(ModelSpec, ObservationSet)> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Syntax(e.to_string()))?;
    let raw: RawWorkspace = serde_path_to_error::deserialize(value).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;

    let mut findings = Vec::new();
    let mut channels = Vec::with_capacity(raw.channels.len());
    for (ci, rc) in raw.channels.into_iter().enumerate() {
        let mut samples = Vec::with_capacity(rc.samples.len());
        for (si, rs) in rc.samples.into_iter().enumerate() {
            let mut modifiers = Vec::with_capacity(rs.modifiers.len());
            for (mi, rm) in rs.modifiers.into_iter().enumerate() {
                if rm.data.is_some() {
                    return Err(Error::Schema {
                        path: format!("channels[{ci}].samples[{si}].modifiers[{mi}].data"),
                        message: "modifier data must be null; auxiliary measurements go in `aux`".into(),
                    });
                }
                modifiers.push(Modifier { kind: rm.kind, parameter: rm.name });
            }
            samples.push(Sample { name: rs.name, nominal: rs.data, modifiers });
        }
        channels.push(Channel::new(rc.name, samples));
    }
    let spec = ModelSpec::from_channels(channels);

    let mut main: Vec<Option<Vec<u64>>> = vec![None; spec.channels.len()];
    for (oi, ro) in raw.observations.into_iter().enumerate() {
        let opath = format!("observations[{oi}]");
        let Some(ci) = spec.channels.iter().position(|c| c.name == ro.name) else {
            findings.push(ValidationFinding::error(
                &opath,
                format!("observation `{}` matches no channel", ro.name),
            ));
            continue;
        };
        if main[ci].is_some() {
            findings.push(ValidationFinding::error(
                &opath,
                format!("duplicate observation for channel `{}`", ro.name),
            ));
            continue;
        }
        let mut counts = Vec::with_capacity(ro.data.len());
        for (b, v) in ro.data.iter().enumerate() {
            match to_count(*v) {
                Some(n) => counts.push(n),
                None => {
                    findings.push(ValidationFinding::error(
                        format!("{opath}.data[{b}]"),
                        "observed count must be a non-negative integer",
                    ));
                    counts.push(0);
                }
            }
        }
        main[ci] = Some(counts);
    }
    let main = main
        .into_iter()
        .zip(&spec.channels)
        .map(|(counts, channel)| {
            counts.unwrap_or_else(|| {
                findings.push(ValidationFinding::error(
                    "observations",
                    format!("no observation for channel `{}`", channel.name),
                ));
                vec![0; channel.n_bins]
            })
        })
        .collect();

    let mut aux = BTreeMap::new();
    for (name, ra) in raw.aux {
        let obs = match ra {
            RawAux::Gaussian(g) => AuxObservation::Gaussian { a: g.a, sigma: g.sigma },
            RawAux::Poisson(p) => {
                let mut counts = Vec::with_capacity(p.a.len());
                for (b, v) in p.a.iter().enumerate() {
                    match to_count(*v) {
                        Some(n) => counts.push(n),
                        None => {
                            findings.push(ValidationFinding::error(
                                format!("aux.{name}.a[{b}]"),
                                "auxiliary count must be a non-negative integer",
                            ));
                            counts.push(0);
                        }
                    }
                }
                AuxObservation::Poisson { counts }
            }
        };
        aux.insert(name, obs);
    }

    let obs = ObservationSet { main, aux };
    findings.extend(validate(&spec, &obs));
    if findings.is_empty() {
        Ok((spec, obs))
    } else {
        Err(Error::Validation(findings))
    }
}

/// Serializes a model and its observations back to the workspace format.
pub fn to_workspace_json(spec: &ModelSpec, obs: &ObservationSet) -> String {
    let raw = RawWorkspace {
        channels: spec
            .channels
            .iter()
            .map(|c| RawChannel {
                name: c.name.clone(),
                samples: c
                    .samples
                    .iter()
                    .map(|s| RawSample {
                        name: s.name.clone(),
                        data: s.nominal.clone(),
                        modifiers: s
                            .modifiers
                            .iter()
                            .map(|m| RawModifier { name: m.parameter.clone(), kind: m.kind, data: None })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
        observations: spec
            .channels
            .iter()
            .zip(&obs.main)
            .map(|(c, counts)| RawObservation {
                name: c.name.clone(),
                data: counts.iter().map(|&n| n as f64).collect(),
            })
            .collect(),
        aux: obs
            .aux
            .iter()
            .map(|(k, v)| {
                let raw = match v {
                    AuxObservation::Gaussian { a, sigma } => RawAux::Gaussian(RawGaussAux { a: *a, sigma: *sigma }),
                    AuxObservation::Poisson { counts } => RawAux::Poisson(RawPoissonAux {
                        a: counts.iter().map(|&n| n as f64).collect(),
                    }),
                };
                (k.clone(), raw)
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("workspace serialization cannot fail")
}
