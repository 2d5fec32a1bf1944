//! Bayesian inference for HistFactory-style binned models.
//!
//! The pipeline mirrors a typical analysis:
//!
//! 1. [`workspace::parse_workspace`] reads a JSON model (channels, samples,
//!    modifiers, observed counts and auxiliary measurements).
//! 2. [`priors::build_priors`] turns user ur-priors plus auxiliary
//!    measurements into closed-form conjugate priors for every constrained
//!    parameter.
//! 3. [`model::Posterior`] evaluates the Poisson likelihood times those priors,
//!    with exact forward-mode gradients.
//! 4. [`samplers`] draws chains with HMC or random-walk Metropolis-Hastings.
//! 5. [`diagnostics`] measures autocorrelation, thinning, ESS and split-R̂.
//! 6. [`predictive`] produces prior/posterior predictive counts and runs
//!    simulation-based calibration.
//!
//! The `histbayes` binary wraps these steps behind `sample`, `diagnose`,
//! `predict` and `calibrate` subcommands (see [`cli`]).

pub mod cli;
pub mod diagnostics;
pub mod dual;
pub mod error;
pub mod model;
pub mod predictive;
pub mod priors;
pub mod samplers;
pub mod stats;
pub mod workspace;

pub use error::{Error, Result};
pub use model::{ParameterSpace, Posterior};
pub use priors::{build_priors, Distribution, PriorSet, UrPrior};
pub use samplers::{Chain, SamplerConfig, SamplerKind};
pub use workspace::{parse_workspace, ModelSpec, ObservationSet};
