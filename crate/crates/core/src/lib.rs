//! Bayesian latent growth curve modelling for longitudinal multi-outcome
//! panels.
//!
//! Each subject carries one piecewise-linear latent trajectory per facet.
//! Observed outcomes load on their facet's trajectory through an intercept,
//! covariate effects and a loading, with correlated Gaussian residuals.
//! Count outcomes enter through a rounded latent continuous value and
//! missing cells are imputed inside the sampler.
//!
//! The crate is organised bottom-up:
//!
//! * [`spline`] evaluates the broken-stick basis.
//! * [`data`] ingests and validates panel CSV files.
//! * [`config`] holds model, prior and MCMC settings.
//! * [`priors`] implements horseshoe and hierarchical inverse-Wishart
//!   conditionals.
//! * [`engine`] is the Gibbs sampler.
//! * [`simulator`] generates synthetic cohorts from a known truth.
//! * [`diagnostics`] and [`report`] summarise chains and emit artifacts.
//! * [`oracle`] holds brute-force reference computations used in tests.

pub mod config;
pub mod data;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod parallel;
pub mod priors;
pub mod report;
pub mod simulator;
pub mod spline;
pub mod stats;
pub mod truncnorm;

pub use config::{McmcSettings, ModelConfig, PriorConfig, RunConfig};
pub use data::{Dataset, Observation, OutcomeKind, OutcomeSpec, Position};
pub use engine::{ChainOutput, ParameterState};
pub use error::{Error, Result};
pub use simulator::SimulationTruth;
pub use spline::KnotVector;
