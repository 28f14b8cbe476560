//! Model, prior and MCMC configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{self, Channel, OutcomeSpec};
use crate::error::{Error, Result};
use crate::spline::KnotVector;

/// Gaussian prior given by mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Degrees of freedom of the hierarchical inverse-Wishart prior.
    pub iw_df: f64,
    /// Half-t scale of the hierarchical inverse-Wishart prior.
    pub iw_scale: f64,
    /// Prior variance of every intercept.
    pub alpha_variance: f64,
    pub loading_accuracy: NormalPrior,
    pub loading_speed: NormalPrior,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            iw_df: 2.0,
            iw_scale: 25.0,
            alpha_variance: 1e3,
            loading_accuracy: NormalPrior {
                mean: 0.5,
                variance: 0.25,
            },
            loading_speed: NormalPrior {
                mean: -0.5,
                variance: 0.25,
            },
        }
    }
}

impl PriorConfig {
    pub fn loading_prior(&self, channel: Channel) -> NormalPrior {
        match channel {
            Channel::Accuracy => self.loading_accuracy,
            Channel::Speed => self.loading_speed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.iw_df) || !pos(self.iw_scale) || !pos(self.alpha_variance) {
            return Err(Error::validation(
                "prior degrees of freedom, scale and intercept variance must be positive",
            ));
        }
        if !pos(self.loading_accuracy.variance) || !pos(self.loading_speed.variance) {
            return Err(Error::validation("loading prior variances must be positive"));
        }
        Ok(())
    }
}

/// Everything that defines the statistical model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub knots: KnotVector,
    pub outcomes: Vec<OutcomeSpec>,
    pub priors: PriorConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            knots: KnotVector::new(vec![12.0, 15.0, 18.0]).expect("valid default knots"),
            outcomes: data::default_outcomes(),
            priors: PriorConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        data::validate_outcomes(&self.outcomes)?;
        self.priors.validate()
    }

    pub fn n_facets(&self) -> usize {
        self.outcomes.iter().map(|o| o.facet).max().unwrap_or(0)
    }

    pub fn n_segments(&self) -> usize {
        self.knots.n_segments()
    }

    /// Length of a subject's stacked slope vector, `F (K + 1)`.
    pub fn beta_dim(&self) -> usize {
        self.n_facets() * self.n_segments()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
    /// Keep the augmented count values of every stored draw.
    pub store_latent: bool,
    /// Subjects whose slope vectors are recorded in the draws.
    pub tracked_subjects: Vec<String>,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burn_in: 10_000,
            thin: 10,
            chains: 4,
            seed: 1,
            store_latent: false,
            tracked_subjects: Vec::new(),
        }
    }
}

impl McmcSettings {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in > self.iterations {
            return Err(Error::validation(format!(
                "burn-in {} exceeds iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::validation("thinning must be at least 1"));
        }
        if self.chains == 0 {
            return Err(Error::validation("at least one chain is required"));
        }
        Ok(())
    }

    /// Number of stored draws per chain.
    pub fn n_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Top-level configuration file: model, sampler and (for `simulate`)
/// the simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub mcmc: McmcSettings,
    pub simulation: crate::simulator::SimulationSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.mcmc.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}
