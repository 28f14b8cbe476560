//! Gibbs sampler over the complete parameter state.
//!
//! One sweep runs, in order: count augmentation, missing-value imputation,
//! the collapsed `(α, γ, μ_β)` block, subject slopes, population mean and
//! covariance, a joint rescaling of slope spread and `Σ_β`, per-outcome
//! regressions, free loadings, residual covariance
//! and the covariate-effect shrinkage scales.

mod collapsed;
mod density;
mod expansion;
mod prepared;
mod state;
mod updates;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{McmcSettings, ModelConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};

pub use collapsed::{collapsed_system, update_collapsed, CollapsedSystem};
pub use density::log_joint;
pub use expansion::rescale_slope_spread;
pub use prepared::{PreparedData, NZ};
pub use state::{slope_label, ParamLayout, ParameterState};
pub use updates::{
    augment_counts, impute_missing, update_beta_i, update_gamma_shrinkage, update_loadings, update_outcome_regression,
    update_population, update_sigma_eps,
};

/// Blocks held at their current values instead of being sampled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrozenBlocks {
    pub gamma: bool,
    pub loadings: bool,
    pub sigma_beta: bool,
    pub sigma_eps: bool,
    /// Both horseshoe blocks.
    pub shrinkage: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerOptions {
    /// Run the joint `(α, γ, μ_β)` draw with slopes integrated out.
    pub collapsed_block: bool,
    /// Run the joint rescaling of slope deviations and `Σ_β`.
    pub rescale_slopes: bool,
    pub frozen: FrozenBlocks,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            collapsed_block: true,
            rescale_slopes: true,
            frozen: FrozenBlocks::default(),
        }
    }
}

/// One full Gibbs sweep.
pub fn sweep<R: rand::Rng + ?Sized>(
    state: &mut ParameterState,
    prep: &PreparedData,
    config: &ModelConfig,
    options: &SamplerOptions,
    rng: &mut R,
) -> Result<()> {
    let fr = &options.frozen;
    augment_counts(state, prep, rng)?;
    impute_missing(state, prep, rng)?;
    let factors = if options.collapsed_block {
        Some(update_collapsed(state, prep, config, rng, fr.gamma)?)
    } else {
        None
    };
    update_beta_i(state, prep, rng, factors.as_deref())?;
    update_population(state, prep, rng, fr.sigma_beta, fr.shrinkage)?;
    if !fr.sigma_beta && options.rescale_slopes {
        rescale_slope_spread(state, prep, rng)?;
    }
    update_outcome_regression(state, prep, config, rng, fr.gamma)?;
    if !fr.loadings {
        update_loadings(state, prep, config, rng)?;
    }
    if !fr.sigma_eps {
        update_sigma_eps(state, prep, rng)?;
    }
    if !fr.shrinkage && !fr.gamma {
        update_gamma_shrinkage(state, rng)?;
    }
    Ok(())
}

/// Stored output of one chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub chain: usize,
    pub seed: u64,
    pub layout: ParamLayout,
    /// `n_draws × n_params`.
    pub draws: Vec<Vec<f64>>,
    /// Augmented count values of every stored draw, in
    /// [`PreparedData::count_cells`] order; empty unless requested.
    pub latent: Vec<Vec<f64>>,
    pub final_state: ParameterState,
}

impl ChainOutput {
    pub fn param_names(&self) -> &[String] {
        &self.layout.names
    }

    /// Every stored value of parameter `p`.
    pub fn column(&self, p: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[p]).collect()
    }
}

/// Random stream of chain `chain` under the run seed.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Runs one chain from the least-squares starting state.
pub fn run_chain(
    prep: &PreparedData,
    config: &ModelConfig,
    mcmc: &McmcSettings,
    options: &SamplerOptions,
    chain: usize,
) -> Result<ChainOutput> {
    let state = ParameterState::initialize_from_data(prep, config);
    run_chain_from(prep, config, mcmc, options, chain, state)
}

/// Runs one chain from `state`.
pub fn run_chain_from(
    prep: &PreparedData,
    config: &ModelConfig,
    mcmc: &McmcSettings,
    options: &SamplerOptions,
    chain: usize,
    mut state: ParameterState,
) -> Result<ChainOutput> {
    mcmc.validate()?;
    let layout = ParamLayout::new(prep, config, &mcmc.tracked_subjects)?;
    let mut rng = chain_rng(mcmc.seed, chain);
    let cells = if mcmc.store_latent { prep.count_cells() } else { Vec::new() };
    let mut draws = Vec::with_capacity(mcmc.n_draws());
    let mut latent = Vec::new();
    let d = prep.n_outcomes;
    for it in 1..=mcmc.iterations {
        sweep(&mut state, prep, config, options, &mut rng).map_err(|e| e.at_iteration(it))?;
        if it > mcmc.burn_in && (it - mcmc.burn_in) % mcmc.thin == 0 {
            draws.push(layout.flatten(&state));
            if mcmc.store_latent {
                latent.push(cells.iter().map(|&(o, k)| state.complete[o * d + k]).collect());
            }
        }
    }
    Ok(ChainOutput {
        chain,
        seed: mcmc.seed,
        layout,
        draws,
        latent,
        final_state: state,
    })
}

/// Runs `mcmc.chains` independent chains, in parallel when the `parallel`
/// feature is enabled. Results are identical either way.
pub fn run_chains(
    dataset: &Dataset,
    config: &ModelConfig,
    mcmc: &McmcSettings,
    options: &SamplerOptions,
) -> Result<Vec<ChainOutput>> {
    mcmc.validate()?;
    let prep = PreparedData::new(dataset, config)?;
    let chains: Vec<usize> = (0..mcmc.chains).collect();
    crate::parallel::map(&chains, |&c| run_chain(&prep, config, mcmc, options, c))
        .into_iter()
        .collect()
}

/// Fails unless every chain stored the same number of draws of the same
/// parameters.
pub fn check_chains(chains: &[ChainOutput]) -> Result<()> {
    let first = chains.first().ok_or_else(|| Error::validation("no chains"))?;
    for c in chains {
        if c.layout.names != first.layout.names || c.draws.len() != first.draws.len() {
            return Err(Error::validation("chains disagree in parameters or draw count"));
        }
    }
    Ok(())
}
