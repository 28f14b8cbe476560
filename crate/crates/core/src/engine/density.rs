//! Log joint density of the complete-data model, up to a constant.

use nalgebra::DMatrix;

use crate::config::ModelConfig;
use crate::data::N_COVARIATES;
use crate::engine::prepared::PreparedData;
use crate::engine::state::ParameterState;
use crate::engine::updates::residuals;

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((x - mean).powi(2) / var + var.ln())
}

/// `−½ n log|Σ| − ½ Σ rᵀ Σ⁻¹ r` for rows `r` of `rows`; `−∞` when `Σ` is
/// not positive definite.
fn log_gaussian_rows<'a>(sigma: &DMatrix<f64>, rows: impl Iterator<Item = &'a [f64]>) -> f64 {
    let Some(chol) = sigma.clone().cholesky() else {
        return f64::NEG_INFINITY;
    };
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let inv = chol.inverse();
    let p = sigma.nrows();
    let mut lp = 0.0;
    for r in rows {
        let mut q = 0.0;
        for a in 0..p {
            for c in 0..p {
                q += r[a] * inv[(a, c)] * r[c];
            }
        }
        lp -= 0.5 * (q + logdet);
    }
    lp
}

/// Complete-data log likelihood plus every log prior term, including the
/// horseshoe and inverse-Wishart auxiliary scales.
pub fn log_joint(state: &ParameterState, prep: &PreparedData, config: &ModelConfig) -> f64 {
    let d = prep.n_outcomes;
    let q = prep.beta_dim();
    let e = residuals(state, prep);
    let mut lp = log_gaussian_rows(&state.sigma_eps, e.chunks_exact(d));
    let dev: Vec<f64> = (0..prep.n_subjects())
        .flat_map(|i| (0..q).map(move |j| (i, j)))
        .map(|(i, j)| state.beta_row(i)[j] - state.mu_beta[j])
        .collect();
    lp += log_gaussian_rows(&state.sigma_beta, dev.chunks_exact(q));
    for j in 0..q {
        lp += log_normal(state.mu_beta[j], 0.0, state.hs_mu.prior_variance(j));
    }
    for k in 0..d {
        lp += log_normal(state.alpha[k], 0.0, config.priors.alpha_variance);
        for j in 0..N_COVARIATES {
            lp += log_normal(state.gamma[k * N_COVARIATES + j], 0.0, state.hs_gamma[k].prior_variance(j));
        }
        if prep.free_loading[k] {
            let p = config.priors.loading_prior(config.outcomes[k].channel);
            lp += log_normal(state.loadings[k], p.mean, p.variance);
        }
        lp += state.hs_gamma[k].log_prior();
    }
    lp += state.hs_mu.log_prior();
    lp += state.iw_beta.log_prior(&state.sigma_beta);
    lp += state.iw_eps.log_prior(&state.sigma_eps);
    lp
}
