//! Full-conditional updates making up one Gibbs sweep.
//!
//! Every update conditions on the complete-data matrix (observed values,
//! augmented counts and imputed cells) so the residual precision `Ω = Σ_ε⁻¹`
//! couples outcomes only through the scalar conditional
//! `y_d | y_{-d} ~ N(m_d − Ω_dd⁻¹ Σ_{k≠d} Ω_dk e_k, Ω_dd⁻¹)`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::config::ModelConfig;
use crate::data::N_COVARIATES;
use crate::engine::prepared::{PreparedData, NZ};
use crate::engine::state::ParameterState;
use crate::error::{Error, Result};
use crate::linalg;
use crate::truncnorm::{count_bucket, sample_truncated_normal};

pub(crate) fn precision_of(sigma: &DMatrix<f64>, update: &'static str) -> Result<DMatrix<f64>> {
    linalg::spd_inverse(sigma).ok_or_else(|| Error::numerical(update, "covariance is not positive definite"))
}

/// Residuals `e_o = y_o − m_o` for every occasion, `n_occ × D` row-major.
pub(crate) fn residuals(state: &ParameterState, prep: &PreparedData) -> Vec<f64> {
    let d = prep.n_outcomes;
    let mut e = vec![0.0; prep.n_occasions() * d];
    let mut m = vec![0.0; d];
    for o in 0..prep.n_occasions() {
        state.mean_into(prep, o, &mut m);
        let row = state.complete_row(o);
        for k in 0..d {
            e[o * d + k] = row[k] - m[k];
        }
    }
    e
}

/// Rows `Ω_d· / Ω_dd` with the diagonal zeroed, `D × D` row-major.
fn shift_weights(omega: &DMatrix<f64>) -> Vec<f64> {
    let d = omega.nrows();
    let mut w = vec![0.0; d * d];
    for a in 0..d {
        for c in 0..d {
            if a != c {
                w[a * d + c] = omega[(a, c)] / omega[(a, a)];
            }
        }
    }
    w
}

/// `Ω_dd⁻¹ Σ_{k≠d} Ω_dk e_k`: the shift of outcome `d`'s conditional mean
/// implied by the other residuals.
#[inline]
fn cross_shift(weights: &[f64], e: &[f64], d: usize) -> f64 {
    let n = e.len();
    crate::spline::dot(&weights[d * n..(d + 1) * n], e)
}

/// Redraws the latent value behind every observed count from its normal
/// full conditional truncated to the count's rounding bucket.
pub fn augment_counts<R: Rng + ?Sized>(state: &mut ParameterState, prep: &PreparedData, rng: &mut R) -> Result<()> {
    if !prep.is_count.iter().any(|&c| c) {
        return Ok(());
    }
    let d = prep.n_outcomes;
    let omega = precision_of(&state.sigma_eps, "augment_counts")?;
    let weights = shift_weights(&omega);
    let mut m = vec![0.0; d];
    let mut e = vec![0.0; d];
    for o in 0..prep.n_occasions() {
        let has_count = (0..d).any(|k| prep.is_count[k] && !prep.is_missing(o, k));
        if !has_count {
            continue;
        }
        state.mean_into(prep, o, &mut m);
        for k in 0..d {
            e[k] = state.complete[o * d + k] - m[k];
        }
        for k in 0..d {
            if !prep.is_count[k] || prep.is_missing(o, k) {
                continue;
            }
            let cm = m[k] - cross_shift(&weights, &e, k);
            let (lo, hi) = count_bucket(prep.observed[o * d + k]);
            let y = sample_truncated_normal(cm, 1.0 / omega[(k, k)], lo, hi, rng)?;
            state.complete[o * d + k] = y;
            e[k] = y - m[k];
        }
    }
    Ok(())
}

struct MissingPattern {
    miss: Vec<usize>,
    obs: Vec<usize>,
    /// `Σ_MO Σ_OO⁻¹`.
    gain: DMatrix<f64>,
    /// Lower Cholesky factor of `Σ_MM − Σ_MO Σ_OO⁻¹ Σ_OM`.
    chol: DMatrix<f64>,
}

fn missing_pattern(mask: u64, sigma: &DMatrix<f64>) -> Result<MissingPattern> {
    let d = sigma.nrows();
    let (miss, obs): (Vec<usize>, Vec<usize>) = (0..d).partition(|&k| mask >> k & 1 == 1);
    let s_mm = sigma.select_rows(&miss).select_columns(&miss);
    let fail = || Error::numerical("impute_missing", "conditional covariance is not positive definite");
    let (gain, cond) = if obs.is_empty() {
        (DMatrix::zeros(miss.len(), 0), s_mm)
    } else {
        let s_oo = sigma.select_rows(&obs).select_columns(&obs);
        let s_mo = sigma.select_rows(&miss).select_columns(&obs);
        let chol = s_oo.cholesky().ok_or_else(fail)?;
        let gain = chol.solve(&s_mo.transpose()).transpose();
        let mut cond = s_mm - &gain * s_mo.transpose();
        linalg::symmetrize(&mut cond);
        (gain, cond)
    };
    let chol = linalg::cholesky(&cond).ok_or_else(fail)?;
    Ok(MissingPattern { miss, obs, gain, chol })
}

/// Draws every missing cell from its Gaussian conditional given the
/// observed (or augmented) cells of the same occasion. Observed cells are
/// never touched.
pub fn impute_missing<R: Rng + ?Sized>(state: &mut ParameterState, prep: &PreparedData, rng: &mut R) -> Result<()> {
    let d = prep.n_outcomes;
    let mut patterns: HashMap<u64, MissingPattern> = HashMap::new();
    let mut m = vec![0.0; d];
    let mut cond_mean = vec![0.0; d];
    let mut noise = vec![0.0; d];
    for o in 0..prep.n_occasions() {
        let mask = prep.missing[o];
        if mask == 0 {
            continue;
        }
        let pat = match patterns.entry(mask) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(missing_pattern(mask, &state.sigma_eps)?),
        };
        let nm = pat.miss.len();
        state.mean_into(prep, o, &mut m);
        let row = &state.complete[o * d..(o + 1) * d];
        for (b, &k) in pat.miss.iter().enumerate() {
            cond_mean[b] = m[k];
        }
        for (a, &k) in pat.obs.iter().enumerate() {
            let r = row[k] - m[k];
            for b in 0..nm {
                cond_mean[b] += pat.gain[(b, a)] * r;
            }
        }
        for v in noise[..nm].iter_mut() {
            *v = rng.sample(rand_distr::StandardNormal);
        }
        for (b, &k) in pat.miss.iter().enumerate() {
            let mut v = cond_mean[b];
            for c in 0..=b {
                v += pat.chol[(b, c)] * noise[c];
            }
            state.complete[o * d + k] = v;
        }
    }
    Ok(())
}

/// `M = Lᵀ Ω L` (F × F) and `Lᵀ Ω` (F × D) where `L[d, f(d)] = c_d`.
pub(crate) fn loading_products(
    state: &ParameterState,
    prep: &PreparedData,
    omega: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (d, f) = (prep.n_outcomes, prep.n_facets);
    let mut lt_omega = DMatrix::zeros(f, d);
    for k in 0..d {
        let fk = prep.facet_of[k];
        for j in 0..d {
            lt_omega[(fk, j)] += state.loadings[k] * omega[(k, j)];
        }
    }
    let mut m = DMatrix::zeros(f, f);
    for j in 0..d {
        let fj = prep.facet_of[j];
        for a in 0..f {
            m[(a, fj)] += lt_omega[(a, j)] * state.loadings[j];
        }
    }
    linalg::symmetrize(&mut m);
    (m, lt_omega)
}

/// Posterior precision of `β_i` ignoring the population term:
/// `M ⊗ Σ_t b bᵀ`.
pub(crate) fn kron_bb(m: &DMatrix<f64>, s_bb: &[f64], b: usize) -> DMatrix<f64> {
    let f = m.nrows();
    DMatrix::from_fn(f * b, f * b, |r, c| m[(r / b, c / b)] * s_bb[(r % b) * b + c % b])
}

/// `Σ_t (Lᵀ Ω r_t) ⊗ b_t` for the occasions of subject `i`, where `r_t` is
/// the complete row minus intercepts and covariate effects.
fn slope_linear_term(
    state: &ParameterState,
    prep: &PreparedData,
    lt_omega: &DMatrix<f64>,
    i: usize,
    remove_regression: bool,
) -> DVector<f64> {
    let (d, f, b) = (prep.n_outcomes, prep.n_facets, prep.n_segments);
    let mut g = DVector::zeros(f * b);
    let mut r = vec![0.0; d];
    for o in prep.subject_occ[i].clone() {
        let z = prep.z_row(o);
        let row = state.complete_row(o);
        for k in 0..d {
            r[k] = row[k];
            if remove_regression {
                r[k] -= state.alpha[k];
                let gk = state.gamma_row(k);
                for j in 0..N_COVARIATES {
                    r[k] -= z[j + 1] * gk[j];
                }
            }
        }
        let bv = prep.basis_row(o);
        for a in 0..f {
            let mut v = 0.0;
            for k in 0..d {
                v += lt_omega[(a, k)] * r[k];
            }
            for s in 0..b {
                g[a * b + s] += v * bv[s];
            }
        }
    }
    g
}

pub(crate) fn slope_linear_raw(
    state: &ParameterState,
    prep: &PreparedData,
    lt_omega: &DMatrix<f64>,
    i: usize,
) -> DVector<f64> {
    slope_linear_term(state, prep, lt_omega, i, false)
}

/// Draws each subject's slope vector from its Gaussian full conditional.
///
/// `factors` may carry precomputed Cholesky factors of the per-subject
/// precision `Σ_β⁻¹ + M ⊗ Σ_t b bᵀ`, which do not depend on intercepts,
/// covariate effects or `μ_β`.
pub fn update_beta_i<R: Rng + ?Sized>(
    state: &mut ParameterState,
    prep: &PreparedData,
    rng: &mut R,
    factors: Option<&[nalgebra::Cholesky<f64, nalgebra::Dyn>]>,
) -> Result<()> {
    let q = prep.beta_dim();
    let b = prep.n_segments;
    let omega = precision_of(&state.sigma_eps, "update_beta_i")?;
    let sb_inv = precision_of(&state.sigma_beta, "update_beta_i")?;
    let prior_lin = &sb_inv * &state.mu_beta;
    let (m, lt_omega) = loading_products(state, prep, &omega);
    for i in 0..prep.n_subjects() {
        let h = &prior_lin + slope_linear_term(state, prep, &lt_omega, i, true);
        let owned;
        let chol = match factors {
            Some(f) => &f[i],
            None => {
                let p = &sb_inv + kron_bb(&m, &prep.s_bb[i], b);
                owned = p.cholesky().ok_or_else(|| {
                    Error::numerical("update_beta_i", format!("slope precision of subject {i} is not positive definite"))
                })?;
                &owned
            }
        };
        let mean = chol.solve(&h);
        let z = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::numerical("update_beta_i", "singular slope precision"))?;
        let draw = mean + noise;
        if draw.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("update_beta_i", format!("non-finite slope draw for subject {i}")));
        }
        state.beta[i * q..(i + 1) * q].copy_from_slice(draw.as_slice());
    }
    Ok(())
}

/// Draws `μ_β`, then `Σ_β` with its auxiliary scales, then the horseshoe
/// scales of `μ_β`.
pub fn update_population<R: Rng + ?Sized>(
    state: &mut ParameterState,
    prep: &PreparedData,
    rng: &mut R,
    freeze_sigma: bool,
    freeze_shrinkage: bool,
) -> Result<()> {
    let n = prep.n_subjects();
    if n < 2 {
        return Err(Error::validation(format!("population update needs at least 2 subjects, got {n}")));
    }
    let q = prep.beta_dim();
    let sb_inv = precision_of(&state.sigma_beta, "update_population")?;
    let mut precision = &sb_inv * n as f64;
    for j in 0..q {
        precision[(j, j)] += 1.0 / state.hs_mu.prior_variance(j);
    }
    let mut sum = DVector::zeros(q);
    for i in 0..n {
        sum += DVector::from_column_slice(state.beta_row(i));
    }
    let linear = &sb_inv * sum;
    state.mu_beta = linalg::sample_gaussian_canonical(&precision, &linear, rng)
        .ok_or_else(|| Error::numerical("update_population", "population mean precision is not positive definite"))?;
    if !freeze_sigma {
        let mut scatter = DMatrix::zeros(q, q);
        for i in 0..n {
            let r = DVector::from_column_slice(state.beta_row(i)) - &state.mu_beta;
            scatter.ger(1.0, &r, &r, 1.0);
        }
        linalg::symmetrize(&mut scatter);
        state.sigma_beta = state.iw_beta.update(&scatter, n, rng).map_err(|e| rename(e, "update_population"))?;
    }
    if !freeze_shrinkage {
        let mu: Vec<f64> = state.mu_beta.iter().copied().collect();
        state.hs_mu.update(&mu, rng)?;
    }
    Ok(())
}

/// Draws `(α_d, γ_d)` for each outcome in turn from its Gaussian full
/// conditional given every other outcome's residual.
pub fn update_outcome_regression<R: Rng + ?Sized>(
    state: &mut ParameterState,
    prep: &PreparedData,
    config: &ModelConfig,
    rng: &mut R,
    freeze_gamma: bool,
) -> Result<()> {
    let d = prep.n_outcomes;
    let n_occ = prep.n_occasions();
    let omega = precision_of(&state.sigma_eps, "update_outcome_regression")?;
    let weights = shift_weights(&omega);
    let mut e = residuals(state, prep);
    let alpha_prec = 1.0 / config.priors.alpha_variance;
    let mut t = vec![0.0; n_occ];
    for k in 0..d {
        let fk = prep.facet_of[k];
        for o in 0..n_occ {
            let row = &e[o * d..(o + 1) * d];
            let zeta = state.zeta(prep, o, fk);
            t[o] = state.complete[o * d + k] - state.loadings[k] * zeta + cross_shift(&weights, row, k);
        }
        let w = omega[(k, k)];
        if freeze_gamma {
            let mut s = 0.0;
            let g = state.gamma_row(k).to_vec();
            for (o, to) in t.iter().enumerate() {
                let z = prep.z_row(o);
                s += to - (0..N_COVARIATES).map(|j| z[j + 1] * g[j]).sum::<f64>();
            }
            let prec = w * n_occ as f64 + alpha_prec;
            let mean = w * s / prec;
            state.alpha[k] = mean + rng.sample::<f64, _>(rand_distr::StandardNormal) / prec.sqrt();
        } else {
            let mut precision = DMatrix::zeros(NZ, NZ);
            for a in 0..NZ {
                for c in 0..NZ {
                    precision[(a, c)] = w * prep.s_zz_total[a * NZ + c];
                }
            }
            precision[(0, 0)] += alpha_prec;
            for j in 0..N_COVARIATES {
                precision[(j + 1, j + 1)] += 1.0 / state.hs_gamma[k].prior_variance(j);
            }
            let mut linear = DVector::zeros(NZ);
            for (o, to) in t.iter().enumerate() {
                let z = prep.z_row(o);
                for a in 0..NZ {
                    linear[a] += w * z[a] * to;
                }
            }
            let theta = linalg::sample_gaussian_canonical(&precision, &linear, rng).ok_or_else(|| {
                Error::numerical(
                    "update_outcome_regression",
                    format!("regression precision of outcome {k} is not positive definite"),
                )
            })?;
            state.alpha[k] = theta[0];
            state.gamma[k * N_COVARIATES..(k + 1) * N_COVARIATES].copy_from_slice(&theta.as_slice()[1..]);
        }
        let g = state.gamma_row(k).to_vec();
        for o in 0..n_occ {
            let z = prep.z_row(o);
            let mean = state.alpha[k]
                + (0..N_COVARIATES).map(|j| z[j + 1] * g[j]).sum::<f64>()
                + state.loadings[k] * state.zeta(prep, o, fk);
            e[o * d + k] = state.complete[o * d + k] - mean;
        }
    }
    Ok(())
}

/// Draws every free loading from its scalar Gaussian full conditional.
pub fn update_loadings<R: Rng + ?Sized>(
    state: &mut ParameterState,
    prep: &PreparedData,
    config: &ModelConfig,
    rng: &mut R,
) -> Result<()> {
    let d = prep.n_outcomes;
    let omega = precision_of(&state.sigma_eps, "update_loadings")?;
    let weights = shift_weights(&omega);
    let mut e = residuals(state, prep);
    for k in 0..d {
        if !prep.free_loading[k] {
            continue;
        }
        let prior = config.priors.loading_prior(config.outcomes[k].channel);
        let fk = prep.facet_of[k];
        let w = omega[(k, k)];
        let (mut szz, mut szt) = (0.0, 0.0);
        let g = state.gamma_row(k).to_vec();
        let mut zetas = Vec::with_capacity(prep.n_occasions());
        for o in 0..prep.n_occasions() {
            let z = prep.z_row(o);
            let zeta = state.zeta(prep, o, fk);
            let reg = state.alpha[k] + (0..N_COVARIATES).map(|j| z[j + 1] * g[j]).sum::<f64>();
            let t = state.complete[o * d + k] - reg + cross_shift(&weights, &e[o * d..(o + 1) * d], k);
            szz += zeta * zeta;
            szt += zeta * t;
            zetas.push((zeta, reg));
        }
        let prec = w * szz + 1.0 / prior.variance;
        let mean = (w * szt + prior.mean / prior.variance) / prec;
        let c = mean + rng.sample::<f64, _>(rand_distr::StandardNormal) / prec.sqrt();
        if !c.is_finite() {
            return Err(Error::numerical("update_loadings", format!("non-finite loading for outcome {k}")));
        }
        state.loadings[k] = c;
        for (o, (zeta, reg)) in zetas.into_iter().enumerate() {
            e[o * d + k] = state.complete[o * d + k] - reg - c * zeta;
        }
    }
    Ok(())
}

/// Draws `Σ_ε` and its auxiliary scales from the complete-data residuals.
pub fn update_sigma_eps<R: Rng + ?Sized>(state: &mut ParameterState, prep: &PreparedData, rng: &mut R) -> Result<()> {
    let d = prep.n_outcomes;
    let e = residuals(state, prep);
    let mut scatter = DMatrix::zeros(d, d);
    for row in e.chunks_exact(d) {
        for a in 0..d {
            for c in a..d {
                scatter[(a, c)] += row[a] * row[c];
            }
        }
    }
    for a in 0..d {
        for c in 0..a {
            scatter[(a, c)] = scatter[(c, a)];
        }
    }
    state.sigma_eps = state
        .iw_eps
        .update(&scatter, prep.n_occasions(), rng)
        .map_err(|e| rename(e, "update_sigma_eps"))?;
    Ok(())
}

/// Refreshes the horseshoe scales of every covariate-effect block.
pub fn update_gamma_shrinkage<R: Rng + ?Sized>(state: &mut ParameterState, rng: &mut R) -> Result<()> {
    for k in 0..state.n_outcomes() {
        let g = state.gamma_row(k).to_vec();
        state.hs_gamma[k].update(&g, rng)?;
    }
    Ok(())
}

fn rename(e: Error, update: &'static str) -> Error {
    match e {
        Error::Numerical { iteration, detail, .. } => Error::Numerical { update, iteration, detail },
        other => other,
    }
}
