use nalgebra::{DMatrix, DVector};

use crate::config::ModelConfig;
use crate::data::{COVARIATE_NAMES, N_COVARIATES};
use crate::engine::prepared::{PreparedData, NZ};
use crate::error::{Error, Result};
use crate::linalg;
use crate::priors::{HierIwState, HorseshoeState};
use crate::stats;

/// One complete MCMC state.
///
/// Slope vectors are stacked facet-major: `β_i = (β_{i,1}, …, β_{i,F})`
/// with `K + 1` segment slopes per facet. The complete-data matrix holds the
/// observed value for observed continuous cells, the augmented latent value
/// for observed count cells, and the current imputation for missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterState {
    /// `n_subjects × q`, row-major.
    pub beta: Vec<f64>,
    pub mu_beta: DVector<f64>,
    pub sigma_beta: DMatrix<f64>,
    pub alpha: DVector<f64>,
    /// `D × N_COVARIATES`, row-major.
    pub gamma: Vec<f64>,
    pub loadings: DVector<f64>,
    pub sigma_eps: DMatrix<f64>,
    /// `n_occ × D`, row-major.
    pub complete: Vec<f64>,
    pub hs_mu: HorseshoeState,
    pub hs_gamma: Vec<HorseshoeState>,
    pub iw_beta: HierIwState,
    pub iw_eps: HierIwState,
}

impl ParameterState {
    /// Neutral deterministic starting point: intercepts at observed means, free
    /// loadings at their prior means, zero slopes, identity `Σ_β`, diagonal
    /// `Σ_ε` from observed variances, counts at bucket midpoints and missing
    /// cells at outcome means.
    pub fn initialize(prep: &PreparedData, config: &ModelConfig) -> Self {
        let d = prep.n_outcomes;
        let q = prep.beta_dim();
        let n_occ = prep.n_occasions();
        let mut means = vec![0.0; d];
        let mut vars = vec![1.0; d];
        for k in 0..d {
            let col: Vec<f64> = (0..n_occ).filter_map(|o| prep.value(o, k)).collect();
            if !col.is_empty() {
                means[k] = stats::mean(&col);
            }
            if col.len() > 1 {
                let v = stats::variance(&col);
                if v > 0.0 && v.is_finite() {
                    vars[k] = v;
                }
            }
        }
        let mut complete = vec![0.0; n_occ * d];
        for o in 0..n_occ {
            for k in 0..d {
                complete[o * d + k] = match prep.value(o, k) {
                    Some(y) if prep.is_count[k] => {
                        if y <= 0.0 {
                            -0.5
                        } else {
                            y - 0.5
                        }
                    }
                    Some(y) => y,
                    None => means[k],
                };
            }
        }
        let loadings = DVector::from_iterator(
            d,
            config.outcomes.iter().map(|o| match o.loading {
                crate::data::LoadingConstraint::FixedToOne => 1.0,
                crate::data::LoadingConstraint::Free => config.priors.loading_prior(o.channel).mean,
            }),
        );
        let pr = &config.priors;
        Self {
            beta: vec![0.0; prep.n_subjects() * q],
            mu_beta: DVector::zeros(q),
            sigma_beta: DMatrix::identity(q, q),
            alpha: DVector::from_vec(means),
            gamma: vec![0.0; d * N_COVARIATES],
            loadings,
            sigma_eps: DMatrix::from_diagonal(&DVector::from_vec(vars)),
            complete,
            hs_mu: HorseshoeState::new(q),
            hs_gamma: (0..d).map(|_| HorseshoeState::new(N_COVARIATES)).collect(),
            iw_beta: HierIwState::new(q, pr.iw_df, pr.iw_scale),
            iw_eps: HierIwState::new(d, pr.iw_df, pr.iw_scale),
        }
    }

    /// Starting point fitted to the data by least squares.
    ///
    /// Starts from [`initialize`](Self::initialize), then for each facet
    /// regresses its fixed-loading outcome on `(1, x, b(ω))` to set that
    /// outcome's intercept and covariate effects and the facet's population
    /// slopes. Every other outcome is regressed on `(1, x, ζ)` with
    /// `ζ = b(ω)ᵀ μ_β`, giving its intercept, covariate effects and (when
    /// free) loading. Subject slopes start at `μ_β`, `Σ_ε` at the residual
    /// variances, and each horseshoe local scale at `max(1, coef²)`. Any
    /// regression whose normal equations are singular keeps the neutral
    /// values.
    pub fn initialize_from_data(prep: &PreparedData, config: &ModelConfig) -> Self {
        let mut s = Self::initialize(prep, config);
        let d = prep.n_outcomes;
        let b = prep.n_segments;
        let n_occ = prep.n_occasions();
        let nz = NZ;
        let mut anchors = vec![None; prep.n_facets];
        for k in 0..d {
            if !prep.free_loading[k] && anchors[prep.facet_of[k]].is_none() {
                anchors[prep.facet_of[k]] = Some(k);
            }
        }
        let mut resid_var = vec![None; d];
        for (f, anchor) in anchors.iter().enumerate() {
            let Some(k) = *anchor else { continue };
            let fit = least_squares(n_occ, nz + b, |o, row| {
                row[..nz].copy_from_slice(prep.z_row(o));
                row[nz..].copy_from_slice(prep.basis_row(o));
                s.complete[o * d + k]
            });
            if let Some((coef, rv)) = fit {
                s.alpha[k] = coef[0];
                s.gamma[k * N_COVARIATES..(k + 1) * N_COVARIATES].copy_from_slice(&coef[1..nz]);
                for j in 0..b {
                    s.mu_beta[f * b + j] = coef[nz + j];
                }
                resid_var[k] = Some(rv);
            }
        }
        for k in 0..d {
            if resid_var[k].is_some() {
                continue;
            }
            let fk = prep.facet_of[k];
            let free = prep.free_loading[k];
            let mu = s.mu_beta.rows(fk * b, b).clone_owned();
            let zeta = |o: usize| crate::spline::dot(prep.basis_row(o), mu.as_slice());
            let width = if free { nz + 1 } else { nz };
            let fit = least_squares(n_occ, width, |o, row| {
                row[..nz].copy_from_slice(prep.z_row(o));
                let y = s.complete[o * d + k];
                if free {
                    row[nz] = zeta(o);
                    y
                } else {
                    y - s.loadings[k] * zeta(o)
                }
            });
            if let Some((coef, rv)) = fit {
                s.alpha[k] = coef[0];
                s.gamma[k * N_COVARIATES..(k + 1) * N_COVARIATES].copy_from_slice(&coef[1..nz]);
                if free {
                    s.loadings[k] = coef[nz];
                }
                resid_var[k] = Some(rv);
            }
        }
        for (k, rv) in resid_var.iter().enumerate() {
            if let Some(v) = rv {
                if *v > 0.0 && v.is_finite() {
                    s.sigma_eps[(k, k)] = v.max(1e-8 * s.sigma_eps[(k, k)]);
                }
            }
        }
        let q = prep.beta_dim();
        for i in 0..prep.n_subjects() {
            for j in 0..q {
                s.beta[i * q + j] = s.mu_beta[j];
            }
        }
        for j in 0..q {
            s.hs_mu.lambda2[j] = s.mu_beta[j].powi(2).max(1.0);
        }
        for k in 0..d {
            for j in 0..N_COVARIATES {
                s.hs_gamma[k].lambda2[j] = s.gamma[k * N_COVARIATES + j].powi(2).max(1.0);
            }
        }
        s
    }

    pub fn n_outcomes(&self) -> usize {
        self.alpha.len()
    }

    pub fn beta_dim(&self) -> usize {
        self.mu_beta.len()
    }

    #[inline]
    pub fn beta_row(&self, i: usize) -> &[f64] {
        let q = self.beta_dim();
        &self.beta[i * q..(i + 1) * q]
    }

    #[inline]
    pub fn gamma_row(&self, d: usize) -> &[f64] {
        &self.gamma[d * N_COVARIATES..(d + 1) * N_COVARIATES]
    }

    #[inline]
    pub fn complete_row(&self, o: usize) -> &[f64] {
        let d = self.n_outcomes();
        &self.complete[o * d..(o + 1) * d]
    }

    /// Latent facet value `ζ_{i,f}(ω_o)` at occasion `o`.
    #[inline]
    pub fn zeta(&self, prep: &PreparedData, o: usize, facet: usize) -> f64 {
        let b = prep.n_segments;
        let beta = &self.beta_row(prep.occ_subject[o])[facet * b..(facet + 1) * b];
        crate::spline::dot(prep.basis_row(o), beta)
    }

    /// Measurement-model mean at occasion `o` written into `out`.
    pub fn mean_into(&self, prep: &PreparedData, o: usize, out: &mut [f64]) {
        let z = prep.z_row(o);
        let mut zeta = [0.0; crate::data::MAX_FACETS];
        let zeta = &mut zeta[..prep.n_facets];
        for (f, v) in zeta.iter_mut().enumerate() {
            *v = self.zeta(prep, o, f);
        }
        for (d, m) in out.iter_mut().enumerate() {
            let g = self.gamma_row(d);
            let mut acc = self.alpha[d];
            for j in 0..N_COVARIATES {
                acc += z[j + 1] * g[j];
            }
            *m = acc + self.loadings[d] * zeta[prep.facet_of[d]];
        }
    }

    /// Checks the structural invariants: fixed loadings at one, both
    /// covariances positive definite, and augmented counts inside their
    /// buckets.
    pub fn check_invariants(&self, prep: &PreparedData) -> Result<()> {
        for (d, free) in prep.free_loading.iter().enumerate() {
            if !free && self.loadings[d] != 1.0 {
                return Err(Error::validation(format!("fixed loading {d} drifted to {}", self.loadings[d])));
            }
        }
        if linalg::cholesky(&self.sigma_beta).is_none() || linalg::cholesky(&self.sigma_eps).is_none() {
            return Err(Error::validation("covariance lost positive definiteness"));
        }
        let d = prep.n_outcomes;
        for (o, k) in prep.count_cells() {
            let y = prep.observed[o * d + k];
            let h = crate::truncnorm::round_count(self.complete[o * d + k])?;
            if h as f64 != y {
                return Err(Error::validation(format!(
                    "augmented value {} at occasion {o}, outcome {k} rounds to {h}, observed {y}",
                    self.complete[o * d + k]
                )));
            }
        }
        Ok(())
    }
}

/// Where each parameter group lives in a flattened draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub names: Vec<String>,
    pub mu_beta: std::ops::Range<usize>,
    pub sigma_beta: std::ops::Range<usize>,
    pub alpha: std::ops::Range<usize>,
    pub gamma: std::ops::Range<usize>,
    pub loadings: std::ops::Range<usize>,
    pub sigma_eps: std::ops::Range<usize>,
    pub tracked: std::ops::Range<usize>,
    /// Subject indices whose slopes are recorded.
    pub tracked_subjects: Vec<usize>,
}

/// Label of slope component `j` of a stacked slope vector, e.g. `f1s0`.
pub fn slope_label(j: usize, n_segments: usize) -> String {
    format!("f{}s{}", j / n_segments + 1, j % n_segments)
}

impl ParamLayout {
    pub fn new(prep: &PreparedData, config: &ModelConfig, tracked: &[String]) -> Result<Self> {
        let q = prep.beta_dim();
        let b = prep.n_segments;
        let labels: Vec<&str> = config.outcomes.iter().map(|o| o.label.as_str()).collect();
        let mut names = Vec::new();
        let push_range = |names: &mut Vec<String>, items: Vec<String>| {
            let start = names.len();
            names.extend(items);
            start..names.len()
        };
        let mu_beta = push_range(
            &mut names,
            (0..q).map(|j| format!("mu_beta.{}", slope_label(j, b))).collect(),
        );
        let sigma_beta = push_range(
            &mut names,
            upper_pairs(q)
                .map(|(i, j)| format!("sigma_beta.{}.{}", slope_label(i, b), slope_label(j, b)))
                .collect(),
        );
        let alpha = push_range(&mut names, labels.iter().map(|l| format!("alpha.{l}")).collect());
        let gamma = push_range(
            &mut names,
            labels
                .iter()
                .flat_map(|l| COVARIATE_NAMES.iter().map(move |c| format!("gamma.{l}.{c}")))
                .collect(),
        );
        let loadings = push_range(&mut names, labels.iter().map(|l| format!("loading.{l}")).collect());
        let sigma_eps = push_range(
            &mut names,
            upper_pairs(labels.len())
                .map(|(i, j)| format!("sigma_eps.{}.{}", labels[i], labels[j]))
                .collect(),
        );
        let mut tracked_subjects = Vec::new();
        for id in tracked {
            let i = prep
                .subject_ids
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::validation(format!("tracked subject {id} is not in the dataset")))?;
            tracked_subjects.push(i);
        }
        let tracked = push_range(
            &mut names,
            tracked
                .iter()
                .flat_map(|id| (0..q).map(move |j| format!("beta.{id}.{}", slope_label(j, b))))
                .collect(),
        );
        Ok(Self {
            names,
            mu_beta,
            sigma_beta,
            alpha,
            gamma,
            loadings,
            sigma_eps,
            tracked,
            tracked_subjects,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn flatten(&self, state: &ParameterState) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(state.mu_beta.iter());
        let q = state.beta_dim();
        v.extend(upper_pairs(q).map(|(i, j)| state.sigma_beta[(i, j)]));
        v.extend(state.alpha.iter());
        v.extend(state.gamma.iter());
        v.extend(state.loadings.iter());
        v.extend(upper_pairs(state.n_outcomes()).map(|(i, j)| state.sigma_eps[(i, j)]));
        for &i in &self.tracked_subjects {
            v.extend_from_slice(state.beta_row(i));
        }
        debug_assert_eq!(v.len(), self.len());
        v
    }
}

/// Ordinary least squares over `n` rows filled by `row_fn`, which writes the
/// design row and returns the response. Returns the coefficients and the
/// residual variance, or `None` when the normal equations are singular.
fn least_squares(n: usize, p: usize, mut row_fn: impl FnMut(usize, &mut [f64]) -> f64) -> Option<(Vec<f64>, f64)> {
    if n <= p {
        return None;
    }
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut yty = 0.0;
    let mut row = vec![0.0; p];
    for o in 0..n {
        let y = row_fn(o, &mut row);
        for a in 0..p {
            xty[a] += row[a] * y;
            for c in 0..p {
                xtx[(a, c)] += row[a] * row[c];
            }
        }
        yty += y * y;
    }
    let scale = (0..p).map(|a| xtx[(a, a)]).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let chol = xtx.clone().cholesky()?;
    let coef = chol.solve(&xty);
    if coef.iter().any(|c| !c.is_finite()) {
        return None;
    }
    let rss = yty - coef.dot(&xty);
    Some((coef.iter().copied().collect(), rss.max(0.0) / (n - p) as f64))
}

fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i..n).map(move |j| (i, j)))
}
