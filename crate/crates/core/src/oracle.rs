//! Brute-force reference computations for testing the sampler on tiny
//! problems. Nothing here is used by the sampler itself.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::config::{ModelConfig, PriorConfig};
use crate::data::{
    Channel, Dataset, LoadingConstraint, Observation, OutcomeKind, OutcomeSpec, Position, Subject, N_COVARIATES,
};
use crate::engine::{chain_rng, sweep, FrozenBlocks, ParamLayout, ParameterState, PreparedData, SamplerOptions};
use crate::error::{Error, Result};
use crate::priors::{HierIwState, HorseshoeState};
use crate::simulator::{LatentRecord, SimulationTruth};
use crate::spline::{basis_vector, KnotVector};
use crate::stats::{normal_cdf, normal_pdf};

/// Measurement-model mean of every outcome at one occasion, computed from
/// the model definition without the sampler's cached design.
pub fn residual_mean(
    state: &ParameterState,
    config: &ModelConfig,
    dataset: &Dataset,
    subject: usize,
    occasion: usize,
) -> Result<Vec<f64>> {
    let obs = &dataset.subjects()[subject].observations[occasion];
    let basis = basis_vector(obs.age, &config.knots)?;
    let b = basis.len();
    let x = obs.covariates();
    let beta = state.beta_row(subject);
    Ok(config
        .outcomes
        .iter()
        .enumerate()
        .map(|(d, o)| {
            let f = o.facet - 1;
            let mut zeta = 0.0;
            for k in 0..b {
                zeta += basis[k] * beta[f * b + k];
            }
            let mut m = state.alpha[d] + state.loadings[d] * zeta;
            for j in 0..N_COVARIATES {
                m += x[j] * state.gamma[d * N_COVARIATES + j];
            }
            m
        })
        .collect())
}

/// Mean and variance of `N(mean, var)` truncated to `(lower, upper]`.
pub fn truncated_normal_moments(mean: f64, var: f64, lower: f64, upper: f64) -> (f64, f64) {
    let s = var.sqrt();
    let a = (lower - mean) / s;
    let b = (upper - mean) / s;
    let (pa, pb) = (normal_pdf(a), normal_pdf(b));
    let z = normal_cdf(b) - normal_cdf(a);
    let ta = if a.is_finite() { a * pa } else { 0.0 };
    let tb = if b.is_finite() { b * pb } else { 0.0 };
    let r = (pa - pb) / z;
    (mean + s * r, var * (1.0 + (ta - tb) / z - r * r))
}

/// One continuous outcome with a fixed unit loading on one facet, a single
/// knot at 12 and every occasion before the knot, so each response is
/// `α + ω β_{i0} + ε`. Slope covariance, residual variance and the prior
/// variance of `μ_β` are held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyModel {
    /// Ages per subject, all below 12.
    pub ages: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Slope covariance (2 × 2).
    pub sigma_beta: [[f64; 2]; 2],
    pub sigma_eps: f64,
    pub alpha_variance: f64,
    /// Prior variance of each `μ_β` component.
    pub mu_variance: f64,
}

/// Posterior moments of `(μ_0, α)` from grid integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPosterior {
    pub mean_mu0: f64,
    pub mean_alpha: f64,
    pub sd_mu0: f64,
    pub sd_alpha: f64,
}

impl TinyModel {
    pub fn example() -> Self {
        Self {
            ages: vec![vec![10.2, 11.1], vec![10.7, 11.6], vec![11.3]],
            y: vec![vec![3.1, 4.4], vec![2.2, 2.9], vec![5.0]],
            sigma_beta: [[0.09, 0.0], [0.0, 0.25]],
            sigma_eps: 0.5,
            alpha_variance: 1e3,
            mu_variance: 4.0,
        }
    }

    /// `log p(y | μ_0, α) + log p(μ_0) + log p(α)` with every slope
    /// integrated out. Only the early-segment slope enters the data, and
    /// each subject's covariance `s ω ωᵀ + σ² I` is inverted by the
    /// Sherman–Morrison formula.
    pub fn log_posterior(&self, mu0: f64, alpha: f64) -> f64 {
        let s = self.sigma_beta[0][0];
        let v = self.sigma_eps;
        let mut lp = -0.5 * mu0 * mu0 / self.mu_variance - 0.5 * alpha * alpha / self.alpha_variance;
        for (w, y) in self.ages.iter().zip(&self.y) {
            let ww: f64 = w.iter().map(|x| x * x).sum();
            let denom = v + s * ww;
            let r: Vec<f64> = w.iter().zip(y).map(|(wi, yi)| yi - alpha - wi * mu0).collect();
            let rr: f64 = r.iter().map(|x| x * x).sum();
            let wr: f64 = w.iter().zip(&r).map(|(a, b)| a * b).sum();
            let quad = (rr - s * wr * wr / denom) / v;
            let logdet = (w.len() as f64 - 1.0) * v.ln() + denom.ln();
            lp += -0.5 * quad - 0.5 * logdet;
        }
        lp
    }

    /// Posterior moments of `(μ_0, α)` by integrating over a rectangular
    /// grid of `n × n` points. A coarse pass over ±8 prior sd locates the
    /// mass; the fine grid then covers it with a wide margin.
    pub fn grid_posterior(&self, n: usize) -> GridPosterior {
        let mut lo = [-8.0 * self.mu_variance.sqrt(), -8.0 * self.alpha_variance.sqrt()];
        let mut hi = [-lo[0], -lo[1]];
        for _ in 0..6 {
            let pts = 400;
            let mut best = f64::NEG_INFINITY;
            let mut vals = vec![0.0; pts * pts];
            let step = [(hi[0] - lo[0]) / (pts - 1) as f64, (hi[1] - lo[1]) / (pts - 1) as f64];
            for i in 0..pts {
                for j in 0..pts {
                    let l = self.log_posterior(lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1]);
                    vals[i * pts + j] = l;
                    best = best.max(l);
                }
            }
            let (mut a0, mut a1, mut b0, mut b1) = (usize::MAX, usize::MAX, 0, 0);
            for i in 0..pts {
                for j in 0..pts {
                    if vals[i * pts + j] > best - 40.0 {
                        a0 = a0.min(i);
                        b0 = b0.max(i);
                        a1 = a1.min(j);
                        b1 = b1.max(j);
                    }
                }
            }
            let nlo = [lo[0] + a0.saturating_sub(2) as f64 * step[0], lo[1] + a1.saturating_sub(2) as f64 * step[1]];
            let nhi = [
                lo[0] + (b0 + 2).min(pts - 1) as f64 * step[0],
                lo[1] + (b1 + 2).min(pts - 1) as f64 * step[1],
            ];
            lo = nlo;
            hi = nhi;
        }
        let step = [(hi[0] - lo[0]) / (n - 1) as f64, (hi[1] - lo[1]) / (n - 1) as f64];
        let mut vals = vec![0.0; n * n];
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                let l = self.log_posterior(lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1]);
                vals[i * n + j] = l;
                best = best.max(l);
            }
        }
        let (mut z, mut m0, mut m1, mut s0, mut s1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let x0 = lo[0] + i as f64 * step[0];
            for j in 0..n {
                let x1 = lo[1] + j as f64 * step[1];
                let w = (vals[i * n + j] - best).exp();
                z += w;
                m0 += w * x0;
                m1 += w * x1;
                s0 += w * x0 * x0;
                s1 += w * x1 * x1;
            }
        }
        let (m0, m1) = (m0 / z, m1 / z);
        GridPosterior {
            mean_mu0: m0,
            mean_alpha: m1,
            sd_mu0: (s0 / z - m0 * m0).max(0.0).sqrt(),
            sd_alpha: (s1 / z - m1 * m1).max(0.0).sqrt(),
        }
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            knots: KnotVector::new(vec![12.0]).expect("valid knot"),
            outcomes: vec![OutcomeSpec {
                label: "y".into(),
                description: String::new(),
                kind: OutcomeKind::Continuous,
                channel: Channel::Accuracy,
                facet: 1,
                loading: LoadingConstraint::FixedToOne,
            }],
            priors: PriorConfig {
                alpha_variance: self.alpha_variance,
                ..PriorConfig::default()
            },
        }
    }

    pub fn dataset(&self) -> Result<Dataset> {
        let subjects = self
            .ages
            .iter()
            .zip(&self.y)
            .enumerate()
            .map(|(i, (ages, ys))| Subject {
                id: format!("s{i}"),
                observations: ages
                    .iter()
                    .zip(ys)
                    .enumerate()
                    .map(|(t, (&age, &y))| Observation {
                        session: t as u32 + 1,
                        age,
                        position: Position::Goalkeeper,
                        post_season: false,
                        values: vec![Some(y)],
                    })
                    .collect(),
            })
            .collect();
        Dataset::new(self.config().outcomes, subjects)
    }

    /// Starting state with the fixed blocks set to the model's values.
    pub fn initial_state(&self, prep: &PreparedData) -> ParameterState {
        let cfg = self.config();
        let mut s = ParameterState::initialize(prep, &cfg);
        s.sigma_beta = DMatrix::from_fn(2, 2, |i, j| self.sigma_beta[i][j]);
        s.sigma_eps = DMatrix::from_element(1, 1, self.sigma_eps);
        s.hs_mu.tau2 = self.mu_variance;
        s.hs_mu.lambda2 = vec![1.0; 2];
        s
    }

    pub fn sampler_options(collapsed_block: bool) -> SamplerOptions {
        SamplerOptions {
            collapsed_block,
            rescale_slopes: false,
            frozen: FrozenBlocks {
                gamma: true,
                loadings: true,
                sigma_beta: true,
                sigma_eps: true,
                shrinkage: true,
            },
        }
    }
}

/// Forward draw of every parameter from the prior: shrinkage scales, the
/// two covariances with their auxiliaries, population and subject slopes,
/// intercepts, covariate effects and free loadings.
pub fn sample_prior_state<R: Rng + ?Sized>(
    prep: &PreparedData,
    config: &ModelConfig,
    rng: &mut R,
) -> Result<ParameterState> {
    let mut s = ParameterState::initialize(prep, config);
    let q = prep.beta_dim();
    let d = prep.n_outcomes;
    let pr = &config.priors;
    let (hs, mu) = HorseshoeState::sample_prior(q, rng);
    s.hs_mu = hs;
    s.mu_beta = nalgebra::DVector::from_vec(mu);
    let (iw, sb) = HierIwState::sample_prior(q, pr.iw_df, pr.iw_scale, rng)?;
    s.iw_beta = iw;
    s.sigma_beta = sb;
    let (iw, se) = HierIwState::sample_prior(d, pr.iw_df, pr.iw_scale, rng)?;
    s.iw_eps = iw;
    s.sigma_eps = se;
    let a = crate::linalg::psd_factor(&s.sigma_beta);
    for i in 0..prep.n_subjects() {
        let z = nalgebra::DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = &s.mu_beta + &a * z;
        s.beta[i * q..(i + 1) * q].copy_from_slice(b.as_slice());
    }
    let alpha_sd = pr.alpha_variance.sqrt();
    for k in 0..d {
        s.alpha[k] = alpha_sd * rng.sample::<f64, _>(StandardNormal);
        let (hs, g) = HorseshoeState::sample_prior(N_COVARIATES, rng);
        s.hs_gamma[k] = hs;
        s.gamma[k * N_COVARIATES..(k + 1) * N_COVARIATES].copy_from_slice(&g);
        if prep.free_loading[k] {
            let p = pr.loading_prior(config.outcomes[k].channel);
            s.loadings[k] = Normal::new(p.mean, p.variance.sqrt()).expect("valid prior").sample(rng);
        }
    }
    Ok(s)
}

/// Draws a fresh complete-data matrix `y ~ N(m, Σ_ε)` for every occasion
/// given the parameters in `state`, `n_occ × D` row-major.
pub fn simulate_complete<R: Rng + ?Sized>(state: &ParameterState, prep: &PreparedData, rng: &mut R) -> Vec<f64> {
    let d = prep.n_outcomes;
    let a = crate::linalg::psd_factor(&state.sigma_eps);
    let mut out = vec![0.0; prep.n_occasions() * d];
    let mut m = vec![0.0; d];
    for o in 0..prep.n_occasions() {
        state.mean_into(prep, o, &mut m);
        let z = nalgebra::DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let e = &a * z;
        for k in 0..d {
            out[o * d + k] = m[k] + e[k];
        }
    }
    out
}

/// Unpenalised least-squares covariate effects per outcome: each outcome's
/// observed values regressed on an intercept, the covariates and the
/// population basis of its facet, ignoring subject-level variation.
pub fn least_squares_effects(dataset: &Dataset, config: &ModelConfig) -> Result<Vec<[f64; N_COVARIATES]>> {
    let b = config.n_segments();
    let p = 1 + N_COVARIATES + b;
    let mut out = Vec::with_capacity(dataset.n_outcomes());
    for k in 0..dataset.n_outcomes() {
        let mut xtx = DMatrix::<f64>::zeros(p, p);
        let mut xty = nalgebra::DVector::<f64>::zeros(p);
        let mut n = 0;
        for (_, o) in dataset.occasions() {
            let Some(y) = o.values[k] else { continue };
            let mut row = vec![1.0];
            row.extend(o.covariates());
            row.extend(basis_vector(o.age, &config.knots)?);
            let x = nalgebra::DVector::from_vec(row);
            xtx += &x * x.transpose();
            xty += &x * y;
            n += 1;
        }
        let coef = xtx
            .cholesky()
            .map(|c| c.solve(&xty))
            .ok_or_else(|| Error::validation(format!("outcome {} has a rank-deficient design ({n} rows)", k + 1)))?;
        let mut g = [0.0; N_COVARIATES];
        g.copy_from_slice(&coef.as_slice()[1..1 + N_COVARIATES]);
        out.push(g);
    }
    Ok(out)
}

/// Two subjects, two continuous outcomes on one facet (the first with a
/// fixed unit loading), one knot at 12 and one missing cell. Small enough
/// for millions of sweeps.
pub fn geweke_model(priors: PriorConfig) -> Result<(ModelConfig, Dataset)> {
    let outcome = |label: &str, loading| OutcomeSpec {
        label: label.into(),
        description: String::new(),
        kind: OutcomeKind::Continuous,
        channel: Channel::Accuracy,
        facet: 1,
        loading,
    };
    let config = ModelConfig {
        knots: KnotVector::new(vec![12.0]).expect("valid knot"),
        outcomes: vec![
            outcome("y1", LoadingConstraint::FixedToOne),
            outcome("y2", LoadingConstraint::Free),
        ],
        priors,
    };
    let obs = |session, age, position, post_season, values| Observation {
        session,
        age,
        position,
        post_season,
        values,
    };
    let subjects = vec![
        Subject {
            id: "a".into(),
            observations: vec![
                obs(1, 10.5, Position::Forward, false, vec![Some(0.0), Some(0.0)]),
                obs(2, 11.5, Position::Forward, true, vec![Some(0.0), Some(0.0)]),
                obs(3, 13.0, Position::Forward, false, vec![Some(0.0), Some(0.0)]),
            ],
        },
        Subject {
            id: "b".into(),
            observations: vec![
                obs(1, 11.0, Position::Goalkeeper, true, vec![Some(0.0), None]),
                obs(2, 14.0, Position::Goalkeeper, false, vec![Some(0.0), Some(0.0)]),
            ],
        },
    ];
    let dataset = Dataset::new(config.outcomes.clone(), subjects)?;
    Ok((config, dataset))
}

/// Draws of the two Geweke samplers, flattened in [`ParamLayout`] order.
#[derive(Debug, Clone)]
pub struct GewekeDraws {
    pub names: Vec<String>,
    /// Independent joint draws of the parameters from the prior.
    pub forward: Vec<Vec<f64>>,
    /// Successive-conditional chain: a sweep given the data, then fresh
    /// data given the parameters.
    pub successive: Vec<Vec<f64>>,
}

/// Runs both samplers. Both marginally target the prior, so any
/// disagreement points at a conditional that does not match the joint.
pub fn geweke(
    prep: &PreparedData,
    config: &ModelConfig,
    options: &SamplerOptions,
    n_forward: usize,
    n_successive: usize,
    thin: usize,
    seed: u64,
) -> Result<GewekeDraws> {
    let layout = ParamLayout::new(prep, config, &[])?;
    let mut rng = chain_rng(seed, 0);
    let forward = (0..n_forward)
        .map(|_| sample_prior_state(prep, config, &mut rng).map(|s| layout.flatten(&s)))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = chain_rng(seed, 1);
    let mut state = sample_prior_state(prep, config, &mut rng)?;
    state.complete = simulate_complete(&state, prep, &mut rng);
    let mut successive = Vec::with_capacity(n_successive);
    let mut it = 0;
    while successive.len() < n_successive {
        it += 1;
        sweep(&mut state, prep, config, options, &mut rng).map_err(|e| e.at_iteration(it))?;
        state.complete = simulate_complete(&state, prep, &mut rng);
        if it % thin == 0 {
            successive.push(layout.flatten(&state));
        }
    }
    Ok(GewekeDraws {
        names: layout.names,
        forward,
        successive,
    })
}

/// State holding the simulation truth: slopes, intercepts, covariate
/// effects, loadings and both covariances, with the simulator's values
/// before rounding and masking as the complete data. The auxiliary scales of
/// both covariance priors start at their conditional means given the true
/// covariances, and the horseshoe scales at the means of their conditionals
/// given the true coefficients.
pub fn state_from_truth(
    truth: &SimulationTruth,
    latent: &LatentRecord,
    dataset: &Dataset,
    prep: &PreparedData,
) -> Result<ParameterState> {
    let config = &truth.model;
    let mut s = ParameterState::initialize(prep, config);
    let p = &truth.parameters;
    let q = prep.beta_dim();
    let d = prep.n_outcomes;
    s.mu_beta = nalgebra::DVector::from_column_slice(&p.mu_beta);
    s.sigma_beta = truth.sigma_beta();
    s.sigma_eps = truth.sigma_eps();
    s.alpha = nalgebra::DVector::from_column_slice(&p.alpha);
    s.loadings = nalgebra::DVector::from_column_slice(&p.loadings);
    for k in 0..d {
        s.gamma[k * N_COVARIATES..(k + 1) * N_COVARIATES].copy_from_slice(&p.gamma[k]);
        settle_horseshoe(&mut s.hs_gamma[k], &p.gamma[k])?;
    }
    settle_horseshoe(&mut s.hs_mu, &p.mu_beta)?;
    for (iw, sigma) in [(&mut s.iw_beta, &s.sigma_beta), (&mut s.iw_eps, &s.sigma_eps)] {
        for _ in 0..50 {
            let aux = iw.aux_conditional(sigma)?;
            for (a, ig) in iw.a.iter_mut().zip(aux) {
                *a = ig.mean().unwrap_or(*a);
            }
        }
    }
    let mut o = 0;
    for (i, subj) in dataset.subjects().iter().enumerate() {
        let lat = latent
            .subjects
            .iter()
            .find(|l| l.id == subj.id)
            .ok_or_else(|| Error::validation(format!("no latent record for subject {}", subj.id)))?;
        s.beta[i * q..(i + 1) * q].copy_from_slice(&lat.beta);
        for obs in &subj.observations {
            let occ = lat
                .occasions
                .iter()
                .find(|l| l.session == obs.session)
                .ok_or_else(|| Error::validation(format!("no latent occasion {} for {}", obs.session, subj.id)))?;
            s.complete[o * d..(o + 1) * d].copy_from_slice(&occ.y_star);
            o += 1;
        }
    }
    Ok(s)
}

/// Fixed-point iteration of the horseshoe scales on their conditional means
/// given `coeffs`.
fn settle_horseshoe(hs: &mut HorseshoeState, coeffs: &[f64]) -> Result<()> {
    for _ in 0..50 {
        let c = crate::priors::horseshoe_conditional_params(coeffs, hs)?;
        for (l, ig) in hs.lambda2.iter_mut().zip(&c.lambda2) {
            *l = ig.scale / ig.shape;
        }
        for (n, ig) in hs.nu.iter_mut().zip(&c.nu) {
            *n = ig.scale / ig.shape;
        }
        hs.tau2 = c.tau2.scale / c.tau2.shape;
        hs.xi = c.xi.scale / c.xi.shape;
    }
    Ok(())
}
