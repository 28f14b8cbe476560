//! Synthetic cohorts drawn forward from a known truth.
//!
//! The default truth takes the population slopes, intercepts and covariate
//! effects reported for the soccer cohort and the per-outcome missingness
//! rates of that study. Slope covariance, residual covariance and the free
//! loadings were never reported; their defaults here are simulation knobs.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::data::{encode_covariates, Dataset, COVARIATE_NAMES, LoadingConstraint, Observation, Position, Subject, N_COVARIATES};
use crate::error::{Error, Result};
use crate::engine::slope_label;
use crate::linalg;
use crate::spline::{basis_vector, KnotVector};
use crate::truncnorm::round_count;

/// Facet-1 and facet-2 population slopes before, between and after the
/// knots 12, 15 and 18.
pub const DEFAULT_MU_BETA: [[f64; 4]; 2] = [[28.59, 24.86, 6.51, 8.52], [0.48, 0.95, 0.11, 0.07]];

pub const DEFAULT_ALPHA: [f64; 10] = [141.08, 0.01, -1.26, -0.64, 81.85, -0.49, -0.44, 28.44, 22.93, 1.03];

/// Rows `(post_season, forward, midfielder, defender)` per outcome.
pub const DEFAULT_GAMMA: [[f64; N_COVARIATES]; 10] = [
    [1.43, 0.0, 0.0, -0.01],
    [-0.03, 0.0, 0.0, 0.0],
    [-0.09, 0.0, -0.04, 0.0],
    [-0.02, 0.0, 0.0, 0.0],
    [-0.22, 0.06, 0.02, -0.34],
    [-0.04, 0.0, 0.0, 0.0],
    [-0.04, 0.0, 0.0, 0.0],
    [0.01, -0.02, 0.02, 0.0],
    [0.15, -0.60, 0.23, 0.27],
    [-0.01, -0.05, -0.06, -0.04],
];

pub const DEFAULT_MISSINGNESS: [f64; 10] = [0.03, 0.03, 0.03, 0.07, 0.03, 0.48, 0.48, 0.44, 0.22, 0.22];

/// Free loadings of the default truth (fixed entries are 1).
pub const DEFAULT_LOADINGS: [f64; 10] = [1.0, -0.002, -0.002, -0.002, 0.2, -0.002, -0.002, 1.0, 0.5, -0.02];

/// Residual standard deviations of the default truth.
pub const DEFAULT_RESIDUAL_SD: [f64; 10] = [5.0, 0.08, 0.08, 0.08, 4.0, 0.08, 0.08, 1.5, 1.5, 0.03];

/// Generating parameter values. Matrices are row-major nested vectors so
/// the sidecar file stays readable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthParameters {
    pub mu_beta: Vec<f64>,
    pub sigma_beta: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<[f64; N_COVARIATES]>,
    pub loadings: Vec<f64>,
    pub sigma_eps: Vec<Vec<f64>>,
}

/// Panel layout of a simulated cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortDesign {
    pub n_subjects: usize,
    /// Base ages are uniform on `[base_age_min, base_age_max)`.
    pub base_age_min: f64,
    pub base_age_max: f64,
    /// Session times relative to the base age, in years.
    pub session_offsets: Vec<f64>,
    /// Sessions past this age are not held.
    pub max_age: f64,
    /// Probability of leaving the cohort after each session.
    pub dropout: f64,
    /// Forward, midfielder, defender, goalkeeper.
    pub position_probs: [f64; 4],
}

impl Default for CohortDesign {
    fn default() -> Self {
        Self {
            n_subjects: 304,
            base_age_min: 10.0,
            base_age_max: 18.5,
            session_offsets: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5],
            max_age: 21.0,
            dropout: 0.1,
            position_probs: [0.2, 0.3, 0.3, 0.2],
        }
    }
}

impl CohortDesign {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::validation("cohort needs at least one subject"));
        }
        if !(self.base_age_min < self.base_age_max) || self.base_age_min <= 5.0 || self.max_age >= 40.0 {
            return Err(Error::validation("base age range must be increasing and inside (5, 40)"));
        }
        if self.base_age_max > self.max_age {
            return Err(Error::validation("base ages must not exceed the maximum session age"));
        }
        if self.session_offsets.first() != Some(&0.0) || self.session_offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("session offsets must start at 0 and increase"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::validation("dropout probability must lie in [0, 1)"));
        }
        let s: f64 = self.position_probs.iter().sum();
        if self.position_probs.iter().any(|&p| p < 0.0) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::validation("position probabilities must be non-negative and sum to 1"));
        }
        Ok(())
    }
}

/// The `simulation` section of a run configuration. Unset parts fall back
/// to the default truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub design: CohortDesign,
    pub missingness: Option<Vec<f64>>,
    pub parameters: Option<TruthParameters>,
}

/// Everything needed to regenerate a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationTruth {
    pub model: ModelConfig,
    pub parameters: TruthParameters,
    pub design: CohortDesign,
    pub missingness: Vec<f64>,
    pub seed: u64,
}

/// Diagonal slope covariance with sd a quarter of each population slope,
/// floored at 0.05.
pub fn default_sigma_beta(mu: &[f64]) -> Vec<Vec<f64>> {
    let n = mu.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { (0.25 * mu[i].abs()).max(0.05).powi(2) } else { 0.0 })
                .collect()
        })
        .collect()
}

fn diag(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    (0..n).map(|i| (0..n).map(|j| if i == j { v[i] } else { 0.0 }).collect()).collect()
}

/// Default parameters adapted to `model`: the published values for the
/// ten-outcome battery, slopes truncated or padded with the last value when
/// the knot count differs, and neutral values for other batteries.
pub fn default_parameters(model: &ModelConfig) -> TruthParameters {
    let b = model.n_segments();
    let f = model.n_facets();
    let mut mu = Vec::with_capacity(f * b);
    for facet in 0..f {
        let src = DEFAULT_MU_BETA.get(facet).unwrap_or(&DEFAULT_MU_BETA[0]);
        for k in 0..b {
            mu.push(src[k.min(3)]);
        }
    }
    let sigma_beta = default_sigma_beta(&mu);
    let d = model.outcomes.len();
    if model.outcomes == crate::data::default_outcomes() {
        TruthParameters {
            mu_beta: mu,
            sigma_beta,
            alpha: DEFAULT_ALPHA.to_vec(),
            gamma: DEFAULT_GAMMA.to_vec(),
            loadings: DEFAULT_LOADINGS.to_vec(),
            sigma_eps: diag(&DEFAULT_RESIDUAL_SD.map(|s| s * s)),
        }
    } else {
        TruthParameters {
            mu_beta: mu,
            sigma_beta,
            alpha: vec![0.0; d],
            gamma: vec![[0.0; N_COVARIATES]; d],
            loadings: model
                .outcomes
                .iter()
                .map(|o| match o.loading {
                    LoadingConstraint::FixedToOne => 1.0,
                    LoadingConstraint::Free => model.priors.loading_prior(o.channel).mean,
                })
                .collect(),
            sigma_eps: diag(&vec![1.0; d]),
        }
    }
}

/// The default truth: a cohort of 304 subjects, knots (12, 15, 18).
pub fn default_truth() -> SimulationTruth {
    let model = ModelConfig::default();
    SimulationTruth {
        parameters: default_parameters(&model),
        model,
        design: CohortDesign::default(),
        missingness: DEFAULT_MISSINGNESS.to_vec(),
        seed: 1,
    }
}

impl SimulationTruth {
    /// Truth for `model` with the overrides in `spec`.
    pub fn from_spec(model: &ModelConfig, spec: &SimulationSpec, seed: u64) -> Result<Self> {
        let d = model.outcomes.len();
        let missingness = match &spec.missingness {
            Some(m) => m.clone(),
            None if model.outcomes == crate::data::default_outcomes() => DEFAULT_MISSINGNESS.to_vec(),
            None => vec![0.0; d],
        };
        let t = Self {
            model: model.clone(),
            parameters: spec.parameters.clone().unwrap_or_else(|| default_parameters(model)),
            design: spec.design.clone(),
            missingness,
            seed,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.design.validate()?;
        let p = &self.parameters;
        let d = self.model.outcomes.len();
        let q = self.model.beta_dim();
        let square = |m: &Vec<Vec<f64>>, n: usize| m.len() == n && m.iter().all(|r| r.len() == n);
        if p.mu_beta.len() != q || !square(&p.sigma_beta, q) {
            return Err(Error::validation(format!("truth slopes must have dimension {q}")));
        }
        if p.alpha.len() != d || p.gamma.len() != d || p.loadings.len() != d || !square(&p.sigma_eps, d) {
            return Err(Error::validation(format!("truth outcome parameters must have {d} entries")));
        }
        for (o, c) in self.model.outcomes.iter().zip(&p.loadings) {
            if o.loading == LoadingConstraint::FixedToOne && *c != 1.0 {
                return Err(Error::validation(format!("loading of {} is fixed to one", o.label)));
            }
        }
        for m in [&p.sigma_beta, &p.sigma_eps] {
            if !linalg::is_psd(&to_matrix(m)) {
                return Err(Error::validation("truth covariances must be symmetric positive semidefinite"));
            }
        }
        if self.missingness.len() != d || self.missingness.iter().any(|&m| !(0.0..=1.0).contains(&m)) {
            return Err(Error::validation(format!("need {d} missingness probabilities in [0, 1]")));
        }
        Ok(())
    }

    pub fn sigma_beta(&self) -> DMatrix<f64> {
        to_matrix(&self.parameters.sigma_beta)
    }

    pub fn sigma_eps(&self) -> DMatrix<f64> {
        to_matrix(&self.parameters.sigma_eps)
    }

    /// Measurement-model mean for one occasion given a slope vector.
    pub fn mean(&self, beta: &[f64], age: f64, post_season: bool, position: Position) -> Result<Vec<f64>> {
        let basis = basis_vector(age, &self.model.knots)?;
        let x = encode_covariates(post_season, position);
        let b = basis.len();
        let p = &self.parameters;
        Ok(self
            .model
            .outcomes
            .iter()
            .enumerate()
            .map(|(d, o)| {
                let f = o.facet - 1;
                let zeta = crate::spline::dot(&basis, &beta[f * b..(f + 1) * b]);
                p.alpha[d] + (0..N_COVARIATES).map(|j| x[j] * p.gamma[d][j]).sum::<f64>() + p.loadings[d] * zeta
            })
            .collect())
    }

    /// Every free scalar of the truth under the parameter names used in
    /// chain draws. Fixed loadings are left out.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let p = &self.parameters;
        let b = self.model.n_segments();
        let q = p.mu_beta.len();
        let labels: Vec<&str> = self.model.outcomes.iter().map(|o| o.label.as_str()).collect();
        let mut out = Vec::new();
        for (j, v) in p.mu_beta.iter().enumerate() {
            out.push((format!("mu_beta.{}", slope_label(j, b)), *v));
        }
        for i in 0..q {
            for j in i..q {
                let name = format!("sigma_beta.{}.{}", slope_label(i, b), slope_label(j, b));
                out.push((name, p.sigma_beta[i][j]));
            }
        }
        for (l, v) in labels.iter().zip(&p.alpha) {
            out.push((format!("alpha.{l}"), *v));
        }
        for (l, g) in labels.iter().zip(&p.gamma) {
            for (c, v) in COVARIATE_NAMES.iter().zip(g) {
                out.push((format!("gamma.{l}.{c}"), *v));
            }
        }
        for ((o, l), v) in self.model.outcomes.iter().zip(&labels).zip(&p.loadings) {
            if o.loading == LoadingConstraint::Free {
                out.push((format!("loading.{l}"), *v));
            }
        }
        for i in 0..labels.len() {
            for j in i..labels.len() {
                out.push((format!("sigma_eps.{}.{}", labels[i], labels[j]), p.sigma_eps[i][j]));
            }
        }
        out
    }

    pub fn knots(&self) -> &KnotVector {
        &self.model.knots
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("truth serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

fn to_matrix(m: &[Vec<f64>]) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j])
}

/// Hidden values behind one simulated occasion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentOccasion {
    pub session: u32,
    pub age: f64,
    pub mean: Vec<f64>,
    /// Outcome values before rounding and masking.
    pub y_star: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSubject {
    pub id: String,
    pub beta: Vec<f64>,
    pub occasions: Vec<LatentOccasion>,
}

/// Everything the simulator drew that the dataset does not show.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRecord {
    pub subjects: Vec<LatentSubject>,
}

fn draw_position<R: Rng + ?Sized>(probs: &[f64; 4], rng: &mut R) -> Position {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (p, pos) in probs.iter().zip(Position::ALL) {
        acc += p;
        if u < acc {
            return pos;
        }
    }
    Position::Goalkeeper
}

/// Draws a cohort: slopes, session schedule, noisy outcomes, rounding of
/// count outcomes and completely-at-random masking.
pub fn gen_cohort<R: Rng + ?Sized>(truth: &SimulationTruth, rng: &mut R) -> Result<(Dataset, LatentRecord)> {
    truth.validate()?;
    let design = &truth.design;
    let q = truth.model.beta_dim();
    let d = truth.model.outcomes.len();
    let a_beta = linalg::psd_factor(&truth.sigma_beta());
    let a_eps = linalg::psd_factor(&truth.sigma_eps());
    let mu = DVector::from_column_slice(&truth.parameters.mu_beta);
    let width = (design.n_subjects as f64).log10().floor() as usize + 1;
    let mut subjects = Vec::with_capacity(design.n_subjects);
    let mut latent = Vec::with_capacity(design.n_subjects);
    for i in 0..design.n_subjects {
        let id = format!("S{:0width$}", i + 1, width = width.max(3));
        let z = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta: Vec<f64> = (&mu + &a_beta * z).iter().copied().collect();
        let base = rng.random_range(design.base_age_min..design.base_age_max);
        let position = draw_position(&design.position_probs, rng);
        let season_offset = rng.random_range(0..2u32);
        let mut obs = Vec::new();
        let mut occ = Vec::new();
        for (s, off) in design.session_offsets.iter().enumerate() {
            let age = base + off;
            if age > design.max_age {
                break;
            }
            let post_season = (s as u32 + season_offset) % 2 == 1;
            let mean = truth.mean(&beta, age, post_season, position)?;
            let e = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let noise = &a_eps * e;
            let y_star: Vec<f64> = mean.iter().zip(noise.iter()).map(|(m, n)| m + n).collect();
            let mut values = Vec::with_capacity(d);
            for (k, spec) in truth.model.outcomes.iter().enumerate() {
                let v = if spec.is_count() { round_count(y_star[k])? as f64 } else { y_star[k] };
                let masked = rng.random::<f64>() < truth.missingness[k];
                values.push((!masked).then_some(v));
            }
            obs.push(Observation {
                session: s as u32 + 1,
                age,
                position,
                post_season,
                values,
            });
            occ.push(LatentOccasion {
                session: s as u32 + 1,
                age,
                mean,
                y_star,
            });
            if s + 1 < design.session_offsets.len() && rng.random::<f64>() < design.dropout {
                break;
            }
        }
        subjects.push(Subject { id: id.clone(), observations: obs });
        latent.push(LatentSubject { id, beta, occasions: occ });
    }
    let dataset = Dataset::new(truth.model.outcomes.clone(), subjects)?;
    Ok((dataset, LatentRecord { subjects: latent }))
}

/// [`gen_cohort`] with the truth's own seed.
pub fn simulate(truth: &SimulationTruth) -> Result<(Dataset, LatentRecord)> {
    let mut rng = ChaCha8Rng::seed_from_u64(truth.seed);
    gen_cohort(truth, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_truth_values() {
        let t = default_truth();
        assert_eq!(&t.parameters.mu_beta[4..], &[0.48, 0.95, 0.11, 0.07]);
        assert_eq!(t.parameters.alpha[0], 141.08);
        assert_eq!(t.missingness[7], 0.44);
        assert_eq!(t.parameters.gamma[9][1], -0.05);
        assert_eq!(t.design.n_subjects, 304);
        t.validate().unwrap();
    }

    #[test]
    fn deterministic_given_seed() {
        let t = default_truth();
        let (a, la) = simulate(&t).unwrap();
        let (b, lb) = simulate(&t).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn counts_are_rounded_latent_values() {
        let t = default_truth();
        let (ds, lat) = simulate(&t).unwrap();
        for (s, ls) in ds.subjects().iter().zip(&lat.subjects) {
            assert_eq!(s.id, ls.id);
            for o in &s.observations {
                let lo = ls.occasions.iter().find(|l| l.session == o.session).unwrap();
                for (k, spec) in t.model.outcomes.iter().enumerate() {
                    if let Some(v) = o.values[k] {
                        if spec.is_count() {
                            assert_eq!(v, round_count(lo.y_star[k]).unwrap() as f64);
                        } else {
                            assert_eq!(v, lo.y_star[k]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_noise_gives_population_curve() {
        let mut t = default_truth();
        t.parameters.sigma_beta = diag(&[0.0; 8]);
        t.parameters.sigma_eps = diag(&[0.0; 10]);
        t.missingness = vec![0.0; 10];
        t.design.n_subjects = 20;
        let (_, lat) = simulate(&t).unwrap();
        for s in &lat.subjects {
            assert_eq!(s.beta, t.parameters.mu_beta);
            for o in &s.occasions {
                assert_eq!(o.mean, o.y_star);
            }
        }
    }

    #[test]
    fn full_masking_removes_outcome() {
        let mut t = default_truth();
        t.missingness[5] = 1.0;
        t.design.n_subjects = 50;
        let (ds, _) = simulate(&t).unwrap();
        assert!(ds.occasions().all(|(_, o)| o.values[5].is_none()));
    }

    #[test]
    fn schedule_respects_design() {
        let t = default_truth();
        let (ds, _) = simulate(&t).unwrap();
        for s in ds.subjects() {
            assert!(!s.observations.is_empty());
            let pos = s.observations[0].position;
            for o in &s.observations {
                assert!(o.age >= 10.0 && o.age <= 21.0);
                assert_eq!(o.position, pos);
            }
            for w in s.observations.windows(2) {
                if w[1].session == w[0].session + 1 {
                    assert_ne!(w[0].post_season, w[1].post_season);
                }
            }
        }
    }

    #[test]
    fn truth_round_trips_through_json() {
        let t = default_truth();
        assert_eq!(SimulationTruth::from_json(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn knot_count_changes_pad_slopes() {
        let mut m = ModelConfig::default();
        m.knots = KnotVector::new(vec![12.0, 15.0, 18.0, 20.0]).unwrap();
        let p = default_parameters(&m);
        assert_eq!(&p.mu_beta[..5], &[28.59, 24.86, 6.51, 8.52, 8.52]);
        m.knots = KnotVector::new(vec![12.0]).unwrap();
        assert_eq!(default_parameters(&m).mu_beta, vec![28.59, 24.86, 0.48, 0.95]);
    }

    #[test]
    fn named_values_follow_draw_layout() {
        let t = default_truth();
        let v = t.named_values();
        // 8 slopes, 36 slope covariances, 10 intercepts, 40 effects,
        // 8 free loadings, 55 residual covariances
        assert_eq!(v.len(), 157);
        assert_eq!(v[0], ("mu_beta.f1s0".to_string(), 28.59));
        assert!(v.iter().any(|(n, x)| n == "gamma.y10.midfielder" && *x == -0.06));
        assert!(!v.iter().any(|(n, _)| n == "loading.y1"));
    }
}
