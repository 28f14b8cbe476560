//! Posterior summaries: HPD intervals, split-R̂ and effective sample size,
//! population trajectory bands, covariate tables and Spearman matrices.

use serde::Serialize;

use crate::data::{Dataset, Observation, COVARIATE_NAMES};
use crate::engine::ChainOutput;
use crate::error::{Error, Result};
use crate::spline::{basis_vector, KnotVector};
use crate::stats;

/// Minimum number of draws for an HPD interval.
pub const MIN_HPD_DRAWS: usize = 20;

/// Shortest interval over the sorted draws that holds `⌈level·n⌉` of them;
/// the earliest such window wins ties.
pub fn hpd_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::validation(format!("HPD level {level} must lie in (0, 1)")));
    }
    let n = draws.len();
    if n < MIN_HPD_DRAWS {
        return Err(Error::validation(format!(
            "HPD interval needs at least {MIN_HPD_DRAWS} draws, got {n}"
        )));
    }
    if draws.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("HPD interval of non-finite draws"));
    }
    let mut x = draws.to_vec();
    x.sort_by(f64::total_cmp);
    let k = ((level * n as f64).ceil() as usize).clamp(1, n);
    let mut best = 0;
    let mut width = f64::INFINITY;
    for i in 0..=(n - k) {
        let w = x[i + k - 1] - x[i];
        if w < width {
            width = w;
            best = i;
        }
    }
    Ok((x[best], x[best + k - 1]))
}

/// Draws of several chains, `chains[c][s][p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub names: Vec<String>,
    pub chains: Vec<Vec<Vec<f64>>>,
}

impl Draws {
    pub fn from_chains(chains: &[ChainOutput]) -> Result<Self> {
        crate::engine::check_chains(chains)?;
        Ok(Self {
            names: chains[0].layout.names.clone(),
            chains: chains.iter().map(|c| c.draws.clone()).collect(),
        })
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Per-chain draw sequences of parameter `p`.
    pub fn per_chain(&self, p: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.iter().map(|d| d[p]).collect()).collect()
    }

    /// All draws of parameter `p`, chains concatenated.
    pub fn pooled(&self, p: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.iter().map(move |d| d[p])).collect()
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }
}

/// Effective sample size and split-R̂ of one parameter. `rhat` is `None`
/// when every draw is identical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convergence {
    pub ess: f64,
    pub rhat: Option<f64>,
}

fn split(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    let mut out = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        let h = c.len() / 2;
        out.push(&c[..h]);
        out.push(&c[c.len() - h..]);
    }
    out
}

fn within_between(seqs: &[&[f64]]) -> (f64, f64, f64) {
    let m = seqs.len() as f64;
    let n = seqs[0].len() as f64;
    let means: Vec<f64> = seqs.iter().map(|s| stats::mean(s)).collect();
    let w = seqs.iter().map(|s| stats::variance(s)).sum::<f64>() / m;
    let b = if seqs.len() > 1 { n * stats::variance(&means) } else { 0.0 };
    let var_plus = (n - 1.0) / n * w + b / n;
    (w, b, var_plus)
}

/// Split-chain potential scale reduction.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let seqs = split(chains);
    if seqs.len() < 2 || seqs[0].len() < 2 {
        return None;
    }
    let (w, _, var_plus) = within_between(&seqs);
    if !(w > 0.0) {
        return None;
    }
    Some((var_plus / w).sqrt())
}

fn autocovariance(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for t in 0..n - lag {
        s += (x[t] - mean) * (x[t + lag] - mean);
    }
    s / n as f64
}

/// Multi-chain effective sample size from split chains, with Geyer's
/// initial monotone positive sequence truncation. Capped at the total
/// number of draws; constant input gives the total.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let total: usize = chains.iter().map(Vec::len).sum();
    let seqs = split(chains);
    if seqs.is_empty() || seqs[0].len() < 4 {
        return total as f64;
    }
    let n = seqs[0].len();
    let m = seqs.len();
    let (w, _, var_plus) = within_between(&seqs);
    if !(var_plus > 0.0) || !(w > 0.0) {
        return total as f64;
    }
    let means: Vec<f64> = seqs.iter().map(|s| stats::mean(s)).collect();
    let rho = |lag: usize| -> f64 {
        let acov: f64 = seqs
            .iter()
            .zip(&means)
            .map(|(s, &mu)| autocovariance(s, mu, lag))
            .sum::<f64>()
            / m as f64;
        // chain variances use n − 1; autocovariances use n
        let w_n = w * (n as f64 - 1.0) / n as f64;
        1.0 - (w_n - acov) / var_plus
    };
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let mut p = rho(2 * k) + rho(2 * k + 1);
        if p <= 0.0 {
            break;
        }
        p = p.min(prev);
        prev = p;
        tau += 2.0 * p;
        k += 1;
    }
    let ess = (m * n) as f64 / tau.max(1.0 / ((m * n) as f64).log10());
    ess.min(total as f64)
}

/// ESS and split-R̂ for every parameter. Needs at least two chains of equal
/// length.
pub fn convergence(draws: &Draws) -> Result<Vec<Convergence>> {
    if draws.chains.len() < 2 {
        return Err(Error::validation("convergence diagnostics need at least two chains"));
    }
    let n = draws.chains[0].len();
    if draws.chains.iter().any(|c| c.len() != n) {
        return Err(Error::validation("chains differ in length"));
    }
    if n < 4 {
        return Err(Error::validation("convergence diagnostics need at least 4 draws per chain"));
    }
    Ok((0..draws.n_params()).map(|p| convergence_of(&draws.per_chain(p))).collect())
}

fn convergence_of(chains: &[Vec<f64>]) -> Convergence {
    Convergence {
        ess: effective_sample_size(chains),
        rhat: split_rhat(chains),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub parameter: String,
    pub mean: f64,
    pub sd: f64,
    pub hpd_lo: f64,
    pub hpd_hi: f64,
    pub ess: f64,
    pub rhat: Option<f64>,
}

/// Mean, sd, 95% HPD, ESS and split-R̂ of every parameter. A single chain
/// is split in halves for R̂.
pub fn summarize(draws: &Draws) -> Result<Vec<PosteriorSummary>> {
    if draws.chains.is_empty() || draws.total_draws() == 0 {
        return Err(Error::validation("no draws to summarise"));
    }
    let n = draws.chains[0].len();
    if draws.chains.iter().any(|c| c.len() != n) {
        return Err(Error::validation("chains differ in length"));
    }
    (0..draws.n_params())
        .map(|p| {
            let pooled = draws.pooled(p);
            let (hpd_lo, hpd_hi) = hpd_interval(&pooled, 0.95)?;
            let c = convergence_of(&draws.per_chain(p));
            Ok(PosteriorSummary {
                parameter: draws.names[p].clone(),
                mean: stats::mean(&pooled),
                sd: stats::sd(&pooled),
                hpd_lo,
                hpd_hi,
                ess: c.ess,
                rhat: c.rhat,
            })
        })
        .collect()
}

/// Pointwise population trajectory summary for one facet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryBand {
    /// 1-based facet.
    pub facet: usize,
    pub ages: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub const TRAJECTORY_MIN_AGE: f64 = 10.0;
pub const TRAJECTORY_MAX_AGE: f64 = 21.0;

/// Ages 10.0, 10.1, …, 21.0.
pub fn default_age_grid() -> Vec<f64> {
    (100..=210).map(|i| i as f64 / 10.0).collect()
}

/// Evaluates `b(ω)·μ_β` per draw at every grid age and summarises the
/// values by mean and 95% HPD. With fewer than [`MIN_HPD_DRAWS`] draws the
/// band is the range of the draws.
pub fn trajectory_band(
    mu_draws: &[Vec<f64>],
    knots: &KnotVector,
    n_facets: usize,
    ages: &[f64],
) -> Result<Vec<TrajectoryBand>> {
    if mu_draws.is_empty() {
        return Err(Error::validation("trajectory band needs at least one draw"));
    }
    if ages.is_empty() {
        return Err(Error::validation("empty age grid"));
    }
    if let Some(a) = ages
        .iter()
        .find(|a| !(TRAJECTORY_MIN_AGE..=TRAJECTORY_MAX_AGE).contains(*a))
    {
        return Err(Error::validation(format!(
            "age {a} outside the modelled range [{TRAJECTORY_MIN_AGE}, {TRAJECTORY_MAX_AGE}]"
        )));
    }
    let b = knots.n_segments();
    if mu_draws.iter().any(|d| d.len() != n_facets * b) {
        return Err(Error::validation(format!(
            "each draw must hold {} slopes",
            n_facets * b
        )));
    }
    let bases: Vec<Vec<f64>> = ages
        .iter()
        .map(|&a| basis_vector(a, knots))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(n_facets);
    for f in 0..n_facets {
        let mut band = TrajectoryBand {
            facet: f + 1,
            ages: ages.to_vec(),
            mean: Vec::with_capacity(ages.len()),
            lower: Vec::with_capacity(ages.len()),
            upper: Vec::with_capacity(ages.len()),
        };
        for basis in &bases {
            let vals: Vec<f64> = mu_draws
                .iter()
                .map(|d| crate::spline::dot(basis, &d[f * b..(f + 1) * b]))
                .collect();
            let (lo, hi) = if vals.len() >= MIN_HPD_DRAWS {
                hpd_interval(&vals, 0.95)?
            } else {
                (
                    vals.iter().copied().fold(f64::INFINITY, f64::min),
                    vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            };
            let m = stats::mean(&vals);
            band.mean.push(m);
            band.lower.push(lo.min(m));
            band.upper.push(hi.max(m));
        }
        out.push(band);
    }
    Ok(out)
}

/// One cell of the covariate table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateCell {
    pub outcome: String,
    /// `intercept` or a covariate name.
    pub term: String,
    pub mean: f64,
    pub hpd_lo: f64,
    pub hpd_hi: f64,
    pub hpd_excludes_zero: bool,
}

/// Intercept and covariate effects per outcome, flagging cells whose 95%
/// HPD interval excludes zero.
pub fn covariate_table(summaries: &[PosteriorSummary], outcome_labels: &[String]) -> Result<Vec<CovariateCell>> {
    let find = |name: &str| {
        summaries
            .iter()
            .find(|s| s.parameter == name)
            .ok_or_else(|| Error::validation(format!("summary lacks parameter {name}")))
    };
    let mut out = Vec::new();
    for l in outcome_labels {
        let mut terms = vec![("intercept".to_string(), format!("alpha.{l}"))];
        terms.extend(COVARIATE_NAMES.iter().map(|c| (c.to_string(), format!("gamma.{l}.{c}"))));
        for (term, name) in terms {
            let s = find(&name)?;
            out.push(CovariateCell {
                outcome: l.clone(),
                term,
                mean: s.mean,
                hpd_lo: s.hpd_lo,
                hpd_hi: s.hpd_hi,
                hpd_excludes_zero: s.hpd_lo > 0.0 || s.hpd_hi < 0.0,
            });
        }
    }
    Ok(out)
}

/// Posterior summary of one parameter against its generating value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRow {
    pub parameter: String,
    pub truth: f64,
    pub mean: f64,
    pub sd: f64,
    /// `|mean − truth| / sd`; infinite when the sd is zero and the mean misses.
    pub z: f64,
    pub covered: bool,
}

/// Scores every named truth value against its summary. Coverage uses the
/// 95% HPD interval.
pub fn score_recovery(summaries: &[PosteriorSummary], truth: &[(String, f64)]) -> Result<Vec<RecoveryRow>> {
    truth
        .iter()
        .map(|(name, t)| {
            let s = summaries
                .iter()
                .find(|s| &s.parameter == name)
                .ok_or_else(|| Error::validation(format!("summary lacks parameter {name}")))?;
            let miss = (s.mean - t).abs();
            let z = if miss == 0.0 { 0.0 } else { miss / s.sd };
            Ok(RecoveryRow {
                parameter: name.clone(),
                truth: *t,
                mean: s.mean,
                sd: s.sd,
                z,
                covered: s.hpd_lo <= *t && *t <= s.hpd_hi,
            })
        })
        .collect()
}

/// Share of rows whose interval covers the truth.
pub fn coverage_rate(rows: &[RecoveryRow]) -> f64 {
    rows.iter().filter(|r| r.covered).count() as f64 / rows.len().max(1) as f64
}

/// Spearman correlations between outcomes; `None` where a pair has fewer
/// than three jointly observed occasions or no variation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpearmanMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

pub const MIN_SPEARMAN_PAIRS: usize = 3;

/// Rank correlation of two equally long samples with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < MIN_SPEARMAN_PAIRS {
        return None;
    }
    stats::pearson(&stats::average_ranks(x), &stats::average_ranks(y))
}

/// Pairwise-complete Spearman matrix over the occasions accepted by `filter`.
pub fn spearman_matrix(dataset: &Dataset, filter: impl Fn(&Observation) -> bool) -> SpearmanMatrix {
    let rows: Vec<&Observation> = dataset.occasions().map(|(_, o)| o).filter(|o| filter(o)).collect();
    let d = dataset.n_outcomes();
    let mut values = vec![vec![None; d]; d];
    for a in 0..d {
        for b in a..d {
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter_map(|o| Some((o.values[a]?, o.values[b]?)))
                .unzip();
            let r = if a == b {
                (xs.len() >= MIN_SPEARMAN_PAIRS && stats::variance(&xs) > 0.0).then_some(1.0)
            } else {
                spearman(&xs, &ys)
            };
            values[a][b] = r;
            values[b][a] = r;
        }
    }
    SpearmanMatrix {
        labels: dataset.outcomes().iter().map(|o| o.label.clone()).collect(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_draws(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn hpd_exhaustive_window() {
        let x: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(hpd_interval(&x, 0.95).unwrap(), (1.0, 95.0));
        assert_eq!(hpd_interval(&[7.0; 30], 0.95).unwrap(), (7.0, 7.0));
        assert!(hpd_interval(&x[..10], 0.95).is_err());
        assert!(hpd_interval(&x, 1.0).is_err());
    }

    #[test]
    fn hpd_of_normal_sample() {
        let (lo, hi) = hpd_interval(&normal_draws(100_000, 1), 0.95).unwrap();
        assert!((lo + 1.96).abs() < 0.05 && (hi - 1.96).abs() < 0.05, "{lo} {hi}");
    }

    #[test]
    fn rhat_and_ess_behaviour() {
        let a = normal_draws(5000, 2);
        let same = split_rhat(&[a.clone(), a.clone()]).unwrap();
        assert!((same - 1.0).abs() < 0.01);
        let shifted: Vec<f64> = normal_draws(5000, 3).iter().map(|v| v + 10.0).collect();
        assert!(split_rhat(&[a.clone(), shifted]).unwrap() > 1.2);
        let ess = effective_sample_size(&[a.clone()]);
        assert!((ess / 5000.0 - 1.0).abs() < 0.1, "{ess}");
        let constant = vec![vec![1.0; 100], vec![1.0; 100]];
        assert_eq!(effective_sample_size(&constant), 200.0);
        assert!(split_rhat(&constant).is_none());
    }

    #[test]
    fn ess_detects_autocorrelation() {
        let e = normal_draws(20_000, 4);
        let mut x = vec![0.0; e.len()];
        for t in 1..e.len() {
            x[t] = 0.9 * x[t - 1] + e[t];
        }
        // AR(1) with φ = 0.9: n (1 − φ)/(1 + φ) ≈ n / 19
        let ess = effective_sample_size(&[x]);
        assert!(ess > 20_000.0 / 19.0 * 0.7 && ess < 20_000.0 / 19.0 * 1.3, "{ess}");
    }

    #[test]
    fn band_at_truth() {
        let knots = KnotVector::new(vec![12.0, 15.0, 18.0]).unwrap();
        let mu = vec![vec![28.59, 24.86, 6.51, 8.52, 0.48, 0.95, 0.11, 0.07]];
        let b = trajectory_band(&mu, &knots, 2, &[15.0]).unwrap();
        assert!((b[0].mean[0] - 417.66).abs() < 1e-9);
        assert_eq!(b[0].lower, b[0].mean);
        assert!(trajectory_band(&mu, &knots, 2, &[9.0]).is_err());
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 2.0, 4.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        // ranks x: 1, 2.5, 2.5, 4; ranks y: 1, 3, 2, 4
        let rx = [1.0, 2.5, 2.5, 4.0];
        let ry = [1.0, 3.0, 2.0, 4.0];
        let mx = 2.5;
        let my = 2.5;
        let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
        let syy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
        let expect = sxy / (sxx * syy).sqrt();
        assert!((spearman(&x, &y).unwrap() - expect).abs() < 1e-12);
        assert_eq!(spearman(&x, &x), Some(1.0));
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(spearman(&x, &neg), Some(-1.0));
        assert_eq!(spearman(&x[..2], &y[..2]), None);
    }

    #[test]
    fn recovery_scoring() {
        let row = |name: &str, mean: f64| PosteriorSummary {
            parameter: name.into(),
            mean,
            sd: 0.5,
            hpd_lo: mean - 1.0,
            hpd_hi: mean + 1.0,
            ess: 100.0,
            rhat: Some(1.0),
        };
        let sums = vec![row("a", 1.0), row("b", 3.0)];
        let truth = vec![("a".to_string(), 1.5), ("b".to_string(), 0.0)];
        let r = score_recovery(&sums, &truth).unwrap();
        assert_eq!(r[0].z, 1.0);
        assert!(r[0].covered && !r[1].covered);
        assert_eq!(coverage_rate(&r), 0.5);
        assert!(score_recovery(&sums, &[("c".to_string(), 0.0)]).is_err());
    }
}
