use std::ops::Range;

use crate::config::ModelConfig;
use crate::data::{Dataset, LoadingConstraint, N_COVARIATES};
use crate::error::{Error, Result};
use crate::spline::basis_into;

/// Width of the per-occasion regression row `(1, x)`.
pub const NZ: usize = N_COVARIATES + 1;

/// Dataset flattened into the arrays the sampler iterates over, plus the
/// per-subject design cross-products that never change during a run.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub n_outcomes: usize,
    pub n_facets: usize,
    pub n_segments: usize,
    pub subject_ids: Vec<String>,
    /// 0-based facet of each outcome.
    pub facet_of: Vec<usize>,
    pub is_count: Vec<bool>,
    pub free_loading: Vec<bool>,
    pub occ_subject: Vec<usize>,
    pub occ_age: Vec<f64>,
    /// `n_occ × n_segments`, row-major.
    pub basis: Vec<f64>,
    /// `n_occ × NZ` rows `(1, x_it)`.
    pub z: Vec<f64>,
    /// `n_occ × D`; `NaN` where missing.
    pub observed: Vec<f64>,
    /// Bit `d` set when outcome `d` is missing at that occasion.
    pub missing: Vec<u64>,
    pub subject_occ: Vec<Range<usize>>,
    /// Per-subject `Σ_t z zᵀ` (NZ × NZ, row-major).
    pub s_zz: Vec<Vec<f64>>,
    /// Per-subject `Σ_t z bᵀ` (NZ × B, row-major).
    pub s_zb: Vec<Vec<f64>>,
    /// Per-subject `Σ_t b bᵀ` (B × B, row-major).
    pub s_bb: Vec<Vec<f64>>,
    pub s_zz_total: Vec<f64>,
    pub s_zb_total: Vec<f64>,
}

impl PreparedData {
    pub fn new(dataset: &Dataset, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        if dataset.outcomes() != config.outcomes.as_slice() {
            let (a, b) = (dataset.n_outcomes(), config.outcomes.len());
            return Err(Error::validation(if a != b {
                format!("dataset has {a} outcomes but the model configures {b}")
            } else {
                "dataset outcome taxonomy differs from the model configuration".to_string()
            }));
        }
        let d = dataset.n_outcomes();
        let b = config.n_segments();
        let knots = config.knots.as_slice();
        let n_occ = dataset.n_occasions();
        let mut p = PreparedData {
            n_outcomes: d,
            n_facets: config.n_facets(),
            n_segments: b,
            subject_ids: dataset.subjects().iter().map(|s| s.id.clone()).collect(),
            facet_of: config.outcomes.iter().map(|o| o.facet - 1).collect(),
            is_count: config.outcomes.iter().map(|o| o.is_count()).collect(),
            free_loading: config
                .outcomes
                .iter()
                .map(|o| o.loading == LoadingConstraint::Free)
                .collect(),
            occ_subject: Vec::with_capacity(n_occ),
            occ_age: Vec::with_capacity(n_occ),
            basis: vec![0.0; n_occ * b],
            z: Vec::with_capacity(n_occ * NZ),
            observed: Vec::with_capacity(n_occ * d),
            missing: Vec::with_capacity(n_occ),
            subject_occ: Vec::with_capacity(dataset.subjects().len()),
            s_zz: Vec::new(),
            s_zb: Vec::new(),
            s_bb: Vec::new(),
            s_zz_total: vec![0.0; NZ * NZ],
            s_zb_total: vec![0.0; NZ * b],
        };
        let mut o = 0;
        for (i, subj) in dataset.subjects().iter().enumerate() {
            let start = o;
            for obs in &subj.observations {
                p.occ_subject.push(i);
                p.occ_age.push(obs.age);
                basis_into(obs.age, knots, &mut p.basis[o * b..(o + 1) * b]);
                p.z.push(1.0);
                p.z.extend_from_slice(&obs.covariates());
                let mut mask = 0u64;
                for (k, v) in obs.values.iter().enumerate() {
                    match v {
                        Some(x) => p.observed.push(*x),
                        None => {
                            p.observed.push(f64::NAN);
                            mask |= 1 << k;
                        }
                    }
                }
                p.missing.push(mask);
                o += 1;
            }
            p.subject_occ.push(start..o);
        }
        for r in &p.subject_occ {
            let mut zz = vec![0.0; NZ * NZ];
            let mut zb = vec![0.0; NZ * b];
            let mut bb = vec![0.0; b * b];
            for o in r.clone() {
                let z = &p.z[o * NZ..(o + 1) * NZ];
                let bv = &p.basis[o * b..(o + 1) * b];
                for j in 0..NZ {
                    for k in 0..NZ {
                        zz[j * NZ + k] += z[j] * z[k];
                    }
                    for k in 0..b {
                        zb[j * b + k] += z[j] * bv[k];
                    }
                }
                for j in 0..b {
                    for k in 0..b {
                        bb[j * b + k] += bv[j] * bv[k];
                    }
                }
            }
            for (t, v) in p.s_zz_total.iter_mut().zip(&zz) {
                *t += v;
            }
            for (t, v) in p.s_zb_total.iter_mut().zip(&zb) {
                *t += v;
            }
            p.s_zz.push(zz);
            p.s_zb.push(zb);
            p.s_bb.push(bb);
        }
        Ok(p)
    }

    pub fn n_occasions(&self) -> usize {
        self.occ_subject.len()
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_occ.len()
    }

    pub fn beta_dim(&self) -> usize {
        self.n_facets * self.n_segments
    }

    #[inline]
    pub fn basis_row(&self, o: usize) -> &[f64] {
        &self.basis[o * self.n_segments..(o + 1) * self.n_segments]
    }

    #[inline]
    pub fn z_row(&self, o: usize) -> &[f64] {
        &self.z[o * NZ..(o + 1) * NZ]
    }

    #[inline]
    pub fn is_missing(&self, o: usize, d: usize) -> bool {
        self.missing[o] >> d & 1 == 1
    }

    /// Observed value at `(o, d)`, `None` when missing.
    pub fn value(&self, o: usize, d: usize) -> Option<f64> {
        (!self.is_missing(o, d)).then(|| self.observed[o * self.n_outcomes + d])
    }

    /// `(occasion, outcome)` of every observed count cell, occasion-major.
    pub fn count_cells(&self) -> Vec<(usize, usize)> {
        (0..self.n_occasions())
            .flat_map(|o| (0..self.n_outcomes).map(move |d| (o, d)))
            .filter(|&(o, d)| self.is_count[d] && !self.is_missing(o, d))
            .collect()
    }

    /// Copy with every observed value replaced by `values` (`n_occ × D`,
    /// row-major); the missingness pattern is unchanged.
    pub fn with_observed(&self, values: &[f64]) -> Self {
        let mut p = self.clone();
        for (i, v) in p.observed.iter_mut().enumerate() {
            if !v.is_nan() {
                *v = values[i];
            }
        }
        p
    }
}
