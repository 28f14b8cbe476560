//! Broken-stick (piecewise-linear) growth basis.
//!
//! A trajectory with knots `ξ_1 < … < ξ_K` is written as `ζ(ω) = b(ω)·β`
//! where `β` holds one slope per segment and
//!
//! ```text
//! b_0(ω) = ω − (ω − ξ_1)_+
//! b_k(ω) = (ω − ξ_k)_+ − (ω − ξ_{k+1})_+     1 ≤ k ≤ K−1
//! b_K(ω) = (ω − ξ_K)_+
//! ```
//!
//! Each component is the time spent inside its segment, so the components
//! sum to `ω` and the curve passes through the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing, positive knot ages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct KnotVector(Vec<f64>);

impl KnotVector {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::validation("knot vector must hold at least one knot"));
        }
        if let Some(bad) = knots.iter().find(|k| !k.is_finite() || **k <= 0.0) {
            return Err(Error::validation(format!(
                "knots must be positive and finite, got {bad}"
            )));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation(format!(
                "knots must be strictly increasing, got {knots:?}"
            )));
        }
        Ok(Self(knots))
    }

    /// Knot count `K`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of linear segments, `K + 1`.
    pub fn n_segments(&self) -> usize {
        self.0.len() + 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for KnotVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        KnotVector::new(v)
    }
}

impl From<KnotVector> for Vec<f64> {
    fn from(k: KnotVector) -> Self {
        k.0
    }
}

/// Segment slopes, one per segment of a [`KnotVector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeVector(pub Vec<f64>);

impl SlopeVector {
    pub fn for_knots(beta: Vec<f64>, knots: &KnotVector) -> Result<Self> {
        if beta.len() != knots.n_segments() {
            return Err(Error::validation(format!(
                "slope vector has {} entries but {} knots need {}",
                beta.len(),
                knots.len(),
                knots.n_segments()
            )));
        }
        Ok(Self(beta))
    }
}

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Writes `b(age)` into `out` (length `K + 1`). No validation.
#[inline]
pub fn basis_into(age: f64, knots: &[f64], out: &mut [f64]) {
    let k = knots.len();
    debug_assert_eq!(out.len(), k + 1);
    // (ω − ξ_{j−1})₊ − (ω − ξ_j)₊ written as a clamp so that segments the
    // age has passed hold exactly ξ_j − ξ_{j−1}
    out[0] = age.min(knots[0]);
    for j in 1..k {
        out[j] = age.clamp(knots[j - 1], knots[j]) - knots[j - 1];
    }
    out[k] = pos(age - knots[k - 1]);
}

/// Basis vector `b(age)` for the given knots.
pub fn basis_vector(age: f64, knots: &KnotVector) -> Result<Vec<f64>> {
    if !age.is_finite() || age <= 0.0 {
        return Err(Error::validation(format!(
            "age must be positive and finite, got {age}"
        )));
    }
    let mut out = vec![0.0; knots.n_segments()];
    basis_into(age, knots.as_slice(), &mut out);
    Ok(out)
}

/// Evaluates `ζ(ω) = b(ω)·β` at every age.
pub fn eval_trajectory(beta: &[f64], knots: &KnotVector, ages: &[f64]) -> Result<Vec<f64>> {
    if beta.len() != knots.n_segments() {
        return Err(Error::validation(format!(
            "slope vector has {} entries, expected {}",
            beta.len(),
            knots.n_segments()
        )));
    }
    let mut b = vec![0.0; knots.n_segments()];
    ages.iter()
        .map(|&age| {
            if !age.is_finite() || age <= 0.0 {
                return Err(Error::validation(format!(
                    "age must be positive and finite, got {age}"
                )));
            }
            basis_into(age, knots.as_slice(), &mut b);
            Ok(dot(&b, beta))
        })
        .collect()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
