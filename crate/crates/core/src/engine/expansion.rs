//! Scale move along the funnel between subject slope spread and `Σ_β`.
//!
//! A slope component the data barely inform (a late segment few subjects
//! reach) couples `Σ_β,jj` and the deviations `β_ij − μ_j` so tightly that
//! alternating their conditionals moves the scale only a little per sweep.
//! For each component `j` this update draws `s > 0` and maps
//!
//! ```text
//! β_ij − μ_j  →  s (β_ij − μ_j)      Σ_β  →  D Σ_β D,  D = diag(1, …, s, …, 1)
//! ```
//!
//! with `s` drawn from the target restricted to that orbit, times the
//! Jacobian of the map and the invariant measure `ds / s` of the scaling
//! group. That leaves the joint posterior invariant. On `u = log s` the log
//! density is
//!
//! ```text
//! −½ A (eᵘ − 1)² + B (eᵘ − 1) − (ν + p − 1) u − ½ C e^{−2u}
//! ```
//!
//! where `A` and `B` come from the residuals, `ν` is the prior degrees of
//! freedom, `p = dim Σ_β` and `C = (2ν / a_j) (Σ_β⁻¹)_jj`.

use rand::Rng;

use crate::engine::prepared::PreparedData;
use crate::engine::state::ParameterState;
use crate::engine::updates::{precision_of, residuals};
use crate::error::{Error, Result};

const UPDATE: &str = "rescale_slope_spread";

/// One slice-sampling draw of the scale of every slope component in turn.
pub fn rescale_slope_spread<R: Rng + ?Sized>(
    state: &mut ParameterState,
    prep: &PreparedData,
    rng: &mut R,
) -> Result<()> {
    let d = prep.n_outcomes;
    let b = prep.n_segments;
    let q = prep.beta_dim();
    let p = q as f64;
    let omega = precision_of(&state.sigma_eps, UPDATE)?;
    let mut e = residuals(state, prep);
    let mut u = vec![0.0; d];
    let mut wu = vec![0.0; d];
    for j in 0..q {
        let facet = j / b;
        let seg = j % b;
        let mu = state.mu_beta[j];
        let (mut a_coef, mut b_coef) = (0.0, 0.0);
        for o in 0..prep.n_occasions() {
            let i = prep.occ_subject[o];
            let dev = state.beta[i * q + j] - mu;
            let bv = prep.basis_row(o)[seg] * dev;
            for k in 0..d {
                u[k] = if prep.facet_of[k] == facet { state.loadings[k] * bv } else { 0.0 };
            }
            for k in 0..d {
                wu[k] = (0..d).map(|l| omega[(k, l)] * u[l]).sum();
            }
            let row = &e[o * d..(o + 1) * d];
            for k in 0..d {
                a_coef += u[k] * wu[k];
                b_coef += row[k] * wu[k];
            }
        }
        let sb_inv = precision_of(&state.sigma_beta, UPDATE)?;
        let iw = &state.iw_beta;
        let c_coef = 2.0 * iw.df / iw.a[j] * sb_inv[(j, j)];
        let power = iw.df + p - 1.0;
        let log_density = |x: f64| {
            let s = x.exp();
            -0.5 * a_coef * (s - 1.0).powi(2) + b_coef * (s - 1.0) - power * x - 0.5 * c_coef * (-2.0 * x).exp()
        };
        let x = slice_sample(0.0, 0.5, log_density, rng)?;
        let s = x.exp();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::numerical(UPDATE, format!("scale draw {s} for slope component {j}")));
        }
        for i in 0..prep.n_subjects() {
            let v = &mut state.beta[i * q + j];
            *v = mu + s * (*v - mu);
        }
        for k in 0..q {
            state.sigma_beta[(j, k)] *= s;
            state.sigma_beta[(k, j)] *= s;
        }
        for o in 0..prep.n_occasions() {
            let i = prep.occ_subject[o];
            // the deviation is already rescaled; recover the pre-move one
            let dev = (state.beta[i * q + j] - mu) / s;
            let bv = prep.basis_row(o)[seg] * dev;
            for k in 0..d {
                if prep.facet_of[k] == facet {
                    e[o * d + k] -= (s - 1.0) * state.loadings[k] * bv;
                }
            }
        }
    }
    Ok(())
}

/// Univariate slice sampler with stepping out and shrinkage.
fn slice_sample<R: Rng + ?Sized>(
    x0: f64,
    width: f64,
    log_density: impl Fn(f64) -> f64,
    rng: &mut R,
) -> Result<f64> {
    let f0 = log_density(x0);
    if !f0.is_finite() {
        return Err(Error::numerical(UPDATE, "current state has zero density"));
    }
    let level = f0 + rng.random::<f64>().ln();
    let mut lo = x0 - width * rng.random::<f64>();
    let mut hi = lo + width;
    let mut steps = 0;
    while log_density(lo) > level && steps < 200 {
        lo -= width;
        steps += 1;
    }
    steps = 0;
    while log_density(hi) > level && steps < 200 {
        hi += width;
        steps += 1;
    }
    for _ in 0..1000 {
        let x = lo + (hi - lo) * rng.random::<f64>();
        if log_density(x) > level {
            return Ok(x);
        }
        if x < x0 {
            lo = x;
        } else {
            hi = x;
        }
    }
    Err(Error::numerical(UPDATE, "slice sampler failed to shrink onto the slice"))
}
