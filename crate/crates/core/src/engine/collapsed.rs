//! Joint draw of intercepts, covariate effects and `μ_β` with every
//! subject's slope vector integrated out.
//!
//! An intercept shift can be traded almost exactly against a shift of every
//! subject's early-segment slope, so updating the two blocks one at a time
//! crawls along that ridge. Drawing `(α, γ, μ_β)` from their joint
//! conditional given `(Σ_β, Σ_ε, c)` with the slopes marginalised removes
//! the ridge; the slopes are then redrawn given the new values.
//!
//! With `P_i = Σ_β⁻¹ + H_i`, `H_i = M ⊗ Σ_t b bᵀ`, `M = Lᵀ Ω L` and
//! `J_i = I_F ⊗ Σ_t z bᵀ`, the Schur complement of the slope blocks is
//!
//! ```text
//! Q_θθ = Ω ⊗ Σ z zᵀ − (ΩL ⊗ I) Σ J_i P_i⁻¹ J_iᵀ (LᵀΩ ⊗ I)
//! Q_θμ = ΩL ⊗ Σ z bᵀ − (ΩL ⊗ I) Σ J_i P_i⁻¹ H_i
//! Q_μμ = Σ H_i − Σ H_i P_i⁻¹ H_i
//! ```
//!
//! plus the prior precisions on the diagonal.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::config::ModelConfig;
use crate::data::N_COVARIATES;
use crate::engine::prepared::{PreparedData, NZ};
use crate::engine::state::ParameterState;
use crate::engine::updates::{kron_bb, loading_products, precision_of, slope_linear_raw};
use crate::error::{Error, Result};
use crate::linalg;

const UPDATE: &str = "collapsed_regression";

/// Precision and linear term of the marginal conditional of
/// `(θ, μ_β)`, `θ = (α_d, γ_d)_d` stacked outcome-major, together with the
/// Cholesky factors of every `P_i`.
pub struct CollapsedSystem {
    pub precision: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub factors: Vec<Cholesky<f64, Dyn>>,
}

pub fn collapsed_system(state: &ParameterState, prep: &PreparedData, config: &ModelConfig) -> Result<CollapsedSystem> {
    let (d, f, b) = (prep.n_outcomes, prep.n_facets, prep.n_segments);
    let q = f * b;
    let nt = d * NZ;
    let fz = f * NZ;
    let omega = precision_of(&state.sigma_eps, UPDATE)?;
    let sb_inv = precision_of(&state.sigma_beta, UPDATE)?;
    let (m, lt_omega) = loading_products(state, prep, &omega);
    let omega_l = lt_omega.transpose();

    // Per subject, A = L_i⁻¹ [J_iᵀ | H_i | g_i] with P_i = L_i L_iᵀ; the
    // Gram matrix Aᵀ A then holds J P⁻¹ Jᵀ, J P⁻¹ H, H P⁻¹ H, J P⁻¹ g and
    // H P⁻¹ g as blocks.
    let cols = fz + q + 1;
    let mut rhs = DMatrix::<f64>::zeros(q, cols);
    let mut gram = DMatrix::<f64>::zeros(cols, cols);
    let mut sum_h = DMatrix::<f64>::zeros(q, q);
    let mut sum_g = DVector::<f64>::zeros(q);
    let mut factors = Vec::with_capacity(prep.n_subjects());
    for i in 0..prep.n_subjects() {
        let h = kron_bb(&m, &prep.s_bb[i], b);
        let chol = (&sb_inv + &h).cholesky().ok_or_else(|| {
            Error::numerical(UPDATE, format!("slope precision of subject {i} is not positive definite"))
        })?;
        let s_zb = &prep.s_zb[i];
        rhs.fill(0.0);
        for fa in 0..f {
            for a in 0..NZ {
                for k in 0..b {
                    rhs[(fa * b + k, fa * NZ + a)] = s_zb[a * b + k];
                }
            }
        }
        rhs.view_mut((0, fz), (q, q)).copy_from(&h);
        let g = slope_linear_raw(state, prep, &lt_omega, i);
        rhs.column_mut(fz + q).copy_from(&g);
        forward_solve(chol.l_dirty(), &mut rhs);
        add_gram_upper(&rhs, &mut gram);
        sum_g += g;
        sum_h += h;
        factors.push(chol);
    }
    for c in 0..cols {
        for r in c + 1..cols {
            gram[(r, c)] = gram[(c, r)];
        }
    }
    let x = gram.view((0, 0), (fz, fz));
    let y = gram.view((0, fz), (fz, q));
    let zz = gram.view((fz, fz), (q, q));
    let jw = gram.view((0, fz + q), (fz, 1));
    let hw = gram.view((fz, fz + q), (q, 1));

    // K = ΩL ⊗ I_NZ
    let kmat = DMatrix::from_fn(nt, fz, |r, c| if r % NZ == c % NZ { omega_l[(r / NZ, c / NZ)] } else { 0.0 });
    let n = nt + q;
    let mut precision = DMatrix::<f64>::zeros(n, n);
    let kx = &kmat * x * kmat.transpose();
    let ky = &kmat * y;
    for r in 0..nt {
        for c in 0..nt {
            precision[(r, c)] =
                omega[(r / NZ, c / NZ)] * prep.s_zz_total[(r % NZ) * NZ + c % NZ] - kx[(r, c)];
        }
        for c in 0..q {
            let v = omega_l[(r / NZ, c / b)] * prep.s_zb_total[(r % NZ) * b + c % b] - ky[(r, c)];
            precision[(r, nt + c)] = v;
            precision[(nt + c, r)] = v;
        }
    }
    for r in 0..q {
        for c in 0..q {
            precision[(nt + r, nt + c)] = sum_h[(r, c)] - zz[(r, c)];
        }
    }
    let mut linear = DVector::<f64>::zeros(n);
    // Σ_o (Ω y_o) ⊗ z_o = Ω (Σ_o y_o z_oᵀ)
    let mut yz = vec![0.0; d * NZ];
    for o in 0..prep.n_occasions() {
        let row = state.complete_row(o);
        let z = prep.z_row(o);
        for (l, yl) in row.iter().enumerate() {
            for a in 0..NZ {
                yz[l * NZ + a] += yl * z[a];
            }
        }
    }
    for k in 0..d {
        for l in 0..d {
            let w = omega[(k, l)];
            for a in 0..NZ {
                linear[k * NZ + a] += w * yz[l * NZ + a];
            }
        }
    }
    let kjw = &kmat * jw;
    for r in 0..nt {
        linear[r] -= kjw[r];
    }
    for r in 0..q {
        linear[nt + r] = sum_g[r] - hw[r];
    }

    for k in 0..d {
        precision[(k * NZ, k * NZ)] += 1.0 / config.priors.alpha_variance;
        for jj in 0..N_COVARIATES {
            precision[(k * NZ + 1 + jj, k * NZ + 1 + jj)] += 1.0 / state.hs_gamma[k].prior_variance(jj);
        }
    }
    for r in 0..q {
        precision[(nt + r, nt + r)] += 1.0 / state.hs_mu.prior_variance(r);
    }
    linalg::symmetrize(&mut precision);
    Ok(CollapsedSystem {
        precision,
        linear,
        factors,
    })
}

/// Overwrites every column of `rhs` with `L⁻¹` times it, reading only the
/// lower triangle of `l`.
fn forward_solve(l: &DMatrix<f64>, rhs: &mut DMatrix<f64>) {
    let n = l.nrows();
    let ls = l.as_slice();
    for col in rhs.as_mut_slice().chunks_exact_mut(n) {
        for r in 0..n {
            let mut v = col[r];
            for k in 0..r {
                v -= ls[k * n + r] * col[k];
            }
            col[r] = v / ls[r * n + r];
        }
    }
}

/// Adds the upper triangle of `aᵀ a` to `gram`.
fn add_gram_upper(a: &DMatrix<f64>, gram: &mut DMatrix<f64>) {
    let n = a.nrows();
    let cols: Vec<&[f64]> = a.as_slice().chunks_exact(n).collect();
    for c in 0..cols.len() {
        for r in 0..=c {
            gram[(r, c)] += crate::spline::dot(cols[r], cols[c]);
        }
    }
}

/// Draws `(α, γ, μ_β)` jointly with the slopes integrated out. With
/// `freeze_gamma` the covariate effects are held at their current values
/// and only `(α, μ_β)` move. Returns the per-subject slope-precision
/// factors for reuse by the slope update.
pub fn update_collapsed<R: Rng + ?Sized>(
    state: &mut ParameterState,
    prep: &PreparedData,
    config: &ModelConfig,
    rng: &mut R,
    freeze_gamma: bool,
) -> Result<Vec<Cholesky<f64, Dyn>>> {
    let sys = collapsed_system(state, prep, config)?;
    let d = prep.n_outcomes;
    let nt = d * NZ;
    let n = sys.linear.len();
    let fail = || Error::numerical(UPDATE, "joint regression precision is not positive definite");
    if freeze_gamma {
        let free: Vec<usize> = (0..n).filter(|&r| r >= nt || r % NZ == 0).collect();
        let fixed: Vec<usize> = (0..n).filter(|&r| r < nt && r % NZ != 0).collect();
        let fixed_vals = DVector::from_iterator(fixed.len(), fixed.iter().map(|&r| state.gamma[(r / NZ) * N_COVARIATES + r % NZ - 1]));
        let qff = sys.precision.select_rows(&free).select_columns(&free);
        let qfx = sys.precision.select_rows(&free).select_columns(&fixed);
        let h = DVector::from_iterator(free.len(), free.iter().map(|&r| sys.linear[r])) - qfx * fixed_vals;
        let draw = linalg::sample_gaussian_canonical(&qff, &h, rng).ok_or_else(fail)?;
        for (v, &r) in draw.iter().zip(&free) {
            if r < nt {
                state.alpha[r / NZ] = *v;
            } else {
                state.mu_beta[r - nt] = *v;
            }
        }
    } else {
        let draw = linalg::sample_gaussian_canonical(&sys.precision, &sys.linear, rng).ok_or_else(fail)?;
        for k in 0..d {
            state.alpha[k] = draw[k * NZ];
            for jj in 0..N_COVARIATES {
                state.gamma[k * N_COVARIATES + jj] = draw[k * NZ + 1 + jj];
            }
        }
        for r in 0..prep.beta_dim() {
            state.mu_beta[r] = draw[nt + r];
        }
    }
    Ok(sys.factors)
}
