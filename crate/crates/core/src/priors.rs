//! Shrinkage and covariance priors.
//!
//! The horseshoe uses the inverse-gamma auxiliary-variable representation:
//!
//! ```text
//! θ_j | λ_j², τ² ~ N(0, τ² λ_j²)
//! λ_j² | ν_j ~ IG(1/2, 1/ν_j)      ν_j ~ IG(1/2, 1)
//! τ²   | ξ   ~ IG(1/2, 1/ξ)        ξ   ~ IG(1/2, 1)
//! ```
//!
//! Covariance matrices get the hierarchical inverse-Wishart prior
//!
//! ```text
//! Σ | a ~ IW(ν + p − 1, 2ν diag(1/a))      a_j ~ IG(1/2, 1/A²)
//! ```
//!
//! under which every standard deviation `√Σ_jj` is half-t with `ν` degrees
//! of freedom and scale `A`, and correlations are marginally uniform for
//! `ν = 2`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Floor applied before taking reciprocals of positive quantities.
pub const POSITIVE_FLOOR: f64 = 1e-300;

/// Inverse-gamma with density `∝ x^{-shape-1} exp(-scale/x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InvGamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(Error::validation(format!(
                "inverse-gamma needs positive finite parameters, got shape {shape}, scale {scale}"
            )));
        }
        Ok(Self { shape, scale })
    }

    /// Reciprocal of a `Gamma(shape, rate = scale)` draw, floored.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(self.shape, 1.0 / self.scale)
            .expect("validated parameters")
            .sample(rng);
        1.0 / g.max(POSITIVE_FLOOR)
    }

    /// Mean, defined for `shape > 1`.
    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.scale / (self.shape - 1.0))
    }
}

#[inline]
fn floor(x: f64) -> f64 {
    x.max(POSITIVE_FLOOR)
}

/// Local and global scales of one horseshoe block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeState {
    pub lambda2: Vec<f64>,
    pub nu: Vec<f64>,
    pub tau2: f64,
    pub xi: f64,
}

/// Full conditionals of every horseshoe component given the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct HorseshoeConditionals {
    pub lambda2: Vec<InvGamma>,
    pub nu: Vec<InvGamma>,
    pub tau2: InvGamma,
    pub xi: InvGamma,
}

impl HorseshoeState {
    pub fn new(p: usize) -> Self {
        Self {
            lambda2: vec![1.0; p],
            nu: vec![1.0; p],
            tau2: 1.0,
            xi: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.lambda2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda2.is_empty()
    }

    /// Prior variance `τ² λ_j²` of coefficient `j`.
    pub fn prior_variance(&self, j: usize) -> f64 {
        floor(self.tau2 * self.lambda2[j])
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if self.lambda2.len() != self.nu.len() {
            return Err(Error::validation("horseshoe local vectors differ in length"));
        }
        if !(self.lambda2.iter().all(|&x| ok(x))
            && self.nu.iter().all(|&x| ok(x))
            && ok(self.tau2)
            && ok(self.xi))
        {
            return Err(Error::validation(
                "horseshoe state components must be positive and finite",
            ));
        }
        Ok(())
    }

    /// One Gibbs pass over `λ², τ², ν, ξ`, each drawn from its full
    /// conditional given the latest values of the others.
    pub fn update<R: Rng + ?Sized>(&mut self, coeffs: &[f64], rng: &mut R) -> Result<()> {
        if coeffs.len() != self.len() {
            return Err(Error::validation("coefficient count does not match horseshoe block"));
        }
        for j in 0..self.len() {
            self.lambda2[j] = lambda2_conditional(coeffs[j], self.nu[j], self.tau2)?.sample(rng);
        }
        self.tau2 = tau2_conditional(coeffs, &self.lambda2, self.xi)?.sample(rng);
        for j in 0..self.len() {
            self.nu[j] = nu_conditional(self.lambda2[j])?.sample(rng);
        }
        self.xi = xi_conditional(self.tau2)?.sample(rng);
        Ok(())
    }

    /// Draws the block and its coefficients from the prior.
    pub fn sample_prior<R: Rng + ?Sized>(p: usize, rng: &mut R) -> (Self, Vec<f64>) {
        let half = |scale: f64, rng: &mut R| InvGamma { shape: 0.5, scale: floor(scale) }.sample(rng);
        let xi = half(1.0, rng);
        let tau2 = half(1.0 / xi, rng);
        let nu: Vec<f64> = (0..p).map(|_| half(1.0, rng)).collect();
        let lambda2: Vec<f64> = nu.iter().map(|&n| half(1.0 / n, rng)).collect();
        let coeffs = lambda2
            .iter()
            .map(|&l| (tau2 * l).sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (Self { lambda2, nu, tau2, xi }, coeffs)
    }

    pub fn log_prior(&self) -> f64 {
        let mut lp = log_inv_gamma(self.xi, 0.5, 1.0) + log_inv_gamma(self.tau2, 0.5, 1.0 / self.xi);
        for (&l, &n) in self.lambda2.iter().zip(&self.nu) {
            lp += log_inv_gamma(n, 0.5, 1.0) + log_inv_gamma(l, 0.5, 1.0 / n);
        }
        lp
    }
}

fn lambda2_conditional(theta: f64, nu: f64, tau2: f64) -> Result<InvGamma> {
    InvGamma::new(1.0, 1.0 / floor(nu) + theta * theta / (2.0 * floor(tau2)))
}

fn nu_conditional(lambda2: f64) -> Result<InvGamma> {
    InvGamma::new(1.0, 1.0 + 1.0 / floor(lambda2))
}

fn tau2_conditional(coeffs: &[f64], lambda2: &[f64], xi: f64) -> Result<InvGamma> {
    let ss: f64 = coeffs
        .iter()
        .zip(lambda2)
        .map(|(t, l)| t * t / (2.0 * floor(*l)))
        .sum();
    InvGamma::new((coeffs.len() as f64 + 1.0) / 2.0, 1.0 / floor(xi) + ss)
}

fn xi_conditional(tau2: f64) -> Result<InvGamma> {
    InvGamma::new(1.0, 1.0 + 1.0 / floor(tau2))
}

/// All horseshoe full conditionals evaluated at the current state.
pub fn horseshoe_conditional_params(
    coeffs: &[f64],
    state: &HorseshoeState,
) -> Result<HorseshoeConditionals> {
    state.validate()?;
    if coeffs.len() != state.len() {
        return Err(Error::validation(format!(
            "{} coefficients for a horseshoe block of size {}",
            coeffs.len(),
            state.len()
        )));
    }
    Ok(HorseshoeConditionals {
        lambda2: coeffs
            .iter()
            .zip(&state.nu)
            .map(|(&t, &n)| lambda2_conditional(t, n, state.tau2))
            .collect::<Result<_>>()?,
        nu: state
            .lambda2
            .iter()
            .map(|&l| nu_conditional(l))
            .collect::<Result<_>>()?,
        tau2: tau2_conditional(coeffs, &state.lambda2, state.xi)?,
        xi: xi_conditional(state.tau2)?,
    })
}

/// Auxiliary scales of the hierarchical inverse-Wishart prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierIwState {
    pub a: Vec<f64>,
    /// Degrees of freedom `ν`.
    pub df: f64,
    /// Half-t scale `A`, shared by every dimension.
    pub scale: f64,
}

/// Inverse-Wishart parameters `(df, scale matrix)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvWishart {
    pub df: f64,
    pub scale: DMatrix<f64>,
}

impl HierIwState {
    pub fn new(p: usize, df: f64, scale: f64) -> Self {
        Self {
            a: vec![1.0; p],
            df,
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Conditional of `Σ` given `a` and `n` zero-mean vectors with the given
    /// scatter.
    pub fn sigma_conditional(&self, scatter: &DMatrix<f64>, n: usize) -> Result<InvWishart> {
        sigma_given_aux(scatter, n, self)
    }

    /// Conditionals of each `a_j` given `Σ`.
    pub fn aux_conditional(&self, sigma: &DMatrix<f64>) -> Result<Vec<InvGamma>> {
        let inv = linalg::spd_inverse(sigma)
            .ok_or_else(|| Error::numerical("hier_iw", "covariance is not positive definite"))?;
        let shape = (self.df + self.dim() as f64) / 2.0;
        let a2 = self.scale * self.scale;
        (0..self.dim())
            .map(|j| InvGamma::new(shape, floor(self.df * inv[(j, j)] + 1.0 / a2)))
            .collect()
    }

    /// Draws `Σ | a` then `a | Σ`, returning the new `Σ`.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        scatter: &DMatrix<f64>,
        n: usize,
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        let iw = self.sigma_conditional(scatter, n)?;
        let sigma = sample_inverse_wishart(iw.df, &iw.scale, rng)?;
        let aux = self.aux_conditional(&sigma)?;
        for (a, ig) in self.a.iter_mut().zip(aux) {
            *a = ig.sample(rng);
        }
        Ok(sigma)
    }

    /// Forward draw of `(a, Σ)` from the prior.
    pub fn sample_prior<R: Rng + ?Sized>(
        p: usize,
        df: f64,
        scale: f64,
        rng: &mut R,
    ) -> Result<(Self, DMatrix<f64>)> {
        let a2 = scale * scale;
        let a: Vec<f64> = (0..p)
            .map(|_| InvGamma { shape: 0.5, scale: 1.0 / a2 }.sample(rng))
            .collect();
        let state = Self { a, df, scale };
        let iw = state.sigma_conditional(&DMatrix::zeros(p, p), 0)?;
        let sigma = sample_inverse_wishart(iw.df, &iw.scale, rng)?;
        Ok((state, sigma))
    }

    /// Log density of `(Σ, a)` under the prior, up to a constant.
    pub fn log_prior(&self, sigma: &DMatrix<f64>) -> f64 {
        let p = self.dim() as f64;
        let df = self.df + p - 1.0;
        let mut lp = 0.0;
        let a2 = self.scale * self.scale;
        for &a in &self.a {
            lp += log_inv_gamma(a, 0.5, 1.0 / a2);
        }
        let chol = match sigma.clone().cholesky() {
            Some(c) => c,
            None => return f64::NEG_INFINITY,
        };
        let logdet_sigma: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let inv = chol.inverse();
        let mut tr = 0.0;
        let mut logdet_scale = 0.0;
        for (j, &a) in self.a.iter().enumerate() {
            let s = 2.0 * self.df / a;
            tr += s * inv[(j, j)];
            logdet_scale += s.ln();
        }
        lp + 0.5 * df * logdet_scale - 0.5 * (df + p + 1.0) * logdet_sigma - 0.5 * tr
            - log_multivariate_gamma_half(df, self.dim())
    }
}

/// Conditionals of the hierarchical inverse-Wishart prior.
#[derive(Debug, Clone, PartialEq)]
pub struct HierIwConditional {
    /// `Σ | a, data`.
    pub sigma: InvWishart,
    /// `a_j | Σ` evaluated at the supplied current `Σ`.
    pub aux: Vec<InvGamma>,
}

/// `Σ | a ~ IW(ν + p − 1 + n, 2ν diag(1/a) + scatter)` and
/// `a_j | Σ ~ IG((ν + p)/2, ν (Σ⁻¹)_jj + 1/A²)`.
pub fn hier_iw_conditional(
    scatter: &DMatrix<f64>,
    n: usize,
    sigma: &DMatrix<f64>,
    state: &HierIwState,
) -> Result<HierIwConditional> {
    Ok(HierIwConditional {
        sigma: sigma_given_aux(scatter, n, state)?,
        aux: state.aux_conditional(sigma)?,
    })
}

fn sigma_given_aux(scatter: &DMatrix<f64>, n: usize, state: &HierIwState) -> Result<InvWishart> {
    let p = state.dim();
    if scatter.nrows() != p || scatter.ncols() != p {
        return Err(Error::validation(format!(
            "scatter is {}x{} but the prior has dimension {p}",
            scatter.nrows(),
            scatter.ncols()
        )));
    }
    if !linalg::is_psd(scatter) {
        return Err(Error::numerical(
            "hier_iw",
            "scatter matrix is not symmetric positive semidefinite",
        ));
    }
    if state.a.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::validation("auxiliary scales must be positive"));
    }
    let mut scale = scatter.clone();
    for j in 0..p {
        scale[(j, j)] += 2.0 * state.df / floor(state.a[j]);
    }
    Ok(InvWishart {
        df: state.df + p as f64 - 1.0 + n as f64,
        scale,
    })
}

/// Inverse-Wishart draw with density `∝ |Σ|^{-(df+p+1)/2} exp(-tr(S Σ⁻¹)/2)`.
///
/// With `S = U Uᵀ` and a Bartlett factor `A` of a standard Wishart,
/// `Σ = (U A⁻ᵀ)(U A⁻ᵀ)ᵀ`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    df: f64,
    scale: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let p = scale.nrows();
    if !scale.is_square() || p == 0 {
        return Err(Error::validation("inverse-Wishart scale must be square and non-empty"));
    }
    if !(df > p as f64 - 1.0) {
        return Err(Error::validation(format!(
            "inverse-Wishart needs df > p - 1, got df {df} for p {p}"
        )));
    }
    let u = linalg::cholesky(scale)
        .ok_or_else(|| Error::numerical("inverse_wishart", "scale matrix is not positive definite"))?;
    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi2 = 2.0 * Gamma::new((df - i as f64) / 2.0, 1.0).expect("df > p - 1").sample(rng);
        a[(i, i)] = chi2.max(POSITIVE_FLOOR).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let ident = DMatrix::<f64>::identity(p, p);
    let a_inv = a
        .solve_lower_triangular(&ident)
        .ok_or_else(|| Error::numerical("inverse_wishart", "singular Bartlett factor"))?;
    let c = &u * a_inv.transpose();
    let mut sigma = &c * c.transpose();
    linalg::symmetrize(&mut sigma);
    if sigma.iter().any(|x| !x.is_finite()) || linalg::cholesky(&sigma).is_none() {
        return Err(Error::numerical("inverse_wishart", "draw is not positive definite"));
    }
    Ok(sigma)
}

pub fn log_inv_gamma(x: f64, shape: f64, scale: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - statrs::function::gamma::ln_gamma(shape) - (shape + 1.0) * x.ln()
        - scale / x
}

fn log_multivariate_gamma_half(df: f64, p: usize) -> f64 {
    let pf = p as f64;
    0.5 * df * pf * std::f64::consts::LN_2
        + 0.25 * pf * (pf - 1.0) * std::f64::consts::PI.ln()
        + (0..p)
            .map(|j| statrs::function::gamma::ln_gamma((df - j as f64) / 2.0))
            .sum::<f64>()
}
