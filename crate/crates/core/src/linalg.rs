//! Small dense linear-algebra helpers around `nalgebra`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Eigenvalue tolerance used when accepting a matrix as positive
/// semidefinite.
pub const PSD_TOL: f64 = 1e-10;

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| {
            (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * (1.0 + m[(i, j)].abs()))
        })
}

/// Lower Cholesky factor, or `None` when `m` is not numerically positive
/// definite.
pub fn cholesky(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if !m.iter().all(|x| x.is_finite()) {
        return None;
    }
    m.clone().cholesky().map(|c| c.unpack())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Positive semidefinite up to [`PSD_TOL`] relative to the largest
/// diagonal entry.
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    if !m.is_square() || !is_symmetric(m, 1e-9) {
        return false;
    }
    let scale = m.diagonal().iter().fold(1.0f64, |a, b| a.max(b.abs()));
    min_eigenvalue(m) >= -PSD_TOL * scale
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut inv = m.clone().cholesky()?.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

/// A factor `A` with `A Aᵀ = m` for a symmetric positive semidefinite `m`,
/// from its eigendecomposition; negative round-off eigenvalues are clipped.
pub fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let mut a = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        a.column_mut(j).scale_mut(s);
    }
    a
}

/// Draws from `N(Q⁻¹h, Q⁻¹)` given precision `Q` and linear term `h`.
///
/// The precision is Jacobi-scaled before factorisation; shrinkage priors
/// routinely produce diagonals spanning hundreds of orders of magnitude.
pub fn sample_gaussian_canonical<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    linear: &DVector<f64>,
    rng: &mut R,
) -> Option<DVector<f64>> {
    let n = precision.nrows();
    let mut s = DVector::zeros(n);
    for i in 0..n {
        let d = precision[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        s[i] = 1.0 / d.sqrt();
    }
    let mut q = precision.clone();
    for j in 0..n {
        for i in 0..n {
            q[(i, j)] *= s[i] * s[j];
        }
    }
    let chol = q.cholesky()?;
    let h = linear.component_mul(&s);
    let mean = chol.solve(&h);
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    // x = mean + L^{-T} z
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)?;
    let x = (mean + noise).component_mul(&s);
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Draws from `N(mean, L Lᵀ)` given the lower Cholesky factor `L`.
pub fn sample_gaussian_chol<R: Rng + ?Sized>(
    mean: &[f64],
    chol_lower: &DMatrix<f64>,
    rng: &mut R,
) -> Vec<f64> {
    let n = mean.len();
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (0..n)
        .map(|i| mean[i] + (0..=i).map(|j| chol_lower[(i, j)] * z[j]).sum::<f64>())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn canonical_sampler_moments() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let h = DVector::from_vec(vec![1.0, -1.0]);
        let mean = q.clone().cholesky().unwrap().solve(&h);
        let cov = spd_inverse(&q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut m = [0.0; 2];
        let mut v = [0.0; 3];
        for _ in 0..n {
            let x = sample_gaussian_canonical(&q, &h, &mut rng).unwrap();
            m[0] += x[0];
            m[1] += x[1];
            v[0] += (x[0] - mean[0]).powi(2);
            v[1] += (x[1] - mean[1]).powi(2);
            v[2] += (x[0] - mean[0]) * (x[1] - mean[1]);
        }
        let nf = n as f64;
        assert!((m[0] / nf - mean[0]).abs() < 4.0 * (cov[(0, 0)] / nf).sqrt());
        assert!((m[1] / nf - mean[1]).abs() < 4.0 * (cov[(1, 1)] / nf).sqrt());
        assert!((v[0] / nf - cov[(0, 0)]).abs() < 0.02);
        assert!((v[1] / nf - cov[(1, 1)]).abs() < 0.02);
        assert!((v[2] / nf - cov[(0, 1)]).abs() < 0.02);
    }

    #[test]
    fn badly_scaled_precision() {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1e280, 1e-6]));
        let h = DVector::from_vec(vec![0.0, 1e-6]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sample_gaussian_canonical(&q, &h, &mut rng).unwrap();
        assert!(x[0].abs() < 1e-130);
        assert!(x[1].is_finite());
    }

    #[test]
    fn psd_checks() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(!is_psd(&a));
        assert!(is_psd(&DMatrix::identity(3, 3)));
        assert!(cholesky(&a).is_none());
    }
}
