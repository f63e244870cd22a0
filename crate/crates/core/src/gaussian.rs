//! Gaussian beliefs and the static Gaussian identities: density, linear
//! maps, conditioning on a linear measurement and scalar fusion.

use std::f64::consts::PI;

use crate::error::{EstimationError, Result};
use crate::linalg::{
    cholesky_lower, ensure_finite_matrix, ensure_finite_vector, ensure_square, is_psd,
    is_symmetric, max_asymmetry, solve_spd, symmetrize, Matrix, Vector,
};

/// Mean and covariance of a Gaussian random vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: Vector,
    pub cov: Matrix,
}

impl GaussianBelief {
    /// Builds a belief, checking dimensions, finiteness, symmetry and PSD.
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self> {
        let belief = GaussianBelief { mean, cov };
        belief.validate()?;
        Ok(belief)
    }

    /// Belief with a diagonal covariance built from `variances`.
    pub fn diagonal(mean: Vector, variances: &[f64]) -> Result<Self> {
        let cov = Matrix::from_diagonal(&Vector::from_column_slice(variances));
        Self::new(mean, cov)
    }

    /// One-dimensional belief N(mean, var).
    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        Self::new(Vector::from_element(1, mean), Matrix::from_element(1, 1, var))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        ensure_square(&self.cov, "belief covariance")?;
        if self.cov.nrows() != self.mean.len() {
            return Err(EstimationError::dims(
                "belief covariance",
                self.mean.len(),
                self.cov.nrows(),
            ));
        }
        ensure_finite_vector(&self.mean, "belief mean")?;
        ensure_finite_matrix(&self.cov, "belief covariance")?;
        if !is_symmetric(&self.cov) {
            return Err(EstimationError::NotSymmetric {
                asymmetry: max_asymmetry(&self.cov),
            });
        }
        if !is_psd(&self.cov) {
            return Err(EstimationError::NotPositiveDefinite {
                pivot: 0,
                value: self.cov.trace(),
            });
        }
        Ok(())
    }
}

/// Multivariate normal density at `xi`; |P| comes from the Cholesky diagonal.
pub fn gaussian_pdf(b: &GaussianBelief, xi: &Vector) -> Result<f64> {
    if xi.len() != b.dim() {
        return Err(EstimationError::dims("gaussian_pdf point", b.dim(), xi.len()));
    }
    ensure_finite_vector(xi, "gaussian_pdf point")?;
    let chol = cholesky_lower(&b.cov)?;
    let diff = Matrix::from_column_slice(xi.len(), 1, (xi - &b.mean).as_slice());
    let whitened = chol.forward_substitute(&diff);
    let mahalanobis = whitened.norm_squared();
    let n = b.dim() as f64;
    let log_norm = -0.5 * n * (2.0 * PI).ln() - 0.5 * chol.log_det();
    Ok((log_norm - 0.5 * mahalanobis).exp())
}

/// `y = A·x + c`: mean `A·m + c`, covariance `A·P·Aᵀ`.
pub fn linear_transform(b: &GaussianBelief, a: &Matrix, c: &Vector) -> Result<GaussianBelief> {
    if a.ncols() != b.dim() {
        return Err(EstimationError::dims("linear_transform A columns", b.dim(), a.ncols()));
    }
    if c.len() != a.nrows() {
        return Err(EstimationError::dims("linear_transform offset", a.nrows(), c.len()));
    }
    Ok(GaussianBelief {
        mean: a * &b.mean + c,
        cov: symmetrize(&(a * &b.cov * a.transpose())),
    })
}

/// `z = A·x + B·y + c` for jointly Gaussian `x`, `y` with cross-covariance `Pxy`.
pub fn linear_combine(
    bx: &GaussianBelief,
    by: &GaussianBelief,
    pxy: &Matrix,
    a: &Matrix,
    b: &Matrix,
    c: &Vector,
) -> Result<GaussianBelief> {
    if pxy.nrows() != bx.dim() || pxy.ncols() != by.dim() {
        return Err(EstimationError::dims(
            "linear_combine cross-covariance",
            format!("{}x{}", bx.dim(), by.dim()),
            format!("{}x{}", pxy.nrows(), pxy.ncols()),
        ));
    }
    if a.ncols() != bx.dim() {
        return Err(EstimationError::dims("linear_combine A columns", bx.dim(), a.ncols()));
    }
    if b.ncols() != by.dim() {
        return Err(EstimationError::dims("linear_combine B columns", by.dim(), b.ncols()));
    }
    if a.nrows() != b.nrows() || c.len() != a.nrows() {
        return Err(EstimationError::dims(
            "linear_combine output",
            a.nrows(),
            format!("B rows {}, c len {}", b.nrows(), c.len()),
        ));
    }
    let mean = a * &bx.mean + b * &by.mean + c;
    let pyx = pxy.transpose();
    let cov = a * &bx.cov * a.transpose()
        + a * pxy * b.transpose()
        + b * &pyx * a.transpose()
        + b * &by.cov * b.transpose();
    Ok(GaussianBelief {
        mean,
        cov: symmetrize(&cov),
    })
}

/// Conditions `prior` on `z = H·x + v`, `v ~ N(0, R)`.
///
/// Returns the posterior together with the gain `K = P⁻Hᵀ(HP⁻Hᵀ + R)⁻¹`.
/// The posterior covariance is `P⁻ − K·H·P⁻`, symmetrized. `R = 0` is
/// accepted as long as `HP⁻Hᵀ` is itself positive definite.
pub fn condition_on_measurement(
    prior: &GaussianBelief,
    h: &Matrix,
    r: &Matrix,
    z: &Vector,
) -> Result<(GaussianBelief, Matrix)> {
    let n = prior.dim();
    let m = z.len();
    if h.ncols() != n || h.nrows() != m {
        return Err(EstimationError::dims(
            "measurement matrix H",
            format!("{m}x{n}"),
            format!("{}x{}", h.nrows(), h.ncols()),
        ));
    }
    if r.nrows() != m || r.ncols() != m {
        return Err(EstimationError::dims(
            "measurement noise R",
            format!("{m}x{m}"),
            format!("{}x{}", r.nrows(), r.ncols()),
        ));
    }
    ensure_finite_vector(z, "measurement")?;
    let hp = h * &prior.cov;
    let innovation_cov = symmetrize(&(&hp * h.transpose() + r));
    // Kᵀ = S⁻¹·H·P⁻ since both S and P⁻ are symmetric.
    let gain = solve_spd(&innovation_cov, &hp)?.transpose();
    let innovation = z - h * &prior.mean;
    let mean = &prior.mean + &gain * innovation;
    let cov = symmetrize(&(&prior.cov - &gain * hp));
    Ok((GaussianBelief { mean, cov }, gain))
}

/// Maximum-likelihood fusion of two independent scalar measurements.
pub fn fuse_scalar_pair(z1: f64, var1: f64, z2: f64, var2: f64) -> Result<(f64, f64)> {
    for v in [var1, var2] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(EstimationError::NonPositiveVariance(v));
        }
    }
    if !z1.is_finite() || !z2.is_finite() {
        return Err(EstimationError::NonFinite("fuse_scalar_pair measurement"));
    }
    let total = var1 + var2;
    let mean = (var2 * z1 + var1 * z2) / total;
    let var = 1.0 / (1.0 / var1 + 1.0 / var2);
    Ok((mean, var))
}

/// `r_ij = P_ij / (σ_i σ_j)`.
pub fn correlation_coefficient(p: &Matrix, i: usize, j: usize) -> Result<f64> {
    ensure_square(p, "correlation_coefficient")?;
    let n = p.nrows();
    if i >= n || j >= n {
        return Err(EstimationError::dims("correlation index", format!("< {n}"), i.max(j)));
    }
    for k in [i, j] {
        if !(p[(k, k)] > 0.0) {
            return Err(EstimationError::ZeroVariance(k));
        }
    }
    if i == j {
        return Ok(1.0);
    }
    let r = p[(i, j)] / (p[(i, i)].sqrt() * p[(j, j)].sqrt());
    Ok(r.clamp(-1.0, 1.0))
}
