//! Small dense linear algebra: Cholesky factorization, SPD solves and
//! symmetry maintenance for the n ≤ ~10 matrices the filters carry.
//!
//! Storage is `nalgebra`'s heap-allocated `DMatrix`/`DVector` so one code
//! path serves scalar illustrations and the three-state benchmark alike.
//! The factorization itself is written out here (no pivoting, no
//! regularization) so it stays a plain, checkable primitive.

use nalgebra::{DMatrix, DVector};

use crate::error::{EstimationError, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative tolerance used when deciding whether a matrix is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Relative diagonal loading applied by [`is_psd`].
pub const PSD_CHECK_JITTER: f64 = 1e-12;

/// Lower-triangular Cholesky factor with a positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular(Matrix);

impl LowerTriangular {
    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Column `j` of the factor.
    pub fn column(&self, j: usize) -> Vector {
        self.0.column(j).into_owned()
    }

    /// `L·Lᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        &self.0 * self.0.transpose()
    }

    /// log|M| = 2·Σ log Lᵢᵢ.
    pub fn log_det(&self) -> f64 {
        2.0 * self.0.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L·Y = B` column by column.
    pub fn forward_substitute(&self, b: &Matrix) -> Matrix {
        let n = self.dim();
        let l = &self.0;
        let mut y = b.clone();
        for col in 0..b.ncols() {
            for i in 0..n {
                let mut acc = y[(i, col)];
                for k in 0..i {
                    acc -= l[(i, k)] * y[(k, col)];
                }
                y[(i, col)] = acc / l[(i, i)];
            }
        }
        y
    }

    /// Solves `Lᵀ·X = Y` column by column.
    pub fn backward_substitute(&self, y: &Matrix) -> Matrix {
        let n = self.dim();
        let l = &self.0;
        let mut x = y.clone();
        for col in 0..y.ncols() {
            for i in (0..n).rev() {
                let mut acc = x[(i, col)];
                for k in (i + 1)..n {
                    acc -= l[(k, i)] * x[(k, col)];
                }
                x[(i, col)] = acc / l[(i, i)];
            }
        }
        x
    }

    /// Solves `L·Lᵀ·X = B`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        self.backward_substitute(&self.forward_substitute(b))
    }
}

pub(crate) fn ensure_finite_matrix(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(EstimationError::NonFinite(what))
    }
}

pub(crate) fn ensure_finite_vector(v: &Vector, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(EstimationError::NonFinite(what))
    }
}

pub(crate) fn ensure_square(m: &Matrix, context: &'static str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(EstimationError::dims(
            context,
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ))
    }
}

/// Largest `|M_ij − M_ji|`.
pub fn max_asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// True when `M` is square and symmetric to within `SYMMETRY_TOL`
/// relative to its largest entry.
pub fn is_symmetric(m: &Matrix) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    max_asymmetry(m) <= SYMMETRY_TOL * scale
}

/// Lower Cholesky factor `L` with `L·Lᵀ = M`.
///
/// Asymmetric input is rejected rather than repaired; callers run
/// [`symmetrize`] themselves.
pub fn cholesky_lower(m: &Matrix) -> Result<LowerTriangular> {
    ensure_square(m, "cholesky_lower")?;
    ensure_finite_matrix(m, "cholesky_lower input")?;
    if !is_symmetric(m) {
        return Err(EstimationError::NotSymmetric {
            asymmetry: max_asymmetry(m),
        });
    }
    let n = m.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > 0.0) {
            return Err(EstimationError::NotPositiveDefinite { pivot: j, value: pivot });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut acc = m[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / d;
        }
    }
    Ok(LowerTriangular(l))
}

/// Solves `M·X = B` for symmetric positive definite `M`.
pub fn solve_spd(m: &Matrix, b: &Matrix) -> Result<Matrix> {
    if b.nrows() != m.nrows() {
        return Err(EstimationError::dims(
            "solve_spd right-hand side rows",
            m.nrows(),
            b.nrows(),
        ));
    }
    ensure_finite_matrix(b, "solve_spd right-hand side")?;
    Ok(cholesky_lower(m)?.solve(b))
}

/// `(M + Mᵀ)/2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Positive semi-definiteness check: succeeds when the Cholesky factorization
/// of `sym(P) + 1e-12·trace(P)·I` exists. The all-zero matrix passes.
pub fn is_psd(p: &Matrix) -> bool {
    if !p.is_square() || p.iter().any(|v| !v.is_finite()) {
        return false;
    }
    if p.iter().all(|&v| v == 0.0) {
        return true;
    }
    let trace = p.trace();
    if !(trace > 0.0) {
        return false;
    }
    let n = p.nrows();
    let loaded = symmetrize(p) + Matrix::identity(n, n) * (PSD_CHECK_JITTER * trace);
    cholesky_lower(&loaded).is_ok()
}
