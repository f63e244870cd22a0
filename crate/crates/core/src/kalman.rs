//! Discrete-time linear Kalman filter and the batch least-squares
//! (information form) estimator it is equivalent to on static problems.

use crate::error::{EstimationError, Result};
use crate::gaussian::{condition_on_measurement, GaussianBelief};
use crate::linalg::{ensure_finite_matrix, is_psd, is_symmetric, solve_spd, symmetrize, Matrix, Vector};

/// `x(k+1) = A·x(k) + B·u(k) + w`, `z = H·x + v`, `w ~ N(0, Q)`, `v ~ N(0, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: Matrix,
    pub b: Matrix,
    pub h: Matrix,
    pub q: Matrix,
    pub r: Matrix,
}

impl LinearSystem {
    pub fn new(a: Matrix, b: Matrix, h: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        let sys = LinearSystem { a, b, h, q, r };
        sys.validate()?;
        Ok(sys)
    }

    /// System without a control input (`B` has zero columns).
    pub fn autonomous(a: Matrix, h: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, Matrix::zeros(n, 0), h, q, r)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn measurement_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let m = self.h.nrows();
        let shape = |x: &Matrix| format!("{}x{}", x.nrows(), x.ncols());
        if self.a.ncols() != n {
            return Err(EstimationError::dims("A", format!("{n}x{n}"), shape(&self.a)));
        }
        if self.b.nrows() != n {
            return Err(EstimationError::dims("B rows", n, self.b.nrows()));
        }
        if self.h.ncols() != n {
            return Err(EstimationError::dims("H columns", n, self.h.ncols()));
        }
        if self.q.shape() != (n, n) {
            return Err(EstimationError::dims("Q", format!("{n}x{n}"), shape(&self.q)));
        }
        if self.r.shape() != (m, m) {
            return Err(EstimationError::dims("R", format!("{m}x{m}"), shape(&self.r)));
        }
        for (name, mat) in [("A", &self.a), ("B", &self.b), ("H", &self.h), ("Q", &self.q), ("R", &self.r)] {
            ensure_finite_matrix(mat, name)?;
        }
        for mat in [&self.q, &self.r] {
            if !is_symmetric(mat) || !is_psd(mat) {
                return Err(EstimationError::InvalidConfig(
                    "noise covariances must be symmetric positive semi-definite".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Time update: `m⁻ = A·m + B·u`, `P⁻ = A·P·Aᵀ + Q`.
pub fn kf_predict(b: &GaussianBelief, sys: &LinearSystem, u: &Vector) -> Result<GaussianBelief> {
    if b.dim() != sys.state_dim() {
        return Err(EstimationError::dims("kf_predict state", sys.state_dim(), b.dim()));
    }
    if u.len() != sys.b.ncols() {
        return Err(EstimationError::dims("kf_predict input", sys.b.ncols(), u.len()));
    }
    let mean = &sys.a * &b.mean + &sys.b * u;
    let cov = symmetrize(&(&sys.a * &b.cov * sys.a.transpose() + &sys.q));
    Ok(GaussianBelief { mean, cov })
}

/// Measurement update; returns the posterior and the gain used.
pub fn kf_update(
    b_minus: &GaussianBelief,
    sys: &LinearSystem,
    z: &Vector,
) -> Result<(GaussianBelief, Matrix)> {
    condition_on_measurement(b_minus, &sys.h, &sys.r, z)
}

/// Runs predict/update over paired input and measurement sequences and
/// returns the post-update belief at every step.
pub fn kf_run(
    sys: &LinearSystem,
    b0: &GaussianBelief,
    inputs: &[Vector],
    measurements: &[Vector],
) -> Result<Vec<GaussianBelief>> {
    Ok(kf_run_with_gains(sys, b0, inputs, measurements)?
        .into_iter()
        .map(|(belief, _)| belief)
        .collect())
}

/// Same as [`kf_run`] but also keeps the gain of every step.
pub fn kf_run_with_gains(
    sys: &LinearSystem,
    b0: &GaussianBelief,
    inputs: &[Vector],
    measurements: &[Vector],
) -> Result<Vec<(GaussianBelief, Matrix)>> {
    if inputs.len() != measurements.len() {
        return Err(EstimationError::dims(
            "kf_run sequence lengths",
            inputs.len(),
            measurements.len(),
        ));
    }
    let mut belief = b0.clone();
    let mut out = Vec::with_capacity(measurements.len());
    for (step, (u, z)) in inputs.iter().zip(measurements).enumerate() {
        let predicted = kf_predict(&belief, sys, u).map_err(|e| e.at_step(step))?;
        let (posterior, gain) = kf_update(&predicted, sys, z).map_err(|e| e.at_step(step))?;
        belief = posterior.clone();
        out.push((posterior, gain));
    }
    Ok(out)
}

/// Batch weighted least squares in information form.
///
/// `cov = (HᵀR⁻¹H + P₀⁻¹)⁻¹`, `mean = cov·(HᵀR⁻¹z + P₀⁻¹m₀)`; with no prior
/// the prior information is exactly zero.
pub fn batch_ls(
    h_stack: &Matrix,
    r_stack: &Matrix,
    z_stack: &Vector,
    prior: Option<&GaussianBelief>,
) -> Result<GaussianBelief> {
    let m = z_stack.len();
    let n = match prior {
        Some(p) => p.dim(),
        None => h_stack.ncols(),
    };
    if h_stack.nrows() != m || h_stack.ncols() != n {
        return Err(EstimationError::dims(
            "batch_ls H",
            format!("{m}x{n}"),
            format!("{}x{}", h_stack.nrows(), h_stack.ncols()),
        ));
    }
    if r_stack.shape() != (m, m) {
        return Err(EstimationError::dims(
            "batch_ls R",
            format!("{m}x{m}"),
            format!("{}x{}", r_stack.nrows(), r_stack.ncols()),
        ));
    }

    let mut information = Matrix::zeros(n, n);
    let mut info_vector = Vector::zeros(n);
    if m > 0 {
        let rinv_h = solve_spd(r_stack, h_stack)?;
        let rinv_z = solve_spd(r_stack, &Matrix::from_column_slice(m, 1, z_stack.as_slice()))?;
        information += h_stack.transpose() * &rinv_h;
        info_vector += (h_stack.transpose() * rinv_z).column(0);
    }
    if let Some(p) = prior {
        let eye = Matrix::identity(n, n);
        let p0_inv = symmetrize(&solve_spd(&p.cov, &eye)?);
        info_vector += &p0_inv * &p.mean;
        information += p0_inv;
    }
    let information = symmetrize(&information);
    let cov = symmetrize(
        &solve_spd(&information, &Matrix::identity(n, n)).map_err(|_| EstimationError::Unobservable)?,
    );
    let mean = &cov * info_vector;
    Ok(GaussianBelief { mean, cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(x: f64) -> Matrix {
        Matrix::from_element(1, 1, x)
    }

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn predict_identity_is_noop() {
        let sys = LinearSystem::new(
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            Matrix::identity(2, 2),
            Matrix::zeros(2, 2),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let b = GaussianBelief::new(v(&[1.0, 2.0]), Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        assert_eq!(kf_predict(&b, &sys, &v(&[5.0])).unwrap(), b);
    }

    #[test]
    fn predict_scalar_dynamic_illustration() {
        let sys = LinearSystem::new(s(1.0), s(1.0), s(1.0), s(1.0), s(1.0)).unwrap();
        let b = GaussianBelief::scalar(10.0, 4.0).unwrap();
        let p = kf_predict(&b, &sys, &v(&[-2.0])).unwrap();
        assert_eq!((p.mean[0], p.cov[(0, 0)]), (8.0, 5.0));
    }

    #[test]
    fn predict_shear() {
        let sys = LinearSystem::autonomous(
            Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            Matrix::identity(2, 2),
            Matrix::zeros(2, 2),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let b = GaussianBelief::new(v(&[0.0, 0.0]), Matrix::identity(2, 2)).unwrap();
        let p = kf_predict(&b, &sys, &Vector::zeros(0)).unwrap();
        assert_eq!(p.cov, Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]));
    }

    #[test]
    fn update_gain_cases() {
        let sys = LinearSystem::autonomous(s(1.0), s(1.0), s(0.0), s(4.0)).unwrap();
        let (post, k) = kf_update(&GaussianBelief::scalar(0.0, 4.0).unwrap(), &sys, &v(&[2.0])).unwrap();
        assert!((post.mean[0] - 1.0).abs() < 1e-15);
        assert!((post.cov[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((k[(0, 0)] - 0.5).abs() < 1e-15);

        // Very uncertain prediction: the measurement dominates.
        let (post, k) = kf_update(&GaussianBelief::scalar(0.0, 1e9).unwrap(), &sys, &v(&[2.0])).unwrap();
        assert!((k[(0, 0)] - 1.0).abs() < 1e-8);
        assert!((post.mean[0] - 2.0).abs() < 1e-7);

        // Near-certain prediction: the measurement is disregarded.
        let (post, k) = kf_update(&GaussianBelief::scalar(3.0, 1e-12).unwrap(), &sys, &v(&[2.0])).unwrap();
        assert!(k[(0, 0)] < 1e-12);
        assert!((post.mean[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gain_is_monotone_in_prior_and_noise() {
        let gain = |p: f64, r: f64| {
            let sys = LinearSystem::autonomous(s(1.0), s(1.0), s(0.0), s(r)).unwrap();
            kf_update(&GaussianBelief::scalar(0.0, p).unwrap(), &sys, &v(&[1.0])).unwrap().1[(0, 0)]
        };
        let ps = [0.1, 0.5, 1.0, 3.0, 10.0, 100.0];
        for w in ps.windows(2) {
            assert!(gain(w[0], 1.0) < gain(w[1], 1.0));
            assert!(gain(1.0, w[0]) > gain(1.0, w[1]));
        }
    }

    #[test]
    fn run_empty_and_two_measurements() {
        let sys = LinearSystem::autonomous(s(1.0), s(1.0), s(0.0), s(1.0)).unwrap();
        let b0 = GaussianBelief::scalar(0.0, 1e12).unwrap();
        assert!(kf_run(&sys, &b0, &[], &[]).unwrap().is_empty());

        let none = vec![Vector::zeros(0); 2];
        let out = kf_run(&sys, &b0, &none, &[v(&[0.0]), v(&[2.0])]).unwrap();
        let last = out.last().unwrap();
        assert!((last.mean[0] - 1.0).abs() < 1e-9);
        assert!((last.cov[(0, 0)] - 0.5).abs() < 1e-9);

        assert!(kf_run(&sys, &b0, &none[..1], &[v(&[0.0]), v(&[2.0])]).is_err());
    }

    #[test]
    fn run_error_carries_step() {
        let sys = LinearSystem::autonomous(s(1.0), s(1.0), s(0.0), s(0.0)).unwrap();
        let b0 = GaussianBelief::scalar(0.0, 1.0).unwrap();
        let none = vec![Vector::zeros(0); 3];
        // Exact measurements collapse the covariance; the next update has S = 0.
        let err = kf_run(&sys, &b0, &none, &[v(&[1.0]), v(&[1.0]), v(&[1.0])]).unwrap_err();
        assert!(matches!(err, EstimationError::AtStep { step: 1, .. }));
    }

    #[test]
    fn batch_average_and_prior_only() {
        let h = Matrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let b = batch_ls(&h, &Matrix::identity(2, 2), &v(&[1.0, 3.0]), None).unwrap();
        assert!((b.mean[0] - 2.0).abs() < 1e-15);
        assert!((b.cov[(0, 0)] - 0.5).abs() < 1e-15);

        let prior = GaussianBelief::new(v(&[1.0, 2.0]), Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let b = batch_ls(&Matrix::zeros(0, 2), &Matrix::zeros(0, 0), &Vector::zeros(0), Some(&prior)).unwrap();
        assert!((&b.mean - &prior.mean).amax() < 1e-12);
        assert!((&b.cov - &prior.cov).amax() < 1e-12);
    }

    #[test]
    fn batch_unobservable() {
        let h = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let err = batch_ls(&h, &Matrix::identity(2, 2), &v(&[1.0, 2.0]), None).unwrap_err();
        assert_eq!(err, EstimationError::Unobservable);
    }

    #[test]
    fn batch_without_prior_approaches_diffuse_recursive() {
        let sys = LinearSystem::autonomous(s(1.0), s(1.0), s(0.0), s(2.0)).unwrap();
        let zs = [v(&[1.0]), v(&[4.0]), v(&[-2.0])];
        let none = vec![Vector::zeros(0); zs.len()];
        let rec = kf_run(&sys, &GaussianBelief::scalar(0.0, 1e10).unwrap(), &none, &zs).unwrap();
        let h = Matrix::from_element(3, 1, 1.0);
        let batch = batch_ls(&h, &(Matrix::identity(3, 3) * 2.0), &v(&[1.0, 4.0, -2.0]), None).unwrap();
        let last = rec.last().unwrap();
        assert!((last.mean[0] - batch.mean[0]).abs() < 1e-8);
        assert!((last.cov[(0, 0)] - batch.cov[(0, 0)]).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn variance_non_increasing_without_process_noise(
            a in 0.2f64..1.0,
            h in 0.5f64..2.0,
            r in 0.1f64..10.0,
            p0 in 0.1f64..100.0,
            zs in prop::collection::vec(-10.0f64..10.0, 1..20),
        ) {
            let sys = LinearSystem::autonomous(s(a), s(h), s(0.0), s(r)).unwrap();
            let none = vec![Vector::zeros(0); zs.len()];
            let zs: Vec<Vector> = zs.iter().map(|z| v(&[*z])).collect();
            let out = kf_run(&sys, &GaussianBelief::scalar(0.0, p0).unwrap(), &none, &zs).unwrap();
            let mut prev = p0;
            for b in &out {
                let var = b.cov[(0, 0)];
                prop_assert!(var <= prev * (1.0 + 1e-12));
                prev = var;
            }
        }
    }
}
