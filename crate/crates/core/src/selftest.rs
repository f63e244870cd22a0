//! Property checks run by `nlest selftest`: nonlinear filters against the
//! linear Kalman filter on random linear-Gaussian systems, and sigma-set
//! reconstruction of random beliefs.

use crate::ekf::{EkfFilter, LkfFilter};
use crate::error::Result;
use crate::filter::RecursiveFilter;
use crate::gaussian::GaussianBelief;
use crate::kalman::{kf_predict, kf_update, LinearSystem};
use crate::linalg::{symmetrize, Matrix, Vector};
use crate::models::LinearModel;
use crate::sim::GaussianStream;
use crate::ukf::{sigma_points, ukf_weights, UkfFilter, UkfParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Largest relative error observed.
    pub worst: f64,
    pub tolerance: f64,
}

fn rel_err_vec(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn rel_err_mat(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn random_matrix(g: &mut GaussianStream, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * g.next_normal())
}

fn random_spd(g: &mut GaussianStream, n: usize, scale: f64, floor: f64) -> Matrix {
    let a = random_matrix(g, n, n, 1.0);
    symmetrize(&((&a * a.transpose()) * scale + Matrix::identity(n, n) * floor))
}

/// A random stable linear-Gaussian system with `n` states and `m ≤ n`
/// measurements, plus an initial belief.
pub fn random_linear_problem(g: &mut GaussianStream, n: usize, m: usize) -> Result<(LinearSystem, GaussianBelief)> {
    let a = Matrix::identity(n, n) * 0.85 + random_matrix(g, n, n, 0.15);
    let h = random_matrix(g, m, n, 1.0) + Matrix::identity(m, n);
    let q = random_spd(g, n, 0.1, 0.01);
    let r = random_spd(g, m, 0.2, 0.05);
    let sys = LinearSystem::autonomous(a, h, q, r)?;
    let mean = Vector::from_fn(n, |_, _| 5.0 * g.next_normal());
    let cov = random_spd(g, n, 1.0, 0.5);
    Ok((sys, GaussianBelief::new(mean, cov)?))
}

/// LKF, EKF and UKF against the linear KF on `systems` random linear models
/// (`n` cycling through 1, 2, 3) for `steps` steps each.
pub fn linear_equivalence(seed: u64, systems: usize, steps: usize, tolerance: f64) -> Result<CheckOutcome> {
    let mut g = GaussianStream::new(seed, 0);
    let mut worst = 0.0_f64;
    for s in 0..systems {
        let n = 1 + s % 3;
        let m = 1 + (s / 3) % n;
        let (sys, b0) = random_linear_problem(&mut g, n, m)?;
        let model = LinearModel::new(sys.clone())?;
        let none = Vector::zeros(0);
        let mut kf = b0.clone();
        let mut lkf = LkfFilter::new(&model, b0.clone())?;
        let mut ekf = EkfFilter::new(&model, b0.clone())?;
        let mut ukf = UkfFilter::new(&model, b0.clone(), UkfParams::default())?;
        let mut x = b0.mean.clone();
        for _ in 0..steps {
            x = &sys.a * &x + random_matrix(&mut g, n, 1, 0.3).column(0);
            let z = &sys.h * &x + random_matrix(&mut g, m, 1, 0.3).column(0);
            kf = kf_update(&kf_predict(&kf, &sys, &none)?, &sys, &z)?.0;
            lkf = lkf.step(&z)?;
            ekf = ekf.step(&z)?;
            ukf = ukf.step(&z)?;
            for b in [lkf.belief(), ekf.belief(), ukf.belief()] {
                worst = worst.max(rel_err_vec(&b.mean, &kf.mean));
                worst = worst.max(rel_err_mat(&b.cov, &kf.cov));
            }
        }
    }
    Ok(CheckOutcome {
        name: "linear equivalence (LKF/EKF/UKF vs KF)",
        passed: worst <= tolerance,
        worst,
        tolerance,
    })
}

/// Weighted sigma-point mean and covariance against the generating belief
/// for `trials` random beliefs of dimension 1..=5 at default parameters.
pub fn sigma_reconstruction(seed: u64, trials: usize) -> Result<CheckOutcome> {
    let mut g = GaussianStream::new(seed, 0);
    let params = UkfParams::default();
    let mut worst = 0.0_f64;
    let mut mean_ok = true;
    for t in 0..trials {
        let n = 1 + t % 5;
        let cov = random_spd(&mut g, n, 1.0, 0.1);
        let mean = Vector::from_fn(n, |_, _| 10.0 * g.next_normal());
        let b = GaussianBelief::new(mean, cov)?;
        let set = sigma_points(&b, &ukf_weights(n, &params)?)?;
        mean_ok &= rel_err_vec(&set.mean(), &b.mean) <= 1e-12;
        worst = worst.max(rel_err_mat(&set.covariance_about(&b.mean), &b.cov));
    }
    let tolerance = 1e-9;
    Ok(CheckOutcome {
        name: "sigma-set reconstruction",
        passed: mean_ok && worst <= tolerance,
        worst,
        tolerance,
    })
}

/// Runs both suites with fixed seeds.
pub fn run_all() -> Result<Vec<CheckOutcome>> {
    Ok(vec![linear_equivalence(2024, 20, 50, 1e-6)?, sigma_reconstruction(2025, 100)?])
}
