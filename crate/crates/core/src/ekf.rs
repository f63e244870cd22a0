//! Linearized Kalman filter (Jacobians frozen at the initial estimate) and
//! the extended Kalman filter (re-linearized every step).
//!
//! Both propagate covariance in discrete time, `P⁻ = F·P·Fᵀ + Q`, with `F`
//! the Jacobian of the discrete transition. The LKF also propagates its mean
//! with the frozen linear map `A_lin·x`, so on a strongly nonlinear model it
//! drifts away from the truth between measurements.

use crate::error::{EstimationError, Result};
use crate::filter::{repair_covariance, FilterKind, RecursiveFilter};
use crate::gaussian::{condition_on_measurement, GaussianBelief};
use crate::linalg::{solve_spd, symmetrize, Matrix, Vector};
use crate::models::NonlinearModel;

fn check_measurement(z: &Vector, expected: usize) -> Result<()> {
    if z.len() != expected {
        return Err(EstimationError::dims("measurement", expected, z.len()));
    }
    Ok(())
}

/// Kalman filter on the model linearized once about the initial estimate.
#[derive(Debug, Clone)]
pub struct LkfFilter<'m, M: NonlinearModel + ?Sized> {
    model: &'m M,
    a_lin: Matrix,
    h_lin: Matrix,
    belief: GaussianBelief,
    steps: usize,
    jitter_count: usize,
}

impl<'m, M: NonlinearModel + ?Sized> LkfFilter<'m, M> {
    pub fn new(model: &'m M, belief: GaussianBelief) -> Result<Self> {
        if belief.dim() != model.state_dim() {
            return Err(EstimationError::dims("LKF initial belief", model.state_dim(), belief.dim()));
        }
        let a_lin = model.transition_jacobian(&belief.mean)?;
        let h_lin = model.observation_jacobian(&belief.mean)?;
        Ok(LkfFilter {
            model,
            a_lin,
            h_lin,
            belief,
            steps: 0,
            jitter_count: 0,
        })
    }

    /// Transition Jacobian frozen at construction.
    pub fn a_lin(&self) -> &Matrix {
        &self.a_lin
    }

    pub fn h_lin(&self) -> &Matrix {
        &self.h_lin
    }

    /// Predict with `A_lin`, then a linear update with `H_lin` and `R`.
    pub fn lkf_step(&self, z: &Vector) -> Result<Self> {
        check_measurement(z, self.h_lin.nrows())?;
        let name = FilterKind::Lkf.name();
        let a = &self.a_lin;
        let mean = a * &self.belief.mean;
        let cov = symmetrize(&(a * &self.belief.cov * a.transpose() + self.model.process_noise()));
        let (cov, jit_predict) = repair_covariance(cov, name, self.steps)?;
        let predicted = GaussianBelief { mean, cov };

        let (posterior, _gain) =
            condition_on_measurement(&predicted, &self.h_lin, self.model.measurement_noise(), z)?;
        let (cov, jit_update) = repair_covariance(posterior.cov, name, self.steps)?;

        Ok(LkfFilter {
            model: self.model,
            a_lin: self.a_lin.clone(),
            h_lin: self.h_lin.clone(),
            belief: GaussianBelief {
                mean: posterior.mean,
                cov,
            },
            steps: self.steps + 1,
            jitter_count: self.jitter_count + jit_predict as usize + jit_update as usize,
        })
    }
}

impl<M: NonlinearModel + ?Sized> RecursiveFilter for LkfFilter<'_, M> {
    fn kind(&self) -> FilterKind {
        FilterKind::Lkf
    }

    fn belief(&self) -> &GaussianBelief {
        &self.belief
    }

    fn steps(&self) -> usize {
        self.steps
    }

    fn jitter_count(&self) -> usize {
        self.jitter_count
    }

    fn step(&self, z: &Vector) -> Result<Self> {
        self.lkf_step(z)
    }
}

/// Extended Kalman filter.
#[derive(Debug, Clone)]
pub struct EkfFilter<'m, M: NonlinearModel + ?Sized> {
    model: &'m M,
    belief: GaussianBelief,
    steps: usize,
    jitter_count: usize,
}

impl<'m, M: NonlinearModel + ?Sized> EkfFilter<'m, M> {
    pub fn new(model: &'m M, belief: GaussianBelief) -> Result<Self> {
        if belief.dim() != model.state_dim() {
            return Err(EstimationError::dims("EKF initial belief", model.state_dim(), belief.dim()));
        }
        Ok(EkfFilter {
            model,
            belief,
            steps: 0,
            jitter_count: 0,
        })
    }

    fn with_belief(&self, belief: GaussianBelief, jittered: bool, advance: bool) -> Self {
        EkfFilter {
            model: self.model,
            belief,
            steps: self.steps + advance as usize,
            jitter_count: self.jitter_count + jittered as usize,
        }
    }

    /// Mean through the nonlinear transition; covariance through the
    /// Jacobian evaluated at the pre-propagation mean.
    pub fn ekf_predict(&self) -> Result<Self> {
        let x = &self.belief.mean;
        let f = self.model.transition_jacobian(x)?;
        let mean = self.model.transition(x)?;
        let cov = symmetrize(&(&f * &self.belief.cov * f.transpose() + self.model.process_noise()));
        let (cov, jittered) = repair_covariance(cov, FilterKind::Ekf.name(), self.steps)?;
        Ok(self.with_belief(GaussianBelief { mean, cov }, jittered, false))
    }

    /// Update with `H` evaluated at the predicted mean and the nonlinear
    /// residual `z − h(x⁻)`; `P⁺ = (I − K·H)·P⁻`.
    pub fn ekf_update(&self, z: &Vector) -> Result<Self> {
        check_measurement(z, self.model.measurement_dim())?;
        let x = &self.belief.mean;
        let p = &self.belief.cov;
        let h = self.model.observation_jacobian(x)?;
        let hp = &h * p;
        let innovation_cov = symmetrize(&(&hp * h.transpose() + self.model.measurement_noise()));
        let gain = solve_spd(&innovation_cov, &hp)?.transpose();
        let residual = z - self.model.observe(x)?;
        let mean = x + &gain * residual;
        let n = x.len();
        let cov = symmetrize(&((Matrix::identity(n, n) - &gain * &h) * p));
        let (cov, jittered) = repair_covariance(cov, FilterKind::Ekf.name(), self.steps)?;
        Ok(self.with_belief(GaussianBelief { mean, cov }, jittered, true))
    }
}

impl<M: NonlinearModel + ?Sized> RecursiveFilter for EkfFilter<'_, M> {
    fn kind(&self) -> FilterKind {
        FilterKind::Ekf
    }

    fn belief(&self) -> &GaussianBelief {
        &self.belief
    }

    fn steps(&self) -> usize {
        self.steps
    }

    fn jitter_count(&self) -> usize {
        self.jitter_count
    }

    fn step(&self, z: &Vector) -> Result<Self> {
        self.ekf_predict()?.ekf_update(z)
    }
}
