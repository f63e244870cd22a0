//! Nonlinear model contract and the falling-body tracking model.
//!
//! The falling body moves along the vertical line of sight of a radar at the
//! origin. State is `[altitude ft, velocity ft/s, ballistic coefficient]`
//! with velocity negative when falling. Continuous dynamics:
//!
//! ```text
//! ẋ₁ = x₂
//! ẋ₂ = ρ(x₁)·x₂² / (2·x₃) − g,   ρ(x₁) = ρ₀·exp(−x₁/k_ρ)
//! ẋ₃ = 0
//! ```
//!
//! discretized with one Euler–Maruyama step per sample interval. The model
//! itself is deterministic; any noise increment is supplied by the caller.

use crate::error::{EstimationError, Result};
use crate::kalman::LinearSystem;
use crate::linalg::{Matrix, Vector};

/// Discrete-time nonlinear state-space model with additive noise.
pub trait NonlinearModel {
    fn state_dim(&self) -> usize;
    fn measurement_dim(&self) -> usize;
    /// Sample interval in seconds.
    fn dt(&self) -> f64;
    /// Discrete transition `x(k+1) = f(x(k))`.
    fn transition(&self, x: &Vector) -> Result<Vector>;
    /// `∂f/∂x` of the discrete transition.
    fn transition_jacobian(&self, x: &Vector) -> Result<Matrix>;
    /// Measurement function `h(x)`.
    fn observe(&self, x: &Vector) -> Result<Vector>;
    /// `∂h/∂x`.
    fn observation_jacobian(&self, x: &Vector) -> Result<Matrix>;
    fn process_noise(&self) -> &Matrix;
    fn measurement_noise(&self) -> &Matrix;
}

/// Physical constants of the falling-body problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallingBodyParams {
    /// Sea-level air density, slugs/ft³.
    pub rho0: f64,
    /// Gravitational acceleration, ft/s².
    pub g: f64,
    /// Atmospheric scale height, ft.
    pub k_rho: f64,
    /// Integration step, s.
    pub dt: f64,
}

impl Default for FallingBodyParams {
    fn default() -> Self {
        FallingBodyParams {
            rho0: 2.377e-3,
            g: 32.4,
            k_rho: 22_000.0,
            dt: 1.0,
        }
    }
}

impl FallingBodyParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [("rho0", self.rho0), ("g", self.g), ("k_rho", self.k_rho), ("dt", self.dt)];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(EstimationError::InvalidConfig(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }
}

fn check_state(x: &Vector) -> Result<()> {
    if x.len() != 3 {
        return Err(EstimationError::dims("falling-body state", 3, x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EstimationError::NonFinite("falling-body state"));
    }
    if x[2] == 0.0 {
        return Err(EstimationError::ZeroBallisticCoefficient);
    }
    Ok(())
}

/// Exponential atmosphere `ρ₀·exp(−x₁/k_ρ)`. Negative altitudes extrapolate.
pub fn air_density(x1: f64, p: &FallingBodyParams) -> f64 {
    p.rho0 * (-x1 / p.k_rho).exp()
}

/// Continuous-time derivative `[x₂, ρx₂²/(2x₃) − g, 0]`.
pub fn fb_deriv(x: &Vector, p: &FallingBodyParams) -> Result<Vector> {
    check_state(x)?;
    let rho = air_density(x[0], p);
    let accel = rho * x[1] * x[1] / (2.0 * x[2]) - p.g;
    Ok(Vector::from_column_slice(&[x[1], accel, 0.0]))
}

/// One Euler–Maruyama step `x + f(x)·dt + w`.
///
/// `w` is a pre-drawn noise increment already scaled for the step;
/// `None` gives the deterministic Euler step.
pub fn fb_step(x: &Vector, p: &FallingBodyParams, w: Option<&Vector>) -> Result<Vector> {
    if !(p.dt >= 0.0) {
        return Err(EstimationError::InvalidConfig(format!("dt must be non-negative, got {}", p.dt)));
    }
    let mut next = x + fb_deriv(x, p)? * p.dt;
    if let Some(w) = w {
        if w.len() != 3 {
            return Err(EstimationError::dims("process noise increment", 3, w.len()));
        }
        next += w;
    }
    Ok(next)
}

/// Jacobian of the discrete map `x ↦ x + dt·f(x)`, i.e. `I + dt·∂f/∂x`.
pub fn fb_jacobian(x: &Vector, p: &FallingBodyParams) -> Result<Matrix> {
    check_state(x)?;
    let dt = p.dt;
    let (x2, x3) = (x[1], x[2]);
    let rho = air_density(x[0], p);
    let drag = rho * x2 * x2 / (2.0 * x3);
    #[rustfmt::skip]
    let jac = Matrix::from_row_slice(3, 3, &[
        1.0,                     dt,                           0.0,
        -dt * drag / p.k_rho,    1.0 + dt * rho * x2 / x3,     -dt * drag / x3,
        0.0,                     0.0,                          1.0,
    ]);
    Ok(jac)
}

/// Central-difference Jacobian of `map` at `x`.
///
/// The step for coordinate `j` is `eps·max(1, |x_j|)`.
pub fn fd_jacobian<F>(map: F, x: &Vector, eps: f64) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    assert!(eps > 0.0, "finite-difference step must be positive");
    let n = x.len();
    let m = map(x).len();
    let mut jac = Matrix::zeros(m, n);
    for j in 0..n {
        let step = eps * x[j].abs().max(1.0);
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[j] += step;
        minus[j] -= step;
        // use the realized spacing so rounding of x ± step does not bias the slope
        let spacing = plus[j] - minus[j];
        let column = (map(&plus) - map(&minus)) / spacing;
        jac.set_column(j, &column);
    }
    jac
}

/// Falling body observed through a range-only radar at the origin:
/// `z = x₁ + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct FallingBody {
    pub params: FallingBodyParams,
    q: Matrix,
    r: Matrix,
}

impl FallingBody {
    pub fn new(params: FallingBodyParams, q: Matrix, r: f64) -> Result<Self> {
        params.validate()?;
        if q.shape() != (3, 3) {
            return Err(EstimationError::dims("falling-body Q", "3x3", format!("{}x{}", q.nrows(), q.ncols())));
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(EstimationError::InvalidConfig(format!("measurement variance must be >= 0, got {r}")));
        }
        Ok(FallingBody {
            params,
            q,
            r: Matrix::from_element(1, 1, r),
        })
    }
}

impl NonlinearModel for FallingBody {
    fn state_dim(&self) -> usize {
        3
    }

    fn measurement_dim(&self) -> usize {
        1
    }

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn transition(&self, x: &Vector) -> Result<Vector> {
        fb_step(x, &self.params, None)
    }

    fn transition_jacobian(&self, x: &Vector) -> Result<Matrix> {
        fb_jacobian(x, &self.params)
    }

    fn observe(&self, x: &Vector) -> Result<Vector> {
        if x.len() != 3 {
            return Err(EstimationError::dims("falling-body state", 3, x.len()));
        }
        Ok(Vector::from_element(1, x[0]))
    }

    fn observation_jacobian(&self, x: &Vector) -> Result<Matrix> {
        if x.len() != 3 {
            return Err(EstimationError::dims("falling-body state", 3, x.len()));
        }
        Ok(Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]))
    }

    fn process_noise(&self) -> &Matrix {
        &self.q
    }

    fn measurement_noise(&self) -> &Matrix {
        &self.r
    }
}

/// A linear-Gaussian system seen through the nonlinear-model contract.
/// Its Jacobians are exact, which makes it the reference case for the
/// nonlinear filters.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    system: LinearSystem,
    dt: f64,
}

impl LinearModel {
    /// Wraps an autonomous system; any input matrix is ignored.
    pub fn new(system: LinearSystem) -> Result<Self> {
        system.validate()?;
        Ok(LinearModel { system, dt: 1.0 })
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }
}

impl NonlinearModel for LinearModel {
    fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    fn measurement_dim(&self) -> usize {
        self.system.measurement_dim()
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn transition(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.state_dim() {
            return Err(EstimationError::dims("linear model state", self.state_dim(), x.len()));
        }
        Ok(&self.system.a * x)
    }

    fn transition_jacobian(&self, _x: &Vector) -> Result<Matrix> {
        Ok(self.system.a.clone())
    }

    fn observe(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.state_dim() {
            return Err(EstimationError::dims("linear model state", self.state_dim(), x.len()));
        }
        Ok(&self.system.h * x)
    }

    fn observation_jacobian(&self, _x: &Vector) -> Result<Matrix> {
        Ok(self.system.h.clone())
    }

    fn process_noise(&self) -> &Matrix {
        &self.system.q
    }

    fn measurement_noise(&self) -> &Matrix {
        &self.system.r
    }
}
