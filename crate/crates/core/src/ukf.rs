//! Scaled unscented transform and the additive-noise unscented Kalman filter.
//!
//! Sigma points span the state only; process and measurement noise enter
//! as additive covariances after each transform. The matrix square root is
//! the lower Cholesky factor of `(L + λ)·P`, whose columns give points
//! `1..=L` (added) and `L+1..=2L` (subtracted).
//!
//! Weighted means are accumulated as `Y₀ + Σᵢ Wᵢ·(Yᵢ − Y₀)` rather than
//! `Σᵢ Wᵢ·Yᵢ`. The two agree because the mean weights sum to one, but with
//! small `α` the weights reach ±10⁶ and the direct sum loses most of its
//! significant digits.

use crate::error::{EstimationError, Result};
use crate::filter::{repair_covariance, FilterKind, RecursiveFilter};
use crate::gaussian::GaussianBelief;
use crate::linalg::{cholesky_lower, solve_spd, symmetrize, Matrix, Vector};
use crate::models::NonlinearModel;

/// Sigma-point scaling parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UkfParams {
    /// Spread of the sigma points around the mean.
    pub alpha: f64,
    /// Prior knowledge of the distribution; 2 is optimal for Gaussians.
    pub beta: f64,
    /// Secondary scaling.
    pub kappa: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        UkfParams {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl UkfParams {
    pub fn new(alpha: f64, beta: f64, kappa: f64) -> Result<Self> {
        let p = UkfParams { alpha, beta, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(EstimationError::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !self.beta.is_finite() || !self.kappa.is_finite() {
            return Err(EstimationError::InvalidConfig("beta and kappa must be finite".into()));
        }
        Ok(())
    }

    /// `L + λ = α²(L + κ)`, evaluated directly so small `α` does not
    /// cancel against `L`.
    pub fn spread(&self, dim: usize) -> f64 {
        self.alpha * self.alpha * (dim as f64 + self.kappa)
    }

    /// `λ = α²(L + κ) − L`.
    pub fn lambda(&self, dim: usize) -> f64 {
        self.spread(dim) - dim as f64
    }
}

/// Mean and covariance weights for `2L + 1` sigma points.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaWeights {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
    pub lambda: f64,
    /// `L + λ`.
    pub spread: f64,
}

impl SigmaWeights {
    pub fn dim(&self) -> usize {
        (self.mean.len() - 1) / 2
    }
}

/// `W₀ᵐ = λ/(L+λ)`, `W₀ᶜ = W₀ᵐ + (1 − α² + β)`, `Wᵢ = 1/(2(L+λ))`.
pub fn ukf_weights(dim: usize, p: &UkfParams) -> Result<SigmaWeights> {
    if dim == 0 {
        return Err(EstimationError::dims("sigma-point dimension", ">= 1", 0));
    }
    p.validate()?;
    let scale = p.spread(dim);
    if scale.abs() <= f64::EPSILON * dim as f64 {
        return Err(EstimationError::DegenerateScaling);
    }
    let lambda = scale - dim as f64;
    let (w0, wi) = normalized_mean_weights(dim, scale);
    let mut mean = vec![wi; 2 * dim + 1];
    mean[0] = w0;
    let mut cov = mean.clone();
    cov[0] = w0 + (1.0 - p.alpha * p.alpha + p.beta);
    Ok(SigmaWeights {
        mean,
        cov,
        lambda,
        spread: scale,
    })
}

/// `(W₀, Wᵢ)` with `Wᵢ ≈ 1/(2(L+λ))` and `W₀ = 1 − 2L·Wᵢ` holding exactly.
///
/// With small `α` the weights are of order 10⁶, and rounding `W₀` and `Wᵢ`
/// independently leaves their sum off by ~10⁻¹⁰. `Wᵢ` is stepped down
/// by a few ulps until both the product `2L·Wᵢ` and the difference `1 − 2L·Wᵢ`
/// are exact in binary floating point.
fn normalized_mean_weights(dim: usize, spread: f64) -> (f64, f64) {
    let count = 2.0 * dim as f64;
    let mut wi = 0.5 / spread;
    for _ in 0..64 {
        let total = count * wi;
        let product_exact = count.mul_add(wi, -total) == 0.0;
        let w0 = 1.0 - total;
        if product_exact && two_sum_error(1.0, -total, w0) == 0.0 {
            return (w0, wi);
        }
        wi = if wi > 0.0 { wi.next_down() } else { wi.next_up() };
    }
    let wi = 0.5 / spread;
    (1.0 - dim as f64 / spread, wi)
}

/// Rounding error of `s = fl(a + b)` (Knuth's TwoSum).
fn two_sum_error(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

/// `2L + 1` sigma points with their weights.
///
/// Points are stored as a common center plus per-point offsets, point 0
/// having a zero offset. For a freshly drawn set the offsets are exactly
/// `±` the square-root columns, so symmetric pairs cancel exactly in
/// weighted sums.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSet {
    pub center: Vector,
    pub offsets: Vec<Vector>,
    pub weights: SigmaWeights,
}

impl SigmaSet {
    /// Builds a set from materialized points, centered on point 0.
    pub fn from_points(points: &[Vector], weights: SigmaWeights) -> Self {
        let center = points[0].clone();
        let offsets = points.iter().map(|p| p - &center).collect();
        SigmaSet { center, offsets, weights }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn point(&self, i: usize) -> Vector {
        &self.center + &self.offsets[i]
    }

    pub fn points(&self) -> Vec<Vector> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// `Σ Wᵐᵢ·χᵢ`.
    pub fn mean(&self) -> Vector {
        &self.center + paired_sum(&self.offsets, &self.weights.mean)
    }

    /// `Σ Wᶜᵢ·(χᵢ − c)(χᵢ − c)ᵀ`.
    pub fn covariance_about(&self, c: &Vector) -> Matrix {
        let shift = &self.center - c;
        let devs: Vec<Vector> = self.offsets.iter().map(|d| &shift + d).collect();
        weighted_outer(&devs, &devs, &self.weights.cov)
    }
}

/// `Σ_{i≥1} Wᵢ·dᵢ`, adding each mirrored pair `(i, i+L)` before
/// accumulating so exactly opposite offsets cancel exactly.
fn paired_sum(devs: &[Vector], weights: &[f64]) -> Vector {
    let half = (devs.len() - 1) / 2;
    let mut acc = Vector::zeros(devs[0].len());
    for i in 1..=half {
        acc += &devs[i] * weights[i] + &devs[i + half] * weights[i + half];
    }
    acc
}

/// `Y₀ + Σᵢ Wᵢ·(Yᵢ − Y₀)`.
fn weighted_mean(points: &[Vector], weights: &[f64]) -> Vector {
    let anchor = &points[0];
    let devs: Vec<Vector> = points.iter().map(|y| y - anchor).collect();
    anchor + paired_sum(&devs, weights)
}

fn weighted_outer(dxs: &[Vector], dys: &[Vector], weights: &[f64]) -> Matrix {
    let mut acc = Matrix::zeros(dxs[0].len(), dys[0].len());
    for ((dx, dy), w) in dxs.iter().zip(dys).zip(weights) {
        acc += (dx * dy.transpose()) * *w;
    }
    acc
}

/// Sigma points `x̄`, `x̄ ± (√((L+λ)P))ᵢ` for the belief `b`.
pub fn sigma_points(b: &GaussianBelief, weights: &SigmaWeights) -> Result<SigmaSet> {
    let dim = b.dim();
    if weights.dim() != dim {
        return Err(EstimationError::dims("sigma weights", 2 * dim + 1, weights.mean.len()));
    }
    let root = cholesky_lower(&symmetrize(&(&b.cov * weights.spread)))?;
    let mut offsets = Vec::with_capacity(2 * dim + 1);
    offsets.push(Vector::zeros(dim));
    for i in 0..dim {
        offsets.push(root.column(i));
    }
    for i in 0..dim {
        offsets.push(-root.column(i));
    }
    Ok(SigmaSet {
        center: b.mean.clone(),
        offsets,
        weights: weights.clone(),
    })
}

/// Output of an unscented transform.
#[derive(Debug, Clone, PartialEq)]
pub struct UtOutput {
    pub mean: Vector,
    pub cov: Matrix,
    pub points: Vec<Vector>,
}

/// Pushes every sigma point through `g` and recovers mean and covariance;
/// `additive_cov` is added to the covariance.
pub fn unscented_transform<G>(s: &SigmaSet, g: G, additive_cov: &Matrix) -> Result<UtOutput>
where
    G: Fn(&Vector) -> Result<Vector>,
{
    let points = (0..s.len())
        .map(|index| {
            g(&s.point(index)).map_err(|e| EstimationError::SigmaPoint {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out_dim = points[0].len();
    if points.iter().any(|y| y.len() != out_dim) {
        return Err(EstimationError::dims("transformed sigma points", out_dim, "ragged"));
    }
    if additive_cov.shape() != (out_dim, out_dim) {
        return Err(EstimationError::dims(
            "unscented_transform additive covariance",
            format!("{out_dim}x{out_dim}"),
            format!("{}x{}", additive_cov.nrows(), additive_cov.ncols()),
        ));
    }
    let mean = weighted_mean(&points, &s.weights.mean);
    let devs: Vec<Vector> = points.iter().map(|y| y - &mean).collect();
    let cov = weighted_outer(&devs, &devs, &s.weights.cov) + additive_cov;
    Ok(UtOutput {
        mean,
        cov: symmetrize(&cov),
        points,
    })
}

/// Time update. Returns the predicted belief and the propagated sigma set.
pub fn ukf_predict<M: NonlinearModel + ?Sized>(
    b: &GaussianBelief,
    model: &M,
    p: &UkfParams,
) -> Result<(GaussianBelief, SigmaSet)> {
    let weights = ukf_weights(b.dim(), p)?;
    let set = sigma_points(b, &weights)?;
    let ut = unscented_transform(&set, |x| model.transition(x), model.process_noise())?;
    let belief = GaussianBelief {
        mean: ut.mean,
        cov: ut.cov,
    };
    let propagated = SigmaSet::from_points(&ut.points, weights);
    Ok((belief, propagated))
}

/// Measurement update from a sigma set representing the predicted state.
///
/// Returns the posterior and the gain `K = P_xy·P_yy⁻¹`.
pub fn ukf_update<M: NonlinearModel + ?Sized>(
    b_minus: &GaussianBelief,
    sigma: &SigmaSet,
    model: &M,
    z: &Vector,
) -> Result<(GaussianBelief, Matrix)> {
    if z.len() != model.measurement_dim() {
        return Err(EstimationError::dims("measurement", model.measurement_dim(), z.len()));
    }
    let ut = unscented_transform(sigma, |x| model.observe(x), model.measurement_noise())?;
    let p_yy = ut.cov;
    let shift = &sigma.center - &b_minus.mean;
    let dxs: Vec<Vector> = sigma.offsets.iter().map(|d| &shift + d).collect();
    let dys: Vec<Vector> = ut.points.iter().map(|y| y - &ut.mean).collect();
    let p_xy = weighted_outer(&dxs, &dys, &sigma.weights.cov);
    // P_yy·Kᵀ = P_xyᵀ
    let gain = solve_spd(&p_yy, &p_xy.transpose())?.transpose();
    let mean = &b_minus.mean + &gain * (z - &ut.mean);
    let cov = symmetrize(&(&b_minus.cov - &gain * &p_yy * gain.transpose()));
    Ok((GaussianBelief { mean, cov }, gain))
}

/// Which sigma points feed the measurement update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasurementSigmas {
    /// Draw a fresh set from the predicted belief, so process noise reaches
    /// the cross-covariance and gain.
    #[default]
    Redraw,
    /// Reuse the propagated state points. Their spread excludes `Q`.
    Propagated,
}

/// Unscented Kalman filter with additive noise.
#[derive(Debug, Clone)]
pub struct UkfFilter<'m, M: NonlinearModel + ?Sized> {
    model: &'m M,
    params: UkfParams,
    sigmas: MeasurementSigmas,
    belief: GaussianBelief,
    steps: usize,
    jitter_count: usize,
}

impl<'m, M: NonlinearModel + ?Sized> UkfFilter<'m, M> {
    pub fn new(model: &'m M, belief: GaussianBelief, params: UkfParams) -> Result<Self> {
        if belief.dim() != model.state_dim() {
            return Err(EstimationError::dims("UKF initial belief", model.state_dim(), belief.dim()));
        }
        ukf_weights(belief.dim(), &params)?;
        Ok(UkfFilter {
            model,
            params,
            sigmas: MeasurementSigmas::default(),
            belief,
            steps: 0,
            jitter_count: 0,
        })
    }

    pub fn with_measurement_sigmas(mut self, sigmas: MeasurementSigmas) -> Self {
        self.sigmas = sigmas;
        self
    }

    pub fn params(&self) -> &UkfParams {
        &self.params
    }
}

impl<M: NonlinearModel + ?Sized> RecursiveFilter for UkfFilter<'_, M> {
    fn kind(&self) -> FilterKind {
        FilterKind::Ukf
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
        let name = FilterKind::Ukf.name();
        let (predicted, propagated) = ukf_predict(&self.belief, self.model, &self.params)?;
        let (cov, jit_predict) = repair_covariance(predicted.cov, name, self.steps)?;
        let predicted = GaussianBelief {
            mean: predicted.mean,
            cov,
        };
        let sigma = match self.sigmas {
            MeasurementSigmas::Redraw => sigma_points(&predicted, &propagated.weights)?,
            MeasurementSigmas::Propagated => propagated,
        };
        let (posterior, _gain) = ukf_update(&predicted, &sigma, self.model, z)?;
        let (cov, jit_update) = repair_covariance(posterior.cov, name, self.steps)?;
        Ok(UkfFilter {
            model: self.model,
            params: self.params,
            sigmas: self.sigmas,
            belief: GaussianBelief {
                mean: posterior.mean,
                cov,
            },
            steps: self.steps + 1,
            jitter_count: self.jitter_count + jit_predict as usize + jit_update as usize,
        })
    }
}
