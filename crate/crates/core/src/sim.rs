//! Seeded simulation of the falling-body benchmark and the experiment
//! drivers that compare the LKF, EKF and UKF on it.
//!
//! Random numbers come from ChaCha8 (a counter-based generator) keyed by the
//! experiment seed, with separate stream ids for process noise and
//! measurement noise, mapped to standard normals by the Box–Muller
//! transform. Monte Carlo runs use seeds `seed, seed + 1, …`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ekf::{EkfFilter, LkfFilter};
use crate::error::{EstimationError, Result};
use crate::filter::{FilterKind, RecursiveFilter};
use crate::gaussian::GaussianBelief;
use crate::linalg::{is_psd, Matrix, Vector};
use crate::models::{fb_step, FallingBody, FallingBodyParams};
use crate::ukf::{UkfFilter, UkfParams};

/// Stream id used by [`gaussian_draws`].
pub const DEFAULT_STREAM: u64 = 0;
/// Stream id for process-noise increments.
pub const PROCESS_STREAM: u64 = 1;
/// Stream id for measurement noise.
pub const MEASUREMENT_STREAM: u64 = 2;

/// Standard-normal generator: ChaCha8 uniforms through Box–Muller.
/// Both outputs of each Box–Muller pair are used, cosine branch first.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        GaussianStream { rng, spare: None }
    }

    /// Uniform on (0, 1], 53-bit resolution.
    fn uniform_open0(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform_open0();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

impl Iterator for GaussianStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_normal())
    }
}

/// `count` standard-normal draws from the default stream of `seed`.
pub fn gaussian_draws(seed: u64, count: usize) -> Vec<f64> {
    GaussianStream::new(seed, DEFAULT_STREAM).take(count).collect()
}

/// Structure of the process-noise covariance the filters assume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QForm {
    /// `s·sᵀ` of the noise standard-deviation vector (fully correlated).
    #[default]
    Rank1,
    /// `diag(s²)`, matching how the truth noise is drawn.
    Diagonal,
}

impl std::str::FromStr for QForm {
    type Err = EstimationError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rank1" => Ok(QForm::Rank1),
            "diag" | "diagonal" => Ok(QForm::Diagonal),
            other => Err(EstimationError::InvalidConfig(format!("unknown q form '{other}'"))),
        }
    }
}

/// Settings of one benchmark experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Number of truth states, including the initial one.
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub x0_truth: Vector,
    pub belief0: GaussianBelief,
    /// Per-component process-noise standard deviation per unit step.
    pub process_noise_stdev: Vector,
    /// Measurement-noise variance, ft².
    pub r: f64,
    pub ukf_params: UkfParams,
    pub filters: Vec<FilterKind>,
    pub q_form: QForm,
    /// When false the truth and measurements are generated without noise;
    /// the filters still assume `Q` and `R` from the fields above.
    pub simulate_noise: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let x0 = Vector::from_column_slice(&[1e5, -6000.0, 2000.0]);
        let belief0 = GaussianBelief {
            mean: x0.clone(),
            cov: Matrix::from_diagonal(&Vector::from_column_slice(&[500.0, 2e4, 2.5e5])),
        };
        ExperimentConfig {
            steps: 18,
            dt: 1.0,
            seed: 0,
            x0_truth: x0,
            belief0,
            process_noise_stdev: Vector::from_column_slice(&[2.0, 5.0, 8.0]),
            r: 100.0,
            ukf_params: UkfParams::default(),
            filters: FilterKind::ALL.to_vec(),
            q_form: QForm::Rank1,
            simulate_noise: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EstimationError::InvalidConfig(msg));
        if self.steps < 2 {
            return bad(format!("steps must be at least 2, got {}", self.steps));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return bad(format!("measurement variance must be >= 0, got {}", self.r));
        }
        if self.x0_truth.len() != 3 || self.process_noise_stdev.len() != 3 {
            return bad("initial state and noise stdev must have 3 components".into());
        }
        if self.process_noise_stdev.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad("process noise stdev entries must be >= 0".into());
        }
        if self.belief0.dim() != 3 {
            return bad("initial belief must be 3-dimensional".into());
        }
        self.belief0.validate()?;
        self.ukf_params.validate()?;
        self.physics().validate()
    }

    pub fn physics(&self) -> FallingBodyParams {
        FallingBodyParams {
            dt: self.dt,
            ..FallingBodyParams::default()
        }
    }

    /// Process-noise covariance assumed by the filters for one step.
    pub fn process_noise_cov(&self) -> Matrix {
        let s = &self.process_noise_stdev;
        let q = match self.q_form {
            QForm::Rank1 => s * s.transpose(),
            QForm::Diagonal => Matrix::from_diagonal(&s.component_mul(s)),
        };
        q * self.dt
    }

    pub fn model(&self) -> Result<FallingBody> {
        FallingBody::new(self.physics(), self.process_noise_cov(), self.r)
    }
}

/// Truth states and noisy altitude measurements, index 0 being the initial
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub truth: Vec<Vector>,
    pub measurements: Vec<f64>,
}

/// Euler–Maruyama truth trajectory and radar measurements for `cfg.seed`.
pub fn simulate_truth(cfg: &ExperimentConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let params = cfg.physics();
    let noise_gain = if cfg.simulate_noise { 1.0 } else { 0.0 };
    let scale = cfg.process_noise_stdev.clone() * (cfg.dt.sqrt() * noise_gain);
    let mut process = GaussianStream::new(cfg.seed, PROCESS_STREAM);
    let mut measurement = GaussianStream::new(cfg.seed, MEASUREMENT_STREAM);
    let meas_sd = cfg.r.sqrt() * noise_gain;

    let mut truth = Vec::with_capacity(cfg.steps);
    let mut measurements = Vec::with_capacity(cfg.steps);
    let mut state = cfg.x0_truth.clone();
    for k in 0..cfg.steps {
        measurements.push(state[0] + meas_sd * measurement.next_normal());
        if k + 1 < cfg.steps {
            let draws = Vector::from_fn(3, |_, _| process.next_normal());
            let w = scale.component_mul(&draws);
            let next = fb_step(&state, &params, Some(&w)).map_err(|e| e.at_step(k))?;
            truth.push(std::mem::replace(&mut state, next));
        } else {
            truth.push(state.clone());
        }
    }
    Ok(Trajectory { truth, measurements })
}

/// Sample statistics of a set of vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMoments {
    pub count: usize,
    /// Sample mean (divisor N).
    pub mean: Vector,
    /// Unbiased sample covariance (divisor N − 1).
    pub covariance: Matrix,
    /// Raw second moment `E[X Xᵀ]` (divisor N).
    pub autocorrelation: Matrix,
}

impl SampleMoments {
    /// Covariance with divisor N; equals `autocorrelation − mean·meanᵀ`.
    pub fn biased_covariance(&self) -> Matrix {
        &self.covariance * ((self.count - 1) as f64 / self.count as f64)
    }
}

pub fn sample_moments(samples: &[Vector]) -> Result<SampleMoments> {
    if samples.len() < 2 {
        return Err(EstimationError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let n = samples[0].len();
    if samples.iter().any(|s| s.len() != n) {
        return Err(EstimationError::dims("sample_moments", n, "ragged samples"));
    }
    let count = samples.len();
    let inv = 1.0 / count as f64;
    let mut mean = Vector::zeros(n);
    let mut raw = Matrix::zeros(n, n);
    for s in samples {
        mean += s;
        raw += s * s.transpose();
    }
    mean *= inv;
    raw *= inv;
    let mut scatter = Matrix::zeros(n, n);
    for s in samples {
        let d = s - &mean;
        scatter += &d * d.transpose();
    }
    Ok(SampleMoments {
        count,
        mean,
        covariance: scatter / (count - 1) as f64,
        autocorrelation: raw,
    })
}

/// Estimates and position errors of one filter over one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSeries {
    pub kind: FilterKind,
    pub estimates: Vec<Vector>,
    pub covariances: Vec<Matrix>,
    /// `x̂₁ − x₁` against the truth, ft.
    pub err_truth: Vec<f64>,
    /// `x̂₁ − z` against the measurement, ft.
    pub err_meas: Vec<f64>,
    /// Squared truth error, ft².
    pub sq_err: Vec<f64>,
    pub jitter_count: usize,
}

impl FilterSeries {
    /// Time-averaged squared position error.
    pub fn mse(&self) -> f64 {
        self.sq_err.iter().sum::<f64>() / self.sq_err.len() as f64
    }

    pub fn all_covariances_psd(&self) -> bool {
        self.covariances.iter().all(is_psd)
    }
}

/// One experiment: truth, measurements and per-filter series for steps
/// `1..steps`. The initial truth state and first measurement are kept
/// separately since no estimate exists for them.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub initial_truth: Vector,
    pub initial_measurement: f64,
    pub truth: Vec<Vector>,
    pub measurements: Vec<f64>,
    pub filters: Vec<FilterSeries>,
}

impl ExperimentResult {
    pub fn series(&self, kind: FilterKind) -> Option<&FilterSeries> {
        self.filters.iter().find(|s| s.kind == kind)
    }
}

fn drive<F: RecursiveFilter>(mut filter: F, measurements: &[f64]) -> Result<(Vec<GaussianBelief>, usize)> {
    let mut beliefs = Vec::with_capacity(measurements.len());
    for (i, z) in measurements.iter().enumerate() {
        let step = i + 1;
        filter = filter.step(&Vector::from_element(1, *z)).map_err(|e| match e {
            EstimationError::FilterDivergence { filter, reason, .. } => {
                EstimationError::FilterDivergence { filter, step, reason }
            }
            other => EstimationError::FilterDivergence {
                filter: filter.kind().name().to_string(),
                step,
                reason: other.to_string(),
            },
        })?;
        beliefs.push(filter.belief().clone());
    }
    Ok((beliefs, filter.jitter_count()))
}

/// Runs one filter over `z[1..]` of a simulated trajectory.
pub fn run_filter(
    kind: FilterKind,
    cfg: &ExperimentConfig,
    model: &FallingBody,
    trajectory: &Trajectory,
) -> Result<FilterSeries> {
    let zs = &trajectory.measurements[1..];
    let b0 = cfg.belief0.clone();
    let (beliefs, jitter_count) = match kind {
        FilterKind::Lkf => drive(LkfFilter::new(model, b0)?, zs)?,
        FilterKind::Ekf => drive(EkfFilter::new(model, b0)?, zs)?,
        FilterKind::Ukf => drive(UkfFilter::new(model, b0, cfg.ukf_params)?, zs)?,
    };
    let mut series = FilterSeries {
        kind,
        estimates: Vec::with_capacity(beliefs.len()),
        covariances: Vec::with_capacity(beliefs.len()),
        err_truth: Vec::with_capacity(beliefs.len()),
        err_meas: Vec::with_capacity(beliefs.len()),
        sq_err: Vec::with_capacity(beliefs.len()),
        jitter_count,
    };
    for (k, b) in beliefs.into_iter().enumerate() {
        let truth = &trajectory.truth[k + 1];
        let err = b.mean[0] - truth[0];
        series.err_meas.push(b.mean[0] - zs[k]);
        series.err_truth.push(err);
        series.sq_err.push(err * err);
        series.estimates.push(b.mean);
        series.covariances.push(b.cov);
    }
    Ok(series)
}

/// Simulates one trajectory and runs every selected filter on it.
///
/// The first divergence aborts the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let trajectory = simulate_truth(cfg)?;
    let model = cfg.model()?;
    let filters = cfg
        .filters
        .iter()
        .map(|&kind| run_filter(kind, cfg, &model, &trajectory))
        .collect::<Result<Vec<_>>>()?;
    let Trajectory { truth, measurements } = trajectory;
    Ok(ExperimentResult {
        initial_truth: truth[0].clone(),
        initial_measurement: measurements[0],
        truth: truth[1..].to_vec(),
        measurements: measurements[1..].to_vec(),
        filters,
    })
}

/// Outcome of one filter in one Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    /// Time-averaged position MSE, `None` if the filter diverged.
    pub mse: Option<f64>,
    pub jitter_count: usize,
    pub all_psd: bool,
}

/// Aggregate of one filter over all Monte Carlo runs.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterAggregate {
    pub kind: FilterKind,
    /// Mean over non-diverged runs of the time-averaged MSE.
    pub mean_mse: f64,
    /// Standard error of `mean_mse`.
    pub stderr: f64,
    pub diverged: usize,
    pub jitter_count: usize,
    pub runs: Vec<RunRecord>,
}

impl FilterAggregate {
    pub fn completed(&self) -> usize {
        self.runs.len() - self.diverged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub filters: Vec<FilterAggregate>,
}

impl MonteCarloSummary {
    pub fn filter(&self, kind: FilterKind) -> Option<&FilterAggregate> {
        self.filters.iter().find(|f| f.kind == kind)
    }

    /// Mean and standard error of `mse(a) − mse(b)` over runs where neither
    /// filter diverged.
    pub fn paired_difference(&self, a: FilterKind, b: FilterKind) -> Option<(f64, f64)> {
        let fa = self.filter(a)?;
        let fb = self.filter(b)?;
        let diffs: Vec<f64> = fa
            .runs
            .iter()
            .zip(&fb.runs)
            .filter_map(|(ra, rb)| Some(ra.mse? - rb.mse?))
            .collect();
        if diffs.is_empty() {
            return None;
        }
        Some(mean_and_stderr(&diffs))
    }
}

/// Mean and standard error (sample standard deviation over √n).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Repeats the experiment with seeds `cfg.seed + i`, `i < runs`.
///
/// Runs execute in parallel; aggregation follows seed order, so the result
/// does not depend on scheduling. A diverged filter is tallied and left out
/// of that filter's aggregate.
pub fn monte_carlo(cfg: &ExperimentConfig, runs: usize) -> Result<MonteCarloSummary> {
    if runs == 0 {
        return Err(EstimationError::InvalidConfig("runs must be at least 1".into()));
    }
    cfg.validate()?;
    let model = cfg.model()?;
    let per_seed: Vec<Vec<RunRecord>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let run_cfg = ExperimentConfig { seed, ..cfg.clone() };
            let trajectory = simulate_truth(&run_cfg);
            cfg.filters
                .iter()
                .map(|&kind| {
                    let series = trajectory
                        .as_ref()
                        .map_err(Clone::clone)
                        .and_then(|t| run_filter(kind, &run_cfg, &model, t));
                    match series {
                        Ok(s) => RunRecord {
                            seed,
                            mse: Some(s.mse()),
                            jitter_count: s.jitter_count,
                            all_psd: s.all_covariances_psd(),
                        },
                        Err(_) => RunRecord {
                            seed,
                            mse: None,
                            jitter_count: 0,
                            all_psd: false,
                        },
                    }
                })
                .collect()
        })
        .collect();

    let filters = cfg
        .filters
        .iter()
        .enumerate()
        .map(|(j, &kind)| {
            let records: Vec<RunRecord> = per_seed.iter().map(|r| r[j].clone()).collect();
            let values: Vec<f64> = records.iter().filter_map(|r| r.mse).collect();
            let (mean_mse, stderr) = if values.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_and_stderr(&values)
            };
            FilterAggregate {
                kind,
                mean_mse,
                stderr,
                diverged: records.len() - values.len(),
                jitter_count: records.iter().map(|r| r.jitter_count).sum(),
                runs: records,
            }
        })
        .collect();
    Ok(MonteCarloSummary { runs, filters })
}
