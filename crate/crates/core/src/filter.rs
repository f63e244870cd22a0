//! Pieces shared by the nonlinear filters: the covariance repair policy and
//! a common stepping interface.

use std::fmt;
use std::str::FromStr;

use crate::error::{EstimationError, Result};
use crate::gaussian::GaussianBelief;
use crate::linalg::{is_psd, Matrix, Vector};

/// Diagonal loading, relative to the trace, applied once to a covariance
/// that fails the PSD check.
pub const JITTER_SCALE: f64 = 1e-9;

/// Checks `p`; if it fails, adds `1e-9·trace(P)·I` once and checks again.
///
/// Returns the (possibly loaded) covariance and whether jitter was applied.
/// A second failure is reported as filter divergence.
pub fn repair_covariance(p: Matrix, filter: &str, step: usize) -> Result<(Matrix, bool)> {
    if is_psd(&p) {
        return Ok((p, false));
    }
    let trace = p.trace();
    if trace > 0.0 && trace.is_finite() {
        let n = p.nrows();
        let loaded = p + Matrix::identity(n, n) * (JITTER_SCALE * trace);
        if is_psd(&loaded) {
            return Ok((loaded, true));
        }
    }
    Err(EstimationError::FilterDivergence {
        filter: filter.to_string(),
        step,
        reason: "covariance is not positive semi-definite after jitter".into(),
    })
}

/// The three nonlinear estimators compared on the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    Lkf,
    Ekf,
    Ukf,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [FilterKind::Lkf, FilterKind::Ekf, FilterKind::Ukf];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Lkf => "lkf",
            FilterKind::Ekf => "ekf",
            FilterKind::Ukf => "ukf",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = EstimationError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lkf" => Ok(FilterKind::Lkf),
            "ekf" => Ok(FilterKind::Ekf),
            "ukf" => Ok(FilterKind::Ukf),
            other => Err(EstimationError::InvalidConfig(format!("unknown filter '{other}'"))),
        }
    }
}

/// A recursive estimator that consumes one measurement per step.
pub trait RecursiveFilter: Sized {
    fn kind(&self) -> FilterKind;
    fn belief(&self) -> &GaussianBelief;
    /// Number of completed predict/update cycles.
    fn steps(&self) -> usize;
    /// Number of times the covariance repair added jitter.
    fn jitter_count(&self) -> usize;
    /// One predict/update cycle.
    fn step(&self, z: &Vector) -> Result<Self>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn healthy_covariance_untouched() {
        let p = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (out, jittered) = repair_covariance(p.clone(), "ekf", 0).unwrap();
        assert_eq!(out, p);
        assert!(!jittered);
    }

    #[test]
    fn slightly_indefinite_covariance_is_loaded_once() {
        // rank-one plus a tiny negative eigenvalue
        let p = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 - 1e-11]);
        assert!(!is_psd(&p));
        let (out, jittered) = repair_covariance(p.clone(), "ukf", 3).unwrap();
        assert!(jittered);
        assert!((out[(0, 0)] - p[(0, 0)] - JITTER_SCALE * p.trace()).abs() < 1e-15);
    }

    #[test]
    fn grossly_indefinite_covariance_diverges() {
        let p = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match repair_covariance(p, "lkf", 7) {
            Err(EstimationError::FilterDivergence { filter, step, .. }) => {
                assert_eq!(filter, "lkf");
                assert_eq!(step, 7);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn filter_names_round_trip() {
        for kind in FilterKind::ALL {
            assert_eq!(kind.name().parse::<FilterKind>().unwrap(), kind);
        }
        assert!("pf".parse::<FilterKind>().is_err());
    }
}
