use nlest::sim::{monte_carlo, run_experiment, simulate_truth, ExperimentConfig, QForm};
use nlest::ukf::UkfParams;
use nlest::FilterKind;

#[test]
fn linearized_filter_trails_the_adaptive_ones() {
    let cfg = ExperimentConfig { seed: 900, ..Default::default() };
    let mc = monte_carlo(&cfg, 60).unwrap();
    let mse = |k| mc.filter(k).unwrap().mean_mse;
    assert!(mse(FilterKind::Lkf) > 3.0 * mse(FilterKind::Ekf));
    assert!(mse(FilterKind::Lkf) > 3.0 * mse(FilterKind::Ukf));
    assert!(mc.filters.iter().all(|f| f.diverged == 0));
}

#[test]
fn diagonal_q_and_other_ukf_scaling_run_cleanly() {
    for (q_form, ukf_params) in [
        (QForm::Diagonal, UkfParams::default()),
        (QForm::Rank1, UkfParams::new(1.0, 2.0, 0.0).unwrap()),
        (QForm::Diagonal, UkfParams::new(0.5, 2.0, 1.0).unwrap()),
    ] {
        let cfg = ExperimentConfig { seed: 17, q_form, ukf_params, ..Default::default() };
        let result = run_experiment(&cfg).unwrap();
        for s in &result.filters {
            assert!(s.all_covariances_psd(), "{:?}", s.kind);
            assert!(s.mse().is_finite());
        }
    }
}

#[test]
fn truth_does_not_depend_on_filter_settings() {
    let base = ExperimentConfig { seed: 4, ..Default::default() };
    let other = ExperimentConfig {
        filters: vec![FilterKind::Ukf],
        q_form: QForm::Diagonal,
        ukf_params: UkfParams::new(0.3, 0.0, 1.0).unwrap(),
        ..base.clone()
    };
    assert_eq!(simulate_truth(&base).unwrap(), simulate_truth(&other).unwrap());
    let a = run_experiment(&base).unwrap();
    let b = run_experiment(&other).unwrap();
    assert_eq!(a.truth, b.truth);
    assert_eq!(a.measurements, b.measurements);
}

#[test]
fn error_columns_are_consistent() {
    let result = run_experiment(&ExperimentConfig { seed: 8, ..Default::default() }).unwrap();
    for s in &result.filters {
        for k in 0..result.truth.len() {
            assert_eq!(s.err_truth[k], s.estimates[k][0] - result.truth[k][0]);
            assert_eq!(s.err_meas[k], s.estimates[k][0] - result.measurements[k]);
        }
    }
}
