use super::*;
use crate::forecaster::ARGaussianModel;
use crate::harness::config::{CertificateSpec, DatasetSpec, ModelSpec};
use crate::harness::synthetic::SyntheticSpec;

fn tiny() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        dataset: DatasetSpec::Synthetic(SyntheticSpec {
            n_series: 4,
            length: 40,
            context_length: 10,
            prediction_length: 3,
            ..SyntheticSpec::default()
        }),
        model: ModelSpec::NeuralAr { lags: Some(4), hidden: [4, 4] },
        seeds: vec![0, 1],
        n_samples: 20,
        log10_rho_grid: vec![-1.0, 0.0, 1.0],
        ..ExperimentConfig::default()
    };
    cfg.training.epochs = 3;
    cfg.training.learning_rate = 0.01;
    cfg.smoothing.n = 10;
    cfg.future_smoothing.n = 10;
    cfg.attack.horizons = vec![1, 2, 3];
    cfg.attack.steps = 5;
    cfg.attack.n_attack = 5;
    cfg.attack.t_adv_multipliers = vec![0.0, 2.0];
    cfg.attack.lambdas = vec![1.0];
    cfg.attack.eta_grid = vec![0.0, 0.5, 1.0];
    cfg
}

#[test]
fn adversarial_report_shape_and_monotonicity() {
    let mut cfg = tiny();
    cfg.certificate = Some(CertificateSpec { series: 1, n_cdf: 200, bootstrap: 5 });
    let r = run_adversarial_pipeline(&cfg).unwrap();
    assert_eq!(r.methods, ADVERSARIAL_METHODS);
    assert_eq!(r.cells.len(), 4 * 3);
    assert!(r.comparisons.is_empty(), "fewer than five seeds");
    assert_eq!(r.certificates.len(), 2 * 2);
    assert!(r.certificates.iter().all(|c| c.heuristic && c.mean_bound >= 0.0));
    for m in ADVERSARIAL_METHODS {
        for s in 0..2 {
            let c = r.curve(m, s);
            assert!(c.windows(2).all(|w| w[1] >= w[0]), "{m}: {c:?}");
        }
    }
}

#[test]
fn eta_zero_is_clean_error() {
    let cfg = tiny();
    let data = cfg.dataset.load(0).unwrap();
    let series = eval_series_from(&cfg, &data).unwrap();
    let model = Model::Ar(ARGaussianModel::new(vec![0.0, 0.0, 0.5, 0.5], 0.0, -30.0).unwrap());
    let curve = adversarial_curve(&cfg, &model, None, 5, &series, 3).unwrap();
    // A deterministic model's clean mean forecast is its mean rollout.
    let (mut err, mut refs) = (0.0, 0.0);
    for s in &series {
        let x = s.scaled_context();
        let m = crate::forecaster::mean_rollout(&model, &x, 3);
        for (p, t) in m.iter().zip(s.future().unwrap()) {
            err += (p * s.scale() - t).abs();
            refs += t.abs();
        }
    }
    assert!((curve[0] - err / refs).abs() < 1e-9, "{} vs {}", curve[0], err / refs);
    assert!(curve[2] > curve[0]);
}

#[test]
fn constant_model_has_zero_shift_error() {
    let cfg = tiny();
    let data = cfg.dataset.load(0).unwrap();
    let series = eval_series_from(&cfg, &data).unwrap();
    let model = Model::Ar(ARGaussianModel::new(vec![0.0; 4], 0.8, -30.0).unwrap());
    for smoothed in [false, true] {
        let c = timeshift_curve(&cfg, &model, smoothed, &series, 1).unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-9), "{c:?}");
    }
}

#[test]
fn timeshift_report_and_determinism() {
    let cfg = tiny();
    let a = run_timeshift_pipeline(&cfg).unwrap();
    let b = run_timeshift_pipeline(&cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.methods, TIMESHIFT_METHODS);
    assert_eq!(a.grid, vec![-1.0, 0.0, 1.0]);
    assert!(a.cells.iter().all(|c| c.values.iter().all(|v| v.is_finite() && *v >= 0.0)));
}

#[test]
fn partial_artifacts_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    cfg.seeds = vec![5];
    run_timeshift_pipeline_with_artifacts(&cfg, Some(dir.path())).unwrap();
    assert!(dir.path().join("partial/timeshift_seed5.json").exists());
}

#[test]
fn timeshift_needs_two_steps() {
    let mut cfg = tiny();
    cfg.dataset = DatasetSpec::Synthetic(SyntheticSpec { n_series: 2, length: 30, context_length: 10, prediction_length: 1, ..SyntheticSpec::default() });
    cfg.attack.horizons = vec![1];
    assert!(run_timeshift_pipeline(&cfg).is_err());
}
