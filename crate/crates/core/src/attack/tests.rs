use super::*;
use crate::forecaster::{ARGaussianModel, NeuralARModel};
use crate::metrics::normalized_deviation;
use crate::rng::std_normal;
use rand::Rng as _;

fn det_linear(w: f64) -> ARGaussianModel<f64> {
    ARGaussianModel::new(vec![w], 0.0, -30.0).unwrap()
}

fn scalar_cfg(steps: usize) -> AttackConfig {
    AttackConfig { horizons: vec![1], steps, n_attack: 1, norm: NormMode::Absolute, eta: 10.0, ..AttackConfig::default() }
}

#[test]
fn scalar_linear_attack_matches_closed_form() {
    let mut rng = rng_from(5, &[]);
    for _ in 0..20 {
        let w: f64 = rng.random_range(-2.0..2.0);
        let x: f64 = rng.random_range(-2.0..2.0);
        let t: f64 = rng.random_range(-3.0..3.0);
        let lambda: f64 = rng.random_range(0.1..5.0);
        let star = lambda * w * (t - w * x) / (1.0 + lambda * w * w);
        let r = attack_single(&det_linear(w), None, &[x], &[t], lambda, &scalar_cfg(3000)).unwrap();
        assert!((r.delta[0] - star).abs() < 1e-3, "w={w} x={x} t={t} λ={lambda}: {} vs {star}", r.delta[0]);
    }
}

#[test]
fn zero_lambda_returns_zero_exactly() {
    let mut rng = rng_from(6, &[]);
    let net = NeuralARModel::<f64>::init(3, [5, 5], &mut rng).unwrap();
    let x = [1.0, 2.0, 0.5];
    let cfg = AttackConfig { horizons: vec![1, 2], n_attack: 8, steps: 30, ..AttackConfig::default() };
    let r = attack_single(&net, Some(InputNoise::relative(0.1)), &x, &[5.0, -5.0], 0.0, &cfg).unwrap();
    assert!(r.delta.iter().all(|&d| d == 0.0));
    assert_eq!(r.norm, 0.0);
}

#[test]
fn clean_target_needs_no_perturbation() {
    let mut rng = rng_from(7, &[]);
    let net = NeuralARModel::<f64>::init(4, [6, 6], &mut rng).unwrap();
    let x = [0.5, 1.0, 1.5, 1.2];
    let cfg = AttackConfig { horizons: vec![2, 3], n_attack: 16, steps: 50, ..AttackConfig::default() };
    let clean = clean_attack_statistic(&net, None, &x, &cfg).unwrap();
    let r = attack_single(&net, None, &x, &clean, 10.0, &cfg).unwrap();
    assert!(r.delta.iter().all(|&d| d == 0.0));
    assert_eq!(r.objective_trace[0], 0.0);
}

#[test]
fn returned_objective_never_exceeds_start() {
    let mut rng = rng_from(8, &[]);
    for i in 0..5 {
        let net = NeuralARModel::<f64>::init(3, [4, 4], &mut rng).unwrap();
        let x: Vec<f64> = (0..5).map(|_| 1.0 + 0.3 * std_normal::<f64, _>(&mut rng)).collect();
        let cfg = AttackConfig { horizons: vec![1, 3], n_attack: 10, steps: 40, seed: i, lr: 0.05, ..AttackConfig::default() };
        let clean = clean_attack_statistic(&net, Some(InputNoise::absolute(0.2)), &x, &cfg).unwrap();
        let target: Vec<f64> = clean.iter().map(|m| 2.0 * m + 1.0).collect();
        let r = attack_single(&net, Some(InputNoise::absolute(0.2)), &x, &target, 1.0, &cfg).unwrap();
        let best = r.objective_trace.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(r.objective_trace.iter().all(|v| v.is_finite()));
        assert!(best <= r.objective_trace[0]);
        assert!(best < r.objective_trace[0], "attack made no progress");
        assert_eq!(r.norm, relative_l2_norm(&r.delta, &x, 1e-8).unwrap());
        assert_eq!(r.feasible, r.norm <= cfg.eta);
    }
}

#[test]
fn attack_rejects_bad_config() {
    let m = det_linear(1.0);
    let mut cfg = scalar_cfg(5);
    assert!(attack_single(&m, None, &[1.0], &[1.0, 2.0], 1.0, &cfg).is_err());
    cfg.horizons = vec![];
    assert!(attack_single(&m, None, &[1.0], &[], 1.0, &cfg).is_err());
    let mut cfg = scalar_cfg(5);
    cfg.eta = 0.0;
    assert!(attack_single(&m, None, &[1.0], &[1.0], 1.0, &cfg).is_err());
    let cfg = scalar_cfg(5);
    assert!(attack_single(&m, None, &[1.0], &[1.0], -1.0, &cfg).is_err());
}

fn sweep_setup() -> (NeuralARModel<f64>, Vec<f64>, Vec<f64>, AttackConfig) {
    let mut rng = rng_from(9, &[]);
    let net = NeuralARModel::<f64>::init(4, [6, 6], &mut rng).unwrap();
    let x = vec![1.0, 1.4, 0.8, 1.1, 1.3, 0.9];
    let refs = vec![1.0, 1.2, 0.9];
    let cfg = AttackConfig {
        horizons: vec![1, 2, 3],
        n_attack: 12,
        n_eval: 50,
        steps: 40,
        lr: 0.05,
        t_adv_multipliers: vec![0.0, 2.0],
        lambdas: vec![1.0, 10.0],
        seed: 3,
        ..AttackConfig::default()
    };
    (net, x, refs, cfg)
}

#[test]
fn sweep_is_monotone_and_starts_clean() {
    let (net, x, refs, cfg) = sweep_setup();
    for noise in [None, Some(InputNoise::relative(0.2))] {
        let s = attack_sweep(&net, noise, &x, &refs, &cfg).unwrap();
        assert_eq!(s.entries.len(), cfg.eta_grid.len());
        assert_eq!(s.entries[0].candidate, None);
        assert_eq!(s.entries[0].nd, normalized_deviation(&s.clean_mean, &refs).unwrap());
        for pair in s.entries.windows(2) {
            assert!(pair[1].nd >= pair[0].nd);
        }
        for e in &s.entries {
            assert!(e.norm <= e.eta);
            if let Some(i) = e.candidate {
                assert_eq!(e.norm, s.candidates[i].norm);
            }
        }
        assert_eq!(s.candidates.len(), 4);
    }
}

#[test]
fn sweep_is_bit_reproducible() {
    let (net, x, refs, cfg) = sweep_setup();
    let a = attack_sweep(&net, None, &x, &refs, &cfg).unwrap();
    let b = attack_sweep(&net, None, &x, &refs, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn attack_increases_error_on_linear_model() {
    let m = ARGaussianModel::new(vec![0.5, 0.5], 0.0, -3.0).unwrap();
    let x = vec![1.0, 1.0];
    let cfg = AttackConfig {
        horizons: vec![1],
        n_attack: 20,
        steps: 300,
        lr: 0.02,
        t_adv_multipliers: vec![0.0, 4.0],
        lambdas: vec![10.0],
        ..AttackConfig::default()
    };
    let s = attack_sweep(&m, None, &x, &[1.0], &cfg).unwrap();
    let last = s.entries.last().unwrap();
    assert!(last.nd > s.entries[0].nd + 0.3, "{:?}", s.entries);
}

#[test]
fn time_shift_examples() {
    let p = make_time_shift_perturbation(3.0f64, 2.5, 0.0).unwrap();
    assert_eq!(p.apply(&[1.0]).unwrap(), vec![1.0, 3.0]);
    assert!((p.dissimilarity() - 0.5).abs() < 1e-15);
    let p = make_time_shift_perturbation(3.0, 2.5, 1.0).unwrap();
    assert_eq!(p.apply(&[]).unwrap(), vec![6.0]);
    assert_eq!(p.dissimilarity(), p.recompute_dissimilarity().unwrap());
    assert!(make_time_shift_perturbation(3.0, 2.5, -1.0).is_err());
    assert!(make_time_shift_perturbation(3.0, 2.5, f64::NAN).is_err());
    assert!((rho_from_log10(-1.0) + 0.9).abs() < 1e-12);
    assert!((rho_from_log10(1.0) - 9.0).abs() < 1e-12);
    assert_eq!(rho_from_log10(0.0), 0.0);
}
