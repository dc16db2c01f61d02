//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime.
//!
//! Runs with `harness = false`. By default every criterion is reported and the
//! process exits 0; set `ACCEPTANCE_STRICT=1` to exit nonzero on any failure.

use std::time::{Duration, Instant};

use rand::Rng as _;
use robustcast::certificate::{
    certificate_from_samples, estimate_certificate, expected_norm_gaussian, lemma1_constant, mixed_constant,
    CertificateConfig, TailEnvelope,
};
use robustcast::forecaster::{
    expected_statistic, grad_expected_statistic, ARGaussianModel, CommonRandomNumbers, Forecaster, InputNoise,
    NeuralARModel, NoiseMode,
};
use robustcast::attack::{attack_single, AttackConfig, NormMode};
use robustcast::harness::{run_adversarial_pipeline, run_timeshift_pipeline, wilcoxon_signed_rank, ExperimentConfig, RunReport};
use robustcast::metrics::{l2_norm, wasserstein1};
use robustcast::rng::{rng_from, std_normal, Rng};
use robustcast::smoothing::{smooth_forecast, SmoothingConfig};
use robustcast::EmpiricalMarginal;

const CONFIG: &str = include_str!("../../../configs/acceptance.json");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn marginal(v: &[f64]) -> EmpiricalMarginal {
    EmpiricalMarginal::new(v.to_vec()).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_force_matching(a: &[f64], b: &[f64]) -> f64 {
    permutations(a.len())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / a.len() as f64
}

fn w1_oracle() -> Outcome {
    let mut rng = rng_from(101, &[]);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=6);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        worst = worst.max((wasserstein1(&marginal(&a), &marginal(&b)) - brute_force_matching(&a, &b)).abs());
    }
    let mut shift_err = 0.0f64;
    for _ in 0..20 {
        let a: Vec<f64> = (0..500).map(|_| std_normal(&mut rng)).collect();
        let c: f64 = rng.random_range(-3.0..3.0);
        let b: Vec<f64> = a.iter().map(|v| v + c).collect();
        shift_err = shift_err.max((wasserstein1(&marginal(&a), &marginal(&b)) - c.abs()).abs());
    }
    outcome(worst <= 1e-12 && shift_err <= 1e-12, format!("matching err {worst:.1e}, shift err {shift_err:.1e}"))
}

fn random_ar(rng: &mut Rng, p: usize) -> ARGaussianModel<f64> {
    let w = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    ARGaussianModel::new(w, rng.random_range(-0.5..0.5), rng.random_range(-2.0..0.0)).unwrap()
}

fn jacobian_rel_error<F: Forecaster<f64>>(model: &F, x: &[f64], horizons: &[usize], crn: &CommonRandomNumbers<f64>, rng: &mut Rng) -> f64 {
    let delta: Vec<f64> = (0..x.len()).map(|_| 0.05 * std_normal::<f64, _>(rng)).collect();
    let (_, jac) = grad_expected_statistic(model, x, &delta, horizons, crn).unwrap();
    let h = 1e-5;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..x.len() {
        let mut p = delta.clone();
        p[i] += h;
        let mut q = delta.clone();
        q[i] -= h;
        let mp = expected_statistic(model, x, &p, horizons, crn).unwrap();
        let mq = expected_statistic(model, x, &q, horizons, crn).unwrap();
        for (k, row) in jac.iter().enumerate() {
            let fd = (mp[k] - mq[k]) / (2.0 * h);
            num += (row[i] - fd).powi(2);
            den += fd * fd;
        }
    }
    num.sqrt() / den.sqrt().max(1e-8)
}

fn gradient_oracle() -> Outcome {
    let mut rng = rng_from(102, &[]);
    let (mut worst_ar, mut worst_nn) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let p = rng.random_range(1..=4);
        let len = p + rng.random_range(0..3);
        let tau = rng.random_range(1..=4);
        let horizons: Vec<usize> = (1..=tau).filter(|_| rng.random_bool(0.7)).collect();
        let horizons = if horizons.is_empty() { vec![tau] } else { horizons };
        let x: Vec<f64> = (0..len).map(|_| 1.0 + 0.3 * std_normal::<f64, _>(&mut rng)).collect();
        let noise = match i % 3 {
            0 => None,
            1 => Some(InputNoise::absolute(0.1)),
            _ => Some(InputNoise::relative(0.1)),
        };
        let crn = CommonRandomNumbers::draw(8, tau, len, noise, &mut rng).unwrap();
        let ar = random_ar(&mut rng, p);
        worst_ar = worst_ar.max(jacobian_rel_error(&ar, &x, &horizons, &crn, &mut rng));
        let net = NeuralARModel::<f64>::init(p, [5, 4], &mut rng).unwrap();
        worst_nn = worst_nn.max(jacobian_rel_error(&net, &x, &horizons, &crn, &mut rng));
    }
    outcome(worst_ar < 1e-4 && worst_nn < 1e-4, format!("max rel err: ar {worst_ar:.1e}, neural {worst_nn:.1e}"))
}

fn attack_oracle() -> Outcome {
    let mut rng = rng_from(103, &[]);
    let cfg = AttackConfig { horizons: vec![1], steps: 3000, n_attack: 1, norm: NormMode::Absolute, eta: 10.0, ..AttackConfig::default() };
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let w: f64 = rng.random_range(-2.0..2.0);
        let x: f64 = rng.random_range(-2.0..2.0);
        let t: f64 = rng.random_range(-3.0..3.0);
        let lambda: f64 = rng.random_range(0.1..5.0);
        let star = lambda * w * (t - w * x) / (1.0 + lambda * w * w);
        let model = ARGaussianModel::new(vec![w], 0.0, -30.0).unwrap();
        let r = attack_single(&model, None, &[x], &[t], lambda, &cfg).unwrap();
        worst = worst.max((r.delta[0] - star).abs());
    }
    let net = NeuralARModel::<f64>::init(3, [5, 5], &mut rng).unwrap();
    let zero_cfg = AttackConfig { horizons: vec![1, 2], n_attack: 8, steps: 30, ..AttackConfig::default() };
    let r = attack_single(&net, Some(InputNoise::relative(0.1)), &[1.0, 2.0, 0.5], &[5.0, -5.0], 0.0, &zero_cfg).unwrap();
    let zero = r.delta.iter().all(|&d| d == 0.0);
    outcome(worst < 1e-3 && zero, format!("max |δ - δ*| {worst:.1e}, λ=0 gives δ=0: {zero}"))
}

fn certificate_oracle() -> Outcome {
    let mut rng = rng_from(104, &[]);
    let mut worst = 0.0f64;
    for sigma in [0.1, 0.5, 1.0] {
        for seed in 0..10 {
            let p = rng.random_range(1..=4);
            let a: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..2.0)).collect();
            let model = ARGaussianModel::new(a.clone(), 0.2, -30.0).unwrap();
            let r = estimate_certificate(&model, &x, 1, &CertificateConfig::new(sigma, 20000, seed)).unwrap();
            worst = worst.max((r.bound_estimate / l2_norm(&a) - 1.0).abs());
        }
    }
    let constant = ARGaussianModel::new(vec![0.0, 0.0], 3.0, -30.0).unwrap();
    let c = estimate_certificate(&constant, &[1.0, 2.0], 1, &CertificateConfig::new(0.5, 5000, 1)).unwrap().bound_estimate;
    outcome(worst <= 0.02 && c < 1e-3, format!("max rel dev from ‖a‖ {:.2}%, constant bound {c:.1e}", 100.0 * worst))
}

/// Measured `W1(g(x), g(x+δ)) / ‖δ‖` under shared draws, with its bootstrap
/// standard error over jointly resampled paths.
fn growth_ratio<F: Forecaster<f64>>(model: &F, x: &[f64], delta: &[f64], horizon: usize, cfg: &SmoothingConfig) -> (Vec<f64>, f64, f64) {
    let xd: Vec<f64> = x.iter().zip(delta).map(|(a, b)| a + b).collect();
    let a = smooth_forecast(model, x, horizon, cfg).unwrap().column(horizon).unwrap();
    let b = smooth_forecast(model, &xd, horizon, cfg).unwrap().column(horizon).unwrap();
    let norm = l2_norm(delta);
    let ratio = wasserstein1(&marginal(&a), &marginal(&b)) / norm;
    let mut rng = rng_from(cfg.seed, &[0x5e]);
    let reps: Vec<f64> = (0..20)
        .map(|_| {
            let idx: Vec<usize> = (0..a.len()).map(|_| rng.random_range(0..a.len())).collect();
            let ra: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
            let rb: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
            wasserstein1(&marginal(&ra), &marginal(&rb)) / norm
        })
        .collect();
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let se = (reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt();
    (a, ratio, se)
}

fn bound_soundness() -> Outcome {
    let mut rng = rng_from(105, &[]);
    let trials = 200;
    let n = 10000;
    let mut ok = 0;
    for trial in 0..trials {
        let p = rng.random_range(1..=3);
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..2.0)).collect();
        let dir: Vec<f64> = (0..p).map(|_| std_normal::<f64, _>(&mut rng)).collect();
        let r = rng.random_range(0.001..0.01) / l2_norm(&dir);
        let delta: Vec<f64> = dir.iter().map(|d| d * r).collect();
        let sigma = [0.25, 0.5, 1.0][trial % 3];
        let horizon = rng.random_range(1..=2);
        let cfg = SmoothingConfig { sigma, n, noise_mode: NoiseMode::Absolute, seed: trial as u64 };
        let (samples, ratio, se_w) = if trial % 2 == 0 {
            growth_ratio(&random_ar(&mut rng, p), &x, &delta, horizon, &cfg)
        } else {
            growth_ratio(&NeuralARModel::<f64>::init(p, [4, 4], &mut rng).unwrap(), &x, &delta, horizon, &cfg)
        };
        let cert = certificate_from_samples(samples, horizon, &CertificateConfig::new(sigma, n, trial as u64)).unwrap();
        let rel = ((cert.mc_stderr / cert.bound_estimate).powi(2) + (se_w / cert.bound_estimate).powi(2)).sqrt();
        if ratio <= cert.bound_estimate * (1.0 + 3.0 * rel) {
            ok += 1;
        }
    }
    let frac = ok as f64 / trials as f64;
    outcome(frac >= 0.95, format!("{ok}/{trials} trials within bound"))
}

fn constants() -> Outcome {
    let unit = TailEnvelope::Lemma2 { m1: 0.0, m2: 1.0 };
    let integral = unit.integral().unwrap();
    let ez = expected_norm_gaussian(1).unwrap();
    let exact = (2.0 / std::f64::consts::PI).sqrt();
    let hand = (integral - 2.0).abs() <= 1e-10 && (ez - exact).abs() <= 1e-10;
    let mut rng = rng_from(106, &[]);
    let mut capped = true;
    for seed in 0..10 {
        let p = rng.random_range(1..=3);
        let model = random_ar(&mut rng, p);
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (m1, m2) = model.moment_bounds(2.0);
        let env = TailEnvelope::Lemma2 { m1, m2 };
        let sigma = rng.random_range(0.1..1.0);
        let cfg = CertificateConfig { bootstrap: 0, ..CertificateConfig::new(sigma, 2000, seed) };
        let l1 = lemma1_constant(&env, sigma, p).unwrap();
        let mixed = mixed_constant(&model, &x, 1, rng.random_range(0.5..6.0), &env, &cfg).unwrap();
        capped &= mixed <= l1;
    }
    outcome(hand && capped, format!("∫φ = {integral:.12}, E|Z| err {:.1e}, mixed ≤ envelope constant: {capped}", (ez - exact).abs()))
}

fn config() -> ExperimentConfig {
    ExperimentConfig::from_json_str(CONFIG).unwrap()
}

fn adversarial(report: &RunReport, n_seeds: usize) -> Outcome {
    let last = report.grid.len() - 1;
    let monotone = report.methods.iter().all(|m| (0..n_seeds).all(|s| report.curve(m, s).windows(2).all(|w| w[0] <= w[1])));
    let rs_wins = (0..n_seeds).filter(|&s| report.curve("rs", s)[last] <= report.curve("vanilla", s)[last]).count();
    let ratios: Vec<f64> = (0..n_seeds).map(|s| report.curve("rt", s)[0] / report.curve("vanilla", s)[0]).collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    outcome(
        monotone && rs_wins >= 7 && max_ratio <= 2.0,
        format!(
            "(a) nondecreasing: {monotone}; (b) rs ≤ vanilla at η={:.1}: {rs_wins}/{n_seeds}; (c) max rt/vanilla clean ND {max_ratio:.3}",
            report.grid[last]
        ),
    )
}

fn timeshift(report: &RunReport, n_seeds: usize) -> Outcome {
    let (lo, hi) = (0, report.grid.len() - 1);
    let zero = report.grid.iter().position(|&g| g == 0.0).expect("grid contains ρ = 0");
    let mut centred = 0;
    for m in &report.methods {
        let c = |g| report.cell(m, report.grid[g]).unwrap().mean;
        if c(zero) <= c(lo) && c(zero) <= c(hi) {
            centred += 1;
        }
    }
    let both = (0..n_seeds)
        .filter(|&s| {
            let (v, f) = (report.curve("vanilla", s), report.curve("fs", s));
            f[lo] <= v[lo] && f[hi] <= v[hi]
        })
        .count();
    let low = (0..n_seeds).filter(|&s| report.curve("fs", s)[lo] <= report.curve("vanilla", s)[lo]).count();
    let high = (0..n_seeds).filter(|&s| report.curve("fs", s)[hi] <= report.curve("vanilla", s)[hi]).count();
    outcome(
        centred == report.methods.len() && both >= 7,
        format!(
            "(a) ρ=0 ≤ endpoints: {centred}/{} methods; (b) fs ≤ vanilla at both endpoints: {both}/{n_seeds} (low {low}, high {high})",
            report.methods.len()
        ),
    )
}

fn wilcoxon() -> Outcome {
    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    let b = [0.0; 5];
    let p = wilcoxon_signed_rank(&a, &b).unwrap().p_value;
    let same = wilcoxon_signed_rank(&a, &a).unwrap().p_value;
    outcome(p == 2.0 / 32.0 && same == 1.0, format!("all-positive p = {p}, identical p = {same}"))
}

fn report(id: &str, name: &str, limit: Option<Duration>, elapsed: Duration, o: &Outcome) -> bool {
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = o.pass && in_time;
    let budget = limit.map(|l| format!(" / {:.0} s", l.as_secs_f64())).unwrap_or_default();
    println!(
        "[{id:>2}] {name:<32} {} ({:.2} s{budget}) {}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        o.detail
    );
    pass
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

fn main() {
    // Accept and ignore the flags the test runner passes to harness binaries.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let secs = Duration::from_secs;
    let mut results = Vec::new();
    let mut record = |id: &str, name: &str, limit: Option<Duration>, (o, t): (Outcome, Duration)| {
        results.push((id.to_string(), report(id, name, limit, t, &o)));
    };

    record("1", "W1 oracle", Some(secs(1)), timed(w1_oracle));
    record("2", "gradient oracle", Some(secs(30)), timed(gradient_oracle));
    record("3", "attack oracle", Some(secs(30)), timed(attack_oracle));
    record("4", "certificate oracle", Some(secs(120)), timed(certificate_oracle));
    record("5", "smoothing bound soundness", Some(secs(300)), timed(bound_soundness));
    record("6", "envelope and mixed constants", Some(secs(1)), timed(constants));

    let cfg = config();
    let n_seeds = cfg.seeds.len();
    let (adv, t_adv) = timed(|| run_adversarial_pipeline(&cfg).unwrap());
    record("7", "adversarial pipeline", Some(secs(600)), (adversarial(&adv, n_seeds), t_adv));
    let (shift, t_shift) = timed(|| run_timeshift_pipeline(&cfg).unwrap());
    record("8", "time-shift pipeline", Some(secs(600)), (timeshift(&shift, n_seeds), t_shift));
    record("9", "Wilcoxon signed-rank", Some(secs(1)), timed(wilcoxon));

    let (same, t_rerun) = timed(|| {
        let adv_again = run_adversarial_pipeline(&cfg).unwrap().to_json();
        let shift_again = run_timeshift_pipeline(&cfg).unwrap().to_json();
        (adv_again == adv.to_json(), shift_again == shift.to_json())
    });
    record(
        "10",
        "determinism",
        None,
        (outcome(same.0 && same.1, format!("adversarial identical: {}, time-shift identical: {}", same.0, same.1)), t_rerun),
    );

    let failed: Vec<&str> = results.iter().filter(|(_, p)| !p).map(|(id, _)| id.as_str()).collect();
    println!("{}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failing: {}", failed.join(", "));
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
