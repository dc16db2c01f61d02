//! The adversarial-sweep and time-shift experiments.
//!
//! Every replicate seed regenerates (synthetic) data, trains a vanilla and a
//! randomized-trained model, and evaluates every method on the same series
//! with the same per-series seeds, so method differences are paired.
//! Models work on series divided by the clean-context scale `S_x`; errors
//! are accumulated back in the original units.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::{CertificateSummary, Provenance, RunReport};
use crate::attack::{attack_sweep, make_time_shift_perturbation, rho_from_log10, AttackConfig};
use crate::certificate::{certify_horizons, certify_horizons_relative, CertificateConfig};
use crate::error::{invalid, Result};
use crate::forecaster::{sample_paths_continuation, train, InputNoise, Model, NoiseMode, TrainConfig, TrainReport};
use crate::rng::{derive_seed, rng_from};
use crate::series::{Perturbation, TimeSeries};
use crate::smoothing::{future_smooth_forecast, FutureSmoothingConfig};

pub const ADVERSARIAL_METHODS: [&str; 4] = ["vanilla", "rs", "rt", "rt+rs"];
pub const TIMESHIFT_METHODS: [&str; 4] = ["vanilla", "fs", "rt", "rt+fs"];

const DATA: u64 = 1;
const INIT: u64 = 2;
const TRAIN: u64 = 3;
const ATTACK: u64 = 4;
const SHIFT: u64 = 5;
const CERT: u64 = 6;

/// Models trained for one replicate.
#[derive(Clone, Debug)]
pub struct TrainedModels {
    pub vanilla: Model<f64>,
    pub randomized: Model<f64>,
    pub vanilla_report: TrainReport,
    pub randomized_report: TrainReport,
}

fn context_length(data: &[TimeSeries<f64>]) -> Result<usize> {
    data.iter()
        .map(|s| s.context_length())
        .min()
        .ok_or_else(|| invalid("dataset is empty"))
}

/// Trains the vanilla (`σ_tr = 0`) and randomized-trained models from the
/// same initialization.
pub fn train_models(cfg: &ExperimentConfig, data: &[TimeSeries<f64>], seed: u64) -> Result<TrainedModels> {
    let tau = cfg.dataset.prediction_length();
    let ctx = context_length(data)?;
    let init = cfg.model.init(tau, ctx, derive_seed(seed, &[INIT]))?;
    let base = TrainConfig { seed: derive_seed(seed, &[TRAIN]), context_length: Some(ctx), ..cfg.training.clone() };
    let (vanilla, vanilla_report) = train(init.clone(), data, &TrainConfig { sigma_tr: 0.0, ..base.clone() })?;
    let (randomized, randomized_report) = train(init, data, &TrainConfig { sigma_tr: cfg.sigma_tr, ..base })?;
    Ok(TrainedModels { vanilla, randomized, vanilla_report, randomized_report })
}

pub fn eval_series_from<'a>(cfg: &ExperimentConfig, data: &'a [TimeSeries<f64>]) -> Result<Vec<&'a TimeSeries<f64>>> {
    let take = cfg.max_eval_series.unwrap_or(usize::MAX);
    let out: Vec<_> = data.iter().filter(|s| s.has_future()).take(take).collect();
    if out.is_empty() {
        return Err(invalid("no evaluation series with ground-truth futures"));
    }
    Ok(out)
}

/// Per-seed outcome, written incrementally so partial runs leave artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// `nd[method][grid]`.
    pub nd: Vec<Vec<f64>>,
    pub certificates: Vec<CertificateSummary>,
    pub vanilla_final_loss: f64,
    pub randomized_final_loss: f64,
}

fn write_partial(dir: Option<&Path>, pipeline: &str, r: &SeedResult) -> Result<()> {
    if let Some(dir) = dir {
        let d = dir.join("partial");
        std::fs::create_dir_all(&d)?;
        std::fs::write(d.join(format!("{pipeline}_seed{}.json", r.seed)), serde_json::to_string_pretty(r)?)?;
    }
    Ok(())
}

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        seeds: cfg.seeds.clone(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn assemble(
    cfg: &ExperimentConfig,
    pipeline: &str,
    grid_name: &str,
    grid: &[f64],
    methods: &[&str],
    seeds: Vec<SeedResult>,
) -> Result<RunReport> {
    let raw: Vec<Vec<Vec<f64>>> = (0..methods.len())
        .map(|m| (0..grid.len()).map(|g| seeds.iter().map(|s| s.nd[m][g]).collect()).collect())
        .collect();
    let certs = seeds.into_iter().flat_map(|s| s.certificates).collect();
    RunReport::assemble(pipeline, grid_name, grid, methods, &raw, certs, provenance(cfg))
}

fn smoothing_noise(cfg: &ExperimentConfig) -> InputNoise<f64> {
    InputNoise { mode: cfg.smoothing.noise_mode, sigma: cfg.smoothing.sigma }
}

fn certificate_summaries(
    cfg: &ExperimentConfig,
    models: &TrainedModels,
    series: &[&TimeSeries<f64>],
    seed: u64,
) -> Result<Vec<CertificateSummary>> {
    let Some(spec) = &cfg.certificate else { return Ok(Vec::new()) };
    if !(cfg.smoothing.sigma > 0.0) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (method, model) in [("rs", &models.vanilla), ("rt+rs", &models.randomized)] {
        let mut bounds = Vec::new();
        let mut errs = Vec::new();
        for (i, s) in series.iter().take(spec.series).enumerate() {
            let x = s.scaled_context();
            let cc = CertificateConfig {
                sigma: cfg.smoothing.sigma,
                n_cdf: spec.n_cdf,
                grid_points: 1001,
                bootstrap: spec.bootstrap,
                seed: derive_seed(seed, &[CERT, i as u64]),
            };
            let (headline, reports) = match cfg.smoothing.noise_mode {
                NoiseMode::Absolute => certify_horizons(model, &x, &cfg.attack.horizons, &cc)?,
                NoiseMode::Relative => certify_horizons_relative(model, &x, &cfg.attack.horizons, &cc)?,
            };
            bounds.push(headline);
            errs.push(reports.iter().map(|r| r.mc_stderr).fold(0.0, f64::max));
        }
        if bounds.is_empty() {
            continue;
        }
        out.push(CertificateSummary {
            method: method.into(),
            seed,
            series: bounds.len(),
            mean_bound: bounds.iter().sum::<f64>() / bounds.len() as f64,
            max_bound: bounds.iter().cloned().fold(0.0, f64::max),
            mean_stderr: errs.iter().sum::<f64>() / errs.len() as f64,
            heuristic: cfg.smoothing.noise_mode == NoiseMode::Relative,
        });
    }
    Ok(out)
}

/// Worst-case ND_H of one forecaster (smoothed by `noise` when given)
/// against ground truth, per threshold in `cfg.attack.eta_grid`, pooled over
/// `series`.
pub fn adversarial_curve(
    cfg: &ExperimentConfig,
    model: &Model<f64>,
    noise: Option<InputNoise<f64>>,
    n_eval: usize,
    series: &[&TimeSeries<f64>],
    seed: u64,
) -> Result<Vec<f64>> {
    let mut err = vec![0.0; cfg.attack.eta_grid.len()];
    let mut refs = 0.0;
    for (i, s) in series.iter().enumerate() {
        let scale = s.scale();
        let x = s.scaled_context();
        let future = s.future().ok_or_else(|| invalid(format!("series `{}` has no ground-truth future", s.id)))?;
        let target: Vec<f64> = cfg.attack.horizons.iter().map(|&h| future[h - 1] / scale).collect();
        let acfg = AttackConfig { seed: derive_seed(seed, &[ATTACK, i as u64]), n_eval, ..cfg.attack.clone() };
        let sweep = attack_sweep(model, noise, &x, &target, &acfg)?;
        for (e, entry) in err.iter_mut().zip(&sweep.entries) {
            *e += entry.abs_error * scale;
        }
        refs += sweep.reference_abs_sum * scale;
    }
    Ok(err.into_iter().map(|e| e / refs).collect())
}

/// Worst-case ND_H against ground truth over the threshold grid, for
/// vanilla, RS, RT and RT+RS.
pub fn run_adversarial_pipeline(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_adversarial_pipeline_with_artifacts(cfg, None)
}

pub fn run_adversarial_pipeline_with_artifacts(cfg: &ExperimentConfig, artifacts: Option<&Path>) -> Result<RunReport> {
    cfg.validate()?;
    let grid = cfg.attack.eta_grid.clone();
    if grid.is_empty() {
        return Err(invalid("eta grid is empty"));
    }
    let mut results = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let data = cfg.dataset.load(derive_seed(seed, &[DATA]))?;
        let models = train_models(cfg, &data, seed)?;
        let series = eval_series_from(cfg, &data)?;
        let mut nd = Vec::with_capacity(ADVERSARIAL_METHODS.len());
        for method in ADVERSARIAL_METHODS {
            let (model, noise, n_eval) = match method {
                "vanilla" => (&models.vanilla, None, cfg.n_samples),
                "rs" => (&models.vanilla, Some(smoothing_noise(cfg)), cfg.smoothing.n),
                "rt" => (&models.randomized, None, cfg.n_samples),
                _ => (&models.randomized, Some(smoothing_noise(cfg)), cfg.smoothing.n),
            };
            nd.push(adversarial_curve(cfg, model, noise, n_eval, &series, seed)?);
        }
        let result = SeedResult {
            seed,
            nd,
            certificates: certificate_summaries(cfg, &models, &series, seed)?,
            vanilla_final_loss: models.vanilla_report.final_loss,
            randomized_final_loss: models.randomized_report.final_loss,
        };
        write_partial(artifacts, "adversarial", &result)?;
        results.push(result);
    }
    assemble(cfg, "adversarial", "eta", &grid, &ADVERSARIAL_METHODS, results)
}

/// Mean forecasts for steps `k+1..=τ` given `observed` (length `k`).
fn shift_forecast(
    cfg: &ExperimentConfig,
    model: &Model<f64>,
    smoothed: bool,
    x: &[f64],
    observed: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    let tau = cfg.dataset.prediction_length();
    if smoothed {
        let fcfg = FutureSmoothingConfig {
            sigma: cfg.future_smoothing.sigma,
            n: cfg.future_smoothing.n,
            k: observed.len(),
            seed,
            feed: cfg.future_smoothing.feed,
        };
        Ok(future_smooth_forecast(model, x, observed, tau, &fcfg)?.point_forecast)
    } else {
        let s = sample_paths_continuation(model, x, observed, tau - observed.len(), cfg.n_samples, &mut rng_from(seed, &[]))?;
        Ok(s.mean())
    }
}

/// Relative ND of one forecaster between forecasts issued after appending
/// `(1+ρ)·x_{T+1}` and its original forecasts, over the overlapping horizons
/// `2..=τ`, per grid value of `log₁₀(1+ρ)`, pooled over `series`.
pub fn timeshift_curve(
    cfg: &ExperimentConfig,
    model: &Model<f64>,
    smoothed: bool,
    series: &[&TimeSeries<f64>],
    seed: u64,
) -> Result<Vec<f64>> {
    let mut err = vec![0.0; cfg.log10_rho_grid.len()];
    let mut refs = 0.0;
    for (i, s) in series.iter().enumerate() {
        let scale = s.scale();
        let x = s.scaled_context();
        let future = s.future().ok_or_else(|| invalid(format!("series `{}` has no ground-truth future", s.id)))?;
        let truth_next = future[0] / scale;
        let fseed = derive_seed(seed, &[SHIFT, i as u64]);
        let before = shift_forecast(cfg, model, smoothed, &x, &[], fseed)?;
        refs += before[1..].iter().map(|v| v.abs()).sum::<f64>() * scale;
        for (e, &l) in err.iter_mut().zip(&cfg.log10_rho_grid) {
            let spec = make_time_shift_perturbation(truth_next, before[0], rho_from_log10(l))?;
            let Perturbation::AppendedObservations(appended) = &spec.perturbation else {
                unreachable!("time shift appends observations")
            };
            let after = shift_forecast(cfg, model, smoothed, &x, appended, fseed)?;
            *e += after.iter().zip(&before[1..]).map(|(a, b)| (a - b).abs()).sum::<f64>() * scale;
        }
    }
    if refs == 0.0 {
        return Err(crate::Error::DivisionByZero("pre-shift forecasts are all zero".into()));
    }
    Ok(err.into_iter().map(|e| e / refs).collect())
}

/// Relative ND between forecasts issued after appending `(1+ρ)·x_{T+1}` and
/// the original forecasts, over the overlapping horizons `2..=τ`, for
/// vanilla, FS, RT and RT+FS.
pub fn run_timeshift_pipeline(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_timeshift_pipeline_with_artifacts(cfg, None)
}

pub fn run_timeshift_pipeline_with_artifacts(cfg: &ExperimentConfig, artifacts: Option<&Path>) -> Result<RunReport> {
    cfg.validate()?;
    let tau = cfg.dataset.prediction_length();
    if tau < 2 {
        return Err(invalid("time-shift evaluation needs prediction_length >= 2"));
    }
    let grid = cfg.log10_rho_grid.clone();
    if grid.is_empty() {
        return Err(invalid("rho grid is empty"));
    }
    let mut results = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let data = cfg.dataset.load(derive_seed(seed, &[DATA]))?;
        let models = train_models(cfg, &data, seed)?;
        let series = eval_series_from(cfg, &data)?;
        let mut nd = Vec::with_capacity(TIMESHIFT_METHODS.len());
        for method in TIMESHIFT_METHODS {
            let (model, smoothed) = match method {
                "vanilla" => (&models.vanilla, false),
                "fs" => (&models.vanilla, true),
                "rt" => (&models.randomized, false),
                _ => (&models.randomized, true),
            };
            nd.push(timeshift_curve(cfg, model, smoothed, &series, seed)?);
        }
        let result = SeedResult {
            seed,
            nd,
            certificates: Vec::new(),
            vanilla_final_loss: models.vanilla_report.final_loss,
            randomized_final_loss: models.randomized_report.final_loss,
        };
        write_partial(artifacts, "timeshift", &result)?;
        results.push(result);
    }
    assemble(cfg, "timeshift", "log10_1p_rho", &grid, &TIMESHIFT_METHODS, results)
}

#[cfg(test)]
mod tests;
