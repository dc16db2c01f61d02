//! Input randomized smoothing and future smoothing.
//!
//! [`smooth_forecast`] draws each sample path from the base model evaluated on
//! an independently noised copy of the input. [`future_smooth_forecast`]
//! instead noises the conditioning future values of an autoregressive
//! rollout, step by step, feeding the per-step sample mean forward.
//!
//! Noise and model randomness come from separate streams derived from the
//! config seed, so `σ = 0` reproduces the base forecaster bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::forecaster::{rollout, Forecaster, InputNoise, NoiseMode};
use crate::rng::{rng_from, std_normal, Rng};
use crate::series::{EmpiricalMarginal, ForecastSamples};
use crate::Scalar;

const NOISE_STREAM: u64 = 0;
const MODEL_STREAM: u64 = 1;

/// Generator used for the base model's own sampling under `seed`.
pub fn model_stream(seed: u64) -> Rng {
    rng_from(seed, &[MODEL_STREAM])
}

pub fn noise_stream(seed: u64) -> Rng {
    rng_from(seed, &[NOISE_STREAM])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub sigma: f64,
    pub n: usize,
    pub noise_mode: NoiseMode,
    pub seed: u64,
}

impl SmoothingConfig {
    pub fn input_noise<T: Scalar>(&self) -> InputNoise<T> {
        InputNoise { mode: self.noise_mode, sigma: T::lit(self.sigma) }
    }
}

/// How Algorithm-2 style smoothing summarizes each step's samples before
/// conditioning on them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedForward {
    #[default]
    Mean,
    Median,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FutureSmoothingConfig {
    pub sigma: f64,
    pub n: usize,
    /// Number of observed future values supplied to the forecaster.
    pub k: usize,
    pub seed: u64,
    #[serde(default)]
    pub feed: FeedForward,
}

/// Output of future smoothing: the per-step samples (`horizon_offset = k`)
/// and the values fed forward at each step.
#[derive(Clone, Debug, PartialEq)]
pub struct FutureSmoothed<T> {
    pub samples: ForecastSamples<T>,
    pub point_forecast: Vec<T>,
}

fn check_sigma(sigma: f64, n: usize) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("smoothing sigma must be finite and non-negative, got {sigma}")));
    }
    if n == 0 {
        return Err(invalid("smoothing needs n >= 1 sample paths"));
    }
    Ok(())
}

/// `n` sample paths from the smoothed forecaster `g_σ` at `x`.
pub fn smooth_forecast<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    x: &[T],
    horizons: usize,
    cfg: &SmoothingConfig,
) -> Result<ForecastSamples<T>> {
    check_sigma(cfg.sigma, cfg.n)?;
    if x.len() < model.min_history() {
        return Err(invalid(format!("input length {} shorter than the model's {} lags", x.len(), model.min_history())));
    }
    if horizons == 0 {
        return Err(invalid("need at least one horizon"));
    }
    let noise = cfg.input_noise::<T>();
    let mut noise_rng = noise_stream(cfg.seed);
    let mut model_rng = model_stream(cfg.seed);
    let mut z = vec![T::zero(); x.len()];
    let mut eps = vec![T::zero(); horizons];
    let mut flat = Vec::with_capacity(cfg.n * horizons);
    for _ in 0..cfg.n {
        let noised;
        let input = if cfg.sigma > 0.0 {
            z.iter_mut().for_each(|v| *v = std_normal(&mut noise_rng));
            noised = noise.apply(x, &z);
            &noised[..]
        } else {
            x
        };
        eps.iter_mut().for_each(|e| *e = std_normal(&mut model_rng));
        flat.extend(rollout(model, input, &eps));
    }
    ForecastSamples::from_flat(flat, cfg.n, horizons, 0)
}

/// Future smoothing for an autoregressive forecaster over a window of
/// `prediction_length` future steps, the first `k` of which are observed.
///
/// The conditioning values are the `k` observed futures followed by the
/// point forecasts produced so far. For each of the remaining
/// `prediction_length − k` steps, every
/// one of the `n` samples is drawn from the model on `x` followed by a freshly
/// noised copy (`N(0, σ²)` per coordinate) of all conditioning values; `x`
/// itself is never noised. The step's mean (or median) becomes the next
/// conditioning value.
pub fn future_smooth_forecast<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    x: &[T],
    observed: &[T],
    prediction_length: usize,
    cfg: &FutureSmoothingConfig,
) -> Result<FutureSmoothed<T>> {
    check_sigma(cfg.sigma, cfg.n)?;
    if cfg.k != observed.len() {
        return Err(invalid(format!("k = {} but {} observed values supplied", cfg.k, observed.len())));
    }
    if cfg.k >= prediction_length {
        return Err(invalid(format!(
            "observed count k = {} must be below the prediction length {prediction_length}",
            cfg.k
        )));
    }
    let horizons = prediction_length - cfg.k;
    if x.len() + cfg.k < model.min_history() {
        return Err(invalid("input plus observed values shorter than the model's lags"));
    }
    let sigma = T::lit(cfg.sigma);
    let mut noise_rng = noise_stream(cfg.seed);
    let mut model_rng = model_stream(cfg.seed);
    let t_len = x.len();
    let mut cond: Vec<T> = observed.to_vec();
    let mut hist: Vec<T> = Vec::with_capacity(t_len + cfg.k + horizons);
    let mut columns: Vec<Vec<T>> = Vec::with_capacity(horizons);
    let mut point = Vec::with_capacity(horizons);
    for _ in 0..horizons {
        let mut col = Vec::with_capacity(cfg.n);
        for _ in 0..cfg.n {
            hist.clear();
            hist.extend_from_slice(x);
            if cfg.sigma > 0.0 {
                hist.extend(cond.iter().map(|&y| y + sigma * std_normal::<T, _>(&mut noise_rng)));
            } else {
                hist.extend_from_slice(&cond);
            }
            let s = model.step(&hist);
            col.push(s.mean + s.std * std_normal::<T, _>(&mut model_rng));
        }
        let fed = match cfg.feed {
            FeedForward::Mean => col.iter().copied().sum::<T>() / T::from_usize_lossy(cfg.n),
            FeedForward::Median => EmpiricalMarginal::new(col.clone())?.median(),
        };
        cond.push(fed);
        point.push(fed);
        columns.push(col);
    }
    let mut flat = Vec::with_capacity(cfg.n * horizons);
    for j in 0..cfg.n {
        flat.extend(columns.iter().map(|c| c[j]));
    }
    Ok(FutureSmoothed {
        samples: ForecastSamples::from_flat(flat, cfg.n, horizons, cfg.k)?,
        point_forecast: point,
    })
}
