//! One-step-ahead Gaussian likelihood training with optional randomized
//! (noise-augmented) training.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{scale_of, Trainable};
use crate::error::{invalid, Error, Result};
use crate::optim::Adam;
use crate::rng::{rng_from, std_normal};
use crate::series::TimeSeries;
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// `x_i + σ ζ_i`
    Absolute,
    /// `x_i (1 + σ ζ_i)`
    Relative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Randomized-training noise level `σ_tr`; 0 trains on clean windows.
    pub sigma_tr: f64,
    pub noise_mode: NoiseMode,
    pub seed: u64,
    /// Length of the context each window's scale is computed from; defaults
    /// to the model's lag count.
    pub context_length: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 128,
            learning_rate: 1e-3,
            sigma_tr: 0.0,
            noise_mode: NoiseMode::Relative,
            seed: 0,
            context_length: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean negative log-likelihood on the clean windows before training.
    pub initial_loss: f64,
    /// Mean training loss of each epoch, on that epoch's (possibly noised) windows.
    pub epoch_losses: Vec<f64>,
    /// Mean negative log-likelihood on the clean windows after training.
    pub final_loss: f64,
    pub windows: usize,
}

struct Window<T> {
    lags: Vec<T>,
    label: T,
}

fn half_ln_2pi<T: Scalar>() -> T {
    T::lit(0.918_938_533_204_672_7)
}

fn nll<T: Scalar>(mean: T, std: T, y: T) -> T {
    let r = (y - mean) / std;
    std.ln() + r * r / T::lit(2.0) + half_ln_2pi()
}

fn windows<T: Scalar>(dataset: &[TimeSeries<T>], lags: usize, context: usize) -> Vec<Window<T>> {
    let mut out = Vec::new();
    for s in dataset {
        let hist = s.history();
        for t in context..hist.len() {
            let ctx = &hist[t - context..t];
            let scale = scale_of(ctx);
            out.push(Window {
                lags: ctx[context - lags..].iter().map(|&v| v / scale).collect(),
                label: hist[t] / scale,
            });
        }
    }
    out
}

fn mean_loss<T: Scalar, M: Trainable<T>>(model: &M, ws: &[Window<T>]) -> T {
    let total: T = ws
        .iter()
        .map(|w| {
            let s = model.step(&w.lags);
            nll(s.mean, s.std, w.label)
        })
        .sum();
    total / T::from_usize_lossy(ws.len())
}

fn perturb<T: Scalar>(v: T, sigma: T, mode: NoiseMode, z: T) -> T {
    match mode {
        NoiseMode::Absolute => v + sigma * z,
        NoiseMode::Relative => v * (T::one() + sigma * z),
    }
}

/// Fits `model` by minibatch Adam on the Gaussian NLL of one-step-ahead
/// predictions over sliding windows of each series' history.
///
/// With `sigma_tr > 0` every window, inputs and label alike, is freshly
/// noised each epoch.
pub fn train<T: Scalar, M: Trainable<T>>(mut model: M, dataset: &[TimeSeries<T>], cfg: &TrainConfig) -> Result<(M, TrainReport)> {
    if dataset.is_empty() {
        return Err(invalid("training dataset is empty"));
    }
    if cfg.batch_size == 0 || cfg.sigma_tr < 0.0 || cfg.learning_rate < 0.0 {
        return Err(invalid("batch_size must be positive; sigma_tr and learning_rate non-negative"));
    }
    let p = model.min_history();
    let context = cfg.context_length.unwrap_or(p).max(p);
    let ws = windows(dataset, p, context);
    if ws.is_empty() {
        return Err(invalid(format!("no training windows: every history is shorter than {} values", context + 1)));
    }
    let initial = mean_loss(&model, &ws).as_f64();
    if !initial.is_finite() {
        return Err(Error::NonFinite(format!("initial training loss is {initial}")));
    }

    let sigma = T::lit(cfg.sigma_tr);
    let mut params = model.params();
    let mut opt = Adam::new(params.len(), T::lit(cfg.learning_rate));
    let mut order: Vec<usize> = (0..ws.len()).collect();
    let mut grad = vec![T::zero(); params.len()];
    let mut lags = vec![T::zero(); p];
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut rng = rng_from(cfg.seed, &[epoch as u64]);
        order.shuffle(&mut rng);
        let mut epoch_total = T::zero();
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let mut batch_total = T::zero();
            for &i in batch {
                let w = &ws[i];
                let label = if cfg.sigma_tr > 0.0 {
                    for (l, &v) in lags.iter_mut().zip(&w.lags) {
                        *l = perturb(v, sigma, cfg.noise_mode, std_normal(&mut rng));
                    }
                    perturb(w.label, sigma, cfg.noise_mode, std_normal(&mut rng))
                } else {
                    lags.copy_from_slice(&w.lags);
                    w.label
                };
                let s = model.step(&lags);
                let r = label - s.mean;
                let inv_var = T::one() / (s.std * s.std);
                batch_total += nll(s.mean, s.std, label);
                let cot_mean = -r * inv_var;
                let cot_std = T::one() / s.std - r * r * inv_var / s.std;
                model.step_param_vjp(&lags, cot_mean, cot_std, &mut grad);
            }
            if !batch_total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "training loss diverged at epoch {epoch}, batch {b} (batch loss {batch_total})"
                )));
            }
            let bs = T::from_usize_lossy(batch.len());
            grad.iter_mut().for_each(|g| *g /= bs);
            opt.step(&mut params, &grad);
            model.set_params(&params)?;
            epoch_total += batch_total;
        }
        epoch_losses.push((epoch_total / T::from_usize_lossy(ws.len())).as_f64());
    }

    let final_loss = mean_loss(&model, &ws).as_f64();
    if !final_loss.is_finite() {
        return Err(Error::NonFinite(format!("final training loss is {final_loss}")));
    }
    Ok((model, TrainReport { initial_loss: initial, epoch_losses, final_loss, windows: ws.len() }))
}
