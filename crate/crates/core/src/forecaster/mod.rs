//! Sample-based autoregressive forecasters.
//!
//! A [`Forecaster`] describes one autoregressive step: given the history seen
//! so far (the input series followed by any earlier forecasts) it returns the
//! mean and standard deviation of a Gaussian for the next value. Sample paths
//! follow by the reparametrization `Y_h = μ_h + s_h·ε_h`, which also makes the
//! Monte-Carlo mean differentiable in the input.
//!
//! Models work on whatever domain they are given. Callers scale a series by
//! [`scale_of`] before handing it over and multiply forecasts back afterwards.

mod ar;
mod checkpoint;
mod neural;
mod train;

pub use ar::ARGaussianModel;
pub use checkpoint::{Model, ModelCheckpoint, CHECKPOINT_VERSION};
pub use neural::NeuralARModel;
pub use train::{train, NoiseMode, TrainConfig, TrainReport};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, invalid, Error, Result};
use crate::rng::std_normal;
use crate::series::ForecastSamples;
use crate::Scalar;

/// Gaussian parameters of one autoregressive step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step<T> {
    pub mean: T,
    pub std: T,
}

pub trait Forecaster<T: Scalar> {
    /// Shortest history the model can condition on.
    fn min_history(&self) -> usize;

    fn step(&self, history: &[T]) -> Step<T>;

    /// Adds `∂(cot_mean·mean + cot_std·std) / ∂history` into `grad`, which has
    /// the same length as `history`.
    fn step_vjp(&self, history: &[T], cot_mean: T, cot_std: T, grad: &mut [T]);
}

/// Forecasters whose parameters can be fit by gradient descent.
pub trait Trainable<T: Scalar>: Forecaster<T> {
    fn params(&self) -> Vec<T>;

    fn set_params(&mut self, params: &[T]) -> Result<()>;

    /// Adds `∂(cot_mean·mean + cot_std·std) / ∂params` into `grad`.
    fn step_param_vjp(&self, history: &[T], cot_mean: T, cot_std: T, grad: &mut [T]);
}

impl<T: Scalar, F: Forecaster<T> + ?Sized> Forecaster<T> for &F {
    fn min_history(&self) -> usize {
        (**self).min_history()
    }
    fn step(&self, history: &[T]) -> Step<T> {
        (**self).step(history)
    }
    fn step_vjp(&self, history: &[T], cot_mean: T, cot_std: T, grad: &mut [T]) {
        (**self).step_vjp(history, cot_mean, cot_std, grad)
    }
}

/// Per-series scale `S_x = 1 + mean|x_i|`.
pub fn scale_of<T: Scalar>(x: &[T]) -> T {
    if x.is_empty() {
        return T::one();
    }
    T::one() + x.iter().map(|v| v.abs()).sum::<T>() / T::from_usize_lossy(x.len())
}

/// Default number of lags: `min(4τ, T − 1)`, at least one.
pub fn default_lags(prediction_length: usize, context_length: usize) -> usize {
    (4 * prediction_length).min(context_length.saturating_sub(1)).max(1)
}

fn check_input<T: Scalar, F: Forecaster<T> + ?Sized>(model: &F, x: &[T]) -> Result<()> {
    if x.len() < model.min_history() {
        return Err(invalid(format!(
            "input length {} shorter than the model's {} lags",
            x.len(),
            model.min_history()
        )));
    }
    Ok(())
}

/// One path with the standard-normal draws supplied explicitly.
pub fn rollout<T: Scalar, F: Forecaster<T> + ?Sized>(model: &F, x: &[T], eps: &[T]) -> Vec<T> {
    let mut hist = Vec::with_capacity(x.len() + eps.len());
    hist.extend_from_slice(x);
    for &e in eps {
        let s = model.step(&hist);
        hist.push(s.mean + s.std * e);
    }
    hist.split_off(x.len())
}

/// Mean-only rollout (`ε = 0`).
pub fn mean_rollout<T: Scalar, F: Forecaster<T> + ?Sized>(model: &F, x: &[T], horizons: usize) -> Vec<T> {
    rollout(model, x, &vec![T::zero(); horizons])
}

/// `n` independent autoregressive sample paths of length `horizons`.
pub fn sample_paths<T, F, R>(model: &F, x: &[T], horizons: usize, n: usize, rng: &mut R) -> Result<ForecastSamples<T>>
where
    T: Scalar,
    F: Forecaster<T> + ?Sized,
    R: Rng + ?Sized,
{
    check_input(model, x)?;
    if n == 0 || horizons == 0 {
        return Err(invalid("need n >= 1 paths and at least one horizon"));
    }
    let mut flat = Vec::with_capacity(n * horizons);
    let mut eps = vec![T::zero(); horizons];
    for _ in 0..n {
        eps.iter_mut().for_each(|e| *e = std_normal(rng));
        flat.extend(rollout(model, x, &eps));
    }
    ForecastSamples::from_flat(flat, n, horizons, 0)
}

/// Samples of `Y_{k+1}, …, Y_{k+horizons}` given the first `k = observed.len()`
/// future values: the `f^(h)` family conditioned on `observed`.
pub fn sample_paths_continuation<T, F, R>(
    model: &F,
    x: &[T],
    observed: &[T],
    horizons: usize,
    n: usize,
    rng: &mut R,
) -> Result<ForecastSamples<T>>
where
    T: Scalar,
    F: Forecaster<T> + ?Sized,
    R: Rng + ?Sized,
{
    let joined: Vec<T> = x.iter().chain(observed).copied().collect();
    let mut s = sample_paths(model, &joined, horizons, n, rng)?;
    s.horizon_offset = observed.len();
    Ok(s)
}

/// Gaussian noise applied to a whole input series before forecasting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputNoise<T> {
    pub mode: NoiseMode,
    pub sigma: T,
}

impl<T: Scalar> InputNoise<T> {
    pub fn absolute(sigma: T) -> Self {
        InputNoise { mode: NoiseMode::Absolute, sigma }
    }

    pub fn relative(sigma: T) -> Self {
        InputNoise { mode: NoiseMode::Relative, sigma }
    }

    /// Noised copy of `x` for standard-normal draws `z`.
    pub fn apply(&self, x: &[T], z: &[T]) -> Vec<T> {
        x.iter()
            .zip(z)
            .map(|(&v, &zi)| match self.mode {
                NoiseMode::Absolute => v + self.sigma * zi,
                NoiseMode::Relative => v * (T::one() + self.sigma * zi),
            })
            .collect()
    }

    /// `∂ noised_i / ∂ x_i`.
    fn jacobian_diag(&self, z: T) -> T {
        match self.mode {
            NoiseMode::Absolute => T::one(),
            NoiseMode::Relative => T::one() + self.sigma * z,
        }
    }
}

/// Frozen standard-normal draws for reparametrized Monte-Carlo estimates.
///
/// Holding them fixed makes the estimated mean a deterministic smooth
/// function of the input perturbation.
#[derive(Clone, Debug)]
pub struct CommonRandomNumbers<T> {
    n: usize,
    horizons: usize,
    input_len: usize,
    eps: Vec<T>,
    zeta: Vec<T>,
    noise: Option<InputNoise<T>>,
}

impl<T: Scalar> CommonRandomNumbers<T> {
    pub fn draw<R: Rng + ?Sized>(
        n: usize,
        horizons: usize,
        input_len: usize,
        noise: Option<InputNoise<T>>,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 || horizons == 0 {
            return Err(invalid("need n >= 1 paths and at least one horizon"));
        }
        let noise = noise.filter(|nz| nz.sigma != T::zero());
        let mut eps = Vec::with_capacity(n * horizons);
        let mut zeta = Vec::new();
        for _ in 0..n {
            if noise.is_some() {
                zeta.extend((0..input_len).map(|_| std_normal::<T, _>(rng)));
            }
            eps.extend((0..horizons).map(|_| std_normal::<T, _>(rng)));
        }
        Ok(CommonRandomNumbers { n, horizons, input_len, eps, zeta, noise })
    }

    pub fn n_paths(&self) -> usize {
        self.n
    }

    pub fn horizons(&self) -> usize {
        self.horizons
    }

    fn eps(&self, j: usize) -> &[T] {
        &self.eps[j * self.horizons..(j + 1) * self.horizons]
    }

    fn input(&self, j: usize, x: &[T]) -> Vec<T> {
        match &self.noise {
            Some(nz) => nz.apply(x, &self.zeta[j * self.input_len..(j + 1) * self.input_len]),
            None => x.to_vec(),
        }
    }
}

fn check_statistic<T: Scalar>(x: &[T], delta: &[T], horizons: &[usize], crn: &CommonRandomNumbers<T>) -> Result<()> {
    ensure_len("perturbation", x.len(), delta.len())?;
    ensure_len("common random numbers input", crn.input_len, x.len())?;
    if horizons.is_empty() {
        return Err(invalid("horizon set must be nonempty"));
    }
    if let Some(&h) = horizons.iter().find(|&&h| h == 0 || h > crn.horizons) {
        return Err(invalid(format!("horizon {h} outside 1..={}", crn.horizons)));
    }
    Ok(())
}

/// Monte-Carlo estimate `m(δ) = (1/n) Σ_j Y_H^{(j)}(x + δ)` under frozen draws.
pub fn expected_statistic<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    x: &[T],
    delta: &[T],
    horizons: &[usize],
    crn: &CommonRandomNumbers<T>,
) -> Result<Vec<T>> {
    check_statistic(x, delta, horizons, crn)?;
    check_input(model, x)?;
    let xd: Vec<T> = x.iter().zip(delta).map(|(&a, &b)| a + b).collect();
    let mut acc = vec![T::zero(); horizons.len()];
    for j in 0..crn.n {
        let path = rollout(model, &crn.input(j, &xd), crn.eps(j));
        for (a, &h) in acc.iter_mut().zip(horizons) {
            *a += path[h - 1];
        }
    }
    let n = T::from_usize_lossy(crn.n);
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// `m(δ)` and the vector-Jacobian product `Σ_h w_h ∇_δ m_h(δ)`, by reverse
/// mode through every frozen rollout.
pub fn vjp_expected_statistic<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    x: &[T],
    delta: &[T],
    horizons: &[usize],
    weights: &[T],
    crn: &CommonRandomNumbers<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    check_statistic(x, delta, horizons, crn)?;
    check_input(model, x)?;
    ensure_len("cotangent weights", horizons.len(), weights.len())?;
    let t_len = x.len();
    let tau = crn.horizons;
    let xd: Vec<T> = x.iter().zip(delta).map(|(&a, &b)| a + b).collect();
    let mut value = vec![T::zero(); horizons.len()];
    let mut grad = vec![T::zero(); t_len];
    let mut adj = vec![T::zero(); t_len + tau];
    for j in 0..crn.n {
        let input = crn.input(j, &xd);
        let eps = crn.eps(j);
        let mut hist = input.clone();
        let mut stds = Vec::with_capacity(tau);
        for &e in eps {
            let s = model.step(&hist);
            hist.push(s.mean + s.std * e);
            stds.push(s.std);
        }
        for (v, &h) in value.iter_mut().zip(horizons) {
            *v += hist[t_len + h - 1];
        }
        adj.iter_mut().for_each(|a| *a = T::zero());
        for (&w, &h) in weights.iter().zip(horizons) {
            adj[t_len + h - 1] += w;
        }
        for h in (1..=tau).rev() {
            let pos = t_len + h - 1;
            let a = adj[pos];
            if a != T::zero() {
                let (head, _) = adj.split_at_mut(pos);
                model.step_vjp(&hist[..pos], a, a * eps[h - 1], head);
            }
        }
        match &crn.noise {
            Some(nz) => {
                let z = &crn.zeta[j * t_len..(j + 1) * t_len];
                for ((g, &a), &zi) in grad.iter_mut().zip(&adj[..t_len]).zip(z) {
                    *g += a * nz.jacobian_diag(zi);
                }
            }
            None => grad.iter_mut().zip(&adj[..t_len]).for_each(|(g, &a)| *g += a),
        }
    }
    let n = T::from_usize_lossy(crn.n);
    value.iter_mut().for_each(|v| *v /= n);
    grad.iter_mut().for_each(|g| *g /= n);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient of the expected statistic".into()));
    }
    Ok((value, grad))
}

/// `m(δ)` and its Jacobian, one row `∇_δ m_h` per horizon in `horizons`.
pub fn grad_expected_statistic<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    x: &[T],
    delta: &[T],
    horizons: &[usize],
    crn: &CommonRandomNumbers<T>,
) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    check_statistic(x, delta, horizons, crn)?;
    let mut value = Vec::new();
    let mut jac = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let (v, g) = vjp_expected_statistic(model, x, delta, &[h], &[T::one()], crn)?;
        value.push(v[0]);
        jac.push(g);
    }
    Ok((value, jac))
}
