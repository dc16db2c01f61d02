use serde::{Deserialize, Serialize};

use super::{Forecaster, Step, Trainable};
use crate::error::{ensure_len, invalid, Result};
use crate::Scalar;

/// Linear Gaussian autoregression: `Y = wᵀ·lags + b + v·ε`, `v = exp(log_sigma)`.
///
/// `weights[i]` multiplies the `i`-th of the last `p` values, oldest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ARGaussianModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub log_sigma: T,
}

impl<T: Scalar> ARGaussianModel<T> {
    pub fn new(weights: Vec<T>, bias: T, log_sigma: T) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("AR model needs at least one lag"));
        }
        Ok(ARGaussianModel { weights, bias, log_sigma })
    }

    /// Zero-initialized model with `p` lags and unit output noise.
    pub fn zeros(p: usize) -> Self {
        ARGaussianModel { weights: vec![T::zero(); p.max(1)], bias: T::zero(), log_sigma: T::zero() }
    }

    pub fn lags(&self) -> usize {
        self.weights.len()
    }

    pub fn sigma(&self) -> T {
        self.log_sigma.exp()
    }

    /// Bounds `(M1, M2)` on `|E[Y]|` and `Var[Y]` of a single step whose lags
    /// lie in `[-input_bound, input_bound]`.
    pub fn moment_bounds(&self, input_bound: T) -> (T, T) {
        let l1: T = self.weights.iter().map(|w| w.abs()).sum();
        (l1 * input_bound + self.bias.abs(), self.sigma() * self.sigma())
    }
}

impl<T: Scalar> Forecaster<T> for ARGaussianModel<T> {
    fn min_history(&self) -> usize {
        self.weights.len()
    }

    fn step(&self, history: &[T]) -> Step<T> {
        let lags = &history[history.len() - self.weights.len()..];
        let mean = self.weights.iter().zip(lags).map(|(&w, &v)| w * v).sum::<T>() + self.bias;
        Step { mean, std: self.sigma() }
    }

    fn step_vjp(&self, history: &[T], cot_mean: T, _cot_std: T, grad: &mut [T]) {
        let off = history.len() - self.weights.len();
        for (g, &w) in grad[off..].iter_mut().zip(&self.weights) {
            *g += cot_mean * w;
        }
    }
}

impl<T: Scalar> Trainable<T> for ARGaussianModel<T> {
    fn params(&self) -> Vec<T> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p.push(self.log_sigma);
        p
    }

    fn set_params(&mut self, params: &[T]) -> Result<()> {
        let p = self.weights.len();
        ensure_len("AR parameters", p + 2, params.len())?;
        self.weights.copy_from_slice(&params[..p]);
        self.bias = params[p];
        self.log_sigma = params[p + 1];
        Ok(())
    }

    fn step_param_vjp(&self, history: &[T], cot_mean: T, cot_std: T, grad: &mut [T]) {
        let p = self.weights.len();
        let lags = &history[history.len() - p..];
        for (g, &v) in grad[..p].iter_mut().zip(lags) {
            *g += cot_mean * v;
        }
        grad[p] += cot_mean;
        grad[p + 1] += cot_std * self.sigma();
    }
}
