use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Forecaster, Step, Trainable};
use crate::error::{ensure_len, invalid, Result};
use crate::Scalar;

/// `log s` is clamped to `[ln 1e-4, ln 1e4]`.
const LOG_STD_MIN: f64 = -9.210_340_371_976_184;
const LOG_STD_MAX: f64 = 9.210_340_371_976_184;

/// Two-hidden-layer tanh network mapping the last `p` values to `(μ, log s)`.
///
/// Parameters are stored flat in the order `W1, b1, W2, b2, W3, b3` with
/// row-major weight matrices (`W1` is `h1 × p`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralARModel<T> {
    lags: usize,
    hidden: [usize; 2],
    params: Vec<T>,
}

struct Forward<T> {
    z1: Vec<T>,
    z2: Vec<T>,
    log_std_raw: T,
    mean: T,
    std: T,
}

impl<T: Scalar> NeuralARModel<T> {
    pub fn param_count(lags: usize, hidden: [usize; 2]) -> usize {
        let [h1, h2] = hidden;
        h1 * lags + h1 + h2 * h1 + h2 + 2 * h2 + 2
    }

    pub fn from_params(lags: usize, hidden: [usize; 2], params: Vec<T>) -> Result<Self> {
        if lags == 0 || hidden.contains(&0) {
            return Err(invalid("network needs positive lags and hidden widths"));
        }
        ensure_len("network parameters", Self::param_count(lags, hidden), params.len())?;
        Ok(NeuralARModel { lags, hidden, params })
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero biases, initial `s ≈ 0.37`.
    pub fn init<R: Rng + ?Sized>(lags: usize, hidden: [usize; 2], rng: &mut R) -> Result<Self> {
        let mut m = Self::from_params(lags, hidden, vec![T::zero(); Self::param_count(lags, hidden)])?;
        let [h1, h2] = hidden;
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, params: &mut [T]| {
            let b = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = T::lit(rng.random_range(-b..b));
            }
        };
        let o = m.offsets();
        fill(o.w1..o.w1 + h1 * lags, lags, &mut m.params);
        fill(o.w2..o.w2 + h2 * h1, h1, &mut m.params);
        fill(o.w3..o.w3 + 2 * h2, h2, &mut m.params);
        m.params[o.b3 + 1] = T::lit(-1.0);
        Ok(m)
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn hidden(&self) -> [usize; 2] {
        self.hidden
    }

    pub fn raw_params(&self) -> &[T] {
        &self.params
    }

    fn offsets(&self) -> Offsets {
        let [h1, h2] = self.hidden;
        let w1 = 0;
        let b1 = w1 + h1 * self.lags;
        let w2 = b1 + h1;
        let b2 = w2 + h2 * h1;
        let w3 = b2 + h2;
        let b3 = w3 + 2 * h2;
        Offsets { w1, b1, w2, b2, w3, b3 }
    }

    fn forward(&self, history: &[T]) -> Forward<T> {
        let [h1, h2] = self.hidden;
        let p = self.lags;
        let u = &history[history.len() - p..];
        let o = self.offsets();
        let w = &self.params;
        let z1: Vec<T> = (0..h1)
            .map(|i| {
                let row = &w[o.w1 + i * p..o.w1 + (i + 1) * p];
                (row.iter().zip(u).map(|(&a, &b)| a * b).sum::<T>() + w[o.b1 + i]).tanh()
            })
            .collect();
        let z2: Vec<T> = (0..h2)
            .map(|i| {
                let row = &w[o.w2 + i * h1..o.w2 + (i + 1) * h1];
                (row.iter().zip(&z1).map(|(&a, &b)| a * b).sum::<T>() + w[o.b2 + i]).tanh()
            })
            .collect();
        let head = |k: usize| {
            let row = &w[o.w3 + k * h2..o.w3 + (k + 1) * h2];
            row.iter().zip(&z2).map(|(&a, &b)| a * b).sum::<T>() + w[o.b3 + k]
        };
        let mean = head(0);
        let log_std_raw = head(1);
        let std = log_std_raw.max(T::lit(LOG_STD_MIN)).min(T::lit(LOG_STD_MAX)).exp();
        Forward { z1, z2, log_std_raw, mean, std }
    }

    /// Reverse pass for output cotangents; writes input and/or parameter
    /// gradients when the corresponding buffer is given.
    fn backward(&self, history: &[T], cot_mean: T, cot_std: T, grad_input: Option<&mut [T]>, grad_params: Option<&mut [T]>) {
        let fw = self.forward(history);
        let [h1, h2] = self.hidden;
        let p = self.lags;
        let off = history.len() - p;
        let u = &history[off..];
        let o = self.offsets();
        let w = &self.params;

        let in_clamp = fw.log_std_raw >= T::lit(LOG_STD_MIN) && fw.log_std_raw <= T::lit(LOG_STD_MAX);
        let d_out = [cot_mean, if in_clamp { cot_std * fw.std } else { T::zero() }];

        let mut d_a2 = vec![T::zero(); h2];
        for (i, d) in d_a2.iter_mut().enumerate() {
            let dz = d_out[0] * w[o.w3 + i] + d_out[1] * w[o.w3 + h2 + i];
            *d = dz * (T::one() - fw.z2[i] * fw.z2[i]);
        }
        let mut d_a1 = vec![T::zero(); h1];
        for (k, d) in d_a1.iter_mut().enumerate() {
            let dz: T = (0..h2).map(|i| d_a2[i] * w[o.w2 + i * h1 + k]).sum();
            *d = dz * (T::one() - fw.z1[k] * fw.z1[k]);
        }

        if let Some(gi) = grad_input {
            for (l, g) in gi[off..].iter_mut().enumerate() {
                *g += (0..h1).map(|k| d_a1[k] * w[o.w1 + k * p + l]).sum::<T>();
            }
        }
        if let Some(gp) = grad_params {
            for k in 0..2 {
                for i in 0..h2 {
                    gp[o.w3 + k * h2 + i] += d_out[k] * fw.z2[i];
                }
                gp[o.b3 + k] += d_out[k];
            }
            for i in 0..h2 {
                for k in 0..h1 {
                    gp[o.w2 + i * h1 + k] += d_a2[i] * fw.z1[k];
                }
                gp[o.b2 + i] += d_a2[i];
            }
            for k in 0..h1 {
                for l in 0..p {
                    gp[o.w1 + k * p + l] += d_a1[k] * u[l];
                }
                gp[o.b1 + k] += d_a1[k];
            }
        }
    }
}

struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
}

impl<T: Scalar> Forecaster<T> for NeuralARModel<T> {
    fn min_history(&self) -> usize {
        self.lags
    }

    fn step(&self, history: &[T]) -> Step<T> {
        let f = self.forward(history);
        Step { mean: f.mean, std: f.std }
    }

    fn step_vjp(&self, history: &[T], cot_mean: T, cot_std: T, grad: &mut [T]) {
        self.backward(history, cot_mean, cot_std, Some(grad), None);
    }
}

impl<T: Scalar> Trainable<T> for NeuralARModel<T> {
    fn params(&self) -> Vec<T> {
        self.params.clone()
    }

    fn set_params(&mut self, params: &[T]) -> Result<()> {
        ensure_len("network parameters", self.params.len(), params.len())?;
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn step_param_vjp(&self, history: &[T], cot_mean: T, cot_std: T, grad: &mut [T]) {
        self.backward(history, cot_mean, cot_std, None, Some(grad));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn fd_check(model: &NeuralARModel<f64>, hist: &[f64], cm: f64, cs: f64) {
        let f = |h: &[f64], m: &NeuralARModel<f64>| {
            let s = m.step(h);
            cm * s.mean + cs * s.std
        };
        let mut gi = vec![0.0; hist.len()];
        model.step_vjp(hist, cm, cs, &mut gi);
        for i in 0..hist.len() {
            let eps = 1e-6;
            let mut a = hist.to_vec();
            a[i] += eps;
            let mut b = hist.to_vec();
            b[i] -= eps;
            let fd = (f(&a, model) - f(&b, model)) / (2.0 * eps);
            assert!((fd - gi[i]).abs() < 1e-7 * (1.0 + fd.abs()), "input {i}: {fd} vs {}", gi[i]);
        }
        let mut gp = vec![0.0; model.params.len()];
        model.step_param_vjp(hist, cm, cs, &mut gp);
        for i in 0..gp.len() {
            let eps = 1e-6;
            let mut a = model.clone();
            a.params[i] += eps;
            let mut b = model.clone();
            b.params[i] -= eps;
            let fd = (f(hist, &a) - f(hist, &b)) / (2.0 * eps);
            assert!((fd - gp[i]).abs() < 1e-7 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", gp[i]);
        }
    }

    #[test]
    fn step_gradients_match_finite_differences() {
        let mut rng = rng_from(11, &[]);
        for trial in 0..5 {
            let m = NeuralARModel::<f64>::init(3, [4, 5], &mut rng).unwrap();
            let hist: Vec<f64> = (0..5).map(|i| 0.3 * i as f64 - 0.4 + 0.1 * trial as f64).collect();
            fd_check(&m, &hist, 0.7, -1.3);
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let m = NeuralARModel::<f64>::init(4, [6, 6], &mut rng_from(2, &[])).unwrap();
        let h = [0.1, 0.5, -0.2, 0.9];
        assert_eq!(m.step(&h), m.step(&h));
    }

    #[test]
    fn std_is_clamped() {
        let mut m = NeuralARModel::<f64>::from_params(1, [1, 1], vec![0.0; NeuralARModel::<f64>::param_count(1, [1, 1])]).unwrap();
        let o = m.offsets();
        m.params[o.b3 + 1] = 50.0;
        assert!((m.step(&[0.0]).std - 1e4).abs() < 1e-6);
        m.params[o.b3 + 1] = -50.0;
        assert!((m.step(&[0.0]).std - 1e-4).abs() < 1e-12);
        let mut g = vec![0.0; m.params.len()];
        m.step_param_vjp(&[0.0], 0.0, 1.0, &mut g);
        assert_eq!(g[o.b3 + 1], 0.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(NeuralARModel::<f64>::from_params(0, [2, 2], vec![]).is_err());
        assert!(NeuralARModel::<f64>::from_params(2, [2, 2], vec![0.0; 3]).is_err());
    }
}
