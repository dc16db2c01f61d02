//! Seeded synthetic panels: a positive seasonal level plus an AR(1)
//! deviation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{rng_from, std_normal};
use crate::series::TimeSeries;
use rand::Rng as _;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_series: usize,
    /// Total values per series, futures included.
    pub length: usize,
    pub context_length: usize,
    pub prediction_length: usize,
    pub ar_coef: f64,
    pub noise_scale: f64,
    pub seasonal_period: usize,
    /// Seasonal swing as a fraction of the level.
    pub seasonal_amplitude: f64,
    pub level_min: f64,
    pub level_max: f64,
    /// Deviation before the first value.
    pub initial_offset: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_series: 50,
            length: 120,
            context_length: 24,
            prediction_length: 4,
            ar_coef: 0.8,
            noise_scale: 1.0,
            seasonal_period: 12,
            seasonal_amplitude: 0.3,
            level_min: 5.0,
            level_max: 15.0,
            initial_offset: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_series == 0 {
            return Err(invalid("synthetic spec needs n_series >= 1"));
        }
        if self.prediction_length == 0 || self.context_length == 0 {
            return Err(invalid("context and prediction lengths must be positive"));
        }
        if self.length < self.context_length + self.prediction_length {
            return Err(invalid(format!(
                "length {} shorter than context {} plus prediction {}",
                self.length, self.context_length, self.prediction_length
            )));
        }
        if !(self.ar_coef.abs() < 1.0) {
            return Err(invalid("AR coefficient must lie in (-1, 1)"));
        }
        if !(self.noise_scale >= 0.0) || self.seasonal_period == 0 || !(self.seasonal_amplitude >= 0.0) {
            return Err(invalid("noise scale, period and amplitude must be non-negative (period positive)"));
        }
        if !(self.level_min > 0.0 && self.level_max >= self.level_min) {
            return Err(invalid("levels must satisfy 0 < level_min <= level_max"));
        }
        Ok(())
    }
}

/// `n_series` series `level·(1 + a·sin(2πt/P + φ)) + d_t` with
/// `d_t = w·d_{t−1} + s·ε_t`, `d_{−1}` the initial offset; level and phase are
/// drawn per series.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Vec<TimeSeries<f64>>> {
    spec.validate()?;
    (0..spec.n_series)
        .map(|i| {
            let mut rng = rng_from(seed, &[i as u64]);
            let level = if spec.level_max > spec.level_min {
                rng.random_range(spec.level_min..spec.level_max)
            } else {
                spec.level_min
            };
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let mut dev = spec.initial_offset;
            let values = (0..spec.length)
                .map(|t| {
                    let e = if spec.noise_scale > 0.0 { std_normal::<f64, _>(&mut rng) } else { 0.0 };
                    dev = spec.ar_coef * dev + spec.noise_scale * e;
                    let angle = std::f64::consts::TAU * t as f64 / spec.seasonal_period as f64 + phase;
                    level * (1.0 + spec.seasonal_amplitude * angle.sin()) + dev
                })
                .collect();
            TimeSeries::with_future(format!("syn{i:04}"), values, Some(spec.context_length), spec.prediction_length)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_exact_recursion() {
        let spec = SyntheticSpec {
            n_series: 2,
            length: 30,
            noise_scale: 0.0,
            seasonal_amplitude: 0.0,
            initial_offset: 2.0,
            ar_coef: 0.5,
            level_min: 3.0,
            level_max: 3.0,
            context_length: 10,
            ..SyntheticSpec::default()
        };
        for s in generate_synthetic(&spec, 1).unwrap() {
            for (t, v) in s.values().iter().enumerate() {
                assert_eq!(*v, 3.0 + 2.0 * 0.5f64.powi(t as i32 + 1));
            }
        }
    }

    #[test]
    fn lag_one_autocorrelation() {
        let spec = SyntheticSpec {
            n_series: 4,
            length: 5000,
            context_length: 100,
            seasonal_amplitude: 0.0,
            ..SyntheticSpec::default()
        };
        for s in generate_synthetic(&spec, 2).unwrap() {
            let v = s.values();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let c0: f64 = v.iter().map(|a| (a - m).powi(2)).sum();
            let c1: f64 = v.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
            assert!((c1 / c0 - 0.8).abs() < 0.05, "{}", c1 / c0);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SyntheticSpec::default();
        let a = generate_synthetic(&spec, 3).unwrap();
        let b = generate_synthetic(&spec, 3).unwrap();
        let bytes = |d: &[TimeSeries<f64>]| -> Vec<u8> { d.iter().flat_map(|s| s.values().iter().flat_map(|v| v.to_le_bytes())).collect() };
        assert_eq!(bytes(&a), bytes(&b));
        assert_ne!(bytes(&a), bytes(&generate_synthetic(&spec, 4).unwrap()));
        assert!(a.iter().all(|s| s.has_future() && s.context().len() == spec.context_length));
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_synthetic(&SyntheticSpec { n_series: 0, ..SyntheticSpec::default() }, 0).is_err());
        assert!(generate_synthetic(&SyntheticSpec { length: 10, ..SyntheticSpec::default() }, 0).is_err());
        assert!(generate_synthetic(&SyntheticSpec { ar_coef: 1.0, ..SyntheticSpec::default() }, 0).is_err());
    }
}
