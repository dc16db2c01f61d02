//! Experiment configuration: one JSON document drives every pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::csv_io::{ingest_csv, IngestOptions};
use super::synthetic::{generate_synthetic, SyntheticSpec};
use crate::attack::AttackConfig;
use crate::error::{invalid, Result};
use crate::forecaster::{default_lags, ARGaussianModel, Model, NeuralARModel, NoiseMode, TrainConfig};
use crate::rng::rng_from;
use crate::series::TimeSeries;
use crate::smoothing::FeedForward;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic(SyntheticSpec),
    Csv {
        path: PathBuf,
        #[serde(flatten)]
        options: IngestOptions,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic(SyntheticSpec::default())
    }
}

impl DatasetSpec {
    pub fn prediction_length(&self) -> usize {
        match self {
            DatasetSpec::Synthetic(s) => s.prediction_length,
            DatasetSpec::Csv { options, .. } => options.prediction_length,
        }
    }

    /// Series for one replicate. Synthetic data is regenerated from `seed`;
    /// CSV data is the same for every seed.
    pub fn load(&self, seed: u64) -> Result<Vec<TimeSeries<f64>>> {
        match self {
            DatasetSpec::Synthetic(spec) => generate_synthetic(spec, seed),
            DatasetSpec::Csv { path, options } => {
                let got = ingest_csv(path, options)?;
                if got.series.is_empty() {
                    return Err(invalid(format!("no usable series in {}", path.display())));
                }
                Ok(got.series)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    ArGaussian {
        #[serde(default)]
        lags: Option<usize>,
    },
    NeuralAr {
        #[serde(default)]
        lags: Option<usize>,
        #[serde(default = "default_hidden")]
        hidden: [usize; 2],
    },
}

fn default_hidden() -> [usize; 2] {
    [16, 16]
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::NeuralAr { lags: None, hidden: default_hidden() }
    }
}

impl ModelSpec {
    pub fn lags(&self, prediction_length: usize, context_length: usize) -> usize {
        let l = match self {
            ModelSpec::ArGaussian { lags } | ModelSpec::NeuralAr { lags, .. } => *lags,
        };
        l.unwrap_or_else(|| default_lags(prediction_length, context_length)).min(context_length).max(1)
    }

    /// Untrained model; the network is initialized from `seed`.
    pub fn init(&self, prediction_length: usize, context_length: usize, seed: u64) -> Result<Model<f64>> {
        let p = self.lags(prediction_length, context_length);
        Ok(match self {
            ModelSpec::ArGaussian { .. } => Model::Ar(ARGaussianModel::zeros(p)),
            ModelSpec::NeuralAr { hidden, .. } => Model::Neural(NeuralARModel::init(p, *hidden, &mut rng_from(seed, &[]))?),
        })
    }
}

/// Input smoothing used by the RS methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothingSpec {
    pub sigma: f64,
    pub n: usize,
    pub noise_mode: NoiseMode,
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        SmoothingSpec { sigma: 0.1, n: 100, noise_mode: NoiseMode::Relative }
    }
}

/// Future smoothing used by the FS methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FutureSmoothingSpec {
    pub sigma: f64,
    pub n: usize,
    pub feed: FeedForward,
}

impl Default for FutureSmoothingSpec {
    fn default() -> Self {
        FutureSmoothingSpec { sigma: 1.0, n: 100, feed: FeedForward::Mean }
    }
}

/// Optional per-method certificate summaries for the RS methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertificateSpec {
    /// Number of evaluation series certified per seed (from the front).
    pub series: usize,
    pub n_cdf: usize,
    pub bootstrap: usize,
}

impl Default for CertificateSpec {
    fn default() -> Self {
        CertificateSpec { series: 5, n_cdf: 2000, bootstrap: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    /// Shared training settings; `sigma_tr` here is ignored in favour of the
    /// top-level field (vanilla trains at 0, RT at `sigma_tr`).
    pub training: TrainConfig,
    pub sigma_tr: f64,
    pub smoothing: SmoothingSpec,
    pub future_smoothing: FutureSmoothingSpec,
    pub attack: AttackConfig,
    /// Grid of `log₁₀(1 + ρ)` values for the time-shift pipeline.
    pub log10_rho_grid: Vec<f64>,
    /// Sample paths for plain (unsmoothed) forecasts.
    pub n_samples: usize,
    /// Evaluate only the first `max_eval_series` series (all when `None`).
    pub max_eval_series: Option<usize>,
    pub certificate: Option<CertificateSpec>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let dataset = DatasetSpec::default();
        let tau = dataset.prediction_length();
        ExperimentConfig {
            dataset,
            model: ModelSpec::default(),
            training: TrainConfig::default(),
            sigma_tr: 0.1,
            smoothing: SmoothingSpec::default(),
            future_smoothing: FutureSmoothingSpec::default(),
            attack: AttackConfig { horizons: (1..=tau).collect(), ..AttackConfig::default() },
            log10_rho_grid: vec![-1.0, -0.3, 0.0, 0.18, 0.3, 0.48, 0.7, 1.0],
            n_samples: 100,
            max_eval_series: None,
            certificate: None,
            seeds: (0..10).collect(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let tau = self.dataset.prediction_length();
        if tau == 0 {
            return Err(invalid("prediction_length must be positive"));
        }
        self.attack.validate()?;
        if let Some(&h) = self.attack.horizons.iter().find(|&&h| h > tau) {
            return Err(invalid(format!("attack horizon {h} exceeds prediction_length {tau}")));
        }
        if self.seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        if !(self.sigma_tr >= 0.0) || !(self.smoothing.sigma >= 0.0) || !(self.future_smoothing.sigma >= 0.0) {
            return Err(invalid("noise levels must be non-negative"));
        }
        if self.smoothing.n == 0 || self.future_smoothing.n == 0 || self.n_samples == 0 {
            return Err(invalid("sample counts must be positive"));
        }
        if self.log10_rho_grid.iter().any(|l| !l.is_finite()) {
            return Err(invalid("log10 rho grid must be finite"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical (compact) JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_json_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn partial_document_uses_defaults() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"dataset": {"source": "synthetic", "n_series": 3}, "model": {"kind": "ar_gaussian"}, "seeds": [4]}"#,
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![4]);
        match &cfg.dataset {
            DatasetSpec::Synthetic(s) => assert_eq!(s.n_series, 3),
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.model.lags(4, 24), 16);
    }

    #[test]
    fn csv_source_parses() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"dataset": {"source": "csv", "path": "d.csv", "prediction_length": 2}, "attack": {"horizons": [1, 2]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.dataset.prediction_length(), 2);
    }

    #[test]
    fn rejects_inconsistent_config() {
        assert!(ExperimentConfig::from_json_str(r#"{"attack": {"horizons": [9]}}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"seeds": []}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
    }
}
