//! Versioned JSON parameter dumps.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ARGaussianModel, Forecaster, NeuralARModel, Step, Trainable};
use crate::error::{Error, Result};
use crate::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    ArGaussian { lags: usize },
    NeuralAr { lags: usize, hidden: [usize; 2] },
}

/// On-disk form of a model. Parameters are stored as `f64` so any supported
/// scalar type round-trips exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub architecture: Architecture,
    pub params: Vec<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// Either concrete forecaster, chosen at run time.
#[derive(Clone, Debug, PartialEq)]
pub enum Model<T> {
    Ar(ARGaussianModel<T>),
    Neural(NeuralARModel<T>),
}

impl<T: Scalar> Model<T> {
    pub fn architecture(&self) -> Architecture {
        match self {
            Model::Ar(m) => Architecture::ArGaussian { lags: m.lags() },
            Model::Neural(m) => Architecture::NeuralAr { lags: m.lags(), hidden: m.hidden() },
        }
    }

    pub fn to_checkpoint(&self, metadata: BTreeMap<String, String>) -> ModelCheckpoint {
        ModelCheckpoint {
            format_version: CHECKPOINT_VERSION,
            architecture: self.architecture(),
            params: self.params().into_iter().map(Scalar::as_f64).collect(),
            metadata,
        }
    }

    pub fn from_checkpoint(ck: &ModelCheckpoint) -> Result<Self> {
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (expected {CHECKPOINT_VERSION})",
                ck.format_version
            )));
        }
        let params: Vec<T> = ck.params.iter().map(|&v| T::lit(v)).collect();
        let model = match ck.architecture {
            Architecture::ArGaussian { lags } => {
                let mut m = Model::Ar(ARGaussianModel::zeros(lags));
                m.set_params(&params).map_err(|e| Error::Checkpoint(e.to_string()))?;
                m
            }
            Architecture::NeuralAr { lags, hidden } => Model::Neural(
                NeuralARModel::from_params(lags, hidden, params).map_err(|e| Error::Checkpoint(e.to_string()))?,
            ),
        };
        Ok(model)
    }

    pub fn save(&self, path: &Path, metadata: BTreeMap<String, String>) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_checkpoint(metadata))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, BTreeMap<String, String>)> {
        let ck: ModelCheckpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok((Self::from_checkpoint(&ck)?, ck.metadata))
    }
}

impl<T: Scalar> Forecaster<T> for Model<T> {
    fn min_history(&self) -> usize {
        match self {
            Model::Ar(m) => m.min_history(),
            Model::Neural(m) => m.min_history(),
        }
    }

    fn step(&self, history: &[T]) -> Step<T> {
        match self {
            Model::Ar(m) => m.step(history),
            Model::Neural(m) => m.step(history),
        }
    }

    fn step_vjp(&self, history: &[T], cot_mean: T, cot_std: T, grad: &mut [T]) {
        match self {
            Model::Ar(m) => m.step_vjp(history, cot_mean, cot_std, grad),
            Model::Neural(m) => m.step_vjp(history, cot_mean, cot_std, grad),
        }
    }
}

impl<T: Scalar> Trainable<T> for Model<T> {
    fn params(&self) -> Vec<T> {
        match self {
            Model::Ar(m) => m.params(),
            Model::Neural(m) => m.params(),
        }
    }

    fn set_params(&mut self, params: &[T]) -> Result<()> {
        match self {
            Model::Ar(m) => m.set_params(params),
            Model::Neural(m) => m.set_params(params),
        }
    }

    fn step_param_vjp(&self, history: &[T], cot_mean: T, cot_std: T, grad: &mut [T]) {
        match self {
            Model::Ar(m) => m.step_param_vjp(history, cot_mean, cot_std, grad),
            Model::Neural(m) => m.step_param_vjp(history, cot_mean, cot_std, grad),
        }
    }
}

impl<T> From<ARGaussianModel<T>> for Model<T> {
    fn from(m: ARGaussianModel<T>) -> Self {
        Model::Ar(m)
    }
}

impl<T> From<NeuralARModel<T>> for Model<T> {
    fn from(m: NeuralARModel<T>) -> Self {
        Model::Neural(m)
    }
}
