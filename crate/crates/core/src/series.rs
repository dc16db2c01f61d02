//! Domain types shared across the crate.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, invalid, Error, Result};
use crate::forecaster::scale_of;
use crate::metrics::{l2_distance, relative_l2_norm};
use crate::Scalar;

/// One univariate series.
///
/// `values` holds the full observed record. When ground-truth futures are
/// present the last `prediction_length` values are the future, and the
/// `context_length` values right before them are the model input; anything
/// earlier is history usable for training only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries<T> {
    pub id: String,
    values: Vec<T>,
    context_length: usize,
    prediction_length: usize,
    has_future: bool,
    scale: T,
}

impl<T: Scalar> TimeSeries<T> {
    /// Series whose tail contains `prediction_length` ground-truth futures.
    /// `context_length = None` uses every value before the futures.
    pub fn with_future(
        id: impl Into<String>,
        values: Vec<T>,
        context_length: Option<usize>,
        prediction_length: usize,
    ) -> Result<Self> {
        if prediction_length == 0 {
            return Err(invalid("prediction_length must be positive"));
        }
        if values.len() <= prediction_length {
            return Err(invalid(format!(
                "series needs more than {prediction_length} values, got {}",
                values.len()
            )));
        }
        let ctx = context_length.unwrap_or(values.len() - prediction_length);
        if ctx == 0 || ctx + prediction_length > values.len() {
            return Err(invalid(format!(
                "context_length {ctx} + prediction_length {prediction_length} exceeds {} values",
                values.len()
            )));
        }
        Self::build(id.into(), values, ctx, prediction_length, true)
    }

    /// Series observed up to now; the whole record is the context.
    pub fn without_future(id: impl Into<String>, values: Vec<T>, prediction_length: usize) -> Result<Self> {
        if values.is_empty() || prediction_length == 0 {
            return Err(invalid("need a nonempty series and positive prediction_length"));
        }
        let ctx = values.len();
        Self::build(id.into(), values, ctx, prediction_length, false)
    }

    fn build(id: String, values: Vec<T>, ctx: usize, tau: usize, has_future: bool) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("series `{id}` value at index {i}")));
        }
        let mut s = TimeSeries {
            id,
            values,
            context_length: ctx,
            prediction_length: tau,
            has_future,
            scale: T::one(),
        };
        s.scale = scale_of(s.context());
        Ok(s)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn context_length(&self) -> usize {
        self.context_length
    }

    pub fn prediction_length(&self) -> usize {
        self.prediction_length
    }

    pub fn has_future(&self) -> bool {
        self.has_future
    }

    /// `S_x` of the context.
    pub fn scale(&self) -> T {
        self.scale
    }

    fn context_start(&self) -> usize {
        let end = if self.has_future {
            self.values.len() - self.prediction_length
        } else {
            self.values.len()
        };
        end - self.context_length
    }

    pub fn context(&self) -> &[T] {
        let s = self.context_start();
        &self.values[s..s + self.context_length]
    }

    pub fn future(&self) -> Option<&[T]> {
        self.has_future
            .then(|| &self.values[self.values.len() - self.prediction_length..])
    }

    /// Everything strictly before the futures.
    pub fn history(&self) -> &[T] {
        match self.has_future {
            true => &self.values[..self.values.len() - self.prediction_length],
            false => &self.values,
        }
    }

    pub fn scaled_context(&self) -> Vec<T> {
        self.context().iter().map(|&v| v / self.scale).collect()
    }
}

/// `n` sample paths over `horizons` steps, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastSamples<T> {
    paths: Vec<T>,
    n: usize,
    horizons: usize,
    /// 0 when the first column forecasts `T+1`; `k` when it forecasts `T+k+1`.
    pub horizon_offset: usize,
}

impl<T: Scalar> ForecastSamples<T> {
    pub fn from_flat(paths: Vec<T>, n: usize, horizons: usize, horizon_offset: usize) -> Result<Self> {
        if n == 0 || horizons == 0 {
            return Err(invalid("forecast samples need at least one path and one horizon"));
        }
        ensure_len("flat sample matrix", n * horizons, paths.len())?;
        if paths.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample path entry".into()));
        }
        Ok(ForecastSamples { paths, n, horizons, horizon_offset })
    }

    pub fn from_rows(rows: &[Vec<T>], horizon_offset: usize) -> Result<Self> {
        let horizons = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != horizons) {
            return Err(Error::ShapeMismatch { what: "sample path", expected: horizons, got: bad.len() });
        }
        Self::from_flat(rows.concat(), rows.len(), horizons, horizon_offset)
    }

    pub fn n_paths(&self) -> usize {
        self.n
    }

    pub fn horizons(&self) -> usize {
        self.horizons
    }

    pub fn path(&self, j: usize) -> &[T] {
        &self.paths[j * self.horizons..(j + 1) * self.horizons]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[T]> {
        self.paths.chunks_exact(self.horizons)
    }

    /// Column `t` (1-based) of the sample matrix, unsorted.
    pub fn column(&self, t: usize) -> Result<Vec<T>> {
        self.check_horizon(t)?;
        Ok(self.paths().map(|p| p[t - 1]).collect())
    }

    /// Empirical marginal of horizon `t` (1-based).
    pub fn marginal(&self, t: usize) -> Result<EmpiricalMarginal<T>> {
        EmpiricalMarginal::new(self.column(t)?)
    }

    /// Per-horizon sample mean.
    pub fn mean(&self) -> Vec<T> {
        let n = T::from_usize_lossy(self.n);
        let mut acc = vec![T::zero(); self.horizons];
        for p in self.paths() {
            for (a, &v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        acc.into_iter().map(|a| a / n).collect()
    }

    /// Per-horizon sample median.
    pub fn median(&self) -> Vec<T> {
        (1..=self.horizons)
            .map(|t| self.marginal(t).expect("in range").median())
            .collect()
    }

    /// Multiplies every entry, e.g. to undo input scaling.
    pub fn scaled_by(&self, factor: T) -> Self {
        ForecastSamples {
            paths: self.paths.iter().map(|&v| v * factor).collect(),
            ..self.clone()
        }
    }

    fn check_horizon(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.horizons {
            Err(invalid(format!("horizon {t} outside 1..={}", self.horizons)))
        } else {
            Ok(())
        }
    }
}

/// Sorted sample of one forecast marginal.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMarginal<T> {
    samples: Vec<T>,
}

impl<T: Copy + PartialOrd> EmpiricalMarginal<T> {
    pub fn new(mut samples: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("empirical marginal needs at least one sample"));
        }
        if samples.iter().any(|v| v.partial_cmp(v).is_none()) {
            return Err(Error::NonFinite("unordered sample (NaN)".into()));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("checked above"));
        Ok(EmpiricalMarginal { samples })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of samples `<= r`.
    pub fn count_le(&self, r: T) -> usize {
        self.samples.partition_point(|&v| v <= r)
    }
}

impl<T: Scalar> EmpiricalMarginal<T> {
    /// Right-continuous empirical cdf.
    pub fn cdf(&self, r: T) -> T {
        T::from_usize_lossy(self.count_le(r)) / T::from_usize_lossy(self.len())
    }

    pub fn mean(&self) -> T {
        self.samples.iter().copied().sum::<T>() / T::from_usize_lossy(self.len())
    }

    /// Unbiased sample standard deviation (0 for a single sample).
    pub fn std_dev(&self) -> T {
        let n = self.len();
        if n < 2 {
            return T::zero();
        }
        let m = self.mean();
        let ss: T = self.samples.iter().map(|&v| (v - m) * (v - m)).sum();
        (ss / T::from_usize_lossy(n - 1)).sqrt()
    }

    pub fn median(&self) -> T {
        let n = self.len();
        if n % 2 == 1 {
            self.samples[n / 2]
        } else {
            (self.samples[n / 2 - 1] + self.samples[n / 2]) / T::lit(2.0)
        }
    }

    pub fn min(&self) -> T {
        self.samples[0]
    }

    pub fn max(&self) -> T {
        self.samples[self.len() - 1]
    }
}

/// Concrete input transformation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Perturbation<T> {
    AdditiveDelta(Vec<T>),
    AppendedObservations(Vec<T>),
}

/// A transformation together with its dissimilarity `d(x; T_X)` and the
/// reference vector the dissimilarity is measured against (the clean input
/// for additive perturbations, the mean forecasts for appended ones).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec<T> {
    pub perturbation: Perturbation<T>,
    reference: Vec<T>,
    floor: T,
    dissimilarity: T,
}

impl<T: Scalar> PerturbationSpec<T> {
    /// Additive `delta`; dissimilarity is the relative norm `‖δ‖_x`.
    pub fn additive(delta: Vec<T>, x: &[T], floor: T) -> Result<Self> {
        let d = relative_l2_norm(&delta, x, floor)?;
        Ok(PerturbationSpec {
            perturbation: Perturbation::AdditiveDelta(delta),
            reference: x.to_vec(),
            floor,
            dissimilarity: d,
        })
    }

    /// Appended observations; dissimilarity is `‖x̃ − x̂‖₂` against the mean
    /// forecasts for the same steps.
    pub fn appended(values: Vec<T>, predicted_means: &[T]) -> Result<Self> {
        let d = l2_distance(&values, predicted_means)?;
        Ok(PerturbationSpec {
            perturbation: Perturbation::AppendedObservations(values),
            reference: predicted_means.to_vec(),
            floor: T::zero(),
            dissimilarity: d,
        })
    }

    pub fn dissimilarity(&self) -> T {
        self.dissimilarity
    }

    pub fn recompute_dissimilarity(&self) -> Result<T> {
        match &self.perturbation {
            Perturbation::AdditiveDelta(d) => relative_l2_norm(d, &self.reference, self.floor),
            Perturbation::AppendedObservations(v) => l2_distance(v, &self.reference),
        }
    }

    /// The transformed input series.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        match &self.perturbation {
            Perturbation::AdditiveDelta(d) => {
                ensure_len("perturbation", x.len(), d.len())?;
                Ok(x.iter().zip(d).map(|(&a, &b)| a + b).collect())
            }
            Perturbation::AppendedObservations(v) => Ok(x.iter().chain(v).copied().collect()),
        }
    }
}
