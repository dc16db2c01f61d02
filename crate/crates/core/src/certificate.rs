//! Wasserstein-1 robustness certificates for smoothed forecasters.
//!
//! For additive Gaussian smoothing with scale `σ`, every marginal of the
//! smoothed forecaster moves by at most `Ro(x; σ) · ‖δ‖₂` in W1 locally, with
//! `Ro(x; σ) = (1/σ) ∫ φ(Φ⁻¹(G(r))) dr` and `G` the marginal's cdf. This
//! module estimates `Ro` from Monte-Carlo samples and evaluates the global
//! constants derived from tail envelopes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::forecaster::{Forecaster, NoiseMode};
use crate::rng::rng_from;
use crate::series::EmpiricalMarginal;
use crate::smoothing::{smooth_forecast, SmoothingConfig};
use crate::Scalar;

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `Φ⁻¹(p)` for `p ∈ (0, 1)`; `±∞` at the endpoints.
pub fn std_normal_inv_cdf(p: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    // One Newton step polishes the series approximation to full precision.
    let d = std_normal_pdf(x);
    if d > 0.0 {
        x - (std_normal_cdf(x) - p) / d
    } else {
        x
    }
}

/// `E‖Z‖₂` for `Z ~ N(0, I_dim)`.
pub fn expected_norm_gaussian(dim: usize) -> Result<f64> {
    if dim == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let d = dim as f64;
    Ok(std::f64::consts::SQRT_2 * (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp())
}

/// Bound `φ(r) ≥ Pr[|f_j(x)| ≥ r]` holding uniformly over inputs and horizons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailEnvelope {
    /// Chebyshev envelope from `|E f| ≤ M1`, `Var f ≤ M2`:
    /// `1` on `[0, 1]`, `(M1² + M2)/r²` beyond.
    Lemma2 { m1: f64, m2: f64 },
    /// `1` on `[0, 1]`, `c · r^(−alpha)` beyond.
    PowerLaw { c: f64, alpha: f64 },
}

impl TailEnvelope {
    fn coefficients(&self) -> Result<(f64, f64)> {
        let (c, alpha) = match *self {
            TailEnvelope::Lemma2 { m1, m2 } => {
                if !(m1 >= 0.0 && m2 >= 0.0) {
                    return Err(invalid("moment bounds must be non-negative"));
                }
                (m1 * m1 + m2, 2.0)
            }
            TailEnvelope::PowerLaw { c, alpha } => {
                if !(c >= 0.0) {
                    return Err(invalid("envelope coefficient must be non-negative"));
                }
                (c, alpha)
            }
        };
        if !(alpha > 1.0) || !c.is_finite() {
            return Err(invalid(format!("envelope c·r^-{alpha} is not integrable on [1, ∞)")));
        }
        Ok((c, alpha))
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        let (c, alpha) = self.coefficients()?;
        Ok(if r <= 1.0 { 1.0 } else { c * r.powf(-alpha) })
    }

    /// `∫_R^∞ φ(r) dr` for `R ≥ 0`.
    pub fn tail_integral(&self, from: f64) -> Result<f64> {
        let (c, alpha) = self.coefficients()?;
        if !(from >= 0.0) {
            return Err(invalid("tail integral lower limit must be non-negative"));
        }
        let beyond_one = |r: f64| c * r.powf(1.0 - alpha) / (alpha - 1.0);
        Ok(if from < 1.0 { (1.0 - from) + beyond_one(1.0) } else { beyond_one(from) })
    }

    pub fn integral(&self) -> Result<f64> {
        self.tail_integral(0.0)
    }
}

/// Global constant `C = (1/σ)(∫₀^∞ φ) E‖Z‖` for noise dimension `dim`.
pub fn lemma1_constant(envelope: &TailEnvelope, sigma: f64, dim: usize) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(envelope.integral()? * expected_norm_gaussian(dim)? / sigma)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("certificate sigma must be positive, got {sigma}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateConfig {
    pub sigma: f64,
    pub n_cdf: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_grid_points() -> usize {
    1001
}

fn default_bootstrap() -> usize {
    100
}

impl CertificateConfig {
    pub fn new(sigma: f64, n_cdf: usize, seed: u64) -> Self {
        CertificateConfig { sigma, n_cdf, grid_points: default_grid_points(), bootstrap: default_bootstrap(), seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// 1-based horizon of the certified marginal.
    pub horizon: usize,
    pub sigma: f64,
    pub bound_estimate: f64,
    pub mc_stderr: f64,
    pub truncation: (f64, f64),
    pub n_cdf: usize,
    pub lemma1_constant: Option<f64>,
    pub mixed_constant: Option<f64>,
    /// Set when the samples came from relative-noise smoothing, for which the
    /// bound is only a locally rescaled reading.
    pub heuristic: bool,
}

/// Sample extremes widened by four sample standard deviations.
pub fn truncation_window<T: Scalar>(m: &EmpiricalMarginal<T>) -> (T, T) {
    let pad = T::lit(4.0) * m.std_dev();
    (m.min() - pad, m.max() + pad)
}

/// `∫_lo^hi φ(Φ⁻¹(G(r))) dr` by the trapezoid rule, `G` the empirical cdf
/// clamped to `[1/(n+1), n/(n+1)]`.
pub fn integrate_gaussian_isoperimetric<T: Scalar>(m: &EmpiricalMarginal<T>, window: (T, T), grid_points: usize) -> Result<f64> {
    if grid_points < 2 {
        return Err(invalid("trapezoid rule needs at least two grid points"));
    }
    let (lo, hi) = (window.0.as_f64(), window.1.as_f64());
    if !(hi >= lo) {
        return Err(invalid("empty integration window"));
    }
    if hi == lo {
        return Ok(0.0);
    }
    let n = m.len() as f64;
    let (pmin, pmax) = (1.0 / (n + 1.0), n / (n + 1.0));
    let step = (hi - lo) / (grid_points - 1) as f64;
    let mut total = 0.0;
    for i in 0..grid_points {
        let r = if i + 1 == grid_points { hi } else { lo + step * i as f64 };
        let g = (m.count_le(T::lit(r)) as f64 / n).clamp(pmin, pmax);
        let w = if i == 0 || i + 1 == grid_points { 0.5 } else { 1.0 };
        total += w * std_normal_pdf(std_normal_inv_cdf(g));
    }
    Ok(total * step)
}

/// `Ro(x; σ)` estimate from samples of one smoothed marginal, with a
/// bootstrap standard error.
pub fn certificate_from_samples<T: Scalar>(samples: Vec<T>, horizon: usize, cfg: &CertificateConfig) -> Result<CertificateReport> {
    check_sigma(cfg.sigma)?;
    let m = EmpiricalMarginal::new(samples)?;
    let window = truncation_window(&m);
    let bound = integrate_gaussian_isoperimetric(&m, window, cfg.grid_points)? / cfg.sigma;
    let mut rng = rng_from(cfg.seed, &[0xb007, horizon as u64]);
    let n = m.len();
    let mut reps = Vec::with_capacity(cfg.bootstrap);
    for _ in 0..cfg.bootstrap {
        let resample: Vec<T> = (0..n).map(|_| m.samples()[rng.random_range(0..n)]).collect();
        let rm = EmpiricalMarginal::new(resample)?;
        reps.push(integrate_gaussian_isoperimetric(&rm, window, cfg.grid_points)? / cfg.sigma);
    }
    let mc_stderr = if reps.len() >= 2 { EmpiricalMarginal::new(reps)?.std_dev() } else { 0.0 };
    Ok(CertificateReport {
        horizon,
        sigma: cfg.sigma,
        bound_estimate: bound,
        mc_stderr,
        truncation: (window.0.as_f64(), window.1.as_f64()),
        n_cdf: n,
        lemma1_constant: None,
        mixed_constant: None,
        heuristic: false,
    })
}

fn smoothed_marginal<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    x: &[T],
    horizon: usize,
    sigma: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<T>> {
    if horizon == 0 {
        return Err(invalid("horizons are 1-based"));
    }
    let scfg = SmoothingConfig { sigma, n, noise_mode: NoiseMode::Absolute, seed };
    smooth_forecast(model, x, horizon, &scfg)?.column(horizon)
}

/// Certificate for marginal `horizon` of the additive-noise smoothed `model`
/// at `x`, from `cfg.n_cdf` fresh smoothed samples.
pub fn estimate_certificate<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    x: &[T],
    horizon: usize,
    cfg: &CertificateConfig,
) -> Result<CertificateReport> {
    check_sigma(cfg.sigma)?;
    let samples = smoothed_marginal(model, x, horizon, cfg.sigma, cfg.n_cdf, cfg.seed)?;
    certificate_from_samples(samples, horizon, cfg)
}

/// Per-horizon certificates; the headline constant is the max.
pub fn certify_horizons<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    x: &[T],
    horizons: &[usize],
    cfg: &CertificateConfig,
) -> Result<(f64, Vec<CertificateReport>)> {
    if horizons.is_empty() {
        return Err(invalid("no horizons to certify"));
    }
    let max_h = *horizons.iter().max().expect("nonempty");
    check_sigma(cfg.sigma)?;
    let scfg = SmoothingConfig { sigma: cfg.sigma, n: cfg.n_cdf, noise_mode: NoiseMode::Absolute, seed: cfg.seed };
    let paths = smooth_forecast(model, x, max_h, &scfg)?;
    let mut reports = Vec::with_capacity(horizons.len());
    for &h in horizons {
        if h == 0 {
            return Err(invalid("horizons are 1-based"));
        }
        reports.push(certificate_from_samples(paths.column(h)?, h, cfg)?);
    }
    let headline = reports.iter().map(|r| r.bound_estimate).fold(0.0, f64::max);
    Ok((headline, reports))
}

/// `u ↦ f(x ⊙ (1 + u))` on the first `x.len()` history entries.
///
/// Additive smoothing of this map at `u = 0` is relative smoothing of `f` at
/// `x`, so its certificate bounds W1 growth per unit of relative norm.
pub struct LocallyScaled<'a, T, F: ?Sized> {
    inner: &'a F,
    x: Vec<T>,
}

impl<'a, T: Scalar, F: Forecaster<T> + ?Sized> LocallyScaled<'a, T, F> {
    pub fn new(inner: &'a F, x: &[T]) -> Self {
        LocallyScaled { inner, x: x.to_vec() }
    }

    fn map(&self, history: &[T]) -> Vec<T> {
        history
            .iter()
            .enumerate()
            .map(|(i, &h)| if i < self.x.len() { self.x[i] * (T::one() + h) } else { h })
            .collect()
    }
}

impl<T: Scalar, F: Forecaster<T> + ?Sized> Forecaster<T> for LocallyScaled<'_, T, F> {
    fn min_history(&self) -> usize {
        self.inner.min_history()
    }

    fn step(&self, history: &[T]) -> crate::forecaster::Step<T> {
        self.inner.step(&self.map(history))
    }

    fn step_vjp(&self, history: &[T], cot_mean: T, cot_std: T, grad: &mut [T]) {
        let mut g = vec![T::zero(); history.len()];
        self.inner.step_vjp(&self.map(history), cot_mean, cot_std, &mut g);
        for (i, (acc, gi)) in grad.iter_mut().zip(g).enumerate() {
            *acc += if i < self.x.len() { gi * self.x[i] } else { gi };
        }
    }
}

/// Relative-noise counterpart of [`certify_horizons`]: certifies the
/// locally rescaled model, reports flagged as heuristic.
pub fn certify_horizons_relative<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    x: &[T],
    horizons: &[usize],
    cfg: &CertificateConfig,
) -> Result<(f64, Vec<CertificateReport>)> {
    let wrapped = LocallyScaled::new(model, x);
    let (headline, mut reports) = certify_horizons(&wrapped, &vec![T::zero(); x.len()], horizons, cfg)?;
    reports.iter_mut().for_each(|r| r.heuristic = true);
    Ok((headline, reports))
}

/// Hybrid constant: the sample-based integral on `[−R, R]` plus the envelope
/// tail beyond `R`, capped by `lemma1_constant`.
pub fn mixed_constant<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    x: &[T],
    horizon: usize,
    radius: f64,
    envelope: &TailEnvelope,
    cfg: &CertificateConfig,
) -> Result<f64> {
    check_sigma(cfg.sigma)?;
    if !(radius > 0.0) {
        return Err(invalid("mixed constant needs R > 0"));
    }
    let l1 = lemma1_constant(envelope, cfg.sigma, x.len())?;
    let samples = smoothed_marginal(model, x, horizon, cfg.sigma, cfg.n_cdf, cfg.seed)?;
    let m = EmpiricalMarginal::new(samples)?;
    let inner = integrate_gaussian_isoperimetric(&m, (T::lit(-radius), T::lit(radius)), cfg.grid_points)?;
    let tail = envelope.tail_integral(radius)? * expected_norm_gaussian(x.len())?;
    Ok(((inner + tail) / cfg.sigma).min(l1))
}
