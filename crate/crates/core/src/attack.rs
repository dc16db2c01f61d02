//! Gradient-based adversarial attacks on the mean forecast, the
//! threshold sweep that turns them into worst-case error curves, and the
//! time-shift transformation.
//!
//! The attack minimizes `L(δ) = ‖δ‖² + λ‖m(δ) − t_adv‖²`, where `m(δ)` is a
//! Monte-Carlo estimate of `E[Y_H]` at `x + δ` under frozen draws, so `L` is a
//! deterministic smooth function of `δ`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forecaster::{expected_statistic, vjp_expected_statistic, CommonRandomNumbers, Forecaster, InputNoise};
use crate::metrics::{l2_norm, relative_l2_norm, relative_l2_norm_sq_grad};
use crate::optim::Adam;
use crate::rng::{derive_seed, rng_from};
use crate::series::PerturbationSpec;
use crate::Scalar;

/// How `‖δ‖` is measured in the objective and the feasibility check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// `‖δ‖_x`, componentwise relative to the clean input.
    #[default]
    Relative,
    /// Plain `‖δ‖₂`.
    Absolute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// Attacked horizons, 1-based.
    pub horizons: Vec<usize>,
    /// Threshold used for an individual result's `feasible` flag.
    pub eta: f64,
    /// Thresholds evaluated by [`attack_sweep`].
    pub eta_grid: Vec<f64>,
    pub t_adv_multipliers: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub steps: usize,
    pub lr: f64,
    pub n_attack: usize,
    /// Fresh sample paths used to score sweep candidates.
    pub n_eval: usize,
    pub norm: NormMode,
    /// Lower bound on `|x_i|` in the relative norm.
    pub floor: f64,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            horizons: vec![1],
            eta: 1.4,
            eta_grid: (0..=7).map(|i| i as f64 / 5.0).collect(),
            t_adv_multipliers: vec![0.0, 0.5, 2.0, 4.0],
            lambdas: vec![0.1, 1.0, 10.0],
            steps: 200,
            lr: 0.01,
            n_attack: 100,
            n_eval: 100,
            norm: NormMode::Relative,
            floor: 1e-8,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(invalid("attack horizons must be a nonempty set of 1-based indices"));
        }
        if !(self.eta > 0.0) {
            return Err(invalid("eta must be positive"));
        }
        if self.eta_grid.iter().any(|e| !(*e >= 0.0)) {
            return Err(invalid("eta grid entries must be non-negative"));
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(invalid("lambdas must be finite and non-negative"));
        }
        if self.t_adv_multipliers.iter().any(|c| !c.is_finite()) {
            return Err(invalid("t_adv multipliers must be finite"));
        }
        if !(self.lr > 0.0) || self.n_attack == 0 || self.n_eval == 0 {
            return Err(invalid("attack needs lr > 0, n_attack >= 1 and n_eval >= 1"));
        }
        if !(self.floor > 0.0) {
            return Err(invalid("relative norm floor must be positive"));
        }
        Ok(())
    }

    fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackResult<T> {
    pub delta: Vec<T>,
    /// `‖δ‖` under the config's norm mode.
    pub norm: T,
    /// `L` at every iterate, starting from `δ = 0`.
    pub objective_trace: Vec<T>,
    /// `m(δ)` over the attacked horizons, under the attack's own draws.
    pub perturbed_mean_forecast: Vec<T>,
    pub feasible: bool,
    pub t_adv: Vec<T>,
    pub lambda: T,
}

impl<T: Scalar> AttackResult<T> {
    pub fn perturbation(&self, x: &[T], floor: T) -> Result<PerturbationSpec<T>> {
        PerturbationSpec::additive(self.delta.clone(), x, floor)
    }
}

fn norm_of<T: Scalar>(mode: NormMode, delta: &[T], x: &[T], floor: T) -> Result<T> {
    match mode {
        NormMode::Relative => relative_l2_norm(delta, x, floor),
        NormMode::Absolute => Ok(l2_norm(delta)),
    }
}

fn norm_sq_grad<T: Scalar>(mode: NormMode, delta: &[T], x: &[T], floor: T) -> Vec<T> {
    match mode {
        NormMode::Relative => relative_l2_norm_sq_grad(delta, x, floor),
        NormMode::Absolute => delta.iter().map(|&d| T::lit(2.0) * d).collect(),
    }
}

fn attack_draws<T: Scalar>(
    x: &[T],
    noise: Option<InputNoise<T>>,
    n: usize,
    horizons: usize,
    seed: u64,
) -> Result<CommonRandomNumbers<T>> {
    CommonRandomNumbers::draw(n, horizons, x.len(), noise, &mut rng_from(seed, &[]))
}

/// Clean `E[Y_H]` under the draws [`attack_single`] uses for `cfg.seed`.
pub fn clean_attack_statistic<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    noise: Option<InputNoise<T>>,
    x: &[T],
    cfg: &AttackConfig,
) -> Result<Vec<T>> {
    let crn = attack_draws(x, noise, cfg.n_attack, cfg.max_horizon(), cfg.seed)?;
    expected_statistic(model, x, &vec![T::zero(); x.len()], &cfg.horizons, &crn)
}

/// Attack `model` (smoothed by `noise` when given) at `x` towards `t_adv`.
///
/// Runs `cfg.steps` Adam steps from `δ = 0` and returns the iterate with the
/// lowest objective.
pub fn attack_single<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    noise: Option<InputNoise<T>>,
    x: &[T],
    t_adv: &[T],
    lambda: T,
    cfg: &AttackConfig,
) -> Result<AttackResult<T>> {
    cfg.validate()?;
    if t_adv.len() != cfg.horizons.len() {
        return Err(Error::ShapeMismatch { what: "attack target", expected: cfg.horizons.len(), got: t_adv.len() });
    }
    if !(lambda >= T::zero()) {
        return Err(invalid("lambda must be non-negative"));
    }
    let floor = T::lit(cfg.floor);
    let crn = attack_draws(x, noise, cfg.n_attack, cfg.max_horizon(), cfg.seed)?;
    let mut delta = vec![T::zero(); x.len()];
    let mut opt = Adam::new(x.len(), T::lit(cfg.lr));
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut best: Option<(T, Vec<T>, Vec<T>)> = None;
    for it in 0..=cfg.steps {
        let m = expected_statistic(model, x, &delta, &cfg.horizons, &crn)?;
        let grad_stat = if it < cfg.steps {
            let w: Vec<T> = m.iter().zip(t_adv).map(|(&mi, &ti)| T::lit(2.0) * lambda * (mi - ti)).collect();
            let (_, g) = vjp_expected_statistic(model, x, &delta, &cfg.horizons, &w, &crn)
                .map_err(|e| nonfinite_with_trace(e, it, &trace))?;
            Some(g)
        } else {
            None
        };
        let n = norm_of(cfg.norm, &delta, x, floor)?;
        let fit: T = m.iter().zip(t_adv).map(|(&mi, &ti)| (mi - ti) * (mi - ti)).sum();
        let objective = n * n + lambda * fit;
        if !objective.is_finite() {
            return Err(nonfinite_with_trace(Error::NonFinite("attack objective".into()), it, &trace));
        }
        trace.push(objective);
        if best.as_ref().is_none_or(|b| objective < b.0) {
            best = Some((objective, delta.clone(), m));
        }
        if let Some(g) = grad_stat {
            let mut grad = norm_sq_grad(cfg.norm, &delta, x, floor);
            grad.iter_mut().zip(&g).for_each(|(a, &b)| *a += b);
            if grad.iter().any(|v| !v.is_finite()) {
                return Err(nonfinite_with_trace(Error::NonFinite("attack gradient".into()), it, &trace));
            }
            opt.step(&mut delta, &grad);
        }
    }
    let (_, delta, m) = best.expect("at least one iterate");
    let norm = norm_of(cfg.norm, &delta, x, floor)?;
    Ok(AttackResult {
        feasible: norm <= T::lit(cfg.eta),
        delta,
        norm,
        objective_trace: trace,
        perturbed_mean_forecast: m,
        t_adv: t_adv.to_vec(),
        lambda,
    })
}

fn nonfinite_with_trace<T: Scalar>(e: Error, step: usize, trace: &[T]) -> Error {
    match e {
        Error::NonFinite(what) => {
            let tail: Vec<String> = trace.iter().rev().take(5).rev().map(|v| format!("{v}")).collect();
            Error::NonFinite(format!("{what} at attack step {step}; last objectives [{}]", tail.join(", ")))
        }
        other => other,
    }
}

/// Worst feasible outcome for one threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry<T> {
    pub eta: f64,
    /// Index into [`SweepResult::candidates`]; `None` for `δ = 0`.
    pub candidate: Option<usize>,
    pub norm: T,
    /// `Σ_H |mean − ref|` of the selected candidate under the evaluation draws.
    pub abs_error: T,
    pub nd: T,
    pub mean_forecast: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<T> {
    /// Clean mean forecast over H under the evaluation draws.
    pub clean_mean: Vec<T>,
    pub reference_abs_sum: T,
    pub candidates: Vec<AttackResult<T>>,
    pub entries: Vec<SweepEntry<T>>,
}

/// Attacks every `(multiplier, λ)` cell and, for each threshold in
/// `cfg.eta_grid`, keeps the feasible candidate with the largest deviation of
/// its mean forecast from `references` (one value per attacked horizon).
///
/// Candidates are scored on fresh draws shared by all of them, separate from
/// the draws the attack optimized against; `δ = 0` is always a candidate, so
/// the worst-case error is nondecreasing in the threshold.
pub fn attack_sweep<T: Scalar, F: Forecaster<T> + ?Sized>(
    model: &F,
    noise: Option<InputNoise<T>>,
    x: &[T],
    references: &[T],
    cfg: &AttackConfig,
) -> Result<SweepResult<T>> {
    cfg.validate()?;
    if references.len() != cfg.horizons.len() {
        return Err(Error::ShapeMismatch { what: "sweep references", expected: cfg.horizons.len(), got: references.len() });
    }
    let ref_sum: T = references.iter().map(|r| r.abs()).sum();
    if ref_sum == T::zero() {
        return Err(Error::DivisionByZero("sweep references sum to zero in absolute value".into()));
    }
    let zeros = vec![T::zero(); x.len()];
    let eval = CommonRandomNumbers::draw(
        cfg.n_eval,
        cfg.max_horizon(),
        x.len(),
        noise,
        &mut rng_from(cfg.seed, &[u64::MAX]),
    )?;
    let abs_err = |m: &[T]| -> T { m.iter().zip(references).map(|(&a, &b)| (a - b).abs()).sum() };
    let clean_mean = expected_statistic(model, x, &zeros, &cfg.horizons, &eval)?;
    let clean_attack = clean_attack_statistic(model, noise, x, cfg)?;

    let mut candidates = Vec::new();
    let mut scored: Vec<(T, T, Vec<T>)> = Vec::new();
    for (ci, &c) in cfg.t_adv_multipliers.iter().enumerate() {
        let t_adv: Vec<T> = clean_attack.iter().map(|&m| T::lit(c) * m).collect();
        for (li, &lambda) in cfg.lambdas.iter().enumerate() {
            let cell = AttackConfig { seed: derive_seed(cfg.seed, &[ci as u64, li as u64]), ..cfg.clone() };
            let res = attack_single(model, noise, x, &t_adv, T::lit(lambda), &cell)?;
            let m = expected_statistic(model, x, &res.delta, &cfg.horizons, &eval)?;
            scored.push((res.norm, abs_err(&m), m));
            candidates.push(res);
        }
    }

    let clean_err = abs_err(&clean_mean);
    let mut entries = Vec::with_capacity(cfg.eta_grid.len());
    for &eta in &cfg.eta_grid {
        let mut pick = SweepEntry {
            eta,
            candidate: None,
            norm: T::zero(),
            abs_error: clean_err,
            nd: clean_err / ref_sum,
            mean_forecast: clean_mean.clone(),
        };
        for (i, (norm, err, m)) in scored.iter().enumerate() {
            if *norm <= T::lit(eta) && *err > pick.abs_error {
                pick = SweepEntry {
                    eta,
                    candidate: Some(i),
                    norm: *norm,
                    abs_error: *err,
                    nd: *err / ref_sum,
                    mean_forecast: m.clone(),
                };
            }
        }
        entries.push(pick);
    }
    Ok(SweepResult { clean_mean, reference_abs_sum: ref_sum, candidates, entries })
}

/// Appended observation `(1 + ρ) x_{T+1}` with dissimilarity measured against
/// the model's mean prediction for the same step.
pub fn make_time_shift_perturbation<T: Scalar>(truth_next: T, predicted_next: T, rho: T) -> Result<PerturbationSpec<T>> {
    if !(rho > -T::one()) {
        return Err(invalid(format!("time shift needs rho > -1, got {rho}")));
    }
    PerturbationSpec::appended(vec![(T::one() + rho) * truth_next], &[predicted_next])
}

/// `ρ` for a grid point `log₁₀(1 + ρ)`.
pub fn rho_from_log10(l: f64) -> f64 {
    10f64.powf(l) - 1.0
}

#[cfg(test)]
mod tests;
