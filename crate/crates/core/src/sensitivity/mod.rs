//! Cumulative sensitivity curves and the level solvers built on them.

mod analytic;
mod solver;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AugmentationKind;
use crate::curve::{CurveError, Knot, DEFAULT_INVERT_TOL};

pub use analytic::{AnalyticEvaluator, AnalyticFamily};
pub use solver::{
    isotonic_clamp, run_sensitivity_analysis, solve_levels_adaptive, solve_levels_dense,
};

/// Largest tolerated decrease in measured g before the data is rejected.
pub const MONOTONE_SLACK: f64 = 0.1;

#[derive(Debug, Error)]
#[error("{0}")]
pub struct EvalError(pub String);

impl From<String> for EvalError {
    fn from(s: String) -> Self {
        EvalError(s)
    }
}

impl From<&str> for EvalError {
    fn from(s: &str) -> Self {
        EvalError(s.to_string())
    }
}

#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("evaluator failed for {kind} at alpha = {alpha}: {source}")]
    Evaluator {
        kind: AugmentationKind,
        alpha: f64,
        #[source]
        source: EvalError,
    },
    #[error("{kind} at alpha = {alpha}: measurement out of domain (ma = {ma}, kid = {kid})")]
    BadMeasurement {
        kind: AugmentationKind,
        alpha: f64,
        ma: f64,
        kid: f64,
    },
    #[error("non-degrading augmentation: {0}")]
    NonDegrading(String),
    #[error(
        "measured g is not monotone: g({left_alpha}) = {left_g} exceeds g({right_alpha}) = {right_g} by more than {MONOTONE_SLACK}"
    )]
    NonMonotone {
        left_alpha: f64,
        left_g: f64,
        right_alpha: f64,
        right_g: f64,
    },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("no augmentation kinds given")]
    NoKinds,
}

/// Accuracy and KID measured for one `(kind, alpha)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub ma: f64,
    pub kid: f64,
}

/// Black-box measurement of a model under one augmentation.
///
/// Implementations must be deterministic for a fixed `(kind, alpha)` while an
/// analysis runs. `concurrent` opts in to per-kind parallelism.
pub trait Evaluator: Sync {
    fn evaluate(&self, kind: AugmentationKind, alpha: f64) -> Result<Measurement, EvalError>;

    fn concurrent(&self) -> bool {
        false
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn evaluate(&self, kind: AugmentationKind, alpha: f64) -> Result<Measurement, EvalError> {
        (**self).evaluate(kind, alpha)
    }

    fn concurrent(&self) -> bool {
        (**self).concurrent()
    }
}

/// Adapts a closure.
pub struct FnEvaluator<F> {
    f: F,
    concurrent: bool,
}

impl<F> FnEvaluator<F>
where
    F: Fn(AugmentationKind, f64) -> Result<Measurement, EvalError> + Sync,
{
    pub fn new(f: F) -> Self {
        Self {
            f,
            concurrent: false,
        }
    }

    pub fn concurrent(f: F) -> Self {
        Self {
            f,
            concurrent: true,
        }
    }
}

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(AugmentationKind, f64) -> Result<Measurement, EvalError> + Sync,
{
    fn evaluate(&self, kind: AugmentationKind, alpha: f64) -> Result<Measurement, EvalError> {
        (self.f)(kind, alpha)
    }

    fn concurrent(&self) -> bool {
        self.concurrent
    }
}

/// Wraps an evaluator and records every call in order.
pub struct RecordingEvaluator<E> {
    inner: E,
    count: AtomicUsize,
    calls: Mutex<Vec<(AugmentationKind, f64)>>,
}

impl<E: Evaluator> RecordingEvaluator<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            count: AtomicUsize::new(0),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn call_count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }

    pub fn calls(&self) -> Vec<(AugmentationKind, f64)> {
        self.calls.lock().unwrap().clone()
    }

    pub fn into_inner(self) -> E {
        self.inner
    }
}

impl<E: Evaluator> Evaluator for RecordingEvaluator<E> {
    fn evaluate(&self, kind: AugmentationKind, alpha: f64) -> Result<Measurement, EvalError> {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.calls.lock().unwrap().push((kind, alpha));
        self.inner.evaluate(kind, alpha)
    }

    fn concurrent(&self) -> bool {
        self.inner.concurrent()
    }
}

fn default_levels() -> usize {
    5
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_lambda() -> f64 {
    2.0
}
fn default_g_max() -> f64 {
    2.0
}
fn default_alpha_max() -> f64 {
    1.0
}
fn default_max_refinements() -> usize {
    50
}
fn default_invert_tol() -> f64 {
    DEFAULT_INVERT_TOL
}

/// Solver settings. `levels` is the level count L: L - 1 interior levels are
/// solved per kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SAConfig {
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_g_max")]
    pub g_max: f64,
    #[serde(default = "default_alpha_max")]
    pub alpha_max: f64,
    #[serde(default = "default_max_refinements")]
    pub max_refinements: usize,
    #[serde(default = "default_invert_tol")]
    pub invert_tol: f64,
}

impl Default for SAConfig {
    fn default() -> Self {
        Self {
            levels: default_levels(),
            epsilon: default_epsilon(),
            lambda: default_lambda(),
            g_max: default_g_max(),
            alpha_max: default_alpha_max(),
            max_refinements: default_max_refinements(),
            invert_tol: default_invert_tol(),
        }
    }
}

impl SAConfig {
    pub fn validate(&self) -> Result<(), SensitivityError> {
        let bad = |m: &str| Err(SensitivityError::Config(m.to_string()));
        if self.levels < 2 {
            return bad("levels must be at least 2");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.alpha_max > 0.0 && self.alpha_max <= 1.0) {
            return bad("alpha_max must lie in (0, 1]");
        }
        if !(self.invert_tol > 0.0) {
            return bad("invert_tol must be positive");
        }
        if (self.g_max - self.lambda * self.alpha_max).abs() > 1e-12 {
            return bad("g_max must equal lambda * alpha_max");
        }
        Ok(())
    }

    /// Ordinates `g_max * i / L` for `i = 1..L-1`.
    pub fn targets(&self) -> Vec<f64> {
        (1..self.levels)
            .map(|i| self.g_max * i as f64 / self.levels as f64)
            .collect()
    }

    /// Evenly spaced levels `alpha_max * i / L`, used when g is undefined.
    pub fn uniform_levels(&self) -> Vec<f64> {
        (1..self.levels)
            .map(|i| self.alpha_max * i as f64 / self.levels as f64)
            .collect()
    }
}

/// Cumulative sensitivity: normalised accuracy drop minus normalised KID plus
/// `lambda * alpha`. Equals 0 at alpha = 0 and `g_max` at `alpha_max`.
pub fn g_value(
    ma_clean: f64,
    ma_alpha: f64,
    ma_max: f64,
    kid_alpha: f64,
    kid_max: f64,
    cfg: &SAConfig,
    alpha: f64,
) -> Result<f64, SensitivityError> {
    if !(kid_max > 0.0) {
        return Err(SensitivityError::NonDegrading(format!(
            "KID at alpha_max is {kid_max}"
        )));
    }
    if !(ma_clean > ma_max) {
        return Err(SensitivityError::NonDegrading(format!(
            "accuracy does not drop (clean {ma_clean}, at alpha_max {ma_max})"
        )));
    }
    Ok((ma_clean - ma_alpha) / (ma_clean - ma_max) - kid_alpha / kid_max + cfg.lambda * alpha)
}

/// One evaluated point of a g curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GSample {
    pub alpha: f64,
    pub ma: f64,
    pub kid: f64,
    pub g: f64,
}

impl GSample {
    pub fn knot(&self) -> Knot {
        Knot::new(self.alpha, self.g)
    }
}

/// Solved levels for one augmentation kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    pub kind: AugmentationKind,
    pub levels: Vec<f64>,
    pub uncertainties: Vec<f64>,
    pub level_ma: Vec<f64>,
    pub evaluations_used: usize,
    /// Every sampled point in evaluation order; anchors first.
    #[serde(default)]
    pub samples: Vec<GSample>,
    /// False when the refinement cap stopped the solver.
    #[serde(default = "yes")]
    pub converged: bool,
    /// Levels are the uniform fallback for a non-degrading augmentation.
    #[serde(default)]
    pub fallback: bool,
}

fn yes() -> bool {
    true
}

impl LevelSet {
    /// Samples sorted by alpha with the anchors pinned to `(0, 0)` and
    /// `(alpha_max, g_max)`.
    pub fn knots(&self) -> Vec<Knot> {
        let mut k: Vec<Knot> = self.samples.iter().map(GSample::knot).collect();
        k.sort_by(|a, b| a.x.total_cmp(&b.x));
        k.dedup_by(|a, b| a.x == b.x);
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_value_anchors_and_arithmetic() {
        let cfg = SAConfig::default();
        assert_eq!(g_value(0.8, 0.8, 0.2, 0.0, 0.3, &cfg, 0.0).unwrap(), 0.0);
        assert_eq!(g_value(0.8, 0.2, 0.2, 0.3, 0.3, &cfg, 1.0).unwrap(), 2.0);
        let g = g_value(1.0, 0.5, 0.0, 0.25, 1.0, &cfg, 0.5).unwrap();
        assert!((g - 1.25).abs() < 1e-15);
    }

    #[test]
    fn g_value_rejects_non_degrading() {
        let cfg = SAConfig::default();
        assert!(matches!(
            g_value(0.8, 0.8, 0.2, 0.0, 0.0, &cfg, 0.5),
            Err(SensitivityError::NonDegrading(_))
        ));
        assert!(matches!(
            g_value(0.5, 0.5, 0.5, 0.0, 0.1, &cfg, 0.5),
            Err(SensitivityError::NonDegrading(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SAConfig::default().validate().is_ok());
        let c = SAConfig {
            levels: 1,
            ..SAConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SAConfig {
            g_max: 3.0,
            ..SAConfig::default()
        };
        assert!(c.validate().is_err());
        let t = SAConfig::default().targets();
        assert_eq!(t.len(), 4);
        for (got, want) in t.iter().zip([0.4, 0.8, 1.2, 1.6]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn config_defaults_fill_from_partial_json() {
        let c: SAConfig = serde_json::from_str(r#"{"levels": 3}"#).unwrap();
        assert_eq!(c.levels, 3);
        assert_eq!(c.epsilon, 0.05);
        assert!(serde_json::from_str::<SAConfig>(r#"{"level": 3}"#).is_err());
    }
}
