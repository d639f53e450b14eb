use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{AugmentationKind, AugmentationSpec};
use crate::image::ImageBuffer;
use crate::metrics::{seg_metrics, SegMetrics, SegSample};
use crate::sensitivity::{EvalError, Evaluator, Measurement};

use super::training::{Trainer, TrainerError};

/// Shape of one kind's accuracy-versus-alpha surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindDynamics {
    /// Alpha at which accuracy falls fastest.
    pub midpoint: f64,
    /// Logistic width; smaller is a sharper cliff.
    pub width: f64,
    /// Accuracy lost at alpha = 1.
    pub depth: f64,
    /// Midpoint change applied on every training step.
    #[serde(default)]
    pub drift: f64,
}

impl Default for KindDynamics {
    fn default() -> Self {
        Self {
            midpoint: 0.5,
            width: 0.12,
            depth: 0.5,
            drift: 0.0,
        }
    }
}

fn default_seed() -> u64 {
    0
}
fn default_ma_start() -> f64 {
    0.6
}
fn default_ma_final() -> f64 {
    0.85
}
fn default_time_constant() -> f64 {
    200.0
}
fn default_learning_rate() -> f64 {
    0.01
}
fn default_kid_scale() -> f64 {
    0.05
}
fn default_kid_exponent() -> f64 {
    1.5
}
fn default_classes() -> usize {
    6
}
fn default_val_size() -> usize {
    32
}
fn default_val_images() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Clean accuracy at iteration 0.
    #[serde(default = "default_ma_start")]
    pub ma_clean_start: f64,
    /// Clean accuracy approached as training continues.
    #[serde(default = "default_ma_final")]
    pub ma_clean_final: f64,
    /// Iterations for the clean-accuracy gap to shrink by a factor e.
    #[serde(default = "default_time_constant")]
    pub time_constant: f64,
    /// Fraction of the gap to a sampled alpha that the kind's midpoint closes
    /// per step trained on it.
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// KID at alpha = 1; KID grows as `kid_scale * alpha^kid_exponent`.
    #[serde(default = "default_kid_scale")]
    pub kid_scale: f64,
    #[serde(default = "default_kid_exponent")]
    pub kid_exponent: f64,
    /// Standard deviation of the accuracy noise added to evaluations.
    #[serde(default)]
    pub eval_noise: f64,
    #[serde(default)]
    pub default_dynamics: KindDynamics,
    /// Per-kind replacements for `default_dynamics`.
    #[serde(default)]
    pub kinds: BTreeMap<AugmentationKind, KindDynamics>,
    #[serde(default = "default_classes")]
    pub num_classes: usize,
    #[serde(default = "default_val_size")]
    pub val_size: usize,
    #[serde(default = "default_val_images")]
    pub val_images: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            ma_clean_start: default_ma_start(),
            ma_clean_final: default_ma_final(),
            time_constant: default_time_constant(),
            learning_rate: default_learning_rate(),
            kid_scale: default_kid_scale(),
            kid_exponent: default_kid_exponent(),
            eval_noise: 0.0,
            default_dynamics: KindDynamics::default(),
            kinds: BTreeMap::new(),
            num_classes: default_classes(),
            val_size: default_val_size(),
            val_images: default_val_images(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.ma_clean_start) || !unit(self.ma_clean_final) {
            return Err("clean accuracies must lie in [0, 1]".into());
        }
        if !(self.time_constant > 0.0) {
            return Err("time_constant must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate <= 1.0) {
            return Err("learning_rate must lie in [0, 1]".into());
        }
        if !(self.kid_scale > 0.0) {
            return Err("kid_scale must be positive".into());
        }
        // keeps g monotone: dg/dalpha >= 2 - kid_exponent
        if !(1.0..=2.0).contains(&self.kid_exponent) {
            return Err("kid_exponent must lie in [1, 2]".into());
        }
        if !(self.eval_noise >= 0.0) {
            return Err("eval_noise must be non-negative".into());
        }
        if self.num_classes < 2 || self.val_size == 0 || self.val_images == 0 {
            return Err("validation needs at least 2 classes and a non-empty image set".into());
        }
        for d in std::iter::once(&self.default_dynamics).chain(self.kinds.values()) {
            if !(d.width > 0.0) || !(d.depth > 0.0 && d.depth <= 1.0) || !unit(d.midpoint) {
                return Err("dynamics need width > 0, depth in (0, 1], midpoint in [0, 1]".into());
            }
        }
        Ok(())
    }
}

const MIDPOINT_BOUNDS: (f64, f64) = (0.02, 0.98);

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Stand-in for a segmentation model being trained.
///
/// Accuracy under kind `k` at strength alpha is
/// `clean - depth * s(alpha)`, where `s` is a logistic in alpha rescaled to
/// run from 0 at alpha = 0 to 1 at alpha = 1. Training on `(k, alpha)` pulls
/// `k`'s midpoint toward alpha; each kind's `drift` is added every step.
#[derive(Clone, Debug)]
pub struct SimulatedLearner {
    cfg: LearnerConfig,
    dynamics: Vec<KindDynamics>,
    steps: u64,
    validations: u64,
}

impl SimulatedLearner {
    pub fn new(cfg: LearnerConfig) -> Result<Self, String> {
        cfg.validate()?;
        let dynamics = AugmentationKind::ALL
            .iter()
            .map(|k| cfg.kinds.get(k).copied().unwrap_or(cfg.default_dynamics))
            .collect();
        Ok(Self {
            cfg,
            dynamics,
            steps: 0,
            validations: 0,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn midpoint(&self, kind: AugmentationKind) -> f64 {
        self.dynamics[kind.index()].midpoint
    }

    pub fn clean_accuracy(&self) -> f64 {
        let (a, b) = (self.cfg.ma_clean_start, self.cfg.ma_clean_final);
        b - (b - a) * (-(self.steps as f64) / self.cfg.time_constant).exp()
    }

    /// Noise-free accuracy under `kind` at `alpha`.
    pub fn accuracy(&self, kind: AugmentationKind, alpha: f64) -> f64 {
        let d = &self.dynamics[kind.index()];
        let s = |a: f64| sigmoid((a - d.midpoint) / d.width);
        let drop = (s(alpha) - s(0.0)) / (s(1.0) - s(0.0));
        (self.clean_accuracy() - d.depth * drop).clamp(0.0, 1.0)
    }

    pub fn kid(&self, alpha: f64) -> f64 {
        self.cfg.kid_scale * alpha.powf(self.cfg.kid_exponent)
    }

    /// Zero-mean accuracy jitter fixed by `(seed, step, kind, alpha)`.
    fn jitter(&self, kind: AugmentationKind, alpha: f64) -> f64 {
        if self.cfg.eval_noise == 0.0 || alpha == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ alpha.to_bits());
        rng.set_stream(self.steps.wrapping_mul(32) + kind.index() as u64);
        let u: f64 = rng.random::<f64>() - 0.5;
        // uniform with the configured standard deviation
        u * self.cfg.eval_noise * 12f64.sqrt()
    }

    fn ground_truth(&self, x: usize, y: usize, image: usize) -> u32 {
        let c = self.cfg.num_classes;
        ((x / 8 + (y / 8) * 3 + image) % c) as u32
    }
}

impl Evaluator for SimulatedLearner {
    fn evaluate(&self, kind: AugmentationKind, alpha: f64) -> Result<Measurement, EvalError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(format!("alpha {alpha} outside [0, 1]").into());
        }
        let ma = (self.accuracy(kind, alpha) + self.jitter(kind, alpha)).clamp(0.0, 1.0);
        Ok(Measurement {
            ma,
            kid: self.kid(alpha),
        })
    }

    fn concurrent(&self) -> bool {
        true
    }
}

impl Trainer for SimulatedLearner {
    fn train_step(
        &mut self,
        _iter: usize,
        spec: Option<&AugmentationSpec>,
        image: &ImageBuffer,
    ) -> Result<(), TrainerError> {
        if image.data().is_empty() {
            return Err(TrainerError("empty training image".into()));
        }
        let lr = self.cfg.learning_rate;
        if let Some(spec) = spec {
            let d = &mut self.dynamics[spec.kind.index()];
            d.midpoint += lr * (spec.magnitude - d.midpoint);
        }
        for d in &mut self.dynamics {
            d.midpoint = (d.midpoint + d.drift).clamp(MIDPOINT_BOUNDS.0, MIDPOINT_BOUNDS.1);
        }
        self.steps += 1;
        Ok(())
    }

    /// Labels a fixed synthetic validation set, flipping each pixel with
    /// probability `1 - clean_accuracy`, and scores it.
    fn validate(&mut self) -> Result<SegMetrics, TrainerError> {
        let n = self.cfg.val_size;
        let classes = self.cfg.num_classes;
        let keep = self.clean_accuracy();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(self.validations);
        self.validations += 1;
        let samples: Vec<SegSample> = (0..self.cfg.val_images)
            .map(|i| {
                let ground_truth: Vec<u32> = (0..n * n)
                    .map(|p| self.ground_truth(p % n, p / n, i))
                    .collect();
                let prediction = ground_truth
                    .iter()
                    .map(|&t| {
                        if rng.random::<f64>() < keep {
                            t
                        } else {
                            let shift = rng.random_range(1..classes as u32);
                            (t + shift) % classes as u32
                        }
                    })
                    .collect();
                SegSample {
                    height: n,
                    width: n,
                    prediction,
                    ground_truth,
                    num_classes: classes,
                    ignore_label: None,
                }
            })
            .collect();
        seg_metrics(&samples).map_err(|e| TrainerError(e.to_string()))
    }
}
