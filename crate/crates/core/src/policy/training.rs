use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::augment::{apply, AugmentationKind, AugmentationSpec};
use crate::image::ImageBuffer;
use crate::metrics::SegMetrics;
use crate::sensitivity::{
    run_sensitivity_analysis, Evaluator, LevelSet, SAConfig, SensitivityError,
};

use super::{build_policy_with, AugmentationPolicy, PolicyError, PolicyOptions, SortOrder};

#[derive(Debug, Error)]
#[error("{0}")]
pub struct TrainerError(pub String);

#[derive(Debug, Error)]
pub enum LoopError {
    #[error("invalid loop configuration: {0}")]
    Config(String),
    #[error("trainer failed at iteration {iter}: {source}")]
    Trainer {
        iter: usize,
        #[source]
        source: TrainerError,
    },
    #[error("augmentation failed at iteration {iter}: {message}")]
    Augment { iter: usize, message: String },
    #[error("sensitivity analysis failed at iteration {iter}: {source}")]
    Sensitivity {
        iter: usize,
        #[source]
        source: SensitivityError,
    },
    #[error("policy rebuild failed at iteration {iter}: {source}")]
    Policy {
        iter: usize,
        #[source]
        source: PolicyError,
    },
}

/// A model that can be stepped, validated and probed under augmentation.
pub trait Trainer: Evaluator {
    /// One optimisation step on `image`, which has already been augmented by
    /// `spec` (or is clean when `spec` is `None`).
    fn train_step(
        &mut self,
        iter: usize,
        spec: Option<&AugmentationSpec>,
        image: &ImageBuffer,
    ) -> Result<(), TrainerError>;

    /// Metrics on clean validation data.
    fn validate(&mut self) -> Result<SegMetrics, TrainerError>;
}

fn all_kinds() -> Vec<AugmentationKind> {
    AugmentationKind::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    pub max_iter: usize,
    /// Validate every `r_v` iterations.
    pub r_v: usize,
    /// Re-run sensitivity analysis every `r_sa` iterations; a multiple of `r_v`.
    pub r_sa: usize,
    /// No analysis runs at or before this iteration.
    pub warmup: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_kinds")]
    pub kinds: Vec<AugmentationKind>,
    #[serde(default)]
    pub sort_order: SortOrder,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), LoopError> {
        let bad = |m: &str| Err(LoopError::Config(m.into()));
        if self.r_v == 0 || self.r_sa == 0 {
            return bad("r_v and r_sa must be positive");
        }
        if !self.r_sa.is_multiple_of(self.r_v) {
            return bad("r_sa must be a multiple of r_v");
        }
        if self.warmup > self.max_iter {
            return bad("warmup cannot exceed max_iter");
        }
        if self.kinds.is_empty() {
            return bad("kinds must not be empty");
        }
        Ok(())
    }
}

/// Tracks bytes of image data alive inside the loop.
#[derive(Debug, Default)]
pub struct MemoryProbe {
    live: AtomicUsize,
    peak: AtomicUsize,
}

/// Releases its bytes from the probe when dropped.
pub struct TrackedImage<'a> {
    probe: &'a MemoryProbe,
    bytes: usize,
    image: ImageBuffer,
}

impl std::ops::Deref for TrackedImage<'_> {
    type Target = ImageBuffer;

    fn deref(&self) -> &ImageBuffer {
        &self.image
    }
}

impl Drop for TrackedImage<'_> {
    fn drop(&mut self) {
        self.probe.live.fetch_sub(self.bytes, Ordering::SeqCst);
    }
}

impl MemoryProbe {
    pub fn track(&self, image: ImageBuffer) -> TrackedImage<'_> {
        let bytes = image.footprint();
        let live = self.live.fetch_add(bytes, Ordering::SeqCst) + bytes;
        self.peak.fetch_max(live, Ordering::SeqCst);
        TrackedImage {
            probe: self,
            bytes,
            image,
        }
    }

    pub fn live(&self) -> usize {
        self.live.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

/// Copies an offline pipeline would have to store per training image: one
/// per kind and level.
pub fn offline_copies(kinds: usize, levels: usize) -> usize {
    kinds * levels
}

/// The clean training set, read one image per step.
pub trait TrainingImage {
    fn len(&self) -> usize;

    /// A fresh copy of image `index`, as if read from disk.
    fn load(&self, index: usize) -> ImageBuffer;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TrainingImage for [ImageBuffer] {
    fn len(&self) -> usize {
        <[ImageBuffer]>::len(self)
    }

    fn load(&self, index: usize) -> ImageBuffer {
        self[index].clone()
    }
}

impl TrainingImage for Vec<ImageBuffer> {
    fn len(&self) -> usize {
        Vec::len(self)
    }

    fn load(&self, index: usize) -> ImageBuffer {
        self[index].clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogEvent {
    Train,
    Validate,
    SaRound,
    Policy,
}

/// One line of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iter: usize,
    pub event: LogEvent,
    pub payload: Value,
}

#[derive(Debug)]
pub struct LoopOutcome {
    pub log: Vec<LogRecord>,
    pub policy: Option<AugmentationPolicy>,
    /// Successful level sets of every analysis round, oldest first.
    pub rounds: Vec<Vec<LevelSet>>,
    pub train_steps: usize,
    pub validations: usize,
    /// Largest number of image bytes held at once.
    pub peak_image_bytes: usize,
    /// Bytes of the largest single training image.
    pub image_footprint: usize,
}

impl LoopOutcome {
    /// The log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.log {
            out.push_str(&serde_json::to_string(r).expect("log records serialise"));
            out.push('\n');
        }
        out
    }
}

/// Trains with online augmentation, periodically re-deriving levels and the
/// sampling policy from the model's current sensitivity.
///
/// Iterations run `1..=max_iter`. Until the first analysis round finishes,
/// every step trains on clean images. Each step loads one clean image and
/// produces at most one augmented copy, so image memory stays at two
/// footprints regardless of how many kinds and levels the policy holds.
pub fn training_loop<T: Trainer, D: TrainingImage + ?Sized>(
    trainer: &mut T,
    images: &D,
    cfg: &LoopConfig,
    sa_cfg: &SAConfig,
) -> Result<LoopOutcome, LoopError> {
    cfg.validate()?;
    sa_cfg
        .validate()
        .map_err(|e| LoopError::Config(e.to_string()))?;
    if images.is_empty() {
        return Err(LoopError::Config("no training images".into()));
    }
    let policy_opts = PolicyOptions {
        order: cfg.sort_order,
        ..PolicyOptions::default()
    };
    let probe = MemoryProbe::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut policy: Option<AugmentationPolicy> = None;
    let mut log = Vec::new();
    let mut rounds = Vec::new();
    let mut validations = 0;
    let mut footprint = 0;

    for iter in 1..=cfg.max_iter {
        let clean = probe.track(images.load((iter - 1) % images.len()));
        footprint = footprint.max(clean.footprint());
        let spec = policy.as_ref().map(|p| p.sample(&mut rng));
        match &spec {
            Some(s) => {
                let augmented = apply(s, &clean).map_err(|e| LoopError::Augment {
                    iter,
                    message: e.to_string(),
                })?;
                drop(clean);
                let augmented = probe.track(augmented);
                trainer.train_step(iter, Some(s), &augmented)
            }
            None => trainer.train_step(iter, None, &clean),
        }
        .map_err(|source| LoopError::Trainer { iter, source })?;
        log.push(LogRecord {
            iter,
            event: LogEvent::Train,
            payload: json!({ "spec": spec }),
        });

        if iter % cfg.r_v != 0 {
            continue;
        }
        let metrics = trainer
            .validate()
            .map_err(|source| LoopError::Trainer { iter, source })?;
        validations += 1;
        log.push(LogRecord {
            iter,
            event: LogEvent::Validate,
            payload: serde_json::to_value(metrics).expect("metrics serialise"),
        });

        if iter % cfg.r_sa != 0 || iter <= cfg.warmup {
            continue;
        }
        let results = run_sensitivity_analysis(&*trainer, &cfg.kinds, sa_cfg)
            .map_err(|source| LoopError::Sensitivity { iter, source })?;
        let mut sets = Vec::new();
        let mut failures = Vec::new();
        for (kind, r) in cfg.kinds.iter().zip(results) {
            match r {
                Ok(set) => sets.push(set),
                Err(e) => failures.push(json!({ "kind": kind, "error": e.to_string() })),
            }
        }
        log.push(LogRecord {
            iter,
            event: LogEvent::SaRound,
            payload: json!({ "round": rounds.len(), "level_sets": sets, "failures": failures }),
        });
        if !sets.is_empty() {
            let p = build_policy_with(&sets, &policy_opts)
                .map_err(|source| LoopError::Policy { iter, source })?;
            log.push(LogRecord {
                iter,
                event: LogEvent::Policy,
                payload: serde_json::to_value(&p).expect("policy serialises"),
            });
            policy = Some(p);
        }
        rounds.push(sets);
    }

    Ok(LoopOutcome {
        log,
        policy,
        rounds,
        train_steps: cfg.max_iter,
        validations,
        peak_image_bytes: probe.peak(),
        image_footprint: footprint,
    })
}
