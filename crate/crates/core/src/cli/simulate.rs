//! Config loading and output writing for end-to-end simulation runs.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::image::{test_pattern, ImageBuffer};
use crate::policy::{
    offline_copies, training_loop, LearnerConfig, LoopConfig, LoopError, LoopOutcome,
    SimulatedLearner,
};
use crate::sensitivity::SAConfig;

use super::plot::{trace_rows, write_trace};
use super::CliError;

fn default_side() -> usize {
    32
}
fn default_count() -> usize {
    4
}

/// Synthetic clean training images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSetConfig {
    #[serde(default = "default_side")]
    pub width: usize,
    #[serde(default = "default_side")]
    pub height: usize,
    #[serde(default = "default_count")]
    pub count: usize,
}

impl Default for ImageSetConfig {
    fn default() -> Self {
        Self {
            width: default_side(),
            height: default_side(),
            count: default_count(),
        }
    }
}

impl ImageSetConfig {
    /// Test patterns, each rolled horizontally by a different offset.
    pub fn images(&self) -> Vec<ImageBuffer> {
        let base = test_pattern(self.width, self.height);
        (0..self.count)
            .map(|i| {
                let shift = i * self.width / self.count.max(1);
                ImageBuffer::from_fn(self.width, self.height, |x, y| {
                    base.pixel((x + shift) % self.width, y)
                })
                .expect("non-empty image")
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(rename = "loop")]
    pub loop_cfg: LoopConfig,
    #[serde(default)]
    pub sa: SAConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub images: ImageSetConfig,
}

impl SimulationConfig {
    /// Reads TOML, or JSON when the file ends in `.json`. Errors name the
    /// offending field path.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(
            &text,
            path.extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("json")),
        )
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, String> {
        let cfg: Self = if json {
            let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
            serde_path_to_error::deserialize(value).map_err(|e| field_error(e.path(), e.inner()))?
        } else {
            let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
            serde_path_to_error::deserialize(table).map_err(|e| field_error(e.path(), e.inner()))?
        };
        cfg.loop_cfg.validate().map_err(|e| format!("loop: {e}"))?;
        cfg.sa.validate().map_err(|e| format!("sa: {e}"))?;
        cfg.learner
            .validate()
            .map_err(|e| format!("learner: {e}"))?;
        if cfg.images.width == 0 || cfg.images.height == 0 || cfg.images.count == 0 {
            return Err("images: width, height and count must be positive".into());
        }
        Ok(cfg)
    }
}

fn field_error(path: &serde_path_to_error::Path, inner: &dyn std::fmt::Display) -> String {
    format!("field `{path}`: {inner}")
}

/// Summary numbers written next to the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub train_steps: usize,
    pub validations: usize,
    pub sa_rounds: usize,
    pub peak_image_bytes: usize,
    pub image_footprint: usize,
    /// Augmented copies per training image an offline pipeline would store.
    pub offline_copies: usize,
}

/// Runs the loop and writes `run_log.jsonl`, `policy.json`, `levels.csv`,
/// `trace.csv` and `summary.json` into `out_dir`.
pub fn run_simulation(
    cfg: &SimulationConfig,
    out_dir: &Path,
) -> Result<(LoopOutcome, RunSummary), CliError> {
    let mut learner = SimulatedLearner::new(cfg.learner.clone()).map_err(CliError::Usage)?;
    let images = cfg.images.images();
    let outcome =
        training_loop(&mut learner, &images, &cfg.loop_cfg, &cfg.sa).map_err(|e| match e {
            LoopError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Evaluator(other.to_string()),
        })?;
    let summary = RunSummary {
        train_steps: outcome.train_steps,
        validations: outcome.validations,
        sa_rounds: outcome.rounds.len(),
        peak_image_bytes: outcome.peak_image_bytes,
        image_footprint: outcome.image_footprint,
        offline_copies: offline_copies(cfg.loop_cfg.kinds.len(), cfg.sa.levels),
    };

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let path = out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
    };
    write("run_log.jsonl", outcome.log_jsonl().as_bytes())?;
    let policy = match &outcome.policy {
        Some(p) => serde_json::to_string_pretty(p).expect("policy serialises"),
        None => "null".to_string(),
    };
    write("policy.json", format!("{policy}\n").as_bytes())?;

    let mut levels = csv::Writer::from_writer(Vec::new());
    levels
        .write_record(["round", "kind", "index", "alpha", "ma"])
        .expect("in-memory csv");
    let mut trace = Vec::new();
    for (round, sets) in outcome.rounds.iter().enumerate() {
        for set in sets {
            for (i, (alpha, ma)) in set.levels.iter().zip(&set.level_ma).enumerate() {
                levels
                    .write_record([
                        round.to_string(),
                        set.kind.to_string(),
                        i.to_string(),
                        alpha.to_string(),
                        ma.to_string(),
                    ])
                    .expect("in-memory csv");
            }
        }
        trace.extend(trace_rows(round, sets, &cfg.sa));
    }
    write("levels.csv", &levels.into_inner().expect("in-memory csv"))?;
    let mut trace_bytes = Vec::new();
    write_trace(&mut trace_bytes, &trace).expect("in-memory csv");
    write("trace.csv", &trace_bytes)?;
    let mut s = serde_json::to_vec_pretty(&json!(summary)).expect("summary serialises");
    s.write_all(b"\n").expect("in-memory write");
    write("summary.json", &s)?;
    Ok((outcome, summary))
}
