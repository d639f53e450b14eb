//! Runs the packaged drift scenario and prints how the hue levels move
//! between analysis rounds.
//!
//! cargo run --example drift_tracking -- [config.toml]

use std::path::PathBuf;

use senseaug::cli::simulate::{run_simulation, SimulationConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/drift.toml")
        });
    let cfg = SimulationConfig::load(&path)?;
    let out = tempfile_dir()?;
    let (outcome, summary) = run_simulation(&cfg, &out)?;

    for (kind, d) in &cfg.learner.kinds {
        let means: Vec<String> = outcome
            .rounds
            .iter()
            .filter_map(|sets| sets.iter().find(|s| s.kind == *kind))
            .map(|s| {
                format!(
                    "{:.3}",
                    s.levels.iter().sum::<f64>() / s.levels.len() as f64
                )
            })
            .collect();
        println!(
            "{kind:<10} drift {:+.4}/step  mean level per round: {}",
            d.drift,
            means.join(" -> ")
        );
    }
    println!(
        "{} analysis rounds; outputs in {}",
        summary.sa_rounds,
        out.display()
    );
    Ok(())
}

fn tempfile_dir() -> std::io::Result<PathBuf> {
    let dir = std::env::temp_dir().join("senseaug_drift");
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
