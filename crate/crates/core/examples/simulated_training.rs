//! Runs the training loop against the built-in simulated learner and prints
//! validation scores and how the solved levels evolve.

use senseaug::augment::AugmentationKind;
use senseaug::image::test_pattern;
use senseaug::policy::{
    training_loop, LearnerConfig, LogEvent, LoopConfig, SimulatedLearner, SortOrder,
};
use senseaug::sensitivity::SAConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut learner = SimulatedLearner::new(LearnerConfig::default())?;
    let images = vec![test_pattern(32, 32), test_pattern(40, 24)];
    let cfg = LoopConfig {
        max_iter: 500,
        r_v: 50,
        r_sa: 100,
        warmup: 100,
        seed: 3,
        kinds: vec![
            AugmentationKind::SLighter,
            AugmentationKind::Noise,
            AugmentationKind::TranslateYNeg,
        ],
        sort_order: SortOrder::Ascending,
    };
    let outcome = training_loop(&mut learner, &images, &cfg, &SAConfig::default())?;

    for r in outcome.log.iter().filter(|r| r.event == LogEvent::Validate) {
        println!("iter {:>4}  {}", r.iter, r.payload);
    }
    for (round, sets) in outcome.rounds.iter().enumerate() {
        for s in sets {
            println!(
                "round {round} {:<16} levels {:.3?}",
                s.kind.to_string(),
                s.levels
            );
        }
    }
    println!(
        "{} steps, peak image memory {} bytes for {}-byte images",
        outcome.train_steps, outcome.peak_image_bytes, outcome.image_footprint
    );
    Ok(())
}
