//! Builds a sampling policy from solved levels and draws from it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use senseaug::augment::AugmentationKind;
use senseaug::policy::{build_policy, build_policy_with, PolicyOptions, SortOrder};
use senseaug::sensitivity::{run_sensitivity_analysis, AnalyticEvaluator, SAConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SAConfig::default();
    let kinds = [
        AugmentationKind::HLighter,
        AugmentationKind::Blur,
        AugmentationKind::ShearXPos,
    ];
    let sets = run_sensitivity_analysis(&AnalyticEvaluator::power(1.5), &kinds, &cfg)?
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let policy = build_policy(&sets)?;
    println!("{:<12} {:>7} {:>7} {:>7}", "kind", "alpha", "ma", "p");
    for (e, p) in policy.entries().iter().zip(policy.pmf()) {
        println!(
            "{:<12} {:>7.3} {:>7.3} {:>7.4}",
            e.kind.to_string(),
            e.alpha,
            e.ma,
            p
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut by_alpha: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..10_000 {
        let spec = policy.sample(&mut rng);
        *by_alpha
            .entry(format!("{:.3}", spec.magnitude))
            .or_default() += 1;
    }
    println!("\ndraws by magnitude: {by_alpha:?}");

    // the reverse order favours the easy entries instead
    let easy_first = build_policy_with(
        &sets,
        &PolicyOptions {
            order: SortOrder::Descending,
            ..PolicyOptions::default()
        },
    )?;
    let top = &easy_first.entries()[0];
    println!(
        "descending order puts {} at {:.3} first",
        top.kind, top.alpha
    );
    println!(
        "\n{}",
        serde_json::to_string(&policy)?
            .chars()
            .take(160)
            .collect::<String>()
    );
    Ok(())
}
