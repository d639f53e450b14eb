//! Solves augmentation levels for a black-box measurement and compares the
//! number of evaluations with a dense grid sweep.

use senseaug::augment::AugmentationKind;
use senseaug::sensitivity::{
    solve_levels_adaptive, solve_levels_dense, AnalyticEvaluator, FnEvaluator, Measurement,
    RecordingEvaluator, SAConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SAConfig::default();

    // accuracy collapses around alpha = 0.35 while image distance grows linearly
    let model = FnEvaluator::new(|_kind, alpha: f64| {
        let s = |a: f64| 1.0 / (1.0 + (-(a - 0.35) / 0.08).exp());
        let drop = (s(alpha) - s(0.0)) / (s(1.0) - s(0.0));
        Ok(Measurement {
            ma: 0.82 - 0.5 * drop,
            kid: 0.04 * alpha,
        })
    });
    let counted = RecordingEvaluator::new(&model);
    let set = solve_levels_adaptive(&counted, AugmentationKind::RotatePos, &cfg)?;
    let dense = solve_levels_dense(&model, AugmentationKind::RotatePos, &cfg, 20)?;

    println!("targets        {:.3?}", cfg.targets());
    println!(
        "adaptive       {:.3?} +/- {:.3?}",
        set.levels, set.uncertainties
    );
    println!("accuracy there {:.3?}", set.level_ma);
    println!("dense (20)     {:.3?}", dense.levels);
    println!(
        "evaluations    adaptive {}, dense {}",
        counted.call_count(),
        dense.evaluations_used
    );
    let order: Vec<String> = counted
        .calls()
        .iter()
        .map(|(_, a)| format!("{a:.3}"))
        .collect();
    println!("sampled alphas {}", order.join(" "));

    println!();
    for p in [0.5, 1.0, 2.0, 3.0] {
        let ev = AnalyticEvaluator::power(p);
        let s = solve_levels_adaptive(&ev, AugmentationKind::Blur, &cfg)?;
        let exact: Vec<f64> = cfg
            .targets()
            .iter()
            .map(|&y| ev.family.inverse(y))
            .collect();
        println!(
            "g = 2a^{p:<3} levels {:.3?} exact {:.3?} ({} evals)",
            s.levels, exact, s.evaluations_used
        );
    }
    Ok(())
}
