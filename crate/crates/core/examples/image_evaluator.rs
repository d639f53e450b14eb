//! End to end on real pixels: a toy colour segmenter is scored on perturbed
//! images, KID is measured on projected features, and levels are solved from
//! those measurements.

use senseaug::augment::{apply, AugmentationKind, AugmentationSpec};
use senseaug::image::{test_pattern, ImageBuffer};
use senseaug::metrics::{kid, seg_metrics, FeatureSet, SegSample};
use senseaug::sensitivity::{
    run_sensitivity_analysis, EvalError, FnEvaluator, Measurement, SAConfig,
};

/// Labels each pixel by its dominant channel, or 3 when it is dark.
fn segment(img: &ImageBuffer) -> Vec<u32> {
    img.pixels()
        .map(|p| {
            let max = *p.iter().max().unwrap();
            if max < 70 {
                3
            } else {
                p.iter().position(|&c| c == max).unwrap() as u32
            }
        })
        .collect()
}

/// Per channel: mean, spread and mean absolute horizontal and vertical
/// differences, all scaled to roughly unit size.
fn texture(img: &ImageBuffer) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(12);
    for c in 0..3 {
        let v = |x: usize, y: usize| img.pixel(x, y)[c] as f64 / 64.0;
        let n = (w * h) as f64;
        let mean = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| v(x, y))
            .sum::<f64>()
            / n;
        let var = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| (v(x, y) - mean).powi(2))
            .sum::<f64>()
            / n;
        let dx = (0..h)
            .flat_map(|y| (1..w).map(move |x| (x, y)))
            .map(|(x, y)| (v(x, y) - v(x - 1, y)).abs())
            .sum::<f64>();
        let dy = (1..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| (v(x, y) - v(x, y - 1)).abs())
            .sum::<f64>();
        out.extend([mean, var.sqrt(), 4.0 * dx / n, 4.0 * dy / n]);
    }
    out
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = test_pattern(40, 40);
    let images: Vec<ImageBuffer> = (0..8)
        .map(|i| {
            ImageBuffer::from_fn(40, 40, |x, y| {
                base.pixel((x + 5 * i) % 40, (y + 3 * i) % 40)
            })
            .unwrap()
        })
        .collect();
    let truth: Vec<Vec<u32>> = images.iter().map(segment).collect();
    let clean = FeatureSet::new(images.iter().map(texture).collect(), "clean")?;

    let evaluator = FnEvaluator::concurrent(|kind: AugmentationKind, alpha: f64| {
        let err = |e: &dyn std::fmt::Display| EvalError(e.to_string());
        let mut samples = Vec::new();
        let mut feats = Vec::new();
        for (i, (img, gt)) in images.iter().zip(&truth).enumerate() {
            let spec = AugmentationSpec::new(kind, alpha)
                .map_err(|e| err(&e))?
                .with_seed(i as u64);
            let out = apply(&spec, img).map_err(|e| err(&e))?;
            feats.push(texture(&out));
            samples.push(SegSample {
                height: 40,
                width: 40,
                prediction: segment(&out),
                ground_truth: gt.clone(),
                num_classes: 4,
                ignore_label: None,
            });
        }
        let ma = seg_metrics(&samples).map_err(|e| err(&e))?.a_acc;
        let perturbed = FeatureSet::new(feats, "perturbed").map_err(|e| err(&e))?;
        let kid = kid(&perturbed, &clean).map_err(|e| err(&e))?;
        Ok(Measurement { ma, kid })
    });

    let kinds = [
        AugmentationKind::RLighter,
        AugmentationKind::VDarker,
        AugmentationKind::Blur,
        AugmentationKind::Noise,
        AugmentationKind::ShearXPos,
    ];
    let cfg = SAConfig::default();
    for (kind, result) in kinds
        .iter()
        .zip(run_sensitivity_analysis(&evaluator, &kinds, &cfg)?)
    {
        match result {
            Ok(s) if s.fallback => println!(
                "{kind:<12} accuracy or KID flat at alpha = 1, uniform levels {:.3?}",
                s.levels
            ),
            Ok(s) => println!(
                "{kind:<12} levels {:.3?} accuracy {:.3?} ({} evals)",
                s.levels, s.level_ma, s.evaluations_used
            ),
            Err(e) => println!("{kind:<12} failed: {e}"),
        }
    }
    Ok(())
}
