//! KID between clean and perturbed image sets as the magnitude grows.
//!
//! Features come from a fixed random projection of downsampled pixels, so the
//! numbers are only comparable within one projection.

use senseaug::augment::{apply, AugmentationKind, AugmentationSpec};
use senseaug::image::{test_pattern, ImageBuffer};
use senseaug::metrics::{kid, kid_subsampled, FeatureSet, RandomProjection, SubsetOptions};

fn rolled(base: &ImageBuffer, shift: usize) -> ImageBuffer {
    let w = base.width();
    ImageBuffer::from_fn(w, base.height(), |x, y| base.pixel((x + shift) % w, y)).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = test_pattern(48, 48);
    let images: Vec<ImageBuffer> = (0..12).map(|i| rolled(&base, i * 4)).collect();
    let proj = RandomProjection::new(8, 16, 0);
    let features = |imgs: &[ImageBuffer]| {
        FeatureSet::new(imgs.iter().map(|i| proj.extract(i)).collect(), "set")
    };
    let clean = features(&images)?;

    println!(
        "{:<12} {:>6} {:>12} {:>12}",
        "kind", "alpha", "kid", "kid (5x6)"
    );
    for kind in [
        AugmentationKind::Blur,
        AugmentationKind::Noise,
        AugmentationKind::VDarker,
        AugmentationKind::RotatePos,
    ] {
        for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let perturbed: Vec<ImageBuffer> = images
                .iter()
                .enumerate()
                .map(|(i, img)| {
                    apply(
                        &AugmentationSpec::new(kind, alpha)?.with_seed(i as u64),
                        img,
                    )
                })
                .collect::<Result<_, _>>()?;
            let p = features(&perturbed)?;
            let full = kid(&p, &clean)?;
            let sub = kid_subsampled(
                &p,
                &clean,
                SubsetOptions {
                    subset_size: 6,
                    subsets: 5,
                    seed: 1,
                },
            )?;
            println!(
                "{:<12} {alpha:>6.2} {full:>12.6} {sub:>12.6}",
                kind.to_string()
            );
        }
    }
    Ok(())
}
