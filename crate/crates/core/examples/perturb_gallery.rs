//! Writes every basis perturbation of a test pattern at a few magnitudes.
//!
//! cargo run --example perturb_gallery -- [out_dir]

use senseaug::augment::{apply, AugmentationKind, AugmentationSpec};
use senseaug::image::test_pattern;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("senseaug_gallery"));
    std::fs::create_dir_all(&out)?;

    let img = test_pattern(96, 64);
    img.save(out.join("clean.png"))?;
    for kind in AugmentationKind::ALL {
        for alpha in [0.25, 0.5, 1.0] {
            let spec = AugmentationSpec::new(kind, alpha)?.with_seed(7);
            let params = spec.kernel_params(img.width(), img.height())?;
            let perturbed = apply(&spec, &img)?;
            perturbed.save(out.join(format!("{kind}_{alpha:.2}.png")))?;
            if alpha == 1.0 {
                println!("{kind:<16} {}", serde_json::to_string(&params)?);
            }
        }
    }
    println!(
        "wrote {} images to {}",
        1 + 3 * AugmentationKind::ALL.len(),
        out.display()
    );
    Ok(())
}
