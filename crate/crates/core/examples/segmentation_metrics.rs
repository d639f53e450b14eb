//! aAcc, mAcc and mIoU for a pair of small label maps, with an ignore label.

use senseaug::metrics::{seg_metrics, ConfusionMatrix, SegSample};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    #[rustfmt::skip]
    let truth = vec![
        0, 0, 1, 1,
        0, 0, 1, 1,
        2, 2, 255, 1,
        2, 2, 2, 255,
    ];
    #[rustfmt::skip]
    let prediction = vec![
        0, 1, 1, 1,
        0, 0, 1, 2,
        2, 2, 0, 1,
        2, 0, 2, 2,
    ];
    let sample = SegSample {
        height: 4,
        width: 4,
        prediction,
        ground_truth: truth,
        num_classes: 3,
        ignore_label: Some(255),
    };

    let mut cm = ConfusionMatrix::new(3);
    cm.accumulate(&sample)?;
    for t in 0..3 {
        let row: Vec<u64> = (0..3).map(|p| cm.get(t, p)).collect();
        println!("truth {t}: {row:?}");
    }
    println!("{}", seg_metrics(&[sample])?.to_json());
    Ok(())
}
