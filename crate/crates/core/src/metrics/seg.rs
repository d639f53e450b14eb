use serde::{Deserialize, Serialize};

use super::MetricsError;

/// One predicted/ground-truth label raster pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SegSample {
    pub height: usize,
    pub width: usize,
    pub prediction: Vec<u32>,
    pub ground_truth: Vec<u32>,
    pub num_classes: usize,
    /// Ground-truth pixels with this label are excluded from every count.
    pub ignore_label: Option<u32>,
}

/// Pixel accuracy, class-mean accuracy and class-mean IoU.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    #[serde(rename = "aAcc")]
    pub a_acc: f64,
    #[serde(rename = "mAcc")]
    pub m_acc: f64,
    #[serde(rename = "mIoU")]
    pub m_iou: f64,
}

impl SegMetrics {
    /// `{"aAcc": ..., "mAcc": ..., "mIoU": ...}` with six decimals.
    pub fn to_json(&self) -> String {
        format!(
            "{{\"aAcc\": {:.6}, \"mAcc\": {:.6}, \"mIoU\": {:.6}}}",
            self.a_acc, self.m_acc, self.m_iou
        )
    }
}

/// Rows are ground truth, columns are predictions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.num_classes + predicted]
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.num_classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.num_classes).map(|t| self.get(t, predicted)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn accumulate(&mut self, sample: &SegSample) -> Result<(), MetricsError> {
        let n = sample.height * sample.width;
        if sample.prediction.len() != n || sample.ground_truth.len() != n {
            return Err(MetricsError::Segmentation(format!(
                "raster lengths {} / {} do not match {}x{}",
                sample.prediction.len(),
                sample.ground_truth.len(),
                sample.height,
                sample.width
            )));
        }
        if sample.num_classes != self.num_classes {
            return Err(MetricsError::Segmentation(format!(
                "sample has {} classes, expected {}",
                sample.num_classes, self.num_classes
            )));
        }
        for (&p, &t) in sample.prediction.iter().zip(&sample.ground_truth) {
            if Some(t) == sample.ignore_label {
                continue;
            }
            let (p, t) = (p as usize, t as usize);
            if t >= self.num_classes || p >= self.num_classes {
                return Err(MetricsError::Segmentation(format!(
                    "label out of range: truth {t}, prediction {p}, {} classes",
                    self.num_classes
                )));
            }
            self.counts[t * self.num_classes + p] += 1;
        }
        Ok(())
    }

    /// Metrics with class means taken over classes present in the ground truth.
    pub fn metrics(&self) -> Result<SegMetrics, MetricsError> {
        let total = self.total();
        if total == 0 {
            return Err(MetricsError::Segmentation("no countable pixels".into()));
        }
        let diag: u64 = (0..self.num_classes).map(|c| self.get(c, c)).sum();
        let mut accs = Vec::new();
        let mut ious = Vec::new();
        for c in 0..self.num_classes {
            let row = self.row_sum(c);
            if row == 0 {
                continue;
            }
            let tp = self.get(c, c);
            accs.push(tp as f64 / row as f64);
            ious.push(tp as f64 / (row + self.col_sum(c) - tp) as f64);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Ok(SegMetrics {
            a_acc: diag as f64 / total as f64,
            m_acc: mean(&accs),
            m_iou: mean(&ious),
        })
    }
}

/// Accumulates one confusion matrix over all samples and reduces it.
pub fn seg_metrics(samples: &[SegSample]) -> Result<SegMetrics, MetricsError> {
    let first = samples
        .first()
        .ok_or_else(|| MetricsError::Segmentation("no samples".into()))?;
    let mut cm = ConfusionMatrix::new(first.num_classes);
    for s in samples {
        cm.accumulate(s)?;
    }
    cm.metrics()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(pred: Vec<u32>, gt: Vec<u32>, classes: usize) -> SegSample {
        SegSample {
            height: 1,
            width: pred.len(),
            prediction: pred,
            ground_truth: gt,
            num_classes: classes,
            ignore_label: None,
        }
    }

    #[test]
    fn perfect_prediction() {
        let m = seg_metrics(&[sample(vec![0, 1, 2, 1], vec![0, 1, 2, 1], 3)]).unwrap();
        assert_eq!((m.a_acc, m.m_acc, m.m_iou), (1.0, 1.0, 1.0));
    }

    #[test]
    fn complement_prediction() {
        let m = seg_metrics(&[sample(vec![1, 1, 0, 0], vec![0, 0, 1, 1], 2)]).unwrap();
        assert_eq!((m.a_acc, m.m_acc, m.m_iou), (0.0, 0.0, 0.0));
    }

    #[test]
    fn two_by_two_hand_count() {
        let s = SegSample {
            height: 2,
            width: 2,
            prediction: vec![0, 1, 1, 1],
            ground_truth: vec![0, 0, 1, 1],
            num_classes: 2,
            ignore_label: None,
        };
        let m = seg_metrics(&[s]).unwrap();
        assert!((m.a_acc - 0.75).abs() < 1e-15);
        // IoU0 = 1/(2+1-1) = 1/2, IoU1 = 2/(2+3-2) = 2/3
        assert!((m.m_iou - (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((m.m_acc - 0.75).abs() < 1e-15);
        assert_eq!(
            m.to_json(),
            r#"{"aAcc": 0.750000, "mAcc": 0.750000, "mIoU": 0.583333}"#
        );
    }

    #[test]
    fn ignore_label_and_absent_classes() {
        let mut s = sample(vec![0, 2, 1, 1], vec![0, 255, 1, 0], 4);
        s.ignore_label = Some(255);
        let m = seg_metrics(&[s]).unwrap();
        // counted pixels: (0,0) (1,1) (0,1); classes 2,3 absent from truth
        assert!((m.a_acc - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.m_acc - (0.5 + 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(seg_metrics(&[]).is_err());
        let mut bad = sample(vec![0, 1], vec![0, 1], 2);
        bad.width = 3;
        assert!(seg_metrics(&[bad]).is_err());
        assert!(seg_metrics(&[sample(vec![0, 5], vec![0, 1], 2)]).is_err());
        let mut all_ignored = sample(vec![0], vec![9], 2);
        all_ignored.ignore_label = Some(9);
        assert!(seg_metrics(&[all_ignored]).is_err());
    }

    fn rasters() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
        (1usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec(0u32..4, n),
                prop::collection::vec(0u32..4, n),
            )
        })
    }

    proptest! {
        #[test]
        fn row_sums_and_iou_bound((pred, gt) in rasters()) {
            let s = sample(pred, gt.clone(), 4);
            let mut cm = ConfusionMatrix::new(4);
            cm.accumulate(&s).unwrap();
            for c in 0..4 {
                prop_assert_eq!(cm.row_sum(c), gt.iter().filter(|&&g| g as usize == c).count() as u64);
            }
            let m = cm.metrics().unwrap();
            prop_assert!(m.m_iou <= m.m_acc + 1e-15);
        }
    }
}
