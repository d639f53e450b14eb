//! Image-degradation divergence (KID) and segmentation accuracy metrics.

mod features;
mod kid;
mod seg;

use std::path::Path;

use thiserror::Error;

pub use features::{FeatureExtractor, FeatureTable, RandomProjection};
pub use kid::{
    delta_kid_normalized, delta_ma, kid, kid_subsampled, mmd2_unbiased, polynomial_kernel,
    SubsetOptions,
};
pub use seg::{seg_metrics, ConfusionMatrix, SegMetrics, SegSample};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("feature dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("feature set {tag:?} has {count} vectors; at least 2 are required")]
    TooFewVectors { tag: String, count: usize },
    #[error("feature vector {index} is empty, ragged or non-finite")]
    BadVector { index: usize },
    #[error(
        "reference KID {0} is not positive: the augmentation causes no measurable degradation"
    )]
    NonDegrading(f64),
    #[error("accuracy {0} outside [0, 1]")]
    AccuracyOutOfRange(f64),
    #[error("invalid subset options: {0}")]
    InvalidSubsets(String),
    #[error("no features stored for image id {0:?}")]
    MissingKey(String),
    #[error("segmentation input: {0}")]
    Segmentation(String),
    #[error("feature file {path}: {message}")]
    FeatureFile { path: String, message: String },
}

/// A set of equal-length, finite feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub vectors: Vec<Vec<f64>>,
    pub source_tag: String,
}

impl FeatureSet {
    pub fn new(
        vectors: Vec<Vec<f64>>,
        source_tag: impl Into<String>,
    ) -> Result<Self, MetricsError> {
        let dim = vectors.first().map(Vec::len).unwrap_or(0);
        for (index, v) in vectors.iter().enumerate() {
            if v.is_empty() || v.len() != dim || v.iter().any(|x| !x.is_finite()) {
                return Err(MetricsError::BadVector { index });
            }
        }
        Ok(Self {
            vectors,
            source_tag: source_tag.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map(Vec::len).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Loads a feature CSV (`id,f0,...,f{d-1}` header, one row per image).
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        let table = FeatureTable::from_csv(path)?;
        let tag = path.display().to_string();
        Self::new(table.into_rows().into_iter().map(|(_, v)| v).collect(), tag)
    }
}
