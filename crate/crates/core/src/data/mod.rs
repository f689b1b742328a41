//! Labeled datasets, their on-disk formats, and the member/non-member split
//! plan that defines a membership-inference experiment.

mod blobs;
mod csv_io;
mod idx;
mod split;

use std::path::PathBuf;

use crate::numerics::{Matrix, NumericsError};

pub use blobs::{make_blobs, BlobSpec};
pub use csv_io::{read_csv, write_csv};
pub use idx::{
    encode_idx_images, encode_idx_labels, load_mnist_idx, parse_idx_images, parse_idx_labels,
    write_mnist_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use split::{make_split, sample_indices, SplitPlan, SplitSizes};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("insufficient data: {what} requires {required} examples, {available} available")]
    Sizing {
        what: String,
        required: usize,
        available: usize,
    },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Features in `[0, 1]` with integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
    name: String,
}

impl Dataset {
    /// Validates that every label is in range, every class occurs and all
    /// features are finite.
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        name: impl Into<String>,
    ) -> Result<Self, DataError> {
        if features.rows() != labels.len() {
            return Err(DataError::Invalid(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(DataError::Invalid("num_classes must be positive".into()));
        }
        let mut seen = vec![false; num_classes];
        for (i, &y) in labels.iter().enumerate() {
            if y >= num_classes {
                return Err(DataError::Invalid(format!(
                    "label {y} at row {i} outside 0..{num_classes}"
                )));
            }
            seen[y] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(DataError::Invalid(format!(
                "class {missing} has no examples"
            )));
        }
        if !features.is_finite() {
            return Err(DataError::Invalid("non-finite feature value".into()));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
            name: name.into(),
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Features and labels of the listed rows.
    pub fn select(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        (
            self.features.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Appends `other` (same dimension and class count) after `self`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset, DataError> {
        if self.dim() != other.dim() || self.num_classes != other.num_classes {
            return Err(DataError::Invalid(format!(
                "cannot concatenate {} (d={}, C={}) with {} (d={}, C={})",
                self.name,
                self.dim(),
                self.num_classes,
                other.name,
                other.dim(),
                other.num_classes
            )));
        }
        let mut values = self.features.as_slice().to_vec();
        values.extend_from_slice(other.features.as_slice());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let features = Matrix::from_vec(labels.len(), self.dim(), values)?;
        Dataset::new(features, labels, self.num_classes, self.name.clone())
    }
}
