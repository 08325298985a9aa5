//! Sparse dataset with labels folded into the design matrix, plus the
//! regularization parameters and synthetic data generator.
//!
//! The signed matrix `xbar` holds `y_i * x_i` as column `i`. It is stored
//! twice: compressed by feature (rows, consumed by feature screening and
//! primal recovery) and compressed by sample (columns, consumed by sample
//! screening and the coordinate solver).

mod libsvm;
mod sparse;
mod synth;

pub use libsvm::{load_libsvm, parse_libsvm, serialize_libsvm, write_libsvm};
pub use sparse::{CompressedMatrix, Restricted, SparseView};
pub use synth::{generate_synthetic, SynthSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SifsError};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    labels: Vec<f64>,
    by_feature: CompressedMatrix,
    by_sample: CompressedMatrix,
    sample_sq: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from signed sample columns (`xbar_i = y_i * x_i`).
    ///
    /// Each column must list strictly increasing feature indices below `p`.
    pub fn from_signed_columns(
        p: usize,
        labels: Vec<f64>,
        columns: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        if labels.len() != columns.len() {
            return Err(SifsError::DimensionMismatch { expected: labels.len(), got: columns.len() });
        }
        if labels.is_empty() {
            return Err(SifsError::EmptyInput);
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(SifsError::Domain(format!("label {bad} is not -1 or +1")));
        }
        for col in &columns {
            if col.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(SifsError::Domain("column indices not strictly increasing".into()));
            }
            if let Some(&(j, _)) = col.last() {
                if j >= p {
                    return Err(SifsError::IndexOutOfRange { index: j, len: p });
                }
            }
            if col.iter().any(|(_, v)| !v.is_finite()) {
                return Err(SifsError::Domain("non-finite value".into()));
            }
        }
        let by_sample = CompressedMatrix::from_slots(p, columns);
        let by_feature = by_sample.transpose();
        let sample_sq = (0..by_sample.major_len())
            .map(|i| by_sample.slot(i).iter().fold(0.0, |a, (_, v)| a + v * v))
            .collect();
        Ok(Self { labels, by_feature, by_sample, sample_sq })
    }

    /// `||xbar_i||^2` for every sample, summed in feature order.
    pub fn sample_norms_sq(&self) -> &[f64] {
        &self.sample_sq
    }

    /// Builds from a dense signed matrix given as `p` rows of length `n`.
    pub fn from_signed_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        let mut columns = vec![Vec::new(); n];
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(SifsError::DimensionMismatch { expected: n, got: row.len() });
            }
            for (i, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    columns[i].push((j, v));
                }
            }
        }
        Self::from_signed_columns(rows.len(), labels, columns)
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Number of features.
    pub fn p(&self) -> usize {
        self.by_feature.major_len()
    }

    pub fn nnz(&self) -> usize {
        self.by_sample.nnz()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Row `j` of the signed matrix (feature `j` over samples).
    #[inline]
    pub fn row(&self, j: usize) -> SparseView<'_> {
        self.by_feature.slot(j)
    }

    /// Column `i` of the signed matrix (sample `i` over features).
    #[inline]
    pub fn col(&self, i: usize) -> SparseView<'_> {
        self.by_sample.slot(i)
    }

    pub fn row_view(&self, j: usize) -> Result<SparseView<'_>> {
        self.by_feature.slot_checked(j)
    }

    pub fn col_view(&self, i: usize) -> Result<SparseView<'_>> {
        self.by_sample.slot_checked(i)
    }

    pub fn by_feature(&self) -> &CompressedMatrix {
        &self.by_feature
    }

    pub fn by_sample(&self) -> &CompressedMatrix {
        &self.by_sample
    }

    /// `xbar * theta` (length p).
    pub fn mul(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.p()).map(|j| self.row(j).dot_dense(theta)).collect()
    }

    /// `xbar^T * w` (length n): the signed margins `<xbar_i, w>`.
    pub fn mul_t(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.col(i).dot_dense(w)).collect()
    }

    /// Checks the structural invariants of both orientations.
    pub fn is_consistent(&self) -> bool {
        self.by_feature.check_structure()
            && self.by_sample.check_structure()
            && self.by_sample.transpose() == self.by_feature
    }
}

/// Regularization pair and loss smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Params {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let prm = Self { alpha, beta, gamma };
        prm.validate()?;
        Ok(prm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(SifsError::InvalidParam(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(SifsError::InvalidParam(format!("beta must be positive, got {}", self.beta)));
        }
        validate_gamma(self.gamma)
    }
}

pub(crate) fn validate_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(SifsError::InvalidParam(format!("gamma must lie in (0, 1), got {gamma}")))
    }
}
