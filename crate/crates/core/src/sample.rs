use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::Class;

/// Feature rows with optional class labels. A `None` label is a missing label
/// (`m_j = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSample {
    dim: usize,
    /// Row-major `n x p` features.
    features: Vec<f64>,
    labels: Vec<Option<Class>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleCounts {
    pub n: usize,
    pub n_classified: usize,
    pub n_unclassified: usize,
    pub n1_classified: usize,
    pub n2_classified: usize,
}

impl PartialSample {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<Option<Class>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("feature dimension is zero".into()));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * labels.len(),
                found: features.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature in row {} column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            dim,
            features,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Option<Class>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::new(dim, rows.concat(), labels)
    }

    pub fn from_matrix(features: &DMatrix<f64>, labels: Vec<Option<Class>>) -> Result<Self> {
        let dim = features.ncols();
        let mut flat = Vec::with_capacity(features.len());
        for row in features.row_iter() {
            flat.extend(row.iter());
        }
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        Self::new(dim, flat, labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.features[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    pub fn label(&self, j: usize) -> Option<Class> {
        self.labels[j]
    }

    pub fn labels(&self) -> &[Option<Class>] {
        &self.labels
    }

    /// Missing-label indicator `m_j`.
    pub fn is_missing(&self, j: usize) -> bool {
        self.labels[j].is_none()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn features_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.features)
    }

    pub fn counts(&self) -> SampleCounts {
        let mut c = SampleCounts {
            n: self.len(),
            n_classified: 0,
            n_unclassified: 0,
            n1_classified: 0,
            n2_classified: 0,
        };
        for l in &self.labels {
            match l {
                Some(Class::Class1) => c.n1_classified += 1,
                Some(Class::Class2) => c.n2_classified += 1,
                None => c.n_unclassified += 1,
            }
        }
        c.n_classified = c.n1_classified + c.n2_classified;
        c
    }

    /// The labeled rows only.
    pub fn classified_subsample(&self) -> Self {
        self.filter(|l| l.is_some())
    }

    /// The same features with the given labels.
    pub fn with_labels(&self, labels: Vec<Option<Class>>) -> Result<Self> {
        Self::new(self.dim, self.features.clone(), labels)
    }

    /// The same features with every label hidden.
    pub fn unlabeled(&self) -> Self {
        Self {
            dim: self.dim,
            features: self.features.clone(),
            labels: vec![None; self.len()],
        }
    }

    fn filter(&self, keep: impl Fn(&Option<Class>) -> bool) -> Self {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (row, l) in self.rows().zip(&self.labels) {
            if keep(l) {
                features.extend_from_slice(row);
                labels.push(*l);
            }
        }
        Self {
            dim: self.dim,
            features,
            labels,
        }
    }

    /// Rows reordered by `perm` (row `j` of the result is row `perm[j]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut features = Vec::with_capacity(self.features.len());
        let mut labels = Vec::with_capacity(self.len());
        for &j in perm {
            features.extend_from_slice(self.row(j));
            labels.push(self.labels[j]);
        }
        Self {
            dim: self.dim,
            features,
            labels,
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Self {
            dim: self.dim,
            features,
            labels,
        })
    }
}
