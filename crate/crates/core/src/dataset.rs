//! Labeled embedding matrices and the row/column manipulations every
//! analysis builds on.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Seed};

/// An N×D matrix of embeddings with one dense class label per row.
///
/// Invariants (checked by [`EmbeddingDataset::new`]): N ≥ 1, D ≥ 1, C ≥ 2,
/// every label is below C and every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    name: String,
    embeddings: DMatrix<f64>,
    labels: Vec<usize>,
    class_count: usize,
}

/// One broken dataset invariant, with coordinates where they apply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    NoRows,
    NoColumns,
    TooFewClasses {
        class_count: usize,
    },
    LabelCount {
        rows: usize,
        labels: usize,
    },
    LabelOutOfRange {
        row: usize,
        label: usize,
        class_count: usize,
    },
    NonFinite {
        row: usize,
        col: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NoRows => write!(f, "dataset has no rows"),
            Violation::NoColumns => write!(f, "dataset has no columns"),
            Violation::TooFewClasses { class_count } => {
                write!(f, "class_count {class_count} < 2")
            }
            Violation::LabelCount { rows, labels } => {
                write!(f, "{labels} labels for {rows} rows")
            }
            Violation::LabelOutOfRange {
                row,
                label,
                class_count,
            } => write!(f, "label {label} ≥ class_count {class_count} at row {row}"),
            Violation::NonFinite { row, col } => {
                write!(f, "non-finite value at ({row},{col})")
            }
        }
    }
}

impl EmbeddingDataset {
    /// Builds a dataset, rejecting it with every violated invariant.
    pub fn new(
        name: impl Into<String>,
        embeddings: DMatrix<f64>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        let dataset = Self::new_unchecked(name, embeddings, labels, class_count);
        dataset.validate().map_err(Error::InvalidDataset)?;
        Ok(dataset)
    }

    /// Builds a dataset without checking invariants. Only [`validate`] may
    /// be relied on for such a value.
    ///
    /// [`validate`]: EmbeddingDataset::validate
    pub fn new_unchecked(
        name: impl Into<String>,
        embeddings: DMatrix<f64>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Self {
        Self {
            name: name.into(),
            embeddings,
            labels,
            class_count,
        }
    }

    /// Convenience constructor from row-major data.
    pub fn from_rows(
        name: impl Into<String>,
        rows: &[Vec<f64>],
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::mismatch("rows have differing lengths"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(
            name,
            DMatrix::from_row_slice(rows.len(), d, &flat),
            labels,
            class_count,
        )
    }

    /// Returns every violated invariant, or `Ok` if none.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut violations = Vec::new();
        let (rows, cols) = self.embeddings.shape();
        if rows == 0 {
            violations.push(Violation::NoRows);
        }
        if cols == 0 {
            violations.push(Violation::NoColumns);
        }
        if self.class_count < 2 {
            violations.push(Violation::TooFewClasses {
                class_count: self.class_count,
            });
        }
        if self.labels.len() != rows {
            violations.push(Violation::LabelCount {
                rows,
                labels: self.labels.len(),
            });
        }
        for (row, &label) in self.labels.iter().enumerate() {
            if label >= self.class_count {
                violations.push(Violation::LabelOutOfRange {
                    row,
                    label,
                    class_count: self.class_count,
                });
            }
        }
        for row in 0..rows {
            for col in 0..cols {
                if !self.embeddings[(row, col)].is_finite() {
                    violations.push(Violation::NonFinite { row, col });
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn embeddings(&self) -> &DMatrix<f64> {
        &self.embeddings
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn n_rows(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn into_parts(self) -> (String, DMatrix<f64>, Vec<usize>, usize) {
        (self.name, self.embeddings, self.labels, self.class_count)
    }

    /// Row counts per class, indexed by label.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Row indices grouped by class, each group in ascending order.
    pub fn rows_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.class_count];
        for (row, &l) in self.labels.iter().enumerate() {
            groups[l].push(row);
        }
        groups
    }

    /// The listed rows, in the listed order. Indices must be in range.
    pub fn select_rows(&self, rows: &[usize]) -> EmbeddingDataset {
        let embeddings = self.embeddings.select_rows(rows);
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Self::new_unchecked(self.name.clone(), embeddings, labels, self.class_count)
    }

    /// Restricts the dataset to the given columns, in the given order.
    pub fn select_dims(&self, dims: &[usize]) -> Result<EmbeddingDataset> {
        check_dims(dims, self.n_dims())?;
        Ok(Self::new_unchecked(
            self.name.clone(),
            self.embeddings.select_columns(dims),
            self.labels.clone(),
            self.class_count,
        ))
    }

    /// Same labels, replaced features (e.g. a PCA projection).
    pub fn with_embeddings(&self, embeddings: DMatrix<f64>) -> Result<EmbeddingDataset> {
        if embeddings.nrows() != self.n_rows() {
            return Err(Error::mismatch(format!(
                "replacement has {} rows, dataset has {}",
                embeddings.nrows(),
                self.n_rows()
            )));
        }
        Ok(Self::new_unchecked(
            self.name.clone(),
            embeddings,
            self.labels.clone(),
            self.class_count,
        ))
    }

    /// Draws `n` rows uniformly without replacement, in draw order.
    pub fn subsample(&self, n: usize, seed: Seed) -> Result<EmbeddingDataset> {
        if n == 0 || n > self.n_rows() {
            return Err(Error::invalid(format!(
                "subsample size {n} must be in [1, {}]",
                self.n_rows()
            )));
        }
        let mut rng = seed.rng(rng::STREAM_SUBSAMPLE);
        let rows = index::sample(&mut rng, self.n_rows(), n).into_vec();
        Ok(self.select_rows(&rows))
    }

    /// Per-class holdout: each class contributes
    /// `round(test_fraction × size)` rows to the test part, clamped so both
    /// parts keep at least one row of every class.
    pub fn stratified_split(&self, test_fraction: f64, seed: Seed) -> Result<DatasetSplit> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "test fraction {test_fraction} must lie in (0, 1)"
            )));
        }
        let groups = self.rows_by_class();
        if let Some((class, group)) = groups.iter().enumerate().find(|(_, g)| g.len() < 2) {
            return Err(Error::invalid(format!(
                "class {class} has {} rows; a split needs at least 2",
                group.len()
            )));
        }
        let mut rng = seed.rng(rng::STREAM_SPLIT);
        let mut train_rows = Vec::new();
        let mut test_rows = Vec::new();
        for mut group in groups {
            let size = group.len();
            let n_test = ((test_fraction * size as f64).round() as usize).clamp(1, size - 1);
            group.shuffle(&mut rng);
            test_rows.extend_from_slice(&group[..n_test]);
            train_rows.extend_from_slice(&group[n_test..]);
        }
        train_rows.sort_unstable();
        test_rows.sort_unstable();
        Ok(DatasetSplit {
            train: self
                .select_rows(&train_rows)
                .with_name(format!("{}/train", self.name)),
            test: self
                .select_rows(&test_rows)
                .with_name(format!("{}/test", self.name)),
            seed,
        })
    }
}

/// Row-disjoint train/test partition of one source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: EmbeddingDataset,
    pub test: EmbeddingDataset,
    pub seed: Seed,
}

pub(crate) fn check_dims(dims: &[usize], n_dims: usize) -> Result<()> {
    let mut seen = HashSet::with_capacity(dims.len());
    for &d in dims {
        if d >= n_dims {
            return Err(Error::invalid(format!(
                "column index {d} out of range for {n_dims} columns"
            )));
        }
        if !seen.insert(d) {
            return Err(Error::invalid(format!("duplicate column index {d}")));
        }
    }
    Ok(())
}

/// Checks that two datasets describe the same feature space and task.
pub(crate) fn check_compatible(a: &EmbeddingDataset, b: &EmbeddingDataset) -> Result<()> {
    if a.n_dims() != b.n_dims() {
        return Err(Error::mismatch(format!(
            "{} has {} columns, {} has {}",
            a.name(),
            a.n_dims(),
            b.name(),
            b.n_dims()
        )));
    }
    if a.class_count() != b.class_count() {
        return Err(Error::mismatch(format!(
            "{} has {} classes, {} has {}",
            a.name(),
            a.class_count(),
            b.name(),
            b.class_count()
        )));
    }
    Ok(())
}
