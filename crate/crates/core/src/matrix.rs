//! Dense column-major feature storage shared by every learner.

use std::ops::Range;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeError {
    #[error("row {row} has {found} features, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("feature matrix has no columns")]
    NoFeatures,
}

/// Rows × features, stored one column per feature so split scans touch
/// contiguous memory.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    n_rows: usize,
    columns: Vec<Vec<T>>,
    names: Vec<String>,
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("x{j}")).collect()
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self, ShapeError> {
        let n_features = rows.first().map_or(0, |r| r.as_ref().len());
        if n_features == 0 && !rows.is_empty() {
            return Err(ShapeError::NoFeatures);
        }
        let mut columns = vec![Vec::with_capacity(rows.len()); n_features];
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_features {
                return Err(ShapeError::RaggedRow {
                    row: i,
                    expected: n_features,
                    found: row.len(),
                });
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Ok(Self {
            n_rows: rows.len(),
            names: default_names(columns.len()),
            columns,
        })
    }

    pub fn from_columns(columns: Vec<Vec<T>>) -> Result<Self, ShapeError> {
        let n_rows = columns.first().map(Vec::len).ok_or(ShapeError::NoFeatures)?;
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n_rows {
                return Err(ShapeError::RaggedRow {
                    row: j,
                    expected: n_rows,
                    found: c.len(),
                });
            }
        }
        Ok(Self {
            n_rows,
            names: default_names(columns.len()),
            columns,
        })
    }

    /// Replaces the generated `x0, x1, …` column names.
    pub fn with_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.columns.len(), "one name per feature");
        self.names = names;
        self
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn column(&self, feature: usize) -> &[T] {
        &self.columns[feature]
    }

    #[inline]
    pub fn get(&self, row: usize, feature: usize) -> T {
        self.columns[feature][row]
    }

    pub fn row(&self, row: usize) -> Vec<T> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    /// Contiguous block of rows, e.g. a training window.
    pub fn slice_rows(&self, range: Range<usize>) -> Self {
        Self {
            n_rows: range.len(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
            names: self.names.clone(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            n_rows: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            names: self.names.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_columns_agree() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(m.n_rows(), 3);
        assert_eq!(m.n_features(), 2);
        assert_eq!(m.column(1), &[2.0, 4.0, 6.0]);
        assert_eq!(m.row(2), vec![5.0, 6.0]);
        assert_eq!(m.slice_rows(1..3).column(0), &[3.0, 5.0]);
        assert_eq!(m.select_rows(&[2, 0]).column(0), &[5.0, 1.0]);
        assert_eq!(m.names(), &["x0".to_string(), "x1".to_string()]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert_eq!(
            err,
            ShapeError::RaggedRow {
                row: 1,
                expected: 2,
                found: 1
            }
        );
    }
}
