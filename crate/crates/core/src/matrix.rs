use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`, used for sample batches.
///
/// Rows are observations, columns are variables. The layout is a single
/// contiguous buffer so row access is a cheap slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if cols == 0 {
            return Err(Error::InvalidArgument(
                "matrix must have at least one column".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "matrix buffer has {} values, expected {} ({} rows x {} cols)",
                data.len(),
                rows * cols,
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from per-variable columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Matrix> {
        if columns.is_empty() {
            return Err(Error::InvalidArgument(
                "matrix must have at least one column".into(),
            ));
        }
        let rows = columns[0].len();
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::InvalidArgument(format!(
                    "column {} has {} values, expected {}",
                    j,
                    c.len(),
                    rows
                )));
            }
        }
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for c in columns {
                data.push(c[i]);
            }
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_column(values: Vec<f64>) -> Matrix {
        Matrix {
            rows: values.len(),
            cols: 1,
            data: values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Index of the first row containing a non-finite value, if any.
    pub fn first_non_finite_row(&self) -> Option<usize> {
        self.iter_rows()
            .position(|r| r.iter().any(|v| !v.is_finite()))
    }
}
