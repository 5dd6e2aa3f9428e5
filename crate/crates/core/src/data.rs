use std::collections::HashSet;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Result, ShcError};
use crate::scalar::Scalar;

/// N observations (rows) by p variables (columns), all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<T> {
    values: Array2<T>,
    row_labels: Option<Vec<String>>,
    col_labels: Option<Vec<String>>,
}

impl<T: Scalar> DataMatrix<T> {
    pub fn new(values: Array2<T>) -> Result<Self> {
        Self::with_labels(values, None, None)
    }

    pub fn with_labels(
        values: Array2<T>,
        row_labels: Option<Vec<String>>,
        col_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n, p) = values.dim();
        if n == 0 || p == 0 {
            return Err(ShcError::InvalidData(format!("empty matrix ({n}x{p})")));
        }
        if let Some((idx, _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(ShcError::InvalidData(format!(
                "non-finite value at row {}, column {}",
                idx.0, idx.1
            )));
        }
        if let Some(labels) = &row_labels {
            check_labels(labels, n, "row")?;
        }
        if let Some(labels) = &col_labels {
            check_labels(labels, p, "column")?;
        }
        Ok(DataMatrix {
            values,
            row_labels,
            col_labels,
        })
    }

    /// Builds from row vectors; all rows must share one length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(ShcError::InvalidData("rows have unequal lengths".into()));
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, p), flat)
            .map_err(|e| ShcError::InvalidData(e.to_string()))?;
        Self::new(values)
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.values.row(i)
    }

    pub fn row_labels(&self) -> Option<&[String]> {
        self.row_labels.as_deref()
    }

    pub fn col_labels(&self) -> Option<&[String]> {
        self.col_labels.as_deref()
    }

    /// Rows `idx` in the given order; labels follow their rows.
    pub fn select_rows(&self, idx: &[usize]) -> DataMatrix<T> {
        let values = self.values.select(Axis(0), idx);
        let row_labels = self
            .row_labels
            .as_ref()
            .map(|l| idx.iter().map(|&i| l[i].clone()).collect());
        DataMatrix {
            values,
            row_labels,
            col_labels: self.col_labels.clone(),
        }
    }

    /// Copy of the values with each column's mean subtracted.
    pub fn column_centered(&self) -> Array2<T> {
        let n = T::of_usize(self.n_obs());
        let means = self.values.sum_axis(Axis(0)).mapv(|s| s / n);
        &self.values - &means
    }

    pub fn cast<U: Scalar>(&self) -> DataMatrix<U> {
        DataMatrix {
            values: self.values.mapv(|v| U::of(v.f64())),
            row_labels: self.row_labels.clone(),
            col_labels: self.col_labels.clone(),
        }
    }
}

fn check_labels(labels: &[String], expected: usize, what: &str) -> Result<()> {
    if labels.len() != expected {
        return Err(ShcError::InvalidData(format!(
            "{} {what} labels for {expected} {what}s",
            labels.len()
        )));
    }
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(ShcError::InvalidData(format!(
                "duplicate {what} label {l:?}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_non_finite() {
        let err = DataMatrix::new(array![[1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, ShcError::InvalidData(_)));
        assert!(DataMatrix::new(array![[f64::INFINITY]]).is_err());
    }

    #[test]
    fn rejects_duplicate_row_labels() {
        let labels = Some(vec!["a".to_string(), "a".to_string()]);
        let err = DataMatrix::with_labels(array![[1.0], [2.0]], labels, None).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn select_rows_carries_labels() {
        let labels = Some(vec!["a".into(), "b".into(), "c".into()]);
        let d = DataMatrix::with_labels(array![[1.0], [2.0], [3.0]], labels, None).unwrap();
        let s = d.select_rows(&[2, 0]);
        assert_eq!(s.values(), &array![[3.0], [1.0]]);
        assert_eq!(s.row_labels().unwrap(), &["c".to_string(), "a".to_string()]);
    }

    #[test]
    fn centering_zeroes_column_means() {
        let d = DataMatrix::new(array![[1.0, 10.0], [3.0, 20.0]]).unwrap();
        assert_eq!(d.column_centered(), array![[-1.0, -5.0], [1.0, 5.0]]);
    }
}
