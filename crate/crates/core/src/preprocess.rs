//! Expression-matrix preprocessing: upper-quartile normalization, zero
//! replacement, log transform, and selection of the most variable genes.
//!
//! Expression matrices are genes x samples; clustering operates on samples,
//! so [`ExpressionMatrix::into_observations`] transposes.

use ndarray::{Array2, Axis};

use crate::data::DataMatrix;
use crate::error::{Result, ShcError};
use crate::scalar::Scalar;
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix<T> {
    /// Rows are genes, columns are samples.
    pub values: Array2<T>,
    pub gene_ids: Vec<String>,
    pub sample_ids: Vec<String>,
}

impl<T: Scalar> ExpressionMatrix<T> {
    pub fn new(values: Array2<T>, gene_ids: Vec<String>, sample_ids: Vec<String>) -> Result<Self> {
        if values.nrows() != gene_ids.len() || values.ncols() != sample_ids.len() {
            return Err(ShcError::InvalidData(format!(
                "{}x{} values for {} genes and {} samples",
                values.nrows(),
                values.ncols(),
                gene_ids.len(),
                sample_ids.len()
            )));
        }
        // Delegate finiteness and id uniqueness checks.
        DataMatrix::with_labels(values.clone(), Some(gene_ids.clone()), Some(sample_ids.clone()))?;
        Ok(ExpressionMatrix { values, gene_ids, sample_ids })
    }

    pub fn n_genes(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    /// Samples become observations and genes become variables.
    pub fn into_observations(self) -> Result<DataMatrix<T>> {
        let values = self.values.t().to_owned();
        DataMatrix::with_labels(values, Some(self.sample_ids), Some(self.gene_ids))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub uq_normalize: bool,
    pub replace_zeros: bool,
    pub log_transform: bool,
    pub top_genes: Option<usize>,
    /// Select genes on the raw scale instead of after the log transform.
    pub filter_before_log: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            uq_normalize: true,
            replace_zeros: true,
            log_transform: true,
            top_genes: Some(500),
            filter_before_log: false,
        }
    }
}

/// Scales each sample so its upper quartile of nonzero values equals the
/// mean of those upper quartiles across samples.
pub fn uq_normalize<T: Scalar>(expr: &ExpressionMatrix<T>) -> Result<ExpressionMatrix<T>> {
    let uqs = expr
        .values
        .axis_iter(Axis(1))
        .zip(&expr.sample_ids)
        .map(|(col, id)| {
            let nonzero: Vec<T> = col.iter().copied().filter(|v| *v != T::zero()).collect();
            if nonzero.is_empty() {
                return Err(ShcError::DegenerateSample(id.clone()));
            }
            let uq = stats::quantile(&nonzero, 0.75);
            if uq == T::zero() {
                return Err(ShcError::DegenerateSample(id.clone()));
            }
            Ok(uq)
        })
        .collect::<Result<Vec<T>>>()?;
    let target = stats::mean(&uqs);
    let mut values = expr.values.clone();
    for (mut col, uq) in values.axis_iter_mut(Axis(1)).zip(&uqs) {
        let factor = target / *uq;
        col.mapv_inplace(|v| v * factor);
    }
    Ok(ExpressionMatrix { values, ..expr.clone() })
}

/// Replaces zeros with the smallest nonzero value anywhere in the matrix.
pub fn replace_zeros<T: Scalar>(expr: &ExpressionMatrix<T>) -> Result<ExpressionMatrix<T>> {
    let smallest = expr
        .values
        .iter()
        .copied()
        .filter(|v| *v != T::zero())
        .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.min(v))))
        .ok_or_else(|| ShcError::DegenerateData("matrix has no nonzero entries".into()))?;
    let values = expr.values.mapv(|v| if v == T::zero() { smallest } else { v });
    Ok(ExpressionMatrix { values, ..expr.clone() })
}

/// Entrywise base-2 logarithm.
pub fn log_transform<T: Scalar>(expr: &ExpressionMatrix<T>) -> Result<ExpressionMatrix<T>> {
    if let Some(((g, s), v)) = expr.values.indexed_iter().find(|(_, v)| !(**v > T::zero())) {
        return Err(ShcError::InvalidData(format!(
            "cannot take the log of {v} (gene {}, sample {})",
            expr.gene_ids[g], expr.sample_ids[s]
        )));
    }
    Ok(ExpressionMatrix { values: expr.values.mapv(T::log2), ..expr.clone() })
}

/// Keeps the `g` genes with the largest MAD across samples, ties going to the
/// earlier gene. Kept genes stay in input order.
pub fn mad_filter<T: Scalar>(expr: &ExpressionMatrix<T>, g: usize) -> Result<ExpressionMatrix<T>> {
    if g == 0 || g > expr.n_genes() {
        return Err(ShcError::InvalidConfig(format!(
            "cannot keep {g} of {} genes",
            expr.n_genes()
        )));
    }
    let mads: Vec<T> = expr
        .values
        .axis_iter(Axis(0))
        .map(|row| stats::mad(&row.to_vec()))
        .collect();
    let mut order: Vec<usize> = (0..expr.n_genes()).collect();
    // Stable sort keeps input order among equal MADs.
    order.sort_by(|&a, &b| stats::cmp(&mads[b], &mads[a]));
    let mut keep = order[..g].to_vec();
    keep.sort_unstable();
    Ok(ExpressionMatrix {
        values: expr.values.select(Axis(0), &keep),
        gene_ids: keep.iter().map(|&i| expr.gene_ids[i].clone()).collect(),
        sample_ids: expr.sample_ids.clone(),
    })
}

/// Upper-quartile normalization, zero replacement, log transform, then gene
/// selection (or selection before the log when configured), each stage optional.
pub fn preprocess<T: Scalar>(expr: &ExpressionMatrix<T>, config: &PreprocessConfig) -> Result<ExpressionMatrix<T>> {
    if let Some(g) = config.top_genes {
        if g < 2 {
            return Err(ShcError::InvalidConfig("top_genes must be at least 2".into()));
        }
    }
    let mut out = expr.clone();
    if config.uq_normalize {
        out = uq_normalize(&out)?;
    }
    if config.replace_zeros {
        out = replace_zeros(&out)?;
    }
    let filter = |m: &ExpressionMatrix<T>| match config.top_genes {
        Some(g) => mad_filter(m, g),
        None => Ok(m.clone()),
    };
    if config.filter_before_log {
        out = filter(&out)?;
    }
    if config.log_transform {
        out = log_transform(&out)?;
    }
    if !config.filter_before_log {
        out = filter(&out)?;
    }
    Ok(out)
}
