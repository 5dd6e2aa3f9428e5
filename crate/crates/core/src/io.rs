//! Delimited text matrices. The delimiter follows the extension: `.tsv`,
//! `.tab`, and `.txt` are tab-separated, anything else comma-separated.

use std::collections::HashSet;
use std::path::Path;

use ndarray::Array2;

use crate::data::DataMatrix;
use crate::error::{Result, ShcError};
use crate::preprocess::ExpressionMatrix;
use crate::scalar::Scalar;

/// How rows of a file map onto the clustering problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Each row is one observation.
    Observations,
    /// Genes x samples with ids in the first row and column; samples are clustered.
    Genes,
}

impl std::str::FromStr for Orientation {
    type Err = ShcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observations" => Ok(Orientation::Observations),
            "genes" => Ok(Orientation::Genes),
            other => Err(ShcError::InvalidConfig(format!("unknown orientation {other:?}"))),
        }
    }
}

pub fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("tsv" | "tab" | "txt") => b'\t',
        _ => b',',
    }
}

struct Records {
    path: String,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_records(path: &Path) -> Result<Records> {
    let file = std::fs::File::open(path).map_err(|e| ShcError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_for(path))
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let name = path.display().to_string();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| ShcError::Parse {
            path: name.clone(),
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(ShcError::Parse { path: name, line: 1, msg: "file has no rows".into() });
    }
    Ok(Records { path: name, rows })
}

impl Records {
    fn err(&self, line: usize, msg: String) -> ShcError {
        ShcError::Parse { path: self.path.clone(), line, msg }
    }

    fn number<T: Scalar>(&self, line: usize, col: usize, cell: &str) -> Result<T> {
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(T::of(v)),
            _ => Err(self.err(line, format!("non-numeric cell {cell:?} in column {}", col + 1))),
        }
    }

    fn check_width(&self, line: usize, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(self.err(line, format!("expected {want} fields, found {got}")));
        }
        Ok(())
    }

    fn unique(&self, ids: &[String], line_of: impl Fn(usize) -> usize, what: &str) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(self.err(line_of(i), format!("duplicate {what} id {id:?}")));
            }
        }
        Ok(())
    }
}

fn is_number(s: &str) -> bool {
    s.parse::<f64>().is_ok_and(f64::is_finite)
}

/// Genes x samples: first row holds sample ids (after a corner cell), first
/// column holds gene ids.
pub fn read_expression<T: Scalar>(path: impl AsRef<Path>) -> Result<ExpressionMatrix<T>> {
    let recs = read_records(path.as_ref())?;
    let (header_line, header) = &recs.rows[0];
    if header.len() < 2 {
        return Err(recs.err(*header_line, "header needs a corner cell and at least one sample id".into()));
    }
    let sample_ids: Vec<String> = header[1..].to_vec();
    recs.unique(&sample_ids, |_| *header_line, "sample")?;
    let width = header.len();
    let mut gene_ids = Vec::new();
    let mut values = Vec::new();
    for (line, row) in &recs.rows[1..] {
        recs.check_width(*line, row.len(), width)?;
        gene_ids.push(row[0].clone());
        for (j, cell) in row.iter().enumerate().skip(1) {
            values.push(recs.number::<T>(*line, j, cell)?);
        }
    }
    if gene_ids.is_empty() {
        return Err(recs.err(*header_line, "no gene rows".into()));
    }
    recs.unique(&gene_ids, |i| recs.rows[i + 1].0, "gene")?;
    let values = Array2::from_shape_vec((gene_ids.len(), sample_ids.len()), values).expect("widths checked");
    ExpressionMatrix::new(values, gene_ids, sample_ids)
}

/// Observations x variables. A header row is recognized when any of its
/// cells is non-numeric; row labels when a data row starts with one.
pub fn read_observations<T: Scalar>(path: impl AsRef<Path>) -> Result<DataMatrix<T>> {
    let recs = read_records(path.as_ref())?;
    let first = &recs.rows[0].1;
    let has_header = first.iter().skip(1).any(|c| !is_number(c)) || (first.len() == 1 && !is_number(&first[0]));
    let body = if has_header { &recs.rows[1..] } else { &recs.rows[..] };
    let Some((first_line, first_row)) = body.first() else {
        return Err(recs.err(recs.rows[0].0, "no data rows".into()));
    };
    let has_row_labels = first_row.len() > 1 && !is_number(&first_row[0]);
    let width = first_row.len();
    let offset = usize::from(has_row_labels);
    if width <= offset {
        return Err(recs.err(*first_line, "row has no numeric fields".into()));
    }

    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (line, row) in body {
        recs.check_width(*line, row.len(), width)?;
        if has_row_labels {
            labels.push(row[0].clone());
        }
        for (j, cell) in row.iter().enumerate().skip(offset) {
            values.push(recs.number::<T>(*line, j, cell)?);
        }
    }
    let col_labels = if has_header {
        let (line, header) = &recs.rows[0];
        recs.check_width(*line, header.len(), width)?;
        let cols = header[offset..].to_vec();
        recs.unique(&cols, |_| *line, "column")?;
        Some(cols)
    } else {
        None
    };
    let row_labels = if has_row_labels {
        let base = usize::from(has_header);
        recs.unique(&labels, |i| recs.rows[i + base].0, "row")?;
        Some(labels)
    } else {
        None
    };
    let values = Array2::from_shape_vec((body.len(), width - offset), values).expect("widths checked");
    DataMatrix::with_labels(values, row_labels, col_labels)
}

/// Reads a matrix as observations, transposing gene-oriented files.
pub fn read_matrix<T: Scalar>(path: impl AsRef<Path>, orientation: Orientation) -> Result<DataMatrix<T>> {
    match orientation {
        Orientation::Observations => read_observations(path),
        Orientation::Genes => read_expression(path)?.into_observations(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| ShcError::io(path, e))?;
    Ok(csv::WriterBuilder::new().delimiter(delimiter_for(path)).from_writer(file))
}

fn write_err(path: &Path, e: csv::Error) -> ShcError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ShcError::io(path, io),
        other => ShcError::InvalidData(format!("{other:?}")),
    }
}

pub fn write_expression<T: Scalar>(path: impl AsRef<Path>, expr: &ExpressionMatrix<T>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut header = vec!["gene".to_string()];
    header.extend(expr.sample_ids.iter().cloned());
    w.write_record(&header).map_err(|e| write_err(path, e))?;
    for (id, row) in expr.gene_ids.iter().zip(expr.values.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| ShcError::io(path, e))
}

pub fn write_observations<T: Scalar>(path: impl AsRef<Path>, data: &DataMatrix<T>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let row_labels = data.row_labels();
    if let Some(cols) = data.col_labels() {
        let mut header: Vec<String> = row_labels.map(|_| "id".to_string()).into_iter().collect();
        header.extend(cols.iter().cloned());
        w.write_record(&header).map_err(|e| write_err(path, e))?;
    }
    for (i, row) in data.values().rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row_labels.map(|l| l[i].clone()).into_iter().collect();
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| ShcError::io(path, e))
}
