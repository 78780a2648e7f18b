//! Observation/response data: in-memory representation, restriction to
//! row/column subsets, and CSV ingestion.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {path}: {message}")]
    Csv { path: String, message: String },
    #[error("non-numeric cell {value:?} at row {row}, column {col}")]
    NonNumericCell { row: usize, col: usize, value: String },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row {row} has {got} fields, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("response column {0:?} not found")]
    ResponseMissing(String),
    #[error("response column index {index} out of range for {width} columns")]
    ResponseIndexOutOfRange { index: usize, width: usize },
    #[error("dataset must have at least one observation and one covariate (got {n} x {d})")]
    EmptyDimensions { n: usize, d: usize },
    #[error("response length {y_len} does not match {n} observations")]
    ResponseLengthMismatch { y_len: usize, n: usize },
    #[error("{kind} index {index} out of range (< {len})")]
    IndexOutOfRange { kind: &'static str, index: usize, len: usize },
    #[error("duplicate {kind} index {index}")]
    DuplicateIndex { kind: &'static str, index: usize },
}

/// How to locate the response column in a CSV file.
#[derive(Clone, Debug)]
pub enum ResponseColumn {
    Name(String),
    Index(usize),
}

impl fmt::Display for ResponseColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResponseColumn::Name(n) => write!(f, "{n}"),
            ResponseColumn::Index(i) => write!(f, "#{i}"),
        }
    }
}

/// An N x D observation matrix with an N-vector response.
///
/// Columns carry the covariate index they had in the dataset they were
/// originally loaded or generated with, so that selections made on a
/// restricted view can be aggregated in the original index space.
/// Values are validated finite at construction; instances are immutable
/// and safe to share across threads.
#[derive(Clone, Debug)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Option<Vec<String>>,
    original: Vec<usize>,
}

impl Dataset {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        names: Option<Vec<String>>,
    ) -> Result<Self, DatasetError> {
        let (n, d) = (x.nrows(), x.ncols());
        if n == 0 || d == 0 {
            return Err(DatasetError::EmptyDimensions { n, d });
        }
        if y.len() != n {
            return Err(DatasetError::ResponseLengthMismatch { y_len: y.len(), n });
        }
        if let Some(names) = &names {
            assert_eq!(names.len(), d, "covariate name count must match D");
        }
        for col in 0..d {
            for row in 0..n {
                if !x[(row, col)].is_finite() {
                    return Err(DatasetError::NonFinite { row, col });
                }
            }
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite { row, col: d });
        }
        let original = (0..d).collect();
        Ok(Self { x, y, names, original })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Index this column had in the dataset it was loaded/generated with.
    pub fn original_index(&self, col: usize) -> usize {
        self.original[col]
    }

    pub fn original_indices(&self) -> &[usize] {
        &self.original
    }

    /// Restriction to the given observation rows and covariate columns,
    /// in the listed order. Original column indices travel along.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Result<Dataset, DatasetError> {
        check_indices("row", rows, self.n())?;
        check_indices("column", cols, self.d())?;
        if rows.is_empty() || cols.is_empty() {
            return Err(DatasetError::EmptyDimensions { n: rows.len(), d: cols.len() });
        }
        let x = DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.x[(rows[i], cols[j])]);
        let y = DVector::from_fn(rows.len(), |i, _| self.y[rows[i]]);
        let names = self
            .names
            .as_ref()
            .map(|ns| cols.iter().map(|&c| ns[c].clone()).collect());
        let original = cols.iter().map(|&c| self.original[c]).collect();
        Ok(Dataset { x, y, names, original })
    }

    /// Load a comma-delimited numeric table. A single header row is
    /// auto-detected (any non-numeric cell in the first row); the response
    /// column goes to `y`, all remaining columns to `x` in file order.
    pub fn load_csv<P: AsRef<Path>>(
        path: P,
        response: &ResponseColumn,
    ) -> Result<Self, DatasetError> {
        let path_str = path.as_ref().display().to_string();
        let text = std::fs::read_to_string(&path).map_err(|source| DatasetError::Io {
            path: path_str.clone(),
            source,
        })?;

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut records: Vec<csv::StringRecord> = Vec::new();
        for rec in reader.records() {
            records.push(rec.map_err(|e| DatasetError::Csv {
                path: path_str.clone(),
                message: e.to_string(),
            })?);
        }
        if records.is_empty() {
            return Err(DatasetError::EmptyDimensions { n: 0, d: 0 });
        }

        let first_is_header = records[0].iter().any(|cell| cell.trim().parse::<f64>().is_err());
        let header: Option<Vec<String>> = if first_is_header {
            Some(records[0].iter().map(|s| s.trim().to_string()).collect())
        } else {
            None
        };
        let data_start = usize::from(first_is_header);
        let width = records[0].len();

        let response_col = match response {
            ResponseColumn::Name(name) => match &header {
                Some(h) => h
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| DatasetError::ResponseMissing(name.clone()))?,
                None => return Err(DatasetError::ResponseMissing(name.clone())),
            },
            ResponseColumn::Index(i) => {
                if *i >= width {
                    return Err(DatasetError::ResponseIndexOutOfRange { index: *i, width });
                }
                *i
            }
        };
        if width < 2 {
            // removing the response column would leave no covariates
            return Err(DatasetError::EmptyDimensions {
                n: records.len() - data_start,
                d: 0,
            });
        }

        let n = records.len() - data_start;
        let d = width - 1;
        if n == 0 {
            return Err(DatasetError::EmptyDimensions { n: 0, d });
        }
        let mut x = DMatrix::zeros(n, d);
        let mut y = DVector::zeros(n);
        for (i, rec) in records[data_start..].iter().enumerate() {
            if rec.len() != width {
                return Err(DatasetError::RaggedRow {
                    row: i + data_start,
                    got: rec.len(),
                    expected: width,
                });
            }
            let mut xj = 0;
            for (j, cell) in rec.iter().enumerate() {
                let value: f64 = cell.trim().parse().map_err(|_| DatasetError::NonNumericCell {
                    row: i + data_start,
                    col: j,
                    value: cell.to_string(),
                })?;
                if j == response_col {
                    y[i] = value;
                } else {
                    x[(i, xj)] = value;
                    xj += 1;
                }
            }
        }
        let names = header.map(|h| {
            h.iter()
                .enumerate()
                .filter(|(j, _)| *j != response_col)
                .map(|(_, c)| c.clone())
                .collect()
        });
        Dataset::new(x, y, names)
    }

    /// Write as CSV with the response in the last column. Values use the
    /// shortest round-trip float representation.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P, response_name: &str) -> Result<(), DatasetError> {
        let path_str = path.as_ref().display().to_string();
        let mut w = csv::Writer::from_path(&path).map_err(|e| DatasetError::Csv {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
        let header: Vec<String> = match &self.names {
            Some(ns) => ns.iter().cloned().chain([response_name.to_string()]).collect(),
            None => (0..self.d())
                .map(|j| format!("x{j}"))
                .chain([response_name.to_string()])
                .collect(),
        };
        w.write_record(&header).map_err(|e| csv_err(&path_str, e))?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = Vec::with_capacity(self.d() + 1);
            for j in 0..self.d() {
                rec.push(self.x[(i, j)].to_string());
            }
            rec.push(self.y[i].to_string());
            w.write_record(&rec).map_err(|e| csv_err(&path_str, e))?;
        }
        w.flush().map_err(|source| DatasetError::Io { path: path_str, source })?;
        Ok(())
    }
}

fn csv_err(path: &str, e: csv::Error) -> DatasetError {
    DatasetError::Csv { path: path.to_string(), message: e.to_string() }
}

fn check_indices(kind: &'static str, idx: &[usize], len: usize) -> Result<(), DatasetError> {
    let mut seen = vec![false; len];
    for &i in idx {
        if i >= len {
            return Err(DatasetError::IndexOutOfRange { kind, index: i, len });
        }
        if seen[i] {
            return Err(DatasetError::DuplicateIndex { kind, index: i });
        }
        seen[i] = true;
    }
    Ok(())
}

/// The coefficients of a synthetic linear model and their support.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    beta: DVector<f64>,
    informative: Vec<usize>,
}

impl GroundTruth {
    /// The support is derived from `beta`, so the two can never disagree.
    pub fn from_beta(beta: DVector<f64>) -> Self {
        let informative = beta
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(d, _)| d)
            .collect();
        Self { beta, informative }
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// Indices of nonzero coefficients, ascending.
    pub fn informative(&self) -> &[usize] {
        &self.informative
    }

    pub fn is_informative(&self, d: usize) -> bool {
        self.beta[d] != 0.0
    }

    /// Write as CSV rows `index,beta` (all D coefficients).
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<(), DatasetError> {
        let path_str = path.as_ref().display().to_string();
        let mut w = csv::Writer::from_path(&path).map_err(|e| DatasetError::Csv {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
        w.write_record(["index", "beta"]).map_err(|e| csv_err(&path_str, e))?;
        for (d, b) in self.beta.iter().enumerate() {
            w.write_record([d.to_string(), b.to_string()])
                .map_err(|e| csv_err(&path_str, e))?;
        }
        w.flush().map_err(|source| DatasetError::Io { path: path_str, source })?;
        Ok(())
    }
}
