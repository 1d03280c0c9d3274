//! Core containers shared by every pipeline stage.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{invalid_data, Result};

/// An ordered n×d sequence of observations, optionally labelled per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    data: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        Self::with_labels(data, None)
    }

    pub fn with_labels(data: DMatrix<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if let Some(ref l) = labels {
            if l.len() != data.nrows() {
                return Err(invalid_data(format!(
                    "{} labels for {} samples",
                    l.len(),
                    data.nrows()
                )));
            }
        }
        for (r, row) in data.row_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(invalid_data(format!("non-finite value in sample {r}")));
            }
        }
        Ok(Self { data, labels })
    }

    /// Builds a series from row vectors; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(invalid_data("ragged rows"));
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, Option<Vec<String>>) {
        (self.data, self.labels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Fig,
    Dig,
    Euclidean,
}

impl Method {
    pub fn tag(self) -> u8 {
        match self {
            Method::Fig => 0,
            Method::Dig => 1,
            Method::Euclidean => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Method::Fig),
            1 => Some(Method::Dig),
            2 => Some(Method::Euclidean),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Fig => "fig",
            Method::Dig => "dig",
            Method::Euclidean => "euclidean",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fig" => Ok(Method::Fig),
            "dig" => Ok(Method::Dig),
            "euclidean" => Ok(Method::Euclidean),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Symmetric, nonnegative n×n matrix with an exactly zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    values: DMatrix<f64>,
    method: Method,
    pub metadata: BTreeMap<String, String>,
}

impl DistanceMatrix {
    /// Assembles the matrix from the strict upper triangle, given row-major.
    pub fn from_upper(n: usize, upper: &[f64], method: Method) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(invalid_data(format!(
                "{} upper-triangle entries for n = {n}",
                upper.len()
            )));
        }
        let mut values = DMatrix::zeros(n, n);
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().unwrap();
                if !v.is_finite() || v < 0.0 {
                    return Err(invalid_data(format!("entry ({i},{j}) = {v} is not a distance")));
                }
                values[(i, j)] = v;
                values[(j, i)] = v;
            }
        }
        Ok(Self { values, method, metadata: BTreeMap::new() })
    }

    /// Wraps a full matrix; only the upper triangle is read and then mirrored.
    pub fn from_matrix(m: &DMatrix<f64>, method: Method) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(invalid_data("distance matrix must be square"));
        }
        let n = m.nrows();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                upper.push(m[(i, j)]);
            }
        }
        Self::from_upper(n, &upper, method)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Strict upper triangle, row-major.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.values[(i, j)]);
            }
        }
        out
    }

    /// Reorders points: entry (a, b) of the result is entry (perm[a], perm[b]).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let values = DMatrix::from_fn(n, n, |a, b| self.values[(perm[a], perm[b])]);
        Self { values, method: self.method, metadata: self.metadata.clone() }
    }
}
