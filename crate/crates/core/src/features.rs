//! Windowed basis-function averages: row `i` of the feature matrix is the
//! mean of φ over the samples in the time window centred at `i`.

use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::BasisSpec;
use crate::data::TimeSeries;
use crate::error::{invalid_config, invalid_data, Result};

/// A centred time window of `length` samples, clamped at the series ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WindowSpec {
    length: usize,
}

impl WindowSpec {
    pub fn new(length: usize) -> Result<Self> {
        if length == 0 {
            return Err(invalid_config("window length must be at least 1"));
        }
        Ok(Self { length })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn indices(&self, i: usize, n: usize) -> Range<usize> {
        window_indices(i, n, self.length)
    }
}

/// Indices `[max(0, i − ⌊L/2⌋), min(n − 1, i + ⌈L/2⌉ − 1)]` as a half-open range.
pub fn window_indices(i: usize, n: usize, length: usize) -> Range<usize> {
    debug_assert!(i < n && length >= 1);
    let before = length / 2;
    let after = length.div_ceil(2) - 1;
    let start = i.saturating_sub(before);
    let end = (i + after).min(n - 1) + 1;
    start..end
}

#[derive(Clone, Debug)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    pub spec: BasisSpec,
    pub window: WindowSpec,
}

impl FeatureMatrix {
    pub fn from_parts(values: DMatrix<f64>, spec: BasisSpec, window: WindowSpec) -> Result<Self> {
        if values.ncols() != spec.feature_count() {
            return Err(invalid_data(format!(
                "feature matrix has {} columns, basis has {} functions",
                values.ncols(),
                spec.feature_count()
            )));
        }
        Ok(Self { values, spec, window })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row_vec(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }
}

/// Evaluates φ at every sample, one row per sample.
pub fn basis_rows(x: &TimeSeries, spec: &BasisSpec) -> Result<DMatrix<f64>> {
    let (n, m) = (x.len(), spec.feature_count());
    let data = x.data();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let sample: Vec<f64> = data.row(i).iter().copied().collect();
            let mut out = vec![0.0; m];
            spec.eval_into(&sample, &mut out).map(|_| out)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, m, |i, k| rows[i][k]))
}

fn mean_rows(phi: &DMatrix<f64>, range: Range<usize>, out: &mut [f64]) {
    out.fill(0.0);
    let count = range.len() as f64;
    for j in range {
        for (o, v) in out.iter_mut().zip(phi.row(j).iter()) {
            *o += v;
        }
    }
    for o in out.iter_mut() {
        *o /= count;
    }
}

/// `Â[i] = mean of φ(x_j)` over the `l1` window around `i`.
pub fn compute_features(x: &TimeSeries, spec: &BasisSpec, l1: WindowSpec) -> Result<FeatureMatrix> {
    let n = x.len();
    if n == 0 {
        return Err(invalid_data("cannot compute features of an empty series"));
    }
    compute_features_with(x, spec, l1, |i| l1.indices(i, n).collect())
}

/// Like [`compute_features`], but averaging over caller-supplied neighbour
/// sets instead of time windows. `window` is recorded as metadata only.
pub fn compute_features_with<F>(
    x: &TimeSeries,
    spec: &BasisSpec,
    window: WindowSpec,
    neighbors: F,
) -> Result<FeatureMatrix>
where
    F: Fn(usize) -> Vec<usize> + Sync,
{
    let n = x.len();
    if n == 0 {
        return Err(invalid_data("cannot compute features of an empty series"));
    }
    let phi = basis_rows(x, spec)?;
    let m = spec.feature_count();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let set = neighbors(i);
            if set.is_empty() || set.iter().any(|&j| j >= n) {
                return Err(invalid_data(format!("bad neighbour set for sample {i}")));
            }
            let mut out = vec![0.0; m];
            for &j in &set {
                for (o, v) in out.iter_mut().zip(phi.row(j).iter()) {
                    *o += v;
                }
            }
            let c = set.len() as f64;
            out.iter_mut().for_each(|o| *o /= c);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(n, m, |i, k| rows[i][k]);
    FeatureMatrix::from_parts(values, spec.clone(), window)
}

/// Keeps rows `0, stride, 2·stride, …`.
pub fn stride_subsample(f: &FeatureMatrix, stride: usize) -> Result<FeatureMatrix> {
    if stride == 0 {
        return Err(invalid_config("stride must be at least 1"));
    }
    let keep: Vec<usize> = (0..f.nrows()).step_by(stride).collect();
    let values = f.values.select_rows(keep.iter());
    FeatureMatrix::from_parts(values, f.spec.clone(), f.window)
}

/// Mean of rows of `values` over the window `range` (shared with the
/// local-model stage).
pub(crate) fn window_mean(values: &DMatrix<f64>, range: Range<usize>) -> Vec<f64> {
    let mut out = vec![0.0; values.ncols()];
    mean_rows(values, range, &mut out);
    out
}
