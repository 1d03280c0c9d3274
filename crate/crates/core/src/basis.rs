//! Orthonormal basis functions evaluated on rescaled multivariate samples.
//!
//! A `d`-dimensional sample is mapped coordinate-wise onto `[0, 1]` using
//! bounds learned from the data, each coordinate is expanded in `B` scalar
//! basis functions, and the `d` blocks are concatenated into one vector of
//! length `M = B·d`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::data::TimeSeries;
use crate::error::{invalid_config, invalid_data, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum BasisFamily {
    #[default]
    Fourier,
}

impl FromStr for BasisFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fourier" => Ok(BasisFamily::Fourier),
            other => Err(format!("unknown basis family '{other}'")),
        }
    }
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisFamily::Fourier => f.write_str("fourier"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisSpec {
    pub family: BasisFamily,
    per_dim_count: usize,
    bounds: Vec<(f64, f64)>,
}

impl BasisSpec {
    pub fn new(family: BasisFamily, per_dim_count: usize, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if per_dim_count == 0 {
            return Err(invalid_config("basis needs at least one function per dimension"));
        }
        if bounds.is_empty() {
            return Err(invalid_config("basis needs at least one dimension"));
        }
        if let Some(j) = bounds.iter().position(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(invalid_config(format!("dimension {j} has empty domain {:?}", bounds[j])));
        }
        Ok(Self { family, per_dim_count, bounds })
    }

    /// Functions per dimension (`B`).
    pub fn per_dim_count(&self) -> usize {
        self.per_dim_count
    }

    /// Input dimension (`d`).
    pub fn data_dim(&self) -> usize {
        self.bounds.len()
    }

    /// Total feature count `M = B·d`.
    pub fn feature_count(&self) -> usize {
        self.per_dim_count * self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Writes φ(x) into `out` (length `M`) without allocating.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.data_dim() {
            return Err(invalid_data(format!(
                "sample has {} coordinates, basis expects {}",
                x.len(),
                self.data_dim()
            )));
        }
        debug_assert_eq!(out.len(), self.feature_count());
        let b = self.per_dim_count;
        for (j, (&xj, &(lo, hi))) in x.iter().zip(&self.bounds).enumerate() {
            let u = (xj - lo) / (hi - lo);
            match self.family {
                BasisFamily::Fourier => fourier_into(u, &mut out[j * b..(j + 1) * b]),
            }
        }
        Ok(())
    }
}

/// Learns per-dimension bounds from the data: `(min − pad, max + pad)` with
/// `pad = 1e-9·(max − min + 1)`; constant columns get `(v − 0.5, v + 0.5)`.
pub fn fit_domain(x: &TimeSeries, per_dim_count: usize) -> Result<BasisSpec> {
    if x.len() < 2 {
        return Err(invalid_data("fitting a basis domain needs at least two samples"));
    }
    let data = x.data();
    let mut bounds = Vec::with_capacity(x.dim());
    for col in data.column_iter() {
        if col.iter().any(|v| !v.is_finite()) {
            return Err(invalid_data("non-finite value in input"));
        }
        let lo = col.min();
        let hi = col.max();
        if lo == hi {
            bounds.push((lo - 0.5, hi + 0.5));
        } else {
            let pad = 1e-9 * (hi - lo + 1.0);
            bounds.push((lo - pad, hi + pad));
        }
    }
    BasisSpec::new(BasisFamily::Fourier, per_dim_count, bounds)
}

fn fourier_into(u: f64, out: &mut [f64]) {
    let u = u.clamp(0.0, 1.0);
    out[0] = 1.0;
    let mut idx = 1;
    let mut k = 1.0;
    while idx < out.len() {
        let arg = 2.0 * PI * k * u;
        out[idx] = SQRT_2 * arg.cos();
        if idx + 1 < out.len() {
            out[idx + 1] = SQRT_2 * arg.sin();
        }
        idx += 2;
        k += 1.0;
    }
}

/// The scalar Fourier basis on `[0, 1]`: `1, √2·cos 2πku, √2·sin 2πku, …`
/// truncated to `b` entries. Arguments outside `[0, 1]` are clamped.
pub fn eval_scalar_fourier(u: f64, b: usize) -> Vec<f64> {
    let mut out = vec![0.0; b];
    if b > 0 {
        fourier_into(u, &mut out);
    }
    out
}

pub fn eval_basis(x: &[f64], spec: &BasisSpec) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(spec.feature_count());
    spec.eval_into(x, out.as_mut_slice())?;
    Ok(out)
}

/// `W = ∫ φ φᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    w: DMatrix<f64>,
}

impl GramMatrix {
    pub fn identity(m: usize) -> Self {
        Self { w: DMatrix::identity(m, m) }
    }

    pub fn from_matrix(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(invalid_config("Gram matrix must be square"));
        }
        if (&w - w.transpose()).amax() > 1e-12 * (1.0 + w.amax()) {
            return Err(invalid_config("Gram matrix must be symmetric"));
        }
        Ok(Self { w })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_identity(&self) -> bool {
        crate::linalg::is_identity(&self.w, 0.0)
    }
}

/// For the Fourier family every per-dimension block is orthonormal on the
/// unit interval, so `W` is the identity.
pub fn gram(spec: &BasisSpec) -> GramMatrix {
    match spec.family {
        BasisFamily::Fourier => GramMatrix::identity(spec.feature_count()),
    }
}
