//! Reduction of a channels × time segment to a low-dimensional trajectory.
//!
//! Two methods are provided: [`pca`] projects onto the leading
//! eigenvectors of the channel covariance, and [`dyca`] (dynamical
//! component analysis) projects onto the solutions of a generalized
//! eigenproblem built from signal/derivative correlation matrices, picking
//! out components that obey linear differential equations.

mod dyca;
mod linalg;

pub use dyca::{dyca, DycaOptions, DycaResult};
pub use linalg::canonical_correlations;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    #[serde(alias = "pca")]
    Pca,
    #[serde(alias = "dyca")]
    Dyca,
}

/// Reduced amplitudes: `points` is W × n, one row per time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: DMatrix<f64>,
    pub method: Method,
    pub rate: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// `t,x1..xn` rows, `t` in seconds from the window start.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.dim() {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (k, row) in self.points.row_iter().enumerate() {
            out.push_str(&(k as f64 / self.rate).to_string());
            for v in row.iter() {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output; `#` lines are skipped and the
    /// `t` column is ignored.
    pub fn from_csv(text: &str, method: Method, rate: f64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::parse("trajectory header", e.to_string()))?
            .clone();
        let n = header.len().saturating_sub(1);
        if n == 0 || &header[0] != "t" {
            return Err(Error::parse("trajectory header", "expected t,x1..xn"));
        }
        let mut values = Vec::new();
        let mut rows = 0;
        for (i, record) in reader.records().enumerate() {
            let record = record
                .map_err(|e| Error::parse(format!("trajectory row {}", i + 1), e.to_string()))?;
            for (c, cell) in record.iter().enumerate().skip(1) {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::parse(
                        format!("trajectory row {}, column {}", i + 1, c + 1),
                        format!("{cell:?} is not a number"),
                    )
                })?;
                values.push(v);
            }
            rows += 1;
        }
        Ok(Trajectory {
            points: DMatrix::from_row_slice(rows, n, &values),
            method,
            rate,
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Time derivative of every row, scaled by `rate`: central differences at
/// interior instants, first-order one-sided differences at both ends.
pub fn derivative(data: &DMatrix<f64>, rate: f64) -> Result<DMatrix<f64>> {
    let w = data.ncols();
    if w < 3 {
        return Err(Error::InsufficientData(format!(
            "derivative needs at least 3 samples, got {w}"
        )));
    }
    let mut out = DMatrix::zeros(data.nrows(), w);
    for r in 0..data.nrows() {
        out[(r, 0)] = (data[(r, 1)] - data[(r, 0)]) * rate;
        for t in 1..w - 1 {
            out[(r, t)] = (data[(r, t + 1)] - data[(r, t - 1)]) * 0.5 * rate;
        }
        out[(r, w - 1)] = (data[(r, w - 1)] - data[(r, w - 2)]) * rate;
    }
    Ok(out)
}

/// Per-channel means removed.
pub fn center_rows(data: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = data.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    out
}

/// Signal and derivative correlation matrices of a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSet {
    /// ⟨q qᵀ⟩
    pub c0: DMatrix<f64>,
    /// ⟨q̇ qᵀ⟩
    pub c1: DMatrix<f64>,
    /// ⟨q̇ q̇ᵀ⟩
    pub c2: DMatrix<f64>,
}

/// C0 = Q Qᵀ / W, C1 = Q̇ Qᵀ / W, C2 = Q̇ Q̇ᵀ / W with Q centered per channel.
pub fn correlations(data: &DMatrix<f64>, rate: f64) -> Result<CorrelationSet> {
    let q = center_rows(data);
    let dq = derivative(&q, rate)?;
    let w = data.ncols() as f64;
    let c0 = symmetrize(&q * q.transpose() / w);
    let c1 = &dq * q.transpose() / w;
    let c2 = symmetrize(&dq * dq.transpose() / w);
    Ok(CorrelationSet { c0, c1, c2 })
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// PCA projection with its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    pub trajectory: Trajectory,
    /// All covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// M × n, columns are the leading eigenvectors.
    pub components: DMatrix<f64>,
}

/// Projects centered data onto the `n` leading eigenvectors of C0.
///
/// Each eigenvector is signed so that its largest-magnitude entry is
/// positive.
pub fn pca(data: &DMatrix<f64>, rate: f64, n: usize) -> Result<PcaResult> {
    let (m, w) = data.shape();
    if n < 1 || n > m.min(w.saturating_sub(1)) {
        return Err(Error::Config(format!(
            "PCA dimension {n} outside 1..={} for {m} channels and {w} samples",
            m.min(w.saturating_sub(1))
        )));
    }
    let q = center_rows(data);
    let c0 = symmetrize(&q * q.transpose() / w as f64);
    let (eigenvalues, vectors) = linalg::sorted_symmetric_eigen(c0);
    let mut components = vectors.columns(0, n).into_owned();
    for mut col in components.column_iter_mut() {
        orient(&mut col);
    }
    let points = q.transpose() * &components;
    Ok(PcaResult {
        trajectory: Trajectory {
            points,
            method: Method::Pca,
            rate,
        },
        eigenvalues,
        components,
    })
}

/// Flips `v` so its largest-magnitude entry is positive. Returns whether it
/// flipped.
pub(crate) fn orient<S>(v: &mut nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::U1, S>) -> bool
where
    S: nalgebra::StorageMut<f64, nalgebra::Dyn, nalgebra::U1>,
{
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.neg_mut();
        true
    } else {
        false
    }
}

/// Population variance of a column vector.
pub(crate) fn variance(v: &DVector<f64>) -> f64 {
    let mean = v.mean();
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
}
