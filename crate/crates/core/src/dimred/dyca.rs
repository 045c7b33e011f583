//! Dynamical component analysis.
//!
//! With C0 = ⟨q qᵀ⟩, C1 = ⟨q̇ qᵀ⟩ and C2 = ⟨q̇ q̇ᵀ⟩, the generalized
//! symmetric-definite eigenproblem
//!
//! ```text
//! C1 C0⁻¹ C1ᵀ u = λ C2 u
//! ```
//!
//! has λ ∈ [0, 1]; λ = 1 exactly when uᵀq̇ is a linear function of q, i.e.
//! when the projection obeys a linear ODE. The m eigenvectors with largest
//! λ span the linear part; their partners v = C0⁻¹ C1ᵀ u carry the
//! right-hand sides and complete the basis for the nonlinear part.
//!
//! C0 and C2 are regularized by `1e-10 · trace / M` on the diagonal, and
//! the problem is reduced to a standard symmetric eigenproblem through the
//! Cholesky factor of C2.

use nalgebra::{DMatrix, DVector};

use super::{center_rows, correlations, linalg, symmetrize, variance, Method, Trajectory};
use crate::{Error, Result};

const REGULARIZATION: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DycaOptions {
    /// Output dimension.
    pub n: usize,
    /// Number of components obeying linear equations; `m ≥ n − m ≥ 0`.
    pub m: usize,
    /// Select every eigenvalue above this threshold instead of the top `m`.
    /// The selection must still contain exactly `m` components.
    pub eig_threshold: Option<f64>,
}

impl Default for DycaOptions {
    fn default() -> Self {
        DycaOptions {
            n: 3,
            m: 2,
            eig_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DycaResult {
    pub trajectory: Trajectory,
    /// All generalized eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// M × n; columns u₁..u_m then v₁..v_{n−m}, signed to match the
    /// trajectory columns.
    pub projection: DMatrix<f64>,
    pub m: usize,
}

fn regularized(c: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let dim = c.nrows();
    let trace = c.trace();
    if !(trace.is_finite() && trace > 0.0) {
        return Err(Error::Numerical(format!(
            "{what} has non-positive trace {trace}; the segment carries no signal"
        )));
    }
    let mut out = c.clone();
    for i in 0..dim {
        out[(i, i)] += REGULARIZATION * trace / dim as f64;
    }
    Ok(out)
}

pub fn dyca(data: &DMatrix<f64>, rate: f64, opts: &DycaOptions) -> Result<DycaResult> {
    let DycaOptions {
        n,
        m,
        eig_threshold,
    } = *opts;
    let channels = data.nrows();
    if n < 1 || m > n || 2 * m < n {
        return Err(Error::Config(format!(
            "DyCA needs m >= n - m >= 0, got n = {n}, m = {m}"
        )));
    }
    if n > channels {
        return Err(Error::Config(format!(
            "DyCA dimension {n} exceeds {channels} channels"
        )));
    }

    let corr = correlations(data, rate)?;
    let c0 = regularized(&corr.c0, "C0")?;
    let c2 = regularized(&corr.c2, "C2")?;
    let chol0 = c0.cholesky().ok_or_else(|| {
        Error::Numerical("C0 is not positive definite after regularization".into())
    })?;
    let chol2 = c2.cholesky().ok_or_else(|| {
        Error::Numerical("C2 is not positive definite after regularization".into())
    })?;

    // C0⁻¹ C1ᵀ, reused for the complementary vectors
    let c0_inv_c1t = chol0.solve(&corr.c1.transpose());
    let lhs = symmetrize(&corr.c1 * &c0_inv_c1t);

    // L⁻¹ A L⁻ᵀ with C2 = L Lᵀ
    let l = chol2.l();
    let half = l
        .solve_lower_triangular(&lhs)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor of C2".into()))?;
    let reduced = l
        .solve_lower_triangular(&half.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor of C2".into()))?;
    let (eigenvalues, y) = linalg::sorted_symmetric_eigen(symmetrize(reduced));
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite generalized eigenvalue".into()));
    }
    let u = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor of C2".into()))?;

    if let Some(threshold) = eig_threshold {
        let found = eigenvalues.iter().filter(|&&v| v >= threshold).count();
        if found != m {
            return Err(Error::AmbiguousModel {
                expected: m,
                found,
                spectrum: eigenvalues,
            });
        }
    }

    let mut projection = DMatrix::zeros(channels, n);
    for i in 0..m {
        projection.set_column(i, &u.column(i));
    }
    for k in 0..n - m {
        let v = &c0_inv_c1t * u.column(k);
        projection.set_column(m + k, &v);
    }
    let scale = projection
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    let mut normalized = projection.clone();
    for mut col in normalized.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    if scale == 0.0 || normalized.rank(1e-9) < n {
        return Err(Error::Numerical(format!(
            "DyCA projection has numerical rank below {n}"
        )));
    }

    let q = center_rows(data);
    let mut points = q.transpose() * &projection;
    for c in 0..n {
        let col: DVector<f64> = points.column(c).into_owned();
        let sd = variance(&col).sqrt();
        if !(sd.is_finite() && sd > 0.0) {
            return Err(Error::Numerical(format!(
                "DyCA component {} has zero variance",
                c + 1
            )));
        }
        let mut col = points.column_mut(c);
        col /= sd;
        let flipped = super::orient(&mut col);
        let mut p = projection.column_mut(c);
        p /= sd;
        if flipped {
            p.neg_mut();
        }
    }

    Ok(DycaResult {
        trajectory: Trajectory {
            points,
            method: Method::Dyca,
            rate,
        },
        eigenvalues,
        projection,
        m,
    })
}
