use nalgebra::DMatrix;

use super::center_rows;

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending with
/// eigenvectors in matching column order.
pub(crate) fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    // ties keep the solver's order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Canonical correlations between the column spaces of two observation
/// matrices (rows are observations), descending. Both inputs are centered
/// first; rank-deficient directions are dropped.
pub fn canonical_correlations(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Vec<f64> {
    assert_eq!(x.nrows(), y.nrows(), "observation counts differ");
    let qx = orthonormal_columns(&center_rows(&x.transpose()).transpose());
    let qy = orthonormal_columns(&center_rows(&y.transpose()).transpose());
    let cross = qx.transpose() * qy;
    let mut values: Vec<f64> = cross.singular_values().iter().map(|s| s.min(1.0)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Orthonormal basis for the column space, via thin SVD.
fn orthonormal_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let top = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > top * 1e-10)
        .collect();
    DMatrix::from_fn(u.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0]);
        let (values, vectors) = sorted_symmetric_eigen(m);
        assert_eq!(values, vec![5.0, 3.0, 1.0]);
        assert_eq!(vectors[(1, 0)].abs(), 1.0);
        assert_eq!(vectors[(2, 1)].abs(), 1.0);
    }

    #[test]
    fn canonical_correlation_of_linear_image_is_one() {
        let x = DMatrix::from_fn(50, 2, |r, c| ((r * (c + 2)) as f64 * 0.3).sin());
        let mix = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let y = &x * mix;
        let cc = canonical_correlations(&x, &y);
        assert_eq!(cc.len(), 2);
        assert!(cc.iter().all(|&c| (c - 1.0).abs() < 1e-9), "{cc:?}");
    }
}
