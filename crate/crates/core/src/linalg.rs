//! Dense symmetric eigendecomposition helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenpairs of a symmetric matrix, sorted ascending by eigenvalue
/// (ties keep the solver's order).
pub(crate) fn sym_eigen_ascending(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<DVector<f64>>>(),
    );
    (values, vectors)
}

/// Flips `v` so its largest-magnitude entry (first one on ties) is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Column-wise [`fix_sign`].
pub(crate) fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        fix_sign(col.as_mut_slice());
    }
}

/// Subtracts each column's mean in place and returns the means.
pub(crate) fn center_columns(m: &mut DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows() as f64;
    let mut means = Vec::with_capacity(m.ncols());
    for mut col in m.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        means.push(mean);
    }
    means
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_ascending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 5.0]);
        let (vals, vecs) = sym_eigen_ascending(m);
        assert_eq!(vals.len(), 3);
        assert!((vals[0] + 1.0).abs() < 1e-12 && (vals[2] - 5.0).abs() < 1e-12);
        assert!((vecs[(2, 2)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![0.1, -0.9, 0.5];
        fix_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.5]);
        let mut v = vec![-0.5, 0.5];
        fix_sign(&mut v);
        assert_eq!(v, vec![0.5, -0.5]);
    }
}
