use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Cx, Real};

/// Eigenpairs of a hermitian matrix, eigenvalues ascending.
pub fn sorted_eigen<T: Real>(h: &DMatrix<Cx<T>>) -> (Vec<T>, DMatrix<Cx<T>>) {
    if h.is_empty() {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (h + h.adjoint()).scale(T::one() / (T::one() + T::one()));
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values = order.iter().map(|&a| eig.eigenvalues[a]).collect();
    let vectors = DMatrix::from_columns(&order.iter().map(|&a| eig.eigenvectors.column(a).into_owned()).collect::<Vec<_>>());
    (values, vectors)
}

/// Splits a positive semi-definite hermitian block into its numerical kernel.
///
/// An eigenvalue counts as zero below `tol · λ_max`; anything in `(tol, 10 tol) · λ_max`
/// is reported instead of being rounded either way.
pub fn numerical_kernel<T: Real>(h: &DMatrix<Cx<T>>, tol: T, mode: &[i32]) -> Result<Vec<DVector<Cx<T>>>> {
    let (values, vectors) = sorted_eigen(h);
    let lmax = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let eps = T::default_epsilon();
    if lmax <= eps * eps {
        return Ok((0..values.len()).map(|a| vectors.column(a).into_owned()).collect());
    }
    let threshold = tol * lmax;
    let ten = T::from_f64(10.0).unwrap();
    let mut kernel = Vec::new();
    for (a, &v) in values.iter().enumerate() {
        if v <= threshold {
            kernel.push(vectors.column(a).into_owned());
        } else if v < ten * threshold {
            return Err(Error::AmbiguousKernel { mode: mode.to_vec(), value: to_f64(v), threshold: to_f64(threshold) });
        }
    }
    Ok(kernel)
}
