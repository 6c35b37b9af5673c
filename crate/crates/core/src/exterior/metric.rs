use nalgebra::{DMatrix, SymmetricEigen};

use super::MultiIndex;
use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Constant Riemannian metric on `R^n / Z^n`.
#[derive(Clone, Debug)]
pub struct FlatMetric<T: Real> {
    g: DMatrix<T>,
    inv: DMatrix<T>,
    sqrt_det: T,
}

impl<T: Real> PartialEq for FlatMetric<T> {
    fn eq(&self, other: &Self) -> bool {
        self.g == other.g
    }
}

impl<T: Real> FlatMetric<T> {
    pub fn new(g: DMatrix<T>) -> Result<Self> {
        let n = g.nrows();
        if n == 0 || g.ncols() != n {
            return Err(Error::InvalidMetric(format!("expected a square matrix, got {}x{}", n, g.ncols())));
        }
        if n > super::MAX_DIM {
            return Err(Error::InvalidMetric(format!("dimension {n} exceeds {}", super::MAX_DIM)));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMetric("non-finite entry".into()));
        }
        let scale = g.camax();
        let tol = scale * T::identity_tolerance();
        for i in 0..n {
            for j in 0..i {
                if (g[(i, j)] - g[(j, i)]).abs() > tol {
                    return Err(Error::InvalidMetric(format!("not symmetric at ({i},{j})")));
                }
            }
        }
        let g = (&g + g.transpose()) * real::<T>(0.5);
        let eig = SymmetricEigen::new(g.clone());
        if eig.eigenvalues.iter().any(|&l| l <= T::zero()) {
            return Err(Error::InvalidMetric("not positive definite".into()));
        }
        let chol = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidMetric("not positive definite".into()))?;
        let inv = chol.inverse();
        let sqrt_det = eig.eigenvalues.iter().fold(T::one(), |acc, &l| acc * l).sqrt();
        Ok(FlatMetric { g, inv, sqrt_det })
    }

    pub fn euclidean(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is a metric")
    }

    pub fn diagonal(entries: &[T]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<T> {
        &self.inv
    }

    /// Riemannian volume of the unit coordinate cell.
    pub fn volume(&self) -> T {
        self.sqrt_det
    }

    pub fn scaled(&self, c2: T) -> Self {
        Self::new(&self.g * c2).expect("positive multiple of a metric")
    }

    /// Pointwise inner product `⟨dx_I, dx_J⟩`: determinant of the `(I, J)` minor of `G⁻¹`.
    pub fn form_inner(&self, i: MultiIndex, j: MultiIndex) -> T {
        if i.degree() != j.degree() {
            return T::zero();
        }
        let rows = i.axes();
        let cols = j.axes();
        let p = rows.len();
        if p == 0 {
            return T::one();
        }
        let minor = DMatrix::from_fn(p, p, |a, b| self.inv[(rows[a], cols[b])]);
        minor.determinant()
    }

    /// Squared length of a covector under the dual metric, `ξᵀ G⁻¹ ξ`.
    pub fn covector_norm_sq(&self, xi: &[T]) -> T {
        let n = self.dim();
        let mut acc = T::zero();
        for a in 0..n {
            for b in 0..n {
                acc += xi[a] * self.inv[(a, b)] * xi[b];
            }
        }
        acc
    }

    /// Squared length of a lattice vector, `γᵀ G γ`.
    pub fn vector_norm_sq(&self, v: &[T]) -> T {
        let n = self.dim();
        let mut acc = T::zero();
        for a in 0..n {
            for b in 0..n {
                acc += v[a] * self.g[(a, b)] * v[b];
            }
        }
        acc
    }

    pub fn extremal_eigenvalues(&self) -> (T, T) {
        let eig = SymmetricEigen::new(self.g.clone());
        let min = eig.eigenvalues.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b));
        let max = eig.eigenvalues.iter().copied().fold(T::zero(), |a, b| a.max(b));
        (min, max)
    }

    /// Symmetric square root `G^{1/2}`.
    pub fn sqrt(&self) -> DMatrix<T> {
        let eig = SymmetricEigen::new(self.g.clone());
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.sqrt()));
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    }

    /// Block-diagonal product metric on `T^{n1} × T^{n2}`.
    pub fn product(&self, other: &Self) -> Self {
        let (n1, n2) = (self.dim(), other.dim());
        let mut g = DMatrix::zeros(n1 + n2, n1 + n2);
        g.view_mut((0, 0), (n1, n1)).copy_from(&self.g);
        g.view_mut((n1, n1), (n2, n2)).copy_from(&other.g);
        Self::new(g).expect("product of metrics")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_spd() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(FlatMetric::<f64>::new(g), Err(Error::InvalidMetric(_))));
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(FlatMetric::<f64>::new(g).is_err());
    }

    #[test]
    fn minors() {
        let m = FlatMetric::<f64>::diagonal(&[4.0, 1.0]).unwrap();
        assert!((m.volume() - 2.0).abs() < 1e-15);
        let d0 = MultiIndex::axis(0);
        assert!((m.form_inner(d0, d0) - 0.25).abs() < 1e-15);
        let top = MultiIndex::top(2);
        assert!((m.form_inner(top, top) - 0.25).abs() < 1e-15);
    }
}
