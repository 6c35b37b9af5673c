//! Dense linear algebra on a single fiber `Λ(C^n)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{FlatMetric, MultiIndex};
use crate::scalar::{from_real, Cx, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    All,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
            Parity::All => Parity::All,
        }
    }

    pub fn admits(self, degree: usize) -> bool {
        match self {
            Parity::Even => degree % 2 == 0,
            Parity::Odd => degree % 2 == 1,
            Parity::All => true,
        }
    }
}

/// Ordered basis `{dx_I}` of the forms of one parity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberBasis {
    n: usize,
    parity: Parity,
    indices: Vec<MultiIndex>,
    position: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl FiberBasis {
    pub fn new(n: usize, parity: Parity) -> Self {
        let indices: Vec<_> = MultiIndex::all(n)
            .into_iter()
            .filter(|i| parity.admits(i.degree()))
            .collect();
        let mut position = vec![ABSENT; 1 << n];
        for (p, i) in indices.iter().enumerate() {
            position[i.bits() as usize] = p as u32;
        }
        FiberBasis { n, parity, indices, position }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, i: MultiIndex) -> Option<usize> {
        match self.position.get(i.bits() as usize) {
            Some(&p) if p != ABSENT => Some(p as usize),
            _ => None,
        }
    }

    /// Positions of `sub`'s elements inside `self`.
    pub fn selection(&self, sub: &FiberBasis) -> Vec<usize> {
        sub.indices
            .iter()
            .map(|&i| self.position(i).expect("sub-basis of the same dimension"))
            .collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i.degree()).collect()
    }
}

/// Left multiplication `ω ↦ α ∧ ω` by a constant form `α`, on all forms.
pub fn wedge_left<T: Real>(n: usize, alpha: &[(MultiIndex, Cx<T>)]) -> DMatrix<Cx<T>> {
    let all = FiberBasis::new(n, Parity::All);
    let mut m = DMatrix::zeros(all.len(), all.len());
    for (col, &i) in all.indices().iter().enumerate() {
        for &(j, c) in alpha {
            if let Some((s, k)) = j.wedge(i) {
                let row = all.position(k).unwrap();
                m[(row, col)] += if s > 0 { c } else { -c };
            }
        }
    }
    m
}

/// Symbol of the flat differential at covector `ξ`: `ω ↦ i Σ_j ξ_j dx_j ∧ ω`.
pub fn differential_symbol<T: Real>(xi: &[T]) -> DMatrix<Cx<T>> {
    let n = xi.len();
    let alpha: Vec<_> = xi
        .iter()
        .enumerate()
        .map(|(j, &x)| (MultiIndex::axis(j), Cx::new(T::zero(), x)))
        .collect();
    wedge_left(n, &alpha)
}

/// Complex-linear Hodge star on all forms.
///
/// `⋆dx_I = √det G Σ_J det(G⁻¹[I,J]) sgn(J, J^c) dx_{J^c}`.
pub fn hodge_star<T: Real>(metric: &FlatMetric<T>) -> DMatrix<Cx<T>> {
    let n = metric.dim();
    let all = FiberBasis::new(n, Parity::All);
    let mut m = DMatrix::zeros(all.len(), all.len());
    for (col, &i) in all.indices().iter().enumerate() {
        for &j in all.indices().iter().filter(|j| j.degree() == i.degree()) {
            let minor = metric.form_inner(i, j);
            if minor == T::zero() {
                continue;
            }
            let jc = j.complement(n);
            let (s, _) = j.wedge(jc).unwrap();
            let row = all.position(jc).unwrap();
            let v = metric.volume() * minor;
            m[(row, col)] += from_real(if s > 0 { v } else { -v });
        }
    }
    m
}

/// L² Gram matrix of the fiber basis on the unit cell: `√det G · det(G⁻¹[I,J])`.
pub fn gram<T: Real>(metric: &FlatMetric<T>) -> DMatrix<T> {
    let all = FiberBasis::new(metric.dim(), Parity::All);
    let k = all.len();
    DMatrix::from_fn(k, k, |a, b| {
        metric.volume() * metric.form_inner(all.indices()[a], all.indices()[b])
    })
}

/// Matrix of `∫ dx_I ∧ dx_J` over the unit cell (metric independent).
pub fn top_pairing<T: Real>(n: usize) -> DMatrix<Cx<T>> {
    let all = FiberBasis::new(n, Parity::All);
    let top = MultiIndex::top(n);
    let k = all.len();
    DMatrix::from_fn(k, k, |a, b| match all.indices()[a].wedge(all.indices()[b]) {
        Some((s, u)) if u == top => from_real(if s > 0 { T::one() } else { -T::one() }),
        _ => Cx::new(T::zero(), T::zero()),
    })
}

/// Diagonal operator acting by `f(p)` on `p`-forms.
pub fn degree_diagonal<T: Real>(n: usize, f: impl Fn(usize) -> Cx<T>) -> DMatrix<Cx<T>> {
    let all = FiberBasis::new(n, Parity::All);
    DMatrix::from_diagonal(&DVector::from_iterator(
        all.len(),
        all.indices().iter().map(|i| f(i.degree())),
    ))
}

/// Rows and columns of `m` at the given positions.
pub fn submatrix<T: nalgebra::Scalar + num_traits::Zero>(
    m: &DMatrix<T>,
    rows: &[usize],
    cols: &[usize],
) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])].clone())
}

/// Cholesky data for passing between the coordinate basis and an L²-orthonormal one.
#[derive(Clone, Debug)]
pub struct Orthonormalizer<T: Real> {
    /// `Γ = L Lᴴ`.
    pub lower: DMatrix<Cx<T>>,
    pub lower_inv: DMatrix<Cx<T>>,
}

impl<T: Real> Orthonormalizer<T> {
    pub fn new(gram: &DMatrix<T>) -> Self {
        let chol = gram.clone().cholesky().expect("Gram matrix is positive definite");
        let l = chol.l();
        let l_inv = l.clone().try_inverse().expect("triangular factor invertible");
        Orthonormalizer {
            lower: l.map(from_real),
            lower_inv: l_inv.map(from_real),
        }
    }

    /// `Lᴴ M L⁻ᴴ`: hermitian whenever `M` is self-adjoint for `Γ`.
    pub fn to_orthonormal(&self, m: &DMatrix<Cx<T>>) -> DMatrix<Cx<T>> {
        self.lower.adjoint() * m * self.lower_inv.adjoint()
    }

    /// Coordinates of an orthonormal-basis vector in the `dx_I` basis.
    pub fn from_orthonormal_vector(&self, v: &DVector<Cx<T>>) -> DVector<Cx<T>> {
        self.lower_inv.adjoint() * v
    }

    pub fn restrict(&self, sel: &[usize]) -> Self {
        Orthonormalizer {
            lower: submatrix(&self.lower, sel, sel),
            lower_inv: submatrix(&self.lower_inv, sel, sel),
        }
    }
}

/// Everything about one fiber of a flat torus that does not depend on the mode.
#[derive(Clone, Debug)]
pub struct FiberGeometry<T: Real> {
    pub basis: FiberBasis,
    pub star: DMatrix<Cx<T>>,
    pub gram: DMatrix<T>,
    pub gram_inv: DMatrix<T>,
    pub ortho: Orthonormalizer<T>,
}

impl<T: Real> FiberGeometry<T> {
    pub fn new(metric: &FlatMetric<T>) -> Self {
        let gram = gram(metric);
        let gram_inv = gram.clone().cholesky().expect("positive definite").inverse();
        FiberGeometry {
            basis: FiberBasis::new(metric.dim(), Parity::All),
            star: hodge_star(metric),
            ortho: Orthonormalizer::new(&gram),
            gram,
            gram_inv,
        }
    }

    /// Adjoint of a map between sub-bases with respect to the fiber Gram matrix.
    pub fn gram_adjoint(&self, m: &DMatrix<Cx<T>>, from: &FiberBasis, to: &FiberBasis) -> DMatrix<Cx<T>> {
        let sf = self.basis.selection(from);
        let st = self.basis.selection(to);
        let g_from_inv = submatrix(&self.gram_inv, &sf, &sf).map(from_real);
        let g_to = submatrix(&self.gram, &st, &st).map(from_real);
        g_from_inv * m.adjoint() * g_to
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn star_is_involution_up_to_sign() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 1.5]);
        let metric = FlatMetric::<f64>::new(g).unwrap();
        let star = hodge_star(&metric);
        let ss = &star * &star;
        let sign = degree_diagonal::<f64>(3, |p| cx(if (p * (3 - p)) % 2 == 0 { 1.0 } else { -1.0 }, 0.0));
        assert!((ss - sign).camax() < 1e-12);
    }

    #[test]
    fn differential_symbol_squares_to_zero() {
        let d = differential_symbol(&[0.3f64, -1.2, 2.0, 0.5]);
        assert!((&d * &d).camax() < 1e-14);
    }

    #[test]
    fn orthonormalizer_hermitian() {
        let metric = FlatMetric::<f64>::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let geo = FiberGeometry::new(&metric);
        let d = differential_symbol(&[1.0, 2.0]);
        let dt = geo.gram_adjoint(&d, &geo.basis, &geo.basis);
        let lap = &dt * &d + &d * &dt;
        let h = geo.ortho.to_orthonormal(&lap);
        assert!((&h - h.adjoint()).camax() < 1e-12);
    }
}
