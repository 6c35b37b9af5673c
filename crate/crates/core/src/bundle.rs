//! Flat unitary bundles over `T^n`, presented by holonomy angles.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::exterior::{Form, Mode, MultiIndex};
use crate::scalar::{CxOps, real, Cx, Real};

/// Direct sum of flat line bundles; channel `a` has holonomy `e^{2πi θ_a,j}` around axis `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatBundle<T: Real> {
    n: usize,
    angles: Vec<Vec<T>>,
}

fn wrap<T: Real>(x: T) -> T {
    let y = x - x.floor();
    if y >= T::one() {
        T::zero()
    } else {
        y
    }
}

impl<T: Real> FlatBundle<T> {
    pub fn trivial(n: usize, rank: usize) -> Self {
        FlatBundle { n, angles: vec![vec![T::zero(); n]; rank] }
    }

    /// Angles are reduced into `[0, 1)`.
    pub fn from_angles(n: usize, angles: Vec<Vec<T>>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidBundle("rank must be at least 1".into()));
        }
        if angles.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidBundle(format!("each channel needs {n} angles")));
        }
        if angles.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidBundle("non-finite angle".into()));
        }
        let angles = angles.into_iter().map(|row| row.into_iter().map(wrap).collect()).collect();
        Ok(FlatBundle { n, angles })
    }

    pub fn line(angles: &[T]) -> Self {
        Self::from_angles(angles.len(), vec![angles.to_vec()]).expect("finite angles")
    }

    /// Simultaneously diagonalizes commuting unitary holonomies, one per axis.
    pub fn from_unitaries(holonomies: &[DMatrix<Cx<T>>]) -> Result<Self> {
        let n = holonomies.len();
        let rank = holonomies.first().map(|u| u.nrows()).unwrap_or(0);
        if n == 0 || rank == 0 {
            return Err(Error::InvalidBundle("need at least one nonempty holonomy".into()));
        }
        let tol = real::<T>(1e-10);
        for (j, u) in holonomies.iter().enumerate() {
            if u.nrows() != rank || u.ncols() != rank {
                return Err(Error::InvalidBundle(format!("holonomy {j} is not {rank}x{rank}")));
            }
            let defect = (u.adjoint() * u - DMatrix::identity(rank, rank)).camax();
            if defect > tol {
                return Err(Error::InvalidBundle(format!("holonomy {j} is not unitary ({defect:?})")));
            }
        }
        for a in 0..n {
            for b in 0..a {
                let c = (&holonomies[a] * &holonomies[b] - &holonomies[b] * &holonomies[a]).camax();
                if c > tol {
                    return Err(Error::InvalidBundle(format!("holonomies {a} and {b} do not commute ({c:?})")));
                }
            }
        }
        // Generic hermitian combination of the commuting family.
        let mut s = DMatrix::<Cx<T>>::zeros(rank, rank);
        for (j, u) in holonomies.iter().enumerate() {
            let herm = (u + u.adjoint()).scale(real(0.5));
            let anti = (u - u.adjoint()) * Cx::new(T::zero(), real(-0.5));
            let wa = real::<T>(1.0 / (j as f64 + std::f64::consts::SQRT_2));
            let wb = real::<T>(1.0 / (j as f64 + std::f64::consts::PI));
            s += herm.scale(wa) + anti.scale(wb);
        }
        let frame = SymmetricEigen::new(s).eigenvectors;
        let mut angles = vec![vec![T::zero(); n]; rank];
        for (j, u) in holonomies.iter().enumerate() {
            let d = frame.adjoint() * u * &frame;
            let off = d.iter().enumerate().filter(|(idx, _)| idx % (rank + 1) != 0).fold(T::zero(), |m, (_, c)| m.max(c.norm()));
            if off > real(1e-8) {
                return Err(Error::InvalidBundle("holonomies could not be simultaneously diagonalized".into()));
            }
            for (a, row) in angles.iter_mut().enumerate() {
                row[j] = wrap(d[(a, a)].arg() / T::two_pi());
            }
        }
        Self::from_angles(n, angles)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.angles.len()
    }

    pub fn angles(&self, channel: usize) -> &[T] {
        &self.angles[channel]
    }

    pub fn is_trivial(&self) -> bool {
        self.angles.iter().flatten().all(|x| *x == T::zero())
    }

    /// Conjugate (equivalently dual) bundle: angles negated mod 1.
    pub fn dual(&self) -> Self {
        FlatBundle {
            n: self.n,
            angles: self.angles.iter().map(|row| row.iter().map(|&x| wrap(-x)).collect()).collect(),
        }
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::InvalidBundle("direct sum over different tori".into()));
        }
        let mut angles = self.angles.clone();
        angles.extend(other.angles.iter().cloned());
        Ok(FlatBundle { n: self.n, angles })
    }

    /// `E₁ ⊠ E₂` over `T^{n1} × T^{n2}`; channel `(a, b)` has index `a · rank₂ + b`.
    pub fn external_product(&self, other: &Self) -> Self {
        let mut angles = Vec::with_capacity(self.rank() * other.rank());
        for a in &self.angles {
            for b in &other.angles {
                angles.push(a.iter().chain(b).copied().collect());
            }
        }
        FlatBundle { n: self.n + other.n, angles }
    }

    /// Mode of the dual bundle carrying the conjugate character of `mode`.
    pub fn conjugate_mode(&self, mode: &Mode) -> Mode {
        let k = mode
            .k
            .iter()
            .zip(&self.angles[mode.channel])
            .map(|(&kj, &t)| -kj - i32::from(t != T::zero()))
            .collect();
        Mode::new(k, mode.channel)
    }

    /// Frequency covector `2π(k + θ_a)`.
    pub fn frequency(&self, k: &[i32], channel: usize) -> Vec<T> {
        k.iter()
            .zip(&self.angles[channel])
            .map(|(&kj, &t)| T::two_pi() * (real::<T>(kj as f64) + t))
            .collect()
    }
}

impl<T: Real> Form<T> {
    /// Canonical flat connection: `e_{k,a} dx_I ↦ 2πi Σ_j (k_j + θ_{a,j}) dx_j ∧ dx_I`.
    pub fn flat_differential(&self) -> Form<T> {
        let bundle = self.ambient().bundle();
        let mut out = Form::zero(self.ambient().clone());
        for (m, i, c) in self.terms() {
            let xi = bundle.frequency(&m.k, m.channel);
            for (j, x) in xi.into_iter().enumerate() {
                if let Some((s, idx)) = MultiIndex::axis(j).wedge(i) {
                    let v = c * Cx::new(T::zero(), if s > 0 { x } else { -x });
                    out.add_term(m.clone(), idx, v).expect("same mode");
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::{Ambient, FlatMetric};
    use crate::scalar::cx;

    #[test]
    fn dual_negates() {
        let b = FlatBundle::<f64>::line(&[1.0 / 3.0]);
        assert!((b.dual().angles(0)[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((b.dual().dual().angles(0)[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(FlatBundle::<f64>::trivial(2, 1).dual(), FlatBundle::trivial(2, 1));
    }

    #[test]
    fn differential_of_character() {
        let a = Ambient::scalar(FlatMetric::<f64>::euclidean(1), 2);
        let e = Form::from_terms(a, [(Mode::new(vec![1], 0), MultiIndex::empty(), cx(1.0, 0.0))]).unwrap();
        let de = e.flat_differential();
        let c = de.coefficient(&Mode::new(vec![1], 0), MultiIndex::axis(0));
        assert!((c - cx(0.0, 2.0 * std::f64::consts::PI)).norm() < 1e-14);
    }

    #[test]
    fn half_holonomy_lowest_mode() {
        let metric = FlatMetric::<f64>::euclidean(3);
        let a = Ambient::new(metric, FlatBundle::line(&[0.5, 0.0, 0.0]), 1).unwrap();
        let f = Form::constant(a, &[(MultiIndex::empty(), cx(1.0, 0.0))]).unwrap();
        let c = f.flat_differential().coefficient(&Mode::zero(3), MultiIndex::axis(0));
        assert!((c - cx(0.0, std::f64::consts::PI)).norm() < 1e-14);
    }

    #[test]
    fn unitary_holonomies() {
        // diag(e^{2πi/3}, -1) conjugated by a rotation, and a commuting diagonal partner.
        let (s, c) = (0.6f64, 0.8f64);
        let rot = DMatrix::from_row_slice(2, 2, &[cx(c, 0.0), cx(-s, 0.0), cx(s, 0.0), cx(c, 0.0)]);
        let w = Cx::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let d1 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![w, cx(-1.0, 0.0)]));
        let d2 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![cx(1.0, 0.0), cx(0.0, 1.0)]));
        let u1 = &rot * d1 * rot.adjoint();
        let u2 = &rot * d2 * rot.adjoint();
        let b = FlatBundle::from_unitaries(&[u1.clone(), u2]).unwrap();
        let mut got: Vec<(f64, f64)> = (0..2).map(|a| (b.angles(a)[0], b.angles(a)[1])).collect();
        got.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((got[0].0 - 1.0 / 3.0).abs() < 1e-12 && got[0].1.abs() < 1e-12);
        assert!((got[1].0 - 0.5).abs() < 1e-12 && (got[1].1 - 0.25).abs() < 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[cx(0.0, 0.0), cx(1.0, 0.0), cx(1.0, 0.0), cx(0.0, 0.0)]);
        assert!(FlatBundle::from_unitaries(&[u1, bad]).is_err());
    }
}
