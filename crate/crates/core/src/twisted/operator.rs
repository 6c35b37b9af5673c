use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exterior::{submatrix, FiberBasis, FiberGeometry, Mode};
use crate::scalar::{CxOps, from_real, Cx, Real};

/// Dense matrix between the spans of a list of input modes and a list of output modes.
///
/// Row/column `m · f + p` is fiber basis element `p` of the `m`-th mode.
#[derive(Clone, Debug)]
pub struct Block<T: Real> {
    pub domain: Vec<Mode>,
    pub codomain: Vec<Mode>,
    pub matrix: DMatrix<Cx<T>>,
}

/// Linear map on truncated form spaces, as a family of independent blocks.
///
/// Constant flux yields one block per mode; band-limited flux a single coupled block.
#[derive(Clone, Debug)]
pub struct BlockOperator<T: Real> {
    pub domain_fiber: FiberBasis,
    pub codomain_fiber: FiberBasis,
    pub blocks: Vec<Block<T>>,
}

impl<T: Real> BlockOperator<T> {
    pub fn is_mode_diagonal(&self) -> bool {
        self.blocks.iter().all(|b| b.domain.len() == 1 && b.codomain == b.domain)
    }

    pub fn block(&self, mode: &Mode) -> Option<&Block<T>> {
        self.blocks.iter().find(|b| b.domain.len() == 1 && &b.domain[0] == mode)
    }

    pub fn max_abs(&self) -> T {
        self.blocks.iter().fold(T::zero(), |m, b| m.max(b.matrix.iter().fold(T::zero(), |a, c| a.max(c.norm()))))
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        let same = self.domain_fiber == other.domain_fiber
            && self.codomain_fiber == other.codomain_fiber
            && self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.domain == b.domain && a.codomain == b.codomain);
        if same {
            Ok(())
        } else {
            Err(Error::AmbientMismatch("operators have different block structure".into()))
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&DMatrix<Cx<T>>, &DMatrix<Cx<T>>) -> DMatrix<Cx<T>>) -> Self {
        BlockOperator {
            domain_fiber: self.domain_fiber.clone(),
            codomain_fiber: self.codomain_fiber.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| Block { domain: a.domain.clone(), codomain: a.codomain.clone(), matrix: f(&a.matrix, &b.matrix) })
                .collect(),
        }
    }

    pub fn map_blocks(&self, f: impl Fn(&Block<T>) -> DMatrix<Cx<T>>) -> Self {
        BlockOperator {
            domain_fiber: self.domain_fiber.clone(),
            codomain_fiber: self.codomain_fiber.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| Block { domain: b.domain.clone(), codomain: b.codomain.clone(), matrix: f(b) })
                .collect(),
        }
    }

    /// `self ∘ other`; blocks are matched by their mode lists.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.domain_fiber != other.codomain_fiber {
            return Err(Error::AmbientMismatch("fiber mismatch in composition".into()));
        }
        let index: BTreeMap<&[Mode], &Block<T>> = self.blocks.iter().map(|b| (b.domain.as_slice(), b)).collect();
        let mut blocks = Vec::with_capacity(other.blocks.len());
        for b in &other.blocks {
            let a = index
                .get(b.codomain.as_slice())
                .ok_or_else(|| Error::AmbientMismatch("no matching block in composition".into()))?;
            blocks.push(Block { domain: b.domain.clone(), codomain: a.codomain.clone(), matrix: &a.matrix * &b.matrix });
        }
        Ok(BlockOperator {
            domain_fiber: other.domain_fiber.clone(),
            codomain_fiber: self.codomain_fiber.clone(),
            blocks,
        })
    }

    /// Adjoint with respect to the L² Gram matrices of domain and codomain.
    pub fn gram_adjoint(&self, geometry: &FiberGeometry<T>) -> Self {
        let sd = geometry.basis.selection(&self.domain_fiber);
        let sc = geometry.basis.selection(&self.codomain_fiber);
        let gd_inv = submatrix(&geometry.gram_inv, &sd, &sd).map(from_real);
        let gc = submatrix(&geometry.gram, &sc, &sc).map(from_real);
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let ah = b.matrix.adjoint();
                let m = kron_left(&gd_inv, b.domain.len(), &ah);
                Block {
                    domain: b.codomain.clone(),
                    codomain: b.domain.clone(),
                    matrix: kron_right(&m, &gc, b.codomain.len()),
                }
            })
            .collect();
        BlockOperator {
            domain_fiber: self.codomain_fiber.clone(),
            codomain_fiber: self.domain_fiber.clone(),
            blocks,
        }
    }

    /// Conjugation `L_cᴴ M L_d⁻ᴴ` into L²-orthonormal coordinates.
    pub fn orthonormal_blocks(&self, geometry: &FiberGeometry<T>) -> Vec<DMatrix<Cx<T>>> {
        let od = geometry.ortho.restrict(&geometry.basis.selection(&self.domain_fiber));
        let oc = geometry.ortho.restrict(&geometry.basis.selection(&self.codomain_fiber));
        let lc_h = oc.lower.adjoint();
        let ld_inv_h = od.lower_inv.adjoint();
        self.blocks
            .iter()
            .map(|b| kron_right(&kron_left(&lc_h, b.codomain.len(), &b.matrix), &ld_inv_h, b.domain.len()))
            .collect()
    }

    /// Largest L² operator norm over blocks.
    pub fn operator_norm(&self, geometry: &FiberGeometry<T>) -> T {
        self.orthonormal_blocks(geometry)
            .into_iter()
            .map(|m| {
                if m.is_empty() {
                    T::zero()
                } else {
                    m.singular_values().iter().fold(T::zero(), |a, &s| a.max(s))
                }
            })
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Largest entry of `ΓA - (ΓA)ᴴ` for a square operator.
    pub fn hermiticity_defect(&self, geometry: &FiberGeometry<T>) -> T {
        let adj = self.gram_adjoint(geometry);
        self.sub(&adj).map(|d| d.max_abs()).unwrap_or_else(|_| T::max_value().unwrap())
    }
}

/// `(I_copies ⊗ g) · m`.
pub(crate) fn kron_left<T: Real>(g: &DMatrix<Cx<T>>, copies: usize, m: &DMatrix<Cx<T>>) -> DMatrix<Cx<T>> {
    let f = g.nrows();
    debug_assert_eq!(g.ncols() * copies, m.nrows());
    let fin = g.ncols();
    let mut out = DMatrix::zeros(f * copies, m.ncols());
    for c in 0..copies {
        let rows = m.rows(c * fin, fin);
        out.rows_mut(c * f, f).copy_from(&(g * rows));
    }
    out
}

/// `m · (I_copies ⊗ g)`.
pub(crate) fn kron_right<T: Real>(m: &DMatrix<Cx<T>>, g: &DMatrix<Cx<T>>, copies: usize) -> DMatrix<Cx<T>> {
    let f = g.ncols();
    let fin = g.nrows();
    debug_assert_eq!(fin * copies, m.ncols());
    let mut out = DMatrix::zeros(m.nrows(), f * copies);
    for c in 0..copies {
        let cols = m.columns(c * fin, fin);
        out.columns_mut(c * f, f).copy_from(&(cols * g));
    }
    out
}
