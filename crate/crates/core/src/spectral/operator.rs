use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exterior::{degree_diagonal, differential_symbol, submatrix, wedge_left, FiberBasis, Mode, Orthonormalizer, Parity};
use crate::scalar::{i_pow, parity_sign, Cx};
use crate::twisted::{sorted_eigen, FluxForm, TwistedTorus};

/// Odd signature operator `D^E_H` of a flat torus of dimension `2m - 1` with constant flux.
///
/// On all forms `D = i^{m+p(p+1)} (∇^H ⋆ - (-1)^p ⋆ ∇^{-H̄})`, `p` the input degree; it preserves
/// even forms, where it is `i^m (-1)^h (∇^H ⋆ - ⋆ ∇^{-H̄})` on `Ω^{2h}`. Blocks are returned in
/// L²-orthonormal coordinates of the even forms, hence hermitian.
#[derive(Clone, Debug)]
pub struct OddSignatureOperator {
    torus: TwistedTorus<f64>,
    m: usize,
    flux_plus: DMatrix<Cx<f64>>,
    flux_minus: DMatrix<Cx<f64>>,
    sign: DMatrix<Cx<f64>>,
    phase: DMatrix<Cx<f64>>,
    even: Vec<usize>,
    ortho: Orthonormalizer<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LabeledEigenvalue {
    pub value: f64,
    pub mode: Vec<i32>,
    pub channel: usize,
}

impl OddSignatureOperator {
    pub fn new(torus: &TwistedTorus<f64>) -> Result<Self> {
        let n = torus.dim();
        if n % 2 == 0 {
            return Err(Error::EvenDimension(n));
        }
        if !torus.flux().is_constant() {
            return Err(Error::NonConstantFlux);
        }
        let m = n.div_ceil(2);
        let h = torus.flux().constant_part();
        let hm = torus.flux().neg_conjugate().constant_part();
        let phase = degree_diagonal(n, |p| i_pow((m + p * (p + 1)) as i64));
        let sign = degree_diagonal(n, |p| Cx::new(parity_sign(p) as f64, 0.0));
        let geo = torus.geometry();
        let even = geo.basis.selection(&FiberBasis::new(n, Parity::Even));
        Ok(OddSignatureOperator {
            m,
            flux_plus: wedge_left(n, &h),
            flux_minus: wedge_left(n, &hm),
            sign,
            phase,
            ortho: geo.ortho.restrict(&even),
            even,
            torus: torus.clone(),
        })
    }

    pub fn torus(&self) -> &TwistedTorus<f64> {
        &self.torus
    }

    pub fn half_dim(&self) -> usize {
        self.m
    }

    pub fn flux(&self) -> &FluxForm<f64> {
        self.torus.flux()
    }

    /// Size of one block: even forms times one channel.
    pub fn block_dim(&self) -> usize {
        self.even.len()
    }

    /// `D` on all forms at frequency `ξ`, coordinate basis.
    pub fn full_block_at(&self, xi: &[f64]) -> DMatrix<Cx<f64>> {
        let sym = differential_symbol(xi);
        let star = &self.torus.geometry().star;
        let plus = &sym + &self.flux_plus;
        let minus = &sym + &self.flux_minus;
        (plus * star - star * minus * &self.sign) * &self.phase
    }

    /// Hermitian block on even forms at frequency `ξ`.
    pub fn block_at(&self, xi: &[f64]) -> DMatrix<Cx<f64>> {
        let d = submatrix(&self.full_block_at(xi), &self.even, &self.even);
        let o = self.ortho.to_orthonormal(&d);
        (&o + o.adjoint()).scale(0.5)
    }

    pub fn block(&self, mode: &Mode) -> DMatrix<Cx<f64>> {
        self.block_at(&self.torus.frequency(mode))
    }

    /// The zeroth-order part `D(ξ = 0)`.
    pub fn potential(&self) -> DMatrix<Cx<f64>> {
        self.block_at(&vec![0.0; self.torus.dim()])
    }

    /// Leading symbol `D(ξ) - D(0)`, linear in `ξ`.
    pub fn symbol(&self, xi: &[f64]) -> DMatrix<Cx<f64>> {
        self.block_at(xi) - self.potential()
    }

    /// `T = i^{m+p(p+1)} ⋆` on all forms, phase by input degree.
    pub fn t_matrix(&self) -> DMatrix<Cx<f64>> {
        &self.torus.geometry().star * &self.phase
    }

    /// Largest `|D - Dᴴ|` entry over blocks within `radius`, before symmetrisation.
    pub fn hermiticity_defect(&self, radius: usize) -> f64 {
        self.torus
            .modes(radius)
            .par_iter()
            .map(|m| {
                let d = submatrix(&self.full_block_at(&self.torus.frequency(m)), &self.even, &self.even);
                let o = self.ortho.to_orthonormal(&d);
                (&o - o.adjoint()).camax()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Largest entry of `T D T - D` on all forms within `radius`.
    pub fn t_conjugation_defect(&self, radius: usize) -> f64 {
        let t = self.t_matrix();
        self.torus
            .modes(radius)
            .par_iter()
            .map(|m| {
                let d = self.full_block_at(&self.torus.frequency(m));
                (&t * &d * &t - &d).camax()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Eigenvalues of one block, ascending.
    pub fn block_spectrum(&self, mode: &Mode) -> Vec<f64> {
        sorted_eigen(&self.block(mode)).0
    }

    /// All eigenvalues of blocks within `radius`, sorted by value then mode.
    pub fn spectrum(&self, radius: usize) -> Vec<LabeledEigenvalue> {
        let mut out: Vec<LabeledEigenvalue> = self
            .torus
            .modes(radius)
            .par_iter()
            .flat_map_iter(|m| {
                self.block_spectrum(m)
                    .into_iter()
                    .map(|value| LabeledEigenvalue { value, mode: m.k.clone(), channel: m.channel })
                    .collect::<Vec<_>>()
            })
            .collect();
        out.sort_by(|a, b| a.value.total_cmp(&b.value).then_with(|| a.mode.cmp(&b.mode)).then(a.channel.cmp(&b.channel)));
        out
    }
}
