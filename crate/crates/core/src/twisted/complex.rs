use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::kernel::numerical_kernel;
use super::operator::{kron_left, kron_right, Block, BlockOperator};
use super::FluxForm;
use crate::bundle::FlatBundle;
use crate::error::{Error, Result};
use crate::exterior::{
    degree_diagonal, differential_symbol, lattice_box, submatrix, wedge_left, Ambient, FiberBasis, FiberGeometry,
    FlatMetric, Form, Mode, MultiIndex, Parity,
};
use crate::scalar::{CxOps, from_real, real, to_f64, Cx, Real};

/// Flat torus with a flat unitary bundle and a closed flux form.
#[derive(Clone, Debug)]
pub struct TwistedTorus<T: Real> {
    metric: FlatMetric<T>,
    bundle: FlatBundle<T>,
    flux: FluxForm<T>,
    geometry: Arc<FiberGeometry<T>>,
}

/// Both realizations of the adjoint of a twisted differential.
#[derive(Clone, Debug)]
pub struct AdjointPair<T: Real> {
    /// `-(-1)^{p(n-p+1)} ⋆ ∇^{-H̄} ⋆` on output degree `p`.
    pub formula: BlockOperator<T>,
    /// `Γ⁻¹ Aᴴ Γ`.
    pub gram: BlockOperator<T>,
    pub mismatch: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct CohomologyResult<T: Real> {
    pub b_even: usize,
    pub b_odd: usize,
    pub kernel_tolerance: f64,
    pub verified_mode_radius: usize,
    #[serde(skip)]
    pub harmonic_even: Vec<Form<T>>,
    #[serde(skip)]
    pub harmonic_odd: Vec<Form<T>>,
}

impl<T: Real> CohomologyResult<T> {
    pub fn harmonic(&self, parity: Parity) -> Vec<Form<T>> {
        match parity {
            Parity::Even => self.harmonic_even.clone(),
            Parity::Odd => self.harmonic_odd.clone(),
            Parity::All => self.harmonic_even.iter().chain(&self.harmonic_odd).cloned().collect(),
        }
    }

    pub fn betti(&self, parity: Parity) -> usize {
        match parity {
            Parity::Even => self.b_even,
            Parity::Odd => self.b_odd,
            Parity::All => self.b_even + self.b_odd,
        }
    }
}

/// Result of `ε = e^{-B}∧` acting between `∇^{H'}` and `∇^{H}`.
#[derive(Clone, Debug)]
pub struct GaugeTransform<T: Real> {
    /// `H' = H - dB`; may carry a degree-1 part when `B` has a non-constant function part.
    pub flux: FluxForm<T>,
    pub exponential: Form<T>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KunnethReport {
    pub product_even: usize,
    pub product_odd: usize,
    pub predicted_even: usize,
    pub predicted_odd: usize,
    pub betti_match: bool,
    /// `|∇(α ⊠ β̄)|` over harmonic pairs with the conjugated second flux.
    pub closedness_defect: f64,
    /// Same with `π₂*H₂` in place of `π₂*H̄₂`.
    pub naive_closedness_defect: f64,
    /// Rank of the images `α ⊠ β̄` inside the product harmonic space.
    pub image_rank: usize,
    /// Largest distance of an image from the product harmonic space.
    pub harmonic_residual: f64,
    pub consistent: bool,
}

#[derive(Clone, Debug)]
pub struct PoincareReport<T: Real> {
    /// `M_ab = ∫ ω_a ∧ η̄_b`, rows over `H(E, H)`, columns over `H(E, -H̄)`.
    pub matrix: DMatrix<Cx<T>>,
    pub left: (usize, usize),
    pub right: (usize, usize),
    pub smallest_singular_value: T,
    pub nondegenerate: bool,
}

fn zero<T: Real>() -> Cx<T> {
    Cx::new(T::zero(), T::zero())
}

impl<T: Real> TwistedTorus<T> {
    pub fn new(metric: FlatMetric<T>, bundle: FlatBundle<T>, flux: FluxForm<T>) -> Result<Self> {
        let n = metric.dim();
        if bundle.dim() != n || flux.dim() != n {
            return Err(Error::AmbientMismatch(format!(
                "metric dimension {n}, bundle dimension {}, flux dimension {}",
                bundle.dim(),
                flux.dim()
            )));
        }
        let geometry = Arc::new(FiberGeometry::new(&metric));
        Ok(TwistedTorus { metric, bundle, flux, geometry })
    }

    pub fn untwisted(metric: FlatMetric<T>) -> Self {
        let n = metric.dim();
        Self::new(metric, FlatBundle::trivial(n, 1), FluxForm::zero(n)).expect("consistent dimensions")
    }

    pub fn with_flux(&self, flux: FluxForm<T>) -> Result<Self> {
        if flux.dim() != self.dim() {
            return Err(Error::AmbientMismatch("flux on a different torus".into()));
        }
        Ok(TwistedTorus { flux, ..self.clone() })
    }

    pub fn with_bundle(&self, bundle: FlatBundle<T>) -> Result<Self> {
        Self::new(self.metric.clone(), bundle, self.flux.clone())
    }

    /// `(E, -H̄)`, the partner in the duality pairing.
    pub fn pairing_partner(&self) -> Self {
        TwistedTorus { flux: self.flux.neg_conjugate(), ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn metric(&self) -> &FlatMetric<T> {
        &self.metric
    }

    pub fn bundle(&self) -> &FlatBundle<T> {
        &self.bundle
    }

    pub fn flux(&self) -> &FluxForm<T> {
        &self.flux
    }

    pub fn geometry(&self) -> &FiberGeometry<T> {
        &self.geometry
    }

    pub fn ambient(&self, radius: usize) -> Arc<Ambient<T>> {
        Ambient::new(self.metric.clone(), self.bundle.clone(), radius).expect("consistent dimensions")
    }

    /// All modes `(k, a)` with `‖k‖_∞ ≤ radius`, channel-major.
    pub fn modes(&self, radius: usize) -> Vec<Mode> {
        let box_ = lattice_box(self.dim(), radius);
        (0..self.bundle.rank())
            .flat_map(|a| box_.iter().map(move |k| Mode::new(k.clone(), a)))
            .collect()
    }

    pub fn frequency(&self, mode: &Mode) -> Vec<T> {
        self.bundle.frequency(&mode.k, mode.channel)
    }

    fn require_constant(&self) -> Result<()> {
        if self.flux.is_constant() {
            Ok(())
        } else {
            Err(Error::NonConstantFlux)
        }
    }

    /// `∇^{H}` at one mode on all forms, using only the constant part of `flux`.
    pub fn fiber_differential(&self, flux: &FluxForm<T>, mode: &Mode) -> DMatrix<Cx<T>> {
        let mut m = differential_symbol(&self.frequency(mode));
        let c = flux.constant_part();
        if !c.is_empty() {
            m += wedge_left(self.dim(), &c);
        }
        m
    }

    /// Twisted Laplacian at one mode on all forms, in the coordinate basis.
    pub fn fiber_laplacian(&self, flux: &FluxForm<T>, mode: &Mode) -> DMatrix<Cx<T>> {
        let d = self.fiber_differential(flux, mode);
        let geo = &self.geometry;
        let dt = geo.gram_adjoint(&d, &geo.basis, &geo.basis);
        &dt * &d + &d * &dt
    }

    /// Orthonormal-coordinate (hermitian) Laplacian block at one mode, restricted to a parity.
    pub fn hermitian_laplacian(&self, mode: &Mode, parity: Parity) -> DMatrix<Cx<T>> {
        let geo = &self.geometry;
        let lap = self.fiber_laplacian(&self.flux, mode);
        let sel = geo.basis.selection(&FiberBasis::new(self.dim(), parity));
        geo.ortho.restrict(&sel).to_orthonormal(&submatrix(&lap, &sel, &sel))
    }

    fn flux_wedges(&self, flux: &FluxForm<T>) -> BTreeMap<Vec<i32>, DMatrix<Cx<T>>> {
        flux.by_mode().into_iter().map(|(q, terms)| (q, wedge_left(self.dim(), &terms))).collect()
    }

    /// Matrix of `∇^{flux}` from `domain` modes to `codomain` modes; images outside `codomain` are dropped.
    fn nabla_between(
        &self,
        flux: &FluxForm<T>,
        domain: &[Mode],
        codomain: &[Mode],
        from: &FiberBasis,
        to: &FiberBasis,
    ) -> DMatrix<Cx<T>> {
        let wedges = self.flux_wedges(flux);
        let geo = &self.geometry;
        let (sf, st) = (geo.basis.selection(from), geo.basis.selection(to));
        let (ff, ft) = (from.len(), to.len());
        let index: HashMap<&Mode, usize> = codomain.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let zero_q = vec![0; self.dim()];
        let mut out = DMatrix::zeros(codomain.len() * ft, domain.len() * ff);
        for (j, m) in domain.iter().enumerate() {
            if let Some(&i) = index.get(m) {
                let mut sym = differential_symbol(&self.frequency(m));
                if let Some(w) = wedges.get(&zero_q) {
                    sym += w;
                }
                out.view_mut((i * ft, j * ff), (ft, ff)).copy_from(&submatrix(&sym, &st, &sf));
            }
            for (q, w) in wedges.iter().filter(|(q, _)| **q != zero_q) {
                if let Some(&i) = index.get(&m.shifted(q)) {
                    let block = submatrix(w, &st, &sf);
                    let mut view = out.view_mut((i * ft, j * ff), (ft, ff));
                    view += block;
                }
            }
        }
        out
    }

    fn assemble(&self, flux: &FluxForm<T>, parity: Parity, radius: usize) -> BlockOperator<T> {
        let n = self.dim();
        let from = FiberBasis::new(n, parity);
        let to = FiberBasis::new(n, parity.flip());
        let blocks = if flux.is_constant() {
            self.modes(radius)
                .into_par_iter()
                .map(|m| {
                    let full = self.fiber_differential(flux, &m);
                    let geo = &self.geometry;
                    let matrix = submatrix(&full, &geo.basis.selection(&to), &geo.basis.selection(&from));
                    Block { domain: vec![m.clone()], codomain: vec![m], matrix }
                })
                .collect()
        } else {
            let domain = self.modes(radius);
            let codomain = reachable(&domain, flux);
            let matrix = self.nabla_between(flux, &domain, &codomain, &from, &to);
            vec![Block { domain, codomain, matrix }]
        };
        BlockOperator { domain_fiber: from, codomain_fiber: to, blocks }
    }

    /// `∇^{E,H} = ∇^E + H∧` from `parity` forms to the opposite parity.
    ///
    /// Constant flux gives one block per mode. Band-limited flux gives one coupled block whose
    /// codomain is enlarged by the flux mode radius, so nothing is truncated away.
    pub fn differential(&self, parity: Parity, radius: usize) -> BlockOperator<T> {
        self.assemble(&self.flux, parity, radius)
    }

    /// Largest entry of `∇²` composed through the enlarged codomains.
    pub fn square_defect(&self, parity: Parity, radius: usize) -> T {
        let first = self.differential(parity, radius);
        let second = if self.flux.is_constant() {
            self.differential(parity.flip(), radius)
        } else {
            let n = self.dim();
            let domain = first.blocks[0].codomain.clone();
            let codomain = reachable(&domain, &self.flux);
            let (from, to) = (FiberBasis::new(n, parity.flip()), FiberBasis::new(n, parity));
            let matrix = self.nabla_between(&self.flux, &domain, &codomain, &from, &to);
            BlockOperator { domain_fiber: from, codomain_fiber: to, blocks: vec![Block { domain, codomain, matrix }] }
        };
        second.compose(&first).map(|c| c.max_abs()).expect("compatible blocks")
    }

    /// Adjoint of [`Self::differential`] by the star formula and by the Gram matrix.
    pub fn adjoint(&self, parity: Parity, radius: usize) -> Result<AdjointPair<T>> {
        let n = self.dim();
        let op = self.differential(parity, radius);
        let gram = op.gram_adjoint(&self.geometry);
        let dual = self.flux.neg_conjugate();
        let geo = &self.geometry;
        let sign = degree_diagonal::<T>(n, |p| {
            let e = p * (n + 1 - p);
            from_real(if e % 2 == 0 { -T::one() } else { T::one() })
        });
        let rows = geo.basis.selection(&FiberBasis::new(n, parity));
        let cols = geo.basis.selection(&FiberBasis::new(n, parity.flip()));
        let all = FiberBasis::new(n, Parity::All);
        let left = &sign * &geo.star;
        let blocks = if self.flux.is_constant() {
            op.blocks
                .iter()
                .map(|b| {
                    let m = &b.domain[0];
                    let full = &left * self.fiber_differential(&dual, m) * &geo.star;
                    Block { domain: b.codomain.clone(), codomain: b.domain.clone(), matrix: submatrix(&full, &rows, &cols) }
                })
                .collect()
        } else {
            let b = &op.blocks[0];
            let nab = self.nabla_between(&dual, &b.codomain, &b.domain, &all, &all);
            let full = kron_right(&kron_left(&left, b.domain.len(), &nab), &geo.star, b.codomain.len());
            let f = all.len();
            let row_idx: Vec<usize> =
                (0..b.domain.len()).flat_map(|i| rows.iter().map(move |&r| i * f + r)).collect();
            let col_idx: Vec<usize> =
                (0..b.codomain.len()).flat_map(|j| cols.iter().map(move |&c| j * f + c)).collect();
            vec![Block { domain: b.codomain.clone(), codomain: b.domain.clone(), matrix: submatrix(&full, &row_idx, &col_idx) }]
        };
        let formula = BlockOperator { domain_fiber: op.codomain_fiber.clone(), codomain_fiber: op.domain_fiber.clone(), blocks };
        let mismatch = formula.sub(&gram)?.max_abs();
        let scale = T::one().max(op.max_abs());
        if mismatch > real::<T>(100.0) * T::identity_tolerance() * scale {
            return Err(Error::AdjointMismatch(to_f64(mismatch)));
        }
        Ok(AdjointPair { formula, gram, mismatch })
    }

    /// `Δ = ∇†∇ + ∇∇†` restricted to one parity, in the coordinate basis.
    pub fn laplacian(&self, parity: Parity, radius: usize) -> Result<BlockOperator<T>> {
        self.require_constant()?;
        let fiber = FiberBasis::new(self.dim(), parity);
        let sel = self.geometry.basis.selection(&fiber);
        let blocks = self
            .modes(radius)
            .into_par_iter()
            .map(|m| {
                let lap = self.fiber_laplacian(&self.flux, &m);
                Block { domain: vec![m.clone()], codomain: vec![m], matrix: submatrix(&lap, &sel, &sel) }
            })
            .collect();
        Ok(BlockOperator { domain_fiber: fiber.clone(), codomain_fiber: fiber, blocks })
    }

    /// Kernel of one mode block of the Laplacian, as forms.
    pub fn harmonic_block(&self, mode: &Mode, parity: Parity, ambient: &Arc<Ambient<T>>) -> Result<Vec<Form<T>>> {
        let n = self.dim();
        let fiber = FiberBasis::new(n, parity);
        let sel = self.geometry.basis.selection(&fiber);
        let h = self.hermitian_laplacian(mode, parity);
        let ortho = self.geometry.ortho.restrict(&sel);
        numerical_kernel(&h, T::kernel_tolerance(), &mode.k)?
            .into_iter()
            .map(|v| Form::from_mode_vector(ambient.clone(), mode, &fiber, &ortho.from_orthonormal_vector(&v)))
            .collect()
    }

    /// Twisted cohomology as Laplacian kernels over every block within `radius`.
    ///
    /// For constant flux only the zero-frequency block can carry harmonic forms; the sweep over the
    /// remaining blocks checks this rather than assuming it.
    pub fn cohomology(&self, radius: usize) -> Result<CohomologyResult<T>> {
        self.require_constant()?;
        let ambient = self.ambient(radius);
        let per_mode: Vec<(Vec<Form<T>>, Vec<Form<T>>)> = self
            .modes(radius)
            .into_par_iter()
            .map(|m| {
                Ok((
                    self.harmonic_block(&m, Parity::Even, &ambient)?,
                    self.harmonic_block(&m, Parity::Odd, &ambient)?,
                ))
            })
            .collect::<Result<_>>()?;
        let (mut harmonic_even, mut harmonic_odd) = (Vec::new(), Vec::new());
        for (e, o) in per_mode {
            harmonic_even.extend(e);
            harmonic_odd.extend(o);
        }
        Ok(CohomologyResult {
            b_even: harmonic_even.len(),
            b_odd: harmonic_odd.len(),
            kernel_tolerance: to_f64(T::kernel_tolerance()),
            verified_mode_radius: radius,
            harmonic_even,
            harmonic_odd,
        })
    }

    /// Sparse application of `∇^{flux}` to a form of this torus.
    pub fn apply_differential(&self, flux: &FluxForm<T>, form: &Form<T>, out_radius: usize) -> Result<Form<T>> {
        let h = flux.to_form(&self.metric, flux.radius());
        let d = form.flat_differential();
        let d = Form::from_terms(form.ambient().with_radius(out_radius), d.terms().map(|(m, i, c)| (m.clone(), i, c)))?;
        d.add(&h.wedge(form, out_radius)?)
    }

    /// Gauge transformation by an even scalar form `B`: `H' = H - dB` and `ε = e^{-B}∧`,
    /// with `∇^{H} ∘ ε = ε ∘ ∇^{H'}`.
    pub fn gauge_transform(&self, b: &Form<T>) -> Result<GaugeTransform<T>> {
        if !b.ambient().is_scalar() || b.ambient().metric() != &self.metric {
            return Err(Error::AmbientMismatch("gauge form must be a scalar form on the same torus".into()));
        }
        if b.terms().any(|(_, i, c)| i.degree() % 2 == 1 && c.norm() > T::zero()) {
            return Err(Error::InvalidParameter("gauge form must have even degree".into()));
        }
        let db = b.flat_differential();
        let flux = FluxForm::with_connection_part(
            self.dim(),
            self.flux
                .terms()
                .map(|(k, i, c)| (k.to_vec(), i, c))
                .chain(db.terms().map(|(m, i, c)| (m.k.clone(), i, -c))),
        )?;
        Ok(GaugeTransform { flux, exponential: exterior_exp(&b.scale(Cx::new(-T::one(), T::zero())))? })
    }

    /// `|∇^H(εω) - ε∇^{H'}ω|` relative to `|ω|`, maximized over the given test forms.
    pub fn intertwining_defect(&self, gauge: &GaugeTransform<T>, tests: &[Form<T>]) -> Result<T> {
        let e = &gauge.exponential;
        let mut worst = T::zero();
        for w in tests {
            let r = w.max_mode() + e.max_mode() + self.flux.radius().max(gauge.flux.radius()) + 1;
            let w = Form::from_terms(self.ambient(r), w.terms().map(|(m, i, c)| (m.clone(), i, c)))?;
            let lhs = self.apply_differential(&self.flux, &e.wedge(&w, r)?, r)?;
            let rhs = e.wedge(&self.apply_differential(&gauge.flux, &w, r)?, r)?;
            let diff = lhs.sub(&rhs)?;
            worst = worst.max(diff.max_abs() / T::one().max(w.max_abs()));
        }
        Ok(worst)
    }

    /// Matrix of `ε` from the modes within `radius` to every mode it reaches.
    pub fn intertwiner(&self, gauge: &GaugeTransform<T>, radius: usize) -> BlockOperator<T> {
        let n = self.dim();
        let all = FiberBasis::new(n, Parity::All);
        let domain = self.modes(radius);
        let mut by_mode: BTreeMap<Vec<i32>, Vec<(MultiIndex, Cx<T>)>> = BTreeMap::new();
        for (m, i, c) in gauge.exponential.terms() {
            by_mode.entry(m.k.clone()).or_default().push((i, c));
        }
        let codomain: Vec<Mode> = domain
            .iter()
            .flat_map(|m| by_mode.keys().map(move |q| m.shifted(q)))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<&Mode, usize> = codomain.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let f = all.len();
        let mut matrix = DMatrix::zeros(codomain.len() * f, domain.len() * f);
        for (q, terms) in &by_mode {
            let w = wedge_left(n, terms);
            for (j, m) in domain.iter().enumerate() {
                if let Some(&i) = index.get(&m.shifted(q)) {
                    let mut view = matrix.view_mut((i * f, j * f), (f, f));
                    view += &w;
                }
            }
        }
        BlockOperator { domain_fiber: all.clone(), codomain_fiber: all, blocks: vec![Block { domain, codomain, matrix }] }
    }

    /// Largest entry of `c_λ Δ_H c_λ̄ - Δ_{H^{(λ)}}` over blocks within `radius`, `c_λ = λ^{⌊p/2⌋}`.
    pub fn scaling_conjugation_defect(&self, lambda: Cx<T>, radius: usize) -> Result<T> {
        self.require_constant()?;
        if (lambda.norm() - T::one()).abs() > T::identity_tolerance() {
            return Err(Error::InvalidParameter("λ must lie on the unit circle".into()));
        }
        let scaled = self.flux.rescale(lambda)?;
        let n = self.dim();
        let c = degree_diagonal(n, |p| lambda.powi((p / 2) as i32));
        let cbar = degree_diagonal(n, |p| lambda.conj().powi((p / 2) as i32));
        let defect = self
            .modes(radius)
            .into_par_iter()
            .map(|m| {
                let lhs = &c * self.fiber_laplacian(&self.flux, &m) * &cbar;
                (lhs - self.fiber_laplacian(&scaled, &m)).camax()
            })
            .reduce(|| T::zero(), |a, b| a.max(b));
        Ok(defect)
    }

    /// Product `X₁ × X₂` with bundle `E₁ ⊠ E₂*` and flux `π₁*H₁ + π₂*H̄₂`.
    pub fn kunneth_product(&self, other: &Self) -> Result<Self> {
        let (n1, n2) = (self.dim(), other.dim());
        let n = n1 + n2;
        let flux = FluxForm::with_connection_part(
            n,
            self.flux
                .pullback(n, 0)
                .terms()
                .map(|(k, i, c)| (k.to_vec(), i, c))
                .chain(other.flux.conjugate().pullback(n, n1).terms().map(|(k, i, c)| (k.to_vec(), i, c)))
                .collect::<Vec<_>>(),
        )?;
        Self::new(self.metric.product(&other.metric), self.bundle.external_product(&other.bundle.dual()), flux)
    }

    /// Checks the product formula for twisted Betti numbers and that `α ⊠ β̄` realizes it.
    pub fn kunneth_check(&self, other: &Self, radius: usize) -> Result<KunnethReport> {
        let c1 = self.cohomology(radius)?;
        let c2 = other.cohomology(radius)?;
        let product = self.kunneth_product(other)?;
        let cp = product.cohomology(radius.min(kunneth_radius(product.dim())))?;
        let predicted_even = c1.b_even * c2.b_even + c1.b_odd * c2.b_odd;
        let predicted_odd = c1.b_even * c2.b_odd + c1.b_odd * c2.b_even;

        let naive_flux = FluxForm::with_connection_part(
            product.dim(),
            self.flux
                .pullback(product.dim(), 0)
                .terms()
                .map(|(k, i, c)| (k.to_vec(), i, c))
                .chain(other.flux.pullback(product.dim(), self.dim()).terms().map(|(k, i, c)| (k.to_vec(), i, c)))
                .collect::<Vec<_>>(),
        )?;
        let r = radius + 2;
        let ambient = product.ambient(r);
        let mut images = Vec::new();
        for a in c1.harmonic(Parity::All) {
            for b in c2.harmonic(Parity::All) {
                images.push(external_product(&a, &b.conjugate(), &ambient)?);
            }
        }
        // Zero-frequency harmonic forms satisfy `H₂ ∧ β = 0`, which would make the flux convention
        // invisible; the closedness test uses the cohomologous cocycles `β + ∇η` instead.
        let mut defect = T::zero();
        let mut naive = T::zero();
        for a in c1.harmonic(Parity::All) {
            for b in c2.harmonic(Parity::All) {
                let shifted = other.exact_perturbation(&b, r)?;
                let g = external_product(&a, &shifted.conjugate(), &ambient)?;
                defect = defect.max(product.apply_differential(product.flux(), &g, r)?.max_abs());
                naive = naive.max(product.apply_differential(&naive_flux, &g, r)?.max_abs());
            }
        }
        let basis: Vec<Form<T>> = cp
            .harmonic(Parity::All)
            .into_iter()
            .map(|h| Form::from_terms(ambient.clone(), h.terms().map(|(m, i, c)| (m.clone(), i, c))))
            .collect::<Result<_>>()?;
        let coords = DMatrix::from_fn(basis.len(), images.len(), |i, j| {
            images[j].inner_product(&basis[i]).expect("same ambient")
        });
        let mut residual = T::zero();
        for (j, g) in images.iter().enumerate() {
            let mut rest = g.clone();
            for (i, h) in basis.iter().enumerate() {
                rest = rest.sub(&h.scale(coords[(i, j)]))?;
            }
            residual = residual.max(rest.norm());
        }
        let image_rank = if coords.is_empty() { 0 } else { numerical_rank(&coords) };
        let tol = real::<T>(1e-8);
        let betti_match = cp.b_even == predicted_even && cp.b_odd == predicted_odd;
        Ok(KunnethReport {
            product_even: cp.b_even,
            product_odd: cp.b_odd,
            predicted_even,
            predicted_odd,
            betti_match,
            closedness_defect: to_f64(defect),
            naive_closedness_defect: to_f64(naive),
            image_rank,
            harmonic_residual: to_f64(residual),
            consistent: betti_match && defect < tol && residual < tol && image_rank == images.len(),
        })
    }

    /// `β + ∇^{H}η` with `η = e_k dx_I` at the first mode along the last axis, `|I| ≡ |β| + 1`.
    fn exact_perturbation(&self, beta: &Form<T>, radius: usize) -> Result<Form<T>> {
        let n = self.dim();
        let odd = beta.terms().next().map(|(_, i, _)| i.degree() % 2 == 1).unwrap_or(true);
        let index = if odd { MultiIndex::empty() } else { MultiIndex::axis(0) };
        let mut k = vec![0; n];
        k[n - 1] = 1;
        let eta = Form::from_terms(self.ambient(radius), [(Mode::new(k, 0), index, Cx::new(T::one(), T::zero()))])?;
        let beta = Form::from_terms(self.ambient(radius), beta.terms().map(|(m, i, c)| (m.clone(), i, c)))?;
        beta.add(&self.apply_differential(&self.flux, &eta, radius)?)
    }

    /// Sesquilinear pairing `∫ ω ∧ η̄` between `H(E, H)` and `H(E, -H̄)`.
    pub fn poincare_pairing(&self, radius: usize) -> Result<PoincareReport<T>> {
        let left = self.cohomology(radius)?;
        let right = self.pairing_partner().cohomology(radius)?;
        let n = self.dim();
        let all = FiberBasis::new(n, Parity::All);
        let top: DMatrix<Cx<T>> = crate::exterior::top_pairing(n);
        let ws = left.harmonic(Parity::All);
        let hs = right.harmonic(Parity::All);
        let wv: Vec<_> = ws.iter().map(|w| w.mode_vectors(&all)).collect();
        let hv: Vec<_> = hs.iter().map(|h| h.mode_vectors(&all)).collect();
        let matrix = DMatrix::from_fn(ws.len(), hs.len(), |a, b| {
            let mut acc = zero::<T>();
            for (m, x) in &wv[a] {
                if let Some(y) = hv[b].get(m) {
                    acc += (x.transpose() * &top * y.conjugate())[(0, 0)];
                }
            }
            acc
        });
        let smallest = if matrix.nrows() != matrix.ncols() {
            T::zero()
        } else if matrix.is_empty() {
            T::max_value().unwrap()
        } else {
            matrix.singular_values().iter().fold(T::max_value().unwrap(), |m, &s| m.min(s))
        };
        Ok(PoincareReport {
            nondegenerate: matrix.nrows() == matrix.ncols() && smallest > real(1e-8),
            matrix,
            left: (left.b_even, left.b_odd),
            right: (right.b_even, right.b_odd),
            smallest_singular_value: smallest,
        })
    }
}

/// Modes `m + q` for `m` in `domain` and `q` in the support of `flux` (always including `q = 0`).
fn reachable<T: Real>(domain: &[Mode], flux: &FluxForm<T>) -> Vec<Mode> {
    let n = domain.first().map(|m| m.k.len()).unwrap_or(0);
    let mut shifts: Vec<Vec<i32>> = flux.by_mode().into_keys().collect();
    shifts.push(vec![0; n]);
    let set: std::collections::BTreeSet<Mode> =
        domain.iter().flat_map(|m| shifts.iter().map(move |q| m.shifted(q))).collect();
    set.into_iter().collect()
}

/// Product cohomology is checked with a smaller mode box in high dimension.
fn kunneth_radius(n: usize) -> usize {
    if n <= 4 {
        3
    } else {
        1
    }
}

fn numerical_rank<T: Real>(m: &DMatrix<Cx<T>>) -> usize {
    let s = m.singular_values();
    let smax = s.iter().fold(T::zero(), |a, &b| a.max(b));
    s.iter().filter(|&&x| x > real::<T>(1e-8) * smax.max(T::one())).count()
}

/// `α ⊠ β` on the product torus; channels combine as `a · rank(β) + b`.
pub fn external_product<T: Real>(a: &Form<T>, b: &Form<T>, ambient: &Arc<Ambient<T>>) -> Result<Form<T>> {
    let n1 = a.dim();
    let r2 = b.ambient().bundle().rank();
    let mut out = Form::zero(ambient.clone());
    for (ma, ia, ca) in a.terms() {
        for (mb, ib, cb) in b.terms() {
            let k: Vec<i32> = ma.k.iter().chain(&mb.k).copied().collect();
            let (s, idx) = ia.wedge(ib.shifted(n1)).expect("disjoint axes");
            let c = ca * cb;
            out.add_term(Mode::new(k, ma.channel * r2 + mb.channel), idx, if s > 0 { c } else { -c })?;
        }
    }
    Ok(out)
}

/// `e^{B}` for an even scalar form, summing the power series until terms fall below `1e-18`.
pub fn exterior_exp<T: Real>(b: &Form<T>) -> Result<Form<T>> {
    let step = b.max_mode();
    let mut radius = 0;
    let unit = Form::constant(b.ambient().with_radius(0), &[(MultiIndex::empty(), Cx::new(T::one(), T::zero()))])?;
    let mut sum = unit.clone();
    let mut term = unit;
    let cutoff = real::<T>(1e-18);
    for k in 1..400 {
        radius += step;
        let next = term.wedge(b, radius)?.scale(from_real(T::one() / real::<T>(k as f64)));
        term = prune(&next, cutoff);
        if term.terms().next().is_none() {
            break;
        }
        sum = widen(&sum, radius)?.add(&term)?;
        if term.max_abs() < cutoff * T::one().max(sum.max_abs()) {
            break;
        }
    }
    let sum = prune(&sum, cutoff);
    let r = sum.max_mode();
    widen(&sum, r)
}

fn widen<T: Real>(f: &Form<T>, radius: usize) -> Result<Form<T>> {
    Form::from_terms(f.ambient().with_radius(radius), f.terms().map(|(m, i, c)| (m.clone(), i, c)))
}

fn prune<T: Real>(f: &Form<T>, cutoff: T) -> Form<T> {
    Form::from_terms(f.ambient().clone(), f.terms().filter(|(_, _, c)| c.norm() >= cutoff).map(|(m, i, c)| (m.clone(), i, c)))
        .expect("same ambient")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    fn t3(h: f64) -> TwistedTorus<f64> {
        let flux = FluxForm::constant(3, &[(MultiIndex::top(3), cx(h, 0.0))]).unwrap();
        TwistedTorus::new(FlatMetric::euclidean(3), FlatBundle::trivial(3, 1), flux).unwrap()
    }

    fn skew_metric() -> FlatMetric<f64> {
        FlatMetric::new(DMatrix::from_row_slice(3, 3, &[1.5, 0.2, -0.1, 0.2, 1.0, 0.3, -0.1, 0.3, 2.0])).unwrap()
    }

    #[test]
    fn classical_and_twisted_betti() {
        let c = t3(0.0).cohomology(2).unwrap();
        assert_eq!((c.b_even, c.b_odd), (4, 4));
        let c = t3(0.7).cohomology(2).unwrap();
        assert_eq!((c.b_even, c.b_odd), (3, 3));
        let t1 = TwistedTorus::new(FlatMetric::euclidean(1), FlatBundle::line(&[1.0 / 3.0]), FluxForm::zero(1)).unwrap();
        let c = t1.cohomology(3).unwrap();
        assert_eq!((c.b_even, c.b_odd), (0, 0));
    }

    #[test]
    fn single_precision_betti() {
        let flux = FluxForm::<f32>::constant(3, &[(MultiIndex::top(3), cx(0.5, 0.0))]).unwrap();
        let t = TwistedTorus::new(FlatMetric::euclidean(3), FlatBundle::trivial(3, 1), flux).unwrap();
        let c = t.cohomology(1).unwrap();
        assert_eq!((c.b_even, c.b_odd), (3, 3));
    }

    #[test]
    fn zero_mode_flux_entry() {
        let op = t3(0.7).differential(Parity::Even, 1);
        let b = op.block(&Mode::zero(3)).unwrap();
        let row = op.codomain_fiber.position(MultiIndex::top(3)).unwrap();
        let col = op.domain_fiber.position(MultiIndex::empty()).unwrap();
        assert!((b.matrix[(row, col)] - cx(0.7, 0.0)).norm() < 1e-15);
        let rest = b.matrix.iter().enumerate().filter(|(i, _)| *i != col * b.matrix.nrows() + row);
        assert!(rest.map(|(_, c)| c.norm()).fold(0.0, f64::max) < 1e-15);
    }

    #[test]
    fn adjoint_formula_matches_gram() {
        let flux = FluxForm::constant(3, &[(MultiIndex::top(3), cx(0.3, -1.1))]).unwrap();
        let t = TwistedTorus::new(skew_metric(), FlatBundle::line(&[0.25, 0.0, 0.6]), flux).unwrap();
        for parity in [Parity::Even, Parity::Odd, Parity::All] {
            let pair = t.adjoint(parity, 1).unwrap();
            assert!(pair.mismatch < 1e-12, "{parity:?} {}", pair.mismatch);
        }
        // Even-dimensional torus with a degree-3 flux.
        let h = FluxForm::constant(4, &[(MultiIndex::new(&[0, 1, 3]).unwrap(), cx(0.0, 0.8))]).unwrap();
        let t4 = TwistedTorus::new(FlatMetric::diagonal(&[1.0, 2.0, 0.5, 1.5]).unwrap(), FlatBundle::trivial(4, 1), h).unwrap();
        assert!(t4.adjoint(Parity::Even, 1).unwrap().mismatch < 1e-12);
    }

    #[test]
    fn adjoint_is_involutive() {
        let t = t3(0.9).with_bundle(FlatBundle::line(&[0.1, 0.2, 0.3])).unwrap();
        let op = t.differential(Parity::Odd, 1);
        let twice = op.gram_adjoint(t.geometry()).gram_adjoint(t.geometry());
        assert!(twice.sub(&op).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn adjoint_contraction_entry() {
        let g = FlatMetric::diagonal(&[4.0, 1.0, 1.0]).unwrap();
        let h = cx(0.5, 0.25);
        let t = TwistedTorus::new(g, FlatBundle::trivial(3, 1), FluxForm::constant(3, &[(MultiIndex::top(3), h)]).unwrap()).unwrap();
        let pair = t.adjoint(Parity::Even, 0).unwrap();
        let b = pair.gram.block(&Mode::zero(3)).unwrap();
        let row = pair.gram.codomain_fiber.position(MultiIndex::empty()).unwrap();
        let col = pair.gram.domain_fiber.position(MultiIndex::top(3)).unwrap();
        // Γ₀ = √det G, Γ_top = 1/√det G.
        assert!((b.matrix[(row, col)] - h.conj() / 4.0).norm() < 1e-15);
    }

    fn band_limited_t4() -> TwistedTorus<f64> {
        // H = (0.3 e^{2πix₀} + 0.3 e^{-2πix₀} + 0.5) dx₀₁₂ + 0.2i dx₁₂₃ is closed on T⁴.
        let i012 = MultiIndex::new(&[0, 1, 2]).unwrap();
        let i123 = MultiIndex::new(&[1, 2, 3]).unwrap();
        let flux = FluxForm::new(
            4,
            [
                (vec![1, 0, 0, 0], i012, cx(0.3, 0.1)),
                (vec![-1, 0, 0, 0], i012, cx(0.3, -0.1)),
                (vec![0, 0, 0, 0], i012, cx(0.5, 0.0)),
                (vec![0, 0, 0, 0], i123, cx(0.0, 0.2)),
            ],
        )
        .unwrap();
        TwistedTorus::new(FlatMetric::euclidean(4), FlatBundle::line(&[0.5, 0.0, 0.0, 0.0]), flux).unwrap()
    }

    #[test]
    fn band_limited_square_and_adjoint() {
        let t = band_limited_t4();
        assert!(t.square_defect(Parity::Even, 1) < 1e-12);
        assert!(t.square_defect(Parity::Odd, 1) < 1e-12);
        assert!(t.adjoint(Parity::Even, 1).unwrap().mismatch < 1e-12);
        assert!(matches!(t.laplacian(Parity::Even, 1), Err(Error::NonConstantFlux)));
        assert!(matches!(t.cohomology(1), Err(Error::NonConstantFlux)));
    }

    #[test]
    fn flat_laplacian_spectrum() {
        let t = TwistedTorus::untwisted(skew_metric());
        let lap = t.laplacian(Parity::Even, 1).unwrap();
        for b in &lap.blocks {
            let xi: Vec<f64> = b.domain[0].k.iter().map(|&k| 2.0 * std::f64::consts::PI * k as f64).collect();
            let expected = t.metric().covector_norm_sq(&xi);
            let h = t.hermitian_laplacian(&b.domain[0], Parity::Even);
            let (vals, _) = crate::twisted::sorted_eigen(&h);
            assert_eq!(vals.len(), 4);
            assert!(vals.iter().all(|v| (v - expected).abs() < 1e-10 * (1.0 + expected)));
        }
        assert!(lap.hermiticity_defect(t.geometry()) < 1e-12);
    }

    #[test]
    fn scaling_conjugation() {
        let h = FluxForm::constant(
            5,
            &[(MultiIndex::new(&[0, 1, 2]).unwrap(), cx(0.0, 0.7)), (MultiIndex::top(5), cx(-0.4, 0.0))],
        )
        .unwrap();
        let t = TwistedTorus::new(FlatMetric::euclidean(5), FlatBundle::trivial(5, 1), h).unwrap();
        for lambda in [cx(1.0, 0.0), cx(0.0, 1.0), cx(-1.0, 0.0), Cx::from_polar(1.0, 0.4)] {
            assert!(t.scaling_conjugation_defect(lambda, 1).unwrap() < 1e-12);
        }
        assert!(t.scaling_conjugation_defect(cx(2.0, 0.0), 1).is_err());
    }

    #[test]
    fn gauge_intertwining() {
        let t = t3(0.8);
        let ambient = Ambient::scalar(FlatMetric::euclidean(3), 1);
        let b = Form::from_terms(
            ambient.clone(),
            [
                (Mode::new(vec![1, 0, 0], 0), MultiIndex::empty(), cx(0.5, 0.0)),
                (Mode::new(vec![-1, 0, 0], 0), MultiIndex::empty(), cx(0.5, 0.0)),
            ],
        )
        .unwrap();
        let g = t.gauge_transform(&b).unwrap();
        let amb = t.ambient(1);
        let tests: Vec<Form<f64>> = (0..4)
            .map(|s| {
                Form::from_terms(
                    amb.clone(),
                    t.modes(1).into_iter().take(9).enumerate().flat_map(|(j, m)| {
                        MultiIndex::all(3).into_iter().map(move |i| {
                            let x = ((s * 31 + j * 7 + i.bits() as usize * 3) % 11) as f64 / 11.0 - 0.5;
                            (m.clone(), i, cx(x, 0.3 * x))
                        })
                    }),
                )
                .unwrap()
            })
            .collect();
        assert!(t.intertwining_defect(&g, &tests).unwrap() < 1e-10);
        // Without the exponential the identity fails.
        let wrong = GaugeTransform { flux: g.flux.clone(), exponential: Form::constant(Ambient::scalar(FlatMetric::euclidean(3), 0), &[(MultiIndex::empty(), cx(1.0, 0.0))]).unwrap() };
        assert!(t.intertwining_defect(&wrong, &tests).unwrap() > 1e-3);

        let zero = t.gauge_transform(&Form::zero(ambient.clone())).unwrap();
        assert_eq!(zero.flux, *t.flux());
        assert_eq!(zero.exponential.terms().count(), 1);

        let closed = Form::constant(ambient, &[(MultiIndex::new(&[0, 1]).unwrap(), cx(0.4, 0.0))]).unwrap();
        let g = t.gauge_transform(&closed).unwrap();
        assert_eq!(g.flux, *t.flux());
        assert!(t.intertwining_defect(&g, &tests).unwrap() < 1e-12);
    }

    #[test]
    fn kunneth_products() {
        let t2 = TwistedTorus::untwisted(FlatMetric::euclidean(2));
        let t1 = TwistedTorus::untwisted(FlatMetric::euclidean(1));
        let r = t2.kunneth_check(&t1, 1).unwrap();
        assert_eq!((r.product_even, r.product_odd), (4, 4));
        assert!(r.consistent);

        let r = t3(0.6).kunneth_check(&t1, 1).unwrap();
        assert_eq!(r.product_even, 6);
        assert!(r.consistent, "{r:?}");

        let h = FluxForm::constant(4, &[(MultiIndex::new(&[0, 1, 2]).unwrap(), cx(0.0, 0.9))]).unwrap();
        let imaginary = TwistedTorus::new(FlatMetric::euclidean(4), FlatBundle::trivial(4, 1), h).unwrap();
        let r = t1.kunneth_check(&imaginary, 1).unwrap();
        assert!(r.consistent, "{r:?}");
        assert!(r.closedness_defect < 1e-12);
        assert!(r.naive_closedness_defect > 0.1);
    }

    #[test]
    fn poincare_duality() {
        let p = t3(0.0).poincare_pairing(1).unwrap();
        assert_eq!(p.matrix.shape(), (8, 8));
        assert!(p.nondegenerate);
        assert!((p.smallest_singular_value - 1.0).abs() < 1e-12);
        let p = t3(1.3).poincare_pairing(1).unwrap();
        assert_eq!(p.left, (3, 3));
        assert_eq!(p.right, (3, 3));
        assert!(p.nondegenerate);
        let tw = t3(0.4).with_bundle(FlatBundle::line(&[0.5, 0.0, 0.0])).unwrap();
        let p = tw.poincare_pairing(1).unwrap();
        assert_eq!(p.matrix.shape(), (0, 0));
    }

    #[test]
    fn direct_sum_adds_betti() {
        let bundle = FlatBundle::trivial(3, 1).direct_sum(&FlatBundle::line(&[0.0, 0.5, 0.0])).unwrap();
        let c = t3(0.5).with_bundle(bundle).unwrap().cohomology(1).unwrap();
        assert_eq!((c.b_even, c.b_odd), (3, 3));
        let bundle = FlatBundle::trivial(3, 2);
        let c = t3(0.5).with_bundle(bundle).unwrap().cohomology(1).unwrap();
        assert_eq!((c.b_even, c.b_odd), (6, 6));
    }

    #[test]
    fn harmonic_basis_orthonormal() {
        let t = TwistedTorus::new(skew_metric(), FlatBundle::trivial(3, 1), FluxForm::constant(3, &[(MultiIndex::top(3), cx(0.0, 2.0))]).unwrap()).unwrap();
        let c = t.cohomology(1).unwrap();
        let hs = c.harmonic(Parity::All);
        for (a, x) in hs.iter().enumerate() {
            for (b, y) in hs.iter().enumerate() {
                let ip = x.inner_product(y).unwrap();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((ip - cx(expected, 0.0)).norm() < 1e-10);
            }
            let dx = t.apply_differential(t.flux(), x, 2).unwrap();
            assert!(dx.max_abs() < 1e-10);
        }
    }
}
