//! Even-dimensional tori: the involution `τ`, the twisted signature operator and the signature
//! of the twisted hermitian forms.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exterior::{degree_diagonal, top_pairing, FiberBasis, Form, Mode, Parity};
use crate::scalar::{i_pow, real, to_f64, Cx, CxOps, Real};
use crate::twisted::{sorted_eigen, BlockOperator, TwistedTorus};

fn half_dim(n: usize) -> Result<usize> {
    if n % 2 == 1 {
        Err(Error::OddDimension(n))
    } else {
        Ok(n / 2)
    }
}

/// `τ = i^{m + p(p-1)} ⋆` on all forms of `T^{2m}`, coordinate basis.
pub fn tau_matrix<T: Real>(torus: &TwistedTorus<T>) -> Result<DMatrix<Cx<T>>> {
    let n = torus.dim();
    let m = half_dim(n)?;
    let phase = degree_diagonal(n, |p| i_pow::<T>((m + p * (p.saturating_sub(1))) as i64));
    Ok(&torus.geometry().star * phase)
}

/// `τ` applied to a form.
pub fn tau<T: Real>(form: &Form<T>) -> Result<Form<T>> {
    let m = half_dim(form.dim())?;
    let star = form.hodge_star();
    let mut out = Form::zero(form.ambient().clone());
    for (mode, i, c) in star.terms() {
        let p = form.dim() - i.degree();
        // The phase is fixed by the input degree p.
        out.add_term(mode.clone(), i, c * i_pow::<T>((m + p * p.saturating_sub(1)) as i64))?;
    }
    Ok(out)
}

/// Operator norm of `B τ + τ B` over blocks within `K`, and the structural admissibility flag.
#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub defect: f64,
    pub admissible: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SignatureResult {
    pub signature: i64,
    pub dim_plus: usize,
    pub dim_minus: usize,
    pub lambda: [f64; 2],
    /// Anticommutation defect of `B_{H^{(i)}}` with `τ`.
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SplittingResult {
    pub signature: i64,
    pub dim_plus: usize,
    pub dim_minus: usize,
    /// `(dim H⁺, dim H⁻)` on even and odd forms.
    pub even: (usize, usize),
    pub odd: (usize, usize),
    /// Largest component of `τh` outside the harmonic space.
    pub tau_residual: f64,
    /// `B^i` is positive definite on `H⁺` and negative definite on `H⁻`.
    pub form_definite: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexSplitReport {
    pub index_even: i64,
    pub index_odd: i64,
    pub signature: i64,
    pub euler_characteristic: i64,
    pub even_identity: bool,
    pub odd_identity: bool,
}

/// `B = ∇ + ∇†` on all forms, one block per mode.
pub fn signature_operator<T: Real>(torus: &TwistedTorus<T>, radius: usize) -> Result<BlockOperator<T>> {
    if !torus.flux().is_constant() {
        return Err(Error::NonConstantFlux);
    }
    let op = torus.differential(Parity::All, radius);
    let adj = op.gram_adjoint(torus.geometry());
    op.add(&adj)
}

/// Orthonormal-coordinate blocks of `B` and `τ` at one mode.
fn orthonormal_pair<T: Real>(torus: &TwistedTorus<T>, tau_c: &DMatrix<Cx<T>>, mode: &Mode) -> (DMatrix<Cx<T>>, DMatrix<Cx<T>>) {
    let ortho = &torus.geometry().ortho;
    let d = ortho.to_orthonormal(&torus.fiber_differential(torus.flux(), mode));
    (&d + d.adjoint(), ortho.to_orthonormal(tau_c))
}

pub fn anticommutation_defect<T: Real>(torus: &TwistedTorus<T>, radius: usize) -> Result<AdmissibilityReport> {
    if !torus.flux().is_constant() {
        return Err(Error::NonConstantFlux);
    }
    let tau_c = tau_matrix(torus)?;
    let defect = torus
        .modes(radius)
        .into_par_iter()
        .map(|m| {
            let (b, t) = orthonormal_pair(torus, &tau_c, &m);
            let ac = &b * &t + &t * &b;
            ac.singular_values().iter().fold(T::zero(), |a, &s| a.max(s))
        })
        .reduce(|| T::zero(), |a, b| a.max(b));
    Ok(AdmissibilityReport { defect: to_f64(defect), admissible: torus.flux().is_admissible() })
}

fn require_imaginary<T: Real>(torus: &TwistedTorus<T>) -> Result<()> {
    half_dim(torus.dim())?;
    if !torus.flux().is_constant() {
        return Err(Error::NonConstantFlux);
    }
    if !torus.flux().is_pure_imaginary() {
        return Err(Error::FluxInvalid(format!(
            "signature needs a purely imaginary flux (|H + H̄| = {:e})",
            to_f64(torus.flux().imaginary_defect())
        )));
    }
    Ok(())
}

/// Matrix of `B^λ(ω_a, ω_b) = c · λ^{m-p} ∫ ω_a ∧ ω̄_b` (`c = 1` on even, `i` on odd forms).
pub fn form_matrix<T: Real>(forms: &[Form<T>], lambda: Cx<T>) -> Result<DMatrix<Cx<T>>> {
    let n = forms.first().map(|f| f.dim()).unwrap_or(0);
    let m = half_dim(n)? as i32;
    let all = FiberBasis::new(n, Parity::All);
    let weights = degree_diagonal::<T>(n, |p| {
        let base = lambda.powi(m - p as i32);
        if p % 2 == 1 {
            base * i_pow::<T>(1)
        } else {
            base
        }
    });
    let pairing = weights * top_pairing::<T>(n);
    let vectors: Vec<_> = forms.iter().map(|f| f.mode_vectors(&all)).collect();
    Ok(DMatrix::from_fn(forms.len(), forms.len(), |a, b| {
        let mut acc = Cx::new(T::zero(), T::zero());
        for (mode, x) in &vectors[a] {
            if let Some(y) = vectors[b].get(mode) {
                acc += (x.transpose() * &pairing * y.conjugate())[(0, 0)];
            }
        }
        acc
    }))
}

/// Signature of `B^λ` on the harmonic representatives of `H(X, E, H^{(λ)})`.
pub fn hermitian_form<T: Real>(torus: &TwistedTorus<T>, lambda: Cx<T>, radius: usize) -> Result<SignatureResult> {
    require_imaginary(torus)?;
    if (lambda.norm() - T::one()).abs() > T::identity_tolerance() {
        return Err(Error::InvalidParameter("λ must lie on the unit circle".into()));
    }
    let scaled = torus.with_flux(torus.flux().rescale(lambda)?)?;
    let harmonic = scaled.cohomology(radius)?.harmonic(Parity::All);
    let mat = form_matrix(&harmonic, lambda)?;
    let herm = (&mat - mat.adjoint()).camax();
    if herm > real(1e-8) {
        return Err(Error::NotHermitian(to_f64(herm)));
    }
    let (values, _) = sorted_eigen(&mat);
    let smallest = values.iter().fold(T::max_value().unwrap(), |a, v| a.min(v.abs()));
    if !values.is_empty() && smallest < real(1e-8) {
        return Err(Error::DegenerateForm(to_f64(smallest)));
    }
    let dim_plus = values.iter().filter(|v| **v > T::zero()).count();
    let dim_minus = values.len() - dim_plus;
    let i_torus = torus.with_flux(torus.flux().rescale(i_pow(1))?)?;
    Ok(SignatureResult {
        signature: dim_plus as i64 - dim_minus as i64,
        dim_plus,
        dim_minus,
        lambda: [to_f64(lambda.re), to_f64(lambda.im)],
        defect: anticommutation_defect(&i_torus, radius)?.defect,
    })
}

/// `dim H⁺ - dim H⁻` for the `τ`-splitting of the `H^{(i)}`-harmonic forms.
pub fn harmonic_splitting<T: Real>(torus: &TwistedTorus<T>, radius: usize) -> Result<SplittingResult> {
    require_imaginary(torus)?;
    let i_torus = torus.with_flux(torus.flux().rescale(i_pow(1))?)?;
    let coh = i_torus.cohomology(radius)?;
    let mut residual = T::zero();
    let mut counts = [(0usize, 0usize); 2];
    let mut definite = true;
    for (slot, parity) in [Parity::Even, Parity::Odd].into_iter().enumerate() {
        let hs = coh.harmonic(parity);
        if hs.is_empty() {
            continue;
        }
        let images: Vec<Form<T>> = hs.iter().map(tau).collect::<Result<_>>()?;
        // Matrix of τ in the orthonormal harmonic basis, and what falls outside it.
        let t = DMatrix::from_fn(hs.len(), hs.len(), |a, b| images[b].inner_product(&hs[a]).expect("same ambient"));
        for (b, img) in images.iter().enumerate() {
            let mut rest = img.clone();
            for (a, h) in hs.iter().enumerate() {
                rest = rest.sub(&h.scale(t[(a, b)]))?;
            }
            residual = residual.max(rest.norm());
        }
        let (values, vectors) = sorted_eigen(&t);
        let plus: Vec<usize> = (0..values.len()).filter(|&a| values[a] > T::zero()).collect();
        counts[slot] = (plus.len(), values.len() - plus.len());
        // B^i restricted to each eigenspace.
        let b = form_matrix(&hs, i_pow(1))?;
        for sign in [true, false] {
            let cols: Vec<usize> = (0..values.len()).filter(|&a| (values[a] > T::zero()) == sign).collect();
            if cols.is_empty() {
                continue;
            }
            let v = DMatrix::from_columns(&cols.iter().map(|&a| vectors.column(a).into_owned()).collect::<Vec<_>>());
            // B(Σ x_a h_a, Σ y_b h_b) = xᵀ M ȳ.
            let restricted = v.transpose() * &b * v.conjugate();
            let (ev, _) = sorted_eigen(&restricted);
            definite &= ev.iter().all(|&e| if sign { e > T::zero() } else { e < T::zero() });
        }
    }
    if residual > real(1e-8) {
        return Err(Error::TauNotPreserving(to_f64(residual)));
    }
    let dim_plus = counts[0].0 + counts[1].0;
    let dim_minus = counts[0].1 + counts[1].1;
    Ok(SplittingResult {
        signature: dim_plus as i64 - dim_minus as i64,
        dim_plus,
        dim_minus,
        even: counts[0],
        odd: counts[1],
        tau_residual: to_f64(residual),
        form_definite: definite,
    })
}

/// Dimension of the kernel of `B` restricted to the span of the columns of `v`.
fn restricted_kernel<T: Real>(b: &DMatrix<Cx<T>>, v: &DMatrix<Cx<T>>) -> usize {
    if v.ncols() == 0 {
        return 0;
    }
    let bv = b * v;
    let s = bv.singular_values();
    let smax = s.iter().fold(T::zero(), |a, &x| a.max(x));
    let eps = T::default_epsilon();
    if smax <= eps * eps {
        return v.ncols();
    }
    let rank = s.iter().filter(|&&x| x > T::kernel_tolerance() * smax).count();
    v.ncols() - rank
}

/// Both index identities for the chiral halves of `B_{H^{(i)}}`.
pub fn index_split_check<T: Real>(torus: &TwistedTorus<T>, radius: usize) -> Result<IndexSplitReport> {
    require_imaginary(torus)?;
    let i_torus = torus.with_flux(torus.flux().rescale(i_pow(1))?)?;
    let tau_c = tau_matrix(&i_torus)?;
    let n = torus.dim();
    let geo = i_torus.geometry();
    let even = geo.basis.selection(&FiberBasis::new(n, Parity::Even));
    let odd = geo.basis.selection(&FiberBasis::new(n, Parity::Odd));
    let per_mode: Vec<(i64, i64)> = i_torus
        .modes(radius)
        .into_par_iter()
        .map(|m| {
            let (b, t) = orthonormal_pair(&i_torus, &tau_c, &m);
            let space = |sel: &[usize], sign: bool| -> DMatrix<Cx<T>> {
                let tt = crate::exterior::submatrix(&t, sel, sel);
                let (vals, vecs) = sorted_eigen(&tt);
                let cols: Vec<_> = (0..vals.len())
                    .filter(|&a| (vals[a] > T::zero()) == sign)
                    .map(|a| {
                        let mut full = nalgebra::DVector::zeros(b.nrows());
                        for (r, &s) in sel.iter().enumerate() {
                            full[s] = vecs[(r, a)];
                        }
                        full
                    })
                    .collect();
                if cols.is_empty() {
                    DMatrix::zeros(b.nrows(), 0)
                } else {
                    DMatrix::from_columns(&cols)
                }
            };
            let (ev_p, ev_m) = (space(&even, true), space(&even, false));
            let (od_p, od_m) = (space(&odd, true), space(&odd, false));
            let ker = |v: &DMatrix<Cx<T>>| restricted_kernel(&b, v) as i64;
            // B: Ω^ev_+ → Ω^odd_-, whose cokernel is the kernel of B on Ω^odd_-; likewise for odd.
            (ker(&ev_p) - ker(&od_m), ker(&od_p) - ker(&ev_m))
        })
        .collect();
    let index_even: i64 = per_mode.iter().map(|p| p.0).sum();
    let index_odd: i64 = per_mode.iter().map(|p| p.1).sum();
    let coh = torus.cohomology(radius)?;
    let chi = coh.b_even as i64 - coh.b_odd as i64;
    let signature = hermitian_form(torus, Cx::new(T::one(), T::zero()), radius)?.signature;
    Ok(IndexSplitReport {
        index_even,
        index_odd,
        signature,
        euler_characteristic: chi,
        even_identity: 2 * index_even == signature + chi,
        odd_identity: 2 * index_odd == signature - chi,
    })
}
