use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;

use super::operator::OddSignatureOperator;
use crate::error::{Error, Result};
use crate::exterior::{submatrix, wedge_left, Form, Mode, Parity, FiberBasis};
use crate::scalar::Cx;
use crate::twisted::{sorted_eigen, FluxForm, TwistedTorus};

#[derive(Clone, Debug, Serialize)]
pub struct LocalTerm {
    /// `-(∫_X H) / (4π²)`.
    pub value: f64,
    /// `S^{-H}(e_a)` as a matrix acting on vectors, one per coordinate direction.
    pub s_matrices: Vec<Vec<Vec<f64>>>,
    /// Largest `|g(S(α)β, γ) + g(S(α)γ, β)|`.
    pub antisymmetry_defect: f64,
}

/// Local term of the spectral-flow formula on a flat 3-torus with constant degree-3 flux.
pub fn local_term(torus: &TwistedTorus<f64>) -> Result<LocalTerm> {
    let n = torus.dim();
    if n != 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    let flux = torus.flux();
    if !flux.is_constant() {
        return Err(Error::NonConstantFlux);
    }
    let total = flux.integral();
    if total.im.abs() > 1e-12 * (1.0 + total.re.abs()) {
        return Err(Error::FluxInvalid("the local term needs a real top-degree flux".into()));
    }
    let h = total.re;
    // H(e_a, e_b, e_c) = h · sgn(abc); g(S(α)β, γ) = -2H(α, β, γ).
    let levi = |a: usize, b: usize, c: usize| -> f64 {
        if a == b || b == c || a == c {
            0.0
        } else {
            let inversions = [a > b, a > c, b > c].iter().filter(|x| **x).count();
            if inversions % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        }
    };
    let ginv = torus.metric().inverse();
    let g = torus.metric().matrix();
    let mut mats = Vec::with_capacity(n);
    let mut defect = 0.0f64;
    for a in 0..n {
        let lowered = DMatrix::from_fn(n, n, |c, b| -2.0 * h * levi(a, b, c));
        let s = ginv * &lowered;
        let gs = g * &s;
        defect = defect.max((&gs + gs.transpose()).amax());
        mats.push((0..n).map(|i| (0..n).map(|j| s[(i, j)]).collect()).collect());
    }
    Ok(LocalTerm {
        value: -h / (4.0 * std::f64::consts::PI.powi(2)),
        s_matrices: mats,
        antisymmetry_defect: defect,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FluxExperiment {
    pub radii: Vec<usize>,
    /// Signature of the truncated `D_{H₁}` minus that of the truncated `D_{H₀}`.
    pub signature_differences: Vec<i64>,
    /// Same with `Σ sign(λ) erfc(|λ|/(πK))`, which damps the truncation edge.
    pub smoothed_differences: Vec<f64>,
    /// `|smoothed difference|` is non-increasing along the radii.
    pub non_increasing: bool,
    pub warnings: Vec<String>,
}

/// Compares truncated spectra of `D_{H₀}` and `D_{H₁}`, `H₁ = H₀ - dB`, on nested boxes.
///
/// The truncation of a mode-coupling operator is not a subcomplex; the numbers are trends only.
pub fn flux_representative_experiment(torus: &TwistedTorus<f64>, b: &Form<f64>, radii: &[usize]) -> Result<FluxExperiment> {
    OddSignatureOperator::new(torus)?;
    let gauged = torus.gauge_transform(b)?.flux;
    let mut signature_differences = Vec::new();
    let mut smoothed_differences = Vec::new();
    for &k in radii {
        let e0 = truncated_spectrum(torus, torus.flux(), k);
        let e1 = truncated_spectrum(torus, &gauged, k);
        let width = std::f64::consts::PI * k.max(1) as f64;
        let sig = |e: &[f64]| e.iter().filter(|v| v.abs() > 1e-9).map(|v| v.signum() as i64).sum::<i64>();
        let smooth = |e: &[f64]| e.iter().filter(|v| v.abs() > 1e-9).map(|v| v.signum() * libm::erfc(v.abs() / width)).sum::<f64>();
        signature_differences.push(sig(&e1) - sig(&e0));
        smoothed_differences.push(smooth(&e1) - smooth(&e0));
    }
    let non_increasing = smoothed_differences.windows(2).all(|w| w[1].abs() <= w[0].abs() + 1e-12);
    Ok(FluxExperiment {
        radii: radii.to_vec(),
        signature_differences,
        smoothed_differences,
        non_increasing,
        warnings: vec!["mode truncation of a coupled operator is not a subcomplex; differences are indicative only".into()],
    })
}

/// Eigenvalues of the box truncation of `D_H` for a possibly mode-coupling flux.
fn truncated_spectrum(torus: &TwistedTorus<f64>, flux: &FluxForm<f64>, radius: usize) -> Vec<f64> {
    let n = torus.dim();
    let constant = FluxForm::constant(n, &flux.constant_part()).expect("constant part of a valid flux");
    let op = OddSignatureOperator::new(&torus.with_flux(constant).expect("same torus")).expect("odd dimension checked");
    let geo = torus.geometry();
    let even = geo.basis.selection(&FiberBasis::new(n, Parity::Even));
    let ortho = geo.ortho.restrict(&even);
    let f = even.len();
    let modes = torus.modes(radius);
    let index: HashMap<&Mode, usize> = modes.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let mut big = DMatrix::<Cx<f64>>::zeros(modes.len() * f, modes.len() * f);
    for (i, m) in modes.iter().enumerate() {
        big.view_mut((i * f, i * f), (f, f)).copy_from(&op.block(m));
    }
    // Coupling: D = (W₊ ⋆ - ⋆ W₋ S) C, with W₊ from H and W₋ from -H̄, each shifting modes.
    let star = &geo.star;
    let m = op.half_dim();
    let phase_diag = crate::exterior::degree_diagonal(n, |p| crate::scalar::i_pow((m + p * (p + 1)) as i64));
    let sign = crate::exterior::degree_diagonal(n, |p| Cx::new(crate::scalar::parity_sign(p) as f64, 0.0));
    let zero = vec![0; n];
    let mut add = |q: &[i32], piece: DMatrix<Cx<f64>>| {
        let o = ortho.to_orthonormal(&submatrix(&piece, &even, &even));
        for (j, m) in modes.iter().enumerate() {
            if let Some(&i) = index.get(&m.shifted(q)) {
                let mut view = big.view_mut((i * f, j * f), (f, f));
                view += &o;
            }
        }
    };
    for (q, terms) in flux.by_mode().into_iter().filter(|(q, _)| *q != zero) {
        add(&q, wedge_left(n, &terms) * star * &phase_diag);
    }
    for (q, terms) in flux.neg_conjugate().by_mode().into_iter().filter(|(q, _)| *q != zero) {
        add(&q, -(star * wedge_left(n, &terms) * &sign * &phase_diag));
    }
    let herm_defect = (&big - big.adjoint()).camax();
    debug_assert!(herm_defect < 1e-10, "truncated operator not hermitian: {herm_defect:e}");
    sorted_eigen(&big).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::FlatBundle;
    use crate::exterior::{FlatMetric, MultiIndex};
    use crate::scalar::cx;

    fn t3(h: f64, metric: FlatMetric<f64>) -> TwistedTorus<f64> {
        let flux = FluxForm::constant(3, &[(MultiIndex::top(3), cx(h, 0.0))]).unwrap();
        TwistedTorus::new(metric, FlatBundle::trivial(3, 1), flux).unwrap()
    }

    #[test]
    fn local_term_values() {
        let l = local_term(&t3(0.8, FlatMetric::euclidean(3))).unwrap();
        assert!((l.value + 0.8 / (4.0 * std::f64::consts::PI.powi(2))).abs() < 1e-15);
        let skew = FlatMetric::new(DMatrix::from_row_slice(3, 3, &[1.1, 0.2, 0.0, 0.2, 0.9, -0.1, 0.0, -0.1, 1.0])).unwrap();
        let l = local_term(&t3(1.3, skew)).unwrap();
        assert!(l.antisymmetry_defect < 1e-14);
        assert_eq!(local_term(&t3(0.0, FlatMetric::euclidean(3))).unwrap().value, 0.0);
        let t5 = TwistedTorus::<f64>::untwisted(FlatMetric::euclidean(5));
        assert!(matches!(local_term(&t5), Err(Error::UnsupportedDimension(5))));
    }

    #[test]
    fn truncation_matches_blocks_for_constant_flux() {
        let t = t3(0.5, FlatMetric::euclidean(3));
        let op = OddSignatureOperator::new(&t).unwrap();
        let mut blocks: Vec<f64> = op.spectrum(1).into_iter().map(|e| e.value).collect();
        blocks.sort_by(f64::total_cmp);
        let trunc = truncated_spectrum(&t, t.flux(), 1);
        assert!(blocks.iter().zip(&trunc).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn trivial_gauge_changes_nothing() {
        let t = t3(0.5, FlatMetric::euclidean(3));
        let a = crate::exterior::Ambient::scalar(t.metric().clone(), 1);
        let zero = Form::zero(a.clone());
        let r = flux_representative_experiment(&t, &zero, &[1, 2]).unwrap();
        assert_eq!(r.signature_differences, vec![0, 0]);
        assert!(r.smoothed_differences.iter().all(|d| *d == 0.0));
        // A constant B is closed.
        let closed = Form::constant(a, &[(MultiIndex::new(&[1, 2]).unwrap(), cx(0.3, 0.0))]).unwrap();
        let r = flux_representative_experiment(&t, &closed, &[1]).unwrap();
        assert_eq!(r.smoothed_differences, vec![0.0]);
    }
}
