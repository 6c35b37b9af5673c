use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::operator::OddSignatureOperator;
use super::quadrature::{sphere_rule, taylor_coefficient};
use crate::error::{Error, Result};
use crate::exterior::Mode;
use crate::scalar::Cx;
use crate::twisted::{sorted_eigen, TwistedTorus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EtaMethod {
    /// Exact when the spectrum is symmetric away from the zero-frequency block.
    #[serde(rename = "mode-symmetry-exact")]
    ModeSymmetry,
    /// Finite block signatures plus the residue of the large-frequency expansion.
    #[serde(rename = "zeta-residue")]
    ZetaResidue,
    /// Polynomial extrapolation of truncated zeta sums to `s = 0`.
    #[serde(rename = "zeta-extrapolated")]
    ZetaExtrapolated,
}

impl EtaMethod {
    pub fn name(self) -> &'static str {
        match self {
            EtaMethod::ModeSymmetry => "mode-symmetry-exact",
            EtaMethod::ZetaResidue => "zeta-residue",
            EtaMethod::ZetaExtrapolated => "zeta-extrapolated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mode-symmetry-exact" => Ok(EtaMethod::ModeSymmetry),
            "zeta-residue" => Ok(EtaMethod::ZetaResidue),
            "zeta-extrapolated" => Ok(EtaMethod::ZetaExtrapolated),
            other => Err(Error::InvalidParameter(format!("unknown eta method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EtaEstimate {
    pub value: f64,
    pub error: f64,
    pub method: EtaMethod,
    #[serde(rename = "K")]
    pub k: usize,
    /// `s`-grid of the extrapolation, or empty.
    pub grid: Vec<f64>,
    pub warnings: Vec<String>,
}

impl EtaEstimate {
    pub fn negated(&self) -> Self {
        EtaEstimate { value: -self.value, ..self.clone() }
    }
}

/// Sign of an eigenvalue, with values below `floor` treated as zero modes.
fn sign(x: f64, floor: f64) -> i64 {
    if x > floor {
        1
    } else if x < -floor {
        -1
    } else {
        0
    }
}

fn zero_floor(values: &[f64]) -> f64 {
    1e-10 * values.iter().fold(1.0f64, |a, v| a.max(v.abs()))
}

pub fn eta_invariant(op: &OddSignatureOperator, radius: usize, method: EtaMethod) -> Result<EtaEstimate> {
    match method {
        EtaMethod::ModeSymmetry => match mode_symmetry(op, radius) {
            Err(Error::SymmetryNotDetected(why)) => {
                let mut est = zeta_residue(op, radius)?;
                est.warnings.push(format!("no spectral symmetry ({why}); used {}", EtaMethod::ZetaResidue.name()));
                Ok(est)
            }
            other => other,
        },
        EtaMethod::ZetaResidue => zeta_residue(op, radius),
        EtaMethod::ZetaExtrapolated => zeta_extrapolated(op, radius),
    }
}

/// Mode with frequency `-ξ(mode)`, if it lies on the lattice of the same channel.
fn mirror_mode(op: &OddSignatureOperator, mode: &Mode) -> Option<Mode> {
    let angles = op.torus().bundle().angles(mode.channel);
    let mut k = Vec::with_capacity(mode.k.len());
    for (&kj, &t) in mode.k.iter().zip(angles) {
        let shift = 2.0 * t;
        if (shift - shift.round()).abs() > 1e-14 {
            return None;
        }
        k.push(-kj - shift.round() as i32);
    }
    Some(Mode::new(k, mode.channel))
}

/// Pairs each block with its mirror `ξ ↦ -ξ` and checks that the spectra are negatives of each
/// other (or symmetric, for self-mirrored blocks). Only zero-frequency blocks may be
/// asymmetric; their signatures give `η` exactly.
fn mode_symmetry(op: &OddSignatureOperator, radius: usize) -> Result<EtaEstimate> {
    let modes = op.torus().modes(radius);
    let spectra: HashMap<Mode, Vec<f64>> = modes.par_iter().map(|m| (m.clone(), op.block_spectrum(m))).collect();
    let mut asymmetry = 0i64;
    let mut mismatch = 0.0f64;
    for m in &modes {
        let s = &spectra[m];
        let xi = op.torus().frequency(m);
        let at_zero = xi.iter().all(|x| *x == 0.0);
        let partner = mirror_mode(op, m).and_then(|p| spectra.get(&p));
        let defect = match partner {
            Some(p) => s.iter().zip(p.iter().rev()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max),
            None => s.iter().zip(s.iter().rev()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max),
        };
        let scale = 1.0 + s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if defect <= 1e-9 * scale {
            mismatch = mismatch.max(defect);
        } else if at_zero {
            let floor = zero_floor(s);
            asymmetry += s.iter().map(|&v| sign(v, floor)).sum::<i64>();
        } else {
            return Err(Error::SymmetryNotDetected(format!("block {:?} (channel {}) is not mirrored, defect {defect:e}", m.k, m.channel)));
        }
    }
    Ok(EtaEstimate {
        value: asymmetry as f64,
        error: mismatch,
        method: EtaMethod::ModeSymmetry,
        k: radius,
        grid: Vec::new(),
        warnings: Vec::new(),
    })
}

const CHEBYSHEV_NODES: usize = 32;
const SPHERE_POINTS: usize = 12;

fn spectral_norm(m: &DMatrix<Cx<f64>>) -> f64 {
    sorted_eigen(m).0.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Checks `A_i A_j + A_j A_i = 2 g^{ij}` and `tr A_i = 0` for the leading symbol.
fn check_balanced(op: &OddSignatureOperator) -> Result<()> {
    let n = op.torus().dim();
    let ginv = op.torus().metric().inverse();
    let basis: Vec<DMatrix<Cx<f64>>> = (0..n)
        .map(|i| {
            let mut xi = vec![0.0; n];
            xi[i] = 1.0;
            op.symbol(&xi)
        })
        .collect();
    let id = DMatrix::<Cx<f64>>::identity(op.block_dim(), op.block_dim());
    for i in 0..n {
        if basis[i].trace().norm() > 1e-10 {
            return Err(Error::UnbalancedSymbol(format!("trace of A_{i} is {:e}", basis[i].trace().norm())));
        }
        for j in 0..n {
            let ac = &basis[i] * &basis[j] + &basis[j] * &basis[i] - id.scale(2.0 * ginv[(i, j)]);
            if ac.camax() > 1e-10 {
                return Err(Error::UnbalancedSymbol(format!("A_{i} A_{j} + A_{j} A_{i} off by {:e}", ac.camax())));
            }
        }
    }
    Ok(())
}

/// `Λ(ε) = Σ_μ sign(μ) log|μ|` over the eigenvalues of `A + εV` (`A² = 1`, `|ε|·‖V‖ ≤ 1/2`).
fn log_asymmetry(a: &DMatrix<Cx<f64>>, v: &DMatrix<Cx<f64>>, eps: f64) -> f64 {
    let (values, _) = sorted_eigen(&(a + v.scale(eps)));
    values.iter().map(|&mu| mu.signum() * mu.abs().ln()).sum()
}

/// Residue of the large-frequency part at `s = 0` for one channel:
/// `-(vol / (2π)^n) ∫_{S^{n-1}} [ε^n] Λ_{G^{1/2} y}(ε) dσ(y)`, with its quadrature error.
fn residue(op: &OddSignatureOperator, v: &DMatrix<Cx<f64>>, vnorm: f64) -> (f64, f64) {
    let n = op.torus().dim();
    if vnorm == 0.0 {
        return (0.0, 0.0);
    }
    let rho = 0.5 / vnorm;
    let sqrt_g = op.torus().metric().sqrt();
    let integrate = |points: usize, nodes: usize| -> f64 {
        sphere_rule(n, points)
            .par_iter()
            .map(|(y, w)| {
                let omega = &sqrt_g * DVector::from_column_slice(y);
                let a = op.symbol(omega.as_slice());
                w * taylor_coefficient(|e| log_asymmetry(&a, v, e), rho, n, nodes)
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    };
    let scale = op.torus().metric().volume() / (2.0 * std::f64::consts::PI).powi(n as i32);
    let fine = integrate(SPHERE_POINTS, CHEBYSHEV_NODES);
    let coarse = integrate(SPHERE_POINTS - 4, CHEBYSHEV_NODES);
    let cheb = integrate(SPHERE_POINTS, CHEBYSHEV_NODES + 16);
    let err = scale * ((fine - coarse).abs() + (fine - cheb).abs());
    (-scale * fine, err)
}

/// `η = Σ_{|ξ| ≤ ‖V‖} sign-count of D_ξ + rank · residue`.
///
/// Blocks with `|ξ| > ‖V‖` have zero signature: the symbol has eigenvalues `±|ξ|` in equal
/// numbers and the potential cannot move any of them across zero.
fn zeta_residue(op: &OddSignatureOperator, radius: usize) -> Result<EtaEstimate> {
    check_balanced(op)?;
    let v = op.potential();
    let vnorm = spectral_norm(&v);
    let metric = op.torus().metric();
    let (_, gmax) = metric.extremal_eigenvalues();
    let needed = (vnorm * gmax.sqrt() / (2.0 * std::f64::consts::PI)).floor() as usize + 1;
    let box_radius = radius.max(needed);
    let finite: i64 = op
        .torus()
        .modes(box_radius)
        .par_iter()
        .map(|m| {
            let s = op.block_spectrum(m);
            let floor = zero_floor(&s);
            s.iter().map(|&x| sign(x, floor)).sum::<i64>()
        })
        .sum();
    let (r, err) = residue(op, &v, vnorm);
    let rank = op.torus().bundle().rank() as f64;
    let value = finite as f64 + rank * r;
    Ok(EtaEstimate {
        value,
        error: rank * err + 1e-14 * (1.0 + value.abs()),
        method: EtaMethod::ZetaResidue,
        k: box_radius,
        grid: Vec::new(),
        warnings: Vec::new(),
    })
}

pub const EXTRAPOLATION_GRID: [f64; 5] = [3.0, 2.5, 2.0, 1.5, 1.0];

/// Truncated `Σ sign(λ)|λ|^{-s}` on the grid, quadratic least squares in `s`, evaluated at 0.
///
/// The truncated sums are not the analytic continuation; this is kept as a diagnostic.
fn zeta_extrapolated(op: &OddSignatureOperator, radius: usize) -> Result<EtaEstimate> {
    let spec: Vec<f64> = op.spectrum(radius).into_iter().map(|e| e.value).collect();
    let floor = zero_floor(&spec);
    let sums: Vec<f64> = EXTRAPOLATION_GRID
        .iter()
        .map(|&s| spec.iter().filter(|v| v.abs() > floor).map(|v| v.signum() * v.abs().powf(-s)).sum())
        .collect();
    let design = DMatrix::from_fn(EXTRAPOLATION_GRID.len(), 3, |r, c| EXTRAPOLATION_GRID[r].powi(c as i32));
    let rhs = DVector::from_vec(sums.clone());
    let svd = design.clone().svd(true, true);
    let coef = svd.solve(&rhs, 1e-14).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let resid = (&design * &coef - &rhs).norm() / (EXTRAPOLATION_GRID.len() as f64).sqrt();
    Ok(EtaEstimate {
        value: coef[0],
        error: resid,
        method: EtaMethod::ZetaExtrapolated,
        k: radius,
        grid: EXTRAPOLATION_GRID.to_vec(),
        warnings: vec!["truncated zeta sums extrapolated to s = 0; not an analytic continuation".into()],
    })
}

/// `ρ = η(D^E_H) - rank(E) · η(D_H)` with the same metric, flux and truncation.
pub fn rho_invariant(torus: &TwistedTorus<f64>, radius: usize, method: EtaMethod) -> Result<EtaEstimate> {
    let rank = torus.bundle().rank();
    let twisted = eta_invariant(&OddSignatureOperator::new(torus)?, radius, method)?;
    let trivial_torus = torus.with_bundle(crate::bundle::FlatBundle::trivial(torus.dim(), 1))?;
    let trivial = eta_invariant(&OddSignatureOperator::new(&trivial_torus)?, radius, method)?;
    let r = rank as f64;
    let mut warnings = twisted.warnings.clone();
    warnings.extend(trivial.warnings.iter().cloned());
    Ok(EtaEstimate {
        value: twisted.value - r * trivial.value,
        error: (twisted.error.powi(2) + (r * trivial.error).powi(2)).sqrt(),
        method: if twisted.method == trivial.method { twisted.method } else { EtaMethod::ZetaResidue },
        k: twisted.k.max(trivial.k),
        grid: twisted.grid,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::FlatBundle;
    use crate::exterior::{FlatMetric, MultiIndex};
    use crate::scalar::cx;
    use crate::twisted::FluxForm;

    fn t3(h: f64, metric: FlatMetric<f64>, bundle: FlatBundle<f64>) -> TwistedTorus<f64> {
        let flux = FluxForm::constant(3, &[(MultiIndex::top(3), cx(h, 0.0))]).unwrap();
        TwistedTorus::new(metric, bundle, flux).unwrap()
    }

    #[test]
    fn vanishes_without_flux() {
        for metric in [FlatMetric::euclidean(3), FlatMetric::diagonal(&[1.44, 1.0, 0.81]).unwrap()] {
            let op = OddSignatureOperator::new(&t3(0.0, metric, FlatBundle::trivial(3, 1))).unwrap();
            let e = eta_invariant(&op, 3, EtaMethod::ModeSymmetry).unwrap();
            assert_eq!(e.method, EtaMethod::ModeSymmetry);
            assert!(e.value.abs() <= e.error && e.error < 1e-6, "{e:?}");
        }
    }

    #[test]
    fn flux_falls_back_to_residue() {
        let op = OddSignatureOperator::new(&t3(0.5, FlatMetric::euclidean(3), FlatBundle::trivial(3, 1))).unwrap();
        let e = eta_invariant(&op, 2, EtaMethod::ModeSymmetry).unwrap();
        assert_eq!(e.method, EtaMethod::ZetaResidue);
        assert_eq!(e.warnings.len(), 1);
        assert!(e.error < 1e-8, "{e:?}");
    }

    #[test]
    fn odd_in_flux() {
        let metric = FlatMetric::diagonal(&[1.2, 0.8, 1.0]).unwrap();
        let a = eta_invariant(&OddSignatureOperator::new(&t3(0.7, metric.clone(), FlatBundle::trivial(3, 1))).unwrap(), 2, EtaMethod::ZetaResidue).unwrap();
        let b = eta_invariant(&OddSignatureOperator::new(&t3(-0.7, metric, FlatBundle::trivial(3, 1))).unwrap(), 2, EtaMethod::ZetaResidue).unwrap();
        assert!((a.value + b.value).abs() < 1e-10, "{a:?} {b:?}");
    }

    #[test]
    fn direct_sum_is_additive() {
        let metric = FlatMetric::euclidean(3);
        let b1 = FlatBundle::line(&[0.25, 0.0, 0.0]);
        let b2 = FlatBundle::line(&[0.0, 0.5, 0.1]);
        let sum = b1.direct_sum(&b2).unwrap();
        let eta = |b: FlatBundle<f64>| eta_invariant(&OddSignatureOperator::new(&t3(0.4, metric.clone(), b)).unwrap(), 2, EtaMethod::ZetaResidue).unwrap().value;
        let (e1, e2, e12) = (eta(b1), eta(b2), eta(sum));
        assert!((e12 - e1 - e2).abs() < 1e-10);
    }

    #[test]
    fn rho_of_trivial_bundle_is_zero() {
        let t = t3(0.3, FlatMetric::euclidean(3), FlatBundle::trivial(3, 2));
        let r = rho_invariant(&t, 2, EtaMethod::ModeSymmetry).unwrap();
        assert!(r.value.abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn extrapolation_reports_its_grid() {
        let op = OddSignatureOperator::new(&t3(0.0, FlatMetric::euclidean(3), FlatBundle::trivial(3, 1))).unwrap();
        let e = eta_invariant(&op, 2, EtaMethod::ZetaExtrapolated).unwrap();
        assert_eq!(e.grid, EXTRAPOLATION_GRID.to_vec());
        assert!(e.value.abs() < 1e-10 && e.error >= 0.0);
    }
}
