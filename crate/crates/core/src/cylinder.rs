//! Product cylinders `Y = X × [0, L]` over odd-dimensional flat tori: the boundary
//! identification of the signature operator, the APS index mode by mode, and interval cohomology.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::FlatBundle;
use crate::error::{Error, Result};
use crate::exterior::{wedge_left, FiberBasis, FlatMetric, Mode, MultiIndex, Parity};
use crate::scalar::{i_pow, Cx};
use crate::spectral::OddSignatureOperator;
use crate::twisted::{numerical_kernel, TwistedTorus};

/// Which side of the APS projection the zero eigenvalues of the boundary operator fall on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ZeroModeConvention {
    /// `P = P_{≥0}`: the boundary condition also kills the kernel.
    #[serde(rename = "nonnegative")]
    NonNegative,
    /// `P = P_{>0}`.
    #[serde(rename = "strictly-positive")]
    StrictlyPositive,
}

#[derive(Clone, Debug)]
pub struct CylinderProblem {
    pub base: TwistedTorus<f64>,
    pub length: f64,
    pub radius: usize,
    pub convention: ZeroModeConvention,
}

impl CylinderProblem {
    pub fn new(base: TwistedTorus<f64>, length: f64, radius: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter(format!("cylinder length must be positive, got {length}")));
        }
        if base.dim() % 2 == 0 {
            return Err(Error::EvenDimension(base.dim()));
        }
        Ok(CylinderProblem { base, length, radius, convention: ZeroModeConvention::NonNegative })
    }

    pub fn with_convention(mut self, convention: ZeroModeConvention) -> Self {
        self.convention = convention;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ApsIndexResult {
    pub index: i64,
    pub dim_ker_plus: usize,
    pub dim_ker_minus: usize,
    pub h_plus: usize,
    pub h_minus: usize,
    pub h_infinity: usize,
    /// Kernel of the boundary operator on all forms of `X`, equal to that of `D ⊕ (-D)` on the
    /// even forms of both boundary components.
    pub dim_ker_boundary: usize,
    pub identity_holds: bool,
    pub convention: ZeroModeConvention,
}

/// Per-mode diagnostics for a failed identity.
#[derive(Clone, Debug, Serialize)]
pub struct ModeCount {
    pub mode: Vec<i32>,
    pub channel: usize,
    pub zero_modes: usize,
    pub kernel: usize,
    pub cokernel: usize,
}

/// Kernel and cokernel of `∂_r + λ` on `[0, L]` with the APS condition for `D` at `r = 0` and
/// for `-D` at `r = L`; the adjoint `-∂_r + λ` carries the complementary conditions.
/// Neither depends on `L`: the exponentials never vanish.
pub fn interval_mode(lambda: f64, zero: bool, convention: ZeroModeConvention) -> (usize, usize) {
    let projected = |mu: f64, is_zero: bool| -> bool {
        if is_zero {
            convention == ZeroModeConvention::NonNegative
        } else {
            mu > 0.0
        }
    };
    let lam = if zero { 0.0 } else { lambda };
    // f = e^{-λr}: each end either kills it or not.
    let kernel = !projected(lam, zero) && !projected(-lam, zero);
    // g = e^{λr} under the complementary projections.
    let cokernel = projected(lam, zero) && projected(-lam, zero);
    (kernel as usize, cokernel as usize)
}

fn zero_floor(values: &[f64]) -> f64 {
    1e-9 * values.iter().fold(1.0f64, |a, v| a.max(v.abs()))
}

/// APS index of the signature operator on `X × [0, L]`, summed over boundary eigenmodes.
///
/// Near the boundary `Ω⁺(Y)` is identified with all forms of `X`, where the boundary operator
/// is two copies of `D` (even and odd forms are exchanged by `T`).
pub fn aps_cylinder_index(problem: &CylinderProblem) -> Result<ApsIndexResult> {
    let counts = mode_counts(problem)?;
    let index: i64 = counts.iter().map(|c| c.kernel as i64 - c.cokernel as i64).sum();
    let ker_plus: usize = counts.iter().map(|c| c.kernel).sum();
    let ker_minus: usize = counts.iter().map(|c| c.cokernel).sum();
    let zero: usize = counts.iter().map(|c| c.zero_modes).sum();
    // On the elongation R × X, e^{-λr} is never L² and bounded exactly for λ = 0.
    let (h_plus, h_minus, h_infinity) = (0, 0, zero);
    let dim_ker_boundary = zero;
    Ok(ApsIndexResult {
        index,
        dim_ker_plus: ker_plus,
        dim_ker_minus: ker_minus,
        h_plus,
        h_minus,
        h_infinity,
        dim_ker_boundary,
        identity_holds: index + dim_ker_boundary as i64 == 0 && index == h_plus as i64 - h_minus as i64 - h_infinity as i64,
        convention: problem.convention,
    })
}

fn mode_counts(problem: &CylinderProblem) -> Result<Vec<ModeCount>> {
    let op = OddSignatureOperator::new(&problem.base)?;
    Ok(problem
        .base
        .modes(problem.radius)
        .into_par_iter()
        .map(|m| {
            let spec = op.block_spectrum(&m);
            let floor = zero_floor(&spec);
            let (mut zeros, mut kernel, mut cokernel) = (0, 0, 0);
            // Even and odd forms of X both carry the spectrum of D.
            for &lambda in spec.iter().chain(spec.iter()) {
                let zero = lambda.abs() <= floor;
                zeros += zero as usize;
                let (k, c) = interval_mode(lambda, zero, problem.convention);
                kernel += k;
                cokernel += c;
            }
            ModeCount { mode: m.k.clone(), channel: m.channel, zero_modes: zeros, kernel, cokernel }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct SignatureIdentityReport {
    pub index: i64,
    pub dim_ker_boundary: usize,
    pub sum: i64,
}

/// `Index(B; P) + dim ker(D_∂Y) = Sign(Y) = 0` for the product cylinder.
pub fn cylinder_signature_identity(problem: &CylinderProblem) -> Result<SignatureIdentityReport> {
    let r = aps_cylinder_index(problem)?;
    let sum = r.index + r.dim_ker_boundary as i64;
    if sum != 0 {
        let counts = mode_counts(problem)?;
        let bad: Vec<String> = counts
            .iter()
            .filter(|c| c.kernel != 0 || c.cokernel != 0 || c.zero_modes != 0)
            .map(|c| format!("{:?}/{}: zero {} ker {} coker {}", c.mode, c.channel, c.zero_modes, c.kernel, c.cokernel))
            .collect();
        return Err(Error::IdentityViolated(format!(
            "index {} + dim ker {} = {sum} under {:?}; modes: {}",
            r.index,
            r.dim_ker_boundary,
            problem.convention,
            bad.join("; ")
        )));
    }
    Ok(SignatureIdentityReport { index: r.index, dim_ker_boundary: r.dim_ker_boundary, sum })
}

/// The cylinder `X × S¹` carrying the pulled-back bundle and flux; only its zero `r`-frequency
/// and its fiber geometry are used.
fn cylinder_torus(base: &TwistedTorus<f64>) -> Result<TwistedTorus<f64>> {
    let n = base.dim();
    let metric = base.metric().product(&FlatMetric::euclidean(1));
    let angles = (0..base.bundle().rank())
        .map(|a| {
            let mut row = base.bundle().angles(a).to_vec();
            row.push(0.0);
            row
        })
        .collect();
    let bundle = FlatBundle::from_angles(n + 1, angles)?;
    TwistedTorus::new(metric, bundle, base.flux().pullback(n + 1, 0))
}

/// `J^±(α) = α ± i^{m+p(p-1)} ⋆_X α ∧ dr`, from all forms of `X` into all forms of `Y`.
fn j_matrix(base: &TwistedTorus<f64>, sign: f64) -> DMatrix<Cx<f64>> {
    let n = base.dim();
    let m = n.div_ceil(2);
    let x_all = FiberBasis::new(n, Parity::All);
    let y_all = FiberBasis::new(n + 1, Parity::All);
    let star = &base.geometry().star;
    let dr = MultiIndex::axis(n);
    let mut j = DMatrix::zeros(y_all.len(), x_all.len());
    for (col, &i) in x_all.indices().iter().enumerate() {
        let p = i.degree();
        j[(y_all.position(i).unwrap(), col)] += Cx::new(1.0, 0.0);
        let phase = i_pow::<f64>((m + p * p.saturating_sub(1)) as i64) * sign;
        for (row, &k) in x_all.indices().iter().enumerate() {
            let c = star[(row, col)];
            if c.norm() == 0.0 {
                continue;
            }
            let (s, idx) = k.wedge(dr).expect("dr is not in a base index");
            j[(y_all.position(idx).unwrap(), col)] += c * phase * s as f64;
        }
    }
    j
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryIdentification {
    /// Largest entry of `σ⁻¹ (J⁻)⁻¹ B J⁺ - (∂_r + D)` over modes, where `σ` is the `∂_r` coefficient.
    pub defect: f64,
    /// How far `B J⁺` leaves the range of `J⁻`.
    pub range_defect: f64,
}

/// Separates `B = ∇ + ∇†` on `Y` into `∂_r` and tangential parts, conjugates by `J^±` and
/// compares with `∂_r + D` on all forms of `X`.
pub fn boundary_identification_check(base: &TwistedTorus<f64>, radius: usize) -> Result<BoundaryIdentification> {
    let op = OddSignatureOperator::new(base)?;
    let y = cylinder_torus(base)?;
    let n = base.dim();
    let geo = y.geometry();
    let wedge_dr = wedge_left(n + 1, &[(MultiIndex::axis(n), Cx::new(1.0, 0.0))]);
    let m1 = &wedge_dr - geo.gram_adjoint(&wedge_dr, &geo.basis, &geo.basis);
    let jp = j_matrix(base, 1.0);
    let jm = j_matrix(base, -1.0);
    let jm_pinv = (jm.adjoint() * &jm).try_inverse().ok_or_else(|| Error::InvalidParameter("J⁻ is not injective".into()))? * jm.adjoint();
    let sigma = &jm_pinv * &m1 * &jp;
    let sigma_inv = sigma.clone().try_inverse().ok_or_else(|| Error::InvalidParameter("∂_r coefficient is singular".into()))?;
    let mut range = (&jm * &sigma - &m1 * &jp).camax();
    let worst = base
        .modes(radius)
        .into_par_iter()
        .map(|m| {
            let mut k = m.k.clone();
            k.push(0);
            let ym = Mode::new(k, m.channel);
            let d = y.fiber_differential(y.flux(), &ym);
            let b0 = &d + geo.gram_adjoint(&d, &geo.basis, &geo.basis);
            let x0 = &jm_pinv * &b0 * &jp;
            let r = (&jm * &x0 - &b0 * &jp).camax();
            let normal = &sigma_inv * x0;
            let target = op.full_block_at(&base.frequency(&m));
            ((normal - target).camax(), r)
        })
        .collect::<Vec<_>>();
    let mut defect = 0.0f64;
    for (d, r) in worst {
        defect = defect.max(d);
        range = range.max(r);
    }
    Ok(BoundaryIdentification { defect, range_defect: range })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundaryCondition {
    #[serde(rename = "absolute")]
    Absolute,
    #[serde(rename = "relative")]
    Relative,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntervalCohomology {
    pub condition: BoundaryCondition,
    pub b_even: usize,
    pub b_odd: usize,
    /// Largest L² pairing between relative and absolute harmonic forms.
    pub relative_to_absolute: f64,
}

/// Twisted-harmonic forms on `X × [0, L]` with absolute or relative boundary conditions.
///
/// Writing `ω = α(r) + β(r) ∧ dr`, harmonicity is `α'' = Δ_X α`, `β'' = Δ_X β`. Absolute
/// conditions are Neumann on `α` and Dirichlet on `β`; relative ones the reverse. On an
/// eigenvector of `Δ_X` with eigenvalue `μ`, Neumann at both ends has the constant solution iff
/// `μ = 0`, Dirichlet at both ends has none.
pub fn interval_cohomology(problem: &CylinderProblem, condition: BoundaryCondition) -> Result<IntervalCohomology> {
    let base = &problem.base;
    let n = base.dim();
    let y = cylinder_torus(base)?;
    let per_mode: Vec<(usize, usize, f64)> = base
        .modes(problem.radius)
        .into_par_iter()
        .map(|m| -> Result<(usize, usize, f64)> {
            let mut counts = [0usize; 2];
            let mut tangential = Vec::new();
            let mut normal = Vec::new();
            for (slot, parity) in [Parity::Even, Parity::Odd].into_iter().enumerate() {
                let lap = base.hermitian_laplacian(&m, parity);
                let kernel = numerical_kernel(&lap, 1e-9, &m.k)?;
                let sel = base.geometry().basis.selection(&FiberBasis::new(n, parity));
                let ortho = base.geometry().ortho.restrict(&sel);
                for v in &kernel {
                    let coords = ortho.from_orthonormal_vector(v);
                    let as_all = embed(&sel, &coords, 1 << n);
                    tangential.push(as_all.clone());
                    normal.push(as_all);
                }
                match condition {
                    BoundaryCondition::Absolute => counts[slot] += kernel.len(),
                    // β ∧ dr raises the degree by one.
                    BoundaryCondition::Relative => counts[1 - slot] += kernel.len(),
                }
            }
            // Pairing of β ∧ dr with α' over the cylinder, in the Gram matrix of Y.
            let gram = &y.geometry().gram;
            let lift = |v: &nalgebra::DVector<Cx<f64>>, with_dr: bool| lift_form(v, n, with_dr);
            let mut pairing = 0.0f64;
            for b in &normal {
                let rb = lift(b, true);
                for a in &tangential {
                    let ra = lift(a, false);
                    let g = gram.map(|x| Cx::new(x, 0.0));
                    let ip = (ra.adjoint() * g * &rb)[(0, 0)] * problem.length;
                    pairing = pairing.max(ip.norm());
                }
            }
            Ok((counts[0], counts[1], pairing))
        })
        .collect::<Result<_>>()?;
    Ok(IntervalCohomology {
        condition,
        b_even: per_mode.iter().map(|p| p.0).sum(),
        b_odd: per_mode.iter().map(|p| p.1).sum(),
        relative_to_absolute: per_mode.iter().map(|p| p.2).fold(0.0, f64::max),
    })
}

fn embed(sel: &[usize], coords: &nalgebra::DVector<Cx<f64>>, len: usize) -> nalgebra::DVector<Cx<f64>> {
    let mut out = nalgebra::DVector::zeros(len);
    for (r, &s) in sel.iter().enumerate() {
        out[s] = coords[r];
    }
    out
}

/// Coefficients of a base form as a form on `Y`, optionally wedged with `dr` on the right.
fn lift_form(v: &nalgebra::DVector<Cx<f64>>, n: usize, with_dr: bool) -> nalgebra::DVector<Cx<f64>> {
    let x_all = FiberBasis::new(n, Parity::All);
    let y_all = FiberBasis::new(n + 1, Parity::All);
    let mut out = nalgebra::DVector::zeros(y_all.len());
    for (a, &i) in x_all.indices().iter().enumerate() {
        if with_dr {
            let (s, k) = i.wedge(MultiIndex::axis(n)).expect("dr not in a base index");
            out[y_all.position(k).unwrap()] += v[a] * s as f64;
        } else {
            out[y_all.position(i).unwrap()] += v[a];
        }
    }
    out
}
