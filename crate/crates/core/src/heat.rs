//! Heat traces on flat tori: eigenvalue sums against image sums over the deck group `Z^n`,
//! supertraces, and the constant term of their small-time expansion.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::exterior::{wedge_left, FiberBasis, Parity};
use crate::scalar::Cx;
use crate::signature::tau_matrix;
use crate::twisted::{sorted_eigen, TwistedTorus};

/// Tail bound every truncated sum must meet at the smallest `t`.
pub const TAIL_TOLERANCE: f64 = 1e-14;
/// Design matrices of the `α₀` fit must be better conditioned than this.
pub const MAX_CONDITION: f64 = 1e10;
const MAX_RADIUS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HeatMethod {
    Eigen,
    Images,
}

#[derive(Clone, Debug, Serialize)]
pub struct HeatTrace {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub tail_bounds: Vec<f64>,
    pub method: HeatMethod,
    pub parity: Parity,
}

/// `0.05 · 2^{j/2}`, `j = 0..12`.
pub fn default_t_grid() -> Vec<f64> {
    (0..12).map(|j| 0.05 * 2f64.powf(j as f64 / 2.0)).collect()
}

fn check_grid(t: &[f64]) -> Result<f64> {
    if t.is_empty() || t.iter().any(|v| !(v.is_finite() && *v > 0.0)) || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("t-grid must be positive and strictly increasing".into()));
    }
    Ok(t[0])
}

fn shell_count(n: usize, j: usize) -> f64 {
    if j == 0 {
        1.0
    } else {
        ((2 * j + 1) as f64).powi(n as i32) - ((2 * j - 1) as f64).powi(n as i32)
    }
}

/// `Σ_{j > K} f(j)` for a summand that is eventually decreasing; stops once terms are negligible.
fn shell_tail(from: usize, term: impl Fn(usize) -> f64) -> f64 {
    let mut total = 0.0;
    let mut j = from;
    let mut prev = f64::INFINITY;
    loop {
        let x = term(j);
        total += x;
        if (x <= 1e-300 || x < 1e-20 * total) && x <= prev {
            return total;
        }
        if j > from + 100_000 {
            return f64::INFINITY;
        }
        prev = x;
        j += 1;
    }
}

/// Operator norm of the flux part of `∇ + ∇†` at a fiber.
fn flux_norm(torus: &TwistedTorus<f64>) -> f64 {
    let geo = torus.geometry();
    let w = wedge_left(torus.dim(), &torus.flux().constant_part());
    let sym = &w + geo.gram_adjoint(&w, &geo.basis, &geo.basis);
    sorted_eigen(&geo.ortho.to_orthonormal(&sym)).0.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Tail of `Σ e^{-tλ}` over modes with `‖k‖_∞ > radius`.
///
/// `∇ + ∇†` at frequency `ξ` is `σ(ξ)` plus the flux part, with `σ(ξ)² = |ξ|²`, so every
/// eigenvalue satisfies `λ ≥ (|ξ| - a)₊²`; also `|ξ| ≥ 2π(j-1)/√λ_max(G)` on shell `j`.
fn eigen_tail(torus: &TwistedTorus<f64>, fiber: usize, radius: usize, t: f64, a: f64) -> f64 {
    let n = torus.dim();
    let scale = 2.0 * std::f64::consts::PI / torus.metric().extremal_eigenvalues().1.sqrt();
    let copies = (fiber * torus.bundle().rank()) as f64;
    shell_tail(radius + 1, |j| {
        let gap = (scale * (j as f64 - 1.0) - a).max(0.0);
        copies * shell_count(n, j) * (-t * gap * gap).exp()
    })
}

/// `Σ e^{-tλ}` over the Laplacian `Δ^E_H` on forms of the given parity, modes `‖k‖_∞ ≤ radius`.
pub fn heat_trace_eigen(torus: &TwistedTorus<f64>, parity: Parity, t: &[f64], radius: usize) -> Result<HeatTrace> {
    let t_min = check_grid(t)?;
    if !torus.flux().is_constant() {
        return Err(Error::NonConstantFlux);
    }
    let fiber = FiberBasis::new(torus.dim(), parity).len();
    let a = flux_norm(torus);
    let tail = eigen_tail(torus, fiber, radius, t_min, a);
    if tail >= TAIL_TOLERANCE {
        let required = (radius..MAX_RADIUS).find(|&k| eigen_tail(torus, fiber, k, t_min, a) < TAIL_TOLERANCE).unwrap_or(MAX_RADIUS);
        return Err(Error::TailTooLarge { tail, required_radius: required });
    }
    let spectra: Vec<Vec<f64>> = torus
        .modes(radius)
        .into_par_iter()
        .map(|m| sorted_eigen(&torus.hermitian_laplacian(&m, parity)).0)
        .collect();
    let values = t.iter().map(|&s| spectra.iter().flatten().map(|l| (-s * l).exp()).sum()).collect();
    Ok(HeatTrace {
        t: t.to_vec(),
        values,
        tail_bounds: t.iter().map(|&s| eigen_tail(torus, fiber, radius, s, a)).collect(),
        method: HeatMethod::Eigen,
        parity,
    })
}

// twofloat supplies exact double-double arithmetic, but its `exp` is only good to ~1e-13, so
// the two transcendental functions the image sum needs are evaluated here by Taylor series.

/// `e^{-x}` for `x ≥ 0` in double-double.
fn exp_neg(x: TwoFloat) -> TwoFloat {
    let k = (x.hi() / std::f64::consts::LN_2).round();
    let r = -(x - twofloat::consts::LN_2 * k);
    // |r| ≤ ln 2 / 2; 27 terms reach 1e-35.
    let mut sum = TwoFloat::from(1.0);
    for j in (1..=27).rev() {
        sum = sum * r / j as f64 + 1.0;
    }
    sum * 2f64.powi(-(k as i32))
}

/// `cos(2πf)` in double-double.
fn cos_turns(f: TwoFloat) -> TwoFloat {
    let mut f = f - f.hi().round();
    if f.hi() < 0.0 {
        f = -f;
    }
    // f ∈ [0, 1/2]; fold onto [0, 1/4] with cos(2πf) = -cos(2π(1/2 - f)).
    let (f, sign) = if f.hi() > 0.25 { (TwoFloat::from(0.5) - f, -1.0) } else { (f, 1.0) };
    let y = twofloat::consts::TAU * f;
    let y2 = y * y;
    let mut sum = TwoFloat::from(1.0);
    for j in (1..=17).rev() {
        sum = -(sum * y2) / ((2 * j - 1) * (2 * j)) as f64 + 1.0;
    }
    sum * sign
}

/// Returns `(lead + rest, rest)` for one channel. With holonomy and large `t` the two nearly
/// cancel, so the lattice sum is carried in double-double.
fn image_sum(torus: &TwistedTorus<f64>, channel: usize, t: f64, radius: usize) -> (f64, f64) {
    let n = torus.dim();
    let g = torus.metric().matrix();
    let theta = torus.bundle().angles(channel);
    let lead = torus.metric().volume() * (4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0);
    let mut terms = Vec::new();
    for gamma in crate::exterior::lattice_box(n, radius) {
        if gamma.iter().all(|&c| c == 0) {
            continue;
        }
        let mut d2 = TwoFloat::from(0.0);
        for i in 0..n {
            for j in 0..n {
                d2 += TwoFloat::new_mul(g[(i, j)], (gamma[i] * gamma[j]) as f64);
            }
        }
        let mut phase = TwoFloat::from(0.0);
        for (th, &c) in theta.iter().zip(&gamma) {
            phase += TwoFloat::new_mul(*th, c as f64);
        }
        terms.push(exp_neg(d2 / (4.0 * t)) * cos_turns(phase));
    }
    // Small terms first.
    terms.sort_by(|a, b| a.hi().abs().total_cmp(&b.hi().abs()));
    let rest: TwoFloat = terms.into_iter().fold(TwoFloat::from(0.0), |acc, x| acc + x);
    let total = TwoFloat::from(lead) * (rest + 1.0);
    (total.hi() + total.lo(), lead * (rest.hi() + rest.lo()))
}

fn image_tail(torus: &TwistedTorus<f64>, radius: usize, t: f64) -> f64 {
    let n = torus.dim();
    let lmin = torus.metric().extremal_eigenvalues().0;
    let lead = torus.metric().volume() * (4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0);
    lead * shell_tail(radius + 1, |j| shell_count(n, j) * (-lmin * (j * j) as f64 / (4.0 * t)).exp())
}

/// Radius of the image box needed at time `t`.
fn image_radius(torus: &TwistedTorus<f64>, t: f64) -> Result<usize> {
    let lead = torus.metric().volume() * (4.0 * std::f64::consts::PI * t).powf(-(torus.dim() as f64) / 2.0);
    let target = TAIL_TOLERANCE * 1e-3 * lead;
    (1..256).find(|&r| image_tail(torus, r, t) < target).ok_or(Error::TailTooLarge {
        tail: image_tail(torus, 255, t),
        required_radius: 256,
    })
}

/// `vol_G (4πt)^{-n/2} Σ_γ e^{-‖γ‖²_G/4t} e^{-2πiθ·γ}` per channel, times the number of forms of
/// the parity (the untwisted form Laplacian acts diagonally).
pub fn heat_trace_images(torus: &TwistedTorus<f64>, parity: Parity, t: &[f64]) -> Result<HeatTrace> {
    check_grid(t)?;
    if !torus.flux().is_zero() {
        return Err(Error::FluxInvalid("image sums are only available without flux".into()));
    }
    let fiber = FiberBasis::new(torus.dim(), parity).len() as f64;
    let rank = torus.bundle().rank();
    let per_t: Vec<(f64, f64)> = t
        .par_iter()
        .map(|&s| {
            let radius = image_radius(torus, s)?;
            let value: f64 = (0..rank).map(|a| image_sum(torus, a, s, radius).0).sum();
            Ok((fiber * value, fiber * rank as f64 * image_tail(torus, radius, s)))
        })
        .collect::<Result<_>>()?;
    Ok(HeatTrace {
        t: t.to_vec(),
        values: per_t.iter().map(|p| p.0).collect(),
        tail_bounds: per_t.iter().map(|p| p.1).collect(),
        method: HeatMethod::Images,
        parity,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussianDecay {
    /// Fitted `c` in `|Σ_{γ≠0}| ≈ C t^{-n/2} e^{-c/t}`.
    pub c_fit: f64,
    /// `min_{γ≠0} ‖γ‖²_G / 4`.
    pub c_bound: f64,
    pub log_prefactor: f64,
    pub holds: bool,
}

/// Fits the decay rate of the `γ ≠ 0` part of the image sum (channel 0) as `t → 0`.
pub fn image_remainder_decay(torus: &TwistedTorus<f64>, t: &[f64]) -> Result<GaussianDecay> {
    check_grid(t)?;
    let n = torus.dim();
    let g = torus.metric().matrix();
    let (lmin, _) = torus.metric().extremal_eigenvalues();
    let min_diag = (0..n).map(|i| g[(i, i)]).fold(f64::INFINITY, f64::min);
    let box_radius = (min_diag / lmin).sqrt().floor() as usize;
    let d2 = crate::exterior::lattice_box(n, box_radius.max(1))
        .into_iter()
        .filter(|gamma| gamma.iter().any(|&c| c != 0))
        .map(|gamma| {
            let v = DVector::from_iterator(n, gamma.iter().map(|&c| c as f64));
            (v.transpose() * g * &v)[(0, 0)]
        })
        .fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    for &s in t {
        let (_, rest) = image_sum(torus, 0, s, image_radius(torus, s)?);
        if rest != 0.0 {
            rows.push((1.0 / s, rest.abs().ln() + 0.5 * n as f64 * s.ln()));
        }
    }
    if rows.len() < 2 {
        return Err(Error::InvalidParameter("image remainder vanishes on the grid".into()));
    }
    let design = DMatrix::from_fn(rows.len(), 2, |i, j| if j == 0 { 1.0 } else { -rows[i].0 });
    let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let sol = design.svd(true, true).solve(&rhs, 1e-14).map_err(|e| Error::InvalidParameter(e.into()))?;
    let c_bound = d2 / 4.0;
    Ok(GaussianDecay { c_fit: sol[1], c_bound, log_prefactor: sol[0], holds: sol[1] >= c_bound - 1e-6 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Grading {
    /// `(-1)^p`: the Euler characteristic.
    Parity,
    /// The involution `τ` on even-dimensional tori.
    Signature,
}

/// `Tr(ε e^{-tΔ})` on all forms, modes within `radius`. Nonzero eigenvalues cancel in pairs
/// inside each mode block, so no tail enters.
pub fn supertrace(torus: &TwistedTorus<f64>, grading: Grading, t: &[f64], radius: usize) -> Result<Vec<f64>> {
    check_grid(t)?;
    if !torus.flux().is_constant() {
        return Err(Error::NonConstantFlux);
    }
    let n = torus.dim();
    let geo = torus.geometry();
    let grade = match grading {
        Grading::Parity => crate::exterior::degree_diagonal(n, |p| Cx::new(crate::scalar::parity_sign(p) as f64, 0.0)),
        Grading::Signature => geo.ortho.to_orthonormal(&tau_matrix(torus)?),
    };
    // Per mode: eigenvalues with their grading weights v†εv.
    let weighted: Vec<Vec<(f64, f64)>> = torus
        .modes(radius)
        .into_par_iter()
        .map(|m| {
            let (values, vectors) = sorted_eigen(&torus.hermitian_laplacian(&m, Parity::All));
            let w = vectors.adjoint() * &grade * &vectors;
            values.into_iter().enumerate().map(|(i, l)| (l, w[(i, i)].re)).collect()
        })
        .collect();
    Ok(t.iter().map(|&s| weighted.iter().flatten().map(|(l, w)| w * (-s * l).exp()).sum()).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct McKeanSinger {
    pub t: Vec<f64>,
    pub supertrace: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub euler_characteristic: i64,
}

/// `Str e^{-tΔ^E_H}` is constant in `t` and equals `b_even - b_odd`.
pub fn mckean_singer_check(torus: &TwistedTorus<f64>, t: &[f64], radius: usize) -> Result<McKeanSinger> {
    if !torus.flux().is_admissible() {
        return Err(Error::FluxInvalid("supertrace check needs an admissible flux".into()));
    }
    let values = supertrace(torus, Grading::Parity, t, radius)?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    let coh = torus.cohomology(radius)?;
    let chi = coh.betti(Parity::Even) as i64 - coh.betti(Parity::Odd) as i64;
    if variance >= 1e-8 || (mean - chi as f64).abs() >= 1e-8 {
        return Err(Error::ConstancyViolated(variance.max((mean - chi as f64).abs())));
    }
    Ok(McKeanSinger { t: t.to_vec(), supertrace: values, mean, variance, euler_characteristic: chi })
}

#[derive(Clone, Debug, Serialize)]
pub struct Alpha0Fit {
    /// `j` of each basis function `t^{j/2}`.
    pub exponents: Vec<i32>,
    pub coefficients: Vec<f64>,
    pub alpha0: f64,
    /// Largest absolute residual of the fit on the grid.
    pub residual: f64,
    /// Condition number of the column-normalized design matrix.
    pub condition: f64,
}

/// Least-squares fit of `Σ_{j=-n..2} a_j t^{j/2}`; `a_0` estimates `∫ α₀`.
pub fn alpha0_extract(t: &[f64], values: &[f64], n: usize) -> Result<Alpha0Fit> {
    check_grid(t)?;
    if values.len() != t.len() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("values must be finite and match the t-grid".into()));
    }
    let exponents: Vec<i32> = (-(n as i32)..=2).collect();
    if t.len() < exponents.len() {
        return Err(Error::InvalidParameter(format!("{} terms need at least as many grid points", exponents.len())));
    }
    let raw = DMatrix::from_fn(t.len(), exponents.len(), |i, j| t[i].powf(exponents[j] as f64 / 2.0));
    let norms: Vec<f64> = raw.column_iter().map(|c| c.norm()).collect();
    let design = DMatrix::from_fn(raw.nrows(), raw.ncols(), |i, j| raw[(i, j)] / norms[j]);
    let svd = design.clone().svd(true, true);
    let (smax, smin) = svd.singular_values.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    let condition = smax / smin;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditionedFit(condition));
    }
    let rhs = DVector::from_column_slice(values);
    let scaled = svd.solve(&rhs, 0.0).map_err(|e| Error::InvalidParameter(e.into()))?;
    let coefficients: Vec<f64> = scaled.iter().zip(&norms).map(|(c, s)| c / s).collect();
    let residual = (&design * &scaled - &rhs).amax();
    let alpha0 = coefficients[exponents.iter().position(|&j| j == 0).unwrap()];
    Ok(Alpha0Fit { exponents, coefficients, alpha0, residual, condition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::FlatBundle;
    use crate::exterior::{FlatMetric, MultiIndex};
    use crate::scalar::cx;
    use crate::twisted::FluxForm;

    fn torus(metric: FlatMetric<f64>, bundle: FlatBundle<f64>) -> TwistedTorus<f64> {
        let n = metric.dim();
        TwistedTorus::new(metric, bundle, FluxForm::zero(n)).unwrap()
    }

    fn t3_flux(h: f64) -> TwistedTorus<f64> {
        let flux = FluxForm::constant(3, &[(MultiIndex::top(3), cx(h, 0.0))]).unwrap();
        TwistedTorus::new(FlatMetric::euclidean(3), FlatBundle::trivial(3, 1), flux).unwrap()
    }

    fn dd_close(a: TwoFloat, b: TwoFloat, tol: f64) -> bool {
        let d = a - b;
        (d.hi() + d.lo()).abs() <= tol * (b.hi().abs()).max(1e-300)
    }

    #[test]
    fn double_double_exponential() {
        let one = TwoFloat::from(1.0);
        assert!(dd_close(exp_neg(one) * twofloat::consts::E, one, 1e-30));
        for (a, b) in [(0.3, 0.45), (2.5, 7.125), (19.0, 11.7)] {
            let (a, b) = (TwoFloat::from(a), TwoFloat::from(b));
            assert!(dd_close(exp_neg(a) * exp_neg(b), exp_neg(a + b), 1e-29));
        }
        assert_eq!(exp_neg(TwoFloat::from(0.0)).hi(), 1.0);
    }

    #[test]
    fn double_double_cosine() {
        let third = TwoFloat::from(1.0) / 3.0;
        let s = twofloat::consts::FRAC_1_SQRT_2;
        assert!(dd_close(cos_turns(TwoFloat::from(1.0) / 6.0), TwoFloat::from(0.5), 1e-30));
        assert!(dd_close(cos_turns(third), TwoFloat::from(-0.5), 1e-30));
        assert!(dd_close(cos_turns(TwoFloat::from(0.125)), s, 1e-30));
        assert!(dd_close(cos_turns(TwoFloat::from(-2.625)), -s, 1e-30));
        for f in [0.07, 0.31, 0.77] {
            let f = TwoFloat::from(f);
            let (c, s) = (cos_turns(f), cos_turns(f - 0.25));
            assert!(dd_close(c * c + s * s, TwoFloat::from(1.0), 1e-30));
        }
    }

    #[test]
    fn image_sum_survives_cancellation() {
        // At t = 1 the trace is ~1e-6 of the leading Gaussian term.
        let tt = torus(FlatMetric::diagonal(&[1.3, 0.7]).unwrap(), FlatBundle::line(&[0.25, 0.5]));
        let grid = [0.5, 0.75, 1.0];
        let eig = heat_trace_eigen(&tt, Parity::All, &grid, 12).unwrap();
        let img = heat_trace_images(&tt, Parity::All, &grid).unwrap();
        for (a, b) in eig.values.iter().zip(&img.values) {
            assert!((a - b).abs() < 1e-12 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn circle_trace_is_theta_series() {
        let t1 = torus(FlatMetric::euclidean(1), FlatBundle::trivial(1, 1));
        let h = heat_trace_eigen(&t1, Parity::Even, &[1.0], 4).unwrap();
        let direct: f64 = (-20i32..=20).map(|k| (-4.0 * std::f64::consts::PI.powi(2) * (k * k) as f64).exp()).sum();
        assert!((h.values[0] - direct).abs() < 1e-16);
        assert!(h.tail_bounds[0] < 1e-100);
    }

    #[test]
    fn eigen_and_images_agree() {
        let cases = [
            torus(FlatMetric::euclidean(1), FlatBundle::line(&[0.5])),
            torus(FlatMetric::diagonal(&[1.3, 0.7]).unwrap(), FlatBundle::line(&[0.25, 0.0])),
            torus(FlatMetric::diagonal(&[1.44, 1.0, 0.81]).unwrap(), FlatBundle::trivial(3, 1)),
        ];
        let grid: Vec<f64> = (0..8).map(|j| 0.05 * 1.5f64.powi(j)).collect();
        for tor in cases {
            let e = heat_trace_eigen(&tor, Parity::All, &grid, 10).unwrap();
            let i = heat_trace_images(&tor, Parity::All, &grid).unwrap();
            for (a, b) in e.values.iter().zip(&i.values) {
                assert!((a - b).abs() < 1e-12 * b.abs(), "{a} vs {b}");
            }
            assert!(e.values.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn all_forms_are_copies_of_functions() {
        let tor = torus(FlatMetric::diagonal(&[1.3, 0.7]).unwrap(), FlatBundle::trivial(2, 1));
        let all = heat_trace_eigen(&tor, Parity::All, &[0.2], 8).unwrap().values[0];
        let even = heat_trace_eigen(&tor, Parity::Even, &[0.2], 8).unwrap().values[0];
        // Even forms on T² are functions and top forms.
        assert!((all - 2.0 * even).abs() < 1e-12 * all);
    }

    #[test]
    fn short_truncation_is_refused() {
        let tor = torus(FlatMetric::euclidean(3), FlatBundle::trivial(3, 1));
        match heat_trace_eigen(&tor, Parity::All, &[0.01], 2) {
            Err(Error::TailTooLarge { required_radius, .. }) => {
                assert!(required_radius > 2);
                assert!(heat_trace_eigen(&tor, Parity::All, &[0.01], required_radius).is_ok());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn image_remainder_decays_at_the_gaussian_rate() {
        let grid: Vec<f64> = (0..9).map(|j| 0.01 * 2f64.powf(j as f64 / 4.0)).collect();
        let circle = image_remainder_decay(&torus(FlatMetric::euclidean(1), FlatBundle::trivial(1, 1)), &grid).unwrap();
        assert!(circle.holds && (circle.c_fit - 0.25).abs() < 1e-6, "{circle:?}");
        // The next shell (1/4 against 0.81/4) is not yet negligible on this grid; only the bound is sharp.
        let t3 = torus(FlatMetric::diagonal(&[1.44, 1.0, 0.81]).unwrap(), FlatBundle::trivial(3, 1));
        let d = image_remainder_decay(&t3, &grid).unwrap();
        assert!(d.holds && (d.c_bound - 0.2025).abs() < 1e-15, "{d:?}");
    }

    #[test]
    fn supertrace_is_euler_characteristic() {
        let grid = default_t_grid();
        let r = mckean_singer_check(&t3_flux(0.7), &grid, 3).unwrap();
        assert_eq!(r.euler_characteristic, 0);
        assert!(r.variance < 1e-8);
        let circle = torus(FlatMetric::euclidean(1), FlatBundle::line(&[1.0 / 3.0]));
        assert!(mckean_singer_check(&circle, &grid, 6).unwrap().mean.abs() < 1e-8);
    }

    #[test]
    fn signature_supertrace_vanishes_on_flat_tori() {
        let grid = default_t_grid();
        for rank in 1..=2 {
            let tor = torus(FlatMetric::diagonal(&[1.2, 0.9]).unwrap(), FlatBundle::trivial(2, rank));
            let s = supertrace(&tor, Grading::Signature, &grid, 6).unwrap();
            assert!(s.iter().all(|v| v.abs() < 1e-10), "{s:?}");
            let fit = alpha0_extract(&grid, &s, 2).unwrap();
            assert!(fit.alpha0.abs() < 1e-6);
        }
    }

    #[test]
    fn synthetic_fit_recovers_constant() {
        let grid = default_t_grid();
        let values: Vec<f64> = grid.iter().map(|t| t.powf(-0.5) + 7.0).collect();
        let fit = alpha0_extract(&grid, &values, 3).unwrap();
        assert!((fit.alpha0 - 7.0).abs() < 1e-8, "{fit:?}");
        assert!(fit.residual < 1e-10);
        let tripled: Vec<f64> = values.iter().map(|v| 3.0 * v).collect();
        assert!((alpha0_extract(&grid, &tripled, 3).unwrap().alpha0 - 21.0).abs() < 1e-8);
    }

    #[test]
    fn clustered_grid_is_ill_conditioned() {
        let grid: Vec<f64> = (0..12).map(|j| 1.0 + 1e-4 * j as f64).collect();
        let values = vec![1.0; 12];
        assert!(matches!(alpha0_extract(&grid, &values, 3), Err(Error::IllConditionedFit(_))));
    }
}
