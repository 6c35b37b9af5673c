//! The bundled verification suite: one entry per acceptance criterion, all computed from
//! fixed configurations so that repeated runs produce identical reports.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;

use twisted_flux::cylinder::{aps_cylinder_index, boundary_identification_check, CylinderProblem};
use twisted_flux::exterior::{submatrix, Ambient, FiberBasis, FlatMetric};
use twisted_flux::heat::{
    alpha0_extract, heat_trace_eigen, heat_trace_images, image_remainder_decay, mckean_singer_check, supertrace, Grading,
};
use twisted_flux::signature::{anticommutation_defect, harmonic_splitting, hermitian_form, index_split_check};
use twisted_flux::spectral::{eta_invariant, rho_invariant, spectral_flow, EtaMethod, OddSignatureOperator};
use twisted_flux::{Complex64, Error, FlatBundle, FluxForm, Form, Mode, MultiIndex, Parity, TwistedTorus};

#[derive(Clone, Debug, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub details: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub criteria: Vec<Criterion>,
}

type Check = std::result::Result<(bool, Value), Error>;

fn criterion(id: u32, name: &str, check: Check) -> Criterion {
    match check {
        Ok((pass, details)) => Criterion { id, name: name.into(), pass, details },
        Err(e) => Criterion { id, name: name.into(), pass: false, details: json!({ "error": e.to_string() }) },
    }
}

pub fn run_all(seed: u64) -> VerifyReport {
    VerifyReport {
        seed,
        criteria: vec![
            betti(),
            exactness(seed),
            scaling(),
            gauge(seed),
            anticommutation(),
            signatures(),
            kunneth_poincare(),
            eta_without_flux(),
            flow_eta_slope(),
            rho_metric_independence(),
            aps_cylinder(),
            heat(),
        ],
    }
}

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn idx(axes: &[usize]) -> MultiIndex {
    MultiIndex::new(axes).expect("valid multi-index")
}

pub fn torus(metric: FlatMetric<f64>, bundle: FlatBundle<f64>, terms: &[(&[usize], Complex64)]) -> Result<TwistedTorus<f64>, Error> {
    let n = metric.dim();
    let coeffs: Vec<(MultiIndex, Complex64)> = terms.iter().map(|(a, c)| (idx(a), *c)).collect();
    TwistedTorus::new(metric, bundle, FluxForm::constant(n, &coeffs)?)
}

pub fn t3(h: f64) -> TwistedTorus<f64> {
    torus(FlatMetric::euclidean(3), FlatBundle::trivial(3, 1), &[(&[0, 1, 2], cx(h, 0.0))]).expect("valid torus")
}

fn diag(entries: &[f64]) -> FlatMetric<f64> {
    FlatMetric::diagonal(entries).expect("positive diagonal")
}

/// `(b_even, b_odd)` from ranks of the mode blocks of `∇`, without forming a Laplacian.
pub fn rank_betti(torus: &TwistedTorus<f64>, radius: usize) -> (usize, usize) {
    let n = torus.dim();
    let all = FiberBasis::new(n, Parity::All);
    let even = all.selection(&FiberBasis::new(n, Parity::Even));
    let odd = all.selection(&FiberBasis::new(n, Parity::Odd));
    let rank = |m: DMatrix<Complex64>| -> usize {
        let s = m.singular_values();
        let smax = s.iter().fold(0.0f64, |a, &x| a.max(x));
        s.iter().filter(|&&x| x > 1e-9 * smax.max(1.0)).count()
    };
    let (mut be, mut bo) = (0, 0);
    for m in torus.modes(radius) {
        let d = torus.fiber_differential(torus.flux(), &m);
        let r_eo = rank(submatrix(&d, &odd, &even));
        let r_oe = rank(submatrix(&d, &even, &odd));
        be += even.len() - r_eo - r_oe;
        bo += odd.len() - r_oe - r_eo;
    }
    (be, bo)
}

pub fn betti() -> Criterion {
    let check = || -> Check {
        let mut rows = Vec::new();
        let mut pass = true;
        for (h, expected) in [(0.0, (4, 4)), (0.5, (3, 3)), (-1.7, (3, 3))] {
            let t = t3(h);
            let c = t.cohomology(3)?;
            let oracle = rank_betti(&t, 3);
            pass &= (c.b_even, c.b_odd) == expected && oracle == expected;
            rows.push(json!({"h": h, "b_even": c.b_even, "b_odd": c.b_odd, "rank_oracle": [oracle.0, oracle.1], "K": 3}));
        }
        Ok((pass, json!({ "cases": rows })))
    };
    criterion(1, "twisted Betti numbers on T3", check())
}

fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> FlatMetric<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.4..0.4));
    FlatMetric::new(&a * a.transpose() + DMatrix::identity(n, n) * 0.6).expect("positive definite")
}

fn random_angles(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> FlatBundle<f64> {
    let angles = (0..rank).map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    FlatBundle::from_angles(n, angles).expect("angles in [0, 1)")
}

/// A closed degree-3 flux: a constant part plus, for `band_limited`, `e^{±2πi x_j} dx_I` with `j ∈ I`.
fn random_flux(rng: &mut ChaCha8Rng, n: usize, band_limited: bool) -> Result<FluxForm<f64>, Error> {
    if n < 3 {
        return Ok(FluxForm::zero(n));
    }
    let mut terms = Vec::new();
    for _ in 0..2 {
        let mut axes: Vec<usize> = (0..n).collect();
        while axes.len() > 3 {
            axes.remove(rng.gen_range(0..axes.len()));
        }
        let i = idx(&axes);
        terms.push((vec![0; n], i, cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
        if band_limited {
            let j = axes[rng.gen_range(0..3)];
            for sign in [1, -1] {
                let mut k = vec![0; n];
                k[j] = sign;
                terms.push((k, i, cx(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))));
            }
        }
    }
    FluxForm::new(n, terms)
}

pub fn exactness(seed: u64) -> Criterion {
    let check = || -> Check {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut worst_square, mut worst_adjoint) = (0.0f64, 0.0f64);
        let mut count = 0;
        for i in 0..54 {
            let n = 2 + i % 3;
            let rank = 1 + (i / 3) % 3;
            let metric = random_metric(&mut rng, n);
            let bundle = random_angles(&mut rng, n, rank);
            let flux = random_flux(&mut rng, n, n == 3 && rank == 1)?;
            let t = TwistedTorus::new(metric, bundle, flux)?;
            for parity in [Parity::Even, Parity::Odd] {
                worst_square = worst_square.max(t.square_defect(parity, 1));
                let mismatch = match t.adjoint(parity, 1) {
                    Ok(pair) => pair.mismatch,
                    Err(Error::AdjointMismatch(m)) => m,
                    Err(e) => return Err(e),
                };
                worst_adjoint = worst_adjoint.max(mismatch);
            }
            count += 1;
        }
        Ok((
            worst_square < 1e-12 && worst_adjoint < 1e-10 && count >= 50,
            json!({"configs": count, "max_square_defect": worst_square, "max_adjoint_mismatch": worst_adjoint}),
        ))
    };
    criterion(2, "exactness and adjoints on random configurations", check())
}

pub fn scaling() -> Criterion {
    let check = || -> Check {
        let configs = [
            torus(diag(&[1.2, 0.8, 1.0]), FlatBundle::line(&[0.2, 0.0, 0.7]), &[(&[0, 1, 2], cx(0.0, 0.9))])?,
            torus(
                diag(&[1.0, 2.0, 0.5, 1.5]),
                FlatBundle::trivial(4, 2),
                &[(&[0, 1, 2], cx(0.6, 0.0)), (&[1, 2, 3], cx(0.0, -0.4))],
            )?,
        ];
        let lambdas = [cx(1.0, 0.0), cx(0.0, 1.0), cx(-1.0, 0.0), Complex64::from_polar(1.0, PI / 3.0)];
        let mut worst = 0.0f64;
        for t in &configs {
            for &l in &lambdas {
                worst = worst.max(t.scaling_conjugation_defect(l, 1)?);
            }
        }
        Ok((worst < 1e-12, json!({"max_defect": worst, "configs": configs.len(), "lambdas": lambdas.len()})))
    };
    criterion(3, "scaling conjugation", check())
}

pub fn gauge(seed: u64) -> Criterion {
    let check = || -> Check {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
        let t = t3(0.8);
        let scalar = Ambient::scalar(FlatMetric::euclidean(3), 1);
        let modes = t.modes(1);
        let tests: Vec<Form<f64>> = (0..3)
            .map(|_| {
                let terms: Vec<_> = modes
                    .iter()
                    .take(9)
                    .flat_map(|m| MultiIndex::all(3).into_iter().map(move |i| (m.clone(), i)))
                    .map(|(m, i)| (m, i, cx(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))))
                    .collect();
                Form::from_terms(t.ambient(1), terms)
            })
            .collect::<Result<_, _>>()?;
        let mut worst = 0.0f64;
        let trials = 10;
        for _ in 0..trials {
            let mut terms = Vec::new();
            for m in scalar_modes() {
                terms.push((m.clone(), MultiIndex::empty(), cx(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))));
                let a = rng.gen_range(0..3);
                let b = (a + 1 + rng.gen_range(0..2)) % 3;
                let (lo, hi) = (a.min(b), a.max(b));
                terms.push((m, idx(&[lo, hi]), cx(rng.gen_range(-0.3..0.3), 0.0)));
            }
            let b = Form::from_terms(scalar.clone(), terms)?;
            let g = t.gauge_transform(&b)?;
            worst = worst.max(t.intertwining_defect(&g, &tests)?);
        }
        Ok((worst < 1e-10, json!({"random_b": trials, "test_forms": tests.len(), "max_defect": worst})))
    };
    criterion(4, "gauge intertwining", check())
}

fn scalar_modes() -> Vec<Mode> {
    vec![Mode::zero(3), Mode::new(vec![1, 0, 0], 0), Mode::new(vec![0, -1, 0], 0), Mode::new(vec![0, 1, 1], 0)]
}

pub fn anticommutation() -> Criterion {
    let check = || -> Check {
        let metric = diag(&[1.1, 0.9, 1.3, 0.8]);
        let base = [(&[0usize, 1, 2][..], cx(0.6, 0.0)), (&[0, 2, 3][..], cx(-0.4, 0.0))];
        let t = torus(metric.clone(), FlatBundle::trivial(4, 1), &base)?;
        let admissible = anticommutation_defect(&t, 1)?;
        let mut ratios = Vec::new();
        let mut pass = admissible.admissible && admissible.defect < 1e-10;
        for j in 0..10 {
            let phase = Complex64::from_polar(1.0, PI * (j as f64 + 1.0) / 11.0);
            let terms: Vec<_> = base.iter().map(|(a, c)| (*a, c * phase)).collect();
            let tj = torus(metric.clone(), FlatBundle::line(&[0.25, 0.0, 0.0, 0.5]), &terms)?;
            let d = anticommutation_defect(&tj, 1)?;
            let norm = tj.flux().norm(&metric);
            pass &= !d.admissible && d.defect > 0.05 * norm;
            ratios.push(d.defect / norm);
        }
        Ok((pass, json!({"admissible_defect": admissible.defect, "inadmissible_defect_over_norm": ratios})))
    };
    criterion(5, "anticommutation iff admissible", check())
}

pub fn signatures() -> Criterion {
    let check = || -> Check {
        let mut rows = Vec::new();
        let mut pass = true;
        let untwisted = torus(diag(&[1.0, 1.2, 0.9, 1.1]), FlatBundle::trivial(4, 1), &[])?;
        let sign_x = harmonic_splitting(&untwisted, 1)?.signature;
        for rank in 1..=3 {
            let angles: Vec<Vec<f64>> = (0..rank).map(|a| vec![0.0, 0.5 * (a % 2) as f64, 0.0, 0.0]).collect();
            let t4 = torus(
                diag(&[1.0, 1.2, 0.9, 1.1]),
                FlatBundle::from_angles(4, angles)?,
                &[(&[0, 1, 2], cx(0.0, 0.7)), (&[1, 2, 3], cx(0.0, -0.2))],
            )?;
            let t2 = torus(diag(&[1.3, 0.7]), FlatBundle::from_angles(2, (0..rank).map(|a| vec![0.3 * a as f64, 0.0]).collect())?, &[])?;
            for (name, t) in [("T4", &t4), ("T2", &t2)] {
                let form = hermitian_form(t, cx(1.0, 0.0), 1)?;
                let split = harmonic_splitting(t, 1)?;
                let index = index_split_check(t, 1)?;
                let mut ok = form.signature == split.signature && index.even_identity && index.odd_identity;
                if name == "T4" {
                    ok &= split.signature == rank as i64 * sign_x && split.signature == 0;
                }
                pass &= ok;
                rows.push(json!({
                    "torus": name, "rank": rank, "hermitian_form": form.signature, "harmonic_splitting": split.signature,
                    "index_even": index.index_even, "index_odd": index.index_odd, "ok": ok,
                }));
            }
        }
        Ok((pass, json!({"sign_x": sign_x, "cases": rows})))
    };
    criterion(6, "signature identities", check())
}

pub fn kunneth_poincare() -> Criterion {
    let check = || -> Check {
        let t1 = TwistedTorus::untwisted(FlatMetric::euclidean(1));
        let t2 = TwistedTorus::untwisted(diag(&[1.0, 1.4]));
        let t4 = torus(FlatMetric::euclidean(4), FlatBundle::trivial(4, 1), &[(&[0, 1, 2], cx(0.0, 0.9))])?;
        let mut pass = true;
        let mut products = Vec::new();
        for (a, b) in [(&t2, &t1), (&t3(0.6), &t1), (&t1, &t4)] {
            let r = a.kunneth_check(b, 1)?;
            pass &= r.betti_match && r.consistent;
            products.push(json!({"product": [r.product_even, r.product_odd], "predicted": [r.predicted_even, r.predicted_odd]}));
        }
        let mut pairings = Vec::new();
        for t in [t3(0.0), t3(1.3), t4.clone(), t2.with_bundle(FlatBundle::line(&[0.5, 0.0]))?] {
            let p = t.poincare_pairing(1)?;
            let ok = p.matrix.is_empty() || (p.nondegenerate && p.smallest_singular_value > 1e-8);
            pass &= ok;
            pairings.push(json!({"dims": [p.left, p.right], "sigma_min": p.smallest_singular_value, "ok": ok}));
        }
        Ok((pass, json!({"kunneth": products, "poincare": pairings})))
    };
    criterion(7, "Kunneth and Poincare duality", check())
}

pub fn eta_without_flux() -> Criterion {
    let check = || -> Check {
        let skew = FlatMetric::new(DMatrix::from_row_slice(3, 3, &[1.2, 0.1, 0.0, 0.1, 0.9, -0.1, 0.0, -0.1, 1.0]))?;
        let mut rows = Vec::new();
        let mut pass = true;
        for (name, metric, k) in [("T3", FlatMetric::euclidean(3), 3), ("T3 skew", skew, 3), ("T5", FlatMetric::euclidean(5), 2)] {
            let n = metric.dim();
            let t = TwistedTorus::new(metric, FlatBundle::trivial(n, 1), FluxForm::zero(n))?;
            let est = eta_invariant(&OddSignatureOperator::new(&t)?, k, EtaMethod::ModeSymmetry)?;
            let ok = est.method == EtaMethod::ModeSymmetry && est.value.abs() <= est.error && est.error < 1e-6;
            pass &= ok;
            rows.push(json!({"torus": name, "eta": est.value, "error": est.error, "ok": ok}));
        }
        Ok((pass, json!({ "cases": rows })))
    };
    criterion(8, "eta vanishes without flux", check())
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Per-`h` rows `(h, η(D_h), error, sf)` on the unit cube, `K = 6`, 64 steps.
pub fn flow_eta_data() -> Result<Vec<(f64, f64, f64, i64)>, Error> {
    let k = 6;
    [0.2, 0.4, 0.6, 0.8]
        .iter()
        .map(|&h| {
            let t = t3(h);
            let eta = eta_invariant(&OddSignatureOperator::new(&t)?, k, EtaMethod::ModeSymmetry)?;
            let sf = spectral_flow(&t, k, 64)?;
            Ok((h, eta.value, eta.error, sf.flow))
        })
        .collect()
}

pub fn flow_eta_slope() -> Criterion {
    let check = || -> Check {
        let eta0 = eta_invariant(&OddSignatureOperator::new(&t3(0.0))?, 6, EtaMethod::ModeSymmetry)?;
        let data = flow_eta_data()?;
        let hs: Vec<f64> = data.iter().map(|r| r.0).collect();
        let ys: Vec<f64> = data.iter().map(|r| r.1 - eta0.value - 2.0 * r.3 as f64).collect();
        let s = slope(&hs, &ys);
        let expected = 1.0 / (2.0 * PI * PI);
        let deviation = (s.abs() - expected).abs() / expected;
        Ok((
            deviation < 0.05,
            json!({
                "h": hs, "eta": data.iter().map(|r| r.1).collect::<Vec<_>>(), "eta_error": data.iter().map(|r| r.2).collect::<Vec<_>>(),
                "spectral_flow": data.iter().map(|r| r.3).collect::<Vec<_>>(), "eta_zero": eta0.value,
                "difference": ys, "slope": s, "expected_magnitude": expected, "relative_deviation": deviation,
                "slope_sign": s.signum(),
            }),
        ))
    };
    criterion(9, "spectral flow and eta variation", check())
}

pub fn rho_metric_independence() -> Criterion {
    let check = || -> Check {
        let bundle = FlatBundle::line(&[1.0 / 3.0, 0.0, 0.0]);
        let h = [(&[0usize, 1, 2][..], cx(0.5, 0.0))];
        let r0 = rho_invariant(&torus(FlatMetric::euclidean(3), bundle.clone(), &h)?, 3, EtaMethod::ZetaResidue)?;
        let r1 = rho_invariant(&torus(diag(&[1.44, 1.0, 0.81]), bundle, &h)?, 3, EtaMethod::ZetaResidue)?;
        let combined = (r0.error.powi(2) + r1.error.powi(2)).sqrt();
        let diff = (r0.value - r1.value).abs();
        Ok((diff < combined, json!({"rho_g0": r0.value, "rho_g1": r1.value, "difference": diff, "combined_error": combined})))
    };
    criterion(10, "rho metric independence", check())
}

pub fn aps_cylinder() -> Criterion {
    let check = || -> Check {
        let bases = [
            ("H = 0", t3(0.0)),
            ("H = 0.7 dx012", t3(0.7)),
            ("H = 0.7 dx012, theta = (1/3, 0, 0)", t3(0.7).with_bundle(FlatBundle::line(&[1.0 / 3.0, 0.0, 0.0]))?),
        ];
        let mut rows = Vec::new();
        let mut pass = true;
        for (name, base) in bases {
            let ident = boundary_identification_check(&base, 1)?;
            let mut indices = Vec::new();
            let mut ok = ident.defect < 1e-10;
            for length in [1.0, 2.0] {
                let r = aps_cylinder_index(&CylinderProblem::new(base.clone(), length, 2)?)?;
                ok &= r.identity_holds
                    && r.index + r.dim_ker_boundary as i64 == 0
                    && r.index == r.h_plus as i64 - r.h_minus as i64 - r.h_infinity as i64;
                indices.push(r.index);
            }
            ok &= indices[0] == indices[1];
            pass &= ok;
            rows.push(json!({"base": name, "index": indices, "identification_defect": ident.defect, "ok": ok}));
        }
        Ok((pass, json!({ "cases": rows })))
    };
    criterion(11, "APS cylinder identities", check())
}

/// `0.05 · 20^{j/11}`, twelve points spanning `[0.05, 1]`.
pub fn heat_grid() -> Vec<f64> {
    (0..12).map(|j| 0.05 * 20f64.powf(j as f64 / 11.0)).collect()
}

fn eigen_trace(t: &TwistedTorus<f64>, grid: &[f64]) -> Result<Vec<f64>, Error> {
    match heat_trace_eigen(t, Parity::All, grid, 4) {
        Err(Error::TailTooLarge { required_radius, .. }) => Ok(heat_trace_eigen(t, Parity::All, grid, required_radius)?.values),
        other => Ok(other?.values),
    }
}

pub fn heat() -> Criterion {
    let check = || -> Check {
        let grid = heat_grid();
        let tori = [
            TwistedTorus::untwisted(FlatMetric::euclidean(1)),
            TwistedTorus::untwisted(FlatMetric::euclidean(1)).with_bundle(FlatBundle::line(&[0.5]))?,
            TwistedTorus::untwisted(diag(&[1.3, 0.7])),
            TwistedTorus::untwisted(diag(&[1.3, 0.7])).with_bundle(FlatBundle::line(&[0.25, 0.5]))?,
            TwistedTorus::untwisted(diag(&[1.44, 1.0, 0.81])),
            TwistedTorus::untwisted(diag(&[1.44, 1.0, 0.81])).with_bundle(FlatBundle::line(&[1.0 / 3.0, 0.0, 0.0]))?,
        ];
        let mut worst_rel = 0.0f64;
        for t in &tori {
            let e = eigen_trace(t, &grid)?;
            let i = heat_trace_images(t, Parity::All, &grid)?.values;
            for (a, b) in e.iter().zip(&i) {
                worst_rel = worst_rel.max((a - b).abs() / b.abs());
            }
        }
        let ms = [
            mckean_singer_check(&t3(0.7), &grid, 3)?,
            mckean_singer_check(&TwistedTorus::untwisted(FlatMetric::euclidean(1)).with_bundle(FlatBundle::line(&[1.0 / 3.0]))?, &grid, 6)?,
        ];
        let worst_var = ms.iter().map(|m| m.variance).fold(0.0, f64::max);
        let decay_grid: Vec<f64> = (0..9).map(|j| 0.01 * 2f64.powf(j as f64 / 4.0)).collect();
        let decay = [&tori[0], &tori[4]].iter().map(|t| image_remainder_decay(t, &decay_grid)).collect::<Result<Vec<_>, _>>()?;

        let fit_grid = twisted_flux::heat::default_t_grid();
        let mut alpha = Vec::new();
        let mut fits_ok = true;
        for (n, metric) in [(2, diag(&[1.3, 0.7])), (4, diag(&[1.0, 1.2, 0.9, 1.1]))] {
            let mut by_rank = Vec::new();
            for rank in 1..=3 {
                let t = TwistedTorus::untwisted(metric.clone()).with_bundle(FlatBundle::trivial(n, rank))?;
                let st = supertrace(&t, Grading::Signature, &fit_grid, 1)?;
                let fit = alpha0_extract(&fit_grid, &st, n)?;
                fits_ok &= fit.alpha0.abs() < 1e-6 && fit.residual < 1e-6;
                by_rank.push(fit.alpha0);
            }
            fits_ok &= by_rank.iter().enumerate().all(|(r, a)| (a - (r + 1) as f64 * by_rank[0]).abs() < 1e-6);
            alpha.push(json!({"dim": n, "alpha0_by_rank": by_rank}));
        }
        let mut synthetic = Vec::new();
        for rank in 1..=3 {
            let values: Vec<f64> = fit_grid.iter().map(|t| rank as f64 * (t.powf(-0.5) + 7.0)).collect();
            let a = alpha0_extract(&fit_grid, &values, 3)?.alpha0;
            fits_ok &= (a - 7.0 * rank as f64).abs() < 1e-8;
            synthetic.push(a);
        }
        let pass = worst_rel < 1e-12 && worst_var < 1e-8 && fits_ok && decay.iter().all(|d| d.holds);
        Ok((
            pass,
            json!({
                "max_relative_difference": worst_rel, "max_supertrace_variance": worst_var,
                "euler_characteristics": ms.iter().map(|m| m.euler_characteristic).collect::<Vec<_>>(),
                "gaussian_decay": decay.iter().map(|d| json!({"c_fit": d.c_fit, "c_bound": d.c_bound})).collect::<Vec<_>>(),
                "alpha0": alpha, "synthetic_alpha0_by_rank": synthetic,
            }),
        ))
    };
    criterion(12, "heat traces", check())
}
