//! Twisted Betti numbers against a brute-force rank computation.
//!
//! For constant flux the complex splits over Fourier modes. On mode `k` the differential is the
//! constant-coefficient map `ω ↦ 2πi(k+θ)∧ω + H∧ω` on `Λ(ℂⁿ)`, so the cohomology is a finite sum
//! of kernel-minus-image dimensions. Forms are indexed here by bitmasks with their own wedge sign,
//! independent of the library's exterior algebra.

use nalgebra::DMatrix;
use twisted_flux::Complex64 as C;
use proptest::prelude::*;

use twisted_flux::exterior::FlatMetric;
use twisted_flux::{Bundle, Flux, MultiIndex, Torus};

/// Sign of `e_a ∧ e_b` for disjoint masks: the number of pairs `i ∈ a`, `j ∈ b` with `i > j`.
fn wedge_sign(a: u32, b: u32) -> f64 {
    let mut swaps = 0;
    for i in 0..32 {
        if a & (1 << i) != 0 {
            swaps += (b & ((1u32 << i) - 1)).count_ones();
        }
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Matrix of left multiplication by `Σ c_I e_I` on the full exterior algebra.
fn left_mult(n: usize, terms: &[(u32, C)]) -> DMatrix<C> {
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for &(mask, c) in terms {
        for col in 0..dim as u32 {
            if col & mask == 0 {
                m[((col | mask) as usize, col as usize)] += c * wedge_sign(mask, col);
            }
        }
    }
    m
}

fn rank(m: &DMatrix<C>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-9 * top.max(1.0)).count()
}

/// `(b_even, b_odd)` over the mode box `[-K, K]ⁿ`.
fn brute_betti(n: usize, theta: &[f64], flux: &[(u32, C)], k: i32) -> (usize, usize) {
    let parity = |mask: u32| mask.count_ones() % 2;
    let mut box_modes = vec![vec![]];
    for _ in 0..n {
        box_modes = box_modes.into_iter().flat_map(|m: Vec<i32>| (-k..=k).map(move |j| [m.clone(), vec![j]].concat())).collect();
    }
    let (mut even, mut odd) = (0, 0);
    for mode in box_modes {
        let mut terms: Vec<(u32, C)> = flux.to_vec();
        for a in 0..n {
            let xi = 2.0 * std::f64::consts::PI * (mode[a] as f64 + theta[a]);
            terms.push((1 << a, C::new(0.0, xi)));
        }
        let d = left_mult(n, &terms);
        // Restrict d to the even and odd summands.
        let idx = |p: u32| (0..(1u32 << n)).filter(|&m| parity(m) == p).map(|m| m as usize).collect::<Vec<_>>();
        let (ev, od) = (idx(0), idx(1));
        let block = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| d[(rows[i], cols[j])]);
        let d_even = block(&od, &ev);
        let d_odd = block(&ev, &od);
        even += ev.len() - rank(&d_even) - rank(&d_odd);
        odd += od.len() - rank(&d_odd) - rank(&d_even);
    }
    (even, odd)
}

fn mask(axes: &[usize]) -> u32 {
    axes.iter().map(|&a| 1u32 << a).sum()
}

fn library_betti(metric: FlatMetric<f64>, theta: &[f64], flux: &[(Vec<usize>, C)], k: usize) -> (usize, usize) {
    let n = metric.dim();
    let terms: Vec<(MultiIndex, C)> = flux.iter().map(|(a, c)| (MultiIndex::new(a).unwrap(), *c)).collect();
    let torus = Torus::untwisted(metric)
        .with_bundle(Bundle::line(theta))
        .unwrap()
        .with_flux(Flux::constant(n, &terms).unwrap())
        .unwrap();
    let c = torus.cohomology(k).unwrap();
    (c.b_even, c.b_odd)
}

fn compare(metric: FlatMetric<f64>, theta: &[f64], flux: &[(Vec<usize>, C)]) {
    let n = metric.dim();
    let masks: Vec<(u32, C)> = flux.iter().map(|(a, c)| (mask(a), *c)).collect();
    let oracle = brute_betti(n, theta, &masks, 2);
    assert_eq!(library_betti(metric, theta, flux, 2), oracle, "theta {theta:?}, flux {flux:?}");
}

#[test]
fn untwisted_tori_have_binomial_betti_numbers() {
    for n in 1..=4 {
        let theta = vec![0.0; n];
        let expected = 1usize << (n - 1);
        assert_eq!(brute_betti(n, &theta, &[], 1), (expected, expected));
        compare(FlatMetric::euclidean(n), &theta, &[]);
    }
}

#[test]
fn volume_flux_on_the_three_torus() {
    for h in [0.5, -1.7, 3.0] {
        compare(FlatMetric::euclidean(3), &[0.0; 3], &[(vec![0, 1, 2], C::new(h, 0.0))]);
    }
}

#[test]
fn flux_on_the_five_torus() {
    let metric = FlatMetric::diagonal(&[1.0, 1.3, 0.8, 1.1, 0.9]).unwrap();
    compare(metric.clone(), &[0.0; 5], &[(vec![0, 1, 2], C::new(0.6, 0.0))]);
    compare(
        metric,
        &[0.0; 5],
        &[(vec![0, 1, 2], C::new(0.6, 0.0)), (vec![2, 3, 4], C::new(-0.4, 0.0)), (vec![0, 1, 2, 3, 4], C::new(0.0, 0.3))],
    );
}

#[test]
fn holonomy_kills_cohomology() {
    compare(FlatMetric::euclidean(3), &[0.25, 0.0, 0.0], &[]);
    compare(FlatMetric::euclidean(3), &[0.0, 0.5, 0.0], &[(vec![0, 1, 2], C::new(1.0, 0.0))]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constant_flux_on_t3_matches_oracle(h in -3.0f64..3.0, g in 0.5f64..2.0) {
        prop_assume!(h.abs() > 1e-3);
        let metric = FlatMetric::diagonal(&[g, 1.0, 1.0 / g]).unwrap();
        let flux = [(vec![0, 1, 2], C::new(h, 0.0))];
        let masks = [(mask(&[0, 1, 2]), C::new(h, 0.0))];
        prop_assert_eq!(library_betti(metric, &[0.0; 3], &flux, 1), brute_betti(3, &[0.0; 3], &masks, 1));
    }

    /// Betti numbers do not see the metric or a rescaling of the flux.
    #[test]
    fn betti_invariant_under_metric_and_scaling(h in 0.1f64..2.0, s in 0.2f64..5.0, g in 0.5f64..2.0) {
        let flux = |c: f64| [(vec![0, 1, 2], C::new(c, 0.0))];
        let base = library_betti(FlatMetric::euclidean(3), &[0.0; 3], &flux(h), 1);
        let other = library_betti(FlatMetric::diagonal(&[g, 1.0, 1.0]).unwrap(), &[0.0; 3], &flux(s * h), 1);
        prop_assert_eq!(base, other);
    }
}
