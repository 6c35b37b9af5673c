//! Property tests for invariants that hold for every configuration.

use proptest::prelude::*;

use twisted_flux::exterior::FlatMetric;
use twisted_flux::signature::{harmonic_splitting, hermitian_form};
use twisted_flux::{Bundle, Complex64, Flux, MultiIndex, Torus};

fn t3_torus(g: [f64; 3], theta: Vec<f64>, h: f64) -> Torus {
    let flux = Flux::constant(3, &[(MultiIndex::top(3), Complex64::new(h, 0.0))]).unwrap();
    Torus::new(FlatMetric::diagonal(&g).unwrap(), Bundle::line(&theta), flux).unwrap()
}

fn betti(t: &Torus) -> (usize, usize) {
    let c = t.cohomology(1).unwrap();
    (c.b_even, c.b_odd)
}

/// Angles that are either trivial or well away from 0 mod 1.
fn angle() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 0.1f64..0.9]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn betti_numbers_add_over_direct_sums(
        a in prop::collection::vec(angle(), 3),
        b in prop::collection::vec(angle(), 3),
        h in prop_oneof![Just(0.0), 0.3f64..2.0],
    ) {
        let g = [1.0, 1.2, 0.9];
        let ta = t3_torus(g, a.clone(), h);
        let tb = t3_torus(g, b.clone(), h);
        let sum = ta.with_bundle(Bundle::line(&a).direct_sum(&Bundle::line(&b)).unwrap()).unwrap();
        let (x, y, z) = (betti(&ta), betti(&tb), betti(&sum));
        prop_assert_eq!(z, (x.0 + y.0, x.1 + y.1));
    }

    #[test]
    fn euler_characteristic_vanishes_on_odd_tori(theta in prop::collection::vec(angle(), 3), h in -2.0f64..2.0) {
        let (e, o) = betti(&t3_torus([1.0, 0.8, 1.1], theta, h));
        prop_assert_eq!(e, o);
    }

    /// The signature does not move with the metric, and both ways of computing it agree.
    #[test]
    fn signature_is_metric_independent(g in prop::collection::vec(0.5f64..2.0, 4), h in 0.2f64..1.5) {
        let flux = Flux::constant(4, &[(MultiIndex::new(&[0, 1, 2]).unwrap(), Complex64::new(0.0, h))]).unwrap();
        let base = Torus::new(FlatMetric::euclidean(4), Bundle::trivial(4, 1), flux.clone()).unwrap();
        let moved = Torus::new(FlatMetric::diagonal(&g).unwrap(), Bundle::trivial(4, 1), flux).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let s0 = hermitian_form(&base, one, 1).unwrap();
        let s1 = hermitian_form(&moved, one, 1).unwrap();
        let split = harmonic_splitting(&moved, 1).unwrap();
        prop_assert_eq!(s0.signature, s1.signature);
        prop_assert_eq!(s1.signature, split.signature);
        prop_assert_eq!(s1.signature, 0);
    }
}
