use std::f64::consts::PI;

use proptest::prelude::*;
use qlattice::asymptotics::{classify, pq_m4, BandLaw};
use qlattice::coupling::StCoupling;
use qlattice::fiber::{m1_inequality, TrigForm};
use qlattice::linalg::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn complex() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| C64::new(re, im))
}

proptest! {
    #[test]
    fn m1_range_bound(t1 in complex(), t2 in complex(), t3 in complex()) {
        let q = m1_inequality(t1, t2, t3);
        prop_assert!(q.lhs <= q.rhs * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn trig_range_brackets_values(
        c0 in -3.0..3.0f64,
        a in prop::array::uniform4(complex()),
        t1 in -PI..PI,
        t2 in -PI..PI,
    ) {
        let f = TrigForm::new(c0, a);
        let r = f.range(32);
        let v = f.eval(t1, t2);
        prop_assert!(r.min <= v + 1e-9 && v <= r.max + 1e-9);
        prop_assert!(r.max - r.min <= 2.0 * f.amplitude() + 1e-9);
    }

    #[test]
    fn every_coupling_is_classified(m in 0usize..=4, seed in any::<u64>(), a in 0.3..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = if m == 0 { StCoupling::dirichlet(a).unwrap() } else { StCoupling::random(m, a, &mut rng).unwrap() };
        let report = classify(&c);
        prop_assert!(!report.regimes.is_empty());
        for g in &report.regimes {
            prop_assert!(g.band_law == BandLaw::Unclassified || g.band_law.exponent().is_some() || matches!(g.band_law, BandLaw::Flat | BandLaw::CollapsedPoint | BandLaw::FullLine | BandLaw::Absent));
        }
    }

    #[test]
    fn m4_roots_are_real(seed in any::<u64>(), t1 in -PI..PI, t2 in -PI..PI) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = StCoupling::random(4, 1.0, &mut rng).unwrap();
        let (p, q) = pq_m4(&c, t1, t2, 1.0).unwrap();
        prop_assert!(p * p - q >= -1e-10 * (1.0 + p * p));
    }
}
