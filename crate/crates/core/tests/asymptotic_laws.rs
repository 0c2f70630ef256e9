use std::f64::consts::PI;

use qlattice::asymptotics::{classify, compare_with, d_intervals_m4, BandLaw, Quantity};
use qlattice::coupling::{preset, CouplingClass, StCoupling};
use qlattice::linalg::C64;
use qlattice::spectrum::{scan_bands, BandKind, ScanConfig, SpectrumReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn scan(c: &StCoupling, n_max: f64) -> SpectrumReport {
    let a = c.edge_length();
    let cfg = ScanConfig {
        include_negative: false,
        ..ScanConfig::for_range(0.05, (n_max + 1.0) * PI / a, a)
    };
    scan_bands(c, &cfg).unwrap()
}

fn band_ratios(c: &StCoupling, n: usize) -> Vec<(usize, f64)> {
    let r = scan(c, n as f64);
    compare_with(&r, &classify(c), n..=n)
        .rows
        .iter()
        .filter(|row| row.quantity == Quantity::Band && row.predicted > 0.0 && row.predicted.is_finite())
        .filter_map(|row| row.ratio.map(|q| (row.regime, q)))
        .collect()
}

#[test]
fn m2_single_t_width() {
    let c = StCoupling::new(
        2,
        vec![real(0.3), C64::new(0.5, 0.2), real(-0.2)],
        vec![real(0.8), real(0.0), real(0.0), real(0.0)],
        1.3,
    )
    .unwrap();
    let ratios = band_ratios(&c, 25);
    assert!(!ratios.is_empty());
    for (regime, q) in ratios {
        assert!((q - 1.0).abs() < 0.02, "regime {regime}: ratio {q}");
    }
}

#[test]
fn m3_odd_band_centre_sits_above_anchor() {
    let c = StCoupling::new(
        3,
        [0.2, 0.0, 0.0, 0.6, 0.0, 0.9].map(real).to_vec(),
        vec![real(0.7), real(0.0), real(0.0)],
        1.0,
    )
    .unwrap();
    let report = classify(&c);
    let r = scan(&c, 30.0);
    let n = 30;
    let anchor = ((n as f64 + 0.5) * PI).powi(2);
    let expected_shift = 2.0 * (0.6 * 0.49 + 0.9) / 1.49;
    let centre = r
        .bands
        .iter()
        .filter(|b| b.index_hint == Some(n as i64) && b.e_lo > anchor - 50.0)
        .map(|b| 0.5 * (b.e_lo + b.e_hi))
        .next()
        .expect("odd band");
    assert!((centre - anchor - expected_shift).abs() < 0.05, "shift {}", centre - anchor);
    assert!(report.regimes.iter().any(|g| g.target_energy(n, 1.0) > anchor));
}

#[test]
fn m4_bands_follow_root_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = StCoupling::random(4, 1.0, &mut rng).unwrap();
    let d = d_intervals_m4(&c, 64).unwrap();
    let r = scan(&c, 30.0);
    let base = (30.0 * PI).powi(2);
    let e = |d: f64| base + 2.0 * d;
    let (lo, hi) = if d.d1.lo <= d.d2.hi && d.d2.lo <= d.d1.hi {
        (e(d.d1.lo.min(d.d2.lo)), e(d.d1.hi.max(d.d2.hi)))
    } else {
        (e(d.d1.lo), e(d.d1.hi))
    };
    let b = r.bands.iter().find(|b| b.e_lo <= 0.5 * (lo + hi) && 0.5 * (lo + hi) <= b.e_hi).expect("band over root set");
    assert!((b.e_lo - lo).abs() < 0.1 && (b.e_hi - hi).abs() < 0.1, "{b:?} vs [{lo}, {hi}]");
}

#[test]
fn delta_prime_sets_touch_in_the_spectrum() {
    let beta = 1.0;
    let c = preset(&CouplingClass::DeltaPrime(beta), 1.0).unwrap();
    let r = scan(&c, 20.0);
    let base = (20.0 * PI).powi(2);
    let b = r
        .bands
        .iter()
        .filter(|b| b.kind != BandKind::Flat)
        .find(|b| b.e_lo - base > -1.0 && b.e_lo - base < 1.0)
        .expect("band at the even anchor");
    assert!(b.e_lo - base < 1e-6);
    assert!((b.e_hi - base - 16.0 / beta).abs() < 0.1, "{b:?}");
    assert!(classify(&c).warnings.iter().any(|w| w.contains("touch")));
}

#[test]
fn inverse_cubic_constant_scales_with_edge_length() {
    let c = StCoupling::new(3, [0.4, 0.5, 0.7, 1.0, 0.0, 0.0].map(real).to_vec(), vec![real(0.0); 3], 1.5).unwrap();
    let report = classify(&c);
    let idx = report.regimes.iter().position(|g| g.band_law == BandLaw::InverseCubic).expect("n^-3 regime");
    let q = band_ratios(&c, 40).into_iter().find(|&(i, _)| i == idx).expect("row").1;
    assert!(q > 0.93 && q < 1.05, "ratio {q}");
}
