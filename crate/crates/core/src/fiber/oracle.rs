//! Cross-check of the closed-form coefficients against the determinant.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{assemble_polynomial, spectral_det, DispersionCoefficients, FiberError, FiberPoint};
use crate::coupling::{st_to_ab, StCoupling};
use crate::roots::bisect;

/// Largest tolerated relative spread of `det / polynomial` at fixed `k`.
pub const RATIO_TOL: f64 = 1e-8;
/// Largest tolerated distance between matching roots in `k`.
pub const ZERO_SET_TOL: f64 = 1e-9;
/// Points with `|polynomial|` below this fraction of `Σ|V_j k^j|` are excluded
/// from the ratio test.
pub const RATIO_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Quasimomentum samples per fixed `k`.
    pub samples: usize,
    /// Number of fixed momenta used for the ratio test.
    pub momenta: usize,
    /// Number of `(θ, k-window)` pairs used for the zero-set test.
    pub windows: usize,
    /// Points for the sign test when `m = 4`.
    pub sign_points: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            samples: 64,
            momenta: 4,
            windows: 4,
            sign_points: 1000,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub m: usize,
    pub ratio_points: usize,
    pub max_ratio_spread: f64,
    pub zero_pairs: usize,
    pub max_zero_offset: f64,
    pub zero_count_mismatches: usize,
    pub sign_points: usize,
    pub sign_skipped: usize,
    pub sign_disagreements: usize,
    pub passed: bool,
}

struct Failure {
    k: f64,
    theta1: f64,
    theta2: f64,
    detail: String,
}

/// Verifies the closed-form polynomial against `det(AM + ikBN)`.
///
/// For `m ≤ 3` the ratio of the two must be independent of `θ` at fixed `k`
/// and their real roots must coincide. For `m = 4`, where `V₁` is missing, the
/// signs must agree at `k > 50/a` wherever the polynomial dominates a bound
/// on the omitted term.
pub fn oracle_match(c: &StCoupling, cfg: &OracleConfig) -> Result<OracleReport, FiberError> {
    let dc = DispersionCoefficients::with_variants(c, Default::default())?;
    oracle_match_with(&dc, cfg)
}

pub fn oracle_match_with(dc: &DispersionCoefficients, cfg: &OracleConfig) -> Result<OracleReport, FiberError> {
    let c = dc.coupling();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = OracleReport {
        m: c.rank(),
        ..Default::default()
    };
    let failure = if c.rank() == 4 {
        sign_test(dc, cfg, &mut rng, &mut report)
    } else {
        ratio_test(dc, cfg, &mut rng, &mut report).or_else(|| zero_set_test(dc, cfg, &mut rng, &mut report))
    };
    report.passed = failure.is_none();
    match failure {
        None => Ok(report),
        Some(f) => Err(FiberError::OracleMismatch {
            k: f.k,
            theta1: f.theta1,
            theta2: f.theta2,
            detail: f.detail,
            report: Box::new(report),
        }),
    }
}

fn poly_scale(dc: &DispersionCoefficients, p: &FiberPoint) -> f64 {
    let k = p.k.re;
    let v = dc.eval(dc.coupling().edge_length() * k, p.theta1, p.theta2);
    (0..5).filter_map(|j| v.get(j).map(|x| x.abs() * k.abs().powi(j as i32))).sum()
}

fn ratio_test(
    dc: &DispersionCoefficients,
    cfg: &OracleConfig,
    rng: &mut ChaCha8Rng,
    report: &mut OracleReport,
) -> Option<Failure> {
    let c = dc.coupling();
    let a = c.edge_length();
    let ab = st_to_ab(c);
    for _ in 0..cfg.momenta {
        let k = rng.gen_range(0.5..30.0) / a;
        let mut ratios: Vec<(f64, f64, f64)> = Vec::new();
        for _ in 0..cfg.samples {
            let p = FiberPoint::real(k, rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            let poly = assemble_polynomial(dc, &p);
            if poly.abs() <= RATIO_FLOOR * poly_scale(dc, &p) {
                continue;
            }
            let det = spectral_det(&ab, &p, a).re;
            ratios.push((det / poly, p.theta1, p.theta2));
        }
        report.ratio_points += ratios.len();
        if let Some(&(r0, _, _)) = ratios.first() {
            for &(r, t1, t2) in &ratios {
                let spread = (r - r0).abs() / r0.abs().max(f64::MIN_POSITIVE);
                report.max_ratio_spread = report.max_ratio_spread.max(spread);
                if !(spread < RATIO_TOL) {
                    return Some(Failure {
                        k,
                        theta1: t1,
                        theta2: t2,
                        detail: format!("ratio {r} differs from {r0}"),
                    });
                }
            }
        }
    }
    None
}

fn roots_in<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let h = (hi - lo) / steps as f64;
    let mut out = Vec::new();
    let mut x0 = lo;
    let mut f0 = f(x0);
    for i in 1..=steps {
        let x1 = lo + h * i as f64;
        let f1 = f(x1);
        if f0 == 0.0 {
            out.push(x0);
        } else if f0 * f1 < 0.0 {
            out.push(bisect(&f, x0, x1, f0, 1e-13 * x1.max(1.0)));
        }
        x0 = x1;
        f0 = f1;
    }
    out
}

fn zero_set_test(
    dc: &DispersionCoefficients,
    cfg: &OracleConfig,
    rng: &mut ChaCha8Rng,
    report: &mut OracleReport,
) -> Option<Failure> {
    let c = dc.coupling();
    let a = c.edge_length();
    let ab = st_to_ab(c);
    for _ in 0..cfg.windows {
        let (t1, t2) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        // windows avoid the lattice points nπ/a where roots may be double
        let lo = (rng.gen_range(1..20) as f64 + 0.05) * PI / a;
        let hi = lo + 0.9 * PI / a;
        let det_roots = roots_in(|k| spectral_det(&ab, &FiberPoint::real(k, t1, t2), a).re, lo, hi, 512);
        let poly_roots = roots_in(|k| assemble_polynomial(dc, &FiberPoint::real(k, t1, t2)), lo, hi, 512);
        if det_roots.len() != poly_roots.len() {
            report.zero_count_mismatches += 1;
            return Some(Failure {
                k: lo,
                theta1: t1,
                theta2: t2,
                detail: format!(
                    "{} determinant roots vs {} polynomial roots in [{lo}, {hi}]",
                    det_roots.len(),
                    poly_roots.len()
                ),
            });
        }
        for (x, y) in det_roots.iter().zip(&poly_roots) {
            report.zero_pairs += 1;
            let off = (x - y).abs();
            report.max_zero_offset = report.max_zero_offset.max(off);
            if !(off < ZERO_SET_TOL) {
                return Some(Failure {
                    k: *x,
                    theta1: t1,
                    theta2: t2,
                    detail: format!("root {x} of the determinant vs {y} of the polynomial"),
                });
            }
        }
    }
    None
}

/// Bound on `|V₁|` for `m = 4`, used to skip points where the omitted term
/// could flip the sign.
pub(crate) fn m4_v1_bound(c: &StCoupling) -> f64 {
    32.0 * (1.0 + c.s_frobenius()).powi(3)
}

fn sign_test(
    dc: &DispersionCoefficients,
    cfg: &OracleConfig,
    rng: &mut ChaCha8Rng,
    report: &mut OracleReport,
) -> Option<Failure> {
    let c = dc.coupling();
    let a = c.edge_length();
    let ab = st_to_ab(c);
    let bound = m4_v1_bound(c);
    for _ in 0..cfg.sign_points {
        let k = rng.gen_range(50.0..200.0) / a;
        let p = FiberPoint::real(k, rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let poly = assemble_polynomial(dc, &p);
        report.sign_points += 1;
        if poly.abs() <= bound * k {
            report.sign_skipped += 1;
            continue;
        }
        let det = spectral_det(&ab, &p, a).re;
        if det.signum() != poly.signum() {
            report.sign_disagreements += 1;
            return Some(Failure {
                k,
                theta1: p.theta1,
                theta2: p.theta2,
                detail: format!("determinant {det} and truncated polynomial {poly} differ in sign"),
            });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{preset, CouplingClass};
    use crate::fiber::{CoeffVariants, M2V1Theta2, M3Theta1};

    #[test]
    fn delta_ratio_is_one() {
        let c = preset(&CouplingClass::Delta(2.0), 1.0).unwrap();
        let r = oracle_match(&c, &OracleConfig::default()).unwrap();
        assert!(r.passed && r.ratio_points > 0 && r.zero_pairs > 0);
        assert!(r.max_ratio_spread < 1e-10);
    }

    #[test]
    fn dirichlet_is_skipped() {
        let c = StCoupling::dirichlet(1.0).unwrap();
        assert_eq!(oracle_match(&c, &OracleConfig::default()).unwrap_err(), FiberError::NoPolynomialForm);
    }

    #[test]
    fn random_couplings_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for m in 1..=4 {
            for _ in 0..5 {
                let c = StCoupling::random(m, rng.gen_range(0.5..2.0), &mut rng).unwrap();
                let cfg = OracleConfig {
                    sign_points: 200,
                    ..Default::default()
                };
                let r = oracle_match(&c, &cfg).unwrap_or_else(|e| panic!("m={m}: {e}"));
                assert!(r.passed);
                if m == 4 {
                    assert!(r.sign_points - r.sign_skipped > 100);
                }
            }
        }
    }

    #[test]
    fn oracle_rejects_the_wrong_variants() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let c3 = StCoupling::random(3, 1.0, &mut rng).unwrap();
        let dc = DispersionCoefficients::with_variants(
            &c3,
            CoeffVariants {
                m3_theta1: M3Theta1::S23,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(
            oracle_match_with(&dc, &OracleConfig::default()),
            Err(FiberError::OracleMismatch { .. })
        ));
        let c2 = StCoupling::random(2, 1.0, &mut rng).unwrap();
        let dc = DispersionCoefficients::with_variants(
            &c2,
            CoeffVariants {
                m2_v1_theta2: M2V1Theta2::AsPrinted,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(oracle_match_with(&dc, &OracleConfig::default()).is_err());
    }
}
