//! Bloch–Floquet fiber problem: the matrices `M`, `N`, `D` and the spectral
//! determinant `det(AM + ikBN)`.

mod coeffs;
mod oracle;
mod trig;

pub use coeffs::{
    assemble_polynomial, dispersion_coeffs, CoeffVariants, DispersionCoefficients, M2V1Theta2, M3Theta1, VValues,
};
pub use oracle::{oracle_match, oracle_match_with, OracleConfig, OracleReport};
pub use trig::{m1_inequality, reduce_angle, reduced_range_m1, M1Inequality, TrigForm, TrigRange, SAMPLE_NODES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::AbCoupling;
use crate::linalg::{Mat4, C64, I, ZERO};

/// Realness defect above which `Re det` is no longer trusted.
pub const REALNESS_TOL: f64 = 1e-8;
/// Relative singular-value cutoff for [`nullspace_vector`].
pub const NULLSPACE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FiberError {
    #[error("m = 0 has no polynomial form; its determinant is -4 sin^2(ak)")]
    NoPolynomialForm,
    #[error("determinant is not real at k = {k}, theta = ({theta1}, {theta2}): defect {defect:e}")]
    RealnessViolation { k: C64, theta1: f64, theta2: f64, defect: f64 },
    #[error("coefficient polynomial disagrees with the determinant at k = {k}, theta = ({theta1}, {theta2}): {detail}")]
    OracleMismatch {
        k: f64,
        theta1: f64,
        theta2: f64,
        detail: String,
        report: Box<OracleReport>,
    },
}

/// Momentum `k` (real, or `iκ` for negative energy) with quasimomenta in `(−π, π]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberPoint {
    pub k: C64,
    pub theta1: f64,
    pub theta2: f64,
}

impl FiberPoint {
    pub fn new(k: C64, theta1: f64, theta2: f64) -> Self {
        FiberPoint {
            k,
            theta1: reduce_angle(theta1),
            theta2: reduce_angle(theta2),
        }
    }

    pub fn real(k: f64, theta1: f64, theta2: f64) -> Self {
        Self::new(C64::new(k, 0.0), theta1, theta2)
    }

    /// `k = iκ`, energy `−κ²`.
    pub fn imaginary(kappa: f64, theta1: f64, theta2: f64) -> Self {
        Self::new(C64::new(0.0, kappa), theta1, theta2)
    }

    pub fn energy(&self) -> f64 {
        (self.k * self.k).re
    }
}

fn half_phases(k: C64, theta: f64, a: f64) -> (C64, C64) {
    // u = e^{iθ/2}, w = e^{iak/2}
    (C64::from_polar(1.0, theta / 2.0), (I * k * a / 2.0).exp())
}

fn block(m: &mut Mat4, offset: usize, k: C64, theta: f64, a: f64, sign: C64) {
    let (u, w) = half_phases(k, theta, a);
    m[(offset, offset)] = sign * w / u;
    m[(offset, offset + 1)] = 1.0 / (u * w);
    m[(offset + 1, offset)] = u / w;
    m[(offset + 1, offset + 1)] = sign * u * w;
}

pub fn matrix_m(k: C64, theta1: f64, theta2: f64, a: f64) -> Mat4 {
    let mut m = Mat4::zeros();
    block(&mut m, 0, k, theta1, a, C64::new(1.0, 0.0));
    block(&mut m, 2, k, theta2, a, C64::new(1.0, 0.0));
    m
}

pub fn matrix_n(k: C64, theta1: f64, theta2: f64, a: f64) -> Mat4 {
    let mut m = Mat4::zeros();
    block(&mut m, 0, k, theta1, a, C64::new(-1.0, 0.0));
    block(&mut m, 2, k, theta2, a, C64::new(-1.0, 0.0));
    m
}

pub fn matrix_d(k: C64, theta1: f64, theta2: f64, a: f64) -> Mat4 {
    let e = |t: f64, s: f64| (I * (C64::new(t, 0.0) + s * a * k) / 2.0).exp();
    Mat4::diag([e(theta1, -1.0), e(theta1, 1.0), e(theta2, -1.0), e(theta2, 1.0)])
}

/// `M`, `N`, `D` at one fiber point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberMatrices {
    pub m: Mat4,
    pub n: Mat4,
    pub d: Mat4,
}

impl FiberMatrices {
    pub fn at(p: &FiberPoint, a: f64) -> Self {
        FiberMatrices {
            m: matrix_m(p.k, p.theta1, p.theta2, a),
            n: matrix_n(p.k, p.theta1, p.theta2, a),
            d: matrix_d(p.k, p.theta1, p.theta2, a),
        }
    }
}

/// `AM + ikBN`.
pub fn fiber_matrix(c: &AbCoupling, p: &FiberPoint, a: f64) -> Mat4 {
    let m = matrix_m(p.k, p.theta1, p.theta2, a);
    let n = matrix_n(p.k, p.theta1, p.theta2, a);
    c.a * m + (c.b * n).scale(I * p.k)
}

pub fn spectral_det(c: &AbCoupling, p: &FiberPoint, a: f64) -> C64 {
    fiber_matrix(c, p, a).det()
}

/// `Re det` together with the realness defect `|Im det| / (1 + |det|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub value: f64,
    pub defect: f64,
}

impl Dispersion {
    pub fn is_real(&self) -> bool {
        self.defect <= REALNESS_TOL
    }
}

pub fn dispersion_real(c: &AbCoupling, p: &FiberPoint, a: f64) -> Dispersion {
    let d = spectral_det(c, p, a);
    Dispersion {
        value: d.re,
        defect: d.im.abs() / (1.0 + d.norm()),
    }
}

/// Like [`dispersion_real`], failing when the imaginary part is not negligible.
pub fn dispersion_real_checked(c: &AbCoupling, p: &FiberPoint, a: f64) -> Result<f64, FiberError> {
    let d = dispersion_real(c, p, a);
    if d.is_real() {
        Ok(d.value)
    } else {
        Err(FiberError::RealnessViolation {
            k: p.k,
            theta1: p.theta1,
            theta2: p.theta2,
            defect: d.defect,
        })
    }
}

/// Coefficients `(C₁⁺, C₁⁻, D₁⁺, D₁⁻)` of a fiber solution, if one exists.
pub fn nullspace_vector(c: &AbCoupling, p: &FiberPoint, a: f64) -> Option<[C64; 4]> {
    let full = fiber_matrix(c, p, a) * matrix_d(p.k, p.theta1, p.theta2, a);
    let (smin, smax, v) = full.smallest_singular_pair();
    if smax > 0.0 && smin < NULLSPACE_TOL * smax {
        Some(v)
    } else if smax == 0.0 {
        Some([C64::new(1.0, 0.0), ZERO, ZERO, ZERO])
    } else {
        None
    }
}

/// Everything the band scanner needs at one momentum: the dispersion as an
/// exact trig form in the quasimomenta, plus a floating-point noise floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberSlice {
    pub k: C64,
    /// `Re det` as a function of `(θ₁, θ₂)`.
    pub real: TrigForm,
    /// `Im det` as a function of `(θ₁, θ₂)`.
    pub imag: TrigForm,
    /// Rounding floor for determinant values at this `k`.
    pub noise: f64,
}

impl FiberSlice {
    /// Nine determinant evaluations determine both forms exactly: each pair of
    /// columns of `M`, `N` carries the phases `e^{∓iθ/2}`, so the determinant
    /// is a trigonometric polynomial of degree one in each angle.
    pub fn at(c: &AbCoupling, k: C64, a: f64) -> Self {
        let mut re = [[0.0; 3]; 3];
        let mut im = [[0.0; 3]; 3];
        let mut bound: f64 = 0.0;
        for (i, &t1) in SAMPLE_NODES.iter().enumerate() {
            for (j, &t2) in SAMPLE_NODES.iter().enumerate() {
                let m = fiber_matrix(c, &FiberPoint { k, theta1: t1, theta2: t2 }, a);
                let d = m.det();
                re[i][j] = d.re;
                im[i][j] = d.im;
                bound = bound.max(m.hadamard_bound());
            }
        }
        FiberSlice {
            k,
            real: TrigForm::from_samples(&re),
            imag: TrigForm::from_samples(&im),
            noise: 64.0 * f64::EPSILON * bound,
        }
    }

    /// Largest `|Im det| / (1 + |det|)` estimated from the coefficient sizes.
    pub fn realness_defect(&self) -> f64 {
        let im = self.imag.c0.abs() + self.imag.amplitude();
        let re = self.real.c0.abs() + self.real.amplitude();
        ((im - self.noise).max(0.0)) / (1.0 + re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{preset, st_to_ab, CouplingClass, StCoupling};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn dirichlet() -> AbCoupling {
        st_to_ab(&StCoupling::dirichlet(1.0).unwrap())
    }

    #[test]
    fn det_m_examples() {
        let m = matrix_m(C64::new(PI, 0.0), 0.0, 0.0, 1.0);
        assert!(m.det().norm() < 1e-14);
        let m = matrix_m(C64::new(FRAC_PI_2, 0.0), 0.7, -2.1, 1.0);
        assert!((m.det() + 4.0).norm() < 1e-14);
        let m = matrix_m(C64::new(1.3, 0.0), 0.0, 0.0, 1.0);
        assert!(m.0.iter().flatten().all(|z| *z == ZERO || (z.norm() - 1.0).abs() < 1e-15));
        let d = matrix_d(C64::new(2.2, 0.0), 0.4, 1.1, 1.5);
        assert!((d.det().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_determinant() {
        let p = FiberPoint::real(FRAC_PI_2, 0.3, -1.0);
        assert!((spectral_det(&dirichlet(), &p, 1.0) + 4.0).norm() < 1e-13);
        let d = dispersion_real(&dirichlet(), &p, 1.0);
        assert!((d.value + 4.0).abs() < 1e-13);
        assert_eq!(d.defect, 0.0);
    }

    #[test]
    fn m1_quarter_period_value() {
        let c = StCoupling::new(1, vec![C64::new(0.8, 0.0)], vec![ZERO; 3], 1.0).unwrap();
        let v = spectral_det(&st_to_ab(&c), &FiberPoint::real(FRAC_PI_2, 1.0, 2.0), 1.0);
        assert!((v - C64::new(-4.0 * 0.8, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn kirchhoff_flat_root() {
        let k = st_to_ab(&preset(&CouplingClass::Kirchhoff, 1.0).unwrap());
        assert!(spectral_det(&k, &FiberPoint::real(PI, 0.0, 0.0), 1.0).norm() < 1e-12);
    }

    #[test]
    fn nullspace_examples() {
        let d = dirichlet();
        for n in 1..4 {
            let p = FiberPoint::real(n as f64 * PI, 0.2, 0.9);
            let v = nullspace_vector(&d, &p, 1.0).expect("eigenvector at n pi");
            let full = fiber_matrix(&d, &p, 1.0) * matrix_d(p.k, p.theta1, p.theta2, 1.0);
            let r: f64 = full.mul_vec(&v).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(r <= 1e-6 * full.frobenius());
        }
        assert!(nullspace_vector(&d, &FiberPoint::real(FRAC_PI_2, 0.0, 0.0), 1.0).is_none());
    }

    #[test]
    fn random_points_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..2000 {
            let m = trial % 5;
            let c = StCoupling::random(m, 1.0, &mut rng).unwrap();
            let ab = st_to_ab(&c);
            let k = rng.gen_range(0.1..40.0);
            let (t1, t2) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            let p = FiberPoint::real(k, t1, t2);
            let d = dispersion_real(&ab, &p, 1.0);
            assert!(d.defect < 1e-10, "m={m} defect {}", d.defect);
            let shifted = spectral_det(&ab, &FiberPoint { k: p.k, theta1: t1 + TAU, theta2: t2 - TAU }, 1.0);
            let base = spectral_det(&ab, &p, 1.0);
            assert!((shifted - base).norm() <= 1e-9 * (1.0 + base.norm()));
            let dm = matrix_m(p.k, t1, t2, 1.0).det();
            assert!((dm + 4.0 * k.sin().powi(2)).norm() < 1e-12);
        }
    }

    #[test]
    fn slice_reproduces_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in 0..=4 {
            let ab = st_to_ab(&StCoupling::random(m, 1.3, &mut rng).unwrap());
            for k in [C64::new(3.7, 0.0), C64::new(0.0, 2.5)] {
                let s = FiberSlice::at(&ab, k, 1.3);
                for _ in 0..20 {
                    let (t1, t2) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
                    let d = spectral_det(&ab, &FiberPoint::new(k, t1, t2), 1.3);
                    assert!((s.real.eval(t1, t2) - d.re).abs() < 1e-10 * (1.0 + d.norm()));
                    assert!((s.imag.eval(t1, t2) - d.im).abs() < 1e-10 * (1.0 + d.norm()));
                }
                assert!(s.realness_defect() < 1e-10, "m={m} k={k}");
            }
        }
    }
}
