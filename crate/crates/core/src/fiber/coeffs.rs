//! Closed-form coefficients `V_j(ak, θ₁, θ₂)` of the spectral condition
//! `Σ V_j k^j = 0` for each rank `m ≥ 1`.

use serde::{Deserialize, Serialize};

use super::{FiberError, FiberPoint};
use crate::coupling::StCoupling;
use crate::linalg::C64;

/// Which coefficient multiplies `t₁t̄₂` in the `e^{iθ₁}` term of `V₂` for `m = 3`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum M3Theta1 {
    /// `s₃₃ t₁ t̄₂`; agrees with the determinant.
    #[default]
    S33,
    /// `s₂₃ t₁ t̄₂`.
    S23,
}

/// Last term of the `e^{iθ₂}` coefficient of `V₁` for `m = 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum M2V1Theta2 {
    /// `s₁₂ t̄₁₂ t₂₁`.
    AsPrinted,
    /// `s̄₁₂ t̄₁₂ t₂₁`; agrees with the determinant.
    #[default]
    Conjugated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoeffVariants {
    pub m3_theta1: M3Theta1,
    pub m2_v1_theta2: M2V1Theta2,
}

/// Coefficient evaluators for one coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct DispersionCoefficients {
    coupling: StCoupling,
    variants: CoeffVariants,
}

/// `V_j` values at one point; `v[j]` is `None` where no closed form exists
/// (`V₁` for `m = 4`) or `j > m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VValues {
    pub v: [Option<f64>; 5],
}

impl VValues {
    pub fn get(&self, j: usize) -> Option<f64> {
        self.v.get(j).copied().flatten()
    }
}

pub fn dispersion_coeffs(c: &StCoupling) -> Result<DispersionCoefficients, FiberError> {
    DispersionCoefficients::with_variants(c, CoeffVariants::default())
}

/// `Σ V_j k^j` over the available `j` at real `k = Re p.k`.
pub fn assemble_polynomial(dc: &DispersionCoefficients, p: &FiberPoint) -> f64 {
    let k = p.k.re;
    let v = dc.eval(dc.coupling.edge_length() * k, p.theta1, p.theta2);
    (0..5).filter_map(|j| v.get(j).map(|x| x * k.powi(j as i32))).sum()
}

fn re(z: C64, t: f64) -> f64 {
    (z * C64::from_polar(1.0, t)).re
}

fn re0(z: C64) -> f64 {
    z.re
}

impl DispersionCoefficients {
    pub fn with_variants(c: &StCoupling, variants: CoeffVariants) -> Result<Self, FiberError> {
        if c.rank() == 0 {
            return Err(FiberError::NoPolynomialForm);
        }
        Ok(DispersionCoefficients {
            coupling: c.clone(),
            variants,
        })
    }

    pub fn rank(&self) -> usize {
        self.coupling.rank()
    }

    pub fn coupling(&self) -> &StCoupling {
        &self.coupling
    }

    pub fn variants(&self) -> CoeffVariants {
        self.variants
    }

    /// Evaluates the coefficients at `x = ak`.
    pub fn eval(&self, x: f64, t1: f64, t2: f64) -> VValues {
        let mut v = [None; 5];
        match self.rank() {
            1 => {
                let [a1, a0] = self.m1(x, t1, t2);
                v[1] = Some(a1);
                v[0] = Some(a0);
            }
            2 => {
                let [a2, a1, a0] = self.m2(x, t1, t2);
                v[2] = Some(a2);
                v[1] = Some(a1);
                v[0] = Some(a0);
            }
            3 => {
                let [a3, a2, a1, a0] = self.m3(x, t1, t2);
                v[3] = Some(a3);
                v[2] = Some(a2);
                v[1] = Some(a1);
                v[0] = Some(a0);
            }
            4 => {
                let [a4, a3, a2, a0] = self.m4(x, t1, t2);
                v[4] = Some(a4);
                v[3] = Some(a3);
                v[2] = Some(a2);
                v[0] = Some(a0);
            }
            _ => {}
        }
        VValues { v }
    }

    fn m1(&self, x: f64, t1: f64, t2: f64) -> [f64; 2] {
        let c = &self.coupling;
        let (u1, u2, u3) = (c.t(0, 0), c.t(0, 1), c.t(0, 2));
        let s = c.s_diag(0);
        let (sn, cs) = x.sin_cos();
        let sum = 1.0 + u1.norm_sqr() + u2.norm_sqr() + u3.norm_sqr();
        let v1 = -4.0 * sn * (sum * cs - 2.0 * (re(u1, t1) + re(u2.conj() * u3, t2)));
        let v0 = -4.0 * s * sn * sn;
        [v1, v0]
    }

    fn m2(&self, x: f64, t1: f64, t2: f64) -> [f64; 3] {
        let c = &self.coupling;
        let (t11, t12, t21, t22) = (c.t(0, 0), c.t(0, 1), c.t(1, 0), c.t(1, 1));
        let (s11, s22, s12) = (c.s_diag(0), c.s_diag(1), c.s(0, 1));
        let (sn, cs) = x.sin_cos();
        let v2 = -4.0 * cs * cs * (t11.norm_sqr() + t22.norm_sqr() + t12.norm_sqr() + t21.norm_sqr())
            + 4.0 * sn * sn * (1.0 + (t11 * t22 - t12 * t21).norm_sqr())
            + 8.0 * cs * (-re(t11 * t21.conj() + t12 * t22.conj(), t1) + re(t22 * t21.conj() + t11.conj() * t12, t2))
            + 8.0 * re(t11 * t22.conj(), t1 - t2)
            + 8.0 * re(t12 * t21.conj(), t1 + t2);
        let last = match self.variants.m2_v1_theta2 {
            M2V1Theta2::AsPrinted => s12 * t12.conj() * t21,
            M2V1Theta2::Conjugated => s12.conj() * t12 * t21.conj(),
        };
        let v1 = 4.0
            * sn
            * (-cs
                * (s11 * (1.0 + t21.norm_sqr() + t22.norm_sqr()) + s22 * (1.0 + t11.norm_sqr() + t12.norm_sqr())
                    - 2.0 * re0(s12 * (t11.conj() * t21 + t12.conj() * t22)))
                - 2.0 * re(s12, t1)
                + 2.0
                    * re(
                        s11 * t21.conj() * t22 + s22 * t11.conj() * t12 - s12 * t11.conj() * t22 - last,
                        t2,
                    ));
        let det_s = s11 * s22 - s12.norm_sqr();
        let v0 = -4.0 * sn * sn * det_s;
        [v2, v1, v0]
    }

    fn m3(&self, x: f64, t1: f64, t2: f64) -> [f64; 4] {
        let c = &self.coupling;
        let (u1, u2, u3) = (c.t(0, 0), c.t(1, 0), c.t(2, 0));
        let (s11, s22, s33) = (c.s_diag(0), c.s_diag(1), c.s_diag(2));
        let (s12, s13, s23) = (c.s(0, 1), c.s(0, 2), c.s(1, 2));
        let (sn, cs) = x.sin_cos();
        let n1 = u1.norm_sqr();
        let n2 = u2.norm_sqr();
        let n3 = u3.norm_sqr();
        let v3 = 4.0 * sn * ((1.0 + n1 + n2 + n3) * cs + 2.0 * re(u1 * u2.conj(), t1) - 2.0 * re(u3, t2));
        let theta1_s = match self.variants.m3_theta1 {
            M3Theta1::S33 => C64::new(s33, 0.0),
            M3Theta1::S23 => s23,
        };
        let v2 = 4.0
            * cs
            * cs
            * (-(s11 + s22) * (1.0 + n3) - s33 * (n1 + n2) + 2.0 * re0((s13 * u1.conj() + s23 * u2.conj()) * u3))
            + 4.0 * sn * sn * (s11 * n2 + s22 * n1 + s33 - 2.0 * re0(s12 * u1.conj() * u2))
            + 8.0
                * cs
                * (re(
                    -s12 + s23.conj() * u1 * u3.conj() + s13 * u2.conj() * u3 - s12 * n3 - theta1_s * u1 * u2.conj(),
                    t1,
                ) + re(u3 * (s11 + s22) - s13.conj() * u1 - s23.conj() * u2, t2))
            + 8.0 * re(s12 * u3 - s23.conj() * u1, t1 + t2)
            + 8.0 * re(s12 * u3.conj() - s13 * u2.conj(), t1 - t2);
        let v1 = 4.0
            * sn
            * cs
            * ((s12.norm_sqr() - s11 * s22) * (1.0 + n3)
                + (s13.norm_sqr() - s11 * s33) * (1.0 + n2)
                + (s23.norm_sqr() - s22 * s33) * (1.0 + n1)
                + 2.0 * re0((s12 * s33 - s13 * s23.conj()) * u1.conj() * u2)
                + 2.0 * re0((s23 * s11 - s13 * s12.conj()) * u2.conj() * u3)
                + 2.0 * re0((s13 * s22 - s12 * s23) * u1.conj() * u3))
            + 8.0 * sn * re(s13 * s23.conj() - s12 * s33, t1)
            + 8.0
                * sn
                * re(
                    (s12.conj() * s23.conj() - s13.conj() * s22) * u1
                        + (s12 * s13.conj() - s23.conj() * s11) * u2
                        + u3 * (s11 * s22 - s12.norm_sqr()),
                    t2,
                );
        let v0 = -4.0 * sn * sn * det_s(c);
        [v3, v2, v1, v0]
    }

    fn m4(&self, x: f64, t1: f64, t2: f64) -> [f64; 4] {
        let c = &self.coupling;
        let d = [c.s_diag(0), c.s_diag(1), c.s_diag(2), c.s_diag(3)];
        let (s12, s13, s14) = (c.s(0, 1), c.s(0, 2), c.s(0, 3));
        let (s23, s24, s34) = (c.s(1, 2), c.s(1, 3), c.s(2, 3));
        let (sn, cs) = x.sin_cos();
        let v4 = -4.0 * sn * sn;
        let v3 = 4.0 * sn * ((d[0] + d[1] + d[2] + d[3]) * cs + 2.0 * re(s12, t1) + 2.0 * re(s34, t2));
        let v2 = 4.0
            * cs
            * cs
            * (s13.norm_sqr() - d[0] * d[2] + s14.norm_sqr() - d[0] * d[3] + s23.norm_sqr() - d[1] * d[2]
                + s24.norm_sqr()
                - d[1] * d[3])
            + 4.0 * sn * sn * (d[0] * d[1] - s12.norm_sqr() + d[2] * d[3] - s34.norm_sqr())
            + 8.0
                * cs
                * (-(d[2] + d[3]) * re(s12, t1) + re(s13 * s23.conj() + s14 * s24.conj(), t1)
                    - (d[0] + d[1]) * re(s34, t2)
                    + re(s13.conj() * s14 + s23.conj() * s24, t2))
            + 8.0 * re(s14 * s23.conj() - s12 * s34, t1 + t2)
            + 8.0 * re(s13 * s24.conj() - s12 * s34.conj(), t1 - t2);
        let v0 = -4.0 * sn * sn * det_s(c);
        [v4, v3, v2, v0]
    }
}

/// Determinant of the Hermitian `S` (real).
pub(crate) fn det_s(c: &StCoupling) -> f64 {
    let m = c.rank();
    let mut full = [[C64::new(0.0, 0.0); 4]; 4];
    for (i, row) in full.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = if i < m && j < m {
                c.s(i, j)
            } else if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
        }
    }
    crate::linalg::det4(full).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{st_to_ab, StCoupling};
    use crate::fiber::spectral_det;
    use crate::linalg::ZERO;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn zero_coupling(m: usize) -> StCoupling {
        StCoupling::new(m, vec![ZERO; m * (m + 1) / 2], vec![ZERO; m * (4 - m)], 1.0).unwrap()
    }

    #[test]
    fn m0_has_no_polynomial() {
        assert_eq!(
            dispersion_coeffs(&StCoupling::dirichlet(1.0).unwrap()).unwrap_err(),
            FiberError::NoPolynomialForm
        );
    }

    #[test]
    fn zero_coupling_coefficients() {
        let x: f64 = 0.83;
        let (sn, cs) = x.sin_cos();
        let v = dispersion_coeffs(&zero_coupling(4)).unwrap().eval(x, 0.4, -1.2);
        assert_eq!(v.v, [Some(0.0), None, Some(0.0), Some(0.0), Some(-4.0 * sn * sn)]);
        let v = dispersion_coeffs(&zero_coupling(3)).unwrap().eval(x, 0.4, -1.2);
        assert_eq!(v.v, [Some(0.0), Some(0.0), Some(0.0), Some(4.0 * sn * cs), None]);
        let v = dispersion_coeffs(&zero_coupling(2)).unwrap().eval(x, 0.4, -1.2);
        assert_eq!(v.v, [Some(0.0), Some(0.0), Some(4.0 * sn * sn), None, None]);
    }

    #[test]
    fn assembled_examples() {
        let dc = dispersion_coeffs(&zero_coupling(4)).unwrap();
        let k = FRAC_PI_2;
        assert!((assemble_polynomial(&dc, &FiberPoint::real(k, 0.1, 0.2)) + 4.0 * k.powi(4)).abs() < 1e-12);
        let dc = dispersion_coeffs(&zero_coupling(2)).unwrap();
        assert!(assemble_polynomial(&dc, &FiberPoint::real(PI, 0.1, 0.2)).abs() < 1e-12);
        let kirchhoff = StCoupling::new(1, vec![ZERO], vec![C64::new(1.0, 0.0); 3], 1.0).unwrap();
        let dc = dispersion_coeffs(&kirchhoff).unwrap();
        assert!(assemble_polynomial(&dc, &FiberPoint::real(PI, 0.5, 0.2)).abs() < 1e-12);
    }

    #[test]
    fn polynomial_equals_determinant_for_m_up_to_3() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for m in 1..=3 {
            for _ in 0..50 {
                let a = rng.gen_range(0.5..2.0);
                let c = StCoupling::random(m, a, &mut rng).unwrap();
                let dc = dispersion_coeffs(&c).unwrap();
                let p = FiberPoint::real(rng.gen_range(0.2..30.0), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
                let det = spectral_det(&st_to_ab(&c), &p, a).re;
                let poly = assemble_polynomial(&dc, &p);
                let k: f64 = p.k.re;
                let scale = (1.0 + k).powi(m as i32) * 64.0;
                assert!((det - poly).abs() < 1e-11 * scale, "m={m}: det {det} poly {poly}");
            }
        }
    }

    #[test]
    fn m4_residual_is_first_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let c = StCoupling::random(4, 1.0, &mut rng).unwrap();
            let dc = dispersion_coeffs(&c).unwrap();
            let (t1, t2) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            for k in [10.3, 100.3, 1000.3] {
                let p = FiberPoint::real(k, t1, t2);
                let r = (spectral_det(&st_to_ab(&c), &p, 1.0).re - assemble_polynomial(&dc, &p)) / k;
                assert!(r.abs() < 32.0 * (1.0 + c.s_frobenius()).powi(3), "V1 estimate {r}");
            }
        }
    }

    #[test]
    fn printed_variants_disagree_with_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c3 = StCoupling::random(3, 1.0, &mut rng).unwrap();
        let c2 = StCoupling::random(2, 1.0, &mut rng).unwrap();
        let p = FiberPoint::real(7.1, 0.9, -0.4);
        for (c, variants) in [
            (&c3, CoeffVariants { m3_theta1: M3Theta1::S23, ..Default::default() }),
            (&c2, CoeffVariants { m2_v1_theta2: M2V1Theta2::AsPrinted, ..Default::default() }),
        ] {
            let dc = DispersionCoefficients::with_variants(c, variants).unwrap();
            let det = spectral_det(&st_to_ab(c), &p, 1.0).re;
            assert!((det - assemble_polynomial(&dc, &p)).abs() > 1e-6);
        }
    }
}
