//! Four-harmonic trigonometric forms on the quasimomentum torus.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::linalg::{C64, ZERO};
use crate::roots::golden_max;

/// `c₀ + Re(A₁e^{iθ₁}) + Re(A₂e^{iθ₂}) + Re(A₃e^{i(θ₁−θ₂)}) + Re(A₄e^{i(θ₁+θ₂)})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigForm {
    pub c0: f64,
    pub a: [C64; 4],
}

/// Extremes of a [`TrigForm`] over the torus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigRange {
    pub min: f64,
    pub max: f64,
    pub argmin: (f64, f64),
    pub argmax: (f64, f64),
    /// All four harmonic coefficients are exactly zero.
    pub degenerate: bool,
}

impl TrigRange {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, x: f64) -> bool {
        self.min <= x && x <= self.max
    }
}

/// Reduces an angle into `(−π, π]`.
pub fn reduce_angle(x: f64) -> f64 {
    let mut r = x.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

fn cis(x: f64) -> C64 {
    C64::from_polar(1.0, x)
}

/// Nodes of the 3×3 sampling grid used by [`TrigForm::from_samples`].
pub const SAMPLE_NODES: [f64; 3] = [0.0, TAU / 3.0, 2.0 * TAU / 3.0];

impl TrigForm {
    pub fn new(c0: f64, a: [C64; 4]) -> Self {
        TrigForm { c0, a }
    }

    pub fn constant(c0: f64) -> Self {
        TrigForm { c0, a: [ZERO; 4] }
    }

    pub fn eval(&self, t1: f64, t2: f64) -> f64 {
        self.c0
            + (self.a[0] * cis(t1)).re
            + (self.a[1] * cis(t2)).re
            + (self.a[2] * cis(t1 - t2)).re
            + (self.a[3] * cis(t1 + t2)).re
    }

    pub fn is_degenerate(&self) -> bool {
        self.a.iter().all(|z| *z == ZERO)
    }

    pub fn scale(&self, s: f64) -> Self {
        TrigForm {
            c0: self.c0 * s,
            a: self.a.map(|z| z * s),
        }
    }

    pub fn add(&self, other: &TrigForm) -> Self {
        let mut a = self.a;
        for (x, y) in a.iter_mut().zip(other.a) {
            *x += y;
        }
        TrigForm {
            c0: self.c0 + other.c0,
            a,
        }
    }

    /// Sum of coefficient moduli; bounds `|F − c₀|`.
    pub fn amplitude(&self) -> f64 {
        self.a.iter().map(|z| z.norm()).sum()
    }

    /// Recovers the form from its values on the 3×3 grid `SAMPLE_NODES²`.
    /// Exact for every function in the span of the five harmonics, since the
    /// grid resolves all frequencies in `{−1, 0, 1}²` without aliasing.
    /// `samples[i][j]` is the value at `(SAMPLE_NODES[i], SAMPLE_NODES[j])`.
    pub fn from_samples(samples: &[[f64; 3]; 3]) -> Self {
        let coeff = |p: i32, q: i32| -> C64 {
            let mut acc = ZERO;
            for (i, row) in samples.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    acc += cis(-(p as f64 * SAMPLE_NODES[i] + q as f64 * SAMPLE_NODES[j])) * v;
                }
            }
            acc / 9.0
        };
        TrigForm {
            c0: coeff(0, 0).re,
            a: [coeff(1, 0) * 2.0, coeff(0, 1) * 2.0, coeff(1, -1) * 2.0, coeff(1, 1) * 2.0],
        }
    }

    pub fn sample<F: FnMut(f64, f64) -> f64>(mut f: F) -> Self {
        let mut s = [[0.0; 3]; 3];
        for (i, &t1) in SAMPLE_NODES.iter().enumerate() {
            for (j, &t2) in SAMPLE_NODES.iter().enumerate() {
                s[i][j] = f(t1, t2);
            }
        }
        Self::from_samples(&s)
    }

    /// Coefficient of `e^{iθ₁}` once `θ₂` is fixed.
    fn theta1_coefficient(&self, t2: f64) -> C64 {
        self.a[0] + self.a[2] * cis(-t2) + self.a[3] * cis(t2)
    }

    /// Maximum (`sign = 1`) or minimum (`sign = −1`) over `θ₁` at fixed `θ₂`.
    fn profile(&self, t2: f64, sign: f64) -> f64 {
        self.c0 + (self.a[1] * cis(t2)).re + sign * self.theta1_coefficient(t2).norm()
    }

    fn optimal_theta1(&self, t2: f64, sign: f64) -> f64 {
        let b = self.theta1_coefficient(t2);
        if b == ZERO {
            return 0.0;
        }
        let base = -b.arg();
        reduce_angle(if sign > 0.0 { base } else { base + PI })
    }

    /// Range over the torus.
    ///
    /// The `θ₁` dependence is a single harmonic, so its extremum is taken in
    /// closed form; the remaining profile in `θ₂` is sampled on `grid_n`
    /// points and the best local extrema are polished by golden section to
    /// `1e-10` in the angle.
    pub fn range(&self, grid_n: usize) -> TrigRange {
        let degenerate = self.is_degenerate();
        if degenerate {
            return TrigRange {
                min: self.c0,
                max: self.c0,
                argmin: (0.0, 0.0),
                argmax: (0.0, 0.0),
                degenerate,
            };
        }
        let n = grid_n.max(8);
        let (max, t2max) = self.extremum(n, 1.0);
        let (min, t2min) = self.extremum(n, -1.0);
        TrigRange {
            min,
            max,
            argmin: (self.optimal_theta1(t2min, -1.0), t2min),
            argmax: (self.optimal_theta1(t2max, 1.0), t2max),
            degenerate,
        }
    }

    fn extremum(&self, n: usize, sign: f64) -> (f64, f64) {
        let h = TAU / n as f64;
        let nodes: Vec<f64> = (0..n).map(|j| -PI + h * (j + 1) as f64).collect();
        let vals: Vec<f64> = nodes.iter().map(|&t| sign * self.profile(t, sign)).collect();
        let mut peaks: Vec<usize> = (0..n)
            .filter(|&j| {
                let prev = vals[(j + n - 1) % n];
                let next = vals[(j + 1) % n];
                vals[j] >= prev && vals[j] >= next
            })
            .collect();
        peaks.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
        peaks.truncate(3);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for j in peaks {
            let (t, v) = golden_max(|t| sign * self.profile(t, sign), nodes[j] - h, nodes[j] + h, 1e-10);
            let (t, v) = if v >= vals[j] { (t, v) } else { (nodes[j], vals[j]) };
            if v > best.0 {
                best = (v, reduce_angle(t));
            }
        }
        (sign * best.0, best.1)
    }
}

/// Amplitude `|t₁| + |t₂||t₃|` of `Re(t₁e^{iθ₁} + t̄₂t₃e^{iθ₂})`.
pub fn reduced_range_m1(t1: C64, t2: C64, t3: C64) -> f64 {
    t1.norm() + t2.norm() * t3.norm()
}

/// Both sides of `2(|t₁| + |t₂||t₃|) ≤ 1 + |t₁|² + |t₂|² + |t₃|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct M1Inequality {
    pub lhs: f64,
    pub rhs: f64,
}

impl M1Inequality {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-15)
    }

    /// `rhs − lhs = (|t₁| − 1)² + (|t₂| − |t₃|)²`.
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

pub fn m1_inequality(t1: C64, t2: C64, t3: C64) -> M1Inequality {
    M1Inequality {
        lhs: 2.0 * reduced_range_m1(t1, t2, t3),
        rhs: 1.0 + t1.norm_sqr() + t2.norm_sqr() + t3.norm_sqr(),
    }
}
