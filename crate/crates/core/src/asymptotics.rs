//! High-energy asymptotics of bands and gaps: the case tree by coupling rank,
//! its constants, and comparison with numeric scans.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::StCoupling;
use crate::fiber::{dispersion_coeffs, TrigForm};
use crate::linalg::C64;
use crate::roots::{bisect, golden_max};
use crate::spectrum::{scan_bands, BandKind, ScanConfig, SpectrumError, SpectrumReport};

/// Tolerance of the exact-zero branch predicates.
pub const BRANCH_TOL: f64 = 1e-12;
/// Predicates closer than this to a branch boundary raise a warning.
pub const BORDERLINE_TOL: f64 = 1e-8;
/// Relative tolerance of the `m = 2` threshold equalities, whose sides come
/// from refined torus extrema.
pub const MARGIN_TOL: f64 = 1e-9;
/// Grid per torus axis for the extremum searches.
pub const TORUS_GRID: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum AsymptoticsError {
    #[error("regime {index} ({case}) has no constant `{name}`")]
    MissingConstant { index: usize, case: String, name: &'static str },
    #[error("operation needs rank {expected}, got {got}")]
    WrongRank { expected: usize, got: usize },
    #[error("band index must be at least 1")]
    InvalidIndex,
    #[error("no real root of the quadratic over the torus")]
    EmptyRootSets,
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    /// `(nπ/a)²`
    Even,
    /// `((n+½)π/a)²`
    Odd,
    /// Flat bands offset from the lattice points.
    ShiftedFlat,
    /// `(nπ/a + k_shift)²`, with `k_shift` among the constants.
    Shifted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandLaw {
    #[serde(rename = "flat")]
    Flat,
    #[serde(rename = "O(n)")]
    Linear,
    #[serde(rename = "O(1)")]
    Constant,
    #[serde(rename = "O(n^-1)")]
    InverseLinear,
    #[serde(rename = "O(n^-2)")]
    InverseQuadratic,
    #[serde(rename = "O(n^-3)")]
    InverseCubic,
    #[serde(rename = "collapsed-point")]
    CollapsedPoint,
    #[serde(rename = "full-line")]
    FullLine,
    /// No band near this anchor.
    #[serde(rename = "absent")]
    Absent,
    #[serde(rename = "unclassified")]
    Unclassified,
}

impl BandLaw {
    /// Power of `n` in the leading width term.
    pub fn exponent(&self) -> Option<i32> {
        match self {
            BandLaw::Linear => Some(1),
            BandLaw::Constant => Some(0),
            BandLaw::InverseLinear => Some(-1),
            BandLaw::InverseQuadratic => Some(-2),
            BandLaw::InverseCubic => Some(-3),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapLaw {
    #[serde(rename = "O(n)")]
    Linear,
    #[serde(rename = "O(1)")]
    Constant,
    #[serde(rename = "none")]
    None,
    #[serde(rename = "unclassified")]
    Unclassified,
}

impl GapLaw {
    pub fn exponent(&self) -> Option<i32> {
        match self {
            GapLaw::Linear => Some(1),
            GapLaw::Constant => Some(0),
            _ => None,
        }
    }
}

/// Which width a regime predicts: the band at the anchor or the gap there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Band,
    Gap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub anchor: Anchor,
    pub band_law: BandLaw,
    pub gap_law: GapLaw,
    pub quantity: Quantity,
    pub constants: Vec<Constant>,
    pub case: String,
    pub borderline: bool,
}

impl Regime {
    fn new(anchor: Anchor, band_law: BandLaw, gap_law: GapLaw, quantity: Quantity, case: &str) -> Self {
        Regime {
            anchor,
            band_law,
            gap_law,
            quantity,
            constants: Vec::new(),
            case: case.to_string(),
            borderline: false,
        }
    }

    fn with(mut self, name: &str, value: f64) -> Self {
        self.constants.push(Constant {
            name: name.to_string(),
            value,
        });
        self
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|c| c.name == name).map(|c| c.value)
    }

    /// Energy of the anchor for index `n`, shifted by `center_offset` when known.
    pub fn target_energy(&self, n: usize, a: f64) -> f64 {
        let n = n as f64;
        let base = match self.anchor {
            Anchor::Even | Anchor::ShiftedFlat => (n * PI / a).powi(2),
            Anchor::Odd => ((n + 0.5) * PI / a).powi(2),
            Anchor::Shifted => (n * PI / a + self.constant("k_shift").unwrap_or(0.0)).powi(2),
        };
        base + self.constant("center_offset").unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub m: usize,
    pub edge_length: f64,
    pub regimes: Vec<Regime>,
    pub warnings: Vec<String>,
}

/// Real part of `z e^{iθ}`.
fn re(z: C64, theta: f64) -> f64 {
    (z * C64::from_polar(1.0, theta)).re
}

fn is_zero(x: f64) -> bool {
    x.abs() <= BRANCH_TOL
}

struct Borderline<'a>(&'a mut Vec<String>);

impl Borderline<'_> {
    /// Records a warning when `x` sits near zero without being zero.
    fn check(&mut self, what: &str, x: f64) -> bool {
        let near = x.abs() > BRANCH_TOL && x.abs() < BORDERLINE_TOL;
        if near {
            self.0
                .push(format!("{what} = {x:.3e} is close to a branch boundary; the asymptotic class may change"));
        }
        near
    }
}

/// Min and max of `f` over the torus: grid search followed by alternating
/// golden sections from the best node of each kind.
pub fn torus_min_max<F: Fn(f64, f64) -> f64>(f: F, grid_n: usize) -> (f64, f64) {
    let n = grid_n.max(8);
    let h = 2.0 * PI / n as f64;
    let mut lo = (f64::INFINITY, 0.0, 0.0);
    let mut hi = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let (t1, t2) = (-PI + h * (i + 1) as f64, -PI + h * (j + 1) as f64);
            let v = f(t1, t2);
            if v < lo.0 {
                lo = (v, t1, t2);
            }
            if v > hi.0 {
                hi = (v, t1, t2);
            }
        }
    }
    let polish = |start: (f64, f64, f64), sign: f64| {
        let (mut best, mut t1, mut t2) = start;
        for _ in 0..20 {
            let before = best;
            let (x, v) = golden_max(|x| sign * f(x, t2), t1 - h, t1 + h, 1e-10);
            if v > sign * best {
                best = v * sign;
                t1 = x;
            }
            let (y, v) = golden_max(|y| sign * f(t1, y), t2 - h, t2 + h, 1e-10);
            if v > sign * best {
                best = v * sign;
                t2 = y;
            }
            if (best - before).abs() <= 1e-15 * (1.0 + best.abs()) {
                break;
            }
        }
        best
    };
    (polish(lo, -1.0), polish(hi, 1.0))
}

/// `V₂` of `m = 2` at `x = ak` as a trig form in the quasimomenta.
fn v2_form(c: &StCoupling, x: f64) -> TrigForm {
    let (t11, t12, t21, t22) = (c.t(0, 0), c.t(0, 1), c.t(1, 0), c.t(1, 1));
    let k = M2Constants::of(c);
    let (s, co) = x.sin_cos();
    TrigForm::new(
        -k.k_c * co * co + k.k_s * s * s,
        [
            -8.0 * co * (t11 * t21.conj() + t12 * t22.conj()),
            8.0 * co * (t22 * t21.conj() + t11.conj() * t12),
            8.0 * t11 * t22.conj(),
            8.0 * t12 * t21.conj(),
        ],
    )
}

/// Quantities of the `m = 2` decomposition `V₂ = −K_c cos²x + K_s sin²x + cos x·L_c + L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct M2Constants {
    pub k_c: f64,
    pub k_s: f64,
    /// `max (L_c + L)` over the torus.
    pub l0_plus: f64,
    /// `min L` over the torus.
    pub l_half_pi_minus: f64,
}

impl M2Constants {
    pub fn of(c: &StCoupling) -> Self {
        let (t11, t12, t21, t22) = (c.t(0, 0), c.t(0, 1), c.t(1, 0), c.t(1, 1));
        let k_c = 4.0 * (t11.norm_sqr() + t22.norm_sqr() + t12.norm_sqr() + t21.norm_sqr());
        let k_s = 4.0 * (1.0 + (t11 * t22 - t12 * t21).norm_sqr());
        let lc_l = TrigForm::new(
            0.0,
            [
                -8.0 * (t11 * t21.conj() + t12 * t22.conj()),
                8.0 * (t22 * t21.conj() + t11.conj() * t12),
                8.0 * t11 * t22.conj(),
                8.0 * t12 * t21.conj(),
            ],
        );
        M2Constants {
            k_c,
            k_s,
            l0_plus: lc_l.range(TORUS_GRID).max,
            l_half_pi_minus: -8.0 * (t11 * t22).norm() - 8.0 * (t12 * t21).norm(),
        }
    }
}

/// `(V₂⁻(x), V₂⁺(x))`, the torus extrema of `V₂` for `m = 2`.
pub fn v2_pm(c: &StCoupling, x: f64, grid_n: usize) -> Result<(f64, f64), AsymptoticsError> {
    if c.rank() != 2 {
        return Err(AsymptoticsError::WrongRank {
            expected: 2,
            got: c.rank(),
        });
    }
    let r = v2_form(c, x).range(grid_n);
    Ok((r.min, r.max))
}

/// `(p, q)` of the quadratic `d² + 2pd + q` governing `m = 4` bands.
pub fn pq_m4(c: &StCoupling, theta1: f64, theta2: f64, parity: f64) -> Result<(f64, f64), AsymptoticsError> {
    if c.rank() != 4 {
        return Err(AsymptoticsError::WrongRank {
            expected: 4,
            got: c.rank(),
        });
    }
    let d = [c.s_diag(0), c.s_diag(1), c.s_diag(2), c.s_diag(3)];
    let (s12, s13, s14) = (c.s(0, 1), c.s(0, 2), c.s(0, 3));
    let (s23, s24, s34) = (c.s(1, 2), c.s(1, 3), c.s(2, 3));
    let sgn = parity.signum();
    let p = -0.5 * (d[0] + d[1] + d[2] + d[3] + 2.0 * sgn * re(s12, theta1) + 2.0 * sgn * re(s34, theta2));
    let q = -(s13.norm_sqr() - d[0] * d[2] + s14.norm_sqr() - d[0] * d[3] + s23.norm_sqr() - d[1] * d[2]
        + s24.norm_sqr()
        - d[1] * d[3])
        - 2.0
            * sgn
            * (-(d[2] + d[3]) * re(s12, theta1) + re(s13 * s23.conj() + s14 * s24.conj(), theta1)
                - (d[0] + d[1]) * re(s34, theta2)
                + re(s13.conj() * s14 + s23.conj() * s24, theta2))
        - 2.0 * re(s14 * s23.conj() - s12 * s34, theta1 + theta2)
        - 2.0 * re(s13 * s24.conj() - s12 * s34.conj(), theta1 - theta2);
    Ok((p, q))
}

/// Range of one root family of the `m = 4` quadratic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub lo: f64,
    pub hi: f64,
    pub degenerate: bool,
}

impl RootSet {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DIntervals {
    /// `−p + √(p² − q)`
    pub d1: RootSet,
    /// `−p − √(p² − q)`
    pub d2: RootSet,
}

/// Width below which a root set counts as a single point.
pub const POINT_TOL: f64 = 1e-9;

/// Real ranges of `−p ± √(p² − q)` over the torus (parity `+1`; the sign of
/// `(−1)ⁿ` is absorbed by a shift of the quasimomenta).
pub fn d_intervals_m4(c: &StCoupling, grid_n: usize) -> Result<DIntervals, AsymptoticsError> {
    let pq = |t1: f64, t2: f64| pq_m4(c, t1, t2, 1.0).expect("rank checked");
    if c.rank() != 4 {
        return Err(AsymptoticsError::WrongRank {
            expected: 4,
            got: c.rank(),
        });
    }
    let scale = 1.0 + c.s_frobenius().powi(2);
    let root = move |t1: f64, t2: f64, sign: f64| -> Option<f64> {
        let (p, q) = pq(t1, t2);
        let disc = p * p - q;
        (disc >= -1e-12 * scale).then(|| -p + sign * disc.max(0.0).sqrt())
    };
    let set = |sign: f64| -> Option<RootSet> {
        let (lo, _) = torus_min_max(|t1, t2| root(t1, t2, sign).unwrap_or(f64::INFINITY), grid_n);
        let (_, hi) = torus_min_max(|t1, t2| root(t1, t2, sign).unwrap_or(f64::NEG_INFINITY), grid_n);
        (lo.is_finite() && hi.is_finite()).then(|| RootSet {
            lo,
            hi,
            degenerate: hi - lo < POINT_TOL * (1.0 + lo.abs().max(hi.abs())),
        })
    };
    match (set(1.0), set(-1.0)) {
        (Some(d1), Some(d2)) => Ok(DIntervals { d1, d2 }),
        _ => Err(AsymptoticsError::EmptyRootSets),
    }
}

/// Robin eigenvalues of one edge, `ψ′(0) = s_b ψ(0)`, `ψ′(a) = −s_e ψ(a)`:
/// roots of `k(s_e + s_b) cos ka = (k² − s_e s_b) sin ka`, plus the negative
/// ones from `k = iκ`. Energies up to `e_max`, ascending.
pub fn robin_eigenvalues(s_e: f64, s_b: f64, a: f64, e_max: f64) -> Vec<f64> {
    let f = |k: f64| k * (s_e + s_b) * (k * a).cos() - (k * k - s_e * s_b) * (k * a).sin();
    let g = |kappa: f64| kappa * (s_e + s_b) * (kappa * a).cosh() + (kappa * kappa + s_e * s_b) * (kappa * a).sinh();
    let mut out = Vec::new();
    let kappa_max = 2.0 * (s_e.abs() + s_b.abs()) + 1.0 / a;
    let roots = |h: &dyn Fn(f64) -> f64, hi: f64, out: &mut Vec<f64>, negative: bool| {
        let steps = ((hi * a * 200.0).ceil() as usize).max(2000);
        let step = hi / steps as f64;
        let (mut x0, mut f0) = (1e-9, h(1e-9));
        for i in 1..=steps {
            let x1 = step * i as f64;
            let f1 = h(x1);
            if f0 == 0.0 || f0 * f1 < 0.0 {
                let r = bisect(h, x0, x1, f0, 1e-15 * x1.max(1.0));
                out.push(if negative { -r * r } else { r * r });
            }
            (x0, f0) = (x1, f1);
        }
    };
    roots(&g, kappa_max, &mut out, true);
    if e_max > 0.0 {
        roots(&f, e_max.sqrt(), &mut out, false);
    }
    // k → 0 with s_e + s_b + a s_e s_b = 0 is a zero-energy state
    if (s_e + s_b + a * s_e * s_b).abs() < 1e-12 {
        out.push(0.0);
    }
    out.sort_by(f64::total_cmp);
    out
}

/// The high-energy case tree for the coupling `c`.
pub fn classify(c: &StCoupling) -> AsymptoticReport {
    let mut warnings = Vec::new();
    let regimes = match c.rank() {
        0 => vec![Regime::new(Anchor::Even, BandLaw::Flat, GapLaw::Linear, Quantity::Band, "dirichlet: decoupled edges")
            .with("band_coeff", 0.0)
            .with("gap_coeff", 2.0 * PI * PI / (c.edge_length() * c.edge_length()))],
        1 => classify_m1(c, &mut warnings),
        2 => classify_m2(c, &mut warnings),
        3 => classify_m3(c, &mut warnings),
        _ => classify_m4(c, &mut warnings),
    };
    AsymptoticReport {
        m: c.rank(),
        edge_length: c.edge_length(),
        regimes,
        warnings,
    }
}

fn mark(mut regimes: Vec<Regime>, borderline: bool) -> Vec<Regime> {
    for r in &mut regimes {
        r.borderline |= borderline;
    }
    regimes
}

fn sine_factor_points() -> Regime {
    Regime::new(Anchor::Even, BandLaw::Flat, GapLaw::Linear, Quantity::Band, "m=1 eigenvalues from the sin ak factor")
        .with("band_coeff", 0.0)
}

fn classify_m1(c: &StCoupling, warnings: &mut Vec<String>) -> Vec<Regime> {
    let a = c.edge_length();
    let s = c.s_diag(0);
    let (t1, t2, t3) = (c.t(0, 0).norm(), c.t(0, 1).norm(), c.t(0, 2).norm());
    let sum = 1.0 + t1 * t1 + t2 * t2 + t3 * t3;
    let mut bl = Borderline(warnings);
    let mut near = bl.check("|t1|", t1);
    near |= bl.check("|t2||t3|", t2 * t3);
    let pi2 = PI * PI / (a * a);
    if is_zero(t1) && (is_zero(t2) || is_zero(t3)) {
        let t = t2.max(t3);
        let offset = -2.0 * s / (a * (1.0 + t * t));
        return mark(
            vec![
                Regime::new(
                    Anchor::ShiftedFlat,
                    BandLaw::Flat,
                    GapLaw::Linear,
                    Quantity::Band,
                    "m=1 point spectrum: t1 = 0 and t2 t3 = 0, eigenvalues ((n-1/2)pi/a)^2 - 2s/(a(1+|t|^2))",
                )
                .with("band_coeff", 0.0)
                .with("gap_coeff", pi2)
                .with("half_shift_k", -0.5 * PI / a)
                .with("flat_offset", offset),
                sine_factor_points().with("gap_coeff", pi2),
            ],
            near,
        );
    }
    let ratio = 2.0 * (t1 + t2 * t3) / sum;
    near |= bl.check("1 - 2(|t1|+|t2||t3|)/(1+sum|t|^2)", 1.0 - ratio);
    if (ratio - 1.0).abs() <= BRANCH_TOL {
        if is_zero(s) {
            return mark(
                vec![Regime::new(Anchor::Even, BandLaw::FullLine, GapLaw::None, Quantity::Gap, "m=1 no gaps: |t1| = 1, |t2| = |t3|, s = 0")
                    .with("gap_coeff", 0.0)],
                near,
            );
        }
        near |= bl.check("s", s);
        let g = 2.0 * s / (a * (1.0 + t2 * t2));
        return mark(
            vec![
                Regime::new(Anchor::Even, BandLaw::Linear, GapLaw::Constant, Quantity::Gap, "m=1 constant gaps: |t1| = 1, |t2| = |t3|")
                    .with("gap_width", g.abs())
                    .with("gap_coeff", g.abs())
                    .with("band_coeff", 2.0 * pi2)
                    .with("gap_lo_offset", g.min(0.0))
                    .with("gap_hi_offset", g.max(0.0))
                    .with("center_offset", 0.5 * g),
                sine_factor_points().with("gap_coeff", 2.0 * pi2),
            ],
            near,
        );
    }
    let delta = ratio.asin();
    mark(
        vec![
            Regime::new(Anchor::Odd, BandLaw::Linear, GapLaw::Linear, Quantity::Band, "m=1 linear bands and gaps")
                .with("delta", delta)
                .with("half_width_k", delta / a)
                .with("band_coeff", 4.0 * PI * delta / (a * a))
                .with("gap_coeff", 2.0 * PI * (PI - 2.0 * delta) / (a * a)),
            sine_factor_points().with("gap_coeff", 2.0 * pi2),
        ],
        near,
    )
}

/// Root of a continuous `f` with `f(lo) < 0 < f(hi)`.
fn root_between<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    bisect(&f, lo, hi, f(lo), 1e-14)
}

fn classify_m2(c: &StCoupling, warnings: &mut Vec<String>) -> Vec<Regime> {
    let a = c.edge_length();
    let pi2 = PI * PI / (a * a);
    let t = c.t_entries();
    let nonzero: Vec<C64> = t.iter().copied().filter(|z| !is_zero(z.norm())).collect();
    let s12 = c.s(0, 1).norm();
    let mut bl = Borderline(warnings);
    let mut near = false;
    for z in t {
        near |= bl.check("|t_ij|", z.norm());
    }
    if nonzero.len() < 2 {
        near |= bl.check("|s12|", s12);
        if is_zero(s12) {
            return mark(
                vec![Regime::new(Anchor::ShiftedFlat, BandLaw::Flat, GapLaw::Linear, Quantity::Band, "m=2 s12 = 0: decoupled edge pairs, pure point")
                    .with("band_coeff", 0.0)],
                near,
            );
        }
        let (s11, s22) = (c.s_diag(0), c.s_diag(1));
        if nonzero.is_empty() {
            let lo = 2.0 / a * (s11 + s22 - 2.0 * s12);
            let hi = 2.0 / a * (s11 + s22 + 2.0 * s12);
            return mark(
                vec![
                    Regime::new(Anchor::Even, BandLaw::Constant, GapLaw::Linear, Quantity::Band, "m=2 s12 != 0, T = 0: constant bands near (n pi/a)^2")
                        .with("band_coeff", hi - lo)
                        .with("band_lo_offset", lo)
                        .with("band_hi_offset", hi)
                        .with("center_offset", 0.5 * (lo + hi))
                        .with("gap_coeff", 2.0 * pi2),
                    Regime::new(Anchor::Even, BandLaw::Flat, GapLaw::Linear, Quantity::Band, "m=2 s12 != 0, T = 0: points (n pi/a)^2")
                        .with("band_coeff", 0.0),
                ],
                near,
            );
        }
        let tn = nonzero[0].norm();
        let x0 = 0.5 * ((1.0 - tn * tn) / (1.0 + tn * tn)).acos();
        let width = 4.0 * s12 / (a * (1.0 + tn * tn).sqrt());
        let family = |sign: f64, case: &str| {
            Regime::new(Anchor::Shifted, BandLaw::Constant, GapLaw::Linear, Quantity::Band, case)
                .with("k_shift", sign * x0 / a)
                .with("band_coeff", width)
                .with("gap_coeff", pi2)
        };
        return mark(
            vec![
                family(1.0, "m=2 s12 != 0, one nonzero t: bands at (n pi/a + arccos((1-|t|^2)/(1+|t|^2))/(2a))^2"),
                family(-1.0, "m=2 s12 != 0, one nonzero t: mirror bands at (n pi/a - arccos((1-|t|^2)/(1+|t|^2))/(2a))^2"),
            ],
            near,
        );
    }

    let k = M2Constants::of(c);
    let scale = 1.0 + k.k_c + k.k_s;
    let even_margin = k.l0_plus - k.k_c;
    let odd_margin = k.l_half_pi_minus + k.k_s;
    for (what, margin) in [("L0+ - K_c", even_margin), ("L_pi/2- + K_s", odd_margin)] {
        let r = margin.abs() / scale;
        if r > MARGIN_TOL && r < 1e3 * MARGIN_TOL {
            bl.0.push(format!("{what} = {margin:.3e} is close to a branch boundary; the asymptotic class may change"));
            near = true;
        }
    }
    let s_zero = c.s_is_zero(BRANCH_TOL);
    let base = |anchor, law, gap, case: &str| {
        Regime::new(anchor, law, gap, Quantity::Gap, case)
            .with("k_c", k.k_c)
            .with("k_s", k.k_s)
            .with("l0_plus", k.l0_plus)
            .with("l_half_pi_minus", k.l_half_pi_minus)
    };
    let v_plus = |x: f64| v2_form(c, x).range(TORUS_GRID).max;
    let v_minus = |x: f64| v2_form(c, x).range(TORUS_GRID).min;

    // state of the gaps at each anchor: Some(width constant) / no gap / open
    let even = if even_margin.abs() <= MARGIN_TOL * scale {
        if s_zero {
            Ok(None)
        } else {
            Err("m=2 L0+ = K_c with S != 0: unclassified")
        }
    } else if even_margin < 0.0 {
        Ok(Some(root_between(v_plus, 0.0, FRAC_PI_2)))
    } else {
        Ok(None)
    };
    let odd = if odd_margin.abs() <= MARGIN_TOL * scale {
        if s_zero {
            Ok(None)
        } else {
            Err("m=2 L_pi/2- = -K_s with S != 0: unclassified")
        }
    } else if odd_margin > 0.0 {
        let x = root_between(v_minus, 0.0, FRAC_PI_2);
        Ok(Some(FRAC_PI_2 - x))
    } else {
        Ok(None)
    };
    let mut out = Vec::new();
    let b = *even.as_ref().ok().and_then(|x| x.as_ref()).unwrap_or(&0.0);
    let cc = *odd.as_ref().ok().and_then(|x| x.as_ref()).unwrap_or(&0.0);
    let band_coeff = 2.0 * PI * (PI - 2.0 * b - 2.0 * cc) / (a * a);
    match even {
        Ok(Some(b)) => out.push(
            base(Anchor::Even, BandLaw::Linear, GapLaw::Linear, "m=2 gaps around (n pi/a)^2 with V2+(b) = 0")
                .with("b", b)
                .with("gap_coeff", 4.0 * PI * b / (a * a))
                .with("band_coeff", band_coeff),
        ),
        Ok(None) => {}
        Err(case) => out.push(base(Anchor::Even, BandLaw::Unclassified, GapLaw::Unclassified, case)),
    }
    match odd {
        Ok(Some(cv)) => out.push(
            base(Anchor::Odd, BandLaw::Linear, GapLaw::Linear, "m=2 gaps around ((n+1/2) pi/a)^2 with V2-(pi/2 - c) = 0")
                .with("c", cv)
                .with("gap_coeff", 4.0 * PI * cv / (a * a))
                .with("band_coeff", band_coeff),
        ),
        Ok(None) => {}
        Err(case) => out.push(base(Anchor::Odd, BandLaw::Unclassified, GapLaw::Unclassified, case)),
    }
    if out.is_empty() {
        let case = if s_zero && (even_margin.abs() <= MARGIN_TOL * scale || odd_margin.abs() <= MARGIN_TOL * scale) {
            "m=2 S = 0 borderline: no gaps"
        } else {
            "m=2 L0+ > K_c and L_pi/2- < -K_s: half-line"
        };
        out.push(base(Anchor::Even, BandLaw::FullLine, GapLaw::None, case).with("gap_coeff", 0.0));
    }
    mark(out, near)
}

/// `W₂` and `W₃` of the `m = 3` even-band expansion.
fn w23(c: &StCoupling) -> impl Fn(f64, f64) -> (f64, f64) + '_ {
    let dc = dispersion_coeffs(c).expect("rank 3");
    let (u1, u2, u3) = (c.t(0, 0), c.t(1, 0), c.t(2, 0));
    let sum = 1.0 + u1.norm_sqr() + u2.norm_sqr() + u3.norm_sqr();
    move |t1, t2| {
        let w2 = dc.eval(0.0, t1, t2).get(2).unwrap_or(0.0) / 4.0;
        let w3 = sum + 2.0 * re(u1 * u2.conj(), t1) - 2.0 * re(u3, t2);
        (w2, w3)
    }
}

/// Range `𝒟` of `−W₂/W₃` for `m = 3`.
pub fn m3_even_offsets(c: &StCoupling, grid_n: usize) -> Result<(f64, f64), AsymptoticsError> {
    if c.rank() != 3 {
        return Err(AsymptoticsError::WrongRank {
            expected: 3,
            got: c.rank(),
        });
    }
    let w = w23(c);
    Ok(torus_min_max(
        |t1, t2| {
            let (w2, w3) = w(t1, t2);
            -w2 / w3
        },
        grid_n,
    ))
}

/// `m = 3` with the first two edges swapped.
fn swap12(c: &StCoupling) -> StCoupling {
    let s = |i: usize, j: usize| c.s(i, j);
    let perm = [1, 0, 2];
    let mut upper = Vec::new();
    for i in 0..3 {
        for j in i..3 {
            upper.push(s(perm[i], perm[j]));
        }
    }
    let t = vec![c.t(1, 0), c.t(0, 0), c.t(2, 0)];
    StCoupling::new(3, upper, t, c.edge_length()).expect("permuted coupling stays valid")
}

fn classify_m3(c: &StCoupling, warnings: &mut Vec<String>) -> Vec<Regime> {
    let a = c.edge_length();
    let pi2 = PI * PI / (a * a);
    let (t1, t2, t3) = (c.t(0, 0).norm(), c.t(1, 0).norm(), c.t(2, 0).norm());
    let mut bl = Borderline(warnings);
    let mut near = bl.check("|t1| - |t2|", t1 - t2);
    near |= bl.check("|t3| - 1", t3 - 1.0);
    if is_zero(t1 - t2) && is_zero(t3 - 1.0) {
        let r = if c.s_is_zero(BRANCH_TOL) {
            Regime::new(Anchor::Even, BandLaw::FullLine, GapLaw::None, Quantity::Gap, "m=3 |t1| = |t2|, |t3| = 1, S = 0: half-line")
                .with("gap_coeff", 0.0)
        } else {
            Regime::new(Anchor::Even, BandLaw::Unclassified, GapLaw::Unclassified, Quantity::Band, "m=3 |t1| = |t2|, |t3| = 1 with S != 0: unclassified")
        };
        return mark(vec![r], near);
    }
    let mut out = vec![m3_even(c, &mut bl, &mut near, pi2)];
    out.push(m3_odd(c, &mut bl, &mut near, pi2));
    mark(out, near)
}

fn m3_even(c: &StCoupling, bl: &mut Borderline, near: &mut bool, pi2: f64) -> Regime {
    let a = c.edge_length();
    let t_zero = c.t_is_zero(BRANCH_TOL);
    let s12 = c.s(0, 1).norm();
    let (s11, s22) = (c.s_diag(0), c.s_diag(1));
    let s13s23 = c.s(0, 2).norm() * c.s(1, 2).norm();
    *near |= bl.check("|s12|", s12);
    if t_zero && is_zero(s12) {
        *near |= bl.check("|s13 s23|", s13s23);
        *near |= bl.check("s11 + s22", s11 + s22);
        if is_zero(s13s23) {
            return Regime::new(Anchor::Even, BandLaw::Flat, GapLaw::Linear, Quantity::Band, "m=3 T = 0, s12 = 0, s13 s23 = 0: points near (n pi/a)^2")
                .with("band_coeff", 0.0)
                .with("center_offset", 2.0 * (s11 + s22) / a);
        }
        if is_zero(s11 + s22) {
            return Regime::new(Anchor::Even, BandLaw::Absent, GapLaw::Linear, Quantity::Band, "m=3 T = 0, s12 = 0, s11 + s22 = 0: no band near (n pi/a)^2")
                .with("band_coeff", 0.0);
        }
        return Regime::new(Anchor::Even, BandLaw::InverseQuadratic, GapLaw::Linear, Quantity::Band, "m=3 T = 0, s12 = 0: even bands shrinking as n^-2")
            .with("band_coeff", 8.0 * a * (s11 + s22).abs() * s13s23 / (PI * PI))
            .with("center_offset", 2.0 * (s11 + s22) / a)
            .with("gap_coeff", 2.0 * pi2);
    }
    let (u1, u2, u3) = (c.t(0, 0).norm(), c.t(1, 0).norm(), c.t(2, 0).norm());
    if is_zero(u1 * u2) && is_zero(u3) && c.s_is_diagonal(BRANCH_TOL) {
        let (lo, _) = m3_even_offsets(c, TORUS_GRID).expect("rank 3");
        return Regime::new(Anchor::Even, BandLaw::Flat, GapLaw::Linear, Quantity::Band, "m=3 t1 t2 = 0, t3 = 0, S diagonal: decoupled, flat near (n pi/a)^2")
            .with("band_coeff", 0.0)
            .with("center_offset", 2.0 * lo / a);
    }
    let (lo, hi) = m3_even_offsets(c, TORUS_GRID).expect("rank 3");
    let law = if hi - lo <= POINT_TOL { BandLaw::CollapsedPoint } else { BandLaw::Constant };
    Regime::new(Anchor::Even, law, GapLaw::Linear, Quantity::Band, "m=3 even bands of constant width, offsets from -W2/W3")
        .with("d_min", lo)
        .with("d_max", hi)
        .with("band_coeff", 2.0 * (hi - lo) / a)
        .with("band_lo_offset", 2.0 * lo / a)
        .with("band_hi_offset", 2.0 * hi / a)
        .with("center_offset", (lo + hi) / a)
        .with("gap_coeff", 2.0 * pi2)
}

fn m3_odd(c: &StCoupling, bl: &mut Borderline, near: &mut bool, pi2: f64) -> Regime {
    let a = c.edge_length();
    let (t1, t2, t3) = (c.t(0, 0).norm(), c.t(1, 0).norm(), c.t(2, 0).norm());
    let sum = 1.0 + t1 * t1 + t2 * t2 + t3 * t3;
    *near |= bl.check("|t1 t2| + |t3|", t1 * t2 + t3);
    if !is_zero(t1 * t2 + t3) {
        let delta = (2.0 * (t1 * t2 + t3) / sum).asin();
        return Regime::new(Anchor::Odd, BandLaw::Linear, GapLaw::Linear, Quantity::Band, "m=3 odd bands growing linearly")
            .with("delta", delta)
            .with("half_width_k", delta / a)
            .with("band_coeff", 4.0 * PI * delta / (a * a));
    }
    if is_zero(t1) && !is_zero(t2) {
        return m3_odd(&swap12(c), bl, near, pi2);
    }
    if !is_zero(t1) {
        let (s22, s33, s23) = (c.s_diag(1), c.s_diag(2), c.s(1, 2).norm());
        *near |= bl.check("|s23|", s23);
        let n1 = t1 * t1;
        let offset = 2.0 / a * (s22 * n1 + s33) / (1.0 + n1);
        if is_zero(s23) {
            return Regime::new(Anchor::Odd, BandLaw::Unclassified, GapLaw::Linear, Quantity::Band, "m=3 t2 = t3 = 0, s23 = 0: odd band collapses, not analysed")
                .with("center_offset", offset);
        }
        let half = 2.0 / a * 2.0 * t1 * s23 / (1.0 + n1);
        return Regime::new(Anchor::Odd, BandLaw::Constant, GapLaw::Linear, Quantity::Band, "m=3 t1 t2 = t3 = 0: odd bands of constant width")
            .with("band_coeff", 2.0 * half)
            .with("center_offset", offset)
            .with("gap_coeff", 2.0 * pi2);
    }
    // T = 0
    let (s12, s13, s23) = (c.s(0, 1).norm(), c.s(0, 2).norm(), c.s(1, 2).norm());
    let (s22, s33) = (c.s_diag(1), c.s_diag(2));
    *near |= bl.check("|s13 s23|", s13 * s23);
    if !is_zero(s13 * s23) {
        return Regime::new(Anchor::Odd, BandLaw::InverseLinear, GapLaw::Linear, Quantity::Band, "m=3 T = 0, s13 s23 != 0: odd bands shrinking as n^-1")
            .with("band_coeff", 8.0 * s13 * s23 / PI)
            .with("center_offset", 2.0 * s33 / a)
            .with("gap_coeff", 2.0 * pi2);
    }
    if is_zero(s13) && !is_zero(s23) {
        return m3_odd(&swap12(c), bl, near, pi2);
    }
    *near |= bl.check("s33", s33);
    *near |= bl.check("|s12|", s12);
    if !is_zero(s33) {
        if is_zero(s12) {
            return Regime::new(Anchor::Odd, BandLaw::Flat, GapLaw::Linear, Quantity::Band, "m=3 T = 0, s23 = 0, s12 = 0: pure point")
                .with("band_coeff", 0.0)
                .with("center_offset", 2.0 * s33 / a);
        }
        return Regime::new(Anchor::Odd, BandLaw::InverseQuadratic, GapLaw::Linear, Quantity::Band, "m=3 T = 0, s23 = 0: odd bands shrinking as n^-2")
            .with("band_coeff", 4.0 * (s33 * s12).abs() / PI)
            .with("center_offset", 2.0 * s33 / a)
            .with("gap_coeff", 2.0 * pi2);
    }
    if is_zero(s12) {
        return Regime::new(Anchor::Odd, BandLaw::Flat, GapLaw::Linear, Quantity::Band, "m=3 T = 0, s23 = s33 = 0, s12 = 0: pure point")
            .with("band_coeff", 0.0);
    }
    *near |= bl.check("s22", s22);
    if is_zero(s13) || is_zero(s22) {
        return Regime::new(Anchor::Odd, BandLaw::CollapsedPoint, GapLaw::Linear, Quantity::Band, "m=3 T = 0, s23 = s33 = 0, s13 s22 = 0: odd band collapses to a point")
            .with("band_coeff", 0.0);
    }
    Regime::new(Anchor::Odd, BandLaw::InverseCubic, GapLaw::Linear, Quantity::Band, "m=3 T = 0, s23 = s33 = 0: odd bands shrinking as n^-3")
        .with("band_coeff", 8.0 * a * a * s13 * s13 * s22.abs() * s12 / PI.powi(3))
        .with("gap_coeff", 2.0 * pi2)
}

fn classify_m4(c: &StCoupling, warnings: &mut Vec<String>) -> Vec<Regime> {
    let a = c.edge_length();
    let pi2 = PI * PI / (a * a);
    let mut bl = Borderline(warnings);
    let mut near = false;
    let off: Vec<f64> = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)].iter().map(|&(i, j)| c.s(i, j).norm()).collect();
    for &x in &off {
        near |= bl.check("|s_ij|", x);
    }
    let d = [c.s_diag(0), c.s_diag(1), c.s_diag(2), c.s_diag(3)];
    if off.iter().all(|&x| is_zero(x)) {
        let flat = |d: f64, case: &str| {
            Regime::new(Anchor::Even, BandLaw::Flat, GapLaw::Linear, Quantity::Band, case)
                .with("d", d)
                .with("center_offset", 2.0 * d / a)
                .with("band_coeff", 0.0)
        };
        return mark(
            vec![
                flat(d[0] + d[1], "m=4 diagonal S: horizontal edges with Robin ends"),
                flat(d[2] + d[3], "m=4 diagonal S: vertical edges with Robin ends"),
            ],
            near,
        );
    }
    let nonzero_pairs = off[1..5].iter().filter(|&&x| !is_zero(x)).count();
    let dint = d_intervals_m4(c, TORUS_GRID);
    let Ok(dint) = dint else {
        warnings.push("no real root of the m=4 quadratic found".into());
        return vec![Regime::new(Anchor::Even, BandLaw::Unclassified, GapLaw::Unclassified, Quantity::Band, "m=4 empty root sets")];
    };
    let mut case_note = String::new();
    let class = crate::coupling::classify_coupling(c);
    match class {
        crate::coupling::CouplingClass::DeltaPrimeS(_) => case_note.push_str(" (delta'_s coupling)"),
        crate::coupling::CouplingClass::DeltaPrime(_) => case_note.push_str(" (delta' coupling)"),
        _ => {}
    }
    if is_zero(off[0]) && is_zero(off[5]) && nonzero_pairs <= 1 {
        let flat = |set: RootSet, case: &str| {
            Regime::new(Anchor::Even, BandLaw::Flat, GapLaw::Linear, Quantity::Band, case)
                .with("d", set.lo)
                .with("center_offset", 2.0 * set.lo / a)
                .with("band_coeff", 0.0)
        };
        return mark(
            vec![
                flat(dint.d1, "m=4 s12 = s34 = 0, one off-diagonal pair: L-shaped edge pairs, pure point (D1)"),
                flat(dint.d2, "m=4 s12 = s34 = 0, one off-diagonal pair: L-shaped edge pairs, pure point (D2)"),
            ],
            near,
        );
    }
    let band = |set: RootSet, label: &str| {
        let law = if set.degenerate { BandLaw::Flat } else { BandLaw::Constant };
        Regime::new(Anchor::Even, law, GapLaw::Linear, Quantity::Band, &format!("m=4 bands of constant width from {label}{case_note}"))
            .with("d_min", set.lo)
            .with("d_max", set.hi)
            .with("band_coeff", 2.0 * set.width() / a)
            .with("band_lo_offset", 2.0 * set.lo / a)
            .with("band_hi_offset", 2.0 * set.hi / a)
            .with("center_offset", (set.lo + set.hi) / a)
            .with("gap_coeff", 2.0 * pi2)
    };
    if dint.d1.degenerate != dint.d2.degenerate {
        warnings.push(format!(
            "one root set is a point and the other an interval (D1 width {:.3e}, D2 width {:.3e})",
            dint.d1.width(),
            dint.d2.width()
        ));
    }
    let scale = 1.0 + c.s_frobenius();
    if (dint.d2.hi - dint.d1.lo).abs() <= 1e-9 * scale {
        warnings.push("max D2 equals min D1: bands from D1 and D2 touch, a gap between them is undecided".into());
    } else if dint.d2.hi > dint.d1.lo {
        warnings.push("the D1 and D2 bands overlap".into());
    }
    mark(vec![band(dint.d1, "D1"), band(dint.d2, "D2")], near)
}

/// Leading-order widths of one regime at index `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthPrediction {
    /// `0` for flat bands, `+∞` for a half-line.
    pub band: f64,
    pub gap: Option<f64>,
}

impl WidthPrediction {
    pub fn of(&self, q: Quantity) -> Option<f64> {
        match q {
            Quantity::Band => Some(self.band),
            Quantity::Gap => self.gap,
        }
    }
}

/// Evaluates each regime's width law at band index `n`.
pub fn predicted_band_width(report: &AsymptoticReport, n: usize) -> Result<Vec<WidthPrediction>, AsymptoticsError> {
    if n == 0 {
        return Err(AsymptoticsError::InvalidIndex);
    }
    let nf = n as f64;
    report
        .regimes
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let missing = |name| AsymptoticsError::MissingConstant {
                index,
                case: r.case.clone(),
                name,
            };
            let band = match r.band_law {
                BandLaw::Flat | BandLaw::CollapsedPoint | BandLaw::Absent => 0.0,
                BandLaw::FullLine => f64::INFINITY,
                BandLaw::Unclassified => return Err(missing("band_coeff")),
                law => r.constant("band_coeff").ok_or_else(|| missing("band_coeff"))? * nf.powi(law.exponent().unwrap()),
            };
            let gap = match r.gap_law {
                GapLaw::None => Some(0.0),
                GapLaw::Unclassified => None,
                law => r.constant("gap_coeff").map(|g| g * nf.powi(law.exponent().unwrap())),
            };
            if r.quantity == Quantity::Gap && gap.is_none() && r.band_law != BandLaw::Unclassified {
                return Err(missing("gap_coeff"));
            }
            Ok(WidthPrediction { band, gap })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub regime: usize,
    pub n: usize,
    pub quantity: Quantity,
    pub numeric: Option<f64>,
    pub predicted: f64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub regime: usize,
    pub case: String,
    pub predicted_exponent: Option<i32>,
    pub fitted_exponent: Option<f64>,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub fits: Vec<ExponentFit>,
    pub mismatches: Vec<String>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite()).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Width of the numeric band or gap closest to the regime's anchor at `n`.
pub fn numeric_width(spec: &SpectrumReport, regime: &Regime, n: usize, a: f64) -> Option<f64> {
    let target = regime.target_energy(n, a);
    let reach = 0.5 * PI * PI * (n as f64).max(1.0) / (a * a);
    let dist = |lo: f64, hi: f64| {
        if target < lo {
            lo - target
        } else if target > hi {
            target - hi
        } else {
            0.0
        }
    };
    let pick = |items: Vec<(f64, f64)>| {
        items
            .into_iter()
            .map(|(lo, hi)| (dist(lo, hi), (0.5 * (lo + hi) - target).abs(), hi - lo))
            .filter(|(d, _, _)| *d <= reach)
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)))
            .map(|(_, _, w)| w)
    };
    match regime.quantity {
        Quantity::Band => pick(
            spec.bands
                .iter()
                .filter(|b| b.kind != BandKind::Negative && b.e_lo >= 0.0)
                .map(|b| (b.e_lo, b.e_hi))
                .collect(),
        ),
        Quantity::Gap => pick(spec.gaps.iter().map(|g| (g.e_lo, g.e_hi)).collect()).or(Some(0.0)),
    }
}

/// Numeric widths from a scan against the predicted laws for `n ∈ n_range`.
pub fn compare_asymptotics(
    c: &StCoupling,
    cfg: &ScanConfig,
    n_range: std::ops::RangeInclusive<usize>,
) -> Result<ComparisonTable, AsymptoticsError> {
    let spec = scan_bands(c, cfg)?;
    let report = classify(c);
    Ok(compare_with(&spec, &report, n_range))
}

pub fn compare_with(spec: &SpectrumReport, report: &AsymptoticReport, n_range: std::ops::RangeInclusive<usize>) -> ComparisonTable {
    let a = report.edge_length;
    let mut rows = Vec::new();
    let mut mismatches = Vec::new();
    for n in n_range.clone() {
        let preds = match predicted_band_width(report, n.max(1)) {
            Ok(p) => p,
            Err(e) => {
                // regimes without a law are compared one by one below
                let _ = e;
                report
                    .regimes
                    .iter()
                    .map(|r| {
                        let single = AsymptoticReport {
                            regimes: vec![r.clone()],
                            ..report.clone()
                        };
                        predicted_band_width(&single, n.max(1)).map(|v| v[0]).unwrap_or(WidthPrediction {
                            band: f64::NAN,
                            gap: None,
                        })
                    })
                    .collect()
            }
        };
        for (i, (r, p)) in report.regimes.iter().zip(&preds).enumerate() {
            let Some(predicted) = p.of(r.quantity) else { continue };
            if predicted.is_nan() {
                continue;
            }
            let numeric = numeric_width(spec, r, n, a);
            if numeric.is_none() {
                mismatches.push(format!("regime {i}: no numeric {:?} near index {n}", r.quantity));
            }
            let ratio = numeric.and_then(|w| (predicted != 0.0 && predicted.is_finite()).then(|| w / predicted));
            rows.push(ComparisonRow {
                regime: i,
                n,
                quantity: r.quantity,
                numeric,
                predicted,
                ratio,
            });
        }
    }
    let fits = report
        .regimes
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let pts: Vec<(f64, f64)> =
                rows.iter().filter(|row| row.regime == i).filter_map(|row| row.numeric.map(|w| (row.n as f64, w))).collect();
            let predicted_exponent = match r.quantity {
                Quantity::Band => r.band_law.exponent(),
                Quantity::Gap => r.gap_law.exponent(),
            };
            ExponentFit {
                regime: i,
                case: r.case.clone(),
                predicted_exponent,
                fitted_exponent: log_log_slope(&pts),
                points: pts.len(),
            }
        })
        .collect();
    ComparisonTable { rows, fits, mismatches }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{preset, CouplingClass};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn real(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn m3(s: [f64; 6], t: [C64; 3]) -> StCoupling {
        StCoupling::new(3, s.iter().map(|&x| real(x)).collect(), t.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn pq_examples() {
        let c = preset(&CouplingClass::DiagonalDecoupled([1.0; 4]), 1.0).unwrap();
        for (t1, t2) in [(0.3, -1.0), (2.0, 0.5)] {
            let (p, q) = pq_m4(&c, t1, t2, 1.0).unwrap();
            assert!((p + 2.0).abs() < 1e-15 && (q - 4.0).abs() < 1e-15);
        }
        let z = preset(&CouplingClass::DiagonalDecoupled([0.0; 4]), 1.0).unwrap();
        assert_eq!(pq_m4(&z, 0.4, 0.1, -1.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn diagonal_root_sets_are_points() {
        let c = preset(&CouplingClass::DiagonalDecoupled([1.0; 4]), 1.0).unwrap();
        let d = d_intervals_m4(&c, 32).unwrap();
        assert!(d.d1.degenerate && d.d2.degenerate);
        assert!((d.d1.lo - 2.0).abs() < 1e-7 && (d.d2.hi - 2.0).abs() < 1e-7);
    }

    #[test]
    fn delta_prime_s_touching_sets() {
        let c = preset(&CouplingClass::DeltaPrimeS(1.0), 1.0).unwrap();
        let d = d_intervals_m4(&c, 64).unwrap();
        assert!(d.d2.degenerate && d.d2.hi.abs() < 1e-9);
        assert!(d.d1.lo.abs() < 1e-9 && (d.d1.hi - 8.0).abs() < 1e-9);
    }

    #[test]
    fn delta_prime_sets_touch_at_a_point() {
        let c = preset(&CouplingClass::DeltaPrime(2.0), 1.0).unwrap();
        let d = d_intervals_m4(&c, 64).unwrap();
        assert!(d.d1.degenerate && (d.d1.lo - 4.0).abs() < 1e-8, "{d:?}");
        assert!(d.d2.lo.abs() < 1e-9 && (d.d2.hi - 4.0).abs() < 1e-9, "{d:?}");
    }

    #[test]
    fn v2_for_zero_t() {
        let c = StCoupling::new(2, vec![real(0.3), real(0.1), real(-0.2)], vec![C64::new(0.0, 0.0); 4], 1.0).unwrap();
        for x in [0.2, 1.0, 2.5] {
            let (lo, hi) = v2_pm(&c, x, 32).unwrap();
            let e = 4.0 * x.sin().powi(2);
            assert!((lo - e).abs() < 1e-14 && (hi - e).abs() < 1e-14);
        }
    }

    #[test]
    fn v2_half_pi_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let c = StCoupling::random(2, 1.0, &mut rng).unwrap();
            let k = M2Constants::of(&c);
            let (lo, _) = v2_pm(&c, FRAC_PI_2, 64).unwrap();
            assert!((lo - (k.k_s + k.l_half_pi_minus)).abs() < 1e-9);
            let (lo0, hi0) = v2_pm(&c, 0.3, 64).unwrap();
            let (lo1, hi1) = v2_pm(&c, 0.3 + PI, 64).unwrap();
            assert!((lo0 - lo1).abs() < 1e-9 && (hi0 - hi1).abs() < 1e-9);
        }
    }

    #[test]
    fn l0_plus_is_v2_plus_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let c = StCoupling::random(2, 1.0, &mut rng).unwrap();
            let k = M2Constants::of(&c);
            let (_, hi) = v2_pm(&c, 0.0, 64).unwrap();
            assert!((hi - (k.l0_plus - k.k_c)).abs() < 1e-9);
        }
    }

    #[test]
    fn delta_gap_width() {
        let c = preset(&CouplingClass::Delta(2.0), 1.0).unwrap();
        let r = classify(&c);
        assert_eq!(r.regimes[0].gap_law, GapLaw::Constant);
        let w = predicted_band_width(&r, 7).unwrap();
        assert!((w[0].gap.unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn m1_linear_delta() {
        let c = StCoupling::new(1, vec![real(0.4)], vec![real(0.0), real(1.0), real(1.0)], 1.0).unwrap();
        let r = classify(&c);
        assert_eq!(r.regimes[0].band_law, BandLaw::Linear);
        assert!((r.regimes[0].constant("delta").unwrap() - (2.0f64 / 3.0).asin()).abs() < 1e-15);
    }

    #[test]
    fn comb_width_law() {
        let c = m3([1.0, 0.0, 0.5, 1.0, 0.5, 0.3], [real(0.0); 3]);
        let r = classify(&c);
        let even = &r.regimes[0];
        assert_eq!(even.band_law, BandLaw::InverseQuadratic);
        let w = predicted_band_width(&r, 10).unwrap()[0].band;
        assert!((w - 4.0 / (PI * PI) / 100.0).abs() < 1e-15);
        assert_eq!(r.regimes[1].band_law, BandLaw::InverseLinear);
    }

    #[test]
    fn m3_cascade_branches() {
        let zero = [real(0.0); 3];
        let law = |s| classify(&m3(s, zero)).regimes[1].band_law;
        assert_eq!(law([0.4, 0.5, 0.7, 1.0, 0.0, 0.0]), BandLaw::InverseCubic);
        assert_eq!(law([0.4, 0.5, 0.7, 1.0, 0.0, 0.3]), BandLaw::InverseQuadratic);
        assert_eq!(law([0.4, 0.0, 0.7, 1.0, 0.0, 0.3]), BandLaw::Flat);
        assert_eq!(law([0.4, 0.5, 0.0, 1.0, 0.0, 0.0]), BandLaw::CollapsedPoint);
        // s13 = 0, s23 != 0 maps onto the s23 = 0 branch by swapping edges
        assert_eq!(law([0.4, 0.5, 0.0, 1.0, 0.7, 0.3]), BandLaw::InverseQuadratic);
        let t = [real(0.7), real(0.0), real(0.0)];
        assert_eq!(classify(&m3([0.4, 0.5, 0.7, 1.0, 0.2, 0.3], t)).regimes[1].band_law, BandLaw::Constant);
    }

    #[test]
    fn scale_invariant_m3_half_line() {
        let t = [real(0.6), C64::new(0.0, 0.6), real(-1.0)];
        let r = classify(&m3([0.0; 6], t));
        assert_eq!(r.regimes.len(), 1);
        assert_eq!(r.regimes[0].band_law, BandLaw::FullLine);
    }

    #[test]
    fn robin_matches_asymptote() {
        let n = 60.0;
        let e = robin_eigenvalues(1.0, 1.0, 1.0, ((n + 0.5) * PI).powi(2));
        let k = e.last().unwrap().sqrt();
        let d = (k - n * PI) * n * PI;
        assert!((d - 2.0).abs() < 0.1, "{d}");
        assert!(e.iter().all(|&x| x > 0.0));
        let neg = robin_eigenvalues(-1.0, -1.0, 1.0, 1.0);
        assert!(neg[0] < 0.0);
    }

    #[test]
    fn every_coupling_gets_a_regime() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let m = rng.gen_range(0..=4);
            let c = StCoupling::random(m, rng.gen_range(0.5..2.0), &mut rng).unwrap();
            let r = classify(&c);
            assert!(!r.regimes.is_empty());
            for g in &r.regimes {
                assert!(g.constants.iter().all(|k| k.value.is_finite()));
                assert!(!g.constants.is_empty() || matches!(g.band_law, BandLaw::FullLine | BandLaw::Flat | BandLaw::Unclassified));
            }
        }
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..10).map(|n| (n as f64, 3.0 * (n as f64).powi(-2))).collect();
        assert!((log_log_slope(&pts).unwrap() + 2.0).abs() < 1e-12);
    }
}
