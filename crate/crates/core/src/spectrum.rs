//! Band structure of the lattice from sign tests on the quasimomentum extrema.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{st_to_ab, AbCoupling, StCoupling};
use crate::fiber::{fiber_matrix, FiberPoint, FiberSlice, TrigForm, REALNESS_TOL};
use crate::linalg::C64;
use crate::roots::{golden_max, golden_min};

/// Upper bound on the number of negative bands.
pub const NEGATIVE_BAND_LIMIT: usize = 4;
/// Smallest `κ` probed for negative energies, in units of `1/a`.
pub const KAPPA_FLOOR: f64 = 1e-3;

// generic quasimomenta for the flatness probe
const FLAT_PROBES: [(f64, f64); 5] = [
    (0.754_877_666, 1.324_717_957),
    (-2.103_803_402, 0.414_213_562),
    (2.902_113_032, -1.732_050_808),
    (-0.577_215_665, -2.718_281_828),
    (1.618_033_989, 2.236_067_977),
];

#[derive(Debug, Error, PartialEq)]
pub enum SpectrumError {
    #[error("invalid scan configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub k_min: f64,
    pub k_max: f64,
    pub k_steps: usize,
    /// Points per quasimomentum axis for the initial extremum search.
    pub theta_grid: usize,
    pub edge_tol: f64,
    /// Threshold on the relative smallest singular value that marks a
    /// quasimomentum-independent root.
    pub flat_tol: f64,
    /// `None` picks a bound from the size of `S`.
    pub negative_kappa_max: Option<f64>,
    pub force_abs_squared: bool,
    pub include_negative: bool,
    /// Cap for the automatic doubling of `theta_grid`.
    pub max_theta_grid: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            k_min: 0.05,
            k_max: 40.0 * PI,
            k_steps: 4000,
            theta_grid: 32,
            edge_tol: 1e-12,
            flat_tol: 1e-12,
            negative_kappa_max: None,
            force_abs_squared: false,
            include_negative: true,
            max_theta_grid: 256,
        }
    }
}

impl ScanConfig {
    /// Default range `[0.05, 40π/a]` with about a hundred points per `π/a`.
    pub fn for_edge_length(a: f64) -> Self {
        Self::for_range(0.05, 40.0 * PI / a, a)
    }

    pub fn for_range(k_min: f64, k_max: f64, a: f64) -> Self {
        let steps = (100.0 * (k_max - k_min) * a / PI).ceil().max(2.0) as usize;
        ScanConfig {
            k_min,
            k_max,
            k_steps: steps,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        let bad = |s: &str| Err(SpectrumError::InvalidConfig(s.to_string()));
        if !(self.k_min >= 0.0) || !self.k_min.is_finite() {
            return bad("k_min must be a finite non-negative number");
        }
        if !(self.k_max > self.k_min) || !self.k_max.is_finite() {
            return bad("k_max must be finite and exceed k_min");
        }
        if self.k_steps < 2 {
            return bad("k_steps must be at least 2");
        }
        if self.theta_grid < 8 {
            return bad("theta_grid must be at least 8");
        }
        if !(self.edge_tol > 0.0) {
            return bad("edge_tol must be positive");
        }
        if !(self.flat_tol > 0.0) {
            return bad("flat_tol must be positive");
        }
        if let Some(k) = self.negative_kappa_max {
            if !(k > 0.0) || !k.is_finite() {
                return bad("negative_kappa_max must be positive");
            }
        }
        Ok(())
    }

    /// Largest `κ` scanned for negative energies.
    pub fn kappa_max(&self, c: &StCoupling) -> f64 {
        self.negative_kappa_max.unwrap_or_else(|| {
            let a = c.edge_length();
            let s = c.s_frobenius();
            2.0 * (s + (2.0 * s / a).sqrt()) + 1.0 / a
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandKind {
    Even,
    Odd,
    Flat,
    Negative,
    Unclassified,
}

impl BandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BandKind::Even => "even",
            BandKind::Odd => "odd",
            BandKind::Flat => "flat",
            BandKind::Negative => "negative",
            BandKind::Unclassified => "unclassified",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "even" => BandKind::Even,
            "odd" => BandKind::Odd,
            "flat" => BandKind::Flat,
            "negative" => BandKind::Negative,
            "unclassified" => BandKind::Unclassified,
            _ => return None,
        })
    }
}

/// A spectral band `[e_lo, e_hi]` in energy.
///
/// `index_hint` is `n` for even bands near `(nπ/a)²` and for odd bands near
/// `((n+½)π/a)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub e_lo: f64,
    pub e_hi: f64,
    pub kind: BandKind,
    pub index_hint: Option<i64>,
}

impl Band {
    pub fn width(&self) -> f64 {
        self.e_hi - self.e_lo
    }

    pub fn contains(&self, e: f64) -> bool {
        self.e_lo <= e && e <= self.e_hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub e_lo: f64,
    pub e_hi: f64,
}

impl Gap {
    pub fn width(&self) -> f64 {
        self.e_hi - self.e_lo
    }
}

/// Energy of a quasimomentum-independent root. Embedded ones lie inside a band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatEigenvalue {
    pub energy: f64,
    pub embedded: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealnessMode {
    RealPart,
    AbsSquared,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanDiagnostics {
    pub grid_points: usize,
    pub edge_bisections: usize,
    pub extremum_refinements: usize,
    pub flat_candidates: usize,
    pub theta_grid_used: usize,
    pub theta_refinements: usize,
    pub max_realness_defect: f64,
    pub negative_band_count: usize,
    pub kappa_max: f64,
    pub messages: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub bands: Vec<Band>,
    /// Member intervals before adjacent pieces were merged.
    pub raw_bands: Vec<Band>,
    /// Complement of the positive bands in `[k_min², k_max²]`.
    pub gaps: Vec<Gap>,
    pub flat_eigenvalues: Vec<FlatEigenvalue>,
    pub realness_mode: RealnessMode,
    pub diagnostics: ScanDiagnostics,
}

impl SpectrumReport {
    pub fn positive_bands(&self) -> impl Iterator<Item = &Band> {
        self.bands.iter().filter(|b| b.e_hi > 0.0 || b.kind != BandKind::Negative && b.e_lo >= 0.0)
    }

    pub fn negative_bands(&self) -> impl Iterator<Item = &Band> {
        self.bands.iter().filter(|b| b.e_lo < 0.0)
    }

    pub fn contains(&self, e: f64) -> bool {
        self.bands.iter().any(|b| b.contains(e))
    }
}

/// Min and max of the real dispersion over the torus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusExtrema {
    pub f_min: f64,
    pub f_max: f64,
    pub argmin: (f64, f64),
    pub argmax: (f64, f64),
    /// Rounding floor of the determinant at this momentum.
    pub noise: f64,
}

impl TorusExtrema {
    /// `f_min ≤ 0 ≤ f_max` up to the rounding floor.
    pub fn is_member(&self) -> bool {
        self.f_min - self.noise <= 0.0 && self.f_max + self.noise >= 0.0
    }
}

pub fn torus_extrema_ab(c: &AbCoupling, k: C64, a: f64, theta_grid: usize) -> TorusExtrema {
    let slice = FiberSlice::at(c, k, a);
    let r = slice.real.range(theta_grid);
    TorusExtrema {
        f_min: r.min,
        f_max: r.max,
        argmin: r.argmin,
        argmax: r.argmax,
        noise: slice.noise,
    }
}

/// Extrema of `Re det(AM + ikBN)` over `(θ₁, θ₂)` at real momentum `k`.
pub fn torus_extrema(c: &StCoupling, k: f64, theta_grid: usize) -> TorusExtrema {
    torus_extrema_ab(&st_to_ab(c), C64::new(k, 0.0), c.edge_length(), theta_grid)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Axis {
    Real,
    Imaginary,
}

impl Axis {
    fn momentum(self, t: f64) -> C64 {
        match self {
            Axis::Real => C64::new(t, 0.0),
            Axis::Imaginary => C64::new(0.0, t),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Sample {
    t: f64,
    g: f64,
    h: f64,
    u: f64,
    defect: f64,
}

impl Sample {
    fn member(&self) -> bool {
        self.g <= 0.0 && self.h >= 0.0
    }
}

struct Probe<'a> {
    ab: &'a AbCoupling,
    a: f64,
    theta_grid: usize,
    mode: RealnessMode,
    axis: Axis,
}

impl Probe<'_> {
    fn sample(&self, t: f64) -> Sample {
        let slice = FiberSlice::at(self.ab, self.axis.momentum(t), self.a);
        let defect = slice.realness_defect();
        match self.mode {
            RealnessMode::RealPart => {
                let r = slice.real.range(self.theta_grid);
                Sample {
                    t,
                    g: r.min - slice.noise,
                    h: r.max + slice.noise,
                    u: r.min.abs().max(r.max.abs()),
                    defect,
                }
            }
            RealnessMode::AbsSquared => {
                let v = abs_min(&slice.real, &slice.imag, self.theta_grid);
                Sample {
                    t,
                    g: v - 4.0 * slice.noise,
                    h: f64::INFINITY,
                    u: v,
                    defect,
                }
            }
        }
    }

    /// Membership without the rounding floor. Only meaningful in real-part mode.
    fn clean_member(&self, t: f64) -> bool {
        match self.mode {
            RealnessMode::RealPart => {
                let slice = FiberSlice::at(self.ab, self.axis.momentum(t), self.a);
                let r = slice.real.range(self.theta_grid);
                r.min <= 0.0 && r.max >= 0.0
            }
            RealnessMode::AbsSquared => true,
        }
    }

    /// Largest relative smallest singular value over a few fixed quasimomenta.
    fn flatness(&self, t: f64) -> f64 {
        let k = self.axis.momentum(t);
        FLAT_PROBES
            .iter()
            .map(|&(t1, t2)| {
                let sv = fiber_matrix(self.ab, &FiberPoint::new(k, t1, t2), self.a).singular_values();
                if sv[0] == 0.0 {
                    0.0
                } else {
                    sv[3] / sv[0]
                }
            })
            .fold(0.0, f64::max)
    }
}

/// `min |Re + i Im|` over the torus: grid search, then alternating golden
/// sections from the best node.
fn abs_min(re: &TrigForm, im: &TrigForm, grid_n: usize) -> f64 {
    let f = |t1: f64, t2: f64| re.eval(t1, t2).hypot(im.eval(t1, t2));
    let h = 2.0 * PI / grid_n as f64;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..grid_n {
        for j in 0..grid_n {
            let (t1, t2) = (-PI + h * i as f64, -PI + h * j as f64);
            let v = f(t1, t2);
            if v < best.0 {
                best = (v, t1, t2);
            }
        }
    }
    let (mut v, mut t1, mut t2) = best;
    for _ in 0..8 {
        let (x, _) = golden_min(|x| f(x, t2), t1 - h, t1 + h, 1e-10);
        t1 = x;
        let (y, fy) = golden_min(|y| f(t1, y), t2 - h, t2 + h, 1e-10);
        t2 = y;
        v = v.min(fy);
    }
    v
}

fn bisect_member<F: FnMut(f64) -> bool>(mut pred: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let at_lo = pred(lo);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) == at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Default)]
struct AxisScan {
    /// Member intervals along the axis parameter.
    segments: Vec<(f64, f64)>,
    flats: Vec<f64>,
    edge_bisections: usize,
    extremum_refinements: usize,
    flat_candidates: usize,
    max_defect: f64,
    grid_points: usize,
    top_member: bool,
    bottom_member: bool,
}

fn scan_axis(probe: &Probe, lo: f64, hi: f64, steps: usize, edge_tol: f64, flat_tol: f64) -> AxisScan {
    let step = (hi - lo) / steps as f64;
    let ts: Vec<f64> = (0..=steps).map(|i| if i == steps { hi } else { lo + step * i as f64 }).collect();
    let samples: Vec<Sample> = ts.par_iter().map(|&t| probe.sample(t)).collect();
    let n = samples.len();

    // events: sign changes between neighbours plus double crossings hidden
    // behind a local extremum
    let per_node: Vec<(Vec<f64>, usize, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut events = Vec::new();
            let (mut bis, mut ext) = (0, 0);
            if i + 1 < n {
                let (s0, s1) = (&samples[i], &samples[i + 1]);
                if (s0.g <= 0.0) != (s1.g <= 0.0) {
                    events.push(bisect_member(|t| probe.sample(t).g <= 0.0, s0.t, s1.t, edge_tol));
                    bis += 1;
                }
                if (s0.h >= 0.0) != (s1.h >= 0.0) {
                    events.push(bisect_member(|t| probe.sample(t).h >= 0.0, s0.t, s1.t, edge_tol));
                    bis += 1;
                }
            }
            if i > 0 && i + 1 < n {
                let (p, s, q) = (&samples[i - 1], &samples[i], &samples[i + 1]);
                let extremal = |f: fn(&Sample) -> f64| {
                    let (a, b, c) = (f(p), f(s), f(q));
                    (b >= a && b >= c) || (b <= a && b <= c)
                };
                if extremal(|x| x.g) || extremal(|x| x.h) {
                    // a crossing pair of g or h hidden between the nodes
                    let same = |pred: fn(&Sample) -> bool| pred(p) == pred(s) && pred(s) == pred(q);
                    let g_in = |x: &Sample| x.g <= 0.0;
                    let h_in = |x: &Sample| x.h >= 0.0;
                    let mut hunt = |value: &(dyn Fn(f64) -> f64 + Sync), maximise: bool, inside: &(dyn Fn(f64) -> bool + Sync)| {
                        ext += 1;
                        let sign = if maximise { 1.0 } else { -1.0 };
                        let (tm, _) = golden_max(|t| sign * value(t), p.t, q.t, edge_tol);
                        if inside(tm) != inside(s.t) {
                            events.push(bisect_member(|t| inside(t), p.t, tm, edge_tol));
                            events.push(bisect_member(|t| inside(t), tm, q.t, edge_tol));
                            bis += 2;
                        }
                    };
                    if same(g_in) && s.g.is_finite() {
                        let g = |t: f64| probe.sample(t).g;
                        let inside = |t: f64| probe.sample(t).g <= 0.0;
                        hunt(&g, s.g <= 0.0, &inside);
                    }
                    if same(h_in) && s.h.is_finite() {
                        let h = |t: f64| probe.sample(t).h;
                        let inside = |t: f64| probe.sample(t).h >= 0.0;
                        hunt(&h, s.h < 0.0, &inside);
                    }
                }
            }
            (events, bis, ext)
        })
        .collect();

    let mut out = AxisScan {
        grid_points: n,
        max_defect: samples.iter().map(|s| s.defect).fold(0.0, f64::max),
        top_member: samples[n - 1].member(),
        bottom_member: samples[0].member(),
        ..Default::default()
    };
    let mut events: Vec<f64> = Vec::new();
    for (e, b, x) in per_node {
        events.extend(e);
        out.edge_bisections += b;
        out.extremum_refinements += x;
    }
    events.retain(|t| *t > lo && *t < hi);
    events.sort_by(f64::total_cmp);

    // walk the grid, splitting intervals at events and testing midpoints
    let mut ev = events.iter().peekable();
    let mut current: Option<(f64, f64)> = None;
    let push = |seg: (f64, f64), out: &mut AxisScan| {
        if let Some(last) = out.segments.last_mut() {
            if seg.0 <= last.1 {
                last.1 = last.1.max(seg.1);
                return;
            }
        }
        out.segments.push(seg);
    };
    for i in 0..n - 1 {
        let (t0, t1) = (samples[i].t, samples[i + 1].t);
        let mut cuts = vec![t0];
        while let Some(&&e) = ev.peek() {
            if e < t1 {
                if e > *cuts.last().unwrap() {
                    cuts.push(e);
                }
                ev.next();
            } else {
                break;
            }
        }
        cuts.push(t1);
        for w in cuts.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let member = if cuts.len() == 2 {
                samples[i].member() && samples[i + 1].member()
                    || (samples[i].member() || samples[i + 1].member()) && probe.sample(0.5 * (x0 + x1)).member()
            } else {
                probe.sample(0.5 * (x0 + x1)).member()
            };
            if member {
                current = Some(match current {
                    Some((s, _)) => (s, x1),
                    None => (x0, x1),
                });
            } else if let Some(seg) = current.take() {
                push(seg, &mut out);
            }
        }
    }
    if let Some(seg) = current.take() {
        push(seg, &mut out);
    }

    // flat roots: sharp local minima of max(|f_min|, |f_max|) at which the
    // fiber matrix is singular for every probe quasimomentum
    let candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| {
            let u = samples[i].u;
            if !(u <= samples[i - 1].u && u <= samples[i + 1].u) {
                return false;
            }
            let (a, b) = (i.saturating_sub(8), (i + 8).min(n - 1));
            let mut window: Vec<f64> = samples[a..=b].iter().map(|s| s.u).collect();
            window.sort_by(f64::total_cmp);
            u <= 0.5 * window[window.len() / 2]
        })
        .collect();
    out.flat_candidates = candidates.len();
    let found: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|&i| {
            let (p, q) = (samples[i - 1].t, samples[i + 1].t);
            let (t, phi) = golden_min(|t| probe.flatness(t), p, q, 1e-15 * q.abs().max(1.0));
            (phi < flat_tol).then_some(t)
        })
        .collect();
    for t in found.into_iter().flatten() {
        if out.flats.last().is_none_or(|&l| (t - l).abs() > 1e3 * edge_tol) {
            out.flats.push(t);
        }
    }
    out
}

fn kind_for(k_lo: f64, k_hi: f64, a: f64) -> (BandKind, Option<i64>) {
    let (x0, x1) = (k_lo * a / PI, k_hi * a / PI);
    if x1 - x0 > 1.0 {
        return (BandKind::Unclassified, None);
    }
    let x = 0.5 * (x0 + x1);
    let frac = x - x.floor();
    if !(0.25..=0.75).contains(&frac) {
        (BandKind::Even, Some(x.round() as i64))
    } else {
        (BandKind::Odd, Some(x.floor() as i64))
    }
}

struct AxisBands {
    bands: Vec<Band>,
    raw: Vec<Band>,
    flats: Vec<FlatEigenvalue>,
    scan: AxisScan,
}

// quadratic tangencies at flat roots smear edges by about the square root of
// the noise floor
fn narrow(t: f64, edge_tol: f64) -> f64 {
    (1e3 * edge_tol).max(1e-5 * t.abs().max(1.0))
}

// a segment edge beyond a flat root is a noise tail when the stretch between
// them holds no clean members
fn trim_noise_tails(segments: &mut [(f64, f64)], flats: &[f64], probe: &Probe, edge_tol: f64) {
    let tail = |t: f64, e: f64| {
        let d = (e - t).abs();
        d > narrow(t, edge_tol)
            && d <= 1e-3 * t.abs().max(1.0)
            && [0.25, 0.5, 0.75].iter().all(|f| !probe.clean_member(t + f * (e - t)))
    };
    for &t in flats {
        for s in segments.iter_mut().filter(|s| s.0 <= t && t <= s.1) {
            if tail(t, s.1) {
                s.1 = t;
            }
            if tail(t, s.0) {
                s.0 = t;
            }
        }
    }
}

// pull each edge inwards onto the noise-free crossing, if one is close by
fn sharpen_edges(segments: &mut [(f64, f64)], flats: &[f64], probe: &Probe, edge_tol: f64) {
    if probe.mode != RealnessMode::RealPart {
        return;
    }
    let on_flat = |e: f64| flats.iter().any(|&t| (e - t).abs() <= 10.0 * edge_tol * t.abs().max(1.0));
    let sharpen = |edge: f64, inner: f64| -> f64 {
        if on_flat(edge) || probe.clean_member(edge) {
            return edge;
        }
        let reach = (0.5 * (inner - edge).abs()).min(1e-3 * edge.abs().max(1.0));
        let dir = (inner - edge).signum();
        let mut d = edge_tol.max(1e-12 * edge.abs());
        while d <= reach {
            let x = edge + dir * d;
            if probe.clean_member(x) {
                let (lo, hi) = if dir > 0.0 { (edge, x) } else { (x, edge) };
                return bisect_member(|t| probe.clean_member(t), lo, hi, edge_tol);
            }
            d *= 2.0;
        }
        edge
    };
    for s in segments.iter_mut() {
        if s.1 > s.0 {
            let (lo, hi) = (sharpen(s.0, s.1), sharpen(s.1, s.0));
            if lo < hi {
                *s = (lo, hi);
            }
        }
    }
}

fn assemble(mut scan: AxisScan, probe: &Probe, edge_tol: f64) -> AxisBands {
    let (axis, a) = (probe.axis, probe.a);
    trim_noise_tails(&mut scan.segments, &scan.flats, probe, edge_tol);
    sharpen_edges(&mut scan.segments, &scan.flats, probe, edge_tol);
    let energy = |t: f64| match axis {
        Axis::Real => t * t,
        Axis::Imaginary => -t * t,
    };
    let interval = |(t0, t1): (f64, f64)| match axis {
        Axis::Real => (energy(t0), energy(t1)),
        Axis::Imaginary => (energy(t1), energy(t0)),
    };
    let kind = |(t0, t1): (f64, f64)| match axis {
        Axis::Real => kind_for(t0, t1, a),
        Axis::Imaginary => (BandKind::Negative, None),
    };
    let flat_band = |t: f64| Band {
        e_lo: energy(t),
        e_hi: energy(t),
        kind: BandKind::Flat,
        index_hint: match axis {
            Axis::Real => kind_for(t, t, a).1,
            Axis::Imaginary => None,
        },
    };
    let raw: Vec<Band> = scan
        .segments
        .iter()
        .map(|&s| {
            let (e_lo, e_hi) = interval(s);
            let (kind, index_hint) = kind(s);
            Band {
                e_lo,
                e_hi,
                kind,
                index_hint,
            }
        })
        .collect();

    let mut segments = scan.segments.clone();
    let mut flats = Vec::new();
    let mut flat_bands = Vec::new();
    for &t in &scan.flats {
        let tol = 10.0 * edge_tol * t.abs().max(1.0);
        match segments.iter().position(|&(s0, s1)| s0 - tol <= t && t <= s1 + tol) {
            Some(i) if segments[i].1 - segments[i].0 <= narrow(t, edge_tol) => {
                segments.remove(i);
                flats.push(FlatEigenvalue {
                    energy: energy(t),
                    embedded: false,
                });
                flat_bands.push(flat_band(t));
            }
            Some(_) => flats.push(FlatEigenvalue {
                energy: energy(t),
                embedded: true,
            }),
            None => {
                flats.push(FlatEigenvalue {
                    energy: energy(t),
                    embedded: false,
                });
                flat_bands.push(flat_band(t));
            }
        }
    }
    for &t in &scan.flats {
        let d = narrow(t, edge_tol);
        for s in segments.iter_mut() {
            if (s.1 - t).abs() <= d && s.0 < t {
                s.1 = t;
            }
            if (s.0 - t).abs() <= d && s.1 > t {
                s.0 = t;
            }
        }
    }
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for s in segments {
        match merged.last_mut() {
            Some(last) if s.0 - last.1 <= edge_tol * s.0.abs().max(1.0) => last.1 = last.1.max(s.1),
            _ => merged.push(s),
        }
    }
    let mut bands: Vec<Band> = merged
        .into_iter()
        .map(|s| {
            let (e_lo, e_hi) = interval(s);
            let (kind, index_hint) = kind(s);
            Band {
                e_lo,
                e_hi,
                kind,
                index_hint,
            }
        })
        .chain(flat_bands)
        .collect();
    bands.sort_by(|x, y| x.e_lo.total_cmp(&y.e_lo));
    flats.sort_by(|x, y| x.energy.total_cmp(&y.energy));
    AxisBands { bands, raw, flats, scan }
}

fn same_bands(x: &[Band], y: &[Band], tol: f64) -> bool {
    x.len() == y.len()
        && x.iter().zip(y).all(|(p, q)| {
            p.kind == q.kind
                && (p.e_lo - q.e_lo).abs() <= tol * p.e_lo.abs().max(1.0)
                && (p.e_hi - q.e_hi).abs() <= tol * p.e_hi.abs().max(1.0)
        })
}

fn positive_scan(ab: &AbCoupling, a: f64, cfg: &ScanConfig, mode: RealnessMode, diag: &mut ScanDiagnostics) -> AxisBands {
    let mut grid = cfg.theta_grid;
    let run = |grid: usize| {
        let probe = Probe {
            ab,
            a,
            theta_grid: grid,
            mode,
            axis: Axis::Real,
        };
        let scan = scan_axis(&probe, cfg.k_min, cfg.k_max, cfg.k_steps, cfg.edge_tol, cfg.flat_tol);
        assemble(scan, &probe, cfg.edge_tol)
    };
    let mut result = run(grid);
    // edges move by O(edge_tol) between grids; energies by twice that times k
    let tol = 20.0 * cfg.edge_tol * cfg.k_max.max(1.0);
    while 2 * grid <= cfg.max_theta_grid.max(cfg.theta_grid) {
        let refined = run(2 * grid);
        grid *= 2;
        diag.theta_refinements += 1;
        let stable = same_bands(&result.bands, &refined.bands, tol);
        result = refined;
        if stable {
            break;
        }
    }
    diag.theta_grid_used = grid;
    result
}

fn record(diag: &mut ScanDiagnostics, scan: &AxisScan) {
    diag.grid_points += scan.grid_points;
    diag.edge_bisections += scan.edge_bisections;
    diag.extremum_refinements += scan.extremum_refinements;
    diag.flat_candidates += scan.flat_candidates;
    diag.max_realness_defect = diag.max_realness_defect.max(scan.max_defect);
}

fn negative_scan(
    ab: &AbCoupling,
    c: &StCoupling,
    cfg: &ScanConfig,
    mode: RealnessMode,
    diag: &mut ScanDiagnostics,
) -> AxisBands {
    let a = c.edge_length();
    let kappa_max = cfg.kappa_max(c);
    let lo = KAPPA_FLOOR / a;
    let steps = ((200.0 * (kappa_max - lo) * a).ceil() as usize).max(400);
    let probe = Probe {
        ab,
        a,
        theta_grid: cfg.theta_grid,
        mode,
        axis: Axis::Imaginary,
    };
    let scan = scan_axis(&probe, lo, kappa_max, steps, cfg.edge_tol, cfg.flat_tol);
    let top = scan.top_member;
    let bottom = scan.bottom_member;
    let mut out = assemble(scan, &probe, cfg.edge_tol);
    // a band reaching the smallest κ continues up to zero energy
    if bottom {
        if let Some(b) = out.bands.iter_mut().filter(|b| b.kind == BandKind::Negative).last() {
            b.e_hi = 0.0;
        }
    }
    diag.kappa_max = kappa_max;
    if top {
        diag.messages.push(format!(
            "negative spectrum reaches the scan limit -{:.6e}; increase negative_kappa_max",
            kappa_max * kappa_max
        ));
    }
    out
}

fn gaps_between(bands: &[Band], e_min: f64, e_max: f64) -> Vec<Gap> {
    let mut gaps = Vec::new();
    let mut cursor = e_min;
    for b in bands.iter().filter(|b| b.e_hi >= e_min && b.e_lo <= e_max) {
        if b.e_lo > cursor {
            gaps.push(Gap {
                e_lo: cursor,
                e_hi: b.e_lo,
            });
        }
        cursor = cursor.max(b.e_hi);
    }
    if cursor < e_max {
        gaps.push(Gap {
            e_lo: cursor,
            e_hi: e_max,
        });
    }
    gaps
}

fn scan_with_mode(c: &StCoupling, cfg: &ScanConfig, mode: RealnessMode) -> SpectrumReport {
    let ab = st_to_ab(c);
    let a = c.edge_length();
    let mut diag = ScanDiagnostics::default();
    let pos = positive_scan(&ab, a, cfg, mode, &mut diag);
    record(&mut diag, &pos.scan);
    let mut bands = pos.bands;
    let mut raw = pos.raw;
    let mut flats = pos.flats;
    if cfg.include_negative {
        let neg = negative_scan(&ab, c, cfg, mode, &mut diag);
        record(&mut diag, &neg.scan);
        diag.negative_band_count = neg.bands.len();
        bands.extend(neg.bands);
        raw.extend(neg.raw);
        flats.extend(neg.flats);
    }
    bands.sort_by(|x, y| x.e_lo.total_cmp(&y.e_lo));
    raw.sort_by(|x, y| x.e_lo.total_cmp(&y.e_lo));
    flats.sort_by(|x, y| x.energy.total_cmp(&y.energy));
    if diag.negative_band_count > NEGATIVE_BAND_LIMIT {
        diag.messages.push(format!(
            "found {} negative bands, more than the bound of {NEGATIVE_BAND_LIMIT}",
            diag.negative_band_count
        ));
    }
    let positive: Vec<Band> = bands.iter().copied().filter(|b| b.e_hi >= 0.0).collect();
    let gaps = gaps_between(&positive, cfg.k_min * cfg.k_min, cfg.k_max * cfg.k_max);
    SpectrumReport {
        bands,
        raw_bands: raw,
        gaps,
        flat_eigenvalues: flats,
        realness_mode: mode,
        diagnostics: diag,
    }
}

/// Bands, gaps, flat bands and negative bands of the lattice with coupling `c`.
pub fn scan_bands(c: &StCoupling, cfg: &ScanConfig) -> Result<SpectrumReport, SpectrumError> {
    cfg.validate()?;
    if cfg.force_abs_squared {
        let mut r = scan_with_mode(c, cfg, RealnessMode::AbsSquared);
        r.diagnostics.messages.push("abs-squared mode requested".into());
        return Ok(r);
    }
    let report = scan_with_mode(c, cfg, RealnessMode::RealPart);
    if report.diagnostics.max_realness_defect > REALNESS_TOL {
        let defect = report.diagnostics.max_realness_defect;
        let mut r = scan_with_mode(c, cfg, RealnessMode::AbsSquared);
        r.diagnostics
            .messages
            .push(format!("dispersion not real (defect {defect:.3e}); switched to abs-squared mode"));
        return Ok(r);
    }
    Ok(report)
}

/// Negative-energy bands `E = −κ²`, `κ ∈ [10⁻³/a, κ_max]`.
pub fn negative_spectrum(c: &StCoupling, cfg: &ScanConfig) -> Result<(Vec<Band>, ScanDiagnostics), SpectrumError> {
    cfg.validate()?;
    let ab = st_to_ab(c);
    let mut diag = ScanDiagnostics::default();
    let neg = negative_scan(&ab, c, cfg, RealnessMode::RealPart, &mut diag);
    record(&mut diag, &neg.scan);
    diag.negative_band_count = neg.bands.len();
    if neg.bands.len() > NEGATIVE_BAND_LIMIT {
        diag.messages.push(format!(
            "found {} negative bands, more than the bound of {NEGATIVE_BAND_LIMIT}",
            neg.bands.len()
        ));
    }
    Ok((neg.bands, diag))
}

/// Energies of quasimomentum-independent roots in the scanned range.
pub fn flat_band_eigenvalues(c: &StCoupling, cfg: &ScanConfig) -> Result<Vec<FlatEigenvalue>, SpectrumError> {
    Ok(scan_bands(c, cfg)?.flat_eigenvalues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{preset, CouplingClass};
    use crate::linalg::ZERO;

    fn cfg(k_min: f64, k_max: f64) -> ScanConfig {
        ScanConfig {
            include_negative: false,
            ..ScanConfig::for_range(k_min, k_max, 1.0)
        }
    }

    #[test]
    fn config_validation() {
        assert!(ScanConfig::default().validate().is_ok());
        let bad = ScanConfig {
            theta_grid: 4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScanConfig {
            k_max: 0.01,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dirichlet_extrema_are_theta_free() {
        let c = StCoupling::dirichlet(1.0).unwrap();
        for k in [0.3, 1.1, 2.7] {
            let e = torus_extrema(&c, k, 32);
            assert!((e.f_max - e.f_min).abs() < 1e-12);
            let expected = -4.0 * f64::sin(k).powi(2);
            assert!((e.f_min.abs() - expected.abs()).abs() < 1e-12, "{} vs {}", e.f_min, expected);
        }
    }

    #[test]
    fn kirchhoff_quarter_point_is_member() {
        let c = preset(&CouplingClass::Kirchhoff, 1.0).unwrap();
        assert!(torus_extrema(&c, PI / 2.0, 32).is_member());
    }

    #[test]
    fn dirichlet_scan_gives_flat_bands() {
        let c = StCoupling::dirichlet(1.0).unwrap();
        let r = scan_bands(&c, &cfg(0.1, 10.0)).unwrap();
        assert_eq!(r.bands.len(), 3, "{:?}", r.bands);
        for (n, b) in r.bands.iter().enumerate() {
            let e = ((n + 1) as f64 * PI).powi(2);
            assert_eq!(b.kind, BandKind::Flat);
            assert!((b.e_lo - e).abs() < 1e-9 * e);
        }
    }

    #[test]
    fn theta_free_condition_gives_only_flat_bands() {
        // t₁ = t₃ = 0: the condition factorises without θ
        let t = vec![ZERO, C64::new(1.0, 0.0), ZERO];
        let c = StCoupling::new(1, vec![C64::new(-1.0, 0.0)], t, 1.0).unwrap();
        let r = scan_bands(&c, &cfg(0.5, 12.0)).unwrap();
        assert!(!r.bands.is_empty());
        assert!(r.bands.iter().all(|b| b.kind == BandKind::Flat), "{:?}", r.bands);
    }

    #[test]
    fn delta_gaps_sit_above_lattice_points() {
        let c = preset(&CouplingClass::Delta(2.0), 1.0).unwrap();
        let r = scan_bands(&c, &cfg(0.05, 16.0)).unwrap();
        for n in 2..5 {
            let e = (n as f64 * PI).powi(2);
            let gap = r.gaps.iter().find(|g| (g.e_lo - e).abs() < 1e-6).unwrap_or_else(|| panic!("{:?}", r.gaps));
            assert!((gap.width() - 2.0).abs() < 0.5, "{gap:?}");
        }
    }

    #[test]
    fn kirchhoff_embedded_flats() {
        let c = preset(&CouplingClass::Kirchhoff, 1.0).unwrap();
        let r = scan_bands(&c, &cfg(0.05, 10.0)).unwrap();
        assert_eq!(r.bands.len(), 1);
        assert!(r.flat_eigenvalues.iter().all(|f| f.embedded));
        assert!(r.flat_eigenvalues.iter().any(|f| (f.energy - PI * PI).abs() < 1e-8));
    }

    #[test]
    fn attractive_delta_has_negative_band() {
        let c = preset(&CouplingClass::Delta(-5.0), 1.0).unwrap();
        let (bands, diag) = negative_spectrum(&c, &ScanConfig::default()).unwrap();
        assert!(!bands.is_empty() && bands.len() <= NEGATIVE_BAND_LIMIT, "{bands:?} {diag:?}");
        let c = preset(&CouplingClass::Kirchhoff, 1.0).unwrap();
        assert!(negative_spectrum(&c, &ScanConfig::default()).unwrap().0.is_empty());
    }

    #[test]
    fn refining_theta_grid_only_widens() {
        let c = StCoupling::random(3, 1.0, &mut rand::thread_rng()).unwrap();
        for k in [0.7, 3.3, 9.1] {
            let coarse = torus_extrema(&c, k, 8);
            let fine = torus_extrema(&c, k, 64);
            let scale = 1e-12 * (1.0 + coarse.f_max.abs() + coarse.f_min.abs());
            assert!(fine.f_min <= coarse.f_min + scale && fine.f_max >= coarse.f_max - scale);
        }
    }
}
