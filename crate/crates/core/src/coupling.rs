//! Vertex couplings: the ST-form, the raw `(A, B)` pair, named presets.
//!
//! Edge slots follow the unit-cell convention: slot 0 and 1 are the left and
//! right horizontal edges (ψ₁, ψ₂), slots 2 and 3 the lower and upper
//! vertical edges (φ₁, φ₂).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{block_rank, Mat4, C64, I, ONE, ZERO};

/// Relative singular-value cutoff used for every numerical rank decision.
pub const RANK_TOL: f64 = 1e-10;
/// Absolute entrywise tolerance on the Hermiticity of `A B*`.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Tolerance used when pattern-matching stored entries against preset shapes.
pub const MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("m out of range: {0} (expected 0..=4)")]
    RankOutOfRange(usize),
    #[error("{what}: expected {expected} entries, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("diagonal entry S[{0}][{0}] has nonzero imaginary part")]
    NonRealDiagonal(usize),
    #[error("edge length must be positive and finite, got {0}")]
    InvalidEdgeLength(f64),
    #[error("not a permutation of the four edge slots: {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("coupling strength must be nonzero for {0}")]
    ZeroStrength(&'static str),
    #[error("preset {tag} takes {expected} parameter(s), got {got}")]
    Arity {
        tag: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("preset {0} cannot be built from parameters alone")]
    NotConstructible(&'static str),
    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("matrix is not an orthogonal projector (defect {0:e})")]
    NotProjector(f64),
    #[error("L must be Hermitian and act inside the range of Q (defect {0:e})")]
    InvalidProjectionPart(f64),
}

/// Canonical coupling description: rank `m`, Hermitian `S` (m×m), `T` (m×(4−m)),
/// edge length `a`.
///
/// Only the upper triangle of `S` is stored (row-major, diagonal included), so
/// Hermiticity holds by construction. Diagonal entries must be exactly real.
#[derive(Clone, Debug, PartialEq)]
pub struct StCoupling {
    rank: usize,
    s_upper: Vec<C64>,
    t: Vec<C64>,
    edge_length: f64,
}

pub fn upper_len(m: usize) -> usize {
    m * (m + 1) / 2
}

impl StCoupling {
    pub fn new(rank: usize, s_upper: Vec<C64>, t: Vec<C64>, edge_length: f64) -> Result<Self, CouplingError> {
        if rank > 4 {
            return Err(CouplingError::RankOutOfRange(rank));
        }
        if !(edge_length.is_finite() && edge_length > 0.0) {
            return Err(CouplingError::InvalidEdgeLength(edge_length));
        }
        if s_upper.len() != upper_len(rank) {
            return Err(CouplingError::ShapeMismatch {
                what: "S upper triangle",
                expected: upper_len(rank),
                got: s_upper.len(),
            });
        }
        if t.len() != rank * (4 - rank) {
            return Err(CouplingError::ShapeMismatch {
                what: "T",
                expected: rank * (4 - rank),
                got: t.len(),
            });
        }
        let c = StCoupling {
            rank,
            s_upper,
            t,
            edge_length,
        };
        for i in 0..rank {
            if c.s_upper[packed(rank, i, i)].im != 0.0 {
                return Err(CouplingError::NonRealDiagonal(i));
            }
        }
        Ok(c)
    }

    /// Builds the coupling from a full Hermitian `S` given row-major; only the
    /// upper triangle is read.
    pub fn from_full(rank: usize, s_full: &[C64], t: Vec<C64>, edge_length: f64) -> Result<Self, CouplingError> {
        if s_full.len() != rank * rank {
            return Err(CouplingError::ShapeMismatch {
                what: "S",
                expected: rank * rank,
                got: s_full.len(),
            });
        }
        let mut upper = Vec::with_capacity(upper_len(rank));
        for i in 0..rank {
            for j in i..rank {
                upper.push(s_full[i * rank + j]);
            }
        }
        Self::new(rank, upper, t, edge_length)
    }

    pub fn dirichlet(edge_length: f64) -> Result<Self, CouplingError> {
        Self::new(0, vec![], vec![], edge_length)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn edge_length(&self) -> f64 {
        self.edge_length
    }

    pub fn s_upper(&self) -> &[C64] {
        &self.s_upper
    }

    pub fn t_entries(&self) -> &[C64] {
        &self.t
    }

    /// `S[i][j]`, zero-based.
    pub fn s(&self, i: usize, j: usize) -> C64 {
        if i <= j {
            self.s_upper[packed(self.rank, i, j)]
        } else {
            self.s_upper[packed(self.rank, j, i)].conj()
        }
    }

    /// Real diagonal entry `S[i][i]`.
    pub fn s_diag(&self, i: usize) -> f64 {
        self.s_upper[packed(self.rank, i, i)].re
    }

    /// `T[i][j]`, zero-based, `i < m`, `j < 4 - m`.
    pub fn t(&self, i: usize, j: usize) -> C64 {
        self.t[i * (4 - self.rank) + j]
    }

    pub fn with_edge_length(&self, edge_length: f64) -> Result<Self, CouplingError> {
        Self::new(self.rank, self.s_upper.clone(), self.t.clone(), edge_length)
    }

    pub fn s_is_zero(&self, tol: f64) -> bool {
        self.s_upper.iter().all(|z| z.norm() <= tol)
    }

    pub fn t_is_zero(&self, tol: f64) -> bool {
        self.t.iter().all(|z| z.norm() <= tol)
    }

    pub fn s_is_diagonal(&self, tol: f64) -> bool {
        (0..self.rank).all(|i| (i + 1..self.rank).all(|j| self.s(i, j).norm() <= tol))
    }

    pub fn s_frobenius(&self) -> f64 {
        (0..self.rank)
            .flat_map(|i| (0..self.rank).map(move |j| (i, j)))
            .map(|(i, j)| self.s(i, j).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn t_frobenius(&self) -> f64 {
        self.t.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Random coupling of rank `m`: Hermitian `S` and complex `T` with entries
    /// uniform in the unit disc (diagonal of `S` uniform in [−1, 1]).
    pub fn random<R: Rng + ?Sized>(m: usize, edge_length: f64, rng: &mut R) -> Result<Self, CouplingError> {
        let mut upper = Vec::with_capacity(upper_len(m));
        for i in 0..m {
            for j in i..m {
                upper.push(if i == j {
                    C64::new(rng.gen_range(-1.0..=1.0), 0.0)
                } else {
                    unit_disc(rng)
                });
            }
        }
        let t = (0..m * (4 - m)).map(|_| unit_disc(rng)).collect();
        Self::new(m, upper, t, edge_length)
    }
}

fn packed(m: usize, i: usize, j: usize) -> usize {
    i * m - i * i.saturating_sub(1) / 2 + (j - i)
}

pub(crate) fn unit_disc<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    loop {
        let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if z.norm_sqr() < 1.0 {
            return z;
        }
    }
}

/// Raw boundary-condition pair for `A Ψ(0) + B Ψ'(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbCoupling {
    pub a: Mat4,
    pub b: Mat4,
}

/// Bijection on the four edge slots; column `j` of the permuted matrices is
/// column `perm[j]` of the originals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgePermutation([usize; 4]);

impl EdgePermutation {
    pub fn new(perm: [usize; 4]) -> Result<Self, CouplingError> {
        let mut seen = [false; 4];
        for &p in &perm {
            if p >= 4 || seen[p] {
                return Err(CouplingError::InvalidPermutation(perm.to_vec()));
            }
            seen[p] = true;
        }
        Ok(EdgePermutation(perm))
    }

    pub fn identity() -> Self {
        EdgePermutation([0, 1, 2, 3])
    }

    /// Exchanges two slots.
    pub fn swap(i: usize, j: usize) -> Result<Self, CouplingError> {
        let mut p = [0, 1, 2, 3];
        if i >= 4 || j >= 4 {
            return Err(CouplingError::InvalidPermutation(vec![i, j]));
        }
        p.swap(i, j);
        Ok(EdgePermutation(p))
    }

    pub fn inverse(&self) -> Self {
        let mut inv = [0; 4];
        for (j, &p) in self.0.iter().enumerate() {
            inv[p] = j;
        }
        EdgePermutation(inv)
    }

    pub fn slots(&self) -> [usize; 4] {
        self.0
    }
}

impl AbCoupling {
    pub fn permuted(&self, perm: &EdgePermutation) -> AbCoupling {
        let mut a = Mat4::zeros();
        let mut b = Mat4::zeros();
        for (j, &src) in perm.0.iter().enumerate() {
            a.set_column(j, self.a.column(src));
            b.set_column(j, self.b.column(src));
        }
        AbCoupling { a, b }
    }

    /// `(U − I) Ψ(0) + i (U + I) Ψ'(0) = 0` for unitary `U`.
    pub fn from_unitary(u: &Mat4) -> Result<AbCoupling, CouplingError> {
        let defect = (u.adjoint() * *u + Mat4::identity().scale(-ONE)).max_abs();
        if defect > 1e-10 {
            return Err(CouplingError::NotUnitary(defect));
        }
        Ok(AbCoupling {
            a: *u + Mat4::identity().scale(-ONE),
            b: (*u + Mat4::identity()).scale(I),
        })
    }

    /// `P Ψ(0) = 0`, `Q Ψ'(0) + L Q Ψ(0) = 0` with `Q = I − P` and Hermitian
    /// `L` acting in the range of `Q`.
    pub fn from_projection(p: &Mat4, l: &Mat4) -> Result<AbCoupling, CouplingError> {
        let idem = (*p * *p + p.scale(-ONE)).max_abs();
        let herm = (p.adjoint() + p.scale(-ONE)).max_abs();
        if idem.max(herm) > 1e-10 {
            return Err(CouplingError::NotProjector(idem.max(herm)));
        }
        let q = Mat4::identity() + p.scale(-ONE);
        let l_herm = (l.adjoint() + l.scale(-ONE)).max_abs();
        let l_inside = (q * *l * q + l.scale(-ONE)).max_abs();
        if l_herm.max(l_inside) > 1e-10 {
            return Err(CouplingError::InvalidProjectionPart(l_herm.max(l_inside)));
        }
        Ok(AbCoupling {
            a: *p + *l * q,
            b: q,
        })
    }
}

/// `A = [[−S, 0], [T*, −I]]`, `B = [[I, T], [0, 0]]`.
pub fn st_to_ab(c: &StCoupling) -> AbCoupling {
    let m = c.rank();
    let mut a = Mat4::zeros();
    let mut b = Mat4::zeros();
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = -c.s(i, j);
        }
        b[(i, i)] = ONE;
        for j in 0..4 - m {
            b[(i, m + j)] = c.t(i, j);
            a[(m + j, i)] = c.t(i, j).conj();
        }
    }
    for j in m..4 {
        a[(j, j)] = -ONE;
    }
    AbCoupling { a, b }
}

pub fn st_to_ab_permuted(c: &StCoupling, perm: &EdgePermutation) -> AbCoupling {
    st_to_ab(c).permuted(perm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AbFailure {
    RankDeficient { rank: usize },
    NotHermitian { defect: f64 },
}

/// Outcome of checking the self-adjointness conditions on `(A, B)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbValidation {
    pub rank_ab: usize,
    pub hermiticity_defect: f64,
    pub rank_b: usize,
    pub failures: Vec<AbFailure>,
}

impl AbValidation {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn validate_ab(a: &Mat4, b: &Mat4) -> AbValidation {
    let rank_ab = block_rank(a, b, RANK_TOL);
    let ab_star = *a * b.adjoint();
    let hermiticity_defect = (ab_star + ab_star.adjoint().scale(-ONE)).max_abs();
    let rank_b = b.rank(RANK_TOL);
    let mut failures = Vec::new();
    if rank_ab != 4 {
        failures.push(AbFailure::RankDeficient { rank: rank_ab });
    }
    if !(hermiticity_defect <= HERMITICITY_TOL) {
        failures.push(AbFailure::NotHermitian {
            defect: hermiticity_defect,
        });
    }
    AbValidation {
        rank_ab,
        hermiticity_defect,
        rank_b,
        failures,
    }
}

/// Named coupling families.
#[derive(Clone, Debug, PartialEq)]
pub enum CouplingClass {
    Dirichlet,
    /// Continuity plus derivative sum `α ψ(0)`.
    Delta(f64),
    /// Symmetrized δ′: `m = 4`, every entry of `S` equal to `1/β`.
    DeltaPrimeS(f64),
    /// δ′ coupling: `S = (4 I − J)/β` with `J` the all-ones matrix.
    DeltaPrime(f64),
    Kirchhoff,
    /// `S = 0` with the given rank and `T` (row-major).
    ScaleInvariant { rank: usize, t: Vec<C64> },
    /// `m = 4`, diagonal `S`: every edge decouples with Robin ends.
    DiagonalDecoupled([f64; 4]),
    Generic,
}

impl CouplingClass {
    pub fn tag(&self) -> &'static str {
        match self {
            CouplingClass::Dirichlet => "dirichlet",
            CouplingClass::Delta(_) => "delta",
            CouplingClass::DeltaPrimeS(_) => "delta_prime_s",
            CouplingClass::DeltaPrime(_) => "delta_prime",
            CouplingClass::Kirchhoff => "kirchhoff",
            CouplingClass::ScaleInvariant { .. } => "scale_invariant",
            CouplingClass::DiagonalDecoupled(_) => "diagonal_decoupled",
            CouplingClass::Generic => "generic",
        }
    }

    /// Flat real parameter list (complex `T` entries as re, im pairs, preceded by the rank).
    pub fn params(&self) -> Vec<f64> {
        match self {
            CouplingClass::Dirichlet | CouplingClass::Kirchhoff | CouplingClass::Generic => vec![],
            CouplingClass::Delta(x) | CouplingClass::DeltaPrimeS(x) | CouplingClass::DeltaPrime(x) => vec![*x],
            CouplingClass::ScaleInvariant { rank, t } => {
                let mut p = vec![*rank as f64];
                p.extend(t.iter().flat_map(|z| [z.re, z.im]));
                p
            }
            CouplingClass::DiagonalDecoupled(d) => d.to_vec(),
        }
    }

    pub fn from_tag(tag: &str, params: &[f64]) -> Result<Self, CouplingError> {
        let arity = |n: usize| -> Result<(), CouplingError> {
            if params.len() == n {
                Ok(())
            } else {
                Err(CouplingError::Arity {
                    tag: tag.to_string(),
                    expected: n,
                    got: params.len(),
                })
            }
        };
        match tag.to_ascii_lowercase().as_str() {
            "dirichlet" => arity(0).map(|_| CouplingClass::Dirichlet),
            "kirchhoff" => arity(0).map(|_| CouplingClass::Kirchhoff),
            "generic" => arity(0).map(|_| CouplingClass::Generic),
            "delta" => arity(1).map(|_| CouplingClass::Delta(params[0])),
            "delta_prime_s" => arity(1).map(|_| CouplingClass::DeltaPrimeS(params[0])),
            "delta_prime" => arity(1).map(|_| CouplingClass::DeltaPrime(params[0])),
            "diagonal_decoupled" => {
                arity(4).map(|_| CouplingClass::DiagonalDecoupled([params[0], params[1], params[2], params[3]]))
            }
            "scale_invariant" => {
                let rank = params.first().copied().unwrap_or(-1.0);
                if !(rank >= 0.0 && rank <= 4.0 && rank.fract() == 0.0) {
                    return Err(CouplingError::RankOutOfRange(rank.max(0.0) as usize + 5));
                }
                let rank = rank as usize;
                arity(1 + 2 * rank * (4 - rank))?;
                let t = params[1..].chunks(2).map(|p| C64::new(p[0], p[1])).collect();
                Ok(CouplingClass::ScaleInvariant { rank, t })
            }
            _ => Err(CouplingError::UnknownPreset(tag.to_string())),
        }
    }

    /// Every preset name with its parameter meaning, for listings.
    pub fn catalogue() -> Vec<(&'static str, &'static str)> {
        vec![
            ("dirichlet", "no parameters; m = 0, edges decouple with Dirichlet ends"),
            ("kirchhoff", "no parameters; free coupling, same as delta(0)"),
            ("delta", "alpha; m = 1, T = (1, 1, 1), S = (alpha)"),
            ("delta_prime_s", "beta != 0; m = 4, all entries of S equal 1/beta"),
            ("delta_prime", "beta != 0; m = 4, S = (4 I - J)/beta"),
            ("diagonal_decoupled", "s11 s22 s33 s44; m = 4, diagonal S"),
            ("scale_invariant", "m followed by re/im pairs of T (row-major); S = 0"),
        ]
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn preset(class: &CouplingClass, edge_length: f64) -> Result<StCoupling, CouplingError> {
    match class {
        CouplingClass::Dirichlet => StCoupling::dirichlet(edge_length),
        CouplingClass::Delta(alpha) => StCoupling::new(1, vec![real(*alpha)], vec![ONE; 3], edge_length),
        CouplingClass::Kirchhoff => preset(&CouplingClass::Delta(0.0), edge_length),
        CouplingClass::DeltaPrimeS(beta) => {
            if *beta == 0.0 {
                return Err(CouplingError::ZeroStrength("delta_prime_s"));
            }
            StCoupling::new(4, vec![real(1.0 / beta); upper_len(4)], vec![], edge_length)
        }
        CouplingClass::DeltaPrime(beta) => {
            if *beta == 0.0 {
                return Err(CouplingError::ZeroStrength("delta_prime"));
            }
            let mut upper = Vec::with_capacity(upper_len(4));
            for i in 0..4 {
                for j in i..4 {
                    upper.push(real(if i == j { 3.0 / beta } else { -1.0 / beta }));
                }
            }
            StCoupling::new(4, upper, vec![], edge_length)
        }
        CouplingClass::DiagonalDecoupled(d) => {
            let mut upper = Vec::with_capacity(upper_len(4));
            for i in 0..4 {
                for j in i..4 {
                    upper.push(if i == j { real(d[i]) } else { ZERO });
                }
            }
            StCoupling::new(4, upper, vec![], edge_length)
        }
        CouplingClass::ScaleInvariant { rank, t } => {
            StCoupling::new(*rank, vec![ZERO; upper_len(*rank)], t.clone(), edge_length)
        }
        CouplingClass::Generic => Err(CouplingError::NotConstructible("generic")),
    }
}

fn close(a: C64, b: C64) -> bool {
    (a - b).norm() <= MATCH_TOL
}

/// Inverse of [`preset`]: recognizes the preset shapes, else `Generic`.
pub fn classify_coupling(c: &StCoupling) -> CouplingClass {
    let m = c.rank();
    match m {
        0 => CouplingClass::Dirichlet,
        1 => {
            if (0..3).all(|j| close(c.t(0, j), ONE)) {
                let s = c.s_diag(0);
                if s.abs() <= MATCH_TOL {
                    CouplingClass::Kirchhoff
                } else {
                    CouplingClass::Delta(s)
                }
            } else if c.s_is_zero(MATCH_TOL) {
                CouplingClass::ScaleInvariant {
                    rank: 1,
                    t: c.t_entries().to_vec(),
                }
            } else {
                CouplingClass::Generic
            }
        }
        4 => {
            if c.s_is_diagonal(MATCH_TOL) {
                return CouplingClass::DiagonalDecoupled([c.s_diag(0), c.s_diag(1), c.s_diag(2), c.s_diag(3)]);
            }
            let first = c.s(0, 0);
            if first.norm() > MATCH_TOL && c.s_upper().iter().all(|&z| close(z, first)) {
                return CouplingClass::DeltaPrimeS(1.0 / first.re);
            }
            let off = c.s(0, 1);
            let off_equal = (0..4).all(|i| (i + 1..4).all(|j| close(c.s(i, j), off)));
            let diag_match = (0..4).all(|i| close(c.s(i, i), off * -3.0));
            if off.norm() > MATCH_TOL && off.im.abs() <= MATCH_TOL && off_equal && diag_match {
                return CouplingClass::DeltaPrime(-1.0 / off.re);
            }
            CouplingClass::Generic
        }
        _ => {
            if c.s_is_zero(MATCH_TOL) {
                CouplingClass::ScaleInvariant {
                    rank: m,
                    t: c.t_entries().to_vec(),
                }
            } else {
                CouplingClass::Generic
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn packed_upper_indexing() {
        for m in 0..=4 {
            let mut expected = 0;
            for i in 0..m {
                for j in i..m {
                    assert_eq!(packed(m, i, j), expected, "m={m} ({i},{j})");
                    expected += 1;
                }
            }
        }
    }

    #[test]
    fn hermitian_access_and_shape_errors() {
        let s = StCoupling::new(2, vec![c(1.0, 0.0), c(2.0, 3.0), c(-1.0, 0.0)], vec![ZERO; 4], 1.0).unwrap();
        assert_eq!(s.s(0, 1), c(2.0, 3.0));
        assert_eq!(s.s(1, 0), c(2.0, -3.0));
        assert_eq!(
            StCoupling::new(5, vec![], vec![], 1.0).unwrap_err(),
            CouplingError::RankOutOfRange(5)
        );
        assert!(matches!(
            StCoupling::new(1, vec![c(0.0, 1.0)], vec![ZERO; 3], 1.0),
            Err(CouplingError::NonRealDiagonal(0))
        ));
        assert!(matches!(
            StCoupling::new(1, vec![ONE], vec![ZERO; 2], 1.0),
            Err(CouplingError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            StCoupling::new(0, vec![], vec![], 0.0),
            Err(CouplingError::InvalidEdgeLength(_))
        ));
    }

    #[test]
    fn dirichlet_block_form() {
        let ab = st_to_ab(&StCoupling::dirichlet(1.0).unwrap());
        assert_eq!(ab.a, Mat4::identity().scale(-ONE));
        assert_eq!(ab.b, Mat4::zeros());
        let v = validate_ab(&ab.a, &ab.b);
        assert!(v.is_valid());
        assert_eq!((v.rank_ab, v.rank_b), (4, 0));
        assert_eq!(v.hermiticity_defect, 0.0);
    }

    #[test]
    fn kirchhoff_block_form() {
        let k = preset(&CouplingClass::Kirchhoff, 1.0).unwrap();
        let ab = st_to_ab(&k);
        assert_eq!(ab.b.0[0], [ONE; 4]);
        for r in 1..4 {
            assert_eq!(ab.b.0[r], [ZERO; 4]);
            // row r of A: ψ_r − ψ₁ = 0 up to the overall sign
            let mut expected = [ZERO; 4];
            expected[0] = ONE;
            expected[r] = -ONE;
            assert_eq!(ab.a.0[r], expected);
        }
    }

    #[test]
    fn neumann_type_and_degenerate() {
        let s = StCoupling::new(4, {
            let mut u = vec![ZERO; 10];
            u[0] = c(1.0, 0.0);
            u[4] = c(2.0, 0.0);
            u[7] = c(3.0, 0.0);
            u[9] = c(4.0, 0.0);
            u
        }, vec![], 1.0)
        .unwrap();
        let ab = st_to_ab(&s);
        assert_eq!(ab.b, Mat4::identity());
        assert_eq!(ab.a, Mat4::diag([c(-1.0, 0.0), c(-2.0, 0.0), c(-3.0, 0.0), c(-4.0, 0.0)]));

        let v = validate_ab(&Mat4::zeros(), &Mat4::identity());
        assert!(v.is_valid());
        assert_eq!(v.rank_b, 4);

        let bad = validate_ab(&Mat4::zeros(), &Mat4::zeros());
        assert!(!bad.is_valid());
        assert!(matches!(bad.failures[0], AbFailure::RankDeficient { rank: 0 }));
    }

    #[test]
    fn non_hermitian_product_is_reported() {
        let mut a = Mat4::identity();
        a.0[0][1] = c(1.0, 0.0);
        let v = validate_ab(&a, &Mat4::identity());
        assert!(v.failures.iter().any(|f| matches!(f, AbFailure::NotHermitian { .. })));
    }

    #[test]
    fn permuted_case_two_layout() {
        // m = 2 with the second and third slots exchanged
        let t = vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0), c(0.5, 0.5)];
        let s = StCoupling::new(2, vec![c(0.3, 0.0), c(0.1, 0.2), c(-0.4, 0.0)], t.clone(), 1.0).unwrap();
        let ab = st_to_ab_permuted(&s, &EdgePermutation::swap(1, 2).unwrap());
        let (t11, t12, t21, t22) = (t[0], t[1], t[2], t[3]);
        assert_eq!(ab.b.0[0], [ONE, t11, ZERO, t12]);
        assert_eq!(ab.b.0[1], [ZERO, t21, ONE, t22]);
        let minus_a = ab.a.scale(-ONE);
        assert_eq!(minus_a.0[0], [s.s(0, 0), ZERO, s.s(0, 1), ZERO]);
        assert_eq!(minus_a.0[1], [s.s(1, 0), ZERO, s.s(1, 1), ZERO]);
        assert_eq!(minus_a.0[2], [-t11.conj(), ONE, -t21.conj(), ZERO]);
        assert_eq!(minus_a.0[3], [-t12.conj(), ZERO, -t22.conj(), ONE]);
        assert!(validate_ab(&ab.a, &ab.b).is_valid());
    }

    #[test]
    fn permutation_round_trip_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = StCoupling::random(3, 1.0, &mut rng).unwrap();
        let ab = st_to_ab(&s);
        let p = EdgePermutation::new([2, 0, 3, 1]).unwrap();
        assert_eq!(ab.permuted(&p).permuted(&p.inverse()), ab);
        assert_eq!(st_to_ab_permuted(&s, &EdgePermutation::identity()), ab);
        assert!(EdgePermutation::new([0, 0, 1, 2]).is_err());
        assert!(EdgePermutation::new([0, 1, 2, 4]).is_err());
    }

    #[test]
    fn presets_and_classification() {
        let d = preset(&CouplingClass::Delta(2.0), 1.0).unwrap();
        assert_eq!(d.rank(), 1);
        assert_eq!(d.s(0, 0), c(2.0, 0.0));
        assert_eq!(d.t_entries(), &[ONE; 3]);
        assert_eq!(classify_coupling(&d), CouplingClass::Delta(2.0));
        assert_eq!(
            preset(&CouplingClass::Kirchhoff, 1.0).unwrap(),
            preset(&CouplingClass::Delta(0.0), 1.0).unwrap()
        );
        let dps = preset(&CouplingClass::DeltaPrimeS(1.0), 1.0).unwrap();
        assert_eq!(dps.rank(), 4);
        assert!((0..4).all(|i| (0..4).all(|j| dps.s(i, j) == ONE)));
        assert_eq!(
            preset(&CouplingClass::DeltaPrimeS(0.0), 1.0).unwrap_err(),
            CouplingError::ZeroStrength("delta_prime_s")
        );
        let zero4 = StCoupling::new(4, vec![ZERO; 10], vec![], 1.0).unwrap();
        assert_eq!(classify_coupling(&zero4), CouplingClass::DiagonalDecoupled([0.0; 4]));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = StCoupling::random(3, 1.0, &mut rng).unwrap();
        assert_eq!(classify_coupling(&g), CouplingClass::Generic);
    }

    #[test]
    fn preset_classify_round_trip() {
        let classes = [
            CouplingClass::Dirichlet,
            CouplingClass::Kirchhoff,
            CouplingClass::Delta(-1.5),
            CouplingClass::DeltaPrimeS(0.25),
            CouplingClass::DeltaPrime(2.0),
            CouplingClass::DiagonalDecoupled([1.0, -2.0, 0.5, 0.0]),
            CouplingClass::ScaleInvariant {
                rank: 2,
                t: vec![c(1.0, 0.0), c(0.0, 1.0), c(0.5, 0.5), ZERO],
            },
        ];
        for class in classes {
            let built = preset(&class, 1.3).unwrap();
            let again = preset(&classify_coupling(&built), 1.3).unwrap();
            assert_eq!(again, built, "{class:?}");
            let parsed = CouplingClass::from_tag(class.tag(), &class.params()).unwrap();
            assert_eq!(parsed, class);
        }
    }

    #[test]
    fn unitary_and_projection_forms() {
        // U = −I is Dirichlet: A = −2I, B = 0
        let ab = AbCoupling::from_unitary(&Mat4::identity().scale(-ONE)).unwrap();
        assert!(validate_ab(&ab.a, &ab.b).is_valid());
        assert_eq!(ab.b.rank(RANK_TOL), 0);
        // U = I is Neumann
        let ab = AbCoupling::from_unitary(&Mat4::identity()).unwrap();
        assert!(validate_ab(&ab.a, &ab.b).is_valid());
        assert_eq!(ab.b.rank(RANK_TOL), 4);
        assert!(AbCoupling::from_unitary(&Mat4::identity().scale(c(2.0, 0.0))).is_err());

        // P projects on the first slot, L = 0.5 on the rest
        let p = Mat4::diag([ONE, ZERO, ZERO, ZERO]);
        let l = Mat4::diag([ZERO, c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]);
        let ab = AbCoupling::from_projection(&p, &l).unwrap();
        let v = validate_ab(&ab.a, &ab.b);
        assert!(v.is_valid());
        assert_eq!(v.rank_b, 3);
        assert!(AbCoupling::from_projection(&p, &Mat4::identity()).is_err());
    }

    #[test]
    fn random_couplings_are_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..1000 {
            let m = trial % 5;
            let s = StCoupling::random(m, 1.0, &mut rng).unwrap();
            let ab = st_to_ab(&s);
            let v = validate_ab(&ab.a, &ab.b);
            assert!(v.is_valid(), "{v:?}");
            assert!(v.hermiticity_defect < 1e-12);
            assert_eq!(v.rank_b, m);
        }
    }
}
