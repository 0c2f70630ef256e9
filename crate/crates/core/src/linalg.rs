//! Small dense complex matrices.
//!
//! Everything in the fiber problem is 4×4, so the determinant is a hand-rolled
//! partially pivoted elimination; singular values go through `nalgebra`.

use std::ops::{Add, Index, IndexMut, Mul};

use nalgebra::{Matrix4, OMatrix, U4, U8};
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major 4×4 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4(pub [[C64; 4]; 4]);

impl Mat4 {
    pub fn zeros() -> Self {
        Mat4([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn diag(d: [C64; 4]) -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn scale(&self, z: C64) -> Self {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|x| *x *= z);
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] = self.0[j][i].conj();
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> [C64; 4] {
        [self.0[0][j], self.0[1][j], self.0[2][j], self.0[3][j]]
    }

    pub fn set_column(&mut self, j: usize, col: [C64; 4]) {
        for (i, v) in col.into_iter().enumerate() {
            self.0[i][j] = v;
        }
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Product of the Euclidean column norms; bounds |det| from above.
    pub fn hadamard_bound(&self) -> f64 {
        (0..4)
            .map(|j| self.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .product()
    }

    pub fn det(&self) -> C64 {
        det4(self.0)
    }

    pub fn mul_vec(&self, v: &[C64; 4]) -> [C64; 4] {
        let mut out = [ZERO; 4];
        for (i, row) in self.0.iter().enumerate() {
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn to_nalgebra(&self) -> Matrix4<C64> {
        Matrix4::from_fn(|i, j| self.0[i][j])
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> [f64; 4] {
        let sv = self.to_nalgebra().singular_values();
        let mut out = [sv[0], sv[1], sv[2], sv[3]];
        out.sort_by(|a, b| b.total_cmp(a));
        out
    }

    /// Smallest singular value together with its right singular vector.
    pub fn smallest_singular_pair(&self) -> (f64, f64, [C64; 4]) {
        let svd = self.to_nalgebra().svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let (mut imin, mut imax) = (0, 0);
        for i in 1..4 {
            if svd.singular_values[i] < svd.singular_values[imin] {
                imin = i;
            }
            if svd.singular_values[i] > svd.singular_values[imax] {
                imax = i;
            }
        }
        // rows of V^H are conjugated right singular vectors
        let row = v_t.row(imin);
        let vec = [row[0].conj(), row[1].conj(), row[2].conj(), row[3].conj()];
        (svd.singular_values[imin], svd.singular_values[imax], vec)
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        numeric_rank(&self.singular_values(), rel_tol)
    }
}

impl Index<(usize, usize)> for Mat4 {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat4 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Mul for Mat4 {
    type Output = Mat4;
    fn mul(self, rhs: Mat4) -> Mat4 {
        let mut out = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] = (0..4).map(|l| self.0[i][l] * rhs.0[l][j]).sum();
            }
        }
        out
    }
}

impl Add for Mat4 {
    type Output = Mat4;
    fn add(self, rhs: Mat4) -> Mat4 {
        let mut out = self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det4(mut m: [[C64; 4]; 4]) -> C64 {
    let mut det = ONE;
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&a, &b| m[a][col].norm_sqr().total_cmp(&m[b][col].norm_sqr()))
            .unwrap_or(col);
        if m[pivot][col] == ZERO {
            return ZERO;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        for row in col + 1..4 {
            let factor = m[row][col] / p;
            if factor != ZERO {
                for j in col + 1..4 {
                    let v = m[col][j];
                    m[row][j] -= factor * v;
                }
            }
        }
    }
    det
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numeric_rank(singular_values: &[f64], rel_tol: f64) -> usize {
    let largest = singular_values.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rel_tol * largest).count()
}

/// Rank of the 4×8 block `(A|B)`.
pub fn block_rank(a: &Mat4, b: &Mat4, rel_tol: f64) -> usize {
    let block: OMatrix<C64, U4, U8> =
        OMatrix::<C64, U4, U8>::from_fn(|i, j| if j < 4 { a.0[i][j] } else { b.0[i][j - 4] });
    let sv = block.singular_values();
    numeric_rank(sv.as_slice(), rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn det_of_permutation_and_diagonal() {
        let d = Mat4::diag([c(1.0, 0.0), c(2.0, 0.0), c(0.0, 1.0), c(3.0, -1.0)]);
        let expected = c(2.0, 0.0) * c(0.0, 1.0) * c(3.0, -1.0);
        assert!((d.det() - expected).norm() < 1e-14);

        let mut p = Mat4::zeros();
        p.0[0][1] = ONE;
        p.0[1][0] = ONE;
        p.0[2][2] = ONE;
        p.0[3][3] = ONE;
        assert!((p.det() + ONE).norm() < 1e-15);
    }

    #[test]
    fn det_matches_cofactor_expansion() {
        let m = Mat4([
            [c(1.0, 2.0), c(0.5, -1.0), c(3.0, 0.0), c(0.0, 1.0)],
            [c(-2.0, 0.3), c(1.0, 1.0), c(0.0, -0.5), c(2.0, 2.0)],
            [c(0.1, 0.0), c(4.0, -3.0), c(1.0, 0.0), c(-1.0, 0.5)],
            [c(0.0, 0.0), c(1.5, 0.5), c(-0.7, 1.1), c(0.9, -0.2)],
        ]);
        fn minor3(m: &[[C64; 4]; 4], skip_r: usize, skip_c: usize) -> C64 {
            let rows: Vec<usize> = (0..4).filter(|&r| r != skip_r).collect();
            let cols: Vec<usize> = (0..4).filter(|&c| c != skip_c).collect();
            let e = |i: usize, j: usize| m[rows[i]][cols[j]];
            e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
                - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
        }
        let cofactor: C64 = (0..4)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                m.0[0][j] * minor3(&m.0, 0, j) * sign
            })
            .sum();
        assert!((m.det() - cofactor).norm() < 1e-12 * cofactor.norm().max(1.0));
    }

    #[test]
    fn rank_of_degenerate_blocks() {
        assert_eq!(block_rank(&Mat4::zeros(), &Mat4::zeros(), 1e-10), 0);
        assert_eq!(block_rank(&Mat4::identity().scale(-ONE), &Mat4::zeros(), 1e-10), 4);
        let mut b = Mat4::zeros();
        b.0[0][0] = ONE;
        b.0[0][3] = c(2.0, 1.0);
        assert_eq!(b.rank(1e-10), 1);
    }

    #[test]
    fn smallest_singular_vector_spans_kernel() {
        let mut m = Mat4::identity();
        m.0[3][3] = ZERO;
        m.0[3][0] = ZERO;
        let (smin, smax, v) = m.smallest_singular_pair();
        assert!(smin < 1e-14 && (smax - 1.0).abs() < 1e-14);
        let r = m.mul_vec(&v);
        assert!(r.iter().map(|z| z.norm()).sum::<f64>() < 1e-14);
        assert!((v[3].norm() - 1.0).abs() < 1e-14);
    }
}
