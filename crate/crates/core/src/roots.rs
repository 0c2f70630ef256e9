//! Scalar bracketing: bisection for sign changes, golden section for extrema.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Bisects a sign change of `f` on `[lo, hi]` until the bracket is narrower
/// than `tol`. `f_lo` is the value at `lo`; a zero endpoint is returned as is.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, mut f_lo: f64, tol: f64) -> f64 {
    if f_lo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_min(|x| -f(x), lo, hi, tol);
    (x, -v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_pi() {
        let r = bisect(f64::sin, 3.0, 3.3, 3.0f64.sin(), 1e-14);
        assert!((r - std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn bisect_decreasing_function() {
        let r = bisect(|x| 2.0 - x, 0.0, 5.0, 2.0, 1e-12);
        assert!((r - 2.0).abs() < 1e-11);
    }

    #[test]
    fn golden_locates_parabola_vertex() {
        let (x, v) = golden_min(|x| (x - 0.3) * (x - 0.3), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(v < 1e-15);
        let (x, v) = golden_max(|x| -x * x, -1.0, 0.5, 1e-10);
        assert!(x.abs() < 1e-8 && v.abs() < 1e-15);
    }
}
