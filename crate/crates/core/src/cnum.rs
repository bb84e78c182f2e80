//! Complex scalar helpers and dense complex linear algebra aliases.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn one() -> C64 {
    C64::new(1.0, 0.0)
}

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// exp(a * log_base) for a pinned branch of the logarithm.
pub fn branch_pow(log_base: C64, a: C64) -> C64 {
    (a * log_base).exp()
}

/// Max absolute entry of a matrix.
pub fn mat_max(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max absolute difference between two matrices of equal shape.
pub fn mat_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    mat_max(&(a - b))
}

/// Identity matrix of size n.
pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Condition number estimate via SVD (largest/smallest singular value).
pub fn cond_svd(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solve A x = b by LU with partial pivoting; error if near-singular.
pub fn solve(a: &CMat, b: &CVec) -> Option<CVec> {
    a.clone().lu().solve(b)
}

/// Matrix inverse; `None` if singular.
pub fn inverse(a: &CMat) -> Option<CMat> {
    a.clone().try_inverse()
}

/// Least-squares solve of an overdetermined consistent system via normal
/// equations with SVD fallback; returns (solution, residual, rank).
pub fn lstsq(a: &CMat, b: &CVec, rank_tol: f64) -> (CVec, f64, usize) {
    let svd = a.clone().svd(true, true);
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > rank_tol * svd.singular_values.max())
        .count();
    let x = svd.solve(b, rank_tol * svd.singular_values.max()).unwrap();
    let res = (a * &x - b).norm();
    (x, res, rank)
}
