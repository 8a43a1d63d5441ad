//! Dense complex linear-algebra helpers shared by the closed forms, the
//! combiners and the report writers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{domain, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// (X + X^H) / 2.
pub fn hermitianize(x: &CMat) -> CMat {
    (x + x.adjoint()).scale(0.5)
}

pub fn real_trace(x: &CMat) -> f64 {
    x.diagonal().iter().map(|z| z.re).sum()
}

/// Largest entrywise asymmetry relative to the largest entry.
pub fn hermitian_defect(x: &CMat) -> f64 {
    let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    (x - x.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(x: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(hermitianize(x)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn is_finite(x: &CMat) -> bool {
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Solves `A x = b` for Hermitian positive (semi)definite `A` by Cholesky.
/// When the factorization fails, retries once with a ridge of
/// `1e-12 * trace(A) / n` on the diagonal.
pub fn hermitian_solve(a: &CMat, b: &CVec) -> Result<CVec> {
    if !is_finite(a) || !b.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(domain("non-finite entries in Hermitian solve"));
    }
    if let Some(ch) = Cholesky::<Complex64, Dyn>::new(a.clone()) {
        return Ok(ch.solve(b));
    }
    let n = a.nrows();
    let ridge = 1e-12 * real_trace(a).abs() / n as f64;
    let mut reg = a.clone();
    for i in 0..n {
        reg[(i, i)] += Complex64::new(ridge.max(f64::MIN_POSITIVE), 0.0);
    }
    Cholesky::<Complex64, Dyn>::new(reg)
        .map(|ch| ch.solve(b))
        .ok_or_else(|| domain("matrix is not positive semidefinite even after ridge"))
}

/// `[re, im]` pairs for JSON output.
pub fn pairs(v: impl IntoIterator<Item = Complex64>) -> Vec<[f64; 2]> {
    v.into_iter().map(|z| [z.re, z.im]).collect()
}

/// Row-major `[re, im]` pairs.
pub fn matrix_rows(x: &CMat) -> Vec<Vec<[f64; 2]>> {
    x.row_iter().map(|r| pairs(r.iter().copied())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solve_matches_hand_2x2() {
        let a = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let b = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let x = hermitian_solve(&a, &b).unwrap();
        let r = &a * &x - &b;
        assert!(r.norm() < 1e-14);
    }

    #[test]
    fn singular_matrix_falls_back_to_ridge() {
        let g = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let a = &g * g.adjoint();
        let x = hermitian_solve(&a, &g).unwrap();
        assert!(x.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    }

    #[test]
    fn non_finite_rejected() {
        let a = CMat::from_element(1, 1, c(f64::NAN, 0.0));
        assert!(hermitian_solve(&a, &CVec::from_element(1, c(1.0, 0.0))).is_err());
    }

    #[test]
    fn eigenvalues_sorted() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(3.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)]));
        assert_eq!(hermitian_eigenvalues(&a), vec![-1.0, 2.0, 3.0]);
    }
}
