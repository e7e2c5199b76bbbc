//! Dense complex linear algebra shared by the modules.

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Matrix exponential (Padé scaling and squaring).
pub fn expm(a: &CMatrix) -> CMatrix {
    if a.nrows() == 0 {
        return a.clone();
    }
    a.exp()
}

/// Largest absolute entry.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_vec(v: &CVector) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_slice(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Induced ∞-norm (maximum absolute row sum).
pub fn norm_inf(a: &CMatrix) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Elementwise complex conjugate (no transpose).
pub fn conj(a: &CMatrix) -> CMatrix {
    a.map(|z| z.conj())
}

pub fn conj_vec(v: &CVector) -> CVector {
    v.map(|z| z.conj())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Eigenvalues of the Hermitian part `(A + A†)/2`, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let herm = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

pub fn real_scalar(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `v wᵀ` (no conjugation).
pub fn outer(v: &CVector, w: &CVector) -> CMatrix {
    v * w.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(-0.5, -1.0), C64::new(0.2, 3.0)]));
        let e = expm(&a);
        assert!((e[(0, 0)] - C64::new(-0.5, -1.0).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - C64::new(0.2, 3.0).exp()).norm() < 1e-13);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn hermitian_eigenvalues_of_projector() {
        let v = CVector::from_vec(vec![ONE, I]) / C64::new(2f64.sqrt(), 0.0);
        let p = &v * v.adjoint();
        let ev = hermitian_eigenvalues(&p);
        assert!(ev[0].abs() < 1e-14);
        assert!((ev[1] - 1.0).abs() < 1e-14);
    }
}
