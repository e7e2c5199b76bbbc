//! Random ensembles for property tests, the Leibniz check and CLI runs.
//!
//! Complex entries are i.i.d. with unit variance (real and imaginary parts
//! `N(0, 1/2)`).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::{PhaseSpace, QuadraticGenerator};
use crate::linalg::{max_abs, CMatrix, CVector, C64};

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVector {
    CVector::from_fn(len, |_, _| complex_normal(rng))
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let a = random_matrix(rng, dim, dim);
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// A valid `H` (`H = Hᵀ = H̃`) with max-abs entry `scale`.
pub fn random_h<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> CMatrix {
    let space = PhaseSpace::new(n).expect("n >= 1");
    let a = random_matrix(rng, 2 * n, 2 * n);
    let sym = (&a + a.transpose()) * C64::new(0.5, 0.0);
    let h = (&sym + space.tilde_mat(&sym).expect("square")) * C64::new(0.5, 0.0);
    rescale(h, scale)
}

/// A valid `f` (`f = f̃`) with max-abs entry `scale`.
pub fn random_f<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> CVector {
    let space = PhaseSpace::new(n).expect("n >= 1");
    let g = random_vector(rng, 2 * n);
    let f = (&g + space.tilde_vec(&g).expect("length")) * C64::new(0.5, 0.0);
    let m = f.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if m == 0.0 {
        f
    } else {
        f * C64::new(scale / m, 0.0)
    }
}

/// Random valid generator with `jumps` jump vectors of max-abs entry ≤ 0.5·scale.
pub fn random_generator<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64, jumps: usize) -> QuadraticGenerator {
    let h = random_h(rng, n, scale);
    let f = random_f(rng, n, scale);
    let gammas = (0..jumps)
        .map(|_| {
            let g = random_vector(rng, 2 * n);
            let m = g.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            g * C64::new(0.5 * scale / m, 0.0)
        })
        .collect();
    QuadraticGenerator::from_jumps(n, h, f, gammas).expect("consistent dimensions")
}

fn rescale(m: CMatrix, scale: f64) -> CMatrix {
    let a = max_abs(&m);
    if a == 0.0 {
        m
    } else {
        m * C64::new(scale / a, 0.0)
    }
}
