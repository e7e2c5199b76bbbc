//! Phase-space conventions, the structural matrices `J` and `E`, tilde
//! conjugation and quadratic generator data.

use std::fmt;

use crate::defaults::TOL_STRUCT;
use crate::error::{Error, Result};
use crate::linalg::{conj, conj_vec, hermitian_eigenvalues, max_abs, max_abs_vec, CMatrix, CVector, C64, ONE};

/// The `2n`-dimensional phase index `(a_1..a_n, a_1†..a_n†)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhaseSpace {
    modes: usize,
}

impl PhaseSpace {
    pub fn new(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidDimension("mode count must be at least 1".into()));
        }
        Ok(Self { modes })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Phase-space dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.modes
    }

    pub fn annihilator(&self, mode: usize) -> usize {
        debug_assert!(mode < self.modes);
        mode
    }

    pub fn creator(&self, mode: usize) -> usize {
        debug_assert!(mode < self.modes);
        self.modes + mode
    }

    /// Index of the adjoint operator: `a_k ↔ a_k†`.
    pub fn partner(&self, index: usize) -> usize {
        if index < self.modes {
            index + self.modes
        } else {
            index - self.modes
        }
    }

    pub fn structural(&self) -> StructuralMatrices {
        let n = self.modes;
        let mut j = CMatrix::zeros(2 * n, 2 * n);
        let mut e = CMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            j[(k, n + k)] = -ONE;
            j[(n + k, k)] = ONE;
            e[(k, n + k)] = ONE;
            e[(n + k, k)] = ONE;
        }
        StructuralMatrices { j, e }
    }

    pub fn check_vec(&self, g: &CVector) -> Result<()> {
        if g.len() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), found: g.len() });
        }
        Ok(())
    }

    pub fn check_mat(&self, k: &CMatrix) -> Result<()> {
        if k.nrows() != self.dim() || k.ncols() != self.dim() {
            return Err(Error::InvalidDimension(format!(
                "expected a {d}x{d} matrix, found {}x{}",
                k.nrows(),
                k.ncols(),
                d = self.dim()
            )));
        }
        Ok(())
    }

    /// `g̃ = E·conj(g)`.
    pub fn tilde_vec(&self, g: &CVector) -> Result<CVector> {
        self.check_vec(g)?;
        Ok(swap_halves_vec(&conj_vec(g), self.modes))
    }

    /// `K̃ = E·conj(K)·E`.
    pub fn tilde_mat(&self, k: &CMatrix) -> Result<CMatrix> {
        self.check_mat(k)?;
        Ok(swap_blocks(&conj(k), self.modes))
    }

    /// `Γ = Σ_j γ_j γ̃_jᵀ`; an empty list gives the zero matrix.
    pub fn gamma_from_jumps(&self, jumps: &[CVector]) -> Result<CMatrix> {
        let d = self.dim();
        let mut gamma = CMatrix::zeros(d, d);
        for g in jumps {
            let tilde = self.tilde_vec(g)?;
            gamma += g * tilde.transpose();
        }
        Ok(gamma)
    }
}

/// `E v` for the block permutation `E`.
fn swap_halves_vec(v: &CVector, n: usize) -> CVector {
    CVector::from_fn(2 * n, |i, _| v[(i + n) % (2 * n)])
}

/// `E K E`.
fn swap_blocks(k: &CMatrix, n: usize) -> CMatrix {
    let d = 2 * n;
    CMatrix::from_fn(d, d, |r, c| k[((r + n) % d, (c + n) % d)])
}

/// `J` and `E` in block form `J = [[0, −I], [I, 0]]`, `E = [[0, I], [I, 0]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralMatrices {
    pub j: CMatrix,
    pub e: CMatrix,
}

pub fn structural_matrices(n: usize) -> Result<StructuralMatrices> {
    Ok(PhaseSpace::new(n)?.structural())
}

/// Generator data `(H, f, Γ)` of `𝓛*_{H,Γ,f}`.
///
/// `Ĥ = ½𝔞ᵀH𝔞 + fᵀ𝔞` and `Ĉ_j = γ_jᵀ𝔞`. When built from jump vectors the
/// vectors are kept alongside `Γ = Σ_j γ_j γ̃_jᵀ` so the Fock oracle can
/// assemble the jump operators; when `Γ` is supplied directly the oracle
/// factorizes it instead.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGenerator {
    space: PhaseSpace,
    pub h: CMatrix,
    pub f: CVector,
    pub gamma: CMatrix,
    pub jumps: Option<Vec<CVector>>,
}

impl QuadraticGenerator {
    pub fn from_jumps(n: usize, h: CMatrix, f: CVector, jumps: Vec<CVector>) -> Result<Self> {
        let space = PhaseSpace::new(n)?;
        space.check_mat(&h)?;
        space.check_vec(&f)?;
        let gamma = space.gamma_from_jumps(&jumps)?;
        Ok(Self { space, h, f, gamma, jumps: Some(jumps) })
    }

    pub fn from_gamma(n: usize, h: CMatrix, f: CVector, gamma: CMatrix) -> Result<Self> {
        let space = PhaseSpace::new(n)?;
        space.check_mat(&h)?;
        space.check_vec(&f)?;
        space.check_mat(&gamma)?;
        Ok(Self { space, h, f, gamma, jumps: None })
    }

    /// `H = 0`, `f = 0`, no jumps.
    pub fn trivial(n: usize) -> Result<Self> {
        let d = 2 * n;
        Self::from_jumps(n, CMatrix::zeros(d, d), CVector::zeros(d), Vec::new())
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn modes(&self) -> usize {
        self.space.modes()
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        validate_generator(self, tol)
    }

    /// Returns `self` when every structural invariant holds at [`TOL_STRUCT`].
    pub fn validated(&self) -> Result<&Self> {
        let report = self.validate(TOL_STRUCT);
        if report.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidGenerator(report))
        }
    }

    /// Jump vectors; factorizes `ΓE = Σ_j γ_j γ_j†` when only `Γ` was given.
    pub fn jump_vectors(&self) -> Vec<CVector> {
        if let Some(j) = &self.jumps {
            return j.clone();
        }
        let e = self.space.structural().e;
        let ge = &self.gamma * &e;
        let herm = (&ge + ge.adjoint()) * C64::new(0.5, 0.0);
        let scale = max_abs(&herm).max(f64::MIN_POSITIVE);
        let eig = herm.symmetric_eigen();
        eig.eigenvalues
            .iter()
            .zip(eig.eigenvectors.column_iter())
            .filter(|(lam, _)| **lam > 1e-14 * scale)
            .map(|(lam, v)| v.into_owned() * C64::new(lam.sqrt(), 0.0))
            .collect()
    }
}

/// A structural invariant of [`QuadraticGenerator`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Invariant {
    HSymmetric,
    HTildeReal,
    FTildeReal,
    GammaTildeTranspose,
    GammaEHermitian,
    GammaEPositive,
}

impl Invariant {
    pub fn label(&self) -> &'static str {
        match self {
            Invariant::HSymmetric => "H = H^T",
            Invariant::HTildeReal => "H~ = H",
            Invariant::FTildeReal => "f~ = f",
            Invariant::GammaTildeTranspose => "Gamma~ = Gamma^T",
            Invariant::GammaEHermitian => "Gamma E Hermitian",
            Invariant::GammaEPositive => "Gamma E positive semidefinite",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub invariant: Invariant,
    /// Largest absolute entry of the defect (for positivity: minus the smallest eigenvalue).
    pub magnitude: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, invariant: Invariant) -> bool {
        self.violations.iter().any(|v| v.invariant == invariant)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{} violated by {:.3e}", v.invariant.label(), v.magnitude))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Lists every violated invariant; tolerances are relative to the max-abs
/// norm of the checked object.
pub fn validate_generator(gen: &QuadraticGenerator, tol: f64) -> ValidationReport {
    let space = gen.space;
    let n = space.modes();
    let mut report = ValidationReport::default();
    let mut check = |invariant, magnitude: f64, scale: f64| {
        if magnitude > tol * scale {
            report.violations.push(Violation { invariant, magnitude });
        }
    };

    let h_scale = max_abs(&gen.h);
    check(Invariant::HSymmetric, max_abs(&(&gen.h - gen.h.transpose())), h_scale);
    let h_tilde = swap_blocks(&conj(&gen.h), n);
    check(Invariant::HTildeReal, max_abs(&(&gen.h - h_tilde)), h_scale);

    let f_tilde = swap_halves_vec(&conj_vec(&gen.f), n);
    check(Invariant::FTildeReal, max_abs_vec(&(&gen.f - f_tilde)), max_abs_vec(&gen.f));

    let g_scale = max_abs(&gen.gamma);
    let g_tilde = swap_blocks(&conj(&gen.gamma), n);
    check(Invariant::GammaTildeTranspose, max_abs(&(g_tilde - gen.gamma.transpose())), g_scale);
    let ge = &gen.gamma * space.structural().e;
    check(Invariant::GammaEHermitian, max_abs(&(&ge - ge.adjoint())), g_scale);
    let min_ev = hermitian_eigenvalues(&ge).first().copied().unwrap_or(0.0);
    check(Invariant::GammaEPositive, (-min_ev).max(0.0), g_scale);

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{I, ZERO};
    use crate::random::{random_generator, random_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn mat(rows: &[&[C64]]) -> CMatrix {
        CMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c])
    }

    #[test]
    fn single_mode_blocks() {
        let s = structural_matrices(1).unwrap();
        assert_eq!(s.j, mat(&[&[ZERO, -ONE], &[ONE, ZERO]]));
        assert_eq!(s.e, mat(&[&[ZERO, ONE], &[ONE, ZERO]]));
        assert_eq!(&s.j * &s.j, -CMatrix::identity(2, 2));
    }

    #[test]
    fn two_mode_blocks() {
        let s = structural_matrices(2).unwrap();
        for k in 0..2 {
            for l in 0..2 {
                let delta = if k == l { ONE } else { ZERO };
                assert_eq!(s.j[(k, 2 + l)], -delta);
                assert_eq!(s.j[(2 + k, l)], delta);
                assert_eq!(s.j[(k, l)], ZERO);
                assert_eq!(s.j[(2 + k, 2 + l)], ZERO);
            }
        }
    }

    #[test]
    fn structural_identities() {
        for n in 1..5 {
            let s = structural_matrices(n).unwrap();
            let id = CMatrix::identity(2 * n, 2 * n);
            assert_eq!(&s.j * &s.j, -&id);
            assert_eq!(s.j.transpose(), -&s.j);
            assert_eq!(&s.e * &s.e, id);
            assert_eq!(s.e.transpose(), s.e);
        }
    }

    #[test]
    fn zero_modes_rejected() {
        assert!(matches!(structural_matrices(0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn tilde_vec_examples() {
        let sp = PhaseSpace::new(1).unwrap();
        let g = CVector::from_vec(vec![ONE, ZERO]);
        assert_eq!(sp.tilde_vec(&g).unwrap(), CVector::from_vec(vec![ZERO, ONE]));
        let g = CVector::from_vec(vec![I, ZERO]);
        assert_eq!(sp.tilde_vec(&g).unwrap(), CVector::from_vec(vec![ZERO, -I]));
        let bad = CVector::zeros(3);
        assert!(matches!(sp.tilde_vec(&bad), Err(Error::LengthMismatch { expected: 2, found: 3 })));
    }

    #[test]
    fn tilde_mat_examples() {
        let sp = PhaseSpace::new(1).unwrap();
        let id = CMatrix::identity(2, 2);
        assert_eq!(sp.tilde_mat(&id).unwrap(), id);
        let w = c(0.7, 0.0);
        let k = mat(&[&[ZERO, w], &[w, ZERO]]);
        assert_eq!(sp.tilde_mat(&k).unwrap(), k);
        assert!(sp.tilde_mat(&CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn tilde_is_an_involution_and_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..4 {
            let sp = PhaseSpace::new(n).unwrap();
            let g = random_vector(&mut rng, 2 * n);
            assert!(max_abs_vec(&(sp.tilde_vec(&sp.tilde_vec(&g).unwrap()).unwrap() - &g)) < 1e-15);
            let a = CMatrix::from_fn(2 * n, 2 * n, |_, _| crate::random::complex_normal(&mut rng));
            let b = CMatrix::from_fn(2 * n, 2 * n, |_, _| crate::random::complex_normal(&mut rng));
            assert!(max_abs(&(sp.tilde_mat(&sp.tilde_mat(&a).unwrap()).unwrap() - &a)) < 1e-15);
            let lhs = sp.tilde_mat(&(&a * &b)).unwrap();
            let rhs = sp.tilde_mat(&a).unwrap() * sp.tilde_mat(&b).unwrap();
            assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }
    }

    #[test]
    fn gamma_for_damping_and_heating() {
        let sp = PhaseSpace::new(1).unwrap();
        let kappa: f64 = 0.3;
        let rk = c(kappa.sqrt(), 0.0);
        let gamma = sp.gamma_from_jumps(&[CVector::from_vec(vec![rk, ZERO])]).unwrap();
        assert!(max_abs(&(gamma - mat(&[&[ZERO, c(kappa, 0.0)], &[ZERO, ZERO]]))) < 1e-15);
        let gamma = sp.gamma_from_jumps(&[CVector::from_vec(vec![ZERO, rk])]).unwrap();
        assert!(max_abs(&(gamma - mat(&[&[ZERO, ZERO], &[c(kappa, 0.0), ZERO]]))) < 1e-15);
        assert_eq!(sp.gamma_from_jumps(&[]).unwrap(), CMatrix::zeros(2, 2));
        assert!(sp.gamma_from_jumps(&[CVector::zeros(4)]).is_err());
    }

    #[test]
    fn gamma_structure_from_random_jumps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..4 {
            let sp = PhaseSpace::new(n).unwrap();
            let jumps: Vec<CVector> = (0..3).map(|_| random_vector(&mut rng, 2 * n)).collect();
            let gamma = sp.gamma_from_jumps(&jumps).unwrap();
            let gt = sp.tilde_mat(&gamma).unwrap();
            assert!(max_abs(&(gt - gamma.transpose())) < 1e-14);
            let ge = &gamma * sp.structural().e;
            assert!(hermitian_eigenvalues(&ge)[0] > -1e-12);
        }
    }

    #[test]
    fn harmonic_generator_is_valid() {
        let e = structural_matrices(1).unwrap().e;
        let gen = QuadraticGenerator::from_jumps(1, e * c(1.3, 0.0), CVector::zeros(2), vec![]).unwrap();
        assert!(gen.validate(TOL_STRUCT).is_valid());
    }

    #[test]
    fn asymmetric_tilde_h_is_reported() {
        let h = mat(&[&[ONE, ZERO], &[ZERO, ZERO]]);
        let gen = QuadraticGenerator::from_jumps(1, h, CVector::zeros(2), vec![]).unwrap();
        let report = gen.validate(TOL_STRUCT);
        assert!(report.contains(Invariant::HTildeReal));
        let v = report.violations.iter().find(|v| v.invariant == Invariant::HTildeReal).unwrap();
        assert!((v.magnitude - 1.0).abs() < 1e-15);
        assert!(report.to_string().contains("H~ = H"));
        assert!(matches!(gen.validated(), Err(Error::InvalidGenerator(_))));
    }

    #[test]
    fn non_tilde_real_f_is_reported() {
        let f = CVector::from_vec(vec![ONE, I]);
        let gen = QuadraticGenerator::from_jumps(1, CMatrix::zeros(2, 2), f, vec![]).unwrap();
        let report = gen.validate(TOL_STRUCT);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].invariant, Invariant::FTildeReal);
        assert!((report.violations[0].magnitude - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn direct_gamma_must_be_positive() {
        let kappa = c(0.5, 0.0);
        // -κ a ρ a† style: Γ = −[[0, κ],[0, 0]] has ΓE = diag(−κ, 0)
        let gamma = mat(&[&[ZERO, -kappa], &[ZERO, ZERO]]);
        let gen = QuadraticGenerator::from_gamma(1, CMatrix::zeros(2, 2), CVector::zeros(2), gamma).unwrap();
        let report = gen.validate(TOL_STRUCT);
        assert!(report.contains(Invariant::GammaEPositive));
        assert!(!report.contains(Invariant::GammaTildeTranspose));
    }

    #[test]
    fn jump_factorization_reproduces_gamma() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gen = random_generator(&mut rng, 2, 1.0, 2);
        let direct = QuadraticGenerator::from_gamma(2, gen.h.clone(), gen.f.clone(), gen.gamma.clone()).unwrap();
        let rebuilt = gen.space().gamma_from_jumps(&direct.jump_vectors()).unwrap();
        assert!(max_abs(&(rebuilt - &gen.gamma)) < 1e-12);
    }
}
