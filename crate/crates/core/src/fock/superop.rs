//! Superoperators on column-stacked density matrices:
//! `vec(AXB) = (Bᵀ ⊗ A) vec X`.

use crate::defaults::{CHOI_TOL, SUPEROP_D_MAX};
use crate::error::{Error, Result};
use crate::linalg::{conj, expm, hermitian_eigenvalues, CMatrix, CVector, C64, I};

use super::{propagate_exp, FockConfig, FockTrajectory, OperatorSet};

/// Column stacking, which is also nalgebra's storage order.
pub fn vec_col(x: &CMatrix) -> CVector {
    CVector::from_column_slice(x.as_slice())
}

pub fn unvec(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// Matrix of `X ↦ A X B`.
pub fn left_right_superop(a: &CMatrix, b: &CMatrix) -> CMatrix {
    b.transpose().kronecker(a)
}

fn check_budget(d: usize) -> Result<()> {
    if d > SUPEROP_D_MAX {
        return Err(Error::BudgetExceeded(format!("superoperators need d <= {SUPEROP_D_MAX}, got {d}")));
    }
    Ok(())
}

/// Dense matrix of `𝓛` acting on `vec ρ`.
pub fn lindblad_superoperator(ops: &OperatorSet) -> Result<CMatrix> {
    let d = ops.cfg.dim();
    check_budget(d)?;
    let id = CMatrix::identity(d, d);
    let h = ops.hamiltonian.to_dense();
    let mut l = (left_right_superop(&h, &id) - left_right_superop(&id, &h)) * (-I);
    for (c, cd) in ops.jumps.iter().zip(&ops.jump_adjoints) {
        l += left_right_superop(&c.to_dense(), &cd.to_dense());
    }
    let n = ops.damping.to_dense();
    l -= (left_right_superop(&n, &id) + left_right_superop(&id, &n)) * C64::new(0.5, 0.0);
    Ok(l)
}

/// The channel `Φ = exp(s𝓛)` applied at each Poisson arrival.
#[derive(Clone, Debug)]
pub struct JumpMap {
    pub cfg: FockConfig,
    pub matrix: CMatrix,
    /// Smallest eigenvalue of the Choi matrix.
    pub min_choi_eigenvalue: f64,
}

impl JumpMap {
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        unvec(&(&self.matrix * vec_col(rho)), self.cfg.dim())
    }
}

/// `Choi = Σ_{ij} |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`.
pub fn choi_matrix(phi: &CMatrix, d: usize) -> CMatrix {
    let mut choi = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            // vec(|i⟩⟨j|) has its one at j·d + i
            let col = phi.column(j * d + i);
            for a in 0..d {
                for b in 0..d {
                    choi[(i * d + a, j * d + b)] = col[b * d + a];
                }
            }
        }
    }
    choi
}

/// `Φ = exp(s𝓛)`, refused unless its Choi matrix is positive to [`CHOI_TOL`].
pub fn poisson_jump_map(ops: &OperatorSet, duration: f64) -> Result<JumpMap> {
    let d = ops.cfg.dim();
    let l = lindblad_superoperator(ops)?;
    let matrix = expm(&(l * C64::new(duration, 0.0)));
    let choi = choi_matrix(&matrix, d);
    let herm = (&choi + choi.adjoint()) * C64::new(0.5, 0.0);
    let min_choi_eigenvalue = hermitian_eigenvalues(&herm)[0];
    if min_choi_eigenvalue < -CHOI_TOL {
        return Err(Error::InvalidState(format!(
            "jump map is not completely positive: Choi eigenvalue {min_choi_eigenvalue:.3e}"
        )));
    }
    Ok(JumpMap { cfg: ops.cfg, matrix, min_choi_eigenvalue })
}

/// Solves `dρ/dt = Σ_j λ_j(Φ_j(ρ) − ρ)` exactly by exponentiating the
/// averaged generator over each output step.
pub fn integrate_poisson_master(rho0: &CMatrix, processes: &[(f64, &JumpMap)], times: &[f64]) -> Result<FockTrajectory> {
    let cfg = processes.first().map(|p| p.1.cfg).ok_or_else(|| Error::InvalidPoisson("no processes".into()))?;
    let d = cfg.dim();
    if rho0.nrows() != d || rho0.ncols() != d || processes.iter().any(|p| p.1.cfg != cfg) {
        return Err(Error::LengthMismatch { expected: d, found: rho0.nrows() });
    }
    let mut gen = CMatrix::zeros(d * d, d * d);
    for (rate, map) in processes {
        gen += (&map.matrix - CMatrix::identity(d * d, d * d)) * C64::new(*rate, 0.0);
    }
    let states = propagate_exp(&gen, rho0, times)?;
    Ok(FockTrajectory::new(cfg, times.to_vec(), states))
}

/// `conj(C) ⊗ C`, the matrix of `ρ ↦ CρC†`.
pub fn sandwich(c: &CMatrix) -> CMatrix {
    conj(c).kronecker(c)
}
