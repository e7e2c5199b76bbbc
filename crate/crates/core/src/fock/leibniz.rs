//! The product rule obeyed by the Heisenberg-picture GKSL generator,
//! checked on arbitrary finite matrices.

use crate::error::{Error, Result};
use crate::linalg::{commutator, max_abs, CMatrix, I};

/// `𝓛*(X) = i[Ĥ, X] + ½Σ_j([Ĉ_j†, X]Ĉ_j + Ĉ_j†[X, Ĉ_j])` on dense matrices.
pub fn heisenberg_generator_dense(h: &CMatrix, jumps: &[CMatrix], x: &CMatrix) -> CMatrix {
    let mut out = commutator(h, x) * I;
    for c in jumps {
        let cd = c.adjoint();
        out += (commutator(&cd, x) * c + &cd * commutator(x, c)) * crate::linalg::real_scalar(0.5);
    }
    out
}

/// Absolute residual of the product rule and the largest magnitude among
/// the terms that enter it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeibnizResidual {
    pub absolute: f64,
    pub scale: f64,
}

impl LeibnizResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.absolute
        } else {
            self.absolute / self.scale
        }
    }
}

/// Max-abs of `𝓛*(X₁…X_m) − Σ_k X₁…𝓛*(X_k)…X_m
/// − Σ_{k<l} Σ_j X₁…[Ĉ_j†, X_k]…[X_l, Ĉ_j]…X_m`.
pub fn leibniz_residual(h: &CMatrix, jumps: &[CMatrix], xs: &[CMatrix]) -> Result<LeibnizResidual> {
    let d = h.nrows();
    if xs.is_empty() {
        return Err(Error::InvalidDimension("the product rule needs at least one factor".into()));
    }
    for m in std::iter::once(h).chain(jumps).chain(xs) {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::LengthMismatch { expected: d, found: m.nrows().max(m.ncols()) });
        }
    }
    let m = xs.len();
    let id = CMatrix::identity(d, d);
    // prefix[k] = X₁…X_k, suffix[k] = X_{k+1}…X_m
    let mut prefix = vec![id.clone()];
    for x in xs {
        let next = prefix.last().unwrap() * x;
        prefix.push(next);
    }
    let mut suffix = vec![id.clone(); m + 1];
    for k in (0..m).rev() {
        suffix[k] = &xs[k] * &suffix[k + 1];
    }
    let lhs = heisenberg_generator_dense(h, jumps, &prefix[m]);
    let mut single = CMatrix::zeros(d, d);
    for k in 0..m {
        single += &prefix[k] * heisenberg_generator_dense(h, jumps, &xs[k]) * &suffix[k + 1];
    }
    let mut double = CMatrix::zeros(d, d);
    for c in jumps {
        let cd = c.adjoint();
        let left: Vec<CMatrix> = xs.iter().map(|x| commutator(&cd, x)).collect();
        let right: Vec<CMatrix> = xs.iter().map(|x| commutator(x, c)).collect();
        for k in 0..m {
            // middle = X_{k+1}…X_{l−1}, grown one factor per l
            let mut middle = id.clone();
            for l in k + 1..m {
                double += &prefix[k] * &left[k] * &middle * &right[l] * &suffix[l + 1];
                middle *= &xs[l];
            }
        }
    }
    let absolute = max_abs(&(&lhs - &single - &double));
    let scale = max_abs(&lhs).max(max_abs(&single)).max(max_abs(&double));
    Ok(LeibnizResidual { absolute, scale })
}
