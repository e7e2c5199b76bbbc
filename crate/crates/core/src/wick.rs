//! Isserlis–Wick synthesis of moment hierarchies from first moments and
//! second central moments, and the residual measuring non-Gaussianity.

use rayon::prelude::*;

use crate::algebra::PhaseSpace;
use crate::defaults::{M_MAX, TOL_STRUCT};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, CMatrix, CVector, C64, ONE, ZERO};
use crate::moments::{decode_index, tensor_len, MomentHierarchy};

/// First moments `μ` and central second moments `D` of a Gaussian state.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianData {
    space: PhaseSpace,
    pub mu: CVector,
    pub d: CMatrix,
}

impl GaussianData {
    /// Checks `D − Dᵀ = −J` to [`TOL_STRUCT`].
    pub fn new(mu: CVector, d: CMatrix) -> Result<Self> {
        let g = Self::new_unchecked(mu, d)?;
        let defect = g.ccr_defect();
        if defect > TOL_STRUCT {
            return Err(Error::InvalidGaussian(format!("D - D^T differs from -J by {defect:.3e}")));
        }
        Ok(g)
    }

    /// Shape checks only.
    pub fn new_unchecked(mu: CVector, d: CMatrix) -> Result<Self> {
        if mu.len() % 2 != 0 || mu.is_empty() {
            return Err(Error::InvalidDimension(format!("first moments need even positive length, got {}", mu.len())));
        }
        let space = PhaseSpace::new(mu.len() / 2)?;
        space.check_mat(&d)?;
        Ok(Self { space, mu, d })
    }

    pub fn vacuum(n: usize) -> Result<Self> {
        Self::thermal(&vec![0.0; n])
    }

    /// Coherent state with amplitudes `alpha`: `μ = (α, ᾱ)`, vacuum `D`.
    pub fn coherent(alpha: &[C64]) -> Result<Self> {
        let n = alpha.len();
        let mut g = Self::vacuum(n)?;
        for (k, a) in alpha.iter().enumerate() {
            g.mu[k] = *a;
            g.mu[n + k] = a.conj();
        }
        Ok(g)
    }

    /// Product of thermal states with mean occupations `nbar`:
    /// `⟨a a†⟩ = n̄ + 1`, `⟨a† a⟩ = n̄`.
    pub fn thermal(nbar: &[f64]) -> Result<Self> {
        let n = nbar.len();
        let space = PhaseSpace::new(n)?;
        let mut d = CMatrix::zeros(2 * n, 2 * n);
        for (k, &occ) in nbar.iter().enumerate() {
            if !(occ >= 0.0) {
                return Err(Error::InvalidGaussian(format!("occupation {occ} of mode {k} is negative")));
            }
            d[(k, n + k)] = C64::new(occ + 1.0, 0.0);
            d[(n + k, k)] = C64::new(occ, 0.0);
        }
        Ok(Self { space, mu: CVector::zeros(2 * n), d })
    }

    /// `μ = T₁`, `D = T₂ − μμᵀ`, without the CCR check.
    pub fn from_hierarchy(hier: &MomentHierarchy) -> Result<Self> {
        let mu = hier.mean()?;
        let d = hier.second_moments()? - &mu * mu.transpose();
        Self::new_unchecked(mu, d)
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn modes(&self) -> usize {
        self.space.modes()
    }

    /// Largest `|D − Dᵀ + J|`.
    pub fn ccr_defect(&self) -> f64 {
        max_abs(&(&self.d - self.d.transpose() + self.space.structural().j))
    }

    /// Symmetric part `C = (D + Dᵀ)/2`.
    pub fn covariance(&self) -> CMatrix {
        (&self.d + self.d.transpose()) * C64::new(0.5, 0.0)
    }

    /// The same data with `μ` shifted by `delta`.
    pub fn displaced(&self, delta: &CVector) -> Result<Self> {
        self.space.check_vec(delta)?;
        Ok(Self { space: self.space, mu: &self.mu + delta, d: self.d.clone() })
    }
}

/// All perfect matchings of `0..k` with pairs ascending, in lexicographic
/// order; empty for odd `k`.
pub fn perfect_matchings(k: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(free: &mut Vec<usize>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let first = free.remove(0);
        for j in 0..free.len() {
            let partner = free.remove(j);
            cur.push((first, partner));
            go(free, cur, out);
            cur.pop();
            free.insert(j, partner);
        }
        free.insert(0, first);
    }
    if k % 2 == 1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    go(&mut (0..k).collect(), &mut Vec::new(), &mut out);
    out
}

/// `Σ_{matchings} Π D[i_s, i_u]` over pairs `s < u`: 1 for the empty
/// string, 0 for odd length.
pub fn pairing_sum_d(d: &CMatrix, indices: &[usize]) -> C64 {
    if indices.len() % 2 == 1 {
        return ZERO;
    }
    if indices.is_empty() {
        return ONE;
    }
    let (first, rest) = (indices[0], &indices[1..]);
    let mut total = ZERO;
    for s in 0..rest.len() {
        let w = d[(first, rest[s])];
        if w == ZERO {
            continue;
        }
        let others: Vec<usize> = rest.iter().enumerate().filter(|&(j, _)| j != s).map(|(_, &x)| x).collect();
        total += w * pairing_sum_d(d, &others);
    }
    total
}

/// `Σ_{I = I₁ ⊔ I₂} μ_{I₁} D_{I₂}` with `D_{I₂}` a pairing sum.
pub fn gaussian_moment(g: &GaussianData, indices: &[usize]) -> C64 {
    let Some((&first, rest)) = indices.split_first() else {
        return ONE;
    };
    let mut total = g.mu[first] * gaussian_moment(g, rest);
    for s in 0..rest.len() {
        let w = g.d[(first, rest[s])];
        if w == ZERO {
            continue;
        }
        let others: Vec<usize> = rest.iter().enumerate().filter(|&(j, _)| j != s).map(|(_, &x)| x).collect();
        total += w * gaussian_moment(g, &others);
    }
    total
}

/// Full hierarchy up to order `m`; checks the CCR skew part of `D`.
pub fn gaussian_hierarchy(g: &GaussianData, m: usize) -> Result<MomentHierarchy> {
    if m > M_MAX {
        return Err(Error::OrderTooLarge { order: m, max: M_MAX });
    }
    let defect = g.ccr_defect();
    if defect > TOL_STRUCT {
        return Err(Error::InvalidGaussian(format!("D - D^T differs from -J by {defect:.3e}")));
    }
    let dim = g.space.dim();
    let tensors = (0..=m)
        .map(|k| {
            (0..tensor_len(dim, k))
                .into_par_iter()
                .map(|i| gaussian_moment(g, &decode_index(i, dim, k)))
                .collect()
        })
        .collect();
    MomentHierarchy::new(g.modes(), tensors)
}

/// Largest entrywise deviation, over orders `3..=m`, between `hier` and the
/// Gaussian hierarchy with the same `μ` and `D`.
pub fn gaussianity_residual(hier: &MomentHierarchy) -> Result<f64> {
    if hier.order() < 3 {
        return Err(Error::OrderTooSmall { order: hier.order(), min: 3 });
    }
    let g = GaussianData::from_hierarchy(hier)?;
    let dim = hier.dim();
    let mut worst = 0.0f64;
    for k in 3..=hier.order() {
        let dev = hier
            .tensor(k)
            .par_iter()
            .enumerate()
            .map(|(i, v)| (v - gaussian_moment(&g, &decode_index(i, dim, k))).norm())
            .reduce(|| 0.0, f64::max);
        worst = worst.max(dev);
    }
    Ok(worst)
}
