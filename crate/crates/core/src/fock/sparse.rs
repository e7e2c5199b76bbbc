//! Triplet-list sparse operators: enough structure for ladder operators and
//! the low-degree polynomials built from them.

use std::collections::BTreeMap;

use crate::linalg::{CMatrix, C64, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    dim: usize,
    /// `(row, col, value)`, sorted by row then column, no duplicates or zeros.
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))))
    }

    /// Sums duplicates and drops exact zeros.
    pub fn from_triplets<T: IntoIterator<Item = (usize, usize, C64)>>(dim: usize, triplets: T) -> Self {
        let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside dimension {dim}");
            *acc.entry((r, c)).or_insert(ZERO) += v;
        }
        let entries = acc.into_iter().filter(|(_, v)| *v != ZERO).map(|((r, c), v)| (r, c, v)).collect();
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_triplets(self.dim, self.entries.iter().map(|&(r, c, v)| (r, c, s * v)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(self.dim, self.entries.iter().chain(&other.entries).copied())
    }

    /// `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim];
        for &(r, c, v) in &other.entries {
            rows[r].push((c, v));
        }
        let products = self
            .entries
            .iter()
            .flat_map(|&(r, k, v)| rows[k].iter().map(move |&(c, w)| (r, c, v * w)));
        Self::from_triplets(self.dim, products.collect::<Vec<_>>())
    }

    /// `self · x`.
    pub fn left_mul(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, x.ncols());
        for &(r, k, v) in &self.entries {
            for c in 0..x.ncols() {
                out[(r, c)] += v * x[(k, c)];
            }
        }
        out
    }

    /// `x · self`.
    pub fn right_mul(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(x.nrows(), self.dim);
        for &(k, c, v) in &self.entries {
            let src = x.column(k);
            let mut dst = out.column_mut(c);
            for r in 0..src.len() {
                dst[r] += src[r] * v;
            }
        }
        out
    }

    /// `tr(self · x)`.
    pub fn trace_mul(&self, x: &CMatrix) -> C64 {
        self.entries.iter().map(|&(r, k, v)| v * x[(k, r)]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::random::random_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(rng: &mut ChaCha8Rng, dim: usize) -> SparseOp {
        let dense = random_matrix(rng, dim, dim);
        SparseOp::from_triplets(dim, (0..dim).flat_map(|r| (0..dim).filter(move |c| (r + 2 * c) % 3 == 0).map(move |c| (r, c))).map(|(r, c)| (r, c, dense[(r, c)])))
    }

    #[test]
    fn products_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let a = random_sparse(&mut rng, 5);
        let b = random_sparse(&mut rng, 5);
        let x = random_matrix(&mut rng, 5, 5);
        let (ad, bd) = (a.to_dense(), b.to_dense());
        assert!(max_abs(&(a.mul(&b).to_dense() - &ad * &bd)) < 1e-14);
        assert!(max_abs(&(a.left_mul(&x) - &ad * &x)) < 1e-14);
        assert!(max_abs(&(a.right_mul(&x) - &x * &ad)) < 1e-14);
        assert!((a.trace_mul(&x) - (&ad * &x).trace()).norm() < 1e-14);
        assert_eq!(a.adjoint().to_dense(), ad.adjoint());
        assert!(max_abs(&(a.add(&b).to_dense() - (&ad + &bd))) < 1e-15);
    }

    #[test]
    fn duplicates_merge_and_zeros_vanish() {
        let one = C64::new(1.0, 0.0);
        let s = SparseOp::from_triplets(2, [(0, 1, one), (0, 1, one), (1, 0, one), (1, 0, -one)]);
        assert_eq!(s.nnz(), 1);
        assert_eq!(s.entries()[0], (0, 1, C64::new(2.0, 0.0)));
        assert_eq!(SparseOp::identity(3).to_dense(), CMatrix::identity(3, 3));
    }
}
