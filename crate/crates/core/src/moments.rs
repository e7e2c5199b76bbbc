//! Moment hierarchies `⟨𝔞_{i₁}…𝔞_{i_k}⟩`, the partition combinatorics of the
//! Heisenberg solution, and its evaluation on a propagator bundle.
//!
//! An order-`k` tensor is stored dense and row-major over `k` phase indices:
//! slot 0 is the leftmost operator and the most significant digit.

use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::algebra::PhaseSpace;
use crate::defaults::M_MAX;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64, ONE, ZERO};
use crate::propagators::{check_drift_dim, DriftData, PropagatorBundle};

/// `d^k` entries of an order-`k` tensor over a `d`-dimensional phase index.
pub fn tensor_len(d: usize, k: usize) -> usize {
    d.pow(k as u32)
}

/// Phase indices of slots `0..k` for flat index `flat`.
pub fn decode_index(mut flat: usize, d: usize, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for s in (0..k).rev() {
        out[s] = flat % d;
        flat /= d;
    }
    out
}

pub fn encode_index(digits: &[usize], d: usize) -> usize {
    digits.iter().fold(0, |acc, &i| acc * d + i)
}

/// Applies `m` to slot `slot` of an order-`k` tensor.
pub fn apply_slot(tensor: &[C64], d: usize, k: usize, slot: usize, m: &CMatrix) -> Vec<C64> {
    let stride = tensor_len(d, k - 1 - slot);
    let block = stride * d;
    let mut out = vec![ZERO; tensor.len()];
    for base in (0..tensor.len()).step_by(block) {
        for r in 0..d {
            for c in 0..d {
                let coef = m[(r, c)];
                if coef == ZERO {
                    continue;
                }
                let dst = base + r * stride;
                let src = base + c * stride;
                for o in 0..stride {
                    out[dst + o] += coef * tensor[src + o];
                }
            }
        }
    }
    out
}

/// `m^{⊗k}` applied to an order-`k` tensor.
pub fn apply_all_slots(tensor: &[C64], d: usize, k: usize, m: &CMatrix) -> Vec<C64> {
    let mut t = tensor.to_vec();
    for s in 0..k {
        t = apply_slot(&t, d, k, s, m);
    }
    t
}

/// Tensors `T_0 … T_m`, `T_0 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentHierarchy {
    space: PhaseSpace,
    tensors: Vec<Vec<C64>>,
}

impl MomentHierarchy {
    /// `tensors[k]` must hold `(2n)^k` entries and `tensors[0] = [1]`.
    pub fn new(n: usize, tensors: Vec<Vec<C64>>) -> Result<Self> {
        let space = PhaseSpace::new(n)?;
        let d = space.dim();
        if tensors.is_empty() {
            return Err(Error::InvalidDimension("a hierarchy needs at least the order-0 tensor".into()));
        }
        for (k, t) in tensors.iter().enumerate() {
            if t.len() != tensor_len(d, k) {
                return Err(Error::LengthMismatch { expected: tensor_len(d, k), found: t.len() });
            }
        }
        if (tensors[0][0] - ONE).norm() > 1e-12 {
            return Err(Error::InvalidState(format!("order-0 moment must be 1, got {}", tensors[0][0])));
        }
        Ok(Self { space, tensors })
    }

    /// Builds the hierarchy from a function of the slot indices.
    pub fn from_fn<F: FnMut(&[usize]) -> C64>(n: usize, order: usize, mut f: F) -> Result<Self> {
        let d = 2 * n;
        let tensors = (0..=order)
            .map(|k| (0..tensor_len(d, k)).map(|i| if k == 0 { ONE } else { f(&decode_index(i, d, k)) }).collect())
            .collect();
        Self::new(n, tensors)
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn modes(&self) -> usize {
        self.space.modes()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn order(&self) -> usize {
        self.tensors.len() - 1
    }

    pub fn tensor(&self, k: usize) -> &[C64] {
        &self.tensors[k]
    }

    pub fn tensors(&self) -> &[Vec<C64>] {
        &self.tensors
    }

    pub fn get(&self, indices: &[usize]) -> C64 {
        self.tensors[indices.len()][encode_index(indices, self.dim())]
    }

    /// Keeps orders `0..=order`.
    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(Error::OrderMismatch { expected: order, found: self.order() });
        }
        Ok(Self { space: self.space, tensors: self.tensors[..=order].to_vec() })
    }

    /// `T₁` as a vector.
    pub fn mean(&self) -> Result<CVector> {
        if self.order() < 1 {
            return Err(Error::OrderTooSmall { order: self.order(), min: 1 });
        }
        Ok(CVector::from_column_slice(&self.tensors[1]))
    }

    /// `T₂` as a matrix, row index on the left operator.
    pub fn second_moments(&self) -> Result<CMatrix> {
        if self.order() < 2 {
            return Err(Error::OrderTooSmall { order: self.order(), min: 2 });
        }
        Ok(CMatrix::from_row_slice(self.dim(), self.dim(), &self.tensors[2]))
    }

    /// All entries, order by order, as one flat vector.
    pub fn to_flat(&self) -> Vec<C64> {
        self.tensors.iter().flatten().copied().collect()
    }

    pub fn from_flat(n: usize, order: usize, flat: &[C64]) -> Result<Self> {
        let d = 2 * n;
        let mut tensors = Vec::with_capacity(order + 1);
        let mut off = 0;
        for k in 0..=order {
            let len = tensor_len(d, k);
            if off + len > flat.len() {
                return Err(Error::LengthMismatch { expected: off + len, found: flat.len() });
            }
            tensors.push(flat[off..off + len].to_vec());
            off += len;
        }
        Self::new(n, tensors)
    }

    /// Largest `|T₂ − T₂ᵀ + J|`: zero for moments of a state.
    pub fn ccr_defect(&self) -> Result<f64> {
        let t2 = self.second_moments()?;
        let j = self.space.structural().j;
        Ok(crate::linalg::max_abs(&(&t2 - t2.transpose() + j)))
    }

    /// Largest `|⟨𝔞_{i₁}…𝔞_{i_k}⟩* − ⟨𝔞_{ī_k}…𝔞_{ī_1}⟩|`, where `ī` is the
    /// adjoint index: moments of a Hermitian `ρ` satisfy this exactly.
    pub fn conjugation_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for k in 1..=self.order() {
            for (i, v) in self.tensors[k].iter().enumerate() {
                let digits = decode_index(i, d, k);
                let adj: Vec<usize> = digits.iter().rev().map(|&x| self.space.partner(x)).collect();
                worst = worst.max((v.conj() - self.get(&adj)).norm());
            }
        }
        worst
    }
}

/// One summand of the Heisenberg solution: slots carrying the drive integral
/// `ψ`, slots paired into noise kernels `β` (pairs ascending), and slots
/// carrying the initial moment.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartitionTerm {
    pub drive: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    pub initial: Vec<usize>,
}

impl PartitionTerm {
    /// `ψ_{I₁} β_{I₂} T(I₃)` evaluated at concrete slot indices.
    pub fn evaluate(&self, digits: &[usize], psi: &[C64], beta: &CMatrix, lower: &[Vec<C64>], d: usize) -> C64 {
        let mut v = ONE;
        for &s in &self.drive {
            v *= psi[digits[s]];
        }
        for &(s, u) in &self.pairs {
            v *= beta[(digits[s], digits[u])];
        }
        if v == ZERO {
            return ZERO;
        }
        let mut idx = 0;
        for &s in &self.initial {
            idx = idx * d + digits[s];
        }
        v * lower[self.initial.len()][idx]
    }
}

fn enumerate_slots(k: usize) -> Vec<PartitionTerm> {
    #[derive(Clone, Copy, PartialEq)]
    enum Role {
        Free,
        Drive,
        Initial,
        Paired,
    }
    fn go(s: usize, roles: &mut Vec<Role>, pairs: &mut Vec<(usize, usize)>, out: &mut Vec<PartitionTerm>) {
        let k = roles.len();
        if s == k {
            let pick = |r: Role| (0..k).filter(|&i| roles[i] == r).collect::<Vec<_>>();
            let mut p = pairs.clone();
            p.sort_unstable();
            out.push(PartitionTerm { drive: pick(Role::Drive), pairs: p, initial: pick(Role::Initial) });
            return;
        }
        if roles[s] == Role::Paired {
            return go(s + 1, roles, pairs, out);
        }
        for r in [Role::Drive, Role::Initial] {
            roles[s] = r;
            go(s + 1, roles, pairs, out);
        }
        for u in s + 1..k {
            if roles[u] == Role::Free {
                roles[s] = Role::Paired;
                roles[u] = Role::Paired;
                pairs.push((s, u));
                go(s + 1, roles, pairs, out);
                pairs.pop();
                roles[u] = Role::Free;
            }
        }
        roles[s] = Role::Free;
    }
    let mut out = Vec::new();
    go(0, &mut vec![Role::Free; k], &mut Vec::new(), &mut out);
    out
}

static PARTITIONS: [OnceLock<Arc<Vec<PartitionTerm>>>; M_MAX + 1] = [const { OnceLock::new() }; M_MAX + 1];

/// Every `(I₁, I₂ with a perfect matching, I₃)` decomposition of slots
/// `0..k`, each exactly once. Memoized per order.
pub fn enumerate_partitions(k: usize) -> Result<Arc<Vec<PartitionTerm>>> {
    enumerate_partitions_with_max(k, M_MAX)
}

pub fn enumerate_partitions_with_max(k: usize, max: usize) -> Result<Arc<Vec<PartitionTerm>>> {
    if k > max {
        return Err(Error::OrderTooLarge { order: k, max });
    }
    match PARTITIONS.get(k) {
        Some(cell) => Ok(cell.get_or_init(|| Arc::new(enumerate_slots(k))).clone()),
        None => Ok(Arc::new(enumerate_slots(k))),
    }
}

/// `Σ_{j+2p+r=k} k!/(j!(2p)!r!)·(2p−1)!!`.
pub fn partition_count(k: usize) -> u128 {
    let fact = |n: usize| (1..=n as u128).product::<u128>();
    let dfact = |n: usize| (1..=n as u128).rev().step_by(2).product::<u128>();
    let mut total = 0;
    for p in 0..=k / 2 {
        for j in 0..=k - 2 * p {
            let r = k - 2 * p - j;
            total += fact(k) / (fact(j) * fact(2 * p) * fact(r)) * if p == 0 { 1 } else { dfact(2 * p - 1) };
        }
    }
    total
}

/// Time derivatives `dT_k/dt` of the Heisenberg flow (order 0 has derivative 0).
pub fn heisenberg_rhs(hier: &MomentHierarchy, drift: &DriftData) -> Result<Vec<Vec<C64>>> {
    check_drift_dim(hier.space(), drift)?;
    let d = hier.dim();
    let mut out = vec![vec![ZERO]];
    for k in 1..=hier.order() {
        let t = hier.tensor(k);
        let mut acc = vec![ZERO; t.len()];
        for s in 0..k {
            for (a, v) in acc.iter_mut().zip(apply_slot(t, d, k, s, &drift.b)) {
                *a += v;
            }
        }
        let lower1 = hier.tensor(k - 1);
        let lower2 = if k >= 2 { Some(hier.tensor(k - 2)) } else { None };
        acc.par_iter_mut().enumerate().for_each(|(i, a)| {
            let digits = decode_index(i, d, k);
            for s in 0..k {
                let rest: Vec<usize> = (0..k).filter(|&x| x != s).map(|x| digits[x]).collect();
                *a += drift.phi[digits[s]] * lower1[encode_index(&rest, d)];
            }
            if let Some(l2) = lower2 {
                for s in 0..k {
                    for u in s + 1..k {
                        let xi = drift.xi[(digits[s], digits[u])];
                        if xi == ZERO {
                            continue;
                        }
                        let rest: Vec<usize> = (0..k).filter(|&x| x != s && x != u).map(|x| digits[x]).collect();
                        *a += xi * l2[encode_index(&rest, d)];
                    }
                }
            }
        });
        out.push(acc);
    }
    Ok(out)
}

/// Moments at grid time `t` from the Heisenberg solution
/// `T_I(t) = G_I(t) Σ ψ_{I₁}(t) β_{I₂}(t) T_{I₃}(0)`.
pub fn evolve_hierarchy(initial: &MomentHierarchy, bundle: &PropagatorBundle, t: f64) -> Result<MomentHierarchy> {
    let idx = bundle.index_of(t)?;
    evolve_at(initial, bundle, idx)
}

/// As [`evolve_hierarchy`] at grid index `idx`.
pub fn evolve_at(initial: &MomentHierarchy, bundle: &PropagatorBundle, idx: usize) -> Result<MomentHierarchy> {
    if idx >= bundle.len() {
        return Err(Error::OffGrid(f64::NAN));
    }
    if bundle.dim() != initial.dim() {
        return Err(Error::LengthMismatch { expected: initial.dim(), found: bundle.dim() });
    }
    let d = initial.dim();
    let psi: Vec<C64> = bundle.psi(idx).iter().copied().collect();
    let beta = bundle.beta(idx);
    let g = bundle.g(idx);
    let mut tensors = vec![vec![ONE]];
    for k in 1..=initial.order() {
        let terms = enumerate_partitions(k)?;
        let lower = &initial.tensors()[..=k];
        let summed: Vec<C64> = (0..tensor_len(d, k))
            .into_par_iter()
            .map(|i| {
                let digits = decode_index(i, d, k);
                terms.iter().map(|term| term.evaluate(&digits, &psi, beta, lower, d)).sum()
            })
            .collect();
        tensors.push(apply_all_slots(&summed, d, k, g));
    }
    MomentHierarchy::new(initial.modes(), tensors)
}

/// `D = T₂ − T₁T₁ᵀ`.
pub fn central_second_moment(hier: &MomentHierarchy) -> Result<CMatrix> {
    let t2 = hier.second_moments()?;
    let mu = hier.mean()?;
    Ok(t2 - &mu * mu.transpose())
}

/// Error of `value` against `reference` for one order, relative to the
/// largest reference entry of that order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderError {
    pub order: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    pub mean_rel: f64,
}

pub fn compare_hierarchies(value: &MomentHierarchy, reference: &MomentHierarchy) -> Result<Vec<OrderError>> {
    if value.dim() != reference.dim() {
        return Err(Error::LengthMismatch { expected: reference.dim(), found: value.dim() });
    }
    let m = value.order().min(reference.order());
    Ok((1..=m)
        .map(|k| {
            let (a, b) = (value.tensor(k), reference.tensor(k));
            let scale = b.iter().fold(0.0f64, |s, z| s.max(z.norm())).max(f64::MIN_POSITIVE);
            let errs: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).norm()).collect();
            let max_abs = errs.iter().copied().fold(0.0, f64::max);
            OrderError {
                order: k,
                max_abs,
                max_rel: max_abs / scale,
                mean_rel: errs.iter().sum::<f64>() / errs.len() as f64 / scale,
            }
        })
        .collect())
}

/// Writes hierarchies as CSV rows `t,order,index,re,im`.
///
/// The index column joins the slot indices with `:` (empty for order 0).
/// Floats carry 17 significant digits, so reading the file back reproduces
/// every value bit for bit. Comment lines starting with `#` carry `n`, `m`
/// and any extra metadata (such as the seed).
pub fn write_records<W: Write>(mut out: W, records: &[(f64, &MomentHierarchy)], meta: &[(&str, String)]) -> Result<()> {
    let (n, m) = records.first().map_or((0, 0), |(_, h)| (h.modes(), h.order()));
    write!(out, "# n={n} m={m}")?;
    for (k, v) in meta {
        write!(out, " {k}={v}")?;
    }
    writeln!(out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "order", "index", "re", "im"]).map_err(csv_err)?;
    for (t, h) in records {
        let d = h.dim();
        for k in 0..=h.order() {
            for (i, v) in h.tensor(k).iter().enumerate() {
                let index = decode_index(i, d, k).iter().map(|x| x.to_string()).collect::<Vec<_>>().join(":");
                w.write_record([
                    format!("{t:.16e}"),
                    k.to_string(),
                    index,
                    format!("{:.16e}", v.re),
                    format!("{:.16e}", v.im),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads what [`write_records`] wrote: `(t, hierarchy)` in file order.
pub fn read_records<R: Read>(input: R) -> Result<Vec<(f64, MomentHierarchy)>> {
    let mut text = String::new();
    let mut input = input;
    input.read_to_string(&mut text)?;
    let header = text.lines().next().ok_or_else(|| Error::Record("empty input".into()))?;
    let field = |key: &str| -> Result<usize> {
        header
            .split_whitespace()
            .find_map(|tok| tok.strip_prefix(&format!("{key}=")))
            .ok_or_else(|| Error::Record(format!("header lacks {key}")))?
            .parse()
            .map_err(|e| Error::Record(format!("bad {key}: {e}")))
    };
    let (n, m) = (field("n")?, field("m")?);
    let d = 2 * n;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut out: Vec<(f64, Vec<C64>)> = Vec::new();
    let per_time: usize = (0..=m).map(|k| tensor_len(d, k)).sum();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let parse = |i: usize| -> Result<f64> {
            row.get(i).ok_or_else(|| Error::Record("short row".into()))?.parse().map_err(|e| Error::Record(format!("{e}")))
        };
        let t = parse(0)?;
        let z = C64::new(parse(3)?, parse(4)?);
        match out.last_mut() {
            Some((tl, vals)) if *tl == t && vals.len() < per_time => vals.push(z),
            _ => out.push((t, vec![z])),
        }
    }
    out.into_iter().map(|(t, flat)| Ok((t, MomentHierarchy::from_flat(n, m, &flat)?))).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Record(e.to_string())
}
