//! Moment dynamics averaged over Poisson-distributed jumps.
//!
//! Each process applies the quadratic evolution for a fixed duration `s`
//! (default 1) at the arrival times of a rate-`λ` Poisson process. The
//! averaged moments obey `dT/dt = Σ_j λ_j (M_j − 1) T` where `M_j` is the
//! one-jump Heisenberg map on the stacked hierarchy. `M_j` only couples an
//! order to itself and to lower orders, so the system is block lower
//! triangular.

use std::sync::Arc;

use rayon::prelude::*;

use crate::algebra::{PhaseSpace, QuadraticGenerator};
use crate::defaults::{M_MAX_POISSON, STACKED_MAX_ORDER};
use crate::error::{Error, Result};
use crate::linalg::{expm, max_abs_slice, norm_inf, CMatrix, CVector, C64, ONE, ZERO};
use crate::moments::{apply_all_slots, decode_index, enumerate_partitions, tensor_len, MomentHierarchy, PartitionTerm};
use crate::propagators::{beta_constant, drift_data, propagator_constant, psi_constant, TimeGrid};
use crate::quadrature::{chebyshev_nodes, integrate_vec, ChebyshevInterpolant, QuadOptions};

/// A quadratic generator switched on for `jump_duration` at each arrival of
/// a rate-`rate` Poisson process.
#[derive(Clone, Debug)]
pub struct PoissonProcessSpec {
    pub rate: f64,
    pub generator: QuadraticGenerator,
    pub jump_duration: f64,
}

impl PoissonProcessSpec {
    /// Unit jump duration.
    pub fn new(rate: f64, generator: QuadraticGenerator) -> Result<Self> {
        Self::with_duration(rate, generator, 1.0)
    }

    pub fn with_duration(rate: f64, generator: QuadraticGenerator, jump_duration: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidPoisson(format!("rate must be positive and finite, got {rate}")));
        }
        if !(jump_duration > 0.0 && jump_duration.is_finite()) {
            return Err(Error::InvalidPoisson(format!("jump duration must be positive and finite, got {jump_duration}")));
        }
        generator.validated()?;
        Ok(Self { rate, generator, jump_duration })
    }

    pub fn modes(&self) -> usize {
        self.generator.modes()
    }
}

/// Independent Poisson processes acting on the same modes.
#[derive(Clone, Debug)]
pub struct PoissonModel {
    processes: Vec<PoissonProcessSpec>,
}

impl PoissonModel {
    pub fn new(processes: Vec<PoissonProcessSpec>) -> Result<Self> {
        let first = processes.first().ok_or_else(|| Error::InvalidPoisson("a model needs at least one process".into()))?;
        let n = first.modes();
        if let Some(p) = processes.iter().find(|p| p.modes() != n) {
            return Err(Error::InvalidPoisson(format!("processes act on {n} and {} modes", p.modes())));
        }
        Ok(Self { processes })
    }

    pub fn single(spec: PoissonProcessSpec) -> Self {
        Self { processes: vec![spec] }
    }

    pub fn processes(&self) -> &[PoissonProcessSpec] {
        &self.processes
    }

    pub fn modes(&self) -> usize {
        self.processes[0].modes()
    }

    pub fn total_rate(&self) -> f64 {
        self.processes.iter().map(|p| p.rate).sum()
    }
}

/// One-jump data at `t = s`: `G = e^{Bs}`, `ψ(s)`, `β(s)` and the dressed
/// forms `P = Gψ = ((e^{Bs} − 1)/B)φ`, `K = GβGᵀ` that enter the averaged
/// equations.
#[derive(Clone, Debug)]
pub struct OneStepCoefficients {
    pub rate: f64,
    pub g: CMatrix,
    pub psi: CVector,
    pub beta: CMatrix,
    pub dressed_psi: CVector,
    pub dressed_beta: CMatrix,
}

pub fn one_step_coefficients(spec: &PoissonProcessSpec) -> Result<OneStepCoefficients> {
    let drift = drift_data(&spec.generator)?;
    let s = spec.jump_duration;
    let g = propagator_constant(&drift.b, s);
    let psi = psi_constant(&drift.b, &drift.phi, s);
    let beta = beta_constant(&drift.b, &drift.xi, s);
    let dressed_psi = &g * &psi;
    let dressed_beta = &g * &beta * g.transpose();
    Ok(OneStepCoefficients { rate: spec.rate, g, psi, beta, dressed_psi, dressed_beta })
}

/// The one-jump map restricted to the lower-order part of order `k`:
/// `Σ_{I₃ ≠ I} P_{I₁} K_{I₂} (G^{⊗r} T_r)(I₃)`. `lower[r]` holds `T_r` for
/// `r < k`.
fn lower_coupling(c: &OneStepCoefficients, terms: &[PartitionTerm], d: usize, k: usize, lower: &[&[C64]]) -> Vec<C64> {
    let dressed: Vec<Vec<C64>> = (0..k).map(|r| apply_all_slots(lower[r], d, r, &c.g)).collect();
    let p: Vec<C64> = c.dressed_psi.iter().copied().collect();
    (0..tensor_len(d, k))
        .into_par_iter()
        .map(|i| {
            let digits = decode_index(i, d, k);
            terms
                .iter()
                .filter(|t| t.initial.len() < k)
                .map(|t| t.evaluate(&digits, &p, &c.dressed_beta, &dressed, d))
                .sum::<C64>()
                * c.rate
        })
        .collect()
}

/// `Σ_j λ_j (G_j^{⊗k} − 1) x`.
fn diagonal_apply(coefs: &[OneStepCoefficients], d: usize, k: usize, x: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; x.len()];
    for c in coefs {
        let gx = apply_all_slots(x, d, k, &c.g);
        for ((o, a), b) in out.iter_mut().zip(gx).zip(x) {
            *o += c.rate * (a - b);
        }
    }
    out
}

/// The averaged generator assembled as a dense matrix over the stacked
/// hierarchy `(T₀, T₁, …, T_m)`.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    space: PhaseSpace,
    order: usize,
    offsets: Vec<usize>,
    matrix: CMatrix,
}

impl BlockSystem {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    /// Stacked dimension `Σ_k (2n)^k`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Start of each order in the stacked vector, plus the total length.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Coupling from order `col` into order `row`.
    pub fn block(&self, row: usize, col: usize) -> CMatrix {
        let (r0, r1) = (self.offsets[row], self.offsets[row + 1]);
        let (c0, c1) = (self.offsets[col], self.offsets[col + 1]);
        self.matrix.view((r0, c0), (r1 - r0, c1 - c0)).into_owned()
    }

    /// `A·x` on a stacked vector.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), found: x.len() });
        }
        Ok((&self.matrix * CVector::from_column_slice(x)).iter().copied().collect())
    }
}

fn check_order(model: &PoissonModel, m: usize) -> Result<()> {
    if m > M_MAX_POISSON {
        return Err(Error::OrderTooLarge { order: m, max: M_MAX_POISSON });
    }
    PhaseSpace::new(model.modes()).map(|_| ())
}

/// Assembles `A = Σ_j λ_j (M_j − 1)` column by column from the lazy action.
pub fn build_block_system(model: &PoissonModel, m: usize) -> Result<BlockSystem> {
    check_order(model, m)?;
    let space = PhaseSpace::new(model.modes())?;
    let d = space.dim();
    let coefs = model.processes.iter().map(one_step_coefficients).collect::<Result<Vec<_>>>()?;
    let terms = (0..=m).map(enumerate_partitions).collect::<Result<Vec<_>>>()?;
    let mut offsets = vec![0];
    for k in 0..=m {
        offsets.push(offsets[k] + tensor_len(d, k));
    }
    let n_total = offsets[m + 1];
    let columns: Vec<Vec<C64>> = (0..n_total)
        .into_par_iter()
        .map(|col| {
            let mut unit = vec![ZERO; n_total];
            unit[col] = ONE;
            generator_apply(&coefs, &terms, d, m, &offsets, &unit)
        })
        .collect();
    let matrix = CMatrix::from_fn(n_total, n_total, |r, c| columns[c][r]);
    Ok(BlockSystem { space, order: m, offsets, matrix })
}

fn generator_apply(
    coefs: &[OneStepCoefficients],
    terms: &[Arc<Vec<PartitionTerm>>],
    d: usize,
    m: usize,
    offsets: &[usize],
    x: &[C64],
) -> Vec<C64> {
    let slices: Vec<&[C64]> = (0..=m).map(|k| &x[offsets[k]..offsets[k + 1]]).collect();
    let mut out = vec![ZERO; x.len()];
    for k in 1..=m {
        let seg = &mut out[offsets[k]..offsets[k + 1]];
        if slices[k].iter().any(|z| *z != ZERO) {
            for (o, v) in seg.iter_mut().zip(diagonal_apply(coefs, d, k, slices[k])) {
                *o += v;
            }
        }
        if slices[..k].iter().any(|s| s.iter().any(|z| *z != ZERO)) {
            for c in coefs {
                for (o, v) in seg.iter_mut().zip(lower_coupling(c, &terms[k], d, k, &slices[..k])) {
                    *o += v;
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PoissonSolver {
    /// Stacked exponential up to order 3, convolution above.
    #[default]
    Auto,
    /// `exp(A t)` on the assembled block system.
    Stacked,
    /// Order by order: each order is driven by interpolants of the lower ones.
    Convolution,
}

/// Averaged moments at every grid time, starting from `initial`.
pub fn evolve_poisson(
    model: &PoissonModel,
    initial: &MomentHierarchy,
    grid: &TimeGrid,
    solver: PoissonSolver,
) -> Result<Vec<MomentHierarchy>> {
    if initial.modes() != model.modes() {
        return Err(Error::LengthMismatch { expected: model.modes(), found: initial.modes() });
    }
    let m = initial.order();
    check_order(model, m)?;
    let stacked = match solver {
        PoissonSolver::Auto => m <= STACKED_MAX_ORDER,
        PoissonSolver::Stacked => true,
        PoissonSolver::Convolution => false,
    };
    if stacked {
        evolve_stacked(model, initial, grid)
    } else {
        evolve_convolution(model, initial, grid)
    }
}

fn evolve_stacked(model: &PoissonModel, initial: &MomentHierarchy, grid: &TimeGrid) -> Result<Vec<MomentHierarchy>> {
    let sys = build_block_system(model, initial.order())?;
    let y0 = CVector::from_vec(initial.to_flat());
    grid.times()
        .iter()
        .map(|&t| {
            let y = expm(&(sys.matrix() * C64::new(t, 0.0))) * &y0;
            let mut flat: Vec<C64> = y.iter().copied().collect();
            flat[0] = ONE;
            MomentHierarchy::from_flat(initial.modes(), initial.order(), &flat)
        })
        .collect()
}

/// `exp(A_kk t)·x` by a Taylor series on substeps with `‖A_kk‖t ≤ 1`.
fn diagonal_exp_action(coefs: &[OneStepCoefficients], d: usize, k: usize, x: &[C64], t: f64) -> Vec<C64> {
    if t == 0.0 {
        return x.to_vec();
    }
    let bound: f64 = coefs.iter().map(|c| c.rate * (norm_inf(&c.g).powi(k as i32) + 1.0)).sum();
    let steps = (bound * t).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut y = x.to_vec();
    for _ in 0..steps {
        let mut term = y.clone();
        let mut sum = y.clone();
        for j in 1..60 {
            term = diagonal_apply(coefs, d, k, &term);
            let scale = h / j as f64;
            term.iter_mut().for_each(|z| *z *= scale);
            for (s, z) in sum.iter_mut().zip(&term) {
                *s += z;
            }
            let tn = max_abs_slice(&term);
            if tn == 0.0 || tn <= 1e-17 * max_abs_slice(&sum) {
                break;
            }
        }
        y = sum;
    }
    y
}

enum LowerOrder {
    Constant(Vec<C64>),
    Interpolated(ChebyshevInterpolant),
}

impl LowerOrder {
    fn eval(&self, t: f64) -> Vec<C64> {
        match self {
            LowerOrder::Constant(v) => v.clone(),
            LowerOrder::Interpolated(p) => p.eval(t),
        }
    }
}

const CHEB_START: usize = 32;
const CHEB_CAP: usize = 512;
const CHEB_TAIL: f64 = 1e-14;

fn evolve_convolution(model: &PoissonModel, initial: &MomentHierarchy, grid: &TimeGrid) -> Result<Vec<MomentHierarchy>> {
    let m = initial.order();
    let d = initial.dim();
    let t_max = grid.last();
    let coefs = model.processes.iter().map(one_step_coefficients).collect::<Result<Vec<_>>>()?;
    let mut lower = vec![LowerOrder::Constant(vec![ONE])];
    let mut at_times: Vec<Vec<Vec<C64>>> = vec![vec![vec![ONE]]; grid.len()];
    for k in 1..=m {
        let terms = enumerate_partitions(k)?;
        let forcing = |tau: f64| -> Vec<C64> {
            let vals: Vec<Vec<C64>> = lower.iter().map(|l| l.eval(tau)).collect();
            let refs: Vec<&[C64]> = vals.iter().map(Vec::as_slice).collect();
            let mut f = vec![ZERO; tensor_len(d, k)];
            for c in &coefs {
                for (a, b) in f.iter_mut().zip(lower_coupling(c, &terms, d, k, &refs)) {
                    *a += b;
                }
            }
            f
        };
        let mut degree = CHEB_START;
        loop {
            let nodes = if t_max > 0.0 { chebyshev_nodes(0.0, t_max, degree) } else { vec![0.0] };
            let (node_vals, time_vals) = march(&coefs, d, k, initial.tensor(k), &nodes, grid.times(), &forcing)?;
            let converged = t_max == 0.0 || k == m || chebyshev_tail(&node_vals) <= CHEB_TAIL;
            if converged || degree >= CHEB_CAP {
                if !converged {
                    return Err(Error::Integration(format!(
                        "order-{k} interpolant did not resolve below degree {CHEB_CAP}"
                    )));
                }
                for (slot, v) in at_times.iter_mut().zip(time_vals) {
                    slot.push(v);
                }
                lower.push(LowerOrder::Interpolated(ChebyshevInterpolant::new(nodes, node_vals)));
                break;
            }
            degree *= 2;
        }
    }
    at_times
        .into_iter()
        .map(|tensors| MomentHierarchy::new(initial.modes(), tensors))
        .collect()
}

/// Steps `T_k` through the merged set of interpolation nodes and output
/// times with `T(τ+h) = e^{A h}T(τ) + ∫₀ʰ e^{A(h−u)} f(τ+u) du`.
fn march<F>(
    coefs: &[OneStepCoefficients],
    d: usize,
    k: usize,
    start: &[C64],
    nodes: &[f64],
    times: &[f64],
    forcing: &F,
) -> Result<(Vec<Vec<C64>>, Vec<Vec<C64>>)>
where
    F: Fn(f64) -> Vec<C64>,
{
    let span = times.last().copied().unwrap_or(0.0).max(1.0);
    let mut points: Vec<f64> = nodes.iter().chain(times).copied().collect();
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * span);
    let len = start.len();
    let mut values = Vec::with_capacity(points.len());
    let mut y = start.to_vec();
    values.push(y.clone());
    for w in points.windows(2) {
        let (t0, h) = (w[0], w[1] - w[0]);
        let mut next = diagonal_exp_action(coefs, d, k, &y, h);
        let conv = integrate_vec(
            |u| diagonal_exp_action(coefs, d, k, &forcing(t0 + u), h - u),
            0.0,
            h,
            len,
            QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_intervals: 2048 },
        )?;
        for (a, b) in next.iter_mut().zip(conv) {
            *a += b;
        }
        y = next;
        values.push(y.clone());
    }
    let lookup = |t: f64| -> Vec<C64> {
        let i = points.iter().position(|&p| (p - t).abs() <= 1e-14 * span).expect("every requested point was marched");
        values[i].clone()
    };
    Ok((nodes.iter().map(|&t| lookup(t)).collect(), times.iter().map(|&t| lookup(t)).collect()))
}

/// Largest of the last three Chebyshev coefficients relative to the largest
/// sampled value, per component.
fn chebyshev_tail(values: &[Vec<C64>]) -> f64 {
    let p = values.len() - 1;
    let len = values[0].len();
    let scale = values.iter().map(|v| max_abs_slice(v)).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for kk in p - 2..=p {
        let mut coef = vec![ZERO; len];
        for (j, v) in values.iter().enumerate() {
            let w = if j == 0 || j == p { 0.5 } else { 1.0 };
            let c = w * (std::f64::consts::PI * (kk * j) as f64 / p as f64).cos();
            for (a, b) in coef.iter_mut().zip(v) {
                *a += c * b;
            }
        }
        let norm = if kk == p { 1.0 } else { 2.0 } / p as f64;
        worst = worst.max(max_abs_slice(&coef) * norm);
    }
    worst / scale
}

/// Time derivative of the central second moments under one process:
/// `λ[GDGᵀ − D + (G−1)μμᵀ(G−1)ᵀ + Pμᵀ(G−1)ᵀ + (G−1)μPᵀ + PPᵀ + K]`.
pub fn d12_poisson_rhs(hier: &MomentHierarchy, spec: &PoissonProcessSpec) -> Result<CMatrix> {
    if hier.order() < 2 {
        return Err(Error::OrderTooSmall { order: hier.order(), min: 2 });
    }
    if hier.modes() != spec.modes() {
        return Err(Error::LengthMismatch { expected: spec.modes(), found: hier.modes() });
    }
    let c = one_step_coefficients(spec)?;
    let mu = hier.mean()?;
    let d = crate::moments::central_second_moment(hier)?;
    let gm = &c.g - CMatrix::identity(c.g.nrows(), c.g.ncols());
    let shift = &gm * &mu;
    let p = &c.dressed_psi;
    let rhs = &c.g * &d * c.g.transpose() - &d
        + &shift * shift.transpose()
        + p * shift.transpose()
        + &shift * p.transpose()
        + p * p.transpose()
        + &c.dressed_beta;
    Ok(rhs * C64::new(c.rate, 0.0))
}

/// [`d12_poisson_rhs`] summed over the processes of a model.
pub fn d12_poisson_rhs_model(hier: &MomentHierarchy, model: &PoissonModel) -> Result<CMatrix> {
    let mut total = CMatrix::zeros(hier.dim(), hier.dim());
    for spec in model.processes() {
        total += d12_poisson_rhs(hier, spec)?;
    }
    Ok(total)
}
