//! Dense truncated-Fock-space oracle.
//!
//! Each mode keeps occupations `0..cutoff`; the joint basis index puts mode 0
//! in the most significant position. Density matrices are dense, ladder
//! operators and the generator pieces built from them are sparse.
//!
//! Truncation breaks `[a, a†] = 1` on the top level, so every run reports the
//! population near the cutoff and [`run_guarded`] enlarges the cutoff when
//! that population is not negligible.

pub mod leibniz;
pub mod sparse;
pub mod superop;

use std::collections::HashMap;

use rayon::prelude::*;

pub use leibniz::{heisenberg_generator_dense, leibniz_residual, LeibnizResidual};
pub use sparse::SparseOp;
pub use superop::{
    choi_matrix, integrate_poisson_master, left_right_superop, lindblad_superoperator, poisson_jump_map, unvec, vec_col,
    JumpMap,
};

use crate::algebra::QuadraticGenerator;
use crate::defaults::{CUTOFF_CAP, D_MAX, LEAKAGE_THRESHOLD, SUPEROP_D_MAX};
use crate::error::{Error, Result};
use crate::linalg::{expm, hermitian_eigenvalues, max_abs, CMatrix, CVector, C64, I, ONE, ZERO};
use crate::moments::{decode_index, tensor_len, MomentHierarchy};
use crate::ode::{self, OdeOptions};
use crate::poisson::PoissonModel;
use crate::propagators::Segment;

/// Modes and per-mode occupation cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FockConfig {
    modes: usize,
    cutoff: usize,
}

impl FockConfig {
    /// Refuses joint dimensions above [`D_MAX`].
    pub fn new(modes: usize, cutoff: usize) -> Result<Self> {
        Self::with_limit(modes, cutoff, D_MAX)
    }

    pub fn with_limit(modes: usize, cutoff: usize, max_dim: usize) -> Result<Self> {
        if modes == 0 || cutoff < 2 {
            return Err(Error::InvalidDimension(format!("need at least one mode and cutoff 2, got {modes} and {cutoff}")));
        }
        let dim = (cutoff as u128).checked_pow(modes as u32).unwrap_or(u128::MAX);
        if dim > max_dim as u128 {
            return Err(Error::BudgetExceeded(format!("Fock dimension {cutoff}^{modes} exceeds {max_dim}")));
        }
        Ok(Self { modes, cutoff })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff.pow(self.modes as u32)
    }

    /// Basis index of the occupation tuple.
    pub fn index(&self, occupations: &[usize]) -> usize {
        occupations.iter().fold(0, |acc, &k| acc * self.cutoff + k)
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        decode_index(index, self.cutoff, self.modes)
    }

    fn stride(&self, mode: usize) -> usize {
        self.cutoff.pow((self.modes - 1 - mode) as u32)
    }
}

/// Initial states the oracle can prepare.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Vacuum,
    /// Product of coherent states, renormalized after truncation.
    Coherent(Vec<C64>),
    /// Number state with the given occupation per mode.
    Fock(Vec<usize>),
    /// Product of thermal states with these mean occupations, renormalized
    /// after truncation.
    Thermal(Vec<f64>),
}

impl InitialState {
    pub fn density_matrix(&self, cfg: &FockConfig) -> Result<CMatrix> {
        let n = cfg.modes();
        let nc = cfg.cutoff();
        let check_len = |len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(Error::LengthMismatch { expected: n, found: len })
            }
        };
        match self {
            InitialState::Vacuum => InitialState::Fock(vec![0; n]).density_matrix(cfg),
            InitialState::Fock(occ) => {
                check_len(occ.len())?;
                if let Some(&k) = occ.iter().find(|&&k| k >= nc) {
                    return Err(Error::InvalidState(format!("occupation {k} is not below the cutoff {nc}")));
                }
                let mut rho = CMatrix::zeros(cfg.dim(), cfg.dim());
                let i = cfg.index(occ);
                rho[(i, i)] = ONE;
                Ok(rho)
            }
            InitialState::Coherent(alpha) => {
                check_len(alpha.len())?;
                let factors: Vec<Vec<C64>> = alpha
                    .iter()
                    .map(|a| {
                        let mut amp = vec![ONE; nc];
                        for k in 1..nc {
                            amp[k] = amp[k - 1] * a / (k as f64).sqrt();
                        }
                        let norm = amp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                        amp.into_iter().map(|z| z / norm).collect()
                    })
                    .collect();
                let psi = CVector::from_fn(cfg.dim(), |i, _| {
                    cfg.occupations(i).iter().zip(&factors).map(|(&k, f)| f[k]).product()
                });
                Ok(&psi * psi.adjoint())
            }
            InitialState::Thermal(nbar) => {
                check_len(nbar.len())?;
                if let Some(x) = nbar.iter().find(|x| !(**x >= 0.0)) {
                    return Err(Error::InvalidState(format!("mean occupation {x} is negative")));
                }
                let probs: Vec<Vec<f64>> = nbar
                    .iter()
                    .map(|&nb| {
                        let q = nb / (1.0 + nb);
                        let p: Vec<f64> = (0..nc).map(|k| q.powi(k as i32)).collect();
                        let total: f64 = p.iter().sum();
                        p.into_iter().map(|x| x / total).collect()
                    })
                    .collect();
                let diag = CVector::from_fn(cfg.dim(), |i, _| {
                    C64::new(cfg.occupations(i).iter().zip(&probs).map(|(&k, p)| p[k]).product(), 0.0)
                });
                Ok(CMatrix::from_diagonal(&diag))
            }
        }
    }
}

/// Checks Hermiticity and unit trace to `1e-10` and eigenvalues `≥ −1e-9`.
pub fn validate_state(rho: &CMatrix) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::InvalidState("density matrix is not square".into()));
    }
    let herm = max_abs(&(rho - rho.adjoint()));
    if herm > 1e-10 {
        return Err(Error::InvalidState(format!("density matrix is not Hermitian ({herm:.3e})")));
    }
    let tr = rho.trace();
    if (tr - ONE).norm() > 1e-10 {
        return Err(Error::InvalidState(format!("trace is {tr}, not 1")));
    }
    let low = hermitian_eigenvalues(rho).first().copied().unwrap_or(0.0);
    if low < -1e-9 {
        return Err(Error::InvalidState(format!("eigenvalue {low:.3e} is negative")));
    }
    Ok(())
}

/// `𝔞_k` for every phase index `k` (annihilators, then creators).
pub fn ladder_operators(cfg: &FockConfig) -> Vec<SparseOp> {
    let d = cfg.dim();
    let annihilators: Vec<SparseOp> = (0..cfg.modes())
        .map(|mode| {
            let stride = cfg.stride(mode);
            SparseOp::from_triplets(
                d,
                (0..d).filter_map(|i| {
                    let occ = cfg.occupations(i)[mode];
                    (occ > 0).then(|| (i - stride, i, C64::new((occ as f64).sqrt(), 0.0)))
                }),
            )
        })
        .collect();
    let creators: Vec<SparseOp> = annihilators.iter().map(SparseOp::adjoint).collect();
    annihilators.into_iter().chain(creators).collect()
}

/// `Ĥ`, `Ĉ_j` and the pieces of the GKSL generator on a truncated space.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub cfg: FockConfig,
    pub ladder: Vec<SparseOp>,
    pub hamiltonian: SparseOp,
    pub jumps: Vec<SparseOp>,
    pub jump_adjoints: Vec<SparseOp>,
    /// `Σ_j Ĉ_j†Ĉ_j`.
    pub damping: SparseOp,
}

/// `Ĥ = ½Σ H_kl 𝔞_k𝔞_l + Σ f_k 𝔞_k`, `Ĉ_j = Σ (γ_j)_k 𝔞_k`.
pub fn build_operators(gen: &QuadraticGenerator, cfg: &FockConfig) -> Result<OperatorSet> {
    if gen.modes() != cfg.modes() {
        return Err(Error::LengthMismatch { expected: cfg.modes(), found: gen.modes() });
    }
    let ladder = ladder_operators(cfg);
    let d = cfg.dim();
    let dim2 = ladder.len();
    let mut hamiltonian = SparseOp::zeros(d);
    for k in 0..dim2 {
        for l in 0..dim2 {
            let h = gen.h[(k, l)];
            if h != ZERO {
                hamiltonian = hamiltonian.add(&ladder[k].mul(&ladder[l]).scale(h * 0.5));
            }
        }
        if gen.f[k] != ZERO {
            hamiltonian = hamiltonian.add(&ladder[k].scale(gen.f[k]));
        }
    }
    let jumps: Vec<SparseOp> = gen
        .jump_vectors()
        .iter()
        .map(|g| {
            (0..dim2)
                .filter(|&k| g[k] != ZERO)
                .fold(SparseOp::zeros(d), |acc, k| acc.add(&ladder[k].scale(g[k])))
        })
        .collect();
    let jump_adjoints: Vec<SparseOp> = jumps.iter().map(SparseOp::adjoint).collect();
    let damping = jumps.iter().zip(&jump_adjoints).fold(SparseOp::zeros(d), |acc, (c, cd)| acc.add(&cd.mul(c)));
    Ok(OperatorSet { cfg: *cfg, ladder, hamiltonian, jumps, jump_adjoints, damping })
}

fn check_square(x: &CMatrix, d: usize) -> Result<()> {
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::LengthMismatch { expected: d, found: x.nrows().max(x.ncols()) });
    }
    Ok(())
}

/// `𝓛(ρ) = −i[Ĥ, ρ] + Σ_j(Ĉ_jρĈ_j† − ½{Ĉ_j†Ĉ_j, ρ})`.
pub fn lindblad_rhs(rho: &CMatrix, ops: &OperatorSet) -> Result<CMatrix> {
    check_square(rho, ops.cfg.dim())?;
    Ok(lindblad_unchecked(rho, ops))
}

fn lindblad_unchecked(rho: &CMatrix, ops: &OperatorSet) -> CMatrix {
    let h = &ops.hamiltonian;
    let mut out = (h.left_mul(rho) - h.right_mul(rho)) * (-I);
    for (c, cd) in ops.jumps.iter().zip(&ops.jump_adjoints) {
        out += cd.right_mul(&c.left_mul(rho));
    }
    out -= (ops.damping.left_mul(rho) + ops.damping.right_mul(rho)) * C64::new(0.5, 0.0);
    out
}

/// `𝓛*(X) = i[Ĥ, X] + Σ_j(Ĉ_j†XĈ_j − ½{Ĉ_j†Ĉ_j, X})`, the trace dual of
/// [`lindblad_rhs`].
pub fn heisenberg_adjoint(x: &CMatrix, ops: &OperatorSet) -> Result<CMatrix> {
    check_square(x, ops.cfg.dim())?;
    let h = &ops.hamiltonian;
    let mut out = (h.left_mul(x) - h.right_mul(x)) * I;
    for (c, cd) in ops.jumps.iter().zip(&ops.jump_adjoints) {
        out += c.right_mul(&cd.left_mul(x));
    }
    out -= (ops.damping.left_mul(x) + ops.damping.right_mul(x)) * C64::new(0.5, 0.0);
    Ok(out)
}

/// Population of basis states with some mode at level `cutoff − 2` or above.
pub fn leakage(rho: &CMatrix, cfg: &FockConfig) -> f64 {
    let edge = cfg.cutoff().saturating_sub(2);
    (0..cfg.dim())
        .filter(|&i| cfg.occupations(i).iter().any(|&k| k >= edge))
        .map(|i| rho[(i, i)].re)
        .sum()
}

#[derive(Clone, Debug)]
pub struct FockTrajectory {
    pub cfg: FockConfig,
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    /// [`leakage`] of each state.
    pub leakage: Vec<f64>,
    /// Largest `|tr ρ(t) − tr ρ(0)|`.
    pub trace_drift: f64,
}

impl FockTrajectory {
    fn new(cfg: FockConfig, times: Vec<f64>, states: Vec<CMatrix>) -> Self {
        let leakage = states.iter().map(|r| leakage(r, &cfg)).collect();
        let t0 = states[0].trace();
        let trace_drift = states.iter().map(|r| (r.trace() - t0).norm()).fold(0.0, f64::max);
        Self { cfg, times, states, leakage, trace_drift }
    }

    pub fn max_leakage(&self) -> f64 {
        self.leakage.iter().copied().fold(0.0, f64::max)
    }

    pub fn leaked(&self) -> bool {
        self.max_leakage() > LEAKAGE_THRESHOLD
    }

    /// Moment hierarchy of every state.
    pub fn moments(&self, ops: &OperatorSet, m: usize) -> Result<Vec<MomentHierarchy>> {
        self.states.iter().map(|r| extract_moments(r, ops, m)).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MasterMethod {
    /// Adaptive Dormand–Prince on the density matrix.
    #[default]
    RungeKutta,
    /// Exponential of the vectorized generator (small dimensions only).
    SuperoperatorExp,
}

/// Solves `dρ/dt = 𝓛(ρ)` with the adaptive integrator at tolerance `tol`.
pub fn integrate_master(rho0: &CMatrix, ops: &OperatorSet, times: &[f64], tol: f64) -> Result<FockTrajectory> {
    integrate_master_with(rho0, ops, times, tol, MasterMethod::RungeKutta)
}

pub fn integrate_master_with(
    rho0: &CMatrix,
    ops: &OperatorSet,
    times: &[f64],
    tol: f64,
    method: MasterMethod,
) -> Result<FockTrajectory> {
    let d = ops.cfg.dim();
    check_square(rho0, d)?;
    let states = match method {
        MasterMethod::RungeKutta => {
            let sol = ode::integrate(
                |_, y, dy| {
                    let rho = CMatrix::from_column_slice(d, d, y);
                    dy.copy_from_slice(lindblad_unchecked(&rho, ops).as_slice());
                },
                rho0.as_slice(),
                times,
                OdeOptions::with_tol(tol),
            )?;
            sol.states.iter().map(|y| CMatrix::from_column_slice(d, d, y)).collect()
        }
        MasterMethod::SuperoperatorExp => {
            let l = lindblad_superoperator(ops)?;
            propagate_exp(&l, rho0, times)?
        }
    };
    Ok(FockTrajectory::new(ops.cfg, times.to_vec(), states))
}

/// `ρ(t_{i+1}) = exp(L·(t_{i+1} − t_i)) ρ(t_i)`, reusing the step exponential
/// for equal step lengths.
pub(crate) fn propagate_exp(l: &CMatrix, rho0: &CMatrix, times: &[f64]) -> Result<Vec<CMatrix>> {
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("output times must be nonempty and strictly increasing".into()));
    }
    let d = rho0.nrows();
    let mut cache: HashMap<u64, CMatrix> = HashMap::new();
    let mut v = vec_col(rho0);
    let mut out = vec![rho0.clone()];
    for w in times.windows(2) {
        let h = w[1] - w[0];
        // steps equal to ~12 digits share one exponential
        let key = (h * 1e12).round() as u64;
        let step = cache.entry(key).or_insert_with(|| expm(&(l * C64::new(h, 0.0))));
        v = &*step * v;
        out.push(unvec(&v, d));
    }
    Ok(out)
}

/// Outcome of a run whose cutoff was enlarged until the population near
/// the cutoff stayed below [`LEAKAGE_THRESHOLD`] or the cap was hit.
#[derive(Clone, Debug)]
pub struct GuardedRun {
    pub trajectory: FockTrajectory,
    pub ops: OperatorSet,
    /// `(cutoff, max leakage)` of every attempt, in order.
    pub attempts: Vec<(usize, f64)>,
}

impl GuardedRun {
    pub fn cutoff(&self) -> usize {
        self.ops.cfg.cutoff()
    }

    pub fn leaked(&self) -> bool {
        self.trajectory.leaked()
    }

    pub fn moments(&self, m: usize) -> Result<Vec<MomentHierarchy>> {
        self.trajectory.moments(&self.ops, m)
    }
}

fn guarded<F>(modes: usize, cutoff: usize, max_dim: usize, mut run: F) -> Result<GuardedRun>
where
    F: FnMut(&FockConfig) -> Result<(FockTrajectory, OperatorSet)>,
{
    let mut cutoff = cutoff;
    let mut attempts = Vec::new();
    loop {
        let cfg = FockConfig::with_limit(modes, cutoff, max_dim)?;
        let (trajectory, ops) = run(&cfg)?;
        attempts.push((cutoff, trajectory.max_leakage()));
        let next = (2 * cutoff).min(CUTOFF_CAP);
        let can_grow = next > cutoff && FockConfig::with_limit(modes, next, max_dim).is_ok();
        if !trajectory.leaked() || !can_grow {
            return Ok(GuardedRun { trajectory, ops, attempts });
        }
        cutoff = next;
    }
}

/// Master-equation run that doubles the cutoff (up to [`CUTOFF_CAP`]) while
/// the leakage exceeds the threshold. A run that still leaks at the cap is
/// returned with [`GuardedRun::leaked`] set.
pub fn run_guarded(
    gen: &QuadraticGenerator,
    init: &InitialState,
    cutoff: usize,
    times: &[f64],
    tol: f64,
    method: MasterMethod,
) -> Result<GuardedRun> {
    gen.validated()?;
    let max_dim = if method == MasterMethod::SuperoperatorExp { SUPEROP_D_MAX } else { D_MAX };
    guarded(gen.modes(), cutoff, max_dim, |cfg| {
        let ops = build_operators(gen, cfg)?;
        let rho0 = init.density_matrix(cfg)?;
        Ok((integrate_master_with(&rho0, &ops, times, tol, method)?, ops))
    })
}

/// Master-equation run through a piecewise-constant schedule, with the same
/// cutoff guard as [`run_guarded`]. Segments start at `t = 0`; the last one
/// extends past its duration.
pub fn run_piecewise_guarded(
    segments: &[Segment],
    init: &InitialState,
    cutoff: usize,
    times: &[f64],
    tol: f64,
) -> Result<GuardedRun> {
    let modes = segments.first().ok_or_else(|| Error::InvalidGrid("empty schedule".into()))?.generator.modes();
    for seg in segments {
        seg.generator.validated()?;
        if seg.generator.modes() != modes {
            return Err(Error::LengthMismatch { expected: modes, found: seg.generator.modes() });
        }
    }
    let ends: Vec<f64> = segments
        .iter()
        .scan(0.0, |acc, seg| {
            *acc += seg.duration;
            Some(*acc)
        })
        .enumerate()
        .map(|(j, end)| if j + 1 == segments.len() { f64::INFINITY } else { end })
        .collect();
    guarded(modes, cutoff, D_MAX, |cfg| {
        let ops: Vec<OperatorSet> = segments.iter().map(|s| build_operators(&s.generator, cfg)).collect::<Result<_>>()?;
        let step = |rho: &CMatrix, j: usize, from: f64, to: f64| -> Result<CMatrix> {
            let traj = integrate_master(rho, &ops[j], &[from, to], tol)?;
            Ok(traj.states[1].clone())
        };
        let mut rho = init.density_matrix(cfg)?;
        let (mut now, mut j) = (0.0, 0);
        let mut states = Vec::with_capacity(times.len());
        for &t in times {
            if t < now {
                return Err(Error::InvalidGrid(format!("times must be ascending from 0, got {t} after {now}")));
            }
            while t > ends[j] {
                if ends[j] > now {
                    rho = step(&rho, j, now, ends[j])?;
                    now = ends[j];
                }
                j += 1;
            }
            if t > now {
                rho = step(&rho, j, now, t)?;
                now = t;
            }
            states.push(rho.clone());
        }
        let first = ops.into_iter().next().expect("segments are nonempty");
        Ok((FockTrajectory::new(*cfg, times.to_vec(), states), first))
    })
}

/// Poisson-averaged master equation `dρ/dt = Σ_j λ_j(Φ_j − 1)ρ` with the same
/// cutoff guard as [`run_guarded`].
pub fn run_poisson_guarded(model: &PoissonModel, init: &InitialState, cutoff: usize, times: &[f64]) -> Result<GuardedRun> {
    guarded(model.modes(), cutoff, SUPEROP_D_MAX, |cfg| {
        let mut maps = Vec::new();
        let mut ops_any = None;
        for spec in model.processes() {
            let ops = build_operators(&spec.generator, cfg)?;
            maps.push((spec.rate, poisson_jump_map(&ops, spec.jump_duration)?));
            ops_any.get_or_insert(ops);
        }
        let rho0 = init.density_matrix(cfg)?;
        let refs: Vec<(f64, &JumpMap)> = maps.iter().map(|(r, m)| (*r, m)).collect();
        let traj = integrate_poisson_master(&rho0, &refs, times)?;
        Ok((traj, ops_any.expect("a model has at least one process")))
    })
}

/// `T_k[i₁…i_k] = tr(𝔞_{i₁}…𝔞_{i_k} ρ)` for `k ≤ m`.
///
/// Products are built right to left and shared between index strings with a
/// common suffix; the outermost factor only enters through a trace.
pub fn extract_moments(rho: &CMatrix, ops: &OperatorSet, m: usize) -> Result<MomentHierarchy> {
    let d = ops.cfg.dim();
    check_square(rho, d)?;
    if m > crate::defaults::M_MAX {
        return Err(Error::OrderTooLarge { order: m, max: crate::defaults::M_MAX });
    }
    let tr = rho.trace();
    if (tr - ONE).norm() > 1e-8 {
        return Err(Error::InvalidState(format!("trace {tr} is not 1")));
    }
    let dim2 = ops.ladder.len();
    let mut tensors = vec![vec![ONE]];
    // level[s] = 𝔞_{s₁}…𝔞_{s_k} ρ for every string s of length k
    let mut level = vec![rho.clone()];
    for k in 1..=m {
        let entries: Vec<C64> = (0..tensor_len(dim2, k))
            .into_par_iter()
            .map(|i| ops.ladder[i / tensor_len(dim2, k - 1)].trace_mul(&level[i % tensor_len(dim2, k - 1)]))
            .collect();
        tensors.push(entries);
        if k < m {
            level = (0..tensor_len(dim2, k))
                .into_par_iter()
                .map(|i| ops.ladder[i / tensor_len(dim2, k - 1)].left_mul(&level[i % tensor_len(dim2, k - 1)]))
                .collect();
        }
    }
    MomentHierarchy::new(ops.cfg.modes(), tensors)
}
