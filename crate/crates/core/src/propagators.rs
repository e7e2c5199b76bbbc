//! Drift data `(B, φ, Ξ)` and the propagator bundle `(G, ψ, β)`.
//!
//! `β` is stored as a `2n×2n` matrix whose row index belongs to the first
//! slot of a pair and column index to the second. The pair-space operator
//! `B₁ + B₂` is the Sylvester action `X ↦ BX + XBᵀ`.

use crate::algebra::{PhaseSpace, QuadraticGenerator};
use crate::defaults::SERIES_SWITCH;
use crate::error::{Error, Result};
use crate::linalg::{expm, max_abs, max_abs_vec, norm1, CMatrix, CVector, C64, I};
use crate::ode::{self, OdeOptions};

/// `B = J(iH + (Γᵀ − Γ)/2)`, `φ = iJf`, `Ξ = JΓᵀJ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftData {
    pub b: CMatrix,
    pub phi: CVector,
    pub xi: CMatrix,
}

impl DriftData {
    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn zero(n: usize) -> Self {
        let d = 2 * n;
        Self { b: CMatrix::zeros(d, d), phi: CVector::zeros(d), xi: CMatrix::zeros(d, d) }
    }

    /// Builds the drift without re-validating the generator.
    pub fn from_generator_unchecked(gen: &QuadraticGenerator) -> Self {
        let j = gen.space().structural().j;
        let gt = gen.gamma.transpose();
        let b = &j * (&gen.h * I + (&gt - &gen.gamma) * C64::new(0.5, 0.0));
        let phi = &j * &gen.f * I;
        let xi = &j * &gt * &j;
        Self { b, phi, xi }
    }

    fn lerp(&self, other: &Self, w: f64) -> Self {
        let a = C64::new(1.0 - w, 0.0);
        let c = C64::new(w, 0.0);
        Self {
            b: &self.b * a + &other.b * c,
            phi: &self.phi * a + &other.phi * c,
            xi: &self.xi * a + &other.xi * c,
        }
    }
}

pub fn drift_data(gen: &QuadraticGenerator) -> Result<DriftData> {
    gen.validated()?;
    Ok(DriftData::from_generator_unchecked(gen))
}

/// `G(t) = e^{Bt}`.
pub fn propagator_constant(b: &CMatrix, t: f64) -> CMatrix {
    expm(&(b * C64::new(t, 0.0)))
}

/// `ψ(t) = ∫₀ᵗ e^{−Bτ} φ dτ = ((1 − e^{−Bt})/B) φ`, well defined for singular `B`.
pub fn psi_constant(b: &CMatrix, phi: &CVector, t: f64) -> CVector {
    if norm1(b) * t.abs() < SERIES_SWITCH {
        return psi_series(b, phi, t);
    }
    let d = phi.len();
    let mut m = CMatrix::zeros(d + 1, d + 1);
    m.view_mut((0, 0), (d, d)).copy_from(&(-b * C64::new(t, 0.0)));
    m.view_mut((0, d), (d, 1)).copy_from(&(phi * C64::new(t, 0.0)));
    expm(&m).column(d).rows(0, d).into_owned()
}

fn psi_series(b: &CMatrix, phi: &CVector, t: f64) -> CVector {
    let mut term = phi * C64::new(t, 0.0);
    let mut sum = term.clone();
    for j in 2..80 {
        term = (b * &term) * C64::new(-t / j as f64, 0.0);
        sum += &term;
        if max_abs_vec(&term) <= 1e-17 * max_abs_vec(&sum) {
            break;
        }
    }
    sum
}

/// `β(t) = ∫₀ᵗ e^{−Bτ} Ξ e^{−Bᵀτ} dτ`.
pub fn beta_constant(b: &CMatrix, xi: &CMatrix, t: f64) -> CMatrix {
    if norm1(b) * t.abs() < SERIES_SWITCH {
        return beta_series(b, xi, t);
    }
    van_loan(b, xi, t).1
}

fn beta_series(b: &CMatrix, xi: &CMatrix, t: f64) -> CMatrix {
    let bt = b.transpose();
    let mut term = xi * C64::new(t, 0.0);
    let mut sum = term.clone();
    for j in 2..80 {
        term = (b * &term + &term * &bt) * C64::new(-t / j as f64, 0.0);
        sum += &term;
        if max_abs(&term) <= 1e-17 * max_abs(&sum) {
            break;
        }
    }
    sum
}

/// Returns `(e^{−Bt}, β(t))` from one exponential of `[[−B, Ξ], [0, Bᵀ]]·t`.
fn van_loan(b: &CMatrix, xi: &CMatrix, t: f64) -> (CMatrix, CMatrix) {
    let d = b.nrows();
    let tc = C64::new(t, 0.0);
    let mut m = CMatrix::zeros(2 * d, 2 * d);
    m.view_mut((0, 0), (d, d)).copy_from(&(-b * tc));
    m.view_mut((0, d), (d, d)).copy_from(&(xi * tc));
    m.view_mut((d, d), (d, d)).copy_from(&(b.transpose() * tc));
    let e = expm(&m);
    let f11 = e.view((0, 0), (d, d)).into_owned();
    // F12 = β(t) e^{Bᵀt}
    let beta = e.view((0, d), (d, d)) * f11.transpose();
    (f11, beta)
}

/// All constant-coefficient quantities over one interval of length `t`.
#[derive(Clone, Debug)]
struct ConstantStep {
    g: CMatrix,
    g_inv: CMatrix,
    psi: CVector,
    beta: CMatrix,
}

fn constant_step(drift: &DriftData, t: f64) -> ConstantStep {
    let g = propagator_constant(&drift.b, t);
    if norm1(&drift.b) * t.abs() < SERIES_SWITCH {
        ConstantStep {
            g,
            g_inv: propagator_constant(&drift.b, -t),
            psi: psi_series(&drift.b, &drift.phi, t),
            beta: beta_series(&drift.b, &drift.xi, t),
        }
    } else {
        let (g_inv, beta) = van_loan(&drift.b, &drift.xi, t);
        ConstantStep { g, g_inv, psi: psi_constant(&drift.b, &drift.phi, t), beta }
    }
}

/// Output times: starts at 0, strictly increasing, finite.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("grid must start at 0, starts at {}", times[0])));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite time".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("times must be strictly increasing".into()));
        }
        Ok(Self(times))
    }

    /// `steps + 1` equally spaced points on `[0, t_max]`.
    pub fn uniform(t_max: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Self::new(vec![0.0]);
        }
        Self::new((0..=steps).map(|k| t_max * k as f64 / steps as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Index of `t`, accepting a relative mismatch of 1e-12.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let scale = self.last().abs().max(1.0);
        self.0.iter().position(|&s| (s - t).abs() <= 1e-12 * scale).ok_or(Error::OffGrid(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Constant,
    TimeDependent,
}

/// `G(t)`, `ψ(t)`, `β(t)` (tilde picture) and `G(t)⁻¹` on a time grid.
#[derive(Clone, Debug)]
pub struct PropagatorBundle {
    grid: TimeGrid,
    g: Vec<CMatrix>,
    g_inv: Vec<CMatrix>,
    psi: Vec<CVector>,
    beta: Vec<CMatrix>,
    provenance: Provenance,
}

impl PropagatorBundle {
    /// Closed forms `G = e^{Bt}`, `ψ = ((1 − e^{−Bt})/B)φ`, `β = ((1 − e^{−(B₁+B₂)t})/(B₁+B₂))Ξ`.
    pub fn constant(drift: &DriftData, grid: &TimeGrid) -> Self {
        let steps: Vec<ConstantStep> = grid.times().iter().map(|&t| constant_step(drift, t)).collect();
        let mut bundle = Self::empty(grid.clone(), Provenance::Constant);
        for s in steps {
            bundle.g.push(s.g);
            bundle.g_inv.push(s.g_inv);
            bundle.psi.push(s.psi);
            bundle.beta.push(s.beta);
        }
        bundle
    }

    fn empty(grid: TimeGrid, provenance: Provenance) -> Self {
        let cap = grid.len();
        Self {
            grid,
            g: Vec::with_capacity(cap),
            g_inv: Vec::with_capacity(cap),
            psi: Vec::with_capacity(cap),
            beta: Vec::with_capacity(cap),
            provenance,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.psi[0].len()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.grid.index_of(t)
    }

    pub fn g(&self, k: usize) -> &CMatrix {
        &self.g[k]
    }

    pub fn g_inv(&self, k: usize) -> &CMatrix {
        &self.g_inv[k]
    }

    pub fn psi(&self, k: usize) -> &CVector {
        &self.psi[k]
    }

    pub fn beta(&self, k: usize) -> &CMatrix {
        &self.beta[k]
    }

    /// `G(t)ψ(t)`: the mean displacement accumulated from zero.
    pub fn dressed_psi(&self, k: usize) -> CVector {
        &self.g[k] * &self.psi[k]
    }

    /// `G(t)β(t)G(t)ᵀ`: the central second moment accumulated from zero.
    pub fn dressed_beta(&self, k: usize) -> CMatrix {
        &self.g[k] * &self.beta[k] * self.g[k].transpose()
    }
}

/// A constant-coefficient interval of a piecewise schedule.
#[derive(Clone, Debug)]
pub struct Segment {
    pub duration: f64,
    pub generator: QuadraticGenerator,
}

/// Coefficients `(H(t), f(t), Γ(t))`.
///
/// Piecewise segments run back to back from `t = 0`; the last segment (or the
/// last sample) extends indefinitely. Sampled schedules interpolate linearly
/// between samples, which keeps every interpolated generator valid.
#[derive(Clone, Debug)]
pub enum CoefficientSchedule {
    Constant(QuadraticGenerator),
    Piecewise(Vec<Segment>),
    Sampled { times: Vec<f64>, generators: Vec<QuadraticGenerator> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BundleMethod {
    /// Segment-exact exponentials for constant and piecewise schedules, RK otherwise.
    Auto,
    /// Adaptive Runge–Kutta for every schedule.
    Ode,
}

/// Validated schedule with precomputed drift data.
struct PreparedSchedule {
    starts: Vec<f64>,
    drifts: Vec<DriftData>,
    interpolate: bool,
}

impl PreparedSchedule {
    fn segment_at(&self, t: f64) -> usize {
        match self.starts.iter().rposition(|&s| s <= t) {
            Some(k) => k,
            None => 0,
        }
    }

    fn drift_at(&self, t: f64, hint: f64) -> DriftData {
        let k = self.segment_at(hint);
        if self.interpolate && k + 1 < self.starts.len() {
            let w = ((t - self.starts[k]) / (self.starts[k + 1] - self.starts[k])).clamp(0.0, 1.0);
            self.drifts[k].lerp(&self.drifts[k + 1], w)
        } else {
            self.drifts[k].clone()
        }
    }
}

impl CoefficientSchedule {
    pub fn modes(&self) -> Result<usize> {
        let first = match self {
            CoefficientSchedule::Constant(g) => Some(g),
            CoefficientSchedule::Piecewise(s) => s.first().map(|s| &s.generator),
            CoefficientSchedule::Sampled { generators, .. } => generators.first(),
        };
        first.map(|g| g.modes()).ok_or_else(|| Error::InvalidGrid("schedule has no generators".into()))
    }

    /// Interior switching times (segment boundaries or sample points).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            CoefficientSchedule::Constant(_) => Vec::new(),
            CoefficientSchedule::Piecewise(segs) => {
                let mut acc = 0.0;
                let mut out = Vec::new();
                for s in &segs[..segs.len().saturating_sub(1)] {
                    acc += s.duration;
                    out.push(acc);
                }
                out
            }
            CoefficientSchedule::Sampled { times, .. } => times.iter().copied().filter(|&t| t > 0.0).collect(),
        }
    }

    fn prepare(&self) -> Result<PreparedSchedule> {
        let n = self.modes()?;
        let gens: Vec<&QuadraticGenerator> = match self {
            CoefficientSchedule::Constant(g) => vec![g],
            CoefficientSchedule::Piecewise(s) => s.iter().map(|s| &s.generator).collect(),
            CoefficientSchedule::Sampled { generators, .. } => generators.iter().collect(),
        };
        let mut drifts = Vec::with_capacity(gens.len());
        for g in gens {
            if g.modes() != n {
                return Err(Error::InvalidDimension("schedule mixes mode counts".into()));
            }
            drifts.push(drift_data(g)?);
        }
        let (starts, interpolate) = match self {
            CoefficientSchedule::Constant(_) => (vec![0.0], false),
            CoefficientSchedule::Piecewise(segs) => {
                if segs.iter().any(|s| !(s.duration > 0.0) || !s.duration.is_finite()) {
                    return Err(Error::InvalidGrid("segment durations must be positive".into()));
                }
                let mut starts = vec![0.0];
                starts.extend(self.breakpoints());
                (starts, false)
            }
            CoefficientSchedule::Sampled { times, generators } => {
                if times.len() != generators.len() {
                    return Err(Error::LengthMismatch { expected: generators.len(), found: times.len() });
                }
                TimeGrid::new(times.clone())?;
                (times.clone(), true)
            }
        };
        Ok(PreparedSchedule { starts, drifts, interpolate })
    }
}

/// Builds the bundle with [`BundleMethod::Auto`].
pub fn integrate_bundle(schedule: &CoefficientSchedule, grid: &TimeGrid, tol_ode: f64) -> Result<PropagatorBundle> {
    integrate_bundle_with(schedule, grid, tol_ode, BundleMethod::Auto)
}

pub fn integrate_bundle_with(
    schedule: &CoefficientSchedule,
    grid: &TimeGrid,
    tol_ode: f64,
    method: BundleMethod,
) -> Result<PropagatorBundle> {
    let prepared = schedule.prepare()?;
    let provenance = match schedule {
        CoefficientSchedule::Constant(_) => Provenance::Constant,
        _ => Provenance::TimeDependent,
    };
    match (schedule, method) {
        (CoefficientSchedule::Constant(_), BundleMethod::Auto) => {
            Ok(PropagatorBundle::constant(&prepared.drifts[0], grid))
        }
        (CoefficientSchedule::Piecewise(_), BundleMethod::Auto) => Ok(piecewise_exact(&prepared, grid)),
        _ => integrate_ode(&prepared, grid, tol_ode, provenance),
    }
}

fn piecewise_exact(prepared: &PreparedSchedule, grid: &TimeGrid) -> PropagatorBundle {
    let d = prepared.drifts[0].dim();
    let mut bundle = PropagatorBundle::empty(grid.clone(), Provenance::TimeDependent);
    // state at the start of the current segment
    let mut seg = 0;
    let mut g0 = CMatrix::identity(d, d);
    let mut g0_inv = CMatrix::identity(d, d);
    let mut psi0 = CVector::zeros(d);
    let mut beta0 = CMatrix::zeros(d, d);
    for &t in grid.times() {
        while seg + 1 < prepared.starts.len() && prepared.starts[seg + 1] <= t {
            let len = prepared.starts[seg + 1] - prepared.starts[seg];
            let s = constant_step(&prepared.drifts[seg], len);
            psi0 += &g0_inv * &s.psi;
            beta0 += &g0_inv * &s.beta * g0_inv.transpose();
            g0 = &s.g * &g0;
            g0_inv = &g0_inv * &s.g_inv;
            seg += 1;
        }
        let s = constant_step(&prepared.drifts[seg], t - prepared.starts[seg]);
        bundle.psi.push(&psi0 + &g0_inv * &s.psi);
        bundle.beta.push(&beta0 + &g0_inv * &s.beta * g0_inv.transpose());
        bundle.g.push(&s.g * &g0);
        bundle.g_inv.push(&g0_inv * &s.g_inv);
    }
    bundle
}

/// Co-integrates `G' = BG`, `(G⁻¹)' = −G⁻¹B`, `ψ' = G⁻¹φ`, `β' = G⁻¹ΞG⁻ᵀ`,
/// restarting at every breakpoint so no step straddles a switch.
fn integrate_ode(prepared: &PreparedSchedule, grid: &TimeGrid, tol: f64, provenance: Provenance) -> Result<PropagatorBundle> {
    let d = prepared.drifts[0].dim();
    let dd = d * d;
    let mut cuts: Vec<f64> = grid.times().to_vec();
    cuts.extend(prepared.starts.iter().copied().filter(|&s| s > 0.0 && s < grid.last()));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));

    let mut state = vec![C64::default(); 3 * dd + d];
    for i in 0..d {
        state[i * d + i] = C64::new(1.0, 0.0);
        state[dd + i * d + i] = C64::new(1.0, 0.0);
    }
    let mut bundle = PropagatorBundle::empty(grid.clone(), provenance);
    let push = |bundle: &mut PropagatorBundle, s: &[C64]| {
        bundle.g.push(CMatrix::from_column_slice(d, d, &s[..dd]));
        bundle.g_inv.push(CMatrix::from_column_slice(d, d, &s[dd..2 * dd]));
        bundle.psi.push(CVector::from_column_slice(&s[2 * dd..2 * dd + d]));
        bundle.beta.push(CMatrix::from_column_slice(d, d, &s[2 * dd + d..]));
    };
    push(&mut bundle, &state);
    let mut next_out = 1;
    let opts = OdeOptions::with_tol(tol);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let hint = 0.5 * (a + b);
        let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
            let dr = prepared.drift_at(t, hint);
            let g = CMatrix::from_column_slice(d, d, &y[..dd]);
            let gi = CMatrix::from_column_slice(d, d, &y[dd..2 * dd]);
            let dg = &dr.b * &g;
            let dgi = -(&gi * &dr.b);
            let dpsi = &gi * &dr.phi;
            let dbeta = &gi * &dr.xi * gi.transpose();
            dy[..dd].copy_from_slice(dg.as_slice());
            dy[dd..2 * dd].copy_from_slice(dgi.as_slice());
            dy[2 * dd..2 * dd + d].copy_from_slice(dpsi.as_slice());
            dy[2 * dd + d..].copy_from_slice(dbeta.as_slice());
        };
        let sol = ode::integrate(rhs, &state, &[a, b], opts)?;
        state = sol.states.into_iter().last().expect("two output times");
        if next_out < grid.len() && (grid.times()[next_out] - b).abs() <= 1e-14 * b.abs().max(1.0) {
            push(&mut bundle, &state);
            next_out += 1;
        }
    }
    Ok(bundle)
}

/// `Φ_B(t)·v` with `Φ_B(t) = ∫₀ᵗ e^{Bτ} dτ`, the dressed drive integral `((e^{Bt} − 1)/B) v`.
pub fn dressed_psi_constant(b: &CMatrix, v: &CVector, t: f64) -> CVector {
    propagator_constant(b, t) * psi_constant(b, v, t)
}

pub fn check_drift_dim(space: PhaseSpace, drift: &DriftData) -> Result<()> {
    space.check_mat(&drift.b)?;
    space.check_vec(&drift.phi)?;
    space.check_mat(&drift.xi)
}
