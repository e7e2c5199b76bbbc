//! JSON scenario schema and its translation into validated library objects.
//!
//! Complex numbers are `[re, im]` pairs; matrices are arrays of rows.

use std::path::Path;

use quadmoments::algebra::QuadraticGenerator;
use quadmoments::defaults::{
    DEFAULT_COMPARE_TOL, DEFAULT_CUTOFF, DEFAULT_DT, DEFAULT_ORDER, DEFAULT_SEED, DEFAULT_T_MAX, LEIBNIZ_INSTANCES,
    LEIBNIZ_TOL, TOL_ODE,
};
use quadmoments::fock::InitialState;
use quadmoments::poisson::{PoissonModel, PoissonProcessSpec};
use quadmoments::propagators::{Segment, TimeGrid};
use quadmoments::wick::GaussianData;
use quadmoments::{CMatrix, CVector, C64};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub type Complex = [f64; 2];

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub modes: usize,
    pub h: Vec<Vec<Complex>>,
    #[serde(default)]
    pub f: Option<Vec<Complex>>,
    /// Jump vectors `γ_j`; mutually exclusive with `gamma`.
    #[serde(default)]
    pub jumps: Vec<Vec<Complex>>,
    #[serde(default)]
    pub gamma: Option<Vec<Vec<Complex>>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub duration: f64,
    pub generator: GeneratorSpec,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub rate: f64,
    pub generator: GeneratorSpec,
    /// Time the inner generator acts at each arrival.
    #[serde(default = "unit_duration")]
    pub duration: f64,
}

fn unit_duration() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Vacuum,
    Coherent(Vec<Complex>),
    Fock(Vec<usize>),
    Thermal(Vec<f64>),
    Gaussian { mu: Vec<Complex>, d: Vec<Vec<Complex>> },
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Engine,
    Oracle,
    Poisson,
    Compare,
    LeibnizTest,
}

impl Mode {
    /// The name used in scenario files.
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Engine => "engine",
            Mode::Oracle => "oracle",
            Mode::Poisson => "poisson",
            Mode::Compare => "compare",
            Mode::LeibnizTest => "leibniz-test",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LeibnizSpec {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_max_jumps")]
    pub max_jumps: usize,
}

fn default_instances() -> usize {
    LEIBNIZ_INSTANCES
}
fn default_dims() -> Vec<usize> {
    vec![4, 6, 8]
}
fn default_orders() -> Vec<usize> {
    vec![2, 3, 4]
}
fn default_max_jumps() -> usize {
    3
}

impl Default for LeibnizSpec {
    fn default() -> Self {
        Self {
            instances: default_instances(),
            dims: default_dims(),
            orders: default_orders(),
            max_jumps: default_max_jumps(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub mode: Option<Mode>,
    pub order: Option<usize>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    /// Explicit output times; overrides `t_max`/`dt`.
    pub times: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub ode_tol: Option<f64>,
    pub cutoff: Option<usize>,
    pub seed: Option<u64>,
    pub leibniz: Option<LeibnizSpec>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub schedule: Option<Vec<SegmentSpec>>,
    #[serde(default)]
    pub poisson: Option<Vec<ProcessSpec>>,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub run: RunSpec,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::parse(format!("scenario: {e}")))
    }
}

/// Command-line values that take precedence over the scenario file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub order: Option<usize>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub enum Dynamics {
    Constant(QuadraticGenerator),
    Piecewise(Vec<Segment>),
    Poisson(PoissonModel),
}

impl Dynamics {
    pub fn modes(&self) -> usize {
        match self {
            Dynamics::Constant(g) => g.modes(),
            Dynamics::Piecewise(s) => s[0].generator.modes(),
            Dynamics::Poisson(m) => m.modes(),
        }
    }
}

/// Initial data in whichever forms are available: the Gaussian moments when
/// the state is Gaussian, and a density-matrix recipe when it has one.
#[derive(Clone, Debug)]
pub struct Initial {
    pub gaussian: Option<GaussianData>,
    pub state: Option<InitialState>,
}

/// A scenario after validation, with every default filled in.
#[derive(Clone, Debug)]
pub struct Job {
    pub name: String,
    pub mode: Mode,
    pub dynamics: Option<Dynamics>,
    pub initial: Option<Initial>,
    pub order: usize,
    pub grid: TimeGrid,
    pub tol: f64,
    pub ode_tol: f64,
    pub cutoff: usize,
    pub seed: u64,
    pub leibniz: LeibnizSpec,
}

fn complex(c: &Complex) -> C64 {
    C64::new(c[0], c[1])
}

fn matrix(rows: &[Vec<Complex>], dim: usize, what: &str) -> Result<CMatrix, Failure> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Failure::validation(format!("{what} must be {dim}x{dim}")));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| complex(&rows[i][j])))
}

fn vector(entries: &[Complex], dim: usize, what: &str) -> Result<CVector, Failure> {
    if entries.len() != dim {
        return Err(Failure::validation(format!("{what} must have {dim} entries, found {}", entries.len())));
    }
    Ok(CVector::from_iterator(dim, entries.iter().map(complex)))
}

fn lib(what: &str) -> impl Fn(quadmoments::Error) -> Failure + '_ {
    move |e| Failure::validation(format!("{what}: {e}"))
}

pub fn build_generator(spec: &GeneratorSpec, what: &str) -> Result<QuadraticGenerator, Failure> {
    if spec.modes == 0 {
        return Err(Failure::validation(format!("{what}: modes must be positive")));
    }
    let d = 2 * spec.modes;
    let h = matrix(&spec.h, d, &format!("{what}.h"))?;
    let f = match &spec.f {
        Some(f) => vector(f, d, &format!("{what}.f"))?,
        None => CVector::zeros(d),
    };
    let gen = match &spec.gamma {
        Some(_) if !spec.jumps.is_empty() => {
            return Err(Failure::validation(format!("{what}: give either jumps or gamma, not both")))
        }
        Some(g) => QuadraticGenerator::from_gamma(spec.modes, h, f, matrix(g, d, &format!("{what}.gamma"))?),
        None => {
            let jumps = spec
                .jumps
                .iter()
                .enumerate()
                .map(|(j, v)| vector(v, d, &format!("{what}.jumps[{j}]")))
                .collect::<Result<Vec<_>, _>>()?;
            QuadraticGenerator::from_jumps(spec.modes, h, f, jumps)
        }
    }
    .map_err(lib(what))?;
    gen.validated().map_err(lib(what))?;
    Ok(gen)
}

fn build_initial(spec: &InitialSpec, n: usize) -> Result<Initial, Failure> {
    let per_mode = |len: usize| {
        if len == n {
            Ok(())
        } else {
            Err(Failure::validation(format!("initial state lists {len} modes, the dynamics has {n}")))
        }
    };
    let err = lib("initial");
    Ok(match spec {
        InitialSpec::Vacuum => Initial {
            gaussian: Some(GaussianData::vacuum(n).map_err(err)?),
            state: Some(InitialState::Vacuum),
        },
        InitialSpec::Coherent(alpha) => {
            per_mode(alpha.len())?;
            let alpha: Vec<C64> = alpha.iter().map(complex).collect();
            Initial {
                gaussian: Some(GaussianData::coherent(&alpha).map_err(err)?),
                state: Some(InitialState::Coherent(alpha)),
            }
        }
        InitialSpec::Thermal(nbar) => {
            per_mode(nbar.len())?;
            Initial {
                gaussian: Some(GaussianData::thermal(nbar).map_err(err)?),
                state: Some(InitialState::Thermal(nbar.clone())),
            }
        }
        InitialSpec::Fock(k) => {
            per_mode(k.len())?;
            Initial { gaussian: None, state: Some(InitialState::Fock(k.clone())) }
        }
        InitialSpec::Gaussian { mu, d } => {
            let data = GaussianData::new(vector(mu, 2 * n, "initial.mu")?, matrix(d, 2 * n, "initial.d")?).map_err(err)?;
            Initial { gaussian: Some(data), state: None }
        }
    })
}

fn build_grid(run: &RunSpec, ov: &Overrides) -> Result<TimeGrid, Failure> {
    let err = lib("time grid");
    if ov.t_max.is_none() && ov.dt.is_none() {
        if let Some(times) = &run.times {
            return TimeGrid::new(times.clone()).map_err(err);
        }
    }
    let t_max = ov.t_max.or(run.t_max).unwrap_or(DEFAULT_T_MAX);
    let dt = ov.dt.or(run.dt).unwrap_or(DEFAULT_DT);
    if !(dt > 0.0 && dt.is_finite() && t_max >= 0.0 && t_max.is_finite()) {
        return Err(Failure::validation(format!("time grid: need dt > 0 and t_max >= 0, got dt={dt}, t_max={t_max}")));
    }
    // the last step may be shorter so that t_max is always hit
    let steps = ((t_max / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut times: Vec<f64> = (0..steps).map(|k| k as f64 * dt).collect();
    times.push(t_max);
    times.dedup();
    TimeGrid::new(times).map_err(err)
}

impl Scenario {
    /// Checks mode-specific requirements and builds every library object.
    pub fn resolve(&self, ov: &Overrides) -> Result<Job, Failure> {
        let run = &self.run;
        let mode = ov.mode.or(run.mode).ok_or_else(|| Failure::validation("run.mode is required"))?;
        let dynamics = self.dynamics(mode)?;
        let initial = match (&self.initial, &dynamics) {
            (Some(spec), Some(dyn_)) => Some(build_initial(spec, dyn_.modes())?),
            (None, Some(_)) => return Err(Failure::validation(format!("mode {mode:?} needs initial data"))),
            _ => None,
        };
        if matches!(mode, Mode::Oracle | Mode::Compare) && initial.as_ref().is_some_and(|i| i.state.is_none()) {
            return Err(Failure::validation(
                "the Fock oracle needs vacuum, coherent, thermal or fock initial data, not a bare gaussian",
            ));
        }
        let order = ov.order.or(run.order).unwrap_or(DEFAULT_ORDER);
        let tol = ov.tol.or(run.tol).unwrap_or(if mode == Mode::LeibnizTest { LEIBNIZ_TOL } else { DEFAULT_COMPARE_TOL });
        if !(tol > 0.0) {
            return Err(Failure::validation(format!("tol must be positive, got {tol}")));
        }
        let leibniz = run.leibniz.clone().unwrap_or_default();
        if mode == Mode::LeibnizTest
            && (leibniz.instances == 0
                || leibniz.dims.is_empty()
                || leibniz.orders.is_empty()
                || leibniz.dims.contains(&0)
                || leibniz.orders.contains(&0))
        {
            return Err(Failure::validation("leibniz ensemble needs instances, dims and orders, all positive"));
        }
        Ok(Job {
            name: self.name.clone().unwrap_or_else(|| "scenario".into()),
            mode,
            dynamics,
            initial,
            order,
            grid: build_grid(run, ov)?,
            tol,
            ode_tol: run.ode_tol.unwrap_or(TOL_ODE),
            cutoff: run.cutoff.unwrap_or(DEFAULT_CUTOFF),
            seed: ov.seed.or(run.seed).unwrap_or(DEFAULT_SEED),
            leibniz,
        })
    }

    fn dynamics(&self, mode: Mode) -> Result<Option<Dynamics>, Failure> {
        if self.generator.is_some() && self.schedule.is_some() {
            return Err(Failure::validation("give either generator or schedule, not both"));
        }
        let quadratic = match (&self.generator, &self.schedule) {
            (Some(g), None) => Some(Dynamics::Constant(build_generator(g, "generator")?)),
            (None, Some(segs)) => {
                if segs.is_empty() {
                    return Err(Failure::validation("schedule has no segments"));
                }
                let segments = segs
                    .iter()
                    .enumerate()
                    .map(|(j, s)| {
                        if !(s.duration > 0.0 && s.duration.is_finite()) {
                            return Err(Failure::validation(format!("schedule[{j}].duration must be positive")));
                        }
                        Ok(Segment { duration: s.duration, generator: build_generator(&s.generator, &format!("schedule[{j}]"))? })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if segments.iter().any(|s| s.generator.modes() != segments[0].generator.modes()) {
                    return Err(Failure::validation("schedule segments act on different numbers of modes"));
                }
                Some(Dynamics::Piecewise(segments))
            }
            _ => None,
        };
        let poisson = match &self.poisson {
            Some(procs) => {
                let specs = procs
                    .iter()
                    .enumerate()
                    .map(|(j, p)| {
                        let what = format!("poisson[{j}]");
                        let gen = build_generator(&p.generator, &what)?;
                        PoissonProcessSpec::with_duration(p.rate, gen, p.duration).map_err(lib(&what))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Some(Dynamics::Poisson(PoissonModel::new(specs).map_err(lib("poisson"))?))
            }
            None => None,
        };
        match mode {
            Mode::LeibnizTest => Ok(None),
            Mode::Engine => quadratic.map(Some).ok_or_else(|| Failure::validation("engine mode needs a generator or schedule")),
            Mode::Poisson => poisson.map(Some).ok_or_else(|| Failure::validation("poisson mode needs a poisson model")),
            Mode::Oracle | Mode::Compare => match (quadratic, poisson) {
                (Some(_), Some(_)) => Err(Failure::validation(format!(
                    "{mode:?} mode is ambiguous: give a generator/schedule or a poisson model, not both"
                ))),
                (Some(d), None) | (None, Some(d)) => Ok(Some(d)),
                (None, None) => Err(Failure::validation(format!("{mode:?} mode needs dynamics"))),
            },
        }
    }
}
