//! Executes a resolved [`Job`] and writes its tables and report.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use quadmoments::algebra::QuadraticGenerator;
use quadmoments::fock::{
    build_operators, extract_moments, leibniz_residual, run_guarded, run_piecewise_guarded, run_poisson_guarded, FockConfig,
    GuardedRun, InitialState, MasterMethod,
};
use quadmoments::moments::{compare_hierarchies, evolve_at, write_records, MomentHierarchy};
use quadmoments::poisson::{evolve_poisson, PoissonSolver};
use quadmoments::propagators::{drift_data, integrate_bundle, CoefficientSchedule, PropagatorBundle};
use quadmoments::random::random_matrix;
use quadmoments::wick::gaussian_hierarchy;
use quadmoments::CMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::scenario::{Dynamics, Initial, Job, Mode};
use crate::{Failure, EXIT_COMPARISON, EXIT_LEAKAGE};

#[derive(Debug, Serialize)]
pub struct OrderReport {
    pub order: usize,
    pub max_rel: f64,
    pub mean_rel: f64,
    pub max_abs: f64,
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub cutoff: usize,
    /// `(cutoff, max leakage)` of each attempt.
    pub attempts: Vec<(usize, f64)>,
    pub max_leakage: f64,
    pub leaked: bool,
}

#[derive(Debug, Serialize)]
pub struct LeibnizReport {
    pub instances: usize,
    pub max_relative_residual: f64,
    pub worst_instance: usize,
}

#[derive(Debug, Default, Serialize)]
pub struct Report {
    pub scenario: String,
    pub mode: String,
    pub seed: u64,
    pub tol: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub orders: Vec<OrderReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leibniz: Option<LeibnizReport>,
    pub files: Vec<String>,
}

/// What a finished job produced; `exit_code` is 0 unless a check failed.
pub struct Outcome {
    pub report: Report,
    pub exit_code: i32,
}

fn lib(what: &'static str) -> impl Fn(quadmoments::Error) -> Failure {
    move |e| Failure::runtime(format!("{what}: {e}"))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::io(format!("{}: {e}", path.display()))
}

/// Moments of the initial data: Wick synthesis when Gaussian, otherwise
/// traces against a Fock basis large enough to make them exact.
pub fn initial_hierarchy(initial: &Initial, n: usize, m: usize) -> Result<MomentHierarchy, Failure> {
    if let Some(g) = &initial.gaussian {
        return gaussian_hierarchy(g, m).map_err(lib("initial moments"));
    }
    let Some(InitialState::Fock(k)) = &initial.state else {
        return Err(Failure::validation("initial data has no moment representation"));
    };
    // a product of m ladder operators moves at most m levels
    let cutoff = k.iter().max().copied().unwrap_or(0) + m + 2;
    let cfg = FockConfig::new(n, cutoff).map_err(lib("initial moments"))?;
    let ops = build_operators(&QuadraticGenerator::trivial(n).map_err(lib("initial moments"))?, &cfg)
        .map_err(lib("initial moments"))?;
    let rho = InitialState::Fock(k.clone()).density_matrix(&cfg).map_err(lib("initial moments"))?;
    extract_moments(&rho, &ops, m).map_err(lib("initial moments"))
}

fn engine(job: &Job, dynamics: &Dynamics, h0: &MomentHierarchy) -> Result<Vec<MomentHierarchy>, Failure> {
    let bundle = match dynamics {
        Dynamics::Constant(g) => PropagatorBundle::constant(&drift_data(g).map_err(lib("drift"))?, &job.grid),
        Dynamics::Piecewise(segs) => integrate_bundle(&CoefficientSchedule::Piecewise(segs.clone()), &job.grid, job.ode_tol)
            .map_err(lib("propagators"))?,
        Dynamics::Poisson(model) => {
            return evolve_poisson(model, h0, &job.grid, PoissonSolver::Auto).map_err(lib("poisson evolution"))
        }
    };
    (0..job.grid.len()).map(|k| evolve_at(h0, &bundle, k).map_err(lib("moment evolution"))).collect()
}

fn oracle(job: &Job, dynamics: &Dynamics, init: &InitialState) -> Result<GuardedRun, Failure> {
    let times = job.grid.times();
    match dynamics {
        Dynamics::Constant(g) => run_guarded(g, init, job.cutoff, times, job.ode_tol, MasterMethod::RungeKutta),
        Dynamics::Piecewise(segs) => run_piecewise_guarded(segs, init, job.cutoff, times, job.ode_tol),
        Dynamics::Poisson(model) => run_poisson_guarded(model, init, job.cutoff, times),
    }
    .map_err(lib("oracle"))
}

fn oracle_report(run: &GuardedRun) -> OracleReport {
    OracleReport {
        cutoff: run.cutoff(),
        attempts: run.attempts.clone(),
        max_leakage: run.trajectory.max_leakage(),
        leaked: run.leaked(),
    }
}

fn write_table(dir: &Path, file: &str, job: &Job, traj: &[MomentHierarchy], report: &mut Report) -> Result<(), Failure> {
    let path = dir.join(file);
    let out = BufWriter::new(File::create(&path).map_err(io(&path))?);
    let records: Vec<(f64, &MomentHierarchy)> = job.grid.times().iter().copied().zip(traj).collect();
    let meta = [("scenario", job.name.replace(char::is_whitespace, "_")), ("seed", job.seed.to_string())];
    write_records(out, &records, &meta).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    report.files.push(file.to_string());
    Ok(())
}

fn leibniz(job: &Job) -> LeibnizReport {
    let spec = &job.leibniz;
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let (mut worst, mut worst_instance) = (0.0f64, 0);
    for inst in 0..spec.instances {
        let d = spec.dims[inst % spec.dims.len()];
        let m = spec.orders[(inst / spec.dims.len()) % spec.orders.len()];
        let jumps = rng.random_range(0..=spec.max_jumps);
        let h = random_matrix(&mut rng, d, d);
        let cs: Vec<CMatrix> = (0..jumps).map(|_| random_matrix(&mut rng, d, d)).collect();
        let xs: Vec<CMatrix> = (0..m).map(|_| random_matrix(&mut rng, d, d)).collect();
        let r = leibniz_residual(&h, &cs, &xs).expect("shapes agree by construction").relative();
        if r > worst {
            (worst, worst_instance) = (r, inst);
        }
    }
    LeibnizReport { instances: spec.instances, max_relative_residual: worst, worst_instance }
}

pub fn execute(job: &Job, out_dir: &Path) -> Result<Outcome, Failure> {
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut report = Report {
        scenario: job.name.clone(),
        mode: job.mode.as_str().to_string(),
        seed: job.seed,
        tol: job.tol,
        passed: true,
        ..Default::default()
    };
    let mut exit_code = 0;
    if job.mode == Mode::LeibnizTest {
        let lr = leibniz(job);
        report.passed = lr.max_relative_residual < job.tol;
        report.leibniz = Some(lr);
        if !report.passed {
            exit_code = EXIT_COMPARISON;
        }
    } else {
        let dynamics = job.dynamics.as_ref().expect("resolved jobs carry dynamics");
        let initial = job.initial.as_ref().expect("resolved jobs carry initial data");
        let n = dynamics.modes();
        let engine_file = if matches!(dynamics, Dynamics::Poisson(_)) { "poisson.csv" } else { "engine.csv" };
        let mut engine_traj = None;
        if job.mode != Mode::Oracle {
            let h0 = initial_hierarchy(initial, n, job.order)?;
            let traj = engine(job, dynamics, &h0)?;
            write_table(out_dir, engine_file, job, &traj, &mut report)?;
            engine_traj = Some(traj);
        }
        if matches!(job.mode, Mode::Oracle | Mode::Compare) {
            let state = initial.state.as_ref().expect("checked during validation");
            let run = oracle(job, dynamics, state)?;
            let traj = run.moments(job.order).map_err(lib("oracle moments"))?;
            write_table(out_dir, "oracle.csv", job, &traj, &mut report)?;
            let orep = oracle_report(&run);
            if let Some(engine_traj) = &engine_traj {
                report.orders = per_order(engine_traj, &traj)?;
                report.passed = report.orders.iter().all(|o| o.max_rel < job.tol);
                if !report.passed {
                    exit_code = EXIT_COMPARISON;
                }
            }
            if orep.leaked {
                report.passed = false;
                exit_code = EXIT_LEAKAGE;
            }
            report.oracle = Some(orep);
        }
    }
    let path: PathBuf = out_dir.join("report.json");
    report.files.push("report.json".into());
    let text = serde_json::to_string_pretty(&report).expect("reports serialize");
    fs::write(&path, text + "\n").map_err(io(&path))?;
    Ok(Outcome { report, exit_code })
}

/// Worst relative error of each order over all times.
fn per_order(engine: &[MomentHierarchy], oracle: &[MomentHierarchy]) -> Result<Vec<OrderReport>, Failure> {
    let mut out: Vec<OrderReport> = Vec::new();
    let mut samples = 0usize;
    for (a, b) in engine.iter().zip(oracle) {
        samples += 1;
        for e in compare_hierarchies(a, b).map_err(lib("comparison"))? {
            match out.iter_mut().find(|o| o.order == e.order) {
                Some(o) => {
                    o.max_rel = o.max_rel.max(e.max_rel);
                    o.max_abs = o.max_abs.max(e.max_abs);
                    o.mean_rel += e.mean_rel;
                }
                None => out.push(OrderReport { order: e.order, max_rel: e.max_rel, mean_rel: e.mean_rel, max_abs: e.max_abs }),
            }
        }
    }
    for o in &mut out {
        o.mean_rel /= samples.max(1) as f64;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Overrides, Scenario};
    use quadmoments::moments::read_records;

    fn job(text: &str) -> Job {
        Scenario::parse(text).unwrap().resolve(&Overrides::default()).unwrap()
    }

    #[test]
    fn fock_state_moments_are_exact() {
        let init = Initial { gaussian: None, state: Some(InitialState::Fock(vec![2])) };
        let h = initial_hierarchy(&init, 1, 2).unwrap();
        // ⟨a†a⟩ = 2, ⟨a a†⟩ = 3, ⟨a⟩ = 0
        assert!((h.get(&[1, 0]) - quadmoments::C64::new(2.0, 0.0)).norm() < 1e-14);
        assert!((h.get(&[0, 1]) - quadmoments::C64::new(3.0, 0.0)).norm() < 1e-14);
        assert!(h.get(&[0]).norm() < 1e-14);
    }

    #[test]
    fn compare_writes_tables_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let j = job(r#"{
            "name": "damped",
            "generator": {"modes": 1, "h": [[[0,0],[1,0]],[[1,0],[0,0]]], "jumps": [[[0.5,0],[0,0]]]},
            "initial": {"fock": [1]},
            "run": {"mode": "compare", "order": 2, "t_max": 0.5, "dt": 0.25, "seed": 4}
        }"#);
        let out = execute(&j, dir.path()).unwrap();
        assert_eq!(out.exit_code, 0);
        assert!(out.report.passed);
        assert_eq!(out.report.orders.len(), 2);
        let text = fs::read_to_string(dir.path().join("engine.csv")).unwrap();
        assert!(text.lines().next().unwrap().contains("seed=4"));
        let back = read_records(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 3);
        assert!(dir.path().join("report.json").exists());
    }

    #[test]
    fn tables_are_deterministic() {
        let text = r#"{
            "poisson": [{"rate": 0.5, "generator": {"modes": 1, "h": [[[0,0],[1,0]],[[1,0],[0,0]]], "f": [[0.2,0],[0.2,0]]}}],
            "initial": "vacuum",
            "run": {"mode": "poisson", "order": 3, "t_max": 1.0, "dt": 0.5}
        }"#;
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        execute(&job(text), a.path()).unwrap();
        execute(&job(text), b.path()).unwrap();
        let read = |d: &Path| fs::read(d.join("poisson.csv")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
    }

    #[test]
    fn leibniz_ensemble_is_seeded() {
        let text = r#"{"run": {"mode": "leibniz-test", "leibniz": {"instances": 12}}}"#;
        let j = job(text);
        let (a, b) = (leibniz(&j), leibniz(&j));
        assert_eq!(a.max_relative_residual, b.max_relative_residual);
        assert!(a.max_relative_residual < 1e-10);
        assert_eq!(a.instances, 12);
    }

    #[test]
    fn tight_tolerance_fails_the_comparison() {
        let dir = tempfile::tempdir().unwrap();
        let j = job(r#"{
            "generator": {"modes": 1, "h": [[[0,0],[1,0]],[[1,0],[0,0]]], "jumps": [[[0.5,0],[0,0]]]},
            "initial": {"coherent": [[0.5, 0]]},
            "run": {"mode": "compare", "order": 2, "t_max": 0.5, "dt": 0.5, "cutoff": 8, "tol": 1e-30}
        }"#);
        let out = execute(&j, dir.path()).unwrap();
        assert!(!out.report.passed);
        assert_eq!(out.exit_code, EXIT_COMPARISON);
    }
}
