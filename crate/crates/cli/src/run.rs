use std::fmt;
use std::time::Instant;

use mpcc_core::alm::{solve_alm, AlmConfig, AlmResult, AlmStatus};
use mpcc_core::instance::read_instance;
use mpcc_core::ioc_fem::assemble_instance;
use mpcc_core::nsnewton::{residual_f, solve_newton, FullPoint, NewtonResult, NewtonStatus, StepKind};
use mpcc_core::stationarity::classify_stationarity;
use mpcc_core::{MultiplierSet, QuadraticMpcc};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{Algorithm, ExperimentConfig, InstanceSource};
use crate::HarnessError;

/// Standard normal `x⁰` keyed by `seed`, zero multipliers.
pub fn make_start(problem: &QuadraticMpcc, seed: u64) -> (DVector<f64>, MultiplierSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = DVector::from_fn(problem.n(), |_, _| StandardNormal.sample(&mut rng));
    (x0, MultiplierSet::zeros(problem))
}

pub fn load_problem(cfg: &ExperimentConfig) -> Result<QuadraticMpcc, HarnessError> {
    Ok(match &cfg.instance {
        InstanceSource::Ioc => assemble_instance(&cfg.ioc)?.problem,
        InstanceSource::File(path) => read_instance(path)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Converged,
    AlmMaxIters,
    AlmSubsolverFailure,
    NewtonMaxIters,
    NewtonStationaryMerit,
    NewtonLineSearchFailure,
    Error(String),
}

impl RunStatus {
    pub fn is_converged(&self) -> bool {
        *self == RunStatus::Converged
    }

    fn from_alm(s: AlmStatus) -> Self {
        match s {
            AlmStatus::Converged => RunStatus::Converged,
            AlmStatus::MaxIters => RunStatus::AlmMaxIters,
            AlmStatus::SubsolverFailure => RunStatus::AlmSubsolverFailure,
        }
    }

    fn from_newton(s: NewtonStatus) -> Self {
        match s {
            NewtonStatus::Converged => RunStatus::Converged,
            NewtonStatus::MaxIters => RunStatus::NewtonMaxIters,
            NewtonStatus::StationaryMerit => RunStatus::NewtonStationaryMerit,
            NewtonStatus::LineSearchFailure => RunStatus::NewtonLineSearchFailure,
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Converged => f.write_str("converged"),
            RunStatus::AlmMaxIters => f.write_str("alm_max_iters"),
            RunStatus::AlmSubsolverFailure => f.write_str("alm_subsolver_failure"),
            RunStatus::NewtonMaxIters => f.write_str("newton_max_iters"),
            RunStatus::NewtonStationaryMerit => f.write_str("newton_stationary_merit"),
            RunStatus::NewtonLineSearchFailure => f.write_str("newton_line_search_failure"),
            RunStatus::Error(msg) => write!(f, "error: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmColumns {
    pub iterations: usize,
    pub objective: f64,
    pub time_s: f64,
    pub rho: f64,
    pub final_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonColumns {
    pub iterations: usize,
    pub objective: f64,
    pub time_s: f64,
    pub full_steps: usize,
    pub damped_steps: usize,
    pub gradient_steps: usize,
    pub initial_residual: f64,
}

/// One seeded run. `residual` is `‖F(x, λ, η, μ, ν)‖` at the returned point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub run: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub alm: Option<AlmColumns>,
    pub newton: Option<NewtonColumns>,
    pub status: RunStatus,
    pub residual: f64,
    pub m_stationary: bool,
}

struct Outcome {
    alm: Option<AlmColumns>,
    newton: Option<NewtonColumns>,
    status: RunStatus,
    x: DVector<f64>,
    m: MultiplierSet,
}

fn run_alm(
    problem: &QuadraticMpcc,
    cfg: &AlmConfig,
    sub: &ExperimentConfig,
    x0: &DVector<f64>,
    m0: &MultiplierSet,
) -> Result<(AlmResult, AlmColumns), HarnessError> {
    let start = Instant::now();
    let res = solve_alm(problem, cfg, x0, m0, &sub.pgrad)?;
    let cols = AlmColumns {
        iterations: res.outer_iterations,
        objective: problem.f(&res.x),
        time_s: start.elapsed().as_secs_f64(),
        rho: res.rho,
        final_v: res.final_v,
    };
    Ok((res, cols))
}

fn run_newton(
    problem: &QuadraticMpcc,
    cfg: &ExperimentConfig,
    z0: &FullPoint,
) -> Result<(NewtonResult, NewtonColumns), HarnessError> {
    let start = Instant::now();
    let res = solve_newton(problem, &cfg.newton, z0)?;
    let cols = NewtonColumns {
        iterations: res.iterations,
        objective: problem.f(&res.z.x),
        time_s: start.elapsed().as_secs_f64(),
        full_steps: res.full_steps(),
        damped_steps: res.count(StepKind::DampedNewton),
        gradient_steps: res.gradient_steps(),
        initial_residual: res.initial_residual,
    };
    Ok((res, cols))
}

fn run_seed(problem: &QuadraticMpcc, cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, HarnessError> {
    let (x0, m0) = make_start(problem, seed);
    match cfg.algorithm {
        Algorithm::Alm => {
            let (res, cols) = run_alm(problem, &cfg.alm, cfg, &x0, &m0)?;
            Ok(Outcome {
                alm: Some(cols),
                newton: None,
                status: RunStatus::from_alm(res.status),
                x: res.x,
                m: res.multipliers,
            })
        }
        Algorithm::Newton => {
            let (res, cols) = run_newton(problem, cfg, &FullPoint::new(x0, m0))?;
            Ok(Outcome {
                alm: None,
                newton: Some(cols),
                status: RunStatus::from_newton(res.status),
                x: res.z.x,
                m: res.z.multipliers,
            })
        }
        Algorithm::Warmstart => {
            let alm_cfg = AlmConfig {
                tau_alm: cfg.warmstart_tau_alm,
                ..cfg.alm
            };
            let (alm, alm_cols) = run_alm(problem, &alm_cfg, cfg, &x0, &m0)?;
            let (res, cols) = run_newton(problem, cfg, &FullPoint::new(alm.x, alm.multipliers))?;
            Ok(Outcome {
                alm: Some(alm_cols),
                newton: Some(cols),
                status: RunStatus::from_newton(res.status),
                x: res.z.x,
                m: res.z.multipliers,
            })
        }
    }
}

fn finish(problem: &QuadraticMpcc, cfg: &ExperimentConfig, run: usize, seed: u64) -> ResultRow {
    let outcome = run_seed(problem, cfg, seed).and_then(|o| {
        let z = FullPoint::new(o.x.clone(), o.m.clone());
        let residual = residual_f(problem, &z)?.norm();
        let report = classify_stationarity(problem, &o.x, &o.m, cfg.classify_tol)?;
        Ok((o, residual, report.is_m))
    });
    match outcome {
        Ok((o, residual, m_stationary)) => ResultRow {
            run,
            seed,
            algorithm: cfg.algorithm,
            alm: o.alm,
            newton: o.newton,
            status: o.status,
            residual,
            m_stationary,
        },
        Err(e) => ResultRow {
            run,
            seed,
            algorithm: cfg.algorithm,
            alm: None,
            newton: None,
            status: RunStatus::Error(e.to_string()),
            residual: f64::NAN,
            m_stationary: false,
        },
    }
}

/// Runs the configured pipeline once per seed. Solver failures end up in
/// the row status; only an invalid config or unreadable instance is an error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    cfg.validate()?;
    let problem = load_problem(cfg)?;
    Ok(run_on(&problem, cfg))
}

/// As [`run_experiment`] but on an already built problem; `cfg.instance` is ignored.
pub fn run_on(problem: &QuadraticMpcc, cfg: &ExperimentConfig) -> Vec<ResultRow> {
    cfg.seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| finish(problem, cfg, i + 1, seed))
        .collect()
}
