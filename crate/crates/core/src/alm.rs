//! Safeguarded augmented Lagrangian method.
//!
//! Two realizations share one outer loop:
//!
//! * [`SlackMode::Slack`]: variables `(x, z_G, z_H) ∈ ℝⁿ × C`, with the
//!   complementarity maps coupled to the slacks through penalized
//!   equalities `G(x) = z_G`, `H(x) = z_H`.
//! * [`SlackMode::SlackFree`]: variables `x ∈ D` for coordinate-selection
//!   problems; only `g` and `h` are penalized.
//!
//! Multiplier estimates are clamped into a (large) box before each
//! subproblem, and the penalty grows by `γ` whenever the feasibility
//! measure `V` fails to shrink by the factor `q_alm`.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::compgeo::{PairDomain, ProjectionDomain, SlackDomain};
use crate::error::{check_len, MpccError, Result};
use crate::pgrad::{solve_subproblem, PgradConfig, SubproblemResult};
use crate::problem::{MultiplierSet, QuadraticMpcc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlackMode {
    /// Slack-free when `G`, `H` select coordinates, slack otherwise.
    Auto,
    Slack,
    SlackFree,
}

impl SlackMode {
    pub fn resolve(self, problem: &QuadraticMpcc) -> SlackMode {
        match self {
            SlackMode::Auto if problem.is_coordinate_selection() => SlackMode::SlackFree,
            SlackMode::Auto => SlackMode::Slack,
            m => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlmConfig {
    /// Fixed initial penalty; `None` derives it from the starting point.
    pub rho0: Option<f64>,
    pub gamma: f64,
    pub q_alm: f64,
    pub safeguard_bound: f64,
    /// `ε_k = eps_scale · (k+1)^(−eps_decay)`.
    pub eps_scale: f64,
    pub eps_decay: f64,
    pub tau_alm: f64,
    pub max_outer_iters: usize,
    pub slack_mode: SlackMode,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            rho0: None,
            gamma: 10.0,
            q_alm: 0.8,
            safeguard_bound: 1e20,
            eps_scale: 1e-4,
            eps_decay: 0.5,
            tau_alm: 1e-6,
            max_outer_iters: 1000,
            slack_mode: SlackMode::Auto,
        }
    }
}

impl AlmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma > 1.0
            && self.q_alm > 0.0
            && self.q_alm < 1.0
            && self.safeguard_bound > 0.0
            && self.eps_scale > 0.0
            && self.eps_decay >= 0.0
            && self.tau_alm > 0.0
            && self.rho0.is_none_or(|r| r > 0.0);
        if ok {
            Ok(())
        } else {
            Err(MpccError::InvalidConfig(format!("augmented Lagrangian settings {self:?}")))
        }
    }

    pub fn eps(&self, k: usize) -> f64 {
        self.eps_scale * ((k + 1) as f64).powf(-self.eps_decay)
    }
}

fn state_dim(problem: &QuadraticMpcc, mode: SlackMode) -> usize {
    match mode.resolve(problem) {
        SlackMode::SlackFree => problem.n(),
        _ => problem.n() + 2 * problem.t(),
    }
}

/// Residual blocks `G(x) − z_G`, `H(x) − z_H` of a slack-mode state.
fn slack_residuals(problem: &QuadraticMpcc, point: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let (n, t) = (problem.n(), problem.t());
    let x = point.rows(0, n).into_owned();
    (
        problem.big_g(&x) - point.rows(n, t),
        problem.big_h(&x) - point.rows(n + t, t),
    )
}

/// The augmented Lagrangian `L^sl_ρ(·, λ̂)` (or its slack-free variant) as
/// a value/gradient oracle.
#[derive(Debug, Clone, Copy)]
pub struct AugmentedLagrangian<'a> {
    pub problem: &'a QuadraticMpcc,
    pub mode: SlackMode,
    pub rho: f64,
    pub safeguarded: &'a MultiplierSet,
}

impl AugmentedLagrangian<'_> {
    pub fn eval(&self, point: &DVector<f64>) -> (f64, DVector<f64>) {
        let p = self.problem;
        let (n, t) = (p.n(), p.t());
        let rho = self.rho;
        let m = self.safeguarded;
        let x = point.rows(0, n).into_owned();

        // shifted residuals, each scaled by ρ: ρ·(c + m/ρ) = ρc + m
        let ineq = (p.g(&x) * rho + &m.lambda).map(|v| v.max(0.0));
        let eq = p.h(&x) * rho + &m.eta;
        let mut value = p.f(&x) + (ineq.norm_squared() + eq.norm_squared()) / (2.0 * rho);
        let mut grad_x = p.grad_f(&x) + p.ineq_adjoint(&ineq) + p.eq_adjoint(&eq);

        match self.mode.resolve(p) {
            SlackMode::SlackFree => (value, grad_x),
            _ => {
                let (rg, rh) = slack_residuals(p, point);
                let cg = rg * rho + &m.mu;
                let ch = rh * rho + &m.nu;
                value += (cg.norm_squared() + ch.norm_squared()) / (2.0 * rho);
                grad_x += p.comp_g_adjoint(&cg) + p.comp_h_adjoint(&ch);
                let mut grad = DVector::zeros(n + 2 * t);
                grad.rows_mut(0, n).copy_from(&grad_x);
                grad.rows_mut(n, t).copy_from(&(-cg));
                grad.rows_mut(n + t, t).copy_from(&(-ch));
                (value, grad)
            }
        }
    }
}

pub fn augmented_lagrangian(
    problem: &QuadraticMpcc,
    mode: SlackMode,
    point: &DVector<f64>,
    rho: f64,
    safeguarded: &MultiplierSet,
) -> Result<(f64, DVector<f64>)> {
    let mode = mode.resolve(problem);
    check_rho(rho)?;
    check_len("state point", state_dim(problem, mode), point.len())?;
    problem.check_multipliers(safeguarded)?;
    Ok(AugmentedLagrangian {
        problem,
        mode,
        rho,
        safeguarded,
    }
    .eval(point))
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(MpccError::InvalidConfig(format!("penalty must be positive, got {rho}")))
    }
}

/// `V_ρ = max(‖max(g, −λ/ρ)‖, ‖h‖, ‖G − z_G‖, ‖H − z_H‖)`.
pub fn feasibility_measure(
    problem: &QuadraticMpcc,
    mode: SlackMode,
    point: &DVector<f64>,
    rho: f64,
    m: &MultiplierSet,
) -> Result<f64> {
    let mode = mode.resolve(problem);
    check_rho(rho)?;
    check_len("state point", state_dim(problem, mode), point.len())?;
    problem.check_multipliers(m)?;
    let x = point.rows(0, problem.n()).into_owned();
    let g = problem.g(&x);
    let ineq = g.zip_map(&m.lambda, |gi, li| gi.max(-li / rho));
    let mut v = ineq.norm().max(problem.h(&x).norm());
    if mode != SlackMode::SlackFree {
        let (rg, rh) = slack_residuals(problem, point);
        v = v.max(rg.norm()).max(rh.norm());
    }
    Ok(v)
}

/// Clamps `λ` into `[0, C]` and `η, μ, ν` into `[−C, C]`.
pub fn safeguard_multipliers(m: &MultiplierSet, bound: f64) -> MultiplierSet {
    let clamp = |v: &DVector<f64>, lo: f64| v.map(|x| x.clamp(lo, bound));
    MultiplierSet {
        lambda: clamp(&m.lambda, 0.0),
        eta: clamp(&m.eta, -bound),
        mu: clamp(&m.mu, -bound),
        nu: clamp(&m.nu, -bound),
    }
}

/// First-order multiplier update after a subproblem solve.
///
/// In slack-free mode `μ, ν` are read off the pair blocks of `∇ₓL_ρ`:
/// for `G_i = σ x_j + b`, `μ_i = −σ (∇ₓL_ρ)_j`, so that `∇ₓL` vanishes on
/// paired coordinates and `(μ_i, ν_i)` is the normal-cone element certified
/// by the subproblem.
pub fn update_multipliers(
    problem: &QuadraticMpcc,
    mode: SlackMode,
    point: &DVector<f64>,
    rho: f64,
    safeguarded: &MultiplierSet,
) -> Result<MultiplierSet> {
    let mode = mode.resolve(problem);
    check_rho(rho)?;
    check_len("state point", state_dim(problem, mode), point.len())?;
    problem.check_multipliers(safeguarded)?;
    let x = point.rows(0, problem.n()).into_owned();
    let lambda = (problem.g(&x) * rho + &safeguarded.lambda).map(|v| v.max(0.0));
    let eta = problem.h(&x) * rho + &safeguarded.eta;
    let (mu, nu) = match mode {
        SlackMode::Slack | SlackMode::Auto => {
            let (rg, rh) = slack_residuals(problem, point);
            (rg * rho + &safeguarded.mu, rh * rho + &safeguarded.nu)
        }
        SlackMode::SlackFree => {
            let pairs = problem.pairs().ok_or_else(|| {
                MpccError::NotCoordinateSelection("slack-free multipliers need coordinate pairs".into())
            })?;
            let grad = problem.grad_f(&x) + problem.ineq_adjoint(&lambda) + problem.eq_adjoint(&eta);
            let mut mu = DVector::zeros(problem.t());
            let mut nu = DVector::zeros(problem.t());
            for (i, p) in pairs.iter().enumerate() {
                mu[i] = -p.g_sign * grad[p.g_index];
                nu[i] = -p.h_sign * grad[p.h_index];
            }
            (mu, nu)
        }
    };
    Ok(MultiplierSet { lambda, eta, mu, nu })
}

/// Gradient of the slack Lagrangian `L^sl = L − μᵀz_G − νᵀz_H` (slack
/// mode) or of `f + λᵀg + ηᵀh` (slack-free mode) in the state variables.
pub fn slack_lagrangian_gradient(
    problem: &QuadraticMpcc,
    mode: SlackMode,
    point: &DVector<f64>,
    m: &MultiplierSet,
) -> Result<DVector<f64>> {
    let mode = mode.resolve(problem);
    check_len("state point", state_dim(problem, mode), point.len())?;
    problem.check_multipliers(m)?;
    let (n, t) = (problem.n(), problem.t());
    let x = point.rows(0, n).into_owned();
    let mut gx = problem.grad_f(&x) + problem.ineq_adjoint(&m.lambda) + problem.eq_adjoint(&m.eta);
    Ok(match mode {
        SlackMode::SlackFree => gx,
        SlackMode::Slack | SlackMode::Auto => {
            gx += problem.comp_g_adjoint(&m.mu) + problem.comp_h_adjoint(&m.nu);
            let mut grad = DVector::zeros(n + 2 * t);
            grad.rows_mut(0, n).copy_from(&gx);
            grad.rows_mut(n, t).copy_from(&(-&m.mu));
            grad.rows_mut(n + t, t).copy_from(&(-&m.nu));
            grad
        }
    })
}

/// Approximately solves `min L^sl_ρ(·, λ̂)` over the projection domain.
pub trait Subsolver {
    fn solve(
        &self,
        oracle: &mut dyn FnMut(&DVector<f64>) -> (f64, DVector<f64>),
        domain: &dyn ProjectionDomain,
        x0: &DVector<f64>,
        eps: f64,
    ) -> Result<SubproblemResult>;
}

impl Subsolver for PgradConfig {
    fn solve(
        &self,
        oracle: &mut dyn FnMut(&DVector<f64>) -> (f64, DVector<f64>),
        domain: &dyn ProjectionDomain,
        x0: &DVector<f64>,
        eps: f64,
    ) -> Result<SubproblemResult> {
        solve_subproblem(oracle, domain, x0, eps, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlmStatus {
    Converged,
    MaxIters,
    SubsolverFailure,
}

/// One outer iteration `k → k+1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlmIteration {
    pub k: usize,
    /// Penalty used for the subproblem.
    pub rho: f64,
    /// Penalty after the update test.
    pub rho_next: f64,
    /// `V_{ρ_k}(x^{k+1}, λ̂^k)`, the value driving the penalty test.
    pub v: f64,
    pub eps: f64,
    pub sub_iters: usize,
    pub sub_stationarity: f64,
    pub sub_converged: bool,
    pub objective: f64,
    pub elapsed_s: f64,
    /// Scaled `‖∇L^sl_ρ(x^{k+1}, λ̂^k) − ∇L^sl(x^{k+1}, λ^{k+1})‖_∞`.
    pub identity_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverTrace {
    pub iterations: Vec<AlmIteration>,
}

impl SolverTrace {
    pub fn subproblem_failures(&self) -> usize {
        self.iterations.iter().filter(|it| !it.sub_converged).count()
    }
}

#[derive(Debug, Clone)]
pub struct AlmResult {
    pub x: DVector<f64>,
    /// The full state (with slacks in slack mode).
    pub point: DVector<f64>,
    pub multipliers: MultiplierSet,
    pub status: AlmStatus,
    pub outer_iterations: usize,
    /// Penalty used in the last subproblem.
    pub rho: f64,
    /// Last value of the loop guard `V_{ρ_{k−1}}(x^k, λ^{k−1})`.
    pub final_v: f64,
    pub trace: SolverTrace,
    pub error: Option<String>,
}

/// Default initial penalty: `clamp(10·max(1,|f(x⁰)|) / max(1, V₁(x⁰, λ⁰)²), 1e-3, 1e3)`.
pub fn initial_penalty(
    problem: &QuadraticMpcc,
    mode: SlackMode,
    point: &DVector<f64>,
    m: &MultiplierSet,
) -> Result<f64> {
    let mode = mode.resolve(problem);
    let x = point.rows(0, problem.n()).into_owned();
    let v = feasibility_measure(problem, mode, point, 1.0, m)?;
    Ok((10.0 * problem.f(&x).abs().max(1.0) / v.powi(2).max(1.0)).clamp(1e-3, 1e3))
}

pub fn solve_alm(
    problem: &QuadraticMpcc,
    config: &AlmConfig,
    x0: &DVector<f64>,
    m0: &MultiplierSet,
    subsolver: &dyn Subsolver,
) -> Result<AlmResult> {
    config.validate()?;
    problem.check_point(x0)?;
    problem.check_multipliers(m0)?;
    let mode = config.slack_mode.resolve(problem);
    let (n, t) = (problem.n(), problem.t());

    let slack_domain;
    let pair_domain;
    let domain: &dyn ProjectionDomain = match mode {
        SlackMode::SlackFree => {
            pair_domain = PairDomain::for_problem(problem)?;
            &pair_domain
        }
        _ => {
            slack_domain = SlackDomain::new(n, t);
            &slack_domain
        }
    };

    let mut point = DVector::zeros(state_dim(problem, mode));
    point.rows_mut(0, n).copy_from(x0);
    let mut lambda = m0.clone();
    let mut lambda_prev = m0.clone();
    let mut rho = match config.rho0 {
        Some(r) => r,
        None => initial_penalty(problem, mode, &point, m0)?,
    };
    let mut rho_prev = rho;
    let mut prev_v = f64::NAN;
    let mut final_v = f64::NAN;
    let mut last_sub_converged = true;
    let mut trace = SolverTrace::default();
    let start = Instant::now();
    let mut k = 0;

    let finish = |point: DVector<f64>, multipliers, status, k, rho, final_v, trace, error| {
        Ok(AlmResult {
            x: point.rows(0, n).into_owned(),
            point,
            multipliers,
            status,
            outer_iterations: k,
            rho,
            final_v,
            trace,
            error,
        })
    };

    loop {
        if k > 0 {
            final_v = feasibility_measure(problem, mode, &point, rho_prev, &lambda_prev)?;
            if final_v <= config.tau_alm {
                // a feasible point from an inexact last subproblem carries no stationarity certificate
                let status = if last_sub_converged {
                    AlmStatus::Converged
                } else {
                    AlmStatus::SubsolverFailure
                };
                let error = (!last_sub_converged).then(|| "last subproblem missed its tolerance".to_string());
                return finish(point, lambda, status, k, rho_prev, final_v, trace, error);
            }
        }
        if k >= config.max_outer_iters {
            return finish(point, lambda, AlmStatus::MaxIters, k, rho_prev, final_v, trace, None);
        }

        let hat = safeguard_multipliers(&lambda, config.safeguard_bound);
        let eps = config.eps(k + 1);
        let al = AugmentedLagrangian {
            problem,
            mode,
            rho,
            safeguarded: &hat,
        };
        let mut oracle = |p: &DVector<f64>| al.eval(p);
        let sub = match subsolver.solve(&mut oracle, domain, &point, eps) {
            Ok(sub) => sub,
            Err(e) => {
                return finish(
                    point,
                    lambda,
                    AlmStatus::SubsolverFailure,
                    k,
                    rho_prev,
                    final_v,
                    trace,
                    Some(e.to_string()),
                )
            }
        };

        last_sub_converged = sub.converged;
        let new_point = sub.point;
        let new_lambda = update_multipliers(problem, mode, &new_point, rho, &hat)?;
        let v = feasibility_measure(problem, mode, &new_point, rho, &hat)?;
        let rho_next = if k == 0 || v <= config.q_alm * prev_v {
            rho
        } else {
            config.gamma * rho
        };

        let lhs = &sub.grad;
        let rhs = slack_lagrangian_gradient(problem, mode, &new_point, &new_lambda)?;
        let scale = 1.0 + lhs.amax() + new_lambda.max_abs();
        let identity_residual = (lhs - &rhs).amax() / scale;

        let x_new = new_point.rows(0, n).into_owned();
        trace.iterations.push(AlmIteration {
            k,
            rho,
            rho_next,
            v,
            eps,
            sub_iters: sub.iters,
            sub_stationarity: sub.stationarity,
            sub_converged: sub.converged,
            objective: problem.f(&x_new),
            elapsed_s: start.elapsed().as_secs_f64(),
            identity_residual,
        });

        lambda_prev = std::mem::replace(&mut lambda, new_lambda);
        point = new_point;
        prev_v = v;
        rho_prev = rho;
        rho = rho_next;
        k += 1;
    }
}
