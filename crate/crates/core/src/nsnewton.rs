//! Globalized nonsmooth Newton method on the M-stationarity system.
//!
//! The residual
//!
//! ```text
//! F(z) = [∇ₓL; min(−gᵢ, λᵢ); h; φ(Gᵢ, Hᵢ, μᵢ, νᵢ)]
//! ```
//!
//! vanishes exactly at M-stationary points with matching multipliers but is
//! discontinuous. Globalization runs on the smooth merit
//! `Φ_FB = ½‖F_FB‖²`, where `F_FB` replaces the `min` and `φ` blocks by
//! Fischer–Burmeister based counterparts with the same zero set.
//!
//! Variables are stacked as `z = (x, λ, η, μ, ν)`; the `φ` and `θ` rows of
//! pair `i` are stored contiguously.

use faer::prelude::*;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, MpccError, Result};
use crate::problem::{MultiplierSet, QuadraticMpcc};

/// A primal-dual point `(x, λ, η, μ, ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullPoint {
    pub x: DVector<f64>,
    pub multipliers: MultiplierSet,
}

impl FullPoint {
    pub fn new(x: DVector<f64>, multipliers: MultiplierSet) -> Self {
        Self { x, multipliers }
    }

    pub fn zeros(problem: &QuadraticMpcc) -> Self {
        Self::new(DVector::zeros(problem.n()), MultiplierSet::zeros(problem))
    }

    pub fn dim(&self) -> usize {
        self.x.len() + self.multipliers.len()
    }

    pub fn check(&self, problem: &QuadraticMpcc) -> Result<()> {
        problem.check_point(&self.x)?;
        problem.check_multipliers(&self.multipliers)
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let m = &self.multipliers;
        let parts = [&self.x, &m.lambda, &m.eta, &m.mu, &m.nu];
        DVector::from_iterator(self.dim(), parts.into_iter().flat_map(|p| p.iter().copied()))
    }

    pub fn from_vector(problem: &QuadraticMpcc, z: &DVector<f64>) -> Result<Self> {
        let l = Layout::of(problem);
        check_len("full point", l.dim(), z.len())?;
        Ok(l.split(z))
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    r: usize,
    s: usize,
    t: usize,
}

impl Layout {
    fn of(p: &QuadraticMpcc) -> Self {
        Self {
            n: p.n(),
            r: p.r(),
            s: p.s(),
            t: p.t(),
        }
    }

    fn dim(&self) -> usize {
        self.n + self.r + self.s + 2 * self.t
    }

    fn lambda(&self) -> usize {
        self.n
    }

    fn eta(&self) -> usize {
        self.n + self.r
    }

    fn mu(&self) -> usize {
        self.n + self.r + self.s
    }

    fn nu(&self) -> usize {
        self.mu() + self.t
    }

    fn split(&self, z: &DVector<f64>) -> FullPoint {
        let seg = |start, len| z.rows(start, len).into_owned();
        FullPoint {
            x: seg(0, self.n),
            multipliers: MultiplierSet {
                lambda: seg(self.lambda(), self.r),
                eta: seg(self.eta(), self.s),
                mu: seg(self.mu(), self.t),
                nu: seg(self.nu(), self.t),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub q_nsn: f64,
    pub tau_nsn: f64,
    pub angle_rho: f64,
    pub armijo_sigma: f64,
    pub armijo_beta: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    pub pivot_tol: f64,
    /// Stop once `‖∇Φ_FB‖` drops below this at a nonzero residual.
    pub merit_grad_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            q_nsn: 0.999,
            tau_nsn: 1e-11,
            angle_rho: 1e-3,
            armijo_sigma: 0.5,
            armijo_beta: 0.5,
            max_iters: 1000,
            max_backtracks: 60,
            pivot_tol: 1e-12,
            merit_grad_tol: 1e-12,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        let ok = unit(self.q_nsn)
            && unit(self.angle_rho)
            && unit(self.armijo_sigma)
            && unit(self.armijo_beta)
            && self.tau_nsn > 0.0
            && self.pivot_tol > 0.0
            && self.merit_grad_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(MpccError::InvalidConfig(format!("Newton settings {self:?}")))
        }
    }
}

pub fn ncp_min(a: f64, b: f64) -> f64 {
    a.min(b)
}

pub fn ncp_fb(a: f64, b: f64) -> f64 {
    a.hypot(b) - a - b
}

/// Partial derivatives of `π_FB`; the origin gets the limit direction `(−1, −1)`.
fn ncp_fb_grad(a: f64, b: f64) -> (f64, f64) {
    let r = a.hypot(b);
    if r == 0.0 {
        (-1.0, -1.0)
    } else {
        (a / r - 1.0, b / r - 1.0)
    }
}

/// `sign` with `sign(0) = +1`, the Newton-derivative selection for `|·|`.
fn sign(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `sign` with `sign(0) = 0`, the selection used inside `∇Φ_FB`.
fn sign0(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A term `±p_j` of a max/min: value and signed coordinate.
type Term = (f64, usize, f64);

fn first_max(terms: &[Term]) -> Term {
    terms.iter().copied().fold(terms[0], |best, t| if t.0 > best.0 { t } else { best })
}

fn first_min(terms: &[Term]) -> Term {
    terms.iter().copied().fold(terms[0], |best, t| if t.0 < best.0 { t } else { best })
}

/// The M-stationarity function `φ: ℝ⁴ → ℝ²` and its Newton derivative.
///
/// Each derivative row is a signed unit vector.
pub fn phi(a: f64, b: f64, mu: f64, nu: f64) -> ([f64; 2], [[f64; 4]; 2]) {
    let psi1 = first_max(&[(-a, 0, -1.0), (b.abs(), 1, sign(b)), (mu.abs(), 2, sign(mu))]);
    let psi2 = first_max(&[(-b, 1, -1.0), (a.abs(), 0, sign(a)), (nu.abs(), 3, sign(nu))]);
    let psi3 = first_max(&[(a.abs(), 0, sign(a)), (b.abs(), 1, sign(b)), (mu, 2, 1.0), (nu, 3, 1.0)]);
    let phi1 = first_min(&[psi1, psi2, psi3]);
    let phi2 = match phi1.1 {
        0 => first_min(&[(b.abs(), 1, sign(b)), (nu.abs(), 3, sign(nu))]),
        1 => first_min(&[(a.abs(), 0, sign(a)), (mu.abs(), 2, sign(mu))]),
        2 => (b.abs(), 1, sign(b)),
        _ => (a.abs(), 0, sign(a)),
    };
    let mut d = [[0.0; 4]; 2];
    d[0][phi1.1] = phi1.2;
    d[1][phi2.1] = phi2.2;
    ([phi1.0, phi2.0], d)
}

/// `θ: ℝ⁴ → ℝ⁴`, the Fischer–Burmeister counterpart of `φ`.
pub fn theta(a: f64, b: f64, mu: f64, nu: f64) -> [f64; 4] {
    theta_with_jacobian(a, b, mu, nu).0
}

fn theta_with_jacobian(a: f64, b: f64, mu: f64, nu: f64) -> ([f64; 4], [[f64; 4]; 4]) {
    let mut v = [0.0; 4];
    let mut d = [[0.0; 4]; 4];

    let p = ncp_fb(a, b);
    let (pa, pb) = ncp_fb_grad(a, b);
    v[0] = p.abs();
    d[0][0] = sign0(p) * pa;
    d[0][1] = sign0(p) * pb;

    let (pa, pm) = ncp_fb_grad(a.abs(), mu.abs());
    v[1] = ncp_fb(a.abs(), mu.abs());
    d[1][0] = pa * sign0(a);
    d[1][2] = pm * sign0(mu);

    let (pb, pn) = ncp_fb_grad(b.abs(), nu.abs());
    v[2] = ncp_fb(b.abs(), nu.abs());
    d[2][1] = pb * sign0(b);
    d[2][3] = pn * sign0(nu);

    if !(mu <= 0.0 && nu <= 0.0) {
        let (pm, pn) = ncp_fb_grad(mu.abs(), nu.abs());
        v[3] = ncp_fb(mu.abs(), nu.abs());
        d[3][2] = pm * sign0(mu);
        d[3][3] = pn * sign0(nu);
    }
    (v, d)
}

/// Problem data evaluated at one point.
struct Eval {
    grad_l: DVector<f64>,
    g: DVector<f64>,
    h: DVector<f64>,
    big_g: DVector<f64>,
    big_h: DVector<f64>,
    p: FullPoint,
}

impl Eval {
    fn at(problem: &QuadraticMpcc, z: &DVector<f64>) -> Self {
        let p = Layout::of(problem).split(z);
        Self {
            grad_l: problem.lagrangian_gradient_unchecked(&p.x, &p.multipliers),
            g: problem.g(&p.x),
            h: problem.h(&p.x),
            big_g: problem.big_g(&p.x),
            big_h: problem.big_h(&p.x),
            p,
        }
    }
}

fn residual_f_vec(problem: &QuadraticMpcc, z: &DVector<f64>) -> DVector<f64> {
    let l = Layout::of(problem);
    let e = Eval::at(problem, z);
    let m = &e.p.multipliers;
    let mut f = DVector::zeros(l.dim());
    f.rows_mut(0, l.n).copy_from(&e.grad_l);
    for i in 0..l.r {
        f[l.lambda() + i] = ncp_min(-e.g[i], m.lambda[i]);
    }
    f.rows_mut(l.eta(), l.s).copy_from(&e.h);
    for i in 0..l.t {
        let (v, _) = phi(e.big_g[i], e.big_h[i], m.mu[i], m.nu[i]);
        f[l.mu() + 2 * i] = v[0];
        f[l.mu() + 2 * i + 1] = v[1];
    }
    f
}

pub fn residual_f(problem: &QuadraticMpcc, z: &FullPoint) -> Result<DVector<f64>> {
    z.check(problem)?;
    Ok(residual_f_vec(problem, &z.to_vector()))
}

fn newton_derivative_vec(problem: &QuadraticMpcc, z: &DVector<f64>) -> DMatrix<f64> {
    let l = Layout::of(problem);
    let e = Eval::at(problem, z);
    let m = &e.p.multipliers;
    let (ag, ah) = (&problem.ineq_map().matrix, &problem.eq_map().matrix);
    let (acg, ach) = (&problem.comp_g_map().matrix, &problem.comp_h_map().matrix);
    let mut df = DMatrix::zeros(l.dim(), l.dim());

    df.view_mut((0, 0), (l.n, l.n)).copy_from(&problem.objective().hessian);
    df.view_mut((0, l.lambda()), (l.n, l.r)).copy_from(&ag.transpose());
    df.view_mut((0, l.eta()), (l.n, l.s)).copy_from(&ah.transpose());
    df.view_mut((0, l.mu()), (l.n, l.t)).copy_from(&acg.transpose());
    df.view_mut((0, l.nu()), (l.n, l.t)).copy_from(&ach.transpose());

    for i in 0..l.r {
        let row = l.lambda() + i;
        if -e.g[i] <= m.lambda[i] {
            df.view_mut((row, 0), (1, l.n)).copy_from(&(-ag.row(i)));
        } else {
            df[(row, l.lambda() + i)] = 1.0;
        }
    }
    df.view_mut((l.eta(), 0), (l.s, l.n)).copy_from(ah);

    for i in 0..l.t {
        let (_, d) = phi(e.big_g[i], e.big_h[i], m.mu[i], m.nu[i]);
        for (k, dk) in d.iter().enumerate() {
            let row = l.mu() + 2 * i + k;
            let mut view = df.view_mut((row, 0), (1, l.n));
            view += acg.row(i) * dk[0] + ach.row(i) * dk[1];
            df[(row, l.mu() + i)] = dk[2];
            df[(row, l.nu() + i)] = dk[3];
        }
    }
    df
}

pub fn newton_derivative_df(problem: &QuadraticMpcc, z: &FullPoint) -> Result<DMatrix<f64>> {
    z.check(problem)?;
    Ok(newton_derivative_vec(problem, &z.to_vector()))
}

/// `F_FB(z) = [∇ₓL; π_FB(−gᵢ, λᵢ); h; θ(Gᵢ, Hᵢ, μᵢ, νᵢ)]`.
pub fn residual_fb(problem: &QuadraticMpcc, z: &FullPoint) -> Result<DVector<f64>> {
    z.check(problem)?;
    Ok(merit_parts(problem, &z.to_vector(), false).0)
}

/// Returns `F_FB(z)` and, if requested, `∇Φ_FB(z) = J_FB(z)ᵀF_FB(z)`.
fn merit_parts(problem: &QuadraticMpcc, z: &DVector<f64>, with_grad: bool) -> (DVector<f64>, DVector<f64>) {
    let l = Layout::of(problem);
    let e = Eval::at(problem, z);
    let m = &e.p.multipliers;
    let mut ffb = DVector::zeros(l.n + l.r + l.s + 4 * l.t);
    ffb.rows_mut(0, l.n).copy_from(&e.grad_l);
    let mut d_lam = DVector::zeros(l.r);
    let mut c_g = DVector::zeros(l.r);
    for i in 0..l.r {
        let v = ncp_fb(-e.g[i], m.lambda[i]);
        ffb[l.n + i] = v;
        let (pa, pb) = ncp_fb_grad(-e.g[i], m.lambda[i]);
        c_g[i] = -pa * v;
        d_lam[i] = pb * v;
    }
    ffb.rows_mut(l.n + l.r, l.s).copy_from(&e.h);
    let base = l.n + l.r + l.s;
    let mut c_big_g = DVector::zeros(l.t);
    let mut c_big_h = DVector::zeros(l.t);
    let mut d_mu = DVector::zeros(l.t);
    let mut d_nu = DVector::zeros(l.t);
    for i in 0..l.t {
        let (v, d) = theta_with_jacobian(e.big_g[i], e.big_h[i], m.mu[i], m.nu[i]);
        for k in 0..4 {
            ffb[base + 4 * i + k] = v[k];
            c_big_g[i] += d[k][0] * v[k];
            c_big_h[i] += d[k][1] * v[k];
            d_mu[i] += d[k][2] * v[k];
            d_nu[i] += d[k][3] * v[k];
        }
    }
    if !with_grad {
        return (ffb, DVector::zeros(0));
    }

    let fl = ffb.rows(0, l.n).into_owned();
    let fh = ffb.rows(l.n + l.r, l.s).into_owned();
    let (ag, ah) = (problem.ineq_map(), problem.eq_map());
    let (acg, ach) = (problem.comp_g_map(), problem.comp_h_map());
    let mut grad = DVector::zeros(l.dim());
    let gx = &problem.objective().hessian * &fl
        + ag.adjoint(&c_g)
        + ah.adjoint(&fh)
        + acg.adjoint(&c_big_g)
        + ach.adjoint(&c_big_h);
    grad.rows_mut(0, l.n).copy_from(&gx);
    grad.rows_mut(l.lambda(), l.r).copy_from(&(&ag.matrix * &fl + d_lam));
    grad.rows_mut(l.eta(), l.s).copy_from(&(&ah.matrix * &fl));
    grad.rows_mut(l.mu(), l.t).copy_from(&(&acg.matrix * &fl + d_mu));
    grad.rows_mut(l.nu(), l.t).copy_from(&(&ach.matrix * &fl + d_nu));
    (ffb, grad)
}

fn merit_value(problem: &QuadraticMpcc, z: &DVector<f64>) -> f64 {
    0.5 * merit_parts(problem, z, false).0.norm_squared()
}

/// `Φ_FB(z) = ½‖F_FB(z)‖²` and its gradient.
pub fn merit_phi_fb(problem: &QuadraticMpcc, z: &FullPoint) -> Result<(f64, DVector<f64>)> {
    z.check(problem)?;
    let (ffb, grad) = merit_parts(problem, &z.to_vector(), true);
    Ok((0.5 * ffb.norm_squared(), grad))
}

/// Solves `DF d = −F` by LU with partial pivoting; `None` if some pivot is
/// below `pivot_tol` times the largest row norm.
fn newton_direction(df: &DMatrix<f64>, f: &DVector<f64>, pivot_tol: f64) -> Option<DVector<f64>> {
    let n = f.len();
    if n == 0 {
        return Some(DVector::zeros(0));
    }
    let scale = df.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    let a = Mat::<f64>::from_fn(n, n, |i, j| df[(i, j)]);
    let lu = a.partial_piv_lu();
    let u = lu.compute_u();
    if (0..n).any(|i| !(u.read(i, i).abs() > pivot_tol * scale)) {
        return None;
    }
    let rhs = Col::<f64>::from_fn(n, |i| -f[i]);
    let d = lu.solve(&rhs);
    let d = DVector::from_fn(n, |i, _| d.read(i));
    d.iter().all(|v| v.is_finite()).then_some(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    FullNewton,
    /// Newton direction that failed the ratio test but passed the angle
    /// test, followed by a line search.
    DampedNewton,
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonStatus {
    Converged,
    MaxIters,
    StationaryMerit,
    LineSearchFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonStep {
    pub k: usize,
    pub kind: StepKind,
    pub step_size: f64,
    /// `‖F‖` and `Φ_FB` before the step.
    pub residual: f64,
    pub merit: f64,
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub z: FullPoint,
    pub status: NewtonStatus,
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub final_merit: f64,
    pub trace: Vec<NewtonStep>,
}

impl NewtonResult {
    pub fn count(&self, kind: StepKind) -> usize {
        self.trace.iter().filter(|s| s.kind == kind).count()
    }

    pub fn full_steps(&self) -> usize {
        self.count(StepKind::FullNewton)
    }

    pub fn gradient_steps(&self) -> usize {
        self.count(StepKind::Gradient)
    }
}

pub fn solve_newton(problem: &QuadraticMpcc, cfg: &NewtonConfig, z0: &FullPoint) -> Result<NewtonResult> {
    cfg.validate()?;
    z0.check(problem)?;
    let mut z = z0.to_vector();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(MpccError::NonFinite {
            context: "Newton starting point".into(),
            point: z.iter().copied().collect(),
        });
    }
    let mut f = residual_f_vec(problem, &z);
    let initial_residual = f.norm();
    let mut trace = Vec::new();

    let status = loop {
        let residual = f.norm();
        if residual <= cfg.tau_nsn {
            break NewtonStatus::Converged;
        }
        if trace.len() >= cfg.max_iters {
            break NewtonStatus::MaxIters;
        }
        let (ffb, grad) = merit_parts(problem, &z, true);
        let merit = 0.5 * ffb.norm_squared();
        let grad_norm = grad.norm();
        if grad_norm <= cfg.merit_grad_tol {
            break NewtonStatus::StationaryMerit;
        }

        let df = newton_derivative_vec(problem, &z);
        let d = newton_direction(&df, &f, cfg.pivot_tol);
        let k = trace.len();
        let mut step = NewtonStep {
            k,
            kind: StepKind::FullNewton,
            step_size: 1.0,
            residual,
            merit,
        };

        let full = d.as_ref().map(|d| &z + d).filter(|trial| merit_value(problem, trial) <= cfg.q_nsn * merit);
        if let Some(trial) = full {
            z = trial;
        } else {
            let (dir, kind) = match d {
                Some(d) if grad.dot(&d) <= -cfg.angle_rho * d.norm() * grad_norm => (d, StepKind::DampedNewton),
                _ => (-&grad, StepKind::Gradient),
            };
            step.kind = kind;
            let slope = grad.dot(&dir);
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..=cfg.max_backtracks {
                let trial = &z + &dir * alpha;
                if merit_value(problem, &trial) <= merit + cfg.armijo_sigma * alpha * slope {
                    accepted = Some(trial);
                    break;
                }
                alpha *= cfg.armijo_beta;
            }
            let Some(trial) = accepted else {
                break NewtonStatus::LineSearchFailure;
            };
            step.step_size = alpha;
            z = trial;
        }
        trace.push(step);
        f = residual_f_vec(problem, &z);
    };

    let final_merit = merit_value(problem, &z);
    Ok(NewtonResult {
        z: Layout::of(problem).split(&z),
        status,
        iterations: trace.len(),
        initial_residual,
        final_residual: f.norm(),
        final_merit,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn toy() -> QuadraticMpcc {
        // min (x₁−1)² + x₂² s.t. 0 ≤ x₁ ⊥ x₂ ≥ 0
        QuadraticMpcc::builder(2)
            .objective(DMatrix::identity(2, 2) * 2.0, dvector![-2.0, 0.0], 1.0)
            .coordinate_pairs(&[(0, 1)], &[(0.0, 0.0)])
            .build()
            .unwrap()
    }

    fn toy_solution() -> FullPoint {
        // x = (1, 0), ∇f = (0, 0) ⇒ μ = ν = 0
        FullPoint::new(dvector![1.0, 0.0], MultiplierSet::zeros_with(0, 0, 1))
    }

    #[test]
    fn ncp_examples() {
        assert_eq!(ncp_fb(0.0, 0.0), 0.0);
        assert_eq!(ncp_fb(3.0, 4.0), -2.0);
        assert_eq!(ncp_min(2.0, -1.0), -1.0);
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(1.0, 0.0, 0.0, 5.0).0, [0.0, 0.0]);
        assert_eq!(phi(0.0, 0.0, 1.0, 1.0).0[0], 1.0);
        assert_eq!(phi(0.0, 0.0, -1.0, -2.0).0, [0.0, 0.0]);
        let (_, d) = phi(0.3, -0.7, 2.0, 0.1);
        for row in d {
            assert_eq!(row.iter().filter(|v| **v != 0.0).count(), 1);
            assert_eq!(row.iter().map(|v| v.abs()).sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta(1.0, 0.0, 0.0, 5.0), [0.0; 4]);
        assert_eq!(theta(0.0, 0.0, -1.0, -2.0)[3], 0.0);
        assert_eq!(theta(3.0, 4.0, 0.0, 0.0)[0], 2.0);
    }

    #[test]
    fn residual_vanishes_at_the_toy_solution() {
        let p = toy();
        assert!(residual_f(&p, &toy_solution()).unwrap().amax() < 1e-14);
        let empty = QuadraticMpcc::builder(2).build().unwrap();
        assert_eq!(residual_f(&empty, &FullPoint::zeros(&empty)).unwrap().amax(), 0.0);
    }

    #[test]
    fn forbidden_multiplier_quadrant_gives_positive_residual() {
        let p = QuadraticMpcc::builder(2)
            .objective(DMatrix::identity(2, 2) * 2.0, dvector![2.0, 2.0], 2.0)
            .coordinate_pairs(&[(0, 1)], &[(0.0, 0.0)])
            .build()
            .unwrap();
        // (x₁+1)² + (x₂+1)²: at 0, ∇f = (2, 2) ⇒ μ = ν = −2, M-stationary
        let mut m = MultiplierSet::zeros_with(0, 0, 1);
        m.mu[0] = -2.0;
        m.nu[0] = -2.0;
        let z = FullPoint::new(dvector![0.0, 0.0], m);
        assert!(residual_f(&p, &z).unwrap().amax() < 1e-15);
        let mut bad = z.clone();
        bad.multipliers.mu[0] = 1.0;
        assert!(residual_f(&p, &bad).unwrap().norm() > 0.0);
    }

    #[test]
    fn min_row_selects_the_constraint_when_it_is_smaller() {
        let p = QuadraticMpcc::builder(2)
            .objective(DMatrix::identity(2, 2), DVector::zeros(2), 0.0)
            .inequalities(dmatrix![1.0, 2.0], dvector![-1.0])
            .build()
            .unwrap();
        // x = 0 ⇒ −g = 1 < λ = 3
        let mut z = FullPoint::zeros(&p);
        z.multipliers.lambda[0] = 3.0;
        let df = newton_derivative_df(&p, &z).unwrap();
        assert_eq!(df.row(2).columns(0, 2).into_owned(), dmatrix![-1.0, -2.0]);
        assert_eq!(df[(2, 2)], 0.0);
        z.multipliers.lambda[0] = 0.5;
        let df = newton_derivative_df(&p, &z).unwrap();
        assert_eq!(df.row(2).into_owned(), dmatrix![0.0, 0.0, 1.0]);
    }

    #[test]
    fn merit_gradient_matches_finite_differences() {
        let p = QuadraticMpcc::builder(3)
            .objective(dmatrix![2.0, 0.3, 0.0; 0.3, 1.0, 0.1; 0.0, 0.1, 0.5], dvector![0.1, -0.2, 0.3], 0.0)
            .inequalities(dmatrix![1.0, 1.0, 0.0], dvector![-0.5])
            .equalities(dmatrix![0.0, 1.0, -1.0], dvector![0.2])
            .complementarity(dmatrix![1.0, 0.0, 1.0], dvector![0.1], dmatrix![0.0, 2.0, 0.0], dvector![-0.3])
            .build()
            .unwrap();
        let z = dvector![0.4, 0.9, -0.2, 0.7, -0.4, 0.3, -1.1];
        let point = FullPoint::from_vector(&p, &z).unwrap();
        let (_, grad) = merit_phi_fb(&p, &point).unwrap();
        let fd = crate::oracle::finite_diff_gradient(|v| merit_value(&p, v), &z, 1e-6);
        assert!((&grad - &fd).norm() <= 1e-5 * grad.norm().max(1.0), "{grad} vs {fd}");
    }

    #[test]
    fn exact_start_needs_no_iterations() {
        let p = toy();
        let r = solve_newton(&p, &NewtonConfig::default(), &toy_solution()).unwrap();
        assert_eq!(r.status, NewtonStatus::Converged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn converges_from_a_nearby_start_with_full_steps() {
        let p = toy();
        let mut z = toy_solution();
        z.x += dvector![0.01, 0.02];
        z.multipliers.nu[0] = 0.01;
        let r = solve_newton(&p, &NewtonConfig::default(), &z).unwrap();
        assert_eq!(r.status, NewtonStatus::Converged);
        assert_eq!(r.full_steps(), r.iterations);
        assert_relative_eq!(r.z.x[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn merit_is_nonincreasing_from_a_far_start() {
        let p = toy();
        let z = FullPoint::new(dvector![-3.0, 4.0], MultiplierSet {
            lambda: DVector::zeros(0),
            eta: DVector::zeros(0),
            mu: dvector![2.5],
            nu: dvector![1.5],
        });
        let r = solve_newton(&p, &NewtonConfig::default(), &z).unwrap();
        assert_eq!(r.status, NewtonStatus::Converged);
        assert!(r.trace.windows(2).all(|w| w[1].merit <= w[0].merit));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = NewtonConfig {
            q_nsn: 1.0,
            ..Default::default()
        };
        assert!(solve_newton(&toy(), &cfg, &toy_solution()).is_err());
    }

    #[test]
    fn full_point_round_trips() {
        let p = QuadraticMpcc::builder(2)
            .inequalities(dmatrix![1.0, 0.0], dvector![0.0])
            .coordinate_pairs(&[(0, 1)], &[(0.0, 0.0)])
            .build()
            .unwrap();
        let v = dvector![1.0, 2.0, 3.0, 4.0, 5.0];
        let z = FullPoint::from_vector(&p, &v).unwrap();
        assert_eq!(z.multipliers.lambda, dvector![3.0]);
        assert_eq!(z.multipliers.nu, dvector![5.0]);
        assert_eq!(z.to_vector(), v);
        assert!(FullPoint::from_vector(&p, &dvector![1.0]).is_err());
    }
}
