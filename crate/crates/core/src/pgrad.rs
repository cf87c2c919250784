//! Nonmonotone spectral projected gradient method over a closed (possibly
//! nonconvex) set with a computable projection.
//!
//! Trial points are `P(x − s∇φ(x))` for a Barzilai–Borwein step `s`. A trial
//! point is accepted when
//!
//! ```text
//! φ(x⁺) ≤ max_{j < M} φ(x_{k−j}) − δ/(2s)·‖x⁺ − x‖²
//! ```
//!
//! and `s` is shrunk otherwise. Iteration stops once
//! `dist(−∇φ(x), N(x)) ≤ ε` at an accepted iterate.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::compgeo::ProjectionDomain;
use crate::error::{MpccError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgradConfig {
    pub memory_length: usize,
    pub step_min: f64,
    pub step_max: f64,
    pub sufficient_decrease: f64,
    pub backtrack: f64,
    pub max_iters: usize,
}

impl Default for PgradConfig {
    fn default() -> Self {
        Self {
            memory_length: 10,
            step_min: 1e-10,
            step_max: 1e10,
            sufficient_decrease: 1e-4,
            backtrack: 0.5,
            max_iters: 200_000,
        }
    }
}

impl PgradConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.memory_length >= 1
            && self.step_min > 0.0
            && self.step_min < self.step_max
            && self.sufficient_decrease > 0.0
            && self.sufficient_decrease < 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0;
        if ok {
            Ok(())
        } else {
            Err(MpccError::InvalidConfig(format!("projected gradient settings {self:?}")))
        }
    }
}

/// Hard cap on step reductions within one iteration.
const MAX_BACKTRACKS: usize = 200;

/// Relative slack in the decrease test, so that steps whose decrease is
/// below the rounding level of `f` are not rejected forever.
const VALUE_NOISE: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub point: DVector<f64>,
    pub value: f64,
    pub grad: DVector<f64>,
    /// `dist(−∇φ(point), N(point))`.
    pub stationarity: f64,
    pub iters: usize,
    pub converged: bool,
    /// Nonmonotone reference value used at each accepted step.
    pub reference_values: Vec<f64>,
}

fn evaluate<F>(oracle: &mut F, x: &DVector<f64>) -> Result<(f64, DVector<f64>)>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let (f, g) = oracle(x);
    if f.is_finite() && g.iter().all(|v| v.is_finite()) {
        Ok((f, g))
    } else {
        Err(MpccError::NonFinite {
            context: "projected gradient objective".into(),
            point: x.iter().copied().collect(),
        })
    }
}

/// Minimizes a smooth function over `domain` to `eps`-approximate
/// M-stationarity, starting from the projection of `x0`.
pub fn solve_subproblem<F>(
    mut oracle: F,
    domain: &dyn ProjectionDomain,
    x0: &DVector<f64>,
    eps: f64,
    cfg: &PgradConfig,
) -> Result<SubproblemResult>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    cfg.validate()?;
    if !(eps > 0.0) {
        return Err(MpccError::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    let mut x = domain.project(x0);
    let (mut f, mut g) = evaluate(&mut oracle, &x)?;
    let mut dist = domain.stationarity_distance(&x, &g)?;

    let mut best = (x.clone(), f, g.clone(), dist);
    let mut reference_values = Vec::new();
    if dist <= eps {
        return Ok(SubproblemResult {
            point: x,
            value: f,
            grad: g,
            stationarity: dist,
            iters: 0,
            converged: true,
            reference_values,
        });
    }

    let mut history: VecDeque<f64> = VecDeque::with_capacity(cfg.memory_length);
    history.push_back(f);
    let first = &domain.project(&(&x - &g)) - &x;
    let mut step = if first.amax() > 0.0 {
        (1.0 / first.amax()).clamp(cfg.step_min, cfg.step_max)
    } else {
        1.0
    };

    let mut iters = 0;
    while iters < cfg.max_iters {
        iters += 1;
        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = domain.project(&(&x - &g * s));
            let d_sq = (&trial - &x).norm_squared();
            if d_sq == 0.0 {
                break;
            }
            let (ft, gt) = evaluate(&mut oracle, &trial)?;
            let noise = VALUE_NOISE * f_ref.abs().max(1.0);
            if ft <= f_ref - cfg.sufficient_decrease / (2.0 * s) * d_sq + noise {
                accepted = Some((trial, ft, gt));
                break;
            }
            s *= cfg.backtrack;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // no admissible step: x is a fixed point of the projected step
            break;
        };

        let sk = &x_new - &x;
        let yk = &g_new - &g;
        let sy = sk.dot(&yk);
        if sy > 1e-16 {
            let bb = if iters % 2 == 1 {
                sk.norm_squared() / sy
            } else {
                let yy = yk.norm_squared();
                if yy > 1e-16 { sy / yy } else { step }
            };
            step = bb.clamp(cfg.step_min, cfg.step_max);
        }

        reference_values.push(f_ref);
        x = x_new;
        f = f_new;
        g = g_new;
        if history.len() == cfg.memory_length {
            history.pop_front();
        }
        history.push_back(f);

        dist = domain.stationarity_distance(&x, &g)?;
        if dist < best.3 {
            best = (x.clone(), f, g.clone(), dist);
        }
        if dist <= eps {
            return Ok(SubproblemResult {
                point: x,
                value: f,
                grad: g,
                stationarity: dist,
                iters,
                converged: true,
                reference_values,
            });
        }
    }

    let (point, value, grad, stationarity) = best;
    Ok(SubproblemResult {
        point,
        value,
        grad,
        stationarity,
        iters,
        converged: stationarity <= eps,
        reference_values,
    })
}
