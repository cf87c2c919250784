//! Active index sets, the W/C/M/S stationarity hierarchy, MPCC-LICQ and
//! MPCC-SSOC.
//!
//! All tests use a single activity tolerance `tol`: a constraint value is
//! "zero" when its magnitude is at most `tol`, and sign conditions on
//! multipliers are relaxed by `tol`.

use nalgebra::{DMatrix, DVector};

use crate::error::{MpccError, Result};
use crate::problem::{MultiplierSet, QuadraticMpcc};

pub const DEFAULT_ACTIVITY_TOL: f64 = 1e-6;

/// Active-set partition at a point plus the multiplier-dependent
/// refinements used by MPCC-SSOC.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndexSets {
    pub i_g: Vec<usize>,
    pub i_plus0: Vec<usize>,
    pub i_0plus: Vec<usize>,
    pub i_00: Vec<usize>,
    pub i_g_plus: Vec<usize>,
    pub i_00_pm_r: Vec<usize>,
    pub i_00_r_pm: Vec<usize>,
    pub i_00_00: Vec<usize>,
    pub tol: f64,
}

pub fn compute_index_sets(
    problem: &QuadraticMpcc,
    x: &DVector<f64>,
    m: &MultiplierSet,
    tol: f64,
) -> Result<IndexSets> {
    if !(tol > 0.0) {
        return Err(MpccError::InvalidConfig(format!("activity tolerance must be positive, got {tol}")));
    }
    problem.check_point(x)?;
    problem.check_multipliers(m)?;
    let g = problem.g(x);
    let gg = problem.big_g(x);
    let hh = problem.big_h(x);
    let mut sets = IndexSets {
        tol,
        ..Default::default()
    };
    for i in 0..problem.r() {
        if g[i].abs() <= tol {
            sets.i_g.push(i);
            if m.lambda[i] > tol {
                sets.i_g_plus.push(i);
            }
        }
    }
    for i in 0..problem.t() {
        let g_zero = gg[i].abs() <= tol;
        let h_zero = hh[i].abs() <= tol;
        match (g_zero, h_zero) {
            (true, true) => {
                sets.i_00.push(i);
                let mu_nz = m.mu[i].abs() > tol;
                let nu_nz = m.nu[i].abs() > tol;
                if mu_nz {
                    sets.i_00_pm_r.push(i);
                }
                if nu_nz {
                    sets.i_00_r_pm.push(i);
                }
                if !mu_nz && !nu_nz {
                    sets.i_00_00.push(i);
                }
            }
            (false, true) if gg[i] > tol => sets.i_plus0.push(i),
            (true, false) if hh[i] > tol => sets.i_0plus.push(i),
            _ => {}
        }
    }
    Ok(sets)
}

/// Largest violation observed for each group of conditions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Violations {
    pub primal: f64,
    pub gradient: f64,
    pub lambda: f64,
    pub weak: f64,
    pub clarke: f64,
    pub mordukhovich: f64,
    pub strong: f64,
}

/// Outcome of [`classify_stationarity`]. The flags form the chain
/// `S ⇒ M ⇒ C ⇒ W ⇒ feasible`; the constructor enforces it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityReport {
    pub is_feasible: bool,
    pub is_w: bool,
    pub is_c: bool,
    pub is_m: bool,
    pub is_s: bool,
    pub worst_violation: Violations,
}

impl StationarityReport {
    fn chained(feasible: bool, w: bool, c: bool, m: bool, s: bool, worst: Violations) -> Self {
        let is_w = feasible && w;
        let is_c = is_w && c;
        let is_m = is_c && m;
        let is_s = is_m && s;
        Self {
            is_feasible: feasible,
            is_w,
            is_c,
            is_m,
            is_s,
            worst_violation: worst,
        }
    }
}

/// Scale-aware test of the M-condition `(μ<0 ∧ ν<0) ∨ μν = 0` on a biactive pair.
pub fn m_condition_violation(mu: f64, nu: f64, tol: f64) -> f64 {
    if mu < -tol && nu < -tol {
        0.0
    } else {
        (mu * nu).abs() / 1f64.max(mu.abs()).max(nu.abs())
    }
}

pub fn classify_stationarity(
    problem: &QuadraticMpcc,
    x: &DVector<f64>,
    m: &MultiplierSet,
    tol: f64,
) -> Result<StationarityReport> {
    let sets = compute_index_sets(problem, x, m, tol)?;
    let g = problem.g(x);
    let h = problem.h(x);
    let gg = problem.big_g(x);
    let hh = problem.big_h(x);
    let mut v = Violations::default();

    for &gi in g.iter() {
        v.primal = v.primal.max(gi);
    }
    v.primal = v.primal.max(h.amax());
    for i in 0..problem.t() {
        v.primal = v.primal.max(-gg[i]).max(-hh[i]).max(gg[i].abs().min(hh[i].abs()));
    }

    v.gradient = problem.lagrangian_gradient_unchecked(x, m).amax();

    let mut in_ig = vec![false; problem.r()];
    for &i in &sets.i_g {
        in_ig[i] = true;
    }
    for (i, &active) in in_ig.iter().enumerate() {
        let viol = if active { -m.lambda[i] } else { m.lambda[i].abs() };
        v.lambda = v.lambda.max(viol);
    }
    for &i in &sets.i_plus0 {
        v.weak = v.weak.max(m.mu[i].abs());
    }
    for &i in &sets.i_0plus {
        v.weak = v.weak.max(m.nu[i].abs());
    }
    for &i in &sets.i_00 {
        let (mu, nu) = (m.mu[i], m.nu[i]);
        v.clarke = v.clarke.max(-mu * nu);
        v.mordukhovich = v.mordukhovich.max(m_condition_violation(mu, nu, tol));
        v.strong = v.strong.max(mu).max(nu);
    }

    Ok(StationarityReport::chained(
        v.primal <= tol,
        v.gradient <= tol && v.lambda <= tol && v.weak <= tol,
        v.clarke <= tol,
        v.mordukhovich <= tol,
        v.strong <= tol,
        v,
    ))
}

fn stack_rows(parts: &[(&DMatrix<f64>, &[usize])], n: usize) -> DMatrix<f64> {
    let total: usize = parts.iter().map(|(_, idx)| idx.len()).sum();
    let mut out = DMatrix::zeros(total, n);
    let mut row = 0;
    for (mat, idx) in parts {
        for &i in idx.iter() {
            out.row_mut(row).copy_from(&mat.row(i));
            row += 1;
        }
    }
    out
}

fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let largest = sv.max();
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * largest).count()
}

/// MPCC-LICQ: the gradients of `g_i (i ∈ I_g)`, all `h`, `G_i (i ∈ I_0+ ∪ I_00)`
/// and `H_i (i ∈ I_+0 ∪ I_00)` are linearly independent.
pub fn check_mpcc_licq(problem: &QuadraticMpcc, x: &DVector<f64>, sets: &IndexSets) -> Result<bool> {
    problem.check_point(x)?;
    let all_eq: Vec<usize> = (0..problem.s()).collect();
    let g_rows: Vec<usize> = sets.i_0plus.iter().chain(&sets.i_00).copied().collect();
    let h_rows: Vec<usize> = sets.i_plus0.iter().chain(&sets.i_00).copied().collect();
    let stacked = stack_rows(
        &[
            (&problem.ineq_map().matrix, &sets.i_g),
            (&problem.eq_map().matrix, &all_eq),
            (&problem.comp_g_map().matrix, &g_rows),
            (&problem.comp_h_map().matrix, &h_rows),
        ],
        problem.n(),
    );
    Ok(numerical_rank(&stacked) == stacked.nrows())
}

/// Largest number of biactive indices with vanishing multipliers for which
/// the `2^k` branches of the critical set are enumerated.
pub const SSOC_BRANCH_GUARD: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsocOutcome {
    Holds,
    Fails,
    /// `|I_00^00|` exceeded [`SSOC_BRANCH_GUARD`].
    NotChecked,
}

impl SsocOutcome {
    pub fn holds(self) -> bool {
        self == SsocOutcome::Holds
    }
}

/// Orthonormal basis of `{d : A d = 0}`.
pub(crate) fn nullspace(a: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad to at least n rows so the SVD returns a full right basis
    let rows = a.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.rows_mut(0, a.nrows()).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let largest = svd.singular_values.max();
    let cols: Vec<usize> = (0..n)
        .filter(|&j| largest == 0.0 || svd.singular_values[j] <= 1e-10 * largest)
        .collect();
    let mut basis = DMatrix::zeros(n, cols.len());
    for (k, &j) in cols.iter().enumerate() {
        basis.column_mut(k).copy_from(&v_t.row(j).transpose());
    }
    basis
}

/// MPCC-SSOC: `dᵀ∇²ₓₓL d > 0` on every branch subspace of the critical set.
pub fn check_mpcc_ssoc(
    problem: &QuadraticMpcc,
    x: &DVector<f64>,
    m: &MultiplierSet,
    sets: &IndexSets,
) -> Result<SsocOutcome> {
    problem.check_point(x)?;
    problem.check_multipliers(m)?;
    let k = sets.i_00_00.len();
    if k > SSOC_BRANCH_GUARD {
        return Ok(SsocOutcome::NotChecked);
    }
    let n = problem.n();
    let hess = &problem.objective().hessian;
    let all_eq: Vec<usize> = (0..problem.s()).collect();
    let base_g: Vec<usize> = sets.i_0plus.iter().chain(&sets.i_00_pm_r).copied().collect();
    let base_h: Vec<usize> = sets.i_plus0.iter().chain(&sets.i_00_r_pm).copied().collect();

    for mask in 0u64..(1u64 << k) {
        let mut g_rows = base_g.clone();
        let mut h_rows = base_h.clone();
        for (bit, &i) in sets.i_00_00.iter().enumerate() {
            if mask & (1 << bit) == 0 {
                g_rows.push(i);
            } else {
                h_rows.push(i);
            }
        }
        let stacked = stack_rows(
            &[
                (&problem.ineq_map().matrix, &sets.i_g_plus),
                (&problem.eq_map().matrix, &all_eq),
                (&problem.comp_g_map().matrix, &g_rows),
                (&problem.comp_h_map().matrix, &h_rows),
            ],
            n,
        );
        let z = nullspace(&stacked, n);
        if z.ncols() == 0 {
            continue;
        }
        let reduced = z.transpose() * hess * &z;
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let min_eig = reduced.symmetric_eigenvalues().min();
        if min_eig <= 1e-10 {
            return Ok(SsocOutcome::Fails);
        }
    }
    Ok(SsocOutcome::Holds)
}
