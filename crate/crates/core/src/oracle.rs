//! Brute-force references for tests: branch enumeration for tiny MPCCs and
//! central finite differences.

use nalgebra::{DMatrix, DVector};

use crate::error::{MpccError, Result};
use crate::problem::{MultiplierSet, QuadraticMpcc};

pub const BRANCH_GUARD: usize = 12;
pub const ACTIVE_SET_GUARD: usize = 10;

const FEAS_TOL: f64 = 1e-9;
const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BranchTag {
    /// `Gᵢ = 0`, `Hᵢ ≥ 0`.
    GZero,
    /// `Hᵢ = 0`, `Gᵢ ≥ 0`.
    HZero,
    BothZero,
}

pub type BranchAssignment = Vec<BranchTag>;

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub x: DVector<f64>,
    pub multipliers: MultiplierSet,
    pub branch: BranchAssignment,
    pub objective: f64,
}

/// All branch assignments in lexicographic order.
pub fn branch_assignments(t: usize) -> Vec<BranchAssignment> {
    let tags = [BranchTag::GZero, BranchTag::HZero, BranchTag::BothZero];
    let mut out = vec![Vec::with_capacity(t)];
    for _ in 0..t {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                tags.iter().map(move |tag| {
                    let mut next = prefix.clone();
                    next.push(*tag);
                    next
                })
            })
            .collect();
    }
    out
}

/// Which multiplier a constraint row belongs to.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Lambda(usize),
    Eta(usize),
    Mu(usize),
    Nu(usize),
}

struct Row {
    coeffs: DVector<f64>,
    offset: f64,
    slot: Slot,
}

fn row_of(m: &crate::problem::AffineMap, i: usize, slot: Slot) -> Row {
    Row {
        coeffs: m.matrix.row(i).transpose(),
        offset: m.offset[i],
        slot,
    }
}

/// Solves `min f` subject to `row(x) = 0` for all `rows`; `None` if the KKT
/// system is inconsistent.
fn solve_equality_qp(problem: &QuadraticMpcc, rows: &[&Row]) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = problem.n();
    let k = rows.len();
    let obj = problem.objective();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    let mut rhs = DVector::zeros(n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&obj.hessian);
    rhs.rows_mut(0, n).copy_from(&(-&obj.linear));
    for (j, row) in rows.iter().enumerate() {
        kkt.view_mut((0, n + j), (n, 1)).copy_from(&row.coeffs);
        kkt.view_mut((n + j, 0), (1, n)).copy_from(&row.coeffs.transpose());
        rhs[n + j] = -row.offset;
    }
    let scale = kkt.amax().max(rhs.amax()).max(1.0);
    let sol = kkt.clone().svd(true, true).solve(&rhs, 1e-12 * scale).ok()?;
    if (&kkt * &sol - &rhs).amax() > 1e-9 * scale {
        return None;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, k).into_owned()))
}

/// Enumerates KKT points of every branch NLP (with an active-set sweep over
/// its inequalities), keeping those that are feasible with correctly signed
/// multipliers. Points are de-duplicated by `x`.
pub fn enumerate_branch_nlps(problem: &QuadraticMpcc) -> Result<Vec<BranchPoint>> {
    let (r, s, t) = (problem.r(), problem.s(), problem.t());
    if t > BRANCH_GUARD {
        return Err(MpccError::GuardExceeded {
            what: "complementarity pairs",
            value: t,
            limit: BRANCH_GUARD,
        });
    }
    if r > ACTIVE_SET_GUARD {
        return Err(MpccError::GuardExceeded {
            what: "inequality rows",
            value: r,
            limit: ACTIVE_SET_GUARD,
        });
    }

    let g_rows: Vec<Row> = (0..r).map(|i| row_of(problem.ineq_map(), i, Slot::Lambda(i))).collect();
    let h_rows: Vec<Row> = (0..s).map(|i| row_of(problem.eq_map(), i, Slot::Eta(i))).collect();
    let cg_rows: Vec<Row> = (0..t).map(|i| row_of(problem.comp_g_map(), i, Slot::Mu(i))).collect();
    let ch_rows: Vec<Row> = (0..t).map(|i| row_of(problem.comp_h_map(), i, Slot::Nu(i))).collect();

    let mut found: Vec<BranchPoint> = Vec::new();
    for branch in branch_assignments(t) {
        let mut equalities: Vec<&Row> = h_rows.iter().collect();
        // one-sided rows are `−row ≤ 0`
        let mut upper: Vec<&Row> = g_rows.iter().collect();
        let mut lower: Vec<&Row> = Vec::new();
        for (i, tag) in branch.iter().enumerate() {
            match tag {
                BranchTag::GZero => {
                    equalities.push(&cg_rows[i]);
                    lower.push(&ch_rows[i]);
                }
                BranchTag::HZero => {
                    equalities.push(&ch_rows[i]);
                    lower.push(&cg_rows[i]);
                }
                BranchTag::BothZero => {
                    equalities.push(&cg_rows[i]);
                    equalities.push(&ch_rows[i]);
                }
            }
        }
        let ineq_count = upper.len() + lower.len();
        upper.extend(lower.iter().copied());
        let n_upper = r;

        for mask in 0u64..(1u64 << ineq_count) {
            let active: Vec<usize> = (0..ineq_count).filter(|j| mask & (1 << j) != 0).collect();
            let mut rows = equalities.clone();
            rows.extend(active.iter().map(|&j| upper[j]));
            let Some((x, y)) = solve_equality_qp(problem, &rows) else {
                continue;
            };

            let value = |row: &Row| row.coeffs.dot(&x) + row.offset;
            let scale = 1.0 + x.amax();
            let feasible = upper.iter().enumerate().all(|(j, row)| {
                let v = value(row);
                if j < n_upper {
                    v <= FEAS_TOL * scale
                } else {
                    v >= -FEAS_TOL * scale
                }
            });
            if !feasible {
                continue;
            }

            let mut m = MultiplierSet::zeros(problem);
            let mut signs_ok = true;
            for (k, row) in rows.iter().enumerate() {
                let yk = y[k];
                let is_active_ineq = k >= equalities.len();
                if is_active_ineq {
                    let j = active[k - equalities.len()];
                    // λ ≥ 0 for g ≤ 0; the bound G, H ≥ 0 enters L with a nonpositive multiplier
                    let ok = if j < n_upper { yk >= -FEAS_TOL } else { yk <= FEAS_TOL };
                    signs_ok &= ok;
                }
                match row.slot {
                    Slot::Lambda(i) => m.lambda[i] = yk,
                    Slot::Eta(i) => m.eta[i] = yk,
                    Slot::Mu(i) => m.mu[i] = yk,
                    Slot::Nu(i) => m.nu[i] = yk,
                }
            }
            if !signs_ok {
                continue;
            }
            if found.iter().any(|p| (&p.x - &x).amax() <= DEDUP_TOL) {
                continue;
            }
            found.push(BranchPoint {
                objective: problem.f(&x),
                x,
                multipliers: m,
                branch: branch.clone(),
            });
        }
    }
    Ok(found)
}

/// Central-difference gradient of a scalar function.
pub fn finite_diff_gradient<F>(f: F, z: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = z.clone();
    DVector::from_fn(z.len(), |i, _| {
        let zi = z[i];
        probe[i] = zi + h;
        let up = f(&probe);
        probe[i] = zi - h;
        let down = f(&probe);
        probe[i] = zi;
        (up - down) / (2.0 * h)
    })
}

/// Central-difference Jacobian of a vector function.
pub fn finite_diff_jacobian<F>(f: F, z: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let m = f(z).len();
    let mut jac = DMatrix::zeros(m, z.len());
    let mut probe = z.clone();
    for j in 0..z.len() {
        probe[j] = z[j] + h;
        let up = f(&probe);
        probe[j] = z[j] - h;
        let down = f(&probe);
        probe[j] = z[j];
        jac.set_column(j, &((up - down) / (2.0 * h)));
    }
    jac
}
