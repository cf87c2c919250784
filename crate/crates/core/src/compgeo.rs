//! Geometry of the complementarity set `C = {(s, u) : s ≥ 0, u ≥ 0, s·u = 0}`.
//!
//! Projections onto `C` (and onto its preimage `D` when `G` and `H` select
//! coordinates), the limiting normal cone of `C`, and the stationarity
//! measure `dist(-∇φ(x), N(x))` used to stop the projected gradient
//! subsolver.

use nalgebra::DVector;

use crate::error::{check_len, MpccError, Result};
use crate::problem::{AffineMap, QuadraticMpcc};

/// Values at or below this magnitude are treated as exact zeros when
/// classifying the active pattern of an approximately feasible pair.
pub const DEFAULT_SNAP_TOL: f64 = 1e-10;

/// One complementarity pair `G_i = sg·x[g_index] + g_offset`,
/// `H_i = sh·x[h_index] + h_offset` with `sg, sh ∈ {−1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinatePair {
    pub g_index: usize,
    pub h_index: usize,
    pub g_sign: f64,
    pub h_sign: f64,
    pub g_offset: f64,
    pub h_offset: f64,
}

impl CoordinatePair {
    fn values(&self, x: &DVector<f64>) -> (f64, f64) {
        (
            self.g_sign * x[self.g_index] + self.g_offset,
            self.h_sign * x[self.h_index] + self.h_offset,
        )
    }
}

/// The layout of the set `D` in coordinate-selection mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPartition {
    pairs: Vec<CoordinatePair>,
}

impl PairPartition {
    pub fn new(pairs: Vec<CoordinatePair>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for p in &pairs {
            for idx in [p.g_index, p.h_index] {
                if !seen.insert(idx) {
                    return Err(MpccError::NotCoordinateSelection(format!(
                        "coordinate {idx} used by more than one pair slot"
                    )));
                }
            }
            for sign in [p.g_sign, p.h_sign] {
                if sign != 1.0 && sign != -1.0 {
                    return Err(MpccError::NotCoordinateSelection(format!(
                        "sign {sign} is not ±1"
                    )));
                }
            }
        }
        Ok(Self { pairs })
    }

    /// Reads the pair layout off `G` and `H`; each row must be a signed unit row.
    pub fn from_maps(g: &AffineMap, h: &AffineMap) -> Result<Self> {
        check_len("H rows", g.rows(), h.rows())?;
        let unit_row = |map: &AffineMap, i: usize| -> Result<(usize, f64)> {
            let mut hit = None;
            for (j, &v) in map.matrix.row(i).iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                if (v != 1.0 && v != -1.0) || hit.is_some() {
                    return Err(MpccError::NotCoordinateSelection(format!(
                        "row {i} is not a signed unit row"
                    )));
                }
                hit = Some((j, v));
            }
            hit.ok_or_else(|| MpccError::NotCoordinateSelection(format!("row {i} is zero")))
        };
        let mut pairs = Vec::with_capacity(g.rows());
        for i in 0..g.rows() {
            let (g_index, g_sign) = unit_row(g, i)?;
            let (h_index, h_sign) = unit_row(h, i)?;
            pairs.push(CoordinatePair {
                g_index,
                h_index,
                g_sign,
                h_sign,
                g_offset: g.offset[i],
                h_offset: h.offset[i],
            });
        }
        Self::new(pairs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CoordinatePair> {
        self.pairs.iter()
    }

    pub fn get(&self, i: usize) -> &CoordinatePair {
        &self.pairs[i]
    }

    fn max_index(&self) -> Option<usize> {
        self.pairs.iter().map(|p| p.g_index.max(p.h_index)).max()
    }
}

/// Nearest point of `C` in ℝ². Ties (`a = b > 0`) go to `(a, 0)`.
pub fn project_pair(a: f64, b: f64) -> (f64, f64) {
    let (ap, bp) = (a.max(0.0), b.max(0.0));
    // squared distances to (ap, 0) and (0, bp)
    let d_first = (a - ap).powi(2) + b * b;
    let d_second = a * a + (b - bp).powi(2);
    if d_first <= d_second {
        (ap, 0.0)
    } else {
        (0.0, bp)
    }
}

pub fn project_onto_c(zg: &DVector<f64>, zh: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    check_len("complementarity slacks", zg.len(), zh.len())?;
    let mut pg = zg.clone();
    let mut ph = zh.clone();
    for i in 0..zg.len() {
        let (a, b) = project_pair(zg[i], zh[i]);
        pg[i] = a;
        ph[i] = b;
    }
    Ok((pg, ph))
}

/// Projection onto `D = {x : 0 ≤ G(x) ⊥ H(x) ≥ 0}` in coordinate-selection mode.
pub fn project_onto_d(x: &DVector<f64>, pairs: &PairPartition) -> DVector<f64> {
    let mut out = x.clone();
    for p in pairs.iter() {
        let (a, b) = p.values(x);
        let (pa, pb) = project_pair(a, b);
        out[p.g_index] = p.g_sign * (pa - p.g_offset);
        out[p.h_index] = p.h_sign * (pb - p.h_offset);
    }
    out
}

pub fn project_problem_onto_d(problem: &QuadraticMpcc, x: &DVector<f64>) -> Result<DVector<f64>> {
    let pairs = problem.pairs().ok_or_else(|| {
        MpccError::NotCoordinateSelection("projection onto D needs coordinate-selection data".into())
    })?;
    problem.check_point(x)?;
    Ok(project_onto_d(x, pairs))
}

/// Euclidean distance of `(p, q)` to the limiting normal cone of `C` at `(a, b)`.
pub fn normal_cone_distance_pair(a: f64, b: f64, p: f64, q: f64, tol: f64) -> Result<f64> {
    normal_cone_distance_pair_at(0, a, b, p, q, tol)
}

fn normal_cone_distance_pair_at(index: usize, a: f64, b: f64, p: f64, q: f64, tol: f64) -> Result<f64> {
    let a_zero = a.abs() <= tol;
    let b_zero = b.abs() <= tol;
    if a < -tol || b < -tol || !(a_zero || b_zero) {
        return Err(MpccError::Infeasible { index, a, b });
    }
    Ok(match (a_zero, b_zero) {
        // G > 0, H = 0: N = {0} × ℝ
        (false, true) => p.abs(),
        // G = 0, H > 0: N = ℝ × {0}
        (true, false) => q.abs(),
        _ => {
            let to_orthant = p.max(0.0).hypot(q.max(0.0));
            q.abs().min(p.abs()).min(to_orthant)
        }
    })
}

/// `dist(-grad, N_{ℝⁿ×C}(x, z_G, z_H))` for the slack layout
/// `point = (x, z_G, z_H) ∈ ℝⁿ⁺²ᵗ`.
pub fn stationarity_distance_slack(
    grad: &DVector<f64>,
    point: &DVector<f64>,
    n: usize,
    t: usize,
    tol: f64,
) -> Result<f64> {
    check_len("slack gradient", n + 2 * t, grad.len())?;
    check_len("slack point", n + 2 * t, point.len())?;
    let mut sq = grad.rows(0, n).norm_squared();
    for i in 0..t {
        let d = normal_cone_distance_pair_at(
            i,
            point[n + i],
            point[n + t + i],
            -grad[n + i],
            -grad[n + t + i],
            tol,
        )?;
        sq += d * d;
    }
    Ok(sq.sqrt())
}

/// `dist(-grad, N_D(x))` in coordinate-selection mode.
pub fn stationarity_distance_d(
    grad: &DVector<f64>,
    x: &DVector<f64>,
    pairs: &PairPartition,
    tol: f64,
) -> Result<f64> {
    check_len("gradient", x.len(), grad.len())?;
    if let Some(max) = pairs.max_index() {
        if max >= x.len() {
            return Err(MpccError::DimensionMismatch {
                what: "pair coordinate",
                expected: x.len(),
                got: max + 1,
            });
        }
    }
    let mut in_pair = vec![false; x.len()];
    let mut sq = 0.0;
    for (i, p) in pairs.iter().enumerate() {
        in_pair[p.g_index] = true;
        in_pair[p.h_index] = true;
        let (a, b) = p.values(x);
        let d = normal_cone_distance_pair_at(
            i,
            a,
            b,
            -p.g_sign * grad[p.g_index],
            -p.h_sign * grad[p.h_index],
            tol,
        )?;
        sq += d * d;
    }
    sq += grad
        .iter()
        .zip(&in_pair)
        .filter(|(_, &paired)| !paired)
        .map(|(g, _)| g * g)
        .sum::<f64>();
    Ok(sq.sqrt())
}

/// A closed set onto which points can be projected, together with its
/// limiting normal cone.
pub trait ProjectionDomain {
    fn dim(&self) -> usize;
    fn project(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `dist(-grad, N(x))`; `x` must lie in the set up to the snap tolerance.
    fn stationarity_distance(&self, x: &DVector<f64>, grad: &DVector<f64>) -> Result<f64>;
}

/// `ℝⁿ × C` with layout `(x, z_G, z_H)`.
#[derive(Debug, Clone, Copy)]
pub struct SlackDomain {
    pub n: usize,
    pub t: usize,
    pub snap_tol: f64,
}

impl SlackDomain {
    pub fn new(n: usize, t: usize) -> Self {
        Self {
            n,
            t,
            snap_tol: DEFAULT_SNAP_TOL,
        }
    }
}

impl ProjectionDomain for SlackDomain {
    fn dim(&self) -> usize {
        self.n + 2 * self.t
    }

    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        let (n, t) = (self.n, self.t);
        for i in 0..t {
            let (a, b) = project_pair(x[n + i], x[n + t + i]);
            out[n + i] = a;
            out[n + t + i] = b;
        }
        out
    }

    fn stationarity_distance(&self, x: &DVector<f64>, grad: &DVector<f64>) -> Result<f64> {
        stationarity_distance_slack(grad, x, self.n, self.t, self.snap_tol)
    }
}

/// The set `D` for a coordinate-selection problem.
#[derive(Debug, Clone)]
pub struct PairDomain {
    pub n: usize,
    pub pairs: PairPartition,
    pub snap_tol: f64,
}

impl PairDomain {
    pub fn for_problem(problem: &QuadraticMpcc) -> Result<Self> {
        let pairs = problem.pairs().cloned().ok_or_else(|| {
            MpccError::NotCoordinateSelection("slack-free mode needs coordinate-selection data".into())
        })?;
        Ok(Self {
            n: problem.n(),
            pairs,
            snap_tol: DEFAULT_SNAP_TOL,
        })
    }
}

impl ProjectionDomain for PairDomain {
    fn dim(&self) -> usize {
        self.n
    }

    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        project_onto_d(x, &self.pairs)
    }

    fn stationarity_distance(&self, x: &DVector<f64>, grad: &DVector<f64>) -> Result<f64> {
        stationarity_distance_d(grad, x, &self.pairs, self.snap_tol)
    }
}
