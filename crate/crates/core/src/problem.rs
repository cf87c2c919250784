//! Linear-quadratic MPCC instances and their Lagrangian.
//!
//! An instance is
//!
//! ```text
//! min  ½xᵀQx + qᵀx + c₀
//! s.t. A_g x + b_g ≤ 0,   A_h x + b_h = 0,
//!      0 ≤ A_G x + b_G  ⊥  A_H x + b_H ≥ 0
//! ```
//!
//! and the Lagrangian is `L = f + λᵀg + ηᵀh + μᵀG + νᵀH`. Multipliers of
//! the complementarity pairs therefore carry the sign convention where an
//! active lower bound has a nonpositive multiplier.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::ops::serial::spmm_csr_dense;
use nalgebra_sparse::ops::Op;
use nalgebra_sparse::CsrMatrix;

use crate::compgeo::PairPartition;
use crate::error::{check_len, MpccError, Result};

/// An affine map `x ↦ Ax + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        check_len("affine map offset", matrix.nrows(), offset.len())?;
        Ok(Self { matrix, offset })
    }

    /// The map with no rows on `ℝⁿ`.
    pub fn empty(n: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(0, n),
            offset: DVector::zeros(0),
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x + &self.offset
    }

    /// `Aᵀy`, the adjoint of the linear part.
    pub fn adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(y)
    }
}

/// `f(x) = ½xᵀQx + qᵀx + c₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl QuadraticObjective {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x) + self.constant
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.hessian * x + &self.linear
    }
}

/// A complementarity-constrained program with quadratic objective and
/// affine constraint data. Immutable once built.
#[derive(Debug, Clone)]
pub struct QuadraticMpcc {
    objective: QuadraticObjective,
    ineq: AffineMap,
    eq: AffineMap,
    comp_g: AffineMap,
    comp_h: AffineMap,
    pairs: Option<PairPartition>,
    sparse: SparseData,
}

/// Compressed copies of the problem matrices for the hot evaluation paths.
#[derive(Debug, Clone)]
struct SparseData {
    hessian: CsrMatrix<f64>,
    ineq: CsrMatrix<f64>,
    eq: CsrMatrix<f64>,
    comp_g: CsrMatrix<f64>,
    comp_h: CsrMatrix<f64>,
}

fn csr_mul(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.nrows());
    spmm_csr_dense(0.0, &mut out, 1.0, Op::NoOp(a), Op::NoOp(x));
    out
}

fn csr_tr_mul(a: &CsrMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.ncols());
    spmm_csr_dense(0.0, &mut out, 1.0, Op::Transpose(a), Op::NoOp(y));
    out
}

impl QuadraticMpcc {
    pub fn builder(n: usize) -> QuadraticMpccBuilder {
        QuadraticMpccBuilder::new(n)
    }

    pub fn n(&self) -> usize {
        self.objective.linear.len()
    }

    pub fn r(&self) -> usize {
        self.ineq.rows()
    }

    pub fn s(&self) -> usize {
        self.eq.rows()
    }

    pub fn t(&self) -> usize {
        self.comp_g.rows()
    }

    pub fn objective(&self) -> &QuadraticObjective {
        &self.objective
    }

    pub fn ineq_map(&self) -> &AffineMap {
        &self.ineq
    }

    pub fn eq_map(&self) -> &AffineMap {
        &self.eq
    }

    pub fn comp_g_map(&self) -> &AffineMap {
        &self.comp_g
    }

    pub fn comp_h_map(&self) -> &AffineMap {
        &self.comp_h
    }

    /// The pair layout when `G` and `H` select (signed, shifted) coordinates.
    pub fn pairs(&self) -> Option<&PairPartition> {
        self.pairs.as_ref()
    }

    pub fn is_coordinate_selection(&self) -> bool {
        self.pairs.is_some()
    }

    pub fn f(&self, x: &DVector<f64>) -> f64 {
        let o = &self.objective;
        0.5 * x.dot(&self.hessian_mul(x)) + o.linear.dot(x) + o.constant
    }

    pub fn grad_f(&self, x: &DVector<f64>) -> DVector<f64> {
        self.hessian_mul(x) + &self.objective.linear
    }

    pub fn hessian_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        csr_mul(&self.sparse.hessian, x)
    }

    pub fn g(&self, x: &DVector<f64>) -> DVector<f64> {
        csr_mul(&self.sparse.ineq, x) + &self.ineq.offset
    }

    pub fn h(&self, x: &DVector<f64>) -> DVector<f64> {
        csr_mul(&self.sparse.eq, x) + &self.eq.offset
    }

    pub fn big_g(&self, x: &DVector<f64>) -> DVector<f64> {
        csr_mul(&self.sparse.comp_g, x) + &self.comp_g.offset
    }

    pub fn big_h(&self, x: &DVector<f64>) -> DVector<f64> {
        csr_mul(&self.sparse.comp_h, x) + &self.comp_h.offset
    }

    /// `A_gᵀλ`.
    pub fn ineq_adjoint(&self, lambda: &DVector<f64>) -> DVector<f64> {
        csr_tr_mul(&self.sparse.ineq, lambda)
    }

    /// `A_hᵀη`.
    pub fn eq_adjoint(&self, eta: &DVector<f64>) -> DVector<f64> {
        csr_tr_mul(&self.sparse.eq, eta)
    }

    /// `A_Gᵀμ`.
    pub fn comp_g_adjoint(&self, mu: &DVector<f64>) -> DVector<f64> {
        csr_tr_mul(&self.sparse.comp_g, mu)
    }

    /// `A_Hᵀν`.
    pub fn comp_h_adjoint(&self, nu: &DVector<f64>) -> DVector<f64> {
        csr_tr_mul(&self.sparse.comp_h, nu)
    }

    pub fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        check_len("primal point", self.n(), x.len())
    }

    pub fn check_multipliers(&self, m: &MultiplierSet) -> Result<()> {
        check_len("lambda", self.r(), m.lambda.len())?;
        check_len("eta", self.s(), m.eta.len())?;
        check_len("mu", self.t(), m.mu.len())?;
        check_len("nu", self.t(), m.nu.len())
    }

    /// `∇ₓL = ∇f + A_gᵀλ + A_hᵀη + A_Gᵀμ + A_Hᵀν` without dimension checks.
    pub(crate) fn lagrangian_gradient_unchecked(
        &self,
        x: &DVector<f64>,
        m: &MultiplierSet,
    ) -> DVector<f64> {
        let mut grad = self.grad_f(x);
        grad += self.ineq_adjoint(&m.lambda);
        grad += self.eq_adjoint(&m.eta);
        grad += self.comp_g_adjoint(&m.mu);
        grad += self.comp_h_adjoint(&m.nu);
        grad
    }

    pub fn lagrangian_gradient(
        &self,
        x: &DVector<f64>,
        m: &MultiplierSet,
    ) -> Result<DVector<f64>> {
        self.check_point(x)?;
        self.check_multipliers(m)?;
        Ok(self.lagrangian_gradient_unchecked(x, m))
    }
}

/// Value, gradient and Hessian of the Lagrangian at one point.
#[derive(Debug, Clone)]
pub struct LagrangianEval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

pub fn eval_lagrangian(
    problem: &QuadraticMpcc,
    x: &DVector<f64>,
    m: &MultiplierSet,
) -> Result<LagrangianEval> {
    problem.check_point(x)?;
    problem.check_multipliers(m)?;
    let value = problem.f(x)
        + m.lambda.dot(&problem.g(x))
        + m.eta.dot(&problem.h(x))
        + m.mu.dot(&problem.big_g(x))
        + m.nu.dot(&problem.big_h(x));
    Ok(LagrangianEval {
        value,
        grad: problem.lagrangian_gradient_unchecked(x, m),
        hess: problem.objective.hessian.clone(),
    })
}

/// Dual variables `(λ, η, μ, ν)` attached to a primal point.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSet {
    pub lambda: DVector<f64>,
    pub eta: DVector<f64>,
    pub mu: DVector<f64>,
    pub nu: DVector<f64>,
}

impl MultiplierSet {
    pub fn zeros(problem: &QuadraticMpcc) -> Self {
        Self::zeros_with(problem.r(), problem.s(), problem.t())
    }

    pub fn zeros_with(r: usize, s: usize, t: usize) -> Self {
        Self {
            lambda: DVector::zeros(r),
            eta: DVector::zeros(s),
            mu: DVector::zeros(t),
            nu: DVector::zeros(t),
        }
    }

    pub fn len(&self) -> usize {
        self.lambda.len() + self.eta.len() + self.mu.len() + self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_abs(&self) -> f64 {
        [&self.lambda, &self.eta, &self.mu, &self.nu]
            .iter()
            .map(|v| v.amax())
            .fold(0.0, f64::max)
    }
}

/// Builder that validates dimensions, symmetry and the coordinate-selection
/// flag before producing a [`QuadraticMpcc`].
#[derive(Debug, Clone)]
pub struct QuadraticMpccBuilder {
    n: usize,
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
    ineq: AffineMap,
    eq: AffineMap,
    comp_g: AffineMap,
    comp_h: AffineMap,
    coordinate_selection: bool,
}

impl QuadraticMpccBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            hessian: DMatrix::zeros(n, n),
            linear: DVector::zeros(n),
            constant: 0.0,
            ineq: AffineMap::empty(n),
            eq: AffineMap::empty(n),
            comp_g: AffineMap::empty(n),
            comp_h: AffineMap::empty(n),
            coordinate_selection: false,
        }
    }

    pub fn objective(mut self, hessian: DMatrix<f64>, linear: DVector<f64>, constant: f64) -> Self {
        self.hessian = hessian;
        self.linear = linear;
        self.constant = constant;
        self
    }

    pub fn inequalities(mut self, matrix: DMatrix<f64>, offset: DVector<f64>) -> Self {
        self.ineq = AffineMap { matrix, offset };
        self
    }

    pub fn equalities(mut self, matrix: DMatrix<f64>, offset: DVector<f64>) -> Self {
        self.eq = AffineMap { matrix, offset };
        self
    }

    pub fn complementarity(
        mut self,
        g_matrix: DMatrix<f64>,
        g_offset: DVector<f64>,
        h_matrix: DMatrix<f64>,
        h_offset: DVector<f64>,
    ) -> Self {
        self.comp_g = AffineMap {
            matrix: g_matrix,
            offset: g_offset,
        };
        self.comp_h = AffineMap {
            matrix: h_matrix,
            offset: h_offset,
        };
        self
    }

    /// Pairs `(G_i, H_i) = (x_{gi} - a_i, x_{hi} - b_i)` for the given
    /// coordinate index pairs and offsets; also sets the coordinate flag.
    pub fn coordinate_pairs(mut self, pairs: &[(usize, usize)], offsets: &[(f64, f64)]) -> Self {
        let t = pairs.len();
        let mut ag = DMatrix::zeros(t, self.n);
        let mut ah = DMatrix::zeros(t, self.n);
        let mut bg = DVector::zeros(t);
        let mut bh = DVector::zeros(t);
        for (i, (&(gi, hi), &(og, oh))) in pairs.iter().zip(offsets).enumerate() {
            ag[(i, gi)] = 1.0;
            ah[(i, hi)] = 1.0;
            bg[i] = -og;
            bh[i] = -oh;
        }
        self.comp_g = AffineMap {
            matrix: ag,
            offset: bg,
        };
        self.comp_h = AffineMap {
            matrix: ah,
            offset: bh,
        };
        self.coordinate_selection = true;
        self
    }

    pub fn coordinate_selection(mut self, flag: bool) -> Self {
        self.coordinate_selection = flag;
        self
    }

    pub fn build(self) -> Result<QuadraticMpcc> {
        let n = self.n;
        check_len("objective hessian rows", n, self.hessian.nrows())?;
        check_len("objective hessian cols", n, self.hessian.ncols())?;
        check_len("objective linear term", n, self.linear.len())?;
        for (what, map) in [
            ("inequality matrix cols", &self.ineq),
            ("equality matrix cols", &self.eq),
            ("G matrix cols", &self.comp_g),
            ("H matrix cols", &self.comp_h),
        ] {
            check_len(what, n, map.cols())?;
            check_len("affine offset", map.rows(), map.offset.len())?;
        }
        check_len("H rows", self.comp_g.rows(), self.comp_h.rows())?;

        let asymmetry = (&self.hessian - self.hessian.transpose()).amax();
        if asymmetry > 1e-12 * self.hessian.amax().max(f64::MIN_POSITIVE) && asymmetry > 0.0 {
            return Err(MpccError::NotSymmetric { asymmetry });
        }
        for v in self
            .hessian
            .iter()
            .chain(self.linear.iter())
            .chain(std::iter::once(&self.constant))
        {
            if !v.is_finite() {
                return Err(MpccError::NonFinite {
                    context: "objective data".into(),
                    point: Vec::new(),
                });
            }
        }

        let pairs = if self.coordinate_selection {
            Some(PairPartition::from_maps(&self.comp_g, &self.comp_h)?)
        } else {
            None
        };
        let sparse = SparseData {
            hessian: CsrMatrix::from(&self.hessian),
            ineq: CsrMatrix::from(&self.ineq.matrix),
            eq: CsrMatrix::from(&self.eq.matrix),
            comp_g: CsrMatrix::from(&self.comp_g.matrix),
            comp_h: CsrMatrix::from(&self.comp_h.matrix),
        };
        Ok(QuadraticMpcc {
            sparse,
            objective: QuadraticObjective {
                hessian: self.hessian,
                linear: self.linear,
                constant: self.constant,
            },
            ineq: self.ineq,
            eq: self.eq,
            comp_g: self.comp_g,
            comp_h: self.comp_h,
            pairs,
        })
    }
}
