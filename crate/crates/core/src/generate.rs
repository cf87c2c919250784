//! Random small instances with a known feasible point, for fuzzing the
//! solvers against the branch enumeration.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::problem::QuadraticMpcc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TinyShape {
    pub n: usize,
    pub r: usize,
    pub s: usize,
    pub t: usize,
    /// Coordinate-selection `G`/`H` (needs `n ≥ 2t`) instead of dense rows.
    pub coordinate: bool,
}

impl TinyShape {
    /// `n ∈ [2t, 6]`, `t ≤ 2`, `r ≤ 2`, `s ≤ 1`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let t = rng.gen_range(1..=2);
        let n = rng.gen_range(2 * t..=6);
        Self {
            n,
            r: rng.gen_range(0..=2),
            s: rng.gen_range(0..=1),
            t,
            coordinate: rng.gen_bool(0.5),
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// A point of the planar complementarity set: one side zero, the other
/// zero or positive, with a biactive pair a quarter of the time.
fn comp_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let v = rng.gen_range(0.1..2.0);
    match rng.gen_range(0..4) {
        0 => (0.0, 0.0),
        1 | 2 => (v, 0.0),
        _ => (0.0, v),
    }
}

/// Positive-definite `Q = MᵀM + I/2`, random `q`, and constraints built so
/// that a random point `x*` is feasible.
pub fn tiny_problem<R: Rng + ?Sized>(rng: &mut R, shape: TinyShape) -> Result<QuadraticMpcc> {
    let TinyShape { n, r, s, t, coordinate } = shape;
    let m = matrix(rng, n, n);
    let q_mat = m.transpose() * &m + DMatrix::identity(n, n) * 0.5;
    let q_vec = DVector::from_fn(n, |_, _| normal(rng));
    let x_star = DVector::from_fn(n, |_, _| normal(rng));

    let a_g = matrix(rng, r, n);
    let slack = DVector::from_fn(r, |_, _| rng.gen_range(0.0..1.0));
    let b_g = -(&a_g * &x_star) - slack;
    let a_h = matrix(rng, s, n);
    let b_h = -(&a_h * &x_star);

    let pairs: Vec<(f64, f64)> = (0..t).map(|_| comp_pair(rng)).collect();
    let builder = QuadraticMpcc::builder(n)
        .objective(q_mat, q_vec, 0.0)
        .inequalities(a_g, b_g)
        .equalities(a_h, b_h);

    let builder = if coordinate {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            idx.swap(i, rng.gen_range(0..=i));
        }
        let coords: Vec<(usize, usize)> = (0..t).map(|i| (idx[2 * i], idx[2 * i + 1])).collect();
        // G_i = x_a − o_a with x*_a − o_a equal to the chosen pair value
        let offsets: Vec<(f64, f64)> = coords
            .iter()
            .zip(&pairs)
            .map(|(&(a, b), &(ga, hb))| (x_star[a] - ga, x_star[b] - hb))
            .collect();
        builder.coordinate_pairs(&coords, &offsets)
    } else {
        let a_cg = matrix(rng, t, n);
        let a_ch = matrix(rng, t, n);
        let b_cg = DVector::from_fn(t, |i, _| pairs[i].0) - &a_cg * &x_star;
        let b_ch = DVector::from_fn(t, |i, _| pairs[i].1) - &a_ch * &x_star;
        builder.complementarity(a_cg, b_cg, a_ch, b_ch)
    };
    builder.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_respect_bounds_and_problems_build() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let shape = TinyShape::sample(&mut rng);
            assert!(shape.n <= 6 && shape.t <= 2 && shape.r <= 2 && shape.s <= 1);
            assert!(shape.n >= 2 * shape.t);
            let p = tiny_problem(&mut rng, shape).unwrap();
            assert_eq!(p.is_coordinate_selection(), shape.coordinate);
            assert_eq!((p.n(), p.r(), p.s(), p.t()), (shape.n, shape.r, shape.s, shape.t));
        }
    }
}
