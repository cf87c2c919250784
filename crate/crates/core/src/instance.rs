//! Portable JSON instance files.
//!
//! One document per instance. Matrices are written either densely
//! (`{"dense": [[...], ...]}`) or as a coordinate list
//! (`{"coo": {"rows": m, "cols": n, "entries": [[i, j, v], ...]}}`);
//! the writer picks whichever is smaller.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MpccError, Result};
use crate::problem::QuadraticMpcc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixRepr {
    Dense(Vec<Vec<f64>>),
    Coo {
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize, f64)>,
    },
}

impl MatrixRepr {
    pub fn encode(m: &DMatrix<f64>) -> Self {
        let nnz = m.iter().filter(|v| **v != 0.0).count();
        if m.nrows() == 0 || 3 * nnz < m.len() {
            let mut entries = Vec::with_capacity(nnz);
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let v = m[(i, j)];
                    if v != 0.0 {
                        entries.push((i, j, v));
                    }
                }
            }
            MatrixRepr::Coo {
                rows: m.nrows(),
                cols: m.ncols(),
                entries,
            }
        } else {
            MatrixRepr::Dense(m.row_iter().map(|r| r.iter().copied().collect()).collect())
        }
    }

    pub fn decode(&self, expected_cols: usize) -> Result<DMatrix<f64>> {
        match self {
            MatrixRepr::Dense(rows) => {
                let m = rows.len();
                let mut out = DMatrix::zeros(m, expected_cols);
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != expected_cols {
                        return Err(MpccError::DimensionMismatch {
                            what: "dense matrix row",
                            expected: expected_cols,
                            got: row.len(),
                        });
                    }
                    for (j, v) in row.iter().enumerate() {
                        out[(i, j)] = *v;
                    }
                }
                Ok(out)
            }
            MatrixRepr::Coo { rows, cols, entries } => {
                if *cols != expected_cols {
                    return Err(MpccError::DimensionMismatch {
                        what: "coordinate matrix cols",
                        expected: expected_cols,
                        got: *cols,
                    });
                }
                let mut out = DMatrix::zeros(*rows, *cols);
                for &(i, j, v) in entries {
                    if i >= *rows || j >= *cols {
                        return Err(MpccError::DimensionMismatch {
                            what: "coordinate entry index",
                            expected: rows * cols,
                            got: i * cols + j,
                        });
                    }
                    out[(i, j)] += v;
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineRepr {
    pub matrix: MatrixRepr,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub hessian: MatrixRepr,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub ineq: AffineRepr,
    pub eq: AffineRepr,
    pub comp_g: AffineRepr,
    pub comp_h: AffineRepr,
    pub coordinate_selection: bool,
}

impl InstanceFile {
    pub fn from_problem(p: &QuadraticMpcc) -> Self {
        let affine = |m: &crate::problem::AffineMap| AffineRepr {
            matrix: MatrixRepr::encode(&m.matrix),
            offset: m.offset.iter().copied().collect(),
        };
        Self {
            n: p.n(),
            hessian: MatrixRepr::encode(&p.objective().hessian),
            linear: p.objective().linear.iter().copied().collect(),
            constant: p.objective().constant,
            ineq: affine(p.ineq_map()),
            eq: affine(p.eq_map()),
            comp_g: affine(p.comp_g_map()),
            comp_h: affine(p.comp_h_map()),
            coordinate_selection: p.is_coordinate_selection(),
        }
    }

    pub fn to_problem(&self) -> Result<QuadraticMpcc> {
        let n = self.n;
        let vec = |v: &[f64]| DVector::from_column_slice(v);
        QuadraticMpcc::builder(n)
            .objective(self.hessian.decode(n)?, vec(&self.linear), self.constant)
            .inequalities(self.ineq.matrix.decode(n)?, vec(&self.ineq.offset))
            .equalities(self.eq.matrix.decode(n)?, vec(&self.eq.offset))
            .complementarity(
                self.comp_g.matrix.decode(n)?,
                vec(&self.comp_g.offset),
                self.comp_h.matrix.decode(n)?,
                vec(&self.comp_h.offset),
            )
            .coordinate_selection(self.coordinate_selection)
            .build()
    }
}

pub fn to_json(p: &QuadraticMpcc) -> Result<String> {
    Ok(serde_json::to_string_pretty(&InstanceFile::from_problem(p))?)
}

pub fn from_json(text: &str) -> Result<QuadraticMpcc> {
    serde_json::from_str::<InstanceFile>(text)?.to_problem()
}

pub fn write_instance(p: &QuadraticMpcc, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json(p)?)?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<QuadraticMpcc> {
    from_json(&std::fs::read_to_string(path)?)
}
