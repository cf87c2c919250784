//! Discretized inverse optimal control problem on the unit square.
//!
//! The lower-level problem is replaced by its optimality system, giving a
//! linear-quadratic MPCC in `x = (u, ξ, w)`:
//!
//! ```text
//! min  ½Σ_T a_T (u_T − u_o)² + ½wᵀKw + ℓᵀw
//! s.t. Σ_T' a_T' u_T' − y_d + α(u_T − w̄_T) − ξ_T = 0   for every triangle T
//!      w_a − w_i ≤ 0                                  for every interior node i
//!      0 ≤ u_T − u_a  ⊥  ξ_T ≥ 0
//! ```
//!
//! `u` and `ξ` are piecewise constant, `w` is continuous piecewise linear
//! with zero boundary values, and `w̄_T` is the mean of `w` over `T`.

use std::ops::Range;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MpccError, Result};
use crate::instance::write_instance;
use crate::nsnewton::FullPoint;
use crate::problem::QuadraticMpcc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IocParams {
    pub n_div: usize,
    pub alpha: f64,
    pub u_a: f64,
    pub w_a: f64,
    pub zeta: f64,
    pub u_obs: f64,
    pub y_d: f64,
}

impl Default for IocParams {
    fn default() -> Self {
        Self {
            n_div: 8,
            alpha: 1e-3,
            u_a: 0.0,
            w_a: 0.0,
            zeta: 1.0,
            u_obs: 1.0,
            y_d: 0.0,
        }
    }
}

impl IocParams {
    pub fn with_wa(w_a: f64) -> Self {
        Self {
            w_a,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.u_a, self.w_a, self.zeta, self.u_obs, self.y_d]
            .iter()
            .all(|v| v.is_finite());
        if self.n_div >= 1 && self.alpha > 0.0 && finite {
            Ok(())
        } else {
            Err(MpccError::InvalidConfig(format!("inverse control parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FemMesh {
    pub n_div: usize,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub areas: Vec<f64>,
    /// Vertex ids of the interior nodes, in degree-of-freedom order.
    pub interior: Vec<usize>,
    /// Degree-of-freedom index per vertex (`None` on the boundary).
    pub dof_of_vertex: Vec<Option<usize>>,
}

fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

/// Uniform `n_div × n_div` grid, each square cut along its rising diagonal.
pub fn build_mesh(n_div: usize) -> Result<FemMesh> {
    if n_div == 0 {
        return Err(MpccError::InvalidConfig("mesh needs at least one division".into()));
    }
    let m = n_div + 1;
    let h = 1.0 / n_div as f64;
    let mut vertices = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n_div * n_div);
    for j in 0..n_div {
        for i in 0..n_div {
            let v00 = j * m + i;
            let (v10, v01) = (v00 + 1, v00 + m);
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let areas = triangles
        .iter()
        .map(|t| signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]))
        .collect();
    let mut interior = Vec::new();
    let mut dof_of_vertex = vec![None; m * m];
    for j in 1..n_div {
        for i in 1..n_div {
            dof_of_vertex[j * m + i] = Some(interior.len());
            interior.push(j * m + i);
        }
    }
    Ok(FemMesh {
        n_div,
        vertices,
        triangles,
        areas,
        interior,
        dof_of_vertex,
    })
}

/// P1 stiffness on interior nodes.
fn assemble_stiffness(mesh: &FemMesh) -> DMatrix<f64> {
    let n = mesh.interior.len();
    let mut k = DMatrix::zeros(n, n);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|v| mesh.vertices[v]);
        let area = mesh.areas[t];
        // ∇λ_a = (y_b − y_c, x_c − x_b) / (2|T|) for (a, b, c) cyclic
        let grads: Vec<[f64; 2]> = (0..3)
            .map(|a| {
                let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                [(p[b][1] - p[c][1]) / (2.0 * area), (p[c][0] - p[b][0]) / (2.0 * area)]
            })
            .collect();
        for a in 0..3 {
            let Some(i) = mesh.dof_of_vertex[tri[a]] else { continue };
            for b in 0..3 {
                let Some(j) = mesh.dof_of_vertex[tri[b]] else { continue };
                k[(i, j)] += area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
            }
        }
    }
    k
}

#[derive(Debug, Clone)]
pub struct FemInstance {
    pub params: IocParams,
    pub mesh: FemMesh,
    pub problem: QuadraticMpcc,
    pub stiffness: DMatrix<f64>,
    /// `∫ζφ_i` for interior P1 basis functions.
    pub load: DVector<f64>,
    /// Maps interior nodal values of `w` to element means.
    pub mean_coupling: DMatrix<f64>,
    pub u_range: Range<usize>,
    pub xi_range: Range<usize>,
    pub w_range: Range<usize>,
}

impl FemInstance {
    pub fn n_triangles(&self) -> usize {
        self.mesh.triangles.len()
    }

    pub fn n_interior(&self) -> usize {
        self.mesh.interior.len()
    }
}

pub fn assemble_instance(params: &IocParams) -> Result<FemInstance> {
    params.validate()?;
    let mesh = build_mesh(params.n_div)?;
    let nt = mesh.triangles.len();
    let ni = mesh.interior.len();
    let n = 2 * nt + ni;
    let (u_range, xi_range, w_range) = (0..nt, nt..2 * nt, 2 * nt..n);
    let areas = DVector::from_column_slice(&mesh.areas);

    let stiffness = assemble_stiffness(&mesh);
    let mut load = DVector::zeros(ni);
    let mut mean_coupling = DMatrix::zeros(nt, ni);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for &v in tri {
            if let Some(i) = mesh.dof_of_vertex[v] {
                load[i] += params.zeta * mesh.areas[t] / 3.0;
                mean_coupling[(t, i)] += 1.0 / 3.0;
            }
        }
    }

    let mut hessian = DMatrix::zeros(n, n);
    let mut linear = DVector::zeros(n);
    for t in 0..nt {
        hessian[(t, t)] = areas[t];
        linear[t] = -params.u_obs * areas[t];
    }
    hessian.view_mut((w_range.start, w_range.start), (ni, ni)).copy_from(&stiffness);
    linear.rows_mut(w_range.start, ni).copy_from(&load);
    let constant = 0.5 * params.u_obs * params.u_obs * areas.sum();

    let mut eq = DMatrix::zeros(nt, n);
    for t in 0..nt {
        eq.view_mut((t, 0), (1, nt)).copy_from(&areas.transpose());
        eq[(t, t)] += params.alpha;
        eq[(t, nt + t)] = -1.0;
    }
    eq.view_mut((0, w_range.start), (nt, ni)).copy_from(&(&mean_coupling * -params.alpha));
    let eq_offset = DVector::from_element(nt, -params.y_d);

    let mut ineq = DMatrix::zeros(ni, n);
    for i in 0..ni {
        ineq[(i, w_range.start + i)] = -1.0;
    }
    let ineq_offset = DVector::from_element(ni, params.w_a);

    let pairs: Vec<(usize, usize)> = (0..nt).map(|t| (t, nt + t)).collect();
    let offsets = vec![(params.u_a, 0.0); nt];

    let problem = QuadraticMpcc::builder(n)
        .objective(hessian, linear, constant)
        .inequalities(ineq, ineq_offset)
        .equalities(eq, eq_offset)
        .coordinate_pairs(&pairs, &offsets)
        .build()?;

    Ok(FemInstance {
        params: *params,
        mesh,
        problem,
        stiffness,
        load,
        mean_coupling,
        u_range,
        xi_range,
        w_range,
    })
}

/// The known global minimizer `(u, ξ, w) = 0` of the `w_a = 0` instance,
/// with zero multipliers.
pub fn reference_point(params: &IocParams) -> Result<FullPoint> {
    if params.w_a != 0.0 {
        return Err(MpccError::NoReferencePoint(params.w_a));
    }
    Ok(FullPoint::zeros(&assemble_instance(params)?.problem))
}

/// `<path>.params.json`, next to the instance file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".params.json");
    path.with_file_name(name)
}

/// Writes the assembled instance to `path` and its parameters to the sidecar.
pub fn emit_instance(params: &IocParams, path: &Path) -> Result<PathBuf> {
    let inst = assemble_instance(params)?;
    write_instance(&inst.problem, path)?;
    let sidecar = sidecar_path(path);
    std::fs::write(&sidecar, serde_json::to_string_pretty(params)?)?;
    Ok(sidecar)
}
