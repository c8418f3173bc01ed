//! Discrete forms of both schemes, assembled into sparse operators.
//!
//! Row and column indices refer to the combined velocity vector (see
//! [`crate::spaces`]) or to the density space. Constraints are not applied
//! here; the solver eliminates constrained velocity dofs.

mod operator;
mod transport;

use rayon::prelude::*;
use thiserror::Error;

use crate::mesh::Point;
use crate::spaces::{EdgeFrame, RefTables, Spaces, Variant};

pub use operator::{SpaceTag, SparseOperator};
pub use transport::{assemble_inflow, assemble_upwind_transport, facet_fluxes};

use operator::Triplets;

pub const DEFAULT_ALPHA: f64 = 10.0;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("invalid form coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("quadrature tables were built for different spaces")]
    TableMismatch,
}

/// Physical and penalty parameters of the forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormCoefficients {
    pub nu: f64,
    pub c_m: f64,
    pub alpha: f64,
    pub k: usize,
}

impl FormCoefficients {
    pub fn new(nu: f64, c_m: f64, alpha: f64, k: usize) -> Result<Self, AssemblyError> {
        for (name, v) in [("nu", nu), ("c_M", c_m), ("alpha", alpha)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(AssemblyError::InvalidCoefficient(format!("{name} = {v}")));
            }
        }
        Ok(Self { nu, c_m, alpha, k })
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `grad v * n` for a velocity gradient `g[i][j] = d v_i / d x_j`.
fn normal_derivative(g: &[[f64; 2]; 2], n: [f64; 2]) -> [f64; 2] {
    [g[0][0] * n[0] + g[0][1] * n[1], g[1][0] * n[0] + g[1][1] * n[1]]
}

/// Local dof list of a cell: cell velocity functions then the facet
/// functions of its three edges.
fn local_velocity_dofs(cell_dofs: &[usize], edges: &[EdgeFrame]) -> Vec<usize> {
    let mut d = cell_dofs.to_vec();
    for e in edges {
        d.extend_from_slice(&e.trace_dofs);
    }
    d
}

fn scatter(local: &[f64], rows: &[usize], cols: &[usize], out: &mut Triplets) {
    let nc = cols.len();
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            let v = local[i * nc + j];
            if v != 0.0 {
                out.push((r, c, v));
            }
        }
    }
}

/// Cellwise symmetric HDG kernel shared by the diffusion form and the HDG
/// norm: volume gradient term, optional consistency terms and a jump penalty
/// `penalty(h_T)` on `(u - u_hat)` (tangential part for the H(div) variant).
fn hdg_kernel(spaces: &Spaces, tables: &RefTables, with_flux: bool, penalty: &(dyn Fn(f64) -> f64 + Sync)) -> Triplets {
    let variant = spaces.variant();
    let per_cell: Vec<Triplets> = (0..spaces.mesh().num_cells())
        .into_par_iter()
        .map(|c| {
            let cf = spaces.cell_frame(c, tables);
            let edges: Vec<EdgeFrame> = (0..3).map(|e| spaces.edge_frame(c, e, tables)).collect();
            let dofs = local_velocity_dofs(&cf.vel_dofs, &edges);
            let n = dofs.len();
            let nv = cf.vel_dofs.len();
            let mut local = vec![0.0; n * n];
            for (q, w) in cf.weights.iter().enumerate() {
                for i in 0..nv {
                    let gi = &cf.vel_grad[q][i];
                    for j in 0..nv {
                        let gj = &cf.vel_grad[q][j];
                        local[i * n + j] += w * (gi[0][0] * gj[0][0] + gi[0][1] * gj[0][1] + gi[1][0] * gj[1][0] + gi[1][1] * gj[1][1]);
                    }
                }
            }
            let pen = penalty(spaces.mesh().cell_diameter(c));
            let mut offset = nv;
            for ef in &edges {
                let nt = ef.trace_dofs.len();
                let tan = spaces.mesh().facet_tangent(ef.facet);
                // active local functions on this edge: cell functions, then this edge's facet functions
                let active: Vec<usize> = (0..nv).chain(offset..offset + nt).collect();
                for (q, w) in ef.weights.iter().enumerate() {
                    let mut jump = Vec::with_capacity(active.len());
                    let mut flux = Vec::with_capacity(active.len());
                    for i in 0..nv {
                        let v = ef.vel[q][i];
                        let dn = normal_derivative(&ef.vel_grad[q][i], ef.normal);
                        jump.push([-v[0], -v[1]]);
                        flux.push(dn);
                    }
                    for j in 0..nt {
                        jump.push(ef.trace[q][j]);
                        flux.push([0.0, 0.0]);
                    }
                    if variant == Variant::HdivHdg {
                        for v in jump.iter_mut().chain(flux.iter_mut()) {
                            let s = dot(*v, tan);
                            *v = [s * tan[0], s * tan[1]];
                        }
                    }
                    for (a, &ia) in active.iter().enumerate() {
                        for (b, &ib) in active.iter().enumerate() {
                            let mut v = pen * dot(jump[a], jump[b]);
                            if with_flux {
                                v += dot(flux[a], jump[b]) + dot(flux[b], jump[a]);
                            }
                            local[ia * n + ib] += w * v;
                        }
                    }
                }
                offset += nt;
            }
            let mut t = Triplets::new();
            scatter(&local, &dofs, &dofs, &mut t);
            t
        })
        .collect();
    per_cell.into_iter().flatten().collect()
}

/// Viscous form without the factor `nu`: symmetric interior-penalty HDG with
/// penalty `alpha k^2 / h_T`; only tangential jumps for the H(div) variant.
pub fn assemble_diffusion(spaces: &Spaces, tables: &RefTables, alpha: f64) -> Result<SparseOperator, AssemblyError> {
    if !(alpha > 0.0) {
        return Err(AssemblyError::InvalidCoefficient(format!("alpha = {alpha}")));
    }
    let k2 = (spaces.order() * spaces.order()) as f64;
    let t = hdg_kernel(spaces, tables, true, &|h| alpha * k2 / h);
    let n = spaces.num_velocity();
    Ok(SparseOperator::from_triplets(SpaceTag::Velocity, SpaceTag::Velocity, (n, n), t, true))
}

/// Gram matrix of the discrete norm `sum |grad u|_T^2 + h_T^{-1} |u - u_hat|_dT^2`.
pub fn assemble_hdg_norm(spaces: &Spaces, tables: &RefTables) -> SparseOperator {
    let t = hdg_kernel(spaces, tables, false, &|h| 1.0 / h);
    let n = spaces.num_velocity();
    SparseOperator::from_triplets(SpaceTag::Velocity, SpaceTag::Velocity, (n, n), t, true)
}

/// Pressure coupling `B[q][v] = -(q, div v)`, plus `((v - v_hat) . n, q)` on
/// cell boundaries for the fully discontinuous variant. The momentum
/// equation uses `c_M B^T rho`.
pub fn assemble_divergence(spaces: &Spaces, tables: &RefTables) -> SparseOperator {
    let variant = spaces.variant();
    let per_cell: Vec<Triplets> = (0..spaces.mesh().num_cells())
        .into_par_iter()
        .map(|c| {
            let cf = spaces.cell_frame(c, tables);
            let mut t = Triplets::new();
            let (nr, nv) = (cf.rho_dofs.len(), cf.vel_dofs.len());
            let mut local = vec![0.0; nr * nv];
            for (q, w) in cf.weights.iter().enumerate() {
                for i in 0..nr {
                    for j in 0..nv {
                        local[i * nv + j] -= w * cf.rho[q][i] * cf.vel_div[q][j];
                    }
                }
            }
            scatter(&local, &cf.rho_dofs, &cf.vel_dofs, &mut t);
            if variant == Variant::FullHdg {
                for e in 0..3 {
                    let ef = spaces.edge_frame(c, e, tables);
                    let cols = local_velocity_dofs(&ef.vel_dofs, std::slice::from_ref(&ef));
                    let nt = ef.trace_dofs.len();
                    let mut local = vec![0.0; nr * (nv + nt)];
                    for (q, w) in ef.weights.iter().enumerate() {
                        for i in 0..nr {
                            let r = w * ef.rho[q][i];
                            for j in 0..nv {
                                local[i * (nv + nt) + j] += r * dot(ef.vel[q][j], ef.normal);
                            }
                            for j in 0..nt {
                                local[i * (nv + nt) + nv + j] -= r * dot(ef.trace[q][j], ef.normal);
                            }
                        }
                    }
                    scatter(&local, &ef.rho_dofs, &cols, &mut t);
                }
            }
            t
        })
        .collect();
    SparseOperator::from_triplets(
        SpaceTag::Density,
        SpaceTag::Velocity,
        (spaces.num_density(), spaces.num_velocity()),
        per_cell.into_iter().flatten().collect(),
        false,
    )
}

/// Gravity coupling `G[v][q] = (g . v, q)`.
pub fn assemble_gravity(spaces: &Spaces, tables: &RefTables, g: &(dyn Fn(Point) -> Point + Sync)) -> SparseOperator {
    let per_cell: Vec<Triplets> = (0..spaces.mesh().num_cells())
        .into_par_iter()
        .map(|c| {
            let cf = spaces.cell_frame(c, tables);
            let (nv, nr) = (cf.vel_dofs.len(), cf.rho_dofs.len());
            let mut local = vec![0.0; nv * nr];
            for (q, w) in cf.weights.iter().enumerate() {
                let gq = g(cf.points[q]);
                for i in 0..nv {
                    let gv = w * dot(gq, cf.vel[q][i]);
                    for j in 0..nr {
                        local[i * nr + j] += gv * cf.rho[q][j];
                    }
                }
            }
            let mut t = Triplets::new();
            scatter(&local, &cf.vel_dofs, &cf.rho_dofs, &mut t);
            t
        })
        .collect();
    SparseOperator::from_triplets(
        SpaceTag::Velocity,
        SpaceTag::Density,
        (spaces.num_velocity(), spaces.num_density()),
        per_cell.into_iter().flatten().collect(),
        false,
    )
}

/// Load vector `(f, v)` over the combined velocity vector (zero on facet dofs).
pub fn assemble_load(spaces: &Spaces, tables: &RefTables, f: &(dyn Fn(Point) -> Point + Sync)) -> Vec<f64> {
    let per_cell: Vec<Vec<(usize, f64)>> = (0..spaces.mesh().num_cells())
        .into_par_iter()
        .map(|c| {
            let cf = spaces.cell_frame(c, tables);
            let mut local = vec![0.0; cf.vel_dofs.len()];
            for (q, w) in cf.weights.iter().enumerate() {
                let fq = f(cf.points[q]);
                for (i, l) in local.iter_mut().enumerate() {
                    *l += w * dot(fq, cf.vel[q][i]);
                }
            }
            cf.vel_dofs.iter().copied().zip(local).collect()
        })
        .collect();
    let mut out = vec![0.0; spaces.num_velocity()];
    for (d, v) in per_cell.into_iter().flatten() {
        out[d] += v;
    }
    out
}

/// Load vector of a density-weighted field, `(rho_h g, v)`; equals
/// `G rho` and is used for checks.
pub fn weighted_load(gravity: &SparseOperator, rho: &[f64]) -> Vec<f64> {
    gravity.apply(rho)
}
