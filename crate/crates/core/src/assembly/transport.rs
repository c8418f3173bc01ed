//! Upwind discretisation of `div(rho u)`.
//!
//! `C[i][j] = -(rho_j u, grad lambda_i)_T + (u . n rho_j^up, lambda_i)_dT`
//! with the upwind cell chosen per facet by the sign of `int_F u . n_F`
//! (left cell on ties). The transporting normal velocity is the cell
//! velocity for the H(div) variant and the facet unknown otherwise.
//! Both off-diagonal neighbour blocks are always stored, so the sparsity
//! pattern does not depend on the velocity.

use rayon::prelude::*;

use super::operator::{SpaceTag, SparseOperator, Triplets};
use super::{dot, scatter};
use crate::mesh::Point;
use crate::spaces::{EdgeFrame, RefTables, Spaces, Variant};

fn local_edge_of(spaces: &Spaces, c: usize, f: usize) -> usize {
    spaces.mesh().cell_facets(c).iter().position(|&g| g == f).expect("facet belongs to cell")
}

/// Normal velocity `w . n_F` at the facet quadrature points.
fn normal_velocity(spaces: &Spaces, left: &EdgeFrame, u: &[f64]) -> Vec<f64> {
    let nf = spaces.mesh().facet_normal(left.facet);
    (0..left.weights.len())
        .map(|q| {
            let v = match spaces.variant() {
                Variant::HdivHdg => left.velocity(u, q),
                Variant::FullHdg => left.trace_value(u, q),
            };
            dot(v, nf)
        })
        .collect()
}

/// `int_F w . n_F` for every facet.
pub fn facet_fluxes(spaces: &Spaces, tables: &RefTables, u: &[f64]) -> Vec<f64> {
    let mesh = spaces.mesh();
    (0..mesh.num_facets())
        .into_par_iter()
        .map(|f| {
            let (l, _) = mesh.facet_cells(f);
            let ef = spaces.edge_frame(l, local_edge_of(spaces, l, f), tables);
            normal_velocity(spaces, &ef, u).iter().zip(&ef.weights).map(|(a, w)| a * w).sum()
        })
        .collect()
}

pub fn assemble_upwind_transport(spaces: &Spaces, tables: &RefTables, u: &[f64]) -> SparseOperator {
    let mesh = spaces.mesh();
    let volume: Vec<Triplets> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let cf = spaces.cell_frame(c, tables);
            let n = cf.rho_dofs.len();
            let mut local = vec![0.0; n * n];
            for (q, w) in cf.weights.iter().enumerate() {
                let (v, _) = cf.velocity(u, q);
                for i in 0..n {
                    let ug = w * dot(v, cf.rho_grad[q][i]);
                    for j in 0..n {
                        local[i * n + j] -= ug * cf.rho[q][j];
                    }
                }
            }
            let mut t = Triplets::new();
            for (i, &r) in cf.rho_dofs.iter().enumerate() {
                for (j, &col) in cf.rho_dofs.iter().enumerate() {
                    t.push((r, col, local[i * n + j]));
                }
            }
            t
        })
        .collect();

    let facets: Vec<Triplets> = (0..mesh.num_facets())
        .into_par_iter()
        .map(|f| {
            let (l, r) = mesh.facet_cells(f);
            let lf = spaces.edge_frame(l, local_edge_of(spaces, l, f), tables);
            let wn = normal_velocity(spaces, &lf, u);
            let flux: f64 = wn.iter().zip(&lf.weights).map(|(a, w)| a * w).sum();
            let mut t = Triplets::new();
            let Some(r) = r else {
                // outflow keeps the interior trace; inflow goes to the right-hand side
                let n = lf.rho_dofs.len();
                let mut local = vec![0.0; n * n];
                if flux >= 0.0 {
                    for (q, w) in lf.weights.iter().enumerate() {
                        for i in 0..n {
                            for j in 0..n {
                                local[i * n + j] += w * wn[q] * lf.rho[q][j] * lf.rho[q][i];
                            }
                        }
                    }
                }
                scatter(&local, &lf.rho_dofs, &lf.rho_dofs, &mut t);
                return t;
            };
            let rf = spaces.edge_frame(r, local_edge_of(spaces, r, f), tables);
            let up = if flux >= 0.0 { &lf } else { &rf };
            for (test, sign) in [(&lf, 1.0), (&rf, -1.0)] {
                for trial in [&lf, &rf] {
                    let (ni, nj) = (test.rho_dofs.len(), trial.rho_dofs.len());
                    let mut local = vec![0.0; ni * nj];
                    if std::ptr::eq(trial, up) {
                        for (q, w) in lf.weights.iter().enumerate() {
                            for i in 0..ni {
                                let a = sign * w * wn[q] * test.rho[q][i];
                                for j in 0..nj {
                                    local[i * nj + j] += a * trial.rho[q][j];
                                }
                            }
                        }
                    }
                    for (i, &row) in test.rho_dofs.iter().enumerate() {
                        for (j, &col) in trial.rho_dofs.iter().enumerate() {
                            t.push((row, col, local[i * nj + j]));
                        }
                    }
                }
            }
            t
        })
        .collect();

    let n = spaces.num_density();
    let all: Triplets = volume.into_iter().flatten().chain(facets.into_iter().flatten()).collect();
    SparseOperator::from_triplets(SpaceTag::Density, SpaceTag::Density, (n, n), all, false)
}

/// Right-hand side `-int_F (w . n) rho_D lambda` over boundary facets with
/// negative mean flux.
pub fn assemble_inflow(spaces: &Spaces, tables: &RefTables, u: &[f64], rho_d: &(dyn Fn(Point) -> f64 + Sync)) -> Vec<f64> {
    let mesh = spaces.mesh();
    let mut out = vec![0.0; spaces.num_density()];
    for f in mesh.boundary_facets() {
        let (l, _) = mesh.facet_cells(f);
        let lf = spaces.edge_frame(l, local_edge_of(spaces, l, f), tables);
        let wn = normal_velocity(spaces, &lf, u);
        let flux: f64 = wn.iter().zip(&lf.weights).map(|(a, w)| a * w).sum();
        if flux >= 0.0 {
            continue;
        }
        for (q, w) in lf.weights.iter().enumerate() {
            let d = rho_d(lf.points[q]);
            for (i, &dof) in lf.rho_dofs.iter().enumerate() {
                out[dof] -= w * wn[q] * d * lf.rho[q][i];
            }
        }
    }
    out
}
