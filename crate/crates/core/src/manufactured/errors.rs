use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::BenchmarkCase;
use crate::spaces::{DiscreteState, SpaceError, Spaces, Variant};

#[derive(Debug, Error)]
pub enum ManufacturedError {
    #[error("an EOC table needs at least two levels, got {0}")]
    TooFewLevels(usize),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

pub const ERROR_CSV_HEADER: &str = "level,h_max,velocity_dofs,density_dofs,l2_u,h1_u,l2_rho";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub level: usize,
    pub h_max: f64,
    pub velocity_dofs: usize,
    pub density_dofs: usize,
    pub l2_u: f64,
    /// Discrete H^1 error including the facet terms.
    pub h1_u: f64,
    pub l2_rho: f64,
}

impl ErrorReport {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.6e},{},{},{:.6e},{:.6e},{:.6e}",
            self.level, self.h_max, self.velocity_dofs, self.density_dofs, self.l2_u, self.h1_u, self.l2_rho
        )
    }
}

/// Errors of a discrete state against the exact solution of `case`.
pub fn compute_errors(spaces: &Spaces, state: &DiscreteState, case: &BenchmarkCase, level: usize) -> Result<ErrorReport, ManufacturedError> {
    let mesh = spaces.mesh();
    let tables = spaces.tables(spaces.default_quadrature_degree())?;
    let u = &state.velocity;
    let mut l2_u = 0.0;
    let mut grad = 0.0;
    let mut l2_rho = 0.0;
    let mut facet = 0.0;
    for c in 0..mesh.num_cells() {
        let cf = spaces.cell_frame(c, &tables);
        for (q, w) in cf.weights.iter().enumerate() {
            let x = cf.points[q];
            let (v, g) = cf.velocity(u, q);
            let ue = (case.velocity)(x);
            let ge = (case.velocity_grad)(x);
            l2_u += w * ((ue[0] - v[0]).powi(2) + (ue[1] - v[1]).powi(2));
            grad += w * (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| (ge[i][j] - g[i][j]).powi(2)).sum::<f64>();
            l2_rho += w * ((case.density)(x) - cf.density(&state.density, q)).powi(2);
        }
        let inv_h = 1.0 / mesh.cell_diameter(c);
        for e in 0..3 {
            let ef = spaces.edge_frame(c, e, &tables);
            let tan = mesh.facet_tangent(ef.facet);
            for (q, w) in ef.weights.iter().enumerate() {
                let v = ef.velocity(u, q);
                let t = ef.trace_value(u, q);
                let d = [t[0] - v[0], t[1] - v[1]];
                let j = match spaces.variant() {
                    Variant::HdivHdg => (d[0] * tan[0] + d[1] * tan[1]).powi(2),
                    Variant::FullHdg => d[0] * d[0] + d[1] * d[1],
                };
                facet += w * inv_h * j;
            }
        }
    }
    Ok(ErrorReport {
        level,
        h_max: mesh.h_max(),
        velocity_dofs: spaces.num_velocity(),
        density_dofs: spaces.num_density(),
        l2_u: l2_u.sqrt(),
        h1_u: (grad + facet).sqrt(),
        l2_rho: l2_rho.sqrt(),
    })
}

/// Experimental order of convergence between two levels.
pub fn eoc(coarse: f64, fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (coarse / fine).ln() / (h_coarse / h_fine).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EocRow {
    pub report: ErrorReport,
    /// `[l2_u, h1_u, l2_rho]` rates against the previous level.
    pub eoc: Option<[f64; 3]>,
}

impl EocRow {
    pub fn csv_line(&self) -> String {
        let rates = match self.eoc {
            Some(r) => format!("{:.4},{:.4},{:.4}", r[0], r[1], r[2]),
            None => ",,".into(),
        };
        format!("{},{rates}", self.report.csv_line())
    }
}

pub const EOC_CSV_HEADER: &str = "level,h_max,velocity_dofs,density_dofs,l2_u,h1_u,l2_rho,eoc_l2_u,eoc_h1_u,eoc_l2_rho";

pub fn eoc_table(reports: &[ErrorReport]) -> Result<Vec<EocRow>, ManufacturedError> {
    if reports.len() < 2 {
        return Err(ManufacturedError::TooFewLevels(reports.len()));
    }
    Ok(reports
        .iter()
        .enumerate()
        .map(|(i, r)| EocRow {
            report: *r,
            eoc: (i > 0).then(|| {
                let p = &reports[i - 1];
                [
                    eoc(p.l2_u, r.l2_u, p.h_max, r.h_max),
                    eoc(p.h1_u, r.h1_u, p.h_max, r.h_max),
                    eoc(p.l2_rho, r.l2_rho, p.h_max, r.h_max),
                ]
            }),
        })
        .collect())
}
