use serde::{Deserialize, Serialize};

pub const CSV_HEADER: &str = "iter,res_u,res_rho,min_rho,mass,h1norm";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub res_u: f64,
    pub res_rho: f64,
    /// Minimum density over the cell quadrature points.
    pub min_rho: f64,
    pub mass: f64,
    pub h1norm: f64,
    pub tau: f64,
}

impl IterationRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.6e},{:.6e},{:.6e},{:.15e},{:.6e}",
            self.iter, self.res_u, self.res_rho, self.min_rho, self.mass, self.h1norm
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// Converged at the round-off floor rather than the absolute tolerances.
    pub roundoff_limited: bool,
    /// Step size of the last iteration.
    pub tau: f64,
}

impl IterationReport {
    pub fn new(tau: f64) -> Self {
        Self { records: Vec::new(), converged: false, roundoff_limited: false, tau }
    }

    pub fn push(&mut self, r: IterationRecord) {
        self.records.push(r);
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_residuals(&self) -> Option<(f64, f64)> {
        self.records.last().map(|r| (r.res_u, r.res_rho))
    }

    pub fn min_density(&self) -> f64 {
        self.records.iter().map(|r| r.min_rho).fold(f64::INFINITY, f64::min)
    }

    /// `max_n |(rho_n, 1) - mass|`.
    pub fn max_mass_drift(&self, mass: f64) -> f64 {
        self.records.iter().map(|r| (r.mass - mass).abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.csv_line());
            s.push('\n');
        }
        s
    }
}
