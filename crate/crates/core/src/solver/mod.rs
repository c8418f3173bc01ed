//! Damped fixed-point iteration between the momentum balance and the upwind
//! continuity equation.
//!
//! Each sweep solves `nu A u = F + G rho - c_M B^T rho` with the factorised
//! diffusion matrix, then `(rho_new - rho)/tau + C(u) rho_new = inflow`.

mod linear;
mod report;

use std::sync::Arc;

use log::{debug, info};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{
    assemble_diffusion, assemble_divergence, assemble_gravity, assemble_hdg_norm, assemble_inflow, assemble_load,
    assemble_upwind_transport, AssemblyError, SparseOperator, DEFAULT_ALPHA,
};
use crate::mesh::{Mesh, Point};
use crate::polybasis::MAX_QUADRATURE_DEGREE;
use crate::spaces::{build_spaces, DiscreteState, RefTables, SpaceError, Spaces, Variant};

use linear::{ReducedSpd, ShiftedLu};
pub use report::{IterationRecord, IterationReport, CSV_HEADER};

pub type VectorField = Arc<dyn Fn(Point) -> Point + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("factorisation failed: {0}")]
    Factorization(String),
    #[error("iteration diverged at step {iteration} (residual {residual:e})")]
    Diverged { iteration: usize, residual: f64 },
}

/// Data of one compressible Stokes problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub nu: f64,
    pub c_m: f64,
    /// Prescribed total mass; the initial density is `mass / |domain|`.
    pub mass: f64,
    pub force: Option<VectorField>,
    pub gravity: Option<VectorField>,
    /// Dirichlet velocity data; zero when absent.
    pub boundary_velocity: Option<VectorField>,
    /// Density imposed on inflow boundary facets.
    pub inflow_density: Option<ScalarField>,
    /// Quadrature degree for the load vector; the highest available rule when absent.
    pub load_degree: Option<usize>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("nu", &self.nu)
            .field("c_m", &self.c_m)
            .field("mass", &self.mass)
            .field("force", &self.force.is_some())
            .field("gravity", &self.gravity.is_some())
            .field("boundary_velocity", &self.boundary_velocity.is_some())
            .field("inflow_density", &self.inflow_density.is_some())
            .finish()
    }
}

impl ProblemSpec {
    /// Closed problem with homogeneous velocity data and no forcing.
    pub fn new(nu: f64, c_m: f64, mass: f64) -> Self {
        Self {
            nu,
            c_m,
            mass,
            force: None,
            gravity: None,
            boundary_velocity: None,
            inflow_density: None,
            load_degree: None,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.inflow_density.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LinearSolver {
    #[default]
    SparseDirect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub variant: Variant,
    pub order: usize,
    pub alpha: f64,
    /// Fixed pseudo-time step; chosen from the problem scales when absent.
    pub tau: Option<f64>,
    /// Safety factor of the automatic step.
    pub tau_factor: f64,
    pub tol_momentum: f64,
    pub tol_density: f64,
    pub max_iters: usize,
    pub linear_solver: LinearSolver,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            variant: Variant::HdivHdg,
            order: 1,
            alpha: DEFAULT_ALPHA,
            tau: None,
            tau_factor: DEFAULT_TAU_FACTOR,
            tol_momentum: 1e-10,
            tol_density: 1e-10,
            max_iters: 10_000,
            linear_solver: LinearSolver::SparseDirect,
        }
    }
}

pub const DEFAULT_TAU_FACTOR: f64 = 1.0;

impl SolverConfig {
    pub fn new(variant: Variant, order: usize) -> Self {
        Self { variant, order, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if let Some(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("tau = {t}"));
            }
        }
        if !(self.tau_factor > 0.0 && self.tau_factor < 2.0) {
            return bad(format!("tau_factor = {} (expected in (0, 2))", self.tau_factor));
        }
        if !(self.tol_momentum > 0.0) || !(self.tol_density > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(1..=3).contains(&self.order) {
            return bad(format!("order k = {}", self.order));
        }
        if !(self.alpha > 0.0) {
            return bad(format!("alpha = {}", self.alpha));
        }
        Ok(())
    }
}

/// Assembled, iteration-independent parts of one discrete problem.
pub struct Discretization {
    spaces: Arc<Spaces>,
    problem: ProblemSpec,
    tables: RefTables,
    transport_tables: RefTables,
    diffusion: SparseOperator,
    divergence: SparseOperator,
    gravity: Option<SparseOperator>,
    hdg_norm: SparseOperator,
    load: Vec<f64>,
    constrained: Vec<bool>,
    /// Boundary values on constrained dofs, zero elsewhere.
    lifted: Vec<f64>,
    diffusion_solver: ReducedSpd,
    density_solver: ShiftedLu,
}

impl Discretization {
    pub fn new(spaces: Arc<Spaces>, problem: ProblemSpec, alpha: f64) -> Result<Self, SolverError> {
        for (name, v) in [("nu", problem.nu), ("c_M", problem.c_m), ("mass", problem.mass)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolverError::InvalidConfig(format!("{name} = {v}")));
            }
        }
        let tables = spaces.tables(spaces.default_quadrature_degree())?;
        let transport_tables = spaces.tables(3 * spaces.order())?;
        let diffusion = assemble_diffusion(&spaces, &tables, alpha)?;
        let divergence = assemble_divergence(&spaces, &tables);
        let gravity = problem.gravity.as_ref().map(|g| assemble_gravity(&spaces, &tables, g.as_ref()));
        let hdg_norm = assemble_hdg_norm(&spaces, &tables);
        let load = match &problem.force {
            Some(f) => {
                let lt = match problem.load_degree.unwrap_or(MAX_QUADRATURE_DEGREE) {
                    d if d == tables.degree => tables.clone(),
                    d => spaces.tables(d)?,
                };
                assemble_load(&spaces, &lt, f.as_ref())
            }
            None => vec![0.0; spaces.num_velocity()],
        };
        let constrained = spaces.velocity_constrained();
        let mut lifted = vec![0.0; spaces.num_velocity()];
        if let Some(bc) = &problem.boundary_velocity {
            for (d, v) in spaces.boundary_values(bc.as_ref()) {
                lifted[d] = v;
            }
        }
        let diffusion_solver = ReducedSpd::new(&diffusion, &constrained)?;
        Ok(Self {
            spaces,
            problem,
            tables,
            transport_tables,
            diffusion,
            divergence,
            gravity,
            hdg_norm,
            load,
            constrained,
            lifted,
            diffusion_solver,
            density_solver: ShiftedLu::new(),
        })
    }

    pub fn spaces(&self) -> &Spaces {
        &self.spaces
    }

    pub fn spaces_arc(&self) -> Arc<Spaces> {
        self.spaces.clone()
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn tables(&self) -> &RefTables {
        &self.tables
    }

    pub fn diffusion(&self) -> &SparseOperator {
        &self.diffusion
    }

    pub fn divergence(&self) -> &SparseOperator {
        &self.divergence
    }

    pub fn hdg_norm(&self) -> &SparseOperator {
        &self.hdg_norm
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn initial_density(&self) -> Vec<f64> {
        self.spaces.constant_density(self.problem.mass / self.spaces.mesh().area())
    }

    /// Sum of the Euclidean norms (free dofs) of the three momentum forcing
    /// terms; round-off in the momentum balance is relative to this.
    pub fn forcing_scale(&self, rho: &[f64]) -> f64 {
        let norm = |v: &[f64]| (0..v.len()).filter(|&i| !self.constrained[i]).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
        let mut s = norm(&self.load) + self.problem.c_m * norm(&self.divergence.apply_transpose(rho));
        if let Some(g) = &self.gravity {
            s += norm(&g.apply(rho));
        }
        s
    }

    /// Size of the terms entering the momentum residual: the forcing plus
    /// `nu |A| |u|`, which bounds the round-off of the velocity solve.
    pub fn momentum_scale(&self, u: &[f64], rho: &[f64]) -> f64 {
        let au = self.diffusion.apply_abs(u);
        let norm = (0..au.len()).filter(|&i| !self.constrained[i]).map(|i| au[i] * au[i]).sum::<f64>().sqrt();
        self.forcing_scale(rho) + self.problem.nu * norm
    }

    /// `F + G rho - c_M B^T rho` over the combined velocity vector.
    pub fn momentum_rhs(&self, rho: &[f64]) -> Vec<f64> {
        let mut rhs = self.load.clone();
        if let Some(g) = &self.gravity {
            for (r, v) in rhs.iter_mut().zip(g.apply(rho)) {
                *r += v;
            }
        }
        for (r, v) in rhs.iter_mut().zip(self.divergence.apply_transpose(rho)) {
            *r -= self.problem.c_m * v;
        }
        rhs
    }

    /// Velocity solving the momentum balance for a fixed density.
    pub fn momentum_step(&self, rho: &[f64]) -> Vec<f64> {
        let mut rhs = self.momentum_rhs(rho);
        let nu = self.problem.nu;
        let lift = self.diffusion.apply(&self.lifted);
        let free = self.diffusion_solver.free();
        let mut x: Vec<f64> = free.iter().map(|&i| (rhs[i] - nu * lift[i]) / nu).collect();
        self.diffusion_solver.solve(&mut x);
        rhs.copy_from_slice(&self.lifted);
        for (&i, v) in free.iter().zip(x) {
            rhs[i] = v;
        }
        rhs
    }

    pub fn transport(&self, u: &[f64]) -> SparseOperator {
        assemble_upwind_transport(&self.spaces, &self.transport_tables, u)
    }

    pub fn inflow(&self, u: &[f64]) -> Vec<f64> {
        match &self.problem.inflow_density {
            Some(d) => assemble_inflow(&self.spaces, &self.transport_tables, u, d.as_ref()),
            None => vec![0.0; self.spaces.num_density()],
        }
    }

    /// One implicit pseudo-time step of the continuity equation. The density
    /// mass matrix is the identity in the orthonormal basis.
    pub fn density_step(&mut self, transport: &SparseOperator, inflow: &[f64], rho: &[f64], tau: f64) -> Result<Vec<f64>, SolverError> {
        let mut x: Vec<f64> = rho.iter().zip(inflow).map(|(r, b)| r / tau + b).collect();
        self.density_solver.solve(transport, 1.0 / tau, &mut x)?;
        Ok(x)
    }

    /// Euclidean norms of the momentum residual on free dofs and of the
    /// steady continuity residual.
    pub fn residuals(&self, u: &[f64], rho: &[f64], transport: &SparseOperator, inflow: &[f64]) -> (f64, f64) {
        let au = self.diffusion.apply(u);
        let rhs = self.momentum_rhs(rho);
        let nu = self.problem.nu;
        let ru = (0..u.len())
            .filter(|&i| !self.constrained[i])
            .map(|i| (nu * au[i] - rhs[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let cr = transport.apply(rho);
        let rr = cr.iter().zip(inflow).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        (ru, rr)
    }

    /// `||(u, u_hat)||_{1,h}`.
    pub fn h1_norm(&self, u: &[f64]) -> f64 {
        let nu = self.hdg_norm.apply(u);
        u.iter().zip(&nu).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }

    /// Largest eigenvalue of `B A^{-1} B^T` on the free velocity dofs, by
    /// power iteration.
    pub fn schur_spectral_radius(&self, iterations: usize) -> f64 {
        let n = self.spaces.num_density();
        let free = self.diffusion_solver.free();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            x.iter_mut().for_each(|v| *v /= norm);
            let btx = self.divergence.apply_transpose(&x);
            let mut y: Vec<f64> = free.iter().map(|&i| btx[i]).collect();
            self.diffusion_solver.solve(&mut y);
            let mut full = vec![0.0; self.spaces.num_velocity()];
            for (&i, v) in free.iter().zip(y) {
                full[i] = v;
            }
            let sx = self.divergence.apply(&full);
            lambda = x.iter().zip(&sx).map(|(a, b)| a * b).sum::<f64>();
            x = sx;
        }
        lambda
    }
}

/// Runs the fixed-point iteration from `u = 0`, `rho = mass / |domain|`.
pub fn solve_fixed_point(problem: &ProblemSpec, mesh: Arc<Mesh>, config: &SolverConfig) -> Result<(DiscreteState, IterationReport), SolverError> {
    config.validate()?;
    let spaces = Arc::new(build_spaces(mesh, config.order, config.variant)?);
    let mut disc = Discretization::new(spaces, problem.clone(), config.alpha)?;
    iterate(&mut disc, config)
}

/// Automatic pseudo-time step for the current density bound.
fn auto_tau(nu: f64, c_m: f64, factor: f64, schur: f64, rho_max: f64) -> f64 {
    factor * nu / (c_m * schur.max(f64::MIN_POSITIVE) * rho_max.max(f64::MIN_POSITIVE))
}

/// Residuals within this multiple of machine epsilon (relative to the data) count as round-off.
pub const ROUNDOFF_FACTOR: f64 = 1e4;
const STAGNATION_WINDOW: usize = 20;

/// True once the last window no longer improves on the earlier minimum by a factor of two.
fn stagnated(history: &[f64]) -> bool {
    if history.len() <= STAGNATION_WINDOW {
        return false;
    }
    let (earlier, recent) = history.split_at(history.len() - STAGNATION_WINDOW);
    let best_earlier = earlier.iter().copied().fold(f64::INFINITY, f64::min);
    let best_recent = recent.iter().copied().fold(f64::INFINITY, f64::min);
    best_recent > 0.5 * best_earlier
}

/// Fixed-point iteration on an assembled discretisation.
///
/// Stops when both residuals meet the configured tolerances, or when both sit at
/// the round-off level of the data and have stopped decreasing.
pub fn iterate(disc: &mut Discretization, config: &SolverConfig) -> Result<(DiscreteState, IterationReport), SolverError> {
    config.validate()?;
    let spaces = disc.spaces_arc();
    let (nu, c_m) = (disc.problem.nu, disc.problem.c_m);
    let mut rho = disc.initial_density();
    let mut state = DiscreteState::zeros(&spaces);
    let schur = match config.tau {
        Some(_) => 0.0,
        None => disc.schur_spectral_radius(30) * 1.05,
    };
    let mut report = IterationReport::new(config.tau.unwrap_or(0.0));
    let (_, mut rho_max) = spaces.density_range(&rho, &disc.tables);
    let mut history: Vec<f64> = Vec::new();
    let mut normalised: Vec<f64> = Vec::new();

    for n in 1..=config.max_iters {
        let tau = config.tau.unwrap_or_else(|| auto_tau(nu, c_m, config.tau_factor, schur, rho_max));
        let u = disc.momentum_step(&rho);
        let transport = disc.transport(&u);
        let inflow = disc.inflow(&u);
        let next = disc.density_step(&transport, &inflow, &rho, tau)?;
        let (ru, rr) = disc.residuals(&u, &next, &transport, &inflow);
        let (min_rho, max_rho) = spaces.density_range(&next, &disc.tables);
        rho_max = max_rho;
        let record = IterationRecord {
            iter: n,
            res_u: ru,
            res_rho: rr,
            min_rho,
            mass: spaces.density_mass(&next),
            h1norm: disc.h1_norm(&u),
            tau,
        };
        debug!("{}", record.csv_line());
        report.push(record);

        let combined = ru + rr;
        if !combined.is_finite() {
            return Err(SolverError::Diverged { iteration: n, residual: combined });
        }
        let forcing = disc.forcing_scale(&next);
        let scale_u = disc.momentum_scale(&u, &next).max(f64::MIN_POSITIVE);
        let scale_rho = (forcing * max_rho.max(1.0) / nu).max(f64::MIN_POSITIVE);
        rho = next;
        state.velocity = u;

        history.push(combined);
        if n > 50 && combined > 1e6 * history[n - 51] {
            return Err(SolverError::Diverged { iteration: n, residual: combined });
        }
        if ru <= config.tol_momentum && rr <= config.tol_density {
            report.converged = true;
            break;
        }
        // the absolute tolerances can sit below what double precision resolves
        normalised.push(ru / scale_u + rr / scale_rho);
        if ru <= ROUNDOFF_FACTOR * f64::EPSILON * scale_u
            && rr <= ROUNDOFF_FACTOR * f64::EPSILON * scale_rho
            && stagnated(&normalised)
        {
            report.converged = true;
            report.roundoff_limited = true;
            break;
        }
    }
    if report.tau == 0.0 {
        report.tau = report.records.last().map(|r| r.tau).unwrap_or(0.0);
    }
    state.density = rho;
    state.iterations = report.records.len();
    state.residual_history = report.records.iter().map(|r| [r.res_u, r.res_rho]).collect();
    info!(
        "{} k={} nu={nu:e} c_M={c_m}: {} iterations, converged = {}",
        spaces.variant(),
        spaces.order(),
        state.iterations,
        report.converged
    );
    Ok((state, report))
}

#[cfg(test)]
mod tests;
