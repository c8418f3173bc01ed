//! Batch studies driven by a JSON configuration.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manufactured::{compute_errors, make_case, CaseId, Domain, ErrorReport};
use crate::mesh::{build_unit_square, Mesh, MeshError};
use crate::solver::{solve_fixed_point, IterationReport, SolverConfig};
use crate::spaces::{build_spaces, Variant};

pub use output::{cell_csv, plot_data, summary_markdown, STUDY_CSV_HEADER};

/// Largest projected velocity dof count accepted without `--force`.
pub const DOF_CAP: usize = 200_000;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PROPERTY: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse configuration: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("projected {dofs} velocity dofs exceed the cap of {DOF_CAP}; pass --force to run anyway")]
    TooLarge { dofs: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub case: CaseId,
    pub variants: Vec<Variant>,
    pub orders: Vec<usize>,
    pub nu: Vec<f64>,
    pub c_m: Vec<f64>,
    pub levels: Vec<usize>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub tau_factor: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub tol_momentum: Option<f64>,
    #[serde(default)]
    pub tol_density: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit_plots: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

/// One `(variant, k, nu, c_M)` combination of a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub variant: Variant,
    pub k: usize,
    pub nu: f64,
    pub c_m: f64,
}

impl StudyCell {
    pub fn stem(&self, case: CaseId) -> String {
        format!("{case}_{}_k{}_nu{:e}_cm{:e}", self.variant, self.k, self.nu, self.c_m)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        for (name, empty) in [
            ("variants", self.variants.is_empty()),
            ("orders", self.orders.is_empty()),
            ("nu", self.nu.is_empty()),
            ("c_m", self.c_m.is_empty()),
            ("levels", self.levels.is_empty()),
        ] {
            if empty {
                return bad(format!("'{name}' must not be empty"));
            }
        }
        if let Some(&k) = self.orders.iter().find(|k| !(1..=3).contains(*k)) {
            return bad(format!("order k = {k} (expected 1..=3)"));
        }
        for (name, values) in [("nu", &self.nu), ("c_m", &self.c_m)] {
            if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return bad(format!("{name} = {v} (expected positive)"));
            }
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("levels must be strictly increasing".into());
        }
        self.solver_config(self.variants[0], self.orders[0])
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn solver_config(&self, variant: Variant, k: usize) -> SolverConfig {
        let mut c = SolverConfig::new(variant, k);
        c.tau = self.tau;
        if let Some(v) = self.tau_factor {
            c.tau_factor = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.tol_momentum {
            c.tol_momentum = v;
        }
        if let Some(v) = self.tol_density {
            c.tol_density = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        c
    }

    /// Cells in declaration order: variants, then orders, then `nu`, then `c_M`.
    pub fn cells(&self) -> Vec<StudyCell> {
        let mut out = Vec::new();
        for &variant in &self.variants {
            for &k in &self.orders {
                for &nu in &self.nu {
                    for &c_m in &self.c_m {
                        out.push(StudyCell { variant, k, nu, c_m });
                    }
                }
            }
        }
        out
    }

    /// Largest velocity dof count over the configured levels, orders and variants.
    pub fn projected_dofs(&self) -> Result<usize, CliError> {
        let mut worst = 0;
        for &level in &self.levels {
            let (cells, facets) = mesh_size(self.case.domain(), level)?;
            for &variant in &self.variants {
                for &k in &self.orders {
                    worst = worst.max(velocity_dofs(variant, k, cells, facets));
                }
            }
        }
        Ok(worst)
    }
}

/// Cell and facet counts of a level without building refined square meshes.
fn mesh_size(domain: Domain, level: usize) -> Result<(usize, usize), CliError> {
    match domain {
        Domain::UnitSquare => {
            let base = build_unit_square(0);
            let (mut cells, mut facets) = (base.num_cells(), base.num_facets());
            for _ in 0..level {
                facets = 2 * facets + 3 * cells;
                cells *= 4;
            }
            Ok((cells, facets))
        }
        Domain::Mountain => {
            let m = domain.mesh(level)?;
            Ok((m.num_cells(), m.num_facets()))
        }
    }
}

/// Velocity unknowns (cell and facet) of a variant on a mesh of the given size.
pub fn velocity_dofs(variant: Variant, k: usize, cells: usize, facets: usize) -> usize {
    match variant {
        Variant::HdivHdg => 2 * facets * (k + 1) + cells * (k + 1) * (k - 1),
        Variant::FullHdg => cells * (k + 1) * (k + 2) + 2 * facets * (k + 1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelOutcome {
    pub level: usize,
    pub errors: Option<ErrorReport>,
    pub iterations: usize,
    pub converged: bool,
    pub min_rho: f64,
    pub mass_drift: f64,
    pub failure: Option<String>,
    pub history: Option<IterationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: StudyCell,
    pub levels: Vec<LevelOutcome>,
}

impl CellResult {
    pub fn ok(&self) -> bool {
        self.levels.iter().all(|l| l.converged && l.failure.is_none())
    }
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub results: Vec<CellResult>,
    pub files: Vec<PathBuf>,
}

impl StudyOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.results.iter().all(CellResult::ok) {
            EXIT_OK
        } else {
            EXIT_SOLVER
        }
    }
}

fn run_level(case_id: CaseId, cell: StudyCell, config: &SolverConfig, mesh: &Arc<Mesh>, level: usize) -> LevelOutcome {
    let case = make_case(case_id, cell.nu, cell.c_m, mesh);
    let failed = |msg: String| LevelOutcome {
        level,
        errors: None,
        iterations: 0,
        converged: false,
        min_rho: f64::NAN,
        mass_drift: f64::NAN,
        failure: Some(msg),
        history: None,
    };
    let (state, report) = match solve_fixed_point(&case.problem(), mesh.clone(), config) {
        Ok(r) => r,
        Err(e) => return failed(e.to_string()),
    };
    let errors = build_spaces(mesh.clone(), cell.k, cell.variant)
        .map_err(|e| e.to_string())
        .and_then(|s| compute_errors(&s, &state, &case, level).map_err(|e| e.to_string()));
    match errors {
        Ok(errors) => LevelOutcome {
            level,
            errors: Some(errors),
            iterations: report.iterations(),
            converged: report.converged,
            min_rho: report.min_density(),
            mass_drift: report.max_mass_drift(case.mass),
            failure: None,
            history: Some(report),
        },
        Err(e) => failed(e),
    }
}

/// Runs every cell of the study, writes the artifacts and returns the results.
pub fn run_study(config: &RunConfig, force: bool) -> Result<StudyOutcome, CliError> {
    config.validate()?;
    let dofs = config.projected_dofs()?;
    if dofs > DOF_CAP && !force {
        return Err(CliError::TooLarge { dofs });
    }
    let meshes: Vec<Arc<Mesh>> = config
        .levels
        .iter()
        .map(|&l| config.case.domain().mesh(l).map(Arc::new))
        .collect::<Result<_, _>>()?;
    let results: Vec<CellResult> = config
        .cells()
        .into_par_iter()
        .map(|cell| {
            let solver = config.solver_config(cell.variant, cell.k);
            let levels = config.levels.iter().zip(&meshes).map(|(&l, m)| run_level(config.case, cell, &solver, m, l)).collect();
            log::info!("{} done", cell.stem(config.case));
            CellResult { cell, levels }
        })
        .collect();
    let files = write_artifacts(config, &results)?;
    Ok(StudyOutcome { results, files })
}

fn write_artifacts(config: &RunConfig, results: &[CellResult]) -> Result<Vec<PathBuf>, CliError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut write = |name: String, text: String| -> Result<(), CliError> {
        let path = dir.join(name);
        fs::write(&path, text)?;
        files.push(path);
        Ok(())
    };
    for r in results {
        let stem = r.cell.stem(config.case);
        write(format!("{stem}.csv"), cell_csv(r))?;
        for l in &r.levels {
            if let Some(h) = &l.history {
                write(format!("{stem}_level{}_history.csv", l.level), h.to_csv())?;
            }
        }
    }
    write("summary.md".into(), summary_markdown(config, results))?;
    if config.emit_plots {
        for (name, text) in plot_data(config, results) {
            write(name, text)?;
        }
    }
    Ok(files)
}
