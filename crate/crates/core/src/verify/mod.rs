//! Small-instance oracles for the structural properties of the scheme.
//!
//! Every check is deterministic given its seed. Instances use jittered
//! structured meshes of the unit square; dense linear algebra is only used
//! on meshes with at most [`DENSE_CELL_LIMIT`] cells.

mod checks;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{unit_square_diagonal, Mesh, MeshError, Point};
use crate::solver::SolverError;
use crate::spaces::{SpaceError, Variant};

pub use checks::{
    check_divfree_orthogonality, check_gradient_robustness, check_m_matrix, check_stability_witness, check_upwind_identity,
    Entropy,
};

pub const DENSE_CELL_LIMIT: usize = 64;
pub const DEFAULT_INSTANCES: usize = 50;
/// Largest vertex displacement relative to the grid spacing.
pub const MAX_JITTER: f64 = 0.2;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("dense oracle limited to {DENSE_CELL_LIMIT} cells, got {0}")]
    TooLarge(usize),
    #[error("singular dense oracle matrix")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    UpwindIdentity,
    UpwindEntropy,
    MMatrix,
    GradientRobustness,
    DivfreeOrthogonality,
    StabilityWitness,
}

impl Property {
    pub const ALL: [Property; 6] = [
        Property::UpwindIdentity,
        Property::UpwindEntropy,
        Property::MMatrix,
        Property::GradientRobustness,
        Property::DivfreeOrthogonality,
        Property::StabilityWitness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::UpwindIdentity => "upwind-identity",
            Property::UpwindEntropy => "upwind-entropy",
            Property::MMatrix => "m-matrix",
            Property::GradientRobustness => "gradient-robustness",
            Property::DivfreeOrthogonality => "divfree-orthogonality",
            Property::StabilityWitness => "stability-witness",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Property::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown property '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub seed: u64,
    pub cells: usize,
    pub k: usize,
    pub variant: Variant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub property: Property,
    pub instance: Instance,
    pub passed: bool,
    /// Worst violation, scaled as documented on each check; kept on pass too.
    pub violation: f64,
}

pub const PROPERTY_CSV_HEADER: &str = "property,seed,cells,k,variant,passed,violation";

impl PropertyResult {
    pub fn csv_line(&self) -> String {
        let i = &self.instance;
        format!("{},{},{},{},{},{},{:.6e}", self.property, i.seed, i.cells, i.k, i.variant, self.passed, self.violation)
    }
}

/// Structured `n x n` mesh of the unit square with interior vertices moved
/// by at most `MAX_JITTER * h`; draws are repeated until no cell inverts.
pub fn jittered_square(n: usize, seed: u64) -> Result<Mesh, MeshError> {
    let base = unit_square_diagonal(n);
    let h = 1.0 / n as f64;
    let mut on_boundary = vec![false; base.num_vertices()];
    for f in base.boundary_facets() {
        for v in base.facets()[f] {
            on_boundary[v] = true;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..100 {
        let vertices: Vec<Point> = base
            .vertices()
            .iter()
            .zip(&on_boundary)
            .map(|(&p, &fixed)| {
                if fixed {
                    return p;
                }
                let r = MAX_JITTER * h * rng.random::<f64>().sqrt();
                let a = std::f64::consts::TAU * rng.random::<f64>();
                [p[0] + r * a.cos(), p[1] + r * a.sin()]
            })
            .collect();
        match base.with_vertices(vertices) {
            Ok(m) => return Ok(m),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Upwind(u64, Entropy),
    MMatrix(u64),
    Gradient(u64, usize, Variant, f64),
    Divfree(u64, usize),
    Witness(u64),
}

impl Job {
    fn property(self) -> Property {
        match self {
            Job::Upwind(_, Entropy::Quadratic) => Property::UpwindIdentity,
            Job::Upwind(_, Entropy::Boltzmann) => Property::UpwindEntropy,
            Job::MMatrix(_) => Property::MMatrix,
            Job::Gradient(..) => Property::GradientRobustness,
            Job::Divfree(..) => Property::DivfreeOrthogonality,
            Job::Witness(_) => Property::StabilityWitness,
        }
    }

    fn run(self) -> PropertyResult {
        let out = match self {
            Job::Upwind(seed, phi) => check_upwind_identity(seed, phi),
            Job::MMatrix(seed) => check_m_matrix(seed),
            Job::Gradient(seed, k, variant, nu) => check_gradient_robustness(seed, k, variant, nu),
            Job::Divfree(seed, k) => check_divfree_orthogonality(seed, k),
            Job::Witness(seed) => check_stability_witness(seed),
        };
        out.unwrap_or_else(|e| {
            log::warn!("{} failed to run: {e}", self.property());
            PropertyResult {
                property: self.property(),
                instance: Instance { seed: 0, cells: 0, k: 0, variant: Variant::HdivHdg },
                passed: false,
                violation: f64::INFINITY,
            }
        })
    }
}

/// Seeds are `base_seed + i`. Gradient-robustness alternates orders and adds
/// a full-HDG contrast run at small viscosity for every fifth instance.
fn jobs(properties: &[Property], base_seed: u64, instances: usize) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &p in properties {
        for i in 0..instances {
            let seed = base_seed.wrapping_add(i as u64);
            let k = 1 + i % 3;
            match p {
                Property::UpwindIdentity => jobs.push(Job::Upwind(seed, Entropy::Quadratic)),
                Property::UpwindEntropy => jobs.push(Job::Upwind(seed, Entropy::Boltzmann)),
                Property::MMatrix => jobs.push(Job::MMatrix(seed)),
                Property::GradientRobustness => {
                    jobs.push(Job::Gradient(seed, k, Variant::HdivHdg, 1.0));
                    if i % 5 == 0 {
                        jobs.push(Job::Gradient(seed, k, Variant::FullHdg, 1e-6));
                    }
                }
                Property::DivfreeOrthogonality => jobs.push(Job::Divfree(seed, k)),
                Property::StabilityWitness => {
                    if i % 5 == 0 {
                        jobs.push(Job::Witness(seed));
                    }
                }
            }
        }
    }
    jobs
}

/// Runs the selected properties concurrently; results keep job order.
pub fn run_properties(properties: &[Property], base_seed: u64, instances: usize) -> Vec<PropertyResult> {
    jobs(properties, base_seed, instances).into_par_iter().map(Job::run).collect()
}

pub fn run_suite(base_seed: u64, instances: usize) -> Vec<PropertyResult> {
    run_properties(&Property::ALL, base_seed, instances)
}

pub fn results_csv(results: &[PropertyResult]) -> String {
    let mut s = String::from(PROPERTY_CSV_HEADER);
    s.push('\n');
    for r in results {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}
