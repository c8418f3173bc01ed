//! Closed-form benchmark solutions, their data, and discrete error norms.

mod errors;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mesh::{build_mountain, build_unit_square, Mesh, MeshError, Point};
use crate::polybasis::{gauss_legendre, quadrature, Element};
use crate::solver::{ProblemSpec, ScalarField, VectorField};

pub use errors::{compute_errors, eoc, eoc_table, EocRow, ErrorReport, ManufacturedError, EOC_CSV_HEADER, ERROR_CSV_HEADER};

pub type GradientField = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;

/// Local mesh size on the mountain curve.
pub const MOUNTAIN_H_LOC: f64 = 0.01;
/// Coarsest mountain mesh size.
pub const MOUNTAIN_H_MAX: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseId {
    Vortex,
    VortexAllg,
    Mountain,
    MountainAllf,
    Nonhydro,
}

impl CaseId {
    pub const ALL: [CaseId; 5] = [CaseId::Vortex, CaseId::VortexAllg, CaseId::Mountain, CaseId::MountainAllf, CaseId::Nonhydro];

    pub fn name(self) -> &'static str {
        match self {
            CaseId::Vortex => "vortex",
            CaseId::VortexAllg => "vortex-allg",
            CaseId::Mountain => "mountain",
            CaseId::MountainAllf => "mountain-allf",
            CaseId::Nonhydro => "nonhydro",
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            CaseId::Mountain | CaseId::MountainAllf => Domain::Mountain,
            _ => Domain::UnitSquare,
        }
    }

    pub fn is_closed(self) -> bool {
        self != CaseId::Nonhydro
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CaseId::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown case '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    UnitSquare,
    Mountain,
}

impl Domain {
    /// Mesh of refinement level `level`: uniform refinements of the 96-cell
    /// square, or a mountain mesh with `h_max = 0.3 / 2^level`.
    pub fn mesh(self, level: usize) -> Result<Mesh, MeshError> {
        match self {
            Domain::UnitSquare => Ok(build_unit_square(level)),
            Domain::Mountain => build_mountain(MOUNTAIN_H_MAX / f64::powi(2.0, level as i32), MOUNTAIN_H_LOC),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VortexRhs {
    /// `g = grad Psi`, `f = -nu lap u`.
    Split,
    /// `g = grad Psi - nu lap u / rho`, `f = 0`.
    AllG,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MountainRhs {
    Gravity,
    /// `g = 0`, `f = rho grad Psi`.
    AllF,
}

/// Exact solution and data of one benchmark.
#[derive(Clone)]
pub struct BenchmarkCase {
    pub id: CaseId,
    pub nu: f64,
    pub c_m: f64,
    pub mass: f64,
    pub velocity: VectorField,
    pub velocity_grad: GradientField,
    pub velocity_laplacian: VectorField,
    pub density: ScalarField,
    pub density_grad: VectorField,
    pub gravity: Option<VectorField>,
    pub force: Option<VectorField>,
    pub boundary_velocity: Option<VectorField>,
    pub inflow_density: Option<ScalarField>,
    /// Normalisation constant of the density profile.
    pub scale: f64,
}

impl fmt::Debug for BenchmarkCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkCase")
            .field("id", &self.id)
            .field("nu", &self.nu)
            .field("c_m", &self.c_m)
            .field("scale", &self.scale)
            .finish()
    }
}

impl BenchmarkCase {
    pub fn problem(&self) -> ProblemSpec {
        ProblemSpec {
            nu: self.nu,
            c_m: self.c_m,
            mass: self.mass,
            force: self.force.clone(),
            gravity: self.gravity.clone(),
            boundary_velocity: self.boundary_velocity.clone(),
            inflow_density: self.inflow_density.clone(),
            load_degree: None,
        }
    }

    /// `-nu lap u + c_M grad rho - rho g - f` at `x`.
    pub fn momentum_residual(&self, x: Point) -> Point {
        let lap = (self.velocity_laplacian)(x);
        let dr = (self.density_grad)(x);
        let r = (self.density)(x);
        let g = self.gravity.as_ref().map_or([0.0, 0.0], |g| g(x));
        let f = self.force.as_ref().map_or([0.0, 0.0], |f| f(x));
        std::array::from_fn(|i| -self.nu * lap[i] + self.c_m * dr[i] - r * g[i] - f[i])
    }

    /// `div(rho u)` at `x`.
    pub fn continuity_residual(&self, x: Point) -> f64 {
        let r = (self.density)(x);
        let dr = (self.density_grad)(x);
        let u = (self.velocity)(x);
        let g = (self.velocity_grad)(x);
        r * (g[0][0] + g[1][1]) + dr[0] * u[0] + dr[1] * u[1]
    }
}

fn gradient_psi(x: Point) -> Point {
    [0.0, -x[1] * x[1]]
}

/// `int_0^1 f` by composite Gauss-Legendre with 8 panels of 20 points.
pub fn integrate_unit_interval(f: &dyn Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_legendre(20);
    let panels = 8.0;
    let mut s = 0.0;
    for p in 0..8 {
        let a = p as f64 / panels;
        for (t, w) in nodes.iter().zip(&weights) {
            s += w / panels * f(a + t / panels);
        }
    }
    s
}

/// `int_mesh f` with a degree-20 rule per cell.
pub fn integrate_mesh(mesh: &Mesh, f: &dyn Fn(Point) -> f64) -> f64 {
    let rule = quadrature(Element::Triangle, 20).expect("supported degree");
    (0..mesh.num_cells())
        .map(|c| {
            let [a, b, d] = mesh.cell_vertices(c);
            let det = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
            rule.iter()
                .map(|(p, w)| {
                    let x = [a[0] + p[0] * (b[0] - a[0]) + p[1] * (d[0] - a[0]), a[1] + p[0] * (b[1] - a[1]) + p[1] * (d[1] - a[1])];
                    w * det * f(x)
                })
                .sum::<f64>()
        })
        .sum()
}

/// Stratified profile `exp(-y^3 / (3 c_M))` (unnormalised) and its derivative.
fn stratified(c_m: f64) -> (impl Fn(f64) -> f64 + Copy, impl Fn(f64) -> f64 + Copy) {
    let p = move |y: f64| (-y * y * y / (3.0 * c_m)).exp();
    (p, move |y: f64| -y * y / c_m * p(y))
}

/// `x^2 (1-x)^2` and its first three derivatives.
fn quartic_bump(x: f64) -> [f64; 4] {
    [
        x * x * (1.0 - x) * (1.0 - x),
        2.0 * x - 6.0 * x * x + 4.0 * x * x * x,
        2.0 - 12.0 * x + 12.0 * x * x,
        -12.0 + 24.0 * x,
    ]
}

/// Rotating vortex `u = curl(zeta) / rho` in a stratified density on the unit square.
pub fn case_vortex(nu: f64, c_m: f64, rhs: VortexRhs) -> BenchmarkCase {
    let (profile, dprofile) = stratified(c_m);
    let c_omega = integrate_unit_interval(&profile);
    let rho = move |x: Point| profile(x[1]) / c_omega;
    // r = 1/rho and its first two y-derivatives
    let recip = move |y: f64| {
        let r = c_omega / profile(y);
        (r, r * y * y / c_m, r * (2.0 * y / c_m + y.powi(4) / (c_m * c_m)))
    };
    let u = move |x: Point| {
        let (bx, by) = (quartic_bump(x[0]), quartic_bump(x[1]));
        let (r, _, _) = recip(x[1]);
        [-100.0 * bx[0] * by[1] * r, 100.0 * bx[1] * by[0] * r]
    };
    let grad = move |x: Point| {
        let (bx, by) = (quartic_bump(x[0]), quartic_bump(x[1]));
        let (r, r1, _) = recip(x[1]);
        let w = [-100.0 * bx[0] * by[1], 100.0 * bx[1] * by[0]];
        let wx = [-100.0 * bx[1] * by[1], 100.0 * bx[2] * by[0]];
        let wy = [-100.0 * bx[0] * by[2], 100.0 * bx[1] * by[1]];
        [[r * wx[0], r * wy[0] + r1 * w[0]], [r * wx[1], r * wy[1] + r1 * w[1]]]
    };
    let lap = move |x: Point| {
        let (bx, by) = (quartic_bump(x[0]), quartic_bump(x[1]));
        let (r, r1, r2) = recip(x[1]);
        let w = [-100.0 * bx[0] * by[1], 100.0 * bx[1] * by[0]];
        let wy = [-100.0 * bx[0] * by[2], 100.0 * bx[1] * by[1]];
        let lw = [-100.0 * (bx[2] * by[1] + bx[0] * by[3]), 100.0 * (bx[3] * by[0] + bx[1] * by[2])];
        std::array::from_fn(|i| r * lw[i] + 2.0 * r1 * wy[i] + r2 * w[i])
    };
    let (gravity, force): (VectorField, Option<VectorField>) = match rhs {
        VortexRhs::Split => (Arc::new(gradient_psi), Some(Arc::new(move |x| lap(x).map(|v| -nu * v)))),
        VortexRhs::AllG => (
            Arc::new(move |x| {
                let l = lap(x);
                let r = rho(x);
                let g = gradient_psi(x);
                [g[0] - nu * l[0] / r, g[1] - nu * l[1] / r]
            }),
            None,
        ),
    };
    BenchmarkCase {
        id: match rhs {
            VortexRhs::Split => CaseId::Vortex,
            VortexRhs::AllG => CaseId::VortexAllg,
        },
        nu,
        c_m,
        mass: 1.0,
        velocity: Arc::new(u),
        velocity_grad: Arc::new(grad),
        velocity_laplacian: Arc::new(lap),
        density: Arc::new(rho),
        density_grad: Arc::new(move |x| [0.0, dprofile(x[1]) / c_omega]),
        gravity: Some(gravity),
        force,
        boundary_velocity: None,
        inflow_density: None,
        scale: c_omega,
    }
}

/// Hydrostatic state over the mountain; the density is normalised to unit
/// mass on the polygonal domain of `mesh`.
pub fn case_mountain(nu: f64, c_m: f64, rhs: MountainRhs, mesh: &Mesh) -> BenchmarkCase {
    let (profile, dprofile) = stratified(c_m);
    let c_omega = integrate_mesh(mesh, &|x| profile(x[1]));
    let rho = move |x: Point| profile(x[1]) / c_omega;
    let (gravity, force): (Option<VectorField>, Option<VectorField>) = match rhs {
        MountainRhs::Gravity => (Some(Arc::new(gradient_psi)), None),
        MountainRhs::AllF => (
            None,
            Some(Arc::new(move |x| {
                let g = gradient_psi(x);
                let r = rho(x);
                [r * g[0], r * g[1]]
            })),
        ),
    };
    BenchmarkCase {
        id: match rhs {
            MountainRhs::Gravity => CaseId::Mountain,
            MountainRhs::AllF => CaseId::MountainAllf,
        },
        nu,
        c_m,
        mass: 1.0,
        velocity: Arc::new(|_| [0.0, 0.0]),
        velocity_grad: Arc::new(|_| [[0.0; 2]; 2]),
        velocity_laplacian: Arc::new(|_| [0.0, 0.0]),
        density: Arc::new(rho),
        density_grad: Arc::new(move |x| [0.0, dprofile(x[1]) / c_omega]),
        gravity,
        force,
        boundary_velocity: None,
        inflow_density: None,
        scale: c_omega,
    }
}

/// Rigid rotation with a radially growing density, driven by `g = (x, y)`,
/// on the unit square with inflow through `x = 1` and `y = 0`.
pub fn case_nonhydro(nu: f64, c_m: f64) -> BenchmarkCase {
    let e = move |s: f64| (s * s / (2.0 * c_m)).exp();
    let one_d = integrate_unit_interval(&e);
    let rho0 = 1.0 / (one_d * one_d);
    let rho = move |x: Point| rho0 * e(x[0]) * e(x[1]);
    let u: VectorField = Arc::new(|x| [-x[1], x[0]]);
    let rho_field: ScalarField = Arc::new(rho);
    BenchmarkCase {
        id: CaseId::Nonhydro,
        nu,
        c_m,
        mass: 1.0,
        velocity: u.clone(),
        velocity_grad: Arc::new(|_| [[0.0, -1.0], [1.0, 0.0]]),
        velocity_laplacian: Arc::new(|_| [0.0, 0.0]),
        density: rho_field.clone(),
        density_grad: Arc::new(move |x| {
            let r = rho(x);
            [r * x[0] / c_m, r * x[1] / c_m]
        }),
        gravity: Some(Arc::new(|x| x)),
        force: None,
        boundary_velocity: Some(u),
        inflow_density: Some(rho_field),
        scale: rho0,
    }
}

/// Builds case `id` on `mesh`.
pub fn make_case(id: CaseId, nu: f64, c_m: f64, mesh: &Mesh) -> BenchmarkCase {
    match id {
        CaseId::Vortex => case_vortex(nu, c_m, VortexRhs::Split),
        CaseId::VortexAllg => case_vortex(nu, c_m, VortexRhs::AllG),
        CaseId::Mountain => case_mountain(nu, c_m, MountainRhs::Gravity, mesh),
        CaseId::MountainAllf => case_mountain(nu, c_m, MountainRhs::AllF, mesh),
        CaseId::Nonhydro => case_nonhydro(nu, c_m),
    }
}
