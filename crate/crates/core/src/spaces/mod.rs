//! Global finite element spaces and their degree-of-freedom layouts.
//!
//! Velocity unknowns of both variants live in one combined vector: the cell
//! space (BDM or discontinuous vector `P_k`) first, then the facet space.

mod frames;
mod state;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{Mesh, Point};
use crate::polybasis::{quadrature, AffineMap, BasisError, BdmBasis, Element, ScalarBasis, SegmentBasis};

pub use frames::{CellFrame, EdgeFrame, RefTables};
pub use state::{mesh_hash, DiscreteState, SpaceEntry, StateError, StateMetadata};

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("unsupported order k = {0} (expected 1..=3)")]
    UnsupportedOrder(usize),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "hdiv-hdg")]
    HdivHdg,
    #[serde(rename = "full-hdg")]
    FullHdg,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::HdivHdg => "hdiv-hdg",
            Variant::FullHdg => "full-hdg",
        })
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hdiv-hdg" | "hdiv" => Ok(Variant::HdivHdg),
            "full-hdg" | "full" => Ok(Variant::FullHdg),
            other => Err(format!("unknown variant '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceKind {
    Bdm,
    VectorDg,
    TangentialTrace,
    VectorTrace,
    ScalarDg,
}

/// Dof layout of one space. Cell-based spaces fill `cell_dofs`, facet-based
/// ones `facet_dofs`; `signs` parallels `cell_dofs` (only BDM has `-1`).
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub kind: SpaceKind,
    pub order: usize,
    pub ndofs: usize,
    pub cell_dofs: Vec<Vec<usize>>,
    pub signs: Vec<Vec<f64>>,
    pub facet_dofs: Vec<Vec<usize>>,
    pub constrained: Vec<bool>,
}

impl FeSpace {
    pub fn num_free(&self) -> usize {
        self.constrained.iter().filter(|c| !**c).count()
    }
}

#[derive(Debug, Clone)]
pub struct Spaces {
    mesh: Arc<Mesh>,
    k: usize,
    variant: Variant,
    pub velocity: FeSpace,
    pub trace: FeSpace,
    pub density: FeSpace,
    bdm: Option<BdmBasis>,
    pk: ScalarBasis,
    pk1: ScalarBasis,
    seg: SegmentBasis,
    maps: Vec<AffineMap>,
}

pub fn build_spaces(mesh: Arc<Mesh>, k: usize, variant: Variant) -> Result<Spaces, SpaceError> {
    if !(1..=3).contains(&k) {
        return Err(SpaceError::UnsupportedOrder(k));
    }
    let (nc, nf) = (mesh.num_cells(), mesh.num_facets());
    let nk = k + 1;
    let pk = ScalarBasis::orthonormal(k)?;
    let pk1 = ScalarBasis::orthonormal(k - 1)?;
    let seg = SegmentBasis::new(k)?;

    let (velocity, bdm) = match variant {
        Variant::HdivHdg => {
            let bdm = BdmBasis::new(k)?;
            let ni = bdm.num_interior_dofs();
            let mut cell_dofs = Vec::with_capacity(nc);
            let mut signs = Vec::with_capacity(nc);
            for c in 0..nc {
                let mut dofs = Vec::with_capacity(bdm.dim());
                let mut sg = Vec::with_capacity(bdm.dim());
                for e in 0..3 {
                    let f = mesh.cell_facets(c)[e];
                    let left = mesh.is_left(c, e);
                    for j in 0..nk {
                        dofs.push(f * nk + j);
                        sg.push(if left { 1.0 } else { -SegmentBasis::reversal_sign(j) });
                    }
                }
                dofs.extend((0..ni).map(|i| nf * nk + c * ni + i));
                sg.extend(std::iter::repeat_n(1.0, ni));
                cell_dofs.push(dofs);
                signs.push(sg);
            }
            let ndofs = nf * nk + nc * ni;
            let mut constrained = vec![false; ndofs];
            for f in mesh.boundary_facets() {
                constrained[f * nk..(f + 1) * nk].fill(true);
            }
            let space = FeSpace {
                kind: SpaceKind::Bdm,
                order: k,
                ndofs,
                cell_dofs,
                signs,
                facet_dofs: Vec::new(),
                constrained,
            };
            (space, Some(bdm))
        }
        Variant::FullHdg => {
            let per = 2 * pk.dim();
            let cell_dofs: Vec<Vec<usize>> = (0..nc).map(|c| (c * per..(c + 1) * per).collect()).collect();
            let space = FeSpace {
                kind: SpaceKind::VectorDg,
                order: k,
                ndofs: nc * per,
                signs: vec![vec![1.0; per]; nc],
                cell_dofs,
                facet_dofs: Vec::new(),
                constrained: vec![false; nc * per],
            };
            (space, None)
        }
    };

    let per_facet = match variant {
        Variant::HdivHdg => nk,
        Variant::FullHdg => 2 * nk,
    };
    let facet_dofs: Vec<Vec<usize>> = (0..nf).map(|f| (f * per_facet..(f + 1) * per_facet).collect()).collect();
    let mut constrained = vec![false; nf * per_facet];
    for f in mesh.boundary_facets() {
        constrained[f * per_facet..(f + 1) * per_facet].fill(true);
    }
    let trace = FeSpace {
        kind: if variant == Variant::HdivHdg { SpaceKind::TangentialTrace } else { SpaceKind::VectorTrace },
        order: k,
        ndofs: nf * per_facet,
        cell_dofs: Vec::new(),
        signs: Vec::new(),
        facet_dofs,
        constrained,
    };

    let nq = pk1.dim();
    let density = FeSpace {
        kind: SpaceKind::ScalarDg,
        order: k - 1,
        ndofs: nc * nq,
        cell_dofs: (0..nc).map(|c| (c * nq..(c + 1) * nq).collect()).collect(),
        signs: vec![vec![1.0; nq]; nc],
        facet_dofs: Vec::new(),
        constrained: vec![false; nc * nq],
    };
    let maps = (0..nc).map(|c| AffineMap::new(mesh.cell_vertices(c))).collect();
    log::debug!(
        "{variant} k={k}: {} cell velocity dofs, {} facet dofs, {} density dofs",
        velocity.ndofs,
        trace.ndofs,
        density.ndofs
    );
    Ok(Spaces { mesh, k, variant, velocity, trace, density, bdm, pk, pk1, seg, maps })
}

impl Spaces {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<Mesh> {
        self.mesh.clone()
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn map(&self, c: usize) -> &AffineMap {
        &self.maps[c]
    }

    /// Length of the combined velocity vector (cell space then facet space).
    pub fn num_velocity(&self) -> usize {
        self.velocity.ndofs + self.trace.ndofs
    }

    pub fn trace_offset(&self) -> usize {
        self.velocity.ndofs
    }

    /// Constraint mask over the combined velocity vector.
    pub fn velocity_constrained(&self) -> Vec<bool> {
        let mut m = self.velocity.constrained.clone();
        m.extend_from_slice(&self.trace.constrained);
        m
    }

    pub fn num_density(&self) -> usize {
        self.density.ndofs
    }

    pub fn default_quadrature_degree(&self) -> usize {
        2 * self.k + 4
    }

    pub fn tables(&self, degree: usize) -> Result<RefTables, SpaceError> {
        RefTables::new(self, degree)
    }

    pub(crate) fn bdm(&self) -> Option<&BdmBasis> {
        self.bdm.as_ref()
    }

    pub(crate) fn pk(&self) -> &ScalarBasis {
        &self.pk
    }

    pub(crate) fn pk1(&self) -> &ScalarBasis {
        &self.pk1
    }

    pub(crate) fn seg(&self) -> &SegmentBasis {
        &self.seg
    }

    /// Interpolates a velocity field into the combined vector: canonical
    /// moments (BDM) or L2 projection (vector DG) in cells, L2 projection of
    /// the tangential (or full) trace on facets.
    pub fn interpolate_velocity(&self, u: &dyn Fn(Point) -> Point) -> Vec<f64> {
        let mut out = vec![0.0; self.num_velocity()];
        let deg = self.default_quadrature_degree();
        let qt = quadrature(Element::Triangle, deg).expect("supported degree");
        for c in 0..self.mesh.num_cells() {
            let map = &self.maps[c];
            let dofs = &self.velocity.cell_dofs[c];
            match &self.bdm {
                Some(bdm) => {
                    let pulled = |xh: [f64; 2]| map.piola_inverse(u(map.map(xh)));
                    let local = bdm.interpolate(&pulled);
                    for (i, &g) in dofs.iter().enumerate() {
                        out[g] = self.velocity.signs[c][i] * local[i];
                    }
                }
                None => {
                    let np = self.pk.dim();
                    for (xh, w) in qt.iter() {
                        let val = u(map.map(xh));
                        let (phi, _) = self.pk.eval(xh);
                        for i in 0..np {
                            out[dofs[i]] += w * val[0] * phi[i];
                            out[dofs[np + i]] += w * val[1] * phi[i];
                        }
                    }
                }
            }
        }
        self.project_trace(u, &mut out);
        out
    }

    fn project_trace(&self, u: &dyn Fn(Point) -> Point, out: &mut [f64]) {
        let off = self.trace_offset();
        let nk = self.k + 1;
        let qs = quadrature(Element::Segment, self.default_quadrature_degree()).expect("supported degree");
        for f in 0..self.mesh.num_facets() {
            let [a, b] = self.mesh.facets()[f].map(|v| self.mesh.vertices()[v]);
            let tan = self.mesh.facet_tangent(f);
            let dofs = &self.trace.facet_dofs[f];
            for (p, w) in qs.iter() {
                let t = p[0];
                let val = u([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                let l = self.seg.eval(t);
                for j in 0..nk {
                    match self.variant {
                        Variant::HdivHdg => out[off + dofs[j]] += w * (val[0] * tan[0] + val[1] * tan[1]) * l[j],
                        Variant::FullHdg => {
                            out[off + dofs[j]] += w * val[0] * l[j];
                            out[off + dofs[nk + j]] += w * val[1] * l[j];
                        }
                    }
                }
            }
        }
    }

    /// Values of the interpolant on constrained dofs, as `(index, value)`.
    pub fn boundary_values(&self, u: &dyn Fn(Point) -> Point) -> Vec<(usize, f64)> {
        let full = self.interpolate_velocity(u);
        self.velocity_constrained()
            .iter()
            .enumerate()
            .filter(|(_, c)| **c)
            .map(|(i, _)| (i, full[i]))
            .collect()
    }

    /// Cellwise L2 projection onto discontinuous `P_{k-1}`.
    pub fn l2_project_density(&self, q: &dyn Fn(Point) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_density()];
        let qt = quadrature(Element::Triangle, self.default_quadrature_degree()).expect("supported degree");
        for c in 0..self.mesh.num_cells() {
            let map = &self.maps[c];
            let scale = map.det().sqrt();
            for (xh, w) in qt.iter() {
                let val = q(map.map(xh));
                let (psi, _) = self.pk1.eval(xh);
                for (i, &g) in self.density.cell_dofs[c].iter().enumerate() {
                    out[g] += w * scale * val * psi[i];
                }
            }
        }
        out
    }

    /// `(rho_h, 1)`.
    pub fn density_mass(&self, rho: &[f64]) -> f64 {
        // only the constant mode has nonzero mean: int psi_0 = sqrt(|T|)
        let psi0 = self.pk1.eval([1.0 / 3.0, 1.0 / 3.0]).0[0] * 0.5;
        (0..self.mesh.num_cells())
            .map(|c| rho[self.density.cell_dofs[c][0]] * psi0 * self.maps[c].det().sqrt())
            .sum()
    }

    /// Density coefficients of the constant function `value`.
    pub fn constant_density(&self, value: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_density()];
        let psi0 = self.pk1.eval([1.0 / 3.0, 1.0 / 3.0]).0[0];
        for c in 0..self.mesh.num_cells() {
            out[self.density.cell_dofs[c][0]] = value * self.maps[c].det().sqrt() / psi0;
        }
        out
    }

    /// Density value at reference point `xh` of cell `c`.
    pub fn eval_density(&self, rho: &[f64], c: usize, xh: [f64; 2]) -> f64 {
        let (psi, _) = self.pk1.eval(xh);
        let s = 1.0 / self.maps[c].det().sqrt();
        self.density.cell_dofs[c].iter().zip(&psi).map(|(&g, p)| rho[g] * p * s).sum()
    }

    /// Cell velocity and its gradient at reference point `xh` of cell `c`.
    pub fn eval_velocity(&self, u: &[f64], c: usize, xh: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let map = &self.maps[c];
        let (vals, grads) = frames::reference_velocity(self, xh);
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for (i, &dof) in self.velocity.cell_dofs[c].iter().enumerate() {
            let coef = u[dof] * self.velocity.signs[c][i];
            let (pv, pg) = frames::map_velocity(self.variant, map, vals[i], grads[i]);
            for r in 0..2 {
                v[r] += coef * pv[r];
                for s in 0..2 {
                    g[r][s] += coef * pg[r][s];
                }
            }
        }
        (v, g)
    }

    /// Facet unknown at global parameter `t` of facet `f` (a vector; tangential
    /// for the H(div) variant).
    pub fn eval_trace(&self, u: &[f64], f: usize, t: f64) -> [f64; 2] {
        let off = self.trace_offset();
        let l = self.seg.eval(t);
        let nk = self.k + 1;
        let dofs = &self.trace.facet_dofs[f];
        match self.variant {
            Variant::HdivHdg => {
                let tan = self.mesh.facet_tangent(f);
                let s: f64 = (0..nk).map(|j| u[off + dofs[j]] * l[j]).sum();
                [s * tan[0], s * tan[1]]
            }
            Variant::FullHdg => [
                (0..nk).map(|j| u[off + dofs[j]] * l[j]).sum(),
                (0..nk).map(|j| u[off + dofs[nk + j]] * l[j]).sum(),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_unit_square, Mesh};

    fn single_triangle() -> Arc<Mesh> {
        Arc::new(Mesh::from_cells(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], |_, _, _| "wall".into()).unwrap())
    }

    #[test]
    fn single_triangle_dof_counts() {
        let s = build_spaces(single_triangle(), 1, Variant::HdivHdg).unwrap();
        assert_eq!(s.velocity.ndofs, 6);
        assert_eq!(s.trace.facet_dofs[0].len(), 2);
        assert_eq!(s.density.ndofs, 1);
        assert_eq!(s.trace.num_free(), 0);
        assert_eq!(s.velocity.num_free(), 0);

        let s = build_spaces(single_triangle(), 1, Variant::FullHdg).unwrap();
        assert_eq!(s.velocity.cell_dofs[0].len(), 6);
        assert_eq!(s.trace.facet_dofs[0].len(), 4);
        assert_eq!(s.velocity.num_free(), 6);
    }

    #[test]
    fn density_space_on_base_mesh() {
        let s = build_spaces(Arc::new(build_unit_square(0)), 1, Variant::HdivHdg).unwrap();
        assert_eq!(s.num_density(), 96);
        assert!(build_spaces(Arc::new(build_unit_square(0)), 4, Variant::HdivHdg).is_err());
    }

    #[test]
    fn linear_field_interpolated_exactly() {
        let mesh = Arc::new(build_unit_square(0));
        for variant in [Variant::HdivHdg, Variant::FullHdg] {
            for k in 1..=3 {
                let s = build_spaces(mesh.clone(), k, variant).unwrap();
                let u = |x: Point| [-x[1], x[0]];
                let coef = s.interpolate_velocity(&u);
                for c in [0, 17, 95] {
                    for xh in [[0.2, 0.3], [0.6, 0.1]] {
                        let x = s.map(c).map(xh);
                        let (v, g) = s.eval_velocity(&coef, c, xh);
                        assert!((v[0] + x[1]).abs() < 1e-12 && (v[1] - x[0]).abs() < 1e-12);
                        assert!((g[0][1] + 1.0).abs() < 1e-10 && (g[1][0] - 1.0).abs() < 1e-10);
                    }
                }
                for f in [0, 10, 100] {
                    let [a, b] = mesh.facets()[f].map(|v| mesh.vertices()[v]);
                    let t = 0.3;
                    let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    let tr = s.eval_trace(&coef, f, t);
                    let exact = match variant {
                        Variant::HdivHdg => {
                            let tan = mesh.facet_tangent(f);
                            let ut = -x[1] * tan[0] + x[0] * tan[1];
                            [ut * tan[0], ut * tan[1]]
                        }
                        Variant::FullHdg => [-x[1], x[0]],
                    };
                    assert!((tr[0] - exact[0]).abs() < 1e-12 && (tr[1] - exact[1]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_field_gives_zero_coefficients() {
        let s = build_spaces(Arc::new(build_unit_square(0)), 2, Variant::HdivHdg).unwrap();
        assert!(s.interpolate_velocity(&|_| [0.0, 0.0]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn density_projection() {
        let mesh = Arc::new(build_unit_square(0));
        let s = build_spaces(mesh.clone(), 1, Variant::HdivHdg).unwrap();
        let one = s.l2_project_density(&|_| 1.0);
        let ones = s.constant_density(1.0);
        for (a, b) in one.iter().zip(&ones) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((s.density_mass(&one) - 1.0).abs() < 1e-14);
        let q = s.l2_project_density(&|x| x[0]);
        for c in 0..mesh.num_cells() {
            let v = mesh.cell_vertices(c);
            let cx = (v[0][0] + v[1][0] + v[2][0]) / 3.0;
            assert!((s.eval_density(&q, c, [0.3, 0.3]) - cx).abs() < 1e-14);
        }
        let s3 = build_spaces(mesh, 3, Variant::FullHdg).unwrap();
        let q = s3.l2_project_density(&|x| 1.0 + x[0] * x[1] - x[1] * x[1]);
        let x = s3.map(5).map([0.1, 0.7]);
        assert!((s3.eval_density(&q, 5, [0.1, 0.7]) - (1.0 + x[0] * x[1] - x[1] * x[1])).abs() < 1e-12);
    }

    fn l2_errors(k: usize, level: usize, u: &dyn Fn(Point) -> Point, q: &dyn Fn(Point) -> f64) -> (f64, f64) {
        let mesh = Arc::new(build_unit_square(level));
        let s = build_spaces(mesh.clone(), k, Variant::HdivHdg).unwrap();
        let coef = s.interpolate_velocity(u);
        let rho = s.l2_project_density(q);
        let rule = quadrature(Element::Triangle, 2 * k + 4).unwrap();
        let (mut eu, mut eq) = (0.0, 0.0);
        for c in 0..mesh.num_cells() {
            let det = s.map(c).det();
            for (xh, w) in rule.iter() {
                let x = s.map(c).map(xh);
                let (v, _) = s.eval_velocity(&coef, c, xh);
                let ex = u(x);
                eu += w * det * ((v[0] - ex[0]).powi(2) + (v[1] - ex[1]).powi(2));
                eq += w * det * (s.eval_density(&rho, c, xh) - q(x)).powi(2);
            }
        }
        (eu.sqrt(), eq.sqrt())
    }

    #[test]
    fn interpolation_rates() {
        let rho = |x: Point| (-x[1].powi(3) / 3.0).exp();
        let u = |x: Point| {
            let (px, py) = (x[0] * x[0] * (1.0 - x[0]).powi(2), x[1] * x[1] * (1.0 - x[1]).powi(2));
            let (dpx, dpy) = (2.0 * x[0] - 6.0 * x[0].powi(2) + 4.0 * x[0].powi(3), 2.0 * x[1] - 6.0 * x[1].powi(2) + 4.0 * x[1].powi(3));
            let r = rho(x);
            [-100.0 * px * dpy / r, 100.0 * dpx * py / r]
        };
        let (e0, _) = l2_errors(2, 0, &u, &rho);
        let (e1, _) = l2_errors(2, 1, &u, &rho);
        let eoc = (e0 / e1).log2();
        assert!((eoc - 3.0).abs() < 0.3, "velocity interpolation EOC {eoc}");
        let (_, q0) = l2_errors(1, 1, &u, &rho);
        let (_, q1) = l2_errors(1, 2, &u, &rho);
        let eoc = (q0 / q1).log2();
        assert!((eoc - 1.0).abs() < 0.15, "density projection EOC {eoc}");
    }
}
