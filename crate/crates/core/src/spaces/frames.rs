//! Basis functions tabulated on reference quadrature points and mapped to
//! physical cells and cell edges.

use crate::mesh::Point;
use crate::polybasis::{quadrature, ref_edge_point, AffineMap, Element, QuadratureRule, ScalarTable};

use super::{SpaceError, Spaces, Variant};

type Mat2 = [[f64; 2]; 2];

/// Reference values and gradients of the cell velocity basis at `xh`.
pub(crate) fn reference_velocity(spaces: &Spaces, xh: [f64; 2]) -> (Vec<[f64; 2]>, Vec<Mat2>) {
    match spaces.bdm() {
        Some(bdm) => bdm.eval(xh),
        None => {
            let (v, g) = spaces.pk().eval(xh);
            let np = v.len();
            let mut vals = vec![[0.0; 2]; 2 * np];
            let mut grads = vec![[[0.0; 2]; 2]; 2 * np];
            for i in 0..np {
                vals[i][0] = v[i];
                vals[np + i][1] = v[i];
                grads[i][0] = g[i];
                grads[np + i][1] = g[i];
            }
            (vals, grads)
        }
    }
}

/// Maps a reference velocity value and gradient to the physical cell:
/// contravariant Piola for BDM, plain composition for vector DG.
pub(crate) fn map_velocity(variant: Variant, map: &AffineMap, v: [f64; 2], g: Mat2) -> ([f64; 2], Mat2) {
    match variant {
        Variant::HdivHdg => (map.piola(v), map.piola_grad(g)),
        Variant::FullHdg => (v, [map.scalar_grad(g[0]), map.scalar_grad(g[1])]),
    }
}

#[derive(Debug, Clone)]
struct VelocityRef {
    values: Vec<Vec<[f64; 2]>>,
    grads: Vec<Vec<Mat2>>,
}

impl VelocityRef {
    fn new(spaces: &Spaces, points: &[[f64; 2]]) -> Self {
        let (values, grads) = points.iter().map(|&p| reference_velocity(spaces, p)).unzip();
        Self { values, grads }
    }
}

/// Reference tabulations for one quadrature degree. Edge tables exist for both
/// traversal directions so that edge frames can be ordered along the facet.
#[derive(Debug, Clone)]
pub struct RefTables {
    pub degree: usize,
    pub cell_rule: QuadratureRule,
    pub seg_rule: QuadratureRule,
    cell_vel: VelocityRef,
    cell_rho: ScalarTable,
    edge_vel: [[VelocityRef; 2]; 3],
    edge_rho: [[ScalarTable; 2]; 3],
    seg: Vec<Vec<f64>>,
}

impl RefTables {
    pub fn new(spaces: &Spaces, degree: usize) -> Result<Self, SpaceError> {
        let cell_rule = quadrature(Element::Triangle, degree)?;
        let seg_rule = quadrature(Element::Segment, degree)?;
        let edge_points = |e: usize, rev: bool| -> Vec<[f64; 2]> {
            seg_rule.points.iter().map(|p| ref_edge_point(e, if rev { 1.0 - p[0] } else { p[0] })).collect()
        };
        let edge_vel = std::array::from_fn(|e| std::array::from_fn(|d| VelocityRef::new(spaces, &edge_points(e, d == 1))));
        let edge_rho = std::array::from_fn(|e| std::array::from_fn(|d| spaces.pk1().tabulate(&edge_points(e, d == 1))));
        Ok(Self {
            degree,
            cell_vel: VelocityRef::new(spaces, &cell_rule.points),
            cell_rho: spaces.pk1().tabulate(&cell_rule.points),
            edge_vel,
            edge_rho,
            seg: seg_rule.points.iter().map(|p| spaces.seg().eval(p[0])).collect(),
            cell_rule,
            seg_rule,
        })
    }
}

/// Physical quantities of the global basis functions supported on one cell,
/// at the cell quadrature points. Orientation signs are already applied.
#[derive(Debug, Clone)]
pub struct CellFrame {
    pub cell: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub vel: Vec<Vec<[f64; 2]>>,
    pub vel_grad: Vec<Vec<Mat2>>,
    pub vel_div: Vec<Vec<f64>>,
    pub vel_dofs: Vec<usize>,
    pub rho: Vec<Vec<f64>>,
    pub rho_grad: Vec<Vec<[f64; 2]>>,
    pub rho_dofs: Vec<usize>,
}

/// Local edge `edge` of `cell`, with quadrature points ordered along the
/// global facet parameter `t`. `normal` is the outward normal of the cell.
#[derive(Debug, Clone)]
pub struct EdgeFrame {
    pub cell: usize,
    pub edge: usize,
    pub facet: usize,
    pub is_left: bool,
    pub is_boundary: bool,
    pub normal: [f64; 2],
    pub length: f64,
    pub t: Vec<f64>,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub vel: Vec<Vec<[f64; 2]>>,
    pub vel_grad: Vec<Vec<Mat2>>,
    pub vel_dofs: Vec<usize>,
    pub rho: Vec<Vec<f64>>,
    pub rho_dofs: Vec<usize>,
    /// Facet basis values; `trace_dofs` index the combined velocity vector.
    pub trace: Vec<Vec<[f64; 2]>>,
    pub trace_dofs: Vec<usize>,
}

impl Spaces {
    fn mapped_velocity(&self, c: usize, r: &VelocityRef) -> (Vec<Vec<[f64; 2]>>, Vec<Vec<Mat2>>) {
        let map = self.map(c);
        let signs = &self.velocity.signs[c];
        let mut vals = Vec::with_capacity(r.values.len());
        let mut grads = Vec::with_capacity(r.values.len());
        for (vq, gq) in r.values.iter().zip(&r.grads) {
            let mut vrow = Vec::with_capacity(vq.len());
            let mut grow = Vec::with_capacity(vq.len());
            for i in 0..vq.len() {
                let (v, g) = map_velocity(self.variant(), map, vq[i], gq[i]);
                let s = signs[i];
                vrow.push([s * v[0], s * v[1]]);
                grow.push(g.map(|row| row.map(|x| s * x)));
            }
            vals.push(vrow);
            grads.push(grow);
        }
        (vals, grads)
    }

    pub fn cell_frame(&self, c: usize, tables: &RefTables) -> CellFrame {
        let map = self.map(c);
        let det = map.det();
        let (vel, vel_grad) = self.mapped_velocity(c, &tables.cell_vel);
        let vel_div = vel_grad.iter().map(|row| row.iter().map(|g| g[0][0] + g[1][1]).collect()).collect();
        let s = 1.0 / det.sqrt();
        let rho = tables.cell_rho.values.iter().map(|row| row.iter().map(|v| v * s).collect()).collect();
        let rho_grad = tables
            .cell_rho
            .grads
            .iter()
            .map(|row| row.iter().map(|g| map.scalar_grad(*g).map(|x| x * s)).collect())
            .collect();
        CellFrame {
            cell: c,
            points: tables.cell_rule.points.iter().map(|&p| map.map(p)).collect(),
            weights: tables.cell_rule.weights.iter().map(|w| w * det).collect(),
            vel,
            vel_grad,
            vel_div,
            vel_dofs: self.velocity.cell_dofs[c].clone(),
            rho,
            rho_grad,
            rho_dofs: self.density.cell_dofs[c].clone(),
        }
    }

    pub fn edge_frame(&self, c: usize, e: usize, tables: &RefTables) -> EdgeFrame {
        let mesh = self.mesh();
        let f = mesh.cell_facets(c)[e];
        let is_left = mesh.is_left(c, e);
        let dir = usize::from(!is_left);
        let nf = mesh.facet_normal(f);
        let sign = if is_left { 1.0 } else { -1.0 };
        let length = mesh.facet_length(f);
        let [a, b] = mesh.facets()[f].map(|v| mesh.vertices()[v]);
        let t: Vec<f64> = tables.seg_rule.points.iter().map(|p| p[0]).collect();
        let points = t.iter().map(|&t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]).collect();
        let (vel, vel_grad) = self.mapped_velocity(c, &tables.edge_vel[e][dir]);
        let s = 1.0 / self.map(c).det().sqrt();
        let rho = tables.edge_rho[e][dir].values.iter().map(|row| row.iter().map(|v| v * s).collect()).collect();

        let nk = self.order() + 1;
        let off = self.trace_offset();
        let tan = mesh.facet_tangent(f);
        let trace_dofs: Vec<usize> = self.trace.facet_dofs[f].iter().map(|d| off + d).collect();
        let trace = tables
            .seg
            .iter()
            .map(|l| match self.variant() {
                Variant::HdivHdg => (0..nk).map(|j| [l[j] * tan[0], l[j] * tan[1]]).collect(),
                Variant::FullHdg => (0..nk).map(|j| [l[j], 0.0]).chain((0..nk).map(|j| [0.0, l[j]])).collect(),
            })
            .collect();

        EdgeFrame {
            cell: c,
            edge: e,
            facet: f,
            is_left,
            is_boundary: mesh.is_boundary_facet(f),
            normal: [sign * nf[0], sign * nf[1]],
            length,
            t,
            points,
            weights: tables.seg_rule.weights.iter().map(|w| w * length).collect(),
            vel,
            vel_grad,
            vel_dofs: self.velocity.cell_dofs[c].clone(),
            rho,
            rho_dofs: self.density.cell_dofs[c].clone(),
            trace,
            trace_dofs,
        }
    }
}

impl CellFrame {
    pub fn velocity(&self, u: &[f64], q: usize) -> ([f64; 2], Mat2) {
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for (i, &d) in self.vel_dofs.iter().enumerate() {
            let c = u[d];
            v[0] += c * self.vel[q][i][0];
            v[1] += c * self.vel[q][i][1];
            for r in 0..2 {
                for s in 0..2 {
                    g[r][s] += c * self.vel_grad[q][i][r][s];
                }
            }
        }
        (v, g)
    }

    pub fn density(&self, rho: &[f64], q: usize) -> f64 {
        self.rho_dofs.iter().enumerate().map(|(i, &d)| rho[d] * self.rho[q][i]).sum()
    }
}

impl EdgeFrame {
    pub fn velocity(&self, u: &[f64], q: usize) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (i, &d) in self.vel_dofs.iter().enumerate() {
            v[0] += u[d] * self.vel[q][i][0];
            v[1] += u[d] * self.vel[q][i][1];
        }
        v
    }

    pub fn trace_value(&self, u: &[f64], q: usize) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (j, &d) in self.trace_dofs.iter().enumerate() {
            v[0] += u[d] * self.trace[q][j][0];
            v[1] += u[d] * self.trace[q][j][1];
        }
        v
    }

    pub fn density(&self, rho: &[f64], q: usize) -> f64 {
        self.rho_dofs.iter().enumerate().map(|(i, &d)| rho[d] * self.rho[q][i]).sum()
    }
}

impl Spaces {
    /// Minimum and maximum of a density field over the cell quadrature points
    /// of `tables`.
    pub fn density_range(&self, rho: &[f64], tables: &RefTables) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in 0..self.mesh().num_cells() {
            let s = 1.0 / self.map(c).det().sqrt();
            let dofs = &self.density.cell_dofs[c];
            for row in &tables.cell_rho.values {
                let v: f64 = dofs.iter().zip(row).map(|(&d, p)| rho[d] * p).sum::<f64>() * s;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}
