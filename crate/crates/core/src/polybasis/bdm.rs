//! Brezzi-Douglas-Marini elements on the reference triangle.
//!
//! Degrees of freedom, in order:
//! - for each local edge `e` and `j = 0..=k`: `int_e v . n_e L_j(t) ds`,
//!   with `L_j` the orthonormal Legendre basis along the edge parameter;
//! - interior moments `int_T v . w` for `w` in the first-kind Nedelec space of
//!   order `k - 1`, i.e. `P_{k-2}^2 + (-y, x) * homogeneous P_{k-2}`.
//!
//! Facet moments are invariant under the contravariant Piola map, so gluing
//! neighbours is a pure dof identification (up to the edge orientation).

use nalgebra::DMatrix;

use super::scalar::eval_monomials;
use super::{monomial_exponents, quadrature, ref_edge_length, ref_edge_normal, ref_edge_point, BasisError, Element, SegmentBasis, MAX_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdmDof {
    Facet { edge: usize, moment: usize },
    Interior(usize),
}

/// Values, gradients (`grad[i][j] = d v_i / d x_j`) and divergences of a
/// vector basis, indexed `[point][function]`.
#[derive(Debug, Clone)]
pub struct VectorTable {
    pub values: Vec<Vec<[f64; 2]>>,
    pub grads: Vec<Vec<[[f64; 2]; 2]>>,
    pub divs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct BdmBasis {
    order: usize,
    exponents: Vec<(u32, u32)>,
    // coeffs[i][b]: weight of vector monomial b in basis function i; vector
    // monomial b < m is (x^a y^c, 0), otherwise (0, x^a y^c)
    coeffs: Vec<Vec<f64>>,
    dofs: Vec<BdmDof>,
}

/// Test functions of the interior moments.
fn interior_test_space(k: usize) -> Vec<Box<dyn Fn([f64; 2]) -> [f64; 2]>> {
    let mut out: Vec<Box<dyn Fn([f64; 2]) -> [f64; 2]>> = Vec::new();
    if k < 2 {
        return out;
    }
    let low = monomial_exponents(k - 2);
    let mono = |a: u32, b: u32| move |p: [f64; 2]| p[0].powi(a as i32) * p[1].powi(b as i32);
    for &(a, b) in &low {
        let m = mono(a, b);
        out.push(Box::new(move |p| [m(p), 0.0]));
    }
    for &(a, b) in &low {
        let m = mono(a, b);
        out.push(Box::new(move |p| [0.0, m(p)]));
    }
    for &(a, b) in low.iter().filter(|(a, b)| (a + b) as usize == k - 2) {
        let m = mono(a, b);
        out.push(Box::new(move |p| [-p[1] * m(p), p[0] * m(p)]));
    }
    out
}

impl BdmBasis {
    pub fn new(k: usize) -> Result<Self, BasisError> {
        if !(1..=MAX_ORDER).contains(&k) {
            return Err(BasisError::UnsupportedOrder(k));
        }
        let exponents = monomial_exponents(k);
        let nm = exponents.len();
        let n = 2 * nm;
        let mut dofs = Vec::with_capacity(n);
        for edge in 0..3 {
            for moment in 0..=k {
                dofs.push(BdmDof::Facet { edge, moment });
            }
        }
        let tests = interior_test_space(k);
        dofs.extend((0..tests.len()).map(BdmDof::Interior));
        assert_eq!(dofs.len(), n);

        let unit = |b: usize, p: [f64; 2]| -> [f64; 2] {
            let v = eval_monomials(&exponents[b % nm..=b % nm], p).0[0];
            if b < nm {
                [v, 0.0]
            } else {
                [0.0, v]
            }
        };
        let raw = Self { order: k, exponents: exponents.clone(), coeffs: Vec::new(), dofs: dofs.clone() };
        let mut d = DMatrix::zeros(n, n);
        for b in 0..n {
            let col = raw.apply_dofs(&|p| unit(b, p), &tests);
            for r in 0..n {
                d[(r, b)] = col[r];
            }
        }
        let inv = d.try_inverse().ok_or(BasisError::UnsupportedOrder(k))?;
        let coeffs = (0..n).map(|i| (0..n).map(|b| inv[(b, i)]).collect()).collect();
        Ok(Self { order: k, exponents, coeffs, dofs })
    }

    fn apply_dofs(&self, f: &dyn Fn([f64; 2]) -> [f64; 2], tests: &[Box<dyn Fn([f64; 2]) -> [f64; 2]>]) -> Vec<f64> {
        let k = self.order;
        let seg = SegmentBasis::new(k).expect("order checked");
        let qs = quadrature(Element::Segment, 2 * k + 2).expect("low degree");
        let qt = quadrature(Element::Triangle, 2 * k + 2).expect("low degree");
        let mut out = Vec::with_capacity(self.dofs.len());
        for dof in &self.dofs {
            let val = match *dof {
                BdmDof::Facet { edge, moment } => {
                    let nrm = ref_edge_normal(edge);
                    ref_edge_length(edge)
                        * qs.iter()
                            .map(|(p, w)| {
                                let v = f(ref_edge_point(edge, p[0]));
                                w * (v[0] * nrm[0] + v[1] * nrm[1]) * seg.eval(p[0])[moment]
                            })
                            .sum::<f64>()
                }
                BdmDof::Interior(i) => qt
                    .iter()
                    .map(|(p, w)| {
                        let (v, t) = (f(p), tests[i](p));
                        w * (v[0] * t[0] + v[1] * t[1])
                    })
                    .sum(),
            };
            out.push(val);
        }
        out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dofs.len()
    }

    pub fn dofs(&self) -> &[BdmDof] {
        &self.dofs
    }

    pub fn num_facet_dofs(&self) -> usize {
        self.order + 1
    }

    pub fn num_interior_dofs(&self) -> usize {
        self.dim() - 3 * self.num_facet_dofs()
    }

    /// Local index of facet moment `j` on edge `e`.
    pub fn facet_dof(&self, e: usize, j: usize) -> usize {
        e * (self.order + 1) + j
    }

    pub fn eval(&self, p: [f64; 2]) -> (Vec<[f64; 2]>, Vec<[[f64; 2]; 2]>) {
        let nm = self.exponents.len();
        let (mv, mg) = eval_monomials(&self.exponents, p);
        let mut vals = vec![[0.0; 2]; self.dim()];
        let mut grads = vec![[[0.0; 2]; 2]; self.dim()];
        for (i, row) in self.coeffs.iter().enumerate() {
            for (b, &c) in row.iter().enumerate() {
                let (comp, m) = (b / nm, b % nm);
                vals[i][comp] += c * mv[m];
                grads[i][comp][0] += c * mg[m][0];
                grads[i][comp][1] += c * mg[m][1];
            }
        }
        (vals, grads)
    }

    pub fn tabulate(&self, points: &[[f64; 2]]) -> VectorTable {
        let mut values = Vec::with_capacity(points.len());
        let mut grads = Vec::with_capacity(points.len());
        let mut divs = Vec::with_capacity(points.len());
        for &p in points {
            let (v, g) = self.eval(p);
            divs.push(g.iter().map(|g| g[0][0] + g[1][1]).collect());
            values.push(v);
            grads.push(g);
        }
        VectorTable { values, grads, divs }
    }

    /// Canonical interpolant of a reference-domain field.
    pub fn interpolate(&self, f: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        self.apply_dofs(f, &interior_test_space(self.order))
    }
}

/// BDM basis of order `k` tabulated at reference `points`.
pub fn eval_bdm_basis(k: usize, points: &[[f64; 2]]) -> Result<VectorTable, BasisError> {
    Ok(BdmBasis::new(k)?.tabulate(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::AffineMap;

    #[test]
    fn dimensions() {
        assert_eq!(BdmBasis::new(1).unwrap().dim(), 6);
        assert_eq!(BdmBasis::new(2).unwrap().dim(), 12);
        assert_eq!(BdmBasis::new(3).unwrap().dim(), 20);
        assert_eq!(BdmBasis::new(3).unwrap().num_interior_dofs(), 8);
        assert!(BdmBasis::new(0).is_err());
        assert!(BdmBasis::new(4).is_err());
    }

    #[test]
    fn dofs_are_dual_to_basis() {
        for k in 1..=3 {
            let b = BdmBasis::new(k).unwrap();
            for i in 0..b.dim() {
                let dofs = b.interpolate(&|p| b.eval(p).0[i]);
                for (j, d) in dofs.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-11, "k={k} dof {j} of fn {i}: {d}");
                }
            }
        }
    }

    #[test]
    fn lowest_order_divergence_is_constant() {
        let b = BdmBasis::new(1).unwrap();
        let t = b.tabulate(&[[0.1, 0.1], [0.7, 0.2], [0.2, 0.5]]);
        for i in 0..b.dim() {
            assert!((t.divs[0][i] - t.divs[1][i]).abs() < 1e-12);
            assert!((t.divs[0][i] - t.divs[2][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolates_linear_field_exactly() {
        let b = BdmBasis::new(1).unwrap();
        let c = b.interpolate(&|p| p);
        for p in [[0.2, 0.3], [0.6, 0.1], [0.0, 0.9]] {
            let (v, g) = b.eval(p);
            let mut u = [0.0; 2];
            let mut div = 0.0;
            for i in 0..b.dim() {
                u[0] += c[i] * v[i][0];
                u[1] += c[i] * v[i][1];
                div += c[i] * (g[i][0][0] + g[i][1][1]);
            }
            assert!((u[0] - p[0]).abs() < 1e-13 && (u[1] - p[1]).abs() < 1e-13);
            assert!((div - 2.0).abs() < 1e-12);
        }
    }

    // two physical triangles sharing the edge from a to b
    #[test]
    fn piola_normal_traces_agree_across_shared_edge() {
        let (a, b, c, d) = ([0.1, 0.2], [0.9, 0.4], [0.3, 1.1], [0.8, -0.5]);
        // left cell [c, a, b]: edge 0 runs a -> b; right cell [d, b, a]: edge 0 runs b -> a
        let (ml, mr) = (AffineMap::new([c, a, b]), AffineMap::new([d, b, a]));
        let n = {
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            [(b[1] - a[1]) / len, -(b[0] - a[0]) / len]
        };
        for k in 1..=3 {
            let basis = BdmBasis::new(k).unwrap();
            for j in 0..=k {
                let (il, ir) = (basis.facet_dof(0, j), basis.facet_dof(0, j));
                let sign = -SegmentBasis::reversal_sign(j);
                for t in [0.1, 0.45, 0.8] {
                    let vl = ml.piola(basis.eval(ref_edge_point(0, t)).0[il]);
                    let vr = mr.piola(basis.eval(ref_edge_point(0, 1.0 - t)).0[ir]);
                    let fl = vl[0] * n[0] + vl[1] * n[1];
                    let fr = sign * (vr[0] * n[0] + vr[1] * n[1]);
                    assert!((fl - fr).abs() < 1e-12, "k={k} j={j}: {fl} vs {fr}");
                }
            }
        }
    }

    #[test]
    fn normal_trace_vanishes_off_own_edge() {
        let basis = BdmBasis::new(3).unwrap();
        for (i, dof) in basis.dofs().iter().enumerate() {
            for e in 0..3 {
                if matches!(dof, BdmDof::Facet { edge, .. } if *edge == e) {
                    continue;
                }
                let n = ref_edge_normal(e);
                for t in [0.0, 0.3, 0.71, 1.0] {
                    let v = basis.eval(ref_edge_point(e, t)).0[i];
                    assert!((v[0] * n[0] + v[1] * n[1]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn piola_divergence_matches_finite_differences() {
        let m = AffineMap::new([[0.2, 0.1], [1.1, 0.3], [0.4, 0.8]]);
        let basis = BdmBasis::new(2).unwrap();
        let field = |x: [f64; 2], i: usize| m.piola(basis.eval(m.pull_back(x)).0[i]);
        let x = m.map([0.3, 0.25]);
        let h = 1e-5;
        let (_, g) = basis.eval([0.3, 0.25]);
        for i in 0..basis.dim() {
            let dx = (field([x[0] + h, x[1]], i)[0] - field([x[0] - h, x[1]], i)[0]) / (2.0 * h);
            let dy = (field([x[0], x[1] + h], i)[1] - field([x[0], x[1] - h], i)[1]) / (2.0 * h);
            let div = m.piola_div(g[i][0][0] + g[i][1][1]);
            assert!((dx + dy - div).abs() < 1e-8, "fn {i}");
            let pg = m.piola_grad(g[i]);
            assert!((pg[0][0] + pg[1][1] - div).abs() < 1e-10);
        }
    }
}
