//! Scalar polynomial bases of total degree `k` on the reference triangle.

use nalgebra::DMatrix;

use super::{quadrature, BasisError, Element, MAX_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarFamily {
    /// L2-orthonormal on the reference triangle.
    Orthonormal,
    /// Nodal basis on the equispaced lattice (centroid for `k = 0`).
    Lagrange,
}

/// Values `[point][function]` and gradients of a scalar basis.
#[derive(Debug, Clone)]
pub struct ScalarTable {
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone)]
pub struct ScalarBasis {
    order: usize,
    family: ScalarFamily,
    exponents: Vec<(u32, u32)>,
    // monomials are taken in `x - shift`
    shift: [f64; 2],
    // coeffs[i][m]: weight of monomial m in basis function i
    coeffs: Vec<Vec<f64>>,
}

/// Exponents `(a, b)` of `x^a y^b`, ordered by total degree.
pub fn monomial_exponents(k: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity((k + 1) * (k + 2) / 2);
    for d in 0..=k as u32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

pub(crate) fn eval_monomials(exponents: &[(u32, u32)], p: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let pw = |x: f64, a: u32| if a == 0 { 1.0 } else { x.powi(a as i32) };
    let mut vals = Vec::with_capacity(exponents.len());
    let mut grads = Vec::with_capacity(exponents.len());
    for &(a, b) in exponents {
        let (xa, yb) = (pw(p[0], a), pw(p[1], b));
        vals.push(xa * yb);
        let dx = if a == 0 { 0.0 } else { a as f64 * pw(p[0], a - 1) * yb };
        let dy = if b == 0 { 0.0 } else { b as f64 * xa * pw(p[1], b - 1) };
        grads.push([dx, dy]);
    }
    (vals, grads)
}

impl ScalarBasis {
    pub fn new(k: usize, family: ScalarFamily) -> Result<Self, BasisError> {
        if k > MAX_ORDER {
            return Err(BasisError::UnsupportedOrder(k));
        }
        let exponents = monomial_exponents(k);
        let n = exponents.len();
        let centroid = [1.0 / 3.0, 1.0 / 3.0];
        let (shift, coeffs) = match family {
            ScalarFamily::Orthonormal => {
                let q = quadrature(Element::Triangle, 2 * k).expect("low degree");
                let mut gram = DMatrix::<f64>::zeros(n, n);
                for (p, w) in q.iter() {
                    let (v, _) = eval_monomials(&exponents, [p[0] - centroid[0], p[1] - centroid[1]]);
                    gram += w * DMatrix::from_fn(n, n, |i, j| v[i] * v[j]);
                }
                let mut c = DMatrix::<f64>::identity(n, n);
                for _ in 0..2 {
                    let g = &c * &gram * c.transpose();
                    let l = g.cholesky().expect("Gram matrix is SPD").unpack();
                    c = l.try_inverse().expect("triangular factor is invertible") * c;
                }
                (centroid, (0..n).map(|i| (0..n).map(|m| c[(i, m)]).collect()).collect())
            }
            ScalarFamily::Lagrange => {
                let nodes = lagrange_nodes(k);
                let vdm = DMatrix::from_fn(n, n, |r, m| eval_monomials(&exponents[m..=m], nodes[r]).0[0]);
                let inv = vdm.try_inverse().expect("unisolvent lattice");
                ([0.0; 2], (0..n).map(|i| (0..n).map(|m| inv[(m, i)]).collect()).collect())
            }
        };
        Ok(Self { order: k, family, exponents, shift, coeffs })
    }

    pub fn orthonormal(k: usize) -> Result<Self, BasisError> {
        Self::new(k, ScalarFamily::Orthonormal)
    }

    pub fn lagrange(k: usize) -> Result<Self, BasisError> {
        Self::new(k, ScalarFamily::Lagrange)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn family(&self) -> ScalarFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn eval(&self, p: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let (mv, mg) = eval_monomials(&self.exponents, [p[0] - self.shift[0], p[1] - self.shift[1]]);
        let mut vals = vec![0.0; self.dim()];
        let mut grads = vec![[0.0; 2]; self.dim()];
        for (i, row) in self.coeffs.iter().enumerate() {
            for (m, &c) in row.iter().enumerate() {
                vals[i] += c * mv[m];
                grads[i][0] += c * mg[m][0];
                grads[i][1] += c * mg[m][1];
            }
        }
        (vals, grads)
    }

    pub fn tabulate(&self, points: &[[f64; 2]]) -> ScalarTable {
        let (values, grads) = points.iter().map(|&p| self.eval(p)).unzip();
        ScalarTable { values, grads }
    }
}

fn lagrange_nodes(k: usize) -> Vec<[f64; 2]> {
    if k == 0 {
        return vec![[1.0 / 3.0, 1.0 / 3.0]];
    }
    let mut nodes = Vec::new();
    for j in 0..=k {
        for i in 0..=k - j {
            nodes.push([i as f64 / k as f64, j as f64 / k as f64]);
        }
    }
    // vertices first so that k = 1 is the barycentric basis in vertex order
    let vertex = |p: &[f64; 2]| p == &[0.0, 0.0] || p == &[1.0, 0.0] || p == &[0.0, 1.0];
    let (mut head, tail): (Vec<_>, Vec<_>) = nodes.into_iter().partition(vertex);
    head.extend(tail);
    head
}

/// Orthonormal scalar basis of order `k` tabulated at `points`.
pub fn eval_scalar_basis(k: usize, points: &[[f64; 2]]) -> Result<ScalarTable, BasisError> {
    Ok(ScalarBasis::orthonormal(k)?.tabulate(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::{quadrature, Element};
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_basis() {
        let b = ScalarBasis::lagrange(0).unwrap();
        let (v, g) = b.eval([0.2, 0.7]);
        assert_eq!(b.dim(), 1);
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert_eq!(g[0], [0.0, 0.0]);
    }

    #[test]
    fn linear_basis_is_identity_at_vertices() {
        let b = ScalarBasis::lagrange(1).unwrap();
        let t = b.tabulate(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((t.values[i][j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quadratic_partition_of_unity() {
        let b = ScalarBasis::lagrange(2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (u, v): (f64, f64) = (rng.random(), rng.random());
            let p = if u + v > 1.0 { [1.0 - u, 1.0 - v] } else { [u, v] };
            let (vals, grads) = b.eval(p);
            assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            let gx: f64 = grads.iter().map(|g| g[0]).sum();
            assert!(gx.abs() < 1e-12);
        }
    }

    #[test]
    fn orthonormal_mass_is_identity() {
        for k in 0..=3 {
            let b = ScalarBasis::orthonormal(k).unwrap();
            let q = quadrature(Element::Triangle, 2 * k).unwrap();
            let t = b.tabulate(&q.points);
            for i in 0..b.dim() {
                for j in 0..b.dim() {
                    let m: f64 = (0..q.len()).map(|p| q.weights[p] * t.values[p][i] * t.values[p][j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((m - want).abs() < 1e-13, "k={k} ({i},{j}) {m}");
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = ScalarBasis::orthonormal(3).unwrap();
        let p = [0.21, 0.33];
        let h = 1e-6;
        let (_, g) = b.eval(p);
        let (vxp, _) = b.eval([p[0] + h, p[1]]);
        let (vxm, _) = b.eval([p[0] - h, p[1]]);
        let (vyp, _) = b.eval([p[0], p[1] + h]);
        let (vym, _) = b.eval([p[0], p[1] - h]);
        for i in 0..b.dim() {
            assert!(((vxp[i] - vxm[i]) / (2.0 * h) - g[i][0]).abs() < 1e-6);
            assert!(((vyp[i] - vym[i]) / (2.0 * h) - g[i][1]).abs() < 1e-6);
        }
    }

    #[test]
    fn unsupported_order() {
        assert_eq!(ScalarBasis::orthonormal(4).unwrap_err(), BasisError::UnsupportedOrder(4));
        assert!(eval_scalar_basis(5, &[[0.0, 0.0]]).is_err());
    }
}
