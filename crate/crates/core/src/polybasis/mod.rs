//! Reference-element bases and quadrature.
//!
//! The reference triangle has vertices `(0,0), (1,0), (0,1)`. Local edge `e`
//! is opposite vertex `e` and is parametrised by `t in [0, 1]` from vertex
//! `(e+1) % 3` to vertex `(e+2) % 3`, matching the mesh convention.

mod bdm;
mod piola;
mod quadrature;
mod scalar;
mod segment;

use thiserror::Error;

pub use bdm::{eval_bdm_basis, BdmBasis, BdmDof, VectorTable};
pub use piola::AffineMap;
pub use quadrature::{gauss_legendre, quadrature, Element, QuadratureRule, MAX_QUADRATURE_DEGREE};
pub use scalar::{eval_scalar_basis, monomial_exponents, ScalarBasis, ScalarFamily, ScalarTable};
pub use segment::SegmentBasis;

pub const MAX_ORDER: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BasisError {
    #[error("polynomial order {0} is not supported")]
    UnsupportedOrder(usize),
    #[error("quadrature degree {0} exceeds the supported maximum")]
    UnsupportedDegree(usize),
}

pub const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Point on local edge `e` of the reference triangle.
pub fn ref_edge_point(e: usize, t: f64) -> [f64; 2] {
    let a = REF_VERTICES[(e + 1) % 3];
    let b = REF_VERTICES[(e + 2) % 3];
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

pub fn ref_edge_length(e: usize) -> f64 {
    if e == 0 {
        std::f64::consts::SQRT_2
    } else {
        1.0
    }
}

/// Outward unit normal of local edge `e`.
pub fn ref_edge_normal(e: usize) -> [f64; 2] {
    match e {
        0 => [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
        1 => [-1.0, 0.0],
        _ => [0.0, -1.0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_normals_match_counter_clockwise_orientation() {
        for e in 0..3 {
            let (a, b) = (ref_edge_point(e, 0.0), ref_edge_point(e, 1.0));
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            assert!((len - ref_edge_length(e)).abs() < 1e-15);
            let n = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
            let r = ref_edge_normal(e);
            assert!((n[0] - r[0]).abs() < 1e-15 && (n[1] - r[1]).abs() < 1e-15);
        }
    }
}
