//! Orthonormal Legendre polynomials on `[0, 1]`.

use super::{BasisError, MAX_ORDER};

#[derive(Debug, Clone, Copy)]
pub struct SegmentBasis {
    order: usize,
}

impl SegmentBasis {
    pub fn new(k: usize) -> Result<Self, BasisError> {
        if k > MAX_ORDER {
            return Err(BasisError::UnsupportedOrder(k));
        }
        Ok(Self { order: k })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.order + 1
    }

    /// `sqrt(2j + 1) P_j(2t - 1)` for `j = 0..=k`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let x = 2.0 * t - 1.0;
        let mut p = Vec::with_capacity(self.dim());
        p.push(1.0);
        if self.order >= 1 {
            p.push(x);
        }
        for j in 2..=self.order {
            let next = ((2 * j - 1) as f64 * x * p[j - 1] - (j - 1) as f64 * p[j - 2]) / j as f64;
            p.push(next);
        }
        p.iter().enumerate().map(|(j, v)| ((2 * j + 1) as f64).sqrt() * v).collect()
    }

    /// Sign picked up by function `j` when the segment is traversed backwards.
    pub fn reversal_sign(j: usize) -> f64 {
        if j % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}
