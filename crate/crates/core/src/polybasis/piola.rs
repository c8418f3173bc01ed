//! Affine reference-to-physical map and the contravariant Piola transform.

type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    origin: [f64; 2],
    jac: Mat2,
    inv: Mat2,
    det: f64,
}

fn matmul(a: Mat2, b: Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

impl AffineMap {
    /// Map sending the reference vertices to `vertices` in order.
    pub fn new(vertices: [[f64; 2]; 3]) -> Self {
        let [v0, v1, v2] = vertices;
        let jac = [[v1[0] - v0[0], v2[0] - v0[0]], [v1[1] - v0[1], v2[1] - v0[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Self { origin: v0, jac, inv, det }
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn jacobian(&self) -> Mat2 {
        self.jac
    }

    pub fn map(&self, xh: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        [
            self.origin[0] + j[0][0] * xh[0] + j[0][1] * xh[1],
            self.origin[1] + j[1][0] * xh[0] + j[1][1] * xh[1],
        ]
    }

    pub fn pull_back(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let i = &self.inv;
        [i[0][0] * d[0] + i[0][1] * d[1], i[1][0] * d[0] + i[1][1] * d[1]]
    }

    /// Physical gradient of a mapped scalar function: `J^{-T} grad_ref`.
    pub fn scalar_grad(&self, gh: [f64; 2]) -> [f64; 2] {
        let i = &self.inv;
        [i[0][0] * gh[0] + i[1][0] * gh[1], i[0][1] * gh[0] + i[1][1] * gh[1]]
    }

    /// `J v / det J`.
    pub fn piola(&self, vh: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        [
            (j[0][0] * vh[0] + j[0][1] * vh[1]) / self.det,
            (j[1][0] * vh[0] + j[1][1] * vh[1]) / self.det,
        ]
    }

    /// Inverse of [`AffineMap::piola`]: `det J J^{-1} v`.
    pub fn piola_inverse(&self, v: [f64; 2]) -> [f64; 2] {
        let i = &self.inv;
        [
            self.det * (i[0][0] * v[0] + i[0][1] * v[1]),
            self.det * (i[1][0] * v[0] + i[1][1] * v[1]),
        ]
    }

    /// Gradient `d v_i / d x_j` of a Piola-mapped field.
    pub fn piola_grad(&self, gh: Mat2) -> Mat2 {
        let g = matmul(matmul(self.jac, gh), self.inv);
        g.map(|row| row.map(|v| v / self.det))
    }

    pub fn piola_div(&self, div_ref: f64) -> f64 {
        div_ref / self.det
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_vertices_and_inverts() {
        let verts = [[0.3, 0.1], [1.2, 0.4], [0.5, 0.9]];
        let m = AffineMap::new(verts);
        assert!((m.map([1.0, 0.0])[0] - 1.2).abs() < 1e-15);
        assert!((m.map([0.0, 1.0])[1] - 0.9).abs() < 1e-15);
        let x = m.map([0.2, 0.3]);
        let back = m.pull_back(x);
        assert!((back[0] - 0.2).abs() < 1e-14 && (back[1] - 0.3).abs() < 1e-14);
        let v = [0.7, -1.3];
        let r = m.piola(m.piola_inverse(v));
        assert!((r[0] - v[0]).abs() < 1e-14 && (r[1] - v[1]).abs() < 1e-14);
    }
}
