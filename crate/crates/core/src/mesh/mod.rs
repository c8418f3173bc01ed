//! Two-dimensional simplicial meshes with globally oriented facets.
//!
//! Every facet stores a "left" cell and an optional "right" cell. The facet
//! vertices are ordered counter-clockwise with respect to the left cell, so
//! the unit normal `(dy, -dx) / len` points from the left cell into the right
//! cell (or out of the domain on the boundary). The same orientation fixes
//! the sign of jumps: `[[q]] = q_left - q_right`.

mod io;
mod mountain;

use std::collections::HashMap;

use thiserror::Error;

pub use io::{read_mesh, write_mesh, MESH_HEADER};
pub use mountain::{build_mountain, mountain_height};

pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("facet id {0} out of range ({1} facets)")]
    InvalidFacet(usize, usize),
    #[error("cell {0} has non-positive signed area {1:e}")]
    Inverted(usize, f64),
    #[error("edge ({0}, {1}) is shared by more than two cells")]
    NonManifold(usize, usize),
    #[error("mountain curve resolved by only {0} segments (need at least 8)")]
    CurveTooCoarse(usize),
    #[error("invalid mesh parameters: {0}")]
    InvalidParameters(String),
    #[error("mesh generation failed: {0}")]
    Generation(String),
    #[error("mesh file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const MARKER_BOTTOM: &str = "bottom";
pub const MARKER_RIGHT: &str = "right";
pub const MARKER_TOP: &str = "top";
pub const MARKER_LEFT: &str = "left";
pub const MARKER_MOUNTAIN: &str = "mountain";

/// Geometric data of a single facet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetGeometry {
    pub normal: Point,
    pub tangent: Point,
    pub length: f64,
    pub midpoint: Point,
    pub left: usize,
    pub right: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    facets: Vec<[usize; 2]>,
    facet_cells: Vec<(usize, Option<usize>)>,
    facet_normals: Vec<Point>,
    cell_facets: Vec<[usize; 3]>,
    boundary_markers: Vec<Option<String>>,
    cell_areas: Vec<f64>,
    cell_diameters: Vec<f64>,
    h_max: f64,
}

/// Local edge `e` of a cell is the one opposite local vertex `e`, running
/// counter-clockwise from vertex `(e + 1) % 3` to vertex `(e + 2) % 3`.
#[inline]
pub fn local_edge(e: usize) -> (usize, usize) {
    ((e + 1) % 3, (e + 2) % 3)
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds the facet structure of a cell list. `marker` is queried once per
    /// boundary facet with the facet's vertex indices (in left-cell
    /// counter-clockwise order) and must return its label.
    pub fn from_cells<F>(vertices: Vec<Point>, cells: Vec<[usize; 3]>, mut marker: F) -> Result<Self, MeshError>
    where
        F: FnMut(&[Point], usize, usize) -> String,
    {
        let mut cell_areas = Vec::with_capacity(cells.len());
        let mut cell_diameters = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let [a, b, d] = cell.map(|v| vertices[v]);
            let area = signed_area(a, b, d);
            if area <= 0.0 {
                return Err(MeshError::Inverted(c, area));
            }
            cell_areas.push(area);
            cell_diameters.push(dist(a, b).max(dist(b, d)).max(dist(d, a)));
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(cells.len() * 2);
        let mut facets = Vec::new();
        let mut facet_cells: Vec<(usize, Option<usize>)> = Vec::new();
        let mut cell_facets = vec![[0usize; 3]; cells.len()];
        for (c, cell) in cells.iter().enumerate() {
            for e in 0..3 {
                let (i, j) = local_edge(e);
                let (a, b) = (cell[i], cell[j]);
                match lookup.get(&edge_key(a, b)) {
                    Some(&f) => {
                        if facet_cells[f].1.is_some() {
                            return Err(MeshError::NonManifold(a, b));
                        }
                        facet_cells[f].1 = Some(c);
                        cell_facets[c][e] = f;
                    }
                    None => {
                        let f = facets.len();
                        lookup.insert(edge_key(a, b), f);
                        facets.push([a, b]);
                        facet_cells.push((c, None));
                        cell_facets[c][e] = f;
                    }
                }
            }
        }

        let facet_normals = facets
            .iter()
            .map(|&[a, b]| {
                let (pa, pb) = (vertices[a], vertices[b]);
                let len = dist(pa, pb);
                [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len]
            })
            .collect();
        let boundary_markers = facets
            .iter()
            .zip(&facet_cells)
            .map(|(&[a, b], &(_, right))| right.is_none().then(|| marker(&vertices, a, b)))
            .collect();
        let h_max = cell_diameters.iter().cloned().fold(0.0, f64::max);

        Ok(Self {
            vertices,
            cells,
            facets,
            facet_cells,
            facet_normals,
            cell_facets,
            boundary_markers,
            cell_areas,
            cell_diameters,
            h_max,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn facets(&self) -> &[[usize; 2]] {
        &self.facets
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    /// `(left, right)` cells of a facet; `right` is `None` on the boundary.
    pub fn facet_cells(&self, f: usize) -> (usize, Option<usize>) {
        self.facet_cells[f]
    }

    pub fn facet_normal(&self, f: usize) -> Point {
        self.facet_normals[f]
    }

    /// Unit tangent along the stored facet direction.
    pub fn facet_tangent(&self, f: usize) -> Point {
        let n = self.facet_normals[f];
        [-n[1], n[0]]
    }

    pub fn facet_length(&self, f: usize) -> f64 {
        let [a, b] = self.facets[f];
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn is_boundary_facet(&self, f: usize) -> bool {
        self.facet_cells[f].1.is_none()
    }

    pub fn boundary_marker(&self, f: usize) -> Option<&str> {
        self.boundary_markers[f].as_deref()
    }

    pub fn boundary_facets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.facets.len()).filter(move |&f| self.is_boundary_facet(f))
    }

    /// Facet ids of the three local edges of a cell.
    pub fn cell_facets(&self, c: usize) -> [usize; 3] {
        self.cell_facets[c]
    }

    /// `true` if cell `c` is the left cell of its local edge `e`.
    pub fn is_left(&self, c: usize, e: usize) -> bool {
        self.facet_cells[self.cell_facets[c][e]].0 == c
    }

    pub fn cell_vertices(&self, c: usize) -> [Point; 3] {
        self.cells[c].map(|v| self.vertices[v])
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        self.cell_areas[c]
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        self.cell_diameters[c]
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn h_min(&self) -> f64 {
        self.cell_diameters.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn area(&self) -> f64 {
        self.cell_areas.iter().sum()
    }

    /// Ratio of the largest to the smallest cell diameter.
    pub fn quasi_uniformity(&self) -> f64 {
        let q = self.h_max / self.h_min();
        log::debug!("mesh with {} cells: h_max/h_min = {q:.3}", self.num_cells());
        q
    }

    pub fn facet_geometry(&self, f: usize) -> Result<FacetGeometry, MeshError> {
        if f >= self.facets.len() {
            return Err(MeshError::InvalidFacet(f, self.facets.len()));
        }
        let [a, b] = self.facets[f].map(|v| self.vertices[v]);
        let (left, right) = self.facet_cells[f];
        Ok(FacetGeometry {
            normal: self.facet_normals[f],
            tangent: self.facet_tangent(f),
            length: dist(a, b),
            midpoint: [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])],
            left,
            right,
        })
    }

    /// Red refinement: every cell is split into four by its edge midpoints.
    /// New vertices are appended in facet order; boundary facets inherit the
    /// marker of their parent.
    pub fn uniform_refine(&self) -> Mesh {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        for &[a, b] in &self.facets {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        }
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for (c, &[v0, v1, v2]) in self.cells.iter().enumerate() {
            // midpoint opposite local vertex e
            let m = self.cell_facets[c].map(|f| nv + f);
            cells.push([v0, m[2], m[1]]);
            cells.push([m[2], v1, m[0]]);
            cells.push([m[1], m[0], v2]);
            cells.push([m[0], m[1], m[2]]);
        }
        let mut parent_marker: HashMap<(usize, usize), String> = HashMap::new();
        for f in self.boundary_facets() {
            let [a, b] = self.facets[f];
            let label = self.boundary_markers[f].clone().unwrap_or_default();
            parent_marker.insert(edge_key(a, nv + f), label.clone());
            parent_marker.insert(edge_key(nv + f, b), label);
        }
        Mesh::from_cells(vertices, cells, |_, a, b| {
            parent_marker.get(&edge_key(a, b)).cloned().unwrap_or_default()
        })
        .expect("red refinement of a valid mesh is valid")
    }

    /// Applies `n` red refinements.
    pub fn refined(&self, n: usize) -> Mesh {
        let mut mesh = self.clone();
        for _ in 0..n {
            mesh = mesh.uniform_refine();
        }
        mesh
    }

    /// Moves interior vertices, used by randomized property checks.
    pub(crate) fn with_vertices(&self, vertices: Vec<Point>) -> Result<Mesh, MeshError> {
        let markers: HashMap<(usize, usize), String> = self
            .boundary_facets()
            .map(|f| {
                let [a, b] = self.facets[f];
                (edge_key(a, b), self.boundary_markers[f].clone().unwrap_or_default())
            })
            .collect();
        Mesh::from_cells(vertices, self.cells.clone(), |_, a, b| {
            markers.get(&edge_key(a, b)).cloned().unwrap_or_default()
        })
    }
}

fn square_marker(vertices: &[Point], a: usize, b: usize) -> String {
    let (pa, pb) = (vertices[a], vertices[b]);
    let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
    let tol = 1e-12;
    if mid[1] < tol {
        MARKER_BOTTOM
    } else if mid[0] > 1.0 - tol {
        MARKER_RIGHT
    } else if mid[1] > 1.0 - tol {
        MARKER_TOP
    } else {
        MARKER_LEFT
    }
    .to_string()
}

/// Structured `n x n` grid of the unit square, every square split along
/// its diagonal into two triangles. Used for small randomized instances.
pub fn unit_square_diagonal(n: usize) -> Mesh {
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            cells.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Mesh::from_cells(vertices, cells, square_marker).expect("structured mesh is valid")
}

/// Unit square with 96 cells at level 0: a 4x4 grid of squares, each with
/// midpoints on its two vertical edges and fanned from its centre into six
/// triangles. Each level applies one red refinement.
pub fn build_unit_square(n_refine: usize) -> Mesh {
    const N: usize = 4;
    let h = 1.0 / N as f64;
    let mut vertices = Vec::new();
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    // vertices on a lattice of spacing h/2
    let mut vid = |ix: i64, iy: i64, vertices: &mut Vec<Point>| -> usize {
        *index.entry((ix, iy)).or_insert_with(|| {
            vertices.push([ix as f64 * 0.5 * h, iy as f64 * 0.5 * h]);
            vertices.len() - 1
        })
    };
    let mut cells = Vec::with_capacity(96);
    for j in 0..N as i64 {
        for i in 0..N as i64 {
            let (x0, y0) = (2 * i, 2 * j);
            // boundary points of the square in counter-clockwise order
            let ring = [
                (x0, y0),
                (x0 + 2, y0),
                (x0 + 2, y0 + 1),
                (x0 + 2, y0 + 2),
                (x0, y0 + 2),
                (x0, y0 + 1),
            ];
            let centre = vid(x0 + 1, y0 + 1, &mut vertices);
            let ids: Vec<usize> = ring.iter().map(|&(x, y)| vid(x, y, &mut vertices)).collect();
            for r in 0..6 {
                cells.push([ids[r], ids[(r + 1) % 6], centre]);
            }
        }
    }
    let base = Mesh::from_cells(vertices, cells, square_marker).expect("structured mesh is valid");
    base.refined(n_refine)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(mesh: &Mesh, area: f64) {
        assert!((mesh.area() - area).abs() < 1e-12 * area);
        for f in 0..mesh.num_facets() {
            let n = mesh.facet_normal(f);
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-14);
        }
        for c in 0..mesh.num_cells() {
            let [a, b, d] = mesh.cell_vertices(c);
            assert!(signed_area(a, b, d) > 0.0);
            let centroid = [(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0];
            for e in 0..3 {
                let f = mesh.cell_facets(c)[e];
                let g = mesh.facet_geometry(f).unwrap();
                // outward normal of the cell is +n_F on the left, -n_F on the right
                let sign = if mesh.is_left(c, e) { 1.0 } else { -1.0 };
                let out = [g.midpoint[0] - centroid[0], g.midpoint[1] - centroid[1]];
                assert!(sign * (out[0] * g.normal[0] + out[1] * g.normal[1]) > 0.0);
            }
        }
    }

    #[test]
    fn unit_square_levels() {
        let m0 = build_unit_square(0);
        assert_eq!(m0.num_cells(), 96);
        check_invariants(&m0, 1.0);
        let m1 = build_unit_square(1);
        assert_eq!(m1.num_cells(), 384);
        check_invariants(&m1, 1.0);
        let m2 = build_unit_square(2);
        assert!((m2.h_max() - m0.h_max() / 4.0).abs() < 1e-12);
        check_invariants(&m2, 1.0);
    }

    #[test]
    fn refinement_facet_count() {
        let m0 = build_unit_square(0);
        let m1 = m0.uniform_refine();
        assert_eq!(m1.num_facets(), 2 * m0.num_facets() + 3 * m0.num_cells());
        assert_eq!(m1.num_cells(), 4 * m0.num_cells());
        let again = build_unit_square(1);
        assert_eq!(again.vertices(), m1.vertices());
        assert_eq!(again.cells(), m1.cells());
    }

    #[test]
    fn facet_cell_consistency() {
        let mesh = build_unit_square(1);
        let mut interior = 0;
        for f in 0..mesh.num_facets() {
            let (l, r) = mesh.facet_cells(f);
            assert!(mesh.cell_facets(l).contains(&f));
            if let Some(r) = r {
                interior += 1;
                assert!(mesh.cell_facets(r).contains(&f));
                assert_ne!(l, r);
            } else {
                assert!(mesh.boundary_marker(f).is_some());
            }
        }
        let boundary = mesh.num_facets() - interior;
        // level 0 has 4 segments on the horizontal sides and 8 on the vertical ones
        assert_eq!(boundary, 4 * 8 + 2 * 8);
    }

    #[test]
    fn boundary_normals_point_outward() {
        let mesh = build_unit_square(0);
        for f in mesh.boundary_facets() {
            let g = mesh.facet_geometry(f).unwrap();
            let n = g.normal;
            match mesh.boundary_marker(f).unwrap() {
                MARKER_BOTTOM => assert!((n[1] + 1.0).abs() < 1e-14),
                MARKER_TOP => assert!((n[1] - 1.0).abs() < 1e-14),
                MARKER_LEFT => assert!((n[0] + 1.0).abs() < 1e-14),
                MARKER_RIGHT => assert!((n[0] - 1.0).abs() < 1e-14),
                other => panic!("unexpected marker {other}"),
            }
            assert!((g.length - mesh.facet_length(f)).abs() < 1e-15);
            assert!(g.right.is_none());
        }
    }

    #[test]
    fn horizontal_facet_normal() {
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mesh = Mesh::from_cells(vertices, vec![[0, 1, 2]], square_marker).unwrap();
        let f = mesh.cell_facets(0)[2];
        let g = mesh.facet_geometry(f).unwrap();
        assert_eq!(g.normal, [0.0, -1.0]);
        assert_eq!(g.length, 1.0);
        assert_eq!(g.left, 0);
        assert!(g.right.is_none());
        assert!(matches!(mesh.facet_geometry(7), Err(MeshError::InvalidFacet(7, 3))));
    }

    fn barycentric(cell: [Point; 3], x: Point) -> [f64; 3] {
        let total = signed_area(cell[0], cell[1], cell[2]);
        [
            signed_area(x, cell[1], cell[2]) / total,
            signed_area(cell[0], x, cell[2]) / total,
            signed_area(cell[0], cell[1], x) / total,
        ]
    }

    #[test]
    fn jump_of_continuous_function_vanishes() {
        let mesh = build_unit_square(1);
        let p = |x: Point| 1.0 + 2.0 * x[0] - x[1];
        let trace = |c: usize, x: Point| {
            let verts = mesh.cell_vertices(c);
            let l = barycentric(verts, x);
            (0..3).map(|i| l[i] * p(verts[i])).sum::<f64>()
        };
        for f in 0..mesh.num_facets() {
            let (l, Some(r)) = mesh.facet_cells(f) else { continue };
            let [a, b] = mesh.facets()[f].map(|v| mesh.vertices()[v]);
            for t in [0.1, 0.5, 0.77] {
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                assert!((trace(l, x) - trace(r, x)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn inverted_cell_rejected() {
        let vertices = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(matches!(
            Mesh::from_cells(vertices, vec![[0, 1, 2]], square_marker),
            Err(MeshError::Inverted(0, _))
        ));
    }

    #[test]
    fn quasi_uniformity_is_bounded() {
        let q0 = build_unit_square(0).quasi_uniformity();
        let q2 = build_unit_square(2).quasi_uniformity();
        assert!((q0 - q2).abs() < 1e-12);
        assert!(q0 < 2.0);
    }
}
