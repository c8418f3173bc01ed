//! Unit square with a two-bump mountain cut out of its bottom edge.

use std::collections::{HashMap, HashSet};

use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{signed_area, Mesh, MeshError, Point, MARKER_LEFT, MARKER_MOUNTAIN, MARKER_RIGHT, MARKER_TOP};

const MIN_CURVE_SEGMENTS: usize = 8;

/// Bottom boundary profile of the mountain domain.
pub fn mountain_height(x: f64) -> f64 {
    0.3 * (-((x - 0.4) / 0.08).powi(2)).exp() + 0.2 * (-((x - 0.6) / 0.1).powi(2)).exp()
}

fn mountain_slope(x: f64) -> f64 {
    let a = -2.0 * (x - 0.4) / (0.08 * 0.08);
    let b = -2.0 * (x - 0.6) / (0.1 * 0.1);
    0.3 * a * (-((x - 0.4) / 0.08).powi(2)).exp() + 0.2 * b * (-((x - 0.6) / 0.1).powi(2)).exp()
}

/// Abscissae of points equidistributed in arclength along the curve.
fn arclength_samples(spacing: f64) -> Vec<f64> {
    const FINE: usize = 20_000;
    let mut xs = Vec::with_capacity(FINE + 1);
    let mut s = Vec::with_capacity(FINE + 1);
    let mut acc = 0.0;
    let speed = |x: f64| (1.0 + mountain_slope(x).powi(2)).sqrt();
    for i in 0..=FINE {
        let x = i as f64 / FINE as f64;
        if i > 0 {
            let x0 = (i - 1) as f64 / FINE as f64;
            // Simpson on each fine cell
            acc += (x - x0) / 6.0 * (speed(x0) + 4.0 * speed(0.5 * (x0 + x)) + speed(x));
        }
        xs.push(x);
        s.push(acc);
    }
    let n = (acc / spacing).ceil() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut j = 0;
    for i in 0..=n {
        let target = acc * i as f64 / n as f64;
        while j + 1 < FINE && s[j + 1] < target {
            j += 1;
        }
        let t = ((target - s[j]) / (s[j + 1] - s[j])).clamp(0.0, 1.0);
        out.push(xs[j] + t * (xs[j + 1] - xs[j]));
    }
    out[0] = 0.0;
    out[n] = 1.0;
    out
}

fn uniform(n_segments: usize) -> impl Iterator<Item = f64> {
    (0..=n_segments).map(move |i| i as f64 / n_segments as f64)
}

fn boundary_marker(vertices: &[Point], a: usize, b: usize) -> String {
    let (pa, pb) = (vertices[a], vertices[b]);
    let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
    let tol = 1e-12;
    if mid[1] > 1.0 - tol {
        MARKER_TOP
    } else if mid[0] < tol {
        MARKER_LEFT
    } else if mid[0] > 1.0 - tol {
        MARKER_RIGHT
    } else {
        MARKER_MOUNTAIN
    }
    .to_string()
}

/// Constrained Delaunay mesh of `{0 < x < 1, M(x) < y < 1}`. The mountain
/// curve is resolved with segments of length at most `min(h_loc, h_max)`; the
/// rest of the domain is refined to cells of roughly `h_max` with a minimum
/// angle of 20 degrees.
pub fn build_mountain(h_max: f64, h_loc: f64) -> Result<Mesh, MeshError> {
    if !(h_max > 0.0 && h_loc > 0.0 && h_loc <= h_max) {
        return Err(MeshError::InvalidParameters(format!(
            "need 0 < h_loc <= h_max, got h_max={h_max}, h_loc={h_loc}"
        )));
    }
    let curve = arclength_samples(h_loc.min(h_max));
    if curve.len() - 1 < MIN_CURVE_SEGMENTS {
        return Err(MeshError::CurveTooCoarse(curve.len() - 1));
    }
    let side = |len: f64| ((len / h_max).ceil() as usize).max(1);

    // closed counter-clockwise polygon
    let mut ring: Vec<Point> = curve.iter().map(|&x| [x, mountain_height(x)]).collect();
    let y_right = mountain_height(1.0);
    ring.extend(uniform(side(1.0 - y_right)).skip(1).map(|t| [1.0, y_right + t * (1.0 - y_right)]));
    ring.extend(uniform(side(1.0)).skip(1).map(|t| [1.0 - t, 1.0]));
    let y_left = mountain_height(0.0);
    let left: Vec<Point> = uniform(side(1.0 - y_left)).skip(1).map(|t| [0.0, 1.0 - t * (1.0 - y_left)]).collect();
    ring.extend(&left[..left.len() - 1]);

    let n = ring.len();
    let points: Vec<Point2<f64>> = ring.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let edges: Vec<[usize; 2]> = (0..n).map(|i| [i, (i + 1) % n]).collect();
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(points, edges)
        .map_err(|e| MeshError::Generation(format!("{e:?}")))?;

    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(20.0))
        .with_max_allowed_area(0.25 * 3f64.sqrt() * h_max * h_max)
        .with_max_additional_vertices(4_000_000)
        .exclude_outer_faces(true);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(MeshError::Generation("refinement did not complete".into()));
    }
    let excluded: HashSet<_> = result.excluded_faces.into_iter().collect();

    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut cells = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let mut ids = [0usize; 3];
        for (slot, v) in face.vertices().iter().enumerate() {
            let key = v.fix().index();
            ids[slot] = *index.entry(key).or_insert_with(|| {
                let p = v.position();
                vertices.push([p.x, p.y]);
                vertices.len() - 1
            });
        }
        let [a, b, c] = ids.map(|i| vertices[i]);
        if signed_area(a, b, c) < 0.0 {
            ids.swap(1, 2);
        }
        cells.push(ids);
    }
    let mesh = Mesh::from_cells(vertices, cells, boundary_marker)?;
    log::debug!(
        "mountain mesh h_max={h_max} h_loc={h_loc}: {} cells, {} vertices",
        mesh.num_cells(),
        mesh.num_vertices()
    );
    Ok(mesh)
}
