//! Plain-text mesh format.
//!
//! ```text
//! grstokes-mesh v1
//! <vertices> <cells> <boundary facets>
//! x y                 (one line per vertex)
//! v0 v1 v2            (one line per cell, counter-clockwise)
//! v0 v1 marker        (one line per boundary facet)
//! ```
//!
//! Coordinates are written with 17 significant digits and round-trip exactly.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{edge_key, Mesh, MeshError, Point};

pub const MESH_HEADER: &str = "grstokes-mesh v1";

pub fn write_mesh<W: Write>(mesh: &Mesh, mut out: W) -> Result<(), MeshError> {
    let boundary: Vec<usize> = mesh.boundary_facets().collect();
    writeln!(out, "{MESH_HEADER}")?;
    writeln!(out, "{} {} {}", mesh.num_vertices(), mesh.num_cells(), boundary.len())?;
    for v in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e}", v[0], v[1])?;
    }
    for c in mesh.cells() {
        writeln!(out, "{} {} {}", c[0], c[1], c[2])?;
    }
    for f in boundary {
        let [a, b] = mesh.facets()[f];
        writeln!(out, "{} {} {}", a, b, mesh.boundary_marker(f).unwrap_or("boundary"))?;
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

pub fn read_mesh<R: BufRead>(input: R) -> Result<Mesh, MeshError> {
    let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let mut next = || -> Result<(usize, String), MeshError> {
        let (n, l) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of file"))?;
        Ok((n, l?))
    };

    let (n, header) = next()?;
    if header.trim() != MESH_HEADER {
        return Err(parse_err(n, format!("expected header '{MESH_HEADER}'")));
    }
    let (n, counts) = next()?;
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(n, "bad count")))
        .collect::<Result<_, _>>()?;
    let [nv, nc, nb] = counts[..] else {
        return Err(parse_err(n, "expected three counts"));
    };

    let mut vertices: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = next()?;
        let xy: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(n, "bad coordinate")))
            .collect::<Result<_, _>>()?;
        let [x, y] = xy[..] else {
            return Err(parse_err(n, "expected two coordinates"));
        };
        vertices.push([x, y]);
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (n, l) = next()?;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(n, "bad vertex index")))
            .collect::<Result<_, _>>()?;
        let [a, b, c] = ids[..] else {
            return Err(parse_err(n, "expected three vertex indices"));
        };
        if a.max(b).max(c) >= nv {
            return Err(parse_err(n, "vertex index out of range"));
        }
        cells.push([a, b, c]);
    }
    let mut markers = HashMap::with_capacity(nb);
    for _ in 0..nb {
        let (n, l) = next()?;
        let mut it = l.split_whitespace();
        let mut idx = || -> Result<usize, MeshError> {
            it.next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(n, "bad boundary facet"))
        };
        let (a, b) = (idx()?, idx()?);
        let label = it.next().ok_or_else(|| parse_err(n, "missing marker"))?;
        markers.insert(edge_key(a, b), label.to_string());
    }
    Mesh::from_cells(vertices, cells, |_, a, b| {
        markers.get(&edge_key(a, b)).cloned().unwrap_or_else(|| "boundary".into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_unit_square;

    #[test]
    fn round_trip_is_bit_exact() {
        let mesh = build_unit_square(1);
        // make coordinates that need all 17 digits
        let verts: Vec<Point> = mesh.vertices().iter().map(|v| [v[0] + 1e-3 * (v[1] * 7.1).sin() * v[0] * (1.0 - v[0]), v[1]]).collect();
        let mesh = mesh.with_vertices(verts).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let back = read_mesh(&buf[..]).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.cells(), mesh.cells());
        for f in 0..mesh.num_facets() {
            assert_eq!(back.boundary_marker(f), mesh.boundary_marker(f));
        }
        let mut again = Vec::new();
        write_mesh(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_bad_header() {
        let err = read_mesh("not-a-mesh\n1 0 0\n0 0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 1, .. }));
    }

    #[test]
    fn rejects_out_of_range_index() {
        let text = format!("{MESH_HEADER}\n3 1 0\n0 0\n1 0\n0 1\n0 1 5\n");
        assert!(read_mesh(text.as_bytes()).is_err());
    }
}
