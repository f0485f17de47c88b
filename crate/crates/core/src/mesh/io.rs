use std::io::{BufRead, Write};

use super::{Rect, TriMesh};
use crate::error::{Error, Result};

/// One `x y` line per vertex.
pub fn write_nodes<W: Write>(mut w: W, mesh: &TriMesh) -> std::io::Result<()> {
    for p in &mesh.vertices {
        writeln!(w, "{:.16e} {:.16e}", p[0], p[1])?;
    }
    Ok(())
}

/// One `i j k tag` line per triangle. `tags` defaults to zero.
pub fn write_elements<W: Write>(mut w: W, mesh: &TriMesh, tags: Option<&[usize]>) -> std::io::Result<()> {
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let tag = tags.map_or(0, |tags| tags[t]);
        writeln!(w, "{} {} {} {}", tri[0], tri[1], tri[2], tag)?;
    }
    Ok(())
}

/// Read a node/element pair written by [`write_nodes`] and
/// [`write_elements`]. Boundary edges are recomputed and tagged against the
/// bounding box of the vertices. Returns the mesh and the element tags.
pub fn read_text<R1: BufRead, R2: BufRead>(nodes: R1, elements: R2, h: f64) -> Result<(TriMesh, Vec<usize>)> {
    let mut vertices = Vec::new();
    for (n, line) in nodes.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("node line {}: {e}", n + 1)))?;
        if v.len() != 2 {
            return Err(Error::Parse(format!("node line {}: expected `x y`", n + 1)));
        }
        vertices.push([v[0], v[1]]);
    }
    let mut triangles = Vec::new();
    let mut tags = Vec::new();
    for (n, line) in elements.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<usize> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("element line {}: {e}", n + 1)))?;
        if v.len() != 4 {
            return Err(Error::Parse(format!("element line {}: expected `i j k tag`", n + 1)));
        }
        triangles.push([v[0], v[1], v[2]]);
        tags.push(v[3]);
    }
    let probe = TriMesh { vertices, triangles: Vec::new(), boundary_edges: Vec::new(), h };
    let bbox: Rect = probe.bounding_box();
    let mesh = TriMesh::from_parts(probe.vertices, triangles, &bbox, h)?;
    Ok((mesh, tags))
}

/// Named data arrays attached to a VTK export.
#[derive(Debug, Default)]
pub struct VtkData<'a> {
    pub point_scalars: Vec<(&'a str, &'a [f64])>,
    pub point_vectors: Vec<(&'a str, &'a [[f64; 2]])>,
    pub cell_scalars: Vec<(&'a str, &'a [f64])>,
}

/// Legacy ASCII unstructured grid. Cells with three vertices are written as
/// triangles (type 5), others as polygons (type 7).
pub fn write_vtk<W: Write>(
    mut w: W,
    title: &str,
    points: &[[f64; 2]],
    cells: &[Vec<usize>],
    data: &VtkData<'_>,
) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", points.len())?;
    for p in points {
        writeln!(w, "{:.16e} {:.16e} 0", p[0], p[1])?;
    }
    let size: usize = cells.iter().map(|c| c.len() + 1).sum();
    writeln!(w, "CELLS {} {}", cells.len(), size)?;
    for c in cells {
        write!(w, "{}", c.len())?;
        for v in c {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {}", cells.len())?;
    for c in cells {
        writeln!(w, "{}", if c.len() == 3 { 5 } else { 7 })?;
    }
    if !data.cell_scalars.is_empty() {
        writeln!(w, "CELL_DATA {}", cells.len())?;
        for (name, values) in &data.cell_scalars {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(w, "{v:.16e}")?;
            }
        }
    }
    if !data.point_scalars.is_empty() || !data.point_vectors.is_empty() {
        writeln!(w, "POINT_DATA {}", points.len())?;
        for (name, values) in &data.point_scalars {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(w, "{v:.16e}")?;
            }
        }
        for (name, values) in &data.point_vectors {
            writeln!(w, "VECTORS {name} double")?;
            for v in values.iter() {
                writeln!(w, "{:.16e} {:.16e} 0", v[0], v[1])?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::generate_triangular;
    use super::*;

    #[test]
    fn text_round_trip() {
        let m = generate_triangular(&Rect::omega(), 0.25).unwrap();
        let tags: Vec<usize> = (0..m.n_triangles()).map(|t| t % 3).collect();
        let mut nodes = Vec::new();
        let mut elems = Vec::new();
        write_nodes(&mut nodes, &m).unwrap();
        write_elements(&mut elems, &m, Some(&tags)).unwrap();
        let (back, back_tags) = read_text(&nodes[..], &elems[..], m.h).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back_tags, tags);
        let mut a = back.boundary_edges.clone();
        let mut b = m.boundary_edges.clone();
        a.sort_by_key(|e| e.0);
        b.sort_by_key(|e| e.0);
        assert_eq!(a, b);
    }

    #[test]
    fn vtk_header_counts() {
        let m = generate_triangular(&Rect::omega(), 0.5).unwrap();
        let cells: Vec<Vec<usize>> = m.triangles.iter().map(|t| t.to_vec()).collect();
        let ones = vec![1.0; m.n_triangles()];
        let mut buf = Vec::new();
        let data = VtkData { cell_scalars: vec![("one", &ones)], ..Default::default() };
        write_vtk(&mut buf, "t", &m.vertices, &cells, &data).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains(&format!("POINTS {} double", m.n_vertices())));
        assert!(s.contains(&format!("CELLS {} {}", m.n_triangles(), 4 * m.n_triangles())));
        assert!(s.contains(&format!("CELL_DATA {}", m.n_triangles())));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(read_text(&b"0 0\n1\n"[..], &b""[..], 1.0).is_err());
        assert!(read_text(&b"0 0\n1 0\n0 1\n"[..], &b"0 1 2\n"[..], 1.0).is_err());
    }
}
