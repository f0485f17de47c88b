use std::collections::HashMap;
use std::sync::Arc;

use super::{Rect, TriMesh};
use crate::error::{Error, Result};

/// Cells whose clipped area falls below this fraction of a full hexagon are
/// dropped.
const MIN_CELL_FRACTION: f64 = 0.25;

/// One hexagonal cell, possibly clipped by the domain boundary.
#[derive(Debug, Clone)]
pub struct HexCell {
    /// Lattice center of the unclipped hexagon.
    pub center: [f64; 2],
    /// Centroid of the clipped polygon; the fan apex of the sub-triangles.
    pub centroid: [f64; 2],
    /// Counterclockwise polygon vertices as indices into `sub_tri`.
    pub ring: Vec<usize>,
    pub area: f64,
    pub clipped: bool,
}

/// Flat-top hexagonal tiling of a rectangle together with the fan
/// sub-triangulation of every cell.
#[derive(Debug, Clone)]
pub struct HoneycombPair {
    pub domain: Rect,
    pub h: f64,
    pub cells: Vec<HexCell>,
    pub sub_tri: Arc<TriMesh>,
    pub cell_of_triangle: Vec<usize>,
    pub cell_area: Vec<f64>,
}

/// Tile `domain` with flat-top hexagons of diameter `h`. The lattice is
/// anchored with a cell center on the lower-left corner; odd columns are
/// shifted up by half a row.
pub fn generate_honeycomb(domain: &Rect, h: f64) -> Result<HoneycombPair> {
    if !(h > 0.0 && h.is_finite()) || h > domain.width().min(domain.height()) {
        return Err(Error::Mesh(format!("degenerate honeycomb size h = {h}")));
    }
    let r = 0.5 * h;
    let row = 3f64.sqrt() * r;
    let full = 1.5 * 3f64.sqrt() * r * r;
    let eps = 1e-9 * h;

    let ncols = ((domain.width() + r) / (1.5 * r)).ceil() as i64 + 1;
    let nrows = ((domain.height() + row) / row).ceil() as i64 + 1;

    let mut vertices: Vec<[f64; 2]> = Vec::new();
    let mut lookup: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut vertex_id = |p: [f64; 2], vertices: &mut Vec<[f64; 2]>| -> usize {
        let key = ((p[0] / eps).round() as i64, (p[1] / eps).round() as i64);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = lookup.get(&(key.0 + dx, key.1 + dy)) {
                    for &id in ids {
                        let q = vertices[id];
                        if (q[0] - p[0]).abs() <= eps && (q[1] - p[1]).abs() <= eps {
                            return id;
                        }
                    }
                }
            }
        }
        vertices.push(p);
        lookup.entry(key).or_default().push(vertices.len() - 1);
        vertices.len() - 1
    };

    let mut cells = Vec::new();
    let mut triangles = Vec::new();
    let mut cell_of_triangle = Vec::new();
    for i in -1..=ncols {
        let cx = domain.x0 + 1.5 * r * i as f64;
        let shift = if i.rem_euclid(2) == 1 { 0.5 * row } else { 0.0 };
        for j in -1..=nrows {
            let cy = domain.y0 + row * j as f64 + shift;
            if cx + r <= domain.x0 || cx - r >= domain.x1 || cy + 0.5 * row <= domain.y0 || cy - 0.5 * row >= domain.y1 {
                continue;
            }
            let hex: Vec<[f64; 2]> = (0..6)
                .map(|k| {
                    let a = std::f64::consts::FRAC_PI_3 * k as f64;
                    [cx + r * a.cos(), cy + r * a.sin()]
                })
                .collect();
            let clipped = clip_to_rect(&hex, domain, eps);
            if clipped.len() < 3 {
                continue;
            }
            let area = polygon_area(&clipped);
            if area < MIN_CELL_FRACTION * full * (1.0 - 1e-9) {
                continue;
            }
            let is_clipped = (area - full).abs() > 1e-9 * full;
            let (centroid, area) = if is_clipped {
                (polygon_centroid(&clipped), area)
            } else {
                ([cx, cy], full)
            };
            let ring: Vec<usize> = clipped.iter().map(|&p| vertex_id(p, &mut vertices)).collect();
            let apex = vertices.len();
            vertices.push(centroid);
            let c = cells.len();
            for k in 0..ring.len() {
                triangles.push([apex, ring[k], ring[(k + 1) % ring.len()]]);
                cell_of_triangle.push(c);
            }
            cells.push(HexCell { center: [cx, cy], centroid, ring, area, clipped: is_clipped });
        }
    }
    if cells.is_empty() {
        return Err(Error::Mesh(format!("no hexagonal cell fits with h = {h}")));
    }
    let sub_tri = Arc::new(TriMesh::from_parts(vertices, triangles, domain, h)?);
    let cell_area = cells.iter().map(|c| c.area).collect();
    Ok(HoneycombPair { domain: *domain, h, cells, sub_tri, cell_of_triangle, cell_area })
}

impl HoneycombPair {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Area of an unclipped cell.
    pub fn full_cell_area(&self) -> f64 {
        let r = 0.5 * self.h;
        1.5 * 3f64.sqrt() * r * r
    }

    /// Vertices of the sub-triangulation away from its boundary; these carry
    /// the test functions.
    pub fn test_vertices(&self) -> Vec<usize> {
        self.sub_tri.interior_vertices()
    }

    /// Triangles of each cell.
    pub fn cell_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_cells()];
        for (t, &c) in self.cell_of_triangle.iter().enumerate() {
            out[c].push(t);
        }
        out
    }

    /// Copy per-cell values onto the sub-triangles.
    pub fn prolong(&self, cell_values: &[f64]) -> Vec<f64> {
        self.cell_of_triangle.iter().map(|&c| cell_values[c]).collect()
    }

    /// Area-weighted average of per-triangle values over each cell.
    pub fn cell_average(&self, tri_values: &[f64]) -> Vec<f64> {
        let mut sum = vec![0.0; self.n_cells()];
        let mut area = vec![0.0; self.n_cells()];
        for (t, &c) in self.cell_of_triangle.iter().enumerate() {
            let a = self.sub_tri.area(t);
            sum[c] += a * tri_values[t];
            area[c] += a;
        }
        sum.iter().zip(&area).map(|(s, a)| s / a).collect()
    }

    /// Cell polygons for VTK export.
    pub fn polygons(&self) -> Vec<Vec<usize>> {
        self.cells.iter().map(|c| c.ring.clone()).collect()
    }
}

fn clip_to_rect(poly: &[[f64; 2]], r: &Rect, eps: f64) -> Vec<[f64; 2]> {
    let mut out = poly.to_vec();
    // Each half-plane is (axis, bound, keep_greater).
    for (axis, bound, greater) in [(0, r.x0, true), (0, r.x1, false), (1, r.y0, true), (1, r.y1, false)] {
        let inside = |p: &[f64; 2]| if greater { p[axis] >= bound } else { p[axis] <= bound };
        let input = std::mem::take(&mut out);
        for k in 0..input.len() {
            let cur = input[k];
            let prev = input[(k + input.len() - 1) % input.len()];
            let (ci, pi) = (inside(&cur), inside(&prev));
            if ci != pi {
                let t = (bound - prev[axis]) / (cur[axis] - prev[axis]);
                let mut x = [prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])];
                x[axis] = bound;
                out.push(x);
            }
            if ci {
                out.push(cur);
            }
        }
        if out.is_empty() {
            return out;
        }
    }
    // Drop repeated points produced by vertices lying on the boundary.
    let mut clean: Vec<[f64; 2]> = Vec::with_capacity(out.len());
    for p in out {
        if clean.last().is_none_or(|q| (q[0] - p[0]).abs() > eps || (q[1] - p[1]).abs() > eps) {
            clean.push(p);
        }
    }
    while clean.len() > 1 {
        let (a, b) = (clean[0], clean[clean.len() - 1]);
        if (a[0] - b[0]).abs() <= eps && (a[1] - b[1]).abs() <= eps {
            clean.pop();
        } else {
            break;
        }
    }
    clean
}

fn polygon_area(p: &[[f64; 2]]) -> f64 {
    let n = p.len();
    0.5 * (0..n).map(|k| p[k][0] * p[(k + 1) % n][1] - p[(k + 1) % n][0] * p[k][1]).sum::<f64>()
}

fn polygon_centroid(p: &[[f64; 2]]) -> [f64; 2] {
    let n = p.len();
    let a = polygon_area(p);
    let (mut cx, mut cy) = (0.0, 0.0);
    for k in 0..n {
        let (q, s) = (p[k], p[(k + 1) % n]);
        let cross = q[0] * s[1] - s[0] * q[1];
        cx += (q[0] + s[0]) * cross;
        cy += (q[1] + s[1]) * cross;
    }
    [cx / (6.0 * a), cy / (6.0 * a)]
}
