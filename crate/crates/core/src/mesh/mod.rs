//! Triangulations for the forward solve and the hexagonal inversion tiling.

mod honeycomb;
mod io;
mod locate;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use honeycomb::{generate_honeycomb, HexCell, HoneycombPair};
pub use io::{read_text, write_nodes, write_elements, write_vtk, VtkData};
pub use locate::PointLocator;

/// Seed used by [`generate_triangular`] for the interior jitter.
pub const DEFAULT_MESH_SEED: u64 = 0x5eed_0001;

/// Axis-aligned rectangle `(x0, x1) × (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::Mesh(format!(
                "degenerate rectangle ({x0}, {x1}) x ({y0}, {y1})"
            )));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    /// The forward domain `(-1, 1)²`.
    pub fn omega() -> Self {
        Self { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 }
    }

    /// The inversion subdomain `(-0.6, 0.6)²`.
    pub fn subdomain() -> Self {
        Self { x0: -0.6, x1: 0.6, y0: -0.6, y1: 0.6 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    /// Closed containment test.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    /// Strict containment, as required for `D ⊂ Ω`.
    pub fn strictly_contains_rect(&self, other: &Rect) -> bool {
        other.x0 > self.x0 && other.x1 < self.x1 && other.y0 > self.y0 && other.y1 < self.y1
    }

    /// Side of the rectangle the segment `a–b` lies on, if any.
    pub fn side_of_segment(&self, a: [f64; 2], b: [f64; 2]) -> Option<BoundaryTag> {
        let tol = 1e-10 * self.width().max(self.height());
        let on = |v: f64, w: f64| (v - w).abs() <= tol;
        if on(a[1], self.y0) && on(b[1], self.y0) {
            Some(BoundaryTag::Bottom)
        } else if on(a[0], self.x1) && on(b[0], self.x1) {
            Some(BoundaryTag::Right)
        } else if on(a[1], self.y1) && on(b[1], self.y1) {
            Some(BoundaryTag::Top)
        } else if on(a[0], self.x0) && on(b[0], self.x0) {
            Some(BoundaryTag::Left)
        } else {
            None
        }
    }
}

/// Named boundary segment. `Free` marks boundary edges that do not lie on a
/// side of the bounding rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Bottom,
    Right,
    Top,
    Left,
    Free,
}

impl BoundaryTag {
    pub const SIDES: [BoundaryTag; 4] = [Self::Bottom, Self::Right, Self::Top, Self::Left];

    pub fn index(self) -> usize {
        match self {
            Self::Bottom => 1,
            Self::Right => 2,
            Self::Top => 3,
            Self::Left => 4,
            Self::Free => 0,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Some(match i {
            0 => Self::Free,
            1 => Self::Bottom,
            2 => Self::Right,
            3 => Self::Top,
            4 => Self::Left,
            _ => return None,
        })
    }

    /// Whether the two sides share a corner of the rectangle.
    pub fn adjacent(self, other: Self) -> bool {
        use BoundaryTag::*;
        matches!(
            (self, other),
            (Bottom, Right)
                | (Right, Bottom)
                | (Right, Top)
                | (Top, Right)
                | (Top, Left)
                | (Left, Top)
                | (Left, Bottom)
                | (Bottom, Left)
        )
    }
}

impl std::str::FromStr for BoundaryTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bottom" => Ok(Self::Bottom),
            "right" => Ok(Self::Right),
            "top" => Ok(Self::Top),
            "left" => Ok(Self::Left),
            "free" => Ok(Self::Free),
            _ => Err(Error::Parse(format!("unknown boundary side '{s}'"))),
        }
    }
}

impl std::fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Bottom => "bottom",
            Self::Right => "right",
            Self::Top => "top",
            Self::Left => "left",
            Self::Free => "free",
        };
        f.write_str(s)
    }
}

/// A conforming triangulation with counterclockwise triangles.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    pub h: f64,
}

impl TriMesh {
    /// Build a mesh from raw connectivity, orienting triangles
    /// counterclockwise and tagging boundary edges against `bbox`.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        bbox: &Rect,
        h: f64,
    ) -> Result<Self> {
        for t in triangles.iter_mut() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!("triangle {t:?} references a missing vertex")));
            }
            if signed_area(&vertices, *t) < 0.0 {
                t.swap(1, 2);
            }
        }
        let mut mesh = Self { vertices, triangles, boundary_edges: Vec::new(), h };
        mesh.boundary_edges = mesh
            .edge_incidence()
            .into_iter()
            .filter(|&(_, n)| n == 1)
            .map(|(e, _)| {
                let tag = bbox
                    .side_of_segment(mesh.vertices[e[0]], mesh.vertices[e[1]])
                    .unwrap_or(BoundaryTag::Free);
                (e, tag)
            })
            .collect();
        mesh.boundary_edges.sort_by_key(|(e, _)| *e);
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, self.triangles[t])
    }

    pub fn area(&self, t: usize) -> f64 {
        self.signed_area(t).abs()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Gradients of the three P¹ hat functions on triangle `t`, and its area.
    pub fn gradients(&self, t: usize) -> ([[f64; 2]; 3], f64) {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let inv = 1.0 / det;
        let g = [
            [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv],
            [(c[1] - a[1]) * inv, (a[0] - c[0]) * inv],
            [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv],
        ];
        (g, 0.5 * det.abs())
    }

    pub fn circumdiameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let la = dist(b, c);
        let lb = dist(a, c);
        let lc = dist(a, b);
        la * lb * lc / (2.0 * self.area(t))
    }

    pub fn max_circumdiameter(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.circumdiameter(t)).fold(0.0, f64::max)
    }

    pub fn bounding_box(&self) -> Rect {
        let mut r = Rect { x0: f64::MAX, x1: f64::MIN, y0: f64::MAX, y1: f64::MIN };
        for p in &self.vertices {
            r.x0 = r.x0.min(p[0]);
            r.x1 = r.x1.max(p[0]);
            r.y0 = r.y0.min(p[1]);
            r.y1 = r.y1.max(p[1]);
        }
        r
    }

    /// Number of triangles incident to each (sorted) edge.
    pub fn edge_incidence(&self) -> HashMap<[usize; 2], usize> {
        let mut map = HashMap::with_capacity(self.n_triangles() * 2);
        for t in &self.triangles {
            for k in 0..3 {
                *map.entry(sorted_edge(t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        map
    }

    /// Check orientation, conformity and the boundary edge list.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.n_triangles() {
            if self.signed_area(t) <= 0.0 {
                return Err(Error::Mesh(format!("triangle {t} has non-positive area")));
            }
        }
        let inc = self.edge_incidence();
        if let Some((e, n)) = inc.iter().find(|(_, &n)| n > 2) {
            return Err(Error::Mesh(format!("edge {e:?} shared by {n} triangles")));
        }
        let n_boundary = inc.values().filter(|&&n| n == 1).count();
        if n_boundary != self.boundary_edges.len() {
            return Err(Error::Mesh(format!(
                "boundary edge list has {} entries, incidence count gives {n_boundary}",
                self.boundary_edges.len()
            )));
        }
        for (e, _) in &self.boundary_edges {
            if inc.get(&sorted_edge(e[0], e[1])) != Some(&1) {
                return Err(Error::Mesh(format!("tagged edge {e:?} is not a boundary edge")));
            }
        }
        Ok(())
    }

    /// Vertices lying on any boundary edge.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_vertices()];
        for (e, _) in &self.boundary_edges {
            mask[e[0]] = true;
            mask[e[1]] = true;
        }
        mask
    }

    /// Vertices lying on an edge carrying `tag`.
    pub fn tagged_vertex_mask(&self, tag: BoundaryTag) -> Vec<bool> {
        let mut mask = vec![false; self.n_vertices()];
        for (e, t) in &self.boundary_edges {
            if *t == tag {
                mask[e[0]] = true;
                mask[e[1]] = true;
            }
        }
        mask
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        let mask = self.boundary_vertex_mask();
        (0..self.n_vertices()).filter(|&v| !mask[v]).collect()
    }

    /// For each vertex, the triangles containing it.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }
}

/// Structured jittered mesh of `rect` with spacing close to `h`, using the
/// default seed.
pub fn generate_triangular(rect: &Rect, h: f64) -> Result<TriMesh> {
    generate_triangular_seeded(rect, h, DEFAULT_MESH_SEED)
}

/// Jittered grid triangulation. Interior nodes move by up to 10% of the grid
/// spacing in each direction; each quad is split along the diagonal that
/// satisfies the empty-circumcircle test.
pub fn generate_triangular_seeded(rect: &Rect, h: f64, seed: u64) -> Result<TriMesh> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Mesh(format!("mesh size must be positive, got {h}")));
    }
    let nx = (rect.width() / h).ceil() as usize;
    let ny = (rect.height() / h).ceil() as usize;
    if nx < 2 || ny < 2 {
        return Err(Error::Mesh(format!(
            "h = {h} leaves no interior vertex on a {} x {} rectangle",
            rect.width(),
            rect.height()
        )));
    }
    let dx = rect.width() / nx as f64;
    let dy = rect.height() / ny as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = |i: usize, j: usize| j * (nx + 1) + i;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let mut x = if i == nx { rect.x1 } else { rect.x0 + i as f64 * dx };
            let mut y = if j == ny { rect.y1 } else { rect.y0 + j as f64 * dy };
            if i > 0 && i < nx && j > 0 && j < ny {
                x += 0.1 * dx * rng.random_range(-1.0..1.0);
                y += 0.1 * dy * rng.random_range(-1.0..1.0);
            }
            vertices.push([x, y]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if in_circumcircle(vertices[a], vertices[b], vertices[c], vertices[d]) {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            } else {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
    }

    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push((sorted_edge(id(i, 0), id(i + 1, 0)), BoundaryTag::Bottom));
        boundary_edges.push((sorted_edge(id(i, ny), id(i + 1, ny)), BoundaryTag::Top));
    }
    for j in 0..ny {
        boundary_edges.push((sorted_edge(id(nx, j), id(nx, j + 1)), BoundaryTag::Right));
        boundary_edges.push((sorted_edge(id(0, j), id(0, j + 1)), BoundaryTag::Left));
    }

    let mesh = TriMesh { vertices, triangles, boundary_edges, h };
    debug_assert!(mesh.validate().is_ok());
    Ok(mesh)
}

/// Sub-mesh of the triangles whose barycenter lies in `sub`. Edges that
/// were boundary edges of `mesh` keep their tag; new cut edges are tagged
/// against `sub` when they lie on its sides and `Free` otherwise.
pub fn restrict(mesh: &TriMesh, sub: &Rect) -> Result<TriMesh> {
    let keep: Vec<usize> = (0..mesh.n_triangles())
        .filter(|&t| sub.contains(mesh.barycenter(t)))
        .collect();
    if keep.is_empty() {
        return Err(Error::Mesh("restriction contains no triangle".into()));
    }
    let mut remap = vec![usize::MAX; mesh.n_vertices()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(keep.len());
    for &t in &keep {
        let tri = mesh.triangles[t].map(|v| {
            if remap[v] == usize::MAX {
                remap[v] = vertices.len();
                vertices.push(mesh.vertices[v]);
            }
            remap[v]
        });
        triangles.push(tri);
    }
    let parent_tags: HashMap<[usize; 2], BoundaryTag> = mesh
        .boundary_edges
        .iter()
        .map(|(e, t)| (sorted_edge(e[0], e[1]), *t))
        .collect();
    let mut out = TriMesh { vertices, triangles, boundary_edges: Vec::new(), h: mesh.h };
    let mut inverse = vec![0usize; out.n_vertices()];
    for (old, &new) in remap.iter().enumerate() {
        if new != usize::MAX {
            inverse[new] = old;
        }
    }
    let mut edges: Vec<_> = out
        .edge_incidence()
        .into_iter()
        .filter(|&(_, n)| n == 1)
        .map(|(e, _)| {
            let parent = sorted_edge(inverse[e[0]], inverse[e[1]]);
            let tag = parent_tags.get(&parent).copied().unwrap_or_else(|| {
                sub.side_of_segment(out.vertices[e[0]], out.vertices[e[1]])
                    .unwrap_or(BoundaryTag::Free)
            });
            (e, tag)
        })
        .collect();
    edges.sort_by_key(|(e, _)| *e);
    out.boundary_edges = edges;
    Ok(out)
}

pub(crate) fn signed_area(vertices: &[[f64; 2]], t: [usize; 3]) -> f64 {
    let [a, b, c] = t.map(|v| vertices[v]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn sorted_edge(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// `d` strictly inside the circumcircle of the counterclockwise triangle
/// `a, b, c`.
fn in_circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    let det = adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
    det > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn coarse_mesh_is_valid() {
        let m = generate_triangular(&Rect::omega(), 0.5).unwrap();
        assert!(m.n_triangles() >= 16);
        assert!((0..m.n_triangles()).all(|t| m.signed_area(t) > 0.0));
        m.validate().unwrap();
        assert!(!m.interior_vertices().is_empty());
    }

    #[test]
    fn rejects_meshes_without_interior_vertex() {
        assert!(generate_triangular(&Rect::omega(), 2.5).is_err());
        assert!(generate_triangular(&Rect::omega(), 0.0).is_err());
        assert!(generate_triangular(&Rect::omega(), -1.0).is_err());
    }

    #[test]
    fn forward_scale_mesh_has_about_a_million_triangles() {
        let m = generate_triangular(&Rect::omega(), 2.5e-3).unwrap();
        assert_eq!(m.n_triangles(), 2 * 800 * 800);
        assert!((m.total_area() - 4.0).abs() <= 4e-10);
    }

    #[test]
    fn boundary_tags_cover_each_side() {
        let r = Rect::omega();
        let m = generate_triangular(&r, 0.25).unwrap();
        for side in BoundaryTag::SIDES {
            let len: f64 = m
                .boundary_edges
                .iter()
                .filter(|(_, t)| *t == side)
                .map(|(e, _)| dist(m.vertices[e[0]], m.vertices[e[1]]))
                .sum();
            assert!((len - 2.0).abs() < 1e-12, "{side}: {len}");
        }
    }

    #[test]
    fn restrict_to_full_domain_is_identity() {
        let m = generate_triangular(&Rect::omega(), 0.2).unwrap();
        let r = restrict(&m, &Rect::omega()).unwrap();
        assert_eq!(r.n_triangles(), m.n_triangles());
        r.validate().unwrap();
    }

    #[test]
    fn restrict_to_subdomain() {
        let m = generate_triangular(&Rect::omega(), 0.05).unwrap();
        let d = Rect::subdomain();
        let r = restrict(&m, &d).unwrap();
        r.validate().unwrap();
        assert!((0..r.n_triangles()).all(|t| d.contains(r.barycenter(t))));
        assert!((r.total_area() - d.area()).abs() <= d.perimeter() * m.h);
    }

    #[test]
    fn empty_restriction_is_rejected() {
        let m = generate_triangular(&Rect::omega(), 0.5).unwrap();
        let far = Rect::new(5.0, 6.0, 5.0, 6.0).unwrap();
        assert!(restrict(&m, &far).is_err());
    }

    #[test]
    fn halving_h_at_least_triples_triangle_count() {
        let r = Rect::subdomain();
        for h in [0.2, 0.1, 0.05] {
            let a = generate_triangular(&r, h).unwrap().n_triangles();
            let b = generate_triangular(&r, h / 2.0).unwrap().n_triangles();
            assert!(b >= 3 * a);
        }
    }

    #[test]
    fn gradients_reproduce_affine_fields() {
        let m = generate_triangular(&Rect::omega(), 0.3).unwrap();
        for t in 0..m.n_triangles() {
            let (g, _) = m.gradients(t);
            let f = |p: [f64; 2]| 2.0 * p[0] - 3.0 * p[1] + 1.0;
            let mut grad = [0.0; 2];
            for k in 0..3 {
                let v = f(m.vertices[m.triangles[t][k]]);
                grad[0] += v * g[k][0];
                grad[1] += v * g[k][1];
            }
            assert!((grad[0] - 2.0).abs() < 1e-12 && (grad[1] + 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn locally_delaunay() {
        let m = generate_triangular(&Rect::omega(), 0.1).unwrap();
        let vt = m.vertex_triangles();
        for (t, tri) in m.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|v| m.vertices[v]);
            let mut near: Vec<usize> = tri.iter().flat_map(|&v| vt[v].iter().flat_map(|&s| m.triangles[s])).collect();
            near.sort_unstable();
            near.dedup();
            for v in near {
                if !tri.contains(&v) {
                    assert!(!in_circumcircle(a, b, c, m.vertices[v]), "triangle {t}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn area_and_shape_bounds(
            x0 in -2.0f64..0.0, w in 0.5f64..3.0, hh in 0.5f64..3.0,
            frac in 0.02f64..0.2, seed in any::<u64>(),
        ) {
            let r = Rect::new(x0, x0 + w, -hh / 2.0, hh / 2.0).unwrap();
            let h = frac * w.min(hh);
            let m = generate_triangular_seeded(&r, h, seed).unwrap();
            prop_assert!(m.validate().is_ok());
            prop_assert!((m.total_area() - r.area()).abs() <= 1e-10 * r.area());
            prop_assert!(m.max_circumdiameter() <= 2.0 * h);
        }
    }
}
