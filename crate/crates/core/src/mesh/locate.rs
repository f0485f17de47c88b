use std::ops::Deref;

use super::{Rect, TriMesh};

/// Uniform bucket grid over triangle bounding boxes for point location.
/// `M` is any handle to the mesh, such as `&TriMesh` or `Arc<TriMesh>`.
pub struct PointLocator<M: Deref<Target = TriMesh>> {
    mesh: M,
    bbox: Rect,
    nx: usize,
    ny: usize,
    cell: [f64; 2],
    start: Vec<usize>,
    items: Vec<usize>,
}

impl<M: Deref<Target = TriMesh>> PointLocator<M> {
    pub fn new(mesh: M) -> Self {
        let bbox = mesh.bounding_box();
        let nt = mesh.n_triangles().max(1);
        // About two triangles per bucket.
        let side = ((bbox.width() * bbox.height()) / nt as f64 * 2.0).sqrt().max(1e-12);
        let nx = ((bbox.width() / side).ceil() as usize).clamp(1, 4096);
        let ny = ((bbox.height() / side).ceil() as usize).clamp(1, 4096);
        let cell = [bbox.width() / nx as f64, bbox.height() / ny as f64];

        let range = |t: usize| {
            let [a, b, c] = mesh.triangles[t].map(|v| mesh.vertices[v]);
            let lo = [a[0].min(b[0]).min(c[0]), a[1].min(b[1]).min(c[1])];
            let hi = [a[0].max(b[0]).max(c[0]), a[1].max(b[1]).max(c[1])];
            let ix = |x: f64| (((x - bbox.x0) / cell[0]).floor().max(0.0) as usize).min(nx - 1);
            let iy = |y: f64| (((y - bbox.y0) / cell[1]).floor().max(0.0) as usize).min(ny - 1);
            (ix(lo[0]), ix(hi[0]), iy(lo[1]), iy(hi[1]))
        };

        let mut count = vec![0usize; nx * ny + 1];
        for t in 0..mesh.n_triangles() {
            let (i0, i1, j0, j1) = range(t);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    count[j * nx + i + 1] += 1;
                }
            }
        }
        for k in 1..count.len() {
            count[k] += count[k - 1];
        }
        let mut fill = count.clone();
        let mut items = vec![0usize; count[nx * ny]];
        for t in 0..mesh.n_triangles() {
            let (i0, i1, j0, j1) = range(t);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let b = j * nx + i;
                    items[fill[b]] = t;
                    fill[b] += 1;
                }
            }
        }
        Self { mesh, bbox, nx, ny, cell, start: count, items }
    }

    /// Triangle containing `p` and the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let tol = 1e-10 * self.bbox.width().max(self.bbox.height());
        if p[0] < self.bbox.x0 - tol
            || p[0] > self.bbox.x1 + tol
            || p[1] < self.bbox.y0 - tol
            || p[1] > self.bbox.y1 + tol
        {
            return None;
        }
        let i = (((p[0] - self.bbox.x0) / self.cell[0]).floor().max(0.0) as usize).min(self.nx - 1);
        let j = (((p[1] - self.bbox.y0) / self.cell[1]).floor().max(0.0) as usize).min(self.ny - 1);
        let b = j * self.nx + i;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.items[self.start[b]..self.start[b + 1]] {
            let l = self.barycentric(t, p);
            let worst = l[0].min(l[1]).min(l[2]);
            if worst >= 0.0 {
                return Some((t, l));
            }
            if best.is_none_or(|(_, _, w)| worst > w) {
                best = Some((t, l, worst));
            }
        }
        // Accept points a rounding error outside the closest triangle.
        best.filter(|&(_, _, w)| w > -1e-9).map(|(t, l, _)| (t, l))
    }

    fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.mesh.triangles[t].map(|v| self.mesh.vertices[v]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }
}
