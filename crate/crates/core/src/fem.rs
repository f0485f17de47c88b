//! P¹ assembly helpers shared by the forward solver and the inversion.

use crate::mesh::TriMesh;
use crate::sparse::CsrMatrix;

/// Sparsity pattern of P¹ matrices with `ncomp` interleaved components per
/// vertex. Dof `(v, c)` has index `ncomp * v + c`.
pub struct P1Pattern {
    ncomp: usize,
    nbr_ptr: Vec<usize>,
    nbrs: Vec<usize>,
}

impl P1Pattern {
    pub fn new(mesh: &TriMesh, ncomp: usize) -> Self {
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
        for t in &mesh.triangles {
            for &a in t {
                lists[a].extend_from_slice(t);
            }
        }
        let mut nbr_ptr = Vec::with_capacity(lists.len() + 1);
        let mut nbrs = Vec::new();
        nbr_ptr.push(0);
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            nbrs.extend(l);
            nbr_ptr.push(nbrs.len());
        }
        Self { ncomp, nbr_ptr, nbrs }
    }

    /// Matrix with this pattern and all entries zero.
    pub fn zeros(&self) -> CsrMatrix {
        let nv = self.nbr_ptr.len() - 1;
        let n = nv * self.ncomp;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(self.nbrs.len() * self.ncomp * self.ncomp);
        row_ptr.push(0);
        for v in 0..nv {
            for _ in 0..self.ncomp {
                for &w in &self.nbrs[self.nbr_ptr[v]..self.nbr_ptr[v + 1]] {
                    for c in 0..self.ncomp {
                        col_idx.push(self.ncomp * w + c);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        let nnz = col_idx.len();
        CsrMatrix { nrows: n, ncols: n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    /// Add `val` at dof pair `((v, c), (w, d))`.
    #[inline]
    pub fn add(&self, m: &mut CsrMatrix, v: usize, c: usize, w: usize, d: usize, val: f64) {
        let list = &self.nbrs[self.nbr_ptr[v]..self.nbr_ptr[v + 1]];
        let pos = list.binary_search(&w).expect("vertex pair outside pattern");
        let row = self.ncomp * v + c;
        m.values[m.row_ptr[row] + pos * self.ncomp + d] += val;
    }
}

/// Scalar P¹ stiffness `∫ ∇φ_a · ∇φ_b` and consistent mass `∫ φ_a φ_b`.
pub fn scalar_stiffness_and_mass(mesh: &TriMesh) -> (CsrMatrix, CsrMatrix) {
    let pat = P1Pattern::new(mesh, 1);
    let mut k = pat.zeros();
    let mut m = pat.zeros();
    for t in 0..mesh.n_triangles() {
        let (g, area) = mesh.gradients(t);
        let tri = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                let kab = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                let mab = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                pat.add(&mut k, tri[a], 0, tri[b], 0, kab);
                pat.add(&mut m, tri[a], 0, tri[b], 0, mab);
            }
        }
    }
    (k, m)
}

/// Principal submatrix on `keep` (in the given order).
pub fn submatrix(a: &CsrMatrix, keep: &[usize]) -> CsrMatrix {
    let mut map = vec![usize::MAX; a.ncols];
    for (new, &old) in keep.iter().enumerate() {
        map[old] = new;
    }
    let mut row_ptr = Vec::with_capacity(keep.len() + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for &i in keep {
        let mut row: Vec<(usize, f64)> = a.row(i).filter(|&(j, _)| map[j] != usize::MAX).map(|(j, v)| (map[j], v)).collect();
        row.sort_by_key(|e| e.0);
        for (j, v) in row {
            col_idx.push(j);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    CsrMatrix { nrows: keep.len(), ncols: keep.len(), row_ptr, col_idx, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_triangular, Rect};

    #[test]
    fn scalar_matrices_annihilate_and_integrate_constants() {
        let mesh = generate_triangular(&Rect::omega(), 0.2).unwrap();
        let (k, m) = scalar_stiffness_and_mass(&mesh);
        let ones = vec![1.0; mesh.n_vertices()];
        assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        let total: f64 = m.mul_vec(&ones).iter().sum();
        assert!((total - 4.0).abs() < 1e-12);
        assert!(k.asymmetry() < 1e-14 && m.asymmetry() < 1e-14);
    }

    #[test]
    fn submatrix_keeps_requested_block() {
        let mesh = generate_triangular(&Rect::omega(), 0.5).unwrap();
        let (k, _) = scalar_stiffness_and_mass(&mesh);
        let keep = mesh.interior_vertices();
        let s = submatrix(&k, &keep);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                assert_eq!(s.get(a, b), k.get(i, j));
            }
        }
    }
}
