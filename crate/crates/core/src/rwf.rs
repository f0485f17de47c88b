//! Discrete Reverse Weak Formulation: the data tensor, the rectangular
//! operator matrix, the load vector and the two Gram matrices.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fem::{scalar_stiffness_and_mass, submatrix};
use crate::forward::{compute_strain, VectorField};
use crate::mesh::{HoneycombPair, PointLocator, TriMesh};
use crate::sparse::{write_matrix_market, write_matrix_market_vector, CscMatrix, CsrMatrix, TripletBuilder};
use crate::tensors::{ElasticBasis, Mat2};

/// Evaluate a P¹ field at the vertices of `target`.
pub fn interpolate_to_mesh(u: &VectorField, target: &Arc<TriMesh>) -> Result<VectorField> {
    if Arc::ptr_eq(&u.mesh, target) {
        return Ok(u.clone());
    }
    let locator = PointLocator::new(&*u.mesh);
    let mut values = Vec::with_capacity(2 * target.n_vertices());
    for &p in &target.vertices {
        let (t, l) = locator.locate(p).ok_or(Error::OutsideMesh { x: p[0], y: p[1] })?;
        let tri = u.mesh.triangles[t];
        for c in 0..2 {
            values.push((0..3).map(|k| l[k] * u.values[2 * tri[k] + c]).sum());
        }
    }
    VectorField::new(target.clone(), values)
}

/// Evaluate a forward field on the honeycomb sub-triangulation.
pub fn interpolate_to_inversion(u: &VectorField, pair: &HoneycombPair) -> Result<VectorField> {
    interpolate_to_mesh(u, &pair.sub_tri)
}

/// Add i.i.d. Gaussian noise with standard deviation `level · rms(u)`.
pub fn add_noise(u: &VectorField, level: f64, seed: u64) -> Result<VectorField> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise level must be nonnegative, got {level}")));
    }
    if level == 0.0 {
        return Ok(u.clone());
    }
    let normal = Normal::new(0.0, level * u.rms()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = u.values.iter().map(|v| v + normal.sample(&mut rng)).collect();
    VectorField::new(u.mesh.clone(), values)
}

/// Displacement fields on the inversion mesh with optional load densities.
#[derive(Debug, Clone)]
pub struct DataSet {
    pub fields: Vec<VectorField>,
    pub loads: Vec<Option<VectorField>>,
}

impl DataSet {
    pub fn new(fields: Vec<VectorField>, loads: Vec<Option<VectorField>>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidArgument("data set needs at least one field".into()));
        }
        if loads.len() != fields.len() {
            return Err(Error::InvalidArgument("one load entry per field is required".into()));
        }
        let mesh = &fields[0].mesh;
        let same = |f: &VectorField| Arc::ptr_eq(&f.mesh, mesh);
        if !fields.iter().all(same) || !loads.iter().flatten().all(same) {
            return Err(Error::InvalidArgument("all fields must share the inversion mesh".into()));
        }
        Ok(Self { fields, loads })
    }

    /// Load-free data.
    pub fn homogeneous(fields: Vec<VectorField>) -> Result<Self> {
        let loads = vec![None; fields.len()];
        Self::new(fields, loads)
    }

    pub fn m(&self) -> usize {
        self.fields.len()
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.fields[0].mesh
    }

    pub fn is_homogeneous(&self) -> bool {
        self.loads.iter().all(Option::is_none)
    }
}

/// Per-triangle blocks `C_k : ε(u_ℓ)`.
#[derive(Debug, Clone)]
pub struct TuTensor {
    pub m: usize,
    pub n: usize,
    pub n_triangles: usize,
    /// Block `(t, ℓ, k)` at index `(t·m + ℓ)·n + k`.
    pub blocks: Vec<Mat2>,
}

impl TuTensor {
    #[inline]
    pub fn block(&self, t: usize, l: usize, k: usize) -> &Mat2 {
        &self.blocks[(t * self.m + l) * self.n + k]
    }

    /// `(2m) × (2n)` unfolding at triangle `t`: entry `(2ℓ + i, 2k + j)` is
    /// `(C_k : ε(u_ℓ))_ij`.
    pub fn unfold(&self, t: usize) -> DMatrix<f64> {
        DMatrix::from_fn(2 * self.m, 2 * self.n, |r, c| self.block(t, r / 2, c / 2)[r % 2][c % 2])
    }

    pub fn scaled(&self, a: f64) -> Self {
        let blocks = self.blocks.iter().map(|b| b.map(|r| r.map(|v| a * v))).collect();
        Self { blocks, ..*self }
    }
}

pub fn assemble_t(data: &DataSet, basis: &ElasticBasis) -> TuTensor {
    let strains: Vec<Vec<Mat2>> = data.fields.iter().map(compute_strain).collect();
    let (m, n) = (data.m(), basis.len());
    let nt = data.mesh().n_triangles();
    let mut blocks = Vec::with_capacity(nt * m * n);
    for t in 0..nt {
        for strain in &strains {
            for c in &basis.tensors {
                blocks.push(c.apply(&strain[t]));
            }
        }
    }
    TuTensor { m, n, n_triangles: nt, blocks }
}

/// Spectral condition number of the unfolded block on each triangle;
/// infinite when the block cannot have full column rank.
pub fn condition_map(t: &TuTensor) -> Vec<f64> {
    (0..t.n_triangles)
        .map(|tri| {
            if t.m < t.n {
                return f64::INFINITY;
            }
            let s = t.unfold(tri).singular_values();
            let hi = s.max();
            let lo = s.min();
            if lo == 0.0 || !lo.is_finite() {
                f64::INFINITY
            } else {
                hi / lo
            }
        })
        .collect()
}

/// Assembled discrete system `𝔸 m = g` with its Gram matrices.
///
/// Rows of `𝔸` are ordered `((ℓ·2) + c)·n_test + v` over data field `ℓ`,
/// component `c` and test vertex `v`; columns `k·n_cells + cell`.
#[derive(Debug, Clone)]
pub struct RwfSystem {
    pub a: CscMatrix,
    pub g: Vec<f64>,
    pub s_v: CsrMatrix,
    /// Diagonal of `S_M`.
    pub s_m: Vec<f64>,
    pub m: usize,
    pub n: usize,
    pub n_cells: usize,
    pub test_vertices: Vec<usize>,
}

impl RwfSystem {
    pub fn p(&self) -> usize {
        self.a.nrows
    }

    pub fn q(&self) -> usize {
        self.a.ncols
    }

    pub fn is_homogeneous(&self) -> bool {
        self.g.iter().all(|&v| v == 0.0)
    }

    pub fn s_m_matrix(&self) -> CsrMatrix {
        CsrMatrix::diagonal(&self.s_m)
    }

    /// Write `A.mtx`, `S_V.mtx`, `S_M.mtx` and `g.mtx` into `dir`.
    pub fn export_matrix_market(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let open = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
        let mut w = open("A.mtx")?;
        write_matrix_market(&mut w, self.p(), self.q(), self.a.triplets())?;
        w.flush()?;
        let mut w = open("S_V.mtx")?;
        write_matrix_market(&mut w, self.p(), self.p(), self.s_v.triplets())?;
        w.flush()?;
        let mut w = open("S_M.mtx")?;
        write_matrix_market(&mut w, self.q(), self.q(), self.s_m.iter().enumerate().map(|(i, &v)| (i, i, v)))?;
        w.flush()?;
        let mut w = open("g.mtx")?;
        write_matrix_market_vector(&mut w, &self.g)?;
        w.flush()
    }
}

/// Assemble on a honeycomb pair, testing against the interior vertices of
/// its sub-triangulation.
pub fn assemble_system(t: &TuTensor, data: &DataSet, pair: &HoneycombPair) -> Result<RwfSystem> {
    if !Arc::ptr_eq(data.mesh(), &pair.sub_tri) {
        return Err(Error::InvalidArgument("data does not live on the honeycomb sub-triangulation".into()));
    }
    let test = pair.test_vertices();
    assemble_with_test_vertices(t, data, &pair.cell_of_triangle, &pair.cell_area, &test)
}

/// Assembly with an explicit test-vertex set and cell map.
pub fn assemble_with_test_vertices(
    t: &TuTensor,
    data: &DataSet,
    cell_of_triangle: &[usize],
    cell_area: &[f64],
    test_vertices: &[usize],
) -> Result<RwfSystem> {
    let mesh = data.mesh();
    if test_vertices.is_empty() {
        return Err(Error::EmptyTestSpace);
    }
    if t.n_triangles != mesh.n_triangles() || cell_of_triangle.len() != mesh.n_triangles() || t.m != data.m() {
        return Err(Error::InvalidArgument("tensor, data and cell map sizes disagree".into()));
    }
    let (m, n) = (t.m, t.n);
    let n_cells = cell_area.len();
    let nt = test_vertices.len();
    let mut test_index = vec![usize::MAX; mesh.n_vertices()];
    for (i, &v) in test_vertices.iter().enumerate() {
        test_index[v] = i;
    }
    let p = 2 * m * nt;
    let q = n * n_cells;

    let mut trip = TripletBuilder::with_capacity(p, q, mesh.n_triangles() * 6 * m * n);
    for tri in 0..mesh.n_triangles() {
        let (grad, area) = mesh.gradients(tri);
        let cell = cell_of_triangle[tri];
        for (a, &v) in mesh.triangles[tri].iter().enumerate() {
            let vi = test_index[v];
            if vi == usize::MAX {
                continue;
            }
            for l in 0..m {
                for k in 0..n {
                    let s = t.block(tri, l, k);
                    let col = k * n_cells + cell;
                    for c in 0..2 {
                        let val = area * (s[c][0] * grad[a][0] + s[c][1] * grad[a][1]);
                        trip.push((2 * l + c) * nt + vi, col, val);
                    }
                }
            }
        }
    }
    let a = trip.into_csc();

    let (k_s, m_s) = scalar_stiffness_and_mass(mesh);
    let mut gram = k_s.clone();
    for (x, y) in gram.values.iter_mut().zip(&m_s.values) {
        *x += y;
    }
    let block = submatrix(&gram, test_vertices);
    let s_v = block_diagonal(&block, 2 * m);

    let mut g = vec![0.0; p];
    for (l, load) in data.loads.iter().enumerate() {
        let Some(f) = load else { continue };
        for c in 0..2 {
            let fc: Vec<f64> = (0..mesh.n_vertices()).map(|w| f.values[2 * w + c]).collect();
            let mf = m_s.mul_vec(&fc);
            for (vi, &v) in test_vertices.iter().enumerate() {
                g[(2 * l + c) * nt + vi] = mf[v];
            }
        }
    }

    let s_m = (0..n).flat_map(|_| cell_area.iter().copied()).collect();
    Ok(RwfSystem { a, g, s_v, s_m, m, n, n_cells, test_vertices: test_vertices.to_vec() })
}

fn block_diagonal(b: &CsrMatrix, copies: usize) -> CsrMatrix {
    let n = b.nrows;
    let mut row_ptr = Vec::with_capacity(n * copies + 1);
    let mut col_idx = Vec::with_capacity(b.nnz() * copies);
    let mut values = Vec::with_capacity(b.nnz() * copies);
    row_ptr.push(0);
    for k in 0..copies {
        for i in 0..n {
            for (j, v) in b.row(i) {
                col_idx.push(k * n + j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
    }
    CsrMatrix { nrows: n * copies, ncols: n * copies, row_ptr, col_idx, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_honeycomb, generate_triangular, Rect};
    use crate::tensors::{make_identity_basis, make_isotropic_basis};

    fn two_triangles() -> Arc<TriMesh> {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let tris = vec![[0, 1, 2], [0, 2, 3]];
        let r = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
        Arc::new(TriMesh::from_parts(verts, tris, &r, 1.0).unwrap())
    }

    #[test]
    fn two_triangle_entries_match_hand_integration() {
        // u = (x + 2y, 3x − y) has ε = [[1, 2.5], [2.5, −1]]; with C = 𝐈 the
        // stress equals ε and row (c, v) is ∫ σ_cb ∂_b φ_v over the square.
        let mesh = two_triangles();
        let u = VectorField::from_fn(mesh.clone(), |p| [p[0] + 2.0 * p[1], 3.0 * p[0] - p[1]]);
        let data = DataSet::homogeneous(vec![u]).unwrap();
        let t = assemble_t(&data, &make_identity_basis());
        let sys = assemble_with_test_vertices(&t, &data, &[0, 0], &[1.0], &[0, 1, 2, 3]).unwrap();
        let hand = [-1.75, -0.75, 1.75, 0.75, -0.75, 1.75, 0.75, -1.75];
        let dense = sys.a.to_dense();
        assert_eq!(dense.shape(), (8, 1));
        for (i, h) in hand.iter().enumerate() {
            assert!((dense[(i, 0)] - h).abs() < 1e-12, "row {i}: {} vs {h}", dense[(i, 0)]);
        }
    }

    #[test]
    fn identity_basis_blocks_are_strains() {
        let mesh = two_triangles();
        let u = VectorField::from_fn(mesh.clone(), |p| [p[0] * 0.5, p[0] - p[1]]);
        let data = DataSet::homogeneous(vec![u.clone()]).unwrap();
        let t = assemble_t(&data, &make_identity_basis());
        let eps = compute_strain(&u);
        for tri in 0..2 {
            assert_eq!(*t.block(tri, 0, 0), eps[tri]);
        }
        let cm = condition_map(&t);
        assert!((cm[0] - crate::forward::cond2(&eps[0])).abs() < 1e-12);
    }

    #[test]
    fn lame_blocks_are_twice_strain_and_divergence() {
        let mesh = two_triangles();
        let u = VectorField::from_fn(mesh.clone(), |p| [p[0] * 0.3 + p[1], -p[1] * 0.7]);
        let data = DataSet::homogeneous(vec![u.clone()]).unwrap();
        let t = assemble_t(&data, &make_isotropic_basis());
        let eps = compute_strain(&u);
        let div = eps[0][0][0] + eps[0][1][1];
        let b0 = t.block(0, 0, 0);
        let b1 = t.block(0, 0, 1);
        for i in 0..2 {
            for j in 0..2 {
                assert!((b0[i][j] - 2.0 * eps[0][i][j]).abs() < 1e-15);
                let id = if i == j { div } else { 0.0 };
                assert!((b1[i][j] - id).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn condition_map_markers() {
        let t = TuTensor { m: 1, n: 1, n_triangles: 2, blocks: vec![[[1.0, 0.0], [0.0, 1.0]], [[1.0, 1.0], [1.0, 1.0]]] };
        let c = condition_map(&t);
        assert!((c[0] - 1.0).abs() < 1e-14);
        assert!(c[1].is_infinite());
        let under = TuTensor { m: 1, n: 2, n_triangles: 1, blocks: vec![[[1.0, 0.0], [0.0, 1.0]]; 2] };
        assert!(condition_map(&under)[0].is_infinite());
    }

    fn honeycomb_data(m: usize) -> (HoneycombPair, DataSet) {
        let pair = generate_honeycomb(&Rect::subdomain(), 0.1).unwrap();
        let fields = (0..m)
            .map(|l| VectorField::from_fn(pair.sub_tri.clone(), |p| [p[0] * p[1] + l as f64 * p[0], (p[0] - p[1] * (l + 1) as f64).sin()]))
            .collect();
        (pair, DataSet::homogeneous(fields).unwrap())
    }

    #[test]
    fn dimensions_and_gram_properties() {
        let (pair, data) = honeycomb_data(3);
        let basis = make_isotropic_basis();
        let t = assemble_t(&data, &basis);
        let sys = assemble_system(&t, &data, &pair).unwrap();
        let nt = pair.test_vertices().len();
        assert_eq!(sys.p(), 2 * 3 * nt);
        assert_eq!(sys.q(), 2 * pair.n_cells());
        assert!(sys.is_homogeneous());
        assert!(sys.s_v.asymmetry() < 1e-14);
        assert!(crate::sparse::Cholesky::new(&sys.s_v).is_ok());
        assert!(sys.s_m.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn operator_is_linear_in_the_tensor() {
        let (pair, data) = honeycomb_data(2);
        let t = assemble_t(&data, &make_isotropic_basis());
        let a = assemble_system(&t, &data, &pair).unwrap();
        let b = assemble_system(&t.scaled(2.0), &data, &pair).unwrap();
        assert_eq!(a.a.row_idx, b.a.row_idx);
        for (x, y) in a.a.values.iter().zip(&b.a.values) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn loads_enter_through_the_mass_matrix() {
        let (pair, data) = honeycomb_data(1);
        let f = VectorField::from_fn(pair.sub_tri.clone(), |_| [1.0, 0.0]);
        let data = DataSet::new(data.fields, vec![Some(f)]).unwrap();
        let t = assemble_t(&data, &make_identity_basis());
        let sys = assemble_system(&t, &data, &pair).unwrap();
        let nt = sys.test_vertices.len();
        assert!(!sys.is_homogeneous());
        // ∫ φ_v over the patch is positive and the y component vanishes.
        assert!(sys.g[..nt].iter().all(|&v| v > 0.0));
        assert!(sys.g[nt..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_test_space_is_rejected() {
        let mesh = two_triangles();
        let u = VectorField::from_fn(mesh.clone(), |p| p);
        let data = DataSet::homogeneous(vec![u]).unwrap();
        let t = assemble_t(&data, &make_identity_basis());
        let err = assemble_with_test_vertices(&t, &data, &[0, 0], &[1.0], &[]).unwrap_err();
        assert!(matches!(err, Error::EmptyTestSpace));
    }

    #[test]
    fn interpolation_of_affine_fields_is_exact() {
        let fwd = Arc::new(generate_triangular(&Rect::omega(), 0.1).unwrap());
        let pair = generate_honeycomb(&Rect::subdomain(), 0.05).unwrap();
        let f = |p: [f64; 2]| [0.5 - p[0] + 2.0 * p[1], 3.0 * p[0] + 0.25];
        let u = VectorField::from_fn(fwd.clone(), f);
        let v = interpolate_to_inversion(&u, &pair).unwrap();
        for (i, &p) in pair.sub_tri.vertices.iter().enumerate() {
            let e = f(p);
            assert!((v.at(i)[0] - e[0]).abs() < 1e-12 && (v.at(i)[1] - e[1]).abs() < 1e-12);
        }
        let same = interpolate_to_mesh(&u, &fwd).unwrap();
        assert_eq!(same.values, u.values);
        let outside = generate_honeycomb(&Rect::new(0.5, 1.5, 0.0, 1.0).unwrap(), 0.2).unwrap();
        assert!(matches!(interpolate_to_inversion(&u, &outside), Err(Error::OutsideMesh { .. })));
    }

    #[test]
    fn interpolation_error_is_second_order() {
        let f = |p: [f64; 2]| [(2.0 * p[0]).sin() * p[1], (p[0] + p[1]).cos()];
        let pair = generate_honeycomb(&Rect::subdomain(), 0.05).unwrap();
        let err = |h: f64| {
            let fwd = Arc::new(generate_triangular(&Rect::omega(), h).unwrap());
            let v = interpolate_to_inversion(&VectorField::from_fn(fwd, f), &pair).unwrap();
            pair.sub_tri
                .vertices
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    let e = f(p);
                    (v.at(i)[0] - e[0]).abs().max((v.at(i)[1] - e[1]).abs())
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.04), err(0.02));
        assert!((e1 / e2).log2() > 1.5, "{e1} {e2}");
    }

    #[test]
    fn noise_statistics_and_reproducibility() {
        let mesh = Arc::new(generate_triangular(&Rect::omega(), 0.02).unwrap());
        let u = VectorField::from_fn(mesh, |p| [p[0] + 0.5, p[1] * p[0]]);
        assert!(u.values.len() >= 10_000);
        assert_eq!(add_noise(&u, 0.0, 7).unwrap().values, u.values);
        let a = add_noise(&u, 0.01, 7).unwrap();
        let b = add_noise(&u, 0.01, 7).unwrap();
        assert_eq!(a.values, b.values);
        let diff: Vec<f64> = a.values.iter().zip(&u.values).map(|(x, y)| x - y).collect();
        let rms = (diff.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64).sqrt();
        assert!((rms / (0.01 * u.rms()) - 1.0).abs() < 0.1);
        assert!(add_noise(&u, -1.0, 0).is_err());
    }

    #[test]
    fn matrix_market_export() {
        let (pair, data) = honeycomb_data(1);
        let t = assemble_t(&data, &make_identity_basis());
        let sys = assemble_system(&t, &data, &pair).unwrap();
        let dir = tempfile::tempdir().unwrap();
        sys.export_matrix_market(dir.path()).unwrap();
        let a = std::fs::read_to_string(dir.path().join("A.mtx")).unwrap();
        let header = a.lines().nth(1).unwrap();
        assert_eq!(header, format!("{} {} {}", sys.p(), sys.q(), sys.a.nnz()));
    }
}
