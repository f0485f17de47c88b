//! Expanded first-order form `∇μ + B·μ = F` of the reverse problem and the
//! characteristic flow of `B` along paths.
//!
//! Third-order tensors are indexed `(i, j, k)` with `j` the spatial
//! direction. The contraction `B·μ` sums over the last index, so a kernel
//! element `μ` satisfies `∂_j μ = −B_j μ` with `(B_j)_{ik} = B_{ijk}`.

mod expanded;
mod path;
mod probe;
mod resolvent;

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{PointLocator, Rect, TriMesh};

pub use expanded::{
    analytic_divergence, discrete_divergence, expanded_form, expanded_form_discrete, left_inverse, tu_point,
    ExpandedForm, LeftInverse, MatrixField, VectorFn,
};
pub use path::{probe_loops, PathCurve};
pub use resolvent::DEFAULT_STEPS;
pub use probe::{conservativity_probe, gram_independence, GramResult, ProbeResult};
pub use resolvent::{resolvent, resolvent_laws_check, transport, LawReport, ResolventResult, Transport};

/// Dense third-order tensor stored row-major in `(i, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThirdOrder {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl ThirdOrder {
    pub fn zeros(a: usize, b: usize, c: usize) -> Self {
        Self { dims: [a, b, c], data: vec![0.0; a * b * c] }
    }

    pub fn from_fn(a: usize, b: usize, c: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(a, b, c);
        for i in 0..a {
            for j in 0..b {
                for k in 0..c {
                    t.data[(i * b + j) * c + k] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn filled(a: usize, b: usize, c: usize, v: f64) -> Self {
        Self { dims: [a, b, c], data: vec![v; a * b * c] }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = (i * self.dims[1] + j) * self.dims[2] + k;
        self.data[idx] = v;
    }

    /// Matrix `(i, k) ↦ T_{ijk}` for fixed `j`.
    pub fn slice(&self, j: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dims[0], self.dims[2], |i, k| self.get(i, j, k))
    }

    /// `(T·v)_{ij} = Σ_k T_{ijk} v_k`.
    pub fn dot_last(&self, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dims[0], self.dims[1], |i, j| (0..self.dims[2]).map(|k| self.get(i, j, k) * v[k]).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dims, other.dims);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

type EvalFn = dyn Fn([f64; 2]) -> ThirdOrder + Send + Sync;

/// A third-order tensor field over a rectangle, evaluated by closure.
#[derive(Clone)]
pub struct ThirdOrderField {
    dims: [usize; 3],
    domain: Rect,
    eval: Arc<EvalFn>,
}

impl std::fmt::Debug for ThirdOrderField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThirdOrderField").field("dims", &self.dims).field("domain", &self.domain).finish()
    }
}

impl ThirdOrderField {
    /// Field with values of shape `dims`; `f` must return that shape.
    pub fn from_fn(dims: [usize; 3], domain: Rect, f: impl Fn([f64; 2]) -> ThirdOrder + Send + Sync + 'static) -> Self {
        Self { dims, domain, eval: Arc::new(f) }
    }

    /// `B = 0` with `n` components.
    pub fn zero(n: usize, domain: Rect) -> Self {
        Self::from_fn([n, 2, n], domain, move |_| ThirdOrder::zeros(n, 2, n))
    }

    /// Scalar field `B = ∇ν`, whose kernel is spanned by `exp(−ν)`.
    pub fn scalar_gradient(domain: Rect, grad: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self::from_fn([1, 2, 1], domain, move |x| {
            let g = grad(x);
            ThirdOrder::from_fn(1, 2, 1, |_, j, _| g[j])
        })
    }

    /// `B = M⁻¹·DM` with `(DM)_{ijk} = ∂_j M_{ik}`; `n`-conservative when `M`
    /// is invertible everywhere.
    pub fn similarity(
        n: usize,
        domain: Rect,
        m: impl Fn([f64; 2]) -> DMatrix<f64> + Send + Sync + 'static,
        dm: impl Fn([f64; 2]) -> [DMatrix<f64>; 2] + Send + Sync + 'static,
    ) -> Self {
        Self::from_fn([n, 2, n], domain, move |x| {
            let Some(inv) = m(x).try_inverse() else {
                return ThirdOrder::filled(n, 2, n, f64::NAN);
            };
            let d = dm(x);
            let bj = [&inv * &d[0], &inv * &d[1]];
            ThirdOrder::from_fn(n, 2, n, |i, j, k| bj[j][(i, k)])
        })
    }

    /// Diagonal stack `B_{iji} = (b_i)_j`, zero off the diagonal.
    pub fn diagonal(domain: Rect, b: Vec<Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>>) -> Self {
        let n = b.len();
        Self::from_fn([n, 2, n], domain, move |x| {
            let mut t = ThirdOrder::zeros(n, 2, n);
            for (i, bi) in b.iter().enumerate() {
                let v = bi(x);
                t.set(i, 0, i, v[0]);
                t.set(i, 1, i, v[1]);
            }
            t
        })
    }

    /// Piecewise constant field from one tensor per triangle. Points outside
    /// the mesh evaluate to NaN.
    pub fn per_triangle(mesh: Arc<TriMesh>, values: Vec<ThirdOrder>) -> Self {
        assert_eq!(values.len(), mesh.n_triangles(), "one tensor per triangle");
        let dims = values.first().map_or([0, 2, 0], |t| t.dims());
        let domain = mesh.bounding_box();
        let locator = PointLocator::new(mesh);
        Self::from_fn(dims, domain, move |x| match locator.locate(x) {
            Some((t, _)) => values[t].clone(),
            None => ThirdOrder::filled(dims[0], dims[1], dims[2], f64::NAN),
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn eval(&self, x: [f64; 2]) -> ThirdOrder {
        (self.eval)(x)
    }

    /// `Σ_j v_j B_j` for a direction `v`.
    pub fn directional(&self, x: [f64; 2], v: [f64; 2]) -> DMatrix<f64> {
        let t = self.eval(x);
        DMatrix::from_fn(self.dims[0], self.dims[2], |i, k| v[0] * t.get(i, 0, k) + v[1] * t.get(i, 1, k))
    }
}

/// Smooth, everywhere invertible random matrix field
/// `M_{ik}(x) = 2δ_{ik} + a_{ik} sin(w_{ik}·x + φ_{ik})` with `|a_{ik}| < 0.3/n`,
/// which keeps `M` strictly diagonally dominant.
pub fn random_similarity_field(n: usize, seed: u64, domain: Rect) -> ThirdOrderField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, [f64; 2], f64)> = (0..n * n)
        .map(|_| {
            let a = rng.random_range(-0.3 / n as f64..0.3 / n as f64);
            let w = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            (a, w, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let c1 = Arc::new(coeffs);
    let c2 = c1.clone();
    let m = move |x: [f64; 2]| {
        DMatrix::from_fn(n, n, |i, k| {
            let (a, w, p) = c1[i * n + k];
            let diag = if i == k { 2.0 } else { 0.0 };
            diag + a * (w[0] * x[0] + w[1] * x[1] + p).sin()
        })
    };
    let dm = move |x: [f64; 2]| {
        let d = |j: usize| {
            DMatrix::from_fn(n, n, |i, k| {
                let (a, w, p) = c2[i * n + k];
                a * w[j] * (w[0] * x[0] + w[1] * x[1] + p).cos()
            })
        };
        [d(0), d(1)]
    };
    ThirdOrderField::similarity(n, domain, m, dm)
}

/// Diagonal stack whose first `k` entries are gradients of smooth
/// potentials and whose remaining entries carry a rotational part of
/// nonzero curl. `k`-conservative.
pub fn mixed_diagonal_field(n: usize, k: usize, seed: u64, domain: Rect) -> ThirdOrderField {
    assert!(k <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b: Vec<Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>> = Vec::with_capacity(n);
    for i in 0..n {
        let a = rng.random_range(0.5..1.5);
        let w = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        // ∇(a sin(w·x)).
        let grad = move |x: [f64; 2]| {
            let c = a * (w[0] * x[0] + w[1] * x[1]).cos();
            [c * w[0], c * w[1]]
        };
        if i < k {
            b.push(Arc::new(grad));
        } else {
            // Rotation about a random center: curl 2s.
            let s = rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let c = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            b.push(Arc::new(move |x: [f64; 2]| {
                let g = grad(x);
                [g[0] - s * (x[1] - c[1]), g[1] + s * (x[0] - c[0])]
            }));
        }
    }
    ThirdOrderField::diagonal(domain, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn third_order_indexing_and_contraction() {
        let t = ThirdOrder::from_fn(2, 2, 3, |i, j, k| (100 * i + 10 * j + k) as f64);
        assert_eq!(t.get(1, 0, 2), 102.0);
        let s = t.slice(1);
        assert_eq!(s[(1, 2)], 112.0);
        let d = t.dot_last(&[1.0, 0.0, 2.0]);
        assert_eq!(d[(1, 1)], 110.0 + 2.0 * 112.0);
    }

    #[test]
    fn similarity_field_matches_hand_derivative() {
        // M = [[2 + x, y], [0, 1]], ∂_x M = [[1, 0], [0, 0]], ∂_y M = [[0, 1], [0, 0]].
        let m = |x: [f64; 2]| DMatrix::from_row_slice(2, 2, &[2.0 + x[0], x[1], 0.0, 1.0]);
        let dm = |_: [f64; 2]| {
            [DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])]
        };
        let b = ThirdOrderField::similarity(2, Rect::omega(), m, dm);
        let x = [0.5, 0.25];
        let t = b.eval(x);
        // M⁻¹ = [[1/2.5, −0.25/2.5], [0, 1]].
        assert!((t.get(0, 0, 0) - 1.0 / 2.5).abs() < 1e-15);
        assert!((t.get(0, 1, 1) - 1.0 / 2.5).abs() < 1e-15);
        assert_eq!(t.get(1, 0, 0), 0.0);
        assert_eq!(b.directional(x, [1.0, 0.0]), t.slice(0));
    }

    #[test]
    fn per_triangle_field_is_piecewise_constant() {
        let mesh = Arc::new(crate::mesh::generate_triangular(&Rect::omega(), 0.5).unwrap());
        let vals: Vec<ThirdOrder> =
            (0..mesh.n_triangles()).map(|t| ThirdOrder::filled(1, 2, 1, t as f64)).collect();
        let f = ThirdOrderField::per_triangle(mesh.clone(), vals);
        for t in 0..mesh.n_triangles() {
            assert_eq!(f.eval(mesh.barycenter(t)).get(0, 1, 0), t as f64);
        }
        assert!(!f.eval([5.0, 5.0]).is_finite());
        assert_eq!(mesh.bounding_box(), *f.domain());
    }
}
