use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{ThirdOrder, ThirdOrderField};
use crate::error::{Error, Result};
use crate::mesh::{PointLocator, TriMesh};
use crate::rwf::{assemble_t, DataSet, TuTensor};
use crate::tensors::ElasticBasis;

/// Tolerance on `‖T⁻¹·T − δδ‖_max`.
const IDENTITY_TOL: f64 = 1e-8;

/// Matrix-valued field over the plane.
pub type MatrixField = Arc<dyn Fn([f64; 2]) -> DMatrix<f64> + Send + Sync>;

/// Vector-valued field over the plane.
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> DVector<f64> + Send + Sync>;

/// Minimal-norm left inverse of a pointwise `T ∈ ℝ^{N×d×n}`.
#[derive(Debug, Clone)]
pub struct LeftInverse {
    /// `T⁻¹ ∈ ℝ^{n×d×N}`.
    pub tensor: ThirdOrder,
    /// Singular values of the unfolded `N × (n·d)` block, descending.
    pub singular_values: Vec<f64>,
    pub condition: f64,
    /// `‖T⁻¹·T − δδ‖_max`.
    pub identity_defect: f64,
}

impl LeftInverse {
    /// `(T⁻¹·X)_{ijk} = Σ_p T⁻¹_{ijp} X_{pk}` for `X ∈ ℝ^{N×c}`.
    pub fn apply(&self, x: &DMatrix<f64>) -> ThirdOrder {
        let [n, d, big_n] = self.tensor.dims();
        assert_eq!(x.nrows(), big_n);
        ThirdOrder::from_fn(n, d, x.ncols(), |i, j, k| (0..big_n).map(|p| self.tensor.get(i, j, p) * x[(p, k)]).sum())
    }

    /// `(T⁻¹·v)_{ij} = Σ_p T⁻¹_{ijp} v_p`.
    pub fn apply_vector(&self, v: &DVector<f64>) -> DMatrix<f64> {
        self.tensor.dot_last(v.as_slice())
    }
}

/// `N × (n·d)` unfolding with entry `(p, k·d + j) = T_{pjk}`.
fn unfold(t: &ThirdOrder) -> DMatrix<f64> {
    let [big_n, d, n] = t.dims();
    DMatrix::from_fn(big_n, n * d, |p, c| t.get(p, c % d, c / d))
}

/// Left inverse by pseudo-inversion of the unfolded map, verified against
/// the contraction identity `(T⁻¹·T)_{ijkl} = δ_{il} δ_{jk}`.
pub fn left_inverse(t: &ThirdOrder) -> Result<LeftInverse> {
    let [big_n, d, n] = t.dims();
    let u = unfold(t);
    let svd = u.clone().svd(true, true);
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let reject = |sv: Vec<f64>| Err(Error::NotLeftInvertible { singular_values: sv });
    if !t.is_finite() || big_n < n * d {
        return reject(singular_values);
    }
    let smax = singular_values[0];
    let smin = *singular_values.last().expect("nonempty block");
    if smin <= f64::EPSILON * smax * (big_n.max(n * d) as f64) || smin == 0.0 {
        return reject(singular_values);
    }
    let l = svd.pseudo_inverse(0.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let identity_defect = (&l * &u - DMatrix::identity(n * d, n * d)).amax();
    if !(identity_defect <= IDENTITY_TOL) {
        return reject(singular_values);
    }
    let tensor = ThirdOrder::from_fn(n, d, big_n, |i, j, p| l[(i * d + j, p)]);
    Ok(LeftInverse { tensor, condition: smax / smin, singular_values, identity_defect })
}

/// `D_{pk} = Σ_j ∂_j T_{pjk}` by central differences with step `h`.
pub fn analytic_divergence(t: &ThirdOrderField, x: [f64; 2], h: f64) -> DMatrix<f64> {
    let [big_n, d, n] = t.dims();
    let mut out = DMatrix::zeros(big_n, n);
    for j in 0..d.min(2) {
        let mut xp = x;
        let mut xm = x;
        xp[j] += h;
        xm[j] -= h;
        let (tp, tm) = (t.eval(xp), t.eval(xm));
        for p in 0..big_n {
            for k in 0..n {
                out[(p, k)] += (tp.get(p, j, k) - tm.get(p, j, k)) / (2.0 * h);
            }
        }
    }
    out
}

/// Weighted least-squares gradient weights per triangle: for triangle `t`
/// the neighbors `s` sharing a vertex and vectors `a_s` with
/// `∇v(t) ≈ Σ_s a_s (v_s − v_t)`.
fn gradient_stencils(mesh: &TriMesh) -> Result<Vec<Vec<(usize, [f64; 2])>>> {
    let vt = mesh.vertex_triangles();
    (0..mesh.n_triangles())
        .map(|t| {
            let mut patch: Vec<usize> = mesh.triangles[t].iter().flat_map(|&v| vt[v].iter().copied()).collect();
            patch.sort_unstable();
            patch.dedup();
            patch.retain(|&s| s != t);
            if patch.is_empty() {
                return Err(Error::InvalidArgument(format!("triangle {t} has no neighbors")));
            }
            let ct = mesh.barycenter(t);
            let rows: Vec<(usize, [f64; 2], f64)> = patch
                .iter()
                .map(|&s| {
                    let cs = mesh.barycenter(s);
                    let dx = [cs[0] - ct[0], cs[1] - ct[1]];
                    (s, dx, 1.0 / (dx[0] * dx[0] + dx[1] * dx[1]))
                })
                .collect();
            // Normal matrix Σ w² dx dxᵀ with w = 1/|dx|.
            let mut a = [0.0; 3];
            for &(_, dx, w2) in &rows {
                a[0] += w2 * dx[0] * dx[0];
                a[1] += w2 * dx[0] * dx[1];
                a[2] += w2 * dx[1] * dx[1];
            }
            let det = a[0] * a[2] - a[1] * a[1];
            if !(det > 1e-12 * (a[0] + a[2]).powi(2)) {
                return Err(Error::InvalidArgument(format!("neighbors of triangle {t} are collinear")));
            }
            let inv = [a[2] / det, -a[1] / det, a[0] / det];
            Ok(rows
                .into_iter()
                .map(|(s, dx, w2)| (s, [w2 * (inv[0] * dx[0] + inv[1] * dx[1]), w2 * (inv[1] * dx[0] + inv[2] * dx[1])]))
                .collect())
        })
        .collect()
}

/// `D_{pk} = Σ_j ∂_j T_{pjk}` for per-triangle values, with gradients from
/// weighted least squares over the vertex-sharing patch of each triangle.
pub fn discrete_divergence(mesh: &TriMesh, values: &[ThirdOrder]) -> Result<Vec<DMatrix<f64>>> {
    if values.len() != mesh.n_triangles() {
        return Err(Error::InvalidArgument("one tensor per triangle is required".into()));
    }
    let stencils = gradient_stencils(mesh)?;
    Ok(stencils
        .iter()
        .enumerate()
        .map(|(t, st)| {
            let [big_n, d, n] = values[t].dims();
            DMatrix::from_fn(big_n, n, |p, k| {
                st.iter()
                    .map(|&(s, a)| (0..d.min(2)).map(|j| a[j] * (values[s].get(p, j, k) - values[t].get(p, j, k))).sum::<f64>())
                    .sum()
            })
        })
        .collect())
}

/// `T` on triangle `t` as a third-order tensor of shape `(2m) × 2 × n`:
/// `T_{(2ℓ+i) j k} = (C_k : ε(u_ℓ))_{ij}`.
pub fn tu_point(tu: &TuTensor, t: usize) -> ThirdOrder {
    ThirdOrder::from_fn(2 * tu.m, 2, tu.n, |p, j, k| tu.block(t, p / 2, k)[p % 2][j])
}

/// Expanded first-order system `∇μ + B·μ = F`.
#[derive(Clone)]
pub struct ExpandedForm {
    pub b: ThirdOrderField,
    /// `F(x) ∈ ℝ^{n×d}`.
    pub f: MatrixField,
    /// Largest condition number of `T` over the checked points.
    pub max_condition: f64,
}

impl std::fmt::Debug for ExpandedForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExpandedForm").field("b", &self.b).field("max_condition", &self.max_condition).finish()
    }
}

impl ExpandedForm {
    /// `∇μ + B·μ − F` at `x`, with `(∇μ)_{ij} = ∂_j μ_i`.
    pub fn residual(&self, x: [f64; 2], mu: &[f64], grad_mu: &DMatrix<f64>) -> DMatrix<f64> {
        grad_mu + self.b.eval(x).dot_last(mu) - (self.f)(x)
    }
}

/// `B = T⁻¹·D` and `F = −T⁻¹·f` for a differentiable `T` field of shape
/// `N × d × n` and an optional load `f(x) ∈ ℝ^N`. The left inverse is
/// verified at every point of `checks`; divergences use central
/// differences with step `h`.
pub fn expanded_form(t: &ThirdOrderField, f: Option<VectorFn>, checks: &[[f64; 2]], h: f64) -> Result<ExpandedForm> {
    let [_, d, n] = t.dims();
    let mut max_condition = 0.0_f64;
    for &x in checks {
        max_condition = max_condition.max(left_inverse(&t.eval(x))?.condition);
    }
    let tb = t.clone();
    let b = ThirdOrderField::from_fn([n, d, n], t.domain().clone(), move |x| match left_inverse(&tb.eval(x)) {
        Ok(li) => li.apply(&analytic_divergence(&tb, x, h)),
        Err(_) => ThirdOrder::filled(n, d, n, f64::NAN),
    });
    let tf = t.clone();
    let f: MatrixField = Arc::new(move |x| match &f {
        None => DMatrix::zeros(n, d),
        Some(f) => match left_inverse(&tf.eval(x)) {
            Ok(li) => -li.apply_vector(&f(x)),
            Err(_) => DMatrix::from_element(n, d, f64::NAN),
        },
    });
    Ok(ExpandedForm { b, f, max_condition })
}

/// Expanded form from per-triangle data: `T` from the data fields, `D` from
/// least-squares gradients, and `f` from the triangle averages of the
/// nodal loads. Fails on the first triangle without a left inverse.
pub fn expanded_form_discrete(data: &DataSet, basis: &ElasticBasis) -> Result<ExpandedForm> {
    let mesh = data.mesh().clone();
    let tu = assemble_t(data, basis);
    let tvals: Vec<ThirdOrder> = (0..tu.n_triangles).map(|t| tu_point(&tu, t)).collect();
    let div = discrete_divergence(&mesh, &tvals)?;
    let (m, n) = (tu.m, tu.n);
    let mut max_condition = 0.0_f64;
    let mut bs = Vec::with_capacity(tu.n_triangles);
    let mut fs = Vec::with_capacity(tu.n_triangles);
    for (t, (tv, dv)) in tvals.iter().zip(&div).enumerate() {
        let li = left_inverse(tv)?;
        max_condition = max_condition.max(li.condition);
        bs.push(li.apply(dv));
        let tri = mesh.triangles[t];
        let load = DVector::from_fn(2 * m, |p, _| {
            data.loads[p / 2].as_ref().map_or(0.0, |f| tri.iter().map(|&v| f.values[2 * v + p % 2]).sum::<f64>() / 3.0)
        });
        fs.push(-li.apply_vector(&load));
    }
    let b = ThirdOrderField::per_triangle(mesh.clone(), bs);
    let locator = PointLocator::new(mesh);
    let f: MatrixField = Arc::new(move |x| match locator.locate(x) {
        Some((t, _)) => fs[t].clone(),
        None => DMatrix::from_element(n, 2, f64::NAN),
    });
    Ok(ExpandedForm { b, f, max_condition })
}
