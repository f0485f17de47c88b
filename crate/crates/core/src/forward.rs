//! P¹ vector finite elements for static and time-harmonic linear elasticity.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{submatrix, P1Pattern};
use crate::mesh::{BoundaryTag, TriMesh};
use crate::sparse::{norm2, Cholesky, CsrMatrix, Lu};
use crate::tensors::{ElasticBasis, Mat2, SymTensor4};

const RESIDUAL_TOL: f64 = 1e-10;

/// Nodal P¹ displacement field, stored as `[u_x(0), u_y(0), u_x(1), ...]`.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub mesh: Arc<TriMesh>,
    pub values: Vec<f64>,
}

impl VectorField {
    pub fn new(mesh: Arc<TriMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * mesh.n_vertices() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.n_vertices()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("field has non-finite values".into()));
        }
        Ok(Self { mesh, values })
    }

    pub fn from_fn(mesh: Arc<TriMesh>, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let values = mesh.vertices.iter().flat_map(|&p| f(p)).collect();
        Self { mesh, values }
    }

    #[inline]
    pub fn at(&self, v: usize) -> [f64; 2] {
        [self.values[2 * v], self.values[2 * v + 1]]
    }

    /// Root mean square of all nodal components.
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().map(|v| a * v).collect() }
    }

    pub fn nodal_vectors(&self) -> Vec<[f64; 2]> {
        (0..self.mesh.n_vertices()).map(|v| self.at(v)).collect()
    }

    /// One `vx vy` line per vertex.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for v in 0..self.mesh.n_vertices() {
            let [x, y] = self.at(v);
            writeln!(w, "{x:.16e} {y:.16e}")?;
        }
        Ok(())
    }
}

/// `u = 0` on `clamp`, `u = g` on `drive`, traction free elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub clamp: BoundaryTag,
    pub drive: BoundaryTag,
    pub g: [f64; 2],
}

impl BoundaryCondition {
    pub fn new(clamp: BoundaryTag, drive: BoundaryTag, g: [f64; 2]) -> Result<Self> {
        let bc = Self { clamp, drive, g };
        bc.validate()?;
        Ok(bc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clamp == self.drive {
            return Err(Error::InvalidArgument("clamp and drive segments coincide".into()));
        }
        if self.clamp == BoundaryTag::Free || self.drive == BoundaryTag::Free {
            return Err(Error::InvalidArgument("clamp and drive must be sides of the domain".into()));
        }
        if !self.g.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("drive vector is not finite".into()));
        }
        Ok(())
    }
}

/// Region shape for piecewise constant phantoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    Rect { x: [f64; 2], y: [f64; 2] },
}

impl Shape {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            Shape::Disk { center, radius } => {
                (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) <= radius * radius
            }
            Shape::Rect { x, y } => p[0] >= x[0] && p[0] <= x[1] && p[1] >= y[0] && p[1] <= y[1],
        }
    }
}

/// Labeled constant-valued region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    #[serde(default)]
    pub label: String,
    #[serde(flatten)]
    pub shape: Shape,
    pub value: f64,
}

/// Piecewise constant scalar map. Later inclusions take precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarMap {
    pub background: f64,
    #[serde(default)]
    pub regions: Vec<Inclusion>,
}

impl ScalarMap {
    pub fn constant(v: f64) -> Self {
        Self { background: v, regions: Vec::new() }
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        self.regions
            .iter()
            .rev()
            .find(|r| r.shape.contains(p))
            .map_or(self.background, |r| r.value)
    }
}

/// Exact coefficient field: one piecewise constant map per basis tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactParamField {
    pub maps: Vec<ScalarMap>,
}

impl ExactParamField {
    pub fn constant(values: &[f64]) -> Self {
        Self { maps: values.iter().map(|&v| ScalarMap::constant(v)).collect() }
    }

    pub fn n(&self) -> usize {
        self.maps.len()
    }

    pub fn eval(&self, p: [f64; 2]) -> Vec<f64> {
        self.maps.iter().map(|m| m.eval(p)).collect()
    }

    /// Smallest ellipticity constant of the combined tensor over `points`.
    pub fn min_ellipticity(&self, basis: &ElasticBasis, points: impl Iterator<Item = [f64; 2]>) -> f64 {
        points.map(|p| basis.combine(&self.eval(p)).ellipticity()).fold(f64::INFINITY, f64::min)
    }
}

/// Element tensors sampled at triangle barycenters.
pub fn sample_tensors(mesh: &TriMesh, basis: &ElasticBasis, params: &ExactParamField) -> Result<Vec<SymTensor4>> {
    if params.n() != basis.len() {
        return Err(Error::InvalidArgument(format!(
            "{} parameter maps for a basis of {} tensors",
            params.n(),
            basis.len()
        )));
    }
    let tensors: Vec<SymTensor4> = (0..mesh.n_triangles())
        .map(|t| basis.combine(&params.eval(mesh.barycenter(t))))
        .collect();
    if let Some(t) = tensors.iter().position(|c| c.ellipticity() <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "coefficients are not elliptic at ({:.4}, {:.4})",
            mesh.barycenter(t)[0],
            mesh.barycenter(t)[1]
        )));
    }
    Ok(tensors)
}

/// Strain-displacement rows for node `a`: Voigt strain `(E11, E22, 2E12)`
/// produced by unit `u_x` and unit `u_y`.
#[inline]
fn b_columns(g: [f64; 2]) -> [[f64; 3]; 2] {
    [[g[0], 0.0, g[1]], [0.0, g[1], g[0]]]
}

/// Global stiffness `∫ ε(v) : C : ε(u)` with per-triangle tensors.
pub fn assemble_stiffness(mesh: &TriMesh, tensors: &[SymTensor4]) -> CsrMatrix {
    let pat = P1Pattern::new(mesh, 2);
    let mut k = pat.zeros();
    for t in 0..mesh.n_triangles() {
        let (g, area) = mesh.gradients(t);
        let tri = mesh.triangles[t];
        let c = &tensors[t];
        for b in 0..3 {
            let bb = b_columns(g[b]);
            for d in 0..2 {
                let s = c.apply_voigt(bb[d]);
                for a in 0..3 {
                    let ba = b_columns(g[a]);
                    for e in 0..2 {
                        let v = area * (ba[e][0] * s[0] + ba[e][1] * s[1] + ba[e][2] * s[2]);
                        pat.add(&mut k, tri[a], e, tri[b], d, v);
                    }
                }
            }
        }
    }
    k
}

/// Consistent vector mass matrix `∫ u · v` (unit density).
pub fn assemble_mass(mesh: &TriMesh) -> CsrMatrix {
    let pat = P1Pattern::new(mesh, 2);
    let mut m = pat.zeros();
    for t in 0..mesh.n_triangles() {
        let area = mesh.area(t);
        let tri = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                let v = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                for c in 0..2 {
                    pat.add(&mut m, tri[a], c, tri[b], c, v);
                }
            }
        }
    }
    m
}

/// Load vector `∫ f · φ` by the edge-midpoint rule.
pub fn assemble_load(mesh: &TriMesh, f: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let mut rhs = vec![0.0; 2 * mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let area = mesh.area(t);
        let tri = mesh.triangles[t];
        let p = tri.map(|v| mesh.vertices[v]);
        for a in 0..3 {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            // φ_a is 1/2 at the midpoints of the two edges through vertex a.
            let mid = |i: usize, j: usize| [(p[i][0] + p[j][0]) / 2.0, (p[i][1] + p[j][1]) / 2.0];
            let (fb, fc) = (f(mid(a, b)), f(mid(a, c)));
            for k in 0..2 {
                rhs[2 * tri[a] + k] += area / 6.0 * (fb[k] + fc[k]);
            }
        }
    }
    rhs
}

/// General solve of `K u − ω² M u = F` with nodal Dirichlet data.
///
/// `dirichlet(v, x)` returns the prescribed displacement of vertex `v` or
/// `None` when it is free. `omega == 0` takes the Cholesky path.
pub fn solve_system(
    mesh: &Arc<TriMesh>,
    tensors: &[SymTensor4],
    dirichlet: &dyn Fn(usize, [f64; 2]) -> Option<[f64; 2]>,
    body: Option<&dyn Fn([f64; 2]) -> [f64; 2]>,
    omega: f64,
) -> Result<VectorField> {
    let nv = mesh.n_vertices();
    let mut u = vec![0.0; 2 * nv];
    let mut fixed = vec![false; 2 * nv];
    let mut n_fixed_vertices = 0;
    for v in 0..nv {
        if let Some(g) = dirichlet(v, mesh.vertices[v]) {
            u[2 * v] = g[0];
            u[2 * v + 1] = g[1];
            fixed[2 * v] = true;
            fixed[2 * v + 1] = true;
            n_fixed_vertices += 1;
        }
    }
    if n_fixed_vertices < 2 {
        return Err(Error::SingularStiffness(format!(
            "{n_fixed_vertices} constrained vertices cannot remove the rigid motions"
        )));
    }

    let mut a = assemble_stiffness(mesh, tensors);
    if omega != 0.0 {
        let m = assemble_mass(mesh);
        for (x, y) in a.values.iter_mut().zip(&m.values) {
            *x -= omega * omega * y;
        }
    }
    let mut rhs = match body {
        Some(f) => assemble_load(mesh, f),
        None => vec![0.0; 2 * nv],
    };
    // Move the known columns to the right-hand side.
    for (i, r) in rhs.iter_mut().enumerate() {
        if !fixed[i] {
            *r -= a.row(i).filter(|&(j, _)| fixed[j]).map(|(j, v)| v * u[j]).sum::<f64>();
        }
    }
    let free: Vec<usize> = (0..2 * nv).filter(|&i| !fixed[i]).collect();
    if free.is_empty() {
        return VectorField::new(mesh.clone(), u);
    }
    let a_ff = submatrix(&a, &free);
    let b: Vec<f64> = free.iter().map(|&i| rhs[i]).collect();

    let x = if omega == 0.0 {
        let chol = Cholesky::new(&a_ff).map_err(|e| Error::SingularStiffness(e.to_string()))?;
        chol.solve(&b)
    } else {
        let resonant = |detail: String| Error::Resonant { omega, detail };
        let lu = Lu::new(&a_ff).map_err(|e| resonant(e.to_string()))?;
        lu.solve(&b)
    };

    let bnorm = norm2(&b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(if omega == 0.0 {
            Error::SingularStiffness("non-finite solution".into())
        } else {
            Error::Resonant { omega, detail: "non-finite solution".into() }
        });
    }
    if bnorm > 0.0 {
        let ax = a_ff.mul_vec(&x);
        let res = norm2(&ax.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>()) / bnorm;
        if res > RESIDUAL_TOL {
            let detail = format!("relative residual {res:e}");
            return Err(if omega == 0.0 {
                Error::SingularStiffness(detail)
            } else {
                Error::Resonant { omega, detail }
            });
        }
    }
    for (k, &i) in free.iter().enumerate() {
        u[i] = x[k];
    }
    VectorField::new(mesh.clone(), u)
}

fn boundary_dirichlet(mesh: &TriMesh, bc: &BoundaryCondition) -> Result<Vec<Option<[f64; 2]>>> {
    bc.validate()?;
    let clamp = mesh.tagged_vertex_mask(bc.clamp);
    let drive = mesh.tagged_vertex_mask(bc.drive);
    if !clamp.iter().any(|&b| b) || !drive.iter().any(|&b| b) {
        return Err(Error::InvalidArgument(format!(
            "mesh has no edges tagged {} or {}",
            bc.clamp, bc.drive
        )));
    }
    // Shared corners belong to the clamp.
    Ok((0..mesh.n_vertices())
        .map(|v| {
            if clamp[v] {
                Some([0.0, 0.0])
            } else if drive[v] {
                Some(bc.g)
            } else {
                None
            }
        })
        .collect())
}

/// Static solve with homogeneous body force.
pub fn solve_static(
    mesh: &Arc<TriMesh>,
    basis: &ElasticBasis,
    params: &ExactParamField,
    bc: &BoundaryCondition,
) -> Result<VectorField> {
    let tensors = sample_tensors(mesh, basis, params)?;
    let dir = boundary_dirichlet(mesh, bc)?;
    solve_system(mesh, &tensors, &|v, _| dir[v], None, 0.0)
}

/// Time-harmonic solve of `−div(C : ε(u)) − ω² u = 0`.
pub fn solve_harmonic(
    mesh: &Arc<TriMesh>,
    basis: &ElasticBasis,
    params: &ExactParamField,
    bc: &BoundaryCondition,
    omega: f64,
) -> Result<VectorField> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("omega must be finite and nonnegative, got {omega}")));
    }
    let tensors = sample_tensors(mesh, basis, params)?;
    let dir = boundary_dirichlet(mesh, bc)?;
    solve_system(mesh, &tensors, &|v, _| dir[v], None, omega)
}

/// Per-triangle strain of a P¹ field.
pub fn compute_strain(u: &VectorField) -> Vec<Mat2> {
    let mesh = &u.mesh;
    (0..mesh.n_triangles())
        .map(|t| {
            let (g, _) = mesh.gradients(t);
            let mut grad = [[0.0; 2]; 2];
            for (a, &v) in mesh.triangles[t].iter().enumerate() {
                let uv = u.at(v);
                for i in 0..2 {
                    for j in 0..2 {
                        grad[i][j] += uv[i] * g[a][j];
                    }
                }
            }
            let shear = 0.5 * (grad[0][1] + grad[1][0]);
            [[grad[0][0], shear], [shear, grad[1][1]]]
        })
        .collect()
}

/// Spectral condition number of a symmetric 2×2 matrix.
pub fn cond2(e: &Mat2) -> f64 {
    let m = 0.5 * (e[0][0] + e[1][1]);
    let d = (0.25 * (e[0][0] - e[1][1]).powi(2) + e[0][1] * e[1][0]).max(0.0).sqrt();
    let (a, b) = ((m + d).abs(), (m - d).abs());
    let (hi, lo) = (a.max(b), a.min(b));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_triangular, Rect};
    use crate::tensors::{make_identity_basis, make_isotropic_basis};

    fn mesh(h: f64) -> Arc<TriMesh> {
        Arc::new(generate_triangular(&Rect::omega(), h).unwrap())
    }

    #[test]
    fn shear_drive_satisfies_constraints() {
        let m = mesh(0.1);
        let bc = BoundaryCondition::new(BoundaryTag::Bottom, BoundaryTag::Top, [1.0, -0.5]).unwrap();
        let params = ExactParamField::constant(&[1.0, 0.0]);
        let basis = make_isotropic_basis();
        let u = solve_static(&m, &basis, &params, &bc).unwrap();
        let clamp = m.tagged_vertex_mask(BoundaryTag::Bottom);
        let drive = m.tagged_vertex_mask(BoundaryTag::Top);
        for v in 0..m.n_vertices() {
            if clamp[v] {
                assert_eq!(u.at(v), [0.0, 0.0]);
            } else if drive[v] {
                assert_eq!(u.at(v), [1.0, -0.5]);
            }
        }
        let tensors = sample_tensors(&m, &basis, &params).unwrap();
        let k = assemble_stiffness(&m, &tensors);
        let energy: f64 = u.values.iter().zip(k.mul_vec(&u.values)).map(|(a, b)| a * b).sum();
        assert!(energy > 0.0);
    }

    #[test]
    fn stiffness_is_symmetric_and_kills_rigid_motions() {
        let m = mesh(0.2);
        let params = ExactParamField::constant(&[2.0, 3.0]);
        let tensors = sample_tensors(&m, &make_isotropic_basis(), &params).unwrap();
        let k = assemble_stiffness(&m, &tensors);
        assert!(k.asymmetry() < 1e-12);
        for rigid in [|_: [f64; 2]| [1.0, 0.0], |_: [f64; 2]| [0.0, 1.0], |p: [f64; 2]| [-p[1], p[0]]] {
            let r = VectorField::from_fn(m.clone(), rigid);
            assert!(norm2(&k.mul_vec(&r.values)) < 1e-12);
        }
    }

    #[test]
    fn affine_solutions_are_reproduced() {
        let m = mesh(0.1);
        let params = ExactParamField::constant(&[1.3, 0.7]);
        let tensors = sample_tensors(&m, &make_isotropic_basis(), &params).unwrap();
        let exact = |p: [f64; 2]| [0.3 + 1.2 * p[0] - 0.4 * p[1], -0.1 + 0.5 * p[0] + 0.9 * p[1]];
        let boundary = m.boundary_vertex_mask();
        let u = solve_system(&m, &tensors, &|v, p| boundary[v].then(|| exact(p)), None, 0.0).unwrap();
        for (v, &p) in m.vertices.iter().enumerate() {
            let e = exact(p);
            let got = u.at(v);
            assert!((got[0] - e[0]).abs() < 1e-10 && (got[1] - e[1]).abs() < 1e-10);
        }
    }

    /// `u = (sin πx sin πy, 0)` with constant Lamé coefficients, loaded by
    /// `f = −div σ` computed by hand.
    fn manufactured_error(h: f64) -> f64 {
        use std::f64::consts::PI;
        let m = mesh(h);
        let (mu, lambda) = (1.0, 2.0);
        let tensors = sample_tensors(&m, &make_isotropic_basis(), &ExactParamField::constant(&[mu, lambda])).unwrap();
        let exact = |p: [f64; 2]| [(PI * p[0]).sin() * (PI * p[1]).sin(), 0.0];
        let f = move |p: [f64; 2]| {
            let ss = (PI * p[0]).sin() * (PI * p[1]).sin();
            let cc = (PI * p[0]).cos() * (PI * p[1]).cos();
            [(3.0 * mu + lambda) * PI * PI * ss, -(mu + lambda) * PI * PI * cc]
        };
        let boundary = m.boundary_vertex_mask();
        let u = solve_system(&m, &tensors, &|v, p| boundary[v].then(|| exact(p)), Some(&f), 0.0).unwrap();
        // Edge-midpoint quadrature of |u_h − u|².
        let mut err = 0.0;
        for t in 0..m.n_triangles() {
            let tri = m.triangles[t];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let p = [(m.vertices[a][0] + m.vertices[b][0]) / 2.0, (m.vertices[a][1] + m.vertices[b][1]) / 2.0];
                let uh = [(u.at(a)[0] + u.at(b)[0]) / 2.0, (u.at(a)[1] + u.at(b)[1]) / 2.0];
                let e = exact(p);
                err += m.area(t) / 3.0 * ((uh[0] - e[0]).powi(2) + (uh[1] - e[1]).powi(2));
            }
        }
        err.sqrt()
    }

    #[test]
    fn l2_convergence_order() {
        let e1 = manufactured_error(0.1);
        let e2 = manufactured_error(0.05);
        let e3 = manufactured_error(0.025);
        let r1 = (e1 / e2).log2();
        let r2 = (e2 / e3).log2();
        assert!(r1 >= 1.8 && r2 >= 1.8, "orders {r1} {r2}");
    }

    #[test]
    fn harmonic_limits() {
        let m = mesh(0.1);
        let bc = BoundaryCondition::new(BoundaryTag::Bottom, BoundaryTag::Top, [1.0, -0.5]).unwrap();
        let basis = make_isotropic_basis();
        let params = ExactParamField::constant(&[4.0, 6.0]);
        let s = solve_static(&m, &basis, &params, &bc).unwrap();
        let z = solve_harmonic(&m, &basis, &params, &bc, 0.0).unwrap();
        assert_eq!(s.values, z.values);
        let tiny = solve_harmonic(&m, &basis, &params, &bc, 1e-3).unwrap();
        let diff: Vec<f64> = s.values.iter().zip(&tiny.values).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) <= 1e-4 * norm2(&s.values));
        assert!(solve_harmonic(&m, &basis, &params, &bc, -1.0).is_err());
    }

    #[test]
    fn invalid_conditions_are_rejected() {
        assert!(BoundaryCondition::new(BoundaryTag::Top, BoundaryTag::Top, [1.0, 0.0]).is_err());
        let m = mesh(0.25);
        let tensors = vec![SymTensor4::identity(); m.n_triangles()];
        let err = solve_system(&m, &tensors, &|_, _| None, None, 0.0).unwrap_err();
        assert!(matches!(err, Error::SingularStiffness(_)));
        let bad = ExactParamField::constant(&[1.0, -5.0]);
        let bc = BoundaryCondition::new(BoundaryTag::Bottom, BoundaryTag::Top, [1.0, 0.0]).unwrap();
        assert!(solve_static(&m, &make_isotropic_basis(), &bad, &bc).is_err());
        assert!(solve_static(&m, &make_identity_basis(), &ExactParamField::constant(&[1.0, 1.0]), &bc).is_err());
    }

    #[test]
    fn strain_of_simple_fields() {
        let m = mesh(0.25);
        let rot = VectorField::from_fn(m.clone(), |p| [-p[1], p[0]]);
        for e in compute_strain(&rot) {
            assert!(e.iter().flatten().all(|v| v.abs() < 1e-13));
        }
        let stretch = VectorField::from_fn(m.clone(), |p| [p[0], -p[1]]);
        for e in compute_strain(&stretch) {
            assert!((e[0][0] - 1.0).abs() < 1e-13 && (e[1][1] + 1.0).abs() < 1e-13 && e[0][1].abs() < 1e-13);
        }
    }

    #[test]
    fn strain_matches_finite_differences() {
        let m = mesh(0.02);
        let f = |p: [f64; 2]| [(2.0 * p[0]).sin() * p[1], (p[0] * p[1]).cos()];
        let u = VectorField::from_fn(m.clone(), f);
        let eps = compute_strain(&u);
        let d = 1e-6;
        let mut worst: f64 = 0.0;
        for t in (0..m.n_triangles()).step_by(97) {
            let p = m.barycenter(t);
            let dx = |k: usize| (f([p[0] + d, p[1]])[k] - f([p[0] - d, p[1]])[k]) / (2.0 * d);
            let dy = |k: usize| (f([p[0], p[1] + d])[k] - f([p[0], p[1] - d])[k]) / (2.0 * d);
            let fd = [[dx(0), 0.5 * (dy(0) + dx(1))], [0.5 * (dy(0) + dx(1)), dy(1)]];
            for i in 0..2 {
                for j in 0..2 {
                    worst = worst.max((fd[i][j] - eps[t][i][j]).abs());
                }
            }
        }
        assert!(worst < 2.0 * 0.02 * 4.0, "{worst}");
    }

    #[test]
    fn condition_number_of_symmetric_2x2() {
        assert_eq!(cond2(&[[1.0, 0.0], [0.0, 1.0]]), 1.0);
        assert!((cond2(&[[2.0, 0.0], [0.0, -0.5]]) - 4.0).abs() < 1e-14);
        assert!(cond2(&[[1.0, 1.0], [1.0, 1.0]]).is_infinite());
    }
}
