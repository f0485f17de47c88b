//! Smallest eigenpairs of `H m = α S_M m` with `H = 𝔸ᵀ S_V⁻¹ 𝔸`.
//!
//! Block shift-invert Krylov iteration with Rayleigh–Ritz on the true `H`.
//! `(H − σ S_M)⁻¹` is applied through an LU factorization of the saddle
//! matrix `[[S_V, 𝔸], [𝔸ᵀ, σ S_M]]`, so neither `S_V⁻¹` nor `H` is formed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rwf::RwfSystem;
use crate::sparse::{norm2, Cholesky, CsrMatrix, Lu, TripletBuilder};

/// Eigenvalues below this fraction of the operator scale are resolved to an
/// absolute rather than relative residual.
const RESIDUAL_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub n_eigen: usize,
    pub block: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Shift-invert applications per iteration.
    pub depth: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { n_eigen: 10, block: 12, tol: 1e-8, max_iter: 500, depth: 4, seed: 0x00e1_6e45 }
    }
}

/// Converged Ritz pairs, ascending. Vectors are `S_M`-orthonormal columns.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// `‖H x − α S_M x‖_{S_M⁻¹} / max(|α|, floor)` per pair, where the floor
    /// is a fixed fraction of the operator scale.
    pub residuals: Vec<f64>,
    /// `‖𝔸 S_M⁻¹ 𝔸ᵀ z − α S_V z‖ / ‖S_V z‖` with `z = S_V⁻¹ 𝔸 x`.
    pub pencil_residuals: Vec<f64>,
    pub iterations: usize,
    pub shift: f64,
}

/// Applies `H`, `S_M` and the Gram solves.
pub(crate) struct NormalOperator<'a> {
    pub sys: &'a RwfSystem,
    pub chol: Cholesky,
}

impl<'a> NormalOperator<'a> {
    pub fn new(sys: &'a RwfSystem) -> Result<Self> {
        let chol = Cholesky::new(&sys.s_v)?;
        Ok(Self { sys, chol })
    }

    pub fn h(&self, x: &[f64]) -> Vec<f64> {
        let z = self.chol.solve(&self.sys.a.mul_vec(x));
        self.sys.a.mul_t_vec(&z)
    }
}

/// LU of `[[S_V, 𝔸], [𝔸ᵀ, σ S_M]]`.
fn saddle_lu(sys: &RwfSystem, sigma: f64) -> Result<Lu> {
    Lu::new(&saddle_matrix(sys, sigma))
}

pub(crate) fn saddle_matrix(sys: &RwfSystem, sigma: f64) -> CsrMatrix {
    let (p, q) = (sys.p(), sys.q());
    let mut t = TripletBuilder::with_capacity(p + q, p + q, sys.s_v.nnz() + 2 * sys.a.nnz() + q);
    for (i, j, v) in sys.s_v.triplets() {
        t.push(i, j, v);
    }
    for (i, j, v) in sys.a.triplets() {
        t.push(i, p + j, v);
        t.push(p + j, i, v);
    }
    for (j, &s) in sys.s_m.iter().enumerate() {
        t.push(p + j, p + j, sigma * s);
    }
    t.into_csr()
}

struct ShiftInvert {
    lu: Lu,
    p: usize,
    sigma: f64,
}

impl ShiftInvert {
    /// `y = (H − σ S_M)⁻¹ S_M x`.
    fn apply(&self, s_m: &[f64], x: &[f64]) -> Option<Vec<f64>> {
        let mut rhs = vec![0.0; self.p + x.len()];
        for (j, (&xj, &s)) in x.iter().zip(s_m).enumerate() {
            rhs[self.p + j] = -s * xj;
        }
        let sol = self.lu.solve(&rhs);
        let y = sol[self.p..].to_vec();
        y.iter().all(|v| v.is_finite()).then_some(y)
    }
}

/// A vector with its image under `H`.
#[derive(Clone)]
struct Column {
    x: Vec<f64>,
    hx: Vec<f64>,
}

fn m_dot(s_m: &[f64], a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(s_m).map(|((x, y), s)| x * y * s).sum()
}

/// `S_M`-orthonormalize columns, dropping numerically dependent ones. The
/// `H` images undergo the same linear combinations.
fn m_orthonormalize(s_m: &[f64], cols: Vec<Column>) -> Vec<Column> {
    let mut basis: Vec<Column> = Vec::with_capacity(cols.len());
    for mut v in cols {
        let n0 = m_dot(s_m, &v.x, &v.x).sqrt();
        if n0 == 0.0 || !n0.is_finite() {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let c = m_dot(s_m, &b.x, &v.x);
                v.x.iter_mut().zip(&b.x).for_each(|(x, y)| *x -= c * y);
                v.hx.iter_mut().zip(&b.hx).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = m_dot(s_m, &v.x, &v.x).sqrt();
        if n > 1e-10 * n0 {
            v.x.iter_mut().for_each(|x| *x /= n);
            v.hx.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}

fn start_block(q: usize, b: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![vec![1.0; q]];
    for _ in 1..b {
        cols.push((0..q).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    cols
}

/// Ritz pairs of the projected problem, ascending.
fn rayleigh_ritz(v: &[Column], keep: usize) -> (Vec<f64>, Vec<Column>) {
    let k = v.len();
    let mut hs = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let a = 0.5 * (crate::sparse::dot(&v[i].x, &v[j].hx) + crate::sparse::dot(&v[j].x, &v[i].hx));
            hs[(i, j)] = a;
            hs[(j, i)] = a;
        }
    }
    let eig = SymmetricEigen::new(hs);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let q = v[0].x.len();
    let combine = |col: usize| {
        let mut out = Column { x: vec![0.0; q], hx: vec![0.0; q] };
        for (i, s) in v.iter().enumerate() {
            let c = eig.eigenvectors[(i, col)];
            out.x.iter_mut().zip(&s.x).for_each(|(o, x)| *o += c * x);
            out.hx.iter_mut().zip(&s.hx).for_each(|(o, x)| *o += c * x);
        }
        out
    };
    let order = &order[..keep.min(k)];
    (order.iter().map(|&i| eig.eigenvalues[i]).collect(), order.iter().map(|&i| combine(i)).collect())
}

fn residual_norm(s_m: &[f64], alpha: f64, c: &Column, floor: f64) -> f64 {
    let n: f64 = c
        .hx
        .iter()
        .zip(&c.x)
        .zip(s_m)
        .map(|((h, xi), s)| {
            let d = h - alpha * s * xi;
            d * d / s
        })
        .sum();
    n.sqrt() / alpha.abs().max(floor)
}

/// The `opts.n_eigen` smallest eigenpairs of `H m = α S_M m`.
///
/// Each iteration expands the current block by `opts.depth` shift-invert
/// applications and performs Rayleigh–Ritz. Before returning, the
/// residuals are recomputed with freshly applied `H`.
pub fn smallest_eigenpairs(sys: &RwfSystem, opts: &EigenOptions) -> Result<EigenResult> {
    let q = sys.q();
    if q == 0 {
        return Err(Error::InvalidArgument("empty parameter space".into()));
    }
    let n_eigen = opts.n_eigen.min(q);
    let block = opts.block.max(n_eigen).min(q);
    let op = NormalOperator::new(sys)?;
    let s_m = &sys.s_m;
    let exact = |x: Vec<f64>| {
        let hx = op.h(&x);
        Column { x, hx }
    };

    let start = start_block(q, block, opts.seed).into_iter().map(|x| Column { hx: vec![0.0; q], x });
    let start: Vec<Column> = m_orthonormalize(s_m, start.collect()).into_iter().map(|c| exact(c.x)).collect();
    let (first, mut x) = rayleigh_ritz(&start, block);
    let scale = first.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let floor = RESIDUAL_FLOOR * scale;

    // Shift at zero; fall back to a small negative shift when the saddle
    // matrix is singular (exact kernel of H).
    let mut si = None;
    for sigma in [0.0, -1e-10 * scale, -1e-6 * scale] {
        if let Ok(lu) = saddle_lu(sys, sigma) {
            let cand = ShiftInvert { lu, p: sys.p(), sigma };
            if cand.apply(s_m, &x[0].x).is_some_and(|y| m_dot(s_m, &y, &y).sqrt() < 1e200) {
                si = Some(cand);
                break;
            }
        }
    }
    let si = si.ok_or_else(|| Error::Factorization("saddle matrix could not be factored at any shift".into()))?;
    let non_finite = || Error::Factorization("shift-invert produced non-finite values".into());

    let mut residuals = vec![f64::INFINITY; n_eigen];
    for iter in 1..=opts.max_iter {
        let carried = x.len();
        let mut cols = x.clone();
        // Converged pairs are kept in the basis but no longer expanded.
        let mut last: Vec<Vec<f64>> = x
            .iter()
            .enumerate()
            .filter(|&(j, _)| j >= n_eigen || residuals[j] > opts.tol)
            .map(|(_, c)| c.x.clone())
            .collect();
        for _ in 0..opts.depth.max(1) {
            last = last.iter().map(|c| si.apply(s_m, c).ok_or_else(non_finite)).collect::<Result<_>>()?;
            cols.extend(last.iter().map(|y| Column { x: y.clone(), hx: vec![0.0; q] }));
        }
        // Ritz vectors keep their images; new columns get the true `H`
        // after orthonormalization, which would amplify rounding in any
        // image carried through it.
        let mut basis = m_orthonormalize(s_m, cols);
        for c in basis.iter_mut().skip(carried) {
            c.hx = op.h(&c.x);
        }
        let (values, ritz) = rayleigh_ritz(&basis, block);
        x = ritz;
        residuals = (0..n_eigen).map(|j| residual_norm(s_m, values[j], &x[j], floor)).collect();
        if residuals.iter().all(|&r| r <= opts.tol) {
            // Confirm with the true operator.
            for c in x.iter_mut().take(n_eigen) {
                c.hx = op.h(&c.x);
            }
            residuals = (0..n_eigen).map(|j| residual_norm(s_m, values[j], &x[j], floor)).collect();
            if residuals.iter().all(|&r| r <= opts.tol) {
                let vectors = DMatrix::from_fn(q, n_eigen, |i, j| x[j].x[i]);
                let pencil_residuals = (0..n_eigen).map(|j| pencil_residual(&op, values[j], &x[j].x)).collect();
                return Ok(EigenResult {
                    values: values[..n_eigen].to_vec(),
                    vectors,
                    residuals,
                    pencil_residuals,
                    iterations: iter,
                    shift: si.sigma,
                });
            }
        }
    }
    let max_residual = residuals.iter().fold(0.0f64, |m, &r| m.max(r));
    Err(Error::NoConvergence { iterations: opts.max_iter, max_residual, residuals })
}

/// `‖𝔸 S_M⁻¹ 𝔸ᵀ z − α S_V z‖ / ‖S_V z‖` for `z = S_V⁻¹ 𝔸 x`.
fn pencil_residual(op: &NormalOperator<'_>, alpha: f64, x: &[f64]) -> f64 {
    let sys = op.sys;
    let sz = sys.a.mul_vec(x);
    let z = op.chol.solve(&sz);
    let w: Vec<f64> = sys.a.mul_t_vec(&z).iter().zip(&sys.s_m).map(|(v, s)| v / s).collect();
    let lhs = sys.a.mul_vec(&w);
    let r: Vec<f64> = lhs.iter().zip(&sz).map(|(l, s)| l - alpha * s).collect();
    let d = norm2(&sz);
    if d == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / d
    }
}

/// Dense reference: eigen-decomposition of `B_M⁻¹ H B_M⁻¹` with
/// `B_M = S_M^{1/2}`. Returns ascending eigenvalues and the corresponding
/// `S_M`-orthonormal vectors `m = B_M⁻¹ z`.
pub fn dense_reference(sys: &RwfSystem) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let q = sys.q();
    if q > 500 {
        return Err(Error::InvalidArgument(format!("dense reference limited to q <= 500, got {q}")));
    }
    let chol = Cholesky::new(&sys.s_v)?;
    let a = sys.a.to_dense();
    let mut sva = DMatrix::zeros(sys.p(), q);
    for j in 0..q {
        let col: Vec<f64> = a.column(j).iter().copied().collect();
        sva.set_column(j, &DVector::from_vec(chol.solve(&col)));
    }
    let h = a.transpose() * sva;
    let inv_b: Vec<f64> = sys.s_m.iter().map(|s| 1.0 / s.sqrt()).collect();
    let mut hb = DMatrix::from_fn(q, q, |i, j| h[(i, j)] * inv_b[i] * inv_b[j]);
    hb = (&hb + hb.transpose()) * 0.5;
    let eig = SymmetricEigen::new(hb);
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(q, q, |r, c| eig.eigenvectors[(r, order[c])] * inv_b[r]);
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormalization_drops_dependent_columns() {
        let s_m = vec![0.5, 2.0, 1.0];
        let cols = [vec![1.0, 0.0, 1.0], vec![2.0, 0.0, 2.0], vec![0.0, 1.0, 0.0]];
        let cols = cols.into_iter().map(|x| Column { hx: x.clone(), x }).collect();
        let b = m_orthonormalize(&s_m, cols);
        assert_eq!(b.len(), 2);
        for i in 0..2 {
            for j in 0..2 {
                let d = m_dot(&s_m, &b[i].x, &b[j].x);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
}
