use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{resolvent, PathCurve, ThirdOrderField};
use crate::error::{Error, Result};

/// Estimated fixed subspace `E_B^x` of the loop monodromies at one point.
#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub base: [f64; 2],
    /// `dim E_B^x`.
    pub k: usize,
    /// Orthonormal basis of `E_B^x`, `n × k`.
    pub basis: DMatrix<f64>,
    /// Singular values of the stacked `R^{loop} − I`, ascending.
    pub singular_values: Vec<f64>,
    /// Cut below which a singular value counts as a fixed direction.
    pub threshold: f64,
    /// `‖R^{loop} − I‖₂` per loop.
    pub loop_defects: Vec<f64>,
}

impl ProbeResult {
    pub fn to_text(&self) -> String {
        let mut s = format!("base {:.6} {:.6}\nk {}\nthreshold {:.6e}\n", self.base[0], self.base[1], self.k, self.threshold);
        s += "singular_values";
        for v in &self.singular_values {
            s += &format!(" {v:.6e}");
        }
        s += "\nloop_defects";
        for v in &self.loop_defects {
            s += &format!(" {v:.6e}");
        }
        s += "\n";
        for c in 0..self.k {
            s += "basis";
            for v in self.basis.column(c).iter() {
                s += &format!(" {v:.6e}");
            }
            s += "\n";
        }
        s
    }
}

/// Degree of conservativity of `B` at `x` from the monodromies of closed
/// loops based at `x`.
///
/// A direction counts as fixed when its singular value in the stacked
/// `R^{loop} − I` lies below `tol · max(‖stack‖₂, √loops)`. The floor keeps
/// the cut meaningful when every monodromy is close to the identity.
pub fn conservativity_probe(
    b: &ThirdOrderField,
    x: [f64; 2],
    loops: &[PathCurve],
    tol: f64,
    steps: usize,
) -> Result<ProbeResult> {
    if loops.len() < 2 {
        return Err(Error::InvalidArgument(format!("at least two loops are required, got {}", loops.len())));
    }
    let n = b.dims()[0];
    for l in loops {
        let scale = 1e-12 * (1.0 + l.length());
        let at_x = |p: [f64; 2]| (p[0] - x[0]).abs() <= scale && (p[1] - x[1]).abs() <= scale;
        if !at_x(l.start()) || !at_x(l.end()) {
            return Err(Error::InvalidArgument("every loop must start and end at the base point".into()));
        }
    }
    let defects: Vec<DMatrix<f64>> = loops
        .par_iter()
        .map(|l| resolvent(b, l, steps).map(|r| r.matrix - DMatrix::identity(n, n)))
        .collect::<Result<_>>()?;
    let mut stack = DMatrix::zeros(n * loops.len(), n);
    for (i, d) in defects.iter().enumerate() {
        stack.view_mut((i * n, 0), (n, n)).copy_from(d);
    }
    let loop_defects = defects.iter().map(|d| d.singular_values().max()).collect();
    let svd = stack.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let norm = svd.singular_values.max();
    let threshold = tol * norm.max((loops.len() as f64).sqrt());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let k = singular_values.iter().take_while(|&&s| s <= threshold).count();
    let basis = DMatrix::from_fn(n, k, |r, c| v_t[(order[c], r)]);
    Ok(ProbeResult { base: x, k, basis, singular_values, threshold, loop_defects })
}

/// Uniform positive-definiteness of the Gram matrix of sampled fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramResult {
    /// `min_x λ_min(G(x))`.
    pub alpha: f64,
    /// Sample index attaining the minimum.
    pub argmin: usize,
    pub independent: bool,
}

/// `α = min_x λ_min(G(x))` with `G_{ij}(x) = μ_i(x)·μ_j(x)`.
///
/// Each field holds `n` components per sample point, point-major.
pub fn gram_independence(fields: &[Vec<f64>], n: usize, tol: f64) -> Result<GramResult> {
    if fields.is_empty() || n == 0 {
        return Err(Error::InvalidArgument("need at least one field with one component".into()));
    }
    let len = fields[0].len();
    if len % n != 0 || fields.iter().any(|f| f.len() != len) {
        return Err(Error::InvalidArgument("fields must share the sample points".into()));
    }
    let kf = fields.len();
    let (alpha, argmin) = (0..len / n)
        .map(|x| {
            let vecs: Vec<DVector<f64>> = fields.iter().map(|f| DVector::from_column_slice(&f[x * n..(x + 1) * n])).collect();
            let g = DMatrix::from_fn(kf, kf, |i, j| vecs[i].dot(&vecs[j]));
            (g.symmetric_eigenvalues().min(), x)
        })
        .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
    Ok(GramResult { alpha, argmin, independent: alpha > tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::{mixed_diagonal_field, probe_loops, random_similarity_field};
    use crate::mesh::Rect;

    const TOL: f64 = 1e-6;

    #[test]
    fn zero_field_is_fully_conservative() {
        let b = ThirdOrderField::zero(3, Rect::omega());
        let x = [0.1, -0.2];
        let loops = probe_loops(x, 0.4, 4, b.domain()).unwrap();
        let p = conservativity_probe(&b, x, &loops, TOL, 16).unwrap();
        assert_eq!(p.k, 3);
        assert!((p.basis.transpose() * &p.basis - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn similarity_field_is_fully_conservative() {
        let b = random_similarity_field(3, 5, Rect::omega());
        let x = [0.2, 0.1];
        let loops = probe_loops(x, 0.5, 6, b.domain()).unwrap();
        let p = conservativity_probe(&b, x, &loops, TOL, 64).unwrap();
        assert_eq!(p.k, 3, "{:?}", p.singular_values);
    }

    #[test]
    fn mixed_diagonal_field_has_degree_k() {
        for k in 0..=3 {
            let b = mixed_diagonal_field(3, k, 40 + k as u64, Rect::omega());
            let x = [-0.1, 0.3];
            let loops = probe_loops(x, 0.5, 6, b.domain()).unwrap();
            let p = conservativity_probe(&b, x, &loops, TOL, 64).unwrap();
            assert_eq!(p.k, k, "{:?}", p.singular_values);
            // Basis spans the first k coordinate axes.
            for c in 0..k {
                let col = p.basis.column(c);
                assert!(col.rows(k, 3 - k).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn too_few_loops_are_rejected() {
        let b = ThirdOrderField::zero(1, Rect::omega());
        let loops = probe_loops([0.0, 0.0], 0.3, 1, b.domain()).unwrap();
        assert!(conservativity_probe(&b, [0.0, 0.0], &loops, TOL, 8).is_err());
        let loops = probe_loops([0.0, 0.0], 0.3, 3, b.domain()).unwrap();
        assert!(conservativity_probe(&b, [0.1, 0.0], &loops, TOL, 8).is_err());
    }

    #[test]
    fn nowhere_zero_scalar_field() {
        let f = vec![1.0, -2.0, 0.5, 3.0];
        let g = gram_independence(&[f], 1, 1e-12).unwrap();
        assert_eq!(g.alpha, 0.25);
        assert_eq!(g.argmin, 2);
        assert!(g.independent);
    }

    #[test]
    fn duplicated_field_is_dependent() {
        let f: Vec<f64> = (0..20).map(|i| 1.0 + i as f64).collect();
        let g = gram_independence(&[f.clone(), f], 2, 1e-12).unwrap();
        assert!(g.alpha.abs() < 1e-10);
        assert!(!g.independent);
    }

    #[test]
    fn simultaneous_zero_crossing_is_detected() {
        // μ₁ = (s − c, 0) and μ₂ = (0, 2(s − c)) both vanish at s = c.
        let samples: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let c = 0.3;
        let mu1: Vec<f64> = samples.iter().flat_map(|&s| [s - c, 0.0]).collect();
        let mu2: Vec<f64> = samples.iter().flat_map(|&s| [0.0, 2.0 * (s - c)]).collect();
        // G = diag((s − c)², 4(s − c)²): analytic minimum 0 at s = c.
        let g = gram_independence(&[mu1, mu2], 2, 1e-8).unwrap();
        assert!(g.alpha.abs() < 1e-14);
        assert_eq!(g.argmin, 30);
        assert!(!g.independent);
    }
}
