//! Solvers for the discrete system: least squares when loads are present,
//! the smallest generalized eigenpair otherwise.

mod eigen;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::ExactParamField;
use crate::mesh::HoneycombPair;
use crate::rwf::RwfSystem;
use crate::sparse::{norm2, Lu};

pub use eigen::{dense_reference, smallest_eigenpairs, EigenOptions, EigenResult};
use eigen::{saddle_matrix, NormalOperator};

const KKT_TOL: f64 = 1e-8;

/// How a homogeneous solution was normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Normalization {
    pub scale: f64,
    pub sign: f64,
}

/// Per-hex coefficients, parameter-major: entry `k·n_cells + cell`.
#[derive(Debug, Clone)]
pub struct ReconstructedField {
    pub coeffs: Vec<f64>,
    pub n: usize,
    pub n_cells: usize,
    /// True when the solution is only defined up to a scalar factor.
    pub homogeneous: bool,
    pub normalization: Normalization,
}

impl ReconstructedField {
    pub fn map(&self, k: usize) -> &[f64] {
        &self.coeffs[k * self.n_cells..(k + 1) * self.n_cells]
    }

    /// Coefficient vector of one cell.
    pub fn cell(&self, c: usize) -> Vec<f64> {
        (0..self.n).map(|k| self.coeffs[k * self.n_cells + c]).collect()
    }
}

/// The smallest generalized eigenvalues of the normal operator.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralDiagnostics {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub pencil_residuals: Vec<f64>,
    pub iterations: usize,
    pub shift: f64,
}

/// `α₂ − α₁`, zero when fewer than two values are present.
pub fn spectral_gap(diag: &SpectralDiagnostics) -> f64 {
    match diag.eigenvalues.as_slice() {
        [a, b, ..] => (b - a).max(0.0),
        _ => 0.0,
    }
}

/// Weighted least squares `min ‖S_V^{-1/2}(𝔸 m − g)‖` through the saddle
/// system `[[S_V, 𝔸], [𝔸ᵀ, 0]] [z; m] = [g; 0]`.
pub fn solve_inhomogeneous(sys: &RwfSystem) -> Result<ReconstructedField> {
    if sys.is_homogeneous() {
        return Err(Error::InvalidArgument("load vector is zero; use the eigen path".into()));
    }
    let (p, q) = (sys.p(), sys.q());
    let k = saddle_matrix(sys, 0.0);
    let rank_deficient = |detail: String| -> Error {
        let smallest_ritz = smallest_ritz_value(sys).unwrap_or(f64::NAN);
        Error::RankDeficient { smallest_ritz, detail }
    };
    let lu = Lu::new(&k).map_err(|e| rank_deficient(e.to_string()))?;
    let mut rhs = sys.g.clone();
    rhs.resize(p + q, 0.0);
    let mut x = lu.solve(&rhs);
    // Iterative refinement on the full saddle system.
    for _ in 0..3 {
        if x.iter().any(|v| !v.is_finite()) {
            break;
        }
        let r: Vec<f64> = k.mul_vec(&x).iter().zip(&rhs).map(|(a, b)| b - a).collect();
        let dx = lu.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(rank_deficient("non-finite least-squares solution".into()));
    }
    let m = x[p..].to_vec();

    let op = NormalOperator::new(sys)?;
    let am_g: Vec<f64> = sys.a.mul_vec(&m).iter().zip(&sys.g).map(|(a, g)| a - g).collect();
    let grad = sys.a.mul_t_vec(&op.chol.solve(&am_g));
    let reference = norm2(&sys.a.mul_t_vec(&op.chol.solve(&sys.g)));
    let kkt = norm2(&grad) / reference.max(f64::MIN_POSITIVE);
    if kkt > KKT_TOL {
        return Err(rank_deficient(format!("normal-equation residual {kkt:e}")));
    }
    Ok(ReconstructedField {
        coeffs: m,
        n: sys.n,
        n_cells: sys.n_cells,
        homogeneous: false,
        normalization: Normalization { scale: 1.0, sign: 1.0 },
    })
}

fn smallest_ritz_value(sys: &RwfSystem) -> Result<f64> {
    let opts = EigenOptions { n_eigen: 1, block: 4, tol: 1e-4, max_iter: 50, ..Default::default() };
    match smallest_eigenpairs(sys, &opts) {
        Ok(r) => Ok(r.values[0]),
        Err(Error::NoConvergence { .. }) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

/// Smallest eigenpair with the ten smallest eigenvalues as diagnostics.
/// The eigenvector is scaled to unit `S_M` norm with nonnegative mean.
pub fn solve_homogeneous(sys: &RwfSystem) -> Result<(ReconstructedField, SpectralDiagnostics)> {
    solve_homogeneous_with(sys, &EigenOptions::default())
}

pub fn solve_homogeneous_with(
    sys: &RwfSystem,
    opts: &EigenOptions,
) -> Result<(ReconstructedField, SpectralDiagnostics)> {
    let res = smallest_eigenpairs(sys, opts)?;
    let mut m: Vec<f64> = res.vectors.column(0).iter().copied().collect();
    let mean: f64 = m.iter().zip(&sys.s_m).map(|(v, s)| v * s).sum();
    let sign = if mean < 0.0 { -1.0 } else { 1.0 };
    m.iter_mut().for_each(|v| *v *= sign);
    let field = ReconstructedField {
        coeffs: m,
        n: sys.n,
        n_cells: sys.n_cells,
        homogeneous: true,
        normalization: Normalization { scale: 1.0, sign },
    };
    let diag = SpectralDiagnostics {
        eigenvalues: res.values,
        residuals: res.residuals,
        pencil_residuals: res.pencil_residuals,
        iterations: res.iterations,
        shift: res.shift,
    };
    Ok((field, diag))
}

/// Relative L² errors in percent.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub per_parameter: Vec<f64>,
    pub joint: f64,
    /// Factor applied to the reconstruction before comparison.
    pub scale: f64,
}

/// Exact map sampled at cell centroids, parameter-major.
pub fn sample_exact(exact: &ExactParamField, pair: &HoneycombPair) -> Vec<f64> {
    let n = exact.n();
    let nc = pair.n_cells();
    let mut out = vec![0.0; n * nc];
    for (c, cell) in pair.cells.iter().enumerate() {
        for (k, v) in exact.eval(cell.centroid).into_iter().enumerate() {
            out[k * nc + c] = v;
        }
    }
    out
}

/// Compare against the exact map in the cell-area weighted L² norm. A
/// homogeneous reconstruction is first multiplied by the signed ratio of
/// norms so that only its shape is scored.
pub fn relative_error(recon: &ReconstructedField, exact: &ExactParamField, pair: &HoneycombPair) -> Result<ErrorReport> {
    if exact.n() != recon.n || pair.n_cells() != recon.n_cells {
        return Err(Error::InvalidArgument("reconstruction and exact map sizes disagree".into()));
    }
    let e = sample_exact(exact, pair);
    let nc = recon.n_cells;
    let w = |i: usize| pair.cell_area[i % nc];
    let wdot = |a: &[f64], b: &[f64]| a.iter().zip(b).enumerate().map(|(i, (x, y))| w(i) * x * y).sum::<f64>();
    let e_norm = wdot(&e, &e).sqrt();
    if e_norm == 0.0 {
        return Err(Error::ZeroExactNorm);
    }
    let scale = if recon.homogeneous {
        let r_norm = wdot(&recon.coeffs, &recon.coeffs).sqrt();
        if r_norm == 0.0 {
            return Err(Error::InvalidArgument("reconstruction is zero".into()));
        }
        let sign = if wdot(&recon.coeffs, &e) < 0.0 { -1.0 } else { 1.0 };
        sign * e_norm / r_norm
    } else {
        1.0
    };
    let diff: Vec<f64> = recon.coeffs.iter().zip(&e).map(|(r, x)| scale * r - x).collect();
    let mut per_parameter = Vec::with_capacity(recon.n);
    for k in 0..recon.n {
        let s = k * nc..(k + 1) * nc;
        let ek = wdot(&e[s.clone()], &e[s.clone()]).sqrt();
        if ek == 0.0 {
            return Err(Error::ZeroExactNorm);
        }
        per_parameter.push(100.0 * wdot(&diff[s.clone()], &diff[s]).sqrt() / ek);
    }
    let joint = 100.0 * wdot(&diff, &diff).sqrt() / e_norm;
    Ok(ErrorReport { per_parameter, joint, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{ExactParamField, ScalarMap, Shape, Inclusion};
    use crate::mesh::{generate_honeycomb, Rect};

    fn pair() -> HoneycombPair {
        generate_honeycomb(&Rect::subdomain(), 0.2).unwrap()
    }

    fn exact() -> ExactParamField {
        ExactParamField {
            maps: vec![ScalarMap {
                background: 4.0,
                regions: vec![Inclusion {
                    label: "disk".into(),
                    shape: Shape::Disk { center: [0.1, 0.0], radius: 0.3 },
                    value: 8.0,
                }],
            }],
        }
    }

    fn recon_from(values: Vec<f64>, n_cells: usize, homogeneous: bool) -> ReconstructedField {
        ReconstructedField { coeffs: values, n: 1, n_cells, homogeneous, normalization: Normalization { scale: 1.0, sign: 1.0 } }
    }

    #[test]
    fn exact_and_negated_reconstructions_score_zero() {
        let p = pair();
        let e = sample_exact(&exact(), &p);
        let r = relative_error(&recon_from(e.clone(), p.n_cells(), true), &exact(), &p).unwrap();
        assert!(r.joint < 1e-12);
        let neg: Vec<f64> = e.iter().map(|v| -0.25 * v).collect();
        let r = relative_error(&recon_from(neg, p.n_cells(), true), &exact(), &p).unwrap();
        assert!(r.joint < 1e-12);
        assert!((r.scale + 4.0).abs() < 1e-12);
    }

    #[test]
    fn single_cell_perturbation_has_closed_form_error() {
        let p = pair();
        let e = sample_exact(&exact(), &p);
        let c = p.n_cells() / 2;
        let delta = 0.7;
        let mut r = e.clone();
        r[c] += delta;
        let rep = relative_error(&recon_from(r, p.n_cells(), false), &exact(), &p).unwrap();
        let norm: f64 = e.iter().zip(&p.cell_area).map(|(v, a)| a * v * v).sum::<f64>().sqrt();
        let expected = 100.0 * delta * p.cell_area[c].sqrt() / norm;
        assert!((rep.joint - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn zero_exact_norm_is_rejected() {
        let p = pair();
        let zero = ExactParamField::constant(&[0.0]);
        let r = recon_from(vec![1.0; p.n_cells()], p.n_cells(), true);
        assert!(matches!(relative_error(&r, &zero, &p), Err(Error::ZeroExactNorm)));
    }

    #[test]
    fn gap_of_duplicate_eigenvalues_is_zero() {
        let d = SpectralDiagnostics {
            eigenvalues: vec![0.5, 0.5, 1.0],
            residuals: vec![],
            pencil_residuals: vec![],
            iterations: 1,
            shift: 0.0,
        };
        assert_eq!(spectral_gap(&d), 0.0);
    }
}
