use nalgebra::{DMatrix, DVector};

use super::{PathCurve, ThirdOrderField};
use crate::error::{Error, Result};

/// Default number of RK4 steps per path segment.
pub const DEFAULT_STEPS: usize = 64;

/// Resolvent `R_B^γ` of a path.
#[derive(Debug, Clone)]
pub struct ResolventResult {
    pub matrix: DMatrix<f64>,
    /// Total number of RK4 steps taken.
    pub steps: usize,
    /// Largest step in the chord-length parameter `t ∈ [0, 1]`.
    pub step_size: f64,
}

/// Trajectory of one transported vector.
#[derive(Debug, Clone)]
pub struct Transport {
    pub t: Vec<f64>,
    pub values: Vec<DVector<f64>>,
    /// `min_t |φ(t)|`.
    pub min_norm: f64,
}

impl Transport {
    pub fn last(&self) -> &DVector<f64> {
        self.values.last().expect("trajectory has the initial value")
    }
}

/// Defects of the group laws of the resolvent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawReport {
    /// `‖R^{γ̄₁} R^{γ₁} − I‖₂`.
    pub inverse_defect: f64,
    /// `‖R^{[γ₁ γ₂]} − R^{γ₂} R^{γ₁}‖₂`.
    pub concat_defect: f64,
}

/// Integrates `Φ′ = −(B(γ)·γ′) Φ` with classical RK4 on each segment of
/// the path, calling `visit` after every step with the global parameter.
fn integrate(
    b: &ThirdOrderField,
    path: &PathCurve,
    steps: usize,
    mut state: DMatrix<f64>,
    mut visit: impl FnMut(f64, &DMatrix<f64>),
) -> Result<(DMatrix<f64>, usize, f64)> {
    let [n, _, n2] = b.dims();
    if n != n2 || state.nrows() != n {
        return Err(Error::InvalidArgument(format!("field of shape {:?} has no resolvent on ℝ^{}", b.dims(), state.nrows())));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("at least one step per segment is required".into()));
    }
    if !path.inside(b.domain()) {
        return Err(Error::InvalidArgument("path leaves the domain of the field".into()));
    }
    let lens = path.segment_lengths();
    let total: f64 = lens.iter().sum();
    let mut t0 = 0.0;
    let mut max_dt = 0.0_f64;
    visit(0.0, &state);
    for (w, &len) in path.points().windows(2).zip(&lens) {
        let dt_seg = if total > 0.0 { len / total } else { 0.0 };
        let (a, v) = (w[0], [w[1][0] - w[0][0], w[1][1] - w[0][1]]);
        // Segment-local parameter s ∈ [0, 1] with γ(s) = a + s v, γ′ = v.
        let rhs = |s: f64, y: &DMatrix<f64>| -> DMatrix<f64> {
            let x = [a[0] + s * v[0], a[1] + s * v[1]];
            -(b.directional(x, v) * y)
        };
        let h = 1.0 / steps as f64;
        max_dt = max_dt.max(dt_seg * h);
        for s in 0..steps {
            let s0 = s as f64 * h;
            let k1 = rhs(s0, &state);
            let k2 = rhs(s0 + 0.5 * h, &(&state + &k1 * (0.5 * h)));
            let k3 = rhs(s0 + 0.5 * h, &(&state + &k2 * (0.5 * h)));
            let k4 = rhs(s0 + h, &(&state + &k3 * h));
            let next = &state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let t_prev = t0 + dt_seg * s0;
            if !next.iter().all(|x| x.is_finite()) {
                return Err(Error::BlowUp { last_valid_t: t_prev });
            }
            state = next;
            visit(t0 + dt_seg * (s0 + h), &state);
        }
        t0 += dt_seg;
    }
    Ok((state, steps * path.n_segments(), max_dt))
}

/// `R_B^γ`, the flow of the characteristic ODE applied to the identity.
pub fn resolvent(b: &ThirdOrderField, path: &PathCurve, steps: usize) -> Result<ResolventResult> {
    let n = b.dims()[0];
    let (matrix, steps, step_size) = integrate(b, path, steps, DMatrix::identity(n, n), |_, _| {})?;
    let det = matrix.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::BlowUp { last_valid_t: 1.0 });
    }
    Ok(ResolventResult { matrix, steps, step_size })
}

/// Transports `v` along the path and records the trajectory.
pub fn transport(b: &ThirdOrderField, path: &PathCurve, v: &DVector<f64>, steps: usize) -> Result<Transport> {
    let mut t = Vec::new();
    let mut values = Vec::new();
    integrate(b, path, steps, DMatrix::from_column_slice(v.len(), 1, v.as_slice()), |s, y| {
        t.push(s);
        values.push(y.column(0).into_owned());
    })?;
    let min_norm = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    Ok(Transport { t, values, min_norm })
}

/// Checks `R^{γ̄} = (R^γ)⁻¹` on `γ₁` and `R^{[γ₁ γ₂]} = R^{γ₂} R^{γ₁}`.
pub fn resolvent_laws_check(b: &ThirdOrderField, g1: &PathCurve, g2: &PathCurve, steps: usize) -> Result<LawReport> {
    let r1 = resolvent(b, g1, steps)?.matrix;
    let r1_rev = resolvent(b, &g1.reversed(), steps)?.matrix;
    let r2 = resolvent(b, g2, steps)?.matrix;
    let r12 = resolvent(b, &g1.concat(g2)?, steps)?.matrix;
    let n = r1.nrows();
    let inverse_defect = (&r1_rev * &r1 - DMatrix::identity(n, n)).singular_values().max();
    let concat_defect = (r12 - &r2 * &r1).singular_values().max();
    Ok(LawReport { inverse_defect, concat_defect })
}
