//! Constant fourth-order elasticity tensors in 2-D Voigt form.
//!
//! Strains are written `(E11, E22, 2 E12)` and stresses `(S11, S22, S12)`,
//! so a tensor acts as a plain 3×3 matrix-vector product.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};

/// Symmetric 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

/// Dense 4-index tensor `C[i][j][k][l]`.
pub type Dense4 = [[[[f64; 2]; 2]; 2]; 2];

const SYM_TOL: f64 = 1e-12;

#[inline]
fn voigt_index(i: usize, j: usize) -> usize {
    if i == j {
        i
    } else {
        2
    }
}

/// Strain in Voigt form (engineering shear).
#[inline]
pub fn strain_to_voigt(e: &Mat2) -> [f64; 3] {
    [e[0][0], e[1][1], e[0][1] + e[1][0]]
}

/// Stress from Voigt form.
#[inline]
pub fn stress_from_voigt(s: [f64; 3]) -> Mat2 {
    [[s[0], s[2]], [s[2], s[1]]]
}

/// Fourth-order tensor with minor and major symmetries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor4 {
    pub voigt: [[f64; 3]; 3],
}

impl SymTensor4 {
    pub fn new(voigt: [[f64; 3]; 3]) -> Result<Self> {
        for i in 0..3 {
            for j in 0..i {
                let scale = voigt[i][j].abs().max(voigt[j][i].abs()).max(1.0);
                if (voigt[i][j] - voigt[j][i]).abs() > SYM_TOL * scale {
                    return Err(Error::InvalidArgument(format!(
                        "Voigt matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { voigt })
    }

    pub fn zero() -> Self {
        Self { voigt: [[0.0; 3]; 3] }
    }

    /// Identity on symmetric matrices.
    pub fn identity() -> Self {
        Self { voigt: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]] }
    }

    /// `I ⊗ I`, mapping `E` to `tr(E) I`.
    pub fn trace_outer() -> Self {
        Self { voigt: [[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]] }
    }

    /// `2 μ 𝐈 + λ I ⊗ I`.
    pub fn isotropic(mu: f64, lambda: f64) -> Self {
        Self::identity().scale(2.0 * mu).add(&Self::trace_outer().scale(lambda))
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { voigt: self.voigt.map(|r| r.map(|v| a * v)) }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut v = self.voigt;
        for (i, row) in v.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x += other.voigt[i][j];
            }
        }
        Self { voigt: v }
    }

    /// Voigt action on an engineering strain vector.
    #[inline]
    pub fn apply_voigt(&self, e: [f64; 3]) -> [f64; 3] {
        let v = &self.voigt;
        [
            v[0][0] * e[0] + v[0][1] * e[1] + v[0][2] * e[2],
            v[1][0] * e[0] + v[1][1] * e[1] + v[1][2] * e[2],
            v[2][0] * e[0] + v[2][1] * e[1] + v[2][2] * e[2],
        ]
    }

    /// Symmetric-matrix action without the symmetry check.
    #[inline]
    pub fn apply(&self, e: &Mat2) -> Mat2 {
        stress_from_voigt(self.apply_voigt(strain_to_voigt(e)))
    }

    pub fn to_dense(&self) -> Dense4 {
        let mut c = [[[[0.0; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        c[i][j][k][l] = self.voigt[voigt_index(i, j)][voigt_index(k, l)];
                    }
                }
            }
        }
        c
    }

    pub fn from_dense(c: &Dense4) -> Result<Self> {
        let idx = [(0, 0), (1, 1), (0, 1)];
        let mut v = [[0.0; 3]; 3];
        for (a, &(i, j)) in idx.iter().enumerate() {
            for (b, &(k, l)) in idx.iter().enumerate() {
                v[a][b] = c[i][j][k][l];
            }
        }
        let back = Self::new(v)?;
        let d = back.to_dense();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        if (d[i][j][k][l] - c[i][j][k][l]).abs() > SYM_TOL * (1.0 + c[i][j][k][l].abs()) {
                            return Err(Error::InvalidArgument(
                                "dense tensor lacks minor symmetry".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(back)
    }

    /// Frobenius inner product of the Voigt matrices.
    pub fn frobenius(&self, other: &Self) -> f64 {
        (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| self.voigt[i][j] * other.voigt[i][j]).sum()
    }

    /// Smallest value of `E : C : E` over symmetric `E` with `E : E = 1`.
    pub fn ellipticity(&self) -> f64 {
        // Change variables so the strain metric diag(1, 1, 1/2) becomes the identity.
        let s = [1.0, 1.0, SQRT_2];
        let m = Matrix3::from_fn(|i, j| s[i] * self.voigt[i][j] * s[j]);
        SymmetricEigen::new(m).eigenvalues.min()
    }
}

/// `C : E` for symmetric `E`.
pub fn contract(c: &SymTensor4, e: &Mat2) -> Result<Mat2> {
    let scale = e[0][1].abs().max(e[1][0].abs()).max(1.0);
    if (e[0][1] - e[1][0]).abs() > SYM_TOL * scale {
        return Err(Error::InvalidArgument("strain is not symmetric".into()));
    }
    Ok(c.apply(e))
}

/// `Σ_kl C_ijkl E_kl` by brute force.
pub fn contract_dense(c: &Dense4, e: &Mat2) -> Mat2 {
    let mut s = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    s[i][j] += c[i][j][k][l] * e[k][l];
                }
            }
        }
    }
    s
}

/// Ordered list of constant tensors spanning the model space.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticBasis {
    pub name: String,
    pub tensors: Vec<SymTensor4>,
}

/// `[2𝐈, I⊗I]`: shear modulus first, then the first Lamé parameter.
pub fn make_isotropic_basis() -> ElasticBasis {
    ElasticBasis {
        name: "isotropic2".into(),
        tensors: vec![SymTensor4::identity().scale(2.0), SymTensor4::trace_outer()],
    }
}

/// Orthogonal basis of all symmetric 2-D elasticity tensors.
pub fn make_aniso6_basis() -> ElasticBasis {
    let single = |entries: &[(usize, usize, f64)]| {
        let mut v = [[0.0; 3]; 3];
        for &(i, j, x) in entries {
            v[i][j] = x;
        }
        SymTensor4 { voigt: v }
    };
    ElasticBasis {
        name: "aniso6".into(),
        tensors: vec![
            single(&[(0, 0, SQRT_2)]),
            single(&[(2, 2, SQRT_2)]),
            single(&[(1, 1, SQRT_2)]),
            single(&[(0, 2, 1.0), (2, 0, 1.0)]),
            single(&[(0, 1, 1.0), (1, 0, 1.0)]),
            single(&[(1, 2, 1.0), (2, 1, 1.0)]),
        ],
    }
}

/// `[𝐈]`: one scalar modulus with `C = μ 𝐈`.
pub fn make_identity_basis() -> ElasticBasis {
    ElasticBasis { name: "identity".into(), tensors: vec![SymTensor4::identity()] }
}

impl ElasticBasis {
    pub fn custom(name: impl Into<String>, tensors: Vec<SymTensor4>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::InvalidArgument("basis must contain at least one tensor".into()));
        }
        Ok(Self { name: name.into(), tensors })
    }

    /// Look up a builtin basis.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "isotropic2" | "isotropic" | "lame" => Ok(make_isotropic_basis()),
            "aniso6" => Ok(make_aniso6_basis()),
            "identity" | "single" => Ok(make_identity_basis()),
            _ => Err(Error::Config(format!("unknown basis '{name}'"))),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// `Σ_k μ_k C_k`.
    pub fn combine(&self, mu: &[f64]) -> SymTensor4 {
        assert_eq!(mu.len(), self.len(), "coefficient count does not match basis");
        self.tensors
            .iter()
            .zip(mu)
            .fold(SymTensor4::zero(), |acc, (c, &m)| acc.add(&c.scale(m)))
    }

    /// Coefficients of `c` by least squares on the Voigt entries.
    pub fn project(&self, c: &SymTensor4) -> Vec<f64> {
        let n = self.len();
        let a = nalgebra::DMatrix::from_fn(9, n, |r, k| self.tensors[k].voigt[r / 3][r % 3]);
        let b = nalgebra::DVector::from_fn(9, |r, _| c.voigt[r / 3][r % 3]);
        let svd = a.svd(true, true);
        svd.solve(&b, 1e-14).expect("svd with both factors").iter().copied().collect()
    }

    /// Plain-text form: one 3×3 block per tensor, blocks separated by a blank
    /// line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, t) in self.tensors.iter().enumerate() {
            if k > 0 {
                s.push('\n');
            }
            for row in &t.voigt {
                let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", row[0], row[1], row[2]);
            }
        }
        s
    }

    pub fn from_text(name: impl Into<String>, text: &str) -> Result<Self> {
        let rows: Vec<[f64; 3]> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let v: Vec<f64> = l
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Parse(format!("basis row '{l}': {e}")))?;
                <[f64; 3]>::try_from(v.as_slice())
                    .map_err(|_| Error::Parse(format!("basis row '{l}' needs 3 entries")))
            })
            .collect::<Result<_>>()?;
        if rows.is_empty() || rows.len() % 3 != 0 {
            return Err(Error::Parse(format!("basis text has {} rows, expected a multiple of 3", rows.len())));
        }
        let tensors = rows
            .chunks(3)
            .map(|c| SymTensor4::new([c[0], c[1], c[2]]))
            .collect::<Result<_>>()?;
        Self::custom(name, tensors)
    }
}
