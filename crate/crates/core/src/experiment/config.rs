use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{BoundaryCondition, ExactParamField, ScalarMap};
use crate::mesh::DEFAULT_MESH_SEED;
use crate::tensors::ElasticBasis;

/// One experiment: phantom, forward solves, inversion and output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub phantom: PhantomSpec,
    pub forward: ForwardSpec,
    pub inversion: InversionSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    /// `identity`, `isotropic` or `aniso6`.
    pub basis: String,
    /// One map per basis tensor.
    pub maps: Vec<ScalarMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardSpec {
    pub h: f64,
    #[serde(default = "default_mesh_seed")]
    pub seed: u64,
    pub bcs: Vec<BoundaryCondition>,
    /// Angular frequencies. Empty means static solves.
    #[serde(default)]
    pub omegas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionSpec {
    pub h: f64,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    /// Number of forward fields used, taken in order. All when absent.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default = "default_n_eigen")]
    pub n_eigen: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Relative to the output root. Defaults to the scenario name.
    #[serde(default)]
    pub dir: Option<String>,
}

fn default_mesh_seed() -> u64 {
    DEFAULT_MESH_SEED
}

fn default_n_eigen() -> usize {
    10
}

/// A single forward solve: boundary condition plus optional frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSpec {
    pub bc: BoundaryCondition,
    pub omega: Option<f64>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn basis(&self) -> Result<ElasticBasis> {
        ElasticBasis::by_name(&self.phantom.basis)
    }

    pub fn exact(&self) -> ExactParamField {
        ExactParamField { maps: self.phantom.maps.clone() }
    }

    pub fn is_harmonic(&self) -> bool {
        !self.forward.omegas.is_empty()
    }

    /// All forward solves, boundary condition major.
    pub fn all_fields(&self) -> Vec<FieldSpec> {
        let mut out = Vec::new();
        for &bc in &self.forward.bcs {
            if self.forward.omegas.is_empty() {
                out.push(FieldSpec { bc, omega: None });
            } else {
                out.extend(self.forward.omegas.iter().map(|&w| FieldSpec { bc, omega: Some(w) }));
            }
        }
        out
    }

    /// The first `m` forward solves.
    pub fn used_fields(&self) -> Vec<FieldSpec> {
        let mut all = self.all_fields();
        all.truncate(self.inversion.m.unwrap_or(usize::MAX));
        all
    }

    pub fn output_dir(&self) -> &str {
        self.output.dir.as_deref().unwrap_or(&self.name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.name.trim().is_empty() {
            return bad("scenario name is empty".into());
        }
        let basis = self.basis()?;
        if self.phantom.maps.len() != basis.len() {
            return bad(format!(
                "basis `{}` has {} tensors but {} maps are given",
                basis.name,
                basis.len(),
                self.phantom.maps.len()
            ));
        }
        for map in &self.phantom.maps {
            let values = std::iter::once(map.background).chain(map.regions.iter().map(|r| r.value));
            if values.into_iter().any(|v| !v.is_finite()) {
                return bad("phantom values must be finite".into());
            }
        }
        for (name, h) in [("forward.h", self.forward.h), ("inversion.h", self.inversion.h)] {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("{name} must be positive, got {h}"));
            }
        }
        if self.forward.bcs.is_empty() {
            return bad("forward.bcs is empty".into());
        }
        for bc in &self.forward.bcs {
            bc.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.forward.omegas.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return bad("frequencies must be positive and finite".into());
        }
        if !(self.inversion.noise >= 0.0 && self.inversion.noise.is_finite()) {
            return bad(format!("noise level must be nonnegative, got {}", self.inversion.noise));
        }
        let total = self.all_fields().len();
        match self.inversion.m {
            Some(0) => return bad("inversion.m must be at least 1".into()),
            Some(m) if m > total => {
                return bad(format!("inversion.m = {m} exceeds the {total} defined forward solves"));
            }
            _ => {}
        }
        if self.inversion.n_eigen == 0 {
            return bad("inversion.n_eigen must be at least 1".into());
        }
        Ok(())
    }
}
