use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AtStage, Stage, StageError};
use crate::characteristics::{
    conservativity_probe, mixed_diagonal_field, probe_loops, random_similarity_field, ProbeResult, ThirdOrderField,
    DEFAULT_STEPS,
};
use crate::error::{Error, Result};
use crate::mesh::Rect;

/// Conservativity probe of a synthetic field at random base points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub name: String,
    pub field: ProbeFieldSpec,
    #[serde(default)]
    pub probe: ProbeSpec,
    #[serde(default)]
    pub output: super::OutputSpec,
}

/// Field under test, on `(-1, 1)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum ProbeFieldSpec {
    /// `B = 0`.
    Zero { n: usize },
    /// `B = M⁻¹·DM` for a random smooth invertible `M`.
    Similarity { n: usize, seed: u64 },
    /// Diagonal stack with `k` gradient entries and `n − k` rotational ones.
    Diagonal { n: usize, k: usize, seed: u64 },
}

impl ProbeFieldSpec {
    pub fn n(&self) -> usize {
        match *self {
            Self::Zero { n } | Self::Similarity { n, .. } | Self::Diagonal { n, .. } => n,
        }
    }

    /// Degree of conservativity the construction guarantees.
    pub fn expected_k(&self) -> usize {
        match *self {
            Self::Zero { n } | Self::Similarity { n, .. } => n,
            Self::Diagonal { k, .. } => k,
        }
    }

    pub fn build(&self) -> ThirdOrderField {
        let domain = Rect::omega();
        match *self {
            Self::Zero { n } => ThirdOrderField::zero(n, domain),
            Self::Similarity { n, seed } => random_similarity_field(n, seed, domain),
            Self::Diagonal { n, k, seed } => mixed_diagonal_field(n, k, seed, domain),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSpec {
    pub base_points: usize,
    pub seed: u64,
    pub loops: usize,
    pub radius: f64,
    pub tol: f64,
    pub steps: usize,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self { base_points: 5, seed: 1, loops: 6, radius: 0.4, tol: 1e-6, steps: DEFAULT_STEPS }
    }
}

impl ProbeConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn output_dir(&self) -> &str {
        self.output.dir.as_deref().unwrap_or(&self.name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.name.trim().is_empty() {
            return bad("probe name is empty");
        }
        let n = self.field.n();
        if n == 0 {
            return bad("field must have at least one component");
        }
        if let ProbeFieldSpec::Diagonal { k, .. } = self.field {
            if k > n {
                return bad("k must not exceed n");
            }
        }
        let p = &self.probe;
        if p.base_points == 0 {
            return bad("at least one base point is required");
        }
        if p.loops < 2 {
            return bad("at least two loops are required");
        }
        if !(p.radius > 0.0 && p.radius.is_finite()) {
            return bad("loop radius must be positive");
        }
        if !(p.tol > 0.0 && p.tol < 1.0) {
            return bad("tolerance must lie in (0, 1)");
        }
        if p.steps == 0 {
            return bad("at least one step per segment is required");
        }
        Ok(())
    }
}

/// Summary over all base points.
#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub name: String,
    pub n: usize,
    pub expected_k: usize,
    pub results: Vec<ProbeResult>,
}

impl ProbeReport {
    pub fn ks(&self) -> Vec<usize> {
        self.results.iter().map(|r| r.k).collect()
    }

    /// Same `k` at every base point.
    pub fn consistent(&self) -> bool {
        self.results.windows(2).all(|w| w[0].k == w[1].k)
    }

    pub fn to_text(&self) -> String {
        let ks: Vec<String> = self.ks().iter().map(usize::to_string).collect();
        let mut s = format!(
            "name {}\nn {}\nexpected_k {}\nk {}\nconsistent {}\n",
            self.name,
            self.n,
            self.expected_k,
            ks.join(" "),
            self.consistent()
        );
        for (i, r) in self.results.iter().enumerate() {
            s += &format!("\n[point {i}]\n");
            s += &r.to_text();
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub report: ProbeReport,
    pub dir: PathBuf,
}

/// Base points drawn uniformly from `(-0.6, 0.6)²`.
fn base_points(count: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| [rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)]).collect()
}

/// Runs the probe at every base point and writes `probe.txt`.
pub fn run_probe(cfg: &ProbeConfig, root: &Path) -> Result<ProbeOutcome, StageError> {
    cfg.validate().at(Stage::Config)?;
    let b = cfg.field.build();
    let p = &cfg.probe;
    let results = base_points(p.base_points, p.seed)
        .into_iter()
        .map(|x| {
            let loops = probe_loops(x, p.radius, p.loops, b.domain())?;
            conservativity_probe(&b, x, &loops, p.tol, p.steps)
        })
        .collect::<Result<Vec<_>>>()
        .at(Stage::Diagnostics)?;
    let report = ProbeReport { name: cfg.name.clone(), n: cfg.field.n(), expected_k: cfg.field.expected_k(), results };
    let dir = root.join(cfg.output_dir());
    std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("probe.txt"), report.to_text())).at(Stage::Output)?;
    Ok(ProbeOutcome { report, dir })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: &str = r#"
name = "probe_test"
[field]
kind = "diagonal"
n = 3
k = 2
seed = 9
[probe]
base_points = 2
loops = 4
steps = 32
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = ProbeConfig::from_toml_str(CFG).unwrap();
        assert_eq!(cfg.field, ProbeFieldSpec::Diagonal { n: 3, k: 2, seed: 9 });
        assert_eq!(cfg.probe.radius, 0.4);
        assert!(ProbeConfig::from_toml_str(&CFG.replace("k = 2", "k = 4")).is_err());
        assert!(ProbeConfig::from_toml_str(&CFG.replace("diagonal", "spiral")).is_err());
        assert!(ProbeConfig::from_toml_str(&CFG.replace("loops = 4", "loops = 1")).is_err());
    }

    #[test]
    fn run_writes_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ProbeConfig::from_toml_str(CFG).unwrap();
        let out = run_probe(&cfg, dir.path()).unwrap();
        assert_eq!(out.report.ks(), vec![2, 2]);
        assert!(out.report.consistent());
        let text = std::fs::read_to_string(out.dir.join("probe.txt")).unwrap();
        assert!(text.starts_with("name probe_test\nn 3\nexpected_k 2\nk 2 2\nconsistent true\n"));
    }
}
