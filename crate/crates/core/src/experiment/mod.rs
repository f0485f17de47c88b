//! Declarative experiment runner: forward solves, interpolation, noise,
//! assembly, inversion, diagnostics and artifact output.

mod config;
mod output;
mod probe;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::forward::{solve_harmonic, solve_static, VectorField};
use crate::inverse::{
    relative_error, smallest_eigenpairs, solve_homogeneous_with, solve_inhomogeneous, spectral_gap, EigenOptions,
    ErrorReport, ReconstructedField, SpectralDiagnostics,
};
use crate::mesh::{generate_honeycomb, generate_triangular_seeded, HoneycombPair, Rect, TriMesh};
use crate::rwf::{add_noise, assemble_system, assemble_t, condition_map, interpolate_to_inversion, DataSet, RwfSystem};

pub use config::{FieldSpec, ForwardSpec, InversionSpec, OutputSpec, PhantomSpec, Scenario};
pub use output::{write_outputs, write_sweep_table};
pub use probe::{run_probe, ProbeConfig, ProbeFieldSpec, ProbeOutcome, ProbeReport, ProbeSpec};

/// Environment variable naming the directory all outputs are written under.
pub const OUTPUT_ROOT_ENV: &str = "RWF_OUTPUT_ROOT";

/// Output root from the environment, defaulting to `output`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("output"), PathBuf::from)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Forward,
    Interpolation,
    Assembly,
    Solve,
    Diagnostics,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Forward => "forward",
            Stage::Interpolation => "interpolation",
            Stage::Assembly => "assembly",
            Stage::Solve => "solve",
            Stage::Diagnostics => "diagnostics",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

/// Pipeline failure tagged with the stage it happened in.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T, E: Into<Error>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|e| StageError { stage, source: e.into() })
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub forward: f64,
    pub interpolation: f64,
    pub assembly: f64,
    pub solve: f64,
    pub diagnostics: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub n_cells: usize,
    pub rows: usize,
    pub homogeneous: bool,
    pub errors: ErrorReport,
    pub spectral: SpectralDiagnostics,
    pub spectral_gap: f64,
    /// Largest strain condition number over the inversion triangles.
    pub max_condition: f64,
    pub timings: Timings,
    pub config: Scenario,
}

/// Everything a run produced, for artifact output.
pub struct RunOutcome {
    pub report: RunReport,
    pub pair: HoneycombPair,
    pub data: DataSet,
    pub reconstruction: ReconstructedField,
    pub condition: Vec<f64>,
    pub system: RwfSystem,
}

type FieldSlot = Arc<Mutex<Option<Arc<VectorField>>>>;

/// Forward meshes and solutions shared between runs of one process.
#[derive(Default)]
pub struct ForwardCache {
    meshes: Mutex<HashMap<String, Arc<Mutex<Option<Arc<TriMesh>>>>>>,
    fields: Mutex<HashMap<String, FieldSlot>>,
}

impl ForwardCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn mesh(&self, h: f64, seed: u64) -> crate::Result<Arc<TriMesh>> {
        let key = format!("{:016x}/{seed}", h.to_bits());
        let slot = self.meshes.lock().unwrap().entry(key).or_default().clone();
        let mut guard = slot.lock().unwrap();
        if let Some(m) = guard.as_ref() {
            return Ok(m.clone());
        }
        let mesh = Arc::new(generate_triangular_seeded(&Rect::omega(), h, seed)?);
        *guard = Some(mesh.clone());
        Ok(mesh)
    }

    fn field(&self, scn: &Scenario, spec: &FieldSpec) -> crate::Result<Arc<VectorField>> {
        let key = serde_json::to_string(&(&scn.phantom, scn.forward.h, scn.forward.seed, spec))
            .expect("field key serializes");
        let slot = self.fields.lock().unwrap().entry(key).or_default().clone();
        let mut guard = slot.lock().unwrap();
        if let Some(u) = guard.as_ref() {
            return Ok(u.clone());
        }
        let mesh = self.mesh(scn.forward.h, scn.forward.seed)?;
        let basis = scn.basis()?;
        let exact = scn.exact();
        let u = match spec.omega {
            None => solve_static(&mesh, &basis, &exact, &spec.bc)?,
            Some(w) => solve_harmonic(&mesh, &basis, &exact, &spec.bc, w)?,
        };
        let u = Arc::new(u);
        *guard = Some(u.clone());
        Ok(u)
    }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Run one scenario without writing anything.
pub fn run_pipeline(scn: &Scenario, cache: &ForwardCache) -> Result<RunOutcome, StageError> {
    let start = Instant::now();
    scn.validate().at(Stage::Config)?;
    let basis = scn.basis().at(Stage::Config)?;
    let exact = scn.exact();
    let mut timings = Timings::default();

    let (pair, data) = build_data(scn, cache, &mut timings)?;

    let t = Instant::now();
    let tu = assemble_t(&data, &basis);
    let condition = condition_map(&tu);
    let system = assemble_system(&tu, &data, &pair).at(Stage::Assembly)?;
    timings.assembly = secs(t);

    let opts = EigenOptions { n_eigen: scn.inversion.n_eigen.min(system.q()), ..Default::default() };
    let t = Instant::now();
    let (reconstruction, spectral) = if system.is_homogeneous() {
        let (r, d) = solve_homogeneous_with(&system, &opts).at(Stage::Solve)?;
        timings.solve = secs(t);
        (r, d)
    } else {
        let r = solve_inhomogeneous(&system).at(Stage::Solve)?;
        timings.solve = secs(t);
        let t = Instant::now();
        let e = smallest_eigenpairs(&system, &opts).at(Stage::Diagnostics)?;
        timings.diagnostics = secs(t);
        let d = SpectralDiagnostics {
            eigenvalues: e.values,
            residuals: e.residuals,
            pencil_residuals: e.pencil_residuals,
            iterations: e.iterations,
            shift: e.shift,
        };
        (r, d)
    };

    let t = Instant::now();
    let errors = relative_error(&reconstruction, &exact, &pair).at(Stage::Diagnostics)?;
    let max_condition = condition.iter().copied().fold(0.0, f64::max);
    timings.diagnostics += secs(t);
    timings.total = secs(start);

    let report = RunReport {
        name: scn.name.clone(),
        m: data.m(),
        n: basis.len(),
        n_cells: pair.n_cells(),
        rows: system.p(),
        homogeneous: system.is_homogeneous(),
        errors,
        spectral_gap: spectral_gap(&spectral),
        spectral,
        max_condition,
        timings,
        config: scn.clone(),
    };
    Ok(RunOutcome { report, pair, data, reconstruction, condition, system })
}

/// Run a scenario and write its artifacts under `root`.
pub fn run_scenario(scn: &Scenario, root: &Path, cache: &ForwardCache) -> Result<RunReport, StageError> {
    let outcome = run_pipeline(scn, cache)?;
    write_outputs(&root.join(scn.output_dir()), &outcome).at(Stage::Output)?;
    Ok(outcome.report)
}

/// Load, run and write a scenario file.
pub fn run_scenario_file(path: &Path, root: &Path) -> Result<RunReport, StageError> {
    let scn = Scenario::load(path).at(Stage::Config)?;
    run_scenario(&scn, root, &ForwardCache::new())
}

/// Assemble a scenario and write its matrices in Matrix Market format.
pub fn export_matrices(scn: &Scenario, root: &Path, cache: &ForwardCache) -> Result<PathBuf, StageError> {
    let system = assemble_scenario(scn, cache)?;
    let dir = root.join(scn.output_dir()).join("matrices");
    system.export_matrix_market(&dir).at(Stage::Output)?;
    Ok(dir)
}

/// Forward solves, data preparation and assembly, without solving.
pub fn assemble_scenario(scn: &Scenario, cache: &ForwardCache) -> Result<RwfSystem, StageError> {
    scn.validate().at(Stage::Config)?;
    let basis = scn.basis().at(Stage::Config)?;
    let (pair, data) = build_data(scn, cache, &mut Timings::default())?;
    assemble_system(&assemble_t(&data, &basis), &data, &pair).at(Stage::Assembly)
}

/// Forward solves, then interpolation onto the honeycomb with noise.
fn build_data(
    scn: &Scenario,
    cache: &ForwardCache,
    timings: &mut Timings,
) -> Result<(HoneycombPair, DataSet), StageError> {
    let specs = scn.used_fields();
    let t = Instant::now();
    let forward: Vec<Arc<VectorField>> =
        specs.iter().map(|s| cache.field(scn, s)).collect::<crate::Result<_>>().at(Stage::Forward)?;
    timings.forward = secs(t);

    let t = Instant::now();
    let pair = generate_honeycomb(&Rect::subdomain(), scn.inversion.h).at(Stage::Interpolation)?;
    let mut fields = Vec::with_capacity(specs.len());
    let mut loads = Vec::with_capacity(specs.len());
    for (l, (u, spec)) in forward.iter().zip(&specs).enumerate() {
        let v = interpolate_to_inversion(u, &pair).at(Stage::Interpolation)?;
        let v = add_noise(&v, scn.inversion.noise, scn.inversion.seed.wrapping_add(l as u64))
            .at(Stage::Interpolation)?;
        // −div(C : ε(u)) = ω² u for time-harmonic data.
        loads.push(spec.omega.map(|w| v.scaled(w * w)));
        fields.push(v);
    }
    let data = DataSet::new(fields, loads).at(Stage::Interpolation)?;
    timings.interpolation = secs(t);
    Ok((pair, data))
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Number of forward fields used.
    M,
    /// Number of leading frequencies kept; all resulting fields are used.
    OmegaCount,
    /// Noise level.
    Noise,
    /// Honeycomb diameter.
    H,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "m" => Ok(Self::M),
            "omega_count" | "omega-count" => Ok(Self::OmegaCount),
            "noise" => Ok(Self::Noise),
            "h" => Ok(Self::H),
            other => Err(Error::Config(format!("unknown sweep axis `{other}`"))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::M => "m",
            Self::OmegaCount => "omega_count",
            Self::Noise => "noise",
            Self::H => "h",
        })
    }
}

fn as_count(v: f64) -> crate::Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("sweep value {v} is not a positive integer")))
    }
}

impl SweepAxis {
    /// Scenario with this axis set to `value`, writing into a subdirectory.
    pub fn apply(self, base: &Scenario, value: f64) -> crate::Result<Scenario> {
        let mut s = base.clone();
        match self {
            Self::M => s.inversion.m = Some(as_count(value)?),
            Self::OmegaCount => {
                let k = as_count(value)?;
                if k > s.forward.omegas.len() {
                    return Err(Error::Config(format!(
                        "{k} frequencies requested but {} are defined",
                        s.forward.omegas.len()
                    )));
                }
                s.forward.omegas.truncate(k);
                s.inversion.m = None;
            }
            Self::Noise => s.inversion.noise = value,
            Self::H => s.inversion.h = value,
        }
        s.output.dir = Some(format!("{}/{}_{}", base.output_dir(), self, value));
        s.name = format!("{}_{}_{}", base.name, self, value);
        s.validate()?;
        Ok(s)
    }
}

/// Run one scenario per axis value in parallel and write the combined table
/// as `sweep_<axis>.csv` in the base output directory.
pub fn sweep(
    base: &Scenario,
    axis: SweepAxis,
    values: &[f64],
    root: &Path,
    cache: &ForwardCache,
) -> Result<Vec<RunReport>, StageError> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(StageError { stage: Stage::Config, source: Error::Config("sweep values must be finite and non-empty".into()) });
    }
    let scenarios: Vec<Scenario> =
        values.iter().map(|&v| axis.apply(base, v)).collect::<crate::Result<_>>().at(Stage::Config)?;
    let reports: Vec<RunReport> =
        scenarios.par_iter().map(|s| run_scenario(s, root, cache)).collect::<Result<_, _>>()?;
    let dir = root.join(base.output_dir());
    write_sweep_table(&dir.join(format!("sweep_{axis}.csv")), axis, values, &reports).at(Stage::Output)?;
    Ok(reports)
}
