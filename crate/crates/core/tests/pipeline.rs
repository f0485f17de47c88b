use std::path::Path;
use std::process::Command;

use rwf::experiment::{run_pipeline, ForwardCache, Scenario, Stage, SweepAxis};

const SMALL: &str = r#"
name = "small"

[phantom]
basis = "identity"

[[phantom.maps]]
background = 4.0

[[phantom.maps.regions]]
label = "disk"
shape = "disk"
center = [0.0, 0.1]
radius = 0.25
value = 7.0

[forward]
h = 0.03

[[forward.bcs]]
clamp = "bottom"
drive = "top"
g = [1.0, -0.5]

[inversion]
h = 0.1
seed = 3
"#;

fn small() -> Scenario {
    Scenario::from_toml_str(SMALL).unwrap()
}

#[test]
fn zero_noise_matches_a_plain_run_bitwise() {
    let cache = ForwardCache::new();
    let plain = run_pipeline(&small(), &cache).unwrap();
    let swept = run_pipeline(&SweepAxis::Noise.apply(&small(), 0.0).unwrap(), &cache).unwrap();
    assert_eq!(plain.reconstruction.coeffs, swept.reconstruction.coeffs);
    assert_eq!(plain.report.spectral.eigenvalues, swept.report.spectral.eigenvalues);
}

#[test]
fn noisy_runs_are_deterministic_per_seed() {
    let cache = ForwardCache::new();
    let noisy = SweepAxis::Noise.apply(&small(), 0.01).unwrap();
    let a = run_pipeline(&noisy, &cache).unwrap();
    let b = run_pipeline(&noisy, &ForwardCache::new()).unwrap();
    assert_eq!(a.reconstruction.coeffs, b.reconstruction.coeffs);
    let mut other = noisy.clone();
    other.inversion.seed += 1;
    let c = run_pipeline(&other, &cache).unwrap();
    assert_ne!(a.reconstruction.coeffs, c.reconstruction.coeffs);
}

#[test]
fn static_single_parameter_run_is_accurate_and_homogeneous() {
    let out = run_pipeline(&small(), &ForwardCache::new()).unwrap();
    let r = &out.report;
    assert!(r.homogeneous);
    assert_eq!((r.m, r.n), (1, 1));
    assert!(r.errors.joint < 10.0, "{}", r.errors.joint);
    let alpha = &r.spectral.eigenvalues;
    assert!(alpha.windows(2).all(|w| w[0] <= w[1]));
    assert!(alpha[1] >= 10.0 * alpha[0], "{alpha:?}");
    assert!((r.spectral_gap - (alpha[1] - alpha[0])).abs() <= 1e-12 * alpha[1]);
}

#[test]
fn harmonic_run_uses_the_inhomogeneous_path() {
    let mut scn = small();
    scn.phantom.basis = "isotropic".into();
    scn.phantom.maps.push(scn.phantom.maps[0].clone());
    scn.forward.omegas = vec![10.0, 20.0];
    let out = run_pipeline(&scn, &ForwardCache::new()).unwrap();
    assert!(!out.report.homogeneous);
    assert_eq!(out.report.m, 2);
    assert!(out.report.errors.joint.is_finite());
}

#[test]
fn unknown_basis_fails_at_config_stage() {
    let scn = Scenario::from_toml_str(&SMALL.replace("\"identity\"", "\"cubic\""));
    let err = match scn {
        Err(_) => return,
        Ok(s) => run_pipeline(&s, &ForwardCache::new()).err().expect("unknown basis must fail"),
    };
    assert_eq!(err.stage, Stage::Config);
}

fn rwf(root: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rwf")).arg("--output-root").arg(root).args(args).output().unwrap()
}

#[test]
fn cli_run_writes_artifacts_and_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let cfg = cfg.to_str().unwrap();

    let out = rwf(dir.path(), &["run", cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "errors.csv", "eigenvalues.csv", "reconstruction.txt", "reconstruction.vtk"] {
        assert!(dir.path().join("small").join(f).is_file(), "missing {f}");
    }
    let errors = std::fs::read_to_string(dir.path().join("small/errors.csv")).unwrap();
    assert!(errors.starts_with("parameter,percent\n"));

    let missing = rwf(dir.path(), &["run", "does_not_exist.toml"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("config"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SMALL.replace("\"identity\"", "\"cubic\"")).unwrap();
    assert!(!rwf(dir.path(), &["run", bad.to_str().unwrap()]).status.success());

    assert!(!rwf(dir.path(), &["sweep", cfg, "--axis", "depth", "--values", "1"]).status.success());
}

#[test]
fn cli_sweep_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = rwf(dir.path(), &["sweep", cfg.to_str().unwrap(), "--axis", "h", "--values", "0.1,0.12"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("small/sweep_h.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn cli_probe_reports_degree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/probe.toml");
    let out = rwf(dir.path(), &["probe-conservativity", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("expected_k 2"));
    assert!(text.contains("consistent true"));
}
