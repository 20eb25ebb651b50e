use std::path::Path;
use std::process::Command;

use gravcollapse::cli::{render_summary, ResultBundle, RunManifest};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gravcollapse"));
    c.env_remove("GRAVCOLLAPSE_OUTPUT_DIR");
    c
}

fn result_json(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("result.json")).unwrap()).unwrap()
}

fn headline(dir: &Path, name: &str) -> serde_json::Value {
    result_json(dir)["headline"]
        .as_array()
        .unwrap()
        .iter()
        .find(|i| i["name"] == name)
        .unwrap_or_else(|| panic!("no headline item {name}"))["value"]
        .clone()
}

#[test]
fn feynman_scale_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["feynman-scale", "--output-dir"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("2.176e-5 g"), "{summary}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("2.176e-5 g"));
}

#[test]
fn identical_branches_report_infinite_lifetime() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.toml");
    std::fs::write(
        &manifest,
        r#"
[command]
name = "collapse-time"
branch_a = { shape = "gaussian", mass = 1e-3, width = 1e-2, center = [0.0, 0.0, 0.0] }
branch_b = { shape = "gaussian", mass = 1e-3, width = 1e-2, center = [0.0, 0.0, 0.0] }
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let status = bin().args(["collapse-time", "--manifest"]).arg(&manifest).arg("--output-dir").arg(&out_dir).output().unwrap().status;
    assert_eq!(status.code(), Some(0));
    let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("InfiniteLifetime"), "{summary}");
}

#[test]
fn negative_mass_is_a_manifest_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.toml");
    std::fs::write(
        &manifest,
        r#"
[command]
name = "e-delta"
branch_a = { shape = "uniform-sphere", mass = 1.0, radius = 1.0, center = [0.0, 0.0, 0.0] }
branch_b = { shape = "uniform-sphere", mass = -1.0, radius = 1.0, center = [4.0, 0.0, 0.0] }
"#,
    )
    .unwrap();
    let out = bin().args(["run", "--manifest"]).arg(&manifest).arg("--output-dir").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("command.branch_b.mass"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn schema_errors_name_the_field() {
    let text = r#"
seed = 3
[command]
name = "collapse-sim"
branch_a = { shape = "uniform-sphere", mass = 1.0, radius = 1.0, center = [0.0, 0.0, 0.0] }
branch_b = { shape = "uniform-sphere", mass = 1.0, radius = 1.0, center = [4.0, 0.0, 0.0] }
trajectories = "many"
"#;
    let err = RunManifest::from_toml(text).unwrap_err();
    assert_eq!(err.path, "command.trajectories");

    let err = RunManifest::from_toml("[command]\nname = \"nope\"\n").unwrap_err();
    assert_eq!(err.path, "command.name");

    let err = RunManifest::from_toml("colour = 1\n[command]\nname = \"feynman-scale\"\n").unwrap_err();
    assert!(err.message.contains("colour"), "{err}");

    let err = RunManifest::from_toml("[command]\nname = \"feynman-scale\"\n[tolerances]\nscf = -1.0\n").unwrap_err();
    assert_eq!(err.path, "tolerances.scf");
}

#[test]
fn unsmeared_point_mass_is_a_computational_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["selfenergy", "--shape", "point-mass", "--radius", "0", "--output-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let bundle = ResultBundle::read(dir.path()).unwrap();
    assert_eq!(bundle.status, "error");
    assert_eq!(bundle.exit_code, 1);
    assert!(bundle.error.unwrap().contains("smearing_length"));
}

#[test]
fn bad_flags_exit_with_usage_status() {
    let out = bin().args(["collapse-time", "--prefactor", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["e-delta"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--separation"));
}

#[test]
fn flags_override_manifest_values() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.toml");
    std::fs::write(
        &manifest,
        r#"
seed = 5
[command]
name = "collapse-sim"
branch_a = { shape = "uniform-sphere", mass = 1.0, radius = 1.0, center = [0.0, 0.0, 0.0] }
branch_b = { shape = "uniform-sphere", mass = 1.0, radius = 1.0, center = [4.0, 0.0, 0.0] }
trajectories = 1000
rate = 2.0
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    let status = bin()
        .args(["collapse-sim", "--manifest"])
        .arg(&manifest)
        .args(["-n", "500", "--seed", "9", "--separation", "6", "--output-dir"])
        .arg(&out_dir)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let persisted = RunManifest::from_path(&out_dir.join("manifest.toml")).unwrap();
    assert_eq!(persisted.seed, 9);
    let gravcollapse::cli::Command::CollapseSim(p) = persisted.command else { panic!() };
    assert_eq!(p.trajectories, 500);
    assert_eq!(p.rate, Some(2.0));
    assert_eq!(p.branch_b.center(), [6.0, 0.0, 0.0]);
    assert_eq!(headline(&out_dir, "trajectories"), 500);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let status = bin().arg("feynman-scale").env("GRAVCOLLAPSE_OUTPUT_DIR", &target).output().unwrap().status;
    assert_eq!(status.code(), Some(0));
    assert!(target.join("bundle.json").exists());
}

#[test]
fn bundle_lists_every_file_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["lifetime-sweep", "--separations", "2,4,8", "--output-dir"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let bundle = ResultBundle::read(dir.path()).unwrap();
    let mut listed: Vec<_> = bundle.files.iter().map(|f| f.path.clone()).collect();
    listed.sort();
    let mut present: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "bundle.json")
        .collect();
    present.sort();
    assert_eq!(listed, present);
    assert!(bundle.verify(dir.path()).unwrap().is_empty());

    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("parameter,E_delta_J,T_s,error"));
    let t: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(t.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(render_summary(&result_json(dir.path())), bundle.summary);

    std::fs::write(dir.path().join("sweep.csv"), "tampered").unwrap();
    assert_eq!(bundle.verify(dir.path()).unwrap(), vec!["sweep.csv".to_string()]);
}

#[test]
fn natural_scale_spectrum_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["sn-spectrum", "--scale", "sn-natural", "--n-states", "2", "--output-dir"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let e0 = headline(dir.path(), "eigenvalue_n0").as_f64().unwrap();
    assert!((e0 + 0.16277).abs() < 2e-4, "{e0}");
    for f in ["spectrum.csv", "state_0.csv", "state_1.csv", "profiles.gp"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn evolve_from_csv_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let status = bin()
        .args(["sn-evolve", "--scale", "sn-natural", "--sigma", "2", "--dt", "0.05", "--steps", "20", "--output-dir"])
        .arg(&first)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let second = dir.path().join("b");
    let status = bin()
        .args(["sn-evolve", "--scale", "sn-natural", "--dt", "0.05", "--steps", "20", "--initial-csv"])
        .arg(first.join("final_state.csv"))
        .arg("--output-dir")
        .arg(&second)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let drift = headline(&second, "max_norm_drift").as_f64().unwrap();
    assert!(drift < 1e-10);
}

#[test]
fn cartesian_grid_rejects_self_gravity() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sn-evolve", "--cartesian", "--r-max", "10", "--spacing", "0.05", "--dt", "0.01", "--steps", "5"])
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let status = bin()
        .args(["sn-evolve", "--cartesian", "--r-max", "10", "--spacing", "0.05", "--dt", "0.01", "--steps", "5"])
        .args(["--coupling", "custom=0", "--output-dir"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
}
