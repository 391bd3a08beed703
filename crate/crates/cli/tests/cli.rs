use std::fs;
use std::path::Path;
use std::process::{Command as Proc, Output};

use sepsim_cli::{parse_config, validate, Command};

const BIN: &str = env!("CARGO_BIN_EXE_sepsim");

const ALTERNATING: &str = r#"
seed = 11
[environment]
model = "zd_conductance"
d = 1
side = 64
law = { kind = "periodic", values = [1.0, 2.0] }
"#;

fn sepsim(args: &[&str], dir: &Path) -> Output {
    Proc::new(BIN).args(args).current_dir(dir).env_remove("SEPSIM_OUT").output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn estimate_d_alternating_is_harmonic_mean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ALTERNATING);
    let out = sepsim(&["estimate-d", "--config", &cfg, "--out", "d"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("d/d-report.json")).unwrap()).unwrap();
    let d = report["d"][0][0].as_f64().unwrap();
    assert!((d - 4.0 / 3.0).abs() < 1e-8, "D = {d}");
    assert_eq!(report["schema_version"], 1);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("d/run-manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "estimate-d");
    assert_eq!(manifest["seeds"]["master"], 11);
    assert_eq!(manifest["numerics"]["corrector_tol"], 1e-10);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn gen_env_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
seed = 5
[environment]
model = "zd_conductance"
d = 2
side = 12
law = { kind = "log_normal", mu = 0.0, sigma = 0.5 }
"#,
    );
    for name in ["a", "b"] {
        let out = sepsim(&["gen-env", "--config", &cfg, "--out", name], dir.path());
        assert!(out.status.success());
    }
    let a = fs::read(dir.path().join("a/environment.txt")).unwrap();
    let b = fs::read(dir.path().join("b/environment.txt")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let out = sepsim(&["gen-env", "--config", &cfg, "--out", "c", "--seed", "6"], dir.path());
    assert!(out.status.success());
    assert_ne!(a, fs::read(dir.path().join("c/environment.txt")).unwrap());
}

#[test]
fn hydro_with_zero_density_has_zero_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
seed = 2
[environment]
model = "zd_conductance"
d = 1
side = 128
law = { kind = "constant", value = 1.0 }
[hydro]
eps = [0.0625, 0.03125]
horizon = 0.01
replicas = 5
initial = { kind = "constant", value = 0.0 }
"#,
    );
    let out = sepsim(&["hydro", "--config", &cfg, "--out", "h"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("h/deviations.csv")).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert_eq!(rec[3].parse::<f64>().unwrap(), 0.0);
        rows += 1;
    }
    assert_eq!(rows, 10);
    for f in ["hydro-report.json", "profile.csv", "run-manifest.json"] {
        assert!(dir.path().join("h").join(f).exists(), "{f}");
    }
}

#[test]
fn default_output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ALTERNATING);
    let out = Proc::new(BIN)
        .args(["gen-env", "--config", &cfg])
        .current_dir(dir.path())
        .env("SEPSIM_OUT", dir.path().join("root"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("root/gen-env/environment.txt").exists());
}

#[test]
fn validation_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{ALTERNATING}\nunknown_key = 1\n"));
    let out = sepsim(&["gen-env", "--config", &cfg, "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown_key"));
    assert!(!dir.path().join("x").exists());

    let cfg = write_config(
        dir.path(),
        r#"
[environment]
model = "percolation_cluster"
lattice = { kind = "zd", d = 2 }
side = 10
p = 1.3
"#,
    );
    let out = sepsim(&["gen-env", "--config", &cfg, "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("percolation parameter out of [0,1]"));
}

#[test]
fn failed_runs_remove_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    // The MSD step rejects this horizon after the D report is written.
    let body = format!("{ALTERNATING}\n[msd]\nt = 1.0\nreplicas = 1000\n");
    let cfg = write_config(dir.path(), &body);
    let out = sepsim(&["estimate-d", "--config", &cfg, "--out", "gone"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("gone").exists());

    let out = sepsim(&["estimate-d", "--config", &cfg, "--out", "kept", "--keep-partial"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("kept/d-report.json").exists());
    assert!(!dir.path().join("kept/run-manifest.json").exists());
}

#[test]
fn numerical_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{ALTERNATING}\n[solver]\ncomponent_cap = 2\nmax_halvings = 0\n[sep]\nhorizon = 4.0\noccupied = [0]\nslab_width = 4.0\n"
    );
    let cfg = write_config(dir.path(), &body);
    let out = sepsim(&["simulate-sep", "--config", &cfg, "--out", "s"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("certificate"));
}

#[test]
fn simulate_sep_conserves_particles() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{ALTERNATING}\n[sep]\nhorizon = 2.0\noccupied = [0, 5, 9, 40]\nsnapshots = [0.0, 1.0, 2.0]\nmartingale = true\n");
    let cfg = write_config(dir.path(), &body);
    let out = sepsim(&["simulate-sep", "--config", &cfg, "--out", "s"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s/sep-report.json")).unwrap()).unwrap();
    assert_eq!(report["initial_particles"], 4);
    assert_eq!(report["final_particles"], 4);
    let mut rdr = csv::Reader::from_path(dir.path().join("s/snapshots.csv")).unwrap();
    let occupied: usize = rdr.records().map(|r| r.unwrap()[2].parse::<usize>().unwrap()).sum();
    assert_eq!(occupied, 12);
    let martingale = fs::read_to_string(dir.path().join("s/martingale.csv")).unwrap();
    assert_eq!(martingale.lines().count(), 4);
}

#[test]
fn nagy_and_duality_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
seed = 9
[environment]
model = "zd_conductance"
d = 1
side = 8
law = { kind = "uniform", low = 0.5, high = 1.5 }
[nagy]
instances = 4
horizon = 3.0
[duality]
replicas = 400
cases = [{ x = 0, t = 0.3, occupied = [0, 1] }]
random_cases = 1
"#,
    );
    let out = sepsim(&["nagy-test", "--config", &cfg, "--out", "n"], dir.path());
    assert!(out.status.success());
    let n: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("n/nagy-report.json")).unwrap()).unwrap();
    assert_eq!(n["pass"], true);
    assert!(n["instances"].as_array().unwrap().iter().all(|r| r["events"].as_u64().unwrap() <= 5));

    let out = sepsim(&["duality-test", "--config", &cfg, "--out", "du"], dir.path());
    assert!(out.status.success());
    let d: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("du/duality-report.json")).unwrap()).unwrap();
    assert_eq!(d["cases"].as_array().unwrap().len(), 2);
}

#[test]
fn validate_reports_diagnostics_as_data() {
    let good = parse_config(ALTERNATING).unwrap();
    assert!(validate(&good, Command::GenEnv).is_empty());
    assert!(validate(&good, Command::EstimateD).is_empty());
    assert!(!validate(&good, Command::Hydro).is_empty());

    let narrow = parse_config(&format!(
        "{ALTERNATING}\n[hydro]\neps = [0.01]\nhorizon = 0.5\nreplicas = 1\ninitial = {{ kind = \"constant\", value = 0.5 }}\n"
    ))
    .unwrap();
    let diags = validate(&narrow, Command::Hydro);
    assert_eq!(diags.len(), 1);
    assert!(diags[0].contains("r_supp + 6 sqrt(2 lambda_max T)"), "{diags:?}");
    assert!(diags[0].contains("eps L/2"));

    let both = parse_config(&format!("env_file = \"x.txt\"\n{ALTERNATING}")).unwrap();
    assert!(!validate(&both, Command::GenEnv).is_empty());
}
