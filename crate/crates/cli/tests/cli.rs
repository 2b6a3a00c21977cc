//! End-to-end runs of the `crnsim` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use crnsim_cli::config::{parse_config, ExperimentKind, ExperimentSpec};
use crnsim_cli::output::{COLUMNS, SCHEMA_VERSION};

fn crnsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crnsim")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SMALL: &str = r#"
experiment = "convergence"

[sweep]
episodes = 4
seed = 3
settings = [[1, 2]]
snr_db = [15.0]
pilot_counts = [4, 12]
"#;

#[test]
fn simulate_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("out");
    let o = crnsim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(out.join("convergence.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, COLUMNS.iter().map(|c| c.0).collect::<Vec<_>>());
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2 * (4 + 3));
    let sidecar: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("convergence.json")).unwrap()).unwrap();
    assert_eq!(sidecar["schema_version"], SCHEMA_VERSION);
    assert_eq!(sidecar["rows"], 14);
    assert_eq!(sidecar["spec"]["sweep"]["seed"], 3);
}

#[test]
fn overrides_and_threads_keep_bytes_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["simulate", "--config", &cfg, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = crnsim(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            fs::read(out.join("convergence.csv")).unwrap(),
            fs::read(out.join("convergence.json")).unwrap(),
        )
    };
    let a = run("a", &["--threads", "1"]);
    let b = run("b", &["--threads", "3"]);
    assert_eq!(a, b);
    let c = run("c", &["--seed", "4"]);
    assert_ne!(a.0, c.0);
    let d = run("d", &["--episodes", "2"]);
    let rows = csv::Reader::from_reader(d.0.as_slice()).records().count();
    assert_eq!(rows, 2 * (2 + 3));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "experiment = \"lemma1\"\n[scenario]\nm_p = 2\nm_s = 2\n");
    let o = crnsim(&["validate", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenario.m_s"));
    let syntax = write(dir.path(), "syntax.toml", "experiment = \"lemma1\"\n[sweep\n");
    let o = crnsim(&["simulate", "--config", &syntax, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let ok = write(dir.path(), "ok.toml", SMALL);
    let o = crnsim(&["simulate", "--config", &ok, "--episodes", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = crnsim(&["simulate", "--config", &ok, "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = crnsim(&["validate", "--config", "/nonexistent.toml"]);
    assert_eq!(o.status.code(), Some(2));
    // usage errors come from the argument parser
    assert_eq!(crnsim(&["simulate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "experiment = \"lemma1\"\n[scenario]\noverhear_symbols = 0\n[sweep]\nepisodes = 1\n",
    );
    let o = crnsim(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("episode 0"));
}

#[test]
fn validate_prints_resolved_spec() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "experiment = \"beamformer_compare\"\n");
    let o = crnsim(&["validate", "--config", &cfg]);
    assert!(o.status.success());
    let spec = parse_config(&String::from_utf8(o.stdout).unwrap(), "stdout").unwrap();
    assert_eq!(spec, ExperimentSpec::defaults(ExperimentKind::BeamformerCompare));
}

#[test]
fn presets_list_matches_parameter_table() {
    let o = crnsim(&["presets", "list"]);
    assert!(o.status.success());
    let presets: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let secondary = presets.as_array().unwrap().iter().find(|p| p["name"] == "secondary").unwrap();
    assert_eq!(secondary["fft_size"], 64);
    assert_eq!(secondary["valid_subcarriers"], 52);
    assert_eq!(secondary["sample_rates"], serde_json::json!([5e6, 25e6]));
    let lte = presets.as_array().unwrap().iter().find(|p| p["name"] == "primary-lte-like").unwrap();
    assert_eq!(lte["fft_size"], 1024);
    assert_eq!(lte["valid_subcarriers"], 600);
    assert_eq!(lte["sample_rates"], serde_json::json!([10e6]));
}

#[test]
fn reference_defaults_are_current() {
    let docs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/defaults");
    for kind in ExperimentKind::ALL {
        let o = crnsim(&["defaults", kind.name()]);
        assert!(o.status.success());
        let printed = String::from_utf8(o.stdout).unwrap();
        let committed = fs::read_to_string(docs.join(format!("{kind}.toml")))
            .unwrap_or_else(|_| panic!("docs/defaults/{kind}.toml missing; regenerate with `crnsim defaults {kind}`"));
        assert_eq!(printed, committed, "{kind}");
    }
    assert_eq!(crnsim(&["defaults", "lemma3"]).status.code(), Some(2));
}
