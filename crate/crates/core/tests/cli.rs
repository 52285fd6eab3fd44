//! End-to-end checks of the command-line interface: exit codes, emitted
//! files, reproducibility from the embedded echo, and ensemble replay.

use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_cavity-collapse");

const FIG2_CONFIG: &str = r#"
[lattice]
atoms = 100
sites = 100
illuminated = 50

[geometry]
preset = "diffraction_maximum"

[run]
seed = 79
max_tau = 0.5
collapse_epsilon = 0.0
snapshot_taus = [0.0, 0.005, 0.018, 0.03, 0.05, 0.5]
"#;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn trajectory_run_emits_six_distribution_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), FIG2_CONFIG);
    let out = dir.path().join("out");
    let result = run(&["run-trajectory", &config, "--out-dir", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));

    let snapshots = fs::read_to_string(out.join("snapshots.tsv")).unwrap();
    let data_rows: Vec<&str> = snapshots
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("time"))
        .collect();
    assert_eq!(data_rows.len(), 6);

    let dumps: Vec<_> = fs::read_dir(out.join("distributions"))
        .unwrap()
        .collect::<Result<Vec<_>, _>>()
        .unwrap();
    assert_eq!(dumps.len(), 6);

    // the summary embeds a config echo that reproduces the run bit for bit
    assert!(out.join("summary.toml").exists());
    let rerun_dir = dir.path().join("rerun");
    let result = run(&[
        "run-trajectory",
        &config,
        "--out-dir",
        rerun_dir.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let again = fs::read_to_string(rerun_dir.join("snapshots.tsv")).unwrap();
    assert_eq!(snapshots, again);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &FIG2_CONFIG.replace("seed = 79", "seed = 79\nkappa = 1"));
    let result = run(&["run-trajectory", &config]);
    assert_eq!(result.status.code(), Some(2));
    let bad_kappa = FIG2_CONFIG.replace(
        "preset = \"diffraction_maximum\"",
        "preset = \"diffraction_maximum\"\nkappa = 0.0",
    );
    let config = write_config(dir.path(), &bad_kappa);
    let result = run(&["run-trajectory", &config]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("kappa"));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), FIG2_CONFIG);
    // a file where the out-dir should be
    let blocker = dir.path().join("blocked");
    fs::write(&blocker, "occupied").unwrap();
    let target = blocker.join("out");
    let result = run(&[
        "run-trajectory",
        &config,
        "--out-dir",
        target.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(3));
}

#[test]
fn ensemble_histogram_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let config_text = r#"
[lattice]
atoms = 6
sites = 6
illuminated = 3

[geometry]
preset = "diffraction_maximum"

[run]
seed = 40
max_time = 80.0

[ensemble]
trajectories = 200
"#;
    let config = write_config(dir.path(), config_text);
    let out = dir.path().join("out");
    let result = run(&["run-ensemble", &config, "--out-dir", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));

    let histogram = fs::read_to_string(out.join("histogram.tsv")).unwrap();
    let mut total = 0.0f64;
    for line in histogram.lines() {
        if line.starts_with('#') || line.starts_with('z') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        total += fields[1].parse::<f64>().unwrap();
    }
    assert!((total - 200.0).abs() < 1e-9, "histogram counts total {total}");

    // replay one row from seeds.tsv through run-trajectory
    let seeds = fs::read_to_string(out.join("seeds.tsv")).unwrap();
    let row = seeds
        .lines()
        .find(|l| !l.starts_with('#') && !l.starts_with("stream"))
        .unwrap();
    let fields: Vec<&str> = row.split('\t').collect();
    let (stream, seed, outcome) = (fields[0], fields[1], fields[2]);
    let replay_config = config_text.replace(
        "seed = 40",
        &format!("seed = {seed}\nstream = {stream}"),
    );
    let config2 = write_config(&dir.path().join("."), &replay_config);
    let out2 = dir.path().join("replay");
    let result = run(&["run-trajectory", &config2, "--out-dir", out2.to_str().unwrap()]);
    assert!(result.status.success());
    let summary = fs::read_to_string(out2.join("summary.toml")).unwrap();
    let value: toml::Value = toml::from_str(&summary).unwrap();
    let replayed = value["result"]["outcome"].as_str().unwrap();
    assert!(outcome.starts_with(replayed), "{outcome} vs {replayed}");
}

#[test]
fn minimum_ensemble_has_folded_column() {
    let dir = tempfile::tempdir().unwrap();
    let config_text = r#"
[lattice]
atoms = 6
sites = 6
illuminated = 6

[geometry]
preset = "diffraction_minimum"

[run]
seed = 3
max_time = 80.0

[ensemble]
trajectories = 100
"#;
    let config = write_config(dir.path(), config_text);
    let out = dir.path().join("out");
    let result = run(&["run-ensemble", &config, "--out-dir", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let histogram = fs::read_to_string(out.join("histogram.tsv")).unwrap();
    let header = histogram
        .lines()
        .find(|l| l.starts_with('z'))
        .unwrap();
    assert!(header.contains("folded_count"));
    assert!(header.contains("folded_frequency"));

    // folded rows carry h(z) + h(-z)
    let mut by_z = std::collections::HashMap::new();
    for line in histogram.lines() {
        if line.starts_with('#') || line.starts_with('z') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let z: i64 = f[0].parse().unwrap();
        let count: f64 = f[1].parse().unwrap();
        let folded: f64 = f[4].parse().unwrap();
        by_z.insert(z, (count, folded));
    }
    for (&z, &(_, folded)) in &by_z {
        let mirror = by_z.get(&-z).map(|&(c, _)| c).unwrap_or(0.0);
        let own = by_z[&z].0;
        let expected = if z == 0 { own } else { own + mirror };
        assert!(
            (folded - expected).abs() < 1e-9,
            "fold mismatch at z = {z}: {folded} vs {expected}"
        );
    }
}

#[test]
fn oracle_check_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let config_text = r#"
[lattice]
atoms = 3
sites = 3
illuminated = 2

[geometry]
preset = "diffraction_maximum"
detuning = 0.2

[run]
seed = 4
max_time = 4.0

[oracle]
records = 20
checkpoints = 10
"#;
    let config = write_config(dir.path(), config_text);
    let out = dir.path().join("out");
    let result = run(&["oracle-check", &config, "--out-dir", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let report = fs::read_to_string(out.join("oracle_report.toml")).unwrap();
    let value: toml::Value = toml::from_str(&report).unwrap();
    assert_eq!(value["result"]["pass"].as_bool(), Some(true));
    assert_eq!(value["result"]["comparisons"].as_integer(), Some(200));
}

#[test]
fn snapshots_flag_overrides_cadence() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), FIG2_CONFIG);
    let out = dir.path().join("out");
    let result = run(&[
        "run-trajectory",
        &config,
        "--snapshots",
        "0.1,0.3",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let snapshots = fs::read_to_string(out.join("snapshots.tsv")).unwrap();
    let taus: Vec<f64> = snapshots
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("time"))
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    // t = 0, the two requested taus, and the stop time
    assert_eq!(taus.len(), 4);
    assert!((taus[1] - 0.1).abs() < 1e-12);
    assert!((taus[2] - 0.3).abs() < 1e-12);
}

#[test]
fn oracle_check_reports_a_real_reduction_error() {
    // with U_11 != 0 the engine's neglected-shift reduction is approximate;
    // the oracle keeps the full denominator, so the check must fail loudly
    let dir = tempfile::tempdir().unwrap();
    let config_text = r#"
[lattice]
atoms = 3
sites = 3
illuminated = 2

[geometry]
preset = "diffraction_maximum"
coupling_u11 = 0.3

[run]
seed = 4
max_time = 4.0

[oracle]
records = 10
checkpoints = 5
"#;
    let config = write_config(dir.path(), config_text);
    let out = dir.path().join("out");
    let result = run(&["oracle-check", &config, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(3));
    let report = fs::read_to_string(out.join("oracle_report.toml")).unwrap();
    let value: toml::Value = toml::from_str(&report).unwrap();
    assert_eq!(value["result"]["pass"].as_bool(), Some(false));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), FIG2_CONFIG);
    let out = dir.path().join("out");
    let result = run(&[
        "run-trajectory",
        &config,
        "--seed",
        "123",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let summary = fs::read_to_string(out.join("summary.toml")).unwrap();
    let value: toml::Value = toml::from_str(&summary).unwrap();
    assert_eq!(value["config"]["run"]["seed"].as_integer(), Some(123));
}
