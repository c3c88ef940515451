use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dispatch::config::ExperimentConfig;
use dispatch::experiment::{
    compare_methods, read_run, read_runs, reproduce, run_experiment, write_comparison, RunRecord,
};
use dispatch::synth::SynthConfig;
use dispatch::DispatchError;
use dispatch_core::sim::Method;

const TOY_NODES: &str = "node_id,x_m,y_m\n0,0,0\n1,1000,0\n2,0,1000\n3,1000,1000\n";
const TOY_EDGES: &str = "from,to,slot_0,length_m\n0,1,300,2500\n1,0,240,2000\n1,3,180,1500\n2,0,300,2500\n2,1,360,3000\n3,2,300,2500\n";

fn toy_dir(dir: &Path) -> PathBuf {
    fs::write(dir.join("nodes.csv"), TOY_NODES).unwrap();
    fs::write(dir.join("edges.csv"), TOY_EDGES).unwrap();
    let mut trips = String::from("request_time,pickup_node,dropoff_node\n");
    for day in 1..=8 {
        for (min, p, d) in [(2, 0, 1), (7, 3, 2), (15, 0, 3), (31, 2, 1), (44, 3, 0)] {
            trips.push_str(&format!("2024-01-{day:02}T07:{min:02}:00Z,{p},{d}\n"));
        }
    }
    fs::write(dir.join("trips.csv"), trips).unwrap();
    let cfg = r#"
version = 1
[data]
nodes = "nodes.csv"
edges = "edges.csv"
trips = "trips.csv"
output = "out"
slot_length_s = 86400
[horizon]
start = "2024-01-08T07:00:00Z"
end = "2024-01-08T08:00:00Z"
history_days = 7
[sim]
n_vehicles = 2
k = 2
[sweep]
methods = ["dfda"]
vehicles = [2]
activations = ["relu"]
seeds = [5]
"#;
    let path = dir.join("config.toml");
    fs::write(&path, cfg).unwrap();
    path
}

fn synth_dir(dir: &Path, seed: u64) -> PathBuf {
    SynthConfig {
        seed,
        ..SynthConfig::default()
    }
    .generate()
    .write_with_config(dir, seed)
    .unwrap();
    dir.join("config.toml")
}

fn metrics_rows(root: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(root.join("metrics.csv"))
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn toy_single_cell_writes_one_row_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(&toy_dir(tmp.path())).unwrap();
    let res = run_experiment(&cfg).unwrap();
    assert_eq!(res.runs.len(), 1);
    let rows = metrics_rows(&res.root);
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "dfda");
    assert_eq!(&rows[0][4], "5");
    let run = read_run(&res.runs[0].dir).unwrap();
    assert_eq!(run.manifest.seed, 5);
    assert_eq!(run.manifest.code_version, env!("CARGO_PKG_VERSION"));
    assert_eq!(run.manifest.config_hash.len(), 64);
    assert_eq!(run.manifest.data_hash.len(), 64);
    assert_eq!(run.report, res.runs[0].report);
    // one snapshot per relocation cycle inside the hour
    let snaps = fs::read_to_string(run.dir.join("partitions.jsonl")).unwrap();
    assert_eq!(snaps.lines().count(), 6);
    assert!(run.dir.join("partitions/cycle_0005.csv").is_file());
    assert!(res.root.join("manifest.json").is_file());
}

#[test]
fn method_sweep_writes_a_row_per_method() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::load(&synth_dir(tmp.path(), 2)).unwrap();
    cfg.sweep.methods = vec![Method::Dfda, Method::None];
    let res = run_experiment(&cfg).unwrap();
    let rows = metrics_rows(&res.root);
    assert_eq!(rows.len(), 2);
    let methods: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(methods, ["dfda", "none"]);
    for r in &rows {
        let ratio: f64 = r[7].parse().unwrap();
        assert!((0.0..=1.0).contains(&ratio));
        assert_eq!(&r[4], "600");
    }
}

#[test]
fn missing_trips_file_is_reported_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::load(&toy_dir(tmp.path())).unwrap();
    cfg.data.trips = tmp.path().join("absent.csv");
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(&err, DispatchError::MissingFile(p) if p.ends_with("absent.csv")));
    assert_eq!(err.exit_code(), 2);
    assert!(!cfg.data.output.exists());
}

#[test]
fn cli_exits_with_two_and_names_the_missing_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = toy_dir(tmp.path());
    fs::remove_file(tmp.path().join("trips.csv")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dispatch"))
        .args(["run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains(&tmp.path().join("trips.csv").display().to_string()),
        "{stderr}"
    );
}

#[test]
fn cli_flags_override_the_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let path = toy_dir(tmp.path());
    let out_dir = tmp.path().join("elsewhere");
    let out = Command::new(env!("CARGO_BIN_EXE_dispatch"))
        .args(["run", "--config"])
        .arg(&path)
        .args([
            "--method",
            "dfda,none",
            "--vehicles",
            "1",
            "--activation",
            "sigmoid",
            "--seed",
            "9",
            "--out",
        ])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = metrics_rows(&out_dir);
    assert_eq!(rows.len(), 2);
    assert!(rows
        .iter()
        .all(|r| &r[1] == "sigmoid" && &r[2] == "1" && &r[3] == "9"));
}

#[test]
fn invalid_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = toy_dir(tmp.path());
    let text = fs::read_to_string(&path).unwrap().replace("k = 2", "k = 0");
    fs::write(&path, text).unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 2);
}

fn synth_pair(tmp: &Path) -> (RunRecord, RunRecord) {
    let mut cfg = ExperimentConfig::load(&synth_dir(tmp, 4)).unwrap();
    cfg.sweep.methods = vec![Method::Dfda, Method::None];
    let res = run_experiment(&cfg).unwrap();
    (res.runs[0].clone(), res.runs[1].clone())
}

#[test]
fn identical_runs_compare_to_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let path = toy_dir(tmp.path());
    let mut cfg = ExperimentConfig::load(&path).unwrap();
    let a = run_experiment(&cfg).unwrap();
    cfg.data.output = tmp.path().join("again");
    let b = run_experiment(&cfg).unwrap();
    let cmp = compare_methods(&[a.runs[0].clone(), b.runs[0].clone()], None).unwrap();
    assert_eq!(cmp.diffs.len(), 1);
    let d = &cmp.diffs[0];
    assert_eq!(d.d_served_ratio, 0.0);
    for x in [d.d_rho, d.d_kappa, d.d_tau_s].into_iter().flatten() {
        assert_eq!(x, 0.0);
    }
    assert!(d.hourly.iter().all(|(_, x)| x.is_none_or(|x| x == 0.0)));
    write_comparison(tmp.path(), &cmp).unwrap();
    assert!(tmp.path().join("hourly_diff.csv").is_file());
}

#[test]
fn different_trip_files_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let path = toy_dir(tmp.path());
    let cfg = ExperimentConfig::load(&path).unwrap();
    let a = run_experiment(&cfg).unwrap();
    let other = tmp.path().join("other");
    fs::create_dir(&other).unwrap();
    let path = toy_dir(&other);
    let trips = fs::read_to_string(other.join("trips.csv")).unwrap();
    fs::write(
        other.join("trips.csv"),
        trips.replace("07:44:00Z,3,0", "07:45:00Z,3,0"),
    )
    .unwrap();
    let b = run_experiment(&ExperimentConfig::load(&path).unwrap()).unwrap();
    let err = compare_methods(&[a.runs[0].clone(), b.runs[0].clone()], None).unwrap_err();
    assert!(matches!(err, DispatchError::Mismatch(_)));
    assert!(compare_methods(&[a.runs[0].clone()], None).is_err());
}

#[test]
fn comparison_flips_sign_when_order_flips() {
    let tmp = tempfile::tempdir().unwrap();
    let (dfda, none) = synth_pair(tmp.path());
    let ab = compare_methods(&[dfda.clone(), none.clone()], None).unwrap();
    let ba = compare_methods(&[none.clone(), dfda.clone()], None).unwrap();
    assert_eq!(ab.diffs.len(), 1);
    let (x, y) = (&ab.diffs[0], &ba.diffs[0]);
    assert_eq!((&x.a, &x.b), (&y.b, &y.a));
    assert_eq!(x.d_served_ratio, -y.d_served_ratio);
    assert_eq!(x.d_rho.map(|v| -v), y.d_rho);
    assert_eq!(x.d_kappa.map(|v| -v), y.d_kappa);
    assert_eq!(x.d_tau_s.map(|v| -v), y.d_tau_s);
    for ((h1, a), (h2, b)) in x.hourly.iter().zip(&y.hourly) {
        assert_eq!(h1, h2);
        assert_eq!(a.map(|v| -v), *b);
    }
    let mut rows_ba = ba.rows.clone();
    rows_ba.reverse();
    assert_eq!(ab.rows, rows_ba);

    let with_base = compare_methods(&[none, dfda], Some("none")).unwrap();
    assert_eq!(with_base.diffs.len(), 1);
    assert_eq!(with_base.diffs[0].a, "dfda/relu");
    assert_eq!(with_base.diffs[0], ab.diffs[0]);
}

#[test]
fn experiment_roots_expand_and_reproduce() {
    let tmp = tempfile::tempdir().unwrap();
    let (dfda, _) = synth_pair(tmp.path());
    let runs = read_runs(&[tmp.path().join("out")]).unwrap();
    assert_eq!(runs.len(), 2);
    let r = reproduce(&dfda.dir.join("manifest.json"), &tmp.path().join("rep")).unwrap();
    assert!(r.events_match && r.report_match);
    assert_eq!(
        fs::read(dfda.dir.join("events.ndjson")).unwrap(),
        fs::read(r.dir.join("events.ndjson")).unwrap()
    );
    // edited inputs invalidate the manifest
    let trips = tmp.path().join("trips.csv");
    let mut text = fs::read_to_string(&trips).unwrap();
    text.push_str("2024-01-08T07:30:00Z,0,1\n");
    fs::write(&trips, text).unwrap();
    let err = reproduce(&dfda.dir.join("manifest.json"), &tmp.path().join("rep2")).unwrap_err();
    assert!(matches!(err, DispatchError::Mismatch(_)));
}

#[test]
fn cli_synth_run_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_dispatch");
    let dir = tmp.path().join("city");
    let ok = |args: &[&str]| {
        let out = Command::new(bin).args(args).output().unwrap();
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    };
    let d = dir.to_str().unwrap();
    ok(&["synth", "--out", d, "--seed", "7"]);
    let cfg = format!("{d}/config.toml");
    ok(&["run", "--config", &cfg, "--method", "dfda,none"]);
    let stdout = ok(&["compare", "--config", &cfg, "--baseline", "none"]);
    assert!(stdout.contains("dfda/relu - none/relu"), "{stdout}");
    let diffs = fs::read_to_string(dir.join("out/differences.csv")).unwrap();
    assert_eq!(diffs.lines().count(), 2);
    let manifest = format!("{d}/out/runs/none-relu-v45-s7/manifest.json");
    let rep = format!("{d}/rep");
    let stdout = ok(&["reproduce", "--manifest", &manifest, "--out", &rep]);
    assert!(
        stdout.contains("events identical, report identical"),
        "{stdout}"
    );
}
