use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL_SBM: &str = "sbm:sizes=40/40,p_in=0.2,p_out=0.02,dim=8,sep=2,train=5";

fn decorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decorr"))
        .args(args)
        .env_remove("DECORR_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn zero_layers_is_a_usage_error() {
    let o = decorr(&["train", "--synthetic", SMALL_SBM, "--layers", "0"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&decorr(&["train", "--synthetic", SMALL_SBM, "--model", "gat"])), 2);
    assert_eq!(code(&decorr(&["train"])), 2);
    assert_eq!(code(&decorr(&["train", "--synthetic", "ws:n=3"])), 2);
}

#[test]
fn unreadable_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.gnnb");
    fs::write(&bad, "# gnnb 1 2 1 1 2\n# features\n1\n# labels\n0 1\n# edges\n0 1\n").unwrap();
    let o = decorr(&["train", "--dataset", p(&bad), "--out", p(dir.path())]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let o = decorr(&["train", "--dataset", p(&dir.path().join("absent.gnnb"))]);
    assert_eq!(code(&o), 3);
}

#[test]
fn data_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let g = "# gnnb 1 4 2 1 2\n# features\n1\n0\n1\n0\n# labels\n0 1 0 1\n# edges\n0 1\n2 3\n# split train\n0 1\n# split val\n2\n# split test\n3\n";
    fs::write(dir.path().join("tiny.gnnb"), g).unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_decorr"))
        .args(["train", "--dataset", "tiny", "--epochs", "3", "--out", p(&out)])
        .env("DECORR_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("run_0.json").is_file());
}

#[test]
fn divergence_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let g = "# gnnb 1 4 1 1 2\n# features\nNaN\n1\n0\n1\n# labels\n0 1 0 1\n# edges\n0 1\n# split train\n0 1\n# split val\n2\n# split test\n3\n";
    let path = dir.path().join("nan.gnnb");
    fs::write(&path, g).unwrap();
    let out = dir.path().join("out");
    let o = decorr(&["train", "--dataset", p(&path), "--epochs", "5", "--out", p(&out)]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(json(&out.join("run_0.json"))["epochs"].as_array().unwrap().is_empty());
}

#[test]
fn train_writes_run_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = decorr(&[
        "train",
        "--synthetic",
        SMALL_SBM,
        "--layers",
        "2",
        "--seed",
        "0",
        "--epochs",
        "20",
        "--epoch-csv",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("seed 0: test "));
    let run = json(&dir.path().join("run_0.json"));
    for key in ["config", "epochs", "best_epoch", "test_acc", "wall_secs", "seed"] {
        assert!(run.get(key).is_some(), "missing {key}");
    }
    let acc = run["test_acc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let epochs = run["epochs"].as_array().unwrap();
    assert_eq!(epochs.len(), 20);
    for key in [
        "epoch",
        "loss",
        "l_class",
        "l_d",
        "l_m",
        "acc_train",
        "acc_val",
        "acc_test",
        "corr",
        "smv",
    ] {
        assert!(epochs[0].get(key).is_some(), "missing epoch field {key}");
    }
    let csv = fs::read_to_string(dir.path().join("run_0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn decorr_records_both_regularisers() {
    let dir = tempfile::tempdir().unwrap();
    let o = decorr(&[
        "train",
        "--synthetic",
        SMALL_SBM,
        "--alpha",
        "0.1",
        "--beta",
        "1",
        "--layers",
        "15",
        "--epochs",
        "3",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = json(&dir.path().join("run_0.json"));
    for e in run["epochs"].as_array().unwrap() {
        assert!(e["l_d"].as_f64().unwrap() > 0.0);
        assert!(e["l_m"].as_f64().unwrap() != 0.0);
    }
}

#[test]
fn repeats_use_consecutive_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = decorr(&[
        "train",
        "--synthetic",
        SMALL_SBM,
        "--seed",
        "3",
        "--repeats",
        "2",
        "--epochs",
        "2",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&dir.path().join("run_4.json"))["seed"], 4);
    assert!(stdout(&o).contains("mean test"));
}

#[test]
fn metrics_on_the_counter_example() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    fs::write(&csv, "1,0\n-0.1,1.1\n").unwrap();
    let o = decorr(&["metrics", "--input", p(&csv)]);
    assert_eq!(code(&o), 0);
    let report: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!((report["corr"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((report["smv"].as_f64().unwrap() - 0.738).abs() < 1e-3);

    fs::write(&csv, "1,2,3\n1,2,3\n1,2,3\n").unwrap();
    let report: Value = serde_json::from_str(stdout(&decorr(&["metrics", "--input", p(&csv)])).trim()).unwrap();
    assert_eq!(report["smv"].as_f64().unwrap(), 0.0);

    fs::write(&csv, "1,2\nx,y\n").unwrap();
    assert_eq!(code(&decorr(&["metrics", "--input", p(&csv)])), 3);
}

fn write_spec(dir: &Path, spec: &str) -> std::path::PathBuf {
    let path = dir.join("spec.json");
    fs::write(&path, spec).unwrap();
    path
}

#[test]
fn single_cell_sweep_equals_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"base": {"epochs": 15, "dropout": 0.0}, "grid": {"layers": [2]}, "repeats": 1}"#,
    );
    let sweep = dir.path().join("sweep");
    let o = decorr(&[
        "sweep",
        "--spec",
        p(&spec),
        "--synthetic",
        SMALL_SBM,
        "--out",
        p(&sweep),
        "--no-timing",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let single = dir.path().join("single");
    let o = decorr(&[
        "train",
        "--synthetic",
        SMALL_SBM,
        "--epochs",
        "15",
        "--dropout",
        "0",
        "--layers",
        "2",
        "--out",
        p(&single),
        "--no-timing",
    ]);
    assert_eq!(code(&o), 0);
    let a = fs::read(sweep.join("cell_000").join("run_0.json")).unwrap();
    let b = fs::read(single.join("run_0.json")).unwrap();
    assert_eq!(a, b);

    let run = json(&single.join("run_0.json"));
    let summary = fs::read_to_string(sweep.join("summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    let header: Vec<&str> = summary.lines().next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("test_mean").parse::<f64>().unwrap(), run["test_acc"].as_f64().unwrap());
    assert_eq!(col("runs"), "1");
    assert_eq!(col("test_std").parse::<f64>().unwrap(), 0.0);
}

#[test]
fn reaggregation_is_bytewise_stable() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"base": {"epochs": 4}, "grid": {"layers": [2, 3], "preset": ["none", "decorr"]}, "repeats": 2}"#,
    );
    let sweep = dir.path().join("sweep");
    let o = decorr(&[
        "sweep",
        "--spec",
        p(&spec),
        "--synthetic",
        SMALL_SBM,
        "--out",
        p(&sweep),
        "--workers",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read(sweep.join("summary.csv")).unwrap();
    let table = fs::read_to_string(sweep.join("table.md")).unwrap();
    assert_eq!(String::from_utf8_lossy(&summary).lines().count(), 5);
    assert!(table.contains("L2") && table.contains("L3"));
    assert!(table.contains("none") && table.contains("decorr"));

    fs::remove_file(sweep.join("summary.csv")).unwrap();
    let o = decorr(&["sweep", "--aggregate-only", "--out", p(&sweep)]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(sweep.join("summary.csv")).unwrap(), summary);
    assert_eq!(fs::read_to_string(sweep.join("table.md")).unwrap(), table);
}

#[test]
fn failed_runs_are_recorded_and_the_sweep_continues() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"base": {"epochs": 2}, "grid": {"norm": ["none", "batch"], "lr": [0.01, 1e300]}}"#,
    );
    let sweep = dir.path().join("sweep");
    let o = decorr(&[
        "sweep",
        "--spec",
        p(&spec),
        "--synthetic",
        SMALL_SBM,
        "--out",
        p(&sweep),
        "--workers",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let failures = (0..4)
        .filter(|i| sweep.join(format!("cell_{i:03}")).join("run_0.error.json").is_file())
        .count();
    let successes = (0..4)
        .filter(|i| sweep.join(format!("cell_{i:03}")).join("run_0.json").is_file())
        .count();
    assert!(failures >= 1, "an lr of 1e300 should diverge");
    assert_eq!(failures + successes, 4);
}

#[test]
fn bad_sweep_spec_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), r#"{"grid": {"width": [2]}}"#);
    let o = decorr(&["sweep", "--spec", p(&spec), "--synthetic", SMALL_SBM, "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn prelim_prop_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = decorr(&[
        "prelim-prop",
        "--synthetic",
        "er:n=60,p=0.1,dim=5",
        "--k-max",
        "0",
        "--runs",
        "3",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("prop.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let corr: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(corr < 0.4, "{row}");
    }
    assert!(fs::read_to_string(dir.path().join("prop_corr.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn prelim_prop_edgeless_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let o = decorr(&[
        "prelim-prop",
        "--synthetic",
        "er:n=40,p=0,dim=4",
        "--k-max",
        "3",
        "--runs",
        "2",
        "--no-lcc",
        "--smv",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("prop.csv")).unwrap();
    let corr: Vec<&str> = csv.lines().skip(1).map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(corr.len(), 4);
    assert!(corr.iter().all(|c| *c == corr[0]));
    assert!(dir.path().join("prop_smv.svg").is_file());
}

#[test]
fn prelim_trans_single_depth() {
    let dir = tempfile::tempdir().unwrap();
    let o = decorr(&[
        "prelim-trans",
        "--depths",
        "3",
        "--runs",
        "1",
        "--nodes",
        "50",
        "--dim",
        "6",
        "--linear-only",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("trans.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("3,") && rows[0].ends_with(",linear,1"));
    let conflict = decorr(&["prelim-trans", "--linear-only", "--relu-only"]);
    assert_eq!(code(&conflict), 2);
}

#[test]
fn plot_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    let o = decorr(&[
        "train",
        "--synthetic",
        SMALL_SBM,
        "--epochs",
        "12",
        "--repeats",
        "2",
        "--out",
        p(&runs),
    ]);
    assert_eq!(code(&o), 0);
    let inputs = [runs.join("run_0.json"), runs.join("run_1.json")];
    let render = |out: &Path| {
        let o = decorr(&["plot", p(&inputs[0]), p(&inputs[1]), "--out", p(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let mut names: Vec<_> = fs::read_dir(out).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        names
            .into_iter()
            .map(|n| (n.clone(), fs::read(out.join(n)).unwrap()))
            .collect::<Vec<_>>()
    };
    let a = render(&dir.path().join("a"));
    let b = render(&dir.path().join("b"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let acc = a.iter().find(|(n, _)| n == "accuracy.svg").expect("accuracy chart");
    let svg = String::from_utf8(acc.1.clone()).unwrap();
    assert!(svg.contains("runs/run_0") && svg.contains("runs/run_1"), "legend names both runs");
}

#[test]
fn plot_without_inputs_is_a_usage_error() {
    assert_eq!(code(&decorr(&["plot"])), 2);
}
