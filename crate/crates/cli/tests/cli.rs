use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sigjeff(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigjeff"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn simulate(cwd: &Path, d: &str) {
    ok(&sigjeff(
        &["simulate", "--design", "ar1", "--d", d, "--n-per-class", "12", "--seed", "4", "--out-dir", "sim"],
        cwd,
    ));
}

#[test]
fn simulate_writes_data_and_truth() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), "60");
    let csv = fs::read_to_string(tmp.path().join("sim/data.csv")).unwrap();
    assert!(!csv.contains('\r'));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 25);
    assert!(lines[0].ends_with(",label"));
    let truth: Vec<usize> = serde_json::from_str(&fs::read_to_string(tmp.path().join("sim/truth.json")).unwrap()).unwrap();
    assert_eq!(truth, (1..=50).collect::<Vec<_>>());
}

#[test]
fn run_is_identical_across_workers_and_manifest_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), "61");
    let base = ["run", "--input", "sim/data.csv", "--permutations", "60", "--seed", "9"];
    for (w, dir) in [("1", "w1"), ("3", "w3")] {
        let mut args = base.to_vec();
        args.extend(["--workers", w, "--out-dir", dir]);
        ok(&sigjeff(&args, tmp.path()));
    }
    ok(&sigjeff(&["run", "--manifest", "w1/manifest.json", "--workers", "2", "--out-dir", "again"], tmp.path()));
    let w1 = read_dir_sorted(&tmp.path().join("w1"));
    assert_eq!(w1.len(), 5);
    assert_eq!(w1, read_dir_sorted(&tmp.path().join("w3")));
    assert_eq!(w1, read_dir_sorted(&tmp.path().join("again")));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("w1/manifest.json")).unwrap()).unwrap();
    assert!(manifest["run"]["singleton"].is_u64());
    assert_eq!(manifest["run"]["pairs"], 30);
}

#[test]
fn fdr_uses_requested_cutoffs() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), "60");
    ok(&sigjeff(
        &["fdr", "--input", "sim/data.csv", "--permutations", "40", "--cutoffs", "0.5,1,2", "--out-dir", "f"],
        tmp.path(),
    ));
    let csv = fs::read_to_string(tmp.path().join("f/fdr.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "cutoff,n_called,median_null_called,p90_null_called,pi0,fdr_median,fdr_p90");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.5,"));
}

#[test]
fn compare_writes_curves() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), "60");
    ok(&sigjeff(
        &[
            "compare", "--input", "sim/data.csv", "--truth", "sim/truth.json", "--permutations", "20", "--max-k", "10",
            "--out-dir", "c",
        ],
        tmp.path(),
    ));
    let csv = fs::read_to_string(tmp.path().join("c/comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let k = f[0];
        assert_eq!(f[3], 1.0 - f[1] / k);
        assert_eq!(f[4], 1.0 - f[2] / k);
    }
}

#[test]
fn label_file_and_custom_map() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("x.csv"), "g1,g2,g3\n1,2,3\n2,1,0\n3,5,1\n0,1,4\n4,4,4\n").unwrap();
    fs::write(tmp.path().join("y.csv"), "group\nmut\nwt\nmut\nwt\nmut\n").unwrap();
    ok(&sigjeff(
        &[
            "run", "--input", "x.csv", "--label-file", "y.csv", "--label-map", "mut=+1,wt=-1", "--permutations", "10",
            "--out-dir", "o",
        ],
        tmp.path(),
    ));
    let ranked = fs::read_to_string(tmp.path().join("o/variable_ranking.csv")).unwrap();
    assert_eq!(ranked.lines().count(), 4);
}

#[test]
fn errors_exit_nonzero_with_stage() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.csv"), "a,b,label\n1,x,1\n2,3,-1\n").unwrap();
    let out = sigjeff(&["run", "--input", "bad.csv", "--out-dir", "o"], tmp.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage load"), "{err}");
    assert!(err.contains("row 2") && err.contains("column 2"), "{err}");

    fs::write(tmp.path().join("lab.csv"), "a,b,label\n1,2,yes\n2,3,no\n").unwrap();
    let out = sigjeff(&["run", "--input", "lab.csv", "--out-dir", "o"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("yes"));

    let out = sigjeff(&["run", "--input", "missing.csv", "--out-dir", "o"], tmp.path());
    assert!(!out.status.success());
}
