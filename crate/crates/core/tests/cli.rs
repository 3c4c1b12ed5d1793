use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lipschitz-lr"));
    c.env_remove("LIPSCHITZ_LR_OUTPUT_DIR");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bin().output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["train", "--bogus"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["lc", "--data", "iris"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["lc", "--data", "iris", "--task", "ternary"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_1_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["lc", "--data", "no_such_set", "--task", "binary"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_set"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b,label\n1,2,x\n3,oops,y\n").unwrap();
    let o = run(&["train", "--data", bad.to_str().unwrap(), "--task", "binary"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));

    let o = run(&["bound-check", "--quadratics", "3", "--eps", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn lc_prints_ingredients_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["lc", "--data", "iris", "--task", "multiclass"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for key in ["L ", "alpha", "norm_X", "k ", "m "] {
        assert!(text.contains(key), "missing {key} in {text}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("iris_lc.json")).unwrap()).unwrap();
    let l = json["estimate"]["l"].as_f64().unwrap();
    let alpha = json["estimate"]["alpha"].as_f64().unwrap();
    assert!((l * alpha - 1.0).abs() < 1e-12);
    assert!(dir.path().join("iris_lc.csv").exists());
}

#[test]
fn lc_reads_a_user_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tiny.csv");
    std::fs::write(&csv, "f1,f2,y\n1,2,0\n2,1,1\n3,3,0\n4,1,1\n").unwrap();
    let o = run(&["lc", "--data", csv.to_str().unwrap(), "--task", "binary", "--split", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("m          4"));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["lc", "--data", "breast_cancer", "--task", "binary"])
        .env("LIPSCHITZ_LR_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("breast_cancer_lc.json").exists());
}

#[test]
fn train_writes_metrics_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["train", "--data", "iris", "--task", "multiclass", "--epochs", "20", "--optimizer", "autoadam", "--seed", "3"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(dir.path().join("iris_autoadam_seed3_metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,loss,train_acc,val_acc,lr,kz,max_w,L\n"));
    assert_eq!(metrics.lines().count(), 21);
    let lr = std::fs::read_to_string(dir.path().join("iris_autoadam_seed3_lr.csv")).unwrap();
    assert!(lr.starts_with("epoch,lr,kz,max_w,L\n"));
    assert!(dir.path().join("iris_autoadam_seed3_summary.json").exists());
}

#[test]
fn compare_threshold_writes_paired_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "compare", "--mode", "threshold", "--tl", "0.69", "--data", "breast_cancer", "--task", "binary",
            "--epochs", "50", "--fixed-epochs", "50",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let base = dir.path().join("breast_cancer_threshold_seed0");
    for suffix in ["_fixed0.1_metrics.csv", "_adaptive_metrics.csv", "_fixed0.1_lr.csv", "_adaptive_lr.csv", "_summary.json"] {
        let p = format!("{}{suffix}", base.display());
        assert!(Path::new(&p).exists(), "{p}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{}_summary.json", base.display())).unwrap()).unwrap();
    assert_eq!(summary["adaptive"]["epochs_to_threshold"], 1);
    assert_eq!(summary["fixed"]["censored"], true);
}

#[test]
fn compare_accuracy_rejects_regression() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["compare", "--mode", "accuracy", "--data", "linear_regression", "--task", "regression"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bound_check_exits_zero_when_everything_holds() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bound-check", "--quadratics", "100", "--seed", "7"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("holds"));
    let csv = std::fs::read_to_string(dir.path().join("bound_check_seed7.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
}
