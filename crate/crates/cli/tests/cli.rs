use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn problem(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/problems").join(format!("{name}.problem"))
}

fn iterfunc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iterfunc"))
        .args(args)
        .current_dir(cwd)
        .env("ITERFUNC_LOG", "error")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_example_one_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex1");
    let o = iterfunc(&["solve", problem("ex1").to_str().unwrap(), "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!((report["constants"]["K0"].as_f64().unwrap() - 11.0 / 12.0).abs() < 1e-15);
    assert_eq!(report["constants"]["K2"].as_f64().unwrap(), 0.25);
    for f in ["solution.csv", "solution_core.csv", "plot.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let v = iterfunc(&["verify", problem("ex1").to_str().unwrap(), "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(v.status.code(), Some(0), "{}", stderr(&v));
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let o = iterfunc(&["solve", problem("ex2").to_str().unwrap(), "--out", name], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["solution.csv", "solution_core.csv", "plot.csv", "report.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn zero_first_exponent_is_a_hypothesis_violation() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a01.problem");
    std::fs::write(
        &p,
        "form = multiplicative\nexponents = [0, 1]\ntarget = x\ninterval = [1, e]\ndelta = 1/2\nM = 2\nsolver = contraction\n",
    )
    .unwrap();
    let o = iterfunc(&["solve", p.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("alpha_1 = 0"), "{}", stderr(&o));
}

#[test]
fn rejected_seed_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = iterfunc(&["solve", problem("ex2").to_str().unwrap(), "--seeds", "exp(0.3)"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_input_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = iterfunc(&["solve", "missing.problem"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = iterfunc(&["solve", problem("ex1").to_str().unwrap(), "--window", "2,1"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn certify_reports_empty_class() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f.csv");
    std::fs::write(&csv, "x,y\n1,1\n2,1.5\n2.718281828459045,2.718281828459045\n").unwrap();
    let o = iterfunc(&["certify", "--class", "GJ", "--delta", "2", "--M", "3", csv.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cert: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(cert["verdict"], "degenerate");
    assert_eq!(cert["degeneracy"], "empty");
}

#[test]
fn constants_match_example_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = iterfunc(&["constants", "--alpha", "3/4,1/4", "--delta", "2/3", "--M", "2", "--interval", "1,e"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let c: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(c["K2"].as_f64().unwrap(), 0.25);
    assert!((c["stability_constant"].as_f64().unwrap() - 1.5 * std::f64::consts::E).abs() < 1e-12);
}

#[test]
fn roots_and_examples_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = iterfunc(&["roots", problem("root").to_str().unwrap(), "--out", "r"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r/root.json")).unwrap()).unwrap();
    assert!(r["residual"].as_f64().unwrap() <= 1e-6);
    let o = iterfunc(&["examples", "--out", "ex"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["ex1", "ex2", "ex3"] {
        assert!(dir.path().join("ex").join(name).join("report.json").exists());
    }
}
