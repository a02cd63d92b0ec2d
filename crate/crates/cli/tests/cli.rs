use std::path::PathBuf;
use std::process::{Command, Output};

const SMALL_CATALOG: &str = r#"
[[rule]]
id = "S2.E3"
base = "sn"
scale = "sqrt(k)"
param = "1/k"
rhs = "sqrt(k) * sn(x)"

[[rule]]
id = "S2.E4"
base = "cn"
scale = "sqrt(k)"
param = "1/k"
rhs = "dn(x)"
"#;

fn jacobi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jacobi")).args(args).env_remove("JACOBI_CATALOG").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("jacobi-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn lines(o: &Output) -> Vec<serde_json::Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn eval_sn_at_zero() {
    let o = jacobi(&["eval", "--fn", "sn", "--x", "0", "--k", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v, serde_json::json!({"re": 0.0, "im": 0.0}));
}

#[test]
fn modulus_flag_squares() {
    let a = jacobi(&["eval", "--fn", "cd", "--x", "0.3+0.1i", "--k", "0.25"]);
    let b = jacobi(&["eval", "--fn", "cd", "--x", "0.3+0.1i", "--modulus", "0.5"]);
    assert_eq!(stdout(&a), stdout(&b));
    let both = jacobi(&["eval", "--fn", "cd", "--x", "0", "--k", "0.25", "--modulus", "0.5"]);
    assert_eq!(both.status.code(), Some(2));
}

#[test]
fn mkdv_check_example_passes() {
    let o = jacobi(&["mkdv-check", "--form", "phi0", "--k", "0.5", "--m", "0.5", "--a", "1", "--c", "1", "--nu", "-1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reps = lines(&o);
    assert_eq!(reps.len(), 3);
    assert_eq!(reps[0]["equation"], "phi");
    assert_eq!(reps[1]["equation"], "mkdv");
    assert!(reps[..2].iter().all(|r| r["status"] == "pass"));
    assert_eq!(reps[2]["report"], "summary");
}

#[test]
fn mkdv_check_rejects_broken_constraints() {
    let o = jacobi(&["mkdv-check", "--form", "phi0", "--k", "0.5", "--m", "0.3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("failed: mkdv-check:phi0"), "{}", stderr(&o));
}

#[test]
fn verify_all_emits_one_line_per_rule_and_branch() {
    let o = jacobi(&["verify-all", "--k", "0.5", "--samples", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reps = lines(&o);
    let (summary, body) = reps.split_last().unwrap();
    assert!(body.iter().all(|r| r["report"] == "identity"));
    assert!(body.len() >= 66);
    assert_eq!(summary["total"], body.len());
    assert_eq!(summary["failed"], 0);
    let skipped = body.iter().filter(|r| r["status"] == "skipped").count();
    assert_eq!(summary["skipped"], skipped);
    assert!(body.iter().filter(|r| r["status"] == "skipped").all(|r| r["reason"].is_string()));
}

#[test]
fn catalog_from_environment() {
    let path = temp_file("small.toml", SMALL_CATALOG);
    let o = Command::new(env!("CARGO_BIN_EXE_jacobi"))
        .args(["verify-all", "--k", "0.2,0.8"])
        .env("JACOBI_CATALOG", &path)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let ids: Vec<_> = lines(&o).iter().filter_map(|r| r["rule_id"].as_str().map(String::from)).collect();
    assert_eq!(ids, ["S2.E3", "S2.E3", "S2.E4", "S2.E4"]);
}

#[test]
fn perturbed_rule_fails_and_is_named() {
    let bad = SMALL_CATALOG.replace("rhs = \"dn(x)\"", "rhs = \"1.000001 * dn(x)\"");
    let path = temp_file("bad.toml", &bad);
    let o = jacobi(&["verify-all", "--k", "0.5", "--catalog", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("failed: S2.E4"), "{err}");
    assert!(!err.contains("S2.E3"), "{err}");
}

#[test]
fn usage_and_io_errors() {
    let o = jacobi(&["--tol", "bogus=1", "verify-all"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--tol"), "{}", stderr(&o));
    let o = jacobi(&["verify-identity", "--rule", "S9.E99", "--k", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = jacobi(&["transform", "--k", "0.5", "--m", "0.5", "--rule", "S2.E42"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eps"));
    let o = jacobi(&["verify-all", "--catalog", "/nonexistent/rules.toml"]);
    assert_eq!(o.status.code(), Some(3));
    let o = jacobi(&["eval", "--fn", "sn", "--x", "0", "--k", "0.5", "--output", "/nonexistent/dir/out.json"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn tolerance_override_applies() {
    let o = jacobi(&["--tol", "exact=1e-30", "verify-identity", "--rule", "S2.E3", "--k", "0.3"]);
    assert_eq!(o.status.code(), Some(1));
    let tol = lines(&o)[0]["tolerance"].as_f64().unwrap();
    assert!((tol / 1e-30 - 1.0).abs() < 1e-12);
}

#[test]
fn printed_variant_can_be_checked() {
    let o = jacobi(&[
        "verify-identity",
        "--rule",
        "S2.E13",
        "--k",
        "0.5",
        "--printed",
        "--branch",
        "p=0",
        "--branch",
        "q=0",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn sd_rule_transform_passes() {
    let o = jacobi(&["transform", "--k", "0.5", "--m", "0.5", "--nu", "-1", "--rule", "S2.E21"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let reps = lines(&o);
    assert_eq!(reps[0]["result"]["form"], "phi1");
    assert_eq!(reps[1]["report"], "witness");
    assert_eq!(reps[1]["equivalent"], true);
}

#[test]
fn unsolvable_transform_is_skipped() {
    let o = jacobi(&["transform", "--k", "0.5", "--m", "0.5", "--rule", "S2.E42", "--branch", "eps=1"]);
    assert_eq!(o.status.code(), Some(0));
    let reps = lines(&o);
    assert_eq!(reps[0]["status"], "skipped");
    assert_eq!(reps.last().unwrap()["skipped"], 1);
}

#[test]
fn phase_and_equivalence() {
    let o = jacobi(&["solve-phase", "--s0", "0", "--c0", "1", "--d0", "1", "--k", "0.3+0.2i"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(lines(&o)[0]["phi"], serde_json::json!({"re": 0.0, "im": 0.0}));
    let o = jacobi(&["solve-phase", "--s0", "2", "--c0", "1", "--d0", "1", "--k", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = jacobi(&["equiv", "--k", "0.5", "--phase", "0.3-0.2i"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn equiv_reads_solution_files() {
    let path = temp_file(
        "solutions.toml",
        r#"
[[solution]]
form = "phi0"
k = 0.5
m = 0.5
a = 1.0
c = 1.0

[[solution]]
form = "phi0"
k = 0.5
m = 0.5
a = 1.0
c = 1.0
rule = "S2.E21"

[[solution]]
form = "phi0"
k = 0.3
m = 0.3
a = 1.0
c = 1.0
"#,
    );
    let o = jacobi(&["equiv", "--solutions", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let reps = lines(&o);
    assert_eq!(reps[0]["equivalent"], true);
    assert_eq!(reps[1]["equivalent"], false);
    assert!(stderr(&o).contains("solution[0]~solution[2]"));
}

#[test]
fn csv_output_to_file() {
    let path = std::env::temp_dir().join(format!("jacobi-cli-{}-out.csv", std::process::id()));
    let o = jacobi(&["verify-all", "--k", "0.5", "--format", "csv", "--output", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    let mut it = text.lines();
    assert!(it.next().unwrap().starts_with("report,rule_id,param_value,"));
    assert!(it.next().unwrap().starts_with("identity,A.E68,"));
}

#[test]
fn same_seed_same_bytes() {
    let args = ["--seed", "7", "verify-all", "--k", "0.3+0.2i", "--samples", "50"];
    let (a, b) = (jacobi(&args), jacobi(&args));
    assert_eq!(a.stdout, b.stdout);
    let c = jacobi(&["--seed", "8", "verify-all", "--k", "0.3+0.2i", "--samples", "50"]);
    assert_ne!(a.stdout, c.stdout);
}
