use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_equivgroups"))
        .args(args)
        .current_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_symmetry_by_path_and_name() {
    let o = run(&["check-symmetry", "--family", "e3nor", "--generator", "fixtures/x3ode.vf"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("residue: 0"));
    let o = run(&["check-symmetry", "--family", "e3nh", "--generator", "x3nh"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn mutant_exits_one() {
    for m in ["c4-sign", "eta-double", "a1-factor", "drop-f4"] {
        let name = format!("mutants/{m}");
        let o = run(&["verify-generator", "--family", "e3nor", "--generator", &name]);
        assert_eq!(o.status.code(), Some(1), "{m}");
    }
}

#[test]
fn levi_snapshot() {
    let o = run(&["levi", "--snapshot", "deg2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("radical dim: 3"));
    assert!(out.contains("complement dim: 3"));
    let o = run(&["levi", "--snapshot", "deg3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rank_count() {
    let o = run(&["rank", "--group", "Gc", "--order", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("count: 2"));
}

#[test]
fn json_document() {
    let o = run(&["--json", "rank", "--group", "Gs", "--order", "4"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["command"], "count");
    assert_eq!(v["count"], 0);
    assert_eq!(v["passed"], true);

    let o = run(&["verify-relations", "--json"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["check-symmetry", "--family", "e3nor"]).status.code(), Some(2));
    let o = run(&["check-symmetry", "--family", "nowhere", "--generator", "x3ode"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["--tolerance", "-1", "invariants", "numeric"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_is_deterministic() {
    let args = ["--json", "invariants", "count", "--group", "Gc", "--order", "3", "--seed", "7"];
    assert_eq!(stdout(&run(&args)), stdout(&run(&args)));
    let args = ["flow", "verify", "--fixture", "projective"];
    assert_eq!(stdout(&run(&args)), stdout(&run(&args)));
}

#[test]
fn numeric_invariance_and_control() {
    assert_eq!(run(&["invariants", "numeric"]).status.code(), Some(0));
    assert_eq!(run(&["invariants", "numeric", "--name", "mu"]).status.code(), Some(1));
}

#[test]
fn transform_lift() {
    let o = run(&["transform", "--family", "e3nh", "--transform", "equivalence", "--lift"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("B2 = 0"));
    let o = run(&["transform", "--family", "e3nh", "--transform", "generic", "--lift"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flows_and_parse() {
    assert_eq!(run(&["flow", "lemma", "--fixture", "scaling", "--k1", "1"]).status.code(), Some(0));
    let o = run(&["flow", "integrate", "--fixture", "translation", "--t", "1", "--csv"]);
    assert!(stdout(&o).starts_with("t,x,y\n"));
    let o = run(&["parse", "fixtures/grammar/30.expr"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("round-trip pass"));
}

#[test]
fn split_and_determining() {
    let o = run(&["split", "--generator", "x3ode", "--zero", "g"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("X2:"));
    let o = run(&["determining", "--family", "glinode:4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("equations: 15"));
}
