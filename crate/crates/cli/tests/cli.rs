use std::path::PathBuf;
use std::process::{Command, Output};

fn shorcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shorcert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("shorcert-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const EXAMPLE: &str = r#"{
  "n": 2,
  "objective": {"A": {"kind": "diag", "data": [1, 1]}, "b": [0, 0], "c": 0},
  "inequalities": [
    {"A": {"kind": "diag", "data": [-2, 1]}, "b": [0, 0], "c": 1},
    {"A": {"kind": "diag", "data": [1, -2]}, "b": [0, 0], "c": 1}
  ],
  "equalities": []
}"#;

fn example_file(dir: &std::path::Path) -> String {
    let p = dir.join("inst.json");
    std::fs::write(&p, EXAMPLE).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn solve_reports_value_and_writes_json() {
    let dir = scratch("solve");
    let inst = example_file(&dir);
    let out_json = dir.join("out.json");
    let o = shorcert(&["solve", &inst, "--json", out_json.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("OPTIMAL"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_json).unwrap()).unwrap();
    let value = v["solution"]["objective_value"].as_f64().unwrap();
    assert!((value - 2.0).abs() < 1e-4);
}

#[test]
fn checks_report_verdicts() {
    let dir = scratch("checks");
    let inst = example_file(&dir);
    let strong = shorcert(&["check", "obj-strong", &inst]);
    assert_eq!(strong.status.code(), Some(0));
    assert!(stdout(&strong).contains("OBJ_STRONG: FAILS"));
    let weak = shorcert(&["check", "obj-weak", &inst]);
    assert!(stdout(&weak).contains("OBJ_WEAK: HOLDS"));
    let ch = shorcert(&["check", "ch", &inst]);
    assert!(stdout(&ch).contains("CONVEX_HULL: HOLDS"));
    let point = shorcert(&["check", "ch-point", &inst, "--x", "-1,1", "--t", "2.5"]);
    assert_eq!(
        point.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&point.stderr)
    );
}

#[test]
fn rog_pair_and_witness() {
    let o = shorcert(&["rog", "pair", "diag:1,-1,0", "diag:0,1,-1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("NOT_ROG_CERTIFIED"));
    let w = shorcert(&[
        "rog",
        "witness3d",
        "diag:1,-1,0",
        "diag:0,1,-1",
        "--w",
        "-1,0,1",
    ]);
    assert_eq!(w.status.code(), Some(0));
    assert!(stdout(&w).contains("valid        true"));
    let probe = shorcert(&[
        "rog",
        "probe",
        "diag:1,-1,0",
        "diag:0,1,-1",
        "--trials",
        "2",
    ]);
    assert_eq!(probe.status.code(), Some(0));
}

#[test]
fn input_errors_exit_with_code_two() {
    assert_eq!(
        shorcert(&["solve", "/nonexistent/inst.json"]).status.code(),
        Some(2)
    );
    assert_eq!(
        shorcert(&["rog", "pair", "1,2", "diag:1,2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        shorcert(&["rog", "pair", "diag:1,-1", "diag:1,0,0"])
            .status
            .code(),
        Some(2)
    );
    let dir = scratch("bad");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\"n\": 2}").unwrap();
    assert_eq!(
        shorcert(&["check", "ch", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn examples_list_and_run() {
    let o = shorcert(&["examples", "list"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("explicit_sdp"));
    let dir = scratch("examples");
    let out_json = dir.join("trs.json");
    let r = shorcert(&[
        "examples",
        "run",
        "trs_1d",
        "--json",
        out_json.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", stdout(&r));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_json).unwrap()).unwrap();
    assert_eq!(v["name"], "trs_1d");
    assert_eq!(
        shorcert(&["examples", "run", "no_such_example"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn ratio_file() {
    let dir = scratch("ratio");
    let p = dir.join("rtls.json");
    std::fs::write(
        &p,
        r#"{"rtls": {"A": [[1, 0], [0, 1], [1, 1]], "b": [0.3, -0.2, 0.1], "rho": 1}}"#,
    )
    .unwrap();
    let o = shorcert(&["ratio", p.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("claim        EXACT"));
}
