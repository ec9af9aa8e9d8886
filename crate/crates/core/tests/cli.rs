use std::path::Path;
use std::process::{Command, Output};

fn nullflow(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nullflow")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn zero_flow_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nullflow(&["verify", "--scenario", "builtin:pn_zero_flow"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(json["pass"], true);
    for r in json["reports"].as_array().unwrap() {
        for x in r["max_abs"].as_array().unwrap() {
            assert!(x.as_f64().unwrap() < 1e-10, "{}", r["name"]);
        }
    }
    assert!(tmp.path().join("verify.txt").exists());
}

#[test]
fn printed_forms_fail_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nullflow(&["verify", "--scenario", "builtin:pn_generic_audit", "--variants", "printed"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("overall: FAIL"), "{table}");
}

#[test]
fn simulate_writes_grid_and_drift() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nullflow(&["simulate", "--scenario", "builtin:pn_inextensible"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let drift = std::fs::read_to_string(tmp.path().join("drift.csv")).unwrap();
    let rows: Vec<&str> = drift.lines().collect();
    assert_eq!(rows[0], "t,length,drift");
    assert_eq!(rows.len(), 102);
    for row in &rows[1..] {
        let d: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(d.abs() <= 1e-6, "{row}");
    }
    let bin = std::fs::File::open(tmp.path().join("grid.bin")).unwrap();
    let grid = nullflow::flow::read_snapshot(bin).unwrap();
    assert_eq!((grid.num_u(), grid.num_t()), (81, 101));
}

#[test]
fn refinement_and_mode_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nullflow(&["verify", "--scenario", "builtin:psn_zero_flow", "--refinements", "4", "--mode", "transport"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(json["mode"], "transport");
    assert_eq!(json["reports"][0]["du"].as_array().unwrap().len(), 4);
    let o = nullflow(&["verify", "--scenario", "builtin:psn_zero_flow", "--refinements", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn input_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.ini", "[curve]\nkind = partially_null\nk1 = 1\nk2 = 1\nk3 = 1\n[grid]\nl = x\n");
    let o = nullflow(&["synth", "--scenario", &bad], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    let lines: Vec<&str> = err.lines().collect();
    assert!(lines[0].contains("line 5") && lines[0].contains("k3"), "{err}");
    assert!(lines[1].contains("line 7: grid.l"), "{err}");
    assert!(lines[2].contains("missing required key grid.du"), "{err}");
    let empty = write(tmp.path(), "empty.ini", "");
    assert_eq!(nullflow(&["synth", "--scenario", &empty], tmp.path()).status.code(), Some(2));
    let missing = tmp.path().join("nope.ini").to_string_lossy().into_owned();
    assert_eq!(nullflow(&["synth", "--scenario", &missing], tmp.path()).status.code(), Some(2));
    assert_eq!(nullflow(&["synth", "--scenario", "builtin:nope"], tmp.path()).status.code(), Some(2));
}

#[test]
fn numerical_abort_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let flat = write(tmp.path(), "flat.ini", "[curve]\nkind = partially_null\nk1 = 0\nk2 = 1\n[flow]\nc2 = 1\n[grid]\nl = 2\ndu = 0.1\nw = 0.1\ndt = 0.01\n");
    let o = nullflow(&["simulate", "--scenario", &flat], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("scenario flat: first curvature"));
}

#[test]
fn synth_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nullflow(&["synth", "--scenario", "builtin:pn_exp_circle"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("curve.csv")).unwrap();
    let mut rows = csv.lines();
    assert!(rows.next().unwrap().starts_with("s,gamma_x1,gamma_x2"));
    let first: Vec<f64> = rows.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    // canonical frame at the origin
    assert_eq!(&first[..9], &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
}
