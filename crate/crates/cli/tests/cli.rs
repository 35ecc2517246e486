use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handlebody"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not a report ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn abelian_family_report() {
    let dir = TempDir::new().unwrap();
    let out = run(&["family", "abelian", "--k", "2", "--m", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["outputs"]["n"], "4");
    assert_eq!(r["outputs"]["g"], "2");
    assert_eq!(r["outputs"]["bounds"]["refined"], 36);
    assert_eq!(r["outputs"]["effectiveness"]["pass"], true);
    let lemma3 = r["outputs"]["lemma3"].as_array().unwrap();
    assert_eq!(lemma3.len(), 2);
    assert!(lemma3
        .iter()
        .all(|l| l["pass_case"] == true && l["pass_global"] == true));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.find("\"timing\"").unwrap() > text.find("\"failures\"").unwrap());
}

#[test]
fn bounds_values() {
    let dir = TempDir::new().unwrap();
    let out = run(&["bounds", "--g", "2", "--dim", "4"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["outputs"]["bounds"]["crude"], 1296);
    assert_eq!(r["outputs"]["bounds"]["refined"], 36);
    assert_eq!(r["outputs"]["corollary"]["kernel_orthogonal_dim"], 2);
}

#[test]
fn bounds_use_jordan_table() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("j.json"), r#"{"2": 5}"#).unwrap();
    let out = run(
        &[
            "bounds",
            "--g",
            "2",
            "--dim",
            "4",
            "--jordan-table",
            "j.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["outputs"]["corollary"]["abelian_index"], 180);
}

#[test]
fn input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = run(&["verify", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"vertices":[{"id":1,"order":-4}],"edges":[]}"#,
    )
    .unwrap();
    let out = run(&["gog", "chi", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vertices[0].order"));

    let out = run(&["bounds", "--g", "1", "--dim", "4"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(
        &["bounds", "--g", "2", "--dim", "4", "--tol-orth", "0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["realize", "--k", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gog_commands() {
    let dir = TempDir::new().unwrap();
    let graph = r#"{"vertices":[{"id":1,"order":2},{"id":2,"order":3},{"id":3,"order":1}],
        "edges":[{"id":1,"v1":1,"v2":2,"order":1},{"id":2,"v1":2,"v2":3,"order":1}]}"#;
    std::fs::write(dir.path().join("g.json"), graph).unwrap();
    let r = report(&run(&["gog", "chi", "g.json"], dir.path()));
    assert_eq!(r["outputs"]["chi"], "-1/6");
    assert_eq!(r["outputs"]["normal_form"], false);
    let r = report(&run(&["gog", "genus", "g.json", "--n", "6"], dir.path()));
    assert_eq!(r["outputs"]["genus"], "2");
    let r = report(&run(&["gog", "collapse", "g.json"], dir.path()));
    assert_eq!(r["status"], "pass");
    assert_eq!(r["outputs"]["chi"], "-1/6");
    assert_eq!(r["outputs"]["normal_form"], true);
    let out = run(&["gog", "random", "--seed", "11"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["seed"], 11);
}

#[test]
fn realize_verify_round_trip() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["realize", "--k", "2", "--m", "2", "--out", "r.json"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&out);
    assert_eq!(r["outputs"]["verification"]["pass"], true);
    for check in r["outputs"]["verification"]["results"].as_array().unwrap() {
        assert!(check["value"].is_number() && check["tolerance"].as_f64().unwrap() > 0.0);
        assert_eq!(check["pass"], true);
    }
    let out = run(&["verify", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["outputs"]["matches_stored"], true);
    assert_eq!(
        r["outputs"]["chain"]["principal"],
        serde_json::json!([-1, 1, 3])
    );

    let out = run(&["kernel-sample", "r.json", "--count", "30"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["outputs"]["sampled"], 30);
    assert_eq!(r["outputs"]["finite_order"], 0);
}

#[test]
fn inconsistent_realization_is_rejected() {
    let dir = TempDir::new().unwrap();
    run(
        &["realize", "--k", "2", "--m", "2", "--out", "r.json"],
        dir.path(),
    );
    let path = dir.path().join("r.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for o in v["offsets"].as_array_mut().unwrap() {
        *o = Value::from(o.as_f64().unwrap() * 0.05);
    }
    std::fs::write(&path, v.to_string()).unwrap();
    let out = run(&["verify", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hyperplane 1"));
}

#[test]
fn shrunken_realization_fails_verification() {
    let dir = TempDir::new().unwrap();
    run(
        &["realize", "--k", "2", "--m", "2", "--out", "r.json"],
        dir.path(),
    );
    let path = dir.path().join("r.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let r: handlebody::RealizedExtension = serde_json::from_str(&text).unwrap();
    let half: Vec<f64> = r.offsets().iter().map(|t| t * 0.05).collect();
    let shrunk = r.with_offsets(&half).unwrap();
    std::fs::write(&path, serde_json::to_string(&shrunk).unwrap()).unwrap();
    let out = run(&["verify", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("check failed: cross e1/e2"), "{stderr}");
    let r = report(&out);
    assert_eq!(r["status"], "fail");
    assert_eq!(r["outputs"]["stored_pass"], Value::Null);
}

#[test]
fn deterministic_modulo_timing() {
    let dir = TempDir::new().unwrap();
    let args = ["realize", "--k", "2", "--p", "3", "--seed", "5"];
    let a = without_timing(report(&run(&args, dir.path())));
    let b = without_timing(report(&run(&args, dir.path())));
    assert_eq!(a, b);
    let args = ["gog", "random", "--seed", "9"];
    let a = without_timing(report(&run(&args, dir.path())));
    let b = without_timing(report(&run(&args, dir.path())));
    assert_eq!(a, b);
}

#[test]
fn report_goes_to_out_file() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["bounds", "--g", "3", "--dim", "5", "--out", "rep.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rep.json")).unwrap())
            .unwrap();
    assert_eq!(v["outputs"]["bounds"]["refined"], 1728);
}

#[test]
fn schottky_pipeline() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &[
            "schottky", "random", "--genus", "2", "--dim", "3", "--seed", "4", "--out", "s.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let out = run(
        &["schottky", "certify", "s.json", "--maxlen", "4"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["outputs"]["certificate"]["status"], "certified");
    assert_eq!(r["outputs"]["audit"]["words_checked"], 160);

    let out = run(
        &[
            "schottky", "limitset", "s.json", "--depth", "3", "--out", "caps.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(dir.path().join("caps.csv")).unwrap();
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, ["word", "x1", "x2", "x3", "radius"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4 + 12 + 36);
    for row in &rows {
        let c: Vec<f64> = (1..4).map(|i| row[i].parse().unwrap()).collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }
}
