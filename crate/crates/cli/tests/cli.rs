//! End-to-end tests of the binary: exit codes, report shapes, and
//! bit-exact document round-trips through the CLI itself.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hilbert-complex"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_fixture(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

/// 0 -> C -> C^2 -> C -> 0 with t0 = col(1,1), t1 = row(1,-1).
fn fix_document() -> String {
    serde_json::json!({
        "metadata": { "name": "fix" },
        "algebra": { "blocks": [1] },
        "modules": [ { "dims": [1] }, { "dims": [2] }, { "dims": [1] } ],
        "diffs": [
            [ { "rows": 2, "cols": 1, "data": [[1.0, 0.0], [1.0, 0.0]] } ],
            [ { "rows": 1, "cols": 2, "data": [[1.0, 0.0], [-1.0, 0.0]] } ]
        ],
        "kind": "complex",
        "tol_complex": 1e-10
    })
    .to_string()
}

/// Same shape but t1 = row(1,1): violates the complex property at k = 0.
fn broken_document() -> String {
    serde_json::json!({
        "algebra": { "blocks": [1] },
        "modules": [ { "dims": [1] }, { "dims": [2] }, { "dims": [1] } ],
        "diffs": [
            [ { "rows": 2, "cols": 1, "data": [[1.0, 0.0], [1.0, 0.0]] } ],
            [ { "rows": 1, "cols": 2, "data": [[1.0, 0.0], [1.0, 0.0]] } ]
        ],
        "kind": "complex",
        "tol_complex": 1e-10
    })
    .to_string()
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_fixture(dir.path(), "fix.json", &fix_document());
    let out = run(&["validate", &good]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // complex-property violation: exit 1, naming k = 0
    let bad = write_fixture(dir.path(), "bad.json", &broken_document());
    let out = run(&["validate", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("k = 0"), "stderr: {err}");

    // malformed shape: exit 2
    let malformed = fix_document().replace("\"rows\":2", "\"rows\":3");
    let shape = write_fixture(dir.path(), "shape.json", &malformed);
    let out = run(&["validate", &shape]);
    assert_eq!(out.status.code(), Some(2));

    // unreadable payload: exit 2
    let garbage = write_fixture(dir.path(), "garbage.json", "not json");
    let out = run(&["validate", &garbage]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn index_reports_and_alarm_free() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_fixture(dir.path(), "fix.json", &fix_document());
    let out = run(&["--json", "index", &good]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["index"]["plus"], serde_json::json!([0]));
    assert_eq!(v["index"]["minus"], serde_json::json!([0]));
    assert_eq!(v["index_equals_euler"], serde_json::json!(true));
    assert_eq!(v["cohomology_dims"], serde_json::json!([[0], [0], [0]]));

    // length-1 row(1,0): index +[1], H^0 = (1), H^1 = (0)
    let row = serde_json::json!({
        "algebra": { "blocks": [1] },
        "modules": [ { "dims": [2] }, { "dims": [1] } ],
        "diffs": [ [ { "rows": 1, "cols": 2, "data": [[1.0, 0.0], [0.0, 0.0]] } ] ],
        "kind": "complex",
        "tol_complex": 1e-10
    })
    .to_string();
    let row_path = write_fixture(dir.path(), "row.json", &row);
    let out = run(&["--json", "index", &row_path]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["index"]["plus"], serde_json::json!([1]));
    assert_eq!(v["cohomology_dims"], serde_json::json!([[1], [0]]));

    // zero complex 0 -> C -> C^2 -> C -> 0: H dims (1, 2, 1), index 0
    let zero = serde_json::json!({
        "algebra": { "blocks": [1] },
        "modules": [ { "dims": [1] }, { "dims": [2] }, { "dims": [1] } ],
        "diffs": [
            [ { "rows": 2, "cols": 1, "data": [[0.0, 0.0], [0.0, 0.0]] } ],
            [ { "rows": 1, "cols": 2, "data": [[0.0, 0.0], [0.0, 0.0]] } ]
        ],
        "kind": "complex",
        "tol_complex": 1e-10
    })
    .to_string();
    let zero_path = write_fixture(dir.path(), "zero.json", &zero);
    let out = run(&["--json", "index", &zero_path]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["index"]["plus"], serde_json::json!([0]));
    assert_eq!(v["cohomology_dims"], serde_json::json!([[1], [2], [1]]));
}

#[test]
fn checks_and_hodge_residuals_small() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_fixture(dir.path(), "fix.json", &fix_document());
    for cmd in ["checks", "hodge"] {
        let out = run(&["--json", cmd, &good]);
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        let max = v["max_residual"].as_f64().unwrap();
        assert!(max < 1e-10, "{cmd} max residual {max}");
    }
}

#[test]
fn random_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = run(&[
            "random",
            "--seed",
            "42",
            "--algebra",
            "1,2",
            "--length",
            "2",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let text_a = std::fs::read_to_string(&a).unwrap();
    let text_b = std::fs::read_to_string(&b).unwrap();
    assert_eq!(text_a, text_b, "same seed, same bytes");

    // validate + index the generated fixture; re-serialize bit-exactly
    let out = run(&["validate", a.to_str().unwrap()]);
    assert!(out.status.success());
    let doc = hilbert_complex::doc::ComplexDocument::from_json(&text_a).unwrap();
    assert_eq!(text_a.trim_end(), doc.to_json());

    let out = run(&["--json", "index", a.to_str().unwrap()]);
    assert!(out.status.success());
}

#[test]
fn random_with_target_cohomology() {
    let dir = tempfile::tempdir().unwrap();

    // seed 1, target H = (0, 0) on 0 -> C -> C -> 0: an invertible scalar
    let inv = dir.path().join("invertible.json");
    let out = run(&[
        "random",
        "--seed",
        "1",
        "--algebra",
        "1",
        "--dims",
        "1;1",
        "--target-cohomology",
        "0;0",
        "--out",
        inv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc =
        hilbert_complex::doc::ComplexDocument::from_json(&std::fs::read_to_string(&inv).unwrap())
            .unwrap();
    let scalar = &doc.diffs[0][0];
    let (re, im) = scalar.data[0];
    assert!(
        (re * re + im * im).sqrt() > 0.1,
        "scalar differential is invertible"
    );
    let out = run(&["--json", "index", inv.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["cohomology_dims"], serde_json::json!([[0], [0]]));

    let path = dir.path().join("target.json");
    let out = run(&[
        "random",
        "--seed",
        "7",
        "--algebra",
        "1",
        "--dims",
        "2;1",
        "--target-cohomology",
        "1;0",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = run(&["--json", "index", path.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["cohomology_dims"], serde_json::json!([[1], [0]]));

    // infeasible target: H = (3, 0) on (C^2, C)
    let out = run(&[
        "random",
        "--seed",
        "7",
        "--algebra",
        "1",
        "--dims",
        "2;1",
        "--target-cohomology",
        "3;0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn perturb_sweep_reports_seed_and_zero_changes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_fixture(dir.path(), "fix.json", &fix_document());
    let out = run(&[
        "perturb-sweep",
        &good,
        "--kind",
        "bounded",
        "--epsilon",
        "1e-3",
        "--trials",
        "20",
        "--seed",
        "99",
        "--homotopy-steps",
        "4",
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["seed"], serde_json::json!(99));
    assert_eq!(v["index_changes"], serde_json::json!(0));
    assert_eq!(v["metric_used"], serde_json::json!("operator-norm"));
    assert_eq!(v["homotopy"]["index_constant"], serde_json::json!(true));
}

#[test]
fn tensor_and_sum_commands() {
    let dir = tempfile::tempdir().unwrap();
    // scalar chain t = 1
    let chain = serde_json::json!({
        "algebra": { "blocks": [1] },
        "modules": [ { "dims": [1] }, { "dims": [1] } ],
        "diffs": [ [ { "rows": 1, "cols": 1, "data": [[1.0, 0.0]] } ] ],
        "kind": "complex",
        "tol_complex": 1e-10
    })
    .to_string();
    let chain_path = write_fixture(dir.path(), "chain.json", &chain);
    let product = dir.path().join("product.json");
    let out = run(&[
        "tensor",
        &chain_path,
        &chain_path,
        "--out",
        product.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc = hilbert_complex::doc::ComplexDocument::from_json(
        &std::fs::read_to_string(&product).unwrap(),
    )
    .unwrap();
    assert!(
        doc.metadata.tensor_layout.is_some(),
        "layout recorded for reproducibility"
    );
    assert_eq!(doc.modules[1].dims, vec![2]);
    let out = run(&["--json", "index", product.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["index"]["plus"], serde_json::json!([0]));

    let summed = dir.path().join("summed.json");
    let fixture = write_fixture(dir.path(), "fix.json", &fix_document());
    let out = run(&["sum", &fixture, &fixture, "--out", summed.to_str().unwrap()]);
    assert!(out.status.success());
    let out = run(&["--json", "index", summed.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["index"]["plus"], serde_json::json!([0]));
    assert_eq!(v["cohomology_dims"], serde_json::json!([[0], [0], [0]]));
}

#[test]
fn quasicomplex_documents_index_without_hodge() {
    let dir = tempfile::tempdir().unwrap();
    // t1 t0 != 0 is admissible for a quasicomplex
    let quasi = broken_document().replace("\"complex\"", "\"quasicomplex\"");
    let path = write_fixture(dir.path(), "quasi.json", &quasi);
    let out = run(&["validate", &path]);
    assert!(out.status.success());
    let out = run(&["--json", "index", &path]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["euler_index"], serde_json::Value::Null);
}
