use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn curve(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../curves").join(name)
}

fn hullscope(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hullscope"))
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn sidecar(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&read(dir, &format!("{name}.meta.json"))).unwrap()
}

#[test]
fn slice_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let c = curve("circle.json");
    let o = hullscope(
        dir.path(),
        &["slice", "--curve", c.to_str().unwrap(), "--M", "1.5", "--grid", "128"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = read(dir.path(), "hull_slice.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x_re,x_im,value,member"));
    assert_eq!(lines.count(), 128 * 128);
    let meta = sidecar(dir.path(), "hull_slice.csv");
    assert_eq!(meta["config"]["command"], "slice");
    assert_eq!(meta["config"]["args"]["m"], 1.5);
    assert_eq!(meta["sha256"], hex(csv.as_bytes()));
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_curve_exits_2_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = hullscope(dir.path(), &["slice", "--curve", "no/such/curve.json", "--M", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no/such/curve.json"), "{}", stderr(&o));
}

#[test]
fn bishop_decay_schema() {
    let dir = tempfile::tempdir().unwrap();
    let c = curve("graph.json");
    let o = hullscope(
        dir.path(),
        &["bishop", "--curve", c.to_str().unwrap(), "--d", "3..10", "--e", "3"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = read(dir.path(), "decay.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("d,e,lambda,sup_norm_K,r,r0,fitted_C,passes"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    for (row, d) in rows.iter().zip(3..=10) {
        assert_eq!(row.len(), 8);
        assert_eq!(row[0], d.to_string());
        assert_eq!(row[1], "3");
        assert_eq!(row[2], (3 * d).to_string());
        for f in &row[3..7] {
            f.parse::<f64>().unwrap();
        }
        assert!(row[7] == "true" || row[7] == "false");
    }
}

#[test]
fn bishop_precondition_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let c = curve("cubic.json");
    let o = hullscope(
        dir.path(),
        &[
            "bishop",
            "--curve",
            c.to_str().unwrap(),
            "--d",
            "3",
            "--e",
            "3",
            "--radius",
            "0.5",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn validate_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run = |p: &Path| {
        Command::new(env!("CARGO_BIN_EXE_hullscope"))
            .arg("validate")
            .arg(p)
            .output()
            .unwrap()
    };
    let o = run(&curve("circle.json"));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&o.stdout).trim(),
        "1 component, degrees (1,0), simple: yes"
    );

    let o = run(&curve("figure_eight.json"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("simple: no (warning)"));

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        read(&curve(""), "circle.json").replace("\"rho\": 0.5", "\"rho\": 1.2"),
    )
    .unwrap();
    let o = run(&bad);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rho"), "{}", stderr(&o));

    let unknown = dir.path().join("unknown.json");
    std::fs::write(
        &unknown,
        read(&curve(""), "circle.json").replace("\"rho\"", "\"radius\": 1, \"rho\""),
    )
    .unwrap();
    let o = run(&unknown);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

fn digest_dir(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p.file_name().unwrap().to_string_lossy().into_owned(), hex(&bytes))
        })
        .collect();
    v.sort();
    v
}

#[test]
fn identical_config_gives_identical_bytes() {
    let circle = curve("circle.json");
    let cubic = curve("cubic.json");
    let runs: Vec<Vec<&str>> = vec![
        vec![
            "slice",
            "--curve",
            circle.to_str().unwrap(),
            "--M",
            "1.5",
            "--grid",
            "32",
            "--d-max",
            "3",
        ],
        vec!["measure", "--coeffs", "0,0;0,0;1,0", "--alpha", "0.1", "--n", "20000"],
        vec![
            "fiber",
            "--curve",
            circle.to_str().unwrap(),
            "--z",
            "0.3,0.2",
            "--M",
            "2",
            "--grid",
            "16",
            "--d-max",
            "3",
            "--e-max",
            "3",
        ],
        vec!["bishop", "--curve", cubic.to_str().unwrap(), "--d", "3..5", "--e", "3"],
        vec![
            "extremal",
            "--curve",
            circle.to_str().unwrap(),
            "--z",
            "0.5",
            "--w",
            "0",
            "--d",
            "3",
        ],
    ];
    for args in runs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut seq = vec!["--sequential"];
        seq.extend(&args);
        for (dir, argv) in [(a.path(), &args), (b.path(), &seq)] {
            let o = hullscope(dir, &[&["--seed", "11"][..], argv].concat());
            assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        }
        let (da, db) = (digest_dir(a.path()), digest_dir(b.path()));
        assert!(!da.is_empty());
        // the sequential flag is an execution knob and is not part of the config
        assert_eq!(da, db, "{args:?}");
    }
}

#[test]
fn extremal_json_schema() {
    let dir = tempfile::tempdir().unwrap();
    let c = curve("circle.json");
    let o = hullscope(
        dir.path(),
        &[
            "extremal",
            "--curve",
            c.to_str().unwrap(),
            "--z",
            "0.5",
            "--w",
            "1",
            "--d",
            "2",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&read(dir.path(), "extremal.json")).unwrap();
    assert_eq!(v["status"], "unbounded");
    assert_eq!(v["value"], "inf");
    assert_eq!(v["witness"]["grading"], "total");
}

#[test]
fn measure_needs_a_polynomial() {
    let dir = tempfile::tempdir().unwrap();
    let o = hullscope(dir.path(), &["measure", "--alpha", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_thread_count_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hullscope"))
        .args(["validate", curve("circle.json").to_str().unwrap()])
        .env("HULLSCOPE_THREADS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
