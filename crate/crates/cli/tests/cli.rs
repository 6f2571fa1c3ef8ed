use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn convexjet(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convexjet"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const QUADRATIC: &str = r#"{"dim":2,"points":[[0,0],[1,0],[0,1],[-1,-0.5]],"values":[0,0.5,0.5,0.625],"grads":[[0,0],[1,0],[0,1],[-1,-0.5]]}"#;
const TILTED: &str = r#"{"dim":2,"points":[[0,0],[0,0.25],[0,0.5],[0,0.75],[0,1]],"values":[0,0,0,0,0],"grads":[[0,0],[0.25,0],[0.5,0],[0.75,0],[1,0]]}"#;

#[test]
fn check_accepts_quadratic_jet() {
    let dir = TempDir::new().unwrap();
    let jet = write(dir.path(), "jet.json", QUADRATIC);
    let out = convexjet(&["check", "--jet", &jet], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("check.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["holds"], true);
    assert_eq!(report["cw1"]["holds"], true);
}

#[test]
fn check_refuses_tilted_segment_and_names_pair() {
    let dir = TempDir::new().unwrap();
    let jet = write(dir.path(), "jet.json", TILTED);
    let out = convexjet(&["check", "--jet", &jet, "--class", "c1"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("CW1") && stderr.contains("pair (0, 4)"),
        "{stderr}"
    );
    let report = json(&dir.path().join("check.json"));
    assert_eq!(report["c"]["holds"], true);
    assert_eq!(report["c"]["margin"], 0.0);
    assert_eq!(report["cw1"]["holds"], false);
}

#[test]
fn extend_refuses_tilted_segment() {
    let dir = TempDir::new().unwrap();
    let jet = write(dir.path(), "jet.json", TILTED);
    let out = convexjet(
        &["extend", "--jet", &jet, "--class", "c1", "--res", "21"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn quantitative_check_reports_constants() {
    let dir = TempDir::new().unwrap();
    let jet = write(dir.path(), "jet.json", QUADRATIC);
    let out = convexjet(
        &[
            "check",
            "--jet",
            &jet,
            "--class",
            "c1omega",
            "--omega",
            "holder:0.5",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("check.json"));
    assert_eq!(report["omega"]["kind"], "holder");
    assert!(report["seminorm"].is_object() && report["m_star"].is_object());
}

#[test]
fn invalid_configuration_exits_4() {
    let dir = TempDir::new().unwrap();
    let jet = write(dir.path(), "jet.json", QUADRATIC);
    let low = convexjet(&["extend", "--jet", &jet, "--res", "5"], dir.path());
    assert_eq!(low.status.code(), Some(4));
    let small_box = convexjet(&["extend", "--jet", &jet, "--box=0:0.5"], dir.path());
    assert_eq!(small_box.status.code(), Some(4));
    let bad_modulus = convexjet(
        &[
            "check",
            "--jet",
            &jet,
            "--class",
            "c1omega",
            "--omega",
            "holder:1.5",
        ],
        dir.path(),
    );
    assert_eq!(bad_modulus.status.code(), Some(4));
    let dup = write(
        dir.path(),
        "dup.json",
        r#"{"dim":1,"points":[[0],[0]],"values":[0,0],"grads":[[0],[0]]}"#,
    );
    assert_eq!(
        convexjet(&["check", "--jet", &dup], dir.path())
            .status
            .code(),
        Some(4)
    );
}

#[test]
fn extension_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let jet = write(dir.path(), "jet.json", QUADRATIC);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();
    assert_eq!(
        convexjet(&["extend", "--jet", &jet, "--res", "17"], &a)
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        convexjet(&["extend", "--jet", &jet, "--res", "17"], &b)
            .status
            .code(),
        Some(0)
    );
    for name in ["extension.json", "extension.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let csv = fs::read_to_string(a.join("extension.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x0,x1,value,g0,g1"));
    assert_eq!(csv.lines().count(), 1 + 17 * 17);
}

#[test]
fn envelope_of_double_well_flattens_the_wells() {
    let dir = TempDir::new().unwrap();
    let n = 41;
    let h = 4.0 / (n - 1) as f64;
    let mut csv = String::from("x0,value\n");
    for i in 0..n {
        let x = -2.0 + h * i as f64;
        csv.push_str(&format!("{x},{}\n", (x * x - 1.0).powi(2)));
    }
    let input = write(dir.path(), "grid.csv", &csv);
    let out = convexjet(&["envelope", "--input", &input], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("envelope.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x0,value,g0,contact"));
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let x = cols[0];
        if x.abs() < 1.0 - 1e-9 {
            assert!(cols[1].abs() <= 1e-12 && cols[3] == 0.0, "{line}");
        } else {
            assert!(
                (cols[1] - (x * x - 1.0).powi(2)).abs() <= 1e-12 && cols[3] == 1.0,
                "{line}"
            );
        }
    }
}

#[test]
fn whitney_writes_cube_table() {
    let dir = TempDir::new().unwrap();
    let set = write(
        dir.path(),
        "set.json",
        r#"{"kind":"points","dim":2,"points":[[0,0],[0.5,0.25]]}"#,
    );
    let out = convexjet(&["whitney", "--input", &set, "--box=-1:1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("whitney.json"));
    assert_eq!(report["invariants_hold"], true);
    let cubes = fs::read_to_string(dir.path().join("cubes.csv")).unwrap();
    assert_eq!(cubes.lines().next(), Some("c0,c1,side,generation"));
    assert_eq!(
        cubes.lines().count() as u64,
        1 + report["cubes"].as_u64().unwrap()
    );
}

#[test]
fn body_reconstructs_circle() {
    let dir = TempDir::new().unwrap();
    let pts: Vec<String> = (0..16)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / 16.0;
            format!("[{},{}]", a.cos(), a.sin())
        })
        .collect();
    let list = pts.join(",");
    let data = write(
        dir.path(),
        "body.json",
        &format!(r#"{{"points":[{list}],"normals":[{list}],"class":"c1"}}"#),
    );
    let out = convexjet(&["body", "--input", &data, "--res", "81"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let diag = json(&dir.path().join("body.json"));
    assert_eq!(diag["schema_version"], 1);
    assert!(diag["min_alignment"].as_f64().unwrap() >= 0.99);
    assert!(diag["contour_distance"].as_f64().unwrap() <= 3.0 * 0.05);
    let contour = fs::read_to_string(dir.path().join("contour.csv")).unwrap();
    assert_eq!(contour.lines().next(), Some("kind,id,x0,x1"));
}

#[test]
fn fixtures_match_expected_verdicts() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_convexjet"))
        .args(["fixtures", "--out"])
        .arg(dir.path())
        .env("CONVEXJET_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let table = fs::read_to_string(dir.path().join("fixtures.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(
        rows,
        [
            "five_point_abs,refuse,refuse,3,true",
            "max_of_three,pass,pass,0,true",
            "tilted_segment,refuse,refuse,3,true",
            "circle_body,pass,pass,0,true",
        ]
    );
    assert_eq!(json(&dir.path().join("fixtures.json"))["all_match"], true);
}
