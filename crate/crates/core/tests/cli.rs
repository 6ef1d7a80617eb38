use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use flatflow2d::io::Summary;
use flatflow2d::ClosedCurve;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flatflow2d"))
}

fn flatflow(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn summary(dir: &Path) -> Summary {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const CIRCLE: &str = r#"
n = 128
output_dir = "circle"
[initial_curve]
kind = "circle"
r = 1.0
[scheme]
h = 1e-3
T = 0.02
"#;

const ELLIPSE: &str = r#"
n = 128
[initial_curve]
kind = "ellipse"
a = 1.2
b = 0.8333333333333334
[scheme]
h = 1e-3
T = 0.03
snapshot_stride = 5
"#;

#[test]
fn circle_run_is_stationary() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", CIRCLE);
    let out = flatflow(dir.path(), &["run", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir.path().join("circle"));
    assert!(s.completed && s.exit_reason == "completed");
    assert!(s.hausdorff_to_initial < 1e-6);
    assert_eq!(s.steps_completed, 20);
}

#[test]
fn nonpositive_beta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.toml", &CIRCLE.replace("T = 0.02", "T = 0.02\nbeta = -0.1"));
    let out = flatflow(dir.path(), &["run", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scheme.beta"));
    assert!(!dir.path().join("circle").exists());
}

#[test]
fn ellipse_energy_column_is_monotone_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "e.toml", ELLIPSE);
    for out in ["a", "b"] {
        let o = flatflow(dir.path(), &["run", "--config", "e.toml", "--out", out, "--svg"]);
        assert_eq!(o.status.code(), Some(0));
    }
    let a = fs::read(dir.path().join("a/diagnostics.jsonl")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/diagnostics.jsonl")).unwrap());
    let f: Vec<f64> = String::from_utf8(a)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["F_total"].as_f64().unwrap())
        .collect();
    assert_eq!(f.len(), 31);
    // the first record holds P_φ + 𝓔, later ones include the dissipation
    let p: Vec<f64> = fs::read_to_string(dir.path().join("a/diagnostics.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["P_phi"].as_f64().unwrap())
        .collect();
    assert!(p.windows(2).all(|w| w[1] <= w[0]));
    assert!(f[1..].iter().zip(&p).all(|(total, prev)| *total <= *prev));
    assert!(dir.path().join("a/frames.svg").exists());
    let snaps: Vec<_> = fs::read_dir(dir.path().join("a/snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 7);
}

#[test]
fn saturation_exits_with_halt_code() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "s.toml",
        "n = 128\n[initial_curve]\nkind = \"ellipse\"\na = 1.6\nb = 0.625\n[scheme]\nh = 0.05\nbeta = 2e-3\nT = 1.0\n",
    );
    let out = flatflow(dir.path(), &["run", "--config", "s.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&dir.path().join("o"));
    assert_eq!(s.exit_reason, "constraint_saturation");
    let jsonl = fs::read_to_string(dir.path().join("o/diagnostics.jsonl")).unwrap();
    let last: serde_json::Value = serde_json::from_str(jsonl.lines().last().unwrap()).unwrap();
    assert_eq!(last["halt"]["kind"], "constraint_saturation");
}

#[test]
fn compare_with_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "e.toml", &ELLIPSE.replace("T = 0.03", "T = 0.01"));
    assert_eq!(flatflow(dir.path(), &["run", "--config", "e.toml", "--out", "t"]).status.code(), Some(0));
    write(dir.path(), "cmp.toml", &format!("{}\n[compare]\na = \"t\"\nb = \"t\"\n", ELLIPSE));
    let out = flatflow(dir.path(), &["compare", "--config", "cmp.toml", "--out", "c"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("c/compare.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let cols: Vec<f64> = r.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols[0], cols[1]);
        assert!(cols[2] < 1e-12 && cols[3] == 0.0, "{r}");
    }
    write(dir.path(), "missing.toml", &format!("{}\n[compare]\na = \"t\"\nb = \"nope\"\n", ELLIPSE));
    assert_eq!(flatflow(dir.path(), &["compare", "--config", "missing.toml"]).status.code(), Some(1));
}

#[test]
fn wulff_euclidean_is_unit_circle() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "w.toml", "n = 64\n[initial_curve]\nkind = \"wulff\"\n");
    assert_eq!(flatflow(dir.path(), &["wulff", "--config", "w.toml", "--out", "w"]).status.code(), Some(0));
    let c = ClosedCurve::from_json(&fs::read_to_string(dir.path().join("w/wulff.json")).unwrap()).unwrap();
    assert_eq!(c.n(), 64);
    assert!(c.nodes().iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
}

#[test]
fn reference_command() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", &format!("{CIRCLE}\n[reference]\nT = 0.01\n"));
    let out = flatflow(dir.path(), &["reference", "--config", "c.toml", "--out", "r", "--stride", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&dir.path().join("r"));
    assert_eq!(s.solver, "reference");
    assert!(s.hausdorff_to_initial < 1e-8);
}

#[test]
fn sweep_fans_out_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ELLIPSE.replace("T = 0.03", "T = 0.008") + "[sweep]\nh = [2e-3, 4e-3]\nbeta = [0.1, 0.05]\n";
    write(dir.path(), "sw.toml", &cfg);
    let out = bin()
        .current_dir(dir.path())
        .env("FLATFLOW_THREADS", "3")
        .args(["run", "--config", "sw.toml", "--out", "sw"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    // run_002 is (h, β) = (4e-3, 0.1); a direct run must match byte for byte
    write(dir.path(), "one.toml", &ELLIPSE.replace("T = 0.03", "T = 0.008").replace("h = 1e-3", "h = 4e-3"));
    assert_eq!(flatflow(dir.path(), &["run", "--config", "one.toml", "--out", "one"]).status.code(), Some(0));
    for i in 0..4 {
        assert!(dir.path().join(format!("sw/run_{i:03}/summary.json")).exists());
    }
    assert_eq!(
        fs::read(dir.path().join("sw/run_002/diagnostics.jsonl")).unwrap(),
        fs::read(dir.path().join("one/diagnostics.jsonl")).unwrap()
    );
}

#[test]
fn verify_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = flatflow(dir.path(), &["verify", "--out", "v"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report = fs::read_to_string(dir.path().join("v/verify_report.txt")).unwrap();
    assert!(report.lines().count() >= 12);
    assert!(report.lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(flatflow(dir.path(), &["run"]).status.code(), Some(1));
    assert_eq!(flatflow(dir.path(), &["run", "--config", "absent.toml"]).status.code(), Some(1));
    assert_eq!(flatflow(dir.path(), &["explode"]).status.code(), Some(1));
    assert_eq!(flatflow(dir.path(), &["--help"]).status.code(), Some(0));
    write(dir.path(), "c.toml", CIRCLE);
    assert_eq!(flatflow(dir.path(), &["run", "--config", "c.toml", "--stride", "0"]).status.code(), Some(1));
}
