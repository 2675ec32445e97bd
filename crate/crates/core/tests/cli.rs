use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn membranes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_membranes"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn solve(config: &Path, out: &Path) -> Output {
    membranes(&["solve", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

const SMALL: &str = r#"
[problem]
mode = "two_membranes"
nodes = 33
kernel1 = { kind = "fractional", s = 0.35 }
kernel2 = { kind = "fractional", s = 0.65 }
f1 = "2 + x"
f2 = "-1"
exterior1 = "0.2"
exterior2 = "-0.2"

[analysis]
exponent_anchors = "none"
"#;

#[test]
fn zero_config_succeeds_and_lists_its_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = solve(&config_path("zero.toml"), tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = json(&tmp.path().join("manifest.json"));
    assert_eq!(manifest["exit_code"], 0);
    assert!(manifest["assertions"].as_array().unwrap().iter().all(|a| a["passed"] == true));
    let files = manifest["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["name"] == "solution.csv"));
    for f in files {
        let bytes = fs::read(tmp.path().join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    let csv = fs::read_to_string(tmp.path().join("solution.csv")).unwrap();
    assert!(csv.starts_with("x,u1,u2,contact"));
    assert_eq!(csv.lines().count(), 34);
}

#[test]
fn classical_obstacle_config_finds_the_free_boundary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = solve(&config_path("classical_obstacle.toml"), tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&tmp.path().join("report.json"));
    let h = 2.0 / 258.0;
    let xs: Vec<f64> = report["free_boundary"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p[0].as_f64().unwrap())
        .collect();
    assert_eq!(xs.len(), 2, "{xs:?}");
    assert!((xs[0] + 0.5).abs() <= 2.0 * h && (xs[1] - 0.5).abs() <= 2.0 * h, "{xs:?}");
}

#[test]
fn reversed_orders_are_warned_about_in_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("s = 0.35", "s = 0.8");
    let o = solve(&write_config(tmp.path(), &text), &tmp.path().join("out"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = json(&tmp.path().join("out/manifest.json"));
    let warnings = manifest["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("s1 > s2")), "{warnings:?}");
}

#[test]
fn malformed_configs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = solve(&write_config(tmp.path(), &SMALL.replace("f2 = \"-1\"", "f2 = \"-1")), &tmp.path().join("a"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
    let o = solve(&write_config(tmp.path(), &SMALL.replace("nodes = 33", "nodez = 33")), &tmp.path().join("b"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nodez"), "{}", stderr(&o));
    let o = solve(&write_config(tmp.path(), &SMALL.replace("2 + x", "2 + sqr(x)")), &tmp.path().join("c"));
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = solve(&tmp.path().join("missing.toml"), &tmp.path().join("d"));
    assert_eq!(code(&o), 2);
}

#[test]
fn iteration_cap_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[solver]\nmethod = \"projected_gradient\"\nmax_iters = 1\n");
    let o = solve(&write_config(tmp.path(), &text), &tmp.path().join("out"));
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(json(&tmp.path().join("out/manifest.json"))["exit_code"], 3);
}

#[test]
fn failing_assertion_exits_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[analysis.assert]\nmax_abs_solution = 1e-12\n");
    let o = solve(&write_config(tmp.path(), &text), &tmp.path().join("out"));
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let manifest = json(&tmp.path().join("out/manifest.json"));
    assert!(manifest["assertions"].as_array().unwrap().iter().any(|a| a["passed"] == false));
}

#[test]
fn repeated_runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&solve(&config, &a)), 0);
    assert_eq!(code(&solve(&config, &b)), 0);
    assert_eq!(fs::read(a.join("solution.csv")).unwrap(), fs::read(b.join("solution.csv")).unwrap());
    let (ma, mb) = (json(&a.join("manifest.json")), json(&b.join("manifest.json")));
    assert_eq!(ma["files"], mb["files"]);
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
}

#[test]
fn single_cell_sweep_equals_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let run = tmp.path().join("run");
    assert_eq!(code(&solve(&config, &run)), 0);
    let swept = tmp.path().join("sweep");
    let o = membranes(&[
        "sweep",
        config.to_str().unwrap(),
        "--grid",
        "problem.kernel1.s=0.35",
        "--out",
        swept.to_str().unwrap(),
        "--workers",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(run.join("solution.csv")).unwrap(),
        fs::read(swept.join("cell_000/solution.csv")).unwrap()
    );
    let summary = fs::read_to_string(swept.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn unknown_sweep_parameter_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("sweep");
    let o = membranes(&["sweep", config.to_str().unwrap(), "--grid", "problem.kernel3.s=0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown parameter"), "{}", stderr(&o));
}

#[test]
fn exponent_command_at_auto_and_given_points() {
    let tmp = tempfile::tempdir().unwrap();
    let config = config_path("fractional_obstacle.toml");
    let auto = tmp.path().join("auto");
    let o = membranes(&["exponent", config.to_str().unwrap(), "--at", "auto", "--out", auto.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fits = json(&auto.join("report.json"))["exponents"].clone();
    let fits = fits.as_array().unwrap();
    assert_eq!(fits.len(), 2);
    for k in 0..2 {
        assert!(auto.join(format!("exponent_{k}_1.json")).exists() && auto.join(format!("exponent_{k}_1.csv")).exists());
    }
    let x0 = fits[1]["anchor"][0].as_f64().unwrap();
    let given = tmp.path().join("given");
    let at = format!("{x0:?}");
    let o = membranes(&["exponent", config.to_str().unwrap(), "--at", &at, "--out", given.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(auto.join("exponent_1_1.json")).unwrap(), fs::read(given.join("exponent_0_1.json")).unwrap());
    let o = membranes(&["exponent", config.to_str().unwrap(), "--at", "0.1;x", "--out", given.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn frequency_command_on_the_fractional_obstacle() {
    let tmp = tempfile::tempdir().unwrap();
    let o = membranes(&[
        "frequency",
        config_path("fractional_obstacle.toml").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fr = json(&tmp.path().join("frequency.json"));
    assert!(fr["phi"].as_array().unwrap().len() >= 6);
    assert!(tmp.path().join("frequency.csv").exists());
}

#[test]
fn sweep_over_the_second_order_orders_the_exponents() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let o = membranes(&[
        "sweep",
        config_path("two_membranes.toml").to_str().unwrap(),
        "--grid",
        "problem.kernel2.s=0.5,0.6,0.7,0.8,0.9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(out.join("summary.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "exponent_2").unwrap();
    let values: Vec<f64> = reader.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(values.len(), 5);
    for w in values.windows(2) {
        assert!(w[1] >= w[0], "{values:?}");
    }
}
