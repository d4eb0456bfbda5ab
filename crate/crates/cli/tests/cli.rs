use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn spherepp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spherepp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn invalid_delta_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let out = spherepp(
        &["simulate", "--model", "multiquadric", "--tau", "1", "--delta", "1.5", "--eta", "2", "--seed", "1", "--out", "sim"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta must lie in (0,1)"));
    assert!(!dir.path().join("sim").exists());

    fs::write(dir.path().join("bad.json"), r#"{"model": "multiquadric", "tau": 1, "delta": 1.5, "eta": 2}"#).unwrap();
    let out = spherepp(&["simulate", "--spec", "bad.json", "--seed", "1", "--out", "sim"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta must lie in (0,1)"));
}

#[test]
fn too_intense_model_names_the_bound() {
    let dir = TempDir::new().unwrap();
    let out = spherepp(
        &["simulate", "--model", "multiquadric", "--tau", "10", "--delta", "0.68", "--eta", "1e6", "--out", "sim"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eta"));
}

#[test]
fn most_repulsive_replicates_and_manifest() {
    let dir = TempDir::new().unwrap();
    ok(&spherepp(
        &["simulate", "--model", "most_repulsive", "--m", "14", "--n-reps", "3", "--seed", "42", "--out", "sim"],
        dir.path(),
    ));
    let manifest = json(&dir.path().join("sim/manifest.json"));
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["replicates"], 3);
    assert_eq!(manifest["model"]["model"], "most_repulsive");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
    for r in 0..3 {
        assert_eq!(manifest["realized"][r]["n"], 225);
        let p = json(&dir.path().join(format!("sim/replicate_{r:04}.json")));
        assert_eq!(p["points"].as_array().unwrap().len(), 225);
    }
}

#[test]
fn outputs_are_reproducible_and_independent_of_jobs() {
    let dir = TempDir::new().unwrap();
    let base = ["simulate", "--model", "multiquadric", "--tau", "10", "--delta", "0.68", "--eta", "60", "--n-reps", "4", "--seed", "9"];
    ok(&spherepp(&[&base[..], &["--jobs", "1", "--out", "a"]].concat(), dir.path()));
    ok(&spherepp(&[&base[..], &["--jobs", "3", "--out", "b"]].concat(), dir.path()));
    for r in 0..4 {
        let name = format!("replicate_{r:04}.json");
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn generated_seed_is_recorded_and_reproduces() {
    let dir = TempDir::new().unwrap();
    ok(&spherepp(&["simulate", "--model", "poisson", "--rho", "3", "--out", "a"], dir.path()));
    let seed = json(&dir.path().join("a/manifest.json"))["seed"].as_u64().unwrap();
    ok(&spherepp(
        &["simulate", "--model", "poisson", "--rho", "3", "--seed", &seed.to_string(), "--out", "b"],
        dir.path(),
    ));
    assert_eq!(
        fs::read(dir.path().join("a/replicate_0000.json")).unwrap(),
        fs::read(dir.path().join("b/replicate_0000.json")).unwrap()
    );
}

#[test]
fn chi_square_thinning_reduces_counts() {
    let dir = TempDir::new().unwrap();
    ok(&spherepp(
        &["simulate", "--model", "most_repulsive", "--m", "19", "--n-reps", "5", "--seed", "3", "--thin-kappa", "8", "--out", "t"],
        dir.path(),
    ));
    let manifest = json(&dir.path().join("t/manifest.json"));
    let total: u64 = (0..5).map(|r| manifest["realized"][r]["n"].as_u64().unwrap()).sum();
    assert!(total < 5 * 400 * 2 / 3, "total {total}");
}

const ANTIPODAL: &str = r#"{"points": [[0, 0, 1], [0, 0, -1]]}"#;

#[test]
fn summary_of_antipodal_pair() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("pair.json"), ANTIPODAL).unwrap();
    let args = ["summary", "pair.json", "--stat", "K,G", "--tmax", "180", "--grid-size", "3"];
    ok(&spherepp(&[&args[..], &["--out", "rad"]].concat(), dir.path()));
    ok(&spherepp(&[&args[..], &["--out", "deg", "--angle-degrees"]].concat(), dir.path()));

    let rad = csv_rows(&fs::read_to_string(dir.path().join("rad/pair.K.csv")).unwrap());
    let values: Vec<f64> = rad.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(values[..2], [0.0, 0.0]);
    assert!((values[2] - 4.0 * PI).abs() < 1e-12);
    assert!((rad[2][0].parse::<f64>().unwrap() - PI).abs() < 1e-15);

    let deg = csv_rows(&fs::read_to_string(dir.path().join("deg/pair.K.csv")).unwrap());
    assert_eq!(deg[1][0], "90");
    assert_eq!(deg[2][0], "180");
    for (r, d) in rad.iter().zip(&deg) {
        assert_eq!(r[1..], d[1..]);
    }

    let g = csv_rows(&fs::read_to_string(dir.path().join("rad/pair.G.csv")).unwrap());
    let g: Vec<&str> = g.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(g, ["0", "0", "1"]);
    assert!(dir.path().join("rad/pooled.K.csv").exists());
}

#[test]
fn summary_long_format_and_failures() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("pair.json"), ANTIPODAL).unwrap();
    fs::write(dir.path().join("empty.json"), r#"{"points": []}"#).unwrap();
    ok(&spherepp(
        &["summary", "pair.json", "empty.json", "--stat", "G", "--long", "--grid-size", "5", "--out", "s"],
        dir.path(),
    ));
    let pooled = fs::read_to_string(dir.path().join("s/pooled.csv")).unwrap();
    assert!(pooled.starts_with("t,value,statistic,estimator,normalization,se,n\n"));
    assert!(csv_rows(&pooled).iter().all(|r| r[6] == "1"));

    let out = spherepp(&["summary", "empty.json", "--stat", "G", "--out", "e"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = spherepp(&["summary", "pair.json", "--stat", "X", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("x").exists());
}

#[test]
fn envelope_of_most_repulsive_against_poisson() {
    let dir = TempDir::new().unwrap();
    ok(&spherepp(&["simulate", "--model", "most_repulsive", "--m", "14", "--seed", "5", "--out", "sim"], dir.path()));
    let stdout = ok(&spherepp(
        &["envelope", "--data", "sim/replicate_0000.json", "--nsim", "99", "--seed", "6", "--out", "env"],
        dir.path(),
    ));
    assert!(stdout.contains("envelope"));
    let result = json(&dir.path().join("env/envelope.json"));
    assert_eq!(result["statistic"], "K,G");
    assert_eq!(result["p_upper"], 0.01);
    assert!(!result["exit_points"].as_array().unwrap().is_empty());
    let csv = fs::read_to_string(dir.path().join("env/envelope.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 128);
    let manifest = json(&dir.path().join("env/manifest.json"));
    assert_eq!(manifest["seed"], 6);
    assert_eq!(manifest["model"]["model"], "poisson");
}

#[test]
fn envelope_input_errors() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("pair.json"), ANTIPODAL).unwrap();
    let cases: [&[&str]; 3] = [
        &["--model", "multiquadric", "--tau", "1", "--delta", "1.5", "--eta", "2"],
        &["--stats", "K_inhom"],
        &["--nsim", "19"],
    ];
    for extra in cases {
        let args = [&["envelope", "--data", "pair.json", "--seed", "1", "--out", "env"][..], extra].concat();
        let out = spherepp(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{extra:?}");
        assert!(!dir.path().join("env").exists());
    }
}

#[test]
fn pointwise_envelope_runs() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("pair.json"), ANTIPODAL).unwrap();
    ok(&spherepp(
        &["envelope", "--data", "pair.json", "--stats", "K", "--pointwise", "--nsim", "19", "--seed", "1", "--out", "env"],
        dir.path(),
    ));
    let result = json(&dir.path().join("env/envelope.json"));
    assert_eq!(result["method"], "pointwise");
    assert!((result["alpha"].as_f64().unwrap() - 0.1).abs() < 1e-12);
}

#[test]
fn theory_curves() {
    let dir = TempDir::new().unwrap();
    let poisson = ok(&spherepp(&["theory", "--model", "poisson", "--rho", "1", "--stat", "K", "--grid-size", "5"], dir.path()));
    let last = csv_rows(&poisson).pop().unwrap();
    assert_eq!(last[2], "K");
    assert!((last[1].parse::<f64>().unwrap() - 4.0 * PI).abs() < 1e-12);

    let mq = ["theory", "--model", "multiquadric", "--tau", "10", "--delta", "0.68", "--eta", "225", "--grid-size", "19"];
    let closed = csv_rows(&ok(&spherepp(&mq, dir.path())));
    let numeric = csv_rows(&ok(&spherepp(&[&mq[..], &["--numeric"]].concat(), dir.path())));
    for (c, n) in closed.iter().zip(&numeric) {
        let (c, n): (f64, f64) = (c[1].parse().unwrap(), n[1].parse().unwrap());
        assert!((c - n).abs() < 1e-6, "{c} vs {n}");
    }

    let spectrum = ok(&spherepp(
        &["theory", "--model", "inverse_multiquadric", "--delta", "0.5", "--eta", "2", "--stat", "spectrum", "--out", "s.csv"],
        dir.path(),
    ));
    assert!(spectrum.is_empty());
    let rows = csv_rows(&fs::read_to_string(dir.path().join("s.csv")).unwrap());
    for r in rows.iter().take(30) {
        let l: i32 = r[0].parse().unwrap();
        let expected = 2.0 * 0.5f64.powi(l) * 0.5 / (2 * l + 1) as f64;
        assert!((r[1].parse::<f64>().unwrap() - expected).abs() < 1e-15);
    }

    let out = spherepp(&["theory", "--model", "poisson", "--rho", "1", "--stat", "spectrum"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn projection_rows() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("p.json"), r#"{"points": [[0, 0, 1], [1, 0, 0], [0, 0.6, -0.8]]}"#).unwrap();
    let rows = csv_rows(&ok(&spherepp(&["project", "p.json"], dir.path())));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], ["N", "0", "0"]);
    let r = |row: &Vec<String>| row[1].parse::<f64>().unwrap().hypot(row[2].parse().unwrap());
    assert!((r(&rows[1]) - 1.0).abs() < 1e-15);
    assert_eq!(rows[2][0], "S");
    assert!((r(&rows[2]) - 0.2f64.sqrt()).abs() < 1e-15);

    let out = spherepp(&["project", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
