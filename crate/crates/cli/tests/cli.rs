use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn penrose(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penrose"))
        .args(args)
        .env_remove("PENROSE_OUT_DIR")
        .env_remove("PENROSE_WORKERS")
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    scenarios().join(name).display().to_string()
}

fn json(text: &[u8]) -> serde_json::Value {
    serde_json::from_slice(text).expect("valid JSON")
}

#[test]
fn strict_schwarzschild_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = penrose(&["verify", &scenario("schwarzschild.toml"), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&std::fs::read(dir.path().join("schwarzschild.report.json")).unwrap());
    assert_eq!(report["verdict"], "PASS");
    assert_eq!(report["capacity_path"], "radial");
    for key in ["m_minus_C_g", "C_g_minus_C_flat", "C_flat_minus_rhs_vol"] {
        assert!(report["margins"][key].as_f64().unwrap() >= -1e-6);
    }
    assert_eq!(report["quantities"]["rhs_vol"], 1.0);
    let timings = json(&std::fs::read(dir.path().join("schwarzschild.timings.json")).unwrap());
    assert!(timings["total"].as_f64().unwrap() >= 0.0);
    assert!(report.get("total").is_none());
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let a = penrose(&["verify", &scenario("schwarzschild_5d.toml")]);
    let b = penrose(&["verify", &scenario("schwarzschild_5d.toml")]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn flat_ball_is_a_hypothesis_failure() {
    let o = penrose(&["verify", &scenario("flat_ball.toml")]);
    assert_eq!(o.status.code(), Some(2));
    let report = json(&o.stdout);
    assert_eq!(report["hypotheses"]["minimal_boundary"]["ok"], false);
    assert_eq!(report["verdict"], "HYPOTHESIS_FAILURE");
    assert_eq!(report["quantities"]["m"], 0.0);

    let strict = penrose(&["--mode", "strict", "verify", &scenario("flat_ball.toml")]);
    assert_eq!(strict.status.code(), Some(2));
    assert!(json(&strict.stdout)["quantities"].is_null());
}

#[test]
fn outer_sphere_reports_the_weaker_bound() {
    let o = penrose(&["verify", &scenario("schwarzschild_outer.toml")]);
    assert_eq!(o.status.code(), Some(2));
    let report = json(&o.stdout);
    assert_eq!(report["quantities"]["rhs_vol"], 2.0);
    let notes = report["notes"].as_array().unwrap();
    assert!(notes.iter().any(|n| n.as_str().unwrap().contains("weaker")));
}

#[test]
fn input_errors_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"x\"\ndim = 2\n[domain]\nkind = \"ball\"\nradius = 1.0\n[factor]\nfamily = \"flat\"\n")
        .unwrap();
    let o = penrose(&["verify", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:2:7: dim: dimension must be >= 3"), "{err}");

    let charge = dir.path().join("charge.toml");
    std::fs::write(
        &charge,
        "name = \"x\"\ndim = 3\n[domain]\nkind = \"ball\"\nradius = 1.0\n[factor]\nfamily = \"multipole\"\npoles = [{ center = [0.0, 0.0, 0.0], charge = -1.0 }]\n",
    )
    .unwrap();
    let o = penrose(&["verify", charge.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("factor.poles[0].charge"));

    assert_eq!(penrose(&["verify", "/nonexistent.toml"]).status.code(), Some(4));
    assert_eq!(penrose(&["verify", &scenario("flat_ball.toml"), "--bogus"]).status.code(), Some(4));
    assert_eq!(penrose(&["--mode", "lenient", "verify", &scenario("flat_ball.toml")]).status.code(), Some(4));
    assert_eq!(penrose(&["--help"]).status.code(), Some(0));
}

#[test]
fn mass_sweep_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = penrose(&[
        "sweep",
        &scenario("schwarzschild_horizon.toml"),
        "--param",
        "factor.mass",
        "--values",
        "1/2,1,2,4",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("schwarzschild_horizon.sweep.csv")).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for (row, m) in rows.iter().zip([0.5, 1.0, 2.0, 4.0]) {
        assert_eq!(row[0].parse::<f64>().unwrap(), m);
        assert_eq!(row[col("rhs_vol")].parse::<f64>().unwrap(), m / 2.0);
        assert_eq!(row[col("verdict")], "PASS");
        let c_g: f64 = row[col("C_g")].parse().unwrap();
        assert!((c_g / m - 1.0).abs() < 1e-6);
    }
}

#[test]
fn sweeps_with_bad_rows_and_no_rows() {
    let o = penrose(&["sweep", &scenario("schwarzschild_horizon.toml"), "--param", "factor.mass", "--values", "2,-1"]);
    assert_eq!(o.status.code(), Some(4));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(2).unwrap().contains("must be positive"));

    let o = penrose(&["sweep", &scenario("schwarzschild_horizon.toml"), "--param", "factor.mass", "--values", ""]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 1);
}

#[test]
fn workers_from_the_environment_do_not_change_results() {
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_penrose"))
            .args(["sweep", &scenario("schwarzschild_horizon.toml"), "--param", "factor.mass", "--values", "1,2,3"])
            .env("PENROSE_WORKERS", workers)
            .env_remove("PENROSE_OUT_DIR")
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn out_flag_takes_precedence_over_the_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_penrose"))
        .args(["mass", &scenario("schwarzschild.toml"), "--out", flag_dir.path().to_str().unwrap()])
        .env("PENROSE_OUT_DIR", env_dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.path().join("schwarzschild.mass.json").exists());
    assert!(!env_dir.path().join("schwarzschild.mass.json").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_penrose"))
        .args(["mass", &scenario("schwarzschild.toml")])
        .env("PENROSE_OUT_DIR", env_dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let mass = json(&std::fs::read(env_dir.path().join("schwarzschild.mass.json")).unwrap());
    assert!((mass["estimate"]["value"].as_f64().unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn closed_form_table() {
    let o = penrose(&["schwarzschild", "--n", "5", "--m", "2,7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split_whitespace().map(|v| v.parse().unwrap()).collect();
    // n, m, r_h, area, volume, rhs_rpi, rhs_vol, C_flat
    assert_eq!(row[..3], [5.0, 2.0, 1.0]);
    assert!((row[5] - 2.0).abs() < 1e-8 && (row[6] - 1.0).abs() < 1e-8);
    assert_eq!(text.lines().count(), 3);
    assert_eq!(penrose(&["schwarzschild", "--n", "2"]).status.code(), Some(4));
}

#[test]
fn capacity_and_symmetrize_on_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = penrose(&["--resolution", "8", "capacity", &scenario("flat_ball.toml"), "--metric", "flat"]);
    assert_eq!(o.status.code(), Some(0));
    let c = json(&o.stdout);
    assert_eq!(c["path"], "radial");
    assert!((c["C_flat"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-8);

    let o = penrose(&["--resolution", "8", "symmetrize", &scenario("flat_ball.toml"), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&std::fs::read(dir.path().join("flat_ball.symmetrize.json")).unwrap());
    let (bound, c_flat) = (s["bound"]["value"].as_f64().unwrap(), s["C_flat"].as_f64().unwrap());
    assert!(bound <= c_flat + 0.05 && bound > 0.8, "{bound} vs {c_flat}");
    let profile = std::fs::read_to_string(dir.path().join("flat_ball.profile.csv")).unwrap();
    assert!(profile.lines().count() > 10);
    assert!(dir.path().join("flat_ball.levels.csv").exists());
}
