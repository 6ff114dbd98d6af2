use std::path::Path;
use std::process::{Command, Output};

fn indblock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_indblock"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn quad_flags(rounds: &'static str) -> Vec<&'static str> {
    vec!["--problem", "quadratic", "--d", "12", "--n", "3", "--o", "4", "--x0", "1", "--rounds", rounds]
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn run_writes_traces_and_a_reproducible_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let mut args = vec!["run", "-o", out.to_str().unwrap(), "--method", "ibcd,isaga_distributed", "--tau", "0.25", "--seeds", "2"];
    args.extend(quad_flags("40"));
    let o = indblock(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["00_ibcd_seed0.csv", "00_ibcd_seed1.csv", "00_ibcd_mean.csv", "01_isaga_distributed_mean.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest = read(&out, "manifest.cfg");
    for key in ["derived.0.L", "derived.0.mu", "derived.0.gamma", "derived.1.lyapunov_c"] {
        assert!(manifest.contains(key), "{key} missing from\n{manifest}");
    }

    let again = dir.path().join("b");
    let o = indblock(&["run", "-c", out.join("manifest.cfg").to_str().unwrap(), "-o", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["00_ibcd_seed1.csv", "01_isaga_distributed_seed0.csv", "01_isaga_distributed_mean.csv"] {
        assert_eq!(read(&out, f), read(&again, f), "{f}");
    }
}

#[test]
fn infeasible_tau_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = indblock(&[
        "run", "-o", dir.path().to_str().unwrap(), "--problem", "quad", "--d", "100", "--n", "30", "--method", "ibcd",
        "--tau", "0.0333",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("3/100") && err.contains("4/100"), "{err}");
}

#[test]
fn verify_reports_json_and_rejects_unknown_suites() {
    let o = indblock(&["verify", "comm"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["suite"], "comm");
    assert_eq!(report["pass"], true);
    assert_eq!(report["checks"][0]["measured"], 0.99);

    let o = indblock(&["verify", "speed"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_plan_gives_equal_columns_for_gd_and_full_ibcd() {
    let mut args = vec!["compare", "--method", "gd,ibcd", "--tau", "1", "--seeds", "2"];
    args.extend(quad_flags("40"));
    let o = indblock(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "round,gd_n0_tau1.0,gd_n0_tau1.0_se,ibcd_n0_tau1.0,ibcd_n0_tau1.0_se");
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], f[3]);
        rows += 1;
    }
    assert_eq!(rows, 41);
}

#[test]
fn compare_files_checks_round_grids() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short");
    let long = dir.path().join("long");
    for (out, rounds) in [(&short, "10"), (&long, "20")] {
        let mut args = vec!["run", "-o", out.to_str().unwrap(), "--method", "gd", "--seeds", "2"];
        args.extend(quad_flags(rounds));
        assert!(indblock(&args).status.success());
    }
    let a = short.join("00_gd_mean.csv");
    let b = long.join("00_gd_mean.csv");
    let same = indblock(&["compare", a.to_str().unwrap(), a.to_str().unwrap(), "--metric", "dist_sq"]);
    assert!(same.status.success());
    let text = String::from_utf8(same.stdout).unwrap();
    assert!(text.starts_with("round,00_gd_mean,00_gd_mean_se,00_gd_mean#2,00_gd_mean#2_se\n"));

    let o = indblock(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("round grids do not match"));
}
