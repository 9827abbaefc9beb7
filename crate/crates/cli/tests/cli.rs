use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ktplate_cli::commands::SERIES_HEADER;
use ktplate_cli::config::RunConfig;

fn ktplate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ktplate")).args(args).arg("--quiet").output().unwrap()
}

fn run_with(dir: &Path, cmd: &str, config: &str) -> (i32, std::path::PathBuf) {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let o = ktplate(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    (o.status.code().unwrap(), out)
}

const LINEAR: &str = "[basis]\nmodes = [8]\n[params]\n[initial]\npreset = \"random\"\namplitude = 0.5\nseed = 4\n\
                      [sim]\ndt = 1e-3\nt_end = 0.5\nscheme = \"linear-midpoint\"\n";

#[test]
fn linear_run_writes_series_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = run_with(tmp.path(), "simulate", LINEAR);
    assert_eq!(code, 0);
    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(lines.next(), Some(SERIES_HEADER));
    assert_eq!(lines.count(), 501);
    assert!(!series.contains('\r'));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["halt"], "Completed");
    assert!(summary["dissipation_residual"].as_f64().unwrap() <= 1e-10);
    assert!(summary["e1_final"].as_f64().unwrap() < summary["e1_initial"].as_f64().unwrap());
}

#[test]
fn summary_echoes_canonical_config() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = run_with(tmp.path(), "simulate", LINEAR);
    assert_eq!(code, 0);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let canonical = RunConfig::parse(LINEAR).unwrap().canonical();
    assert_eq!(summary["config"].as_str().unwrap(), canonical);
    assert_eq!(RunConfig::parse(&canonical).unwrap().canonical(), canonical);
}

#[test]
fn malformed_config_exits_one_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    for bad in [
        "[params]\nalpah = 1.0\n",
        "[basis]\nmodes = [8]\n",
        "[params]\n[sim]\ndt = -1.0\n",
        "[params]\n[nonlinearity]\npreset = \"sextic\"\n",
        "not toml at all [",
    ] {
        let (code, out) = run_with(tmp.path(), "simulate", bad);
        assert_eq!(code, 1, "{bad}");
        assert!(!out.exists(), "{bad}");
    }
    let o = ktplate(&["simulate", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(ktplate(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn softening_degeneracy_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[params]\n[nonlinearity]\npreset = \"cubic-softening\"\n\
               [initial]\npreset = \"single-mode\"\nmode = [1]\namplitude = 0.7\n[sim]\nt_end = 1.0\n";
    let (code, out) = run_with(tmp.path(), "simulate", cfg);
    assert_eq!(code, 2);
    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(!series.to_lowercase().contains("nan"));
    let (code, _) = run_with(tmp.path(), "jets", cfg);
    assert_eq!(code, 2);
}

#[test]
fn spectrum_has_negative_abscissas() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = run_with(tmp.path(), "spectrum", "[params]\n[spectrum]\nk_max = 8\n");
    assert_eq!(code, 0);
    let text = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "k,lambda,re1,im1,re2,im2,re3,im3,re4,im4,abscissa");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    for r in rows {
        let a: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!(a < 0.0);
    }
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = run_with(tmp.path(), "spectrum", "[params]\n[spectrum]\nk_max = 0\n");
    assert_eq!(code, 1);
    assert!(!out.join("spectrum.csv").exists());
}

#[test]
fn sweep_reproduces_the_four_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = run_with(tmp.path(), "sweep", "[params]\n");
    assert_eq!(code, 0);
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let (gamma, tau): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        let want = if gamma == 0.0 && tau > 0.0 { "damping-vanishes" } else { "uniformly-damped" };
        assert_eq!(r[4], want, "{r:?}");
    }
}

#[test]
fn jets_match_single_mode_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[basis]\nmodes = [4]\n[params]\ngamma = 0.5\n\
               [initial]\npreset = \"coefficients\"\nz = [0.2]\n";
    let (code, out) = run_with(tmp.path(), "jets", cfg);
    assert_eq!(code, 0);
    let jets: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("jets.json")).unwrap()).unwrap();
    let ztt = jets["z"][2][0].as_f64().unwrap();
    let l = PI * PI;
    let expected = -l * l / (1.0 + 0.5 * l) * 0.2;
    assert!((ztt / expected - 1.0).abs() <= 1e-12, "{ztt} vs {expected}");
    assert_eq!(jets["z"][2][1].as_f64().unwrap(), 0.0);

    let (code, out) = run_with(tmp.path(), "jets", "[params]\n");
    assert_eq!(code, 0);
    let jets: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("jets.json")).unwrap()).unwrap();
    let all_zero = ["z", "theta", "p"]
        .iter()
        .flat_map(|k| jets[*k].as_array().unwrap().iter().flat_map(|o| o.as_array().unwrap().iter()))
        .all(|v| v.as_f64() == Some(0.0));
    assert!(all_zero);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[params]\n[nonlinearity]\npreset = \"cubic-stiffening\"\n\
               [initial]\npreset = \"random\"\namplitude = 0.1\nseed = 9\n[sim]\nt_end = 0.3\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), cfg).unwrap();
    let c = tmp.path().join("c.toml");
    for d in [&a, &b] {
        let o = ktplate(&["simulate", "--config", c.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("series.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn check_detects_injected_fault() {
    let o = ktplate(&["check"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let o = ktplate(&["check", "--inject-fault", "af-sign"]);
    assert_eq!(o.status.code(), Some(5));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let failing: Vec<&str> = stdout.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failing.len(), 1);
    assert!(failing[0].contains("two-route AF"));
}
