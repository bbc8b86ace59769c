use std::path::{Path, PathBuf};

use serde_json::Value;
use ssblow_cli::run;

fn ssblow(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["ssblow".to_owned(), "--out".to_owned(), out.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    run(argv)
}

fn only_run(root: &Path, prefix: &str) -> PathBuf {
    let dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix))
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn propagate_at_zero_time_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(ssblow(tmp.path(), &["propagate", "--t", "0", "--n", "128", "--half-width", "12"]), 0);
    let dir = only_run(tmp.path(), "propagate-");
    let input = std::fs::read(dir.join("input.csv")).unwrap();
    assert_eq!(input, std::fs::read(dir.join("output.csv")).unwrap());

    // feeding the output back in reproduces it byte for byte
    let again = tmp.path().join("second");
    let csv = dir.join("output.csv");
    assert_eq!(ssblow(&again, &["propagate", "--t", "0", "--input", csv.to_str().unwrap()]), 0);
    let dir2 = only_run(&again, "propagate-");
    assert_eq!(input, std::fs::read(dir2.join("output.csv")).unwrap());
    let manifest = json(dir2.join("manifest.json"));
    assert!(manifest["provenance"]["input"]["sha256"].is_string());
}

#[test]
fn manifest_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["propagate", "--t", "0.3", "--b", "0.5", "--n", "128", "--half-width", "16"];
    assert_eq!(ssblow(a.path(), &args), 0);
    assert_eq!(ssblow(b.path(), &args), 0);
    let da = only_run(a.path(), "propagate-");
    let db = only_run(b.path(), "propagate-");
    assert_eq!(da.file_name(), db.file_name());
    for f in ["manifest.json", "output.csv", "summary.json"] {
        assert_eq!(std::fs::read(da.join(f)).unwrap(), std::fs::read(db.join(f)).unwrap(), "{f}");
    }
    let m = json(da.join("manifest.json"));
    assert_eq!(m["command"], "propagate");
    assert_eq!(m["config"]["t"], 0.3);
    assert!(m["files"]["output.csv"].is_string());
}

#[test]
fn config_file_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "n = 64\nhalf_width = 10.0\n[propagate]\nt = 0.25\n").unwrap();
    let out = tmp.path().join("runs");
    let c = cfg.to_str().unwrap();
    assert_eq!(ssblow(&out, &["--config", c, "propagate", "--b", "2"]), 0);
    let m = json(only_run(&out, "propagate-").join("manifest.json"));
    assert_eq!(m["config"]["t"], 0.25);
    assert_eq!(m["config"]["n"], 64);
    assert_eq!(m["config"]["b"], 2.0);

    let out2 = tmp.path().join("runs2");
    assert_eq!(ssblow(&out2, &["--config", c, "propagate", "--t", "0.1"]), 0);
    let m = json(only_run(&out2, "propagate-").join("manifest.json"));
    assert_eq!(m["config"]["t"], 0.1);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(ssblow(tmp.path(), &["propagate", "--no-such-flag"]), 1);
    assert_eq!(ssblow(tmp.path(), &["frobnicate"]), 1);
    assert_eq!(ssblow(tmp.path(), &["propagate", "--n", "100"]), 1);
    assert_eq!(ssblow(tmp.path(), &["profile", "--d", "1", "--p", "3"]), 1);
    assert_eq!(ssblow(tmp.path(), &["--help"]), 0);
    let missing = tmp.path().join("absent.csv");
    assert_eq!(ssblow(tmp.path(), &["propagate", "--input", missing.to_str().unwrap()]), 2);
}

#[test]
fn dispersive_bench_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(ssblow(tmp.path(), &["dispersive-bench", "--d", "1", "--b", "1", "--tmax", "10"]), 0);
    let dir = only_run(tmp.path(), "dispersive-bench-");
    let csv = std::fs::read_to_string(dir.join("kernel.csv")).unwrap();
    assert!(csv.starts_with("t,K,K_free\n"));
    let svg = std::fs::read_to_string(dir.join("kernel.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    let s = json(dir.join("summary.json"));
    assert_eq!(s["late_slope_within_2pct"], true);
    assert_eq!(s["short_time_within_1pct"], true);
}

#[test]
fn profile_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["profile", "--d", "1", "--p", "7", "--bracket", "1.15,1.16,1.38,1.39"];
    assert_eq!(ssblow(tmp.path(), &args), 0);
    let dir = only_run(tmp.path(), "profile-");
    let s = json(dir.join("summary.json"));
    assert!((s["q0"].as_f64().unwrap() - 1.155881024).abs() < 1e-8);
    assert!((s["b_star"].as_f64().unwrap() - 1.385083880).abs() < 1e-8);
    assert!(s["residual_over_sup"].as_f64().unwrap() < 1e-6);

    // the written profile feeds the spectrum command
    let prof = dir.join("profile.txt");
    assert_eq!(ssblow(tmp.path(), &["spectrum", "--profile", prof.to_str().unwrap()]), 0);
    let spec = only_run(tmp.path(), "spectrum-");
    let s = json(spec.join("summary.json"));
    assert!(s["j_symmetry"].as_f64().unwrap() < 1e-6);
    assert!(std::fs::read_to_string(spec.join("eigen.txt")).unwrap().lines().count() > 2);
    let m = json(spec.join("manifest.json"));
    assert_eq!(m["provenance"]["profile"]["path"], prof.to_str().unwrap());
}

#[test]
fn strichartz_map_writes_three_panels() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(ssblow(tmp.path(), &["strichartz-map", "--n", "512", "--half-width", "30", "--n-t", "60"]), 0);
    let dir = only_run(tmp.path(), "strichartz-map-");
    let svg = std::fs::read_to_string(dir.join("admissible.svg")).unwrap();
    assert_eq!(svg.matches("d = ").count(), 3, "one title per panel");
    let s = json(dir.join("summary.json"));
    assert_eq!(s["free_control_saturated"], false);
}
