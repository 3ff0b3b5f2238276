use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 5
l_max = 1

[medium]
epsilon = 0.02
kappa = 0.5
smooth = { kind = "sampled", radii = [0.0, 0.2, 1.0], speeds = [1.2, 1.2, 1.0] }
fluctuation = { kind = "stationary_random", amplitude = 0.3, correlation_length = 1.0, r_lo = 0.5, r_hi = 0.8 }

[grid]
omega_min = 0.8
omega_max = 1.2
d_omega = 0.004

[noise]
radial = { kind = "uniform", r_lo = 0.997, r_hi = 0.999, amplitude = 1.0 }
spectrum = { kind = "gaussian_band", center = 1.0, width = 0.05, amplitude = 1.0 }

[synthesis]
record_length = 20.0
realizations = 6
"#;

fn daylight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_daylight")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    daylight(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    for sub in ["scatter", "synthesize", "correlate"] {
        let a = tmp.path().join(format!("{sub}-1"));
        let b = tmp.path().join(format!("{sub}-4"));
        let c = tmp.path().join(format!("{sub}-4-again"));
        for (dir, threads) in [(&a, "1"), (&b, "4"), (&c, "4")] {
            let o = run(sub, &cfg, dir, &["--threads", threads]);
            assert!(o.status.success(), "{sub}: {}", stderr(&o));
        }
        let fa = files(&a);
        assert!(fa.len() > 3, "{sub}: {:?}", fa.keys());
        assert_eq!(fa, files(&b), "{sub}: 1 vs 4 threads");
        assert_eq!(fa, files(&c), "{sub}: rerun");
    }
}

#[test]
fn seed_flag_changes_recordings_and_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run("synthesize", &cfg, &a, &[]).status.success());
    assert!(run("synthesize", &cfg, &b, &["--seed", "6"]).status.success());
    assert_ne!(fs::read(a.join("recordings.csv")).unwrap(), fs::read(b.join("recordings.csv")).unwrap());
    let side: serde_json::Value = serde_json::from_slice(&fs::read(b.join("recordings.csv.json")).unwrap()).unwrap();
    assert_eq!(side["run"]["seed"], 6);
    assert_eq!(side["run"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(side["run"]["config_hash"].as_str().unwrap().len(), 64);
    assert!(fs::read_to_string(b.join("resolved_config.toml")).unwrap().contains("seed = 6"));
}

#[test]
fn every_artifact_has_a_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    assert!(run("correlate", &cfg, &out, &[]).status.success());
    let names = files(&out);
    for name in names.keys().filter(|n| n.ends_with(".csv")) {
        assert!(names.contains_key(&format!("{name}.json")), "{name} has no sidecar");
    }
    let status: serde_json::Value = serde_json::from_slice(&names["status.json"]).unwrap();
    assert_eq!(status["complete"], true);
}

#[test]
fn csv_values_carry_seventeen_significant_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    assert!(run("scatter", &cfg, &out, &[]).status.success());
    let text = fs::read_to_string(out.join("scatter.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    let mantissa = row[1].split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{}", row[1]);
}

#[test]
fn homogeneous_default_peaks_follow_the_pi_eps_ladder() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "l_max = 1\n");
    let out = tmp.path().join("o");
    let o = run("eigenfreqs", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("eigenfreqs.csv")).unwrap();
    let spacing = std::f64::consts::PI * 0.02;
    let mut odd = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (l, w, analytic): (usize, f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap(), f[5].parse().unwrap());
        assert!((w - analytic).abs() <= 0.5e-3, "l = {l}: {w} vs {analytic}");
        if l == 1 {
            odd += 1;
            let n = (w / spacing).round();
            assert!((w - n * spacing).abs() <= 0.5e-3, "{w} is not n pi eps");
        }
    }
    assert!(odd >= 10, "only {odd} peaks");
}

#[test]
fn misspelled_key_is_rejected_with_suggestion() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[medium]\nepsilon = 0.02\nkapa = 0.3\n");
    let o = run("scatter", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("kapa") && err.contains("did you mean `kappa`"), "{err}");
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn syntax_error_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "seed = 1\nl_max = 2\n[grid\nomega_min = 1.0\n");
    let o = run("scatter", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn coarse_grid_violates_resonance_width_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[medium]\nkappa = 0.05\n[grid]\nd_omega = 0.01\n");
    let o = run("eigenfreqs", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("grid.d_omega") && err.contains("resonance-width bound"), "{err}");
}

#[test]
fn daylight_check_rejects_mismatched_spectra() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{SMALL}\n[source]\npulse = {{ kind = \"spectral\", spectrum = {{ kind = \"gaussian_band\", center = 1.1, width = 0.05, amplitude = 1.0 }} }}\n"
    );
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("o");
    let o = run("daylight-check", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("F^ = f^"), "{}", stderr(&o));
    let status: serde_json::Value = serde_json::from_slice(&fs::read(out.join("status.json")).unwrap()).unwrap();
    assert_eq!(status["complete"], false);
}

#[test]
fn daylight_check_passes_with_matched_spectra() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{SMALL}\n[source]\npulse = {{ kind = \"spectral\", spectrum = {{ kind = \"gaussian_band\", center = 1.0, width = 0.05, amplitude = 1.0 }} }}\n"
    );
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("o");
    let o = run("daylight-check", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("daylight_check.csv")).unwrap();
    for line in text.lines().skip(1) {
        let corr: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(corr >= 0.99, "{line}");
    }
}

#[test]
fn missing_noise_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[medium]\nkappa = 0.5\n[grid]\nd_omega = 0.001\n");
    let o = run("correlate", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[noise]"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(daylight(&["scatter"]).status.code(), Some(1));
    assert_eq!(daylight(&["transmogrify", "--config", "x.toml"]).status.code(), Some(1));
    assert_eq!(daylight(&["scatter", "--config", "x.toml", "--threads", "0"]).status.code(), Some(1));
    assert_eq!(daylight(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_config_file_is_a_validation_error() {
    let o = daylight(&["scatter", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot read config"));
}

#[test]
fn check_mode_runs_the_matching_criterion() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "l_max = 0\n");
    let out = tmp.path().join("o");
    let o = run("eigenfreqs", &cfg, &out, &["--check"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS criterion  3"));
    let checks: serde_json::Value = serde_json::from_slice(&fs::read(out.join("checks.json")).unwrap()).unwrap();
    assert_eq!(checks[0]["id"], 3);
    assert_eq!(checks[0]["passed"], true);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let tmp = tempfile::tempdir().unwrap();
        let o = run("eigenfreqs", &path, tmp.path(), &[]);
        assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
    }
}
