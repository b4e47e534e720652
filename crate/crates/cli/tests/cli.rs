use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn nnpde(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnpde"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("NNPDE_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const SMALL_TRAIN: &str = r#"
[train]
n_hidden = 5
steps = 40
seed = 3
grid = { dim = 1, n = 33 }
"#;

#[test]
fn train_writes_history_fields_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_TRAIN);
    let o = nnpde(tmp.path(), &["train", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let hist = read(tmp.path(), "history.csv");
    assert_eq!(hist.lines().next().unwrap(), "step,J,grad_norm,dt,seconds");
    assert!(hist.lines().count() > 2);
    let fields = read(tmp.path(), "fields.csv");
    assert_eq!(fields.lines().next().unwrap(), "x,g,u,h,u_hat");
    assert_eq!(fields.lines().count(), 34);
    assert!(tmp.path().join("out/params.bin").exists());
    let manifest: toml::Value = toml::from_str(&read(tmp.path(), "manifest.toml")).unwrap();
    assert_eq!(manifest["subcommand"].as_str(), Some("train"));
    assert_eq!(manifest["config"]["train"]["seed"].as_integer(), Some(3));
    assert_eq!(manifest["config"]["train"]["n_hidden"].as_integer(), Some(5));
}

#[test]
fn seed_flag_beats_file_and_is_recorded() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_TRAIN);
    let o = nnpde(tmp.path(), &["train", "--config", &cfg, "--seed", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: toml::Value = toml::from_str(&read(tmp.path(), "manifest.toml")).unwrap();
    assert_eq!(manifest["seed_override"].as_integer(), Some(7));
    assert_eq!(manifest["config"]["train"]["seed"].as_integer(), Some(7));
}

#[test]
fn same_config_reproduces_history() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_TRAIN);
    let strip = |s: String| -> Vec<String> {
        // Drop the wall-clock column.
        s.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    assert!(nnpde(tmp.path(), &["train", "--config", &cfg]).status.success());
    let a = strip(read(tmp.path(), "history.csv"));
    assert!(nnpde(tmp.path(), &["train", "--config", &cfg, "--jobs", "1"]).status.success());
    let b = strip(read(tmp.path(), "history.csv"));
    assert_eq!(a, b);
}

#[test]
fn missing_config_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = nnpde(tmp.path(), &["train", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flag_and_unknown_key_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(nnpde(tmp.path(), &["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(nnpde(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    let cfg = write_config(tmp.path(), "[train]\nnot_a_field = 1\n");
    assert_eq!(nnpde(tmp.path(), &["train", "--config", &cfg]).status.code(), Some(2));
    let cfg = write_config(tmp.path(), "[train]\nn_hidden = 0\n");
    assert_eq!(nnpde(tmp.path(), &["train", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn numeric_failure_has_its_own_exit_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[train]\nn_hidden = 5\nsteps = 5\ngrid = { dim = 1, n = 17 }\nalpha = 1e308\ndt = 1e308\n",
    );
    let o = nnpde(tmp.path(), &["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_emits_one_row_per_width() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[train]\nsteps = 10\ngrid = { dim = 1, n = 17 }\n[sweep]\nns = [5, 10, 50, 250, 500]\nseeds = [0, 1]\n",
    );
    let o = nnpde(tmp.path(), &["sweep", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read(tmp.path(), "sweep.csv");
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "N,objective");
    let ns: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ns, ["5", "10", "50", "250", "500"]);
    assert_eq!(read(tmp.path(), "sweep_runs.csv").lines().count(), 11);
}

#[test]
fn spectra_of_point_mass_kernel_has_rank_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
[limit]
alpha = 1.0
grid = { dim = 1, n = 33 }
mc_samples = 10
init = { kind = "point_mass", c = 1.0, w = 0.0, eta = 0.0 }
[spectra]
threshold = 1e-10
"#,
    );
    let o = nnpde(tmp.path(), &["spectra", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read(tmp.path(), "spectra.csv");
    assert_eq!(s.lines().next().unwrap(), "k,lambda");
    assert_eq!(s.lines().count(), 3);
    let summary = read(tmp.path(), "spectra_summary.csv");
    assert!(summary.lines().nth(1).unwrap().ends_with(",2"));
}

#[test]
fn limit_and_compare_write_tables() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
[train]
grid = { dim = 1, n = 17 }
dt = 1e-3
[limit]
grid = { dim = 1, n = 17 }
steps = 20
mc_samples = 200
snapshot_every = 10
[compare]
n_hidden = 20
seeds = [0, 1]
steps = 20
mc_samples = 200
gap_ns = [10, 100]
gap_seeds = 4
"#,
    );
    let o = nnpde(tmp.path(), &["limit", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(tmp.path(), "limit.csv").lines().count() > 1);
    let o = nnpde(tmp.path(), &["compare", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = read(tmp.path(), "compare.csv");
    assert!(c.lines().next().unwrap().starts_with("t,err_u_H1,err_uhat_H1,err_g_L2"));
    assert_eq!(read(tmp.path(), "init_gap.csv").lines().count(), 3);
}

#[test]
fn rans_without_net_writes_baseline_diagnostics_only() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[rans.train]\ntrain_re = [6001]\ntest_re = []\n[rans.train.base]\nn_y = 16\n",
    );
    let o = nnpde(tmp.path(), &["rans", "--net", "off", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d = read(tmp.path(), "diagnostics.csv");
    let lines: Vec<&str> = d.lines().collect();
    assert!(lines[0].starts_with("Re,Re_tau,C_f"));
    assert_eq!(lines.len(), 2);
    assert!(!tmp.path().join("out/net.bin").exists());
    assert!(!tmp.path().join("out/rans_history.csv").exists());
}
