use std::path::Path;
use std::process::Command;

use sabr_fem_cli::{preset, run_cli_with, PRESETS};

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["sabr-fem"];
    argv.extend_from_slice(args);
    let code = run_cli_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "[model]\nbeta = 0.5\nrho = -0.3\nnu = 1.0\n[discretization]\nl_x = 4\nl_y = 4\n\
[time]\nhorizon = 1.0\nsteps = 40\n[converge]\nlevels = [2, 3, 4]\nsteps = [8, 16, 32]\n";

#[test]
fn binary_without_arguments_prints_usage() {
    let o = Command::new(env!("CARGO_BIN_EXE_sabr-fem")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn exit_code_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad_mu = write_config(dir.path(), "[model]\nbeta = 0.5\n[discretization]\nmu = 0.9\n");
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec![], 2),
        (vec!["--help"], 0),
        (vec!["frobnicate"], 2),
        (vec!["price", "--preset", "paper-exp9"], 2),
        (vec!["price", "--preset", "paper-exp2", "--config", "x.toml"], 2),
        (vec!["price", "--config", "/nonexistent/run.toml", "--out", out], 1),
        (vec!["price", "--config", bad_mu.as_str(), "--out", out], 1),
        (vec!["converge", "--mode", "sideways"], 2),
    ];
    for (args, code) in cases {
        assert_eq!(run(&args).0, code, "{args:?}");
    }
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nbeta = 0.5\n[discretization]\nmu = 0.9\n");
    let (code, _, err) = run(&["price", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("discretization.mu"), "{err}");
}

#[test]
fn price_writes_surface_in_x_major_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (code, out, err) = run(&["price", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let price: f64 = out.lines().next().unwrap().strip_prefix("price ").unwrap().parse().unwrap();
    assert!(price > 0.0 && price < 1.0);

    let text = std::fs::read_to_string(dir.path().join("price_surface.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,value"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 17 * 17);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0] || (w[0][0] == w[1][0] && w[0][1] < w[1][1])));
    assert!(!text.contains('\r'));
}

#[test]
fn preset_experiment_two_prices_the_put() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&["price", "--preset", "paper-exp2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let price: f64 = out.lines().next().unwrap().strip_prefix("price ").unwrap().parse().unwrap();
    // Monte Carlo puts this near 0.189; L = 6 sits slightly below
    assert!((0.18..0.195).contains(&price), "{price}");
}

#[test]
fn converge_writes_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (code, out, err) = run(&["converge", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("slope_H"));
    let text = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "level_or_k,error_H,error_energy,fitted_slope");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2,"));

    let (code, _, err) =
        run(&["converge", "--mode", "temporal", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("8,"));
}

#[test]
fn masszero_table_decreases_with_eps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[discretization]\nl_x = 6\nl_y = 5\n[time]\nhorizon = 2.0\nsteps = 50\n[masszero]\neps = [0.5, 0.25]\n",
    );
    let (code, _, err) = run(&["masszero", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(dir.path().join("masszero.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(text.lines().next(), Some("eps,value"));
    assert_eq!(rows.len(), 2);
    assert!(rows[1][1] <= rows[0][1] && rows[1][1] >= 0.0);
}

#[test]
fn validate_cev_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nbeta = 0.5\nnu = 0.0\ny0 = 0.3\n[time]\nhorizon = 1.0\nsteps = 128\n\
[oracle]\nn_paths = 20000\nn_steps = 200\nseed = 5\n",
    );
    let (code, out, err) = run(&["validate", "--config", &cfg]);
    assert_eq!(code, 0, "{out}{err}");
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{out}");
}

#[test]
fn validate_reports_failures_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // two time steps over a long horizon on a coarse grid: far from the oracles
    let cfg = write_config(
        dir.path(),
        "[model]\nbeta = 0.5\nnu = 0.0\ny0 = 0.3\n[discretization]\nl_x = 2\n[time]\nhorizon = 1.0\nsteps = 2\n\
[oracle]\nn_paths = 20000\nn_steps = 100\n",
    );
    let (code, out, _) = run(&["validate", "--config", &cfg]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("FAIL"));
}

#[test]
fn output_directory_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let target = dir.path().join("from-env");
    // only this test relies on the variable; every other test passes --out or writes nothing
    unsafe { std::env::set_var(sabr_fem_cli::OUT_ENV, &target) };
    let (code, _, err) = run(&["price", "--config", &cfg]);
    unsafe { std::env::remove_var(sabr_fem_cli::OUT_ENV) };
    assert_eq!(code, 0, "{err}");
    assert!(target.join("price_surface.csv").exists());
}

#[test]
fn presets_serialize_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    for name in PRESETS {
        let cfg = preset(name).unwrap();
        let path = write_config(dir.path(), &cfg.to_toml());
        assert_eq!(sabr_fem_cli::load_config(Path::new(&path)).unwrap(), cfg);
    }
}
