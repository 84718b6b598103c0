//! Command-line front end: `price`, `converge`, `masszero` and `validate`.
//!
//! Exit codes: 0 on success, 1 when the run fails (invalid configuration,
//! numerical error, failed cross-check), 2 on a malformed command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use sabr_fem::oracles::{
    cev_exact_price, mc_price, spatial_convergence_study, temporal_convergence_study, McConfig, OptionKind,
};
use sabr_fem::{mass_at_zero, price_european, Payoff};

pub use config::{load_config, parse_config, preset, ConfigError, RunConfig, PRESETS};
pub use report::{write_csv_report, CsvTable};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SABR_FEM_OUT";

#[derive(Debug, Parser)]
#[command(name = "sabr-fem", version, about = "Weighted finite element pricing for SABR and CEV", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price the configured payoff; writes price_surface.csv.
    Price(Common),
    /// Spatial or temporal convergence study; writes convergence.csv.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Overrides `converge.mode`.
        #[arg(long, value_parser = ["spatial", "temporal"])]
        mode: Option<String>,
    },
    /// Mass-at-zero puts over the configured widths; writes masszero.csv.
    Masszero(Common),
    /// Cross-checks the engine against the independent oracles.
    Validate(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, short, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named configuration.
    #[arg(long, value_parser = PRESETS)]
    preset: Option<String>,
    /// Output directory (default: config, then $SABR_FEM_OUT, then the working directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Engine(sabr_fem::Error),
    Io(std::io::Error),
    Checks(usize),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Engine(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "{e}"),
            Failure::Checks(n) => write!(f, "{n} cross-check(s) failed"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<sabr_fem::Error> for Failure {
    fn from(e: sabr_fem::Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn resolve(common: &Common) -> Result<(RunConfig, PathBuf), Failure> {
    let cfg = match (&common.config, &common.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => RunConfig::default(),
    };
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    log::info!("output directory {}", dir.display());
    Ok((cfg, dir))
}

fn emit(table: &CsvTable, dir: &Path, name: &str, out: &mut dyn Write) -> Result<(), Failure> {
    let path = dir.join(name);
    write_csv_report(table, &path)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn price(common: &Common, out: &mut dyn Write) -> Result<(), Failure> {
    let (cfg, dir) = resolve(common)?;
    let params = cfg.params()?;
    let surface = price_european(&params, &cfg.payoff()?, &cfg.spec()?, &cfg.theta()?)?;
    writeln!(out, "price {}", surface.point_price()?)?;
    emit(&CsvTable::surface(&surface)?, &dir, "price_surface.csv", out)
}

fn converge(common: &Common, mode: Option<&str>, out: &mut dyn Write) -> Result<(), Failure> {
    let (cfg, dir) = resolve(common)?;
    let params = cfg.params()?;
    let payoff = cfg.payoff()?;
    let spec = cfg.spec()?;
    let temporal = match mode {
        Some(m) => m == "temporal",
        None => cfg.converge.mode == config::ConvergeMode::Temporal,
    };
    let report = if temporal {
        let t = cfg.time;
        temporal_convergence_study(&params, &payoff, &spec, &cfg.converge.steps, t.theta, t.horizon)?
    } else {
        spatial_convergence_study(&params, &payoff, &spec, &cfg.converge.levels, &cfg.theta()?)?
    };
    let fmt = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    writeln!(out, "slope_H {} slope_energy {} ({})", fmt(report.slope_h), fmt(report.slope_energy), report.reference)?;
    emit(&CsvTable::convergence(&report), &dir, "convergence.csv", out)
}

fn masszero(common: &Common, out: &mut dyn Write) -> Result<(), Failure> {
    let (cfg, dir) = resolve(common)?;
    let params = cfg.params()?;
    let eps = &cfg.masszero.eps;
    let spec = cfg.spec_for(eps[0])?;
    let m = mass_at_zero(&params, &spec, &cfg.theta()?, eps)?;
    writeln!(out, "mass_at_zero {}", m.estimate)?;
    emit(&CsvTable::mass_at_zero(&m), &dir, "masszero.csv", out)
}

fn validate(common: &Common, out: &mut dyn Write) -> Result<(), Failure> {
    let (cfg, _) = resolve(common)?;
    let params = cfg.params()?;
    let payoff = cfg.payoff()?;
    let theta = cfg.theta()?;
    let horizon = cfg.time.horizon;
    let mut failed = 0;
    let mut check = |out: &mut dyn Write, name: &str, ok: bool, detail: String| -> std::io::Result<()> {
        failed += usize::from(!ok);
        writeln!(out, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" })
    };

    let ident = price_european(&params, &Payoff::Identity, &cfg.spec_for(0.0)?, &theta)?.point_price()?;
    let rel = (ident - params.x0).abs() / params.x0;
    check(out, "martingale", rel <= 0.01, format!("E[X_T] = {ident:.6} vs x0 = {}, rel {rel:.2e}", params.x0))?;

    let fem = price_european(&params, &payoff, &cfg.spec()?, &theta)?.point_price()?;
    if params.is_cev() {
        let kind = match payoff {
            Payoff::Put { strike } => Some((OptionKind::Put, strike)),
            Payoff::Call { strike } => Some((OptionKind::Call, strike)),
            _ => None,
        };
        if let Some((kind, strike)) = kind {
            let exact = cev_exact_price(params.y0, params.beta, params.x0, strike, horizon, kind);
            let rel = (fem - exact).abs() / exact.abs().max(1e-12);
            check(out, "cev-exact", rel <= 0.01, format!("FEM {fem:.6} vs exact {exact:.6}, rel {rel:.2e}"))?;
        }
    }

    let o = cfg.oracle;
    let mc = mc_price(&params, &payoff, horizon, &McConfig { n_paths: o.n_paths, n_steps: o.n_steps, seed: o.seed })?;
    let z = if mc.stderr > 0.0 { mc.z_score(fem) } else { (fem - mc.mean).abs() / 1e-12 };
    check(out, "monte-carlo", z <= 3.0, format!("FEM {fem:.6} vs MC {:.6} +- {:.6}, z = {z:.2}", mc.mean, mc.stderr))?;

    if failed > 0 {
        return Err(Failure::Checks(failed));
    }
    Ok(())
}

/// Runs the CLI on `argv` (including the program name), writing results to
/// `out` and diagnostics to `err`. Returns the process exit code.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Price(c) => price(c, out),
        Command::Converge { common, mode } => converge(common, mode.as_deref(), out),
        Command::Masszero(c) => masszero(c, out),
        Command::Validate(c) => validate(c, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}
