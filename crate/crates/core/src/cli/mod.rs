//! `nlest` command line: `run`, `montecarlo` and `selftest`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad arguments or settings,
//! 3 filter divergence (`run`) or a failed self-test.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::EstimationError;
use crate::filter::FilterKind;
use crate::selftest;
use crate::sim::{monte_carlo, run_experiment, ExperimentConfig, ExperimentResult, QForm};
use crate::ukf::UkfParams;
use config::{parse_filters, parse_settings, Settings};

/// Monte Carlo run count when neither a flag nor the file sets one.
pub const DEFAULT_RUNS: usize = 500;

#[derive(Debug, Parser)]
#[command(name = "nlest", version, about = "Falling-body tracking with the LKF, EKF and UKF")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One seeded experiment; writes result.csv, errors.svg and mse.svg.
    Run(ExperimentArgs),
    /// Repeated experiments with seeds seed, seed+1, ...; also writes mc_summary.csv.
    Montecarlo(ExperimentArgs),
    /// Linear-equivalence and sigma-reconstruction property checks.
    Selftest,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Settings file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Truth states including the initial one (at least 2).
    #[arg(long)]
    steps: Option<usize>,
    /// Time step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Monte Carlo repetitions.
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated subset of lkf,ekf,ukf.
    #[arg(long, value_parser = parse_filter_list)]
    filters: Option<FilterList>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    /// Filter process-noise structure: rank1 or diag.
    #[arg(long)]
    q_form: Option<QForm>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn flag_settings(&self) -> Settings {
        Settings {
            seed: self.seed,
            steps: self.steps,
            dt: self.dt,
            runs: self.runs,
            filters: self.filters.clone().map(|f| f.0),
            alpha: self.alpha,
            beta: self.beta,
            kappa: self.kappa,
            q_form: self.q_form,
            out: self.out.clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct FilterList(Vec<FilterKind>);

fn parse_filter_list(s: &str) -> Result<FilterList, String> {
    parse_filters(s).map(FilterList)
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Diverged(String),
    #[error("self-test failed")]
    SelfTest,
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Diverged(_) | CliError::SelfTest => 3,
        }
    }
}

/// Fully resolved settings for `run` or `montecarlo`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub experiment: ExperimentConfig,
    pub runs: usize,
    pub out: PathBuf,
}

impl CliConfig {
    /// Defaults, then file values, then flag values.
    pub fn resolve(file: Settings, flags: Settings) -> Result<CliConfig, String> {
        let s = file.overlay(flags);
        let base = ExperimentConfig::default();
        let defaults = base.ukf_params;
        let experiment = ExperimentConfig {
            seed: s.seed.unwrap_or(base.seed),
            steps: s.steps.unwrap_or(base.steps),
            dt: s.dt.unwrap_or(base.dt),
            filters: s.filters.unwrap_or(base.filters.clone()),
            q_form: s.q_form.unwrap_or(base.q_form),
            ukf_params: UkfParams {
                alpha: s.alpha.unwrap_or(defaults.alpha),
                beta: s.beta.unwrap_or(defaults.beta),
                kappa: s.kappa.unwrap_or(defaults.kappa),
            },
            ..base
        };
        experiment.validate().map_err(|e| e.to_string())?;
        let runs = s.runs.unwrap_or(DEFAULT_RUNS);
        if runs == 0 {
            return Err("runs must be at least 1".into());
        }
        Ok(CliConfig {
            experiment,
            runs,
            out: s.out.unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => cmd_run(&load(&args)?),
        Command::Montecarlo(args) => cmd_montecarlo(&load(&args)?),
        Command::Selftest => cmd_selftest(),
    }
}

fn load(args: &ExperimentArgs) -> Result<CliConfig, CliError> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            parse_settings(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => Settings::default(),
    };
    CliConfig::resolve(file, args.flag_settings()).map_err(CliError::Usage)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_experiment(dir: &Path, result: &ExperimentResult) -> Result<(), CliError> {
    write_file(dir, "result.csv", &report::result_csv(result))?;
    write_file(dir, "errors.svg", &report::errors_svg(result))?;
    write_file(dir, "mse.svg", &report::mse_svg(result))
}

fn classify(e: EstimationError) -> CliError {
    match e {
        EstimationError::InvalidConfig(msg) => CliError::Usage(msg),
        other => CliError::Diverged(other.to_string()),
    }
}

fn cmd_run(cfg: &CliConfig) -> Result<(), CliError> {
    let result = run_experiment(&cfg.experiment).map_err(classify)?;
    prepare_out(&cfg.out)?;
    write_experiment(&cfg.out, &result)?;
    println!("seed {}, {} estimates", cfg.experiment.seed, result.truth.len());
    print!("{}", report::mse_table(&result));
    Ok(())
}

fn cmd_montecarlo(cfg: &CliConfig) -> Result<(), CliError> {
    let summary = monte_carlo(&cfg.experiment, cfg.runs).map_err(classify)?;
    prepare_out(&cfg.out)?;
    write_file(&cfg.out, "mc_summary.csv", &report::mc_summary_csv(&summary))?;
    match run_experiment(&cfg.experiment) {
        Ok(result) => write_experiment(&cfg.out, &result)?,
        Err(e) => eprintln!("warning: seed {} not plotted: {e}", cfg.experiment.seed),
    }
    println!(
        "{} runs, seeds {}..{}",
        cfg.runs,
        cfg.experiment.seed,
        cfg.experiment.seed.wrapping_add(cfg.runs as u64 - 1)
    );
    print!("{}", report::mc_table(&summary));
    let kinds = &cfg.experiment.filters;
    for (i, &a) in kinds.iter().enumerate() {
        for &b in &kinds[i + 1..] {
            if let Some((mean, se)) = summary.paired_difference(a, b) {
                println!("mse({a}) - mse({b}) = {mean:.4} +/- {se:.4}");
            }
        }
    }
    Ok(())
}

fn cmd_selftest() -> Result<(), CliError> {
    let outcomes = selftest::run_all().map_err(|e| CliError::Diverged(e.to_string()))?;
    let mut ok = true;
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} {:<24} worst {:.3e} (tol {:.0e})", o.name, o.worst, o.tolerance);
        ok &= o.passed;
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::SelfTest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_layers_settings() {
        let file = Settings { seed: Some(3), steps: Some(9), alpha: Some(0.5), ..Default::default() };
        let flags = Settings { seed: Some(4), ..Default::default() };
        let cfg = CliConfig::resolve(file, flags).unwrap();
        assert_eq!(cfg.experiment.seed, 4);
        assert_eq!(cfg.experiment.steps, 9);
        assert_eq!(cfg.experiment.ukf_params.alpha, 0.5);
        assert_eq!(cfg.experiment.ukf_params.beta, 2.0);
        assert_eq!(cfg.runs, DEFAULT_RUNS);
        assert_eq!(cfg.out, PathBuf::from("."));
    }

    #[test]
    fn resolve_rejects_invalid() {
        let bad = |s: Settings| CliConfig::resolve(Settings::default(), s).is_err();
        assert!(bad(Settings { steps: Some(1), ..Default::default() }));
        assert!(bad(Settings { dt: Some(0.0), ..Default::default() }));
        assert!(bad(Settings { alpha: Some(0.0), ..Default::default() }));
        assert!(bad(Settings { runs: Some(0), ..Default::default() }));
    }

    #[test]
    fn parse_errors_exit_2() {
        assert_eq!(run_cli(["nlest", "run", "--bogus"]), 2);
        assert_eq!(run_cli(["nlest", "run", "--filters", "kf"]), 2);
        assert_eq!(run_cli(["nlest", "run", "--steps", "1"]), 2);
        assert_eq!(run_cli(["nlest", "run", "--filters", "ukf,ukf"]), 2);
        assert_eq!(run_cli(["nlest"]), 2);
        assert_eq!(run_cli(["nlest", "--help"]), 0);
    }
}
