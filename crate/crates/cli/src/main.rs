//! `irs-backscatter simulate snr-sweep|n-sweep` and `irs-backscatter validate`.
//!
//! Exit codes: 0 success, 1 validation failure, 2 config or usage error,
//! 3 output I/O failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use irs_backscatter::baselines::SchemeKind;
use irs_backscatter::experiments::{
    emit_outputs, run_sweep, run_validation_suite, ExperimentConfig, ExperimentError, OutputPaths, SweepKind,
    SweepResult,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "irs-backscatter", version, about = "IRS-assisted backscatter channel estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write CSV, SVG and JSON metadata
    Simulate {
        #[arg(value_enum)]
        sweep: SweepArg,
        #[command(flatten)]
        opts: SimulateArgs,
    },
    /// Run the invariant checks and report pass/fail per check
    Validate {
        /// JSON experiment config
        #[arg(long)]
        config: PathBuf,
        /// Also write the machine-readable report here
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepArg {
    /// Effective SNR versus reference SNR at fixed N
    SnrSweep,
    /// Effective SNR versus number of subsurfaces
    NSweep,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per point
    #[arg(long)]
    trials: Option<usize>,
    /// Subsurface count (snr-sweep) or comma-separated list (n-sweep)
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Comma-separated schemes: proposed, baseline1, baseline2, baseline3, perfect_csi
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<SchemeKind>>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn apply_overrides(config: &mut ExperimentConfig, sweep: SweepArg, opts: &SimulateArgs) -> Result<(), Failure> {
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(trials) = opts.trials {
        config.trials = trials;
    }
    if let Some(schemes) = &opts.schemes {
        config.schemes = schemes.clone();
    }
    if let Some(ns) = &opts.n {
        match (sweep, ns.as_slice()) {
            (SweepArg::SnrSweep, [n]) => config.scenario.n_subsurfaces = *n,
            (SweepArg::SnrSweep, _) => {
                return Err(Failure::Config("snr-sweep takes a single --n value".into()));
            }
            (SweepArg::NSweep, _) => config.n_values = ns.clone(),
        }
    }
    if let Some(out) = &opts.out {
        config.out_dir = Some(out.clone());
    }
    Ok(())
}

fn print_summary(result: &SweepResult) {
    let axis = match result.kind {
        SweepKind::ReferenceSnr => "ref_snr_db",
        SweepKind::Subsurfaces => "N",
    };
    println!("{axis:>10}  {:<16} {:>12} {:>9} {:>7}", "scheme", "eff_snr_db", "stderr", "budget");
    for r in &result.rows {
        println!(
            "{:>10.2}  {:<16} {:>12.3} {:>9.3} {:>7}",
            r.axis, r.scheme, r.eff_snr_db_mean, r.eff_snr_db_stderr, r.budget
        );
    }
    for note in &result.skipped {
        println!("note: {note}");
    }
}

fn simulate(sweep: SweepArg, opts: &SimulateArgs) -> Result<(), Failure> {
    let mut config = ExperimentConfig::load(&opts.config)?;
    apply_overrides(&mut config, sweep, opts)?;
    let (kind, stem) = match sweep {
        SweepArg::SnrSweep => (SweepKind::ReferenceSnr, "snr_sweep"),
        SweepArg::NSweep => (SweepKind::Subsurfaces, "n_sweep"),
    };
    let result = run_sweep(&config, kind)?;
    let dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let paths = OutputPaths::in_dir(&dir, stem);
    emit_outputs(&result, &config, &paths).map_err(|e| Failure::Io(e.to_string()))?;
    print_summary(&result);
    println!("wrote {}", paths.csv.display());
    Ok(())
}

fn validate(config_path: &Path, report_path: Option<&Path>) -> Result<bool, Failure> {
    let config = ExperimentConfig::load(config_path)?;
    config.validate()?;
    let report = run_validation_suite(&config);
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status} {:<28} value={:.3e} tol={:.1e}  {}", c.name, c.value, c.tolerance, c.detail);
    }
    if let Some(path) = report_path {
        let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Io(e.to_string()))?;
        std::fs::write(path, json + "\n").map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate { sweep, opts } => simulate(*sweep, opts).map(|()| true),
        Command::Validate { config, report } => validate(config, report.as_deref()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("output error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(line: &str) -> Cli {
        Cli::try_parse_from(line.split_whitespace()).unwrap()
    }

    #[test]
    fn overrides_apply_to_the_loaded_config() {
        let cli = args("irs-backscatter simulate n-sweep --config c.json --seed 9 --trials 3 --n 2,4 --schemes proposed,perfect_csi");
        let Command::Simulate { sweep, opts } = cli.command else { panic!() };
        let mut c = ExperimentConfig::default();
        apply_overrides(&mut c, sweep, &opts).unwrap();
        assert_eq!((c.seed, c.trials), (9, 3));
        assert_eq!(c.n_values, [2, 4]);
        assert_eq!(c.schemes, [SchemeKind::Proposed, SchemeKind::PerfectCsi]);
    }

    #[test]
    fn snr_sweep_takes_one_n() {
        let cli = args("irs-backscatter simulate snr-sweep --config c.json --n 2,4");
        let Command::Simulate { sweep, opts } = cli.command else { panic!() };
        assert!(apply_overrides(&mut ExperimentConfig::default(), sweep, &opts).is_err());
    }

    #[test]
    fn unknown_scheme_is_a_usage_error() {
        let err = Cli::try_parse_from(["irs-backscatter", "simulate", "snr-sweep", "--config", "c", "--schemes", "x"])
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
