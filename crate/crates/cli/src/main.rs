use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use opcalc_harness::{list_families, run_suite, Battery, ExperimentConfig, HarnessError, Result};

/// Verification batteries for commutator expansions of functions of
/// commuting self-adjoint tuples.
#[derive(Parser)]
#[command(name = "opcalc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration, TOML or JSON (`.json`).
    #[arg(long)]
    config: PathBuf,
    /// Replaces the configured seeds by the same number starting at S.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Report directory (default: the config's `output`, else `reports`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact closed-form and index identities over rational arithmetic.
    VerifySymbolic {
        /// Experiment configuration; defaults to nu 1..=3, degree 6.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dimensions to sweep, e.g. `1,2,3` (overrides the config).
        #[arg(long, value_delimiter = ',')]
        nu: Option<Vec<usize>>,
        /// Largest multi-index degree (overrides the config).
        #[arg(long)]
        max_degree: Option<u32>,
        /// Recorded in the report; the symbolic checks use no randomness.
        #[arg(long, value_name = "S")]
        seed: Option<u64>,
        /// Report directory (default: the config's `output`, else `reports`).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Matrix identities at fixed complex points.
    VerifyLemmas(RunArgs),
    /// Remainder by quadrature against the direct remainder.
    VerifyTheorem(RunArgs),
    /// Functional calculus by quadrature against the spectral oracle.
    HsApply(RunArgs),
    /// Weighted remainder over commutator norms across dimensions.
    BoundSweep(RunArgs),
    /// Growth of the kernel remainder as the imaginary part vanishes.
    HadamardProbe(RunArgs),
    /// Vanishing order of the extension's d-bar derivative.
    AaeProbe(RunArgs),
    /// Built-in function families with their sampling self-check.
    ListFamilies,
}

fn load(path: &Path, expected: Battery, seed: Option<u64>) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?;
    if cfg.battery != expected {
        return Err(HarnessError::Config {
            location: path.display().to_string(),
            message: format!("config is for `{}`, not `{expected}`", cfg.battery),
        });
    }
    Ok(cfg.with_seed(seed))
}

fn symbolic_config(
    config: Option<&Path>,
    nu: Option<Vec<usize>>,
    max_degree: Option<u32>,
    seed: Option<u64>,
) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(p) => load(p, Battery::VerifySymbolic, seed)?,
        None => {
            let nus = nu.clone().unwrap_or_else(|| vec![1, 2, 3]);
            let list: Vec<String> = nus.iter().map(ToString::to_string).collect();
            let source = format!(
                "name = \"verify-symbolic\"\nbattery = \"verify-symbolic\"\nnu = [{}]\nmax_degree = {}\n",
                list.join(", "),
                max_degree.unwrap_or(6)
            );
            ExperimentConfig::parse(&source, "command line")?.with_seed(seed)
        }
    };
    if let Some(nus) = nu {
        cfg.nu = opcalc_harness::config::Sweep::Many(nus);
    }
    if max_degree.is_some() {
        cfg.max_degree = max_degree;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cfg: &ExperimentConfig, out: Option<PathBuf>) -> Result<bool> {
    let report = run_suite(cfg)?;
    for c in &report.checks {
        println!("{c}");
    }
    let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("reports"));
    for p in report.write(&dir)? {
        println!("wrote {}", p.display());
    }
    println!(
        "{}: {} ({:.1} s)",
        report.name,
        if report.passed { "PASS" } else { "FAIL" },
        report.run_info.elapsed_seconds
    );
    Ok(report.passed)
}

fn dispatch(cli: Cli) -> Result<bool> {
    let (args, battery) = match cli.command {
        Command::VerifySymbolic {
            config,
            nu,
            max_degree,
            seed,
            out,
        } => {
            let cfg = symbolic_config(config.as_deref(), nu, max_degree, seed)?;
            return execute(&cfg, out);
        }
        Command::ListFamilies => {
            let catalog = list_families()?;
            println!("{}", serde_json::to_string_pretty(&catalog)?);
            return Ok(catalog.iter().all(|e| e.passed));
        }
        Command::VerifyLemmas(a) => (a, Battery::VerifyLemmas),
        Command::VerifyTheorem(a) => (a, Battery::VerifyTheorem),
        Command::HsApply(a) => (a, Battery::HsApply),
        Command::BoundSweep(a) => (a, Battery::BoundSweep),
        Command::HadamardProbe(a) => (a, Battery::HadamardProbe),
        Command::AaeProbe(a) => (a, Battery::AaeProbe),
    };
    let cfg = load(&args.config, battery, args.seed)?;
    execute(&cfg, args.out)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
