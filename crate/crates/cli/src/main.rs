use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ruin_spg::error::{Error, Result};
use ruin_spg::experiments::{
    cmd_compare, cmd_diagnose, cmd_optimize, DiagnoseOptions, ExperimentConfig, Overrides,
};

/// Minimizes finite-horizon ruin probability over investment and reinsurance.
#[derive(Parser)]
#[command(name = "ruin-spg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimizer once and write its trace.
    Optimize(Common),
    /// Repeat the optimizer and compare against the adjustment-coefficient retention.
    Compare(Common),
    /// Run the estimator and projection self-checks.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Negate w' in the gradient weights (mutation check).
        #[arg(long, hide = true)]
        corrupt_w_prime: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "INT")]
    reps: Option<usize>,
    /// Worker threads; 1 forces sequential execution.
    #[arg(long, value_name = "INT")]
    workers: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        config.apply(&Overrides {
            seed: self.seed,
            out_dir: self.out.clone(),
            repetitions: self.reps,
            workers: self.workers,
        });
        Ok(config)
    }
}

macro_rules! note {
    ($quiet:expr, $($arg:tt)*) => {
        if !$quiet {
            eprintln!($($arg)*);
        }
    };
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize(common) => {
            let config = common.load()?;
            let quiet = common.quiet;
            let every = (config.spg.max_iters / 10).max(1);
            let outcome = cmd_optimize(&config, |rec| {
                if rec.k % every == 0 {
                    if let Some(ruin) = rec.min_ruin {
                        note!(
                            quiet,
                            "k={:>5} b={:.5} min_ruin={:.6}",
                            rec.k,
                            rec.strategy.b(),
                            ruin
                        );
                    } else {
                        note!(quiet, "k={:>5} b={:.5}", rec.k, rec.strategy.b());
                    }
                }
            })?;
            note!(quiet, "wrote {}", outcome.trace_path.display());
            note!(quiet, "wrote {}", outcome.summary_path.display());
        }
        Command::Compare(common) => {
            let config = common.load()?;
            let quiet = common.quiet;
            let outcome = cmd_compare(&config, |rep, ruin| {
                note!(quiet, "run {rep}: terminal ruin {ruin:.6}")
            })?;
            let s = &outcome.summary;
            note!(
                quiet,
                "b* = {:.6} (terminal ruin {:.6}); median b_final {:.6}, median terminal ruin {:.6}",
                s.b_star,
                s.b_star_terminal.probability,
                s.b_final.median,
                s.ruin_terminal.median
            );
            note!(quiet, "wrote {}", outcome.csv_path.display());
        }
        Command::Diagnose {
            common,
            corrupt_w_prime,
        } => {
            let config = common.load()?;
            let report = cmd_diagnose(
                &config,
                DiagnoseOptions {
                    corrupt_weight_derivative: corrupt_w_prime,
                },
            )?;
            for c in &report.checks {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                note!(
                    common.quiet,
                    "{verdict} {} statistic={:.3e} threshold={:.3e} {}",
                    c.name,
                    c.statistic,
                    c.threshold,
                    c.detail
                );
            }
            let failures = report.failures();
            if !failures.is_empty() {
                let names: Vec<String> = failures
                    .iter()
                    .map(|c| {
                        format!(
                            "{} (statistic {:.4e}, threshold {:.4e})",
                            c.name, c.statistic, c.threshold
                        )
                    })
                    .collect();
                return Err(Error::Diagnostic(names.join("; ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
