//! `syrenets` command-line driver.
//!
//! Exit codes: 0 success, 2 usage or I/O error, 3 numeric failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CmdResult, EvalArgs, Failure, GenData};
use config::Settings;

#[derive(Parser, Debug)]
#[command(name = "syrenets", version, about = "Learn Lagrangians with symbolic residual networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample double-pendulum training and test sets.
    GenData {
        /// Training rows.
        #[arg(long, default_value_t = 32000)]
        count: usize,
        /// Test rows.
        #[arg(long, default_value_t = 10000)]
        test_count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for train.csv and test.csv.
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Train one model and write metrics, checkpoint and report.
    Train {
        #[command(flatten)]
        run: RunFlags,
        /// Directory holding train.csv (and optionally test.csv).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Mean squared error of a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// `train` or `test`.
        #[arg(long, default_value = "test")]
        split: String,
        /// Defaults to the mode the checkpoint was trained in.
        #[arg(long)]
        mode: Option<String>,
        /// Evaluate only the first rows of the split.
        #[arg(long)]
        rows: Option<usize>,
    },
    /// Print and write the soft and argmax equations of a SyReNets checkpoint.
    Extract {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory whose train.csv supplies the reference batch.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Defaults to the checkpoint's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare reverse-mode gradients with finite differences at a fresh
    /// initialization.
    Gradcheck {
        #[command(flatten)]
        run: RunFlags,
        /// Directory whose train.csv supplies the batch.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train several seeds and summarize them in best/best5/all/worst5 groups.
    Sweep {
        #[command(flatten)]
        run: RunFlags,
        /// Number of consecutive seeds, starting at --seed.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
}

/// Flags shared by commands that resolve a full run configuration.
#[derive(Args, Debug)]
struct RunFlags {
    /// `syrenets`, `nn` or `sysid`.
    #[arg(long)]
    method: Option<String>,
    /// `direct` or `indirect`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Step budget.
    #[arg(long)]
    steps: Option<u64>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    seconds: Option<f64>,
    /// key=value settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunFlags {
    fn settings(&self, extra: &[(&str, Option<String>)]) -> anyhow::Result<Settings> {
        let mut flags = vec![
            ("method", self.method.clone()),
            ("mode", self.mode.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("steps", self.steps.map(|v| v.to_string())),
            ("seconds", self.seconds.map(|v| v.to_string())),
        ];
        flags.extend_from_slice(extra);
        let mut s = Settings::resolve(self.config.as_deref(), &flags)?;
        // An explicit budget on the command line replaces the other kind
        // from the config file.
        if self.steps.is_some() && self.seconds.is_none() {
            s.set("seconds", "")?;
        }
        if self.seconds.is_some() && self.steps.is_none() {
            s.set("steps", "")?;
        }
        Ok(s)
    }
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::GenData {
            count,
            test_count,
            seed,
            out,
        } => commands::gen_data(&GenData {
            count,
            test_count,
            seed,
            out,
        }),
        Command::Train { run, data, out } => commands::cmd_train(run.settings(&[])?, &data, &out),
        Command::Eval {
            checkpoint,
            data,
            split,
            mode,
            rows,
        } => commands::cmd_eval(&EvalArgs {
            checkpoint,
            data,
            split,
            mode,
            rows,
        })
        .map(|_| ()),
        Command::Extract { checkpoint, data, out } => {
            commands::cmd_extract(&checkpoint, data.as_deref(), out.as_deref())
        }
        Command::Gradcheck { run, data } => commands::cmd_gradcheck(run.settings(&[])?, data.as_deref()),
        Command::Sweep { run, seeds, data, out } => {
            let s = run.settings(&[("seeds", seeds.map(|v| v.to_string()))])?;
            commands::cmd_sweep(s, &data, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let kind = match f {
                Failure::Usage(_) => "error",
                Failure::Numeric(_) => "numeric failure",
            };
            eprintln!("{kind}: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
