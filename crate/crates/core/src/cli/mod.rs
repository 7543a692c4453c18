//! Command-line harness: `gen-data`, `train`, `eval`, `translate`, `pca`, `sweep`.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_eval, cmd_gen_data, cmd_pca, cmd_sweep, cmd_train, cmd_translate, load_data, DataFiles, GOLD_FILE,
    MANIFEST_FILE,
};
pub use config::{apply_override, ExperimentConfig};

use crate::error::Error;
use crate::lang::Lang;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "unmt", about = "Unsupervised NMT with a language discriminator on first-step decoder outputs")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Training seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Weight of the discriminator constraint.
    #[arg(long = "lambda-ld", global = true)]
    pub lambda_ld: Option<f64>,
    /// Beam width for evaluation and translation.
    #[arg(long, global = true)]
    pub beam: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic train/valid/test corpora, gold pairs and a manifest.
    GenData(Overrides),
    /// Train, writing metrics.jsonl and checkpoints into the output directory.
    Train {
        /// Continue from the output directory's last checkpoint.
        #[arg(long)]
        resume: bool,
        #[command(flatten)]
        rest: Overrides,
    },
    /// Score a checkpoint on the gold test pairs.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Second checkpoint for a paired bootstrap comparison.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[command(flatten)]
        rest: Overrides,
    },
    /// Translate sentences read line by line.
    Translate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Source language of the input.
        #[arg(long, default_value = "src")]
        from: String,
        /// Input file; standard input when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        rest: Overrides,
    },
    /// PCA of first-step outputs over the four direction categories.
    Pca {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        rest: Overrides,
    },
    /// Train once per λ and print the comparison table.
    Sweep {
        /// Comma-separated λ values.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[command(flatten)]
        rest: Overrides,
    },
}

#[derive(Debug, Args, Clone, Default)]
pub struct Overrides {
    /// Config overrides such as `train.batch_size=16`.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Command {
    fn overrides(&self) -> &[String] {
        match self {
            Command::GenData(o)
            | Command::Train { rest: o, .. }
            | Command::Eval { rest: o, .. }
            | Command::Translate { rest: o, .. }
            | Command::Pca { rest: o, .. }
            | Command::Sweep { rest: o, .. } => &o.overrides,
        }
    }
}

/// Resolves the config: file, then dotted overrides, then flags.
pub fn resolve_config(common: &Common, overrides: &[String]) -> crate::Result<ExperimentConfig> {
    let mut all = overrides.to_vec();
    if let Some(s) = common.seed {
        all.push(format!("seed={s}"));
    }
    if let Some(o) = &common.out {
        all.push(format!("out_dir={}", toml::Value::String(o.display().to_string())));
    }
    if let Some(l) = common.lambda_ld {
        all.push(format!("train.lambda_ld={l:?}"));
    }
    if let Some(b) = common.beam {
        all.push(format!("eval.beam={b}"));
    }
    ExperimentConfig::load(common.config.as_deref(), &all)
}

/// Parses arguments and runs one subcommand; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve_config(&cli.common, cli.command.overrides()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let result = match &cli.command {
        Command::GenData(_) => cmd_gen_data(&cfg).map(|_| ()),
        Command::Train { resume, .. } => cmd_train(&cfg, *resume).map(|_| ()),
        Command::Eval { checkpoint, compare, .. } => {
            cmd_eval(&cfg, checkpoint.as_deref(), compare.as_deref()).map(|r| {
                println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            })
        }
        Command::Translate { checkpoint, from, input, .. } => match from.as_str() {
            "src" => cmd_translate(&cfg, checkpoint.as_deref(), Lang::Src, input.as_deref()),
            "tgt" => cmd_translate(&cfg, checkpoint.as_deref(), Lang::Tgt, input.as_deref()),
            other => {
                eprintln!("error: --from must be src or tgt, got {other}");
                return EXIT_USAGE;
            }
        },
        Command::Pca { checkpoint, .. } => cmd_pca(&cfg, checkpoint.as_deref()).map(|a| {
            println!("clustering correct={} reversed={}", a.clusters.correct, a.clusters.reversed);
        }),
        Command::Sweep { lambdas, .. } => {
            let ls = lambdas.clone().unwrap_or_else(|| cfg.lambdas.clone());
            cmd_sweep(&cfg, &ls).map(|rows| {
                println!("{}", crate::schedule::SweepRow::HEADER);
                for r in rows {
                    println!("{}", r.to_tsv());
                }
            })
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
