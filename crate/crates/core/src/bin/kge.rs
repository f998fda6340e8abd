use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kge::cli::{self, ExportFormat};
use kge::data::Split;

#[derive(Parser)]
#[command(name = "kge", version, about = "Tensor-factorization knowledge graph completion")]
struct Args {
    /// Worker threads for training and evaluation.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Valid,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Tsv,
    Bin,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes model, history, report and manifest to --out.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Filtered MRR / Hits@N of a saved model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Sparsity-vs-MRR sweep as CSV.
    Sparsify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated target sparsities, e.g. 0,0.3,0.6
        #[arg(long)]
        targets: String,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Balance report of a CP model before and after rebalancing.
    CheckDuality {
        #[arg(long)]
        model: PathBuf,
    },
    /// Export entity embeddings.
    Export {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Writes to stdout, ignoring a closed pipe (e.g. `kge ... | head`).
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(args: Args) -> kge::Result<()> {
    match args.command {
        Command::Train { config, out } => {
            let o = cli::cmd_train(&config, &out, args.workers)?;
            emit(&o.test_report.to_string());
            emit(&o.test_report.to_json());
        }
        Command::Evaluate { model, config, split } => {
            let split = match split {
                SplitArg::Valid => Split::Valid,
                SplitArg::Test => Split::Test,
            };
            let report = cli::cmd_evaluate(&model, &config, split, args.workers)?;
            emit(&report.to_string());
            emit(&report.to_json());
        }
        Command::Sparsify {
            model,
            config,
            targets,
            out,
        } => {
            let targets = cli::parse_targets(&targets)?;
            let csv = cli::cmd_sparsify(&model, &config, &targets, args.workers)?.to_csv();
            match out {
                Some(path) => std::fs::write(&path, csv).map_err(|e| kge::KgeError::Io { path, source: e })?,
                None => emit(csv.trim_end()),
            }
        }
        Command::CheckDuality { model } => {
            let (before, after) = cli::cmd_check_duality(&model)?;
            emit(&format!("== before rebalance ==\n{}", before.to_text()));
            emit(&format!("== after rebalance ==\n{}", after.to_text()));
        }
        Command::Export { model, format, out } => {
            let format = match format {
                FormatArg::Tsv => ExportFormat::Tsv,
                FormatArg::Bin => ExportFormat::Binary,
            };
            cli::cmd_export(&model, format, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KGE_LOG", "warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", cli::error_line(&err));
            ExitCode::from(cli::exit_code(&err) as u8)
        }
    }
}
