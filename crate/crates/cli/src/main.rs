//! chemval: validate SMILES corpora, lint model outputs, curate and split
//! datasets, compute evaluation tables, compare models, and run the LoRA
//! toy demo.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};
use commands::LoraDemoArgs;
use config::Config;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "chemval", version, about = "Chemistry output grading and curation toolkit")]
struct Cli {
    /// RNG seed used by seeded subcommands.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads for per-document work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a file of SMILES strings, one per line.
    Validate {
        input: PathBuf,
        /// Per-line report records (JSONL); stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check model-output documents against the format profile.
    FormatCheck {
        /// Directory of .md/.txt files, or a JSONL of {id, text}.
        input: PathBuf,
        /// Profile config listing mandatory requirements.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Standardize, quality-control, deduplicate, and emit instruction
    /// records.
    Curate {
        input: PathBuf,
        /// Three-field instruction records (JSONL).
        #[arg(long)]
        out_records: PathBuf,
        /// Quality-control report (JSONL).
        #[arg(long)]
        out_qc: Option<PathBuf>,
    },
    /// Scaffold-aware train/validation/test split.
    Split {
        input: PathBuf,
        /// Comma-separated split fractions.
        #[arg(long, default_value = "0.85,0.10,0.05")]
        ratios: String,
        /// Split manifest (JSONL).
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the full evaluation pipeline over a directory of model outputs.
    Evaluate {
        /// Directory holding the output documents.
        #[arg(long)]
        outputs: PathBuf,
        /// Sidecar metadata: JSONL of {id, model, task_id, task_category,
        /// difficulty, path}.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Starting-material catalog (SMILES lines).
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Transformation-template table.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Report records (JSONL).
        #[arg(long)]
        report: PathBuf,
    },
    /// Pairwise model comparisons from a task-verdict table.
    Compare {
        /// JSONL of {task, model, pass}.
        verdicts: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train the toy LoRA model and print its invariant checks.
    LoraDemo {
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 16)]
        rank: usize,
        #[arg(long, default_value_t = 32.0)]
        alpha: f64,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        /// Training log (JSONL).
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = run(cli);
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    let seed = cli.seed;
    let jobs = cli.jobs;
    match cli.command {
        Command::Validate { input, output } => commands::run_in_pool(jobs, move || {
            commands::cmd_validate(&input, output.as_deref())
        }),
        Command::FormatCheck {
            input,
            profile,
            output,
        } => commands::run_in_pool(jobs, move || {
            commands::cmd_format_check(&input, profile.as_deref(), output.as_deref())
        }),
        Command::Curate {
            input,
            out_records,
            out_qc,
        } => commands::run_in_pool(jobs, move || {
            commands::cmd_curate(&input, &out_records, out_qc.as_deref())
        }),
        Command::Split {
            input,
            ratios,
            output,
        } => {
            let ratios = commands::parse_ratios(&ratios)?;
            commands::run_in_pool(jobs, move || {
                commands::cmd_split(&input, ratios, seed, &output)
            })
        }
        Command::Evaluate {
            outputs,
            manifest,
            profile,
            catalog,
            rules,
            report,
        } => commands::run_in_pool(jobs, move || {
            commands::cmd_evaluate(
                &outputs,
                &manifest,
                profile.as_deref(),
                catalog.as_deref(),
                rules.as_deref(),
                &report,
                &config,
            )
        }),
        Command::Compare { verdicts, output } => {
            commands::cmd_compare(&verdicts, output.as_deref(), &config)
        }
        Command::LoraDemo {
            dim,
            rank,
            alpha,
            samples,
            checkpoint_dir,
            log,
        } => {
            let args = LoraDemoArgs {
                dim,
                rank,
                alpha,
                samples,
                checkpoint_dir,
                log_path: log,
            };
            commands::cmd_lora_demo(&args, seed, &config)
        }
    }
}
