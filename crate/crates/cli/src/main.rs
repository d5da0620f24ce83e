//! `shiftsel` — pipeline driver for the algorithm-selection workbench.
//!
//! Every command is deterministic under a fixed config and seed, never
//! mutates its inputs, and writes into a run directory named by the
//! configuration hash. Exit codes: 0 success, 2 usage/configuration,
//! 3 I/O, 4 corrupt or mismatched artifacts, 5 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{load_config, Overrides};

#[derive(Parser)]
#[command(
    name = "shiftsel",
    version,
    about = "Build shifted binary tasks, train candidate algorithms, and learn which algorithm to pick"
)]
struct Cli {
    /// TOML experiment config; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads: 1 = sequential, 0 = all cores. Overrides the
    /// SHIFTSEL_WORKERS environment variable and the config file.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output root override (default "runs").
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print the planned work without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Expand the task grid into a task-spec file, skipping infeasible entries.
    GenTasks,
    /// Train every candidate algorithm on every task (checkpointed, resumable).
    BuildMeta {
        /// Task-spec file (default: tasks.jsonl in the run directory).
        #[arg(long)]
        tasks: Option<PathBuf>,
    },
    /// Train selector artifacts on the meta-train split.
    TrainSelector {
        /// Meta-dataset file (default: meta.jsonl in the run directory).
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Score selector policies on the meta-eval split.
    Evaluate {
        /// Meta-dataset file (default: meta.jsonl in the run directory).
        #[arg(long)]
        meta: Option<PathBuf>,
        /// Selector artifact directory to audit (default: selectors/ in the run directory).
        #[arg(long)]
        selectors: Option<PathBuf>,
    },
    /// Run gap, scaling, and descriptor-ablation analyses; write CSVs.
    Analyze {
        /// Meta-dataset file (default: meta.jsonl in the run directory).
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Render a tree selector artifact to DOT and text rules.
    ExportTree {
        /// Selector artifact (default: selectors/tree.json in the run directory).
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
}

fn exit_code(e: &shiftsel::Error) -> i32 {
    use shiftsel::Error;
    match e {
        Error::Io { .. } => 3,
        Error::Parse { .. } | Error::FingerprintMismatch { .. } => 4,
        Error::Divergence { .. } | Error::NoImprovement { .. } | Error::SamplingFailure { .. } => 5,
        _ => 2,
    }
}

fn run(cli: &Cli) -> shiftsel::Result<()> {
    let overrides = Overrides {
        seed: cli.seed,
        workers: cli.workers,
        out: cli.out.clone(),
    };
    let cfg = load_config(cli.config.as_deref(), &overrides)?;
    if cfg.workers >= 2 {
        // Pin the global thread pool to the requested width. This can
        // only fail if a pool already exists, which a fresh process
        // never has.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global();
    }
    let ctx = commands::Ctx::prepare(cfg, cli.dry_run)?;
    match &cli.cmd {
        Cmd::GenTasks => commands::gen_tasks(&ctx),
        Cmd::BuildMeta { tasks } => commands::build_meta(&ctx, tasks),
        Cmd::TrainSelector { meta } => commands::train_selector(&ctx, meta),
        Cmd::Evaluate { meta, selectors } => commands::evaluate_cmd(&ctx, meta, selectors),
        Cmd::Analyze { meta } => commands::analyze(&ctx, meta),
        Cmd::ExportTree { artifact } => commands::export_tree_cmd(&ctx, artifact),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
