//! Command line front end for the variation-Carleson toolkit: partition
//! search columns, packet transform dumps, stopping-time sparse collections
//! with domination reports, multiplier reconstruction sweeps, and the
//! weighted operator experiment, all reproducible from one seeded config.

mod commands;
mod config;
mod io;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use varcarleson::error::VcError;

#[derive(Parser)]
#[command(name = "varcarleson", version, about = "Variation-Carleson analysis toolkit")]
struct Cli {
    /// TOML run configuration; defaults to the canonical built-in values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for emitted tables and reports.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Variation partition search over a signal file: emits `x,value`.
    Carleson {
        #[arg(long)]
        signal: PathBuf,
    },
    /// Packet transform dump over the position-scale-frequency lattice.
    Transform {
        #[arg(long)]
        signal: PathBuf,
    },
    /// Truncated packet transform driven by the signal's argmax partitions.
    EmbedA {
        #[arg(long)]
        signal: PathBuf,
    },
    /// Stopping-time sparse collection plus a domination report.
    Sparse {
        /// First signal file; omit both to generate a seeded pair.
        #[arg(long)]
        f: Option<PathBuf>,
        /// Second signal file.
        #[arg(long)]
        g: Option<PathBuf>,
    },
    /// Re-certify a stored collection and recompute its domination ratio.
    Verify {
        /// JSON file produced by the sparse command.
        #[arg(long)]
        collection: PathBuf,
        #[arg(long)]
        f: Option<PathBuf>,
        #[arg(long)]
        g: Option<PathBuf>,
    },
    /// Two-sided frequency cutoff multiplier sweep: emits `zeta,multiplier`.
    Reconstruct {
        #[arg(long)]
        xi_minus: f64,
        #[arg(long)]
        xi_plus: f64,
    },
    /// Power-weight operator ratio table and log-log slope fit.
    Weights,
    /// Print the canonical configuration as TOML.
    Defaults,
}

fn exit_code(err: &anyhow::Error) -> i32 {
    if let Some(vc) = err.downcast_ref::<VcError>() {
        return vc.exit_code();
    }
    if err.downcast_ref::<std::io::Error>().is_some() || err.downcast_ref::<serde_json::Error>().is_some() {
        return 3;
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Cmd::Defaults = cli.cmd {
        return Ok(commands::cmd_defaults()?);
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| VcError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = config::load(cli.config.as_deref(), cli.seed)?;
    let ctx = commands::Ctx { cfg, out: cli.out_dir };
    match cli.cmd {
        Cmd::Carleson { signal } => commands::cmd_carleson(&ctx, &signal)?,
        Cmd::Transform { signal } => commands::cmd_transform(&ctx, &signal)?,
        Cmd::EmbedA { signal } => commands::cmd_embed_a(&ctx, &signal)?,
        Cmd::Sparse { f, g } => commands::cmd_sparse(&ctx, f.as_deref(), g.as_deref())?,
        Cmd::Verify { collection, f, g } => {
            commands::cmd_verify(&ctx, &collection, f.as_deref(), g.as_deref())?
        }
        Cmd::Reconstruct { xi_minus, xi_plus } => commands::cmd_reconstruct(&ctx, xi_minus, xi_plus)?,
        Cmd::Weights => commands::cmd_weights(&ctx)?,
        Cmd::Defaults => unreachable!("handled above"),
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
