//! Command-line interface: `snce toy | neighbor | verify | bench`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or config error,
//! 3 numeric failure at runtime.

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! emit {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

mod bench;
mod config;
mod manifest;
mod neighbor;
mod toy;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

pub use config::ExperimentConfig;
pub use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "snce", version, about = "Neighbor-aware targets for token prediction")]
pub struct Cli {
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for reports and the run manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the 2-D mixture toy under several objectives and compare them.
    Toy(ToyArgs),
    /// Print the neighbor distribution of a latent.
    Neighbor(NeighborArgs),
    /// Run the property and oracle suite.
    Verify(VerifyArgs),
    /// Time dense and top-M target computation on a random codebook.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    /// Experiment config (JSON). Defaults to the built-in configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated seeds; overrides `--seed` and the config.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Override the number of training steps.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct NeighborArgs {
    /// Codebook file in the SNCB binary format.
    #[arg(long, conflicts_with = "grid")]
    pub codebook: Option<PathBuf>,
    /// Regular 2-D grid codebook as `lo,hi,n`.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub grid: Option<Vec<f64>>,
    /// Latent coordinates, comma-separated.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true, required = true)]
    pub z: Vec<f64>,
    #[arg(long, conflicts_with = "two_tau_sq")]
    pub tau: Option<f64>,
    /// Temperature given as `2τ²`.
    #[arg(long)]
    pub two_tau_sq: Option<f64>,
    /// Keep only the M nearest codes.
    #[arg(long)]
    pub topk: Option<usize>,
    /// Number of lines to print.
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    /// Write the full distribution as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Corrupt the analytic logit gradient (exercises the failure path).
    #[arg(long, hide = true)]
    pub break_gradient: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 131_072)]
    pub k: usize,
    #[arg(long, default_value_t = 64)]
    pub d: usize,
    /// Number of latents.
    #[arg(long, default_value_t = 256)]
    pub l: usize,
    #[arg(long)]
    pub topk: Option<usize>,
    #[arg(long, default_value_t = crate::neighbor::DEFAULT_TAU)]
    pub tau: f64,
}

/// Outcome of a command that ran to completion.
pub(crate) enum Outcome {
    Ok,
    /// Checks ran but some failed.
    Failed(Vec<String>),
}

pub(crate) struct Context {
    pub seed: u64,
    pub seed_given: bool,
    pub out: Option<PathBuf>,
    pub json: bool,
}

pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Diverged { .. } | Error::NonFinite(_) => 3,
        _ => 2,
    }
}

/// Parse `args` and run the selected command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        // Only fails if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Context {
        seed: cli.seed.unwrap_or(0),
        seed_given: cli.seed.is_some(),
        out: cli.out,
        json: cli.json,
    };
    let result = match &cli.command {
        Command::Toy(a) => toy::run(&ctx, a),
        Command::Neighbor(a) => neighbor::run(&ctx, a),
        Command::Verify(a) => verify(&ctx, a),
        Command::Bench(a) => bench::run(&ctx, a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(names)) => {
            eprintln!("failed: {}", names.join(", "));
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn verify(ctx: &Context, args: &VerifyArgs) -> crate::Result<Outcome> {
    let mut manifest = RunManifest::start("verify", &serde_json::json!({
        "break_gradient": args.break_gradient,
    }), ctx.seed);
    let report = crate::verify::run_suite(&crate::verify::VerifyOptions {
        seed: ctx.seed,
        break_gradient: args.break_gradient,
    })?;
    if ctx.json {
        emit!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for c in &report.checks {
            emit!(
                "{:<4} {:<30} {:>12.3e} < {:<9.1e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold,
                c.detail
            );
        }
    }
    if let Some(dir) = &ctx.out {
        manifest::write_json(dir, "verify.json", &report, &mut manifest)?;
    }
    manifest.finish(ctx.out.as_deref())?;
    if report.all_passed() {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::Failed(
            report.failures().into_iter().map(String::from).collect(),
        ))
    }
}
