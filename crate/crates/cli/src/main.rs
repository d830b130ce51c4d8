//! `cardiokey`: cardiac cine keyframe detection from dense registration
//! fields. See `cardiokey --help` and the repository README for the file
//! formats. `CARDIOKEY_LOG=info` enables progress output on stderr.

mod commands;
mod runconfig;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cardiokey_core::error::{Error, Result};
use cardiokey_core::phantom::PhantomProfile;

use runconfig::ConfigFlags;

#[derive(Parser)]
#[command(
    name = "cardiokey",
    version,
    about = "Cardiac cine keyframe detection from dense registration fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct DetectArgs {
    /// Input cvol directory (runs registration).
    #[arg(long, required_unless_present = "fields", conflicts_with = "fields")]
    input: Option<PathBuf>,
    /// Precomputed field artifact directory (skips registration).
    #[arg(long)]
    fields: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(clap::Args)]
struct RegisterArgs {
    /// Input cvol directory.
    #[arg(long)]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(clap::Args)]
struct DescribeArgs {
    /// Precomputed field artifact directory.
    #[arg(long)]
    fields: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    /// Directory of per-case keyframe JSON files (case id = file stem).
    #[arg(long)]
    predictions: PathBuf,
    /// Reference JSON file: {"cases": {"<id>": {"T": ..., "keyframes": ...}}}.
    #[arg(long)]
    references: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct PhantomArgs {
    /// Output directory (a cvol plus truth.json).
    #[arg(long)]
    out: PathBuf,
    /// Schedule profile: normal, no-md-peak, weak-relaxation.
    #[arg(long, default_value = "normal")]
    profile: String,
    /// Frame count.
    #[arg(long, default_value_t = 30)]
    t: usize,
    /// Grid extent, e.g. 64x64 or 10x64x64 (slowest axis first).
    #[arg(long, default_value = "64x64")]
    dims: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Additive intensity noise level (absolute units).
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// Physical spacing written into the cvol header, mm per axis.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Also write the analytic motion fields as a field artifact.
    #[arg(long)]
    emit_fields: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: volume -> registration -> descriptor -> keyframes.
    Detect(DetectArgs),
    /// Registration only: volume -> field artifact + loss trace.
    Register(RegisterArgs),
    /// Descriptor only, from precomputed fields.
    Describe(DescribeArgs),
    /// Score keyframe predictions against references (cyclic frame difference).
    Evaluate(EvaluateArgs),
    /// Generate a synthetic phantom with ground truth.
    Phantom(PhantomArgs),
}

/// Progress logging, enabled by a non-empty CARDIOKEY_LOG.
pub fn verbose(msg: &str) {
    if let Ok(v) = std::env::var("CARDIOKEY_LOG") {
        if !v.is_empty() && v != "0" && !v.eq_ignore_ascii_case("off") {
            eprintln!("[cardiokey] {msg}");
        }
    }
}

fn parse_dims(text: &str) -> Result<Vec<usize>> {
    let dims: Vec<usize> = text
        .split(['x', 'X'])
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("dims component '{p}' is not a number")))
        })
        .collect::<Result<_>>()?;
    if dims.len() < 2 || dims.len() > 3 {
        return Err(Error::invalid(format!(
            "dims '{text}' must have 2 or 3 components"
        )));
    }
    Ok(dims)
}

fn in_pool<F: FnOnce() -> Result<()> + Send>(threads: Option<usize>, f: F) -> Result<()> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            pool.install(f)
        }
        None => f(),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Detect(args) => {
            let config = runconfig::resolve(&args.flags)?;
            let threads = runconfig::thread_count(&args.flags)?;
            in_pool(threads, || {
                commands::detect(
                    args.input.as_deref(),
                    args.fields.as_deref(),
                    &args.out,
                    &config,
                    args.flags.emit_intermediates,
                )
            })
        }
        Command::Register(args) => {
            let config = runconfig::resolve(&args.flags)?;
            let threads = runconfig::thread_count(&args.flags)?;
            in_pool(threads, || commands::register_cmd(&args.input, &args.out, &config))
        }
        Command::Describe(args) => {
            let config = runconfig::resolve(&args.flags)?;
            let threads = runconfig::thread_count(&args.flags)?;
            in_pool(threads, || commands::describe(&args.fields, &args.out, &config))
        }
        Command::Evaluate(args) => {
            commands::evaluate_cmd(&args.predictions, &args.references, &args.out)
        }
        Command::Phantom(args) => {
            let resolved = commands::PhantomArgsResolved {
                dims: parse_dims(&args.dims)?,
                t: args.t,
                profile: args.profile.parse::<PhantomProfile>()?,
                seed: args.seed,
                noise_sigma: args.noise_sigma,
                spacing_mm: args.spacing,
                emit_fields: args.emit_fields,
            };
            commands::phantom_cmd(&resolved, &args.out)
        }
    }
}

/// Parse/config problems exit 2, a degenerate mask 3, numerical failures 4,
/// anything else 1.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_)
        | Error::Parse { .. }
        | Error::Io { .. }
        | Error::DimMismatch { .. }
        | Error::NonFinite(_) => 2,
        Error::DegenerateMask { .. } => 3,
        Error::NumericalFailure { .. } => 4,
        Error::FramePair { source, .. } => exit_code(source),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
