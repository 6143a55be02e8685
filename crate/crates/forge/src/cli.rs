//! Command-line entry point.
//!
//! Exit statuses are a stable contract: 0 success, 1 usage error, 2 backend
//! or runtime failure, 3 malformed input file. Every error path prints one
//! machine-greppable line of the form `error: <category>: <reason>` to
//! stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use aim_forge_core::backend::{Backend, ScriptedBackend};
use aim_forge_core::latex::{emit_latex_report, lint_latex, ReportOptions};
use aim_forge_core::orchestrator::{Engine, RunError, RunOutcome};
use aim_forge_core::prvsim::{csv_header, simulate_run, ReviewerModel};
use aim_forge_core::trajectory::read_trajectory;
use aim_forge_core::transcribe::unicode_math_to_latex;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::files::{
    load_config, load_problem, load_script, write_stats, FileError, FileSink, SystemClock,
};
use crate::remote::RemoteBackend;

#[derive(Parser)]
#[command(
    name = "aim-forge",
    version,
    about = "Explorer/verifier/refiner orchestration over chat-completion backends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full workflow on a problem file.
    Run {
        /// Problem file (TOML: title, assumption blocks, hint blocks, problem).
        problem: PathBuf,
        /// Run-config file (TOML mirroring the run tunables).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for trajectory.aimtrj and stats.
        #[arg(long)]
        out: PathBuf,
        /// Replay canned responses from a JSONL script instead of calling a
        /// remote endpoint (fully offline).
        #[arg(long)]
        scripted: Option<PathBuf>,
    },
    /// Print acceptance statistics of the verification policy as CSV.
    Simulate {
        /// Flaw-detection probability of one review.
        #[arg(long)]
        q: f64,
        /// False-rejection probability of one review.
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        /// Repair probability of one refine round.
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        /// Reviews per verification round.
        #[arg(long)]
        k: u32,
        /// Refine cap (rounds after the first rejection).
        #[arg(long)]
        cap: u32,
        /// Monte Carlo trials per record population.
        #[arg(long)]
        trials: u64,
        /// RNG seed.
        #[arg(long)]
        seed: u64,
    },
    /// Render a trajectory file as a LaTeX report.
    Report {
        /// Trajectory file (.aimtrj).
        trajectory: PathBuf,
        /// Transcribe Unicode math into LaTeX commands.
        #[arg(long)]
        transcribe: bool,
        /// Output .tex path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter a text file through the Unicode-math transcriber to stdout.
    Transcribe { file: PathBuf },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Backend(String),
    Io(String),
    Malformed(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Backend(_) | CliError::Io(_) => 2,
            CliError::Malformed(_) => 3,
        }
    }

    fn reason_line(&self) -> String {
        match self {
            CliError::Usage(detail) => format!("error: usage: {detail}"),
            CliError::Backend(detail) => format!("error: backend-failure: {detail}"),
            CliError::Io(detail) => format!("error: io: {detail}"),
            CliError::Malformed(detail) => format!("error: malformed-input: {detail}"),
        }
    }
}

impl From<FileError> for CliError {
    fn from(e: FileError) -> Self {
        CliError::Malformed(e.to_string())
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Backend(inner) => CliError::Backend(inner.to_string()),
            RunError::Sink(inner) => CliError::Io(inner.to_string()),
            other => CliError::Backend(format!("internal engine failure: {other}")),
        }
    }
}

/// Parses and dispatches; returns the process exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            eprintln!("error: usage: invalid command line");
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.reason_line());
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            problem,
            config,
            out,
            scripted,
        } => cmd_run(&problem, &config, &out, scripted.as_deref()),
        Command::Simulate {
            q,
            p,
            r,
            k,
            cap,
            trials,
            seed,
        } => cmd_simulate(q, p, r, k, cap, trials, seed),
        Command::Report {
            trajectory,
            transcribe,
            out,
        } => cmd_report(&trajectory, transcribe, &out),
        Command::Transcribe { file } => cmd_transcribe(&file),
    }
}

fn cmd_run(
    problem: &Path,
    config: &Path,
    out: &Path,
    scripted: Option<&Path>,
) -> Result<(), CliError> {
    let ctx = load_problem(problem)?;
    let loaded = load_config(config)?;
    std::fs::create_dir_all(out).map_err(|e| {
        CliError::Io(format!(
            "cannot create output directory {}: {e}",
            out.display()
        ))
    })?;
    let trajectory_path = out.join("trajectory.aimtrj");
    let stats_path = out.join("stats");
    let mut sink = FileSink::create(&trajectory_path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", trajectory_path.display())))?;
    let clock = SystemClock;

    let outcome: RunOutcome = match scripted {
        Some(script_path) => {
            let script = load_script(script_path)?;
            let mut backend = ScriptedBackend::new(script);
            drive(ctx, loaded, &mut backend, &mut sink, &clock)?
        }
        None => {
            let settings = loaded.backend.clone().ok_or_else(|| {
                CliError::Malformed(format!(
                    "{} has no [backend] section and --scripted was not given",
                    config.display()
                ))
            })?;
            let mut backend = RemoteBackend::from_env(settings.endpoint, settings.model)
                .map_err(|e| CliError::Backend(e.to_string()))?;
            drive(ctx, loaded, &mut backend, &mut sink, &clock)?
        }
    };

    write_stats(&stats_path, &outcome)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", stats_path.display())))?;
    println!("stop_reason={}", outcome.stop_reason);
    println!("solved={}", outcome.solved);
    println!("iterations={}", outcome.iterations);
    println!(
        "conjectures_proposed={}",
        outcome.stats.conjectures_proposed
    );
    println!("accepted={}", outcome.stats.accepted);
    println!("rejected_rounds={}", outcome.stats.rejected);
    println!("discarded={}", outcome.stats.discarded);
    println!("duplicates_skipped={}", outcome.stats.duplicates_skipped);
    println!("reviews_issued={}", outcome.stats.reviews_issued);
    println!("lemmas={}", outcome.store.len());
    println!("trajectory={}", trajectory_path.display());
    println!("stats={}", stats_path.display());
    Ok(())
}

fn drive(
    ctx: aim_forge_core::model::ProblemContext,
    loaded: crate::files::LoadedConfig,
    backend: &mut dyn Backend,
    sink: &mut FileSink,
    clock: &SystemClock,
) -> Result<RunOutcome, CliError> {
    let mut engine =
        Engine::with_templates(ctx, loaded.run, backend, sink, clock, loaded.templates)?;
    let stop_reason = engine.run_to_completion()?;
    Ok(engine.into_outcome(stop_reason))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    q: f64,
    p: f64,
    r: f64,
    k: u32,
    cap: u32,
    trials: u64,
    seed: u64,
) -> Result<(), CliError> {
    let model = ReviewerModel::new(q, p, r).map_err(|e| CliError::Usage(e.to_string()))?;
    let result =
        simulate_run(&model, k, cap, trials, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("{}", csv_header());
    println!("{}", result.csv_row(&model, k, cap));
    Ok(())
}

fn cmd_report(trajectory: &Path, transcribe: bool, out: &Path) -> Result<(), CliError> {
    let bytes = std::fs::read(trajectory).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Malformed(format!("missing file: {}", trajectory.display()))
        } else {
            CliError::Io(format!("cannot read {}: {e}", trajectory.display()))
        }
    })?;
    let read = read_trajectory(&bytes)
        .map_err(|e| CliError::Malformed(format!("{}: {e}", trajectory.display())))?;
    if read.truncated_tail {
        eprintln!(
            "warning: {} ended mid-record; dropped the partial final line",
            trajectory.display()
        );
    }
    let doc = emit_latex_report(
        &read.entries,
        &ReportOptions {
            transcribe_unicode: transcribe,
        },
    );
    debug_assert!(lint_latex(&doc).is_ok());
    std::fs::write(out, doc)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", out.display())))?;
    Ok(())
}

fn cmd_transcribe(file: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(file).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Malformed(format!("missing file: {}", file.display()))
        } else {
            CliError::Io(format!("cannot read {}: {e}", file.display()))
        }
    })?;
    print!("{}", unicode_math_to_latex(&text));
    Ok(())
}
