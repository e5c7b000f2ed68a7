//! Command-line driver: check, alloc-map, run and trace subcommands.

use crate::alloc;
use crate::machine::{event::render_trace, MachineConfig, Termination};
use crate::runtime::{self, ExitStatus};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::sync::Arc;

const USAGE_EXIT: i32 = 64;

#[derive(Parser)]
#[command(
    name = "sire",
    about = "Compile and run sire programs on a deterministic simulated machine",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunOptions {
    /// Source file (.sire)
    source: PathBuf,
    /// Number of processors in the simulated machine
    #[arg(long = "processors", default_value_t = 64)]
    processors: u32,
    /// Scheduler tie-break seed
    #[arg(long = "seed", default_value_t = 0)]
    seed: u64,
    /// Override the per-server connection queue capacity
    #[arg(long = "queue-capacity")]
    queue_capacity: Option<u32>,
    /// Initial backoff delay in ticks after a rejected connect
    #[arg(long = "backoff-base", default_value_t = 4)]
    backoff_base: u64,
    /// Maximum backoff delay in ticks
    #[arg(long = "backoff-cap", default_value_t = 256)]
    backoff_cap: u64,
    /// Print final values of the program's top-level variables
    #[arg(long = "dump-vars")]
    dump_vars: bool,
    /// Write the machine trace to this path
    #[arg(long = "trace")]
    trace: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and statically check a program
    Check { source: PathBuf },
    /// Check a program and print its processor allocation map
    AllocMap { source: PathBuf },
    /// Execute a program
    Run(RunOptions),
    /// Execute a program and write its trace (defaults to <source>.trace)
    Trace(RunOptions),
}

impl RunOptions {
    fn machine_config(&self) -> MachineConfig {
        MachineConfig {
            processors: self.processors,
            seed: self.seed,
            queue_capacity: self.queue_capacity,
            backoff_base: self.backoff_base,
            backoff_cap: self.backoff_cap,
            ..MachineConfig::default()
        }
    }
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => USAGE_EXIT,
            };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Check { source } => check(&source).map(|_| 0).unwrap_or(1),
        Command::AllocMap { source } => alloc_map(&source),
        Command::Run(opts) => execute(&opts, false),
        Command::Trace(opts) => execute(&opts, true),
    }
}

struct Checked {
    program: crate::sema::elab::Program,
    file: String,
}

fn check(source: &PathBuf) -> Result<Checked, ()> {
    let file = source.display().to_string();
    let text = match std::fs::read_to_string(source) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{file}: {e}");
            return Err(());
        }
    };
    let ast = match crate::frontend::parse_source(&text) {
        Ok(p) => p,
        Err(d) => {
            eprintln!("{file}:{d}");
            return Err(());
        }
    };
    match crate::sema::analyze(&ast) {
        Ok(elab) => Ok(Checked {
            program: elab.program,
            file,
        }),
        Err(ds) => {
            for d in ds {
                eprintln!("{file}:{d}");
            }
            Err(())
        }
    }
}

fn alloc_map(source: &PathBuf) -> i32 {
    let checked = match check(source) {
        Ok(c) => c,
        Err(()) => return 1,
    };
    let map = alloc::allocate(&checked.program);
    print!("{}", map.render(&checked.program));
    0
}

fn execute(opts: &RunOptions, with_trace: bool) -> i32 {
    let checked = match check(&opts.source) {
        Ok(c) => c,
        Err(()) => return 1,
    };
    let map = alloc::allocate(&checked.program);
    let exec = match runtime::execute(
        Arc::new(checked.program),
        Arc::new(map),
        opts.machine_config(),
    ) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{}: {e}", checked.file);
            return ExitStatus::StaticError.code();
        }
    };

    if with_trace {
        let path = opts
            .trace
            .clone()
            .unwrap_or_else(|| opts.source.with_extension("trace"));
        if let Err(e) = std::fs::write(&path, render_trace(&exec.trace)) {
            eprintln!("{}: cannot write trace: {e}", path.display());
            return ExitStatus::RuntimeFault.code();
        }
    } else if let Some(path) = &opts.trace {
        if let Err(e) = std::fs::write(path, render_trace(&exec.trace)) {
            eprintln!("{}: cannot write trace: {e}", path.display());
            return ExitStatus::RuntimeFault.code();
        }
    }

    match &exec.termination {
        Termination::Quiescent => {}
        Termination::Deadlock(graph) => {
            eprintln!("{}: deadlock detected", checked.file);
            eprint!("{graph}");
        }
        Termination::Fault { thread, message } => {
            eprintln!("{}: thread {thread}: {message}", checked.file);
        }
    }
    if opts.dump_vars {
        print!("{}", exec.dump_text());
    }
    exec.status().code()
}
