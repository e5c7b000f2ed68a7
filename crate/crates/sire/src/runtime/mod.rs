//! Program execution: interprets an allocated program on the simulated
//! machine.

pub mod env;
pub mod interp;

use crate::alloc::AllocationMap;
use crate::diag::Pos;
use crate::machine::{EndId, Machine, MachineConfig, MachineError, Termination};
use crate::sema::elab::Program;
use std::fmt;
use std::sync::{Arc, Mutex};
use thiserror::Error;

/// The reserved call ID carried by a scope-termination message: the
/// all-ones machine word.
pub const TERMINATE_CALL: i64 = -1;

#[derive(Debug, Clone, Error)]
pub enum Fault {
    #[error("{0}")]
    Machine(MachineError),
    #[error("{pos}: {msg}")]
    Runtime { pos: Pos, msg: String },
}

impl Fault {
    pub fn at(pos: Pos, msg: impl Into<String>) -> Fault {
        Fault::Runtime {
            pos,
            msg: msg.into(),
        }
    }
}

/// Runtime knobs lifted from the machine configuration.
#[derive(Debug, Clone, Copy)]
pub struct RunParams {
    pub backoff_base: u64,
    pub backoff_factor: u64,
    pub backoff_cap: u64,
    pub queue_capacity: Option<u32>,
}

impl From<&MachineConfig> for RunParams {
    fn from(cfg: &MachineConfig) -> Self {
        RunParams {
            backoff_base: cfg.backoff_base,
            backoff_factor: cfg.backoff_factor,
            backoff_cap: cfg.backoff_cap,
            queue_capacity: cfg.queue_capacity,
        }
    }
}

/// One server element's service end, for trace checkers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerEndInfo {
    pub end: EndId,
    pub def: usize,
    pub inst: usize,
    pub index: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DumpValue {
    Int(i64),
    Array(Vec<i64>),
}

impl fmt::Display for DumpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DumpValue::Int(v) => write!(f, "{v}"),
            DumpValue::Array(a) => {
                write!(f, "[")?;
                for (i, v) in a.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    StaticError,
    RuntimeFault,
    Deadlock,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::StaticError => 1,
            ExitStatus::RuntimeFault => 2,
            ExitStatus::Deadlock => 3,
        }
    }
}

/// The result of running a program to quiescence.
#[derive(Debug)]
pub struct Execution {
    pub trace: Vec<crate::machine::Event>,
    pub termination: Termination,
    pub dump: Vec<(String, DumpValue)>,
    pub servers: Vec<ServerEndInfo>,
    pub program: Arc<Program>,
}

impl Execution {
    pub fn status(&self) -> ExitStatus {
        match &self.termination {
            Termination::Quiescent => ExitStatus::Success,
            Termination::Deadlock(_) => ExitStatus::Deadlock,
            Termination::Fault { .. } => ExitStatus::RuntimeFault,
        }
    }

    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        for (name, v) in &self.dump {
            out.push_str(&format!("{name} = {v}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LaunchError {
    #[error("program needs {needed} processors but the machine has {available}")]
    FootprintExceedsMachine { needed: usize, available: u32 },
}

/// Interpret an allocated program on a fresh machine.
pub fn execute(
    prog: Arc<Program>,
    map: Arc<AllocationMap>,
    cfg: MachineConfig,
) -> Result<Execution, LaunchError> {
    if map.total > cfg.processors as usize {
        return Err(LaunchError::FootprintExceedsMachine {
            needed: map.total,
            available: cfg.processors,
        });
    }
    let shared = Arc::new(interp::Shared {
        prog: prog.clone(),
        map,
        params: RunParams::from(&cfg),
        dump: Mutex::new(None),
        servers: Mutex::new(Vec::new()),
    });

    let mut machine = Machine::new(cfg);
    let sh = shared.clone();
    machine
        .spawn_root(
            0,
            Box::new(move |mc| interp::root_main(sh, mc).map_err(|f| f.to_string())),
        )
        .expect("processor 0 exists");
    let outcome = machine.into_outcome();

    let dump = shared.dump.lock().unwrap().take().unwrap_or_default();
    let mut servers = std::mem::take(&mut *shared.servers.lock().unwrap());
    servers.sort_by_key(|s| s.end);

    Ok(Execution {
        trace: outcome.trace,
        termination: outcome.termination,
        dump,
        servers,
        program: prog,
    })
}

/// Compile a source string and execute it. Static failures come back as
/// rendered diagnostics.
pub fn run_source(source: &str, cfg: MachineConfig) -> Result<Execution, String> {
    let ast = crate::frontend::parse_source(source).map_err(|d| d.to_string())?;
    let elaborated = crate::sema::analyze(&ast).map_err(|ds| {
        ds.iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("\n")
    })?;
    let map = crate::alloc::allocate(&elaborated.program);
    execute(Arc::new(elaborated.program), Arc::new(map), cfg).map_err(|e| e.to_string())
}
