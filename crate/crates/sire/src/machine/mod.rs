//! Deterministic simulator of the target machine: addressed processors,
//! threads, channel ends with in-order point-to-point messaging, and
//! many-to-one connection management with bounded request queues.
//!
//! Simulated threads run on OS threads, but exactly one is ever unparked:
//! a thread runs until its next machine operation, which is handed to the
//! coordinator as a syscall; the coordinator updates machine state, decides
//! who runs next (round-robin over a FIFO run queue) and parks the caller
//! until its operation completes. The trace is therefore a pure function
//! of the program and the machine configuration.
//!
//! Logical time advances only through message latency and explicit sleeps.
//! Data transfers between processors cost `hop_latency` ticks; transfers
//! within a processor and control operations (connect, disconnect) are
//! free. The scheduler seed breaks ties when several threads become
//! runnable at the same instant.

pub mod event;

pub use event::{ChanId, EndId, Event, EventKind, ThreadId};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread::JoinHandle;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineConfig {
    pub processors: u32,
    pub seed: u64,
    /// Overrides the per-server queue capacity rule when set.
    pub queue_capacity: Option<u32>,
    pub backoff_base: u64,
    pub backoff_factor: u64,
    pub backoff_cap: u64,
    pub hop_latency: u64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            processors: 64,
            seed: 0,
            queue_capacity: None,
            backoff_base: 4,
            backoff_factor: 2,
            backoff_cap: 256,
            hop_latency: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("invalid processor {0}")]
    InvalidProcessor(u32),
    #[error("channel end {0} has no destination")]
    NoDestination(EndId),
    #[error("channel end {0} is not the connected peer of its destination")]
    NotConnected(EndId),
    #[error("stray message from {from} to connection-managed end {to}")]
    StrayMessage { from: EndId, to: EndId },
    #[error("channel end {0} already has a waiting receiver")]
    ReceiveBusy(EndId),
    #[error("unknown channel end {0}")]
    UnknownEnd(EndId),
    #[error("channel {} is already in use by two threads", (.0).0)]
    ChannelBusy(ChanId),
    #[error("machine halted")]
    Halted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectStatus {
    Accepted,
    Rejected,
}

pub type ThreadResult = Result<(), String>;
pub type ThreadEntry = Box<dyn FnOnce(&mut MachineCtx) -> ThreadResult + Send + 'static>;

enum Syscall {
    Spawn { proc: u32, entry: ThreadEntry },
    NewEnd { proc: u32, capacity: u32 },
    NewEndGroup { procs: Vec<u32>, capacity: u32 },
    SetDest { from: EndId, to: EndId },
    Connect { from: EndId },
    Disconnect { from: EndId },
    Send { from: EndId, words: Vec<i64> },
    Receive { at: EndId },
    ChanOpen { count: u32 },
    ChanSend { chan: ChanId, words: Vec<i64> },
    ChanRecv { chan: ChanId },
    Sleep { ticks: u64 },
    Exit { fault: Option<String> },
}

#[derive(Debug, Clone)]
enum Reply {
    Start,
    Unit,
    Thread(ThreadId),
    End(EndId),
    EndGroup(Vec<EndId>),
    Words(Vec<i64>),
    Connect(ConnectStatus),
    Chan(ChanId),
    Fail(MachineError),
}

/// Per-thread handle used inside simulated thread bodies to perform
/// machine operations.
pub struct MachineCtx {
    tid: ThreadId,
    proc: u32,
    tx: Sender<(ThreadId, Syscall)>,
    rx: Receiver<Reply>,
}

impl MachineCtx {
    pub fn thread_id(&self) -> ThreadId {
        self.tid
    }

    pub fn processor(&self) -> u32 {
        self.proc
    }

    fn call(&mut self, sc: Syscall) -> Result<Reply, MachineError> {
        self.tx
            .send((self.tid, sc))
            .map_err(|_| MachineError::Halted)?;
        match self.rx.recv() {
            Err(_) => Err(MachineError::Halted),
            Ok(Reply::Fail(e)) => Err(e),
            Ok(r) => Ok(r),
        }
    }

    pub fn spawn(&mut self, proc: u32, entry: ThreadEntry) -> Result<ThreadId, MachineError> {
        match self.call(Syscall::Spawn { proc, entry })? {
            Reply::Thread(t) => Ok(t),
            _ => Err(MachineError::Halted),
        }
    }

    pub fn new_end(&mut self, proc: u32, capacity: u32) -> Result<EndId, MachineError> {
        match self.call(Syscall::NewEnd { proc, capacity })? {
            Reply::End(e) => Ok(e),
            _ => Err(MachineError::Halted),
        }
    }

    /// Create one end on each listed processor with a common local ID, so
    /// server arrays can be addressed by base processor plus shared end.
    pub fn new_end_group(
        &mut self,
        procs: Vec<u32>,
        capacity: u32,
    ) -> Result<Vec<EndId>, MachineError> {
        match self.call(Syscall::NewEndGroup { procs, capacity })? {
            Reply::EndGroup(es) => Ok(es),
            _ => Err(MachineError::Halted),
        }
    }

    pub fn set_destination(&mut self, from: EndId, to: EndId) -> Result<(), MachineError> {
        match self.call(Syscall::SetDest { from, to })? {
            Reply::Unit => Ok(()),
            _ => Err(MachineError::Halted),
        }
    }

    pub fn connect(&mut self, from: EndId) -> Result<ConnectStatus, MachineError> {
        match self.call(Syscall::Connect { from })? {
            Reply::Connect(s) => Ok(s),
            _ => Err(MachineError::Halted),
        }
    }

    pub fn disconnect(&mut self, from: EndId) -> Result<(), MachineError> {
        match self.call(Syscall::Disconnect { from })? {
            Reply::Unit => Ok(()),
            _ => Err(MachineError::Halted),
        }
    }

    pub fn send(&mut self, from: EndId, words: Vec<i64>) -> Result<(), MachineError> {
        match self.call(Syscall::Send { from, words })? {
            Reply::Unit => Ok(()),
            _ => Err(MachineError::Halted),
        }
    }

    pub fn receive(&mut self, at: EndId) -> Result<Vec<i64>, MachineError> {
        match self.call(Syscall::Receive { at })? {
            Reply::Words(w) => Ok(w),
            _ => Err(MachineError::Halted),
        }
    }

    /// Reserve `count` fresh language-channel identities; returns the first.
    pub fn chan_open(&mut self, count: u32) -> Result<ChanId, MachineError> {
        match self.call(Syscall::ChanOpen { count })? {
            Reply::Chan(c) => Ok(c),
            _ => Err(MachineError::Halted),
        }
    }

    pub fn chan_send(&mut self, chan: ChanId, words: Vec<i64>) -> Result<(), MachineError> {
        match self.call(Syscall::ChanSend { chan, words })? {
            Reply::Unit => Ok(()),
            _ => Err(MachineError::Halted),
        }
    }

    pub fn chan_recv(&mut self, chan: ChanId) -> Result<Vec<i64>, MachineError> {
        match self.call(Syscall::ChanRecv { chan })? {
            Reply::Words(w) => Ok(w),
            _ => Err(MachineError::Halted),
        }
    }

    pub fn sleep(&mut self, ticks: u64) -> Result<(), MachineError> {
        match self.call(Syscall::Sleep { ticks })? {
            Reply::Unit => Ok(()),
            _ => Err(MachineError::Halted),
        }
    }
}

fn thread_main(mut ctx: MachineCtx, entry: ThreadEntry) {
    match ctx.rx.recv() {
        Ok(Reply::Start) => {}
        _ => return,
    }
    let result = catch_unwind(AssertUnwindSafe(|| entry(&mut ctx)));
    let fault = match result {
        Ok(Ok(())) => None,
        Ok(Err(m)) => Some(m),
        Err(_) => Some("thread panicked".to_string()),
    };
    let _ = ctx.tx.send((ctx.tid, Syscall::Exit { fault }));
}

// ── Coordinator state ──

struct ThreadRec {
    reply_tx: Option<Sender<Reply>>,
    handle: Option<JoinHandle<()>>,
    proc: u32,
}

#[derive(Debug, Default)]
struct End {
    capacity: u32,
    dest: Option<EndId>,
    conn: Option<EndId>,
    queue: VecDeque<(u32, EndId)>,
    senders: VecDeque<PendingSend>,
    receiver: Option<u32>,
    owner: u32,
}

#[derive(Debug)]
struct PendingSend {
    tid: u32,
    from: EndId,
    words: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    Out,
    In,
}

#[derive(Debug, Default)]
struct Chan {
    sides: Vec<(u32, EndId)>,
    pending: VecDeque<ChanPending>,
}

#[derive(Debug)]
struct ChanPending {
    tid: u32,
    dir: Dir,
    words: Vec<i64>,
}

#[derive(Debug, Clone)]
enum Wait {
    Send { to: EndId },
    Recv { at: EndId },
    Connect { to: EndId },
    ChanOut { chan: ChanId },
    ChanIn { chan: ChanId },
}

/// Why a blocked thread is blocked, for deadlock reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaitEntry {
    pub thread: u32,
    pub reason: String,
    pub waits_on: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaitGraph {
    pub entries: Vec<WaitEntry>,
}

impl std::fmt::Display for WaitGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.entries {
            write!(f, "thread {} blocked: {}", e.thread, e.reason)?;
            if let Some(t) = e.waits_on {
                write!(f, " (waiting on thread {t})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    Quiescent,
    Deadlock(WaitGraph),
    Fault { thread: u32, message: String },
}

#[derive(Debug)]
pub struct RunOutcome {
    pub trace: Vec<Event>,
    pub termination: Termination,
}

pub struct Machine {
    cfg: MachineConfig,
    tx: Sender<(ThreadId, Syscall)>,
    rx: Receiver<(ThreadId, Syscall)>,
    threads: Vec<ThreadRec>,
    ends: Vec<Vec<End>>,
    chans: Vec<Chan>,
    run_q: VecDeque<(u32, Reply)>,
    sleepers: BTreeMap<(u64, u64), (u32, Reply)>,
    sleep_seq: u64,
    blocked: BTreeMap<u32, Wait>,
    now: u64,
    seq: u64,
    live: usize,
    trace: Vec<Event>,
    fresh: VecDeque<Event>,
    rng: ChaCha8Rng,
    finished: Option<Termination>,
}

impl Machine {
    pub fn new(cfg: MachineConfig) -> Machine {
        let (tx, rx) = channel();
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let ends = (0..cfg.processors).map(|_| Vec::new()).collect();
        Machine {
            cfg,
            tx,
            rx,
            threads: Vec::new(),
            ends,
            chans: Vec::new(),
            run_q: VecDeque::new(),
            sleepers: BTreeMap::new(),
            sleep_seq: 0,
            blocked: BTreeMap::new(),
            now: 0,
            seq: 0,
            live: 0,
            trace: Vec::new(),
            fresh: VecDeque::new(),
            rng,
            finished: None,
        }
    }

    pub fn config(&self) -> &MachineConfig {
        &self.cfg
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn trace(&self) -> &[Event] {
        &self.trace
    }

    pub fn termination(&self) -> Option<&Termination> {
        self.finished.as_ref()
    }

    /// Launch the root thread. Must be called once before stepping.
    pub fn spawn_root(&mut self, proc: u32, entry: ThreadEntry) -> Result<ThreadId, MachineError> {
        if proc >= self.cfg.processors {
            return Err(MachineError::InvalidProcessor(proc));
        }
        let tid = self.create_thread(proc, entry);
        self.emit(self.now, proc, tid.0, EventKind::ThreadStart);
        self.run_q.push_back((tid.0, Reply::Start));
        Ok(tid)
    }

    fn create_thread(&mut self, proc: u32, entry: ThreadEntry) -> ThreadId {
        let tid = ThreadId(self.threads.len() as u32);
        let (reply_tx, reply_rx) = channel();
        let ctx = MachineCtx {
            tid,
            proc,
            tx: self.tx.clone(),
            rx: reply_rx,
        };
        let handle = std::thread::Builder::new()
            .name(format!("sim-{}", tid.0))
            .spawn(move || thread_main(ctx, entry))
            .expect("spawn simulated thread");
        self.threads.push(ThreadRec {
            reply_tx: Some(reply_tx),
            handle: Some(handle),
            proc,
        });
        self.live += 1;
        tid
    }

    /// Advance until the next event is produced. Returns `None` once the
    /// machine has terminated and all events have been drained.
    pub fn step(&mut self) -> Option<Event> {
        loop {
            if let Some(e) = self.fresh.pop_front() {
                return Some(e);
            }
            if self.finished.is_some() {
                return None;
            }
            self.advance_slot();
        }
    }

    pub fn run_to_quiescence(&mut self) -> Termination {
        while self.step().is_some() {}
        self.finished.clone().expect("terminated")
    }

    pub fn into_outcome(mut self) -> RunOutcome {
        let termination = self.run_to_quiescence();
        self.cleanup();
        RunOutcome {
            trace: std::mem::take(&mut self.trace),
            termination,
        }
    }

    fn advance_slot(&mut self) {
        let (tid, reply) = match self.run_q.pop_front() {
            Some(x) => x,
            None => {
                if let Some((&(wake, _), _)) = self.sleepers.iter().next() {
                    self.now = self.now.max(wake);
                    let keys: Vec<(u64, u64)> = self
                        .sleepers
                        .range(..=(wake, u64::MAX))
                        .map(|(k, _)| *k)
                        .collect();
                    let mut batch: Vec<(u32, Reply)> = keys
                        .into_iter()
                        .map(|k| self.sleepers.remove(&k).unwrap())
                        .collect();
                    if batch.len() > 1 {
                        batch.shuffle(&mut self.rng);
                    }
                    self.run_q.extend(batch);
                    return;
                }
                if !self.blocked.is_empty() {
                    let graph = self.wait_graph();
                    self.finish(Termination::Deadlock(graph));
                } else {
                    self.finish(Termination::Quiescent);
                }
                return;
            }
        };

        // Hand the thread its reply and wait for its next operation. Only
        // this one thread runs until it calls back in.
        let ok = self.threads[tid as usize]
            .reply_tx
            .as_ref()
            .map(|tx| tx.send(reply).is_ok())
            .unwrap_or(false);
        if !ok {
            self.finish(Termination::Fault {
                thread: tid,
                message: "simulated thread disappeared".into(),
            });
            return;
        }
        let (from, sc) = match self.rx.recv() {
            Ok(m) => m,
            Err(_) => {
                self.finish(Termination::Fault {
                    thread: tid,
                    message: "simulated thread disappeared".into(),
                });
                return;
            }
        };
        self.handle_syscall(from.0, sc);
    }

    fn finish(&mut self, t: Termination) {
        if self.finished.is_none() {
            self.finished = Some(t);
        }
        self.cleanup();
    }

    fn cleanup(&mut self) {
        for rec in &mut self.threads {
            rec.reply_tx = None;
        }
        // Unblocked threads unwind with `Halted` and exit; their final
        // messages are discarded with the channel.
        for rec in &mut self.threads {
            if let Some(h) = rec.handle.take() {
                let _ = h.join();
            }
        }
    }

    fn emit(&mut self, time: u64, proc: u32, thread: u32, kind: EventKind) {
        let ev = Event {
            seq: self.seq,
            time,
            proc,
            thread,
            kind,
        };
        self.seq += 1;
        self.trace.push(ev.clone());
        self.fresh.push_back(ev);
    }

    fn enqueue(&mut self, tid: u32, reply: Reply) {
        self.run_q.push_back((tid, reply));
    }

    fn enqueue_batch(&mut self, mut batch: Vec<(u32, Reply)>) {
        if batch.len() > 1 {
            batch.shuffle(&mut self.rng);
        }
        self.run_q.extend(batch);
    }

    fn enqueue_at(&mut self, wake: u64, tid: u32, reply: Reply) {
        if wake <= self.now {
            self.enqueue(tid, reply);
        } else {
            let key = (wake, self.sleep_seq);
            self.sleep_seq += 1;
            self.sleepers.insert(key, (tid, reply));
        }
    }

    fn end(&self, id: EndId) -> Result<&End, MachineError> {
        self.ends
            .get(id.proc as usize)
            .and_then(|v| v.get(id.local as usize))
            .ok_or(MachineError::UnknownEnd(id))
    }

    fn end_mut(&mut self, id: EndId) -> Result<&mut End, MachineError> {
        self.ends
            .get_mut(id.proc as usize)
            .and_then(|v| v.get_mut(id.local as usize))
            .ok_or(MachineError::UnknownEnd(id))
    }

    fn hop(&self, from: EndId, to: EndId) -> u64 {
        if from.proc == to.proc {
            0
        } else {
            self.cfg.hop_latency
        }
    }

    fn handle_syscall(&mut self, tid: u32, sc: Syscall) {
        match sc {
            Syscall::Exit { fault } => {
                self.live -= 1;
                let proc = self.threads[tid as usize].proc;
                self.threads[tid as usize].reply_tx = None;
                self.emit(self.now, proc, tid, EventKind::ThreadEnd);
                if let Some(message) = fault {
                    self.finish(Termination::Fault {
                        thread: tid,
                        message,
                    });
                }
            }
            Syscall::Spawn { proc, entry } => {
                if proc >= self.cfg.processors {
                    drop(entry);
                    self.enqueue(tid, Reply::Fail(MachineError::InvalidProcessor(proc)));
                    return;
                }
                let new = self.create_thread(proc, entry);
                self.emit(self.now, proc, new.0, EventKind::ThreadStart);
                self.enqueue(tid, Reply::Thread(new));
                self.enqueue(new.0, Reply::Start);
            }
            Syscall::NewEnd { proc, capacity } => {
                if proc >= self.cfg.processors {
                    self.enqueue(tid, Reply::Fail(MachineError::InvalidProcessor(proc)));
                    return;
                }
                let id = self.alloc_end(proc, capacity, tid);
                self.enqueue(tid, Reply::End(id));
            }
            Syscall::NewEndGroup { procs, capacity } => {
                if let Some(&bad) = procs.iter().find(|&&p| p >= self.cfg.processors) {
                    self.enqueue(tid, Reply::Fail(MachineError::InvalidProcessor(bad)));
                    return;
                }
                // A common local ID across the group: align every listed
                // processor's next ID to the maximum.
                let local = procs
                    .iter()
                    .map(|&p| self.ends[p as usize].len())
                    .max()
                    .unwrap_or(0) as u32;
                let mut ids = Vec::with_capacity(procs.len());
                for &p in &procs {
                    while (self.ends[p as usize].len() as u32) < local {
                        self.alloc_end(p, 1, tid);
                    }
                    ids.push(self.alloc_end(p, capacity, tid));
                }
                self.enqueue(tid, Reply::EndGroup(ids));
            }
            Syscall::SetDest { from, to } => {
                if let Err(e) = self.end(to) {
                    self.enqueue(tid, Reply::Fail(e));
                    return;
                }
                match self.end_mut(from) {
                    Err(e) => self.enqueue(tid, Reply::Fail(e)),
                    Ok(end) => {
                        end.dest = Some(to);
                        end.owner = tid;
                        self.enqueue(tid, Reply::Unit);
                    }
                }
            }
            Syscall::Send { from, words } => self.do_send(tid, from, words),
            Syscall::Receive { at } => self.do_receive(tid, at),
            Syscall::Connect { from } => self.do_connect(tid, from),
            Syscall::Disconnect { from } => self.do_disconnect(tid, from),
            Syscall::ChanOpen { count } => {
                let first = ChanId(self.chans.len() as u32);
                for _ in 0..count {
                    self.chans.push(Chan::default());
                }
                self.enqueue(tid, Reply::Chan(first));
            }
            Syscall::ChanSend { chan, words } => self.do_chan_io(tid, chan, Dir::Out, words),
            Syscall::ChanRecv { chan } => self.do_chan_io(tid, chan, Dir::In, Vec::new()),
            Syscall::Sleep { ticks } => {
                let proc = self.threads[tid as usize].proc;
                self.emit(self.now, proc, tid, EventKind::BackoffSleep { delay: ticks });
                self.enqueue_at(self.now + ticks, tid, Reply::Unit);
            }
        }
    }

    fn alloc_end(&mut self, proc: u32, capacity: u32, owner: u32) -> EndId {
        let local = self.ends[proc as usize].len() as u32;
        self.ends[proc as usize].push(End {
            capacity,
            owner,
            ..End::default()
        });
        EndId { proc, local }
    }

    fn do_send(&mut self, tid: u32, from: EndId, words: Vec<i64>) {
        let to = match self.end(from) {
            Err(e) => {
                self.enqueue(tid, Reply::Fail(e));
                return;
            }
            Ok(end) => match end.dest {
                None => {
                    self.enqueue(tid, Reply::Fail(MachineError::NoDestination(from)));
                    return;
                }
                Some(to) => to,
            },
        };
        let dest = match self.end(to) {
            Err(e) => {
                self.enqueue(tid, Reply::Fail(e));
                return;
            }
            Ok(d) => d,
        };
        if let Some(peer) = dest.conn {
            if peer != from {
                self.enqueue(tid, Reply::Fail(MachineError::StrayMessage { from, to }));
                return;
            }
        }
        if let Some(rtid) = dest.receiver {
            self.end_mut(to).unwrap().receiver = None;
            self.blocked.remove(&rtid);
            self.deliver(from, to, tid, rtid, words);
        } else {
            self.end_mut(to)
                .unwrap()
                .senders
                .push_back(PendingSend { tid, from, words });
            self.blocked.insert(tid, Wait::Send { to });
        }
    }

    fn do_receive(&mut self, tid: u32, at: EndId) {
        let (conn, has_receiver) = match self.end(at) {
            Err(e) => {
                self.enqueue(tid, Reply::Fail(e));
                return;
            }
            Ok(e) => (e.conn, e.receiver.is_some()),
        };
        if has_receiver {
            self.enqueue(tid, Reply::Fail(MachineError::ReceiveBusy(at)));
            return;
        }
        self.end_mut(at).unwrap().owner = tid;
        // First deliverable pending send: any sender when the end is free,
        // only the connected peer otherwise.
        let idx = {
            let end = self.end(at).unwrap();
            end.senders
                .iter()
                .position(|s| conn.map(|peer| s.from == peer).unwrap_or(true))
        };
        match idx {
            Some(i) => {
                let ps = self.end_mut(at).unwrap().senders.remove(i).unwrap();
                self.blocked.remove(&ps.tid);
                self.deliver(ps.from, at, ps.tid, tid, ps.words);
            }
            None => {
                self.end_mut(at).unwrap().receiver = Some(tid);
                self.blocked.insert(tid, Wait::Recv { at });
            }
        }
    }

    /// A matched rendezvous: emit the Send/Receive pair and wake both
    /// parties. The receiver sees the message after the hop latency.
    fn deliver(&mut self, from: EndId, to: EndId, stid: u32, rtid: u32, words: Vec<i64>) {
        let delay = self.hop(from, to);
        self.emit(
            self.now,
            from.proc,
            stid,
            EventKind::Send {
                from,
                to,
                words: words.clone(),
                delay,
            },
        );
        self.emit(
            self.now + delay,
            to.proc,
            rtid,
            EventKind::Receive {
                from,
                to,
                words: words.clone(),
                delay,
            },
        );
        if delay == 0 {
            self.enqueue_batch(vec![(stid, Reply::Unit), (rtid, Reply::Words(words))]);
        } else {
            self.enqueue(stid, Reply::Unit);
            self.enqueue_at(self.now + delay, rtid, Reply::Words(words));
        }
    }

    fn do_connect(&mut self, tid: u32, from: EndId) {
        let to = match self.end(from) {
            Err(e) => {
                self.enqueue(tid, Reply::Fail(e));
                return;
            }
            Ok(end) => match end.dest {
                None => {
                    self.enqueue(tid, Reply::Fail(MachineError::NoDestination(from)));
                    return;
                }
                Some(to) => to,
            },
        };
        if let Err(e) = self.end(to) {
            self.enqueue(tid, Reply::Fail(e));
            return;
        }
        self.emit(
            self.now,
            from.proc,
            tid,
            EventKind::ConnectRequest { from, to },
        );
        let end = self.end_mut(to).unwrap();
        if end.conn.is_none() {
            end.conn = Some(from);
            self.emit(self.now, from.proc, tid, EventKind::ConnectAccept { from, to });
            self.enqueue(tid, Reply::Connect(ConnectStatus::Accepted));
        } else if (end.queue.len() as u32) < end.capacity {
            end.queue.push_back((tid, from));
            self.blocked.insert(tid, Wait::Connect { to });
        } else {
            self.emit(self.now, from.proc, tid, EventKind::ConnectReject { from, to });
            self.enqueue(tid, Reply::Connect(ConnectStatus::Rejected));
        }
    }

    fn do_disconnect(&mut self, tid: u32, from: EndId) {
        let to = match self.end(from) {
            Err(e) => {
                self.enqueue(tid, Reply::Fail(e));
                return;
            }
            Ok(end) => match end.dest {
                None => {
                    self.enqueue(tid, Reply::Fail(MachineError::NotConnected(from)));
                    return;
                }
                Some(to) => to,
            },
        };
        match self.end(to) {
            Err(e) => {
                self.enqueue(tid, Reply::Fail(e));
                return;
            }
            Ok(end) if end.conn != Some(from) => {
                self.enqueue(tid, Reply::Fail(MachineError::NotConnected(from)));
                return;
            }
            Ok(_) => {}
        }
        self.end_mut(to).unwrap().conn = None;
        self.emit(self.now, from.proc, tid, EventKind::Disconnect { from, to });
        // The next queued waiter, if any, is accepted in FIFO order.
        let next = self.end_mut(to).unwrap().queue.pop_front();
        match next {
            Some((wtid, wfrom)) => {
                self.end_mut(to).unwrap().conn = Some(wfrom);
                self.blocked.remove(&wtid);
                self.emit(
                    self.now,
                    wfrom.proc,
                    wtid,
                    EventKind::ConnectAccept { from: wfrom, to },
                );
                self.enqueue_batch(vec![
                    (tid, Reply::Unit),
                    (wtid, Reply::Connect(ConnectStatus::Accepted)),
                ]);
            }
            None => self.enqueue(tid, Reply::Unit),
        }
    }

    fn do_chan_io(&mut self, tid: u32, chan: ChanId, dir: Dir, words: Vec<i64>) {
        if chan.0 as usize >= self.chans.len() {
            self.enqueue(tid, Reply::Fail(MachineError::ChannelBusy(chan)));
            return;
        }
        // Bind this thread's side on first use: its end lives on its own
        // processor. A side whose thread has exited can be taken over, so
        // a channel connects at most two live threads at a time.
        let bound = self.chans[chan.0 as usize]
            .sides
            .iter()
            .any(|&(t, _)| t == tid);
        if !bound {
            if self.chans[chan.0 as usize].sides.len() == 2 {
                let dead = self.chans[chan.0 as usize]
                    .sides
                    .iter()
                    .position(|&(t, _)| self.threads[t as usize].reply_tx.is_none());
                match dead {
                    Some(k) => {
                        self.chans[chan.0 as usize].sides.remove(k);
                    }
                    None => {
                        self.enqueue(tid, Reply::Fail(MachineError::ChannelBusy(chan)));
                        return;
                    }
                }
            }
            let proc = self.threads[tid as usize].proc;
            let end = self.alloc_end(proc, 1, tid);
            self.chans[chan.0 as usize].sides.push((tid, end));
            let c = &self.chans[chan.0 as usize];
            if c.sides.len() == 2 {
                let (a, b) = (c.sides[0].1, c.sides[1].1);
                self.end_mut(a).unwrap().dest = Some(b);
                self.end_mut(b).unwrap().dest = Some(a);
            }
        }
        let c = &mut self.chans[chan.0 as usize];
        let opposite = c.pending.iter().position(|p| p.dir != dir);
        match opposite {
            Some(i) => {
                let other = c.pending.remove(i).unwrap();
                self.blocked.remove(&other.tid);
                let my_end = self.side_end(chan, tid);
                let other_end = self.side_end(chan, other.tid);
                let ((stid, sfrom, words), (rtid, rto)) = match dir {
                    Dir::Out => ((tid, my_end, words), (other.tid, other_end)),
                    Dir::In => ((other.tid, other_end, other.words), (tid, my_end)),
                };
                self.deliver(sfrom, rto, stid, rtid, words);
            }
            None => {
                c.pending.push_back(ChanPending { tid, dir, words });
                let wait = match dir {
                    Dir::Out => Wait::ChanOut { chan },
                    Dir::In => Wait::ChanIn { chan },
                };
                self.blocked.insert(tid, wait);
            }
        }
    }

    fn side_end(&self, chan: ChanId, tid: u32) -> EndId {
        self.chans[chan.0 as usize]
            .sides
            .iter()
            .find(|&&(t, _)| t == tid)
            .map(|&(_, e)| e)
            .expect("bound channel side")
    }

    fn wait_graph(&self) -> WaitGraph {
        let entries = self
            .blocked
            .iter()
            .map(|(&tid, wait)| {
                let (reason, waits_on) = match wait {
                    Wait::Send { to } => (
                        format!("sending to end {to}"),
                        self.end(*to)
                            .ok()
                            .map(|e| e.receiver.unwrap_or(e.owner)),
                    ),
                    Wait::Recv { at } => {
                        // If this end is aimed at a peer, that peer's owner
                        // is who we are waiting for.
                        let peer = self
                            .end(*at)
                            .ok()
                            .and_then(|e| e.dest)
                            .and_then(|d| self.end(d).ok())
                            .map(|e| e.owner);
                        (format!("receiving on end {at}"), peer)
                    }
                    Wait::Connect { to } => (
                        format!("queued connecting to end {to}"),
                        self.end(*to).ok().map(|e| e.owner),
                    ),
                    Wait::ChanOut { chan } => (
                        format!("sending on channel {}", chan.0),
                        self.chan_peer(*chan, tid),
                    ),
                    Wait::ChanIn { chan } => (
                        format!("receiving on channel {}", chan.0),
                        self.chan_peer(*chan, tid),
                    ),
                };
                WaitEntry {
                    thread: tid,
                    reason,
                    waits_on,
                }
            })
            .collect();
        WaitGraph { entries }
    }

    fn chan_peer(&self, chan: ChanId, tid: u32) -> Option<u32> {
        self.chans[chan.0 as usize]
            .sides
            .iter()
            .find(|&&(t, _)| t != tid)
            .map(|&(t, _)| t)
    }
}

impl Drop for Machine {
    fn drop(&mut self) {
        self.cleanup();
    }
}

/// Convenience: run a single root thread to quiescence.
pub fn run<F>(cfg: MachineConfig, proc: u32, root: F) -> RunOutcome
where
    F: FnOnce(&mut MachineCtx) -> ThreadResult + Send + 'static,
{
    let mut m = Machine::new(cfg);
    m.spawn_root(proc, Box::new(root)).expect("spawn root");
    m.into_outcome()
}
