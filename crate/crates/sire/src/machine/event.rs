//! Machine trace events.
//!
//! Events form a single totally ordered trace per run. The text rendering
//! is one record per line with stable `key=value` fields, suitable for
//! golden-file comparison. Message words are kept on the in-memory event
//! for trace checkers; the text form carries only the word count.

use std::fmt;

/// Globally unique channel end address: processor ID plus an ID local to
/// that processor. Packs into one machine word, processor in the high bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EndId {
    pub proc: u32,
    pub local: u32,
}

impl EndId {
    pub fn pack(self) -> i64 {
        ((self.proc as i64) << 32) | self.local as i64
    }

    pub fn unpack(word: i64) -> EndId {
        EndId {
            proc: (word >> 32) as u32,
            local: (word & 0xffff_ffff) as u32,
        }
    }
}

impl fmt::Display for EndId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.proc, self.local)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChanId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThreadId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    ThreadStart,
    ThreadEnd,
    Send {
        from: EndId,
        to: EndId,
        words: Vec<i64>,
        delay: u64,
    },
    Receive {
        from: EndId,
        to: EndId,
        words: Vec<i64>,
        delay: u64,
    },
    ConnectRequest {
        from: EndId,
        to: EndId,
    },
    ConnectAccept {
        from: EndId,
        to: EndId,
    },
    ConnectReject {
        from: EndId,
        to: EndId,
    },
    Disconnect {
        from: EndId,
        to: EndId,
    },
    BackoffSleep {
        delay: u64,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::ThreadStart => "ThreadStart",
            EventKind::ThreadEnd => "ThreadEnd",
            EventKind::Send { .. } => "Send",
            EventKind::Receive { .. } => "Receive",
            EventKind::ConnectRequest { .. } => "ConnectRequest",
            EventKind::ConnectAccept { .. } => "ConnectAccept",
            EventKind::ConnectReject { .. } => "ConnectReject",
            EventKind::Disconnect { .. } => "Disconnect",
            EventKind::BackoffSleep { .. } => "BackoffSleep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub seq: u64,
    pub time: u64,
    pub proc: u32,
    pub thread: u32,
    pub kind: EventKind,
}

impl Event {
    pub fn endpoints(&self) -> Option<(EndId, EndId)> {
        match &self.kind {
            EventKind::Send { from, to, .. }
            | EventKind::Receive { from, to, .. }
            | EventKind::ConnectRequest { from, to }
            | EventKind::ConnectAccept { from, to }
            | EventKind::ConnectReject { from, to }
            | EventKind::Disconnect { from, to } => Some((*from, *to)),
            _ => None,
        }
    }

    pub fn words(&self) -> Option<&[i64]> {
        match &self.kind {
            EventKind::Send { words, .. } | EventKind::Receive { words, .. } => Some(words),
            _ => None,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seq={} time={} proc={} thread={} kind={}",
            self.seq,
            self.time,
            self.proc,
            self.thread,
            self.kind.name()
        )?;
        match &self.kind {
            EventKind::Send { from, to, words, delay }
            | EventKind::Receive { from, to, words, delay } => {
                write!(f, " from={from} to={to} len={} delay={delay}", words.len())
            }
            EventKind::ConnectRequest { from, to }
            | EventKind::ConnectAccept { from, to }
            | EventKind::ConnectReject { from, to }
            | EventKind::Disconnect { from, to } => write!(f, " from={from} to={to}"),
            EventKind::BackoffSleep { delay } => write!(f, " delay={delay}"),
            _ => Ok(()),
        }
    }
}

/// Render a trace in the line-per-record text format.
pub fn render_trace(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}
