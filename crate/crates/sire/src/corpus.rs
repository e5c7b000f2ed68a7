//! Example programs with independent oracles and trace checkers.
//!
//! The fixed programs live under `examples/` as `.sire` files; the
//! parameterised ones (Cannon multiplication, the task farm, the
//! write-contention case and the random equivalence programs) are
//! generated here.

use crate::machine::{Event, EventKind, MachineConfig};
use crate::runtime::{Execution, TERMINATE_CALL};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STORE: &str = include_str!("../examples/store.sire");
pub const SHARED_MEMORY: &str = include_str!("../examples/shared_memory.sire");
pub const DISTRIBUTED_MEMORY: &str = include_str!("../examples/distributed_memory.sire");
pub const DISTRIBUTED_MEMORY_DISJOINT: &str =
    include_str!("../examples/distributed_memory_disjoint.sire");
pub const ALLOC_EXAMPLE: &str = include_str!("../examples/alloc_example.sire");
pub const DEADLOCK: &str = include_str!("../examples/deadlock.sire");
pub const TASK_FARM: &str = include_str!("../examples/task_farm.sire");
pub const CANNON2: &str = include_str!("../examples/cannon2.sire");

/// The standard corpus: every case here must quiesce cleanly and satisfy
/// the call-protocol checker.
pub fn standard_cases() -> Vec<(&'static str, String, MachineConfig)> {
    vec![
        ("store", STORE.to_string(), MachineConfig::default()),
        ("shared_memory", SHARED_MEMORY.to_string(), MachineConfig::default()),
        (
            "distributed_memory",
            DISTRIBUTED_MEMORY.to_string(),
            MachineConfig::default(),
        ),
        (
            "distributed_memory_disjoint",
            DISTRIBUTED_MEMORY_DISJOINT.to_string(),
            MachineConfig::default(),
        ),
        ("task_farm", TASK_FARM.to_string(), MachineConfig::default()),
        ("cannon2", CANNON2.to_string(), MachineConfig::default()),
        (
            "write_zero",
            write_zero_source(4, 4),
            MachineConfig::default(),
        ),
    ]
}

// ── Parameterised sources ──

/// Single Store server: optionally write `i` to cell `i`, then read all
/// cells back into `out`.
pub fn store_source(init: i64, with_writes: bool) -> String {
    let writes = if with_writes {
        "seq i=0 for N do s.write(i, i) ;"
    } else {
        ""
    };
    format!(
        "val N = 8
        server Store(val init)
          interface(call read(val i, var v), call write(val i, val v)) to
        {{ var data[N];
          initial {{ var i; seq i=0 for N do data[i] := init }}
          accept
          {{ read ? (val i, var v) v := data[i]
            write ? (val i, val v) data[i] := v
          }}
          final {{}}
        }}
        server s is Store({init}) &
        {{ var i; var v; var out[N];
          {writes}
          seq i=0 for N do {{ s.read(i, v) ; out[i] := v }}
        }}"
    )
}

/// Shared-memory contention case: every client writes its index to
/// address 0 through its access server. Once the access scope has
/// terminated (so no write-through is still in flight), the final value
/// is read from the store into `last`.
pub fn write_zero_source(m: usize, n: usize) -> String {
    format!(
        "val n = {n}
        val m = {m}
        val N = 16
        server Store(val init)
          interface(call read(val a, var v), call write(val a, val v)) to
        {{ var data[N];
          initial {{ var i; seq i=0 for N do data[i] := init }}
          accept
          {{ read ? (val a, var v) v := data[a]
            write ? (val a, val v) data[a] := v
          }}
          final {{}}
        }}
        server Access(server Store[n] s)
          interface(call read(val a, var v), call write(val a, val v)) to
        {{ accept
          {{ read ? (val a, var v) s[a rem n].read(a, v)
            write ? (val a, val v) s[a rem n].write(a, v)
          }}
        }}
        server s is Store(0)[n] &
        {{ var last;
          {{ server a is Access(s)[m] |
            par i=0 for m do
              a[i].write(0, i)
          }} ;
          s[0].read(0, last)
        }}"
    )
}

/// Task farm with `items` work items split over `workers` workers.
/// `items` must be divisible by `workers` (or zero).
pub fn task_farm_source(items: usize, workers: usize) -> String {
    let per = items.checked_div(workers).unwrap_or(0);
    assert_eq!(per * workers.max(1), items, "items must divide evenly");
    format!(
        "val K = {items}
        val W = {workers}
        val P = {per}
        server Master(val total)
          interface(
            call get(var item, var valid),
            call put(val worker, val result),
            call result(val i, var v),
            call count(val w, var c)) to
        {{ var next; var got; var res[K]; var done[W];
          initial
          {{ var i;
            next := 0 ;
            got := 0 ;
            seq i=0 for K do res[i] := 0 ;
            seq i=0 for W do done[i] := 0
          }}
          accept
          {{ get ? (var item, var valid)
              {{ item := next ; next := next + 1 ; valid := 1 }}
            put ? (val worker, val result)
              {{ res[got] := result ; got := got + 1 ; done[worker] := done[worker] + 1 }}
            result ? (val i, var v)
              v := res[i]
            count ? (val w, var c)
              c := done[w]
          }}
          final {{}}
        }}
        server m is Master(K) &
        {{ var results[K]; var counts[W];
          {{ par w=0 for W do
            {{ var j; var item; var ok;
              seq j=0 for P do
              {{ m.get(item, ok) ;
                m.put(w, item * item)
              }}
            }}
          }} ;
          {{ var i; var v;
            seq i=0 for K do {{ m.result(i, v) ; results[i] := v }} ;
            seq i=0 for W do {{ m.count(i, v) ; counts[i] := v }}
          }}
        }}"
    )
}

// ── Cannon's algorithm ──

/// Build the Cannon matrix-multiply program for an `n`-by-`n` node grid of
/// `dim`-by-`dim` sub-matrices, with `a` and `b` as the full row-major
/// input matrices (edge length `n*dim`). The sub-matrices are loaded
/// pre-skewed, so each node runs `n` uniform rounds of multiply-accumulate
/// and neighbour exchange; each exchange pairs a send and a receive in
/// local parallel so the torus cannot deadlock on the rendezvous.
pub fn cannon_source(n: usize, dim: usize, a: &[i64], b: &[i64]) -> String {
    let edge = n * dim;
    let size = edge * edge;
    assert_eq!(a.len(), size);
    assert_eq!(b.len(), size);
    let mut fills = String::new();
    for (k, v) in a.iter().enumerate() {
        fills.push_str(&format!("  av[{k}] := {v} ;\n"));
    }
    for (k, v) in b.iter().enumerate() {
        fills.push_str(&format!("  bv[{k}] := {v} ;\n"));
    }
    format!(
        "val n = {n}
val d = {dim}
val E = {edge}
val S = {size}

server Matrix(val dim, val init)
  interface(call get(val i, var v), call set(val i, val v)) to
{{ var data[dim*dim];
  initial {{ var i; seq i=0 for dim*dim do data[i] := init }}
  accept
  {{ get ? (val i, var v) v := data[i]
    set ? (val i, val v) data[i] := v
  }}
  final {{}}
}}

proc node(server Matrix ma, server Matrix mb, server Matrix mc,
          chan aout, chan ain, chan bout, chan bin, val n, val d) is
{{ var la[d*d]; var lb[d*d]; var lc[d*d]; var ta[d*d]; var tb[d*d];
  var i; var j; var k; var t;
  seq i=0 for d*d do ma.get(i, la[i]) ;
  seq i=0 for d*d do mb.get(i, lb[i]) ;
  seq i=0 for d*d do lc[i] := 0 ;
  seq t=0 for n do
  {{ seq i=0 for d do
      seq j=0 for d do
        seq k=0 for d do
          lc[i*d + j] := lc[i*d + j] + la[i*d + k] * lb[k*d + j] ;
    {{ {{ aout ! la }} | {{ ain ? ta }} }} ;
    seq i=0 for d*d do la[i] := ta[i] ;
    {{ {{ bout ! lb }} | {{ bin ? tb }} }} ;
    seq i=0 for d*d do lb[i] := tb[i]
  }} ;
  seq i=0 for d*d do mc.set(i, lc[i])
}}

proc multiply(server Matrix[n][n] a, server Matrix[n][n] b,
              server Matrix[n][n] c, val n, val d) is
{{ chan[n][n] h; chan[n][n] v;
  par y=0 for n do
    par x=0 for n do
      node(a[y][x], b[y][x], c[y][x],
           h[y][(x + n - 1) rem n], h[y][x],
           v[(y + n - 1) rem n][x], v[y][x],
           n, d)
}}

server a is Matrix(d, 0)[n][n] |
server b is Matrix(d, 0)[n][n] |
server c is Matrix(d, 0)[n][n] |
{{ var av[S]; var bv[S]; var cv[S];
  var r; var cc; var u; var w; var v2;
{fills}
  seq r=0 for n do
    seq cc=0 for n do
      seq u=0 for d do
        seq w=0 for d do
          a[r][cc].set(u*d + w, av[(r*d + u)*E + ((cc + r) rem n)*d + w]) ;
  seq r=0 for n do
    seq cc=0 for n do
      seq u=0 for d do
        seq w=0 for d do
          b[r][cc].set(u*d + w, bv[(((r + cc) rem n)*d + u)*E + cc*d + w]) ;
  multiply(a, b, c, n, d) ;
  seq r=0 for n do
    seq cc=0 for n do
      seq u=0 for d do
        seq w=0 for d do
        {{ c[r][cc].get(u*d + w, v2) ;
          cv[(r*d + u)*E + cc*d + w] := v2
        }}
}}
"
    )
}

/// Seeded input matrices for a Cannon run, entries in 0..10.
pub fn cannon_inputs(n: usize, dim: usize, seed: u64) -> (Vec<i64>, Vec<i64>) {
    let size = (n * dim) * (n * dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = (0..size).map(|_| rng.gen_range(0..10)).collect();
    let b = (0..size).map(|_| rng.gen_range(0..10)).collect();
    (a, b)
}

/// Sequential triple-loop matrix multiplication oracle.
pub fn matmul_oracle(a: &[i64], b: &[i64], edge: usize) -> Vec<i64> {
    let mut c = vec![0i64; edge * edge];
    for i in 0..edge {
        for j in 0..edge {
            let mut acc = 0i64;
            for k in 0..edge {
                acc = acc.wrapping_add(a[i * edge + k].wrapping_mul(b[k * edge + j]));
            }
            c[i * edge + j] = acc;
        }
    }
    c
}

// ── Trace checkers ──

/// One completed call at a server end, reconstructed from the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallWindow {
    pub server_end: crate::machine::EndId,
    pub client_end: crate::machine::EndId,
    pub call_id: i64,
    pub args: Vec<i64>,
    pub returns: Vec<i64>,
    pub accept_seq: u64,
    /// True if any data message of the call crossed processors.
    pub cross_processor: bool,
}

/// Scan every server end's events and verify each call follows the exact
/// sequence: connect accepted, client end ID, call ID, the declared
/// actuals, the declared var returns (an acknowledgement for the reserved
/// termination ID), disconnect — with no foreign messages in between.
///
/// The one message allowed outside a connection window is the single boot
/// message that delivers the server's arguments before any client exists.
/// Connect requests and rejections from other clients may interleave;
/// they carry no data.
pub fn scan_call_windows(exec: &Execution) -> Result<Vec<CallWindow>, String> {
    let mut windows = Vec::new();
    for info in &exec.servers {
        let s = info.end;
        let events: Vec<&Event> = exec
            .trace
            .iter()
            .filter(|e| matches!(e.endpoints(), Some((f, t)) if f == s || t == s))
            .collect();
        let sigs = &exec.program.defs[info.def].calls;

        let mut i = 0;
        let mut booted = false;
        while i < events.len() {
            let ev = events[i];
            match &ev.kind {
                EventKind::ConnectRequest { .. } | EventKind::ConnectReject { .. } => {
                    i += 1;
                }
                EventKind::Send { to, .. } if !booted && *to == s => {
                    booted = true;
                    i += 1;
                    match events.get(i).map(|e| &e.kind) {
                        Some(EventKind::Receive { to, .. }) if *to == s => i += 1,
                        _ => {
                            return Err(format!(
                                "server {s}: boot message without matching receive (seq {})",
                                ev.seq
                            ))
                        }
                    }
                }
                EventKind::ConnectAccept { from, to } if *to == s => {
                    let client = *from;
                    let accept_seq = ev.seq;
                    i += 1;
                    let mut cross = false;

                    // Step 3: the client's own end ID.
                    let idw = take_message(&events, &mut i, client, s, &mut cross)
                        .map_err(|m| format!("server {s}: {m}"))?;
                    if idw.len() != 1 || crate::machine::EndId::unpack(idw[0]) != client {
                        return Err(format!(
                            "server {s}: first message of a call must carry the client end ID"
                        ));
                    }
                    // Step 4: the call ID.
                    let cidw = take_message(&events, &mut i, client, s, &mut cross)
                        .map_err(|m| format!("server {s}: {m}"))?;
                    if cidw.len() != 1 {
                        return Err(format!("server {s}: malformed call ID message"));
                    }
                    let call_id = cidw[0];
                    let (n_args, n_returns) = if call_id == TERMINATE_CALL {
                        (0, 1)
                    } else {
                        let sig = sigs.get(call_id as usize).ok_or_else(|| {
                            format!("server {s}: call ID {call_id} not in the interface")
                        })?;
                        let vars = sig
                            .params
                            .iter()
                            .filter(|m| matches!(m, crate::frontend::ast::Mode::Var))
                            .count();
                        (sig.params.len(), vars)
                    };
                    // Step 5: each actual, client to server.
                    let mut args = Vec::new();
                    for _ in 0..n_args {
                        let w = take_message(&events, &mut i, client, s, &mut cross)
                            .map_err(|m| format!("server {s}: {m}"))?;
                        if w.len() != 1 {
                            return Err(format!("server {s}: malformed actual"));
                        }
                        args.push(w[0]);
                    }
                    // Step 6: each var return, server to client.
                    let mut returns = Vec::new();
                    for _ in 0..n_returns {
                        let w = take_message(&events, &mut i, s, client, &mut cross)
                            .map_err(|m| format!("server {s}: {m}"))?;
                        if w.len() != 1 {
                            return Err(format!("server {s}: malformed return"));
                        }
                        returns.push(w[0]);
                    }
                    // Step 7: disconnect by the same client.
                    skip_connect_control(&events, &mut i);
                    match events.get(i).map(|e| &e.kind) {
                        Some(EventKind::Disconnect { from, to })
                            if *from == client && *to == s =>
                        {
                            i += 1;
                        }
                        other => {
                            return Err(format!(
                                "server {s}: call from {client} not closed by its disconnect (found {other:?})"
                            ))
                        }
                    }
                    windows.push(CallWindow {
                        server_end: s,
                        client_end: client,
                        call_id,
                        args,
                        returns,
                        accept_seq,
                        cross_processor: cross,
                    });
                }
                _ => {
                    return Err(format!(
                        "server {s}: unexpected event outside a call window: {ev}"
                    ))
                }
            }
        }
    }
    windows.sort_by_key(|w| w.accept_seq);
    Ok(windows)
}

fn skip_connect_control(events: &[&Event], i: &mut usize) {
    while *i < events.len()
        && matches!(
            events[*i].kind,
            EventKind::ConnectRequest { .. } | EventKind::ConnectReject { .. }
        )
    {
        *i += 1;
    }
}

/// Expect the next data message to travel `from_end` to `to_end`; returns
/// its words and advances past the send/receive pair.
fn take_message(
    events: &[&Event],
    i: &mut usize,
    from_end: crate::machine::EndId,
    to_end: crate::machine::EndId,
    cross: &mut bool,
) -> Result<Vec<i64>, String> {
    skip_connect_control(events, i);
    let send = events.get(*i).map(|e| &e.kind);
    let recv = events.get(*i + 1).map(|e| &e.kind);
    match (send, recv) {
        (
            Some(EventKind::Send { from: f1, to: t1, words, .. }),
            Some(EventKind::Receive { from: f2, to: t2, .. }),
        ) if *f1 == from_end && *t1 == to_end && f1 == f2 && t1 == t2 => {
            if f1.proc != t1.proc {
                *cross = true;
            }
            let w = words.clone();
            *i += 2;
            Ok(w)
        }
        _ => Err(format!(
            "expected a message {from_end} -> {to_end} at filtered position {i}",
            i = *i
        )),
    }
}

/// Number of call windows (excluding scope termination) that involved any
/// cross-processor message.
pub fn cross_processor_calls(exec: &Execution) -> Result<usize, String> {
    let windows = scan_call_windows(exec)?;
    Ok(windows
        .iter()
        .filter(|w| w.call_id != TERMINATE_CALL && w.cross_processor)
        .count())
}

/// Replay write calls against a model store array in connection-accept
/// order. Returns the model cells.
pub fn replay_store_model(
    windows: &[CallWindow],
    store_end: crate::machine::EndId,
    write_call_id: i64,
    cells: usize,
) -> Vec<i64> {
    let mut data = vec![0i64; cells];
    for w in windows {
        if w.server_end == store_end && w.call_id == write_call_id && w.args.len() == 2 {
            let (a, v) = (w.args[0], w.args[1]);
            if a >= 0 && (a as usize) < cells {
                data[a as usize] = v;
            }
        }
    }
    data
}

// ── Random-program generator ──

/// A generated program together with its manually-unrolled equivalent:
/// every replicator expanded into explicit composition with the index
/// substituted.
pub struct GeneratedPair {
    pub replicated: String,
    pub unrolled: String,
}

#[derive(Clone)]
enum GExpr {
    Int(i64),
    Var(String),
    Bin(&'static str, Box<GExpr>, Box<GExpr>),
}

impl GExpr {
    fn render(&self, env: &[(String, i64)]) -> String {
        match self {
            GExpr::Int(v) => {
                if *v < 0 {
                    format!("(0 - {})", -v)
                } else {
                    v.to_string()
                }
            }
            GExpr::Var(n) => env
                .iter()
                .rev()
                .find(|(k, _)| k == n)
                .map(|(_, v)| {
                    if *v < 0 {
                        format!("(0 - {})", -v)
                    } else {
                        v.to_string()
                    }
                })
                .unwrap_or_else(|| n.clone()),
            GExpr::Bin(op, l, r) => {
                format!("({} {} {})", l.render(env), op, r.render(env))
            }
        }
    }
}

#[derive(Clone)]
enum GStmt {
    Assign { target: String, value: GExpr },
    AccumAssign { target: String, value: GExpr },
    StoreWrite { addr: GExpr, value: GExpr },
    SeqRep { var: String, base: i64, count: i64, body: Vec<GStmt> },
    ParRep { var: String, count: i64, body: Vec<GStmt> },
    Par { dist: bool, children: Vec<Vec<GStmt>> },
}

struct Gen {
    rng: ChaCha8Rng,
    next_var: usize,
    next_addr: usize,
    uses_store: bool,
}

const ADDR_SPACE: usize = 64;

impl Gen {
    fn fresh_var(&mut self) -> String {
        let n = format!("g{}", self.next_var);
        self.next_var += 1;
        n
    }

    fn addr_range(&mut self, count: usize) -> Option<usize> {
        if self.next_addr + count > ADDR_SPACE {
            return None;
        }
        let a = self.next_addr;
        self.next_addr += count;
        Some(a)
    }

    fn expr(&mut self, scope: &[String], depth: usize) -> GExpr {
        if depth == 0 || self.rng.gen_bool(0.4) {
            if !scope.is_empty() && self.rng.gen_bool(0.5) {
                let i = self.rng.gen_range(0..scope.len());
                GExpr::Var(scope[i].clone())
            } else {
                GExpr::Int(self.rng.gen_range(-9..10))
            }
        } else {
            let op = ["+", "-", "*", "rem"][self.rng.gen_range(0..4)];
            let l = self.expr(scope, depth - 1);
            let r = if op == "rem" {
                GExpr::Int(self.rng.gen_range(2..7))
            } else {
                self.expr(scope, depth - 1)
            };
            GExpr::Bin(op, Box::new(l), Box::new(r))
        }
    }

    /// Statements whose writes target `owned` variables only; `indexes`
    /// are readable replicator indexes in scope. `budget` bounds the
    /// processor footprint.
    fn stmts(
        &mut self,
        owned: &[String],
        indexes: &[String],
        depth: usize,
        budget: usize,
    ) -> Vec<GStmt> {
        let mut out = Vec::new();
        let count = self.rng.gen_range(1..=3);
        for _ in 0..count {
            let scope: Vec<String> = owned.iter().chain(indexes).cloned().collect();
            let choice = self.rng.gen_range(0..10);
            match choice {
                0..=3 => {
                    if let Some(target) = pick(&mut self.rng, owned) {
                        let value = self.expr(&scope, 2);
                        if self.rng.gen_bool(0.5) {
                            out.push(GStmt::AccumAssign { target, value });
                        } else {
                            out.push(GStmt::Assign { target, value });
                        }
                    }
                }
                4..=5 if depth > 0 => {
                    let var = self.fresh_var();
                    let n = self.rng.gen_range(1..=5);
                    let mut idx = indexes.to_vec();
                    idx.push(var.clone());
                    let body = self.stmts(owned, &idx, depth - 1, budget);
                    out.push(GStmt::SeqRep {
                        var,
                        base: self.rng.gen_range(0..3),
                        count: n,
                        body,
                    });
                }
                6..=7 if depth > 0 && owned.len() >= 2 && budget >= 2 => {
                    // Parallel composition: children own disjoint variables.
                    let nchildren = 2;
                    let dist = self.rng.gen_bool(0.5);
                    let child_budget = budget / nchildren;
                    let mut children = Vec::new();
                    for k in 0..nchildren {
                        let part: Vec<String> = owned
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| i % nchildren == k)
                            .map(|(_, v)| v.clone())
                            .collect();
                        children.push(self.stmts(&part, indexes, depth - 1, child_budget));
                    }
                    out.push(GStmt::Par { dist, children });
                }
                8..=9 if depth > 0 && budget >= 2 => {
                    // Replicated clients writing disjoint store cells.
                    let n = self.rng.gen_range(1..=(5usize.min(budget)) as i64);
                    if let Some(base_addr) = self.addr_range(n as usize) {
                        self.uses_store = true;
                        let var = self.fresh_var();
                        let addr = GExpr::Bin(
                            "+",
                            Box::new(GExpr::Int(base_addr as i64)),
                            Box::new(GExpr::Var(var.clone())),
                        );
                        let mut idx = indexes.to_vec();
                        idx.push(var.clone());
                        let value = self.expr(&idx, 2);
                        out.push(GStmt::ParRep {
                            var,
                            count: n,
                            body: vec![GStmt::StoreWrite { addr, value }],
                        });
                    }
                }
                _ => {
                    if let Some(target) = pick(&mut self.rng, owned) {
                        let value = self.expr(&scope, 1);
                        out.push(GStmt::Assign { target, value });
                    }
                }
            }
        }
        if out.is_empty() {
            out.push(GStmt::Assign {
                target: owned.first().cloned().unwrap_or_else(|| "g0".into()),
                value: GExpr::Int(0),
            });
        }
        out
    }
}

fn pick(rng: &mut ChaCha8Rng, items: &[String]) -> Option<String> {
    if items.is_empty() {
        None
    } else {
        Some(items[rng.gen_range(0..items.len())].clone())
    }
}

/// Generate one random program (composition depth <= 4, extents <= 5) and
/// its manual unrolling. Both observe their state through top-level
/// variables and a read-back of the shared store.
pub fn generate_pair(seed: u64) -> GeneratedPair {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        next_var: 0,
        next_addr: 0,
        uses_store: false,
    };
    let nvars = g.rng.gen_range(2..=4);
    let owned: Vec<String> = (0..nvars).map(|_| g.fresh_var()).collect();
    let stmts = g.stmts(&owned, &[], 3, 32);

    let replicated = render_program(&owned, &stmts, g.uses_store, false);
    let unrolled = render_program(&owned, &stmts, g.uses_store, true);
    GeneratedPair {
        replicated,
        unrolled,
    }
}

fn render_program(vars: &[String], stmts: &[GStmt], uses_store: bool, unroll: bool) -> String {
    let mut body = String::new();
    let mut env = Vec::new();
    render_chain(&mut body, stmts, &mut env, unroll);

    let decls: String = vars
        .iter()
        .map(|v| format!("var {v};"))
        .collect::<Vec<_>>()
        .join(" ");
    if uses_store {
        format!(
            "val A = {ADDR_SPACE}
            server Store(val init)
              interface(call read(val a, var v), call write(val a, val v)) to
            {{ var data[A];
              initial {{ var i; seq i=0 for A do data[i] := init }}
              accept
              {{ read ? (val a, var v) v := data[a]
                write ? (val a, val v) data[a] := v
              }}
              final {{}}
            }}
            server st is Store(0) &
            {{ {decls} var rb[A]; var tmp;
              {{ {body} }} ;
              seq q=0 for A do {{ st.read(q, tmp) ; rb[q] := tmp }}
            }}"
        )
    } else {
        format!("{{ {decls}\n {body} }}")
    }
}

fn render_chain(out: &mut String, stmts: &[GStmt], env: &mut Vec<(String, i64)>, unroll: bool) {
    for (i, s) in stmts.iter().enumerate() {
        if i > 0 {
            out.push_str(" ;\n");
        }
        render_stmt(out, s, env, unroll);
    }
}

fn render_stmt(out: &mut String, stmt: &GStmt, env: &mut Vec<(String, i64)>, unroll: bool) {
    match stmt {
        GStmt::Assign { target, value } => {
            out.push_str(&format!("{target} := {}", value.render(env)));
        }
        GStmt::AccumAssign { target, value } => {
            out.push_str(&format!("{target} := {target} + {}", value.render(env)));
        }
        GStmt::StoreWrite { addr, value } => {
            out.push_str(&format!(
                "st.write(({}) rem A, {})",
                addr.render(env),
                value.render(env)
            ));
        }
        GStmt::SeqRep { var, base, count, body } => {
            if unroll {
                out.push_str("{ skip");
                for k in 0..*count {
                    out.push_str(" ;\n{ ");
                    env.push((var.clone(), base + k));
                    render_chain(out, body, env, unroll);
                    env.pop();
                    out.push_str(" }");
                }
                out.push_str(" }");
            } else {
                out.push_str(&format!("seq {var}={base} for {count} do\n{{ "));
                render_chain(out, body, env, unroll);
                out.push_str(" }");
            }
        }
        GStmt::ParRep { var, count, body } => {
            if unroll {
                out.push_str("{ ");
                for k in 0..*count {
                    if k > 0 {
                        out.push_str(" &\n");
                    }
                    out.push_str("{ ");
                    env.push((var.clone(), k));
                    render_chain(out, body, env, unroll);
                    env.pop();
                    out.push_str(" }");
                }
                out.push_str(" }");
            } else {
                out.push_str(&format!("par {var}=0 for {count} do\n{{ "));
                render_chain(out, body, env, unroll);
                out.push_str(" }");
            }
        }
        GStmt::Par { dist, children } => {
            let op = if *dist { "&" } else { "|" };
            out.push_str("{ ");
            for (k, child) in children.iter().enumerate() {
                if k > 0 {
                    out.push_str(&format!(" {op}\n"));
                }
                out.push_str("{ ");
                render_chain(out, child, env, unroll);
                out.push_str(" }");
            }
            out.push_str(" }");
        }
    }
}
