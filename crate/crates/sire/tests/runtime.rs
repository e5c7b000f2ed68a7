//! Runtime semantics: sequencing, environment capture and write-back,
//! server behaviour, the client call sequence and scope termination.

use sire::corpus;
use sire::machine::{EventKind, MachineConfig, Termination};
use sire::runtime::{run_source, DumpValue, Execution, ExitStatus, TERMINATE_CALL};

fn run(src: &str) -> Execution {
    run_source(src, MachineConfig::default()).expect("static checks")
}

fn dump_int(e: &Execution, name: &str) -> i64 {
    match e.dump.iter().find(|(n, _)| n == name) {
        Some((_, DumpValue::Int(v))) => *v,
        other => panic!("expected int `{name}`, got {other:?}"),
    }
}

fn dump_array(e: &Execution, name: &str) -> Vec<i64> {
    match e.dump.iter().find(|(n, _)| n == name) {
        Some((_, DumpValue::Array(a))) => a.clone(),
        other => panic!("expected array `{name}`, got {other:?}"),
    }
}

#[test]
fn sequencing_orders_effects() {
    let e = run("{ var x; x := 0 ; x := x + 1 }");
    assert_eq!(e.status(), ExitStatus::Success);
    assert_eq!(dump_int(&e, "x"), 1);
}

#[test]
fn replicated_par_equals_manual_unrolling() {
    let rep = "
        val A = 4
        server Store(val init)
          interface(call read(val a, var v), call write(val a, val v)) to
        { var data[A];
          initial { var i; seq i=0 for A do data[i] := init }
          accept
          { read ? (val a, var v) v := data[a]
            write ? (val a, val v) data[a] := v
          }
        }
        server st is Store(0) &
        { var rb[A]; var t;
          par i=0 for 4 do st.write(i, i*i) ;
          seq q=0 for A do { st.read(q, t) ; rb[q] := t }
        }";
    let unrolled = "
        val A = 4
        server Store(val init)
          interface(call read(val a, var v), call write(val a, val v)) to
        { var data[A];
          initial { var i; seq i=0 for A do data[i] := init }
          accept
          { read ? (val a, var v) v := data[a]
            write ? (val a, val v) data[a] := v
          }
        }
        server st is Store(0) &
        { var rb[A]; var t;
          { st.write(0, 0) & st.write(1, 1) & st.write(2, 4) & st.write(3, 9) } ;
          seq q=0 for A do { st.read(q, t) ; rb[q] := t }
        }";
    let a = run(rep);
    let b = run(unrolled);
    assert_eq!(a.status(), ExitStatus::Success);
    assert_eq!(a.dump, b.dump);
    assert_eq!(dump_array(&a, "rb"), vec![0, 1, 4, 9]);
}

#[test]
fn environment_round_trip_counts_increments() {
    let e = run("{ var x; var k; x := 0 ; { { seq k2=0 for 5 do x := x + 1 } & { k := 3 } } }");
    assert_eq!(dump_int(&e, "x"), 5);
    assert_eq!(dump_int(&e, "k"), 3);
}

#[test]
fn seq_replicator_matches_manual_expansion() {
    let a = run("{ var acc; acc := 0 ; seq i=2 for 4 do acc := acc*10 + i }");
    let b = run("{ var acc; acc := 0 ; { acc := acc*10 + 2 ; acc := acc*10 + 3 ; acc := acc*10 + 4 ; acc := acc*10 + 5 } }");
    assert_eq!(a.dump, b.dump);
    assert_eq!(dump_int(&a, "acc"), 2345);
}

#[test]
fn store_initialises_every_cell() {
    let e = run(&corpus::store_source(0, false));
    assert_eq!(dump_array(&e, "out"), vec![0; 8]);
    let e = run(&corpus::store_source(5, false));
    assert_eq!(dump_array(&e, "out"), vec![5; 8]);
}

#[test]
fn store_write_then_read_round_trips() {
    let e = run(&corpus::store_source(0, true));
    assert_eq!(dump_array(&e, "out"), vec![0, 1, 2, 3, 4, 5, 6, 7]);
}

#[test]
fn concurrent_writers_to_distinct_cells_both_land() {
    let src = "
        server Store(val init)
          interface(call read(val a, var v), call write(val a, val v)) to
        { var data[4];
          initial { var i; seq i=0 for 4 do data[i] := init }
          accept
          { read ? (val a, var v) v := data[a]
            write ? (val a, val v) data[a] := v
          }
        }
        server s is Store(0) &
        { var u; var w;
          { s.write(1, 11) & s.write(2, 22) } ;
          s.read(1, u) ; s.read(2, w)
        }";
    // Both serialisation orders produce the same array.
    for seed in 0..4 {
        let e = run_source(src, MachineConfig { seed, ..Default::default() }).unwrap();
        assert_eq!(dump_int(&e, "u"), 11);
        assert_eq!(dump_int(&e, "w"), 22);
    }
}

#[test]
fn call_to_free_server_connects_exactly_once() {
    let src = "
        server Nop(val z) interface(call ping(val x)) to
        { var last; accept { ping ? (val x) last := x } }
        server s is Nop(0) & s.ping(1)";
    let e = run(src);
    let requests = e
        .trace
        .iter()
        .filter(|ev| matches!(ev.kind, EventKind::ConnectRequest { .. }))
        .count();
    let accepts = e
        .trace
        .iter()
        .filter(|ev| matches!(ev.kind, EventKind::ConnectAccept { .. }))
        .count();
    // One for the call, one for scope termination.
    assert_eq!(requests, 2);
    assert_eq!(accepts, 2);
    let rejects = e
        .trace
        .iter()
        .filter(|ev| matches!(ev.kind, EventKind::ConnectReject { .. }))
        .count();
    assert_eq!(rejects, 0);
}

#[test]
fn val_only_call_returns_nothing_before_disconnect() {
    let src = "
        server Nop(val z) interface(call ping(val x)) to
        { var last; accept { ping ? (val x) last := x } }
        server s is Nop(0) & s.ping(7)";
    let e = run(src);
    let windows = corpus::scan_call_windows(&e).expect("protocol");
    let ping = windows.iter().find(|w| w.call_id == 0).expect("ping call");
    assert_eq!(ping.args, vec![7]);
    assert!(ping.returns.is_empty());
}

#[test]
fn var_actuals_copy_in_and_out() {
    let src = "
        server Swap(val z) interface(call swap(var a, var b)) to
        { var t;
          accept { swap ? (var a, var b) { t := a ; a := b ; b := t } }
        }
        server s is Swap(0) &
        { var x; var y; x := 3 ; y := 4 ; s.swap(x, y) }";
    let e = run(src);
    assert_eq!(dump_int(&e, "x"), 4);
    assert_eq!(dump_int(&e, "y"), 3);
}

#[test]
fn server_array_gets_one_termination_message_per_element() {
    let src = "
        server Nop(val z) interface(call ping(val x)) to
        { var last; accept { ping ? (val x) last := x } final {} }
        server s is Nop(0)[3] & s[0].ping(1)";
    let e = run(src);
    let windows = corpus::scan_call_windows(&e).expect("protocol");
    let terminations = windows
        .iter()
        .filter(|w| w.call_id == TERMINATE_CALL)
        .count();
    assert_eq!(terminations, 3);
    assert_eq!(e.servers.len(), 3);
}

#[test]
fn final_process_runs_before_the_server_ends() {
    // The final body performs a visible write through a sibling store.
    let src = "
        server Store(val init)
          interface(call read(val a, var v), call write(val a, val v)) to
        { var data[2];
          initial { data[0] := init ; data[1] := init }
          accept
          { read ? (val a, var v) v := data[a]
            write ? (val a, val v) data[a] := v
          }
        }
        server Flagger(server Store[1] s)
          interface(call nop(val x)) to
        { accept { nop ? (val x) skip }
          final s[0].write(1, 99)
        }
        server st is Store(0)[1] &
        { var after;
          { server f is Flagger(st) & f.nop(0) } ;
          st[0].read(1, after)
        }";
    let e = run(src);
    assert_eq!(dump_int(&e, "after"), 99);
}

#[test]
fn nested_scopes_terminate_inner_servers_first() {
    let src = "
        server Nop(val z) interface(call ping(val x)) to
        { var last; accept { ping ? (val x) last := x } final {} }
        server outer is Nop(0) &
        { server inner is Nop(1) &
          { outer.ping(1) ; inner.ping(2) }
        }";
    let e = run(src);
    let windows = corpus::scan_call_windows(&e).expect("protocol");
    let terms: Vec<_> = windows
        .iter()
        .filter(|w| w.call_id == TERMINATE_CALL)
        .collect();
    assert_eq!(terms.len(), 2);
    let inner_end = e.servers.iter().find(|s| s.name == "inner").unwrap().end;
    let outer_end = e.servers.iter().find(|s| s.name == "outer").unwrap().end;
    let inner_seq = terms.iter().find(|w| w.server_end == inner_end).unwrap().accept_seq;
    let outer_seq = terms.iter().find(|w| w.server_end == outer_end).unwrap().accept_seq;
    assert!(
        inner_seq < outer_seq,
        "inner scope must terminate before the enclosing scope"
    );
}

#[test]
fn backoff_delays_double_after_rejections() {
    let src = "
        server Slow(val z) interface(call hit(val x)) to
        { var last; accept { hit ? (val x) last := x } }
        server s is Slow(0) &
        par i=0 for 6 do
        { var j; seq j=0 for 4 do s.hit(j) }";
    let cfg = MachineConfig {
        queue_capacity: Some(1),
        backoff_base: 4,
        backoff_cap: 64,
        ..Default::default()
    };
    let e = run_source(src, cfg).unwrap();
    assert_eq!(e.status(), ExitStatus::Success);
    let rejected: Vec<(u32, u64)> = e
        .trace
        .iter()
        .filter_map(|ev| match ev.kind {
            EventKind::BackoffSleep { delay } => Some((ev.thread, delay)),
            _ => None,
        })
        .collect();
    assert!(!rejected.is_empty(), "expected contention");
    // Per thread, delays within one call double (until an accept resets
    // them); the first delay of a run is always the base.
    let mut per_thread: std::collections::BTreeMap<u32, Vec<u64>> = Default::default();
    for ev in &e.trace {
        match &ev.kind {
            EventKind::BackoffSleep { delay } => {
                per_thread.entry(ev.thread).or_default().push(*delay)
            }
            EventKind::ConnectAccept { .. } => {
                per_thread.entry(ev.thread).or_default().clear()
            }
            _ => {}
        }
    }
    // Validate the doubling rule over the whole trace by replaying it.
    let mut current: std::collections::BTreeMap<u32, u64> = Default::default();
    for ev in &e.trace {
        match &ev.kind {
            EventKind::BackoffSleep { delay } => {
                let expect = current.entry(ev.thread).or_insert(4);
                assert_eq!(*delay, *expect, "thread {} delay", ev.thread);
                *expect = (*expect * 2).min(64);
            }
            EventKind::ConnectAccept { .. } => {
                current.insert(ev.thread, 4);
            }
            _ => {}
        }
    }
}

#[test]
fn footprint_larger_than_machine_is_a_launch_error() {
    let err = run_source(
        "skip & skip & skip",
        MachineConfig {
            processors: 2,
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(err.contains("needs 3 processors"), "{err}");
}

#[test]
fn out_of_bounds_index_is_a_runtime_fault() {
    let e = run("{ var a[4]; var i; i := 9 ; a[i] := 1 }");
    assert_eq!(e.status(), ExitStatus::RuntimeFault);
    match &e.termination {
        Termination::Fault { message, .. } => {
            assert!(message.contains("out of bounds"), "{message}");
        }
        other => panic!("expected fault, got {other:?}"),
    }
}

#[test]
fn remainder_by_zero_is_a_runtime_fault() {
    let e = run("{ var a; var z; z := 0 ; a := 5 rem z }");
    assert_eq!(e.status(), ExitStatus::RuntimeFault);
}

#[test]
fn server_subscript_out_of_range_is_a_runtime_fault() {
    let src = "
        server Nop(val z) interface(call ping(val x)) to
        { var last; accept { ping ? (val x) last := x } }
        server s is Nop(0)[2] &
        { var i; i := 5 ; s[i].ping(0) }";
    let e = run(src);
    assert_eq!(e.status(), ExitStatus::RuntimeFault);
}

#[test]
fn layered_replications_communicate_locally() {
    // A server array layered under replicated clients with matching
    // indexes: call traffic never leaves a processor.
    let e = run(corpus::DISTRIBUTED_MEMORY);
    assert_eq!(e.status(), ExitStatus::Success);
    assert_eq!(corpus::cross_processor_calls(&e).unwrap(), 0);
}

#[test]
fn zero_count_replicators_do_nothing() {
    let e = run("{ var x; x := 7 ; seq i=0 for 0 do x := 0 ; par j=0 for 0 do skip }");
    assert_eq!(e.status(), ExitStatus::Success);
    assert_eq!(dump_int(&e, "x"), 7);
}

#[test]
fn sibling_scopes_on_shared_processors_keep_common_ends() {
    // Two layered components each declare their own server array over the
    // same processors; concurrent setup must still give every array a
    // local end ID shared by all of its elements.
    let src = "
        server Cell(val z)
          interface(call put(val v), call get(var v)) to
        { var acc;
          initial acc := z
          accept
          { put ? (val v) acc := v
            get ? (var v) v := acc
          }
        }
        { var x; var y;
          { { server a is Cell(0)[2] &
              { a[0].put(5) ; a[1].put(6) ; { var t; var u; a[0].get(t) ; a[1].get(u) ; x := t*10 + u } }
            } |
            { server b is Cell(0)[2] &
              { b[0].put(7) ; b[1].put(8) ; { var t; var u; b[0].get(t) ; b[1].get(u) ; y := t*10 + u } }
            }
          }
        }";
    let e = run(src);
    assert_eq!(e.status(), ExitStatus::Success, "{:?}", e.termination);
    assert_eq!(dump_int(&e, "x"), 56);
    assert_eq!(dump_int(&e, "y"), 78);
    // Each array's two elements share one local end ID.
    for name in ["a", "b"] {
        let locals: Vec<u32> = e
            .servers
            .iter()
            .filter(|s| s.name == name)
            .map(|s| s.end.local)
            .collect();
        assert_eq!(locals.len(), 2);
        assert_eq!(locals[0], locals[1], "array {name} end IDs: {locals:?}");
    }
    corpus::scan_call_windows(&e).expect("protocol holds under concurrent setup");
}

#[test]
fn two_layered_arrays_call_index_aligned_servers_locally() {
    // Two equal-count replicated arrays layered with a server array: both
    // the P and Q instance at index i run on the server element i's
    // processor, so their calls never touch the network.
    let src = "
        val n = 3
        server Cell(val z)
          interface(call add(val v), call get(var v)) to
        { var acc;
          initial acc := z
          accept
          { add ? (val v) acc := acc + v
            get ? (var v) v := acc
          }
        }
        server s is Cell(0)[n] |
        { { par i=0 for n do s[i].add(i + 1) } |
          { par i=0 for n do s[i].add(10) }
        }";
    let e = run(src);
    assert_eq!(e.status(), ExitStatus::Success);
    assert_eq!(corpus::cross_processor_calls(&e).unwrap(), 0);
    // Both writers landed on every cell.
    let windows = corpus::scan_call_windows(&e).unwrap();
    for i in 0..3usize {
        let end = e.servers.iter().find(|s| s.index == i).unwrap().end;
        let sum: i64 = windows
            .iter()
            .filter(|w| w.server_end == end && w.call_id == 0)
            .map(|w| w.args[0])
            .sum();
        assert_eq!(sum, (i as i64 + 1) + 10);
    }
}

#[test]
fn initial_process_may_call_another_server() {
    let src = "
        server Store(val init)
          interface(call read(val a, var v), call write(val a, val v)) to
        { var data[2];
          initial { data[0] := init ; data[1] := init }
          accept
          { read ? (val a, var v) v := data[a]
            write ? (val a, val v) data[a] := v
          }
        }
        server Greeter(server Store[1] s)
          interface(call nop(val x)) to
        { initial s[0].write(0, 42)
          accept { nop ? (val x) skip }
        }
        server st is Store(0)[1] &
        { server g is Greeter(st) &
          { var seen; g.nop(0) ; st[0].read(0, seen) }
        }";
    let e = run(src);
    assert_eq!(dump_int(&e, "seen"), 42);
}
