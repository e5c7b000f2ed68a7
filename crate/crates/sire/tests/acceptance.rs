//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines.

use sire::corpus::{self, cannon_inputs, cannon_source, matmul_oracle};
use sire::machine::{event::render_trace, EventKind, MachineConfig, Termination};
use sire::runtime::{run_source, DumpValue, Execution, ExitStatus};
use std::process::Command;
use std::time::Instant;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sire"))
}

fn examples_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
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
fn criterion_1_allocation_conformance() {
    let start = Instant::now();
    let out = bin()
        .arg("alloc-map")
        .arg(examples_dir().join("alloc_example.sire"))
        .output()
        .expect("run alloc-map");
    assert!(out.status.success());
    let got = String::from_utf8(out.stdout).unwrap();
    let golden = include_str!("golden/alloc_example.map");
    assert_eq!(got, golden, "allocation map deviates from the golden file");

    // Cross-check the golden content against the hand-derived schedule:
    // servers `a` hold processors {0,1} under a 4-wide program; the client
    // block and the layered `b`, `c` arrays and `{X ; Y}` reuse {2,3}.
    let rows: Vec<(u32, usize, usize)> = got
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let root = rows.iter().map(|r| r.0).max().unwrap();
    let row = |id: u32| rows.iter().find(|r| r.0 == id).copied().unwrap();
    assert_eq!((row(root).1, row(root).2), (0, 4), "server-a scope");
    // Every other allocated node reuses the client block {2,3}.
    for r in rows.iter().filter(|r| r.0 != root) {
        assert_eq!(r.1, 2, "node {} base", r.0);
        assert!(r.1 + r.2 <= 4);
    }
    // The two layered arrays span {2,3}.
    assert!(rows.iter().filter(|r| (r.1, r.2) == (2, 2)).count() >= 2);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 1, "took {elapsed:?}");
    println!("criterion 1 PASS: allocation map matches the derived schedule ({elapsed:?})");
}

#[test]
fn criterion_2_replicator_unrolling_equivalence() {
    let start = Instant::now();
    for seed in 0..50u64 {
        let pair = corpus::generate_pair(seed);
        let a = run_source(&pair.replicated, MachineConfig::default())
            .unwrap_or_else(|e| panic!("seed {seed} replicated: {e}"));
        let b = run_source(&pair.unrolled, MachineConfig::default())
            .unwrap_or_else(|e| panic!("seed {seed} unrolled: {e}"));
        assert_eq!(a.status(), ExitStatus::Success, "seed {seed}");
        assert_eq!(b.status(), ExitStatus::Success, "seed {seed}");
        assert_eq!(
            a.dump, b.dump,
            "seed {seed}: replicated and unrolled final states differ\n{}",
            pair.replicated
        );
    }
    println!(
        "criterion 2 PASS: 50/50 random programs match their unrolled expansions ({:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_3_locality_claims() {
    // Distributed-memory case: no server call crosses processors.
    let e = run_source(corpus::DISTRIBUTED_MEMORY, MachineConfig::default()).unwrap();
    assert_eq!(e.status(), ExitStatus::Success);
    assert_eq!(
        corpus::cross_processor_calls(&e).unwrap(),
        0,
        "distributed-memory case must be fully local"
    );

    // Layered correspondence: store element i and client instance i share
    // a processor for every i.
    let n = 4u32;
    for i in 0..n {
        let elem = e
            .servers
            .iter()
            .find(|s| s.index == i as usize)
            .expect("store element");
        assert_eq!(elem.end.proc, i, "element {i} placement");
    }
    let client_call_procs: Vec<u32> = {
        let windows = corpus::scan_call_windows(&e).unwrap();
        let mut procs: Vec<u32> = windows
            .iter()
            .filter(|w| w.call_id >= 0)
            .map(|w| w.client_end.proc)
            .collect();
        procs.sort_unstable();
        procs.dedup();
        procs
    };
    assert_eq!(client_call_procs, vec![0, 1, 2, 3], "one client per processor");

    // Negative control: the same program composed with `&` crosses.
    let e = run_source(corpus::DISTRIBUTED_MEMORY_DISJOINT, MachineConfig::default()).unwrap();
    assert!(corpus::cross_processor_calls(&e).unwrap() > 0);

    println!("criterion 3 PASS: locality and layering assertions hold exactly");
}

#[test]
fn criterion_4_server_call_protocol() {
    let mut total = 0;
    for (name, src, cfg) in corpus::standard_cases() {
        let e = run_source(&src, cfg).unwrap_or_else(|err| panic!("{name}: {err}"));
        assert_eq!(e.status(), ExitStatus::Success, "{name}");
        let windows = corpus::scan_call_windows(&e)
            .unwrap_or_else(|err| panic!("{name}: protocol violation: {err}"));
        assert!(!windows.is_empty(), "{name}: no calls observed");
        total += windows.len();
    }
    println!(
        "criterion 4 PASS: {total} call windows across the corpus all follow the 7-step sequence"
    );
}

#[test]
fn criterion_5_contention_liveness() {
    let start = Instant::now();
    let src = "
        server Counter(val z)
          interface(call bump(val k, var total)) to
        { var tally;
          initial tally := z
          accept { bump ? (val k, var total) { tally := tally + 1 ; total := tally } }
          final {}
        }
        server s is Counter(0) &
        { var final_total;
          { par i=0 for 8 do
            { var t; var j;
              seq j=0 for 16 do s.bump(j, t)
            }
          } ;
          s.bump(0, final_total)
        }";
    let cfg = MachineConfig {
        queue_capacity: Some(3),
        backoff_base: 4,
        backoff_cap: 16,
        ..MachineConfig::default()
    };
    let e = run_source(src, cfg).unwrap();
    assert_eq!(e.status(), ExitStatus::Success, "no deadlock permitted");
    assert!(!matches!(e.termination, Termination::Deadlock(_)));

    // All 128 contended calls complete (plus the final probe).
    assert_eq!(dump_int(&e, "final_total"), 129);
    let windows = corpus::scan_call_windows(&e).unwrap();
    let bumps = windows.iter().filter(|w| w.call_id == 0).count();
    assert_eq!(bumps, 129);

    let rejects = e
        .trace
        .iter()
        .filter(|ev| matches!(ev.kind, EventKind::ConnectReject { .. }))
        .count();
    assert!(rejects >= 1, "expected at least one rejection");

    // Backoff: per thread, delays double from the base up to the cap and
    // saturate; an accept resets the sequence.
    let mut next: std::collections::BTreeMap<u32, u64> = Default::default();
    let mut saw_cap = false;
    for ev in &e.trace {
        match &ev.kind {
            EventKind::BackoffSleep { delay } => {
                let expect = next.entry(ev.thread).or_insert(4);
                assert_eq!(*delay, *expect, "thread {}", ev.thread);
                if *delay == 16 {
                    saw_cap = true;
                }
                *expect = (*expect * 2).min(16);
            }
            EventKind::ConnectAccept { .. } => {
                next.insert(ev.thread, 4);
            }
            _ => {}
        }
    }
    assert!(saw_cap, "some client should reach the backoff cap");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 5, "took {elapsed:?}");
    println!(
        "criterion 5 PASS: 128 contended calls completed, {rejects} rejections, backoff doubled to the cap ({elapsed:?})"
    );
}

#[test]
fn criterion_6_serializability() {
    for seed in 0..20u64 {
        let e = run_source(
            &corpus::write_zero_source(4, 4),
            MachineConfig {
                seed,
                ..MachineConfig::default()
            },
        )
        .unwrap();
        assert_eq!(e.status(), ExitStatus::Success, "seed {seed}");
        let last = dump_int(&e, "last");
        assert!((0..4).contains(&last), "seed {seed}: last={last}");
        let windows = corpus::scan_call_windows(&e).unwrap();
        let store0 = e
            .servers
            .iter()
            .find(|s| s.name == "s" && s.index == 0)
            .unwrap()
            .end;
        let model = corpus::replay_store_model(&windows, store0, 1, 16);
        assert_eq!(
            model[0], last,
            "seed {seed}: replaying accepted calls does not reproduce the final state"
        );
    }
    println!("criterion 6 PASS: accept-order replay reproduces the final state across 20 seeds");
}

#[test]
fn criterion_7_cannon_correctness() {
    let start = Instant::now();
    let mut runs = 0;
    for (n, dim) in [(2usize, 1usize), (2, 2), (3, 1), (3, 2)] {
        for seed in 0..10u64 {
            let (a, b) = cannon_inputs(n, dim, seed);
            let src = cannon_source(n, dim, &a, &b);
            let e = run_source(
                &src,
                MachineConfig {
                    seed,
                    ..MachineConfig::default()
                },
            )
            .unwrap_or_else(|err| panic!("cannon n={n} d={dim} seed={seed}: {err}"));
            assert_eq!(e.status(), ExitStatus::Success, "n={n} d={dim} seed={seed}");
            let got = dump_array(&e, "cv");
            let want = matmul_oracle(&a, &b, n * dim);
            assert_eq!(got, want, "n={n} d={dim} seed={seed}");
            runs += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}");
    println!("criterion 7 PASS: {runs} Cannon runs match the sequential oracle exactly ({elapsed:?})");
}

#[test]
fn criterion_8_determinism() {
    for (name, src, cfg) in corpus::standard_cases() {
        let run_once = || run_source(&src, cfg.clone()).unwrap();
        let a = run_once();
        let b = run_once();
        assert_eq!(
            render_trace(&a.trace),
            render_trace(&b.trace),
            "{name}: traces differ between identical runs"
        );
        assert_eq!(a.dump, b.dump, "{name}: outputs differ");
        assert_eq!(a.dump_text(), b.dump_text(), "{name}");
    }
    println!("criterion 8 PASS: every corpus case is byte-identical across same-seed reruns");
}

#[test]
fn criterion_9_deadlock_detection() {
    let out = bin()
        .arg("run")
        .arg(examples_dir().join("deadlock.sire"))
        .output()
        .expect("run deadlock case");
    assert_eq!(out.status.code(), Some(3), "deadlock must exit with status 3");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("deadlock detected"), "{stderr}");
    let named_threads = stderr
        .lines()
        .filter(|l| l.contains("blocked: receiving on channel"))
        .count();
    assert!(
        named_threads >= 2,
        "wait graph must name both blocked receivers:\n{stderr}"
    );
    println!("criterion 9 PASS: deadlock exits with status 3 and names the blocked threads");
}
