//! Machine-level behaviour: end allocation, rendezvous messaging,
//! connection management, scheduling and deadlock detection.

use sire::machine::{
    event::render_trace, ConnectStatus, EventKind, Machine, MachineConfig, MachineError,
    Termination,
};
use std::sync::{Arc, Mutex};

fn cfg(p: u32) -> MachineConfig {
    MachineConfig {
        processors: p,
        ..MachineConfig::default()
    }
}

#[test]
fn end_ids_are_per_processor_and_monotonic() {
    let outcome = sire::machine::run(cfg(8), 0, |mc| {
        let a = mc.new_end(3, 1).unwrap();
        let b = mc.new_end(3, 1).unwrap();
        let c = mc.new_end(0, 1).unwrap();
        assert_eq!((a.proc, a.local), (3, 0));
        assert_eq!((b.proc, b.local), (3, 1));
        assert_eq!((c.proc, c.local), (0, 0));
        Ok(())
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
}

#[test]
fn end_group_shares_a_local_id() {
    let outcome = sire::machine::run(cfg(8), 0, |mc| {
        // Skew the allocation so the processors disagree on their next ID.
        mc.new_end(1, 1).unwrap();
        mc.new_end(1, 1).unwrap();
        mc.new_end(2, 1).unwrap();
        let group = mc.new_end_group(vec![1, 2, 3], 1).unwrap();
        let locals: Vec<u32> = group.iter().map(|e| e.local).collect();
        assert_eq!(locals[0], locals[1]);
        assert_eq!(locals[1], locals[2]);
        assert_eq!(
            group.iter().map(|e| e.proc).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        Ok(())
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
}

#[test]
fn send_receive_roundtrip_and_fifo_order() {
    let got = Arc::new(Mutex::new(Vec::new()));
    let got2 = got.clone();
    let outcome = sire::machine::run(cfg(4), 0, move |mc| {
        let rx = mc.new_end(1, 1).unwrap();
        let tx = mc.new_end(0, 1).unwrap();
        mc.set_destination(tx, rx).unwrap();
        let got = got2.clone();
        mc.spawn(
            1,
            Box::new(move |mc| {
                let a = mc.receive(rx).unwrap();
                let b = mc.receive(rx).unwrap();
                got.lock().unwrap().push(a);
                got.lock().unwrap().push(b);
                Ok(())
            }),
        )
        .unwrap();
        mc.send(tx, vec![1]).unwrap();
        mc.send(tx, vec![2]).unwrap();
        Ok(())
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
    assert_eq!(*got.lock().unwrap(), vec![vec![1], vec![2]]);
}

#[test]
fn same_processor_send_has_zero_latency() {
    let outcome = sire::machine::run(cfg(4), 0, |mc| {
        let rx = mc.new_end(0, 1).unwrap();
        let tx = mc.new_end(0, 1).unwrap();
        mc.set_destination(tx, rx).unwrap();
        mc.spawn(
            0,
            Box::new(move |mc| {
                mc.receive(rx).unwrap();
                Ok(())
            }),
        )
        .unwrap();
        mc.send(tx, vec![7]).unwrap();
        Ok(())
    });
    let sends: Vec<u64> = outcome
        .trace
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Send { delay, .. } => Some(*delay),
            _ => None,
        })
        .collect();
    assert_eq!(sends, vec![0]);
}

#[test]
fn cross_processor_send_incurs_hop_latency() {
    let outcome = sire::machine::run(cfg(4), 0, |mc| {
        let rx = mc.new_end(2, 1).unwrap();
        let tx = mc.new_end(0, 1).unwrap();
        mc.set_destination(tx, rx).unwrap();
        mc.spawn(
            2,
            Box::new(move |mc| {
                mc.receive(rx).unwrap();
                Ok(())
            }),
        )
        .unwrap();
        mc.send(tx, vec![7]).unwrap();
        Ok(())
    });
    let (mut send_time, mut recv_time) = (None, None);
    for e in &outcome.trace {
        match &e.kind {
            EventKind::Send { delay, .. } => {
                assert_eq!(*delay, 1);
                send_time = Some(e.time);
            }
            EventKind::Receive { .. } => recv_time = Some(e.time),
            _ => {}
        }
    }
    assert_eq!(recv_time.unwrap(), send_time.unwrap() + 1);
}

#[test]
fn redirecting_a_destination_moves_later_sends() {
    let got = Arc::new(Mutex::new(Vec::new()));
    let got2 = got.clone();
    let outcome = sire::machine::run(cfg(4), 0, move |mc| {
        let rx1 = mc.new_end(1, 1).unwrap();
        let rx2 = mc.new_end(2, 1).unwrap();
        let tx = mc.new_end(0, 1).unwrap();
        for (p, rx, tag) in [(1u32, rx1, 10i64), (2, rx2, 20)] {
            let got = got2.clone();
            mc.spawn(
                p,
                Box::new(move |mc| {
                    let w = mc.receive(rx).unwrap();
                    got.lock().unwrap().push((tag, w));
                    Ok(())
                }),
            )
            .unwrap();
        }
        mc.set_destination(tx, rx1).unwrap();
        mc.send(tx, vec![1]).unwrap();
        mc.set_destination(tx, rx2).unwrap();
        mc.send(tx, vec![2]).unwrap();
        Ok(())
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
    let mut got = got.lock().unwrap().clone();
    got.sort();
    assert_eq!(got, vec![(10, vec![1]), (20, vec![2])]);
}

#[test]
fn loopback_end_is_deliverable_from_another_thread() {
    let got = Arc::new(Mutex::new(None));
    let got2 = got.clone();
    let outcome = sire::machine::run(cfg(2), 0, move |mc| {
        let e = mc.new_end(0, 1).unwrap();
        mc.set_destination(e, e).unwrap();
        let got = got2.clone();
        mc.spawn(
            0,
            Box::new(move |mc| {
                *got.lock().unwrap() = Some(mc.receive(e).unwrap());
                Ok(())
            }),
        )
        .unwrap();
        mc.send(e, vec![9]).unwrap();
        Ok(())
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
    assert_eq!(*got.lock().unwrap(), Some(vec![9]));
}

#[test]
fn self_send_without_a_receiver_deadlocks() {
    let outcome = sire::machine::run(cfg(2), 0, |mc| {
        let e = mc.new_end(0, 1).unwrap();
        mc.set_destination(e, e).unwrap();
        mc.send(e, vec![1]).unwrap();
        Ok(())
    });
    assert!(matches!(outcome.termination, Termination::Deadlock(_)));
}

#[test]
fn connect_to_free_end_is_accepted() {
    let outcome = sire::machine::run(cfg(2), 0, |mc| {
        let server = mc.new_end(1, 1).unwrap();
        let client = mc.new_end(0, 1).unwrap();
        mc.set_destination(client, server).unwrap();
        assert_eq!(mc.connect(client).unwrap(), ConnectStatus::Accepted);
        mc.disconnect(client).unwrap();
        Ok(())
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
    let kinds: Vec<&str> = outcome.trace.iter().map(|e| e.kind.name()).collect();
    assert!(kinds.contains(&"ConnectRequest"));
    assert!(kinds.contains(&"ConnectAccept"));
    assert!(kinds.contains(&"Disconnect"));
}

#[test]
fn queued_connects_are_accepted_in_fifo_order() {
    let order = Arc::new(Mutex::new(Vec::new()));
    let order2 = order.clone();
    let outcome = sire::machine::run(cfg(8), 0, move |mc| {
        let server = mc.new_end(0, 4).unwrap();
        // The root holds the connection while two clients queue up.
        let holder = mc.new_end(0, 1).unwrap();
        mc.set_destination(holder, server).unwrap();
        assert_eq!(mc.connect(holder).unwrap(), ConnectStatus::Accepted);
        let waiters = mc.new_end(0, 8).unwrap();
        for tag in [1i64, 2] {
            let order = order2.clone();
            mc.spawn(
                (tag + 1) as u32,
                Box::new(move |mc| {
                    let c = mc.new_end(mc.processor(), 1).unwrap();
                    mc.set_destination(c, server).unwrap();
                    assert_eq!(mc.connect(c).unwrap(), ConnectStatus::Accepted);
                    order.lock().unwrap().push(tag);
                    mc.disconnect(c).unwrap();
                    mc.set_destination(c, waiters).unwrap();
                    mc.send(c, vec![tag]).unwrap();
                    Ok(())
                }),
            )
            .unwrap();
            // Let the client reach its connect before spawning the next,
            // so the queue order is fixed by construction.
            mc.sleep(4).unwrap();
        }
        mc.disconnect(holder).unwrap();
        mc.receive(waiters).unwrap();
        mc.receive(waiters).unwrap();
        Ok(())
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
    assert_eq!(*order.lock().unwrap(), vec![1, 2]);
}

#[test]
fn full_queue_rejects_the_third_client() {
    let outcome = sire::machine::run(cfg(8), 0, move |mc| {
        let server = mc.new_end(0, 1).unwrap(); // capacity 1
        let holder = mc.new_end(0, 1).unwrap();
        mc.set_destination(holder, server).unwrap();
        assert_eq!(mc.connect(holder).unwrap(), ConnectStatus::Accepted);
        // One waiter fills the queue.
        mc.spawn(
            1,
            Box::new(move |mc| {
                let c = mc.new_end(1, 1).unwrap();
                mc.set_destination(c, server).unwrap();
                assert_eq!(mc.connect(c).unwrap(), ConnectStatus::Accepted);
                mc.disconnect(c).unwrap();
                Ok(())
            }),
        )
        .unwrap();
        mc.sleep(4).unwrap();
        // The third client bounces.
        mc.spawn(
            2,
            Box::new(move |mc| {
                let c = mc.new_end(2, 1).unwrap();
                mc.set_destination(c, server).unwrap();
                assert_eq!(mc.connect(c).unwrap(), ConnectStatus::Rejected);
                Ok(())
            }),
        )
        .unwrap();
        mc.sleep(4).unwrap();
        mc.disconnect(holder).unwrap();
        Ok(())
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
    let rejects = outcome
        .trace
        .iter()
        .filter(|e| matches!(e.kind, EventKind::ConnectReject { .. }))
        .count();
    assert_eq!(rejects, 1);
}

#[test]
fn disconnect_without_connection_fails() {
    let outcome = sire::machine::run(cfg(2), 0, |mc| {
        let server = mc.new_end(1, 1).unwrap();
        let client = mc.new_end(0, 1).unwrap();
        mc.set_destination(client, server).unwrap();
        match mc.disconnect(client) {
            Err(MachineError::NotConnected(_)) => Ok(()),
            other => Err(format!("expected NotConnected, got {other:?}")),
        }
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
}

#[test]
fn send_without_destination_fails() {
    let outcome = sire::machine::run(cfg(2), 0, |mc| {
        let e = mc.new_end(0, 1).unwrap();
        match mc.send(e, vec![1]) {
            Err(MachineError::NoDestination(_)) => Ok(()),
            other => Err(format!("expected NoDestination, got {other:?}")),
        }
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
}

#[test]
fn stray_send_to_connected_end_is_an_error() {
    let outcome = sire::machine::run(cfg(4), 0, |mc| {
        let server = mc.new_end(0, 1).unwrap();
        let client = mc.new_end(0, 1).unwrap();
        mc.set_destination(client, server).unwrap();
        assert_eq!(mc.connect(client).unwrap(), ConnectStatus::Accepted);
        let intruder = mc.new_end(0, 1).unwrap();
        mc.set_destination(intruder, server).unwrap();
        match mc.send(intruder, vec![13]) {
            Err(MachineError::StrayMessage { .. }) => {
                mc.disconnect(client).unwrap();
                Ok(())
            }
            other => Err(format!("expected StrayMessage, got {other:?}")),
        }
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
}

#[test]
fn spawn_beyond_processor_count_fails() {
    let outcome = sire::machine::run(cfg(2), 0, |mc| {
        match mc.spawn(2, Box::new(|_| Ok(()))) {
            Err(MachineError::InvalidProcessor(2)) => Ok(()),
            other => Err(format!("expected InvalidProcessor, got {other:?}")),
        }
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
}

#[test]
fn three_spawns_get_distinct_thread_ids() {
    let ids = Arc::new(Mutex::new(Vec::new()));
    let ids2 = ids.clone();
    let outcome = sire::machine::run(cfg(2), 0, move |mc| {
        for _ in 0..3 {
            let ids = ids2.clone();
            let t = mc
                .spawn(
                    0,
                    Box::new(move |mc| {
                        ids.lock().unwrap().push(mc.thread_id());
                        Ok(())
                    }),
                )
                .unwrap();
            let _ = t;
        }
        Ok(())
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
    let mut ids = ids.lock().unwrap().clone();
    ids.dedup();
    assert_eq!(ids.len(), 3);
    let starts = outcome
        .trace
        .iter()
        .filter(|e| matches!(e.kind, EventKind::ThreadStart))
        .count();
    assert_eq!(starts, 4); // root + three children
}

#[test]
fn empty_program_trace_is_start_then_end() {
    let outcome = sire::machine::run(cfg(1), 0, |_| Ok(()));
    let kinds: Vec<&str> = outcome.trace.iter().map(|e| e.kind.name()).collect();
    assert_eq!(kinds, vec!["ThreadStart", "ThreadEnd"]);
    assert_eq!(outcome.termination, Termination::Quiescent);
}

#[test]
fn two_receiver_cycle_is_reported_as_deadlock() {
    let outcome = sire::machine::run(cfg(2), 0, |mc| {
        let e1 = mc.new_end(0, 1).unwrap();
        let e2 = mc.new_end(1, 1).unwrap();
        mc.spawn(
            0,
            Box::new(move |mc| {
                mc.set_destination(e1, e2).unwrap();
                mc.receive(e1).map(|_| ()).map_err(|e| e.to_string())
            }),
        )
        .unwrap();
        mc.spawn(
            1,
            Box::new(move |mc| {
                mc.set_destination(e2, e1).unwrap();
                mc.receive(e2).map(|_| ()).map_err(|e| e.to_string())
            }),
        )
        .unwrap();
        Ok(())
    });
    match outcome.termination {
        Termination::Deadlock(graph) => {
            // The two receivers form a cycle through each other's ends.
            let blocked: Vec<_> = graph
                .entries
                .iter()
                .filter(|e| e.reason.contains("receiving"))
                .collect();
            assert_eq!(blocked.len(), 2);
            let a = blocked[0];
            let b = blocked[1];
            assert_eq!(a.waits_on, Some(b.thread));
            assert_eq!(b.waits_on, Some(a.thread));
        }
        other => panic!("expected deadlock, got {other:?}"),
    }
}

#[test]
fn identical_seeds_produce_identical_traces() {
    let run_once = || {
        sire::machine::run(cfg(4), 0, |mc| {
            let rx = mc.new_end(1, 1).unwrap();
            let tx = mc.new_end(0, 1).unwrap();
            mc.set_destination(tx, rx).unwrap();
            mc.spawn(
                1,
                Box::new(move |mc| {
                    for _ in 0..5 {
                        mc.receive(rx).unwrap();
                    }
                    Ok(())
                }),
            )
            .unwrap();
            for k in 0..5 {
                mc.send(tx, vec![k]).unwrap();
            }
            Ok(())
        })
    };
    let a = render_trace(&run_once().trace);
    let b = render_trace(&run_once().trace);
    assert_eq!(a, b);
}

#[test]
fn scheduler_does_not_starve_runnable_threads() {
    // Three same-processor threads stay continuously runnable (zero-tick
    // sleeps); all their events must interleave with a gap bounded by the
    // thread count.
    let outcome = sire::machine::run(cfg(1), 0, |mc| {
        for _ in 0..3 {
            mc.spawn(
                0,
                Box::new(|mc| {
                    for _ in 0..6 {
                        mc.sleep(0).unwrap();
                    }
                    Ok(())
                }),
            )
            .unwrap();
        }
        Ok(())
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
    let sleep_threads: Vec<u32> = outcome
        .trace
        .iter()
        .filter(|e| matches!(e.kind, EventKind::BackoffSleep { .. }))
        .map(|e| e.thread)
        .collect();
    let threads: Vec<u32> = {
        let mut t = sleep_threads.clone();
        t.sort_unstable();
        t.dedup();
        t
    };
    assert_eq!(threads.len(), 3);
    for &t in &threads {
        let positions: Vec<usize> = sleep_threads
            .iter()
            .enumerate()
            .filter(|(_, &x)| x == t)
            .map(|(i, _)| i)
            .collect();
        for w in positions.windows(2) {
            assert!(
                w[1] - w[0] <= threads.len(),
                "thread {t} starved: gap {} in {sleep_threads:?}",
                w[1] - w[0]
            );
        }
    }
}

#[test]
fn same_tick_wakers_each_run_once_per_round() {
    // Threads sleeping to the same tick are all dispatched before any of
    // them sleeps again: each logical time holds one sleep per thread.
    let outcome = sire::machine::run(cfg(1), 0, |mc| {
        for _ in 0..3 {
            mc.spawn(
                0,
                Box::new(|mc| {
                    for _ in 0..5 {
                        mc.sleep(1).unwrap();
                    }
                    Ok(())
                }),
            )
            .unwrap();
        }
        Ok(())
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
    let mut by_time: std::collections::BTreeMap<u64, Vec<u32>> = Default::default();
    for e in &outcome.trace {
        if matches!(e.kind, EventKind::BackoffSleep { .. }) {
            by_time.entry(e.time).or_default().push(e.thread);
        }
    }
    for (time, mut threads) in by_time {
        threads.sort_unstable();
        assert_eq!(threads, vec![1, 2, 3], "at time {time}");
    }
}

#[test]
fn every_send_has_exactly_one_receive() {
    let outcome = sire::machine::run(cfg(4), 0, |mc| {
        let rx = mc.new_end(1, 2).unwrap();
        let tx1 = mc.new_end(0, 1).unwrap();
        mc.set_destination(tx1, rx).unwrap();
        mc.spawn(
            1,
            Box::new(move |mc| {
                for _ in 0..4 {
                    mc.receive(rx).unwrap();
                }
                Ok(())
            }),
        )
        .unwrap();
        mc.spawn(
            2,
            Box::new(move |mc| {
                let tx2 = mc.new_end(2, 1).unwrap();
                mc.set_destination(tx2, rx).unwrap();
                mc.send(tx2, vec![5]).unwrap();
                mc.send(tx2, vec![6]).unwrap();
                Ok(())
            }),
        )
        .unwrap();
        mc.send(tx1, vec![1]).unwrap();
        mc.send(tx1, vec![2]).unwrap();
        Ok(())
    });
    assert_eq!(outcome.termination, Termination::Quiescent);
    let sends = outcome
        .trace
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Send { .. }))
        .count();
    let recvs = outcome
        .trace
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Receive { .. }))
        .count();
    assert_eq!(sends, 4);
    assert_eq!(sends, recvs);
}

#[test]
fn second_receiver_on_one_end_is_rejected() {
    let outcome = sire::machine::run(cfg(2), 0, |mc| {
        let e = mc.new_end(0, 1).unwrap();
        mc.spawn(
            0,
            Box::new(move |mc| {
                // Blocks forever; the sibling's receive must error rather
                // than queue a second consumer.
                let _ = mc.receive(e);
                Ok(())
            }),
        )
        .unwrap();
        mc.sleep(1).unwrap();
        match mc.receive(e) {
            Err(MachineError::ReceiveBusy(_)) => Ok(()),
            other => Err(format!("expected ReceiveBusy, got {other:?}")),
        }
    });
    // The helper thread is still blocked at quiescence checking time.
    assert!(matches!(outcome.termination, Termination::Deadlock(_)));
}

#[test]
fn step_returns_events_one_at_a_time() {
    let mut m = Machine::new(cfg(1));
    m.spawn_root(0, Box::new(|_| Ok(()))).unwrap();
    let first = m.step().expect("first event");
    assert_eq!(first.kind.name(), "ThreadStart");
    let second = m.step().expect("second event");
    assert_eq!(second.kind.name(), "ThreadEnd");
    assert_eq!(m.step(), None);
    assert_eq!(m.termination(), Some(&Termination::Quiescent));
}
