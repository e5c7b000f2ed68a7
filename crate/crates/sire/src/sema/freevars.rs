//! Free-variable analysis over the elaborated arena.
//!
//! Used to compute capture lists for remotely spawned components and to
//! enforce the parallel disjointness rule. Arrays are treated as single
//! variables.

use crate::diag::Pos;
use crate::sema::elab::{ChanTarget, Ex, Lv, NodeKind, Payload, Program, UName};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UseFlags {
    pub read: bool,
    pub written: bool,
    pub rpos: Pos,
    pub wpos: Pos,
}

pub type FreeSet = BTreeMap<UName, UseFlags>;

pub fn free_sets(p: &Program) -> Vec<FreeSet> {
    let mut sets: Vec<Option<FreeSet>> = vec![None; p.nodes.len()];
    visit(p, p.main, &mut sets);
    for inst in &p.instances {
        if let Some(id) = inst.initial {
            visit(p, id, &mut sets);
        }
        for arm in &inst.arms {
            visit(p, arm.body, &mut sets);
        }
        if let Some(id) = inst.final_body {
            visit(p, id, &mut sets);
        }
    }
    sets.into_iter().map(Option::unwrap_or_default).collect()
}

fn visit(p: &Program, id: crate::sema::elab::NodeId, sets: &mut Vec<Option<FreeSet>>) {
    if sets[id.index()].is_some() {
        return;
    }
    let mut set = FreeSet::new();
    match p.kind(id) {
        NodeKind::Skip => {}
        NodeKind::Assign { target, value } => {
            write_lv(&mut set, target);
            read_ex(&mut set, value);
        }
        NodeKind::ChanOut { chan, value } => {
            read_lv_base(&mut set, chan);
            match value {
                Payload::Scalar(e) => read_ex(&mut set, e),
                Payload::WholeArray(n, _, pos) => read(&mut set, n, *pos),
            }
        }
        NodeKind::ChanIn { chan, target } => {
            read_lv_base(&mut set, chan);
            match target {
                ChanTarget::Scalar(lv) => write_lv(&mut set, lv),
                ChanTarget::WholeArray(n, _, pos) => write(&mut set, n, *pos),
            }
        }
        NodeKind::Seq(children) => {
            for &c in children.clone().iter() {
                visit(p, c, sets);
                merge(&mut set, &sets[c.index()].clone().unwrap());
            }
        }
        NodeKind::LocalPar(children) | NodeKind::DistPar(children) => {
            for c in children.clone().iter() {
                visit(p, c.node, sets);
                merge(&mut set, &sets[c.node.index()].clone().unwrap());
            }
        }
        NodeKind::SeqRep { var, base, body, .. } => {
            read_ex(&mut set, base);
            let (var, body) = (var.clone(), *body);
            visit(p, body, sets);
            let mut inner = sets[body.index()].clone().unwrap();
            inner.remove(&var);
            merge(&mut set, &inner);
        }
        NodeKind::ParRep { var, base, body, .. } => {
            read_ex(&mut set, base);
            let (var, body) = (var.clone(), body.node);
            visit(p, body, sets);
            let mut inner = sets[body.index()].clone().unwrap();
            inner.remove(&var);
            merge(&mut set, &inner);
        }
        NodeKind::ServerSpec { name, args, body, .. } => {
            for a in args.clone().iter() {
                read_ex(&mut set, a);
            }
            let (name, body) = (name.clone(), body.node);
            visit(p, body, sets);
            let mut inner = sets[body.index()].clone().unwrap();
            inner.remove(&name);
            merge(&mut set, &inner);
        }
        NodeKind::Call {
            server, subscripts, actuals, ..
        } => {
            read_ex(&mut set, server);
            for e in subscripts {
                read_ex(&mut set, e);
            }
            for a in actuals {
                match a {
                    crate::sema::elab::Actual::Val(e) => read_ex(&mut set, e),
                    crate::sema::elab::Actual::Var(lv) => {
                        // Copy-in and copy-out.
                        read(&mut set, &lv.name, lv.pos);
                        write_lv(&mut set, lv);
                    }
                }
            }
        }
        NodeKind::Block { decls, body } => {
            let bound: Vec<UName> = decls.iter().map(|d| d.name().clone()).collect();
            if let Some(b) = *body {
                visit(p, b, sets);
                let mut inner = sets[b.index()].clone().unwrap();
                for n in bound {
                    inner.remove(&n);
                }
                merge(&mut set, &inner);
            }
        }
    }
    sets[id.index()] = Some(set);
}

fn read(set: &mut FreeSet, name: &str, pos: Pos) {
    if name.is_empty() {
        return;
    }
    let e = set.entry(name.to_string()).or_default();
    if !e.read {
        e.read = true;
        e.rpos = pos;
    }
}

fn write(set: &mut FreeSet, name: &str, pos: Pos) {
    if name.is_empty() {
        return;
    }
    let e = set.entry(name.to_string()).or_default();
    if !e.written {
        e.written = true;
        e.wpos = pos;
    }
}

fn read_ex(set: &mut FreeSet, e: &Ex) {
    match e {
        Ex::Int(_) => {}
        Ex::Name(n, pos) => read(set, n, *pos),
        Ex::Subscript(n, idx, pos) => {
            read(set, n, *pos);
            for e in idx {
                read_ex(set, e);
            }
        }
        Ex::Bin(_, l, r, _) => {
            read_ex(set, l);
            read_ex(set, r);
        }
    }
}

fn write_lv(set: &mut FreeSet, lv: &Lv) {
    write(set, &lv.name, lv.pos);
    for e in &lv.indices {
        read_ex(set, e);
    }
}

fn read_lv_base(set: &mut FreeSet, lv: &Lv) {
    read(set, &lv.name, lv.pos);
    for e in &lv.indices {
        read_ex(set, e);
    }
}

fn merge(into: &mut FreeSet, from: &FreeSet) {
    for (name, flags) in from {
        let e = into.entry(name.clone()).or_default();
        if flags.read && !e.read {
            e.read = true;
            e.rpos = flags.rpos;
        }
        if flags.written && !e.written {
            e.written = true;
            e.wpos = flags.wpos;
        }
    }
}
