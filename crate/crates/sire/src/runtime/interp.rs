//! Tree interpreter running on the simulated machine.
//!
//! Each parallel component is spawned as a machine thread on its allocated
//! processor: the parent ships the component's captured environment over a
//! bootstrap channel, and the component ships written variables back when
//! it terminates, which doubles as the join. Server calls follow the
//! connect / end-ID / call-ID / actuals / var-returns / disconnect
//! sequence, with exponential backoff on rejected connects.

use crate::alloc::AllocationMap;
use crate::diag::Pos;
use crate::frontend::ast::{BinOp, Mode, ParMode, Placement};
use crate::machine::{ChanId, ConnectStatus, EndId, MachineCtx, ThreadEntry};
use crate::runtime::env::{
    decode_captures, encode_captures, encode_value, Env, ServerBinding, Value,
};
use crate::runtime::{DumpValue, Fault, RunParams, ServerEndInfo, TERMINATE_CALL};
use crate::sema::elab::{
    Actual, Capture, ChanTarget, EDecl, Ex, Lv, NodeId, NodeKind, Payload, Program, UName, VKind,
};
use std::sync::{Arc, Mutex};

/// State shared (read-only or coordinator-written) across all simulated
/// threads of one execution.
pub struct Shared {
    pub prog: Arc<Program>,
    pub map: Arc<AllocationMap>,
    pub params: RunParams,
    pub dump: Mutex<Option<Vec<(String, DumpValue)>>>,
    pub servers: Mutex<Vec<ServerEndInfo>>,
}

pub struct Interp<'m> {
    sh: Arc<Shared>,
    mc: &'m mut MachineCtx,
    /// Processor relocation for replicated instances: every allocation-map
    /// base is shifted by this amount on this thread.
    offset: u32,
    client_end: Option<EndId>,
}

struct PendingJoin {
    join_end: EndId,
    writeback: Vec<Capture>,
}

impl<'m> Interp<'m> {
    pub fn new(sh: Arc<Shared>, mc: &'m mut MachineCtx, offset: u32) -> Self {
        Interp {
            sh,
            mc,
            offset,
            client_end: None,
        }
    }

    fn prog(&self) -> Arc<Program> {
        self.sh.prog.clone()
    }

    fn my_proc(&self) -> u32 {
        self.mc.processor()
    }

    fn base_of(&self, node: NodeId) -> u32 {
        self.sh.map.base(node) as u32 + self.offset
    }

    pub fn exec(&mut self, env: &mut Env, id: NodeId) -> Result<(), Fault> {
        let prog = self.prog();
        let node = prog.node(id);
        match &node.kind {
            NodeKind::Skip => Ok(()),
            NodeKind::Assign { target, value } => {
                let v = self.eval(env, value)?;
                self.assign(env, target, v)
            }
            NodeKind::ChanOut { chan, value } => {
                let cid = self.chan_id(env, chan)?;
                let words = match value {
                    Payload::Scalar(e) => vec![self.eval(env, e)?],
                    Payload::WholeArray(name, _, pos) => match env.get(name) {
                        Some(Value::Array(a)) => a.clone(),
                        _ => return Err(Fault::at(*pos, "array value missing")),
                    },
                };
                self.mc.chan_send(cid, words).map_err(Fault::Machine)
            }
            NodeKind::ChanIn { chan, target } => {
                let cid = self.chan_id(env, chan)?;
                let words = self.mc.chan_recv(cid).map_err(Fault::Machine)?;
                match target {
                    ChanTarget::Scalar(lv) => {
                        if words.len() != 1 {
                            return Err(Fault::at(
                                lv.pos,
                                format!("expected a single word, received {}", words.len()),
                            ));
                        }
                        self.assign(env, lv, words[0])
                    }
                    ChanTarget::WholeArray(name, len, pos) => {
                        if words.len() != *len {
                            return Err(Fault::at(
                                *pos,
                                format!("expected {} words, received {}", len, words.len()),
                            ));
                        }
                        match env.get_mut(name) {
                            Some(Value::Array(a)) => {
                                a.copy_from_slice(&words);
                                Ok(())
                            }
                            _ => Err(Fault::at(*pos, "array value missing")),
                        }
                    }
                }
            }
            NodeKind::Seq(children) => {
                for &c in children {
                    self.exec(env, c)?;
                }
                Ok(())
            }
            NodeKind::LocalPar(children) => {
                let proc = self.my_proc();
                let mut pending = Vec::new();
                for child in children {
                    pending.push(self.spawn_child(env, child, proc, self.offset, None)?);
                }
                self.join_children(env, pending)
            }
            NodeKind::DistPar(children) => {
                let mut pending = Vec::new();
                for child in children {
                    let proc = self.base_of(child.node);
                    pending.push(self.spawn_child(env, child, proc, self.offset, None)?);
                }
                self.join_children(env, pending)
            }
            NodeKind::SeqRep {
                var, base, count, body,
            } => {
                let b = self.eval(env, base)?;
                for k in 0..*count {
                    env.push_frame();
                    env.declare(var.clone(), Value::Int(b.wrapping_add(k as i64)));
                    let r = self.exec(env, *body);
                    env.pop_frame();
                    r?;
                }
                Ok(())
            }
            NodeKind::ParRep {
                var, base, count, body, mode,
            } => {
                let b = self.eval(env, base)?;
                let width = self.sh.map.width(body.node) as u32;
                let mut pending = Vec::new();
                for k in 0..*count {
                    let (proc, child_offset) = match mode {
                        ParMode::Distributed => {
                            let off = self.offset + k as u32 * width;
                            (self.sh.map.base(body.node) as u32 + off, off)
                        }
                        ParMode::Local => (self.my_proc(), self.offset),
                    };
                    let index = Some((var, b.wrapping_add(k as i64)));
                    pending.push(self.spawn_child(env, body, proc, child_offset, index)?);
                }
                self.join_children(env, pending)
            }
            NodeKind::ServerSpec { .. } => self.server_spec(env, id),
            NodeKind::Call { .. } => self.client_call(env, id),
            NodeKind::Block { decls, body } => {
                env.push_frame();
                let mut result = self.declare_all(env, decls);
                if result.is_ok() {
                    if let Some(b) = body {
                        result = self.exec(env, *b);
                    }
                }
                if result.is_ok() && self.sh.prog.dump_block == Some(id) {
                    self.snapshot_dump(env);
                }
                env.pop_frame();
                result
            }
        }
    }

    fn declare_all(&mut self, env: &mut Env, decls: &[EDecl]) -> Result<(), Fault> {
        for d in decls {
            match d {
                EDecl::Int { name } => env.declare(name.clone(), Value::Int(0)),
                EDecl::Array { name, len } => {
                    env.declare(name.clone(), Value::Array(vec![0; *len]))
                }
                EDecl::Chan { name, shape } => {
                    let count = shape.iter().product::<usize>().max(1) as u32;
                    let first = self.mc.chan_open(count).map_err(Fault::Machine)?;
                    let ids = (0..count).map(|k| ChanId(first.0 + k)).collect();
                    env.declare(name.clone(), Value::Chan(ids));
                }
            }
        }
        Ok(())
    }

    fn snapshot_dump(&self, env: &Env) {
        let prog = self.prog();
        let vars: Vec<(String, DumpValue)> = env
            .top_frame()
            .into_iter()
            .filter_map(|(name, value)| {
                let src = prog.src_name(&name).to_string();
                match value {
                    Value::Int(v) => Some((src, DumpValue::Int(v))),
                    Value::Array(a) => Some((src, DumpValue::Array(a))),
                    _ => None,
                }
            })
            .collect();
        *self.sh.dump.lock().unwrap() = Some(vars);
    }

    // ── Parallel children ──

    fn spawn_child(
        &mut self,
        env: &Env,
        child: &crate::sema::elab::ParChild,
        proc: u32,
        child_offset: u32,
        index: Option<(&UName, i64)>,
    ) -> Result<PendingJoin, Fault> {
        let boot_end = self.mc.new_end(proc, 1).map_err(Fault::Machine)?;
        let join_end = self
            .mc
            .new_end(self.my_proc(), 1)
            .map_err(Fault::Machine)?;
        self.mc
            .set_destination(join_end, boot_end)
            .map_err(Fault::Machine)?;

        let sh = self.sh.clone();
        let node = child.node;
        let captures = child.captures.clone();
        let writeback = child.writeback.clone();
        let entry: ThreadEntry = Box::new(move |mc| {
            child_main(sh, mc, node, boot_end, join_end, captures, writeback, child_offset)
                .map_err(|f| f.to_string())
        });
        self.mc.spawn(proc, entry).map_err(Fault::Machine)?;

        let words = encode_captures(env, &child.captures, index);
        self.mc.send(join_end, words).map_err(Fault::Machine)?;
        Ok(PendingJoin {
            join_end,
            writeback: child.writeback.clone(),
        })
    }

    fn join_children(&mut self, env: &mut Env, pending: Vec<PendingJoin>) -> Result<(), Fault> {
        for pj in pending {
            let words = self.mc.receive(pj.join_end).map_err(Fault::Machine)?;
            apply_writeback(env, &pj.writeback, &words)?;
        }
        Ok(())
    }

    // ── Servers ──

    fn server_spec(&mut self, env: &mut Env, id: NodeId) -> Result<(), Fault> {
        let prog = self.prog();
        let (name, inst_idx, def, args, extent, placement, body) = match prog.kind(id) {
            NodeKind::ServerSpec {
                name, inst, def, args, extent, placement, body, ..
            } => (name, *inst, *def, args, *extent, *placement, body),
            _ => unreachable!(),
        };
        let inst = &prog.instances[inst_idx];
        let pos = prog.node(id).pos;

        // Evaluate specification arguments once, in order.
        let mut arg_values = Vec::new();
        for (ex, (_, kind)) in args.iter().zip(&inst.formals) {
            arg_values.push(self.eval_by_kind(env, ex, kind)?);
        }

        let spec_base = self.base_of(id);
        let elem_procs: Vec<u32> = (0..extent as u32).map(|i| spec_base + i).collect();
        let capacity = self
            .sh
            .params
            .queue_capacity
            .unwrap_or_else(|| queue_capacity_rule(self.sh.map.width(body.node)));
        let ends = self
            .mc
            .new_end_group(elem_procs.clone(), capacity)
            .map_err(Fault::Machine)?;

        {
            let mut reg = self.sh.servers.lock().unwrap();
            for (i, &end) in ends.iter().enumerate() {
                reg.push(ServerEndInfo {
                    end,
                    def,
                    inst: inst_idx,
                    index: i,
                    name: prog.src_name(name).to_string(),
                });
            }
        }

        // Boot each element over its own service end; elements only become
        // reachable once the binding is in scope, after all boots finish.
        let boot_words = {
            let mut words = Vec::new();
            for ((_, kind), v) in inst.formals.iter().zip(&arg_values) {
                encode_value(kind, v, &mut words);
            }
            words
        };
        if extent > 0 {
            let boot_src = self
                .mc
                .new_end(self.my_proc(), 1)
                .map_err(Fault::Machine)?;
            for (i, &end) in ends.iter().enumerate() {
                let sh = self.sh.clone();
                let entry: ThreadEntry = Box::new(move |mc| {
                    server_main(sh, mc, inst_idx, end).map_err(|f| f.to_string())
                });
                self.mc.spawn(elem_procs[i], entry).map_err(Fault::Machine)?;
                self.mc
                    .set_destination(boot_src, end)
                    .map_err(Fault::Machine)?;
                self.mc
                    .send(boot_src, boot_words.clone())
                    .map_err(Fault::Machine)?;
            }
        }

        let binding = ServerBinding {
            base: spec_base,
            local_end: ends.first().map(|e| e.local).unwrap_or(0),
            extent: extent as u32,
        };

        env.push_frame();
        env.declare(name.clone(), Value::Server(binding));
        let result = match placement {
            Placement::Layered => self.exec(env, body.node),
            Placement::Disjoint => {
                let proc = self.base_of(body.node);
                let pending = self.spawn_child(env, body, proc, self.offset, None)?;
                self.join_children(env, vec![pending])
            }
        };
        env.pop_frame();
        result?;

        self.terminate_scope(&ends, pos)
    }

    /// Send the reserved termination call to every element and wait for
    /// each to finish its `final` process.
    fn terminate_scope(&mut self, ends: &[EndId], pos: Pos) -> Result<(), Fault> {
        let ce = self.ensure_client_end()?;
        for &end in ends {
            self.mc.set_destination(ce, end).map_err(Fault::Machine)?;
            self.connect_with_backoff(ce)?;
            self.mc
                .send(ce, vec![ce.pack()])
                .map_err(Fault::Machine)?;
            self.mc
                .send(ce, vec![TERMINATE_CALL])
                .map_err(Fault::Machine)?;
            let ack = self.mc.receive(ce).map_err(Fault::Machine)?;
            if ack.len() != 1 {
                return Err(Fault::at(pos, "malformed termination acknowledgement"));
            }
            self.mc.disconnect(ce).map_err(Fault::Machine)?;
        }
        Ok(())
    }

    // ── Server calls ──

    fn client_call(&mut self, env: &mut Env, id: NodeId) -> Result<(), Fault> {
        let prog = self.prog();
        let pos = prog.node(id).pos;
        let (server, subscripts, call_id, actuals) = match prog.kind(id) {
            NodeKind::Call {
                server, subscripts, call_id, actuals, ..
            } => (server, subscripts, *call_id, actuals),
            _ => unreachable!(),
        };

        let (binding, dims) = self.eval_server(env, server)?;
        let element = if subscripts.is_empty() {
            0
        } else {
            let idx: Vec<i64> = subscripts
                .iter()
                .map(|e| self.eval(env, e))
                .collect::<Result<_, _>>()?;
            flatten_index(&dims, &idx, pos)?
        };
        if element >= binding.extent as usize {
            return Err(Fault::at(
                pos,
                format!(
                    "server subscript {element} out of range (extent {})",
                    binding.extent
                ),
            ));
        }
        let target = binding.element_end(element as u32);

        // Steps 1-7: destination, connect (with backoff), own end ID,
        // call ID, actuals, var returns, disconnect.
        let ce = self.ensure_client_end()?;
        self.mc.set_destination(ce, target).map_err(Fault::Machine)?;
        self.connect_with_backoff(ce)?;
        self.mc.send(ce, vec![ce.pack()]).map_err(Fault::Machine)?;
        self.mc
            .send(ce, vec![call_id as i64])
            .map_err(Fault::Machine)?;
        for a in actuals {
            let w = match a {
                Actual::Val(e) => self.eval(env, e)?,
                Actual::Var(lv) => self.read_lvalue(env, lv)?,
            };
            self.mc.send(ce, vec![w]).map_err(Fault::Machine)?;
        }
        for a in actuals {
            if let Actual::Var(lv) = a {
                let words = self.mc.receive(ce).map_err(Fault::Machine)?;
                if words.len() != 1 {
                    return Err(Fault::at(pos, "malformed call return"));
                }
                self.assign(env, lv, words[0])?;
            }
        }
        self.mc.disconnect(ce).map_err(Fault::Machine)?;
        Ok(())
    }

    fn ensure_client_end(&mut self) -> Result<EndId, Fault> {
        match self.client_end {
            Some(e) => Ok(e),
            None => {
                let e = self
                    .mc
                    .new_end(self.my_proc(), 1)
                    .map_err(Fault::Machine)?;
                self.client_end = Some(e);
                Ok(e)
            }
        }
    }

    fn connect_with_backoff(&mut self, ce: EndId) -> Result<(), Fault> {
        let p = &self.sh.params;
        let (factor, cap) = (p.backoff_factor.max(1), p.backoff_cap.max(1));
        let mut delay = p.backoff_base.clamp(1, cap);
        loop {
            match self.mc.connect(ce).map_err(Fault::Machine)? {
                ConnectStatus::Accepted => return Ok(()),
                ConnectStatus::Rejected => {
                    self.mc.sleep(delay).map_err(Fault::Machine)?;
                    delay = delay.saturating_mul(factor).min(cap);
                }
            }
        }
    }

    // ── Expressions ──

    fn eval(&mut self, env: &Env, e: &Ex) -> Result<i64, Fault> {
        match e {
            Ex::Int(v) => Ok(*v),
            Ex::Name(n, pos) => match env.get(n) {
                Some(Value::Int(v)) => Ok(*v),
                _ => Err(Fault::at(*pos, format!("`{}` has no integer value", self.src(n)))),
            },
            Ex::Subscript(n, idx, pos) => {
                if idx.len() != 1 {
                    return Err(Fault::at(*pos, "an array takes one subscript"));
                }
                let i = self.eval(env, &idx[0])?;
                match env.get(n) {
                    Some(Value::Array(a)) => {
                        if i < 0 || i as usize >= a.len() {
                            Err(Fault::at(
                                *pos,
                                format!(
                                    "index {i} out of bounds for `{}` (length {})",
                                    self.src(n),
                                    a.len()
                                ),
                            ))
                        } else {
                            Ok(a[i as usize])
                        }
                    }
                    _ => Err(Fault::at(*pos, format!("`{}` is not an array", self.src(n)))),
                }
            }
            Ex::Bin(op, l, r, pos) => {
                let a = self.eval(env, l)?;
                let b = self.eval(env, r)?;
                match op {
                    BinOp::Add => Ok(a.wrapping_add(b)),
                    BinOp::Sub => Ok(a.wrapping_sub(b)),
                    BinOp::Mul => Ok(a.wrapping_mul(b)),
                    BinOp::Rem => {
                        if b == 0 {
                            Err(Fault::at(*pos, "remainder by zero"))
                        } else {
                            Ok(a.wrapping_rem(b))
                        }
                    }
                }
            }
        }
    }

    fn src(&self, uname: &str) -> String {
        self.sh
            .prog
            .names
            .get(uname)
            .map(|i| i.src.clone())
            .unwrap_or_else(|| uname.to_string())
    }

    fn assign(&mut self, env: &mut Env, lv: &Lv, value: i64) -> Result<(), Fault> {
        if lv.indices.is_empty() {
            match env.get_mut(&lv.name) {
                Some(Value::Int(v)) => {
                    *v = value;
                    Ok(())
                }
                _ => Err(Fault::at(lv.pos, format!("`{}` is not assignable", self.src(&lv.name)))),
            }
        } else {
            let i = self.eval(env, &lv.indices[0])?;
            match env.get_mut(&lv.name) {
                Some(Value::Array(a)) => {
                    if i < 0 || i as usize >= a.len() {
                        Err(Fault::at(
                            lv.pos,
                            format!(
                                "index {i} out of bounds for `{}` (length {})",
                                self.src(&lv.name),
                                a.len()
                            ),
                        ))
                    } else {
                        a[i as usize] = value;
                        Ok(())
                    }
                }
                _ => Err(Fault::at(lv.pos, format!("`{}` is not an array", self.src(&lv.name)))),
            }
        }
    }

    fn read_lvalue(&mut self, env: &Env, lv: &Lv) -> Result<i64, Fault> {
        if lv.indices.is_empty() {
            match env.get(&lv.name) {
                Some(Value::Int(v)) => Ok(*v),
                _ => Err(Fault::at(lv.pos, format!("`{}` has no integer value", self.src(&lv.name)))),
            }
        } else {
            let e = Ex::Subscript(lv.name.clone(), lv.indices.clone(), lv.pos);
            self.eval(env, &e)
        }
    }

    fn eval_by_kind(&mut self, env: &Env, ex: &Ex, kind: &VKind) -> Result<Value, Fault> {
        match kind {
            VKind::Int => Ok(Value::Int(self.eval(env, ex)?)),
            VKind::Server { .. } => {
                let (binding, _) = self.eval_server(env, ex)?;
                Ok(Value::Server(binding))
            }
            VKind::Chan(_) => {
                let cid = match ex {
                    Ex::Name(n, pos) => match env.get(n) {
                        Some(Value::Chan(ids)) => ids.clone(),
                        _ => return Err(Fault::at(*pos, "channel value missing")),
                    },
                    Ex::Subscript(..) => {
                        let lv = ex_as_lv(ex);
                        vec![self.chan_id(env, &lv)?]
                    }
                    _ => unreachable!("resolved channel argument"),
                };
                Ok(Value::Chan(cid))
            }
            VKind::Array(_) => unreachable!("array formals are not supported"),
        }
    }

    /// Evaluate a server expression to a binding plus the dimensions still
    /// unsubscripted (for subsequent call subscripts).
    fn eval_server(&mut self, env: &Env, ex: &Ex) -> Result<(ServerBinding, Vec<usize>), Fault> {
        match ex {
            Ex::Name(n, pos) => {
                let dims = match self.sh.prog.names.get(n).map(|i| &i.kind) {
                    Some(VKind::Server { dims, .. }) => dims.clone(),
                    _ => Vec::new(),
                };
                match env.get(n) {
                    Some(Value::Server(b)) => Ok((*b, dims)),
                    _ => Err(Fault::at(*pos, format!("`{}` is not a server", self.src(n)))),
                }
            }
            Ex::Subscript(n, idx, pos) => {
                let dims = match self.sh.prog.names.get(n).map(|i| &i.kind) {
                    Some(VKind::Server { dims, .. }) => dims.clone(),
                    _ => return Err(Fault::at(*pos, format!("`{}` is not a server", self.src(n)))),
                };
                let b = match env.get(n) {
                    Some(Value::Server(b)) => *b,
                    _ => return Err(Fault::at(*pos, format!("`{}` is not a server", self.src(n)))),
                };
                let idx: Vec<i64> = idx
                    .iter()
                    .map(|e| self.eval(env, e))
                    .collect::<Result<_, _>>()?;
                let off = flatten_index(&dims, &idx, *pos)?;
                if off >= b.extent as usize {
                    return Err(Fault::at(
                        *pos,
                        format!("server subscript {off} out of range (extent {})", b.extent),
                    ));
                }
                Ok((
                    ServerBinding {
                        base: b.base + off as u32,
                        local_end: b.local_end,
                        extent: 1,
                    },
                    Vec::new(),
                ))
            }
            _ => unreachable!("resolved server expression"),
        }
    }

    fn chan_id(&mut self, env: &Env, lv: &Lv) -> Result<ChanId, Fault> {
        let shape = match self.sh.prog.names.get(&lv.name).map(|i| &i.kind) {
            Some(VKind::Chan(shape)) => shape.clone(),
            _ => {
                return Err(Fault::at(
                    lv.pos,
                    format!("`{}` is not a channel", self.src(&lv.name)),
                ))
            }
        };
        let ids = match env.get(&lv.name) {
            Some(Value::Chan(ids)) => ids.clone(),
            _ => return Err(Fault::at(lv.pos, "channel value missing")),
        };
        let off = if lv.indices.is_empty() {
            0
        } else {
            let idx: Vec<i64> = lv
                .indices
                .iter()
                .map(|e| self.eval(env, e))
                .collect::<Result<_, _>>()?;
            flatten_index(&shape, &idx, lv.pos)?
        };
        ids.get(off).copied().ok_or_else(|| {
            Fault::at(
                lv.pos,
                format!("channel subscript {off} out of range"),
            )
        })
    }
}

fn ex_as_lv(ex: &Ex) -> Lv {
    match ex {
        Ex::Name(n, pos) => Lv {
            name: n.clone(),
            indices: vec![],
            pos: *pos,
        },
        Ex::Subscript(n, idx, pos) => Lv {
            name: n.clone(),
            indices: idx.clone(),
            pos: *pos,
        },
        _ => unreachable!(),
    }
}

/// Row-major flattening of a full subscript list with bounds checks.
fn flatten_index(dims: &[usize], idx: &[i64], pos: Pos) -> Result<usize, Fault> {
    if dims.len() != idx.len() {
        return Err(Fault::at(
            pos,
            format!("expected {} subscripts, got {}", dims.len(), idx.len()),
        ));
    }
    let mut off = 0usize;
    for (&d, &i) in dims.iter().zip(idx) {
        if i < 0 || i as usize >= d {
            return Err(Fault::at(
                pos,
                format!("subscript {i} out of range 0..{d}"),
            ));
        }
        off = off * d + i as usize;
    }
    Ok(off)
}

fn apply_writeback(env: &mut Env, writeback: &[Capture], words: &[i64]) -> Result<(), Fault> {
    let mut at = 0;
    for cap in writeback {
        let len = crate::runtime::env::wire_len(&cap.kind);
        if at + len > words.len() {
            return Err(Fault::at(Pos::default(), "environment update too short"));
        }
        let value = crate::runtime::env::decode_value(&cap.kind, &words[at..at + len]);
        match env.get_mut(&cap.name) {
            Some(slot) => *slot = value,
            None => return Err(Fault::at(Pos::default(), "environment update names unknown variable")),
        }
        at += len;
    }
    Ok(())
}

/// Queue capacity rule: logarithmic in the number of potential clients,
/// at least one slot.
pub fn queue_capacity_rule(client_footprint: usize) -> u32 {
    let n = client_footprint.max(2);
    (usize::BITS - (n - 1).leading_zeros()).max(1)
}

// ── Thread bodies ──

#[allow(clippy::too_many_arguments)]
fn child_main(
    sh: Arc<Shared>,
    mc: &mut MachineCtx,
    node: NodeId,
    boot_end: EndId,
    join_end: EndId,
    captures: Vec<Capture>,
    writeback: Vec<Capture>,
    offset: u32,
) -> Result<(), Fault> {
    let words = mc.receive(boot_end).map_err(Fault::Machine)?;
    let mut env = Env::new();
    env.push_frame();
    decode_captures(&mut env, &captures, &words).map_err(|m| Fault::at(Pos::default(), m))?;
    mc.set_destination(boot_end, join_end)
        .map_err(Fault::Machine)?;

    let mut interp = Interp::new(sh, mc, offset);
    interp.exec(&mut env, node)?;

    let back = encode_captures(&env, &writeback, None);
    interp.mc.send(boot_end, back).map_err(Fault::Machine)?;
    Ok(())
}

fn server_main(
    sh: Arc<Shared>,
    mc: &mut MachineCtx,
    inst_idx: usize,
    my_end: EndId,
) -> Result<(), Fault> {
    let prog = sh.prog.clone();
    let inst = &prog.instances[inst_idx];

    // Boot: formal values arrive over the service end before any client
    // can hold a reference.
    let words = mc.receive(my_end).map_err(Fault::Machine)?;
    let mut env = Env::new();
    env.push_frame();
    {
        let caps: Vec<Capture> = inst
            .formals
            .iter()
            .map(|(n, k)| Capture {
                name: n.clone(),
                kind: k.clone(),
            })
            .collect();
        decode_captures(&mut env, &caps, &words).map_err(|m| Fault::at(inst.pos, m))?;
    }

    let mut interp = Interp::new(sh.clone(), mc, 0);
    env.push_frame();
    interp.declare_all(&mut env, &inst.locals)?;

    if let Some(init) = inst.initial {
        interp.exec(&mut env, init)?;
    }

    loop {
        let idw = interp.mc.receive(my_end).map_err(Fault::Machine)?;
        if idw.len() != 1 {
            return Err(Fault::at(inst.pos, "malformed call header"));
        }
        let caller = EndId::unpack(idw[0]);
        let cidw = interp.mc.receive(my_end).map_err(Fault::Machine)?;
        if cidw.len() != 1 {
            return Err(Fault::at(inst.pos, "malformed call identifier"));
        }
        let cid = cidw[0];

        if cid == TERMINATE_CALL {
            if let Some(fin) = inst.final_body {
                interp.exec(&mut env, fin)?;
            }
            interp
                .mc
                .set_destination(my_end, caller)
                .map_err(Fault::Machine)?;
            interp.mc.send(my_end, vec![0]).map_err(Fault::Machine)?;
            return Ok(());
        }

        let arm = usize::try_from(cid)
            .ok()
            .and_then(|i| inst.arms.get(i))
            .ok_or_else(|| {
                Fault::at(inst.pos, format!("unknown call id {cid}: protocol corruption"))
            })?;

        env.push_frame();
        for (_, pname) in &arm.params {
            let w = interp.mc.receive(my_end).map_err(Fault::Machine)?;
            if w.len() != 1 {
                env.pop_frame();
                return Err(Fault::at(inst.pos, "malformed call actual"));
            }
            env.declare(pname.clone(), Value::Int(w[0]));
        }
        let r = interp.exec(&mut env, arm.body);
        if r.is_err() {
            env.pop_frame();
            return r;
        }
        interp
            .mc
            .set_destination(my_end, caller)
            .map_err(Fault::Machine)?;
        for (mode, pname) in &arm.params {
            if *mode == Mode::Var {
                let v = match env.get(pname) {
                    Some(Value::Int(v)) => *v,
                    _ => 0,
                };
                interp.mc.send(my_end, vec![v]).map_err(Fault::Machine)?;
            }
        }
        env.pop_frame();
    }
}

/// Entry point for the root thread.
pub fn root_main(sh: Arc<Shared>, mc: &mut MachineCtx) -> Result<(), Fault> {
    let main = sh.prog.main;
    let mut env = Env::new();
    env.push_frame();
    let mut interp = Interp::new(sh, mc, 0);
    interp.exec(&mut env, main)
}
