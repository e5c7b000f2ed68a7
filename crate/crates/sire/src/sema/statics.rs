//! Static extent checking and elaboration.
//!
//! Verifies the proc/server reference graph is acyclic, then lowers the
//! resolved AST into the elaborated arena: proc calls are inlined per call
//! site with formals substituted by (pure) actual expressions, every
//! binding is renamed to a unique name, and every replicator count, array
//! size, channel shape and server extent is folded to a literal. Folding
//! is contextual: a count written in terms of a proc's `val` formal folds
//! wherever the call site supplies a constant.

use crate::diag::{Diagnostic, Pos};
use crate::frontend::ast::{self, BinOp, Expr, Mode, ParMode, Placement, Process, ProcessKind};
use crate::sema::elab::{self, Actual, Capture, ChanTarget, EDecl, Ex, Lv, NodeId, ParChild, Payload, StaticExtent, UName, VKind};
use crate::sema::freevars::{free_sets, FreeSet};
use crate::sema::resolve::SymbolTable;
use std::collections::BTreeMap;

const MAX_EXTENT: i64 = 1 << 16;

#[derive(Debug)]
pub struct Elaborated {
    pub program: elab::Program,
    pub extents: Vec<StaticExtent>,
    pub free: Vec<FreeSet>,
}

pub fn check_static(
    program: &ast::Program,
    table: &SymbolTable,
) -> Result<Elaborated, Vec<Diagnostic>> {
    check_recursion(program)?;

    let mut el = Elaborator {
        src: program,
        table,
        out: elab::Program::default(),
        extents: Vec::new(),
        errors: Vec::new(),
        scopes: Vec::new(),
        fresh: 0,
        in_server: false,
    };

    // Definition signatures, in source order; call IDs are interface order.
    for d in &program.servers {
        el.out.defs.push(elab::DefSig {
            name: d.name.clone(),
            calls: d
                .interface
                .iter()
                .map(|c| elab::CallSig {
                    name: c.name.clone(),
                    params: c.params.iter().map(|(m, _)| *m).collect(),
                })
                .collect(),
        });
    }

    el.push_consts();
    let main = el.process(&program.main);
    el.scopes.pop();
    el.out.main = main;
    el.out.dump_block = el.find_dump_block(main);

    if !el.errors.is_empty() {
        return Err(el.errors);
    }

    let free = free_sets(&el.out);
    fill_captures(&mut el.out, &free);

    Ok(Elaborated {
        program: el.out,
        extents: el.extents,
        free,
    })
}

// ── Recursion check ──

fn check_recursion(program: &ast::Program) -> Result<(), Vec<Diagnostic>> {
    // Nodes are proc and server-definition names; edges are calls and
    // specifications appearing in bodies.
    let mut edges: BTreeMap<String, Vec<(String, Pos)>> = BTreeMap::new();
    fn add_edges(edges: &mut BTreeMap<String, Vec<(String, Pos)>>, key: String, body: &Process) {
        let mut refs = Vec::new();
        collect_refs(body, &mut refs);
        edges.entry(key).or_default().extend(refs);
    }
    for d in &program.procs {
        add_edges(&mut edges, format!("proc {}", d.name), &d.body);
    }
    for d in &program.servers {
        let key = format!("server {}", d.name);
        if let Some(init) = &d.initial {
            add_edges(&mut edges, key.clone(), init);
        }
        for arm in &d.arms {
            add_edges(&mut edges, key.clone(), &arm.body);
        }
        if let Some(fin) = &d.final_body {
            add_edges(&mut edges, key.clone(), fin);
        }
        edges.entry(key).or_default();
    }

    let mut state: BTreeMap<String, u8> = BTreeMap::new(); // 1 = visiting, 2 = done
    let mut stack: Vec<String> = Vec::new();
    fn dfs(
        node: &str,
        edges: &BTreeMap<String, Vec<(String, Pos)>>,
        state: &mut BTreeMap<String, u8>,
        stack: &mut Vec<String>,
    ) -> Option<(Vec<String>, Pos)> {
        match state.get(node) {
            Some(2) => return None,
            Some(1) => {
                let start = stack.iter().position(|n| n == node).unwrap_or(0);
                return Some((stack[start..].to_vec(), Pos::default()));
            }
            _ => {}
        }
        state.insert(node.to_string(), 1);
        stack.push(node.to_string());
        if let Some(next) = edges.get(node) {
            for (n, pos) in next {
                if edges.contains_key(n) {
                    if let Some((mut cycle, _)) = dfs(n, edges, state, stack) {
                        cycle.dedup();
                        return Some((cycle, *pos));
                    }
                }
            }
        }
        stack.pop();
        state.insert(node.to_string(), 2);
        None
    }

    let keys: Vec<String> = edges.keys().cloned().collect();
    for k in keys {
        if let Some((cycle, pos)) = dfs(&k, &edges, &mut state, &mut stack) {
            let msg = format!("recursive definitions are prohibited: {}", cycle.join(" -> "));
            return Err(vec![Diagnostic::new(pos, msg)]);
        }
    }
    Ok(())
}

fn collect_refs(p: &Process, out: &mut Vec<(String, Pos)>) {
    match &p.kind {
        ProcessKind::ProcCall { name, .. } => out.push((format!("proc {name}"), p.pos)),
        ProcessKind::ServerSpec { def, body, .. } => {
            out.push((format!("server {def}"), p.pos));
            collect_refs(body, out);
        }
        ProcessKind::Seq(cs) | ProcessKind::LocalPar(cs) | ProcessKind::DistPar(cs) => {
            for c in cs {
                collect_refs(c, out);
            }
        }
        ProcessKind::SeqRep { body, .. } | ProcessKind::ParRep { body, .. } => {
            collect_refs(body, out)
        }
        ProcessKind::Block { body: Some(b), .. } => collect_refs(b, out),
        _ => {}
    }
}

// ── Elaboration ──

#[derive(Debug, Clone)]
enum EBind {
    Const(i64),
    /// Proc formal bound to a caller-side expression (val/server/chan).
    SubstExpr(Ex),
    /// Proc `var` formal bound to a caller variable.
    SubstVar(UName),
    /// Declared local, replicator index, server binding or server formal.
    Local(UName, VKind),
}

struct Elaborator<'a> {
    src: &'a ast::Program,
    table: &'a SymbolTable,
    out: elab::Program,
    extents: Vec<StaticExtent>,
    errors: Vec<Diagnostic>,
    scopes: Vec<BTreeMap<String, EBind>>,
    fresh: u32,
    in_server: bool,
}

impl<'a> Elaborator<'a> {
    fn error(&mut self, pos: Pos, msg: impl Into<String>) {
        self.errors.push(Diagnostic::new(pos, msg));
    }

    fn add(&mut self, pos: Pos, kind: elab::NodeKind) -> NodeId {
        let id = NodeId(self.out.nodes.len() as u32);
        self.out.nodes.push(elab::Node { pos, kind });
        id
    }

    fn fresh_name(&mut self, src: &str, kind: VKind) -> UName {
        self.fresh += 1;
        let name = format!("{src}.{}", self.fresh);
        self.out.names.insert(
            name.clone(),
            elab::NameInfo {
                src: src.to_string(),
                kind,
            },
        );
        name
    }

    fn push_consts(&mut self) {
        let mut scope = BTreeMap::new();
        self.scopes.push(BTreeMap::new());
        for c in &self.src.consts.clone() {
            let ex = self.ex(&c.value);
            match fold(&ex) {
                Some(v) => {
                    scope.insert(c.name.clone(), EBind::Const(v));
                }
                None => self.error(c.pos, format!("constant `{}` must have a constant value", c.name)),
            }
            *self.scopes.last_mut().unwrap() = scope.clone();
        }
    }

    fn lookup(&self, name: &str) -> Option<&EBind> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn bind(&mut self, name: &str, b: EBind) {
        self.scopes
            .last_mut()
            .expect("scope")
            .insert(name.to_string(), b);
    }

    // ── Expressions ──

    fn ex(&mut self, e: &Expr) -> Ex {
        match e {
            Expr::Int(v, _) => Ex::Int(*v),
            Expr::Name(_, n, pos) => match self.lookup(n).cloned() {
                Some(EBind::Const(v)) => Ex::Int(v),
                Some(EBind::SubstExpr(x)) => x,
                Some(EBind::SubstVar(u)) | Some(EBind::Local(u, _)) => Ex::Name(u, *pos),
                None => {
                    self.error(*pos, format!("undefined name `{n}`"));
                    Ex::Int(0)
                }
            },
            Expr::Subscript(_, n, idx, pos) => {
                let indices: Vec<Ex> = idx.iter().map(|e| self.ex(e)).collect();
                match self.lookup(n).cloned() {
                    Some(EBind::Local(u, _)) => Ex::Subscript(u, indices, *pos),
                    Some(EBind::SubstExpr(Ex::Name(u, _))) => Ex::Subscript(u, indices, *pos),
                    _ => {
                        self.error(*pos, format!("`{n}` cannot be subscripted here"));
                        Ex::Int(0)
                    }
                }
            }
            Expr::Binary(op, l, r, pos) => {
                let l = self.ex(l);
                let r = self.ex(r);
                if let (Ex::Int(a), Ex::Int(b)) = (&l, &r) {
                    if let Some(v) = fold_op(*op, *a, *b) {
                        return Ex::Int(v);
                    }
                }
                Ex::Bin(*op, Box::new(l), Box::new(r), *pos)
            }
        }
    }

    fn fold_extent(&mut self, e: &Expr, what: &str) -> usize {
        let pos = e.pos();
        let ex = self.ex(e);
        match fold(&ex) {
            Some(v) if (0..=MAX_EXTENT).contains(&v) => {
                self.extents.push(StaticExtent {
                    value: v as usize,
                    origin: pos,
                });
                v as usize
            }
            Some(v) => {
                self.error(pos, format!("{what} of {v} is out of range"));
                1
            }
            None => {
                self.error(pos, format!("{what} must be a compile-time constant"));
                1
            }
        }
    }

    fn lvalue(&mut self, lv: &ast::LValue) -> Lv {
        let indices: Vec<Ex> = lv.indices.iter().map(|e| self.ex(e)).collect();
        match self.lookup(&lv.name).cloned() {
            Some(EBind::Local(u, _)) => Lv {
                name: u,
                indices,
                pos: lv.pos,
            },
            Some(EBind::SubstVar(u)) => Lv {
                name: u,
                indices,
                pos: lv.pos,
            },
            _ => {
                self.error(lv.pos, format!("`{}` cannot be assigned", lv.name));
                Lv {
                    name: String::new(),
                    indices,
                    pos: lv.pos,
                }
            }
        }
    }

    /// The elaborated array behind a name, if it is one.
    fn array_of(&self, name: &str) -> Option<(UName, usize)> {
        match self.lookup(name) {
            Some(EBind::Local(u, VKind::Array(n))) => Some((u.clone(), *n)),
            _ => None,
        }
    }

    // ── Processes ──

    fn process(&mut self, p: &Process) -> NodeId {
        match &p.kind {
            ProcessKind::Skip => self.add(p.pos, elab::NodeKind::Skip),
            ProcessKind::Assign { target, value } => {
                let target = self.lvalue(target);
                let value = self.ex(value);
                self.add(p.pos, elab::NodeKind::Assign { target, value })
            }
            ProcessKind::ChanOut { chan, value } => {
                let chan = self.chan_ref(chan);
                let value = match value {
                    Expr::Name(_, n, pos) if self.array_of(n).is_some() => {
                        let (u, len) = self.array_of(n).unwrap();
                        Payload::WholeArray(u, len, *pos)
                    }
                    e => Payload::Scalar(self.ex(e)),
                };
                self.add(p.pos, elab::NodeKind::ChanOut { chan, value })
            }
            ProcessKind::ChanIn { chan, target } => {
                let chan = self.chan_ref(chan);
                let target = if target.indices.is_empty() && self.array_of(&target.name).is_some()
                {
                    let (u, len) = self.array_of(&target.name).unwrap();
                    ChanTarget::WholeArray(u, len, target.pos)
                } else {
                    ChanTarget::Scalar(self.lvalue(target))
                };
                self.add(p.pos, elab::NodeKind::ChanIn { chan, target })
            }
            ProcessKind::Seq(cs) => {
                let children: Vec<NodeId> = cs.iter().map(|c| self.process(c)).collect();
                self.add(p.pos, elab::NodeKind::Seq(children))
            }
            ProcessKind::LocalPar(cs) => {
                let children: Vec<ParChild> = cs
                    .iter()
                    .map(|c| ParChild {
                        node: self.process(c),
                        captures: Vec::new(),
                        writeback: Vec::new(),
                    })
                    .collect();
                self.add(p.pos, elab::NodeKind::LocalPar(children))
            }
            ProcessKind::DistPar(cs) => {
                if self.in_server {
                    self.error(p.pos, "distributed parallel composition is not allowed inside a server definition");
                }
                let children: Vec<ParChild> = cs
                    .iter()
                    .map(|c| ParChild {
                        node: self.process(c),
                        captures: Vec::new(),
                        writeback: Vec::new(),
                    })
                    .collect();
                self.add(p.pos, elab::NodeKind::DistPar(children))
            }
            ProcessKind::SeqRep {
                var, base, count, body, ..
            } => {
                let base = self.ex(base);
                let count = self.fold_extent(count, "a replicator count");
                self.scopes.push(BTreeMap::new());
                let u = self.fresh_name(var, VKind::Int);
                self.bind(var, EBind::Local(u.clone(), VKind::Int));
                let body = self.process(body);
                self.scopes.pop();
                self.add(
                    p.pos,
                    elab::NodeKind::SeqRep {
                        var: u,
                        base,
                        count,
                        body,
                    },
                )
            }
            ProcessKind::ParRep {
                var, base, count, body, mode, ..
            } => {
                if self.in_server && *mode == ParMode::Distributed {
                    self.error(p.pos, "distributed replication is not allowed inside a server definition");
                }
                let base = self.ex(base);
                let count = self.fold_extent(count, "a replicator count");
                self.scopes.push(BTreeMap::new());
                let u = self.fresh_name(var, VKind::Int);
                self.bind(var, EBind::Local(u.clone(), VKind::Int));
                let body = self.process(body);
                self.scopes.pop();
                self.add(
                    p.pos,
                    elab::NodeKind::ParRep {
                        var: u,
                        base,
                        count,
                        body: ParChild {
                            node: body,
                            captures: Vec::new(),
                            writeback: Vec::new(),
                        },
                        mode: *mode,
                    },
                )
            }
            ProcessKind::ServerSpec {
                name, def, args, dims, placement, body, ..
            } => {
                if self.in_server {
                    self.error(p.pos, "a server specification is not allowed inside a server definition");
                }
                self.server_spec(p.pos, name, def, args, dims, *placement, body)
            }
            ProcessKind::ServerCall {
                server, subscripts, actuals, ..
            } => {
                let res = match self.table.calls.get(&p.id) {
                    Some(r) => *r,
                    None => {
                        self.error(p.pos, "unresolved call");
                        return self.add(p.pos, elab::NodeKind::Skip);
                    }
                };
                let server_ex = self.ex(&Expr::Name(ast::AstId(0), server.clone(), p.pos));
                let subscripts: Vec<Ex> = subscripts.iter().map(|e| self.ex(e)).collect();
                let sig = &self.src.servers[res.def].interface[res.call_id];
                let modes: Vec<Mode> = sig.params.iter().map(|(m, _)| *m).collect();
                let actuals: Vec<Actual> = modes
                    .iter()
                    .zip(actuals)
                    .map(|(mode, a)| match mode {
                        Mode::Val => Actual::Val(self.ex(a)),
                        Mode::Var => {
                            let lv = match a {
                                Expr::Name(_, n, pos) => ast::LValue {
                                    id: ast::AstId(0),
                                    name: n.clone(),
                                    indices: vec![],
                                    pos: *pos,
                                },
                                Expr::Subscript(_, n, idx, pos) => ast::LValue {
                                    id: ast::AstId(0),
                                    name: n.clone(),
                                    indices: idx.clone(),
                                    pos: *pos,
                                },
                                other => {
                                    self.error(other.pos(), "var actual must be assignable");
                                    ast::LValue {
                                        id: ast::AstId(0),
                                        name: String::new(),
                                        indices: vec![],
                                        pos: other.pos(),
                                    }
                                }
                            };
                            Actual::Var(self.lvalue(&lv))
                        }
                    })
                    .collect();
                self.add(
                    p.pos,
                    elab::NodeKind::Call {
                        server: server_ex,
                        subscripts,
                        def: res.def,
                        call_id: res.call_id,
                        actuals,
                    },
                )
            }
            ProcessKind::ProcCall { name, actuals } => self.inline_proc(p.pos, name, actuals),
            ProcessKind::Block { decls, body } => {
                self.scopes.push(BTreeMap::new());
                let edecls = self.decls(decls);
                let body = body.as_ref().map(|b| self.process(b));
                self.scopes.pop();
                self.add(
                    p.pos,
                    elab::NodeKind::Block {
                        decls: edecls,
                        body,
                    },
                )
            }
        }
    }

    fn chan_ref(&mut self, lv: &ast::LValue) -> Lv {
        let indices: Vec<Ex> = lv.indices.iter().map(|e| self.ex(e)).collect();
        match self.lookup(&lv.name).cloned() {
            Some(EBind::Local(u, VKind::Chan(_))) => Lv {
                name: u,
                indices,
                pos: lv.pos,
            },
            Some(EBind::SubstExpr(Ex::Name(u, _))) => Lv {
                name: u,
                indices,
                pos: lv.pos,
            },
            Some(EBind::SubstExpr(Ex::Subscript(u, mut sub_idx, _))) => {
                // A channel element passed as a proc formal; the callee uses
                // it unsubscripted.
                sub_idx.extend(indices);
                Lv {
                    name: u,
                    indices: sub_idx,
                    pos: lv.pos,
                }
            }
            _ => {
                self.error(lv.pos, format!("`{}` is not a channel", lv.name));
                Lv {
                    name: String::new(),
                    indices,
                    pos: lv.pos,
                }
            }
        }
    }

    fn decls(&mut self, decls: &[ast::Decl]) -> Vec<EDecl> {
        let mut out = Vec::new();
        for d in decls {
            match d {
                ast::Decl::Var { names, .. } => {
                    for (name, size) in names {
                        match size {
                            None => {
                                let u = self.fresh_name(name, VKind::Int);
                                self.bind(name, EBind::Local(u.clone(), VKind::Int));
                                out.push(EDecl::Int { name: u });
                            }
                            Some(e) => {
                                let len = self.fold_extent(e, "an array size");
                                let u = self.fresh_name(name, VKind::Array(len));
                                self.bind(name, EBind::Local(u.clone(), VKind::Array(len)));
                                out.push(EDecl::Array { name: u, len });
                            }
                        }
                    }
                }
                ast::Decl::Chan { shape, names, .. } => {
                    let shape: Vec<usize> = shape
                        .iter()
                        .map(|e| self.fold_extent(e, "a channel array extent"))
                        .collect();
                    for name in names {
                        let u = self.fresh_name(name, VKind::Chan(shape.clone()));
                        self.bind(name, EBind::Local(u.clone(), VKind::Chan(shape.clone())));
                        out.push(EDecl::Chan {
                            name: u,
                            shape: shape.clone(),
                        });
                    }
                }
            }
        }
        out
    }

    fn inline_proc(&mut self, pos: Pos, name: &str, actuals: &[Expr]) -> NodeId {
        let def = self
            .src
            .procs
            .iter()
            .find(|d| d.name == *name)
            .expect("resolved proc")
            .clone();
        // Build formal substitutions in the caller scope.
        let mut bindings: Vec<(String, EBind)> = Vec::new();
        for (f, a) in def.formals.iter().zip(actuals) {
            match f {
                ast::Formal::Scalar { mode: Mode::Val, name, .. } => {
                    let ex = self.ex(a);
                    bindings.push((name.clone(), EBind::SubstExpr(ex)));
                }
                ast::Formal::Scalar { mode: Mode::Var, name, .. } => {
                    let u = match a {
                        Expr::Name(_, n, _) => match self.lookup(n).cloned() {
                            Some(EBind::Local(u, _)) | Some(EBind::SubstVar(u)) => u,
                            _ => {
                                self.error(a.pos(), "var actual must be a variable");
                                String::new()
                            }
                        },
                        _ => {
                            self.error(a.pos(), "var actual must be a variable");
                            String::new()
                        }
                    };
                    bindings.push((name.clone(), EBind::SubstVar(u)));
                }
                ast::Formal::Server { name, .. } | ast::Formal::Chan { name, .. } => {
                    let ex = self.ex(a);
                    bindings.push((name.clone(), EBind::SubstExpr(ex)));
                }
            }
        }
        // The callee body sees only constants and its formals.
        let saved = std::mem::take(&mut self.scopes);
        self.scopes.push(saved[0].clone());
        self.scopes.push(BTreeMap::new());
        for (n, b) in bindings {
            self.bind(&n, b);
        }
        let body = self.process(&def.body);
        self.scopes = saved;
        let _ = pos;
        body
    }

    #[allow(clippy::too_many_arguments)]
    fn server_spec(
        &mut self,
        pos: Pos,
        name: &str,
        def_name: &str,
        args: &[Expr],
        dims: &[Expr],
        placement: Placement,
        body: &Process,
    ) -> NodeId {
        let def_idx = self
            .src
            .servers
            .iter()
            .position(|d| d.name == *def_name)
            .expect("resolved server def");
        let def = self.src.servers[def_idx].clone();

        let dims: Vec<usize> = dims
            .iter()
            .map(|e| self.fold_extent(e, "a server array extent"))
            .collect();
        let extent = if dims.is_empty() {
            1
        } else {
            dims.iter().product()
        };

        // Elaborate arguments in the current scope.
        let arg_exprs: Vec<Ex> = args.iter().map(|e| self.ex(e)).collect();

        // Elaborate the definition instance in a fresh scope over constants.
        let saved = std::mem::take(&mut self.scopes);
        self.scopes.push(saved[0].clone());
        self.scopes.push(BTreeMap::new());
        let was_in_server = std::mem::replace(&mut self.in_server, true);

        let mut formals: Vec<(UName, VKind)> = Vec::new();
        let mut ship_args: Vec<Ex> = Vec::new();
        for (f, a) in def.formals.iter().zip(&arg_exprs) {
            match f {
                ast::Formal::Scalar { mode, name, .. } => {
                    if *mode == Mode::Val {
                        if let Some(v) = fold(a) {
                            // Constant argument: substitute so that extents
                            // depending on it fold.
                            self.bind(name, EBind::SubstExpr(Ex::Int(v)));
                            continue;
                        }
                    }
                    let u = self.fresh_name(name, VKind::Int);
                    self.bind(name, EBind::Local(u.clone(), VKind::Int));
                    formals.push((u, VKind::Int));
                    ship_args.push(a.clone());
                }
                ast::Formal::Server { def: fdef, dims: fdims, name, .. } => {
                    let fdef_idx = self
                        .src
                        .servers
                        .iter()
                        .position(|d| d.name == *fdef)
                        .expect("resolved formal def");
                    let fdims: Vec<usize> = fdims
                        .clone()
                        .iter()
                        .map(|e| self.fold_extent(e, "a server formal extent"))
                        .collect();
                    let kind = VKind::Server {
                        def: fdef_idx,
                        dims: fdims,
                    };
                    let u = self.fresh_name(name, kind.clone());
                    self.bind(name, EBind::Local(u.clone(), kind.clone()));
                    formals.push((u, kind));
                    ship_args.push(a.clone());
                }
                ast::Formal::Chan { name, .. } => {
                    // Rejected by resolve; keep elaboration total.
                    let u = self.fresh_name(name, VKind::Chan(vec![]));
                    self.bind(name, EBind::Local(u.clone(), VKind::Chan(vec![])));
                    formals.push((u, VKind::Chan(vec![])));
                    ship_args.push(a.clone());
                }
            }
        }

        self.scopes.push(BTreeMap::new());
        let locals = self.decls(&def.decls);
        let initial = def.initial.as_ref().map(|p| self.process(p));
        let mut arms = Vec::new();
        for arm in &def.arms {
            self.scopes.push(BTreeMap::new());
            let params: Vec<(Mode, UName)> = arm
                .params
                .iter()
                .map(|(m, n)| {
                    let u = self.fresh_name(n, VKind::Int);
                    self.bind(n, EBind::Local(u.clone(), VKind::Int));
                    (*m, u)
                })
                .collect();
            let body = self.process(&arm.body);
            self.scopes.pop();
            arms.push(elab::Arm { params, body });
        }
        let final_body = def.final_body.as_ref().map(|p| self.process(p));

        self.in_server = was_in_server;
        self.scopes = saved;

        let inst = self.out.instances.len();
        self.out.instances.push(elab::ServerInst {
            def: def_idx,
            formals,
            locals,
            initial,
            arms,
            final_body,
            pos,
        });

        // The binding scopes over the body.
        let kind = VKind::Server {
            def: def_idx,
            dims: dims.clone(),
        };
        self.scopes.push(BTreeMap::new());
        let u = self.fresh_name(name, kind.clone());
        self.bind(name, EBind::Local(u.clone(), kind));
        let body_id = self.process(body);
        self.scopes.pop();

        self.add(
            pos,
            elab::NodeKind::ServerSpec {
                name: u,
                inst,
                def: def_idx,
                args: ship_args,
                dims,
                extent,
                placement,
                body: ParChild {
                    node: body_id,
                    captures: Vec::new(),
                    writeback: Vec::new(),
                },
            },
        )
    }

    /// The program frame: the outermost block that actually declares
    /// variables, reached through server-specification scopes and bare
    /// wrapper blocks.
    fn find_dump_block(&self, mut id: NodeId) -> Option<NodeId> {
        loop {
            match self.out.kind(id) {
                elab::NodeKind::ServerSpec { body, .. } => id = body.node,
                elab::NodeKind::Block { decls, body } => {
                    if !decls.is_empty() {
                        return Some(id);
                    }
                    match body {
                        Some(b) => id = *b,
                        None => return Some(id),
                    }
                }
                _ => return None,
            }
        }
    }
}

fn fold(e: &Ex) -> Option<i64> {
    match e {
        Ex::Int(v) => Some(*v),
        Ex::Bin(op, l, r, _) => {
            let l = fold(l)?;
            let r = fold(r)?;
            fold_op(*op, l, r)
        }
        _ => None,
    }
}

fn fold_op(op: BinOp, a: i64, b: i64) -> Option<i64> {
    Some(match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Rem => {
            if b == 0 {
                return None;
            }
            a.wrapping_rem(b)
        }
    })
}

fn fill_captures(p: &mut elab::Program, free: &[FreeSet]) {
    let names = p.names.clone();
    let capture_list = |set: &FreeSet, minus: Option<&UName>| -> (Vec<Capture>, Vec<Capture>) {
        let mut captures = Vec::new();
        let mut writeback = Vec::new();
        for (name, flags) in set {
            if Some(name) == minus {
                continue;
            }
            let kind = names[name].kind.clone();
            captures.push(Capture {
                name: name.clone(),
                kind: kind.clone(),
            });
            if flags.written && kind.is_data() {
                writeback.push(Capture { name: name.clone(), kind });
            }
        }
        (captures, writeback)
    };

    for i in 0..p.nodes.len() {
        match &p.nodes[i].kind {
            elab::NodeKind::LocalPar(_) | elab::NodeKind::DistPar(_) => {
                let mut kind = p.nodes[i].kind.clone();
                if let elab::NodeKind::LocalPar(children) | elab::NodeKind::DistPar(children) =
                    &mut kind
                {
                    for c in children.iter_mut() {
                        let (cap, wb) = capture_list(&free[c.node.index()], None);
                        c.captures = cap;
                        c.writeback = wb;
                    }
                }
                p.nodes[i].kind = kind;
            }
            elab::NodeKind::ParRep { var, .. } => {
                let var = var.clone();
                let mut kind = p.nodes[i].kind.clone();
                if let elab::NodeKind::ParRep { body, .. } = &mut kind {
                    let (mut cap, wb) = capture_list(&free[body.node.index()], Some(&var));
                    // The index variable ships first, bound per instance.
                    cap.insert(
                        0,
                        Capture {
                            name: var.clone(),
                            kind: VKind::Int,
                        },
                    );
                    body.captures = cap;
                    body.writeback = wb;
                }
                p.nodes[i].kind = kind;
            }
            elab::NodeKind::ServerSpec { .. } => {
                let mut kind = p.nodes[i].kind.clone();
                if let elab::NodeKind::ServerSpec { body, .. } = &mut kind {
                    let (cap, wb) = capture_list(&free[body.node.index()], None);
                    body.captures = cap;
                    body.writeback = wb;
                }
                p.nodes[i].kind = kind;
            }
            _ => {}
        }
    }
}
