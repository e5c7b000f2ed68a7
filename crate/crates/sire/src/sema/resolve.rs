//! Name resolution and static kind/mode checking.
//!
//! Builds a symbol table linking every identifier use to its declaration,
//! resolves server calls to interface call IDs, and rejects programs that
//! misuse kinds or modes. Proc and server-definition names live in their
//! own namespaces; value names (vars, chans, server bindings, formals,
//! constants, replicator indices) share the lexical scope.

use crate::diag::{Diagnostic, Pos};
use crate::frontend::ast::*;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymKind {
    Const,
    Var,
    Array,
    Chan,
    ServerInstance,
    ServerArray,
    ValFormal,
    VarFormal,
    Index,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolInfo {
    pub kind: SymKind,
    pub decl_pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallResolution {
    pub def: usize,
    pub call_id: usize,
}

/// Resolution results: per-use symbol info and per-call-site call IDs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymbolTable {
    pub uses: BTreeMap<AstId, SymbolInfo>,
    pub calls: BTreeMap<AstId, CallResolution>,
}

pub fn resolve(program: &Program) -> Result<SymbolTable, Vec<Diagnostic>> {
    let mut r = Resolver {
        program,
        table: SymbolTable::default(),
        errors: Vec::new(),
        scopes: Vec::new(),
    };
    r.run();
    if r.errors.is_empty() {
        Ok(r.table)
    } else {
        Err(r.errors)
    }
}

/// What a value name is bound to, as seen by the checker.
#[derive(Debug, Clone)]
enum Binding {
    Const,
    IntVar,
    ArrayVar,
    Chan { rank: usize },
    Server { def: usize, rank: usize },
    ValFormal,
    VarFormal,
    Index,
}

struct Scope {
    names: BTreeMap<String, (Binding, Pos)>,
}

struct Resolver<'a> {
    program: &'a Program,
    table: SymbolTable,
    errors: Vec<Diagnostic>,
    scopes: Vec<Scope>,
}

impl<'a> Resolver<'a> {
    fn run(&mut self) {
        // Top-level namespaces: duplicate definition checks.
        let mut seen = BTreeMap::new();
        for c in &self.program.consts {
            if seen.insert(c.name.clone(), c.pos).is_some() {
                self.error(c.pos, format!("duplicate constant `{}`", c.name));
            }
        }
        let mut seen = BTreeMap::new();
        for d in &self.program.servers {
            if seen.insert(d.name.clone(), d.pos).is_some() {
                self.error(d.pos, format!("duplicate server definition `{}`", d.name));
            }
        }
        let mut seen = BTreeMap::new();
        for d in &self.program.procs {
            if seen.insert(d.name.clone(), d.pos).is_some() {
                self.error(d.pos, format!("duplicate proc definition `{}`", d.name));
            }
        }

        for (i, def) in self.program.servers.iter().enumerate() {
            self.check_server_def(i, def);
        }
        for def in &self.program.procs {
            self.check_proc_def(def);
        }

        self.push_const_scope();
        self.check_process(&self.program.main.clone());
        self.scopes.pop();
    }

    fn error(&mut self, pos: Pos, msg: impl Into<String>) {
        self.errors.push(Diagnostic::new(pos, msg));
    }

    fn push_const_scope(&mut self) {
        let mut names = BTreeMap::new();
        for c in &self.program.consts {
            names.insert(c.name.clone(), (Binding::Const, c.pos));
        }
        self.scopes.push(Scope { names });
        // Constant initialisers may only reference earlier constants; the
        // fold in checkStatic enforces constness.
        for c in &self.program.consts {
            self.scalar_expr(&c.value.clone());
        }
    }

    fn push_scope(&mut self) {
        self.scopes.push(Scope {
            names: BTreeMap::new(),
        });
    }

    fn declare(&mut self, name: &str, b: Binding, pos: Pos) {
        let scope = self.scopes.last_mut().expect("scope");
        if scope.names.insert(name.to_string(), (b, pos)).is_some() {
            self.error(pos, format!("duplicate name `{name}` in this scope"));
        }
    }

    fn lookup(&self, name: &str) -> Option<&(Binding, Pos)> {
        self.scopes.iter().rev().find_map(|s| s.names.get(name))
    }

    fn record_use(&mut self, id: AstId, b: &Binding, decl_pos: Pos) {
        let kind = match b {
            Binding::Const => SymKind::Const,
            Binding::IntVar => SymKind::Var,
            Binding::ArrayVar => SymKind::Array,
            Binding::Chan { .. } => SymKind::Chan,
            Binding::Server { rank: 0, .. } => SymKind::ServerInstance,
            Binding::Server { .. } => SymKind::ServerArray,
            Binding::ValFormal => SymKind::ValFormal,
            Binding::VarFormal => SymKind::VarFormal,
            Binding::Index => SymKind::Index,
        };
        self.table.uses.insert(id, SymbolInfo { kind, decl_pos });
    }

    fn server_def_index(&self, name: &str) -> Option<usize> {
        self.program.servers.iter().position(|d| d.name == name)
    }

    // ── Definitions ──

    fn check_server_def(&mut self, _idx: usize, def: &ServerDef) {
        // Interface call names unique; densely numbered in order.
        let mut seen = BTreeMap::new();
        for sig in &def.interface {
            if seen.insert(sig.name.clone(), ()).is_some() {
                self.error(sig.pos, format!("duplicate call `{}` in interface", sig.name));
            }
            let mut pnames = BTreeMap::new();
            for (_, n) in &sig.params {
                if pnames.insert(n.clone(), ()).is_some() {
                    self.error(sig.pos, format!("duplicate parameter `{n}` in call `{}`", sig.name));
                }
            }
        }
        // Arms must cover the interface exactly.
        for arm in &def.arms {
            match def.interface.iter().find(|s| s.name == arm.call) {
                None => self.error(
                    arm.pos,
                    format!("accept arm `{}` is not in the interface", arm.call),
                ),
                Some(sig) => {
                    if sig.params.len() != arm.params.len() {
                        self.error(
                            arm.pos,
                            format!(
                                "accept arm `{}` takes {} parameters but the interface declares {}",
                                arm.call,
                                arm.params.len(),
                                sig.params.len()
                            ),
                        );
                    } else {
                        for ((m1, _), (m2, n2)) in sig.params.iter().zip(&arm.params) {
                            if m1 != m2 {
                                self.error(
                                    arm.pos,
                                    format!("parameter `{n2}` of arm `{}` has mode {}, interface says {}",
                                        arm.call, m2.as_str(), m1.as_str()),
                                );
                            }
                        }
                    }
                }
            }
        }
        for sig in &def.interface {
            let count = def.arms.iter().filter(|a| a.call == sig.name).count();
            if count == 0 {
                self.error(def.pos, format!("call `{}` has no accept arm", sig.name));
            } else if count > 1 {
                self.error(def.pos, format!("call `{}` has more than one accept arm", sig.name));
            }
        }

        self.push_const_scope();
        self.push_scope();
        for f in def.formals.iter() {
            self.declare_formal(f, true);
        }
        self.push_scope();
        self.declare_decls(&def.decls.clone());
        if let Some(init) = &def.initial {
            self.check_process(&init.clone());
        }
        for arm in def.arms.clone() {
            self.push_scope();
            for (mode, name) in &arm.params {
                let b = match mode {
                    Mode::Val => Binding::ValFormal,
                    Mode::Var => Binding::VarFormal,
                };
                self.declare(name, b, arm.pos);
            }
            self.check_process(&arm.body);
            self.scopes.pop();
        }
        if let Some(fin) = &def.final_body {
            self.check_process(&fin.clone());
        }
        self.scopes.pop();
        self.scopes.pop();
        self.scopes.pop();
    }

    fn check_proc_def(&mut self, def: &ProcDef) {
        self.push_const_scope();
        self.push_scope();
        for f in def.formals.clone() {
            self.declare_formal(&f, false);
        }
        self.check_process(&def.body.clone());
        self.scopes.pop();
        self.scopes.pop();
    }

    fn declare_formal(&mut self, f: &Formal, in_server_def: bool) {
        match f {
            Formal::Scalar { mode, name, pos } => {
                let b = match mode {
                    Mode::Val => Binding::ValFormal,
                    Mode::Var => Binding::VarFormal,
                };
                self.declare(name, b, *pos);
            }
            Formal::Server { def, dims, name, pos } => {
                for d in dims {
                    self.scalar_expr(d);
                }
                match self.server_def_index(def) {
                    Some(idx) => {
                        self.declare(
                            name,
                            Binding::Server {
                                def: idx,
                                rank: dims.len(),
                            },
                            *pos,
                        );
                    }
                    None => self.error(*pos, format!("undefined server definition `{def}`")),
                }
            }
            Formal::Chan { name, pos } => {
                if in_server_def {
                    self.error(*pos, "server definitions cannot take channel parameters");
                }
                self.declare(name, Binding::Chan { rank: 0 }, *pos);
            }
        }
    }

    fn declare_decls(&mut self, decls: &[Decl]) {
        for d in decls {
            match d {
                Decl::Var { names, pos, .. } => {
                    for (name, size) in names {
                        if let Some(e) = size {
                            self.scalar_expr(e);
                            self.declare(name, Binding::ArrayVar, *pos);
                        } else {
                            self.declare(name, Binding::IntVar, *pos);
                        }
                    }
                }
                Decl::Chan { shape, names, pos, .. } => {
                    for e in shape {
                        self.scalar_expr(e);
                    }
                    for name in names {
                        self.declare(name, Binding::Chan { rank: shape.len() }, *pos);
                    }
                }
            }
        }
    }

    // ── Processes ──

    fn check_process(&mut self, p: &Process) {
        match &p.kind {
            ProcessKind::Skip => {}
            ProcessKind::Assign { target, value } => {
                self.scalar_lvalue(target);
                self.scalar_expr(value);
            }
            ProcessKind::ChanOut { chan, value } => {
                self.chan_ref(chan);
                self.chan_payload(value);
            }
            ProcessKind::ChanIn { chan, target } => {
                self.chan_ref(chan);
                self.chan_target(target);
            }
            ProcessKind::Seq(cs) | ProcessKind::LocalPar(cs) | ProcessKind::DistPar(cs) => {
                for c in cs {
                    self.check_process(c);
                }
            }
            ProcessKind::SeqRep {
                var, var_id, base, count, body,
            }
            | ProcessKind::ParRep {
                var, var_id, base, count, body, ..
            } => {
                self.scalar_expr(base);
                self.scalar_expr(count);
                self.push_scope();
                self.declare(var, Binding::Index, p.pos);
                self.record_use(*var_id, &Binding::Index, p.pos);
                self.check_process(body);
                self.scopes.pop();
            }
            ProcessKind::ServerSpec {
                name, name_id, def, args, dims, body, ..
            } => {
                for d in dims {
                    self.scalar_expr(d);
                }
                match self.server_def_index(def) {
                    None => {
                        self.error(p.pos, format!("undefined server definition `{def}`"));
                        // Still check the body with a placeholder binding.
                        self.push_scope();
                        self.declare(name, Binding::Server { def: 0, rank: dims.len() }, p.pos);
                        self.check_process(body);
                        self.scopes.pop();
                    }
                    Some(idx) => {
                        let formals = self.program.servers[idx].formals.clone();
                        if formals.len() != args.len() {
                            self.error(
                                p.pos,
                                format!(
                                    "server `{def}` takes {} arguments, {} given",
                                    formals.len(),
                                    args.len()
                                ),
                            );
                        } else {
                            for (f, a) in formals.iter().zip(args) {
                                self.check_actual_against_formal(f, a, false);
                            }
                        }
                        let b = Binding::Server { def: idx, rank: dims.len() };
                        self.push_scope();
                        self.record_use(*name_id, &b, p.pos);
                        self.declare(name, b, p.pos);
                        self.check_process(body);
                        self.scopes.pop();
                    }
                }
            }
            ProcessKind::ServerCall {
                server, server_id, subscripts, call, actuals,
            } => {
                let binding = match self.lookup(server) {
                    None => {
                        self.error(p.pos, format!("undefined name `{server}`"));
                        return;
                    }
                    Some((b, dp)) => (b.clone(), *dp),
                };
                let (def, rank) = match binding.0 {
                    Binding::Server { def, rank } => (def, rank),
                    _ => {
                        self.error(p.pos, format!("`{server}` is not a server"));
                        return;
                    }
                };
                self.record_use(*server_id, &binding.0, binding.1);
                if subscripts.len() != rank {
                    self.error(
                        p.pos,
                        format!(
                            "server `{server}` has rank {rank} but {} subscripts were given",
                            subscripts.len()
                        ),
                    );
                }
                for s in subscripts {
                    self.scalar_expr(s);
                }
                let sigs = &self.program.servers[def].interface;
                let call_id = match sigs.iter().position(|s| &s.name == call) {
                    None => {
                        self.error(
                            p.pos,
                            format!(
                                "server `{}` has no call `{call}`",
                                self.program.servers[def].name
                            ),
                        );
                        return;
                    }
                    Some(i) => i,
                };
                let params = sigs[call_id].params.clone();
                if params.len() != actuals.len() {
                    self.error(
                        p.pos,
                        format!(
                            "call `{call}` takes {} parameters, {} given",
                            params.len(),
                            actuals.len()
                        ),
                    );
                    return;
                }
                for ((mode, pname), a) in params.iter().zip(actuals) {
                    match mode {
                        Mode::Val => self.scalar_expr(a),
                        Mode::Var => match a {
                            Expr::Name(id, n, pos) => {
                                self.var_actual_name(*id, n, *pos, pname, call)
                            }
                            Expr::Subscript(id, n, idx, pos) => {
                                if idx.len() != 1 {
                                    self.error(*pos, "expected one subscript on an array element");
                                }
                                for e in idx {
                                    self.scalar_expr(e);
                                }
                                self.var_element_actual(*id, n, *pos, pname, call);
                            }
                            other => self.error(
                                other.pos(),
                                format!(
                                    "parameter `{pname}` of `{call}` is `var`; an assignable variable is required"
                                ),
                            ),
                        },
                    }
                }
                self.table.calls.insert(p.id, CallResolution { def, call_id });
            }
            ProcessKind::ProcCall { name, actuals } => {
                let def = match self.program.procs.iter().find(|d| &d.name == name) {
                    None => {
                        self.error(p.pos, format!("undefined proc `{name}`"));
                        return;
                    }
                    Some(d) => d.clone(),
                };
                if def.formals.len() != actuals.len() {
                    self.error(
                        p.pos,
                        format!(
                            "proc `{name}` takes {} arguments, {} given",
                            def.formals.len(),
                            actuals.len()
                        ),
                    );
                    return;
                }
                for (f, a) in def.formals.iter().zip(actuals) {
                    self.check_actual_against_formal(f, a, true);
                }
            }
            ProcessKind::Block { decls, body } => {
                self.push_scope();
                self.declare_decls(decls);
                if let Some(b) = body {
                    self.check_process(b);
                }
                self.scopes.pop();
            }
        }
    }

    fn check_actual_against_formal(&mut self, f: &Formal, a: &Expr, is_proc: bool) {
        match f {
            Formal::Scalar { mode: Mode::Val, .. } => self.scalar_expr(a),
            Formal::Scalar { mode: Mode::Var, name: fname, .. } => {
                if !is_proc {
                    // Server-definition var formals are initialised by copy.
                    self.scalar_expr(a);
                    return;
                }
                // Proc var formals alias the caller's variable; only whole
                // scalar variables can be passed.
                match a {
                    Expr::Name(id, n, pos) => match self.lookup(n).cloned() {
                        Some((Binding::IntVar, dp)) | Some((Binding::VarFormal, dp)) => {
                            let b = self.lookup(n).unwrap().0.clone();
                            let _ = dp;
                            self.record_use(*id, &b, *pos);
                        }
                        Some(_) => self.error(
                            *pos,
                            format!("`{n}` cannot be passed for var parameter `{fname}`: an assignable scalar variable is required"),
                        ),
                        None => self.error(*pos, format!("undefined name `{n}`")),
                    },
                    other => self.error(
                        other.pos(),
                        format!("parameter `{fname}` is `var`; a whole scalar variable is required"),
                    ),
                }
            }
            Formal::Server { def, dims, name: fname, .. } => {
                let want_def = self.server_def_index(def);
                let want_rank = dims.len();
                let (n, subs, id, pos) = match a {
                    Expr::Name(id, n, pos) => (n, 0usize, *id, *pos),
                    Expr::Subscript(id, n, idx, pos) => {
                        for e in idx {
                            self.scalar_expr(e);
                        }
                        (n, idx.len(), *id, *pos)
                    }
                    other => {
                        self.error(
                            other.pos(),
                            format!("parameter `{fname}` requires a server reference"),
                        );
                        return;
                    }
                };
                match self.lookup(n).cloned() {
                    Some((b @ Binding::Server { def: adef, rank }, _)) => {
                        self.record_use(id, &b, pos);
                        if subs != 0 && subs != rank {
                            self.error(pos, format!("server `{n}` has rank {rank}; subscripts must be complete"));
                            return;
                        }
                        let actual_rank = rank - subs;
                        if Some(adef) != want_def {
                            self.error(
                                pos,
                                format!("parameter `{fname}` requires a `{def}` server"),
                            );
                        }
                        if actual_rank != want_rank {
                            self.error(
                                pos,
                                format!(
                                    "parameter `{fname}` requires a server of rank {want_rank}, `{n}` has rank {actual_rank}"
                                ),
                            );
                        }
                    }
                    Some(_) => self.error(pos, format!("`{n}` is not a server")),
                    None => self.error(pos, format!("undefined name `{n}`")),
                }
            }
            Formal::Chan { name: fname, .. } => {
                let (n, subs, id, pos) = match a {
                    Expr::Name(id, n, pos) => (n, 0usize, *id, *pos),
                    Expr::Subscript(id, n, idx, pos) => {
                        for e in idx {
                            self.scalar_expr(e);
                        }
                        (n, idx.len(), *id, *pos)
                    }
                    other => {
                        self.error(other.pos(), format!("parameter `{fname}` requires a channel"));
                        return;
                    }
                };
                match self.lookup(n).cloned() {
                    Some((b @ Binding::Chan { rank }, _)) => {
                        self.record_use(id, &b, pos);
                        if subs != rank {
                            self.error(
                                pos,
                                format!("channel `{n}` has rank {rank}; a single channel must be passed"),
                            );
                        }
                    }
                    Some(_) => self.error(pos, format!("`{n}` is not a channel")),
                    None => self.error(pos, format!("undefined name `{n}`")),
                }
            }
        }
    }

    fn var_actual_name(&mut self, id: AstId, n: &str, pos: Pos, pname: &str, call: &str) {
        match self.lookup(n).cloned() {
            Some((b @ (Binding::IntVar | Binding::VarFormal), _)) => self.record_use(id, &b, pos),
            Some(_) => self.error(
                pos,
                format!("`{n}` cannot be passed for var parameter `{pname}` of `{call}`: an assignable variable is required"),
            ),
            None => self.error(pos, format!("undefined name `{n}`")),
        }
    }

    fn var_element_actual(&mut self, id: AstId, n: &str, pos: Pos, pname: &str, call: &str) {
        match self.lookup(n).cloned() {
            Some((b @ Binding::ArrayVar, _)) => self.record_use(id, &b, pos),
            Some(_) => self.error(
                pos,
                format!("`{n}` cannot be passed for var parameter `{pname}` of `{call}`: an array element is required"),
            ),
            None => self.error(pos, format!("undefined name `{n}`")),
        }
    }

    /// Check an expression that must produce an integer.
    fn scalar_expr(&mut self, e: &Expr) {
        match e {
            Expr::Int(_, _) => {}
            Expr::Name(id, n, pos) => match self.lookup(n).cloned() {
                Some((b, _)) => {
                    match b {
                        Binding::IntVar
                        | Binding::Const
                        | Binding::ValFormal
                        | Binding::VarFormal
                        | Binding::Index => {}
                        Binding::ArrayVar => {
                            self.error(*pos, format!("array `{n}` used as a value"))
                        }
                        Binding::Chan { .. } => {
                            self.error(*pos, format!("channel `{n}` used as a value"))
                        }
                        Binding::Server { .. } => {
                            self.error(*pos, format!("server `{n}` used as a value"))
                        }
                    }
                    self.record_use(*id, &b, *pos);
                }
                None => self.error(*pos, format!("undefined name `{n}`")),
            },
            Expr::Subscript(id, n, idx, pos) => {
                match self.lookup(n).cloned() {
                    Some((b @ Binding::ArrayVar, _)) => {
                        if idx.len() != 1 {
                            self.error(*pos, format!("array `{n}` takes one subscript"));
                        }
                        self.record_use(*id, &b, *pos);
                    }
                    Some(_) => self.error(*pos, format!("`{n}` is not an array")),
                    None => self.error(*pos, format!("undefined name `{n}`")),
                }
                for e in idx {
                    self.scalar_expr(e);
                }
            }
            Expr::Binary(_, l, r, _) => {
                self.scalar_expr(l);
                self.scalar_expr(r);
            }
        }
    }

    /// Check an assignment target.
    fn scalar_lvalue(&mut self, lv: &LValue) {
        match self.lookup(&lv.name).cloned() {
            Some((b @ Binding::IntVar, _)) | Some((b @ Binding::VarFormal, _)) => {
                if !lv.indices.is_empty() {
                    self.error(lv.pos, format!("`{}` is not an array", lv.name));
                }
                self.record_use(lv.id, &b, lv.pos);
            }
            Some((b @ Binding::ArrayVar, _)) => {
                if lv.indices.len() != 1 {
                    self.error(lv.pos, format!("array `{}` takes one subscript", lv.name));
                }
                self.record_use(lv.id, &b, lv.pos);
            }
            Some((Binding::ValFormal | Binding::Const | Binding::Index, _)) => {
                self.error(lv.pos, format!("`{}` cannot be assigned", lv.name));
            }
            Some(_) => self.error(lv.pos, format!("`{}` cannot be assigned", lv.name)),
            None => self.error(lv.pos, format!("undefined name `{}`", lv.name)),
        }
        for e in &lv.indices {
            self.scalar_expr(&e.clone());
        }
    }

    fn chan_ref(&mut self, lv: &LValue) {
        match self.lookup(&lv.name).cloned() {
            Some((b @ Binding::Chan { rank }, _)) => {
                if lv.indices.len() != rank {
                    self.error(
                        lv.pos,
                        format!("channel `{}` has rank {rank}, {} subscripts given", lv.name, lv.indices.len()),
                    );
                }
                self.record_use(lv.id, &b, lv.pos);
            }
            Some(_) => self.error(lv.pos, format!("`{}` is not a channel", lv.name)),
            None => self.error(lv.pos, format!("undefined name `{}`", lv.name)),
        }
        for e in &lv.indices {
            self.scalar_expr(&e.clone());
        }
    }

    /// A channel payload: scalar expression or a whole array variable.
    fn chan_payload(&mut self, e: &Expr) {
        if let Expr::Name(id, n, pos) = e {
            if let Some((b @ Binding::ArrayVar, _)) = self.lookup(n).cloned() {
                self.record_use(*id, &b, *pos);
                return;
            }
        }
        self.scalar_expr(e);
    }

    /// A channel input target: scalar lvalue or a whole array variable.
    fn chan_target(&mut self, lv: &LValue) {
        if lv.indices.is_empty() {
            if let Some((b @ Binding::ArrayVar, _)) = self.lookup(&lv.name).cloned() {
                self.record_use(lv.id, &b, lv.pos);
                return;
            }
        }
        self.scalar_lvalue(lv);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parser::parse_source;

    fn resolve_src(src: &str) -> Result<SymbolTable, Vec<Diagnostic>> {
        let p = parse_source(src).expect("parse");
        resolve(&p)
    }

    const STORE: &str = "
        server Store(val init)
          interface(call read(val i, var v), call write(val i, val v)) to
        { var data[8];
          initial { var i; seq i=0 for 8 do data[i] := init }
          accept
          { read ? (val i, var v) v := data[i]
            write ? (val i, val v) data[i] := v
          }
          final {}
        }";

    #[test]
    fn write_resolves_to_call_id_one() {
        let src = format!(
            "{STORE}
             server s is Store(0) &
             {{ var i; seq i=0 for 8 do s.write(i, i) }}"
        );
        let p = parse_source(&src).unwrap();
        let table = resolve(&p).unwrap();
        let res: Vec<_> = table.calls.values().collect();
        assert_eq!(res.len(), 1);
        assert_eq!(res[0].call_id, 1, "write is second in the interface");
    }

    #[test]
    fn subscripted_call_on_array() {
        let src = format!(
            "{STORE}
             server s is Store(0)[4] &
             {{ var v; s[0].read(0, v) }}"
        );
        assert!(resolve_src(&src).is_ok());
    }

    #[test]
    fn call_on_plain_var_is_not_a_server() {
        let src = "{ var x; var v; x.read(0, v) }";
        let errs = resolve_src(src).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("not a server")));
    }

    #[test]
    fn unknown_call_rejected() {
        let src = format!(
            "{STORE}
             server s is Store(0) & s.clear(0)"
        );
        let errs = resolve_src(&src).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("no call `clear`")));
    }

    #[test]
    fn arity_mismatch_rejected() {
        let src = format!(
            "{STORE}
             server s is Store(0) & s.write(1)"
        );
        let errs = resolve_src(&src).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("takes 2 parameters")));
    }

    #[test]
    fn mode_mismatch_rejected() {
        let src = format!(
            "{STORE}
             server s is Store(0) & s.read(0, 1+2)"
        );
        let errs = resolve_src(&src).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("assignable variable")));
    }

    #[test]
    fn use_before_declaration_rejected() {
        let errs = resolve_src("x := 1").unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("undefined name `x`")));
    }

    #[test]
    fn inner_scope_shadows_outer() {
        let src = "{ var x; x := 1 ; { var x; x := 2 } }";
        assert!(resolve_src(src).is_ok());
    }

    #[test]
    fn val_formal_not_assignable() {
        let src = "proc f(val k) is k := 1
                   f(0)";
        let errs = resolve_src(src).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("cannot be assigned")));
    }

    #[test]
    fn resolution_is_deterministic() {
        let src = format!(
            "{STORE}
             server s is Store(0)[4] &
             {{ var v; s[1].read(2, v) ; s[1].write(2, v) }}"
        );
        let p = parse_source(&src).unwrap();
        let t1 = resolve(&p).unwrap();
        let t2 = resolve(&p).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn server_reference_cannot_be_stored_in_a_var() {
        let src = format!(
            "{STORE}
             server s is Store(0) & {{ var x; x := s }}"
        );
        let errs = resolve_src(&src).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("server `s` used as a value")));
    }

    #[test]
    fn server_reference_cannot_appear_in_arithmetic() {
        let src = format!(
            "{STORE}
             server s is Store(0) & {{ var x; x := s + 1 }}"
        );
        let errs = resolve_src(&src).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("used as a value")));
    }

    #[test]
    fn channel_rank_must_match_subscripts() {
        let errs = resolve_src("{ chan[2][3] c; var x; c[1] ? x }").unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("rank 2")));
    }

    #[test]
    fn interface_arm_cover_checked() {
        let src = "
            server Bad(val x)
              interface(call a(val i), call b(val i)) to
            { accept { a ? (val i) skip } }
            server s is Bad(0) & skip";
        let errs = resolve_src(src).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("no accept arm")));
    }
}
