//! Abstract syntax for sire programs.
//!
//! Every node carries a source position and a parser-assigned `AstId` so
//! later passes can attach information in side tables.

use crate::diag::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AstId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Rem,
}

impl BinOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Rem => "rem",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64, Pos),
    Name(AstId, String, Pos),
    /// `base[e0][e1]...` — base is always an identifier.
    Subscript(AstId, String, Vec<Expr>, Pos),
    Binary(BinOp, Box<Expr>, Box<Expr>, Pos),
}

impl Expr {
    pub fn pos(&self) -> Pos {
        match self {
            Expr::Int(_, p) | Expr::Name(_, _, p) | Expr::Subscript(_, _, _, p) => *p,
            Expr::Binary(_, _, _, p) => *p,
        }
    }
}

/// An assignable location: a scalar variable or an element of a var array.
#[derive(Debug, Clone, PartialEq)]
pub struct LValue {
    pub id: AstId,
    pub name: String,
    pub indices: Vec<Expr>,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParMode {
    Local,
    Distributed,
}

/// Placement of a server specification relative to its scope body:
/// `&` puts the servers on processors before the body, `|` layers them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Disjoint,
    Layered,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    /// `var a, b[N];` — element count `None` means scalar.
    Var {
        id: AstId,
        names: Vec<(String, Option<Expr>)>,
        pos: Pos,
    },
    /// `chan[n][m] c, d;` — empty shape means scalar channel.
    Chan {
        id: AstId,
        shape: Vec<Expr>,
        names: Vec<String>,
        pos: Pos,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Process {
    pub id: AstId,
    pub pos: Pos,
    pub kind: ProcessKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProcessKind {
    Skip,
    Assign {
        target: LValue,
        value: Expr,
    },
    /// `c ! e` — channel output. Payload is a scalar expression or a whole
    /// array variable.
    ChanOut {
        chan: LValue,
        value: Expr,
    },
    /// `c ? lv` — channel input into a scalar lvalue or whole array variable.
    ChanIn {
        chan: LValue,
        target: LValue,
    },
    Seq(Vec<Process>),
    LocalPar(Vec<Process>),
    DistPar(Vec<Process>),
    SeqRep {
        var: String,
        var_id: AstId,
        base: Expr,
        count: Expr,
        body: Box<Process>,
    },
    ParRep {
        var: String,
        var_id: AstId,
        base: Expr,
        count: Expr,
        body: Box<Process>,
        mode: ParMode,
    },
    /// `server s is Def(args)[n]... <&|> body`
    ServerSpec {
        name: String,
        name_id: AstId,
        def: String,
        args: Vec<Expr>,
        dims: Vec<Expr>,
        placement: Placement,
        body: Box<Process>,
    },
    /// `s.call(a0, ...)` or `s[i][j].call(a0, ...)`
    ServerCall {
        server: String,
        server_id: AstId,
        subscripts: Vec<Expr>,
        call: String,
        actuals: Vec<Expr>,
    },
    ProcCall {
        name: String,
        actuals: Vec<Expr>,
    },
    Block {
        decls: Vec<Decl>,
        body: Option<Box<Process>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Val,
    Var,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Val => "val",
            Mode::Var => "var",
        }
    }
}

/// A formal parameter of a proc or server definition.
#[derive(Debug, Clone, PartialEq)]
pub enum Formal {
    Scalar {
        mode: Mode,
        name: String,
        pos: Pos,
    },
    /// `server Def[d0][d1] name` — empty dims means a single server.
    Server {
        def: String,
        dims: Vec<Expr>,
        name: String,
        pos: Pos,
    },
    /// `chan name` (proc formals only).
    Chan {
        name: String,
        pos: Pos,
    },
}

impl Formal {
    pub fn name(&self) -> &str {
        match self {
            Formal::Scalar { name, .. } | Formal::Server { name, .. } | Formal::Chan { name, .. } => {
                name
            }
        }
    }

    pub fn pos(&self) -> Pos {
        match self {
            Formal::Scalar { pos, .. } | Formal::Server { pos, .. } | Formal::Chan { pos, .. } => {
                *pos
            }
        }
    }
}

/// One `call name(val a, var b)` signature in a server interface.
#[derive(Debug, Clone, PartialEq)]
pub struct CallSig {
    pub name: String,
    pub params: Vec<(Mode, String)>,
    pub pos: Pos,
}

/// One `name ? (formals) handler` arm of an accept block.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptArm {
    pub call: String,
    pub params: Vec<(Mode, String)>,
    pub body: Process,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerDef {
    pub name: String,
    pub formals: Vec<Formal>,
    pub interface: Vec<CallSig>,
    pub decls: Vec<Decl>,
    pub initial: Option<Process>,
    pub arms: Vec<AcceptArm>,
    pub final_body: Option<Process>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcDef {
    pub name: String,
    pub formals: Vec<Formal>,
    pub body: Process,
    pub pos: Pos,
}

/// `val N = 8` — a named compile-time constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ValConst {
    pub name: String,
    pub value: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub consts: Vec<ValConst>,
    pub servers: Vec<ServerDef>,
    pub procs: Vec<ProcDef>,
    pub main: Process,
}

// ── Position stripping ──
//
// Structural equality that ignores positions is implemented by zeroing all
// positions on a clone and using derived PartialEq.

pub fn strip_positions(p: &mut Program) {
    for c in &mut p.consts {
        c.pos = Pos::default();
        strip_expr(&mut c.value);
    }
    for s in &mut p.servers {
        strip_server(s);
    }
    for d in &mut p.procs {
        d.pos = Pos::default();
        for f in &mut d.formals {
            strip_formal(f);
        }
        strip_process(&mut d.body);
    }
    strip_process(&mut p.main);
}

fn strip_server(s: &mut ServerDef) {
    s.pos = Pos::default();
    for f in &mut s.formals {
        strip_formal(f);
    }
    for c in &mut s.interface {
        c.pos = Pos::default();
    }
    for d in &mut s.decls {
        strip_decl(d);
    }
    if let Some(p) = &mut s.initial {
        strip_process(p);
    }
    for a in &mut s.arms {
        a.pos = Pos::default();
        strip_process(&mut a.body);
    }
    if let Some(p) = &mut s.final_body {
        strip_process(p);
    }
}

fn strip_formal(f: &mut Formal) {
    match f {
        Formal::Scalar { pos, .. } | Formal::Chan { pos, .. } => *pos = Pos::default(),
        Formal::Server { pos, dims, .. } => {
            *pos = Pos::default();
            for d in dims {
                strip_expr(d);
            }
        }
    }
}

fn strip_decl(d: &mut Decl) {
    match d {
        Decl::Var { id, names, pos } => {
            *id = AstId(0);
            *pos = Pos::default();
            for (_, e) in names {
                if let Some(e) = e {
                    strip_expr(e);
                }
            }
        }
        Decl::Chan { id, shape, pos, .. } => {
            *id = AstId(0);
            *pos = Pos::default();
            for e in shape {
                strip_expr(e);
            }
        }
    }
}

fn strip_lvalue(lv: &mut LValue) {
    lv.id = AstId(0);
    lv.pos = Pos::default();
    for e in &mut lv.indices {
        strip_expr(e);
    }
}

fn strip_expr(e: &mut Expr) {
    match e {
        Expr::Int(_, p) => *p = Pos::default(),
        Expr::Name(id, _, p) => {
            *id = AstId(0);
            *p = Pos::default();
        }
        Expr::Subscript(id, _, idx, p) => {
            *id = AstId(0);
            *p = Pos::default();
            for e in idx {
                strip_expr(e);
            }
        }
        Expr::Binary(_, l, r, p) => {
            *p = Pos::default();
            strip_expr(l);
            strip_expr(r);
        }
    }
}

fn strip_process(p: &mut Process) {
    p.id = AstId(0);
    p.pos = Pos::default();
    match &mut p.kind {
        ProcessKind::Skip => {}
        ProcessKind::Assign { target, value } => {
            strip_lvalue(target);
            strip_expr(value);
        }
        ProcessKind::ChanOut { chan, value } => {
            strip_lvalue(chan);
            strip_expr(value);
        }
        ProcessKind::ChanIn { chan, target } => {
            strip_lvalue(chan);
            strip_lvalue(target);
        }
        ProcessKind::Seq(cs) | ProcessKind::LocalPar(cs) | ProcessKind::DistPar(cs) => {
            for c in cs {
                strip_process(c);
            }
        }
        ProcessKind::SeqRep {
            var_id, base, count, body, ..
        } => {
            *var_id = AstId(0);
            strip_expr(base);
            strip_expr(count);
            strip_process(body);
        }
        ProcessKind::ParRep {
            var_id, base, count, body, ..
        } => {
            *var_id = AstId(0);
            strip_expr(base);
            strip_expr(count);
            strip_process(body);
        }
        ProcessKind::ServerSpec {
            name_id, args, dims, body, ..
        } => {
            *name_id = AstId(0);
            for e in args {
                strip_expr(e);
            }
            for e in dims {
                strip_expr(e);
            }
            strip_process(body);
        }
        ProcessKind::ServerCall {
            server_id, subscripts, actuals, ..
        } => {
            *server_id = AstId(0);
            for e in subscripts {
                strip_expr(e);
            }
            for e in actuals {
                strip_expr(e);
            }
        }
        ProcessKind::ProcCall { actuals, .. } => {
            for e in actuals {
                strip_expr(e);
            }
        }
        ProcessKind::Block { decls, body } => {
            for d in decls {
                strip_decl(d);
            }
            if let Some(b) = body {
                strip_process(b);
            }
        }
    }
}

/// Structural equality modulo positions and node ids.
pub fn program_eq(a: &Program, b: &Program) -> bool {
    let mut a = a.clone();
    let mut b = b.clone();
    strip_positions(&mut a);
    strip_positions(&mut b);
    a == b
}
