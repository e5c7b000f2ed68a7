//! Elaborated program representation.
//!
//! Elaboration inlines proc calls per call site, folds every extent and
//! replicator count to a literal, and renames every binding to a unique
//! name, so the runtime works with a closed, statically sized tree. Nodes
//! live in an arena and refer to each other by `NodeId`.

use crate::diag::Pos;
use crate::frontend::ast::{BinOp, Mode, ParMode, Placement};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Unique (alpha-renamed) variable name.
pub type UName = String;

#[derive(Debug, Clone, PartialEq)]
pub enum Ex {
    Int(i64),
    Name(UName, Pos),
    Subscript(UName, Vec<Ex>, Pos),
    Bin(BinOp, Box<Ex>, Box<Ex>, Pos),
}

impl Ex {
    pub fn pos(&self) -> Pos {
        match self {
            Ex::Int(_) => Pos::default(),
            Ex::Name(_, p) | Ex::Subscript(_, _, p) | Ex::Bin(_, _, _, p) => *p,
        }
    }
}

/// Assignable location. Empty `indices` on an array name denotes the whole
/// array (legal only as a channel payload/target).
#[derive(Debug, Clone, PartialEq)]
pub struct Lv {
    pub name: UName,
    pub indices: Vec<Ex>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Actual {
    Val(Ex),
    Var(Lv),
}

/// Shape of a named runtime value; used for capture schemas and wire
/// encoding of shipped environments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VKind {
    Int,
    Array(usize),
    Chan(Vec<usize>),
    Server { def: usize, dims: Vec<usize> },
}

impl VKind {
    pub fn is_data(&self) -> bool {
        matches!(self, VKind::Int | VKind::Array(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub name: UName,
    pub kind: VKind,
}

/// A process that may run on its own thread: the node plus the environment
/// slice it needs shipped in, and the variables it writes back on join.
#[derive(Debug, Clone, PartialEq)]
pub struct ParChild {
    pub node: NodeId,
    pub captures: Vec<Capture>,
    pub writeback: Vec<Capture>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EDecl {
    Int { name: UName },
    Array { name: UName, len: usize },
    Chan { name: UName, shape: Vec<usize> },
}

impl EDecl {
    pub fn name(&self) -> &UName {
        match self {
            EDecl::Int { name } | EDecl::Array { name, .. } | EDecl::Chan { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Scalar(Ex),
    WholeArray(UName, usize, Pos),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChanTarget {
    Scalar(Lv),
    WholeArray(UName, usize, Pos),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub pos: Pos,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Skip,
    Assign {
        target: Lv,
        value: Ex,
    },
    ChanOut {
        chan: Lv,
        value: Payload,
    },
    ChanIn {
        chan: Lv,
        target: ChanTarget,
    },
    Seq(Vec<NodeId>),
    LocalPar(Vec<ParChild>),
    DistPar(Vec<ParChild>),
    SeqRep {
        var: UName,
        base: Ex,
        count: usize,
        body: NodeId,
    },
    ParRep {
        var: UName,
        base: Ex,
        count: usize,
        body: ParChild,
        mode: ParMode,
    },
    ServerSpec {
        name: UName,
        inst: usize,
        def: usize,
        args: Vec<Ex>,
        dims: Vec<usize>,
        extent: usize,
        placement: Placement,
        body: ParChild,
    },
    Call {
        server: Ex,
        subscripts: Vec<Ex>,
        def: usize,
        call_id: usize,
        actuals: Vec<Actual>,
    },
    Block {
        decls: Vec<EDecl>,
        body: Option<NodeId>,
    },
}

/// Interface signature of a server definition: what a caller needs to know.
#[derive(Debug, Clone, PartialEq)]
pub struct DefSig {
    pub name: String,
    pub calls: Vec<CallSig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallSig {
    pub name: String,
    pub params: Vec<Mode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub params: Vec<(Mode, UName)>,
    pub body: NodeId,
}

/// One elaborated server definition instance (per specification site).
#[derive(Debug, Clone, PartialEq)]
pub struct ServerInst {
    pub def: usize,
    pub formals: Vec<(UName, VKind)>,
    pub locals: Vec<EDecl>,
    pub initial: Option<NodeId>,
    pub arms: Vec<Arm>,
    pub final_body: Option<NodeId>,
    pub pos: Pos,
}

/// Registry info per unique name: the source-level spelling and shape.
#[derive(Debug, Clone, PartialEq)]
pub struct NameInfo {
    pub src: String,
    pub kind: VKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub nodes: Vec<Node>,
    pub defs: Vec<DefSig>,
    pub instances: Vec<ServerInst>,
    pub names: BTreeMap<UName, NameInfo>,
    pub main: NodeId,
    /// The program frame: the outermost block of the main process, whose
    /// variables are reported by `--dump-vars`.
    pub dump_block: Option<NodeId>,
}

impl Program {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn kind(&self, id: NodeId) -> &NodeKind {
        &self.nodes[id.index()].kind
    }

    pub fn name_kind(&self, name: &str) -> &VKind {
        &self.names[name].kind
    }

    pub fn src_name(&self, name: &str) -> &str {
        &self.names[name].src
    }
}

/// A compile-time-folded extent, with the source position it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StaticExtent {
    pub value: usize,
    pub origin: Pos,
}
