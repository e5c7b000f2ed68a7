//! Compile-time processor allocation.
//!
//! Every parallel component is assigned a contiguous block of processors
//! before the program runs, the way stack frames are laid out for
//! sequential calls. Distributed siblings get consecutive disjoint blocks;
//! local composition and sequencing reuse the parent's block.

use crate::sema::elab::{NodeId, NodeKind, Program};
use crate::frontend::ast::{ParMode, Placement};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub base: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationMap {
    entries: Vec<Option<Entry>>,
    widths: Vec<usize>,
    pub total: usize,
}

impl AllocationMap {
    pub fn entry(&self, id: NodeId) -> Option<Entry> {
        self.entries.get(id.index()).copied().flatten()
    }

    pub fn base(&self, id: NodeId) -> usize {
        self.entry(id).map(|e| e.base).unwrap_or(0)
    }

    pub fn width(&self, id: NodeId) -> usize {
        self.widths[id.index()]
    }

    /// One line per allocated node: `nodeId TAB base TAB width TAB pos`.
    pub fn render(&self, p: &Program) -> String {
        let mut out = String::new();
        for (i, e) in self.entries.iter().enumerate() {
            if let Some(e) = e {
                let pos = p.nodes[i].pos;
                out.push_str(&format!("{i}\t{}\t{}\t{}\n", e.base, e.width, pos));
            }
        }
        out
    }
}

/// Processor count needed by a subtree.
pub fn footprint(p: &Program, id: NodeId) -> usize {
    let mut widths = vec![None; p.nodes.len()];
    width_of(p, id, &mut widths)
}

fn width_of(p: &Program, id: NodeId, memo: &mut Vec<Option<usize>>) -> usize {
    if let Some(w) = memo[id.index()] {
        return w;
    }
    let w = match p.kind(id) {
        NodeKind::Skip
        | NodeKind::Assign { .. }
        | NodeKind::ChanOut { .. }
        | NodeKind::ChanIn { .. }
        | NodeKind::Call { .. } => 1,
        NodeKind::Seq(children) => children
            .iter()
            .map(|&c| width_of(p, c, memo))
            .max()
            .unwrap_or(1),
        NodeKind::LocalPar(children) => children
            .iter()
            .map(|c| width_of(p, c.node, memo))
            .max()
            .unwrap_or(1),
        NodeKind::DistPar(children) => children
            .iter()
            .map(|c| width_of(p, c.node, memo))
            .sum::<usize>()
            .max(1),
        NodeKind::SeqRep { body, .. } => width_of(p, *body, memo),
        NodeKind::ParRep {
            body, count, mode, ..
        } => match mode {
            ParMode::Distributed => (count * width_of(p, body.node, memo)).max(1),
            ParMode::Local => width_of(p, body.node, memo),
        },
        NodeKind::ServerSpec {
            extent,
            placement,
            body,
            ..
        } => match placement {
            Placement::Disjoint => (extent + width_of(p, body.node, memo)).max(1),
            Placement::Layered => (*extent).max(width_of(p, body.node, memo)).max(1),
        },
        NodeKind::Block { body, .. } => body.map(|b| width_of(p, b, memo)).unwrap_or(1),
    };
    memo[id.index()] = Some(w);
    w
}

/// Compute the static schedule. The root is placed at processor 0.
pub fn allocate(p: &Program) -> AllocationMap {
    let mut widths = vec![None; p.nodes.len()];
    let total = width_of(p, p.main, &mut widths);
    let mut map = AllocationMap {
        entries: vec![None; p.nodes.len()],
        widths: vec![0; p.nodes.len()],
        total,
    };
    assign(p, p.main, 0, &mut map, &mut widths);
    for (i, w) in widths.iter().enumerate() {
        map.widths[i] = w.unwrap_or(0);
    }
    map
}

fn assign(
    p: &Program,
    id: NodeId,
    base: usize,
    map: &mut AllocationMap,
    widths: &mut Vec<Option<usize>>,
) {
    let width = width_of(p, id, widths);
    map.entries[id.index()] = Some(Entry { base, width });
    match p.kind(id) {
        NodeKind::Seq(children) => {
            for &c in children {
                assign(p, c, base, map, widths);
            }
        }
        NodeKind::LocalPar(children) => {
            for c in children {
                assign(p, c.node, base, map, widths);
            }
        }
        NodeKind::DistPar(children) => {
            let mut b = base;
            for c in children {
                assign(p, c.node, b, map, widths);
                b += width_of(p, c.node, widths);
            }
        }
        NodeKind::SeqRep { body, .. } => assign(p, *body, base, map, widths),
        NodeKind::ParRep { body, .. } => {
            // Instance i runs at base + i * width(body); the map records
            // the body once at the first instance's block.
            assign(p, body.node, base, map, widths);
        }
        NodeKind::ServerSpec {
            extent,
            placement,
            body,
            ..
        } => {
            // Elements occupy base .. base+extent-1 in both placements.
            let body_base = match placement {
                Placement::Disjoint => base + extent,
                Placement::Layered => base,
            };
            assign(p, body.node, body_base, map, widths);
        }
        NodeKind::Block { body: Some(b), .. } => assign(p, *b, base, map, widths),
        _ => {}
    }
}
