//! Runtime values, environment frames and the wire encoding used to ship
//! lexical environments between processors.

use crate::machine::{ChanId, EndId};
use crate::sema::elab::{Capture, UName, VKind};

/// A server or server-array handle: base processor, the local end ID
/// common to every element, and the flat element count. Fits in two
/// machine words on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServerBinding {
    pub base: u32,
    pub local_end: u32,
    pub extent: u32,
}

impl ServerBinding {
    pub fn element_end(&self, index: u32) -> EndId {
        EndId {
            proc: self.base + index,
            local: self.local_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Array(Vec<i64>),
    /// Flat channel identities for a channel or channel array.
    Chan(Vec<ChanId>),
    Server(ServerBinding),
}

#[derive(Debug, Default)]
struct Frame {
    slots: Vec<(UName, Value)>,
}

/// Per-thread variable environment: a stack of frames searched innermost
/// first. All access is by unique elaborated name.
#[derive(Debug, Default)]
pub struct Env {
    frames: Vec<Frame>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn push_frame(&mut self) {
        self.frames.push(Frame::default());
    }

    pub fn pop_frame(&mut self) {
        self.frames.pop();
    }

    pub fn declare(&mut self, name: impl Into<UName>, value: Value) {
        self.frames
            .last_mut()
            .expect("environment frame")
            .slots
            .push((name.into(), value));
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.frames
            .iter()
            .rev()
            .find_map(|f| f.slots.iter().rev().find(|(n, _)| n == name))
            .map(|(_, v)| v)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Value> {
        self.frames
            .iter_mut()
            .rev()
            .find_map(|f| f.slots.iter_mut().rev().find(|(n, _)| n == name))
            .map(|(_, v)| v)
    }

    /// Snapshot of the innermost frame (name, value) pairs, declaration
    /// order preserved.
    pub fn top_frame(&self) -> Vec<(UName, Value)> {
        self.frames
            .last()
            .map(|f| f.slots.clone())
            .unwrap_or_default()
    }
}

pub fn default_value(kind: &VKind, chan_alloc: impl FnOnce(u32) -> Vec<ChanId>) -> Value {
    match kind {
        VKind::Int => Value::Int(0),
        VKind::Array(n) => Value::Array(vec![0; *n]),
        VKind::Chan(shape) => {
            let count = shape.iter().product::<usize>().max(1) as u32;
            Value::Chan(chan_alloc(count))
        }
        VKind::Server { .. } => Value::Server(ServerBinding {
            base: 0,
            local_end: 0,
            extent: 0,
        }),
    }
}

/// Number of words a capture of this kind occupies on the wire.
pub fn wire_len(kind: &VKind) -> usize {
    match kind {
        VKind::Int => 1,
        VKind::Array(n) => *n,
        VKind::Chan(shape) => shape.iter().product::<usize>().max(1),
        VKind::Server { .. } => 2,
    }
}

pub fn encode_value(kind: &VKind, value: &Value, out: &mut Vec<i64>) {
    match (kind, value) {
        (VKind::Int, Value::Int(v)) => out.push(*v),
        (VKind::Array(n), Value::Array(a)) => {
            debug_assert_eq!(*n, a.len());
            out.extend_from_slice(a);
        }
        (VKind::Chan(_), Value::Chan(ids)) => out.extend(ids.iter().map(|c| c.0 as i64)),
        (VKind::Server { .. }, Value::Server(b)) => {
            out.push(
                EndId {
                    proc: b.base,
                    local: b.local_end,
                }
                .pack(),
            );
            out.push(b.extent as i64);
        }
        _ => panic!("capture kind does not match value"),
    }
}

pub fn decode_value(kind: &VKind, words: &[i64]) -> Value {
    match kind {
        VKind::Int => Value::Int(words[0]),
        VKind::Array(_) => Value::Array(words.to_vec()),
        VKind::Chan(_) => Value::Chan(words.iter().map(|&w| ChanId(w as u32)).collect()),
        VKind::Server { .. } => {
            let end = EndId::unpack(words[0]);
            Value::Server(ServerBinding {
                base: end.proc,
                local_end: end.local,
                extent: words[1] as u32,
            })
        }
    }
}

/// Encode the values of `captures` from `env` into a flat word message.
/// `index` overrides one name (a replicator index not present in the
/// parent environment).
pub fn encode_captures(
    env: &Env,
    captures: &[Capture],
    index: Option<(&UName, i64)>,
) -> Vec<i64> {
    let mut out = Vec::new();
    for cap in captures {
        if let Some((name, v)) = index {
            if name == &cap.name {
                out.push(v);
                continue;
            }
        }
        let value = env
            .get(&cap.name)
            .unwrap_or_else(|| panic!("capture `{}` missing from environment", cap.name));
        encode_value(&cap.kind, value, &mut out);
    }
    out
}

/// Decode a shipped environment into declarations in the current frame.
pub fn decode_captures(env: &mut Env, captures: &[Capture], words: &[i64]) -> Result<(), String> {
    let mut at = 0;
    for cap in captures {
        let len = wire_len(&cap.kind);
        if at + len > words.len() {
            return Err("environment message too short".into());
        }
        let value = decode_value(&cap.kind, &words[at..at + len]);
        env.declare(cap.name.clone(), value);
        at += len;
    }
    if at != words.len() {
        return Err("environment message too long".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn environment_shadowing() {
        let mut env = Env::new();
        env.push_frame();
        env.declare("x.1", Value::Int(1));
        env.push_frame();
        env.declare("x.2", Value::Int(2));
        assert_eq!(env.get("x.1"), Some(&Value::Int(1)));
        assert_eq!(env.get("x.2"), Some(&Value::Int(2)));
        env.pop_frame();
        assert_eq!(env.get("x.2"), None);
    }

    #[test]
    fn capture_round_trip() {
        let captures = vec![
            Capture {
                name: "i.1".into(),
                kind: VKind::Int,
            },
            Capture {
                name: "a.2".into(),
                kind: VKind::Array(3),
            },
            Capture {
                name: "s.3".into(),
                kind: VKind::Server { def: 0, dims: vec![4] },
            },
            Capture {
                name: "c.4".into(),
                kind: VKind::Chan(vec![2]),
            },
        ];
        let mut env = Env::new();
        env.push_frame();
        env.declare("i.1", Value::Int(-7));
        env.declare("a.2", Value::Array(vec![1, 2, 3]));
        env.declare(
            "s.3",
            Value::Server(ServerBinding {
                base: 5,
                local_end: 0,
                extent: 4,
            }),
        );
        env.declare("c.4", Value::Chan(vec![ChanId(8), ChanId(9)]));

        let words = encode_captures(&env, &captures, None);
        let mut env2 = Env::new();
        env2.push_frame();
        decode_captures(&mut env2, &captures, &words).unwrap();
        for cap in &captures {
            assert_eq!(env.get(&cap.name), env2.get(&cap.name));
        }
    }
}
