//! sire: a compiler and deterministic distributed-machine simulator for a
//! block-structured process language with compile-time processor
//! allocation and channel-based server calls.

pub mod alloc;
pub mod diag;
pub mod frontend;
pub mod machine;
pub mod sema;
pub mod cli;
pub mod corpus;
pub mod runtime;
