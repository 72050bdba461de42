//! Simulation and analysis toolkit for multiparty key distribution built on
//! pairwise keys shared along a minimum spanning tree.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: security graphs, validation, connectivity and minimum spanning trees.
//! * [`channel`]: noisy pairwise shared randomness and the public broadcast transcript.
//! * [`subroutine`]: masked record announcements, reconstruction and secret-bit selection.
//! * [`code`]: binary linear block codes with syndrome decoding.
//! * [`protocol`]: block orchestration, abort decision, reconciliation and efficiency formulas.
//! * [`eve`]: brute-force analysis of what the public transcript reveals.
//! * [`cli`]: configuration parsing and the `plan`/`run`/`analyze`/`sweep` commands.

pub mod bits;
pub mod channel;
pub mod cli;
pub mod code;
pub mod eve;
pub mod graph;
pub mod protocol;
pub mod rational;
pub mod rng;
pub mod subroutine;
pub mod transcript;

pub use bits::BitString;
pub use graph::{AgentId, SecurityGraph, SpanningTree, WeightedEdge};
pub use rng::SeededRng;
pub use transcript::{BroadcastMessage, MessageKind, Payload, Transcript};
