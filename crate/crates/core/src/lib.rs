//! Verification and refinement checking for asynchronous multiparty
//! session types.
//!
//! A protocol is written as a global type ([`syntax`]). Each role's canonical
//! implementation is the subset construction of its erasure
//! ([`automata`]). Candidate implementations are compared to the protocol by
//! decorating their states with global states ([`decoration`]) and checking
//! local conditions on those decorations ([`checks`]), using the
//! available-message sets of [`messages`]. The bounded executor in
//! [`oracle`] runs communicating state machines directly and serves as an
//! independent cross-check. [`corpus`] holds the worked examples.

pub mod automata;
pub mod checks;
pub mod corpus;
pub mod decoration;
pub mod messages;
pub mod oracle;
pub mod syntax;

pub use automata::{AsyncEvent, LocalMachine, NodeSet, SyncEvent};
pub use checks::{Verdict, Violation};
pub use syntax::{GlobalType, Message, NodeId, Role};
