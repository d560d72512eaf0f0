//! Event alphabets, the global automaton, projection by erasure, local
//! machines, and the subset construction.

mod events;
mod global;
mod machine;
mod subset;

pub use events::{project_word, split_word, AsyncEvent, EventKind, EventParseError, SyncEvent};
pub use global::{
    build_gaut, classify_states, erase, ErasureEdge, ErasureMachine, GlobalAutomaton, GlobalTransition, NodeSet,
};
pub use machine::{parse_machine, LocalMachine, MachineError, StateId};
pub use subset::{subset_construction, SubsetProjection};
