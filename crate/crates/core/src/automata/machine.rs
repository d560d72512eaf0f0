use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::syntax::Role;

use super::events::AsyncEvent;

pub type StateId = usize;

/// A deterministic finite state machine over one role's send and receive
/// events. Final states may have outgoing transitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalMachine {
    role: Role,
    names: Vec<String>,
    initial: StateId,
    finals: BTreeSet<StateId>,
    out: Vec<BTreeMap<AsyncEvent, StateId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `role` declaration")]
    MissingRole,
    #[error("no state is marked initial")]
    MissingInitial,
    #[error("line {line}: second initial state `{state}`")]
    MultipleInitial { line: usize, state: String },
    #[error("line {line}: state `{state}` declared twice")]
    DuplicateState { line: usize, state: String },
    #[error("line {line}: unknown state `{state}`")]
    UnknownState { line: usize, state: String },
    #[error("line {line}: nondeterminism, `{state}` has two `{event}` transitions")]
    Nondeterminism { line: usize, state: String, event: String },
    #[error("line {line}: event `{event}` is not performed by role `{role}`")]
    WrongRole { line: usize, event: String, role: String },
}

impl LocalMachine {
    /// A machine with a single non-final initial state.
    pub fn new(role: Role, initial: &str) -> Self {
        LocalMachine {
            role,
            names: vec![initial.to_string()],
            initial: 0,
            finals: BTreeSet::new(),
            out: vec![BTreeMap::new()],
        }
    }

    pub fn add_state(&mut self, name: &str, is_final: bool) -> StateId {
        let id = self.names.len();
        self.names.push(name.to_string());
        self.out.push(BTreeMap::new());
        if is_final {
            self.finals.insert(id);
        }
        id
    }

    pub fn set_final(&mut self, s: StateId, is_final: bool) {
        if is_final {
            self.finals.insert(s);
        } else {
            self.finals.remove(&s);
        }
    }

    /// Adds `src --event--> dst`. Rejects a second edge with the same source
    /// and label, and events of other roles. `line` is 0 outside parsing.
    pub fn add_transition(&mut self, src: StateId, event: AsyncEvent, dst: StateId) -> Result<(), MachineError> {
        self.add_transition_at(0, src, event, dst)
    }

    fn add_transition_at(
        &mut self,
        line: usize,
        src: StateId,
        event: AsyncEvent,
        dst: StateId,
    ) -> Result<(), MachineError> {
        if event.active != self.role {
            return Err(MachineError::WrongRole {
                line,
                event: event.to_string(),
                role: self.role.to_string(),
            });
        }
        if self.out[src].contains_key(&event) {
            return Err(MachineError::Nondeterminism {
                line,
                state: self.names[src].clone(),
                event: event.to_string(),
            });
        }
        self.out[src].insert(event, dst);
        Ok(())
    }

    pub fn role(&self) -> &Role {
        &self.role
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn finals(&self) -> &BTreeSet<StateId> {
        &self.finals
    }

    pub fn is_final(&self, s: StateId) -> bool {
        self.finals.contains(&s)
    }

    pub fn state_count(&self) -> usize {
        self.names.len()
    }

    pub fn states(&self) -> std::ops::Range<StateId> {
        0..self.names.len()
    }

    pub fn name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn outgoing(&self, s: StateId) -> &BTreeMap<AsyncEvent, StateId> {
        &self.out[s]
    }

    pub fn successor(&self, s: StateId, x: &AsyncEvent) -> Option<StateId> {
        self.out[s].get(x).copied()
    }

    pub fn has_send(&self, s: StateId) -> bool {
        self.out[s].keys().any(AsyncEvent::is_send)
    }

    pub fn has_receive(&self, s: StateId) -> bool {
        self.out[s].keys().any(AsyncEvent::is_receive)
    }

    pub fn transitions(&self) -> impl Iterator<Item = (StateId, &AsyncEvent, StateId)> {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(s, m)| m.iter().map(move |(e, &t)| (s, e, t)))
    }

    pub fn transition_count(&self) -> usize {
        self.out.iter().map(BTreeMap::len).sum()
    }

    /// Text in the format read by [`parse_machine`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "role {}", self.role).unwrap();
        for s in self.states() {
            write!(out, "state {}", self.names[s]).unwrap();
            if s == self.initial {
                out.push_str(" initial");
            }
            if self.is_final(s) {
                out.push_str(" final");
            }
            out.push('\n');
        }
        for (s, e, t) in self.transitions() {
            writeln!(out, "{} {} {}", self.names[s], e, self.names[t]).unwrap();
        }
        out
    }
}

/// Reads the line format
///
/// ```text
/// role <ident>
/// state <ident> [initial] [final]
/// <src> <event> <dst>
/// ```
///
/// with `#` comments. States may be declared after the transitions that
/// use them.
pub fn parse_machine(text: &str) -> Result<LocalMachine, MachineError> {
    let mut role: Option<Role> = None;
    let mut states: Vec<(String, bool)> = Vec::new();
    let mut initial: Option<usize> = None;
    let mut edges: Vec<(usize, &str, &str, &str)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let words: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
        let syntax = |message: String| MachineError::Syntax { line, message };
        match words.as_slice() {
            [] => {}
            ["role", name] => {
                if role.is_some() {
                    return Err(syntax("second `role` declaration".into()));
                }
                role = Some(Role::new(*name));
            }
            ["role", ..] => return Err(syntax("expected `role <name>`".into())),
            ["state", name, flags @ ..] => {
                if states.iter().any(|(n, _)| n == name) {
                    return Err(MachineError::DuplicateState {
                        line,
                        state: name.to_string(),
                    });
                }
                let mut is_final = false;
                for flag in flags {
                    match *flag {
                        "initial" => {
                            if initial.is_some() {
                                return Err(MachineError::MultipleInitial {
                                    line,
                                    state: name.to_string(),
                                });
                            }
                            initial = Some(states.len());
                        }
                        "final" => is_final = true,
                        other => return Err(syntax(format!("unknown state flag `{other}`"))),
                    }
                }
                states.push((name.to_string(), is_final));
            }
            [src, event, dst] => edges.push((line, src, event, dst)),
            _ => return Err(syntax(format!("cannot read `{}`", raw.trim()))),
        }
    }

    let role = role.ok_or(MachineError::MissingRole)?;
    let initial = initial.ok_or(MachineError::MissingInitial)?;
    // Initial state first so that its id is 0.
    let mut order: Vec<usize> = vec![initial];
    order.extend((0..states.len()).filter(|&i| i != initial));
    let mut m = LocalMachine::new(role, &states[initial].0);
    m.set_final(0, states[initial].1);
    for &i in &order[1..] {
        m.add_state(&states[i].0, states[i].1);
    }
    for (line, src, event, dst) in edges {
        let lookup = |name: &str| {
            m.state_id(name).ok_or_else(|| MachineError::UnknownState {
                line,
                state: name.to_string(),
            })
        };
        let (s, t) = (lookup(src)?, lookup(dst)?);
        let e: AsyncEvent = event.parse().map_err(|e| MachineError::Syntax {
            line,
            message: format!("{e}"),
        })?;
        m.add_transition_at(line, s, e, t)?;
    }
    Ok(m)
}
