//! State decorations: which global states (or supertype states) a candidate
//! machine's states stand for, and which of them a transition connects.

use std::collections::{BTreeSet, VecDeque};

use crate::automata::{erase, AsyncEvent, ErasureMachine, LocalMachine, NodeSet, StateId};
use crate::syntax::{GlobalType, NodeId, Role};

/// `sets[s]` holds the erasure states reachable on some word that also
/// leads the machine to `s`. Unreachable states map to the empty set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecorationMap {
    sets: Vec<NodeSet>,
}

impl DecorationMap {
    pub fn get(&self, s: StateId) -> &NodeSet {
        &self.sets[s]
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, &NodeSet)> {
        self.sets.iter().enumerate()
    }

    pub fn as_slice(&self) -> &[NodeSet] {
        &self.sets
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecorationStats {
    /// Pairs taken off the worklist.
    pub iterations: usize,
}

/// Decoration of `a` with respect to `g`.
pub fn decorate(g: &GlobalType, a: &LocalMachine) -> DecorationMap {
    decorate_with(&erase(g, a.role()), a).0
}

/// Product fixpoint of `a` with an ε-closed erasure machine. Every set only
/// grows and each (state, node) pair enters the FIFO worklist once.
pub fn decorate_with(er: &ErasureMachine, a: &LocalMachine) -> (DecorationMap, DecorationStats) {
    let mut sets = vec![NodeSet::new(); a.state_count()];
    let mut queue = VecDeque::new();
    for &n in er.closure(er.initial) {
        sets[a.initial()].insert(n);
        queue.push_back((a.initial(), n));
    }
    let mut stats = DecorationStats::default();
    while let Some((s, n)) = queue.pop_front() {
        stats.iterations += 1;
        for (x, target) in er.labelled(n) {
            if let Some(s2) = a.successor(s, x) {
                for &m in er.closure(target) {
                    if sets[s2].insert(m) {
                        queue.push_back((s2, m));
                    }
                }
            }
        }
    }
    (DecorationMap { sets }, stats)
}

/// `sets[s]` holds the states of a supertype machine reachable on a word
/// that also leads the subtype to `s`, restricted to supertype states with
/// a non-empty decoration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupertypeDecorationMap {
    sets: Vec<BTreeSet<StateId>>,
}

impl SupertypeDecorationMap {
    pub fn get(&self, s: StateId) -> &BTreeSet<StateId> {
        &self.sets[s]
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, &BTreeSet<StateId>)> {
        self.sets.iter().enumerate()
    }

    /// Union of the supertype decorations of the states mapped from `s`.
    pub fn union_decoration(&self, s: StateId, db: &DecorationMap) -> NodeSet {
        self.sets[s].iter().flat_map(|&t| db.get(t).iter().copied()).collect()
    }
}

pub fn decorate_supertype(g: &GlobalType, b: &LocalMachine, a: &LocalMachine) -> SupertypeDecorationMap {
    decorate_supertype_with(&decorate(g, b), b, a)
}

/// Product reachability of `a` and `b` on shared words, filtered by `db`,
/// the decoration of `b`.
pub fn decorate_supertype_with(db: &DecorationMap, b: &LocalMachine, a: &LocalMachine) -> SupertypeDecorationMap {
    let mut seen = vec![BTreeSet::new(); a.state_count()];
    let mut queue = VecDeque::from([(a.initial(), b.initial())]);
    seen[a.initial()].insert(b.initial());
    while let Some((s, t)) = queue.pop_front() {
        for (x, &s2) in a.outgoing(s) {
            if let Some(t2) = b.successor(t, x) {
                if seen[s2].insert(t2) {
                    queue.push_back((s2, t2));
                }
            }
        }
    }
    for set in &mut seen {
        set.retain(|&t| !db.get(t).is_empty());
    }
    SupertypeDecorationMap { sets: seen }
}

/// Origins and destinations of a transition `s --x--> s2` between node sets.
///
/// A source node is an origin when `x`, possibly preceded and followed by
/// ε-edges, leads from it into `s2`; for a send `x` the node must also not
/// reach a receive of the role through ε-edges alone, since the role cannot
/// tell whether that receive or its own send comes first. Destinations are
/// the members of `s2` reached from some member of `s` by `x` after ε-edges.
pub fn tr_sets(g: &GlobalType, p: &Role, s: &NodeSet, x: &AsyncEvent, s2: &NodeSet) -> (NodeSet, NodeSet) {
    tr_sets_with(&erase(g, p), s, x, s2)
}

pub fn tr_sets_with(er: &ErasureMachine, s: &NodeSet, x: &AsyncEvent, s2: &NodeSet) -> (NodeSet, NodeSet) {
    let mut origins = NodeSet::new();
    let mut dests = NodeSet::new();
    for &n in s {
        let reached = er.reach(n, x);
        let mut hit = false;
        for m in reached.intersection(s2) {
            dests.insert(*m);
            hit = true;
        }
        if hit && !(x.is_send() && receives_first(er, n)) {
            origins.insert(n);
        }
    }
    (origins, dests)
}

/// Some receive of the role is enabled after ε-edges from `n`.
fn receives_first(er: &ErasureMachine, n: NodeId) -> bool {
    er.closure(n)
        .iter()
        .any(|&m| er.labelled(m).any(|(l, _)| l.is_receive()))
}

/// Origins and destinations of `s --x--> s2` over a machine's single edges.
pub fn tr_sets_machine(
    b: &LocalMachine,
    s: &BTreeSet<StateId>,
    x: &AsyncEvent,
    s2: &BTreeSet<StateId>,
) -> (BTreeSet<StateId>, BTreeSet<StateId>) {
    let mut origins = BTreeSet::new();
    let mut dests = BTreeSet::new();
    for &t in s {
        if let Some(t2) = b.successor(t, x) {
            if s2.contains(&t2) {
                origins.insert(t);
                dests.insert(t2);
            }
        }
    }
    (origins, dests)
}
