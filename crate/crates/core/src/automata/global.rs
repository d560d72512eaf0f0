use std::collections::BTreeSet;

use crate::syntax::{GlobalType, Node, NodeId, Role};

use super::events::{AsyncEvent, SyncEvent};

pub type NodeSet = BTreeSet<NodeId>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalTransition {
    pub source: NodeId,
    /// `None` is an ε-transition.
    pub label: Option<SyncEvent>,
    pub target: NodeId,
}

/// The global automaton of a type: one state per node, sync edges out of
/// choices, ε-edges from binders to bodies and from variables to binders.
#[derive(Clone, Debug)]
pub struct GlobalAutomaton {
    pub initial: NodeId,
    pub finals: NodeSet,
    transitions: Vec<GlobalTransition>,
    out: Vec<Vec<usize>>,
}

impl GlobalAutomaton {
    pub fn state_count(&self) -> usize {
        self.out.len()
    }

    pub fn states(&self) -> impl Iterator<Item = NodeId> {
        (0..self.out.len()).map(NodeId)
    }

    pub fn transitions(&self) -> &[GlobalTransition] {
        &self.transitions
    }

    pub fn outgoing(&self, n: NodeId) -> impl Iterator<Item = &GlobalTransition> {
        self.out[n.0].iter().map(|&i| &self.transitions[i])
    }
}

pub fn build_gaut(g: &GlobalType) -> GlobalAutomaton {
    let mut transitions = Vec::new();
    let mut out = vec![Vec::new(); g.node_count()];
    let mut finals = NodeSet::new();
    for id in g.node_ids() {
        let mut push = |label: Option<SyncEvent>, target: NodeId| {
            out[id.0].push(transitions.len());
            transitions.push(GlobalTransition {
                source: id,
                label,
                target,
            });
        };
        match g.node(id) {
            Node::End => {
                finals.insert(id);
            }
            Node::Choice { sender, branches } => {
                for b in branches {
                    push(
                        Some(SyncEvent::new(sender.clone(), b.receiver.clone(), b.message.clone())),
                        b.cont,
                    );
                }
            }
            Node::Rec { body, .. } => push(None, *body),
            Node::Var { binder, .. } => {
                if let Some(b) = binder {
                    push(None, *b);
                }
            }
        }
    }
    GlobalAutomaton {
        initial: g.root(),
        finals,
        transitions,
        out,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErasureEdge {
    pub source: NodeId,
    pub label: Option<AsyncEvent>,
    pub target: NodeId,
}

/// The global automaton relabelled for one role: each sync edge becomes the
/// role's half of its split image, or ε when the role is not involved.
#[derive(Clone, Debug)]
pub struct ErasureMachine {
    pub role: Role,
    pub initial: NodeId,
    pub finals: NodeSet,
    edges: Vec<ErasureEdge>,
    out: Vec<Vec<usize>>,
    closures: Vec<NodeSet>,
}

pub fn erase(g: &GlobalType, p: &Role) -> ErasureMachine {
    let gaut = build_gaut(g);
    let mut edges = Vec::with_capacity(gaut.transitions.len());
    for t in gaut.transitions() {
        let label = t
            .label
            .as_ref()
            .and_then(|e| e.split().into_iter().find(|x| x.active == *p));
        edges.push(ErasureEdge {
            source: t.source,
            label,
            target: t.target,
        });
    }
    let out = gaut.out.clone();
    let closures = (0..out.len())
        .map(|start| {
            let mut seen = NodeSet::from([NodeId(start)]);
            let mut stack = vec![NodeId(start)];
            while let Some(n) = stack.pop() {
                for &i in &out[n.0] {
                    let e: &ErasureEdge = &edges[i];
                    if e.label.is_none() && seen.insert(e.target) {
                        stack.push(e.target);
                    }
                }
            }
            seen
        })
        .collect();
    ErasureMachine {
        role: p.clone(),
        initial: gaut.initial,
        finals: gaut.finals,
        edges,
        out,
        closures,
    }
}

impl ErasureMachine {
    pub fn state_count(&self) -> usize {
        self.out.len()
    }

    pub fn edges(&self) -> &[ErasureEdge] {
        &self.edges
    }

    pub fn outgoing(&self, n: NodeId) -> impl Iterator<Item = &ErasureEdge> {
        self.out[n.0].iter().map(|&i| &self.edges[i])
    }

    /// Direct non-ε edges out of `n`.
    pub fn labelled(&self, n: NodeId) -> impl Iterator<Item = (&AsyncEvent, NodeId)> {
        self.outgoing(n).filter_map(|e| e.label.as_ref().map(|l| (l, e.target)))
    }

    pub fn closure(&self, n: NodeId) -> &NodeSet {
        &self.closures[n.0]
    }

    pub fn epsilon_closure(&self, set: &NodeSet) -> NodeSet {
        set.iter().flat_map(|n| self.closures[n.0].iter().copied()).collect()
    }

    pub fn initial_closure(&self) -> NodeSet {
        self.closures[self.initial.0].clone()
    }

    /// States reached from a member of `set` by one direct `x` edge followed
    /// by ε-edges.
    pub fn step(&self, set: &NodeSet, x: &AsyncEvent) -> NodeSet {
        let mut out = NodeSet::new();
        for &n in set {
            for (l, t) in self.labelled(n) {
                if l == x {
                    out.extend(self.closures[t.0].iter().copied());
                }
            }
        }
        out
    }

    /// States reached from `n` by `ε* x ε*`.
    pub fn reach(&self, n: NodeId, x: &AsyncEvent) -> NodeSet {
        self.step(&self.closures[n.0], x)
    }

    /// Events on direct edges out of members of `set`.
    pub fn enabled(&self, set: &NodeSet) -> BTreeSet<AsyncEvent> {
        set.iter()
            .flat_map(|&n| self.labelled(n).map(|(l, _)| l.clone()))
            .collect()
    }
}

/// Choice nodes where `p` sends, and choice nodes where `p` receives in some
/// branch.
pub fn classify_states(g: &GlobalType, p: &Role) -> (NodeSet, NodeSet) {
    let mut sends = NodeSet::new();
    let mut receives = NodeSet::new();
    for id in g.node_ids() {
        if let Node::Choice { sender, branches } = g.node(id) {
            if sender == p {
                sends.insert(id);
            }
            if branches.iter().any(|b| b.receiver == *p) {
                receives.insert(id);
            }
        }
    }
    (sends, receives)
}
