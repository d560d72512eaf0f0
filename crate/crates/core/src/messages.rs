//! Available-message sets: the sends that may sit at channel heads while a
//! set of roles is blocked.
//!
//! `M^{B,T}(G)` is evaluated structurally over the global type. `B` is the
//! set of blocked roles and `T` the recursion binders already unfolded.
//! Each binder is unfolded at most once per evaluation path, so evaluation
//! terminates on every closed type.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use thiserror::Error;

use crate::automata::AsyncEvent;
use crate::syntax::{GlobalType, Node, NodeId, Role};

/// A set of send events.
pub type AvailableMessageSet = BTreeSet<AsyncEvent>;

/// The blocked roles `B` and the unfolded recursion variables `T`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockedSet {
    pub roles: BTreeSet<Role>,
    pub unfolded: BTreeSet<String>,
}

impl BlockedSet {
    pub fn role(p: &Role) -> Self {
        BlockedSet {
            roles: BTreeSet::from([p.clone()]),
            unfolded: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MessagesError {
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MessageStats {
    /// Recursion variables expanded into their binder's body.
    pub unfoldings: usize,
    /// Variables cut off because their binder was already unfolded.
    pub guard_hits: usize,
    /// Memo-table misses.
    pub evaluations: usize,
}

type Key = (NodeId, BTreeSet<Role>, BTreeSet<NodeId>);

/// Memoizing evaluator of available-message sets over one global type.
pub struct AvailableMessages<'g> {
    g: &'g GlobalType,
    memo: HashMap<Key, Rc<AvailableMessageSet>>,
    pub stats: MessageStats,
}

impl<'g> AvailableMessages<'g> {
    pub fn new(g: &'g GlobalType) -> Self {
        AvailableMessages {
            g,
            memo: HashMap::new(),
            stats: MessageStats::default(),
        }
    }

    /// `M^{{p}}` at `node`.
    pub fn for_role(&mut self, node: NodeId, p: &Role) -> Rc<AvailableMessageSet> {
        self.eval(node, BTreeSet::from([p.clone()]), BTreeSet::new())
    }

    /// `M^{B,T}` at `node`, with `T` given as binder nodes.
    pub fn eval(
        &mut self,
        node: NodeId,
        blocked: BTreeSet<Role>,
        unfolded: BTreeSet<NodeId>,
    ) -> Rc<AvailableMessageSet> {
        let key = (node, blocked, unfolded);
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        self.stats.evaluations += 1;
        let (node, blocked, unfolded) = key.clone();
        let result = match self.g.node(node) {
            Node::End => AvailableMessageSet::new(),
            Node::Rec { body, .. } => {
                let mut t = unfolded;
                t.insert(node);
                (*self.eval(*body, blocked, t)).clone()
            }
            Node::Var { binder, .. } => match binder {
                Some(b) if !unfolded.contains(b) => {
                    self.stats.unfoldings += 1;
                    let body = match self.g.node(*b) {
                        Node::Rec { body, .. } => *body,
                        _ => unreachable!("binders are Rec nodes"),
                    };
                    let mut t = unfolded;
                    t.insert(*b);
                    (*self.eval(body, blocked, t)).clone()
                }
                Some(_) => {
                    self.stats.guard_hits += 1;
                    AvailableMessageSet::new()
                }
                None => AvailableMessageSet::new(),
            },
            Node::Choice { sender, branches } => {
                let mut out = AvailableMessageSet::new();
                if !blocked.contains(sender) {
                    for b in branches {
                        let inner = self.eval(b.cont, blocked.clone(), unfolded.clone());
                        // Drop every send from `sender` to this receiver: FIFO order
                        // puts this branch's message ahead of them.
                        out.extend(
                            inner
                                .iter()
                                .filter(|e| !(e.active == *sender && e.peer == b.receiver))
                                .cloned(),
                        );
                        out.insert(AsyncEvent::send(sender.clone(), b.receiver.clone(), b.message.clone()));
                    }
                } else {
                    for b in branches {
                        let mut bl = blocked.clone();
                        bl.insert(b.receiver.clone());
                        out.extend(self.eval(b.cont, bl, unfolded.clone()).iter().cloned());
                    }
                }
                out
            }
        };
        let result = Rc::new(result);
        self.memo.insert(key, result.clone());
        result
    }
}

/// `M^{B,T}` at `node`. Unfolded variable names mark every binder with that
/// name as unfolded.
pub fn available_messages(
    g: &GlobalType,
    node: NodeId,
    blocked: &BlockedSet,
) -> Result<AvailableMessageSet, MessagesError> {
    if g.get(node).is_none() {
        return Err(MessagesError::UnknownNode(node));
    }
    let unfolded = g
        .node_ids()
        .filter(|&id| matches!(g.node(id), Node::Rec { var, .. } if blocked.unfolded.contains(var)))
        .collect();
    let mut eval = AvailableMessages::new(g);
    Ok((*eval.eval(node, blocked.roles.clone(), unfolded)).clone())
}

/// `M^p` at `node`: available messages while only `p` is blocked.
pub fn m_role(g: &GlobalType, node: NodeId, p: &Role) -> Result<AvailableMessageSet, MessagesError> {
    available_messages(g, node, &BlockedSet::role(p))
}
