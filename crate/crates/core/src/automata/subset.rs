use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::syntax::{GlobalType, Role};

use super::events::AsyncEvent;
use super::global::{erase, NodeSet};
use super::machine::{LocalMachine, StateId};

/// The canonical local machine of a role together with the set of global
/// nodes each of its states stands for.
#[derive(Clone, Debug)]
pub struct SubsetProjection {
    pub machine: LocalMachine,
    /// `subsets[s]` is the node set of state `s`; never empty.
    pub subsets: Vec<NodeSet>,
}

/// Determinizes the erasure machine of `p`. States are the ε-closed node sets
/// reachable from the closure of the root, numbered `s0, s1, …` in
/// breadth-first order with events in ascending order.
pub fn subset_construction(g: &GlobalType, p: &Role) -> SubsetProjection {
    let er = erase(g, p);
    let start = er.initial_closure();
    let mut machine = LocalMachine::new(p.clone(), "s0");
    machine.set_final(0, start.iter().any(|n| er.finals.contains(n)));
    let mut index: HashMap<NodeSet, StateId> = HashMap::from([(start.clone(), 0)]);
    let mut subsets = vec![start];
    let mut queue = VecDeque::from([0]);
    while let Some(s) = queue.pop_front() {
        let events: BTreeSet<AsyncEvent> = er.enabled(&subsets[s]);
        for x in events {
            let next = er.step(&subsets[s], &x);
            let t = match index.get(&next) {
                Some(&t) => t,
                None => {
                    let t = machine.add_state(
                        &format!("s{}", subsets.len()),
                        next.iter().any(|n| er.finals.contains(n)),
                    );
                    index.insert(next.clone(), t);
                    subsets.push(next);
                    queue.push_back(t);
                    t
                }
            };
            machine
                .add_transition(s, x, t)
                .expect("subset construction is deterministic by construction");
        }
    }
    SubsetProjection { machine, subsets }
}
