use std::collections::HashMap;

use crate::automata::{project_word, AsyncEvent, SyncEvent};
use crate::syntax::{GlobalType, Node, NodeId, Role};

use super::OracleError;

/// A run of the global automaton with ε-steps elided: `states[i]` is the
/// choice node where `labels[i]` is taken, and the last state is where the
/// run stops. `states.len() == labels.len() + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GlobalRun {
    pub states: Vec<NodeId>,
    pub labels: Vec<SyncEvent>,
    /// Ends at an `End` node.
    pub maximal: bool,
    /// Cut off by the unroll bound; the run continues beyond its last state.
    pub truncated: bool,
}

/// Follows ε-edges from `n` to a choice or `End`, counting binder entries.
/// Returns the node reached and whether some binder exceeded `unroll`.
fn resolve(g: &GlobalType, mut n: NodeId, entries: &mut HashMap<NodeId, usize>, unroll: usize) -> (NodeId, bool) {
    let mut exceeded = false;
    loop {
        match g.node(n) {
            Node::Rec { body, .. } => {
                let c = entries.entry(n).or_insert(0);
                *c += 1;
                exceeded |= *c > unroll;
                n = *body;
            }
            Node::Var { binder: Some(b), .. } => n = *b,
            _ => return (n, exceeded),
        }
    }
}

/// Per-role view of the target word and how much of it a run has matched.
struct Views {
    roles: Vec<Role>,
    words: Vec<Vec<AsyncEvent>>,
}

impl Views {
    fn new(roles: Vec<Role>, w: &[AsyncEvent]) -> Views {
        let words = roles.iter().map(|r| project_word(w, r)).collect();
        Views { roles, words }
    }

    /// Advances `matched` by `e`; false if `e` contradicts some role's view.
    fn advance(&self, matched: &mut [usize], e: &SyncEvent) -> bool {
        for x in e.split() {
            if let Some(i) = self.roles.iter().position(|r| *r == x.active) {
                if matched[i] < self.words[i].len() && self.words[i][matched[i]] != x {
                    return false;
                }
                matched[i] += 1;
            }
        }
        true
    }

    fn covers(&self, matched: &[usize]) -> bool {
        matched.iter().zip(&self.words).all(|(m, w)| *m >= w.len())
    }
}

fn enumerate(g: &GlobalType, views: &Views, unroll: usize) -> Vec<GlobalRun> {
    struct Frame {
        run: GlobalRun,
        entries: HashMap<NodeId, usize>,
        matched: Vec<usize>,
    }
    let mut entries = HashMap::new();
    let (start, exceeded) = resolve(g, g.root(), &mut entries, unroll);
    let mut out = Vec::new();
    let mut stack = vec![Frame {
        run: GlobalRun {
            states: vec![start],
            labels: Vec::new(),
            maximal: false,
            truncated: exceeded,
        },
        entries,
        matched: vec![0; views.roles.len()],
    }];
    while let Some(mut f) = stack.pop() {
        let here = *f.run.states.last().unwrap();
        match g.node(here) {
            Node::Choice { sender, branches } if !f.run.truncated => {
                for b in branches {
                    let e = SyncEvent::new(sender.clone(), b.receiver.clone(), b.message.clone());
                    let mut matched = f.matched.clone();
                    if !views.advance(&mut matched, &e) {
                        continue;
                    }
                    let mut entries = f.entries.clone();
                    let (next, exceeded) = resolve(g, b.cont, &mut entries, unroll);
                    let mut run = f.run.clone();
                    run.labels.push(e);
                    run.states.push(next);
                    run.truncated = exceeded;
                    stack.push(Frame { run, entries, matched });
                }
            }
            _ => {
                f.run.maximal = matches!(g.node(here), Node::End);
                if views.covers(&f.matched) {
                    out.push(f.run);
                }
            }
        }
    }
    out.sort_by(|a, b| a.labels.cmp(&b.labels).then(a.states.cmp(&b.states)));
    out
}

/// Runs whose split trace, projected to `p`, extends `w` projected to `p`.
/// Each binder is entered at most `unroll` times; runs cut off by that
/// bound are flagged `truncated` and kept only if they already cover `w`.
pub fn possible_runs(g: &GlobalType, w: &[AsyncEvent], p: &Role, unroll: usize) -> Vec<GlobalRun> {
    enumerate(g, &Views::new(vec![p.clone()], w), unroll)
}

/// Runs consistent with `w` for every role of `g`.
pub fn intersect_runs(g: &GlobalType, w: &[AsyncEvent], unroll: usize) -> Vec<GlobalRun> {
    enumerate(g, &Views::new(g.roles().into_iter().collect(), w), unroll)
}

/// A run split at the first transition that goes beyond `p`'s view of a
/// word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splitting {
    /// The longest prefix matching the word; ends at the splitting state.
    pub alpha: GlobalRun,
    /// The transition out of the last state of `alpha`, if `alpha` is not
    /// the whole run.
    pub label: Option<SyncEvent>,
    /// The remainder of the run from the state after `label`.
    pub beta: Option<GlobalRun>,
}

impl Splitting {
    /// The state the splitting transition leaves from.
    pub fn source(&self) -> NodeId {
        *self.alpha.states.last().unwrap()
    }

    /// The state the splitting transition enters.
    pub fn target(&self) -> Option<NodeId> {
        self.beta.as_ref().map(|b| b.states[0])
    }
}

pub fn unique_splitting(run: &GlobalRun, p: &Role, w: &[AsyncEvent]) -> Result<Splitting, OracleError> {
    let view = project_word(w, p);
    let mut matched = 0;
    for (j, l) in run.labels.iter().enumerate() {
        let Some(x) = l.split().into_iter().find(|x| x.active == *p) else {
            continue;
        };
        if matched < view.len() && view[matched] == x {
            matched += 1;
            continue;
        }
        if matched < view.len() {
            return Err(OracleError::InconsistentRun(format!("{l} contradicts the view of {p}")));
        }
        return Ok(Splitting {
            alpha: GlobalRun {
                states: run.states[..=j].to_vec(),
                labels: run.labels[..j].to_vec(),
                maximal: false,
                truncated: false,
            },
            label: Some(l.clone()),
            beta: Some(GlobalRun {
                states: run.states[j + 1..].to_vec(),
                labels: run.labels[j + 1..].to_vec(),
                maximal: run.maximal,
                truncated: run.truncated,
            }),
        });
    }
    if matched < view.len() && !run.truncated {
        return Err(OracleError::InconsistentRun(format!("run ends before the view of {p}")));
    }
    Ok(Splitting {
        alpha: run.clone(),
        label: None,
        beta: None,
    })
}
