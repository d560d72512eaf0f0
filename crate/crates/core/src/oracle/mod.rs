//! Bounded execution of communicating state machines.
//!
//! A CSM is one deterministic machine per role, connected by one FIFO
//! channel per ordered pair of distinct roles. The executor enumerates
//! configurations breadth-first, reports deadlocks and terminated traces,
//! and compares bounded trace languages. Because every machine is
//! deterministic, each trace leads to exactly one configuration, so trace
//! languages can be compared on the product of configuration graphs.

mod indist;
mod runs;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::automata::{subset_construction, AsyncEvent, LocalMachine, StateId};
use crate::syntax::{GlobalType, Message, Role};

pub use indist::{closure_check, indist_neighbors};
pub use runs::{intersect_runs, possible_runs, unique_splitting, GlobalRun, Splitting};

/// Default cap on stored terminated traces.
pub const TERMINATED_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("machine for `{0}` is declared for role `{1}`")]
    MisboundRole(Role, Role),
    #[error("no role `{0}` in this CSM")]
    UnknownRole(Role),
    #[error("`{0}` has no transition on {1} from its current state")]
    NoSuchTransition(Role, AsyncEvent),
    #[error("channel for {0} is empty or has a different message at its head")]
    EmptyOrMismatchedChannel(AsyncEvent),
    #[error("run is not consistent with the word: {0}")]
    InconsistentRun(String),
}

/// One machine per role. Roles are ordered lexicographically, which fixes
/// the enumeration order of every exploration.
#[derive(Clone, Debug)]
pub struct Csm {
    roles: Vec<Role>,
    machines: Vec<LocalMachine>,
}

impl Csm {
    pub fn new(machines: BTreeMap<Role, LocalMachine>) -> Result<Csm, OracleError> {
        for (r, m) in &machines {
            if m.role() != r {
                return Err(OracleError::MisboundRole(r.clone(), m.role().clone()));
            }
        }
        let (roles, machines) = machines.into_iter().unzip();
        Ok(Csm { roles, machines })
    }

    /// The subset construction of every role of `g`.
    pub fn canonical(g: &GlobalType) -> Csm {
        let machines = g
            .roles()
            .into_iter()
            .map(|p| (p.clone(), subset_construction(g, &p).machine))
            .collect();
        Csm::new(machines).expect("subset constructions carry their role")
    }

    /// The canonical CSM of `g` with the given machines substituted.
    pub fn with_machines(g: &GlobalType, replace: impl IntoIterator<Item = LocalMachine>) -> Csm {
        let mut machines: BTreeMap<Role, LocalMachine> = g
            .roles()
            .into_iter()
            .map(|p| (p.clone(), subset_construction(g, &p).machine))
            .collect();
        for m in replace {
            machines.insert(m.role().clone(), m);
        }
        Csm::new(machines).expect("machines are keyed by their own role")
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn machine(&self, r: &Role) -> Option<&LocalMachine> {
        self.index(r).map(|i| &self.machines[i])
    }

    fn index(&self, r: &Role) -> Option<usize> {
        self.roles.binary_search(r).ok()
    }

    fn channel(&self, from: usize, to: usize) -> usize {
        from * self.roles.len() + to
    }

    pub fn initial(&self) -> Configuration {
        let n = self.roles.len();
        Configuration {
            states: self.machines.iter().map(LocalMachine::initial).collect(),
            channels: vec![VecDeque::new(); n * n],
        }
    }

    /// All states final and all channels empty.
    pub fn is_final(&self, c: &Configuration) -> bool {
        c.channels.iter().all(VecDeque::is_empty) && self.machines.iter().zip(&c.states).all(|(m, &s)| m.is_final(s))
    }

    /// Enabled events in enumeration order: roles in order, and for each
    /// role its sends then its receives (the machine's event order).
    /// Sends that would exceed `bound` are skipped; the flag reports them.
    fn enabled(&self, c: &Configuration, bound: usize) -> (Vec<(AsyncEvent, usize, StateId)>, bool) {
        let mut out = Vec::new();
        let mut blocked = false;
        for (i, m) in self.machines.iter().enumerate() {
            for (x, &t) in m.outgoing(c.states[i]) {
                let Some(j) = self.index(&x.peer) else { continue };
                if x.is_send() {
                    if c.channels[self.channel(i, j)].len() < bound {
                        out.push((x.clone(), i, t));
                    } else {
                        blocked = true;
                    }
                } else if c.channels[self.channel(j, i)].front() == Some(&x.message) {
                    out.push((x.clone(), i, t));
                }
            }
        }
        (out, blocked)
    }

    fn apply(&self, c: &Configuration, x: &AsyncEvent, i: usize, t: StateId) -> Configuration {
        let mut next = c.clone();
        next.states[i] = t;
        let j = self.index(&x.peer).expect("enabled events have known peers");
        if x.is_send() {
            next.channels[self.channel(i, j)].push_back(x.message.clone());
        } else {
            next.channels[self.channel(j, i)].pop_front();
        }
        next
    }

    /// Performs `x` from `c` without any channel bound.
    pub fn step(&self, c: &Configuration, x: &AsyncEvent) -> Result<Configuration, OracleError> {
        let i = self
            .index(&x.active)
            .ok_or_else(|| OracleError::UnknownRole(x.active.clone()))?;
        let t = self.machines[i]
            .successor(c.states[i], x)
            .ok_or_else(|| OracleError::NoSuchTransition(x.active.clone(), x.clone()))?;
        let j = self
            .index(&x.peer)
            .ok_or_else(|| OracleError::UnknownRole(x.peer.clone()))?;
        if x.is_receive() && c.channels[self.channel(j, i)].front() != Some(&x.message) {
            return Err(OracleError::EmptyOrMismatchedChannel(x.clone()));
        }
        Ok(self.apply(c, x, i, t))
    }

    /// Runs a whole word from the initial configuration.
    pub fn run(&self, w: &[AsyncEvent]) -> Result<Configuration, OracleError> {
        let mut c = self.initial();
        for x in w {
            c = self.step(&c, x)?;
        }
        Ok(c)
    }

    pub fn view(&self, c: &Configuration) -> ConfigView {
        let n = self.roles.len();
        let mut channels = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                let ch = &c.channels[self.channel(i, j)];
                if !ch.is_empty() {
                    channels.insert(
                        format!("{}->{}", self.roles[i], self.roles[j]),
                        ch.iter().cloned().collect(),
                    );
                }
            }
        }
        ConfigView {
            states: self
                .roles
                .iter()
                .zip(&self.machines)
                .zip(&c.states)
                .map(|((r, m), &s)| (r.clone(), m.name(s).to_string()))
                .collect(),
            channels,
        }
    }
}

/// Local states and channel contents. Channel `(p, q)` carries messages
/// from `p` to `q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    states: Vec<StateId>,
    channels: Vec<VecDeque<Message>>,
}

impl Configuration {
    pub fn state_of(&self, csm: &Csm, r: &Role) -> Option<StateId> {
        csm.index(r).map(|i| self.states[i])
    }

    pub fn channel(&self, csm: &Csm, from: &Role, to: &Role) -> Vec<Message> {
        match (csm.index(from), csm.index(to)) {
            (Some(i), Some(j)) => self.channels[csm.channel(i, j)].iter().cloned().collect(),
            _ => Vec::new(),
        }
    }

    pub fn max_channel_len(&self) -> usize {
        self.channels.iter().map(VecDeque::len).max().unwrap_or(0)
    }
}

/// Named rendering of a configuration; only non-empty channels are listed,
/// keyed `from->to`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigView {
    pub states: BTreeMap<Role, String>,
    pub channels: BTreeMap<String, Vec<Message>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Deadlock {
    #[serde(flatten)]
    pub configuration: ConfigView,
    pub trace: Vec<AsyncEvent>,
    #[serde(skip)]
    pub raw: Configuration,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExplorationReport {
    pub reachable: usize,
    pub deadlocks: Vec<Deadlock>,
    /// One shortest trace per reachable final configuration.
    pub terminated: Vec<Vec<AsyncEvent>>,
    /// More final configurations were found than [`TERMINATED_CAP`].
    pub terminated_capped: bool,
    /// The depth bound cut off an enabled event, or the channel bound
    /// blocked a send.
    pub truncated: bool,
    pub channel_high_water: usize,
}

/// A configuration with its parent index and incoming event, and its depth.
type SearchNode = (Configuration, Option<(usize, AsyncEvent)>, usize);

/// Breadth-first enumeration of configurations reachable in at most
/// `depth` events with at most `channel` messages per channel.
///
/// A non-final configuration with no enabled event is a deadlock, unless a
/// send is blocked only by the channel bound, which marks the report as
/// truncated instead.
pub fn explore(csm: &Csm, depth: usize, channel: usize) -> ExplorationReport {
    let mut nodes: Vec<SearchNode> = vec![(csm.initial(), None, 0)];
    let mut seen: HashMap<Configuration, usize> = HashMap::from([(csm.initial(), 0)]);
    let mut report = ExplorationReport {
        reachable: 0,
        deadlocks: Vec::new(),
        terminated: Vec::new(),
        terminated_capped: false,
        truncated: false,
        channel_high_water: 0,
    };
    let trace = |nodes: &[SearchNode], mut i: usize| {
        let mut w = Vec::new();
        while let Some((parent, x)) = &nodes[i].1 {
            w.push(x.clone());
            i = *parent;
        }
        w.reverse();
        w
    };
    let mut next = 0;
    while next < nodes.len() {
        let i = next;
        next += 1;
        let (c, _, d) = nodes[i].clone();
        report.channel_high_water = report.channel_high_water.max(c.max_channel_len());
        let (enabled, blocked) = csm.enabled(&c, channel);
        report.truncated |= blocked;
        if csm.is_final(&c) {
            if report.terminated.len() < TERMINATED_CAP {
                report.terminated.push(trace(&nodes, i));
            } else {
                report.terminated_capped = true;
            }
        } else if enabled.is_empty() && !blocked {
            report.deadlocks.push(Deadlock {
                configuration: csm.view(&c),
                trace: trace(&nodes, i),
                raw: c.clone(),
            });
        }
        if d == depth {
            report.truncated |= !enabled.is_empty();
            continue;
        }
        for (x, r, t) in enabled {
            let c2 = csm.apply(&c, &x, r, t);
            if !seen.contains_key(&c2) {
                seen.insert(c2.clone(), nodes.len());
                nodes.push((c2, Some((i, x)), d + 1));
            }
        }
    }
    report.reachable = nodes.len();
    report
}

/// Configurations reachable in at most `depth` events, channel bound
/// `channel`.
pub fn reachable_configurations(csm: &Csm, depth: usize, channel: usize) -> Vec<Configuration> {
    let mut seen = HashSet::from([csm.initial()]);
    let mut out = vec![csm.initial()];
    let mut frontier = vec![csm.initial()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for c in &frontier {
            for (x, r, t) in csm.enabled(c, channel).0 {
                let c2 = csm.apply(c, &x, r, t);
                if seen.insert(c2.clone()) {
                    out.push(c2.clone());
                    next.push(c2);
                }
            }
        }
        frontier = next;
    }
    out
}

/// Every trace of length at most `k` (prefix-closed), with channel bound
/// `k`.
pub fn bounded_traces(csm: &Csm, k: usize) -> BTreeSet<Vec<AsyncEvent>> {
    let mut out = BTreeSet::new();
    let mut stack = vec![(csm.initial(), Vec::new())];
    while let Some((c, w)) = stack.pop() {
        if w.len() < k {
            for (x, r, t) in csm.enabled(&c, k).0 {
                let mut w2 = w.clone();
                w2.push(x.clone());
                stack.push((csm.apply(&c, &x, r, t), w2));
            }
        }
        out.insert(w);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceComparison {
    pub equal_prefixes: bool,
    /// A shortest word of length at most `k` in the symmetric difference.
    pub counterexample: Option<Vec<AsyncEvent>>,
}

fn product_search(a: &Csm, b: &Csm, k: usize, both_ways: bool) -> Option<Vec<AsyncEvent>> {
    let start = (a.initial(), b.initial());
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, Vec::<AsyncEvent>::new())]);
    while let Some(((ca, cb), w)) = queue.pop_front() {
        if w.len() >= k {
            continue;
        }
        let ea: BTreeMap<AsyncEvent, (usize, StateId)> =
            a.enabled(&ca, k).0.into_iter().map(|(x, r, t)| (x, (r, t))).collect();
        let eb: BTreeMap<AsyncEvent, (usize, StateId)> =
            b.enabled(&cb, k).0.into_iter().map(|(x, r, t)| (x, (r, t))).collect();
        let only_a = ea.keys().find(|x| !eb.contains_key(*x));
        let only_b = if both_ways {
            eb.keys().find(|x| !ea.contains_key(*x))
        } else {
            None
        };
        if let Some(x) = only_a.or(only_b) {
            let mut w = w;
            w.push(x.clone());
            return Some(w);
        }
        for (x, (ra, ta)) in ea {
            let (rb, tb) = eb[&x];
            let pair = (a.apply(&ca, &x, ra, ta), b.apply(&cb, &x, rb, tb));
            if seen.insert(pair.clone()) {
                let mut w2 = w.clone();
                w2.push(x);
                queue.push_back((pair, w2));
            }
        }
    }
    None
}

/// Compares the sets of traces of length at most `k` of two CSMs over the
/// same roles, with channel bound `k`.
pub fn bounded_trace_compare(a: &Csm, b: &Csm, k: usize) -> TraceComparison {
    let counterexample = product_search(a, b, k, true);
    TraceComparison {
        equal_prefixes: counterexample.is_none(),
        counterexample,
    }
}

/// A shortest trace of `a` of length at most `k` that `b` cannot perform,
/// if any.
pub fn bounded_trace_inclusion(a: &Csm, b: &Csm, k: usize) -> Option<Vec<AsyncEvent>> {
    product_search(a, b, k, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::parse_machine;
    use crate::syntax::parse_global_type;

    fn g(s: &str) -> GlobalType {
        parse_global_type(s).unwrap()
    }

    const G1: &str = "(p->q:b . q->p:b . 0 + p->q:m . q->p:m . 0)";
    const SENDS_FOREVER: &str = "mu t . p -> q : m . t";

    #[test]
    fn step_fifo() {
        let csm = Csm::canonical(&g(SENDS_FOREVER));
        let (p, q) = (Role::new("p"), Role::new("q"));
        let c0 = csm.initial();
        let c1 = csm.step(&c0, &AsyncEvent::send("p", "q", "m")).unwrap();
        assert_eq!(c1.channel(&csm, &p, &q), vec![Message::new("m")]);
        assert_ne!(c1.state_of(&csm, &p), c0.state_of(&csm, &p));
        assert_eq!(c1.state_of(&csm, &q), c0.state_of(&csm, &q));
        let c2 = csm.step(&c1, &AsyncEvent::receive("q", "p", "m")).unwrap();
        assert!(c2.channel(&csm, &p, &q).is_empty());
        assert_eq!(
            csm.step(&c2, &AsyncEvent::receive("q", "p", "m")),
            Err(OracleError::EmptyOrMismatchedChannel(AsyncEvent::receive(
                "q", "p", "m"
            )))
        );
        assert!(matches!(
            csm.step(&c2, &AsyncEvent::send("q", "p", "m")),
            Err(OracleError::NoSuchTransition(..))
        ));
    }

    #[test]
    fn explore_two_branch() {
        let r = explore(&Csm::canonical(&g(G1)), 12, 2);
        assert!(r.deadlocks.is_empty());
        assert_eq!(r.terminated.len(), 2);
        assert!(!r.truncated);
    }

    #[test]
    fn explore_silent_receiver() {
        let gt = g(SENDS_FOREVER);
        let csm = Csm::with_machines(&gt, [parse_machine("role q\nstate s0 initial\n").unwrap()]);
        let r = explore(&csm, 12, 1);
        assert!(r.terminated.is_empty());
        assert!(r.truncated);
        assert!(r.deadlocks.is_empty());
        assert_eq!(r.channel_high_water, 1);
    }

    #[test]
    fn explore_is_deterministic() {
        let csm = Csm::canonical(&crate::syntax::generate_gn(1));
        let a = serde_json_string(&explore(&csm, 10, 2));
        let b = serde_json_string(&explore(&csm, 10, 2));
        assert_eq!(a, b);
    }

    fn serde_json_string(r: &ExplorationReport) -> String {
        format!(
            "{} {:?} {:?} {}",
            r.reachable,
            r.terminated,
            r.deadlocks.iter().map(|d| &d.trace).collect::<Vec<_>>(),
            r.truncated
        )
    }

    #[test]
    fn compare_examples() {
        let gt = g(G1);
        let csm = Csm::canonical(&gt);
        assert_eq!(
            bounded_trace_compare(&csm, &csm, 12),
            TraceComparison {
                equal_prefixes: true,
                counterexample: None
            }
        );
        let gl = g(SENDS_FOREVER);
        let silent = Csm::with_machines(&gl, [parse_machine("role q\nstate s0 initial\n").unwrap()]);
        let cmp = bounded_trace_compare(&Csm::canonical(&gl), &silent, 12);
        assert!(!cmp.equal_prefixes);
        let w = cmp.counterexample.unwrap();
        assert_eq!(
            w,
            vec![AsyncEvent::send("p", "q", "m"), AsyncEvent::receive("q", "p", "m")]
        );
        assert!(bounded_trace_inclusion(&silent, &Csm::canonical(&gl), 12).is_none());
    }

    #[test]
    fn bounded_traces_prefix_closed() {
        let traces = bounded_traces(&Csm::canonical(&g(G1)), 12);
        for w in &traces {
            if !w.is_empty() {
                assert!(traces.contains(&w[..w.len() - 1]));
            }
        }
        assert!(traces.iter().all(|w| w.len() <= 4));
    }
}
