//! Implementability, protocol verification and protocol refinement checks.
//!
//! Every check evaluates all of its conditions and reports one
//! [`Violation`] per failing instance, each carrying the state, transitions
//! and witnesses needed to re-evaluate the condition in isolation
//! ([`revalidate`]).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{
    classify_states, erase, subset_construction, AsyncEvent, ErasureMachine, LocalMachine, NodeSet, StateId,
};
use crate::decoration::{
    decorate_supertype_with, decorate_with, tr_sets_machine, tr_sets_with, SupertypeDecorationMap,
};
use crate::messages::AvailableMessages;
use crate::syntax::{GlobalType, NodeId, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    SendValidity,
    ReceiveValidity,
    SendDecorationValidity,
    ReceiveDecorationValidity,
    TransitionExhaustivity,
    FinalStateValidity,
    SendPreservation,
    ReceiveExhaustivity,
    SendDecorationSubtypeValidity,
    ReceiveDecorationSubtypeValidity,
    SendSubtypePreservation,
    ReceiveSubtypeExhaustivity,
    FinalStateSubtypeValidity,
}

impl Condition {
    /// Conditions whose failure points at a stuck or missing behavior rather
    /// than at a wrongly chosen branch.
    pub fn is_deadlock_class(self) -> bool {
        matches!(
            self,
            Condition::TransitionExhaustivity
                | Condition::FinalStateValidity
                | Condition::SendPreservation
                | Condition::ReceiveExhaustivity
                | Condition::SendSubtypePreservation
                | Condition::ReceiveSubtypeExhaustivity
                | Condition::FinalStateSubtypeValidity
        )
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A machine transition named by state names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub src: String,
    pub event: AsyncEvent,
    pub dst: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub role: Role,
    /// Name of the local state the condition fails at.
    pub state: String,
    /// The transition under test, or the receive followed by the competing
    /// transition for the receive conditions.
    pub transitions: Vec<Transition>,
    pub witness_node: Option<NodeId>,
    pub witness_event: Option<AsyncEvent>,
    /// Supertype state, for the conditions relative to a supertype.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_state: Option<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} for role {} at state {}", self.condition, self.role, self.state)?;
        for t in &self.transitions {
            write!(f, " [{} --{}--> {}]", t.src, t.event, t.dst)?;
        }
        if let Some(t) = &self.witness_state {
            write!(f, " supertype state {t}")?;
        }
        if let Some(n) = self.witness_node {
            write!(f, " node {n}")?;
        }
        if let Some(e) = &self.witness_event {
            write!(f, " event {e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn from_violations(violations: Vec<Violation>) -> Verdict {
        Verdict {
            pass: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, c: Condition) -> bool {
        self.violations.iter().any(|v| v.condition == c)
    }

    pub fn conditions(&self) -> BTreeSet<Condition> {
        self.violations.iter().map(|v| v.condition).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("role `{0}` does not occur in the global type")]
    UnknownRole(Role),
    #[error("no machine given for role `{0}`")]
    MissingRole(Role),
    #[error("machine for `{0}` is declared for role `{1}`")]
    MisboundRole(Role, Role),
    #[error("candidate is for role `{0}` but supertype is for role `{1}`")]
    RoleMismatch(Role, Role),
}

/// The per-role data shared by all conditions.
struct RoleView<'g> {
    er: ErasureMachine,
    p: Role,
    send_nodes: NodeSet,
    msgs: AvailableMessages<'g>,
}

impl<'g> RoleView<'g> {
    fn new(g: &'g GlobalType, p: &Role) -> Self {
        RoleView {
            er: erase(g, p),
            p: p.clone(),
            send_nodes: classify_states(g, p).0,
            msgs: AvailableMessages::new(g),
        }
    }

    fn blocks(&mut self, node: NodeId, send: &AsyncEvent) -> bool {
        self.msgs.for_role(node, &self.p).contains(send)
    }

    /// Events on erasure edges out of `d`, each with its smallest source.
    fn edge_events(&self, d: &NodeSet) -> BTreeMap<AsyncEvent, NodeId> {
        let mut out = BTreeMap::new();
        for &n in d {
            for (x, _) in self.er.labelled(n) {
                out.entry(x.clone()).or_insert(n);
            }
        }
        out
    }

    fn violation(&self, condition: Condition, a: &LocalMachine, s: StateId) -> Violation {
        Violation {
            condition,
            role: self.p.clone(),
            state: a.name(s).to_string(),
            transitions: Vec::new(),
            witness_node: None,
            witness_event: None,
            witness_state: None,
        }
    }
}

fn transition(a: &LocalMachine, s: StateId, x: &AsyncEvent, t: StateId) -> Transition {
    Transition {
        src: a.name(s).to_string(),
        event: x.clone(),
        dst: a.name(t).to_string(),
    }
}

/// Which transitions compete with a receive from `q1` in the receive
/// conditions.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Competitors {
    /// Receives from a different sender (implementability).
    OtherSenders,
    /// Any transition that is not a receive from `q1`.
    AllButSender,
}

fn competes(mode: Competitors, q1: &Role, x: &AsyncEvent) -> bool {
    let not_from_q1 = !(x.is_receive() && x.peer == *q1);
    match mode {
        Competitors::OtherSenders => x.is_receive() && not_from_q1,
        Competitors::AllButSender => not_from_q1,
    }
}

fn final_state_validity(view: &RoleView, a: &LocalMachine, d: &[NodeSet], out: &mut Vec<Violation>) {
    for s in a.states() {
        if a.is_final(s) {
            continue;
        }
        if let Some(&n) = d[s].iter().find(|n| view.er.finals.contains(n)) {
            let mut v = view.violation(Condition::FinalStateValidity, a, s);
            v.witness_node = Some(n);
            out.push(v);
        }
    }
}

fn exhaustivity(
    view: &RoleView,
    a: &LocalMachine,
    d: &[NodeSet],
    condition: Condition,
    receives_only: bool,
    out: &mut Vec<Violation>,
) {
    for s in a.states() {
        for (x, n) in view.edge_events(&d[s]) {
            if receives_only && !x.is_receive() {
                continue;
            }
            if a.successor(s, &x).is_none() {
                let mut v = view.violation(condition, a, s);
                v.witness_node = Some(n);
                v.witness_event = Some(x);
                out.push(v);
            }
        }
    }
}

fn send_preservation(view: &RoleView, a: &LocalMachine, d: &[NodeSet], out: &mut Vec<Violation>) {
    for s in a.states() {
        if a.has_send(s) {
            continue;
        }
        if let Some(&n) = d[s].intersection(&view.send_nodes).next() {
            let mut v = view.violation(Condition::SendPreservation, a, s);
            v.witness_node = Some(n);
            out.push(v);
        }
    }
}

fn send_validity(view: &RoleView, a: &LocalMachine, d: &[NodeSet], condition: Condition, out: &mut Vec<Violation>) {
    for (s, x, t) in a.transitions() {
        if !x.is_send() || d[s].is_empty() {
            continue;
        }
        let (origins, _) = tr_sets_with(&view.er, &d[s], x, &d[t]);
        if let Some(&n) = d[s].difference(&origins).next() {
            let mut v = view.violation(condition, a, s);
            v.transitions = vec![transition(a, s, x, t)];
            v.witness_node = Some(n);
            out.push(v);
        }
    }
}

fn receive_validity(
    view: &mut RoleView,
    a: &LocalMachine,
    d: &[NodeSet],
    condition: Condition,
    mode: Competitors,
    out: &mut Vec<Violation>,
) {
    for s in a.states() {
        if d[s].is_empty() {
            continue;
        }
        for (x1, &s1) in a.outgoing(s) {
            if !x1.is_receive() {
                continue;
            }
            let send = x1.matching_send();
            for (x, &s2) in a.outgoing(s) {
                if !competes(mode, &x1.peer, x) {
                    continue;
                }
                let (_, dests) = tr_sets_with(&view.er, &d[s], x, &d[s2]);
                if let Some(&n) = dests.iter().find(|&&n| view.blocks(n, &send)) {
                    let mut v = view.violation(condition, a, s);
                    v.transitions = vec![transition(a, s, x1, s1), transition(a, s, x, s2)];
                    v.witness_node = Some(n);
                    v.witness_event = Some(send.clone());
                    out.push(v);
                }
            }
        }
    }
}

/// Send and Receive Validity of every role's subset construction.
pub fn check_implementable(g: &GlobalType) -> Verdict {
    let mut out = Vec::new();
    for p in g.roles() {
        let sp = subset_construction(g, &p);
        let mut view = RoleView::new(g, &p);
        send_validity(&view, &sp.machine, &sp.subsets, Condition::SendValidity, &mut out);
        receive_validity(
            &mut view,
            &sp.machine,
            &sp.subsets,
            Condition::ReceiveValidity,
            Competitors::OtherSenders,
            &mut out,
        );
    }
    Verdict::from_violations(out)
}

fn c1_role(g: &GlobalType, a: &LocalMachine, out: &mut Vec<Violation>) {
    let mut view = RoleView::new(g, a.role());
    let (d, _) = decorate_with(&view.er, a);
    let d = d.as_slice();
    final_state_validity(&view, a, d, out);
    exhaustivity(&view, a, d, Condition::TransitionExhaustivity, false, out);
    send_validity(&view, a, d, Condition::SendDecorationValidity, out);
    receive_validity(
        &mut view,
        a,
        d,
        Condition::ReceiveDecorationValidity,
        Competitors::AllButSender,
        out,
    );
}

fn check_roles(g: &GlobalType, csm: &BTreeMap<Role, LocalMachine>) -> Result<(), CheckError> {
    let roles = g.roles();
    for (r, m) in csm {
        if !roles.contains(r) {
            return Err(CheckError::UnknownRole(r.clone()));
        }
        if m.role() != r {
            return Err(CheckError::MisboundRole(r.clone(), m.role().clone()));
        }
    }
    if let Some(r) = roles.iter().find(|r| !csm.contains_key(*r)) {
        return Err(CheckError::MissingRole(r.clone()));
    }
    Ok(())
}

/// Protocol verification: does the CSM `csm` implement `g`? Assumes `g` is
/// implementable.
pub fn check_c1(g: &GlobalType, csm: &BTreeMap<Role, LocalMachine>) -> Result<Verdict, CheckError> {
    check_roles(g, csm)?;
    let mut out = Vec::new();
    for a in csm.values() {
        c1_role(g, a, &mut out);
    }
    Ok(Verdict::from_violations(out))
}

/// Refinement against the subset construction: may `a` replace the
/// canonical machine of its role?
pub fn check_c2_prime(g: &GlobalType, a: &LocalMachine) -> Result<Verdict, CheckError> {
    if !g.roles().contains(a.role()) {
        return Err(CheckError::UnknownRole(a.role().clone()));
    }
    let mut out = Vec::new();
    let mut view = RoleView::new(g, a.role());
    let (d, _) = decorate_with(&view.er, a);
    let d = d.as_slice();
    final_state_validity(&view, a, d, &mut out);
    exhaustivity(&view, a, d, Condition::ReceiveExhaustivity, true, &mut out);
    send_preservation(&view, a, d, &mut out);
    send_validity(&view, a, d, Condition::SendDecorationValidity, &mut out);
    receive_validity(
        &mut view,
        a,
        d,
        Condition::ReceiveDecorationValidity,
        Competitors::AllButSender,
        &mut out,
    );
    Ok(Verdict::from_violations(out))
}

/// Refinement against a supertype `b`: may `a` replace `b`? Sound and
/// complete when `b` is itself safe in every well-behaved context of `g`.
pub fn check_c2(g: &GlobalType, b: &LocalMachine, a: &LocalMachine) -> Result<Verdict, CheckError> {
    if a.role() != b.role() {
        return Err(CheckError::RoleMismatch(a.role().clone(), b.role().clone()));
    }
    if !g.roles().contains(a.role()) {
        return Err(CheckError::UnknownRole(a.role().clone()));
    }
    let mut view = RoleView::new(g, a.role());
    let (db, _) = decorate_with(&view.er, b);
    let dsup = decorate_supertype_with(&db, b, a);
    let union: Vec<NodeSet> = a.states().map(|s| dsup.union_decoration(s, &db)).collect();
    let mut out = Vec::new();
    let witness_in = |s: StateId, pred: &dyn Fn(NodeId) -> bool| -> Option<(StateId, NodeId)> {
        dsup.get(s)
            .iter()
            .find_map(|&t| db.get(t).iter().find(|&&n| pred(n)).map(|&n| (t, n)))
    };

    for s in a.states() {
        if a.is_final(s) {
            continue;
        }
        if let Some((t, n)) = witness_in(s, &|n| view.er.finals.contains(&n)) {
            let mut v = view.violation(Condition::FinalStateSubtypeValidity, a, s);
            v.witness_state = Some(b.name(t).to_string());
            v.witness_node = Some(n);
            out.push(v);
        }
    }
    for s in a.states() {
        for (x, n) in view.edge_events(&union[s]) {
            if x.is_receive() && a.successor(s, &x).is_none() {
                let (t, _) = witness_in(s, &|m| m == n).expect("node comes from the union");
                let mut v = view.violation(Condition::ReceiveSubtypeExhaustivity, a, s);
                v.witness_state = Some(b.name(t).to_string());
                v.witness_node = Some(n);
                v.witness_event = Some(x);
                out.push(v);
            }
        }
    }
    for s in a.states() {
        if a.has_send(s) {
            continue;
        }
        if let Some((t, n)) = witness_in(s, &|n| view.send_nodes.contains(&n)) {
            let mut v = view.violation(Condition::SendSubtypePreservation, a, s);
            v.witness_state = Some(b.name(t).to_string());
            v.witness_node = Some(n);
            out.push(v);
        }
    }
    for (s, x, t) in a.transitions() {
        if !x.is_send() || dsup.get(s).is_empty() {
            continue;
        }
        let (origins, _) = tr_sets_machine(b, dsup.get(s), x, dsup.get(t));
        if let Some(&missing) = dsup.get(s).difference(&origins).next() {
            let mut v = view.violation(Condition::SendDecorationSubtypeValidity, a, s);
            v.transitions = vec![transition(a, s, x, t)];
            v.witness_state = Some(b.name(missing).to_string());
            out.push(v);
        }
    }
    for s in a.states() {
        if dsup.get(s).is_empty() {
            continue;
        }
        for (x1, &s1) in a.outgoing(s) {
            if !x1.is_receive() {
                continue;
            }
            let send = x1.matching_send();
            for (x, &s2) in a.outgoing(s) {
                if !competes(Competitors::AllButSender, &x1.peer, x) {
                    continue;
                }
                let (_, dests) = tr_sets_machine(b, dsup.get(s), x, dsup.get(s2));
                let hit = dests
                    .iter()
                    .find_map(|&t| db.get(t).iter().find(|&&n| view.blocks(n, &send)).map(|&n| (t, n)));
                if let Some((t, n)) = hit {
                    let mut v = view.violation(Condition::ReceiveDecorationSubtypeValidity, a, s);
                    v.transitions = vec![transition(a, s, x1, s1), transition(a, s, x, s2)];
                    v.witness_state = Some(b.name(t).to_string());
                    v.witness_node = Some(n);
                    v.witness_event = Some(send.clone());
                    out.push(v);
                }
            }
        }
    }
    Ok(Verdict::from_violations(out))
}

// ---------------------------------------------------------------------------
// Re-evaluation of reported violations

/// The inputs a verdict was computed from.
pub enum CheckContext<'a> {
    Implementable {
        g: &'a GlobalType,
    },
    C1 {
        g: &'a GlobalType,
        csm: &'a BTreeMap<Role, LocalMachine>,
    },
    C2Prime {
        g: &'a GlobalType,
        a: &'a LocalMachine,
    },
    C2 {
        g: &'a GlobalType,
        b: &'a LocalMachine,
        a: &'a LocalMachine,
    },
}

struct Resolved {
    a: LocalMachine,
    d: Vec<NodeSet>,
    er: ErasureMachine,
}

fn resolve_transition(a: &LocalMachine, t: &Transition) -> Option<(StateId, AsyncEvent, StateId)> {
    let s = a.state_id(&t.src)?;
    let d = a.state_id(&t.dst)?;
    (a.successor(s, &t.event) == Some(d)).then(|| (s, t.event.clone(), d))
}

/// Re-checks the formula named by `v` directly on its reported state,
/// transitions and witnesses. Returns true iff the violation is reproduced.
pub fn revalidate(ctx: &CheckContext, v: &Violation) -> bool {
    let (g, a_ref, b_ref) = match ctx {
        CheckContext::Implementable { g } => (*g, None, None),
        CheckContext::C1 { g, csm } => match csm.get(&v.role) {
            Some(a) => (*g, Some(a), None),
            None => return false,
        },
        CheckContext::C2Prime { g, a } => (*g, Some(*a), None),
        CheckContext::C2 { g, b, a } => (*g, Some(*a), Some(*b)),
    };
    let er = erase(g, &v.role);
    let r = match a_ref {
        Some(a) => {
            if *a.role() != v.role {
                return false;
            }
            let d = decorate_with(&er, a).0.as_slice().to_vec();
            Resolved { a: a.clone(), d, er }
        }
        None => {
            let sp = subset_construction(g, &v.role);
            Resolved {
                a: sp.machine,
                d: sp.subsets,
                er,
            }
        }
    };
    let Some(s) = r.a.state_id(&v.state) else {
        return false;
    };
    let ts: Option<Vec<_>> = v.transitions.iter().map(|t| resolve_transition(&r.a, t)).collect();
    let Some(ts) = ts else {
        return false;
    };
    if ts.iter().any(|(src, _, _)| *src != s) {
        return false;
    }
    let blocks = |n: NodeId, e: &AsyncEvent| AvailableMessages::new(g).for_role(n, &v.role).contains(e);
    let edge_from = |n: NodeId, x: &AsyncEvent| r.er.labelled(n).any(|(l, _)| l == x);

    use Condition::*;
    match v.condition {
        SendValidity | SendDecorationValidity => {
            let ([(s, x, t)], Some(n)) = (ts.as_slice(), v.witness_node) else {
                return false;
            };
            x.is_send() && r.d[*s].contains(&n) && tr_sets_with(&r.er, &NodeSet::from([n]), x, &r.d[*t]).0.is_empty()
        }
        ReceiveValidity | ReceiveDecorationValidity => {
            let ([(s, x1, _), (_, x, t2)], Some(n), Some(e)) = (ts.as_slice(), v.witness_node, &v.witness_event) else {
                return false;
            };
            let mode = if v.condition == ReceiveValidity {
                Competitors::OtherSenders
            } else {
                Competitors::AllButSender
            };
            x1.is_receive()
                && *e == x1.matching_send()
                && competes(mode, &x1.peer, x)
                && r.d[*t2].contains(&n)
                && r.er.step(&r.d[*s], x).contains(&n)
                && blocks(n, e)
        }
        TransitionExhaustivity | ReceiveExhaustivity => {
            let (Some(n), Some(x)) = (v.witness_node, &v.witness_event) else {
                return false;
            };
            (v.condition == TransitionExhaustivity || x.is_receive())
                && r.d[s].contains(&n)
                && edge_from(n, x)
                && r.a.successor(s, x).is_none()
        }
        FinalStateValidity => {
            let Some(n) = v.witness_node else { return false };
            !r.a.is_final(s) && r.d[s].contains(&n) && r.er.finals.contains(&n)
        }
        SendPreservation => {
            let Some(n) = v.witness_node else { return false };
            !r.a.has_send(s) && r.d[s].contains(&n) && classify_states(g, &v.role).0.contains(&n)
        }
        SendDecorationSubtypeValidity
        | ReceiveDecorationSubtypeValidity
        | SendSubtypePreservation
        | ReceiveSubtypeExhaustivity
        | FinalStateSubtypeValidity => {
            let Some(b) = b_ref else { return false };
            let Some(t) = v.witness_state.as_deref().and_then(|n| b.state_id(n)) else {
                return false;
            };
            let db = decorate_with(&r.er, b).0;
            let dsup: SupertypeDecorationMap = decorate_supertype_with(&db, b, &r.a);
            let node_in_t = |n: NodeId| db.get(t).contains(&n);
            match v.condition {
                SendDecorationSubtypeValidity => {
                    let [(s, x, s2)] = ts.as_slice() else { return false };
                    x.is_send()
                        && dsup.get(*s).contains(&t)
                        && b.successor(t, x).is_none_or(|t2| !dsup.get(*s2).contains(&t2))
                }
                ReceiveDecorationSubtypeValidity => {
                    let ([(s, x1, _), (_, x, s2)], Some(n), Some(e)) =
                        (ts.as_slice(), v.witness_node, &v.witness_event)
                    else {
                        return false;
                    };
                    x1.is_receive()
                        && *e == x1.matching_send()
                        && competes(Competitors::AllButSender, &x1.peer, x)
                        && dsup.get(*s2).contains(&t)
                        && dsup.get(*s).iter().any(|&t0| b.successor(t0, x) == Some(t))
                        && node_in_t(n)
                        && blocks(n, e)
                }
                SendSubtypePreservation => {
                    let Some(n) = v.witness_node else { return false };
                    !r.a.has_send(s)
                        && dsup.get(s).contains(&t)
                        && node_in_t(n)
                        && classify_states(g, &v.role).0.contains(&n)
                }
                ReceiveSubtypeExhaustivity => {
                    let (Some(n), Some(x)) = (v.witness_node, &v.witness_event) else {
                        return false;
                    };
                    x.is_receive()
                        && dsup.get(s).contains(&t)
                        && node_in_t(n)
                        && edge_from(n, x)
                        && r.a.successor(s, x).is_none()
                }
                FinalStateSubtypeValidity => {
                    let Some(n) = v.witness_node else { return false };
                    !r.a.is_final(s) && dsup.get(s).contains(&t) && node_in_t(n) && r.er.finals.contains(&n)
                }
                _ => unreachable!(),
            }
        }
    }
}
