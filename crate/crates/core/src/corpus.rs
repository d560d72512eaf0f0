//! Worked examples: global types and hand-built candidate machines used by
//! the test suites and the command-line fixtures.

use crate::automata::{parse_machine, LocalMachine};
use crate::syntax::{generate_gn, parse_global_type, GlobalType};

/// One exchange.
pub const SINGLE: &str = "p -> q : m . 0";

/// `p` picks a message and `q` echoes it back.
pub const ECHO: &str = "(p->q:b . q->p:b . 0 + p->q:m . q->p:m . 0)";

/// As [`ECHO`], with a notice to `r` between the choice and the echo.
pub const ECHO_WITH_NOTICE: &str = "(p->q:b . p->r:o . q->p:b . 0 + p->q:m . p->r:o . q->p:m . 0)";

/// `p` sends forever.
pub const LOOP: &str = "mu t . p -> q : m . t";

/// `p` hears from `q`, then from `r`.
pub const TWO_SENDERS: &str = "q->p:m . r->p:m . 0";

/// `p` hears from `q` only.
pub const ONE_SENDER: &str = "q->p:m . 0";

/// `q` and `r` each hear from two others in an order fixed by `r`'s choice.
pub const COORDINATED: &str = "p->q:m . (r->q:b . p->r:m . (q->r:b . 0 + q->r:o . 0) \
     + r->q:o . p->r:m . (q->r:b . 0 + q->r:o . 0))";

/// `p` may keep sending `o` or stop with `b`.
pub const LOOP_OR_STOP: &str = "mu t . (p->q:o . t + p->q:b . 0)";

/// Hand-written implementable types exercising relays, sender-driven
/// choice to different receivers, loops with exits, and independent pairs.
pub const VARIANTS: [&str; 10] = [
    "p->q:a . q->r:b . r->p:c . 0",
    "(p->q:a . 0 + p->r:b . 0)",
    "mu t . (p->q:a . q->p:ack . t + p->q:done . 0)",
    "p->q:x . (q->r:y . 0 + q->r:z . r->p:w . 0)",
    "mu t . p->q:a . q->r:b . t",
    "(p->q:a . r->q:b . 0 + p->q:c . r->q:b . 0)",
    "mu t . (p->q:req . q->p:resp . t + p->r:stop . r->q:stop . 0)",
    "p->q:a . p->q:b . q->p:c . 0",
    "(p->q:a . q->r:a . 0 + p->q:b . q->r:b . 0)",
    "p->q:m . r->s:n . 0",
];

/// Not implementable: `r` must decide whether to send without knowing `p`'s
/// choice.
pub const NOT_IMPLEMENTABLE: &str = "(p->q:a . r->q:b . 0 + p->q:c . 0)";

/// Sizes of the exponential family included in the corpus.
pub const GN_SIZES: [usize; 2] = [1, 2];

pub fn parse(text: &str) -> GlobalType {
    parse_global_type(text).expect("corpus types parse")
}

pub fn machine(text: &str) -> LocalMachine {
    parse_machine(text).expect("corpus machines parse")
}

/// Every implementable corpus type with a display name.
pub fn types() -> Vec<(String, GlobalType)> {
    let mut out: Vec<(String, GlobalType)> = [
        ("single", SINGLE),
        ("echo", ECHO),
        ("echo-with-notice", ECHO_WITH_NOTICE),
        ("loop", LOOP),
        ("two-senders", TWO_SENDERS),
        ("one-sender", ONE_SENDER),
        ("coordinated", COORDINATED),
        ("loop-or-stop", LOOP_OR_STOP),
    ]
    .iter()
    .map(|(n, t)| (n.to_string(), parse(t)))
    .collect();
    for n in GN_SIZES {
        out.push((format!("gn-{n}"), generate_gn(n)));
    }
    for (i, t) in VARIANTS.iter().enumerate() {
        out.push((format!("variant-{}", i + 1), parse(t)));
    }
    out
}

// ---------------------------------------------------------------------------
// Machines

/// Receives from `q` or `r`; both targets are final and the second still
/// accepts `q`'s message.
pub const EXTRA_BRANCH: &str = "role p
state a0 initial
state a1 final
state a2 final
a0 p<q?m a1
a1 p<r?m a1
a0 p<r?m a2
";

/// Receives one message from `q`.
pub const RECEIVE_ONE: &str = "role p
state b0 initial
state b1 final
b0 p<q?m b1
";

/// Receives from `q`, then from `r`.
pub const RECEIVE_CHAIN: &str = "role p
state b0 initial
state b1
state b2 final
b0 p<q?m b1
b1 p<r?m b2
";

/// For [`ECHO`]: after either send, one final state accepting either reply.
pub const ECHO_UNIVERSAL: &str = "role p
state s0 initial
state u final
s0 p>q!b u
s0 p>q!m u
u p<q?b u
u p<q?m u
";

/// [`ECHO_UNIVERSAL`] plus sends out of a state no word reaches.
pub const ECHO_UNREACHABLE_SENDS: &str = "role p
state s0 initial
state u final
state z
s0 p>q!b u
s0 p>q!m u
u p<q?b u
u p<q?m u
z p>q!m u
z p>q!b z
";

/// For [`ECHO`], role `q`: both replies lead to one shared final state.
pub const ECHO_COMPACT_Q: &str = "role q
state q0 initial
state q1
state q2
state f final
q0 q<p?b q1
q0 q<p?m q2
q1 q>p!b f
q2 q>p!m f
";

/// For [`ECHO`]: only ever sends `b`.
pub const ECHO_SEND_PRUNED: &str = "role p
state s0 initial
state s1
state s2 final
s0 p>q!b s1
s1 p<q?b s2
";

/// For [`ECHO`]: after sending `m` it never receives the reply.
pub const ECHO_RECEIVE_PRUNED: &str = "role p
state s0 initial
state s1
state s2 final
state s3
s0 p>q!b s1
s1 p<q?b s2
s0 p>q!m s3
";

/// For [`ECHO_WITH_NOTICE`]: separate states until the notice, then one
/// receive state.
pub const NOTICE_SPLIT: &str = "role p
state s0 initial
state s1
state s2
state u
state f final
s0 p>q!b s1
s0 p>q!m s2
s1 p>r!o u
s2 p>r!o u
u p<q?b f
u p<q?m f
";

/// For [`ECHO_WITH_NOTICE`]: the two pre-notice states merged.
pub const NOTICE_MERGED: &str = "role p
state s0 initial
state s1
state u
state f final
s0 p>q!b s1
s0 p>q!m s1
s1 p>r!o u
u p<q?b f
u p<q?m f
";

/// For [`LOOP`], role `q`: never receives.
pub const SILENT_Q: &str = "role q
state s0 initial
";

/// For [`COORDINATED`], role `q`: may take `r`'s `b` before `p`'s `m`, and
/// only ever sends `b`.
pub const COORDINATED_Q: &str = "role q
state q0 initial
state q1
state q2
state q3 final
q0 q<p?m q1
q0 q<r?b q2
q1 q<r?b q2
q1 q<r?o q2
q2 q>r!b q3
";

/// For [`COORDINATED`], role `r`: only ever sends `o`, and may take `q`'s
/// `o` before `p`'s `m`.
pub const COORDINATED_R: &str = "role r
state s0 initial
state s1
state s2
state s3 final
s0 r>q!o s1
s1 r<p?m s2
s1 r<q?o s3
s2 r<q?b s3
s2 r<q?o s3
";

/// For [`LOOP_OR_STOP`]: stops at once.
pub const STOP_AT_ONCE: &str = "role p
state s0 initial
state s1 final
s0 p>q!b s1
";

/// For the exponential family, role `q`: accepts `a` and `b` forever.
pub const GN_UNIVERSAL_Q: &str = "role q
state u0 initial final
state u1 final
u0 q<p?a u1
u0 q<p?b u1
u1 q<p?a u1
u1 q<p?b u1
";

/// A candidate machine for one role of a corpus type, optionally with the
/// supertype it is meant to replace.
pub struct Candidate {
    pub name: &'static str,
    pub global: GlobalType,
    pub machine: LocalMachine,
    pub supertype: Option<LocalMachine>,
}

pub fn candidates() -> Vec<Candidate> {
    let c = |name, g: &str, m: &str, sup: Option<&str>| Candidate {
        name,
        global: parse(g),
        machine: machine(m),
        supertype: sup.map(machine),
    };
    let mut out = vec![
        c("echo-universal", ECHO, ECHO_UNIVERSAL, None),
        c("echo-unreachable-sends", ECHO, ECHO_UNREACHABLE_SENDS, None),
        c("echo-compact-q", ECHO, ECHO_COMPACT_Q, None),
        c("echo-send-pruned", ECHO, ECHO_SEND_PRUNED, None),
        c("echo-receive-pruned", ECHO, ECHO_RECEIVE_PRUNED, None),
        c("notice-split", ECHO_WITH_NOTICE, NOTICE_SPLIT, None),
        c("notice-merged", ECHO_WITH_NOTICE, NOTICE_MERGED, None),
        c("loop-silent-q", LOOP, SILENT_Q, None),
        c("coordinated-q", COORDINATED, COORDINATED_Q, None),
        c("coordinated-r", COORDINATED, COORDINATED_R, None),
        c("one-sender-extra-branch", ONE_SENDER, EXTRA_BRANCH, Some(RECEIVE_ONE)),
        c(
            "two-senders-extra-branch",
            TWO_SENDERS,
            EXTRA_BRANCH,
            Some(RECEIVE_CHAIN),
        ),
        c("loop-or-stop-at-once", LOOP_OR_STOP, STOP_AT_ONCE, None),
    ];
    for n in GN_SIZES {
        out.push(Candidate {
            name: "gn-universal-q",
            global: generate_gn(n),
            machine: machine(GN_UNIVERSAL_Q),
            supertype: None,
        });
    }
    out
}
