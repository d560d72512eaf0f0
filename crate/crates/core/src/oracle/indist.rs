use std::collections::BTreeSet;

use crate::automata::AsyncEvent;

/// Whether the adjacent pair `x · y`, preceded by `prefix`, may be swapped
/// to `y · x` by a single rule instance read left to right.
fn swappable(prefix: &[AsyncEvent], x: &AsyncEvent, y: &AsyncEvent) -> bool {
    match (x.is_send(), y.is_send()) {
        // two sends from distinct senders
        (true, true) => x.active != y.active,
        // two receives by distinct receivers
        (false, false) => x.active != y.active,
        (true, false) => {
            let (p, q) = (&x.active, &x.peer);
            let (s, r) = (&y.active, &y.peer);
            if p != s && (p != r || q != s) {
                true
            } else if p == r && q == s {
                // receive on the channel just written: only if the channel
                // already held an older message
                let sent = prefix
                    .iter()
                    .filter(|e| e.is_send() && e.active == *p && e.peer == *q)
                    .count();
                let received = prefix
                    .iter()
                    .filter(|e| e.is_receive() && e.active == *q && e.peer == *p)
                    .count();
                sent > received
            } else {
                false
            }
        }
        (false, true) => false,
    }
}

/// Words obtained from `w` by one swap of adjacent independent events, in
/// either direction of the rules.
pub fn indist_neighbors(w: &[AsyncEvent]) -> BTreeSet<Vec<AsyncEvent>> {
    let mut out = BTreeSet::new();
    for i in 0..w.len().saturating_sub(1) {
        let prefix = &w[..i];
        let (a, b) = (&w[i], &w[i + 1]);
        if swappable(prefix, a, b) || swappable(prefix, b, a) {
            let mut v = w.to_vec();
            v.swap(i, i + 1);
            out.insert(v);
        }
    }
    out
}

/// Pairs `(w, w')` with `w` in `traces`, `w'` a neighbor of `w` of length at
/// most `k`, and `w'` missing from `traces`.
pub fn closure_check(traces: &BTreeSet<Vec<AsyncEvent>>, k: usize) -> Vec<(Vec<AsyncEvent>, Vec<AsyncEvent>)> {
    let mut out = Vec::new();
    for w in traces {
        for n in indist_neighbors(w) {
            if n.len() <= k && !traces.contains(&n) {
                out.push((w.clone(), n));
            }
        }
    }
    out
}
