//! End-to-end acceptance checks. Each criterion prints one `[PASS]` or
//! `[FAIL]` line; the test fails if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use mst_core::automata::subset_construction;
use mst_core::checks::{check_c1, check_c2, check_c2_prime, check_implementable, Condition, Verdict};
use mst_core::corpus::{self, Candidate};
use mst_core::decoration::decorate;
use mst_core::oracle::{bounded_trace_compare, bounded_trace_inclusion, bounded_traces, closure_check, explore, Csm};
use mst_core::syntax::generate_gn;
use mst_core::{AsyncEvent, GlobalType, LocalMachine, Role};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn machines_of(csm: &Csm) -> BTreeMap<Role, LocalMachine> {
    csm.roles()
        .iter()
        .map(|r| (r.clone(), csm.machine(r).unwrap().clone()))
        .collect()
}

fn subtype_verdicts() -> Outcome {
    let a = corpus::machine(corpus::EXTRA_BRANCH);
    let one = corpus::parse(corpus::ONE_SENDER);
    let two = corpus::parse(corpus::TWO_SENDERS);
    let (pass, t1) = timed(|| check_c2(&one, &corpus::machine(corpus::RECEIVE_ONE), &a).unwrap());
    ensure(
        pass.pass,
        format!("expected pass under one sender, got {:?}", pass.violations),
    )?;
    let (fail, t2) = timed(|| check_c2(&two, &corpus::machine(corpus::RECEIVE_CHAIN), &a).unwrap());
    let witness = fail.violations.iter().find(|v| {
        v.condition == Condition::ReceiveDecorationSubtypeValidity
            && v.witness_event == Some(AsyncEvent::send("r", "p", "m"))
            && v.witness_node.map(|n| two.subterm_text(n)) == Some("r -> p : m . 0".into())
    });
    ensure(
        witness.is_some(),
        format!("no r>p!m witness at r -> p : m . 0 in {:?}", fail.violations),
    )?;
    ensure(
        t1 < Duration::from_secs(1) && t2 < Duration::from_secs(1),
        "runtime over 1 s",
    )?;
    Ok(format!(
        "pass under one sender ({t1:?}); fail under two senders with r>p!m ({t2:?})"
    ))
}

fn deadlock_reproduction() -> Outcome {
    let g = corpus::parse(corpus::TWO_SENDERS);
    let a = corpus::machine(corpus::EXTRA_BRANCH);
    let csm = Csm::with_machines(&g, [a.clone()]);
    let (report, t) = timed(|| explore(&csm, 12, 2));
    let (p, q) = (Role::new("p"), Role::new("q"));
    let hits = report
        .deadlocks
        .iter()
        .filter(|d| a.is_final(d.raw.state_of(&csm, &p).unwrap()) && !d.raw.channel(&csm, &q, &p).is_empty())
        .count();
    ensure(
        hits >= 1,
        format!(
            "no deadlock with a final and a pending q message: {:?}",
            report.deadlocks
        ),
    )?;
    ensure(t < Duration::from_secs(5), "runtime over 5 s")?;
    Ok(format!(
        "{hits} deadlock(s) with p final and channel q->p non-empty ({t:?})"
    ))
}

fn alternative_implementations() -> Outcome {
    let cases = [
        (corpus::ECHO, corpus::ECHO_UNIVERSAL),
        (corpus::ECHO, corpus::ECHO_UNREACHABLE_SENDS),
        (corpus::ECHO, corpus::ECHO_COMPACT_Q),
        (corpus::ECHO_WITH_NOTICE, corpus::NOTICE_SPLIT),
        (corpus::ECHO_WITH_NOTICE, corpus::NOTICE_MERGED),
    ];
    for (gt, mt) in cases {
        let g = corpus::parse(gt);
        let ctx = Csm::with_machines(&g, [corpus::machine(mt)]);
        let v = check_c1(&g, &machines_of(&ctx)).unwrap();
        ensure(v.pass, format!("C1 rejects {mt}: {:?}", v.violations))?;
        let cmp = bounded_trace_compare(&Csm::canonical(&g), &ctx, 12);
        ensure(cmp.equal_prefixes, format!("traces differ: {:?}", cmp.counterexample))?;
    }
    Ok(format!("{} variants pass C1 with equal traces at k = 12", cases.len()))
}

fn refinement_asymmetry() -> Outcome {
    let g = corpus::parse(corpus::ECHO);
    let v = check_c2_prime(&g, &corpus::machine(corpus::ECHO_SEND_PRUNED)).unwrap();
    ensure(v.pass, format!("send-pruned rejected: {:?}", v.violations))?;
    let bad = corpus::machine(corpus::ECHO_RECEIVE_PRUNED);
    let v = check_c2_prime(&g, &bad).unwrap();
    ensure(
        v.has(Condition::ReceiveExhaustivity),
        format!("receive-pruned: {:?}", v.violations),
    )?;
    let r = explore(&Csm::with_machines(&g, [bad]), 12, 2);
    ensure(!r.deadlocks.is_empty(), "receive-pruned context has no deadlock")?;
    Ok(format!(
        "send-pruned refines; receive-pruned fails Receive Exhaustivity, {} deadlock(s)",
        r.deadlocks.len()
    ))
}

fn silent_receiver() -> Outcome {
    let g = corpus::parse(corpus::LOOP);
    let q = corpus::machine(corpus::SILENT_Q);
    let v = check_c2_prime(&g, &q).unwrap();
    ensure(
        v.has(Condition::ReceiveExhaustivity),
        format!("silent q: {:?}", v.violations),
    )?;
    let bound = 2;
    let csm = Csm::with_machines(&g, [q]);
    let r = explore(&csm, 12, bound);
    ensure(r.terminated.is_empty(), "some trace terminated")?;
    ensure(
        r.truncated && r.channel_high_water == bound,
        "channel p->q not saturated",
    )?;
    Ok(format!(
        "fails Receive Exhaustivity; 0 terminated traces, channel p->q holds {bound}"
    ))
}

fn coordinated_ensemble() -> Outcome {
    let g = corpus::parse(corpus::COORDINATED);
    let aq = corpus::machine(corpus::COORDINATED_Q);
    let ar = corpus::machine(corpus::COORDINATED_R);
    let v = check_c2_prime(&g, &aq).unwrap();
    ensure(
        v.has(Condition::ReceiveDecorationValidity),
        format!("q component: {:?}", v.violations),
    )?;
    let csm = Csm::with_machines(&g, [aq, ar]);
    let c1 = check_c1(&g, &machines_of(&csm)).unwrap();
    ensure(!c1.pass, "ensemble unexpectedly satisfies C1")?;
    let r = explore(&csm, 16, 2);
    ensure(r.deadlocks.is_empty(), format!("ensemble deadlocks: {:?}", r.deadlocks))?;
    let extra = bounded_trace_inclusion(&csm, &Csm::canonical(&g), 16);
    ensure(
        extra.is_none(),
        format!("ensemble trace outside the protocol: {extra:?}"),
    )?;
    Ok("q component fails Receive Decoration Validity; ensemble deadlock-free with included traces at (16,2)".into())
}

fn exponential_blowup() -> Outcome {
    let q = Role::new("q");
    let counts: Vec<usize> = (2..=8)
        .map(|n| subset_construction(&generate_gn(n), &q).machine.state_count())
        .collect();
    for w in counts.windows(2) {
        ensure(w[1] > w[0], format!("not strictly increasing: {counts:?}"))?;
        ensure(w[1] as f64 / w[0] as f64 >= 1.5, format!("ratio below 1.5: {counts:?}"))?;
    }
    let u = corpus::machine(corpus::GN_UNIVERSAL_Q);
    let (ok, t) = timed(|| (1..=12).all(|n| check_c2_prime(&generate_gn(n), &u).unwrap().pass));
    ensure(ok, "universal receiver rejected for some n")?;
    ensure(t < Duration::from_secs(5), format!("runtime {t:?}"))?;
    Ok(format!(
        "subset states n=2..8: {counts:?}; universal receiver refines n=1..12 in {t:?}"
    ))
}

fn reflexivity() -> Outcome {
    let mut checked = 0;
    let candidates = corpus::candidates();
    for (name, g) in corpus::types() {
        let canon = Csm::canonical(&g);
        let v = check_c1(&g, &machines_of(&canon)).unwrap();
        ensure(v.pass, format!("{name}: C1 on subset CSM: {:?}", v.violations))?;
        for p in g.roles() {
            let sp = subset_construction(&g, &p);
            ensure(
                decorate(&g, &sp.machine).as_slice() == sp.subsets.as_slice(),
                format!("{name}/{p}: decoration is not the identity"),
            )?;
            let v = check_c2_prime(&g, &sp.machine).unwrap();
            ensure(v.pass, format!("{name}/{p}: C2' on subset: {:?}", v.violations))?;
            let mut pool: Vec<LocalMachine> = vec![sp.machine.clone()];
            pool.extend(
                candidates
                    .iter()
                    .filter(|c| c.global == g && c.machine.role() == &p)
                    .map(|c| c.machine.clone()),
            );
            for a in &pool {
                let c2 = check_c2(&g, &sp.machine, a).unwrap();
                let c2p = check_c2_prime(&g, a).unwrap();
                ensure(
                    c2.pass == c2p.pass,
                    format!("{name}/{p}: C2 {} vs C2' {}", c2.pass, c2p.pass),
                )?;
                checked += 1;
            }
        }
    }
    Ok(format!("all corpus types; {checked} C2/C2' agreements"))
}

fn deadlock_class(v: &Verdict) -> bool {
    v.violations.iter().any(|x| x.condition.is_deadlock_class())
}

fn soundness_sweep() -> Outcome {
    let mut passes = 0;
    let mut witnessed = 0;
    let mut contexts: Vec<(String, GlobalType, LocalMachine, Option<LocalMachine>)> = corpus::candidates()
        .into_iter()
        .map(
            |Candidate {
                 name,
                 global,
                 machine,
                 supertype,
             }| (name.to_string(), global, machine, supertype),
        )
        .collect();
    for (name, g) in corpus::types() {
        for p in g.roles() {
            contexts.push((
                format!("{name}/{p}"),
                g.clone(),
                subset_construction(&g, &p).machine,
                None,
            ));
        }
    }
    for (name, g, a, sup) in &contexts {
        let canon = Csm::canonical(g);
        let ctx = Csm::with_machines(g, [a.clone()]);
        let c1 = check_c1(g, &machines_of(&ctx)).unwrap();
        let mut refinement = vec![check_c2_prime(g, a).unwrap()];
        if let Some(b) = sup {
            refinement.push(check_c2(g, b, a).unwrap());
        }
        if c1.pass || refinement.iter().any(|v| v.pass) {
            let r = explore(&ctx, 12, 2);
            ensure(r.deadlocks.is_empty(), format!("{name}: passes but deadlocks"))?;
            if c1.pass {
                let cmp = bounded_trace_compare(&canon, &ctx, 12);
                ensure(
                    cmp.equal_prefixes,
                    format!("{name}: C1 passes but traces differ: {:?}", cmp.counterexample),
                )?;
            } else {
                let extra = bounded_trace_inclusion(&ctx, &canon, 12);
                ensure(extra.is_none(), format!("{name}: refines but trace {extra:?} is new"))?;
            }
            passes += 1;
        }
        if deadlock_class(&c1) || refinement.iter().any(deadlock_class) {
            let deadlock = !explore(&ctx, 16, 2).deadlocks.is_empty();
            let diverges = !bounded_trace_compare(&canon, &ctx, 16).equal_prefixes;
            ensure(
                deadlock || diverges,
                format!("{name}: deadlock-class failure without a bounded witness"),
            )?;
            witnessed += 1;
        }
    }
    Ok(format!(
        "{passes} passing contexts confirmed; {witnessed} deadlock-class failures witnessed"
    ))
}

fn closure() -> Outcome {
    let mut csms: Vec<(String, Csm)> = corpus::types()
        .into_iter()
        .map(|(n, g)| (n, Csm::canonical(&g)))
        .collect();
    for c in corpus::candidates() {
        csms.push((c.name.to_string(), Csm::with_machines(&c.global, [c.machine])));
    }
    let mut words = 0;
    for (name, csm) in &csms {
        let traces = bounded_traces(csm, 10);
        words += traces.len();
        let bad = closure_check(&traces, 10);
        ensure(bad.is_empty(), format!("{name}: not closed: {:?}", bad.first()))?;
    }
    let hand: std::collections::BTreeSet<Vec<AsyncEvent>> =
        [vec![AsyncEvent::send("p", "q", "m"), AsyncEvent::send("r", "s", "n")]].into();
    let n = closure_check(&hand, 10).len();
    ensure(n == 1, format!("hand-built set has {n} violations"))?;
    Ok(format!(
        "{} CSMs, {words} traces closed at k = 10; hand-built set has 1 violation",
        csms.len()
    ))
}

#[test]
fn acceptance_criteria() {
    assert!(check_implementable(&corpus::parse(corpus::ECHO)).pass);
    let criteria: [(&str, Criterion); 10] = [
        ("subtype verdicts under one and two senders", subtype_verdicts),
        (
            "deadlock with a final receiver and a pending message",
            deadlock_reproduction,
        ),
        (
            "alternative implementations pass verification",
            alternative_implementations,
        ),
        ("send pruning refines, receive pruning deadlocks", refinement_asymmetry),
        ("silent receiver starves the loop", silent_receiver),
        (
            "coordinated ensemble is safe despite a rejected component",
            coordinated_ensemble,
        ),
        (
            "exponential projection, polynomial refinement check",
            exponential_blowup,
        ),
        ("reflexivity over the corpus", reflexivity),
        ("oracle soundness sweep", soundness_sweep),
        ("indistinguishability closure", closure),
    ];
    let mut failed = 0;
    for (i, (label, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("[PASS] criterion {}: {label}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] criterion {}: {label}: {why}", i + 1);
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
