//! Runs the `mst` binary on the fixtures: exit codes, JSON schemas,
//! re-validation of reported violations, and agreement of the two output
//! modes.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mst_core::automata::parse_machine;
use mst_core::checks::{revalidate, CheckContext, Verdict};
use mst_core::syntax::parse_global_type;
use mst_core::{GlobalType, LocalMachine, Role};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn mst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mst"))
        .current_dir(fixture(""))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Runs with `--json` and parses stdout as exactly one JSON document.
fn mst_json(args: &[&str]) -> (i32, Value) {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let o = mst(&full);
    let v: Value = serde_json::from_str(&stdout(&o))
        .unwrap_or_else(|e| panic!("{args:?}: stdout is not one JSON document: {e}\n{}", stdout(&o)));
    (code(&o), v)
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schema")
        .join(format!("{name}.schema.json"));
    let text = std::fs::read_to_string(&path).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_schema(name: &str, doc: &Value) {
    let v = schema(name);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{doc:#}");
}

fn global(name: &str) -> GlobalType {
    parse_global_type(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

fn machine(name: &str) -> LocalMachine {
    parse_machine(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

/// A verdict-producing invocation and the inputs it was computed from.
struct VerdictCase {
    args: &'static [&'static str],
    expect: i32,
}

const VERDICT_CASES: &[VerdictCase] = &[
    VerdictCase {
        args: &["implementable", "echo.mst"],
        expect: 0,
    },
    VerdictCase {
        args: &["implementable", "not_implementable.mst"],
        expect: 1,
    },
    VerdictCase {
        args: &[
            "verify",
            "echo.mst",
            "--machine",
            "p=echo_universal.fsm",
            "--machine",
            "q=echo_compact_q.fsm",
        ],
        expect: 0,
    },
    VerdictCase {
        args: &[
            "verify",
            "echo.mst",
            "--machine",
            "p=echo_receive_pruned.fsm",
            "--machine",
            "q=echo_compact_q.fsm",
        ],
        expect: 1,
    },
    VerdictCase {
        args: &["refine", "echo.mst", "--role", "p", "--candidate", "echo_universal.fsm"],
        expect: 0,
    },
    VerdictCase {
        args: &[
            "refine",
            "echo.mst",
            "--role",
            "p",
            "--candidate",
            "echo_receive_pruned.fsm",
        ],
        expect: 1,
    },
    VerdictCase {
        args: &["refine", "loop.mst", "--role", "q", "--candidate", "silent_q.fsm"],
        expect: 1,
    },
    VerdictCase {
        args: &[
            "refine",
            "one_sender.mst",
            "--role",
            "p",
            "--candidate",
            "extra_branch.fsm",
            "--against",
            "receive_one.fsm",
        ],
        expect: 0,
    },
    VerdictCase {
        args: &[
            "refine",
            "two_senders.mst",
            "--role",
            "p",
            "--candidate",
            "extra_branch.fsm",
            "--against",
            "receive_chain.fsm",
        ],
        expect: 1,
    },
];

/// Value following `flag` in `args`.
fn flag<'a>(args: &[&'a str], flag: &str) -> Option<&'a str> {
    args.iter().position(|a| *a == flag).map(|i| args[i + 1])
}

/// Re-evaluates every violation of `v` against the inputs named by `args`.
fn revalidate_all(args: &[&str], v: &Verdict) {
    let g = global(args[1]);
    let check = |ctx: &CheckContext| {
        for x in &v.violations {
            assert!(revalidate(ctx, x), "{args:?}: not reproduced: {x}");
        }
    };
    match args[0] {
        "implementable" => check(&CheckContext::Implementable { g: &g }),
        "verify" => {
            let csm: BTreeMap<Role, LocalMachine> = args
                .windows(2)
                .filter(|w| w[0] == "--machine")
                .map(|w| {
                    let (r, f) = w[1].split_once('=').unwrap();
                    (Role::new(r), machine(f))
                })
                .collect();
            check(&CheckContext::C1 { g: &g, csm: &csm });
        }
        "refine" => {
            let a = machine(flag(args, "--candidate").unwrap());
            match flag(args, "--against") {
                None => check(&CheckContext::C2Prime { g: &g, a: &a }),
                Some(b) => check(&CheckContext::C2 {
                    g: &g,
                    b: &machine(b),
                    a: &a,
                }),
            }
        }
        other => panic!("not a verdict verb: {other}"),
    }
}

#[test]
fn verdict_exit_codes_and_schema() {
    for case in VERDICT_CASES {
        let (c, doc) = mst_json(case.args);
        assert_eq!(c, case.expect, "{:?}: {doc:#}", case.args);
        assert_schema("verdict", &doc);
        assert_eq!(doc["pass"], Value::Bool(case.expect == 0));
    }
}

#[test]
fn failing_verdicts_revalidate() {
    for case in VERDICT_CASES.iter().filter(|c| c.expect == 1) {
        let (_, doc) = mst_json(case.args);
        let v: Verdict = serde_json::from_value(doc).unwrap();
        assert!(!v.violations.is_empty());
        revalidate_all(case.args, &v);
    }
}

#[test]
fn human_and_json_verdicts_agree() {
    for case in VERDICT_CASES {
        let human = mst(case.args);
        let (c, doc) = mst_json(case.args);
        assert_eq!(code(&human), c, "{:?}", case.args);
        let v: Verdict = serde_json::from_value(doc).unwrap();
        let text = stdout(&human);
        let mut lines = text.lines();
        let head = lines.next().unwrap();
        if v.pass {
            assert_eq!(head, "pass");
        } else {
            assert_eq!(head, format!("fail: {} violation(s)", v.violations.len()));
        }
        let rest: Vec<String> = lines.map(|l| l.trim().to_string()).collect();
        let expected: Vec<String> = v.violations.iter().map(ToString::to_string).collect();
        assert_eq!(rest, expected, "{:?}", case.args);
    }
}

#[test]
fn subtype_witness_names_the_second_sender() {
    let (c, doc) = mst_json(VERDICT_CASES[8].args);
    assert_eq!(c, 1);
    let v = &doc["violations"][0];
    assert_eq!(v["condition"], "ReceiveDecorationSubtypeValidity");
    assert_eq!(v["witness_event"], "r>p!m");
    assert_eq!(v["witness_state"], "b1");
}

#[test]
fn simulate_reports() {
    let deadlocking = ["simulate", "two_senders.mst", "--machine", "p=extra_branch.fsm"];
    let (c, doc) = mst_json(&deadlocking);
    assert_eq!(c, 1);
    assert_schema("simulate", &doc);
    let d = &doc["deadlocks"][0];
    assert_eq!(d["states"]["p"], "a2");
    assert_eq!(d["channels"]["q->p"], serde_json::json!(["m"]));
    let human = stdout(&mst(&deadlocking));
    assert!(human.contains("deadlocks: 1\n"), "{human}");
    assert!(human.contains("trace: q>p!m r>p!m p<r?m"), "{human}");

    let (c, doc) = mst_json(&["simulate", "echo.mst"]);
    assert_eq!(c, 0);
    assert_schema("simulate", &doc);
    assert_eq!(doc["terminated"].as_array().unwrap().len(), 2);

    let (c, doc) = mst_json(&["simulate", "loop.mst", "--depth", "4", "--channel", "1"]);
    assert_eq!(c, 0);
    assert_schema("simulate", &doc);
    assert_eq!(doc["truncated"], true);
    assert_eq!(doc["channel_high_water"], 1);
}

#[test]
fn informational_verbs_match_schemas() {
    let cases: &[(&str, &[&str])] = &[
        ("parse", &["parse", "echo.mst"]),
        ("parse", &["parse", "self_message.mst"]),
        ("project", &["project", "echo.mst"]),
        ("project", &["project", "loop.mst", "--role", "q"]),
        ("decorate", &["decorate", "echo.mst", "echo_universal.fsm"]),
        ("avail", &["avail", "two_senders.mst", "--role", "p", "--node", "0"]),
        ("gen-gn", &["gen-gn", "3"]),
    ];
    for (name, args) in cases {
        let (_, doc) = mst_json(args);
        assert_schema(name, &doc);
    }
}

#[test]
fn informational_outputs() {
    let (c, doc) = mst_json(&["avail", "two_senders.mst", "--role", "p", "--node", "0"]);
    assert_eq!(c, 0);
    assert_eq!(doc["messages"], serde_json::json!(["q>p!m", "r>p!m"]));
    assert_eq!(
        stdout(&mst(&["avail", "two_senders.mst", "--role", "p", "--node", "1"])),
        "r>p!m\n"
    );

    let (c, doc) = mst_json(&["parse", "self_message.mst"]);
    assert_eq!(c, 1);
    assert_eq!(doc["violations"][0]["rule"], "SelfMessage");

    let (_, doc) = mst_json(&["project", "echo.mst", "--role", "p"]);
    let states = doc["machines"][0]["states"].as_array().unwrap();
    assert_eq!(states.len(), 5);
    assert_eq!(states[0]["nodes"], serde_json::json!([0]));

    let projected = stdout(&mst(&["project", "echo.mst", "--role", "q"]));
    assert_eq!(parse_machine(&projected).unwrap().state_count(), 5);

    let human = stdout(&mst(&["decorate", "echo.mst", "echo_universal.fsm"]));
    assert!(human.starts_with("s0: {0}\n"), "{human}");
    assert!(human.contains("u: {1, 2, 3, 4}\n"), "{human}");

    let text = stdout(&mst(&["gen-gn", "2"]));
    assert_eq!(parse_global_type(&text).unwrap(), mst_core::syntax::generate_gn(2));
}

#[test]
fn input_errors_exit_two() {
    let mut wrong_role = tempfile::NamedTempFile::new().unwrap();
    wrong_role.write_all(b"role q\nstate s0 initial final\n").unwrap();
    let wrong_role = wrong_role.path().to_str().unwrap().to_string();
    let bound = format!("p={wrong_role}");
    let cases: Vec<Vec<&str>> = vec![
        vec!["parse", "malformed.mst"],
        vec!["parse", "missing.mst"],
        vec!["implementable", "self_message.mst"],
        vec!["project", "echo.mst", "--role", "z"],
        vec!["verify", "echo.mst", "--machine", "p=echo_universal.fsm"],
        vec![
            "verify",
            "echo.mst",
            "--machine",
            "p=no_initial.fsm",
            "--machine",
            "q=echo_compact_q.fsm",
        ],
        vec![
            "verify",
            "echo.mst",
            "--machine",
            "p",
            "--machine",
            "q=echo_compact_q.fsm",
        ],
        vec![
            "verify",
            "echo.mst",
            "--machine",
            bound.as_str(),
            "--machine",
            "q=echo_compact_q.fsm",
        ],
        vec!["refine", "echo.mst", "--role", "q", "--candidate", "echo_universal.fsm"],
        vec![
            "refine",
            "two_senders.mst",
            "--role",
            "p",
            "--candidate",
            "extra_branch.fsm",
            "--against",
            "silent_q.fsm",
        ],
        vec!["decorate", "echo.mst", "missing.fsm"],
        vec!["avail", "echo.mst", "--role", "p", "--node", "99"],
        vec!["avail", "echo.mst", "--role", "z", "--node", "0"],
        vec!["simulate", "echo.mst", "--machine", "r=silent_q.fsm"],
        vec!["gen-gn", "0"],
    ];
    for args in &cases {
        let o = mst(args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "), "{args:?}");
        let (c, doc) = mst_json(args);
        assert_eq!(c, 2, "{args:?}");
        assert_schema("error", &doc);
    }
    // usage errors from the argument parser
    assert_eq!(code(&mst(&["refine", "echo.mst", "--role", "p"])), 2);
    assert_eq!(code(&mst(&["verify", "echo.mst"])), 2);
    assert_eq!(code(&mst(&["no-such-verb"])), 2);
}

#[test]
fn quiet_keeps_exit_codes() {
    for case in VERDICT_CASES {
        let mut args = vec!["--quiet"];
        args.extend_from_slice(case.args);
        let o = mst(&args);
        assert_eq!(code(&o), case.expect, "{:?}", case.args);
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn seed_is_accepted_and_ignored() {
    let a = stdout(&mst(&["--seed", "7", "simulate", "echo.mst"]));
    let b = stdout(&mst(&["simulate", "echo.mst"]));
    assert_eq!(a, b);
}

#[test]
fn implementability_precheck_warns() {
    let o = mst(&[
        "verify",
        "not_implementable.mst",
        "--check-implementable",
        "--machine",
        "p=echo_universal.fsm",
    ]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("warning: the global type is not implementable"), "{err}");
    let o = mst(&[
        "verify",
        "echo.mst",
        "--check-implementable",
        "--machine",
        "p=echo_universal.fsm",
        "--machine",
        "q=echo_compact_q.fsm",
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stderr.is_empty());
}
