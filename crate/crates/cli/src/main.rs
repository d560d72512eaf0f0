//! `mst`: command-line front end for projection, implementability,
//! protocol verification and refinement checks, and bounded simulation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mst_core::automata::{parse_machine, subset_construction, LocalMachine};
use mst_core::checks::{check_c1, check_c2, check_c2_prime, check_implementable, Verdict};
use mst_core::decoration::decorate;
use mst_core::messages::m_role;
use mst_core::oracle::{explore, Csm, ExplorationReport};
use mst_core::syntax::{generate_gn, parse_global_type, validate};
use mst_core::{GlobalType, NodeId, Role};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "mst", version, about = "Check local implementations of multiparty protocols")]
struct Cli {
    /// Emit one JSON document on standard output.
    #[arg(long, global = true)]
    json: bool,
    /// Suppress human-readable output; the exit code carries the result.
    #[arg(long, global = true)]
    quiet: bool,
    /// Reserved; every algorithm is deterministic.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a global type.
    Parse { global: PathBuf },
    /// Print the subset construction of each role, or of one role.
    Project {
        global: PathBuf,
        #[arg(long)]
        role: Option<String>,
    },
    /// Check that the subset constructions implement the global type.
    Implementable { global: PathBuf },
    /// Check that a whole CSM implements the global type.
    Verify {
        global: PathBuf,
        /// A machine for one role, as ROLE=FILE; give one per role.
        #[arg(long = "machine", value_name = "ROLE=FILE", required = true)]
        machines: Vec<String>,
        /// Check implementability first and warn if it fails.
        #[arg(long)]
        check_implementable: bool,
    },
    /// Check that a candidate can replace one role's machine.
    Refine(RefineArgs),
    /// Print the global states each machine state stands for.
    Decorate { global: PathBuf, machine: PathBuf },
    /// Print the messages that may be pending while a role is blocked.
    Avail {
        global: PathBuf,
        #[arg(long)]
        role: String,
        #[arg(long)]
        node: usize,
    },
    /// Explore the configurations of a CSM up to the given bounds.
    Simulate {
        global: PathBuf,
        /// Replace one role's machine, as ROLE=FILE; other roles use their
        /// subset constructions.
        #[arg(long = "machine", value_name = "ROLE=FILE")]
        machines: Vec<String>,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = 2)]
        channel: usize,
    },
    /// Print a member of the family whose projections grow exponentially.
    GenGn { n: usize },
}

#[derive(Args)]
struct RefineArgs {
    global: PathBuf,
    #[arg(long)]
    role: String,
    /// The machine replacing the role.
    #[arg(long)]
    candidate: PathBuf,
    /// The machine being replaced; defaults to the subset construction.
    #[arg(long)]
    against: Option<PathBuf>,
}

/// Result of a successful run: whether the check passed, and both renderings.
struct Report {
    pass: bool,
    json: Value,
    human: String,
}

impl Report {
    fn ok(json: Value, human: String) -> Report {
        Report {
            pass: true,
            json,
            human,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(report) => {
            if cli.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report.json).expect("reports serialize")
                );
            } else if !cli.quiet {
                print!("{}", report.human);
            }
            ExitCode::from(if report.pass { 0 } else { 1 })
        }
        Err(e) => {
            let message = format!("{e:#}");
            if cli.json {
                println!("{}", json!({ "error": message }));
            } else {
                eprintln!("error: {message}");
            }
            ExitCode::from(2)
        }
    }
}

fn run(command: &Command) -> Result<Report> {
    match command {
        Command::Parse { global } => parse(global),
        Command::Project { global, role } => project(global, role.as_deref()),
        Command::Implementable { global } => {
            let g = load_global(global)?;
            Ok(verdict_report(check_implementable(&g)))
        }
        Command::Verify {
            global,
            machines,
            check_implementable: pre,
        } => verify(global, machines, *pre),
        Command::Refine(args) => refine(args),
        Command::Decorate { global, machine } => decorations(global, machine),
        Command::Avail { global, role, node } => avail(global, role, *node),
        Command::Simulate {
            global,
            machines,
            depth,
            channel,
        } => simulate(global, machines, *depth, *channel),
        Command::GenGn { n } => gen_gn(*n),
    }
}

// ---------------------------------------------------------------------------
// Inputs

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse_file(path: &Path) -> Result<GlobalType> {
    parse_global_type(&read(path)?).with_context(|| format!("{}", path.display()))
}

/// A parsed global type that also passes validation.
fn load_global(path: &Path) -> Result<GlobalType> {
    let g = parse_file(path)?;
    let violations = validate(&g);
    if let Some(v) = violations.first() {
        bail!("{}: invalid global type: {v}", path.display());
    }
    Ok(g)
}

fn load_machine(path: &Path) -> Result<LocalMachine> {
    parse_machine(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn known_role(g: &GlobalType, name: &str) -> Result<Role> {
    let r = Role::new(name);
    if !g.roles().contains(&r) {
        bail!("role `{name}` does not occur in the global type");
    }
    Ok(r)
}

/// Reads `ROLE=FILE` bindings; each machine must be declared for its role.
fn load_bindings(g: &GlobalType, bindings: &[String]) -> Result<BTreeMap<Role, LocalMachine>> {
    let mut out = BTreeMap::new();
    for b in bindings {
        let (name, file) = b
            .split_once('=')
            .ok_or_else(|| anyhow!("expected ROLE=FILE, found `{b}`"))?;
        let role = known_role(g, name)?;
        let m = load_machine(Path::new(file))?;
        if *m.role() != role {
            bail!("{file} declares role `{}` but is bound to `{role}`", m.role());
        }
        if out.insert(role.clone(), m).is_some() {
            bail!("role `{role}` is bound twice");
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Verbs

fn verdict_report(v: Verdict) -> Report {
    let mut human = String::new();
    if v.pass {
        human.push_str("pass\n");
    } else {
        writeln!(human, "fail: {} violation(s)", v.violations.len()).unwrap();
        for x in &v.violations {
            writeln!(human, "  {x}").unwrap();
        }
    }
    Report {
        pass: v.pass,
        json: serde_json::to_value(&v).expect("verdicts serialize"),
        human,
    }
}

fn parse(path: &Path) -> Result<Report> {
    let g = parse_file(path)?;
    let violations = validate(&g);
    let roles: Vec<String> = g.roles().iter().map(ToString::to_string).collect();
    let mut human = format!("{g}\nnodes: {}\nroles: {}\n", g.node_count(), roles.join(" "));
    for v in &violations {
        writeln!(human, "invalid: {v}").unwrap();
    }
    Ok(Report {
        pass: violations.is_empty(),
        json: json!({
            "valid": violations.is_empty(),
            "type": g.to_string(),
            "node_count": g.node_count(),
            "roles": roles,
            "violations": violations,
        }),
        human,
    })
}

#[derive(Serialize)]
struct StateJson {
    name: String,
    initial: bool,
    #[serde(rename = "final")]
    is_final: bool,
    nodes: Vec<NodeId>,
}

#[derive(Serialize)]
struct TransitionJson {
    src: String,
    event: String,
    dst: String,
}

fn project(path: &Path, role: Option<&str>) -> Result<Report> {
    let g = load_global(path)?;
    let roles = match role {
        Some(r) => vec![known_role(&g, r)?],
        None => g.roles().into_iter().collect(),
    };
    let mut machines = Vec::new();
    let mut human = String::new();
    for p in roles {
        let sp = subset_construction(&g, &p);
        let a = &sp.machine;
        if !human.is_empty() {
            human.push('\n');
        }
        human.push_str(&a.to_text());
        let states: Vec<StateJson> = a
            .states()
            .map(|s| StateJson {
                name: a.name(s).to_string(),
                initial: s == a.initial(),
                is_final: a.is_final(s),
                nodes: sp.subsets[s].iter().copied().collect(),
            })
            .collect();
        let transitions: Vec<TransitionJson> = a
            .transitions()
            .map(|(s, x, t)| TransitionJson {
                src: a.name(s).to_string(),
                event: x.to_string(),
                dst: a.name(t).to_string(),
            })
            .collect();
        machines.push(json!({ "role": p, "states": states, "transitions": transitions }));
    }
    Ok(Report::ok(json!({ "machines": machines }), human))
}

fn verify(path: &Path, bindings: &[String], pre: bool) -> Result<Report> {
    let g = load_global(path)?;
    if pre && !check_implementable(&g).pass {
        eprintln!("warning: the global type is not implementable; the verdict below assumes it is");
    }
    let csm = load_bindings(&g, bindings)?;
    let v = check_c1(&g, &csm)?;
    Ok(verdict_report(v))
}

fn refine(args: &RefineArgs) -> Result<Report> {
    let g = load_global(&args.global)?;
    let p = known_role(&g, &args.role)?;
    let a = load_machine(&args.candidate)?;
    if *a.role() != p {
        bail!("candidate declares role `{}` but --role is `{p}`", a.role());
    }
    let v = match &args.against {
        None => check_c2_prime(&g, &a)?,
        Some(b) => check_c2(&g, &load_machine(b)?, &a)?,
    };
    Ok(verdict_report(v))
}

fn decorations(global: &Path, machine: &Path) -> Result<Report> {
    let g = load_global(global)?;
    let a = load_machine(machine)?;
    known_role(&g, a.role().as_str())?;
    let d = decorate(&g, &a);
    let mut human = String::new();
    let mut states = Vec::new();
    for (s, set) in d.iter() {
        let ids: Vec<String> = set.iter().map(ToString::to_string).collect();
        writeln!(human, "{}: {{{}}}", a.name(s), ids.join(", ")).unwrap();
        let mut nodes = Vec::new();
        for &n in set {
            let head = g.head_text(n);
            writeln!(human, "  {n}: {head}").unwrap();
            nodes.push(json!({ "id": n, "head": head }));
        }
        states.push(json!({ "state": a.name(s), "nodes": nodes }));
    }
    Ok(Report::ok(json!({ "role": a.role(), "states": states }), human))
}

fn avail(global: &Path, role: &str, node: usize) -> Result<Report> {
    let g = load_global(global)?;
    let p = known_role(&g, role)?;
    let set = m_role(&g, NodeId(node), &p)?;
    let messages: Vec<String> = set.iter().map(ToString::to_string).collect();
    let human = messages.iter().map(|m| format!("{m}\n")).collect();
    Ok(Report::ok(
        json!({ "role": p, "node": node, "messages": messages }),
        human,
    ))
}

fn simulate(global: &Path, bindings: &[String], depth: usize, channel: usize) -> Result<Report> {
    let g = load_global(global)?;
    let csm = Csm::with_machines(&g, load_bindings(&g, bindings)?.into_values());
    let report = explore(&csm, depth, channel);
    let human = simulation_text(&report);
    Ok(Report {
        pass: report.deadlocks.is_empty(),
        json: serde_json::to_value(&report).expect("reports serialize"),
        human,
    })
}

fn simulation_text(r: &ExplorationReport) -> String {
    let words = |w: &[mst_core::AsyncEvent]| w.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    writeln!(out, "reachable configurations: {}", r.reachable).unwrap();
    writeln!(
        out,
        "terminated traces: {}{}",
        r.terminated.len(),
        if r.terminated_capped { " (capped)" } else { "" }
    )
    .unwrap();
    writeln!(out, "deadlocks: {}", r.deadlocks.len()).unwrap();
    writeln!(out, "truncated: {}", if r.truncated { "yes" } else { "no" }).unwrap();
    writeln!(out, "channel high water: {}", r.channel_high_water).unwrap();
    for (i, d) in r.deadlocks.iter().enumerate() {
        let states: Vec<String> = d.configuration.states.iter().map(|(p, s)| format!("{p}={s}")).collect();
        let channels: Vec<String> = d
            .configuration
            .channels
            .iter()
            .map(|(c, ms)| {
                format!(
                    "{c}: {}",
                    ms.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
                )
            })
            .collect();
        writeln!(out, "deadlock {}:", i + 1).unwrap();
        writeln!(out, "  states: {}", states.join(" ")).unwrap();
        writeln!(out, "  channels: {}", channels.join("; ")).unwrap();
        writeln!(out, "  trace: {}", words(&d.trace)).unwrap();
    }
    out
}

fn gen_gn(n: usize) -> Result<Report> {
    if n == 0 {
        bail!("n must be at least 1");
    }
    let g = generate_gn(n);
    let text = g.to_string();
    Ok(Report::ok(
        json!({ "n": n, "type": text, "node_count": g.node_count() }),
        format!("{text}\n"),
    ))
}
