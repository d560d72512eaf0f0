//! Global types: abstract syntax with positional node identities, a text
//! parser, well-formedness validation and the `G_n` family generator.
//!
//! A [`GlobalType`] is stored as a flat arena of [`Node`]s numbered in
//! pre-order, so every syntactic occurrence of a subterm has its own
//! [`NodeId`]. Two equal subterms at different positions are different
//! nodes, and therefore different states of the global automaton.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::automata::AsyncEvent;

macro_rules! name_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(name: impl AsRef<str>) -> Self {
                $name(Arc::from(name.as_ref()))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name::new(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Ok($name::new(s))
            }
        }
    };
}

name_type!(
    /// A protocol participant.
    Role
);
name_type!(
    /// A message label.
    Message
);

/// Position of a node in the pre-order numbering of a global type.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    pub receiver: Role,
    pub message: Message,
    pub cont: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    End,
    Choice {
        sender: Role,
        branches: Vec<Branch>,
    },
    Rec {
        var: String,
        body: NodeId,
    },
    /// `binder` is the innermost enclosing `Rec` with the same name, if any.
    Var {
        var: String,
        binder: Option<NodeId>,
    },
}

/// Tree form of a global type, used to build and compare types
/// independently of node numbering.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    End,
    Choice {
        sender: Role,
        branches: Vec<(Role, Message, Term)>,
    },
    Rec(String, Box<Term>),
    Var(String),
}

impl Term {
    /// Singleton choice `p -> q : m . cont`.
    pub fn send(p: &str, q: &str, m: &str, cont: Term) -> Term {
        Term::Choice {
            sender: Role::new(p),
            branches: vec![(Role::new(q), Message::new(m), cont)],
        }
    }

    pub fn choice(p: &str, branches: Vec<(&str, &str, Term)>) -> Term {
        Term::Choice {
            sender: Role::new(p),
            branches: branches
                .into_iter()
                .map(|(q, m, t)| (Role::new(q), Message::new(m), t))
                .collect(),
        }
    }

    pub fn rec(var: &str, body: Term) -> Term {
        Term::Rec(var.to_string(), Box::new(body))
    }

    pub fn var(var: &str) -> Term {
        Term::Var(var.to_string())
    }
}

/// A global type in arena form. The root is always node 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalType {
    nodes: Vec<Node>,
}

impl GlobalType {
    /// Flattens a term into pre-order nodes, resolving each variable to its
    /// innermost binder. Unbound variables are kept (with no binder) so that
    /// [`validate`] can report them.
    pub fn from_term(term: &Term) -> GlobalType {
        fn go(t: &Term, nodes: &mut Vec<Node>, scope: &mut Vec<(String, NodeId)>) -> NodeId {
            let id = NodeId(nodes.len());
            nodes.push(Node::End);
            let node = match t {
                Term::End => Node::End,
                Term::Choice { sender, branches } => {
                    let mut out = Vec::with_capacity(branches.len());
                    for (q, m, cont) in branches {
                        let cont = go(cont, nodes, scope);
                        out.push(Branch {
                            receiver: q.clone(),
                            message: m.clone(),
                            cont,
                        });
                    }
                    Node::Choice {
                        sender: sender.clone(),
                        branches: out,
                    }
                }
                Term::Rec(var, body) => {
                    scope.push((var.clone(), id));
                    let body = go(body, nodes, scope);
                    scope.pop();
                    Node::Rec { var: var.clone(), body }
                }
                Term::Var(var) => Node::Var {
                    var: var.clone(),
                    binder: scope.iter().rev().find(|(v, _)| v == var).map(|(_, b)| *b),
                },
            };
            nodes[id.0] = node;
            id
        }
        let mut nodes = Vec::new();
        go(term, &mut nodes, &mut Vec::new());
        GlobalType { nodes }
    }

    pub fn to_term(&self) -> Term {
        self.subterm(self.root())
    }

    pub fn subterm(&self, id: NodeId) -> Term {
        match self.node(id) {
            Node::End => Term::End,
            Node::Choice { sender, branches } => Term::Choice {
                sender: sender.clone(),
                branches: branches
                    .iter()
                    .map(|b| (b.receiver.clone(), b.message.clone(), self.subterm(b.cont)))
                    .collect(),
            },
            Node::Rec { var, body } => Term::Rec(var.clone(), Box::new(self.subterm(*body))),
            Node::Var { var, .. } => Term::Var(var.clone()),
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn get(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.0)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn is_end(&self, id: NodeId) -> bool {
        matches!(self.node(id), Node::End)
    }

    pub fn roles(&self) -> BTreeSet<Role> {
        let mut roles = BTreeSet::new();
        for n in &self.nodes {
            if let Node::Choice { sender, branches } = n {
                roles.insert(sender.clone());
                roles.extend(branches.iter().map(|b| b.receiver.clone()));
            }
        }
        roles
    }

    pub fn messages(&self) -> BTreeSet<Message> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Choice { branches, .. } => Some(branches.iter().map(|b| b.message.clone())),
                _ => None,
            })
            .flatten()
            .collect()
    }

    pub fn binders(&self) -> BTreeSet<String> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Rec { var, .. } => Some(var.clone()),
                _ => None,
            })
            .collect()
    }

    /// Short rendering of a node's head, e.g. `p -> q : m . …` or `mu t . …`.
    pub fn head_text(&self, id: NodeId) -> String {
        match self.node(id) {
            Node::End => "0".to_string(),
            Node::Var { var, .. } => var.clone(),
            Node::Rec { var, .. } => format!("mu {var} . …"),
            Node::Choice { sender, branches } => {
                let heads: Vec<String> = branches
                    .iter()
                    .map(|b| format!("{sender} -> {} : {} . …", b.receiver, b.message))
                    .collect();
                if heads.len() == 1 {
                    heads.into_iter().next().unwrap()
                } else {
                    format!("({})", heads.join(" + "))
                }
            }
        }
    }

    /// Full text of the subterm rooted at `id`, in parseable syntax.
    pub fn subterm_text(&self, id: NodeId) -> String {
        let mut out = String::new();
        self.write_node(id, &mut out);
        out
    }

    fn write_node(&self, id: NodeId, out: &mut String) {
        match self.node(id) {
            Node::End => out.push('0'),
            Node::Var { var, .. } => out.push_str(var),
            Node::Rec { var, body } => {
                out.push_str("mu ");
                out.push_str(var);
                out.push_str(" . ");
                self.write_node(*body, out);
            }
            Node::Choice { sender, branches } => {
                let paren = branches.len() != 1;
                if paren {
                    out.push('(');
                }
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" + ");
                    }
                    out.push_str(&format!("{sender} -> {} : {} . ", b.receiver, b.message));
                    self.write_node(b.cont, out);
                }
                if paren {
                    out.push(')');
                }
            }
        }
    }
}

impl fmt::Display for GlobalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.subterm_text(self.root()))
    }
}

impl std::str::FromStr for GlobalType {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_global_type(s)
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("expected {expected}, found {found}")]
    Expected { expected: &'static str, found: String },
    #[error("unbound recursion variable `{0}`")]
    UnboundVariable(String),
    #[error("choice mixes senders `{0}` and `{1}`")]
    MixedSenders(String, String),
    #[error("trailing input after global type: {0}")]
    Trailing(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Zero,
    Mu,
    Arrow,
    Colon,
    Dot,
    Plus,
    LParen,
    RParen,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Zero => f.write_str("`0`"),
            Tok::Mu => f.write_str("`mu`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
    let mut toks = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (line, column) = (lineno + 1, i + 1);
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '+' => Tok::Plus,
                ':' => Tok::Colon,
                '.' => Tok::Dot,
                '-' if chars.get(i + 1) == Some(&'>') => {
                    i += 1;
                    Tok::Arrow
                }
                '0' if !chars.get(i + 1).copied().is_some_and(is_ident_char) => Tok::Zero,
                c if is_ident_start(c) => {
                    let start = i;
                    while i + 1 < chars.len() && is_ident_char(chars[i + 1]) {
                        i += 1;
                    }
                    let word: String = chars[start..=i].iter().collect();
                    if word == "mu" {
                        Tok::Mu
                    } else {
                        Tok::Ident(word)
                    }
                }
                other => {
                    return Err(ParseError {
                        line,
                        column,
                        kind: ParseErrorKind::UnexpectedChar(other),
                    })
                }
            };
            toks.push((tok, line, column));
            i += 1;
        }
    }
    let (line, column) = toks.last().map(|(_, l, c)| (*l, *c + 1)).unwrap_or((1, 1));
    toks.push((Tok::Eof, line, column));
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    scope: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        let (_, line, column) = &self.toks[self.pos];
        ParseError {
            line: *line,
            column: *column,
            kind,
        }
    }

    fn expected(&self, expected: &'static str) -> ParseError {
        self.error(ParseErrorKind::Expected {
            expected,
            found: self.peek().to_string(),
        })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: Tok, expected: &'static str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(expected))
        }
    }

    fn ident(&mut self, expected: &'static str) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.expected(expected)),
        }
    }

    fn global(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Zero => {
                self.bump();
                Ok(Term::End)
            }
            Tok::Mu => {
                self.bump();
                let var = self.ident("recursion variable")?;
                self.eat(Tok::Dot, "`.`")?;
                self.scope.push(var.clone());
                let body = self.global();
                self.scope.pop();
                Ok(Term::Rec(var, Box::new(body?)))
            }
            Tok::LParen => {
                self.bump();
                let (sender, first) = self.branch()?;
                let mut branches = vec![first];
                while *self.peek() == Tok::Plus {
                    self.bump();
                    let at = self.pos;
                    let (s, b) = self.branch()?;
                    if s != sender {
                        self.pos = at;
                        return Err(self.error(ParseErrorKind::MixedSenders(sender.to_string(), s.to_string())));
                    }
                    branches.push(b);
                }
                if branches.len() < 2 {
                    return Err(self.expected("`+`"));
                }
                self.eat(Tok::RParen, "`)`")?;
                Ok(Term::Choice { sender, branches })
            }
            Tok::Ident(name) => {
                if *self.peek2() == Tok::Arrow {
                    let (sender, b) = self.branch()?;
                    Ok(Term::Choice {
                        sender,
                        branches: vec![b],
                    })
                } else if self.scope.contains(&name) {
                    self.bump();
                    Ok(Term::Var(name))
                } else {
                    Err(self.error(ParseErrorKind::UnboundVariable(name)))
                }
            }
            _ => Err(self.expected("global type")),
        }
    }

    fn branch(&mut self) -> Result<(Role, (Role, Message, Term)), ParseError> {
        let sender = self.ident("sender role")?;
        self.eat(Tok::Arrow, "`->`")?;
        let receiver = self.ident("receiver role")?;
        self.eat(Tok::Colon, "`:`")?;
        let message = self.ident("message label")?;
        self.eat(Tok::Dot, "`.`")?;
        let cont = self.global()?;
        Ok((Role::new(sender), (Role::new(receiver), Message::new(message), cont)))
    }
}

/// Parses the concrete syntax
///
/// ```text
/// G      ::= "0" | "mu" IDENT "." G | IDENT | BRANCH | "(" BRANCH ("+" BRANCH)+ ")"
/// BRANCH ::= IDENT "->" IDENT ":" IDENT "." G
/// ```
///
/// with `#` line comments. Well-formedness is not checked; see [`validate`].
pub fn parse_global_type(text: &str) -> Result<GlobalType, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        scope: Vec::new(),
    };
    let term = p.global()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error(ParseErrorKind::Trailing(p.peek().to_string())));
    }
    Ok(GlobalType::from_term(&term))
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rule {
    BranchDistinctness,
    SelfMessage,
    UnguardedRecursion,
    UnboundVariable,
    EmptyChoice,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub node: NodeId,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at node {}: {}", self.rule, self.node, self.detail)
    }
}

/// Checks branch distinctness, distinct sender and receiver, guarded
/// recursion and closedness. Violations are reported in node order.
pub fn validate(g: &GlobalType) -> Vec<Violation> {
    let mut out = Vec::new();
    for id in g.node_ids() {
        match g.node(id) {
            Node::Choice { sender, branches } => {
                if branches.is_empty() {
                    out.push(Violation {
                        node: id,
                        rule: Rule::EmptyChoice,
                        detail: format!("choice of `{sender}` has no branches"),
                    });
                }
                let mut seen = BTreeSet::new();
                for b in branches {
                    if !seen.insert((&b.receiver, &b.message)) {
                        out.push(Violation {
                            node: id,
                            rule: Rule::BranchDistinctness,
                            detail: format!("duplicate branch {sender} -> {} : {}", b.receiver, b.message),
                        });
                    }
                    if b.receiver == *sender {
                        out.push(Violation {
                            node: id,
                            rule: Rule::SelfMessage,
                            detail: format!("`{sender}` sends `{}` to itself", b.message),
                        });
                    }
                }
            }
            Node::Var { var, binder: None } => out.push(Violation {
                node: id,
                rule: Rule::UnboundVariable,
                detail: format!("`{var}` is not bound by an enclosing mu"),
            }),
            _ => {}
        }
    }

    // A binder is unguarded until a choice is crossed below it.
    fn guard(g: &GlobalType, id: NodeId, unguarded: &mut Vec<NodeId>, bad: &mut BTreeSet<NodeId>) {
        match g.node(id) {
            Node::End => {}
            Node::Var { binder, .. } => {
                if let Some(b) = binder {
                    if unguarded.contains(b) {
                        bad.insert(*b);
                    }
                }
            }
            Node::Rec { body, .. } => {
                unguarded.push(id);
                guard(g, *body, unguarded, bad);
                unguarded.pop();
            }
            Node::Choice { branches, .. } => {
                let saved = std::mem::take(unguarded);
                for b in branches {
                    guard(g, b.cont, unguarded, bad);
                }
                *unguarded = saved;
            }
        }
    }
    let mut bad = BTreeSet::new();
    guard(g, g.root(), &mut Vec::new(), &mut bad);
    for b in bad {
        if let Node::Rec { var, .. } = g.node(b) {
            out.push(Violation {
                node: b,
                rule: Rule::UnguardedRecursion,
                detail: format!("`{var}` recurs without an intervening message"),
            });
        }
    }
    out.sort_by_key(|v| (v.node, v.rule));
    out
}

/// The map from recursion variable to the body of its binder. When a name
/// is bound more than once, the first binder in pre-order wins.
pub fn get_mu(g: &GlobalType) -> BTreeMap<String, NodeId> {
    let mut map = BTreeMap::new();
    for id in g.node_ids() {
        if let Node::Rec { var, body } = g.node(id) {
            map.entry(var.clone()).or_insert(*body);
        }
    }
    map
}

// ---------------------------------------------------------------------------
// Alphabet

/// Roles and messages of a global type, with the per-role asynchronous
/// alphabets derived from them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    pub roles: BTreeSet<Role>,
    pub messages: BTreeSet<Message>,
}

impl Alphabet {
    pub fn of(g: &GlobalType) -> Alphabet {
        Alphabet {
            roles: g.roles(),
            messages: g.messages(),
        }
    }

    pub fn sends(&self, p: &Role) -> BTreeSet<AsyncEvent> {
        self.events(p, AsyncEvent::send)
    }

    pub fn receives(&self, p: &Role) -> BTreeSet<AsyncEvent> {
        self.events(p, AsyncEvent::receive)
    }

    pub fn role_alphabet(&self, p: &Role) -> BTreeSet<AsyncEvent> {
        let mut all = self.sends(p);
        all.extend(self.receives(p));
        all
    }

    fn events(&self, p: &Role, make: fn(Role, Role, Message) -> AsyncEvent) -> BTreeSet<AsyncEvent> {
        let mut out = BTreeSet::new();
        for q in self.roles.iter().filter(|q| *q != p) {
            for m in &self.messages {
                out.insert(make(p.clone(), q.clone(), m.clone()));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// The G_n family

/// Builds `G(G_n)`: an implementable type of size linear in `n` whose
/// canonical local machine for `q` has exponentially many states.
///
/// ```text
/// G_0     = p->q:a . t_1
/// G_i     = p->q:a . mu t_3_i . (p->r:m_3 . p->q:b . t_3_i + p->r:n_3 . G_{i-1})
/// G(G')   = mu t_1 . (p->r:m_1 . mu t_2 . (p->r:m_2 . p->q:a . t_2 + p->r:n_2 . G')
///                     + p->r:n_1 . 0)
/// ```
pub fn generate_gn(n: usize) -> GlobalType {
    assert!(n >= 1, "G_n is defined for n >= 1");
    let mut inner = Term::send("p", "q", "a", Term::var("t_1"));
    for i in 1..=n {
        let t = format!("t_3_{i}");
        let body = Term::choice(
            "p",
            vec![
                ("r", "m_3", Term::send("p", "q", "b", Term::var(&t))),
                ("r", "n_3", inner),
            ],
        );
        inner = Term::send("p", "q", "a", Term::rec(&t, body));
    }
    let scaffold = Term::rec(
        "t_1",
        Term::choice(
            "p",
            vec![
                (
                    "r",
                    "m_1",
                    Term::rec(
                        "t_2",
                        Term::choice(
                            "p",
                            vec![
                                ("r", "m_2", Term::send("p", "q", "a", Term::var("t_2"))),
                                ("r", "n_2", inner),
                            ],
                        ),
                    ),
                ),
                ("r", "n_1", Term::End),
            ],
        ),
    );
    GlobalType::from_term(&scaffold)
}
