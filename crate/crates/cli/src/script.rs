//! Query scripts: one statement per line, replayed against a single store.
//!
//! ```text
//! state Z0 = [at(1,1), facing(D) | Z]
//! fd D #= 1 #\/ D #= 2
//! consistent Z0 5 5
//! domain cleanbot 5 5
//! do Z1 = Z0 go [false]
//! expect known Z1 == [at(1,2), facing(1) | Z]
//! ```
//!
//! Words are separated by whitespace outside brackets. `#` at the start of
//! a line begins a comment.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use fluxkit::agent::{Action, Domain, SenseValue, SensingResult};
use fluxkit::cleanbot;
use fluxkit::fd::{FdAtom, FdFormula, LinExpr, Op};
use fluxkit::knowledge::Binding;
use fluxkit::store::{Disjunct, State, StateConstraint, Store, Tail};
use fluxkit::switches;
use fluxkit::terms::{ArgTerm, Fluent, VarId};
use fluxkit::{FluxError, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INCONSISTENT: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

/// Pattern variables of `knows_val` live above every store variable.
const LOCAL_BASE: u32 = 0x4000_0000;

#[derive(Clone, Debug, PartialEq)]
enum Arg {
    Int(i64),
    Sym(String),
    Var(String),
    Anon,
}

#[derive(Clone, Debug, PartialEq)]
struct Term {
    name: String,
    args: Vec<Arg>,
}

type Sum = Vec<(i64, Arg)>;

#[derive(Clone, Debug)]
enum FdAst {
    Cmp(Sum, Op, Sum),
    And(Vec<FdAst>),
    Or(Vec<FdAst>),
}

#[derive(Clone, Debug)]
enum Query {
    Knows(Term, String),
    KnowsNot(Term, String),
    KnowsVal(Vec<String>, Term, String),
}

#[derive(Clone, Debug)]
enum Expect {
    Query { query: Query, negated: bool, answer: Option<String> },
    Known(String, String),
    Line { state: String, line: String, present: bool },
}

#[derive(Clone, Debug)]
enum DomainKind {
    Cleanbot(i64, i64),
    Switches,
}

#[derive(Clone, Debug)]
enum Stmt {
    State { name: String, known: Vec<Term>, tail: Option<String> },
    Range(Vec<String>, i64, i64),
    Fd(FdAst),
    NotHolds(Term, String),
    NotHoldsAll(Term, String),
    OrHolds(Vec<Term>, String),
    DuplicateFree(String),
    Holds(Term, String, Option<String>),
    Light(Arg, Arg, bool, String),
    Consistent(String, i64, i64),
    Domain(DomainKind),
    Do { to: String, from: String, action: Term, sensing: Vec<SenseValue> },
    Update { to: String, from: String, plus: Vec<Term>, minus: Vec<Term> },
    Cancel { to: String, from: String, fluent: Term },
    Show(String),
    Query(Query),
    Expect(Expect),
}

struct Line {
    no: usize,
    text: String,
    stmt: Stmt,
}

/// A parsed script.
pub struct Script {
    lines: Vec<Line>,
}

/// Transcript and exit code of one replay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub transcript: String,
    pub exit_code: i32,
}

fn err(msg: impl Into<String>) -> FluxError {
    FluxError::Parse(msg.into())
}

/// Split at whitespace outside brackets, with the byte offset of each word.
fn words(s: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = None;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ => {}
        }
        if c.is_whitespace() && depth <= 0 {
            if let Some(b) = start.take() {
                out.push((b, &s[b..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(b) = start {
        out.push((b, &s[b..]));
    }
    out
}

/// Split at `sep` outside brackets.
fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut last = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[last..i]);
                last = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[last..]);
    out
}

fn is_var_name(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_uppercase() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_atom_name(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_lowercase()) && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_arg(s: &str) -> Result<Arg> {
    let s = s.trim();
    if s == "_" {
        Ok(Arg::Anon)
    } else if let Ok(i) = s.parse::<i64>() {
        Ok(Arg::Int(i))
    } else if is_var_name(s) {
        Ok(Arg::Var(s.to_string()))
    } else if is_atom_name(s) {
        Ok(Arg::Sym(s.to_string()))
    } else {
        Err(err(format!("bad argument `{s}`")))
    }
}

fn parse_term(s: &str) -> Result<Term> {
    let s = s.trim();
    let (name, args) = match s.find('(') {
        Some(i) => {
            let inner = s[i + 1..].strip_suffix(')').ok_or_else(|| err(format!("bad term `{s}`")))?;
            let args = split_top(inner, ',').into_iter().map(parse_arg).collect::<Result<Vec<_>>>()?;
            (&s[..i], args)
        }
        None => (s, Vec::new()),
    };
    if !is_atom_name(name) {
        return Err(err(format!("bad term `{s}`")));
    }
    Ok(Term { name: name.to_string(), args })
}

fn bracketed(s: &str) -> Result<&str> {
    s.trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| err(format!("expected a bracketed list, got `{s}`")))
}

/// `[f, g | T]` or `[f, g]`.
fn parse_list(s: &str) -> Result<(Vec<Term>, Option<String>)> {
    let inner = bracketed(s)?;
    let parts = split_top(inner, '|');
    let tail = match parts.as_slice() {
        [_] => None,
        [_, t] if is_var_name(t.trim()) => Some(t.trim().to_string()),
        _ => return Err(err(format!("bad list `{s}`"))),
    };
    let items = parts[0].trim();
    let known = if items.is_empty() {
        Vec::new()
    } else {
        split_top(items, ',').into_iter().map(parse_term).collect::<Result<_>>()?
    };
    Ok((known, tail))
}

fn parse_terms(s: &str) -> Result<Vec<Term>> {
    match parse_list(s)? {
        (ts, None) => Ok(ts),
        _ => Err(err(format!("unexpected tail in `{s}`"))),
    }
}

fn parse_names(s: &str) -> Result<Vec<String>> {
    let inner = s.trim().strip_prefix('[').and_then(|r| r.strip_suffix(']')).unwrap_or(s);
    inner
        .split(',')
        .map(|v| {
            let v = v.trim();
            if is_var_name(v) && v != "_" {
                Ok(v.to_string())
            } else {
                Err(err(format!("bad variable `{v}`")))
            }
        })
        .collect()
}

fn parse_sensing(s: &str) -> Result<Vec<SenseValue>> {
    let inner = bracketed(s)?.trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|v| match v.trim() {
            "true" => Ok(SenseValue::Bool(true)),
            "false" => Ok(SenseValue::Bool(false)),
            t => t.parse().map(SenseValue::Int).map_err(|_| err(format!("bad sensed value `{t}`"))),
        })
        .collect()
}

fn parse_int(s: &str) -> Result<i64> {
    s.parse().map_err(|_| err(format!("expected an integer, got `{s}`")))
}

fn state_name(s: &str) -> Result<String> {
    if is_var_name(s) && s != "_" {
        Ok(s.to_string())
    } else {
        Err(err(format!("bad state name `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(i64),
    Name(String),
    Op(Op),
    And,
    Or,
    Plus,
    Minus,
    Times,
    LParen,
    RParen,
}

fn lex_fd(s: &str) -> Result<Vec<Tok>> {
    const OPS: [(&str, Option<Op>); 8] = [
        ("#\\=", Some(Op::Ne)),
        ("#=<", Some(Op::Le)),
        ("#>=", Some(Op::Ge)),
        ("#/\\", None),
        ("#\\/", None),
        ("#=", Some(Op::Eq)),
        ("#<", Some(Op::Lt)),
        ("#>", Some(Op::Gt)),
    ];
    let mut out = Vec::new();
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            let (text, op) = OPS
                .iter()
                .find(|(t, _)| s[i..].starts_with(t))
                .ok_or_else(|| err(format!("unknown operator at `{}`", &s[i..])))?;
            out.push(match (op, *text) {
                (Some(op), _) => Tok::Op(*op),
                (None, "#/\\") => Tok::And,
                _ => Tok::Or,
            });
            i += text.len();
        } else if c.is_ascii_digit() {
            let j = s[i..].find(|c: char| !c.is_ascii_digit()).map_or(s.len(), |k| i + k);
            out.push(Tok::Int(parse_int(&s[i..j])?));
            i = j;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let j = s[i..].find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).map_or(s.len(), |k| i + k);
            out.push(Tok::Name(s[i..j].to_string()));
            i = j;
        } else {
            out.push(match c {
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Times,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(err(format!("unexpected `{c}` in constraint"))),
            });
            i += 1;
        }
    }
    Ok(out)
}

struct FdParser {
    toks: Vec<Tok>,
    pos: usize,
}

impl FdParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn or(&mut self) -> Result<FdAst> {
        let mut parts = vec![self.and()?];
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { FdAst::Or(parts) })
    }

    fn and(&mut self) -> Result<FdAst> {
        let mut parts = vec![self.prim()?];
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            parts.push(self.prim()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { FdAst::And(parts) })
    }

    fn prim(&mut self) -> Result<FdAst> {
        let save = self.pos;
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            if let Ok(f) = self.or() {
                if self.next() == Some(Tok::RParen) {
                    return Ok(f);
                }
            }
            self.pos = save;
        }
        let lhs = self.sum()?;
        let op = match self.next() {
            Some(Tok::Op(op)) => op,
            _ => return Err(err("expected a comparison")),
        };
        let rhs = self.sum()?;
        Ok(FdAst::Cmp(lhs, op, rhs))
    }

    fn sum(&mut self) -> Result<Sum> {
        let mut out = Vec::new();
        let mut sign = 1;
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            sign = -1;
        }
        loop {
            let (c, a) = self.product()?;
            out.push((sign * c, a));
            match self.peek() {
                Some(Tok::Plus) => sign = 1,
                Some(Tok::Minus) => sign = -1,
                _ => return Ok(out),
            }
            self.pos += 1;
        }
    }

    fn product(&mut self) -> Result<(i64, Arg)> {
        match self.next() {
            Some(Tok::Int(k)) if self.peek() == Some(&Tok::Times) => {
                self.pos += 1;
                match self.next() {
                    Some(Tok::Name(n)) if is_var_name(&n) => Ok((k, Arg::Var(n))),
                    _ => Err(err("expected a variable after `*`")),
                }
            }
            Some(Tok::Int(k)) => Ok((1, Arg::Int(k))),
            Some(Tok::Name(n)) => Ok((1, parse_arg(&n)?)),
            Some(Tok::LParen) => {
                let s = self.sum()?;
                match (self.next(), s.as_slice()) {
                    (Some(Tok::RParen), [one]) => Ok(one.clone()),
                    _ => Err(err("parenthesised sums are not supported")),
                }
            }
            _ => Err(err("expected a term")),
        }
    }
}

fn parse_fd(s: &str) -> Result<FdAst> {
    let mut p = FdParser { toks: lex_fd(s)?, pos: 0 };
    let f = p.or()?;
    if p.pos != p.toks.len() {
        return Err(err(format!("trailing input in `{s}`")));
    }
    Ok(f)
}

fn parse_query(w: &[&str]) -> Result<Query> {
    match w {
        ["knows", f, z] => Ok(Query::Knows(parse_term(f)?, state_name(z)?)),
        ["knows_not", f, z] => Ok(Query::KnowsNot(parse_term(f)?, state_name(z)?)),
        ["knows_val", vs, f, z] => Ok(Query::KnowsVal(parse_names(vs)?, parse_term(f)?, state_name(z)?)),
        _ => Err(err(format!("unknown query `{}`", w.join(" ")))),
    }
}

fn parse_expect(line: &str, ws: &[(usize, &str)]) -> Result<Expect> {
    let w: Vec<&str> = ws.iter().map(|p| p.1).collect();
    let rest = |k: usize| ws.get(k).map(|p| line[p.0..].trim().to_string()).unwrap_or_default();
    match w.as_slice() {
        ["expect", "known", z, "==", ..] => Ok(Expect::Known(state_name(z)?, rest(4))),
        ["expect", "has", z, _, ..] => Ok(Expect::Line { state: state_name(z)?, line: rest(3), present: true }),
        ["expect", "lacks", z, _, ..] => Ok(Expect::Line { state: state_name(z)?, line: rest(3), present: false }),
        ["expect", q @ ..] => {
            let (negated, q) = match q {
                ["not", q @ ..] => (true, q),
                q => (false, q),
            };
            let (q, answer) = match q.iter().position(|t| *t == "==") {
                Some(i) => (&q[..i], Some(q[i + 1..].join(" "))),
                None => (q, None),
            };
            if negated && answer.is_some() {
                return Err(err("`expect not` takes no answer"));
            }
            Ok(Expect::Query { query: parse_query(q)?, negated, answer })
        }
        _ => Err(err("empty expectation")),
    }
}

fn parse_stmt(line: &str) -> Result<Stmt> {
    let ws = words(line);
    let w: Vec<&str> = ws.iter().map(|p| p.1).collect();
    let rest = |k: usize| ws.get(k).map(|p| line[p.0..].trim()).unwrap_or("");
    Ok(match w.as_slice() {
        ["state", z] => Stmt::State { name: state_name(z)?, known: Vec::new(), tail: Some(state_name(z)?) },
        ["state", z, "=", l] => {
            let (known, tail) = parse_list(l)?;
            Stmt::State { name: state_name(z)?, known, tail }
        }
        ["range", vs, r] => {
            let (lo, hi) = r.split_once("..").ok_or_else(|| err(format!("bad range `{r}`")))?;
            Stmt::Range(parse_names(vs)?, parse_int(lo)?, parse_int(hi)?)
        }
        ["fd", _, ..] => Stmt::Fd(parse_fd(rest(1))?),
        ["not_holds", f, z] => Stmt::NotHolds(parse_term(f)?, state_name(z)?),
        ["not_holds_all", f, z] => Stmt::NotHoldsAll(parse_term(f)?, state_name(z)?),
        ["or_holds", l, z] => Stmt::OrHolds(parse_terms(l)?, state_name(z)?),
        ["duplicate_free", z] => Stmt::DuplicateFree(state_name(z)?),
        ["holds", f, z] => Stmt::Holds(parse_term(f)?, state_name(z)?, None),
        ["holds", f, z, r] => Stmt::Holds(parse_term(f)?, state_name(z)?, Some(state_name(r)?)),
        ["light", x, y, b, z] => {
            let b = match *b {
                "true" => true,
                "false" => false,
                _ => return Err(err(format!("expected true or false, got `{b}`"))),
            };
            Stmt::Light(parse_arg(x)?, parse_arg(y)?, b, state_name(z)?)
        }
        ["consistent", z, wd, ht] => Stmt::Consistent(state_name(z)?, parse_int(wd)?, parse_int(ht)?),
        ["domain", "cleanbot", wd, ht] => Stmt::Domain(DomainKind::Cleanbot(parse_int(wd)?, parse_int(ht)?)),
        ["domain", "switches"] => Stmt::Domain(DomainKind::Switches),
        ["do", to, "=", from, a] => {
            Stmt::Do { to: state_name(to)?, from: state_name(from)?, action: parse_term(a)?, sensing: Vec::new() }
        }
        ["do", to, "=", from, a, y] => Stmt::Do {
            to: state_name(to)?,
            from: state_name(from)?,
            action: parse_term(a)?,
            sensing: parse_sensing(y)?,
        },
        ["update", to, "=", from, p, m] => Stmt::Update {
            to: state_name(to)?,
            from: state_name(from)?,
            plus: parse_terms(p)?,
            minus: parse_terms(m)?,
        },
        ["cancel", to, "=", from, f] => {
            Stmt::Cancel { to: state_name(to)?, from: state_name(from)?, fluent: parse_term(f)? }
        }
        ["show", z] => Stmt::Show(state_name(z)?),
        ["expect", ..] => Stmt::Expect(parse_expect(line, &ws)?),
        [q, ..] if q.starts_with("knows") => Stmt::Query(parse_query(&w)?),
        _ => return Err(err(format!("unknown statement `{line}`"))),
    })
}

impl Script {
    /// Parse the whole script up front; errors carry the line number.
    pub fn parse(text: &str) -> Result<Script> {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let stmt = parse_stmt(t).map_err(|e| match e {
                FluxError::Parse(m) => FluxError::Parse(format!("line {}: {m}", i + 1)),
                e => e,
            })?;
            lines.push(Line { no: i + 1, text: t.to_string(), stmt });
        }
        Ok(Script { lines })
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn run(&self) -> Outcome {
        let mut s = Session::default();
        let mut out = String::new();
        let mut code = EXIT_OK;
        for line in &self.lines {
            let _ = writeln!(out, "?- {}", line.text);
            match s.exec(&line.stmt) {
                Ok(Verdict::Shown(text)) => out.push_str(&text),
                Ok(Verdict::Failed(text)) => {
                    out.push_str(&text);
                    let _ = writeln!(out, "FAILED (line {})", line.no);
                    code = EXIT_FAILED;
                }
                Err(FluxError::Inconsistent) => {
                    out.push_str("inconsistent\n");
                    return Outcome { transcript: out, exit_code: EXIT_INCONSISTENT };
                }
                Err(e) => {
                    let _ = writeln!(out, "error (line {}): {e}", line.no);
                    return Outcome { transcript: out, exit_code: EXIT_ERROR };
                }
            }
            out.push('\n');
        }
        Outcome { transcript: out, exit_code: code }
    }
}

enum Verdict {
    Shown(String),
    Failed(String),
}

#[derive(Default)]
struct Session {
    store: Store,
    states: BTreeMap<String, State>,
    vars: HashMap<String, VarId>,
    domain: Option<Domain>,
}

struct Locals {
    names: HashMap<String, VarId>,
    next: u32,
}

impl Locals {
    fn var(&mut self, name: Option<&str>) -> VarId {
        if let Some(v) = name.and_then(|n| self.names.get(n)) {
            return *v;
        }
        let v = VarId(LOCAL_BASE + self.next);
        self.next += 1;
        if let Some(n) = name {
            self.names.insert(n.to_string(), v);
        }
        v
    }
}

/// `X = 1, Y = 2` per binding, bindings separated by `;`, or `no`.
fn render_bindings(bs: &[Binding], names: &[String]) -> String {
    if bs.is_empty() {
        return "no".into();
    }
    let rows: Vec<String> = bs
        .iter()
        .map(|b| {
            let vals: Vec<String> = names.iter().zip(b.values()).map(|(n, v)| format!("{n} = {v}")).collect();
            vals.join(", ")
        })
        .collect();
    rows.join("; ")
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

impl Session {
    fn state(&self, name: &str) -> Result<State> {
        self.states.get(name).copied().ok_or_else(|| FluxError::Usage(format!("unknown state {name}")))
    }

    fn arg(&mut self, a: &Arg) -> ArgTerm {
        match a {
            Arg::Int(i) => ArgTerm::Int(*i),
            Arg::Sym(s) => ArgTerm::sym(s),
            Arg::Anon => ArgTerm::Var(self.store.new_var()),
            Arg::Var(n) => {
                if let Some(v) = self.vars.get(n) {
                    return ArgTerm::Var(*v);
                }
                let v = self.store.new_var();
                self.vars.insert(n.clone(), v);
                ArgTerm::Var(v)
            }
        }
    }

    fn fluent(&mut self, t: &Term) -> Result<Fluent> {
        let args: Vec<ArgTerm> = t.args.iter().map(|a| self.arg(a)).collect();
        let f = Fluent::named(&t.name, args);
        self.store.check_arity(&f)?;
        Ok(f)
    }

    fn fluents(&mut self, ts: &[Term]) -> Result<Vec<Fluent>> {
        ts.iter().map(|t| self.fluent(t)).collect()
    }

    fn local_fluent(&mut self, t: &Term, locals: &mut Locals) -> Result<Fluent> {
        let args = t.args.iter().map(|a| match a {
            Arg::Int(i) => ArgTerm::Int(*i),
            Arg::Sym(s) => ArgTerm::sym(s),
            Arg::Anon => ArgTerm::Var(locals.var(None)),
            Arg::Var(n) => ArgTerm::Var(locals.var(Some(n))),
        });
        let f = Fluent::named(&t.name, args.collect::<Vec<_>>());
        self.store.check_arity(&Fluent::named(&t.name, vec![ArgTerm::Int(0); f.arity()]))?;
        Ok(f)
    }

    fn lin(&mut self, sum: &Sum) -> Result<LinExpr> {
        if let [(1, a @ Arg::Sym(_))] = sum.as_slice() {
            let a = self.arg(a);
            return Ok(LinExpr::from_arg(a));
        }
        let mut constant = 0;
        let mut terms = Vec::new();
        for (c, a) in sum {
            match self.arg(a) {
                ArgTerm::Int(k) => constant += c * k,
                ArgTerm::Var(v) => terms.push((*c, v)),
                ArgTerm::Sym(_) => return Err(FluxError::SymbolArithmetic),
            }
        }
        Ok(LinExpr::new(constant, terms))
    }

    fn formula(&mut self, f: &FdAst) -> Result<FdFormula> {
        Ok(match f {
            FdAst::Cmp(l, op, r) => {
                let (l, r) = (self.lin(l)?, self.lin(r)?);
                FdFormula::Atom(FdAtom::new(l, *op, r)?)
            }
            FdAst::And(fs) => FdFormula::And(fs.iter().map(|f| self.formula(f)).collect::<Result<_>>()?),
            FdAst::Or(fs) => FdFormula::Or(fs.iter().map(|f| self.formula(f)).collect::<Result<_>>()?),
        })
    }

    fn tail_name(&self, s: State) -> String {
        match self.store.tail(s) {
            Tail::Open(t) => {
                self.states.iter().find(|(_, z)| z.root == t).map_or("Z".to_string(), |(n, _)| n.clone())
            }
            Tail::Closed => "Z".to_string(),
        }
    }

    fn dump(&self, name: &str) -> Result<String> {
        let s = self.state(name)?;
        let d = self.store.dump_as(s, &self.tail_name(s));
        Ok(format!("{name} = {}", d.strip_prefix("known: ").unwrap_or(&d)))
    }

    fn constrain(&mut self, c: StateConstraint, z: &str) -> Result<Verdict> {
        self.store.assert_constraint(c)?;
        Ok(Verdict::Shown(self.dump(z)?))
    }

    fn query(&mut self, q: &Query) -> Result<(bool, String)> {
        match q {
            Query::Knows(f, z) => {
                let (f, z) = (self.fluent(f)?, self.state(z)?);
                let b = self.store.knows(&f, z)?;
                Ok((b, if b { "yes" } else { "no" }.into()))
            }
            Query::KnowsNot(f, z) => {
                let (f, z) = (self.fluent(f)?, self.state(z)?);
                let b = self.store.knows_not(&f, z)?;
                Ok((b, if b { "yes" } else { "no" }.into()))
            }
            Query::KnowsVal(names, pat, z) => {
                let mut locals = Locals { names: HashMap::new(), next: 0 };
                let vars: Vec<VarId> = names.iter().map(|n| locals.var(Some(n))).collect();
                let pat = self.local_fluent(pat, &mut locals)?;
                let z = self.state(z)?;
                let bs = self.store.knows_val(&vars, &pat, z);
                Ok((!bs.is_empty(), render_bindings(&bs, names)))
            }
        }
    }

    fn exec(&mut self, stmt: &Stmt) -> Result<Verdict> {
        match stmt {
            Stmt::State { name, known, tail } => {
                let known = self.fluents(known)?;
                let s = self.store.state(&known, tail.is_some())?;
                if let (Some(t), Tail::Open(l)) = (tail, self.store.tail(s)) {
                    self.states.insert(t.clone(), State { root: l });
                }
                self.states.insert(name.clone(), s);
                Ok(Verdict::Shown(self.dump(name)?))
            }
            Stmt::Range(names, lo, hi) => {
                let vars: Vec<VarId> = names
                    .iter()
                    .map(|n| match self.arg(&Arg::Var(n.clone())) {
                        ArgTerm::Var(v) => v,
                        _ => unreachable!(),
                    })
                    .collect();
                self.store.post_range(&vars, *lo, *hi)?;
                Ok(Verdict::Shown("yes\n".into()))
            }
            Stmt::Fd(f) => {
                let f = self.formula(f)?;
                self.store.post_fd(&f)?;
                Ok(Verdict::Shown("yes\n".into()))
            }
            Stmt::NotHolds(f, z) => {
                let (f, s) = (self.fluent(f)?, self.state(z)?);
                self.constrain(StateConstraint::NotHolds(f, s.root), z)
            }
            Stmt::NotHoldsAll(f, z) => {
                let (f, s) = (self.fluent(f)?, self.state(z)?);
                self.constrain(StateConstraint::NotHoldsAll(f, s.root), z)
            }
            Stmt::OrHolds(fs, z) => {
                let (fs, s) = (self.fluents(fs)?, self.state(z)?);
                let ds = fs.into_iter().map(Disjunct::Fluent).collect();
                self.constrain(StateConstraint::OrHolds(ds, s.root), z)
            }
            Stmt::DuplicateFree(z) => {
                let s = self.state(z)?;
                self.constrain(StateConstraint::DuplicateFree(s.root), z)
            }
            Stmt::Holds(f, z, rest) => {
                let (f, s) = (self.fluent(f)?, self.state(z)?);
                match rest {
                    None if self.store.holds_assert(&f, s)? => Ok(Verdict::Shown(self.dump(z)?)),
                    None => Err(FluxError::Inconsistent),
                    Some(r) => {
                        let z1 = self.store.holds_split(&f, s)?.ok_or(FluxError::Inconsistent)?;
                        self.states.insert(r.clone(), z1);
                        Ok(Verdict::Shown(self.dump(r)?))
                    }
                }
            }
            Stmt::Light(x, y, b, z) => {
                let (x, y, s) = (self.arg(x), self.arg(y), self.state(z)?);
                cleanbot::light_assert(&mut self.store, x, y, *b, s)?;
                Ok(Verdict::Shown(self.dump(z)?))
            }
            Stmt::Consistent(z, w, h) => {
                let s = self.state(z)?;
                cleanbot::consistent(&mut self.store, s, *w, *h)?;
                Ok(Verdict::Shown(self.dump(z)?))
            }
            Stmt::Domain(k) => {
                self.domain = Some(match k {
                    DomainKind::Cleanbot(w, h) => cleanbot::domain(*w, *h),
                    DomainKind::Switches => switches::domain(),
                });
                Ok(Verdict::Shown("yes\n".into()))
            }
            Stmt::Do { to, from, action, sensing } => {
                let s = self.state(from)?;
                let args: Vec<ArgTerm> = action.args.iter().map(|a| self.arg(a)).collect();
                let a = Action::new(&action.name, args);
                let y = SensingResult(sensing.clone());
                let d = self.domain.take().ok_or_else(|| FluxError::Usage("no domain declared".into()))?;
                let r = d.state_update(&mut self.store, s, &a, &y);
                self.domain = Some(d);
                self.states.insert(to.clone(), r?);
                Ok(Verdict::Shown(self.dump(to)?))
            }
            Stmt::Update { to, from, plus, minus } => {
                let s = self.state(from)?;
                let (plus, minus) = (self.fluents(plus)?, self.fluents(minus)?);
                let z = self.store.update(s, &plus, &minus)?;
                self.states.insert(to.clone(), z);
                Ok(Verdict::Shown(self.dump(to)?))
            }
            Stmt::Cancel { to, from, fluent } => {
                let s = self.state(from)?;
                let f = self.fluent(fluent)?;
                let z = self.store.cancel_fluent(&f, s)?;
                self.states.insert(to.clone(), z);
                Ok(Verdict::Shown(self.dump(to)?))
            }
            Stmt::Show(z) => Ok(Verdict::Shown(self.dump(z)?)),
            Stmt::Query(q) => {
                let (_, text) = self.query(q)?;
                Ok(Verdict::Shown(text + "\n"))
            }
            Stmt::Expect(e) => self.expect(e),
        }
    }

    fn expect(&mut self, e: &Expect) -> Result<Verdict> {
        let (ok, text) = match e {
            Expect::Query { query, negated, answer } => {
                let (b, text) = self.query(query)?;
                let ok = match answer {
                    Some(want) => squash(want) == squash(&text),
                    None => b != *negated,
                };
                (ok, text)
            }
            Expect::Known(z, want) => {
                let d = self.dump(z)?;
                let first = d.lines().next().unwrap_or("");
                let got = first.split_once(" = ").map_or(first, |p| p.1);
                (squash(got) == squash(want), got.to_string())
            }
            Expect::Line { state, line, present } => {
                let d = self.dump(state)?;
                let found = d.lines().skip(1).any(|l| squash(l) == squash(line));
                (found == *present, if found { "present" } else { "absent" }.to_string())
            }
        };
        Ok(if ok { Verdict::Shown(text + "\n") } else { Verdict::Failed(text + "\n") })
    }
}
