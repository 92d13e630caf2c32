//! Finite-domain arithmetic over constraint variables.
//!
//! Sound but incomplete: equalities with at most two variables and unit
//! difference are turned into union-find aliases `X = Y + c`, disequalities
//! eliminate a value once a single variable remains, orderings do bounds
//! reasoning, and disjunctions are suspended until a literal is decided.
//! Every change is trailed so speculative posting can be undone.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{FluxError, Result};
use crate::terms::{is_symbol_code, ArgTerm, VarId};

/// Bound used for unbounded domains.
pub const INF: i64 = 1 << 61;

/// Integer interval with excluded values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    lo: i64,
    hi: i64,
    holes: Vec<i64>,
}

impl Domain {
    pub fn full() -> Domain {
        Domain { lo: -INF, hi: INF, holes: Vec::new() }
    }

    pub fn range(lo: i64, hi: i64) -> Domain {
        Domain { lo, hi, holes: Vec::new() }
    }

    pub fn singleton(v: i64) -> Domain {
        Domain::range(v, v)
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn holes(&self) -> &[i64] {
        &self.holes
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo > -INF && self.hi < INF
    }

    pub fn value(&self) -> Option<i64> {
        (self.lo == self.hi).then_some(self.lo)
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && v <= self.hi && self.holes.binary_search(&v).is_err()
    }

    /// Number of values, if bounded.
    pub fn size(&self) -> Option<u64> {
        if self.is_empty() {
            return Some(0);
        }
        self.is_bounded()
            .then(|| (self.hi - self.lo + 1) as u64 - self.holes.len() as u64)
    }

    pub fn values(&self) -> impl Iterator<Item = i64> + '_ {
        assert!(self.is_bounded() || self.is_empty(), "enumerating an unbounded domain");
        (self.lo..=self.hi).filter(|v| self.holes.binary_search(v).is_err())
    }

    fn normalize(&mut self) {
        while self.lo <= self.hi && self.holes.binary_search(&self.lo).is_ok() {
            self.lo += 1;
        }
        while self.lo <= self.hi && self.holes.binary_search(&self.hi).is_ok() {
            self.hi -= 1;
        }
        let (lo, hi) = (self.lo, self.hi);
        self.holes.retain(|&h| lo < h && h < hi);
    }

    pub fn intersect_range(&self, lo: i64, hi: i64) -> Domain {
        let mut d = self.clone();
        d.lo = d.lo.max(lo);
        d.hi = d.hi.min(hi);
        d.normalize();
        d
    }

    pub fn without(&self, v: i64) -> Domain {
        let mut d = self.clone();
        if d.contains(v) {
            if let Err(i) = d.holes.binary_search(&v) {
                d.holes.insert(i, v);
            }
            d.normalize();
        }
        d
    }

    pub fn intersect(&self, other: &Domain) -> Domain {
        let mut d = self.intersect_range(other.lo, other.hi);
        for &h in &other.holes {
            if let Err(i) = d.holes.binary_search(&h) {
                d.holes.insert(i, h);
            }
        }
        d.normalize();
        d
    }

    /// Domain of `x + d` given this domain for `x`.
    pub fn shifted(&self, d: i64) -> Domain {
        let sh = |v: i64| if v <= -INF || v >= INF { v } else { v + d };
        Domain {
            lo: sh(self.lo),
            hi: sh(self.hi),
            holes: self.holes.iter().map(|&h| h + d).collect(),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = |v: i64| {
            if v <= -INF {
                "inf".to_string()
            } else if v >= INF {
                "sup".to_string()
            } else {
                v.to_string()
            }
        };
        write!(f, "{}..{}", b(self.lo), b(self.hi))?;
        for h in &self.holes {
            write!(f, "\\{h}")?;
        }
        Ok(())
    }
}

/// Linear expression `constant + Σ coeff·var` in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct LinExpr {
    pub constant: i64,
    pub terms: Vec<(i64, VarId)>,
}

impl LinExpr {
    pub fn constant(c: i64) -> LinExpr {
        LinExpr { constant: c, terms: Vec::new() }
    }

    pub fn var(v: VarId) -> LinExpr {
        LinExpr { constant: 0, terms: vec![(1, v)] }
    }

    pub fn from_arg(a: ArgTerm) -> LinExpr {
        match a {
            ArgTerm::Var(v) => LinExpr::var(v),
            other => LinExpr::constant(other.const_code().unwrap()),
        }
    }

    pub fn new(constant: i64, terms: impl IntoIterator<Item = (i64, VarId)>) -> LinExpr {
        let mut e = LinExpr { constant, terms: Vec::new() };
        for (c, v) in terms {
            e.add_term(c, v);
        }
        e
    }

    fn add_term(&mut self, c: i64, v: VarId) {
        match self.terms.binary_search_by_key(&v, |t| t.1) {
            Ok(i) => {
                self.terms[i].0 += c;
                if self.terms[i].0 == 0 {
                    self.terms.remove(i);
                }
            }
            Err(i) if c != 0 => self.terms.insert(i, (c, v)),
            Err(_) => {}
        }
    }

    pub fn plus(mut self, c: i64) -> LinExpr {
        self.constant += c;
        self
    }

    pub fn sub(&self, other: &LinExpr) -> LinExpr {
        let mut e = self.clone();
        e.constant -= other.constant;
        for &(c, v) in &other.terms {
            e.add_term(-c, v);
        }
        e
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().map(|t| t.1)
    }

    pub fn eval(&self, val: &dyn Fn(VarId) -> i64) -> i128 {
        self.terms
            .iter()
            .fold(self.constant as i128, |acc, &(c, v)| acc + c as i128 * val(v) as i128)
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for &(c, v) in &self.terms {
            let sign = if c < 0 { "-" } else if first { "" } else { "+" };
            let mag = c.abs();
            if mag == 1 {
                write!(f, "{sign}_G{}", v.0)?;
            } else {
                write!(f, "{sign}{mag}*_G{}", v.0)?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", ArgTerm::from_code(self.constant))?;
        } else if self.constant != 0 {
            write!(f, "{:+}", self.constant)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Op {
    pub fn text(self) -> &'static str {
        match self {
            Op::Eq => "#=",
            Op::Ne => "#\\=",
            Op::Lt => "#<",
            Op::Le => "#=<",
            Op::Gt => "#>",
            Op::Ge => "#>=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FdAtom {
    pub lhs: LinExpr,
    pub op: Op,
    pub rhs: LinExpr,
}

impl FdAtom {
    pub fn new(lhs: LinExpr, op: Op, rhs: LinExpr) -> Result<FdAtom> {
        let symbolic = |e: &LinExpr| is_symbol_code(e.constant);
        if (symbolic(&lhs) || symbolic(&rhs))
            && (!matches!(op, Op::Eq | Op::Ne)
                || (symbolic(&lhs) && !lhs.terms.is_empty())
                || (symbolic(&rhs) && !rhs.terms.is_empty()))
        {
            return Err(FluxError::SymbolArithmetic);
        }
        Ok(FdAtom { lhs, op, rhs })
    }

    pub fn eq(a: ArgTerm, b: ArgTerm) -> FdAtom {
        FdAtom { lhs: LinExpr::from_arg(a), op: Op::Eq, rhs: LinExpr::from_arg(b) }
    }

    pub fn ne(a: ArgTerm, b: ArgTerm) -> FdAtom {
        FdAtom { lhs: LinExpr::from_arg(a), op: Op::Ne, rhs: LinExpr::from_arg(b) }
    }

    pub fn holds(&self, val: &dyn Fn(VarId) -> i64) -> bool {
        let (l, r) = (self.lhs.eval(val), self.rhs.eval(val));
        match self.op {
            Op::Eq => l == r,
            Op::Ne => l != r,
            Op::Lt => l < r,
            Op::Le => l <= r,
            Op::Gt => l > r,
            Op::Ge => l >= r,
        }
    }

    fn to_lin(&self) -> Lin {
        let e = self.lhs.sub(&self.rhs);
        let (e, rel) = match self.op {
            Op::Eq => (e, Rel::Eq),
            Op::Ne => (e, Rel::Ne),
            Op::Le => (e, Rel::Le),
            Op::Lt => (e.plus(1), Rel::Le),
            Op::Ge => (LinExpr::constant(0).sub(&e), Rel::Le),
            Op::Gt => (LinExpr::constant(0).sub(&e).plus(1), Rel::Le),
        };
        Lin { k: e.constant as i128, terms: e.terms, rel }
    }
}

impl fmt::Display for FdAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.lhs, self.op.text(), self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FdFormula {
    Atom(FdAtom),
    And(Vec<FdFormula>),
    Or(Vec<FdFormula>),
    True,
    False,
}

impl FdFormula {
    pub fn eval(&self, val: &dyn Fn(VarId) -> i64) -> bool {
        match self {
            FdFormula::Atom(a) => a.holds(val),
            FdFormula::And(fs) => fs.iter().all(|f| f.eval(val)),
            FdFormula::Or(fs) => fs.iter().any(|f| f.eval(val)),
            FdFormula::True => true,
            FdFormula::False => false,
        }
    }

    pub fn vars(&self, out: &mut Vec<VarId>) {
        match self {
            FdFormula::Atom(a) => out.extend(a.lhs.vars().chain(a.rhs.vars())),
            FdFormula::And(fs) | FdFormula::Or(fs) => fs.iter().for_each(|f| f.vars(out)),
            _ => {}
        }
    }
}

impl fmt::Display for FdFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, fs: &[FdFormula], sep: &str| {
            f.write_str("(")?;
            for (i, x) in fs.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                write!(f, "{x}")?;
            }
            f.write_str(")")
        };
        match self {
            FdFormula::Atom(a) => write!(f, "{a}"),
            FdFormula::And(fs) => list(f, fs, " #/\\ "),
            FdFormula::Or(fs) => list(f, fs, " #\\/ "),
            FdFormula::True => f.write_str("0#=0"),
            FdFormula::False => f.write_str("0#\\=0"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    fn not(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rel {
    Eq,
    Ne,
    Le,
}

/// `Σ terms + k  rel  0`
#[derive(Clone, Debug)]
struct Lin {
    terms: Vec<(i64, VarId)>,
    k: i128,
    rel: Rel,
}

#[derive(Clone, Debug)]
enum Prop {
    Lin(Lin),
    Or(Vec<FdFormula>),
}

#[derive(Clone, Debug)]
struct Node {
    parent: u32,
    offset: i64,
    size: u32,
    dom: Domain,
}

#[derive(Clone)]
enum Undo {
    Dom(u32, Domain),
    Link { child: u32, root: u32, watch_len: usize },
    Watch(u32),
    Kill(u32),
    OrList(u32, Vec<FdFormula>),
    NewProp,
    NewVar,
}

/// Position in the trail returned by [`FdStore::snapshot`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FdMark {
    trail: usize,
    depth: usize,
}

#[derive(Clone, Copy)]
enum Step {
    Done,
    Pending,
}

/// Reduced form of a linear constraint: `Σ c·root + k`.
struct Norm {
    terms: Vec<(i64, u32)>,
    k: i128,
}

#[derive(Clone, Default)]
pub struct FdStore {
    nodes: Vec<Node>,
    props: Vec<(Prop, bool)>,
    watches: Vec<Vec<u32>>,
    trail: Vec<Undo>,
    marks: Vec<usize>,
    queue: VecDeque<u32>,
    queued: Vec<bool>,
    failed: bool,
    changed: bool,
}

impl FdStore {
    pub fn new() -> FdStore {
        FdStore::default()
    }

    fn record(&mut self, u: Undo) {
        if !self.marks.is_empty() {
            self.trail.push(u);
        }
    }

    pub fn new_var(&mut self) -> VarId {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node { parent: id, offset: 0, size: 1, dom: Domain::full() });
        self.watches.push(Vec::new());
        self.record(Undo::NewVar);
        VarId(id)
    }

    pub fn var_count(&self) -> usize {
        self.nodes.len()
    }

    /// Make sure ids below `n` exist (used when ids come from a parser).
    pub fn ensure_vars(&mut self, n: usize) {
        while self.nodes.len() < n {
            self.new_var();
        }
    }

    /// Root of the alias class and offset: `value(v) = value(root) + offset`.
    pub fn find(&self, v: VarId) -> (VarId, i64) {
        let mut x = v.0;
        let mut off = 0;
        loop {
            let n = &self.nodes[x as usize];
            if n.parent == x {
                return (VarId(x), off);
            }
            off += n.offset;
            x = n.parent;
        }
    }

    pub fn domain(&self, v: VarId) -> Domain {
        let (r, off) = self.find(v);
        self.nodes[r.0 as usize].dom.shifted(off)
    }

    pub fn value(&self, v: VarId) -> Option<i64> {
        let (r, off) = self.find(v);
        self.nodes[r.0 as usize].dom.value().map(|x| x + off)
    }

    /// Constant if fixed, otherwise the class root when the offset is zero.
    pub fn resolve(&self, a: ArgTerm) -> ArgTerm {
        match a {
            ArgTerm::Var(v) => {
                let (r, off) = self.find(v);
                match self.nodes[r.0 as usize].dom.value() {
                    Some(x) => ArgTerm::from_code(x + off),
                    None if off == 0 => ArgTerm::Var(r),
                    None => a,
                }
            }
            c => c,
        }
    }

    pub fn is_consistent(&self) -> bool {
        !self.failed
    }

    /// True when a variable was fixed or aliased since the last call.
    pub fn take_changed(&mut self) -> bool {
        std::mem::take(&mut self.changed)
    }

    pub fn snapshot(&mut self) -> FdMark {
        debug_assert!(self.queue.is_empty());
        self.marks.push(self.trail.len());
        FdMark { trail: self.trail.len(), depth: self.marks.len() }
    }

    pub fn rollback(&mut self, m: FdMark) -> Result<()> {
        if self.marks.len() != m.depth || self.marks.last() != Some(&m.trail) {
            return Err(FluxError::Usage("fd rollback out of order".into()));
        }
        while self.trail.len() > m.trail {
            match self.trail.pop().unwrap() {
                Undo::Dom(x, d) => self.nodes[x as usize].dom = d,
                Undo::Link { child, root, watch_len } => {
                    let size = self.nodes[child as usize].size;
                    let c = &mut self.nodes[child as usize];
                    c.parent = child;
                    c.offset = 0;
                    self.nodes[root as usize].size -= size;
                    self.watches[root as usize].truncate(watch_len);
                }
                Undo::Watch(x) => {
                    self.watches[x as usize].pop();
                }
                Undo::Kill(p) => self.props[p as usize].1 = true,
                Undo::OrList(p, old) => self.props[p as usize].0 = Prop::Or(old),
                Undo::NewProp => {
                    self.props.pop();
                    self.queued.pop();
                }
                Undo::NewVar => {
                    self.nodes.pop();
                    self.watches.pop();
                }
            }
        }
        self.marks.pop();
        self.clear_queue();
        self.failed = false;
        Ok(())
    }

    /// Forget a snapshot while keeping its changes.
    pub fn commit(&mut self, m: FdMark) -> Result<()> {
        if self.marks.len() != m.depth || self.marks.last() != Some(&m.trail) {
            return Err(FluxError::Usage("fd commit out of order".into()));
        }
        self.marks.pop();
        if self.marks.is_empty() {
            self.trail.clear();
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.marks.len()
    }

    fn clear_queue(&mut self) {
        for p in self.queue.drain(..) {
            if let Some(q) = self.queued.get_mut(p as usize) {
                *q = false;
            }
        }
    }

    fn fail<T>(&mut self) -> Result<T> {
        self.failed = true;
        self.clear_queue();
        Err(FluxError::Inconsistent)
    }

    fn check(&self) -> Result<()> {
        if self.failed {
            Err(FluxError::Inconsistent)
        } else {
            Ok(())
        }
    }

    fn set_dom(&mut self, r: u32, d: Domain) -> Result<()> {
        if d.is_empty() {
            return self.fail();
        }
        if self.nodes[r as usize].dom == d {
            return Ok(());
        }
        if d.value().is_some() {
            self.changed = true;
        }
        let old = std::mem::replace(&mut self.nodes[r as usize].dom, d);
        self.record(Undo::Dom(r, old));
        self.wake(r);
        Ok(())
    }

    fn wake(&mut self, r: u32) {
        for i in 0..self.watches[r as usize].len() {
            let p = self.watches[r as usize][i];
            if self.props[p as usize].1 && !self.queued[p as usize] {
                self.queued[p as usize] = true;
                self.queue.push_back(p);
            }
        }
    }

    /// `value(x) = value(y) + d` for roots x, y.
    fn union(&mut self, x: u32, y: u32, d: i64) -> Result<()> {
        if x == y {
            return if d == 0 { Ok(()) } else { self.fail() };
        }
        let (child, root, off) = if self.nodes[x as usize].size <= self.nodes[y as usize].size {
            (x, y, d)
        } else {
            (y, x, -d)
        };
        let merged = self.nodes[root as usize]
            .dom
            .intersect(&self.nodes[child as usize].dom.shifted(-off));
        self.record(Undo::Link { child, root, watch_len: self.watches[root as usize].len() });
        let size = self.nodes[child as usize].size;
        let c = &mut self.nodes[child as usize];
        c.parent = root;
        c.offset = off;
        self.nodes[root as usize].size += size;
        let moved = self.watches[child as usize].clone();
        self.watches[root as usize].extend(moved);
        self.changed = true;
        self.wake(root);
        self.set_dom(root, merged)
    }

    pub fn post_range(&mut self, vars: &[VarId], lo: i64, hi: i64) -> Result<()> {
        self.check()?;
        if lo > hi {
            return Err(FluxError::Usage(format!("empty range {lo}..{hi}")));
        }
        for &v in vars {
            let (r, off) = self.find(v);
            let d = self.nodes[r.0 as usize].dom.intersect_range(lo - off, hi - off);
            self.set_dom(r.0, d)?;
        }
        self.propagate()
    }

    pub fn post_domain(&mut self, v: VarId, dom: &Domain) -> Result<()> {
        self.check()?;
        let (r, off) = self.find(v);
        let d = self.nodes[r.0 as usize].dom.intersect(&dom.shifted(-off));
        self.set_dom(r.0, d)?;
        self.propagate()
    }

    pub fn post(&mut self, f: &FdFormula) -> Result<()> {
        self.check()?;
        self.post_inner(f)?;
        self.propagate()
    }

    fn post_inner(&mut self, f: &FdFormula) -> Result<()> {
        match f {
            FdFormula::True => Ok(()),
            FdFormula::False => self.fail(),
            FdFormula::Atom(a) => {
                let lin = a.to_lin();
                match self.apply_lin(&lin)? {
                    Step::Done => Ok(()),
                    Step::Pending => {
                        self.add_prop(Prop::Lin(lin));
                        Ok(())
                    }
                }
            }
            FdFormula::And(fs) => fs.iter().try_for_each(|f| self.post_inner(f)),
            FdFormula::Or(fs) => {
                let mut rest = Vec::with_capacity(fs.len());
                for d in fs {
                    match self.decided_formula(d) {
                        Truth::True => return Ok(()),
                        Truth::False => {}
                        Truth::Unknown if !rest.contains(d) => rest.push(d.clone()),
                        Truth::Unknown => {}
                    }
                }
                match rest.len() {
                    0 => self.fail(),
                    1 => self.post_inner(&rest[0]),
                    _ => {
                        self.add_prop(Prop::Or(rest));
                        Ok(())
                    }
                }
            }
        }
    }

    fn add_prop(&mut self, p: Prop) {
        let id = self.props.len() as u32;
        let mut vars = Vec::new();
        match &p {
            Prop::Lin(l) => vars.extend(l.terms.iter().map(|t| t.1)),
            Prop::Or(fs) => fs.iter().for_each(|f| f.vars(&mut vars)),
        }
        self.props.push((p, true));
        self.queued.push(false);
        self.record(Undo::NewProp);
        let mut roots: Vec<u32> = vars.iter().map(|&v| self.find(v).0 .0).collect();
        roots.sort_unstable();
        roots.dedup();
        for r in roots {
            self.watches[r as usize].push(id);
            self.record(Undo::Watch(r));
        }
    }

    fn kill(&mut self, p: u32) {
        self.props[p as usize].1 = false;
        self.record(Undo::Kill(p));
    }

    pub fn propagate(&mut self) -> Result<()> {
        while let Some(p) = self.queue.pop_front() {
            self.queued[p as usize] = false;
            if !self.props[p as usize].1 {
                continue;
            }
            match self.props[p as usize].0.clone() {
                Prop::Lin(lin) => {
                    if let Step::Done = self.apply_lin(&lin)? {
                        self.kill(p);
                    }
                }
                Prop::Or(fs) => self.run_or(p, fs)?,
            }
        }
        Ok(())
    }

    fn run_or(&mut self, p: u32, fs: Vec<FdFormula>) -> Result<()> {
        let mut rest = Vec::with_capacity(fs.len());
        for d in &fs {
            match self.decided_formula(d) {
                Truth::True => {
                    self.kill(p);
                    return Ok(());
                }
                Truth::False => {}
                Truth::Unknown => rest.push(d.clone()),
            }
        }
        match rest.len() {
            0 => self.fail(),
            1 => {
                self.kill(p);
                self.post_inner(&rest[0])
            }
            n if n < fs.len() => {
                self.record(Undo::OrList(p, fs));
                self.props[p as usize].0 = Prop::Or(rest);
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn normalize(&self, lin: &Lin) -> Norm {
        let mut k = lin.k;
        let mut terms: Vec<(i64, u32)> = Vec::with_capacity(lin.terms.len());
        for &(c, v) in &lin.terms {
            let (r, off) = self.find(v);
            k += c as i128 * off as i128;
            match self.nodes[r.0 as usize].dom.value() {
                Some(x) => k += c as i128 * x as i128,
                None => match terms.iter_mut().find(|t| t.1 == r.0) {
                    Some(t) => t.0 += c,
                    None => terms.push((c, r.0)),
                },
            }
        }
        terms.retain(|t| t.0 != 0);
        Norm { terms, k }
    }

    /// Bounds of `c·x` for root x; `None` means unbounded on that side.
    fn term_bounds(&self, c: i64, r: u32) -> (Option<i128>, Option<i128>) {
        let d = &self.nodes[r as usize].dom;
        let lo = (d.lo > -INF).then(|| c as i128 * d.lo as i128);
        let hi = (d.hi < INF).then(|| c as i128 * d.hi as i128);
        if c > 0 {
            (lo, hi)
        } else {
            (hi, lo)
        }
    }

    fn sum_bounds(&self, n: &Norm) -> (Option<i128>, Option<i128>) {
        let mut lo = Some(n.k);
        let mut hi = Some(n.k);
        for &(c, r) in &n.terms {
            let (a, b) = self.term_bounds(c, r);
            lo = lo.zip(a).map(|(x, y)| x + y);
            hi = hi.zip(b).map(|(x, y)| x + y);
        }
        (lo, hi)
    }

    fn apply_lin(&mut self, lin: &Lin) -> Result<Step> {
        let n = self.normalize(lin);
        match lin.rel {
            Rel::Eq => match n.terms.as_slice() {
                [] => {
                    if n.k == 0 {
                        Ok(Step::Done)
                    } else {
                        self.fail()
                    }
                }
                &[(c, x)] => {
                    if n.k % c as i128 != 0 {
                        return self.fail();
                    }
                    let v = clamp(-n.k / c as i128);
                    let d = self.nodes[x as usize].dom.intersect_range(v, v);
                    self.set_dom(x, d)?;
                    Ok(Step::Done)
                }
                &[(c1, x), (c2, y)] if c1 == -c2 => {
                    if n.k % c1 as i128 != 0 {
                        return self.fail();
                    }
                    // c1·(x − y) + k = 0
                    self.union(x, y, clamp(-n.k / c1 as i128))?;
                    Ok(Step::Done)
                }
                _ => self.bounds_eq(&n),
            },
            Rel::Ne => match n.terms.as_slice() {
                [] => {
                    if n.k != 0 {
                        Ok(Step::Done)
                    } else {
                        self.fail()
                    }
                }
                &[(c, x)] => {
                    if n.k % c as i128 == 0 {
                        let d = self.nodes[x as usize].dom.without(clamp(-n.k / c as i128));
                        self.set_dom(x, d)?;
                    }
                    Ok(Step::Done)
                }
                _ => {
                    let (lo, hi) = self.sum_bounds(&n);
                    if lo.is_some_and(|l| l > 0) || hi.is_some_and(|h| h < 0) {
                        Ok(Step::Done)
                    } else {
                        Ok(Step::Pending)
                    }
                }
            },
            Rel::Le => self.bounds_le(&n),
        }
    }

    fn bounds_le(&mut self, n: &Norm) -> Result<Step> {
        let (lo, hi) = self.sum_bounds(n);
        if lo.is_some_and(|l| l > 0) {
            return self.fail();
        }
        if hi.is_some_and(|h| h <= 0) {
            return Ok(Step::Done);
        }
        for i in 0..n.terms.len() {
            let (c, x) = n.terms[i];
            // c·x ≤ −(lo − lo_i)
            let Some(rest) = self.rest_min(n, i) else { continue };
            let bound = -rest;
            let d = &self.nodes[x as usize].dom;
            let nd = if c > 0 {
                d.intersect_range(-INF, clamp(div_floor(bound, c as i128)))
            } else {
                d.intersect_range(clamp(div_ceil(bound, c as i128)), INF)
            };
            self.set_dom(x, nd)?;
        }
        Ok(Step::Pending)
    }

    fn rest_min(&self, n: &Norm, skip: usize) -> Option<i128> {
        let mut s = n.k;
        for (j, &(c, r)) in n.terms.iter().enumerate() {
            if j != skip {
                s += self.term_bounds(c, r).0?;
            }
        }
        Some(s)
    }

    fn rest_max(&self, n: &Norm, skip: usize) -> Option<i128> {
        let mut s = n.k;
        for (j, &(c, r)) in n.terms.iter().enumerate() {
            if j != skip {
                s += self.term_bounds(c, r).1?;
            }
        }
        Some(s)
    }

    fn bounds_eq(&mut self, n: &Norm) -> Result<Step> {
        let (lo, hi) = self.sum_bounds(n);
        if lo.is_some_and(|l| l > 0) || hi.is_some_and(|h| h < 0) {
            return self.fail();
        }
        for i in 0..n.terms.len() {
            let (c, x) = n.terms[i];
            // c·x ∈ [−rest_max, −rest_min]
            let upper = self.rest_min(n, i).map(|m| -m);
            let lower = self.rest_max(n, i).map(|m| -m);
            let (mut l, mut h) = (-INF, INF);
            if c > 0 {
                if let Some(u) = upper {
                    h = clamp(div_floor(u, c as i128));
                }
                if let Some(w) = lower {
                    l = clamp(div_ceil(w, c as i128));
                }
            } else {
                if let Some(u) = upper {
                    l = clamp(div_ceil(u, c as i128));
                }
                if let Some(w) = lower {
                    h = clamp(div_floor(w, c as i128));
                }
            }
            let nd = self.nodes[x as usize].dom.intersect_range(l, h);
            self.set_dom(x, nd)?;
        }
        Ok(Step::Pending)
    }

    fn decided_lin(&self, lin: &Lin) -> Truth {
        let n = self.normalize(lin);
        let eq = || -> Truth {
            match n.terms.as_slice() {
                [] => truth(n.k == 0),
                &[(c, x)] => {
                    if n.k % c as i128 != 0 {
                        return Truth::False;
                    }
                    let v = -n.k / c as i128;
                    if v.abs() >= INF as i128 || !self.nodes[x as usize].dom.contains(v as i64) {
                        Truth::False
                    } else {
                        Truth::Unknown
                    }
                }
                _ => {
                    let (lo, hi) = self.sum_bounds(&n);
                    if lo.is_some_and(|l| l > 0) || hi.is_some_and(|h| h < 0) {
                        Truth::False
                    } else {
                        Truth::Unknown
                    }
                }
            }
        };
        match lin.rel {
            Rel::Eq => eq(),
            Rel::Ne => eq().not(),
            Rel::Le => {
                let (lo, hi) = self.sum_bounds(&n);
                if hi.is_some_and(|h| h <= 0) {
                    Truth::True
                } else if lo.is_some_and(|l| l > 0) {
                    Truth::False
                } else {
                    Truth::Unknown
                }
            }
        }
    }

    /// Entailment status of an atom under current domains and aliases.
    pub fn decided(&self, a: &FdAtom) -> Truth {
        self.decided_lin(&a.to_lin())
    }

    pub fn decided_formula(&self, f: &FdFormula) -> Truth {
        match f {
            FdFormula::True => Truth::True,
            FdFormula::False => Truth::False,
            FdFormula::Atom(a) => self.decided(a),
            FdFormula::And(fs) => {
                let mut all = true;
                for f in fs {
                    match self.decided_formula(f) {
                        Truth::False => return Truth::False,
                        Truth::Unknown => all = false,
                        Truth::True => {}
                    }
                }
                truth_or_unknown(all)
            }
            FdFormula::Or(fs) => {
                let mut none = true;
                for f in fs {
                    match self.decided_formula(f) {
                        Truth::True => return Truth::True,
                        Truth::Unknown => none = false,
                        Truth::False => {}
                    }
                }
                if none {
                    Truth::False
                } else {
                    Truth::Unknown
                }
            }
        }
    }

    /// Whether posting `f` makes the store fail. The store is left unchanged.
    pub fn entails_false(&mut self, f: &FdFormula) -> bool {
        if self.failed {
            return true;
        }
        match self.decided_formula(f) {
            Truth::False => return true,
            Truth::True => return false,
            Truth::Unknown => {}
        }
        let changed = self.changed;
        let m = self.snapshot();
        let r = self.post(f);
        self.rollback(m).expect("balanced speculative rollback");
        self.changed = changed;
        r.is_err()
    }

    /// Suspended constraints in declarative form (aliases and domains are
    /// read through [`FdStore::find`] and [`FdStore::domain`]).
    pub fn live_formulas(&self) -> Vec<FdFormula> {
        self.props
            .iter()
            .filter(|p| p.1)
            .map(|(p, _)| match p {
                Prop::Lin(l) => FdFormula::Atom(FdAtom {
                    lhs: LinExpr { constant: clamp(l.k), terms: l.terms.clone() },
                    op: match l.rel {
                        Rel::Eq => Op::Eq,
                        Rel::Ne => Op::Ne,
                        Rel::Le => Op::Le,
                    },
                    rhs: LinExpr::constant(0),
                }),
                Prop::Or(fs) => FdFormula::Or(fs.clone()),
            })
            .collect()
    }

    /// Whether an assignment (keyed by var id) satisfies domains, aliases and
    /// all live constraints.
    pub fn satisfied_by(&self, val: &dyn Fn(VarId) -> i64) -> bool {
        for i in 0..self.nodes.len() {
            let n = &self.nodes[i];
            let v = val(VarId(i as u32));
            if n.parent as usize == i {
                if !n.dom.contains(v) {
                    return false;
                }
            } else if v != val(VarId(n.parent)) + n.offset {
                return false;
            }
        }
        self.live_formulas().iter().all(|f| f.eval(val))
    }
}

fn truth(b: bool) -> Truth {
    if b {
        Truth::True
    } else {
        Truth::False
    }
}

fn truth_or_unknown(b: bool) -> Truth {
    if b {
        Truth::True
    } else {
        Truth::Unknown
    }
}

fn clamp(v: i128) -> i64 {
    v.clamp(-(INF as i128), INF as i128) as i64
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}
