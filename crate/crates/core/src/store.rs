//! Constraint store over open fluent lists.
//!
//! States are linked lists of cells on a heap owned by the store. A cell is
//! an open tail, the empty list, or a cons of a fluent and another cell.
//! State constraints live on open tails and are rewritten to fixpoint by the
//! negation, disjunction and cancellation rules. All changes go on a trail
//! while a snapshot is active.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{FluxError, Result};
use crate::fd::{FdAtom, FdFormula, FdMark, FdStore};
use crate::terms::{
    identical, is_instance, not_unifiable, ArgTerm, Args, Fluent, Symbol, VarId,
};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ListId(pub u32);

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Open,
    Nil,
    Cons(Fluent, ListId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Disjunct {
    Fluent(Fluent),
    Eq(Args, Args),
}

impl Disjunct {
    fn has_vars(&self) -> bool {
        match self {
            Disjunct::Fluent(f) => !f.is_ground(),
            Disjunct::Eq(x, y) => x.iter().chain(y.iter()).any(ArgTerm::is_var),
        }
    }

    fn as_fluent(&self) -> Option<&Fluent> {
        match self {
            Disjunct::Fluent(f) => Some(f),
            Disjunct::Eq(..) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quant {
    Exists,
    Forall,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateConstraint {
    NotHolds(Fluent, ListId),
    NotHoldsAll(Fluent, ListId),
    OrHolds(Vec<Disjunct>, ListId),
    OrHolds3 { pending: Vec<Disjunct>, evaluated: Vec<Disjunct>, list: ListId },
    DuplicateFree(ListId),
    Cancel(Fluent, ListId),
    Cancelled(Fluent, ListId),
}

impl StateConstraint {
    pub fn list(&self) -> ListId {
        match self {
            StateConstraint::NotHolds(_, l)
            | StateConstraint::NotHoldsAll(_, l)
            | StateConstraint::OrHolds(_, l)
            | StateConstraint::DuplicateFree(l)
            | StateConstraint::Cancel(_, l)
            | StateConstraint::Cancelled(_, l) => *l,
            StateConstraint::OrHolds3 { list, .. } => *list,
        }
    }
}

/// Handle on a state: the first cell of its fluent list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct State {
    pub root: ListId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tail {
    Open(ListId),
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NewTail {
    Fresh,
    Closed,
}

/// Trail position returned by [`Store::snapshot`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Snapshot {
    trail: usize,
    depth: usize,
    fd: FdMark,
}

pub(crate) type CId = u32;

#[derive(Clone, Debug)]
enum Body {
    NotHolds(Fluent),
    NotHoldsAll(Fluent),
    OrHolds(Vec<Disjunct>),
    OrHolds3(Vec<Disjunct>, Vec<Disjunct>),
    DuplicateFree,
    Cancel(Fluent),
    Cancelled(Fluent),
}

#[derive(Clone, Debug)]
struct Slot {
    body: Body,
    list: ListId,
    alive: bool,
    indexed: bool,
    nonground: bool,
    seq: u64,
}

#[derive(Clone, Debug, Default)]
struct ListIndex {
    nh: HashMap<Fluent, Vec<CId>>,
    nh_var: Vec<CId>,
    nha: Vec<CId>,
    or: Vec<CId>,
    dup: Vec<CId>,
    cancel: Vec<CId>,
    cancelled: Vec<CId>,
}

#[derive(Clone)]
enum Undo {
    Cell(ListId, Cell),
    NewCell,
    AddSlot,
    Kill(CId),
    MoveIndex(ListId, ListId),
}

/// Holds alternatives of a fluent against a list, in Prolog clause order.
#[derive(Clone, Debug)]
pub(crate) enum Cand {
    /// Unify with the entry in this cons cell.
    Entry(ListId, Fluent, bool),
    /// Extend this open tail.
    Tail(ListId),
}

/// Counters for top-level assertions (used by the benchmark).
#[derive(Clone, Copy, Debug, Default)]
pub struct Stats {
    pub asserts: u64,
    pub assert_nanos: u64,
}

/// Deep copies are independent stores.
#[derive(Clone, Default)]
pub struct Store {
    pub(crate) fd: FdStore,
    cells: Vec<Cell>,
    slots: Vec<Slot>,
    index: HashMap<ListId, ListIndex>,
    nonground: Vec<CId>,
    agenda: VecDeque<CId>,
    trail: Vec<Undo>,
    marks: Vec<usize>,
    failed: bool,
    seq: u64,
    kills: usize,
    arities: HashMap<Symbol, usize>,
    stats: Stats,
}

pub fn build_or_neq(q: Quant, a: &Fluent, b: &Fluent) -> FdFormula {
    if a.functor != b.functor || a.args.len() != b.args.len() {
        return FdFormula::True;
    }
    let mut ds = Vec::new();
    for (i, (x, y)) in a.args.iter().zip(b.args.iter()).enumerate() {
        match (q, x) {
            (Quant::Forall, ArgTerm::Var(v)) => {
                let next = a.args[i + 1..].iter().position(|t| *t == ArgTerm::Var(*v));
                if let Some(j) = next {
                    ds.push(FdFormula::Atom(FdAtom::ne(*y, b.args[i + 1 + j])));
                }
            }
            _ => ds.push(FdFormula::Atom(FdAtom::ne(*x, *y))),
        }
    }
    if ds.is_empty() {
        FdFormula::False
    } else {
        FdFormula::Or(ds)
    }
}

pub fn build_and_eq(xs: &[ArgTerm], ys: &[ArgTerm]) -> Result<FdFormula> {
    if xs.len() != ys.len() {
        return Err(FluxError::Usage("and_eq over lists of different length".into()));
    }
    let mut eqs: Vec<FdFormula> =
        xs.iter().zip(ys).map(|(x, y)| FdFormula::Atom(FdAtom::eq(*x, *y))).collect();
    Ok(match eqs.len() {
        0 => FdFormula::True,
        1 => eqs.pop().unwrap(),
        _ => FdFormula::And(eqs),
    })
}

pub fn build_or_and_eq(eqs: &[(Args, Args)]) -> Result<FdFormula> {
    if eqs.is_empty() {
        return Ok(FdFormula::False);
    }
    let ds = eqs.iter().map(|(x, y)| build_and_eq(x, y)).collect::<Result<Vec<_>>>()?;
    Ok(FdFormula::Or(ds))
}

fn neq_args(xs: &[ArgTerm], ys: &[ArgTerm]) -> FdFormula {
    if xs.is_empty() {
        return FdFormula::False;
    }
    FdFormula::Or(xs.iter().zip(ys).map(|(x, y)| FdFormula::Atom(FdAtom::ne(*x, *y))).collect())
}

impl Store {
    pub fn new() -> Store {
        Store::default()
    }

    pub fn fd(&self) -> &FdStore {
        &self.fd
    }

    pub fn fd_mut(&mut self) -> &mut FdStore {
        &mut self.fd
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    pub fn new_var(&mut self) -> VarId {
        self.fd.new_var()
    }

    pub fn is_consistent(&self) -> bool {
        !self.failed && self.fd.is_consistent()
    }

    fn record(&mut self, u: Undo) {
        if !self.marks.is_empty() {
            self.trail.push(u);
        }
    }

    fn check(&self) -> Result<()> {
        if self.is_consistent() {
            Ok(())
        } else {
            Err(FluxError::Inconsistent)
        }
    }

    /// Register or check the arity of a functor for this session.
    pub fn check_arity(&mut self, f: &Fluent) -> Result<()> {
        let n = *self.arities.entry(f.functor).or_insert(f.args.len());
        if n != f.args.len() {
            return Err(FluxError::Arity {
                functor: f.functor.text(),
                expected: n,
                got: f.args.len(),
            });
        }
        for v in f.vars() {
            self.fd.ensure_vars(v.0 as usize + 1);
        }
        Ok(())
    }

    fn new_cell(&mut self, c: Cell) -> ListId {
        let id = ListId(self.cells.len() as u32);
        self.cells.push(c);
        self.record(Undo::NewCell);
        id
    }

    pub fn open_list(&mut self) -> ListId {
        self.new_cell(Cell::Open)
    }

    pub fn nil(&mut self) -> ListId {
        self.new_cell(Cell::Nil)
    }

    pub fn cons(&mut self, f: Fluent, tail: ListId) -> Result<ListId> {
        self.check_arity(&f)?;
        Ok(self.new_cell(Cell::Cons(f, tail)))
    }

    pub fn cell(&self, l: ListId) -> &Cell {
        &self.cells[l.0 as usize]
    }

    /// Build a state `[f1, ..., fk | Z]` (open) or `[f1, ..., fk]` (closed).
    pub fn state(&mut self, known: &[Fluent], open: bool) -> Result<State> {
        let mut l = if open { self.open_list() } else { self.nil() };
        for f in known.iter().rev() {
            l = self.cons(f.clone(), l)?;
        }
        Ok(State { root: l })
    }

    /// Listed fluents of a state, with fixed variables resolved.
    pub fn known(&self, s: State) -> Vec<Fluent> {
        let mut out = Vec::new();
        let mut l = s.root;
        while let Cell::Cons(f, next) = self.cell(l) {
            out.push(self.resolve_fluent(f));
            l = *next;
        }
        out
    }

    pub fn tail(&self, s: State) -> Tail {
        let mut l = s.root;
        loop {
            match self.cell(l) {
                Cell::Cons(_, next) => l = *next,
                Cell::Open => return Tail::Open(l),
                Cell::Nil => return Tail::Closed,
            }
        }
    }

    pub fn resolve(&self, a: ArgTerm) -> ArgTerm {
        self.fd.resolve(a)
    }

    pub fn resolve_fluent(&self, f: &Fluent) -> Fluent {
        if f.is_ground() {
            return f.clone();
        }
        Fluent { functor: f.functor, args: f.args.iter().map(|a| self.fd.resolve(*a)).collect() }
    }

    fn resolve_args(&self, a: &Args) -> Args {
        a.iter().map(|x| self.fd.resolve(*x)).collect()
    }

    fn resolve_disjunct(&self, d: &Disjunct) -> Disjunct {
        match d {
            Disjunct::Fluent(f) => Disjunct::Fluent(self.resolve_fluent(f)),
            Disjunct::Eq(x, y) => Disjunct::Eq(self.resolve_args(x), self.resolve_args(y)),
        }
    }

    fn resolve_body(&self, b: &Body) -> Body {
        let ds = |v: &Vec<Disjunct>| v.iter().map(|d| self.resolve_disjunct(d)).collect();
        match b {
            Body::NotHolds(f) => Body::NotHolds(self.resolve_fluent(f)),
            Body::NotHoldsAll(f) => Body::NotHoldsAll(f.clone()),
            Body::OrHolds(v) => Body::OrHolds(ds(v)),
            Body::OrHolds3(v, w) => Body::OrHolds3(ds(v), ds(w)),
            Body::DuplicateFree => Body::DuplicateFree,
            Body::Cancel(f) => Body::Cancel(self.resolve_fluent(f)),
            Body::Cancelled(f) => Body::Cancelled(self.resolve_fluent(f)),
        }
    }

    // ---- snapshots ----

    pub fn snapshot(&mut self) -> Snapshot {
        debug_assert!(self.agenda.is_empty());
        let fd = self.fd.snapshot();
        self.marks.push(self.trail.len());
        Snapshot { trail: self.trail.len(), depth: self.marks.len(), fd }
    }

    fn check_mark(&self, s: Snapshot) -> Result<()> {
        if self.marks.len() != s.depth || self.marks.last() != Some(&s.trail) {
            return Err(FluxError::Usage("snapshots must be released in LIFO order".into()));
        }
        Ok(())
    }

    pub fn rollback(&mut self, s: Snapshot) -> Result<()> {
        self.check_mark(s)?;
        while self.trail.len() > s.trail {
            match self.trail.pop().unwrap() {
                Undo::Cell(l, c) => self.cells[l.0 as usize] = c,
                Undo::NewCell => {
                    self.cells.pop();
                }
                Undo::AddSlot => self.pop_slot(),
                Undo::Kill(c) => self.slots[c as usize].alive = true,
                Undo::MoveIndex(from, to) => {
                    let ix = self.index.remove(&to).unwrap_or_default();
                    self.index.insert(from, ix);
                }
            }
        }
        self.marks.pop();
        self.agenda.clear();
        self.failed = false;
        self.fd.rollback(s.fd)
    }

    /// Release a snapshot, keeping everything done since.
    pub fn commit(&mut self, s: Snapshot) -> Result<()> {
        self.check_mark(s)?;
        self.marks.pop();
        if self.marks.is_empty() {
            self.trail.clear();
        }
        self.fd.commit(s.fd)
    }

    pub fn depth(&self) -> usize {
        self.marks.len()
    }

    fn pop_slot(&mut self) {
        let cid = (self.slots.len() - 1) as CId;
        let slot = self.slots.pop().unwrap();
        if slot.nonground && self.nonground.last() == Some(&cid) {
            self.nonground.pop();
        }
        if !slot.indexed {
            return;
        }
        let ix = self.index.get_mut(&slot.list).expect("index of a live list");
        let v = match &slot.body {
            Body::NotHolds(f) if f.is_ground() => {
                let v = ix.nh.get_mut(f).unwrap();
                v.pop();
                if v.is_empty() {
                    ix.nh.remove(f);
                }
                return;
            }
            Body::NotHolds(_) => &mut ix.nh_var,
            Body::NotHoldsAll(_) => &mut ix.nha,
            Body::OrHolds(_) | Body::OrHolds3(..) => &mut ix.or,
            Body::DuplicateFree => &mut ix.dup,
            Body::Cancel(_) => &mut ix.cancel,
            Body::Cancelled(_) => &mut ix.cancelled,
        };
        debug_assert_eq!(v.last(), Some(&cid));
        v.pop();
    }

    // ---- slots ----

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn push_slot(&mut self, body: Body, list: ListId, seq: u64) -> CId {
        let indexed = matches!(self.cell(list), Cell::Open);
        let nonground = match &body {
            Body::NotHolds(f) | Body::Cancel(f) | Body::Cancelled(f) => !f.is_ground(),
            Body::NotHoldsAll(_) | Body::DuplicateFree => false,
            Body::OrHolds(v) => v.iter().any(Disjunct::has_vars),
            Body::OrHolds3(v, w) => v.iter().chain(w).any(Disjunct::has_vars),
        };
        let cid = self.slots.len() as CId;
        if indexed {
            let ix = self.index.entry(list).or_default();
            match &body {
                Body::NotHolds(f) if f.is_ground() => ix.nh.entry(f.clone()).or_default().push(cid),
                Body::NotHolds(_) => ix.nh_var.push(cid),
                Body::NotHoldsAll(_) => ix.nha.push(cid),
                Body::OrHolds(_) | Body::OrHolds3(..) => ix.or.push(cid),
                Body::DuplicateFree => ix.dup.push(cid),
                Body::Cancel(_) => ix.cancel.push(cid),
                Body::Cancelled(_) => ix.cancelled.push(cid),
            }
        }
        if nonground {
            self.nonground.push(cid);
        }
        self.slots.push(Slot { body, list, alive: true, indexed, nonground, seq });
        self.record(Undo::AddSlot);
        self.agenda.push_back(cid);
        cid
    }

    fn kill(&mut self, c: CId) {
        if self.slots[c as usize].alive {
            self.slots[c as usize].alive = false;
            self.kills += 1;
            self.record(Undo::Kill(c));
        }
    }

    fn alive(&self, c: CId) -> bool {
        self.slots[c as usize].alive
    }

    /// Current list of a constraint: indexed ones follow tails bound since.
    fn list_of(&self, c: CId) -> ListId {
        let s = &self.slots[c as usize];
        let mut l = s.list;
        if s.indexed {
            while let Cell::Cons(_, next) = self.cell(l) {
                l = *next;
            }
        }
        l
    }

    fn live(&self, v: &[CId]) -> Vec<CId> {
        v.iter().copied().filter(|&c| self.alive(c)).collect()
    }

    fn ix(&self, l: ListId) -> Option<&ListIndex> {
        self.index.get(&l)
    }

    fn nh_all(&self, l: ListId) -> Vec<CId> {
        match self.ix(l) {
            Some(ix) => ix
                .nh
                .values()
                .flatten()
                .chain(ix.nh_var.iter())
                .copied()
                .filter(|&c| self.alive(c))
                .collect(),
            None => Vec::new(),
        }
    }

    fn fluent_of(&self, c: CId) -> &Fluent {
        match &self.slots[c as usize].body {
            Body::NotHolds(f)
            | Body::NotHoldsAll(f)
            | Body::Cancel(f)
            | Body::Cancelled(f) => f,
            _ => unreachable!("constraint without a fluent"),
        }
    }

    fn disjuncts_of(&self, c: CId) -> &[Disjunct] {
        match &self.slots[c as usize].body {
            Body::OrHolds(v) => v,
            Body::OrHolds3(v, _) => v,
            _ => unreachable!("not a disjunction"),
        }
    }

    // ---- posting ----

    /// Post `neq(a, b)` under the quantifier; cheap cases avoid the fd store.
    fn post_neq(&mut self, q: Quant, a: &Fluent, b: &Fluent) -> Result<()> {
        if a.functor != b.functor {
            return Ok(());
        }
        if a.is_ground() && b.is_ground() {
            return if a == b { Err(FluxError::Inconsistent) } else { Ok(()) };
        }
        self.fd.post(&build_or_neq(q, a, b))
    }

    /// Add a constraint and walk list-walking rules eagerly.
    fn add(&mut self, body: Body, mut list: ListId, seq: u64) -> Result<()> {
        let body = self.resolve_body(&body);
        match body {
            Body::NotHolds(ref f) | Body::NotHoldsAll(ref f) => {
                let q = if matches!(body, Body::NotHolds(_)) { Quant::Exists } else { Quant::Forall };
                loop {
                    match self.cell(list).clone() {
                        Cell::Nil => return Ok(()),
                        Cell::Cons(g, next) => {
                            let g = self.resolve_fluent(&g);
                            let f = if q == Quant::Exists { self.resolve_fluent(f) } else { f.clone() };
                            self.post_neq(q, &f, &g)?;
                            list = next;
                        }
                        Cell::Open => break,
                    }
                }
                let body = self.resolve_body(&body);
                self.push_slot(body, list, seq);
            }
            Body::DuplicateFree => {
                loop {
                    match self.cell(list).clone() {
                        Cell::Nil => return Ok(()),
                        Cell::Cons(g, next) => {
                            let s = self.next_seq();
                            self.add(Body::NotHolds(g), next, s)?;
                            list = next;
                        }
                        Cell::Open => break,
                    }
                }
                self.push_slot(Body::DuplicateFree, list, seq);
            }
            Body::Cancel(_) | Body::Cancelled(_) => {
                if !matches!(self.cell(list), Cell::Open) {
                    return Err(FluxError::Usage("cancel markers belong on an open tail".into()));
                }
                self.push_slot(body, list, seq);
            }
            Body::OrHolds(_) | Body::OrHolds3(..) => {
                self.push_slot(body, list, seq);
            }
        }
        Ok(())
    }

    fn body_of(c: &StateConstraint) -> (Body, ListId) {
        match c.clone() {
            StateConstraint::NotHolds(f, l) => (Body::NotHolds(f), l),
            StateConstraint::NotHoldsAll(f, l) => (Body::NotHoldsAll(f), l),
            StateConstraint::OrHolds(v, l) => (Body::OrHolds(v), l),
            StateConstraint::OrHolds3 { pending, evaluated, list } => {
                (Body::OrHolds3(pending, evaluated), list)
            }
            StateConstraint::DuplicateFree(l) => (Body::DuplicateFree, l),
            StateConstraint::Cancel(f, l) => (Body::Cancel(f), l),
            StateConstraint::Cancelled(f, l) => (Body::Cancelled(f), l),
        }
    }

    fn check_body(&mut self, b: &Body) -> Result<()> {
        let check_ds = |s: &mut Store, v: &[Disjunct]| -> Result<()> {
            for d in v {
                match d {
                    Disjunct::Fluent(f) => s.check_arity(f)?,
                    Disjunct::Eq(x, y) => {
                        if x.len() != y.len() {
                            return Err(FluxError::Usage("eq disjunct of unequal length".into()));
                        }
                        for v in x.iter().chain(y.iter()).filter_map(ArgTerm::as_var) {
                            s.fd.ensure_vars(v.0 as usize + 1);
                        }
                    }
                }
            }
            Ok(())
        };
        match b {
            Body::NotHolds(f) | Body::NotHoldsAll(f) | Body::Cancel(f) | Body::Cancelled(f) => {
                self.check_arity(f)
            }
            Body::OrHolds(v) => check_ds(self, v),
            Body::OrHolds3(v, w) => {
                check_ds(self, v)?;
                check_ds(self, w)
            }
            Body::DuplicateFree => Ok(()),
        }
    }

    /// Add a state constraint and propagate to fixpoint.
    pub fn assert_constraint(&mut self, c: StateConstraint) -> Result<()> {
        let t0 = Instant::now();
        let r = self.assert_inner(c);
        self.stats.asserts += 1;
        self.stats.assert_nanos += t0.elapsed().as_nanos() as u64;
        r
    }

    fn assert_inner(&mut self, c: StateConstraint) -> Result<()> {
        self.check()?;
        let (body, list) = Store::body_of(&c);
        self.check_body(&body)?;
        let seq = self.next_seq();
        let r = self.add(body, list, seq).and_then(|_| self.run());
        self.settle(r)
    }

    pub(crate) fn settle(&mut self, r: Result<()>) -> Result<()> {
        match r {
            Ok(()) => {
                if self.marks.is_empty() && self.kills > 4096 {
                    self.compact();
                }
                Ok(())
            }
            Err(e) => {
                if e == FluxError::Inconsistent {
                    self.failed = true;
                }
                self.agenda.clear();
                Err(e)
            }
        }
    }

    /// Drop dead entries from indexes. Only valid with no active snapshot.
    fn compact(&mut self) {
        self.kills = 0;
        let slots = &self.slots;
        let alive = |c: &CId| slots[*c as usize].alive;
        for ix in self.index.values_mut() {
            ix.nh.retain(|_, v| {
                v.retain(alive);
                !v.is_empty()
            });
            for v in [
                &mut ix.nh_var,
                &mut ix.nha,
                &mut ix.or,
                &mut ix.dup,
                &mut ix.cancel,
                &mut ix.cancelled,
            ] {
                v.retain(alive);
            }
        }
        self.index.retain(|_, ix| {
            !(ix.nh.is_empty()
                && ix.nh_var.is_empty()
                && ix.nha.is_empty()
                && ix.or.is_empty()
                && ix.dup.is_empty()
                && ix.cancel.is_empty()
                && ix.cancelled.is_empty())
        });
        self.nonground.retain(alive);
    }

    /// Extend an open tail by `head`; returns the new tail cell.
    pub fn bind_tail(&mut self, tail: ListId, head: Fluent, new_tail: NewTail) -> Result<ListId> {
        self.check()?;
        self.check_arity(&head)?;
        if !matches!(self.cell(tail), Cell::Open) {
            return Err(FluxError::Usage("bind_tail on a list that is not an open tail".into()));
        }
        let r = self.bind_inner(tail, head, new_tail).and_then(|l| self.run().map(|_| l));
        match r {
            Ok(l) => {
                self.settle(Ok(()))?;
                Ok(l)
            }
            Err(e) => self.settle(Err(e)).map(|_| tail),
        }
    }

    /// Close an open tail (`Z = []`).
    pub fn close_tail(&mut self, tail: ListId) -> Result<()> {
        self.check()?;
        if !matches!(self.cell(tail), Cell::Open) {
            return Err(FluxError::Usage("close_tail on a list that is not an open tail".into()));
        }
        let r = self.close_inner(tail).and_then(|_| self.run());
        self.settle(r)
    }

    fn set_cell(&mut self, l: ListId, c: Cell) {
        let old = std::mem::replace(&mut self.cells[l.0 as usize], c);
        self.record(Undo::Cell(l, old));
    }

    fn close_inner(&mut self, t: ListId) -> Result<()> {
        self.set_cell(t, Cell::Nil);
        let Some(ix) = self.index.get(&t).cloned() else { return Ok(()) };
        let nh: Vec<CId> = ix.nh.values().flatten().copied().collect();
        for c in nh.into_iter().chain(ix.nh_var).chain(ix.nha).chain(ix.dup).chain(ix.cancel).chain(ix.cancelled) {
            self.kill(c);
        }
        for c in self.live(&ix.or) {
            self.requeue_walk(c, t);
        }
        Ok(())
    }

    /// Re-add a disjunction on a list that just stopped being an open tail.
    fn requeue_walk(&mut self, c: CId, l: ListId) {
        let slot = self.slots[c as usize].clone();
        self.kill(c);
        self.push_slot(slot.body, l, slot.seq);
    }

    pub(crate) fn bind_inner(&mut self, t: ListId, head: Fluent, new_tail: NewTail) -> Result<ListId> {
        let head = self.resolve_fluent(&head);
        if new_tail == NewTail::Closed {
            let nil = self.nil();
            let ix = self.index.get(&t).cloned();
            self.set_cell(t, Cell::Cons(head, nil));
            if let Some(ix) = ix {
                let nh: Vec<CId> = ix.nh.values().flatten().copied().collect();
                let all = nh.into_iter().chain(ix.nh_var).chain(ix.nha).chain(ix.or).chain(ix.dup);
                for c in all.collect::<Vec<_>>() {
                    if self.alive(c) {
                        let slot = self.slots[c as usize].clone();
                        self.kill(c);
                        self.add(slot.body, t, slot.seq)?;
                    }
                }
                for c in ix.cancel.into_iter().chain(ix.cancelled) {
                    self.kill(c);
                }
            }
            return Ok(nil);
        }
        let next = self.open_list();
        self.set_cell(t, Cell::Cons(head.clone(), next));
        let Some(ix) = self.index.remove(&t) else { return Ok(next) };
        self.index.insert(next, ix);
        self.record(Undo::MoveIndex(t, next));
        let ix = &self.index[&next];
        // Negative constraints meet the new head (R2, R4).
        let mut neq: Vec<(CId, Quant)> = Vec::new();
        if head.is_ground() {
            if let Some(v) = ix.nh.get(&head) {
                if v.iter().any(|&c| self.slots[c as usize].alive) {
                    return Err(FluxError::Inconsistent);
                }
            }
        } else {
            for (f, v) in &ix.nh {
                if f.functor == head.functor {
                    neq.extend(v.iter().map(|&c| (c, Quant::Exists)));
                }
            }
        }
        neq.extend(ix.nh_var.iter().map(|&c| (c, Quant::Exists)));
        neq.extend(ix.nha.iter().map(|&c| (c, Quant::Forall)));
        let ors = ix.or.clone();
        let dups = ix.dup.clone();
        for (c, q) in neq {
            if !self.alive(c) {
                continue;
            }
            let f = self.fluent_of(c).clone();
            if f.functor != head.functor {
                continue;
            }
            let f = if q == Quant::Exists { self.resolve_fluent(&f) } else { f };
            self.post_neq(q, &f, &head)?;
        }
        for c in ors {
            if self.alive(c) {
                self.requeue_walk(c, t);
            }
        }
        for c in dups {
            if self.alive(c) {
                let s = self.next_seq();
                self.add(Body::NotHolds(head.clone()), next, s)?;
                break;
            }
        }
        Ok(next)
    }

    // ---- propagation ----

    pub(crate) fn run(&mut self) -> Result<()> {
        loop {
            if self.fd.take_changed() {
                let ng = self.live(&self.nonground.clone());
                self.agenda.extend(ng);
            }
            let Some(c) = self.agenda.pop_front() else { break };
            if self.alive(c) {
                self.activate(c)?;
            }
        }
        Ok(())
    }

    fn activate(&mut self, c: CId) -> Result<()> {
        let list = self.list_of(c);
        let slot = &self.slots[c as usize];
        let seq = slot.seq;
        let resolved = self.resolve_body(&slot.body);
        if slot.nonground && !same_body(&resolved, &slot.body) {
            self.kill(c);
            return self.add(resolved, list, seq);
        }
        match resolved {
            Body::NotHolds(f) => self.act_not_holds(c, &f, list),
            Body::NotHoldsAll(f) => self.act_not_holds_all(c, &f, list),
            Body::OrHolds(v) => self.act_or(c, v, list),
            Body::OrHolds3(v, w) => {
                if let Cell::Cons(..) = self.cell(list) {
                    self.kill(c);
                    self.walk_or(v, w, list, seq)
                } else {
                    Ok(())
                }
            }
            Body::DuplicateFree => Ok(()),
            Body::Cancel(f) => self.act_cancel(c, &f, list),
            Body::Cancelled(f) => self.act_cancelled(c, &f, list),
        }
    }

    fn act_not_holds(&mut self, c: CId, f: &Fluent, l: ListId) -> Result<()> {
        let Some(ix) = self.ix(l) else { return Ok(()) };
        let nha = self.live(&ix.nha);
        let ors = self.live(&ix.or);
        let cancels = self.live(&ix.cancel);
        // R5
        if nha.iter().any(|&g| is_instance(f, self.fluent_of(g))) {
            self.kill(c);
            return Ok(());
        }
        // R14
        for o in ors {
            let ds = self.disjuncts_of(o);
            if ds.iter().any(|d| d.as_fluent().is_some_and(|g| identical(g, f))) {
                let kept: Vec<Disjunct> =
                    ds.iter().filter(|d| !d.as_fluent().is_some_and(|g| identical(g, f))).cloned().collect();
                self.rewrite_or(o, kept, l)?;
            }
        }
        // C1
        if cancels.iter().any(|&k| !not_unifiable(f, self.fluent_of(k))) {
            self.kill(c);
        }
        Ok(())
    }

    fn act_not_holds_all(&mut self, c: CId, f: &Fluent, l: ListId) -> Result<()> {
        let Some(ix) = self.ix(l) else { return Ok(()) };
        let nha = self.live(&ix.nha);
        let ors = self.live(&ix.or);
        let cancels = self.live(&ix.cancel);
        let seq = self.slots[c as usize].seq;
        // R6, this constraint as the removed head
        for &o in &nha {
            if o == c {
                continue;
            }
            let g = self.fluent_of(o);
            if is_instance(f, g) && (!is_instance(g, f) || self.slots[o as usize].seq < seq) {
                self.kill(c);
                return Ok(());
            }
        }
        // R5
        let nh: Vec<CId> = if f.is_ground() {
            let mut v = self.ix(l).and_then(|ix| ix.nh.get(f).cloned()).unwrap_or_default();
            v.extend(self.ix(l).map(|ix| ix.nh_var.clone()).unwrap_or_default());
            v
        } else {
            self.nh_all(l)
        };
        for g in nh {
            if self.alive(g) && is_instance(self.fluent_of(g), f) {
                self.kill(g);
            }
        }
        // R6, this constraint as the kept head
        for o in nha {
            if o != c && self.alive(o) && is_instance(self.fluent_of(o), f) {
                self.kill(o);
            }
        }
        // R15
        for o in ors {
            let ds = self.disjuncts_of(o);
            if ds.iter().any(|d| d.as_fluent().is_some_and(|g| is_instance(g, f))) {
                let kept: Vec<Disjunct> =
                    ds.iter().filter(|d| !d.as_fluent().is_some_and(|g| is_instance(g, f))).cloned().collect();
                self.rewrite_or(o, kept, l)?;
            }
        }
        // C2
        if cancels.iter().any(|&k| !not_unifiable(f, self.fluent_of(k))) {
            self.kill(c);
        }
        Ok(())
    }

    fn rewrite_or(&mut self, c: CId, v: Vec<Disjunct>, l: ListId) -> Result<()> {
        let seq = self.slots[c as usize].seq;
        self.kill(c);
        if v.is_empty() {
            return Err(FluxError::Inconsistent);
        }
        self.add(Body::OrHolds(v), l, seq)
    }

    fn act_or(&mut self, c: CId, v: Vec<Disjunct>, l: ListId) -> Result<()> {
        if v.is_empty() {
            return Err(FluxError::Inconsistent);
        }
        // R9
        if let [Disjunct::Fluent(f)] = v.as_slice() {
            let cands = self.holds_candidates(f, l);
            match cands.as_slice() {
                [] => return Err(FluxError::Inconsistent),
                [Cand::Entry(_, _, true)] => {
                    self.kill(c);
                    return Ok(());
                }
                [one] => {
                    let one = one.clone();
                    self.kill(c);
                    return self.apply_cand(f, &one).map(|_| ());
                }
                _ => {}
            }
        }
        // R10
        if v.iter().all(|d| d.as_fluent().is_none()) {
            let eqs: Vec<(Args, Args)> = v
                .iter()
                .map(|d| match d {
                    Disjunct::Eq(x, y) => (x.clone(), y.clone()),
                    Disjunct::Fluent(_) => unreachable!(),
                })
                .collect();
            self.kill(c);
            return self.fd.post(&build_or_and_eq(&eqs)?);
        }
        // R11
        if let Cell::Nil = self.cell(l) {
            let i = v.iter().position(|d| d.as_fluent().is_some()).unwrap();
            let mut w = v;
            w.remove(i);
            return self.rewrite_or(c, w, l);
        }
        // R12
        for d in &v {
            if let Disjunct::Eq(x, y) = d {
                if self.fd.entails_false(&neq_args(x, y)) {
                    self.kill(c);
                    return Ok(());
                }
            }
        }
        // R13
        let mut kept = Vec::with_capacity(v.len());
        for d in &v {
            if let Disjunct::Eq(x, y) = d {
                if self.fd.entails_false(&build_and_eq(x, y)?) {
                    continue;
                }
            }
            kept.push(d.clone());
        }
        if kept.len() < v.len() {
            return self.rewrite_or(c, kept, l);
        }
        match self.cell(l).clone() {
            Cell::Open => {
                // R14, R15
                let nha = self.ix(l).map(|ix| self.live(&ix.nha)).unwrap_or_default();
                let nh_var = self.ix(l).map(|ix| self.live(&ix.nh_var)).unwrap_or_default();
                let kept: Vec<Disjunct> = v
                    .iter()
                    .filter(|d| {
                        let Some(g) = d.as_fluent() else { return true };
                        let neg = if g.is_ground() {
                            self.ix(l).and_then(|ix| ix.nh.get(g)).is_some_and(|cs| cs.iter().any(|&c| self.alive(c)))
                        } else {
                            nh_var.iter().any(|&n| identical(self.fluent_of(n), g))
                        };
                        !neg && !nha.iter().any(|&n| is_instance(g, self.fluent_of(n)))
                    })
                    .cloned()
                    .collect();
                if kept.len() < v.len() {
                    return self.rewrite_or(c, kept, l);
                }
                // C3
                let cancels = self.ix(l).map(|ix| self.live(&ix.cancel)).unwrap_or_default();
                let hit = cancels.iter().any(|&k| {
                    let f = self.fluent_of(k);
                    v.iter().any(|d| d.as_fluent().is_some_and(|g| !not_unifiable(f, g)))
                });
                if hit {
                    self.kill(c);
                }
                Ok(())
            }
            Cell::Cons(..) => {
                // R16
                let seq = self.slots[c as usize].seq;
                self.kill(c);
                self.walk_or(v, Vec::new(), l, seq)
            }
            Cell::Nil => unreachable!(),
        }
    }

    /// R17 over all pending disjuncts, then R18.
    fn walk_or(&mut self, pending: Vec<Disjunct>, mut w: Vec<Disjunct>, l: ListId, seq: u64) -> Result<()> {
        let Cell::Cons(f, next) = self.cell(l).clone() else { unreachable!() };
        let f = self.resolve_fluent(&f);
        for d in pending {
            match &d {
                Disjunct::Fluent(g) if identical(g, &f) => return Ok(()),
                Disjunct::Fluent(g) if !not_unifiable(g, &f) => {
                    let eq = Disjunct::Eq(g.args.clone(), f.args.clone());
                    w.insert(0, d);
                    w.insert(0, eq);
                }
                _ => w.insert(0, d),
            }
        }
        self.add(Body::OrHolds(w), next, seq)
    }

    fn act_cancel(&mut self, c: CId, f: &Fluent, l: ListId) -> Result<()> {
        let Some(ix) = self.ix(l) else { return Ok(()) };
        let mut nh: Vec<CId> = if f.is_ground() {
            ix.nh.get(f).cloned().unwrap_or_default()
        } else {
            ix.nh.iter().filter(|(g, _)| g.functor == f.functor).flat_map(|(_, v)| v.iter().copied()).collect()
        };
        nh.extend(ix.nh_var.iter().copied());
        let nha = ix.nha.clone();
        let ors = ix.or.clone();
        let done = ix.cancelled.clone();
        // C1, C2
        for g in nh.into_iter().chain(nha) {
            if self.alive(g) && !not_unifiable(f, self.fluent_of(g)) {
                self.kill(g);
            }
        }
        // C3
        for o in ors {
            if self.alive(o)
                && self.disjuncts_of(o).iter().any(|d| d.as_fluent().is_some_and(|g| !not_unifiable(f, g)))
            {
                self.kill(o);
            }
        }
        // C4
        for k in done {
            if self.alive(k) && identical(self.fluent_of(k), f) {
                self.kill(k);
                self.kill(c);
                break;
            }
        }
        Ok(())
    }

    fn act_cancelled(&mut self, c: CId, f: &Fluent, l: ListId) -> Result<()> {
        let Some(ix) = self.ix(l) else { return Ok(()) };
        for k in ix.cancel.clone() {
            if self.alive(k) && identical(self.fluent_of(k), f) {
                self.kill(k);
                self.kill(c);
                break;
            }
        }
        Ok(())
    }

    // ---- holds alternatives ----

    pub(crate) fn holds_candidates(&self, f: &Fluent, mut l: ListId) -> Vec<Cand> {
        let mut out = Vec::new();
        loop {
            match self.cell(l) {
                Cell::Cons(g, next) => {
                    let g = self.resolve_fluent(g);
                    if identical(f, &g) {
                        out.push(Cand::Entry(l, g, true));
                        return out;
                    }
                    if !not_unifiable(f, &g) {
                        out.push(Cand::Entry(l, g, false));
                    }
                    l = *next;
                }
                Cell::Open => {
                    out.push(Cand::Tail(l));
                    return out;
                }
                Cell::Nil => return out,
            }
        }
    }

    /// Commit to one holds alternative (no propagation run).
    pub(crate) fn apply_cand(&mut self, f: &Fluent, c: &Cand) -> Result<Option<ListId>> {
        match c {
            Cand::Entry(_, g, true) => {
                let _ = g;
                Ok(None)
            }
            Cand::Entry(_, g, false) => {
                self.fd.post(&build_and_eq(&f.args, &g.args)?)?;
                Ok(None)
            }
            Cand::Tail(t) => self.bind_inner(*t, f.clone(), NewTail::Fresh).map(Some),
        }
    }

    /// True when no Cancel/Cancelled marker is alive.
    pub fn marker_free(&self) -> bool {
        self.index.values().all(|ix| {
            ix.cancel.iter().chain(ix.cancelled.iter()).all(|&c| !self.alive(c))
        })
    }

    // ---- read-out ----

    fn to_constraint(&self, c: CId) -> StateConstraint {
        let l = self.list_of(c);
        match self.resolve_body(&self.slots[c as usize].body) {
            Body::NotHolds(f) => StateConstraint::NotHolds(f, l),
            Body::NotHoldsAll(f) => StateConstraint::NotHoldsAll(f, l),
            Body::OrHolds(v) => StateConstraint::OrHolds(v, l),
            Body::OrHolds3(v, w) => StateConstraint::OrHolds3 { pending: v, evaluated: w, list: l },
            Body::DuplicateFree => StateConstraint::DuplicateFree(l),
            Body::Cancel(f) => StateConstraint::Cancel(f, l),
            Body::Cancelled(f) => StateConstraint::Cancelled(f, l),
        }
    }

    /// Live constraints attached to an open list, in assertion order.
    pub fn constraints_on(&self, l: ListId) -> Vec<StateConstraint> {
        let Some(ix) = self.ix(l) else { return Vec::new() };
        let mut ids: Vec<CId> = ix
            .nh
            .values()
            .flatten()
            .chain(ix.nh_var.iter())
            .chain(ix.nha.iter())
            .chain(ix.or.iter())
            .chain(ix.dup.iter())
            .chain(ix.cancel.iter())
            .chain(ix.cancelled.iter())
            .copied()
            .filter(|&c| self.alive(c))
            .collect();
        ids.sort_unstable_by_key(|&c| (self.slots[c as usize].seq, c));
        ids.into_iter().map(|c| self.to_constraint(c)).collect()
    }

    /// Every live constraint in the store.
    pub fn all_constraints(&self) -> Vec<StateConstraint> {
        (0..self.slots.len() as CId).filter(|&c| self.alive(c)).map(|c| self.to_constraint(c)).collect()
    }

    pub fn state_constraints(&self, s: State) -> Vec<StateConstraint> {
        match self.tail(s) {
            Tail::Open(t) => self.constraints_on(t),
            Tail::Closed => Vec::new(),
        }
    }

    pub fn list_cells(&self) -> usize {
        self.cells.len()
    }

    /// Canonical text of a state: listed fluents, then one sorted line per
    /// constraint on its tail, then residual fd constraints on its variables.
    pub fn dump(&self, s: State) -> String {
        self.dump_as(s, "Z")
    }

    /// [`Store::dump`] with the open tail printed as `tail`.
    pub fn dump_as(&self, s: State, tail_name: &str) -> String {
        let mut names = Namer::default();
        let known = self.known(s);
        let tail = self.tail(s);
        let mut out = String::from("known: ");
        let parts: Vec<String> = known.iter().map(|f| names.fluent(f, &[])).collect();
        match tail {
            Tail::Open(_) if parts.is_empty() => out.push_str(tail_name),
            Tail::Open(_) => {
                let _ = write!(out, "[{} | {tail_name}]", parts.join(", "));
            }
            Tail::Closed => {
                let _ = write!(out, "[{}]", parts.join(", "));
            }
        }
        out.push('\n');
        let mut lines: Vec<(u8, Vec<Key>, String)> = Vec::new();
        for c in self.state_constraints(s) {
            lines.push(names.constraint(&c));
        }
        lines.sort();
        for (_, _, l) in &lines {
            out.push_str(l.strip_suffix("Z)").unwrap_or(l));
            out.push_str(tail_name);
            out.push_str(")\n");
        }
        let mut fd_lines = Vec::new();
        for (v, name) in names.named() {
            let d = self.fd.domain(v);
            if self.fd.find(v).0 == v && d.value().is_none() && d != crate::fd::Domain::full() {
                fd_lines.push(format!("{name} in {d}"));
            }
        }
        for f in self.fd.live_formulas() {
            let mut vs = Vec::new();
            f.vars(&mut vs);
            if !vs.is_empty() && vs.iter().all(|v| names.get(self.fd.find(*v).0).is_some()) {
                fd_lines.push(names.formula(&f, &self.fd));
            }
        }
        fd_lines.sort();
        fd_lines.dedup();
        for l in fd_lines {
            let _ = writeln!(out, "{l}");
        }
        out
    }
}

fn same_body(a: &Body, b: &Body) -> bool {
    match (a, b) {
        (Body::NotHolds(x), Body::NotHolds(y))
        | (Body::Cancel(x), Body::Cancel(y))
        | (Body::Cancelled(x), Body::Cancelled(y)) => x == y,
        (Body::OrHolds(x), Body::OrHolds(y)) => x == y,
        (Body::OrHolds3(x, w), Body::OrHolds3(y, u)) => x == y && w == u,
        _ => true,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Int(i64),
    Sym(String),
    Var(usize),
    Functor(String),
    Eq,
}

/// Variable naming for dumps: `_A`, `_B`, ... by first appearance.
#[derive(Default)]
struct Namer {
    map: HashMap<VarId, usize>,
    order: Vec<VarId>,
}

fn letter_name(i: usize) -> String {
    let mut s = String::from("_");
    let mut i = i;
    loop {
        s.push((b'A' + (i % 26) as u8) as char);
        i /= 26;
        if i == 0 {
            break;
        }
        i -= 1;
    }
    s
}

impl Namer {
    fn id(&mut self, v: VarId) -> usize {
        if let Some(&i) = self.map.get(&v) {
            return i;
        }
        let i = self.order.len();
        self.map.insert(v, i);
        self.order.push(v);
        i
    }

    fn get(&self, v: VarId) -> Option<usize> {
        self.map.get(&v).copied()
    }

    fn named(&self) -> Vec<(VarId, String)> {
        self.order.iter().enumerate().map(|(i, v)| (*v, letter_name(i))).collect()
    }

    fn arg(&mut self, a: &ArgTerm, anon: &[VarId]) -> (String, Key) {
        match a {
            ArgTerm::Var(v) if anon.contains(v) => ("_".into(), Key::Var(usize::MAX)),
            ArgTerm::Var(v) => {
                let i = self.id(*v);
                (letter_name(i), Key::Var(i))
            }
            ArgTerm::Int(i) => (i.to_string(), Key::Int(*i)),
            ArgTerm::Sym(s) => (s.text(), Key::Sym(s.text())),
        }
    }

    fn fluent_keyed(&mut self, f: &Fluent, anon: &[VarId]) -> (String, Vec<Key>) {
        let mut keys = vec![Key::Functor(f.functor.text())];
        let mut s = f.functor.text();
        if !f.args.is_empty() {
            let parts: Vec<String> = f
                .args
                .iter()
                .map(|a| {
                    let (t, k) = self.arg(a, anon);
                    keys.push(k);
                    t
                })
                .collect();
            s = format!("{s}({})", parts.join(","));
        }
        (s, keys)
    }

    fn fluent(&mut self, f: &Fluent, anon: &[VarId]) -> String {
        self.fluent_keyed(f, anon).0
    }

    fn args(&mut self, a: &[ArgTerm], keys: &mut Vec<Key>) -> String {
        let parts: Vec<String> = a
            .iter()
            .map(|x| {
                let (t, k) = self.arg(x, &[]);
                keys.push(k);
                t
            })
            .collect();
        format!("[{}]", parts.join(","))
    }

    fn disjuncts(&mut self, v: &[Disjunct], keys: &mut Vec<Key>) -> String {
        let parts: Vec<String> = v
            .iter()
            .map(|d| match d {
                Disjunct::Fluent(f) => {
                    let (s, k) = self.fluent_keyed(f, &[]);
                    keys.extend(k);
                    s
                }
                Disjunct::Eq(x, y) => {
                    keys.push(Key::Eq);
                    let a = self.args(x, keys);
                    let b = self.args(y, keys);
                    format!("eq({a},{b})")
                }
            })
            .collect();
        format!("[{}]", parts.join(","))
    }

    fn constraint(&mut self, c: &StateConstraint) -> (u8, Vec<Key>, String) {
        match c {
            StateConstraint::NotHolds(f, _) => {
                let (s, k) = self.fluent_keyed(f, &[]);
                (0, k, format!("not_holds({s}, Z)"))
            }
            StateConstraint::NotHoldsAll(f, _) => {
                let anon: Vec<VarId> =
                    f.vars().filter(|v| f.vars().filter(|w| w == v).count() == 1).collect();
                let (s, k) = self.fluent_keyed(f, &anon);
                (1, k, format!("not_holds_all({s}, Z)"))
            }
            StateConstraint::OrHolds(v, _) => {
                let mut k = Vec::new();
                let s = self.disjuncts(v, &mut k);
                (2, k, format!("or_holds({s}, Z)"))
            }
            StateConstraint::OrHolds3 { pending, evaluated, .. } => {
                let mut k = Vec::new();
                let a = self.disjuncts(pending, &mut k);
                let b = self.disjuncts(evaluated, &mut k);
                (3, k, format!("or_holds({a}, {b}, Z)"))
            }
            StateConstraint::DuplicateFree(_) => (4, Vec::new(), "duplicate_free(Z)".into()),
            StateConstraint::Cancel(f, _) => {
                let (s, k) = self.fluent_keyed(f, &[]);
                (5, k, format!("cancel({s}, Z)"))
            }
            StateConstraint::Cancelled(f, _) => {
                let (s, k) = self.fluent_keyed(f, &[]);
                (6, k, format!("cancelled({s}, Z)"))
            }
        }
    }

    fn formula(&mut self, f: &FdFormula, fd: &FdStore) -> String {
        match f {
            FdFormula::True => "0#=0".into(),
            FdFormula::False => "0#\\=0".into(),
            FdFormula::Atom(a) => {
                let side = |n: &mut Namer, e: &crate::fd::LinExpr| {
                    let mut s = String::new();
                    for &(c, v) in &e.terms {
                        let (r, off) = fd.find(v);
                        let name = letter_name(n.id(r));
                        let term = if off == 0 { name } else { format!("({name}{off:+})") };
                        if !s.is_empty() || c < 0 {
                            s.push(if c < 0 { '-' } else { '+' });
                        }
                        if c.abs() != 1 {
                            let _ = write!(s, "{}*", c.abs());
                        }
                        s.push_str(&term);
                    }
                    if s.is_empty() {
                        s = ArgTerm::from_code(e.constant).to_string();
                    } else if e.constant != 0 {
                        let _ = write!(s, "{:+}", e.constant);
                    }
                    s
                };
                let l = side(self, &a.lhs);
                let r = side(self, &a.rhs);
                format!("{l}{}{r}", a.op.text())
            }
            FdFormula::And(fs) | FdFormula::Or(fs) => {
                let sep = if matches!(f, FdFormula::And(_)) { " #/\\ " } else { " #\\/ " };
                let parts: Vec<String> = fs.iter().map(|x| self.formula(x, fd)).collect();
                format!("({})", parts.join(sep))
            }
        }
    }
}

impl Store {
    /// Post an arithmetic constraint and wake the state constraints it affects.
    pub fn post_fd(&mut self, f: &FdFormula) -> Result<()> {
        self.check()?;
        let r = self.fd.post(f).and_then(|_| self.run());
        self.settle(r)
    }

    pub fn post_range(&mut self, vars: &[VarId], lo: i64, hi: i64) -> Result<()> {
        self.check()?;
        let r = self.fd.post_range(vars, lo, hi).and_then(|_| self.run());
        self.settle(r)
    }

    /// Whether posting `f` would fail; the store is unchanged.
    pub fn fd_entails_false(&mut self, f: &FdFormula) -> Result<bool> {
        self.check()?;
        let s = self.snapshot();
        let r = self.post_fd(f);
        self.rollback(s)?;
        match r {
            Ok(()) => Ok(false),
            Err(FluxError::Inconsistent) => Ok(true),
            Err(e) => Err(e),
        }
    }

    /// Speculatively test whether asserting `c` fails; the store is unchanged.
    pub fn entails_violation(&mut self, c: StateConstraint) -> Result<bool> {
        self.check()?;
        let s = self.snapshot();
        let r = self.assert_constraint(c);
        self.rollback(s)?;
        match r {
            Ok(()) => Ok(false),
            Err(FluxError::Inconsistent) => Ok(true),
            Err(e) => Err(e),
        }
    }
}
