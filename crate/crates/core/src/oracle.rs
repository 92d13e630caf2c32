//! Brute-force semantics of a state specification.
//!
//! A completion fixes every free variable and the content of the open tail.
//! Constraints are evaluated directly on the resulting ground list, without
//! any of the propagation rules, so these functions can serve as a reference
//! for the store.

use std::collections::{BTreeSet, HashSet};

use crate::error::{FluxError, Result};
use crate::fd::{FdFormula, FdStore, INF};
use crate::store::{Cell, Disjunct, ListId, State, StateConstraint, Store, Tail};
use crate::terms::{match_instance, ArgTerm, Fluent, VarId};

/// A ground state, ordered for stable comparison.
pub type GroundState = BTreeSet<String>;

const MAX_VALUATIONS: u64 = 1 << 20;

/// Values for every fd variable, derived from values of the free roots.
pub struct Valuation {
    vals: Vec<i64>,
}

impl Valuation {
    pub fn get(&self, v: VarId) -> i64 {
        self.vals.get(v.0 as usize).copied().unwrap_or(0)
    }

    pub fn arg(&self, a: ArgTerm) -> ArgTerm {
        match a {
            ArgTerm::Var(v) => ArgTerm::from_code(self.get(v)),
            t => t,
        }
    }

    pub fn fluent(&self, f: &Fluent) -> Fluent {
        Fluent::new(f.functor, f.args.iter().map(|a| self.arg(*a)))
    }
}

fn pick(lo: i64, hi: i64, holes: &[i64]) -> i64 {
    let mut v = if lo > -INF { lo } else if hi < INF { hi } else { 0 };
    while holes.contains(&v) {
        v += if lo > -INF { 1 } else { -1 };
    }
    v
}

/// Call `f` with every valuation of bounded free roots that satisfies the fd
/// store. Unbounded free roots take one arbitrary value from their domain.
/// Stops early when `f` returns true; returns whether it did.
pub fn any_valuation(fd: &FdStore, f: &mut dyn FnMut(&Valuation) -> bool) -> Result<bool> {
    let n = fd.var_count();
    let mut roots: Vec<(usize, Vec<i64>)> = Vec::new();
    let mut base = vec![0i64; n];
    let mut total: u64 = 1;
    for (i, slot) in base.iter_mut().enumerate() {
        let (r, _) = fd.find(VarId(i as u32));
        if r.0 as usize != i {
            continue;
        }
        let d = fd.domain(r);
        if let Some(v) = d.value() {
            *slot = v;
        } else if d.is_bounded() {
            let vals: Vec<i64> = d.values().collect();
            total = total.saturating_mul(vals.len() as u64);
            roots.push((i, vals));
        } else {
            *slot = pick(d.lo(), d.hi(), d.holes());
        }
    }
    if total > MAX_VALUATIONS {
        return Err(FluxError::Usage(format!("{total} valuations exceed the oracle limit")));
    }
    let mut idx = vec![0usize; roots.len()];
    loop {
        let mut root_vals = base.clone();
        for (k, (i, vals)) in roots.iter().enumerate() {
            root_vals[*i] = vals[idx[k]];
        }
        let vals: Vec<i64> = (0..n)
            .map(|i| {
                let (r, off) = fd.find(VarId(i as u32));
                root_vals[r.0 as usize] + off
            })
            .collect();
        let val = Valuation { vals };
        if fd.satisfied_by(&|v| val.get(v)) && f(&val) {
            return Ok(true);
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(false);
            }
            idx[k] += 1;
            if idx[k] < roots[k].1.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Ground content of list `l`, if it ends in `tail` (whose content is
/// `rest`) or is closed. None if it ends in another open cell.
fn list_value(
    store: &Store,
    mut l: ListId,
    tail: Option<ListId>,
    rest: &[Fluent],
    val: &Valuation,
) -> Option<Vec<Fluent>> {
    let mut out = Vec::new();
    loop {
        match store.cell(l) {
            Cell::Cons(f, next) => {
                out.push(val.fluent(f));
                l = *next;
            }
            Cell::Nil => return Some(out),
            Cell::Open if Some(l) == tail => {
                out.extend_from_slice(rest);
                return Some(out);
            }
            Cell::Open => return None,
        }
    }
}

fn disjunct_holds(d: &Disjunct, v: &[Fluent], val: &Valuation) -> bool {
    match d {
        Disjunct::Fluent(f) => v.contains(&val.fluent(f)),
        Disjunct::Eq(xs, ys) => xs.iter().zip(ys).all(|(x, y)| val.arg(*x) == val.arg(*y)),
    }
}

/// Truth of one constraint; None when its list is outside the completion.
pub fn constraint_holds(
    store: &Store,
    c: &StateConstraint,
    tail: Option<ListId>,
    rest: &[Fluent],
    val: &Valuation,
) -> Option<bool> {
    let v = list_value(store, c.list(), tail, rest, val)?;
    Some(match c {
        StateConstraint::NotHolds(f, _) => !v.contains(&val.fluent(f)),
        StateConstraint::NotHoldsAll(f, _) => !v.iter().any(|g| match_instance(g, f).is_some()),
        StateConstraint::OrHolds(ds, _) => ds.iter().any(|d| disjunct_holds(d, &v, val)),
        StateConstraint::OrHolds3 { pending, evaluated, list } => {
            let after = match store.cell(*list) {
                Cell::Cons(_, next) => list_value(store, *next, tail, rest, val)?,
                _ => v.clone(),
            };
            pending.iter().any(|d| disjunct_holds(d, &v, val))
                || evaluated.iter().any(|d| disjunct_holds(d, &after, val))
        }
        StateConstraint::DuplicateFree(_) => {
            let mut seen = HashSet::new();
            v.iter().all(|f| seen.insert(f.clone()))
        }
        StateConstraint::Cancel(..) | StateConstraint::Cancelled(..) => true,
    })
}

fn all_hold(store: &Store, cs: &[StateConstraint], tail: Option<ListId>, rest: &[Fluent], val: &Valuation) -> bool {
    cs.iter().all(|c| constraint_holds(store, c, tail, rest, val).unwrap_or(true))
}

fn open_tail(store: &Store, z: State) -> Option<ListId> {
    match store.tail(z) {
        Tail::Open(t) => Some(t),
        Tail::Closed => None,
    }
}

pub fn ground_state(fs: &[Fluent]) -> GroundState {
    fs.iter().map(|f| f.to_string()).collect()
}

/// Every ground state described by `z` whose unlisted part is drawn from
/// `universe`. A failed store has none.
pub fn completions(store: &Store, z: State, universe: &[Fluent]) -> Result<BTreeSet<GroundState>> {
    let mut out = BTreeSet::new();
    if !store.is_consistent() {
        return Ok(out);
    }
    if universe.len() > 16 {
        return Err(FluxError::Usage("universe too large for enumeration".into()));
    }
    let cs = store.all_constraints();
    let tail = open_tail(store, z);
    let subsets: u32 = if tail.is_some() { 1 << universe.len() } else { 1 };
    any_valuation(store.fd(), &mut |val| {
        for mask in 0..subsets {
            let rest: Vec<Fluent> =
                (0..universe.len()).filter(|i| mask >> i & 1 == 1).map(|i| universe[i].clone()).collect();
            if all_hold(store, &cs, tail, &rest, val) {
                let v = list_value(store, z.root, tail, &rest, val).expect("state ends in its tail");
                out.insert(ground_state(&v));
            }
        }
        false
    })?;
    Ok(out)
}

/// Whether the ground state `gt` is one of the completions of `z`.
pub fn is_completion(store: &Store, z: State, gt: &[Fluent]) -> Result<bool> {
    if !store.is_consistent() {
        return Ok(false);
    }
    let cs = store.all_constraints();
    let tail = open_tail(store, z);
    let want = ground_state(gt);
    any_valuation(store.fd(), &mut |val| {
        let listed = list_value(store, z.root, tail, &[], val).expect("state ends in its tail");
        let listed_set = ground_state(&listed);
        if !listed_set.is_subset(&want) {
            return false;
        }
        let rest: Vec<Fluent> = gt.iter().filter(|f| !listed_set.contains(&f.to_string())).cloned().collect();
        if tail.is_none() && !rest.is_empty() {
            return false;
        }
        all_hold(store, &cs, tail, &rest, val)
    })
}

/// One piece of knowledge about the whole state.
#[derive(Clone, Debug)]
pub enum SpecConstraint {
    NotHolds(Fluent),
    /// Variables of the schema are universal.
    NotHoldsAll(Fluent),
    OrHolds(Vec<Fluent>),
    DuplicateFree,
    Fd(FdFormula),
}

/// A state specification as plain data: `[known | Z]` (or closed), finite
/// ranges for its variables and constraints on the whole list.
#[derive(Clone, Debug, Default)]
pub struct Spec {
    pub known: Vec<Fluent>,
    pub open: bool,
    pub ranges: Vec<(VarId, i64, i64)>,
    pub constraints: Vec<SpecConstraint>,
}

fn spec_holds(c: &SpecConstraint, v: &[Fluent], val: &dyn Fn(VarId) -> i64) -> bool {
    let g = |f: &Fluent| {
        Fluent::new(
            f.functor,
            f.args.iter().map(|a| match a {
                ArgTerm::Var(x) => ArgTerm::from_code(val(*x)),
                t => *t,
            }),
        )
    };
    match c {
        SpecConstraint::NotHolds(f) => !v.contains(&g(f)),
        SpecConstraint::NotHoldsAll(f) => !v.iter().any(|h| match_instance(h, f).is_some()),
        SpecConstraint::OrHolds(fs) => fs.iter().any(|f| v.contains(&g(f))),
        SpecConstraint::DuplicateFree => {
            let mut seen = HashSet::new();
            v.iter().all(|f| seen.insert(f.clone()))
        }
        SpecConstraint::Fd(f) => f.eval(val),
    }
}

impl Spec {
    /// Ground states satisfying the first `k` constraints, with the unlisted
    /// part drawn from `universe`.
    pub fn completions_upto(&self, k: usize, universe: &[Fluent]) -> BTreeSet<GroundState> {
        let mut out = BTreeSet::new();
        let n = self.ranges.iter().map(|r| r.0 .0 as usize + 1).max().unwrap_or(0);
        let mut vals = vec![0i64; n];
        let mut idx: Vec<i64> = self.ranges.iter().map(|r| r.1).collect();
        if self.ranges.iter().any(|r| r.1 > r.2) {
            return out;
        }
        let subsets: u32 = if self.open { 1 << universe.len() } else { 1 };
        loop {
            for (r, v) in self.ranges.iter().zip(&idx) {
                vals[r.0 .0 as usize] = *v;
            }
            let val = |x: VarId| vals.get(x.0 as usize).copied().unwrap_or(0);
            let listed: Vec<Fluent> = self
                .known
                .iter()
                .map(|f| {
                    Fluent::new(
                        f.functor,
                        f.args.iter().map(|a| match a {
                            ArgTerm::Var(x) => ArgTerm::from_code(val(*x)),
                            t => *t,
                        }),
                    )
                })
                .collect();
            for mask in 0..subsets {
                let mut v = listed.clone();
                v.extend((0..universe.len()).filter(|i| mask >> i & 1 == 1).map(|i| universe[i].clone()));
                if self.constraints[..k].iter().all(|c| spec_holds(c, &v, &val)) {
                    out.insert(ground_state(&v));
                }
            }
            let mut j = 0;
            loop {
                if j == idx.len() {
                    return out;
                }
                idx[j] += 1;
                if idx[j] <= self.ranges[j].2 {
                    break;
                }
                idx[j] = self.ranges[j].1;
                j += 1;
            }
        }
    }

    pub fn completions(&self, universe: &[Fluent]) -> BTreeSet<GroundState> {
        self.completions_upto(self.constraints.len(), universe)
    }
}
