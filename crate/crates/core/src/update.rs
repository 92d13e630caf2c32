//! Progression: the holds relations, fluent removal and addition with
//! knowledge-dependent branching, cancellation, and `update`.

use crate::error::{FluxError, Result};
use crate::store::{Cand, Cell, ListId, State, StateConstraint, Store};
use crate::terms::{identical, not_unifiable, Fluent};

impl Store {
    /// Make `f` hold in `z`, committing to the first consistent alternative:
    /// unification with a listed fluent (left to right), then extension of
    /// an open tail. Returns false and leaves the store unchanged otherwise.
    pub fn holds_assert(&mut self, f: &Fluent, z: State) -> Result<bool> {
        Ok(self.holds_search(f, z)?.is_some())
    }

    /// Like [`Store::holds_assert`], returning `z` without the matched
    /// occurrence of `f`.
    pub fn holds_split(&mut self, f: &Fluent, z: State) -> Result<Option<State>> {
        match self.holds_search(f, z)? {
            None => Ok(None),
            Some(cell) => Ok(Some(self.remove_cell(z, cell)?)),
        }
    }

    /// Returns the cons cell that now holds `f`.
    fn holds_search(&mut self, f: &Fluent, z: State) -> Result<Option<ListId>> {
        if !self.is_consistent() {
            return Err(FluxError::Inconsistent);
        }
        self.check_arity(f)?;
        let f = self.resolve_fluent(f);
        let cands = self.holds_candidates(&f, z.root);
        for c in cands {
            let snap = self.snapshot();
            let r = self.apply_cand(&f, &c).and_then(|_| self.run());
            match r {
                Ok(()) => {
                    self.commit(snap)?;
                    return Ok(Some(match c {
                        Cand::Entry(cell, _, _) => cell,
                        Cand::Tail(t) => t,
                    }));
                }
                Err(FluxError::Inconsistent) => self.rollback(snap)?,
                Err(e) => {
                    self.rollback(snap)?;
                    return Err(e);
                }
            }
        }
        Ok(None)
    }

    /// The only alternative for `f` that survives propagation, applied.
    /// None when there are several (or none).
    fn holds_unique(&mut self, f: &Fluent, z: State) -> Result<Option<ListId>> {
        self.check_arity(f)?;
        let f = self.resolve_fluent(f);
        let mut ok = Vec::new();
        for c in self.holds_candidates(&f, z.root) {
            let snap = self.snapshot();
            let r = self.apply_cand(&f, &c).and_then(|_| self.run());
            self.rollback(snap)?;
            match r {
                Ok(()) => ok.push(c),
                Err(FluxError::Inconsistent) => {}
                Err(e) => return Err(e),
            }
            if ok.len() > 1 {
                return Ok(None);
            }
        }
        let Some(c) = ok.pop() else { return Ok(None) };
        let r = self.apply_cand(&f, &c).and_then(|_| self.run());
        self.settle(r)?;
        Ok(Some(match c {
            Cand::Entry(cell, _, _) => cell,
            Cand::Tail(t) => t,
        }))
    }

    /// Copy of the list at `z` without the cons cell `cell`; the suffix
    /// after `cell` is shared.
    fn remove_cell(&mut self, z: State, cell: ListId) -> Result<State> {
        let mut prefix = Vec::new();
        let mut l = z.root;
        while l != cell {
            match self.cell(l) {
                Cell::Cons(f, next) => {
                    prefix.push(f.clone());
                    l = *next;
                }
                _ => return Err(FluxError::Usage("cell is not on this list".into())),
            }
        }
        let Cell::Cons(_, mut rest) = self.cell(cell).clone() else {
            return Err(FluxError::Usage("cell is not a cons".into()));
        };
        for f in prefix.into_iter().rev() {
            rest = self.cons(f, rest)?;
        }
        Ok(State { root: rest })
    }

    /// Whether asserting `not_holds(f, z)` is inconsistent.
    pub(crate) fn entails_holds(&mut self, f: &Fluent, z: State) -> Result<bool> {
        self.entails_violation(StateConstraint::NotHolds(f.clone(), z.root))
    }

    /// Whether `f` cannot hold in `z`.
    pub(crate) fn entails_not_holds(&mut self, f: &Fluent, z: State) -> Result<bool> {
        let snap = self.snapshot();
        let r = self.holds_assert(f, z);
        self.rollback(snap)?;
        Ok(!r?)
    }

    /// Remove each fluent. A fluent known to hold is split off when exactly
    /// one listed or tail position can hold it; otherwise, and when its
    /// truth is unknown, what is known about it is cancelled.
    pub fn minus(&mut self, mut z: State, fs: &[Fluent]) -> Result<State> {
        for f in fs {
            let f = self.resolve_fluent(f);
            if self.entails_holds(&f, z)? {
                if let Some(cell) = self.holds_unique(&f, z)? {
                    z = self.remove_cell(z, cell)?;
                    continue;
                }
            } else if self.entails_not_holds(&f, z)? {
                continue;
            }
            z = self.cancel_fluent(&f, z)?;
            self.assert_constraint(StateConstraint::NotHolds(f, z.root))?;
        }
        Ok(z)
    }

    pub fn plus(&mut self, mut z: State, fs: &[Fluent]) -> Result<State> {
        for f in fs {
            let f = self.resolve_fluent(f);
            if self.entails_not_holds(&f, z)? {
                z = State { root: self.cons(f, z.root)? };
            } else if !self.entails_holds(&f, z)? {
                z = self.cancel_fluent(&f, z)?;
                self.assert_constraint(StateConstraint::NotHolds(f.clone(), z.root))?;
                z = State { root: self.cons(f, z.root)? };
            }
        }
        Ok(z)
    }

    /// Remove the negative effects, then add the positive ones.
    pub fn update(&mut self, z1: State, plus: &[Fluent], minus: &[Fluent]) -> Result<State> {
        let z = self.minus(z1, minus)?;
        let z2 = self.plus(z, plus)?;
        assert!(self.marker_free(), "cancellation markers survived an update");
        Ok(z2)
    }

    /// Drop every listed fluent unifiable with `f` and purge constraints on
    /// the tail that mention a unifiable fluent. A closed list that loses an
    /// entry which may differ from `f` is reopened, since that entry may
    /// still hold.
    pub fn cancel_fluent(&mut self, f: &Fluent, z: State) -> Result<State> {
        if !self.is_consistent() {
            return Err(FluxError::Inconsistent);
        }
        self.check_arity(f)?;
        let f = self.resolve_fluent(f);
        let mut entries = Vec::new();
        let mut last_drop = None;
        let mut reopen = false;
        let mut l = z.root;
        loop {
            match self.cell(l).clone() {
                Cell::Cons(g, next) => {
                    let g1 = self.resolve_fluent(&g);
                    let keep = not_unifiable(&f, &g1);
                    if !keep {
                        last_drop = Some(entries.len());
                        reopen |= !identical(&f, &g1);
                    }
                    entries.push((g, keep, next));
                    l = next;
                }
                Cell::Open => {
                    self.assert_constraint(StateConstraint::Cancel(f.clone(), l))?;
                    self.assert_constraint(StateConstraint::Cancelled(f.clone(), l))?;
                    reopen = false;
                    break;
                }
                Cell::Nil => break,
            }
        }
        let Some(last) = last_drop else { return Ok(z) };
        let (mut rest, upto) = if reopen {
            (self.open_list(), entries.len())
        } else {
            (entries[last].2, last)
        };
        for (g, keep, _) in entries[..upto].iter().rev() {
            if *keep {
                rest = self.cons(g.clone(), rest)?;
            }
        }
        Ok(State { root: rest })
    }
}
