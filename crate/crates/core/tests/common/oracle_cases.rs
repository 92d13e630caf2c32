//! Generators and properties comparing the store with brute-force model
//! enumeration on small universes. Shared by the property suites and the
//! acceptance target.

#![allow(dead_code)]

use std::collections::BTreeSet;

use fluxkit::fd::{FdAtom, FdFormula, LinExpr, Op};
use fluxkit::oracle::{completions, ground_state, GroundState, Spec, SpecConstraint};
use fluxkit::store::{Disjunct, State, StateConstraint, Store};
use fluxkit::terms::{ArgTerm, Fluent, VarId};
use fluxkit::FluxError;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

#[derive(Clone, Debug)]
pub enum T {
    C(i64),
    V(usize),
    Any,
}

#[derive(Clone, Debug)]
pub struct F {
    g: bool,
    a: T,
    b: T,
}

#[derive(Clone, Debug)]
pub enum C {
    Nh(F),
    Nha(F),
    Or(Vec<F>),
    Dup,
    Eq(usize, i64),
    Ne(usize, usize),
    Lt(usize, usize),
}

#[derive(Clone, Debug)]
pub struct Raw {
    pub nv: usize,
    pub his: Vec<i64>,
    pub known: Vec<F>,
    pub open: bool,
    pub cs: Vec<C>,
}

/// f/1 over 0..3 and g/2 over {0,1}^2. Variables range within 0..1, so
/// every instance of a generated fluent is in the universe.
pub fn universe() -> Vec<Fluent> {
    let mut u: Vec<Fluent> = (0..4).map(|i| Fluent::named("f", [ArgTerm::Int(i)])).collect();
    for a in 0..2 {
        for b in 0..2 {
            u.push(Fluent::named("g", [ArgTerm::Int(a), ArgTerm::Int(b)]));
        }
    }
    u
}

fn term(nv: usize, hi: i64, any: bool) -> BoxedStrategy<T> {
    let mut opts: Vec<BoxedStrategy<T>> = vec![(0..=hi).prop_map(T::C).boxed()];
    if nv > 0 {
        opts.push((0..nv).prop_map(T::V).boxed());
    }
    if any {
        opts.push(Just(T::Any).boxed());
    }
    proptest::strategy::Union::new(opts).boxed()
}

fn fluent(nv: usize, any: bool) -> BoxedStrategy<F> {
    prop_oneof![
        term(nv, 3, any).prop_map(|a| F { g: false, a, b: T::C(0) }),
        (term(nv, 1, any), term(nv, 1, any)).prop_map(|(a, b)| F { g: true, a, b }),
    ]
    .boxed()
}

pub fn ground_fluent() -> BoxedStrategy<F> {
    fluent(0, false)
}

pub fn constraint(nv: usize) -> BoxedStrategy<C> {
    let mut opts: Vec<BoxedStrategy<C>> = vec![
        fluent(nv, false).prop_map(C::Nh).boxed(),
        fluent(0, true).prop_map(C::Nha).boxed(),
        proptest::collection::vec(fluent(nv, false), 1..=3).prop_map(C::Or).boxed(),
        Just(C::Dup).boxed(),
    ];
    if nv > 0 {
        opts.push(((0..nv), 0i64..=1).prop_map(|(v, c)| C::Eq(v, c)).boxed());
        opts.push(((0..nv), (0..nv)).prop_map(|(a, b)| C::Ne(a, b)).boxed());
        opts.push(((0..nv), (0..nv)).prop_map(|(a, b)| C::Lt(a, b)).boxed());
    }
    proptest::strategy::Union::new(opts).boxed()
}

pub fn raw(ground: bool, max_cs: usize) -> impl Strategy<Value = Raw> {
    let nv = if ground { 0..=0usize } else { 0..=2usize };
    nv.prop_flat_map(move |nv| {
        (
            Just(nv),
            proptest::collection::vec(0i64..=1, nv),
            proptest::collection::vec(fluent(nv, false), 0..=3),
            prop::bool::weighted(0.85),
            proptest::collection::vec(constraint(nv), 0..=max_cs),
        )
            .prop_map(|(nv, his, known, open, cs)| Raw { nv, his, known, open, cs })
    })
}

pub struct Built {
    pub spec: Spec,
    pub store: Store,
    pub z: State,
    /// Completion sets of the store after each step, or None once it failed.
    pub steps: Vec<Option<BTreeSet<GroundState>>>,
}

fn mk(store: &mut Store, vars: &[VarId], f: &F) -> Fluent {
    let mut t = |t: &T| match t {
        T::C(c) => ArgTerm::Int(*c),
        T::V(i) => ArgTerm::Var(vars[*i]),
        T::Any => ArgTerm::Var(store.new_var()),
    };
    if f.g {
        let a = t(&f.a);
        let b = t(&f.b);
        Fluent::named("g", [a, b])
    } else {
        Fluent::named("f", [t(&f.a)])
    }
}

fn atom(a: ArgTerm, op: Op, b: ArgTerm) -> FdFormula {
    FdFormula::Atom(FdAtom::new(LinExpr::from_arg(a), op, LinExpr::from_arg(b)).unwrap())
}

pub fn build(r: &Raw, track: bool) -> Built {
    let u = universe();
    let mut store = Store::new();
    let vars: Vec<VarId> = (0..r.nv).map(|_| store.new_var()).collect();
    let known: Vec<Fluent> = r.known.iter().map(|f| mk(&mut store, &vars, f)).collect();
    let z = store.state(&known, r.open).unwrap();
    let mut spec = Spec { known, open: r.open, ..Spec::default() };
    for (v, hi) in vars.iter().zip(&r.his) {
        store.post_range(&[*v], 0, *hi).unwrap();
        spec.ranges.push((*v, 0, *hi));
    }
    let mut steps = Vec::new();
    if track {
        steps.push(Some(completions(&store, z, &u).unwrap()));
    }
    let mut failed = false;
    for c in &r.cs {
        let (sc, res) = match c {
            C::Nh(f) => {
                let f = mk(&mut store, &vars, f);
                (SpecConstraint::NotHolds(f.clone()), failed_or(&mut store, failed, |s| {
                    s.assert_constraint(StateConstraint::NotHolds(f, z.root))
                }))
            }
            C::Nha(f) => {
                let f = mk(&mut store, &vars, f);
                (SpecConstraint::NotHoldsAll(f.clone()), failed_or(&mut store, failed, |s| {
                    s.assert_constraint(StateConstraint::NotHoldsAll(f, z.root))
                }))
            }
            C::Or(fs) => {
                let fs: Vec<Fluent> = fs.iter().map(|f| mk(&mut store, &vars, f)).collect();
                let ds = fs.iter().cloned().map(Disjunct::Fluent).collect();
                (SpecConstraint::OrHolds(fs), failed_or(&mut store, failed, |s| {
                    s.assert_constraint(StateConstraint::OrHolds(ds, z.root))
                }))
            }
            C::Dup => (SpecConstraint::DuplicateFree, failed_or(&mut store, failed, |s| {
                s.assert_constraint(StateConstraint::DuplicateFree(z.root))
            })),
            C::Eq(v, k) => {
                let f = atom(ArgTerm::Var(vars[*v]), Op::Eq, ArgTerm::Int(*k));
                (SpecConstraint::Fd(f.clone()), failed_or(&mut store, failed, |s| s.post_fd(&f)))
            }
            C::Ne(a, b) => {
                let f = atom(ArgTerm::Var(vars[*a]), Op::Ne, ArgTerm::Var(vars[*b]));
                (SpecConstraint::Fd(f.clone()), failed_or(&mut store, failed, |s| s.post_fd(&f)))
            }
            C::Lt(a, b) => {
                let f = atom(ArgTerm::Var(vars[*a]), Op::Lt, ArgTerm::Var(vars[*b]));
                (SpecConstraint::Fd(f.clone()), failed_or(&mut store, failed, |s| s.post_fd(&f)))
            }
        };
        spec.constraints.push(sc);
        match res {
            Ok(()) => {}
            Err(FluxError::Inconsistent) => failed = true,
            Err(e) => panic!("unexpected error {e}"),
        }
        if track {
            steps.push(if failed { None } else { Some(completions(&store, z, &u).unwrap()) });
        }
    }
    Built { spec, store, z, steps }
}

fn failed_or(s: &mut Store, failed: bool, f: impl FnOnce(&mut Store) -> fluxkit::Result<()>) -> fluxkit::Result<()> {
    if failed {
        Err(FluxError::Inconsistent)
    } else {
        f(s)
    }
}

pub fn ground(fs: &[F]) -> Vec<Fluent> {
    let mut s = Store::new();
    fs.iter().map(|f| mk(&mut s, &[], f)).collect()
}

fn text(f: &Fluent) -> String {
    f.to_string()
}

pub const PROPAGATION_CASES: u32 = 4000;
pub const KNOWLEDGE_CASES: u32 = 3000;
pub const GROUND_KNOWLEDGE_CASES: u32 = 2000;
pub const COMPLETE_UPDATE_CASES: u32 = 2000;
pub const WEAK_UPDATE_CASES: u32 = 2000;

pub type Outcome = Result<(), TestCaseError>;

/// Every step keeps the completion set; a failed store has none.
pub fn propagation_preserves_completions(r: &Raw) -> Outcome {
    let u = universe();
    let b = build(r, true);
    for (k, step) in b.steps.iter().enumerate() {
        let exact = b.spec.completions_upto(k, &u);
        match step {
            Some(got) => prop_assert_eq!(got, &exact, "after {} constraints", k),
            None => prop_assert!(exact.is_empty(), "inconsistent but {} completions", exact.len()),
        }
    }
    Ok(())
}

/// knows / knows_not are sound for entailment over all completions, and
/// exact when there are no variables.
pub fn knowledge_matches_entailment(r: &Raw) -> Outcome {
    let u = universe();
    let mut b = build(r, false);
    let exact = b.spec.completions(&u);
    if !b.store.is_consistent() {
        prop_assert!(exact.is_empty());
        return Ok(());
    }
    for f in &u {
        let entailed = exact.iter().all(|s| s.contains(&text(f)));
        let excluded = exact.iter().all(|s| !s.contains(&text(f)));
        let k = b.store.knows(f, b.z).unwrap();
        let kn = b.store.knows_not(f, b.z).unwrap();
        prop_assert!(!k || entailed, "knows({}) but not entailed", f);
        prop_assert!(!kn || excluded, "knows_not({}) but not excluded", f);
        if r.nv == 0 {
            prop_assert_eq!(k, entailed, "knows({})", f);
            prop_assert_eq!(kn, excluded, "knows_not({})", f);
        }
    }
    Ok(())
}

/// Without variables the store fails exactly when there is no completion,
/// and knowledge is exact.
pub fn ground_knowledge_is_exact(r: &Raw) -> Outcome {
    let u = universe();
    let mut b = build(r, false);
    let exact = b.spec.completions(&u);
    prop_assert_eq!(b.store.is_consistent(), !exact.is_empty());
    if exact.is_empty() {
        return Ok(());
    }
    for f in &u {
        let entailed = exact.iter().all(|s| s.contains(&text(f)));
        let excluded = exact.iter().all(|s| !s.contains(&text(f)));
        prop_assert_eq!(b.store.knows(f, b.z).unwrap(), entailed, "knows({})", f);
        prop_assert_eq!(b.store.knows_not(f, b.z).unwrap(), excluded, "knows_not({})", f);
    }
    Ok(())
}

pub type UpdateCase = (BTreeSet<usize>, Vec<F>, Vec<F>);

pub fn update_case() -> impl Strategy<Value = UpdateCase> {
    (
        proptest::collection::btree_set(0usize..8, 0..=5),
        proptest::collection::vec(ground_fluent(), 0..=3),
        proptest::collection::vec(ground_fluent(), 0..=3),
    )
}

/// On complete states update is set difference followed by union.
pub fn update_on_complete_states((known, plus, minus): &UpdateCase) -> Outcome {
    let u = universe();
    let known: Vec<Fluent> = known.iter().map(|i| u[*i].clone()).collect();
    let (plus, minus) = (ground(plus), ground(minus));
    let mut s = Store::new();
    let z = s.state(&known, false).unwrap();
    let z2 = s.update(z, &plus, &minus).unwrap();
    let mut want = ground_state(&known);
    for f in &minus {
        want.remove(&text(f));
    }
    want.extend(plus.iter().map(text));
    prop_assert_eq!(ground_state(&s.known(z2)), want);
    prop_assert!(matches!(s.tail(z2), fluxkit::store::Tail::Closed));
    Ok(())
}

pub type WeakCase = (Raw, Vec<F>, Vec<F>);

pub fn weak_case() -> impl Strategy<Value = WeakCase> {
    (
        raw(false, 4),
        proptest::collection::vec(ground_fluent(), 0..=2),
        proptest::collection::vec(ground_fluent(), 0..=2),
    )
}

/// Every exact successor of a completion is a completion of the update.
/// Removal is only correct on duplicate-free lists.
pub fn weak_update_is_sound((r, plus, minus): &WeakCase) -> Outcome {
    let u = universe();
    let mut r = r.clone();
    r.cs.push(C::Dup);
    let mut b = build(&r, false);
    if !b.store.is_consistent() {
        prop_assert!(b.spec.completions(&u).is_empty());
        return Ok(());
    }
    let (plus, minus) = (ground(plus), ground(minus));
    let before = completions(&b.store, b.z, &u).unwrap();
    match b.store.update(b.z, &plus, &minus) {
        Ok(z2) => {
            let after = completions(&b.store, z2, &u).unwrap();
            for s in &before {
                let mut img = s.clone();
                for f in &minus {
                    img.remove(&text(f));
                }
                img.extend(plus.iter().map(text));
                prop_assert!(after.contains(&img), "lost successor {:?}", img);
            }
        }
        Err(FluxError::Inconsistent) => prop_assert!(before.is_empty()),
        Err(e) => panic!("unexpected error {e}"),
    }
    Ok(())
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(&S::Value) -> Outcome) -> Result<u32, String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, |v| test(&v)).map(|_| cases).map_err(|e| e.to_string())
}

/// Every suite with its case count, as (name, cases run or failure).
pub fn run_all() -> Vec<(&'static str, Result<u32, String>)> {
    vec![
        ("propagation preserves completions", run(PROPAGATION_CASES, raw(false, 5), propagation_preserves_completions)),
        ("knowledge matches entailment", run(KNOWLEDGE_CASES, raw(false, 5), knowledge_matches_entailment)),
        ("ground knowledge is exact", run(GROUND_KNOWLEDGE_CASES, raw(true, 6), ground_knowledge_is_exact)),
        ("update on complete states", run(COMPLETE_UPDATE_CASES, update_case(), update_on_complete_states)),
        ("weak update is sound", run(WEAK_UPDATE_CASES, weak_case(), weak_update_is_sound)),
    ]
}
