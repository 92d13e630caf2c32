//! Invariants of terms, the fd solver, the store and agents.

mod common;

use common::oracle_cases::*;
use fluxkit::batch;
use fluxkit::cleanbot::{self, GroundTruth, Scenario};
use fluxkit::fd::{FdAtom, FdFormula, FdStore, LinExpr, Op};
use fluxkit::store::StateConstraint;
use fluxkit::terms::{identical, match_instance, not_unifiable, unify, ArgTerm, Fluent, VarId};
use fluxkit::FluxError;
use proptest::prelude::*;

fn arg() -> impl Strategy<Value = ArgTerm> {
    prop_oneof![
        (0i64..2).prop_map(ArgTerm::Int),
        Just(ArgTerm::sym("a")),
        (0u32..3).prop_map(|v| ArgTerm::Var(VarId(v))),
    ]
}

fn pair() -> impl Strategy<Value = Fluent> {
    (arg(), arg()).prop_map(|(a, b)| Fluent::named("p", [a, b]))
}

fn ground_pair() -> impl Strategy<Value = Fluent> {
    ((0i64..2), (0i64..2)).prop_map(|(a, b)| Fluent::named("p", [ArgTerm::Int(a), ArgTerm::Int(b)]))
}

proptest! {
    #[test]
    fn unifiers_equalize(a in pair(), b in pair()) {
        let ab = unify(&a, &b);
        prop_assert_eq!(ab.is_some(), unify(&b, &a).is_some());
        prop_assert_eq!(ab.is_none(), not_unifiable(&a, &b));
        if let Some(s) = ab {
            prop_assert_eq!(a.apply(&s), b.apply(&s));
        }
        prop_assert!(identical(&a, &a) && unify(&a, &a).is_some());
    }

    #[test]
    fn matching_instantiates_the_pattern(g in ground_pair(), p in pair()) {
        match match_instance(&g, &p) {
            Some(s) => prop_assert_eq!(p.apply(&s), g),
            None => prop_assert!(unify(&g, &p).is_none()),
        }
    }
}

#[derive(Clone, Debug)]
struct Cmp(usize, Op, usize, i64);

fn cmp() -> impl Strategy<Value = Cmp> {
    let op = prop_oneof![Just(Op::Eq), Just(Op::Ne), Just(Op::Lt), Just(Op::Le), Just(Op::Gt), Just(Op::Ge)];
    (0usize..3, op, 0usize..4, -2i64..=2).prop_map(|(a, op, b, k)| Cmp(a, op, b, k))
}

fn fd_formula() -> impl Strategy<Value = Vec<Cmp>> {
    prop::collection::vec(cmp(), 1..=3)
}

/// `x_a op x_b + k`, or `x_a op k` when `b` is 3.
fn to_atom(c: &Cmp) -> FdFormula {
    let rhs = if c.2 == 3 { LinExpr::constant(c.3) } else { LinExpr::var(VarId(c.2 as u32)).plus(c.3) };
    FdFormula::Atom(FdAtom::new(LinExpr::var(VarId(c.0 as u32)), c.1, rhs).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, ..ProptestConfig::default() })]

    // Propagation never removes a solution, and fails only without one.
    #[test]
    fn fd_propagation_keeps_solutions(
        posts in prop::collection::vec((fd_formula(), any::<bool>()), 1..=4),
    ) {
        let mut fd = FdStore::new();
        let vs: Vec<VarId> = (0..3).map(|_| fd.new_var()).collect();
        fd.post_range(&vs, 0, 3).unwrap();
        let mut posted: Vec<FdFormula> = Vec::new();
        for (atoms, disj) in &posts {
            let parts: Vec<FdFormula> = atoms.iter().map(to_atom).collect();
            let f = if *disj { FdFormula::Or(parts) } else { FdFormula::And(parts) };
            posted.push(f.clone());
            let r = fd.post(&f).and_then(|_| fd.propagate());
            let mut solutions = 0;
            for code in 0..64 {
                let val = [code % 4, code / 4 % 4, code / 16];
                let get = |v: VarId| val[v.0 as usize];
                if posted.iter().all(|f| f.eval(&get)) {
                    solutions += 1;
                    if r.is_ok() {
                        for v in &vs {
                            prop_assert!(fd.domain(*v).contains(get(*v)), "lost {:?}", val);
                        }
                    }
                }
            }
            match r {
                Ok(()) => {}
                Err(FluxError::Inconsistent) => {
                    prop_assert_eq!(solutions, 0);
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn fd_rollback_restores_domains(first in fd_formula(), second in fd_formula()) {
        let mut fd = FdStore::new();
        let vs: Vec<VarId> = (0..3).map(|_| fd.new_var()).collect();
        fd.post_range(&vs, 0, 3).unwrap();
        if fd.post(&FdFormula::Or(first.iter().map(to_atom).collect())).is_err() {
            return Ok(());
        }
        let before: Vec<String> = vs.iter().map(|v| fd.domain(*v).to_string()).collect();
        let m = fd.snapshot();
        let _ = fd.post(&FdFormula::And(second.iter().map(to_atom).collect()));
        fd.rollback(m).unwrap();
        let after: Vec<String> = vs.iter().map(|v| fd.domain(*v).to_string()).collect();
        prop_assert_eq!(before, after);
        prop_assert!(fd.is_consistent());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn rollback_restores_the_dump(r in raw(false, 4), more in prop::collection::vec(constraint(0), 1..=3), i in 0usize..8) {
        let mut b = build(&r, false);
        if !b.store.is_consistent() {
            return Ok(());
        }
        let before = b.store.dump(b.z);
        let u = universe();
        let snap = b.store.snapshot();
        let _ = b.store.update(b.z, &[u[i].clone()], &[u[(i + 3) % 8].clone()]);
        for c in &more {
            if let C::Nh(f) = c {
                let f = ground(std::slice::from_ref(f)).remove(0);
                let _ = b.store.assert_constraint(StateConstraint::NotHolds(f, b.z.root));
            }
        }
        b.store.rollback(snap).unwrap();
        prop_assert!(b.store.is_consistent());
        prop_assert_eq!(b.store.dump(b.z), before);
    }

    #[test]
    fn queries_leave_the_store_alone(r in raw(false, 5)) {
        let mut b = build(&r, false);
        if !b.store.is_consistent() {
            return Ok(());
        }
        let before = b.store.dump(b.z);
        for f in universe() {
            let k = b.store.knows(&f, b.z).unwrap();
            let kn = b.store.knows_not(&f, b.z).unwrap();
            prop_assert!(!(k && kn), "both knows and knows_not {}", f);
        }
        let (x, y) = (VarId(u32::MAX - 1), VarId(u32::MAX - 2));
        let _ = b.store.knows_val(&[x, y], &Fluent::named("g", [ArgTerm::Var(x), ArgTerm::Var(y)]), b.z);
        let _ = b.store.knows_val(&[x], &Fluent::named("f", [ArgTerm::Var(x)]), b.z);
        prop_assert_eq!(b.store.dump(b.z), before);
    }

    // A removed fluent is known false afterwards, an added one known true,
    // and no cancellation marker survives either step.
    #[test]
    fn update_effects_are_known(c in weak_case()) {
        let (r, plus, minus) = c;
        let mut r = r;
        r.cs.push(C::Dup);
        let b = build(&r, false);
        if !b.store.is_consistent() {
            return Ok(());
        }
        for (f, add) in ground(&plus).into_iter().map(|f| (f, true)).chain(ground(&minus).into_iter().map(|f| (f, false))) {
            let mut s = b.store.clone();
            let z2 = if add { s.plus(b.z, std::slice::from_ref(&f)) } else { s.minus(b.z, std::slice::from_ref(&f)) };
            let z2 = match z2 {
                Ok(z2) => z2,
                Err(FluxError::Inconsistent) => continue,
                Err(e) => panic!("{e}"),
            };
            prop_assert!(s.marker_free());
            if add {
                prop_assert!(s.knows(&f, z2).unwrap(), "added {} not known", f);
            } else {
                prop_assert!(s.knows_not(&f, z2).unwrap(), "removed {} still possible", f);
            }
        }
        let mut s = b.store.clone();
        let (plus, minus) = (ground(&plus), ground(&minus));
        if let Ok(z2) = s.update(b.z, &plus, &minus) {
            prop_assert!(s.marker_free());
            for f in &plus {
                prop_assert!(s.knows(f, z2).unwrap(), "added {} not known after update", f);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    // The log replays to the same specification, one entry per action.
    #[test]
    fn runs_replay_exactly(size in 2i64..=5, p in 0.0f64..0.3, seed in any::<u64>()) {
        let sc = Scenario::random(size, p, seed);
        let mut agent = cleanbot::new_agent(&sc).unwrap();
        let mut gt = GroundTruth::new(&sc);
        let mut calls = 0;
        cleanbot::run_strategy(&mut agent, &mut gt, &sc, cleanbot::budget(&sc), &mut |_, _, _, _| {
            calls += 1;
            Ok(())
        })
        .unwrap();
        prop_assert_eq!(calls, agent.log().len());
        prop_assert!(agent.log().all_poss_verified());
        prop_assert_eq!(agent.replay().unwrap(), agent.dump());
        prop_assert_eq!(gt.pos, sc.start);
    }

    #[test]
    fn batch_map_keeps_order(xs in prop::collection::vec(any::<u32>(), 0..200)) {
        let f = |x: &u32| x.wrapping_mul(2654435761) >> 3;
        prop_assert_eq!(batch::map(&xs, f), batch::map_sequential(&xs, f));
    }
}
