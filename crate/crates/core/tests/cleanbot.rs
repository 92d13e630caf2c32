use std::collections::BTreeSet;

use fluxkit::agent::{Action, Agent, Environment, SenseValue, SensingResult};
use fluxkit::cleanbot::*;
use fluxkit::oracle::is_completion;
use fluxkit::store::{State, Store};
use fluxkit::terms::ArgTerm;
use fluxkit::FluxError;

fn int(v: i64) -> ArgTerm {
    ArgTerm::Int(v)
}

fn run(sc: &Scenario) -> (Agent, GroundTruth, RunReport) {
    let mut agent = new_agent(sc).unwrap();
    let mut gt = GroundTruth::new(sc);
    let rep = run_strategy(&mut agent, &mut gt, sc, budget(sc), &mut |_, _, _, _| Ok(())).unwrap();
    (agent, gt, rep)
}

#[test]
fn office_trace_table() {
    let (_, _, rep) = run(&Scenario::office());
    let rows: Vec<String> = rep.rows.iter().take(9).map(|r| r.to_string()).collect();
    assert_eq!(
        rows,
        [
            "(1,1) [[1,2,3,4]] [] GC",
            "(1,2) [[1,2,3,4],[2,3,4]] [1] GC",
            "(1,3) [[1,2,3,4],[2,3,4],[2,3,4]] [1,1] -",
            "(1,3) [[2,3,4],[2,3,4],[2,3,4]] [1,1] -",
            "(1,3) [[3,4],[2,3,4],[2,3,4]] [1,1] -",
            "(1,3) [[4],[2,3,4],[2,3,4]] [1,1] -",
            "(1,3) [[],[2,3,4],[2,3,4]] [1,1] TTG",
            "(1,2) [[2,3,4],[2,3,4]] [1] TTTGC",
            "(2,2) [[1,2,3,4],[3,4],[2,3,4]] [2,1] TTTGC",
        ]
    );
}

#[test]
fn office_final_state() {
    let sc = Scenario::office();
    let (mut agent, gt, _) = run(&sc);
    let s = summarize(&mut agent, &gt, &sc).unwrap();
    let all: BTreeSet<Cell> = (1..=5).flat_map(|x| (1..=5).map(move |y| (x, y))).collect();
    let uncleaned: BTreeSet<Cell> = all.difference(&s.cleaned).copied().collect();
    assert_eq!(uncleaned, [(1, 4), (3, 1), (3, 3), (5, 3), (5, 1)].into_iter().collect());
    assert_eq!(s.known_occupied, sc.occupied);
    assert!(s.home);
    assert!(sc.known_free.iter().all(|c| s.cleaned.contains(c)));
    assert!(agent.log().all_poss_verified());
    assert_eq!(agent.replay().unwrap(), agent.dump());
}

#[test]
fn empty_two_by_two() {
    let sc = Scenario::random(2, 0.0, 0);
    assert!(sc.occupied.is_empty());
    let (mut agent, gt, _) = run(&sc);
    let s = summarize(&mut agent, &gt, &sc).unwrap();
    assert_eq!(s.cleaned.len(), 4);
    assert!(s.home);
}

#[test]
fn ground_truth_stays_a_completion() {
    let sc = Scenario::office();
    let mut agent = new_agent(&sc).unwrap();
    let mut gt = GroundTruth::new(&sc);
    assert!(is_completion(&agent.store, agent.state, &gt.fluents()).unwrap());
    let mut steps = 0;
    run_strategy(&mut agent, &mut gt, &sc, budget(&sc), &mut |a, g, _, _| {
        steps += 1;
        assert!(!g.occupied.contains(&g.pos));
        assert!(is_completion(&a.store, a.state, &g.fluents())?);
        Ok(())
    })
    .unwrap();
    assert_eq!(steps, agent.log().len());
}

#[test]
fn completion_check_rejects_a_wrong_world() {
    let sc = Scenario::office();
    let agent = new_agent(&sc).unwrap();
    let mut wrong = sc.clone();
    wrong.occupied.insert((2, 2));
    let gt = GroundTruth { occupied: wrong.occupied, ..GroundTruth::new(&sc) };
    assert!(!is_completion(&agent.store, agent.state, &gt.fluents()).unwrap());
}

fn zeta(store: &mut Store) -> State {
    let sc = Scenario::office();
    let z0 = init_state(store, &sc).unwrap();
    let plus = [
        cleaned(int(1), int(1)),
        cleaned(int(1), int(2)),
        cleaned(int(1), int(3)),
    ];
    let z = store.update(z0, &[], &[at(int(1), int(1))]).unwrap();
    let z = store.update(z, &[at(int(1), int(3))], &[]).unwrap();
    let z = store.plus(z, &plus).unwrap();
    light_assert(store, int(1), int(2), false, z).unwrap();
    light_assert(store, int(1), int(3), true, z).unwrap();
    z
}

#[test]
fn light_at_one_three() {
    let mut s = Store::new();
    let z = zeta(&mut s);
    assert!(s.dump(z).contains("or_holds([occupied(1,4),occupied(2,3)], Z)"), "{}", s.dump(z));
    light_assert(&mut s, int(2), int(2), false, z).unwrap();
    assert!(s.known(z).contains(&occupied(int(1), int(4))));
    assert!(s.dump(z).contains("not_holds(occupied(2,3), Z)"));
}

#[test]
fn light_with_free_neighbours_is_inconsistent() {
    let mut s = Store::new();
    let z = init_state(&mut s, &Scenario::office()).unwrap();
    assert_eq!(light_assert(&mut s, int(1), int(1), true, z), Err(FluxError::Inconsistent));
}

#[test]
fn adjacent_examples() {
    let mut s = Store::new();
    let (x1, y1) = (s.new_var(), s.new_var());
    adjacent(&mut s, 5, 5, int(1), int(1), int(1), x1.into(), y1.into()).unwrap();
    assert_eq!((s.fd().value(x1), s.fd().value(y1)), (Some(1), Some(2)));

    let (x1, y1) = (s.new_var(), s.new_var());
    let r = adjacent(&mut s, 5, 5, int(1), int(5), int(1), x1.into(), y1.into());
    assert_eq!(r, Err(FluxError::Inconsistent));

    let mut s = Store::new();
    let d = s.new_var();
    adjacent(&mut s, 5, 5, int(3), int(3), d.into(), int(3), int(2)).unwrap();
    assert_eq!(s.fd().value(d), Some(3));
}

#[test]
fn poss_examples() {
    let sc = Scenario::office();
    let mut agent = new_agent(&sc).unwrap();
    assert!(agent.poss(&Action::simple("clean")).unwrap());
    assert!(agent.poss(&Action::simple("go")).unwrap());
    let err = agent.poss(&Action::simple("jump")).unwrap_err();
    assert!(matches!(err, FluxError::Usage(_)));

    let top = Scenario { start: (1, 5), ..Scenario::office() };
    let mut agent = new_agent(&top).unwrap();
    let before = agent.dump();
    assert!(!agent.poss(&Action::simple("go")).unwrap());
    assert_eq!(agent.dump(), before);
}

#[test]
fn four_turns_restore_facing() {
    let sc = Scenario::office();
    let mut agent = new_agent(&sc).unwrap();
    let mut gt = GroundTruth::new(&sc);
    for _ in 0..4 {
        agent.execute(&Action::simple("turn"), &mut gt).unwrap();
    }
    assert_eq!(gt.dir, NORTH);
    assert!(agent.store.knows(&facing(int(NORTH)), agent.state).unwrap());
    assert_eq!(agent.log().len(), 4);
}

#[test]
fn clean_records_the_bin() {
    let sc = Scenario::office();
    let mut agent = new_agent(&sc).unwrap();
    let mut gt = GroundTruth::new(&sc);
    agent.execute(&Action::simple("clean"), &mut gt).unwrap();
    assert!(gt.cleaned.contains(&(1, 1)));
    assert!(agent.store.knows(&cleaned(int(1), int(1)), agent.state).unwrap());
}

#[test]
fn environment_examples() {
    let sc = Scenario::office();
    let mut gt = GroundTruth::new(&sc);
    let go = Action::simple("go");
    assert_eq!(gt.perform(&go).unwrap(), SensingResult(vec![SenseValue::Bool(false)]));
    assert_eq!(gt.perform(&go).unwrap(), SensingResult(vec![SenseValue::Bool(true)]));
    gt.dir = WEST;
    assert!(matches!(gt.perform(&go), Err(FluxError::Refused(_))));
    gt.perform(&Action::simple("turn")).unwrap();
    assert_eq!(gt.dir, NORTH);
    let loc = gt.perform(&Action::simple("sense_loc")).unwrap();
    assert_eq!(loc, SensingResult(vec![SenseValue::Int(1), SenseValue::Int(3)]));
}

#[test]
fn go_go_session() {
    let sc = Scenario::office();
    let mut agent = new_agent(&sc).unwrap();
    let d = &agent.domain;
    let f = SensingResult(vec![SenseValue::Bool(false)]);
    let t = SensingResult(vec![SenseValue::Bool(true)]);
    let go = Action::simple("go");
    let z1 = d.state_update(&mut agent.store, agent.state, &go, &f).unwrap();
    assert_eq!(agent.store.known(z1), [at(int(1), int(2)), facing(int(1))]);
    let z2 = d.state_update(&mut agent.store, z1, &go, &t).unwrap();
    assert_eq!(agent.store.known(z2), [at(int(1), int(3)), facing(int(1))]);
    let dump = agent.store.dump(z2);
    assert!(dump.contains("not_holds(occupied(1,3), Z)"), "{dump}");
    assert!(dump.contains("or_holds([occupied(2,3),occupied(1,4)], Z)"), "{dump}");
}

#[test]
fn sense_loc_resolves_facing() {
    let sc = Scenario { known_free: BTreeSet::new(), ..Scenario::office() };
    let mut s = Store::new();
    let dv = s.new_var();
    let z0 = s.state(&[at(int(1), int(1)), facing(dv.into())], true).unwrap();
    s.post_fd(&fluxkit::fd::FdFormula::Or(vec![
        fluxkit::fd::FdFormula::Atom(fluxkit::fd::FdAtom::eq(dv.into(), int(1))),
        fluxkit::fd::FdFormula::Atom(fluxkit::fd::FdAtom::eq(dv.into(), int(2))),
    ]))
    .unwrap();
    consistent(&mut s, z0, sc.width, sc.height).unwrap();
    let d = domain(5, 5);
    let z1 = d
        .state_update(&mut s, z0, &Action::simple("go"), &SensingResult(vec![SenseValue::Bool(false)]))
        .unwrap();
    let loc = SensingResult(vec![SenseValue::Int(1), SenseValue::Int(2)]);
    let z2 = d.state_update(&mut s, z1, &Action::simple("sense_loc"), &loc).unwrap();
    assert_eq!(s.known(z2), [at(int(1), int(2)), facing(int(1))]);
    assert!(s.dump(z2).contains("not_holds(occupied(1,3), Z)"));
}

#[test]
fn scenario_text_round_trip() {
    let sc = Scenario::office();
    assert_eq!(Scenario::parse(&sc.to_text()).unwrap(), sc);
    let e = Scenario::parse("grid 5 5\nrobot 1 1 1\noccupied 1 x\n").unwrap_err();
    assert!(e.to_string().contains("line 3"));
    assert!(Scenario::parse("robot 1 1 1\n").is_err());
    assert!(Scenario::parse("grid 3 3\nrobot 1 1 1\noccupied 1 1\n").is_err());
}

#[test]
fn random_scenarios_are_reproducible() {
    let a = Scenario::random(6, 0.15, 7);
    assert_eq!(a, Scenario::random(6, 0.15, 7));
    assert!(a.validate().is_ok());
    assert!(!a.occupied.contains(&(1, 2)) && !a.occupied.contains(&(2, 1)));
}
