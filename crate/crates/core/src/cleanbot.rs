//! The office-cleaning robot: gridworld, domain axioms and the depth-first
//! exploration strategy.

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{
    Action, ActionSpec, Agent, Domain, Environment, SenseKind, SenseValue, SensingResult,
};
use crate::error::{FluxError, Result};
use crate::fd::{FdAtom, FdFormula, LinExpr, Op};
use crate::store::{Disjunct, State, StateConstraint, Store};
use crate::terms::{ArgTerm, Fluent, Symbol, VarId};

pub const NORTH: i64 = 1;
pub const EAST: i64 = 2;
pub const SOUTH: i64 = 3;
pub const WEST: i64 = 4;

pub type Cell = (i64, i64);

pub fn at(x: ArgTerm, y: ArgTerm) -> Fluent {
    Fluent::named("at", [x, y])
}

pub fn facing(d: ArgTerm) -> Fluent {
    Fluent::named("facing", [d])
}

pub fn cleaned(x: ArgTerm, y: ArgTerm) -> Fluent {
    Fluent::named("cleaned", [x, y])
}

pub fn occupied(x: ArgTerm, y: ArgTerm) -> Fluent {
    Fluent::named("occupied", [x, y])
}

// Pattern variables for knows_val; never allocated in a store.
const QX: VarId = VarId(u32::MAX - 3);
const QY: VarId = VarId(u32::MAX - 2);
const QD: VarId = VarId(u32::MAX - 1);

fn int(v: i64) -> ArgTerm {
    ArgTerm::Int(v)
}

/// Cell reached by one step in direction `d`.
pub fn step(c: Cell, d: i64) -> Cell {
    match d {
        NORTH => (c.0, c.1 + 1),
        EAST => (c.0 + 1, c.1),
        SOUTH => (c.0, c.1 - 1),
        _ => (c.0 - 1, c.1),
    }
}

/// An office floor and what the robot is told about it up front.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub width: i64,
    pub height: i64,
    pub occupied: BTreeSet<Cell>,
    pub start: Cell,
    pub facing: i64,
    pub known_free: BTreeSet<Cell>,
}

impl Scenario {
    /// The sample floor: four occupied offices, the hallway known to be free.
    pub fn office() -> Scenario {
        let hallway = [
            (2, 1),
            (1, 2),
            (2, 2),
            (3, 2),
            (4, 2),
            (4, 3),
            (4, 4),
            (1, 5),
            (2, 5),
            (3, 5),
            (4, 5),
        ];
        Scenario {
            width: 5,
            height: 5,
            occupied: [(1, 4), (3, 1), (3, 3), (5, 3)].into_iter().collect(),
            start: (1, 1),
            facing: NORTH,
            known_free: hallway.into_iter().collect(),
        }
    }

    /// A `size`×`size` floor where every cell apart from the start and its
    /// two neighbours is occupied with probability `p`.
    pub fn random(size: i64, p: f64, seed: u64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let known_free: BTreeSet<Cell> = [(1, 2), (2, 1)].into_iter().collect();
        let mut occupied = BTreeSet::new();
        for x in 1..=size {
            for y in 1..=size {
                if (x, y) == (1, 1) || known_free.contains(&(x, y)) {
                    continue;
                }
                if rng.gen_bool(p) {
                    occupied.insert((x, y));
                }
            }
        }
        Scenario { width: size, height: size, occupied, start: (1, 1), facing: NORTH, known_free }
    }

    pub fn cells(&self) -> usize {
        (self.width * self.height) as usize
    }

    pub fn in_grid(&self, c: Cell) -> bool {
        (1..=self.width).contains(&c.0) && (1..=self.height).contains(&c.1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FluxError::Parse(m));
        if self.width < 1 || self.height < 1 {
            return bad(format!("grid {}x{} is empty", self.width, self.height));
        }
        if !self.in_grid(self.start) {
            return bad("robot outside the grid".into());
        }
        if !(1..=4).contains(&self.facing) {
            return bad(format!("direction {} not in 1..4", self.facing));
        }
        if self.occupied.contains(&self.start) {
            return bad("robot starts in an occupied cell".into());
        }
        for c in self.occupied.iter().chain(&self.known_free) {
            if !self.in_grid(*c) {
                return bad(format!("cell ({},{}) outside the grid", c.0, c.1));
            }
        }
        if let Some(c) = self.known_free.intersection(&self.occupied).next() {
            return bad(format!("cell ({},{}) is both occupied and known free", c.0, c.1));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Scenario> {
        let mut grid = None;
        let mut robot = None;
        let mut occupied = BTreeSet::new();
        let mut known_free = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let err = |m: &str| FluxError::Parse(format!("line {}: {m}", i + 1));
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let key = words.next().unwrap();
            let nums: Vec<i64> = words
                .map(|w| w.parse().map_err(|_| err(&format!("expected an integer, got `{w}`"))))
                .collect::<Result<_>>()?;
            let want = |n: usize| {
                if nums.len() == n {
                    Ok(())
                } else {
                    Err(err(&format!("`{key}` takes {n} numbers")))
                }
            };
            match key {
                "grid" => {
                    want(2)?;
                    grid = Some((nums[0], nums[1]));
                }
                "robot" => {
                    want(3)?;
                    robot = Some(((nums[0], nums[1]), nums[2]));
                }
                "occupied" => {
                    want(2)?;
                    occupied.insert((nums[0], nums[1]));
                }
                "known-free" => {
                    want(2)?;
                    known_free.insert((nums[0], nums[1]));
                }
                _ => return Err(err(&format!("unknown directive `{key}`"))),
            }
        }
        let (width, height) = grid.ok_or_else(|| FluxError::Parse("missing `grid` line".into()))?;
        let (start, facing) = robot.ok_or_else(|| FluxError::Parse("missing `robot` line".into()))?;
        let sc = Scenario { width, height, occupied, start, facing, known_free };
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("grid {} {}\n", self.width, self.height);
        out += &format!("robot {} {} {}\n", self.start.0, self.start.1, self.facing);
        for (x, y) in &self.occupied {
            out += &format!("occupied {x} {y}\n");
        }
        for (x, y) in &self.known_free {
            out += &format!("known-free {x} {y}\n");
        }
        out
    }
}

/// The simulated world.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub width: i64,
    pub height: i64,
    pub pos: Cell,
    pub dir: i64,
    pub cleaned: BTreeSet<Cell>,
    pub occupied: BTreeSet<Cell>,
}

impl GroundTruth {
    pub fn new(sc: &Scenario) -> GroundTruth {
        GroundTruth {
            width: sc.width,
            height: sc.height,
            pos: sc.start,
            dir: sc.facing,
            cleaned: BTreeSet::new(),
            occupied: sc.occupied.clone(),
        }
    }

    fn in_grid(&self, c: Cell) -> bool {
        (1..=self.width).contains(&c.0) && (1..=self.height).contains(&c.1)
    }

    pub fn light(&self, c: Cell) -> bool {
        [NORTH, EAST, SOUTH, WEST].iter().any(|&d| self.occupied.contains(&step(c, d)))
    }

    /// The world as a ground state.
    pub fn fluents(&self) -> Vec<Fluent> {
        let mut out = vec![at(int(self.pos.0), int(self.pos.1)), facing(int(self.dir))];
        out.extend(self.cleaned.iter().map(|&(x, y)| cleaned(int(x), int(y))));
        out.extend(self.occupied.iter().map(|&(x, y)| occupied(int(x), int(y))));
        out
    }
}

impl Environment for GroundTruth {
    fn perform(&mut self, a: &Action) -> Result<SensingResult> {
        match a.name.text().as_str() {
            "clean" => {
                self.cleaned.insert(self.pos);
                Ok(SensingResult::none())
            }
            "turn" => {
                self.dir = self.dir % 4 + 1;
                Ok(SensingResult::none())
            }
            "go" => {
                let next = step(self.pos, self.dir);
                if !self.in_grid(next) {
                    return Err(FluxError::Refused(format!("go into the wall at {next:?}")));
                }
                self.pos = next;
                Ok(SensingResult(vec![SenseValue::Bool(self.light(next))]))
            }
            "sense_loc" => Ok(SensingResult(vec![
                SenseValue::Int(self.pos.0),
                SenseValue::Int(self.pos.1),
            ])),
            _ => Err(FluxError::Refused(a.to_string())),
        }
    }
}

/// `a + d` as a term, introducing a constrained variable when `a` is free.
fn offset(store: &mut Store, a: ArgTerm, d: i64) -> Result<ArgTerm> {
    match store.resolve(a) {
        ArgTerm::Int(i) => Ok(int(i + d)),
        ArgTerm::Sym(_) => Err(FluxError::SymbolArithmetic),
        v @ ArgTerm::Var(_) => {
            let r = store.new_var();
            store.post_fd(&FdFormula::Atom(FdAtom::new(
                LinExpr::var(r),
                Op::Eq,
                LinExpr::from_arg(v).plus(d),
            )?))?;
            Ok(ArgTerm::Var(r))
        }
    }
}

/// Light at `(x, y)` iff some neighbour is occupied.
pub fn light_assert(store: &mut Store, x: ArgTerm, y: ArgTerm, percept: bool, z: State) -> Result<()> {
    let xe = offset(store, x, 1)?;
    let xw = offset(store, x, -1)?;
    let yn = offset(store, y, 1)?;
    let ys = offset(store, y, -1)?;
    let around = [occupied(xe, y), occupied(x, yn), occupied(xw, y), occupied(x, ys)];
    if percept {
        let ds = around.into_iter().map(Disjunct::Fluent).collect();
        store.assert_constraint(StateConstraint::OrHolds(ds, z.root))
    } else {
        for f in around {
            store.assert_constraint(StateConstraint::NotHolds(f, z.root))?;
        }
        Ok(())
    }
}

fn eq(a: ArgTerm, b: ArgTerm, k: i64) -> Result<FdFormula> {
    Ok(FdFormula::Atom(FdAtom::new(LinExpr::from_arg(a), Op::Eq, LinExpr::from_arg(b).plus(k))?))
}

fn within(a: ArgTerm, lo: i64, hi: i64) -> Result<FdFormula> {
    let e = || LinExpr::from_arg(a);
    Ok(FdFormula::And(vec![
        FdFormula::Atom(FdAtom::new(e(), Op::Ge, LinExpr::constant(lo))?),
        FdFormula::Atom(FdAtom::new(e(), Op::Le, LinExpr::constant(hi))?),
    ]))
}

/// `(x1, y1)` is the cell next to `(x, y)` in direction `d`, inside a
/// `w`×`h` grid.
#[allow(clippy::too_many_arguments)]
pub fn adjacent(
    store: &mut Store,
    w: i64,
    h: i64,
    x: ArgTerm,
    y: ArgTerm,
    d: ArgTerm,
    x1: ArgTerm,
    y1: ArgTerm,
) -> Result<()> {
    let c = |v| FdFormula::Atom(FdAtom::eq(d, int(v)));
    let f = FdFormula::And(vec![
        within(x, 1, w)?,
        within(y, 1, h)?,
        within(x1, 1, w)?,
        within(y1, 1, h)?,
        within(d, 1, 4)?,
        FdFormula::Or(vec![
            FdFormula::And(vec![c(NORTH), eq(x1, x, 0)?, eq(y1, y, 1)?]),
            FdFormula::And(vec![c(EAST), eq(x1, x, 1)?, eq(y1, y, 0)?]),
            FdFormula::And(vec![c(SOUTH), eq(x1, x, 0)?, eq(y1, y, -1)?]),
            FdFormula::And(vec![c(WEST), eq(x1, x, -1)?, eq(y1, y, 0)?]),
        ]),
    ]);
    store.post_fd(&f)
}

fn fresh(store: &mut Store) -> ArgTerm {
    ArgTerm::Var(store.new_var())
}

fn schema(store: &mut Store, name: &str, args: &[Option<i64>]) -> Fluent {
    let args: Vec<ArgTerm> = args.iter().map(|a| a.map(int).unwrap_or_else(|| fresh(store))).collect();
    Fluent::named(name, args)
}

/// General domain knowledge: a unique location and direction, nothing
/// occupied outside the grid, no duplicates.
pub fn consistent(store: &mut Store, z: State, w: i64, h: i64) -> Result<()> {
    let (x, y) = (fresh(store), fresh(store));
    let z1 = store.holds_split(&at(x, y), z)?.ok_or(FluxError::Inconsistent)?;
    store.post_fd(&FdFormula::And(vec![within(x, 1, w)?, within(y, 1, h)?]))?;
    let f = schema(store, "at", &[None, None]);
    store.assert_constraint(StateConstraint::NotHoldsAll(f, z1.root))?;
    let d = fresh(store);
    let z2 = store.holds_split(&facing(d), z)?.ok_or(FluxError::Inconsistent)?;
    store.post_fd(&within(d, 1, 4)?)?;
    let f = schema(store, "facing", &[None]);
    store.assert_constraint(StateConstraint::NotHoldsAll(f, z2.root))?;
    for args in [[None, Some(0)], [None, Some(h + 1)], [Some(0), None], [Some(w + 1), None]] {
        let f = schema(store, "occupied", &args);
        store.assert_constraint(StateConstraint::NotHoldsAll(f, z.root))?;
    }
    store.assert_constraint(StateConstraint::DuplicateFree(z.root))
}

/// Initial knowledge: pose, the cells known to be free, and the general
/// constraints.
pub fn init_state(store: &mut Store, sc: &Scenario) -> Result<State> {
    let (sx, sy) = sc.start;
    let z0 = store.state(&[at(int(sx), int(sy)), facing(int(sc.facing))], true)?;
    let crate::store::Tail::Open(tail) = store.tail(z0) else { unreachable!() };
    let mut free = vec![sc.start];
    free.extend(sc.known_free.iter().filter(|c| **c != sc.start));
    for (x, y) in free {
        store.assert_constraint(StateConstraint::NotHolds(occupied(int(x), int(y)), tail))?;
    }
    consistent(store, z0, sc.width, sc.height)?;
    Ok(z0)
}

fn holds_fresh(store: &mut Store, f: &Fluent, z: State) -> Result<()> {
    if store.holds_assert(f, z)? {
        Ok(())
    } else {
        Err(FluxError::Inconsistent)
    }
}

fn poss_go(store: &mut Store, z: State, w: i64, h: i64) -> Result<bool> {
    let (xv, yv, dv) = (QX, QY, QD);
    let locs = store.knows_val(&[xv, yv], &at(ArgTerm::Var(xv), ArgTerm::Var(yv)), z);
    let dirs = store.knows_val(&[dv], &facing(ArgTerm::Var(dv)), z);
    for l in &locs {
        for d in &dirs {
            let (x, y, d) = (l.values()[0], l.values()[1], d.values()[0]);
            let snap = store.snapshot();
            let (x1, y1) = (fresh(store), fresh(store));
            let r = adjacent(store, w, h, x, y, d, x1, y1);
            store.rollback(snap)?;
            match r {
                Ok(()) => return Ok(true),
                Err(FluxError::Inconsistent) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(false)
}

/// The action theory for a `w`×`h` floor: clean, turn, go and sense_loc.
pub fn domain(w: i64, h: i64) -> Domain {
    let mut d = Domain::new();
    d.register(ActionSpec {
        name: Symbol::intern("clean"),
        arity: 0,
        sensing: Vec::new(),
        poss: Box::new(|_, _, _| Ok(true)),
        update: Box::new(|s, z, _, _| {
            let (x, y) = (fresh(s), fresh(s));
            holds_fresh(s, &at(x, y), z)?;
            s.update(z, &[cleaned(x, y)], &[])
        }),
    });
    d.register(ActionSpec {
        name: Symbol::intern("turn"),
        arity: 0,
        sensing: Vec::new(),
        poss: Box::new(|_, _, _| Ok(true)),
        update: Box::new(|s, z, _, _| {
            let (d, d1) = (fresh(s), fresh(s));
            holds_fresh(s, &facing(d), z)?;
            let lt4 = FdFormula::Atom(FdAtom::new(LinExpr::from_arg(d), Op::Lt, LinExpr::constant(4))?);
            let is4 = FdFormula::Atom(FdAtom::eq(d, int(4)));
            let to1 = FdFormula::Atom(FdAtom::eq(d1, int(1)));
            s.post_fd(&FdFormula::Or(vec![
                FdFormula::And(vec![lt4, eq(d1, d, 1)?]),
                FdFormula::And(vec![is4, to1]),
            ]))?;
            s.update(z, &[facing(d1)], &[facing(d)])
        }),
    });
    d.register(ActionSpec {
        name: Symbol::intern("go"),
        arity: 0,
        sensing: vec![SenseKind::Bool],
        poss: Box::new(move |s, z, _| poss_go(s, z, w, h)),
        update: Box::new(move |s, z, _, y| {
            let (x0, y0, d, x1, y1) = (fresh(s), fresh(s), fresh(s), fresh(s), fresh(s));
            holds_fresh(s, &at(x0, y0), z)?;
            holds_fresh(s, &facing(d), z)?;
            adjacent(s, w, h, x0, y0, d, x1, y1)?;
            let z2 = s.update(z, &[at(x1, y1)], &[at(x0, y0)])?;
            light_assert(s, x1, y1, y.0[0].as_bool().unwrap(), z2)?;
            Ok(z2)
        }),
    });
    d.register(ActionSpec {
        name: Symbol::intern("sense_loc"),
        arity: 0,
        sensing: vec![SenseKind::Int, SenseKind::Int],
        poss: Box::new(|_, _, _| Ok(true)),
        update: Box::new(|s, z, _, y| {
            let (x, yy) = (y.0[0].as_int().unwrap(), y.0[1].as_int().unwrap());
            holds_fresh(s, &at(int(x), int(yy)), z)?;
            Ok(z)
        }),
    });
    d
}

/// One pass through the main loop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub at: Cell,
    pub choicepoints: Vec<Vec<i64>>,
    pub backtrack: Vec<i64>,
    /// Initials of the actions executed, e.g. `TTGC`.
    pub actions: String,
}

fn list(v: &[i64]) -> String {
    let parts: Vec<String> = v.iter().map(|d| d.to_string()).collect();
    format!("[{}]", parts.join(","))
}

impl fmt::Display for TraceRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cps: Vec<String> = self.choicepoints.iter().map(|c| list(c)).collect();
        let actions = if self.actions.is_empty() { "-" } else { &self.actions };
        write!(
            f,
            "({},{}) [{}] {} {}",
            self.at.0,
            self.at.1,
            cps.join(","),
            list(&self.backtrack),
            actions
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub rows: Vec<TraceRow>,
    /// Time spent choosing each action, in execution order.
    pub select_nanos: Vec<u64>,
}

/// Called after every executed action.
pub type Observer<'a, E> = dyn FnMut(&mut Agent, &E, &Action, &SensingResult) -> Result<()> + 'a;

struct Runner<'a, 'o, E: Environment> {
    agent: &'a mut Agent,
    env: &'a mut E,
    observer: &'a mut Observer<'o, E>,
    w: i64,
    h: i64,
    budget: usize,
    clock: Instant,
    report: RunReport,
    row_actions: String,
}

impl<E: Environment> Runner<'_, '_, E> {
    fn execute(&mut self, name: &str) -> Result<()> {
        if self.agent.log().len() >= self.budget {
            return Err(FluxError::Usage(format!("action budget of {} exhausted", self.budget)));
        }
        self.report.select_nanos.push(self.clock.elapsed().as_nanos() as u64);
        let a = Action::simple(name);
        let y = self.agent.execute(&a, self.env)?;
        (self.observer)(self.agent, self.env, &a, &y)?;
        self.row_actions.push(name.chars().next().unwrap().to_ascii_uppercase());
        self.clock = Instant::now();
        Ok(())
    }

    fn knows(&mut self, f: &Fluent) -> Result<bool> {
        self.agent.store.knows(f, self.agent.state)
    }

    fn knows_not(&mut self, f: &Fluent) -> Result<bool> {
        self.agent.store.knows_not(f, self.agent.state)
    }

    fn location(&mut self) -> Vec<Cell> {
        self.agent
            .store
            .knows_val(&[QX, QY], &at(ArgTerm::Var(QX), ArgTerm::Var(QY)), self.agent.state)
            .iter()
            .filter_map(|b| Some((b.values()[0].as_int()?, b.values()[1].as_int()?)))
            .collect()
    }

    fn turn_to_go(&mut self, d: i64) -> Result<()> {
        for _ in 0..4 {
            if self.knows(&facing(int(d)))? {
                return self.execute("go");
            }
            self.execute("turn")?;
        }
        Err(FluxError::Usage(format!("direction {d} never became known")))
    }

    fn target(&mut self, (x, y): Cell, d: i64) -> Result<Option<Cell>> {
        let store = &mut self.agent.store;
        let snap = store.snapshot();
        let (x1, y1) = (fresh(store), fresh(store));
        let r = adjacent(store, self.w, self.h, int(x), int(y), int(d), x1, y1);
        let out = r.map(|_| (store.resolve(x1).as_int(), store.resolve(y1).as_int()));
        store.rollback(snap)?;
        match out {
            Ok((Some(a), Some(b))) => Ok(Some((a, b))),
            Ok(_) | Err(FluxError::Inconsistent) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn go_in_direction(&mut self, d: i64) -> Result<bool> {
        for here in self.location() {
            let Some((x1, y1)) = self.target(here, d)? else { continue };
            if !self.knows(&cleaned(int(x1), int(y1)))? && self.knows_not(&occupied(int(x1), int(y1)))? {
                self.turn_to_go(d)?;
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn main_loop(&mut self) -> Result<()> {
        self.execute("clean")?;
        let mut choicepoints: Vec<Vec<i64>> = vec![vec![1, 2, 3, 4]];
        let mut backtrack: Vec<i64> = Vec::new();
        loop {
            let here = self.location().first().copied().unwrap_or((0, 0));
            let mut row = TraceRow {
                at: here,
                choicepoints: choicepoints.clone(),
                backtrack: backtrack.clone(),
                actions: String::new(),
            };
            self.row_actions.clear();
            let done = if let Some(&d) = choicepoints[0].first() {
                choicepoints[0].remove(0);
                if self.go_in_direction(d)? {
                    self.execute("clean")?;
                    choicepoints.insert(0, vec![1, 2, 3, 4]);
                    backtrack.insert(0, d);
                }
                false
            } else if backtrack.is_empty() {
                true
            } else {
                choicepoints.remove(0);
                let d = backtrack.remove(0);
                self.turn_to_go((d + 1) % 4 + 1)?;
                false
            };
            row.actions = std::mem::take(&mut self.row_actions);
            self.report.rows.push(row);
            if done {
                return Ok(());
            }
        }
    }
}

/// Clean at home, then explore depth-first, trying directions 1 to 4 at
/// every new cell and retracing the path when all are exhausted.
pub fn run_strategy<E: Environment>(
    agent: &mut Agent,
    env: &mut E,
    sc: &Scenario,
    budget: usize,
    observer: &mut Observer<'_, E>,
) -> Result<RunReport> {
    let mut r = Runner {
        agent,
        env,
        observer,
        w: sc.width,
        h: sc.height,
        budget,
        clock: Instant::now(),
        report: RunReport::default(),
        row_actions: String::new(),
    };
    r.main_loop()?;
    Ok(r.report)
}

/// An agent for `sc` with its initial knowledge.
pub fn new_agent(sc: &Scenario) -> Result<Agent> {
    let mut store = Store::new();
    let z0 = init_state(&mut store, sc)?;
    Ok(Agent::new(domain(sc.width, sc.height), store, z0))
}

/// Outcome of a run as seen by both the world and the agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Summary {
    pub cleaned: BTreeSet<Cell>,
    pub known_occupied: BTreeSet<Cell>,
    pub home: bool,
    pub actions: usize,
    pub gos: usize,
    pub turns: usize,
    pub cleans: usize,
}

pub fn summarize(agent: &mut Agent, gt: &GroundTruth, sc: &Scenario) -> Result<Summary> {
    let mut known_occupied = BTreeSet::new();
    for x in 1..=sc.width {
        for y in 1..=sc.height {
            if agent.store.knows(&occupied(int(x), int(y)), agent.state)? {
                known_occupied.insert((x, y));
            }
        }
    }
    let count = |n: &str| agent.log().entries().iter().filter(|e| e.action.name.text() == n).count();
    Ok(Summary {
        cleaned: gt.cleaned.clone(),
        known_occupied,
        home: gt.pos == sc.start,
        actions: agent.log().len(),
        gos: count("go"),
        turns: count("turn"),
        cleans: count("clean"),
    })
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells = |s: &BTreeSet<Cell>| {
            let parts: Vec<String> = s.iter().map(|(x, y)| format!("({x},{y})")).collect();
            parts.join(" ")
        };
        writeln!(f, "cleaned-cells: {}", cells(&self.cleaned))?;
        writeln!(f, "occupied-known-cells: {}", cells(&self.known_occupied))?;
        writeln!(f, "actions: {} go={} turn={} clean={}", self.actions, self.gos, self.turns, self.cleans)?;
        write!(
            f,
            "cleaned={} occupied-known={} home={}",
            self.cleaned.len(),
            self.known_occupied.len(),
            self.home
        )
    }
}

/// `STEP <n> <action> sensed=<list> pose=<x>,<y>,<d>`
pub fn trace_line(n: usize, a: &Action, y: &SensingResult, gt: &GroundTruth) -> String {
    format!("STEP {n} {a} sensed={y} pose={},{},{}", gt.pos.0, gt.pos.1, gt.dir)
}

/// Action budget used to bound runs.
pub fn budget(sc: &Scenario) -> usize {
    16 * sc.cells()
}
