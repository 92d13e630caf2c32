//! Domain runtime: action axioms, the execute cycle and the action log.

use std::collections::HashMap;
use std::fmt;

use crate::error::{FluxError, Result};
use crate::store::{State, Store};
use crate::terms::{ArgTerm, Symbol};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Action {
    pub name: Symbol,
    pub args: Vec<ArgTerm>,
}

impl Action {
    pub fn new(name: &str, args: impl IntoIterator<Item = ArgTerm>) -> Action {
        Action { name: Symbol::intern(name), args: args.into_iter().collect() }
    }

    pub fn simple(name: &str) -> Action {
        Action::new(name, [])
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.args.is_empty() {
            let parts: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
            write!(f, "({})", parts.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SenseKind {
    Bool,
    Int,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SenseValue {
    Bool(bool),
    Int(i64),
}

impl SenseValue {
    pub fn kind(self) -> SenseKind {
        match self {
            SenseValue::Bool(_) => SenseKind::Bool,
            SenseValue::Int(_) => SenseKind::Int,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            SenseValue::Bool(b) => Some(b),
            SenseValue::Int(_) => None,
        }
    }

    pub fn as_int(self) -> Option<i64> {
        match self {
            SenseValue::Int(i) => Some(i),
            SenseValue::Bool(_) => None,
        }
    }
}

impl fmt::Display for SenseValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SenseValue::Bool(b) => write!(f, "{b}"),
            SenseValue::Int(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SensingResult(pub Vec<SenseValue>);

impl SensingResult {
    pub fn none() -> SensingResult {
        SensingResult(Vec::new())
    }
}

impl fmt::Display for SensingResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Precondition evaluator. May post constraints; the caller rolls them back.
pub type PossFn = Box<dyn Fn(&mut Store, State, &Action) -> Result<bool> + Send + Sync>;

/// Knowledge update: physical effects, then the sensing result.
pub type UpdateFn =
    Box<dyn Fn(&mut Store, State, &Action, &SensingResult) -> Result<State> + Send + Sync>;

pub struct ActionSpec {
    pub name: Symbol,
    pub arity: usize,
    pub sensing: Vec<SenseKind>,
    pub poss: PossFn,
    pub update: UpdateFn,
}

/// The registered actions of one domain.
#[derive(Default)]
pub struct Domain {
    specs: HashMap<Symbol, ActionSpec>,
}

impl Domain {
    pub fn new() -> Domain {
        Domain::default()
    }

    pub fn register(&mut self, spec: ActionSpec) {
        self.specs.insert(spec.name, spec);
    }

    pub fn spec(&self, a: &Action) -> Result<&ActionSpec> {
        let s = self
            .specs
            .get(&a.name)
            .ok_or_else(|| FluxError::Usage(format!("unregistered action `{}`", a.name)))?;
        if s.arity != a.args.len() {
            return Err(FluxError::Arity {
                functor: a.name.text(),
                expected: s.arity,
                got: a.args.len(),
            });
        }
        Ok(s)
    }

    /// Evaluate the precondition of `a` in `z`. Nothing it posts survives.
    pub fn poss(&self, store: &mut Store, z: State, a: &Action) -> Result<bool> {
        let spec = self.spec(a)?;
        if !store.is_consistent() {
            return Err(FluxError::Inconsistent);
        }
        let snap = store.snapshot();
        let r = (spec.poss)(store, z, a);
        store.rollback(snap)?;
        match r {
            Err(FluxError::Inconsistent) => Ok(false),
            r => r,
        }
    }

    pub fn state_update(
        &self,
        store: &mut Store,
        z: State,
        a: &Action,
        y: &SensingResult,
    ) -> Result<State> {
        let spec = self.spec(a)?;
        let kinds: Vec<SenseKind> = y.0.iter().map(|v| v.kind()).collect();
        if kinds != spec.sensing {
            return Err(FluxError::Usage(format!(
                "sensing result {y} does not fit action `{}`",
                a.name
            )));
        }
        (spec.update)(store, z, a, y)
    }
}

/// Something that carries out actions and reports what was sensed.
pub trait Environment {
    fn perform(&mut self, a: &Action) -> Result<SensingResult>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEntry {
    pub action: Action,
    pub sensed: SensingResult,
    pub poss_verified: bool,
}

#[derive(Clone, Debug, Default)]
pub struct ActionLog {
    entries: Vec<LogEntry>,
}

impl ActionLog {
    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn all_poss_verified(&self) -> bool {
        self.entries.iter().all(|e| e.poss_verified)
    }
}

/// A running agent: its knowledge, its domain and what it has done.
pub struct Agent {
    pub store: Store,
    pub state: State,
    pub domain: Domain,
    log: ActionLog,
    initial: (Store, State),
}

impl Agent {
    pub fn new(domain: Domain, store: Store, state: State) -> Agent {
        let initial = (store.clone(), state);
        Agent { store, state, domain, log: ActionLog::default(), initial }
    }

    pub fn log(&self) -> &ActionLog {
        &self.log
    }

    pub fn poss(&mut self, a: &Action) -> Result<bool> {
        self.domain.poss(&mut self.store, self.state, a)
    }

    /// Perform `a` in `env` and progress the state by what was sensed.
    pub fn execute(&mut self, a: &Action, env: &mut dyn Environment) -> Result<SensingResult> {
        let poss_verified = self.poss(a)?;
        let y = env.perform(a)?;
        let z2 = self.domain.state_update(&mut self.store, self.state, a, &y)?;
        self.state = z2;
        self.log.entries.push(LogEntry { action: a.clone(), sensed: y.clone(), poss_verified });
        Ok(y)
    }

    pub fn dump(&self) -> String {
        self.store.dump(self.state)
    }

    /// Re-run the logged updates from the initial knowledge and return the
    /// resulting dump.
    pub fn replay(&self) -> Result<String> {
        let (mut store, mut z) = self.initial.clone();
        for e in &self.log.entries {
            z = self.domain.state_update(&mut store, z, &e.action, &e.sensed)?;
        }
        Ok(store.dump(z))
    }
}
