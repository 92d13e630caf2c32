//! A one-action domain of toggle switches: `alter(X)` flips `open(X)`.
//! When the current position is unknown the agent forgets what it knew.

use crate::agent::{Action, ActionSpec, Domain};
use crate::error::Result;
use crate::store::{State, Store};
use crate::terms::Fluent;

pub fn open(x: crate::terms::ArgTerm) -> Fluent {
    Fluent::named("open", [x])
}

fn alter(store: &mut Store, z: State, a: &Action) -> Result<State> {
    let f = open(a.args[0]);
    if store.knows(&f, z)? {
        store.update(z, &[], &[f])
    } else if store.knows_not(&f, z)? {
        store.update(z, &[f], &[])
    } else {
        store.cancel_fluent(&f, z)
    }
}

pub fn domain() -> Domain {
    let mut d = Domain::new();
    d.register(ActionSpec {
        name: crate::terms::Symbol::intern("alter"),
        arity: 1,
        sensing: Vec::new(),
        poss: Box::new(|_, _, _| Ok(true)),
        update: Box::new(|s, z, a, _| alter(s, z, a)),
    });
    d
}
