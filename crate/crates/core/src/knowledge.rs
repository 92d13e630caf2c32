//! Knowledge queries by speculative assertion and rollback.

use crate::error::{FluxError, Result};
use crate::store::{Cell, State, Store};
use crate::terms::{match_instance, ArgTerm, Fluent, VarId};

/// Values for the query variables of one `knows_val` solution.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Binding(pub Vec<(VarId, ArgTerm)>);

impl Binding {
    pub fn get(&self, v: VarId) -> Option<ArgTerm> {
        self.0.iter().find(|(w, _)| *w == v).map(|(_, t)| *t)
    }

    pub fn values(&self) -> Vec<ArgTerm> {
        self.0.iter().map(|(_, t)| *t).collect()
    }
}

impl Store {
    fn ground_query(&self, f: &Fluent) -> Result<Fluent> {
        let f = self.resolve_fluent(f);
        if f.is_ground() {
            Ok(f)
        } else {
            Err(FluxError::Usage(format!("knowledge query on non-ground fluent {f}")))
        }
    }

    /// `f` holds in every completion of `z`.
    pub fn knows(&mut self, f: &Fluent, z: State) -> Result<bool> {
        let f = self.ground_query(f)?;
        self.entails_holds(&f, z)
    }

    /// `f` holds in no completion of `z`.
    pub fn knows_not(&mut self, f: &Fluent, z: State) -> Result<bool> {
        let f = self.ground_query(f)?;
        self.entails_not_holds(&f, z)
    }

    /// Ground values of `vars` from listed fluents matching `pattern`, in
    /// list order without duplicates.
    pub fn knows_val(&self, vars: &[VarId], pattern: &Fluent, z: State) -> Vec<Binding> {
        let mut out: Vec<Binding> = Vec::new();
        let mut l = z.root;
        while let Cell::Cons(g, next) = self.cell(l) {
            let g = self.resolve_fluent(g);
            if let Some(theta) = match_instance(&g, pattern) {
                let vals: Option<Vec<(VarId, ArgTerm)>> = vars
                    .iter()
                    .map(|&v| match theta.get(v) {
                        Some(t) if !t.is_var() => Some((v, t)),
                        _ => None,
                    })
                    .collect();
                if let Some(b) = vals.map(Binding) {
                    if !out.contains(&b) {
                        out.push(b);
                    }
                }
            }
            l = *next;
        }
        out
    }
}
