//! Fluent terms: interned symbols, flat argument terms, and the four term
//! relations used by the rule guards (unification, instance matching,
//! identity, non-unifiability).

use std::collections::HashMap;
use std::fmt;
use std::sync::{OnceLock, RwLock};

use smallvec::SmallVec;

use crate::error::{FluxError, Result};

/// Interned constant or functor name.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(u32);

#[derive(Default)]
struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

fn interner() -> &'static RwLock<Interner> {
    static INTERNER: OnceLock<RwLock<Interner>> = OnceLock::new();
    INTERNER.get_or_init(Default::default)
}

impl Symbol {
    pub fn intern(text: &str) -> Symbol {
        if let Some(&id) = interner().read().unwrap().ids.get(text) {
            return Symbol(id);
        }
        let mut w = interner().write().unwrap();
        if let Some(&id) = w.ids.get(text) {
            return Symbol(id);
        }
        let id = w.names.len() as u32;
        w.names.push(text.to_string());
        w.ids.insert(text.to_string(), id);
        Symbol(id)
    }

    pub fn id(self) -> u32 {
        self.0
    }

    pub fn text(self) -> String {
        interner().read().unwrap().names[self.0 as usize].clone()
    }

    /// Integer code used when the symbol enters the fd store. Codes are
    /// negative and far below any user integer.
    pub fn code(self) -> i64 {
        SYM_BASE - self.0 as i64
    }

    pub fn from_code(code: i64) -> Option<Symbol> {
        if is_symbol_code(code) {
            Some(Symbol((SYM_BASE - code) as u32))
        } else {
            None
        }
    }
}

pub const SYM_BASE: i64 = -(1 << 40);

pub fn is_symbol_code(v: i64) -> bool {
    v <= SYM_BASE && v > SYM_BASE - (u32::MAX as i64) - 1
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.text())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

/// Constraint variable id, fresh per store.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct VarId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum ArgTerm {
    Var(VarId),
    Int(i64),
    Sym(Symbol),
}

impl ArgTerm {
    pub fn is_var(&self) -> bool {
        matches!(self, ArgTerm::Var(_))
    }

    pub fn as_var(&self) -> Option<VarId> {
        match self {
            ArgTerm::Var(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            ArgTerm::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Value of a constant in the fd store's integer space.
    pub fn const_code(&self) -> Option<i64> {
        match self {
            ArgTerm::Int(i) => Some(*i),
            ArgTerm::Sym(s) => Some(s.code()),
            ArgTerm::Var(_) => None,
        }
    }

    pub fn from_code(code: i64) -> ArgTerm {
        match Symbol::from_code(code) {
            Some(s) => ArgTerm::Sym(s),
            None => ArgTerm::Int(code),
        }
    }

    pub fn sym(text: &str) -> ArgTerm {
        ArgTerm::Sym(Symbol::intern(text))
    }
}

impl From<i64> for ArgTerm {
    fn from(v: i64) -> Self {
        ArgTerm::Int(v)
    }
}

impl From<VarId> for ArgTerm {
    fn from(v: VarId) -> Self {
        ArgTerm::Var(v)
    }
}

impl fmt::Display for ArgTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgTerm::Var(v) => write!(f, "_G{}", v.0),
            ArgTerm::Int(i) => write!(f, "{i}"),
            ArgTerm::Sym(s) => write!(f, "{s}"),
        }
    }
}

pub type Args = SmallVec<[ArgTerm; 3]>;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Fluent {
    pub functor: Symbol,
    pub args: Args,
}

impl Fluent {
    pub fn new(functor: Symbol, args: impl IntoIterator<Item = ArgTerm>) -> Fluent {
        Fluent { functor, args: args.into_iter().collect() }
    }

    /// `Fluent::named("at", [1.into(), 2.into()])`
    pub fn named(functor: &str, args: impl IntoIterator<Item = ArgTerm>) -> Fluent {
        Fluent::new(Symbol::intern(functor), args)
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(ArgTerm::is_var)
    }

    pub fn is_schematic(&self) -> bool {
        !self.is_ground()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.args.iter().filter_map(ArgTerm::as_var)
    }

    pub fn apply(&self, s: &Subst) -> Fluent {
        Fluent {
            functor: self.functor,
            args: self.args.iter().map(|a| s.walk(*a)).collect(),
        }
    }
}

impl fmt::Display for Fluent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.functor)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Variable bindings produced by unification or matching.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Subst {
    map: HashMap<VarId, ArgTerm>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn get(&self, v: VarId) -> Option<ArgTerm> {
        self.map.get(&v).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, ArgTerm)> + '_ {
        self.map.iter().map(|(k, v)| (*k, *v))
    }

    /// Follow bindings until an unbound variable or a constant.
    pub fn walk(&self, mut t: ArgTerm) -> ArgTerm {
        while let ArgTerm::Var(v) = t {
            match self.map.get(&v) {
                Some(&next) => t = next,
                None => break,
            }
        }
        t
    }

    fn bind(&mut self, v: VarId, t: ArgTerm) {
        self.map.insert(v, t);
    }

    /// Fully resolved bindings, one entry per bound variable.
    pub fn resolved(&self) -> Subst {
        let map = self.map.keys().map(|&k| (k, self.walk(ArgTerm::Var(k)))).collect();
        Subst { map }
    }
}

/// Most general unifier of two flat fluents.
pub fn unify(a: &Fluent, b: &Fluent) -> Option<Subst> {
    if a.functor != b.functor || a.args.len() != b.args.len() {
        return None;
    }
    let mut s = Subst::new();
    for (x, y) in a.args.iter().zip(b.args.iter()) {
        let x = s.walk(*x);
        let y = s.walk(*y);
        match (x, y) {
            (ArgTerm::Var(u), ArgTerm::Var(w)) if u == w => {}
            (ArgTerm::Var(u), t) | (t, ArgTerm::Var(u)) => s.bind(u, t),
            (p, q) if p == q => {}
            _ => return None,
        }
    }
    Some(s.resolved())
}

/// One-way match: θ with `pattern`θ = `g`. Variables of `g` act as constants.
pub fn match_instance(g: &Fluent, pattern: &Fluent) -> Option<Subst> {
    if g.functor != pattern.functor || g.args.len() != pattern.args.len() {
        return None;
    }
    let mut s = Subst::new();
    for (p, t) in pattern.args.iter().zip(g.args.iter()) {
        match p {
            ArgTerm::Var(v) => match s.get(*v) {
                Some(bound) if bound != *t => return None,
                Some(_) => {}
                None => s.bind(*v, *t),
            },
            c if c == t => {}
            _ => return None,
        }
    }
    Some(s)
}

pub fn is_instance(g: &Fluent, pattern: &Fluent) -> bool {
    match_instance(g, pattern).is_some()
}

pub fn identical(a: &Fluent, b: &Fluent) -> bool {
    a == b
}

pub fn not_unifiable(a: &Fluent, b: &Fluent) -> bool {
    if a.functor != b.functor || a.args.len() != b.args.len() {
        return true;
    }
    if a.is_ground() && b.is_ground() {
        return a != b;
    }
    unify(a, b).is_none()
}

/// Variable naming used by the text syntax. Named variables map to the same
/// id within one naming scope, `_` always yields a fresh one.
pub trait VarScope {
    fn var_named(&mut self, name: &str) -> VarId;
    fn fresh_var(&mut self) -> VarId;
}

/// Parse `functor(arg,...)`. Integers, lowercase symbols, `_` and uppercase
/// names for variables.
pub fn parse_fluent(text: &str, scope: &mut dyn VarScope) -> Result<Fluent> {
    let text = text.trim();
    let bad = || FluxError::Parse(format!("malformed fluent `{text}`"));
    let (name, rest) = match text.find('(') {
        Some(i) => (&text[..i], Some(&text[i + 1..])),
        None => (text, None),
    };
    let name = name.trim();
    if name.is_empty() || !name.chars().next().unwrap().is_ascii_lowercase() {
        return Err(bad());
    }
    if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(bad());
    }
    let mut args = Args::new();
    if let Some(rest) = rest {
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        if inner.contains('(') || inner.contains(')') {
            return Err(bad());
        }
        for a in inner.split(',') {
            args.push(parse_arg(a.trim(), scope).ok_or_else(bad)?);
        }
    }
    Ok(Fluent { functor: Symbol::intern(name), args })
}

pub fn parse_arg(a: &str, scope: &mut dyn VarScope) -> Option<ArgTerm> {
    let first = a.chars().next()?;
    if a == "_" {
        Some(ArgTerm::Var(scope.fresh_var()))
    } else if first == '-' || first.is_ascii_digit() {
        a.parse().ok().map(ArgTerm::Int)
    } else if !a.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        None
    } else if first.is_ascii_uppercase() || first == '_' {
        Some(ArgTerm::Var(scope.var_named(a)))
    } else {
        Some(ArgTerm::sym(a))
    }
}

/// A standalone naming scope handing out ids from a counter.
#[derive(Default, Debug)]
pub struct SimpleScope {
    next: u32,
    names: HashMap<String, VarId>,
}

impl SimpleScope {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(next: u32) -> Self {
        SimpleScope { next, names: HashMap::new() }
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }
}

impl VarScope for SimpleScope {
    fn var_named(&mut self, name: &str) -> VarId {
        if let Some(v) = self.names.get(name) {
            return *v;
        }
        let v = self.fresh_var();
        self.names.insert(name.to_string(), v);
        v
    }

    fn fresh_var(&mut self) -> VarId {
        let v = VarId(self.next);
        self.next += 1;
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str, sc: &mut SimpleScope) -> Fluent {
        parse_fluent(s, sc).unwrap()
    }

    #[test]
    fn unify_examples() {
        let mut sc = SimpleScope::new();
        let a = p("f(X,2)", &mut sc);
        let s = unify(&a, &p("f(1,2)", &mut sc)).unwrap();
        assert_eq!(s.get(sc.lookup("X").unwrap()), Some(ArgTerm::Int(1)));
        assert!(unify(&p("f(1)", &mut sc), &p("g(1)", &mut sc)).is_none());
        assert!(unify(&p("f(Y,Y)", &mut sc), &p("f(1,2)", &mut sc)).is_none());
    }

    #[test]
    fn instance_examples() {
        let mut sc = SimpleScope::new();
        assert!(is_instance(&p("occupied(3,0)", &mut sc), &p("occupied(_,0)", &mut sc)));
        assert!(!is_instance(&p("occupied(X,Y)", &mut sc), &p("occupied(1,2)", &mut sc)));
        assert!(is_instance(&p("f(1,1)", &mut sc), &p("f(X,X)", &mut sc)));
        assert!(!is_instance(&p("f(1,2)", &mut sc), &p("f(Z,Z)", &mut sc)));
    }

    #[test]
    fn identity_and_unifiability() {
        let mut sc = SimpleScope::new();
        let fx = p("f(X)", &mut sc);
        assert!(identical(&fx, &fx.clone()));
        assert!(!identical(&fx, &p("f(Y)", &mut sc)));
        assert!(identical(&p("f(1)", &mut sc), &p("f(1)", &mut sc)));
        assert!(not_unifiable(&p("f(1)", &mut sc), &p("f(2)", &mut sc)));
        assert!(!not_unifiable(&p("f(X)", &mut sc), &p("f(2)", &mut sc)));
        assert!(!not_unifiable(&p("open(t1)", &mut sc), &p("open(W)", &mut sc)));
    }

    #[test]
    fn interning_is_injective() {
        let a = Symbol::intern("alpha");
        assert_eq!(a, Symbol::intern("alpha"));
        assert_ne!(a, Symbol::intern("beta"));
        assert_eq!(a.text(), "alpha");
        assert_eq!(Symbol::from_code(a.code()), Some(a));
        assert_eq!(Symbol::from_code(7), None);
    }

    #[test]
    fn parse_rejects_garbage() {
        let mut sc = SimpleScope::new();
        assert!(parse_fluent("F(1)", &mut sc).is_err());
        assert!(parse_fluent("f(1", &mut sc).is_err());
        assert!(parse_fluent("f(g(1))", &mut sc).is_err());
        assert_eq!(p("f(a, -3)", &mut sc).to_string(), "f(a,-3)");
    }
}
