//! Exact executable semantics: closed monadic programs denote maps
//! `Memory → Dist(Value × Memory)` over finite discrete distributions with
//! exact rational probabilities — the probabilistic state monad
//! `T X = M ⇒ P(X × M)` restricted to finite supports.

use crate::config::{DistKind, ProgramConfig};
use crate::rat::{rat_u64, ExtRat, Rat};
use crate::syntax::ast::*;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound variable '{0}'")]
    UnboundVariable(String),
    #[error("uninstantiated adversary variable '{0}'")]
    UninstantiatedAdversary(String),
    #[error("expected a {0}, found {1}")]
    WrongValueKind(&'static str, String),
    #[error("value {0} is outside the configured value domain")]
    ValueOutOfRange(u64),
    #[error("match fell through on scrutinee value {0}")]
    CaseFellThrough(u64),
    #[error("distribution '{0}' has an empty support for the given arguments")]
    EmptyDistribution(String),
    #[error("distribution symbol '{0}' has no configuration table")]
    UndeclaredDistribution(String),
    #[error("running a non-computation value")]
    NotAComputation,
}

type EResult<T> = Result<T, EvalError>;

/// A total map from the declared locations to values of the finite domain.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Memory {
    vals: Vec<u8>,
}

impl Memory {
    pub fn zeroed(cfg: &ProgramConfig) -> Memory {
        Memory {
            vals: vec![0; cfg.num_locs()],
        }
    }

    pub fn constant(cfg: &ProgramConfig, v: u8) -> Memory {
        Memory {
            vals: vec![v; cfg.num_locs()],
        }
    }

    pub fn get(&self, l: LocId) -> u64 {
        self.vals[l.0 as usize] as u64
    }

    pub fn set(&mut self, l: LocId, v: u64) {
        self.vals[l.0 as usize] = v as u8;
    }

    pub fn updated(&self, l: LocId, v: u64) -> Memory {
        let mut m = self.clone();
        m.set(l, v);
        m
    }

    pub fn render(&self, cfg: &ProgramConfig) -> String {
        (0..self.vals.len())
            .map(|i| format!("{}={}", cfg.locations[i], self.vals[i]))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Runtime values. Closures and suspended computations appear only in the
/// middle of higher-order programs; validated outcomes are first-order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    Star,
    Bool(bool),
    Nat(u64),
    Pair(Box<Value>, Box<Value>),
    MemV(Memory),
    Closure(Arc<ClosureVal>),
    /// A suspended monadic computation (a monadic term in value position).
    Comp(Arc<Term>, Env),
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClosureVal {
    pub param: Ident,
    pub body: Term,
    pub env: Env,
    /// Set on the oracle argument by instrumented runs; applications of a
    /// marked closure are counted.
    pub marked: bool,
}

/// A persistent environment (linked list).
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Env(Option<Arc<EnvNode>>);

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct EnvNode {
    name: Ident,
    value: Value,
    rest: Env,
}

impl Env {
    pub fn empty() -> Env {
        Env(None)
    }

    pub fn extended(&self, name: &str, value: Value) -> Env {
        Env(Some(Arc::new(EnvNode {
            name: name.to_string(),
            value,
            rest: self.clone(),
        })))
    }

    pub fn lookup(&self, name: &str) -> Option<&Value> {
        let mut cur = self;
        while let Some(node) = &cur.0 {
            if node.name == name {
                return Some(&node.value);
            }
            cur = &node.rest;
        }
        None
    }
}

/// An exact finite probability distribution: support → positive rational
/// probability, summing to exactly 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dist<T: Ord>(BTreeMap<T, Rat>);

impl<T: Ord + Clone> Dist<T> {
    pub fn point(x: T) -> Dist<T> {
        let mut m = BTreeMap::new();
        m.insert(x, Rat::one());
        Dist(m)
    }

    /// Build from weighted outcomes; zero weights are dropped, equal
    /// outcomes merged. The weights must sum to 1.
    pub fn from_weighted(items: impl IntoIterator<Item = (T, Rat)>) -> Dist<T> {
        let mut m: BTreeMap<T, Rat> = BTreeMap::new();
        for (x, p) in items {
            if p.is_zero() {
                continue;
            }
            *m.entry(x).or_insert_with(Rat::zero) += p;
        }
        let d = Dist(m);
        debug_assert!(d.total_mass().is_one(), "distribution mass must be 1");
        d
    }

    pub fn uniform(items: Vec<T>) -> Dist<T> {
        assert!(!items.is_empty());
        let p = Rat::one() / rat_u64(items.len() as u64);
        Dist::from_weighted(items.into_iter().map(|x| (x, p.clone())))
    }

    pub fn support(&self) -> impl Iterator<Item = &T> {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, &Rat)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prob(&self, x: &T) -> Rat {
        self.0.get(x).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn total_mass(&self) -> Rat {
        self.0.values().fold(Rat::zero(), |a, b| a + b)
    }

    pub fn map<U: Ord + Clone>(&self, f: impl Fn(&T) -> U) -> Dist<U> {
        Dist::from_weighted(self.0.iter().map(|(x, p)| (f(x), p.clone())))
    }

    /// Probability of an event.
    pub fn pr(&self, pred: impl Fn(&T) -> bool) -> Rat {
        self.0
            .iter()
            .filter(|(x, _)| pred(x))
            .fold(Rat::zero(), |acc, (_, p)| acc + p)
    }
}

/// Kleisli composition: probability of y is Σ_x d(x)·f(x)(y).
pub fn dist_bind<T: Ord + Clone, U: Ord + Clone>(
    d: &Dist<T>,
    mut f: impl FnMut(&T) -> Dist<U>,
) -> Dist<U> {
    let mut out: BTreeMap<U, Rat> = BTreeMap::new();
    for (x, p) in &d.0 {
        for (y, q) in &f(x).0 {
            *out.entry(y.clone()).or_insert_with(Rat::zero) += p * q;
        }
    }
    Dist(out)
}

/// Fallible Kleisli composition (used by the interpreter).
pub fn dist_bind_result<T: Ord + Clone, U: Ord + Clone, E>(
    d: &Dist<T>,
    mut f: impl FnMut(&T) -> Result<Dist<U>, E>,
) -> Result<Dist<U>, E> {
    let mut out: BTreeMap<U, Rat> = BTreeMap::new();
    for (x, p) in &d.0 {
        for (y, q) in &f(x)?.0 {
            *out.entry(y.clone()).or_insert_with(Rat::zero) += p * q;
        }
    }
    Ok(Dist(out))
}

/// Exact expectation Σ_x d(x)·g(x) in [0,∞].
pub fn expectation<T: Ord>(d: &Dist<T>, g: impl Fn(&T) -> ExtRat) -> ExtRat {
    let mut acc = ExtRat::zero();
    for (x, p) in &d.0 {
        acc = acc + ExtRat::Fin(p.clone()) * g(x);
    }
    acc
}

// ---------------------------------------------------------------------------
// interpreter
// ---------------------------------------------------------------------------

pub struct Interp<'a> {
    pub cfg: &'a ProgramConfig,
}

/// Outcome of a counted run.
pub type Outcome = (Value, Memory, u32);

impl<'a> Interp<'a> {
    pub fn new(cfg: &'a ProgramConfig) -> Self {
        Interp { cfg }
    }

    /// Run a closed monadic term from a memory.
    pub fn run(&self, t: &Term, mem: &Memory) -> EResult<Dist<(Value, Memory)>> {
        let d = self.run_counted(t, &Env::empty(), mem)?;
        Ok(d.map(|(v, m, _)| (v.clone(), m.clone())))
    }

    /// Run with an oracle-call counter threaded along each path.
    pub fn run_counted(&self, t: &Term, env: &Env, mem: &Memory) -> EResult<Dist<Outcome>> {
        self.run_node(t, env, mem, 0)
    }

    /// Evaluate `adv` applied to `oracle` with the oracle's closure marked,
    /// returning the outcome distribution and the maximum number of oracle
    /// calls along any path.
    pub fn run_instrumented(
        &self,
        adv: &Term,
        oracle: &Term,
        mem: &Memory,
    ) -> EResult<(Dist<(Value, Memory)>, u32)> {
        let mut calls = 0;
        let o = self.eval(oracle, &Env::empty(), &mut calls)?;
        let o = match o {
            Value::Closure(c) => Value::Closure(Arc::new(ClosureVal {
                param: c.param.clone(),
                body: c.body.clone(),
                env: c.env.clone(),
                marked: true,
            })),
            other => other,
        };
        let a = self.eval(adv, &Env::empty(), &mut calls)?;
        let comp = self.apply(a, o, &mut calls)?;
        let d = match comp {
            Value::Comp(body, cenv) => self.run_node(&body, &cenv, mem, calls)?,
            _ => return Err(EvalError::NotAComputation),
        };
        let max_calls = d.support().map(|(_, _, c)| *c).max().unwrap_or(0);
        Ok((d.map(|(v, m, _)| (v.clone(), m.clone())), max_calls))
    }

    fn run_node(&self, t: &Term, env: &Env, mem: &Memory, calls: u32) -> EResult<Dist<Outcome>> {
        match t {
            Term::Read(l) => Ok(Dist::point((Value::Nat(mem.get(*l)), mem.clone(), calls))),
            Term::Write(l, v) => {
                let mut c = calls;
                let val = self.eval(v, env, &mut c)?;
                let n = as_nat(&val)?;
                if n >= self.cfg.value_count {
                    return Err(EvalError::ValueOutOfRange(n));
                }
                Ok(Dist::point((Value::Star, mem.updated(*l, n), c)))
            }
            Term::Skip => Ok(Dist::point((Value::Star, mem.clone(), calls))),
            Term::UnitM(v) => {
                let mut c = calls;
                let val = self.eval(v, env, &mut c)?;
                Ok(Dist::point((val, mem.clone(), c)))
            }
            Term::LetM(x, bound, body) => {
                let d1 = self.run_node(bound, env, mem, calls)?;
                dist_bind_result(&d1, |(v, m, c)| {
                    self.run_node(body, &env.extended(x, v.clone()), m, *c)
                })
            }
            Term::MFold(n, base, step) => {
                let mut c = calls;
                let count = as_nat(&self.eval(n, env, &mut c)?)?;
                let step_val = self.eval(step, env, &mut c)?;
                let mut d = self.run_node(base, env, mem, c)?;
                for _ in 0..count {
                    d = dist_bind_result(&d, |(v, m, c)| {
                        let mut c2 = *c;
                        let comp = self.apply(step_val.clone(), v.clone(), &mut c2)?;
                        self.run_value(comp, m, c2)
                    })?;
                }
                Ok(d)
            }
            Term::Sample(name, args) => {
                let mut c = calls;
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(as_nat(&self.eval(a, env, &mut c)?)?);
                }
                let support = self.dist_support(name, &vals)?;
                let p = Rat::one() / rat_u64(support.len() as u64);
                Ok(Dist::from_weighted(support.into_iter().map(|v| {
                    ((Value::Nat(v), mem.clone(), c), p.clone())
                })))
            }
            Term::Case(b, t1, t2) => {
                let mut c = calls;
                let guard = self.eval(b, env, &mut c)?;
                match guard {
                    Value::Bool(true) => self.run_node(t1, env, mem, c),
                    Value::Bool(false) => self.run_node(t2, env, mem, c),
                    other => Err(EvalError::WrongValueKind("bool", format!("{other:?}"))),
                }
            }
            Term::CaseNat(s, arms, default) => {
                let mut c = calls;
                let n = as_nat(&self.eval(s, env, &mut c)?)?;
                let arm = self.select_arm(n, arms, default)?;
                self.run_node(arm, env, mem, c)
            }
            // anything else evaluates to a suspended computation and is run
            _ => {
                let mut c = calls;
                let v = self.eval(t, env, &mut c)?;
                self.run_value(v, mem, c)
            }
        }
    }

    fn run_value(&self, v: Value, mem: &Memory, calls: u32) -> EResult<Dist<Outcome>> {
        match v {
            Value::Comp(body, env) => self.run_node(&body, &env, mem, calls),
            _ => Err(EvalError::NotAComputation),
        }
    }

    fn select_arm<'t>(
        &self,
        n: u64,
        arms: &'t [Term],
        default: &'t Option<Box<Term>>,
    ) -> EResult<&'t Term> {
        if (n as usize) < arms.len() {
            Ok(&arms[n as usize])
        } else if let Some(d) = default {
            Ok(d)
        } else {
            Err(EvalError::CaseFellThrough(n))
        }
    }

    pub fn dist_support(&self, name: &str, args: &[u64]) -> EResult<Vec<u64>> {
        let kind = self
            .cfg
            .dists
            .get(name)
            .ok_or_else(|| EvalError::UndeclaredDistribution(name.to_string()))?;
        match kind {
            DistKind::Uniform => {
                let k = *args
                    .first()
                    .ok_or_else(|| EvalError::EmptyDistribution(name.to_string()))?;
                if k == 0 {
                    return Err(EvalError::EmptyDistribution(name.to_string()));
                }
                Ok((0..k).collect())
            }
            DistKind::UniformExcluding => {
                let k = *args
                    .first()
                    .ok_or_else(|| EvalError::EmptyDistribution(name.to_string()))?;
                let excluded: std::collections::BTreeSet<u64> =
                    args[1..].iter().copied().collect();
                let support: Vec<u64> = (0..k).filter(|v| !excluded.contains(v)).collect();
                if support.is_empty() {
                    return Err(EvalError::EmptyDistribution(name.to_string()));
                }
                Ok(support)
            }
        }
    }

    /// Call-by-value evaluation of the pure fragment; monadic constructors
    /// suspend into `Comp` values. Applications of marked closures bump the
    /// call counter.
    pub fn eval(&self, t: &Term, env: &Env, calls: &mut u32) -> EResult<Value> {
        match t {
            Term::Var(x) => env
                .lookup(x)
                .cloned()
                .ok_or_else(|| EvalError::UnboundVariable(x.clone())),
            Term::AdvVar(a) => Err(EvalError::UninstantiatedAdversary(a.clone())),
            Term::Star => Ok(Value::Star),
            Term::Zero => Ok(Value::Nat(0)),
            Term::Succ(inner) => {
                let v = self.eval(inner, env, calls)?;
                Ok(Value::Nat(as_nat(&v)? + 1))
            }
            Term::True => Ok(Value::Bool(true)),
            Term::False => Ok(Value::Bool(false)),
            Term::Lam(x, _, body) => Ok(Value::Closure(Arc::new(ClosureVal {
                param: x.clone(),
                body: (**body).clone(),
                env: env.clone(),
                marked: false,
            }))),
            Term::App(f, a) => {
                let fv = self.eval(f, env, calls)?;
                let av = self.eval(a, env, calls)?;
                self.apply(fv, av, calls)
            }
            Term::Pair(a, b) => Ok(Value::Pair(
                Box::new(self.eval(a, env, calls)?),
                Box::new(self.eval(b, env, calls)?),
            )),
            Term::Proj1(p) => match self.eval(p, env, calls)? {
                Value::Pair(a, _) => Ok(*a),
                other => Err(EvalError::WrongValueKind("pair", format!("{other:?}"))),
            },
            Term::Proj2(p) => match self.eval(p, env, calls)? {
                Value::Pair(_, b) => Ok(*b),
                other => Err(EvalError::WrongValueKind("pair", format!("{other:?}"))),
            },
            Term::Case(b, t1, t2) => match self.eval(b, env, calls)? {
                Value::Bool(true) => self.eval(t1, env, calls),
                Value::Bool(false) => self.eval(t2, env, calls),
                other => Err(EvalError::WrongValueKind("bool", format!("{other:?}"))),
            },
            Term::CaseNat(s, arms, default) => {
                let n = as_nat(&self.eval(s, env, calls)?)?;
                let arm = self.select_arm(n, arms, default)?;
                self.eval(arm, env, calls)
            }
            // monadic constructors suspend
            Term::Read(_)
            | Term::Write(..)
            | Term::Skip
            | Term::UnitM(_)
            | Term::LetM(..)
            | Term::MFold(..)
            | Term::Sample(..) => Ok(Value::Comp(Arc::new(t.clone()), env.clone())),
            other => Err(EvalError::WrongValueKind(
                "program term",
                format!("{other:?}"),
            )),
        }
    }

    pub fn apply(&self, f: Value, arg: Value, calls: &mut u32) -> EResult<Value> {
        match f {
            Value::Closure(c) => {
                if c.marked {
                    *calls += 1;
                }
                self.eval(&c.body, &c.env.extended(&c.param, arg), calls)
            }
            other => Err(EvalError::WrongValueKind("closure", format!("{other:?}"))),
        }
    }
}

fn as_nat(v: &Value) -> EResult<u64> {
    match v {
        Value::Nat(n) => Ok(*n),
        other => Err(EvalError::WrongValueKind("natural", format!("{other:?}"))),
    }
}

/// Enumerate all memories that vary over `locs` (other locations fixed as in
/// `base`).
pub fn memories_over(
    cfg: &ProgramConfig,
    base: &Memory,
    locs: &[LocId],
) -> impl Iterator<Item = Memory> {
    let v = cfg.value_count;
    let n = locs.len();
    let total: u64 = v.checked_pow(n as u32).unwrap_or(u64::MAX);
    let base = base.clone();
    let locs = locs.to_vec();
    (0..total).map(move |mut idx| {
        let mut m = base.clone();
        for l in &locs {
            m.set(*l, idx % v);
            idx /= v;
        }
        m
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::parse_program;

    fn setup() -> (ProgramConfig, crate::config::Program) {
        let src = "
locations a b;
values nat 4;
dist unif : uniform;

def swapback : T[a; 0] unit = let x = read a in write a x
def coin : T[a; 0] unit = let x = sample unif(2) in write a x
";
        let p = parse_program(src).expect("parse");
        (p.config.clone(), p)
    }

    #[test]
    fn read_write_back_is_identity() {
        let (cfg, p) = setup();
        let interp = Interp::new(&cfg);
        let m = Memory::constant(&cfg, 3);
        let d = interp.run(&p.def("swapback").unwrap().body, &m).unwrap();
        assert_eq!(d, Dist::point((Value::Star, m)));
    }

    #[test]
    fn uniform_write_splits_mass() {
        let (cfg, p) = setup();
        let interp = Interp::new(&cfg);
        let m = Memory::zeroed(&cfg);
        let a = cfg.loc_id("a").unwrap();
        let d = interp.run(&p.def("coin").unwrap().body, &m).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.prob(&(Value::Star, m.updated(a, 0))), crate::rat::rat(1, 2));
        assert_eq!(d.prob(&(Value::Star, m.updated(a, 1))), crate::rat::rat(1, 2));
    }

    #[test]
    fn bind_unit_laws_on_dists() {
        let d = Dist::uniform(vec![0u64, 1, 2]);
        // left unit
        let f = |x: &u64| Dist::uniform(vec![*x, x + 1]);
        assert_eq!(dist_bind(&Dist::point(1u64), f), f(&1));
        // right unit
        assert_eq!(dist_bind(&d, |x| Dist::point(*x)), d);
    }

    #[test]
    fn expectation_of_uniform() {
        let d = Dist::uniform(vec![0u64, 1, 2, 3]);
        let e = expectation(&d, |x| ExtRat::Fin(rat_u64(*x)));
        assert_eq!(e, ExtRat::Fin(crate::rat::rat(3, 2)));
        // absorption
        let e = expectation(&d, |x| if *x == 0 { ExtRat::Inf } else { ExtRat::zero() });
        assert_eq!(e, ExtRat::Inf);
    }
}
