//! Abstract syntax: types, effects, terms, memory expressions, propositions
//! and assertions.
//!
//! A single term grammar is used for programs and for the expressions that
//! appear inside assertions; the constructors below the `assertion-only`
//! marker are rejected in program position by the parser and the type
//! checker. This mirrors the way memory expressions extend the program
//! grammar rather than duplicating it.

use crate::rat::Rat;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

pub type Ident = String;

/// Index into the configuration's location table.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct LocId(pub u16);

/// Index into the configuration's array table.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ArrayId(pub u16);

/// A memory effect: a finite set of concrete locations plus a finite set of
/// region variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Effect {
    pub locs: BTreeSet<LocId>,
    pub vars: BTreeSet<Ident>,
}

impl Effect {
    pub fn empty() -> Self {
        Effect::default()
    }

    pub fn single(l: LocId) -> Self {
        let mut e = Effect::empty();
        e.locs.insert(l);
        e
    }

    pub fn of_locs(locs: impl IntoIterator<Item = LocId>) -> Self {
        Effect {
            locs: locs.into_iter().collect(),
            vars: BTreeSet::new(),
        }
    }

    pub fn union(&self, other: &Effect) -> Effect {
        Effect {
            locs: self.locs.union(&other.locs).copied().collect(),
            vars: self.vars.union(&other.vars).cloned().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.locs.is_empty() && self.vars.is_empty()
    }

    /// Componentwise containment: sound and complete for containment under
    /// all region instantiations whenever there is a location outside the
    /// right-hand side (see the type checker's notes).
    pub fn subset_of(&self, other: &Effect) -> bool {
        self.locs.is_subset(&other.locs) && self.vars.is_subset(&other.vars)
    }

    /// Substitute a region variable by a concrete location set.
    pub fn subst_var(&self, var: &str, locs: &BTreeSet<LocId>) -> Effect {
        let mut e = self.clone();
        if e.vars.remove(var) {
            e.locs.extend(locs.iter().copied());
        }
        e
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Type {
    Base(Ident),
    Bool,
    /// `Nat(Some(k))` is the type of naturals `{0..k}`; `Nat(None)` is ℕ[∞].
    Nat(Option<u64>),
    Mem,
    Unit,
    Val,
    Arrow(Box<Type>, Box<Type>),
    Prod(Box<Type>, Box<Type>),
    /// Graded monadic computations `T_{Σ,k} τ`.
    Monadic(Effect, u64, Box<Type>),
    Forall(Ident, Box<Type>),
}

impl Type {
    pub fn arrow(a: Type, b: Type) -> Type {
        Type::Arrow(Box::new(a), Box::new(b))
    }

    pub fn monadic(eff: Effect, k: u64, inner: Type) -> Type {
        Type::Monadic(eff, k, Box::new(inner))
    }

    pub fn is_monadic(&self) -> bool {
        matches!(self, Type::Monadic(..))
    }

    /// A type is non-monadic when no monadic constructor occurs anywhere in
    /// it (the side condition of the adversary rules).
    pub fn non_monadic(&self) -> bool {
        match self {
            Type::Base(_) | Type::Bool | Type::Nat(_) | Type::Mem | Type::Unit | Type::Val => true,
            Type::Arrow(a, b) | Type::Prod(a, b) => a.non_monadic() && b.non_monadic(),
            Type::Monadic(..) => false,
            Type::Forall(_, t) => t.non_monadic(),
        }
    }

    pub fn free_region_vars(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.collect_region_vars(&mut out);
        out
    }

    fn collect_region_vars(&self, out: &mut BTreeSet<Ident>) {
        match self {
            Type::Base(_) | Type::Bool | Type::Nat(_) | Type::Mem | Type::Unit | Type::Val => {}
            Type::Arrow(a, b) | Type::Prod(a, b) => {
                a.collect_region_vars(out);
                b.collect_region_vars(out);
            }
            Type::Monadic(eff, _, t) => {
                out.extend(eff.vars.iter().cloned());
                t.collect_region_vars(out);
            }
            Type::Forall(v, t) => {
                let mut inner = BTreeSet::new();
                t.collect_region_vars(&mut inner);
                inner.remove(v);
                out.extend(inner);
            }
        }
    }

    /// Substitute region variable `var` by a concrete location set in every
    /// effect annotation (capture-avoiding on region binders).
    pub fn subst_region(&self, var: &str, locs: &BTreeSet<LocId>) -> Type {
        match self {
            Type::Base(_) | Type::Bool | Type::Nat(_) | Type::Mem | Type::Unit | Type::Val => {
                self.clone()
            }
            Type::Arrow(a, b) => Type::arrow(a.subst_region(var, locs), b.subst_region(var, locs)),
            Type::Prod(a, b) => Type::Prod(
                Box::new(a.subst_region(var, locs)),
                Box::new(b.subst_region(var, locs)),
            ),
            Type::Monadic(eff, k, t) => {
                Type::monadic(eff.subst_var(var, locs), *k, t.subst_region(var, locs))
            }
            Type::Forall(v, t) => {
                if v == var {
                    self.clone()
                } else {
                    Type::Forall(v.clone(), Box::new(t.subst_region(var, locs)))
                }
            }
        }
    }
}

/// The latent memory footprint of a type.
///
/// eff(B) = ∅; eff(τ→σ) = eff(σ); eff(T_{Σ,k}τ) = Σ ∪ eff(τ);
/// eff(∀α.τ) = eff(τ[α:=∅]); eff(τ×σ) = eff(τ) ∪ eff(σ).
pub fn eff(ty: &Type) -> Effect {
    match ty {
        Type::Base(_) | Type::Bool | Type::Nat(_) | Type::Mem | Type::Unit | Type::Val => {
            Effect::empty()
        }
        Type::Arrow(_, b) => eff(b),
        Type::Prod(a, b) => eff(a).union(&eff(b)),
        Type::Monadic(sigma, _, t) => sigma.union(&eff(t)),
        Type::Forall(v, t) => eff(&t.subst_region(v, &BTreeSet::new())),
    }
}

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum CmpOp {
    Eq,
    Ne,
    Le,
    Lt,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
        };
        write!(f, "{s}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(Ident),
    AdvVar(Ident),
    Star,
    Zero,
    Succ(Box<Term>),
    True,
    False,
    Lam(Ident, Type, Box<Term>),
    App(Box<Term>, Box<Term>),
    Pair(Box<Term>, Box<Term>),
    Proj1(Box<Term>),
    Proj2(Box<Term>),
    /// Boolean conditional (pure or monadic branches).
    Case(Box<Term>, Box<Term>, Box<Term>),
    /// Bounded-natural case: arms for scrutinee values `0..arms.len()`, with
    /// an optional default arm for larger values. Array access at a computed
    /// index desugars to this.
    CaseNat(Box<Term>, Vec<Term>, Option<Box<Term>>),
    Read(LocId),
    Write(LocId, Box<Term>),
    Skip,
    UnitM(Box<Term>),
    LetM(Ident, Box<Term>, Box<Term>),
    MFold(Box<Term>, Box<Term>, Box<Term>),
    Sample(Ident, Vec<Term>),

    // ---- assertion-only expression forms (memory expressions) ----
    /// `m[a]`
    Select(Box<Term>, LocId),
    /// `m[a ↦ t]`
    Store(Box<Term>, LocId, Box<Term>),
    /// `m[L @ e]`: select an array cell at a computed index.
    SelArr(Box<Term>, ArrayId, Box<Term>),
    /// Number of array cells holding a non-sentinel value.
    CardDom(Box<Term>, ArrayId),
    /// Number of distinct non-sentinel values stored in the array.
    CardIm(Box<Term>, ArrayId),
    /// Sum of the values stored in the array's cells.
    SumArr(Box<Term>, ArrayId),
    RatLit(Rat),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    /// `pow base exp`: rational base, integer exponent (may be negative).
    Pow(Box<Term>, Box<Term>),
    /// `|{x ∈ {0..bound-1} | φ}|`
    Count(u64, Ident, Box<Prop>),
    /// Iverson expression: 1 if φ holds, 0 otherwise.
    IvExpr(Box<Prop>),
}

impl Term {
    pub fn var(s: &str) -> Term {
        Term::Var(s.to_string())
    }

    pub fn nat_lit(n: u64) -> Term {
        let mut t = Term::Zero;
        for _ in 0..n {
            t = Term::Succ(Box::new(t));
        }
        t
    }

    /// Inverse of `nat_lit` when the term is a numeral.
    pub fn as_nat_lit(&self) -> Option<u64> {
        match self {
            Term::Zero => Some(0),
            Term::Succ(t) => t.as_nat_lit().map(|n| n + 1),
            _ => None,
        }
    }

    pub fn unit_m(t: Term) -> Term {
        Term::UnitM(Box::new(t))
    }

    pub fn let_m(x: &str, t: Term, u: Term) -> Term {
        Term::LetM(x.to_string(), Box::new(t), Box::new(u))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn select(m: Term, a: LocId) -> Term {
        Term::Select(Box::new(m), a)
    }

    pub fn store(m: Term, a: LocId, v: Term) -> Term {
        Term::Store(Box::new(m), a, Box::new(v))
    }

    /// True when the term uses any assertion-only constructor; such terms are
    /// rejected in program position.
    pub fn has_assertion_forms(&self) -> bool {
        let mut found = false;
        self.visit(&mut |t| {
            if matches!(
                t,
                Term::Select(..)
                    | Term::Store(..)
                    | Term::SelArr(..)
                    | Term::CardDom(..)
                    | Term::CardIm(..)
                    | Term::SumArr(..)
                    | Term::RatLit(..)
                    | Term::Add(..)
                    | Term::Sub(..)
                    | Term::Mul(..)
                    | Term::Pow(..)
                    | Term::Count(..)
                    | Term::IvExpr(..)
            ) {
                found = true;
            }
        });
        found
    }

    /// Pre-order visit of every subterm (not descending into props).
    pub fn visit(&self, f: &mut impl FnMut(&Term)) {
        f(self);
        match self {
            Term::Var(_)
            | Term::AdvVar(_)
            | Term::Star
            | Term::Zero
            | Term::True
            | Term::False
            | Term::Skip
            | Term::Read(_)
            | Term::RatLit(_)
            | Term::Count(..)
            | Term::IvExpr(_) => {}
            Term::Succ(t)
            | Term::Lam(_, _, t)
            | Term::Proj1(t)
            | Term::Proj2(t)
            | Term::UnitM(t)
            | Term::Write(_, t)
            | Term::Select(t, _)
            | Term::CardDom(t, _)
            | Term::CardIm(t, _)
            | Term::SumArr(t, _) => t.visit(f),
            Term::App(a, b)
            | Term::Pair(a, b)
            | Term::LetM(_, a, b)
            | Term::Add(a, b)
            | Term::Sub(a, b)
            | Term::Mul(a, b)
            | Term::Pow(a, b)
            | Term::SelArr(a, _, b) => {
                a.visit(f);
                b.visit(f);
            }
            Term::Case(a, b, c) | Term::MFold(a, b, c) => {
                a.visit(f);
                b.visit(f);
                c.visit(f);
            }
            Term::Store(a, _, c) => {
                a.visit(f);
                c.visit(f);
            }
            Term::CaseNat(s, arms, d) => {
                s.visit(f);
                for a in arms {
                    a.visit(f);
                }
                if let Some(d) = d {
                    d.visit(f);
                }
            }
            Term::Sample(_, args) => {
                for a in args {
                    a.visit(f);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Prop {
    True,
    False,
    /// Comparison of two expressions (memory expressions / program terms).
    Cmp(CmpOp, Box<Term>, Box<Term>),
    /// Membership of a (natural-valued) expression in an explicit finite set.
    InSet(Box<Term>, BTreeSet<u64>),
    /// `in-dom e m L`: the array cell `L[e]` of memory `m` is non-sentinel.
    InDom(Box<Term>, Box<Term>, ArrayId),
    /// `in-im e m L`: value `e` occurs in the image of array `L` in `m`.
    InIm(Box<Term>, Box<Term>, ArrayId),
    And(Box<Prop>, Box<Prop>),
    Or(Box<Prop>, Box<Prop>),
    Imp(Box<Prop>, Box<Prop>),
    Not(Box<Prop>),
    Forall(Ident, Type, Box<Prop>),
    Exists(Ident, Type, Box<Prop>),
}

impl Prop {
    pub fn eq(a: Term, b: Term) -> Prop {
        Prop::Cmp(CmpOp::Eq, Box::new(a), Box::new(b))
    }

    pub fn le(a: Term, b: Term) -> Prop {
        Prop::Cmp(CmpOp::Le, Box::new(a), Box::new(b))
    }

    pub fn and(a: Prop, b: Prop) -> Prop {
        Prop::And(Box::new(a), Box::new(b))
    }

    pub fn not(a: Prop) -> Prop {
        Prop::Not(Box::new(a))
    }

    /// The guard assumption recorded by case rules: `b = true` / `b = false`.
    pub fn guard(b: &Term, val: bool) -> Prop {
        let lit = if val { Term::True } else { Term::False };
        Prop::eq(b.clone(), lit)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Assertion {
    Top,
    Bot,
    /// Quantitative atom: an expression with codomain [0,∞] (EXP mode).
    Q(Box<Term>),
    /// `⟨φ⟩`
    Inj(Box<Prop>),
    Meet(Box<Assertion>, Box<Assertion>),
    Join(Box<Assertion>, Box<Assertion>),
    /// `[φ]` — Iverson bracket (EXP mode).
    Iv(Box<Prop>),
    Plus(Box<Assertion>, Box<Assertion>),
    Scale(Rat, Box<Assertion>),
}

impl Assertion {
    pub fn inj(p: Prop) -> Assertion {
        Assertion::Inj(Box::new(p))
    }

    pub fn meet(a: Assertion, b: Assertion) -> Assertion {
        Assertion::Meet(Box::new(a), Box::new(b))
    }

    pub fn join(a: Assertion, b: Assertion) -> Assertion {
        Assertion::Join(Box::new(a), Box::new(b))
    }

    pub fn q(e: Term) -> Assertion {
        Assertion::Q(Box::new(e))
    }

    /// Join of a non-empty list, right-associated.
    pub fn join_all(mut items: Vec<Assertion>) -> Assertion {
        let mut acc = items.pop().expect("join_all on empty list");
        while let Some(a) = items.pop() {
            acc = Assertion::join(a, acc);
        }
        acc
    }
}

/// The distinguished assertion variables.
pub mod special {
    pub const MEM: &str = "s";
    pub const RES: &str = "v";
    pub const MEM1: &str = "s1";
    pub const MEM2: &str = "s2";
    pub const RES1: &str = "v1";
    pub const RES2: &str = "v2";

    pub fn is_special(name: &str) -> bool {
        matches!(name, "s" | "v" | "s1" | "s2" | "v1" | "v2")
    }
}
