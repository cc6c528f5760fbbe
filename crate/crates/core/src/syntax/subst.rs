//! Free variables, capture-avoiding substitution and α-equivalence for
//! terms, propositions and assertions.

use crate::syntax::ast::*;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SubstError {
    #[error("open term substituted for adversary variable {0}: free variables {1:?}")]
    OpenAdversaryReplacement(String, BTreeSet<Ident>),
}

pub fn free_vars_term(t: &Term) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    fv_term(t, &mut BTreeSet::new(), &mut out);
    out
}

pub fn free_vars_prop(p: &Prop) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    fv_prop(p, &mut BTreeSet::new(), &mut out);
    out
}

pub fn free_vars_assertion(a: &Assertion) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    fv_assertion(a, &mut BTreeSet::new(), &mut out);
    out
}

pub fn free_adv_vars(t: &Term) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    t.visit(&mut |s| {
        if let Term::AdvVar(a) = s {
            out.insert(a.clone());
        }
    });
    out
}

fn fv_term(t: &Term, bound: &mut BTreeSet<Ident>, out: &mut BTreeSet<Ident>) {
    match t {
        Term::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        Term::Lam(x, _, body) => {
            let fresh = bound.insert(x.clone());
            fv_term(body, bound, out);
            if fresh {
                bound.remove(x);
            }
        }
        Term::LetM(x, t1, t2) => {
            fv_term(t1, bound, out);
            let fresh = bound.insert(x.clone());
            fv_term(t2, bound, out);
            if fresh {
                bound.remove(x);
            }
        }
        Term::Count(_, x, p) => {
            let fresh = bound.insert(x.clone());
            fv_prop(p, bound, out);
            if fresh {
                bound.remove(x);
            }
        }
        Term::IvExpr(p) => fv_prop(p, bound, out),
        Term::AdvVar(_)
        | Term::Star
        | Term::Zero
        | Term::True
        | Term::False
        | Term::Skip
        | Term::Read(_)
        | Term::RatLit(_) => {}
        Term::Succ(a)
        | Term::Proj1(a)
        | Term::Proj2(a)
        | Term::UnitM(a)
        | Term::Write(_, a)
        | Term::Select(a, _)
        | Term::CardDom(a, _)
        | Term::CardIm(a, _)
        | Term::SumArr(a, _) => fv_term(a, bound, out),
        Term::App(a, b)
        | Term::Pair(a, b)
        | Term::Add(a, b)
        | Term::Sub(a, b)
        | Term::Mul(a, b)
        | Term::Pow(a, b)
        | Term::SelArr(a, _, b) => {
            fv_term(a, bound, out);
            fv_term(b, bound, out);
        }
        Term::Store(a, _, b) => {
            fv_term(a, bound, out);
            fv_term(b, bound, out);
        }
        Term::Case(a, b, c) | Term::MFold(a, b, c) => {
            fv_term(a, bound, out);
            fv_term(b, bound, out);
            fv_term(c, bound, out);
        }
        Term::CaseNat(s, arms, d) => {
            fv_term(s, bound, out);
            for a in arms {
                fv_term(a, bound, out);
            }
            if let Some(d) = d {
                fv_term(d, bound, out);
            }
        }
        Term::Sample(_, args) => {
            for a in args {
                fv_term(a, bound, out);
            }
        }
    }
}

fn fv_prop(p: &Prop, bound: &mut BTreeSet<Ident>, out: &mut BTreeSet<Ident>) {
    match p {
        Prop::True | Prop::False => {}
        Prop::Cmp(_, a, b) => {
            fv_term(a, bound, out);
            fv_term(b, bound, out);
        }
        Prop::InSet(a, _) => fv_term(a, bound, out),
        Prop::InDom(a, m, _) | Prop::InIm(a, m, _) => {
            fv_term(a, bound, out);
            fv_term(m, bound, out);
        }
        Prop::And(a, b) | Prop::Or(a, b) | Prop::Imp(a, b) => {
            fv_prop(a, bound, out);
            fv_prop(b, bound, out);
        }
        Prop::Not(a) => fv_prop(a, bound, out),
        Prop::Forall(x, _, body) | Prop::Exists(x, _, body) => {
            let fresh = bound.insert(x.clone());
            fv_prop(body, bound, out);
            if fresh {
                bound.remove(x);
            }
        }
    }
}

fn fv_assertion(a: &Assertion, bound: &mut BTreeSet<Ident>, out: &mut BTreeSet<Ident>) {
    match a {
        Assertion::Top | Assertion::Bot => {}
        Assertion::Q(e) => fv_term(e, bound, out),
        Assertion::Inj(p) | Assertion::Iv(p) => fv_prop(p, bound, out),
        Assertion::Meet(x, y) | Assertion::Join(x, y) | Assertion::Plus(x, y) => {
            fv_assertion(x, bound, out);
            fv_assertion(y, bound, out);
        }
        Assertion::Scale(_, x) => fv_assertion(x, bound, out),
    }
}

/// Pick a name based on `base` that avoids `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<Ident>) -> Ident {
    if !avoid.contains(base) {
        return base.to_string();
    }
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    for i in 1.. {
        let cand = format!("{stem}{i}");
        if !avoid.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

/// A simultaneous substitution of variables by expressions.
#[derive(Clone, Debug, Default)]
pub struct Subst {
    map: BTreeMap<Ident, Term>,
    /// Free variables of all replacement terms (capture candidates).
    avoid: BTreeSet<Ident>,
}

impl Subst {
    pub fn new() -> Self {
        Subst::default()
    }

    pub fn one(x: &str, t: Term) -> Self {
        let mut s = Subst::new();
        s.insert(x, t);
        s
    }

    pub fn insert(&mut self, x: &str, t: Term) {
        self.avoid.extend(free_vars_term(&t));
        self.map.insert(x.to_string(), t);
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn without(&self, x: &str) -> Subst {
        let mut s = self.clone();
        s.map.remove(x);
        s
    }

    /// Handle a binder: drop the bound variable from the substitution and
    /// rename it if it would capture a replacement's free variable.
    fn enter_binder(&self, x: &Ident, body_fv_check: &Term) -> (Subst, Ident, Option<Subst>) {
        let inner = self.without(x);
        if inner.map.is_empty() {
            return (inner, x.clone(), None);
        }
        if !inner.avoid.contains(x) {
            return (inner, x.clone(), None);
        }
        // Rename: x' fresh wrt replacements and the body's own free vars.
        let mut avoid = inner.avoid.clone();
        avoid.extend(free_vars_term(body_fv_check));
        avoid.insert(x.clone());
        let x2 = fresh_name(x, &avoid);
        let rename = Subst::one(x, Term::Var(x2.clone()));
        (inner, x2, Some(rename))
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        if self.map.is_empty() {
            return t.clone();
        }
        match t {
            Term::Var(x) => self.map.get(x).cloned().unwrap_or_else(|| t.clone()),
            Term::AdvVar(_)
            | Term::Star
            | Term::Zero
            | Term::True
            | Term::False
            | Term::Skip
            | Term::Read(_)
            | Term::RatLit(_) => t.clone(),
            Term::Lam(x, ty, body) => {
                let (inner, x2, rename) = self.enter_binder(x, body);
                let body2 = match rename {
                    Some(r) => inner.apply_term(&r.apply_term(body)),
                    None => inner.apply_term(body),
                };
                Term::Lam(x2, ty.clone(), Box::new(body2))
            }
            Term::LetM(x, t1, t2) => {
                let t1n = self.apply_term(t1);
                let (inner, x2, rename) = self.enter_binder(x, t2);
                let t2n = match rename {
                    Some(r) => inner.apply_term(&r.apply_term(t2)),
                    None => inner.apply_term(t2),
                };
                Term::LetM(x2, Box::new(t1n), Box::new(t2n))
            }
            Term::Count(k, x, p) => {
                let probe = Term::IvExpr(p.clone());
                let (inner, x2, rename) = self.enter_binder(x, &probe);
                let pn = match rename {
                    Some(r) => inner.apply_prop(&r.apply_prop(p)),
                    None => inner.apply_prop(p),
                };
                Term::Count(*k, x2, Box::new(pn))
            }
            Term::IvExpr(p) => Term::IvExpr(Box::new(self.apply_prop(p))),
            Term::Succ(a) => Term::Succ(Box::new(self.apply_term(a))),
            Term::Proj1(a) => Term::Proj1(Box::new(self.apply_term(a))),
            Term::Proj2(a) => Term::Proj2(Box::new(self.apply_term(a))),
            Term::UnitM(a) => Term::UnitM(Box::new(self.apply_term(a))),
            Term::Write(l, a) => Term::Write(*l, Box::new(self.apply_term(a))),
            Term::Select(a, l) => Term::Select(Box::new(self.apply_term(a)), *l),
            Term::CardDom(a, arr) => Term::CardDom(Box::new(self.apply_term(a)), *arr),
            Term::CardIm(a, arr) => Term::CardIm(Box::new(self.apply_term(a)), *arr),
            Term::SumArr(a, arr) => Term::SumArr(Box::new(self.apply_term(a)), *arr),
            Term::App(a, b) => Term::app(self.apply_term(a), self.apply_term(b)),
            Term::Pair(a, b) => {
                Term::Pair(Box::new(self.apply_term(a)), Box::new(self.apply_term(b)))
            }
            Term::Add(a, b) => Term::Add(Box::new(self.apply_term(a)), Box::new(self.apply_term(b))),
            Term::Sub(a, b) => Term::Sub(Box::new(self.apply_term(a)), Box::new(self.apply_term(b))),
            Term::Mul(a, b) => Term::Mul(Box::new(self.apply_term(a)), Box::new(self.apply_term(b))),
            Term::Pow(a, b) => Term::Pow(Box::new(self.apply_term(a)), Box::new(self.apply_term(b))),
            Term::SelArr(a, arr, b) => Term::SelArr(
                Box::new(self.apply_term(a)),
                *arr,
                Box::new(self.apply_term(b)),
            ),
            Term::Store(a, l, b) => Term::Store(
                Box::new(self.apply_term(a)),
                *l,
                Box::new(self.apply_term(b)),
            ),
            Term::Case(a, b, c) => Term::Case(
                Box::new(self.apply_term(a)),
                Box::new(self.apply_term(b)),
                Box::new(self.apply_term(c)),
            ),
            Term::MFold(a, b, c) => Term::MFold(
                Box::new(self.apply_term(a)),
                Box::new(self.apply_term(b)),
                Box::new(self.apply_term(c)),
            ),
            Term::CaseNat(s, arms, d) => Term::CaseNat(
                Box::new(self.apply_term(s)),
                arms.iter().map(|a| self.apply_term(a)).collect(),
                d.as_ref().map(|d| Box::new(self.apply_term(d))),
            ),
            Term::Sample(d, args) => Term::Sample(
                d.clone(),
                args.iter().map(|a| self.apply_term(a)).collect(),
            ),
        }
    }

    pub fn apply_prop(&self, p: &Prop) -> Prop {
        if self.map.is_empty() {
            return p.clone();
        }
        match p {
            Prop::True | Prop::False => p.clone(),
            Prop::Cmp(op, a, b) => {
                Prop::Cmp(*op, Box::new(self.apply_term(a)), Box::new(self.apply_term(b)))
            }
            Prop::InSet(a, s) => Prop::InSet(Box::new(self.apply_term(a)), s.clone()),
            Prop::InDom(a, m, arr) => Prop::InDom(
                Box::new(self.apply_term(a)),
                Box::new(self.apply_term(m)),
                *arr,
            ),
            Prop::InIm(a, m, arr) => Prop::InIm(
                Box::new(self.apply_term(a)),
                Box::new(self.apply_term(m)),
                *arr,
            ),
            Prop::And(a, b) => Prop::And(Box::new(self.apply_prop(a)), Box::new(self.apply_prop(b))),
            Prop::Or(a, b) => Prop::Or(Box::new(self.apply_prop(a)), Box::new(self.apply_prop(b))),
            Prop::Imp(a, b) => Prop::Imp(Box::new(self.apply_prop(a)), Box::new(self.apply_prop(b))),
            Prop::Not(a) => Prop::Not(Box::new(self.apply_prop(a))),
            Prop::Forall(x, ty, body) => {
                let probe = Term::IvExpr(body.clone());
                let (inner, x2, rename) = self.enter_binder(x, &probe);
                let b2 = match rename {
                    Some(r) => inner.apply_prop(&r.apply_prop(body)),
                    None => inner.apply_prop(body),
                };
                Prop::Forall(x2, ty.clone(), Box::new(b2))
            }
            Prop::Exists(x, ty, body) => {
                let probe = Term::IvExpr(body.clone());
                let (inner, x2, rename) = self.enter_binder(x, &probe);
                let b2 = match rename {
                    Some(r) => inner.apply_prop(&r.apply_prop(body)),
                    None => inner.apply_prop(body),
                };
                Prop::Exists(x2, ty.clone(), Box::new(b2))
            }
        }
    }

    pub fn apply_assertion(&self, a: &Assertion) -> Assertion {
        if self.map.is_empty() {
            return a.clone();
        }
        match a {
            Assertion::Top | Assertion::Bot => a.clone(),
            Assertion::Q(e) => Assertion::Q(Box::new(self.apply_term(e))),
            Assertion::Inj(p) => Assertion::Inj(Box::new(self.apply_prop(p))),
            Assertion::Iv(p) => Assertion::Iv(Box::new(self.apply_prop(p))),
            Assertion::Meet(x, y) => {
                Assertion::meet(self.apply_assertion(x), self.apply_assertion(y))
            }
            Assertion::Join(x, y) => {
                Assertion::join(self.apply_assertion(x), self.apply_assertion(y))
            }
            Assertion::Plus(x, y) => Assertion::Plus(
                Box::new(self.apply_assertion(x)),
                Box::new(self.apply_assertion(y)),
            ),
            Assertion::Scale(q, x) => Assertion::Scale(q.clone(), Box::new(self.apply_assertion(x))),
        }
    }
}

/// Substitute an adversary variable by a closed term.
pub fn subst_adv(t: &Term, adv: &str, replacement: &Term) -> Result<Term, SubstError> {
    let fv = free_vars_term(replacement);
    if !fv.is_empty() {
        return Err(SubstError::OpenAdversaryReplacement(adv.to_string(), fv));
    }
    Ok(subst_adv_unchecked(t, adv, replacement))
}

fn subst_adv_unchecked(t: &Term, adv: &str, r: &Term) -> Term {
    // Adversary and standard variable namespaces are disjoint and the
    // replacement is closed, so no capture is possible.
    map_term(t, &mut |s| match s {
        Term::AdvVar(a) if a == adv => Some(r.clone()),
        _ => None,
    })
}

/// Substitute region variables by location sets inside the type annotations
/// of a term.
pub fn subst_region_term(t: &Term, var: &str, locs: &std::collections::BTreeSet<LocId>) -> Term {
    map_term(t, &mut |s| match s {
        Term::Lam(x, ty, body) => Some(Term::Lam(
            x.clone(),
            ty.subst_region(var, locs),
            Box::new(subst_region_term(body, var, locs)),
        )),
        _ => None,
    })
}

/// Bottom-up rebuild with an override hook: when `f` returns `Some`, that
/// result is used without descending further.
pub fn map_term(t: &Term, f: &mut impl FnMut(&Term) -> Option<Term>) -> Term {
    if let Some(r) = f(t) {
        return r;
    }
    match t {
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
        | Term::IvExpr(_) => t.clone(),
        Term::Succ(a) => Term::Succ(Box::new(map_term(a, f))),
        Term::Lam(x, ty, b) => Term::Lam(x.clone(), ty.clone(), Box::new(map_term(b, f))),
        Term::App(a, b) => Term::app(map_term(a, f), map_term(b, f)),
        Term::Pair(a, b) => Term::Pair(Box::new(map_term(a, f)), Box::new(map_term(b, f))),
        Term::Proj1(a) => Term::Proj1(Box::new(map_term(a, f))),
        Term::Proj2(a) => Term::Proj2(Box::new(map_term(a, f))),
        Term::Case(a, b, c) => Term::Case(
            Box::new(map_term(a, f)),
            Box::new(map_term(b, f)),
            Box::new(map_term(c, f)),
        ),
        Term::CaseNat(s, arms, d) => Term::CaseNat(
            Box::new(map_term(s, f)),
            arms.iter().map(|a| map_term(a, f)).collect(),
            d.as_ref().map(|d| Box::new(map_term(d, f))),
        ),
        Term::Write(l, a) => Term::Write(*l, Box::new(map_term(a, f))),
        Term::UnitM(a) => Term::UnitM(Box::new(map_term(a, f))),
        Term::LetM(x, a, b) => Term::LetM(x.clone(), Box::new(map_term(a, f)), Box::new(map_term(b, f))),
        Term::MFold(a, b, c) => Term::MFold(
            Box::new(map_term(a, f)),
            Box::new(map_term(b, f)),
            Box::new(map_term(c, f)),
        ),
        Term::Sample(d, args) => {
            Term::Sample(d.clone(), args.iter().map(|a| map_term(a, f)).collect())
        }
        Term::Select(a, l) => Term::Select(Box::new(map_term(a, f)), *l),
        Term::Store(a, l, b) => Term::Store(Box::new(map_term(a, f)), *l, Box::new(map_term(b, f))),
        Term::SelArr(a, arr, b) => {
            Term::SelArr(Box::new(map_term(a, f)), *arr, Box::new(map_term(b, f)))
        }
        Term::CardDom(a, arr) => Term::CardDom(Box::new(map_term(a, f)), *arr),
        Term::CardIm(a, arr) => Term::CardIm(Box::new(map_term(a, f)), *arr),
        Term::SumArr(a, arr) => Term::SumArr(Box::new(map_term(a, f)), *arr),
        Term::Add(a, b) => Term::Add(Box::new(map_term(a, f)), Box::new(map_term(b, f))),
        Term::Sub(a, b) => Term::Sub(Box::new(map_term(a, f)), Box::new(map_term(b, f))),
        Term::Mul(a, b) => Term::Mul(Box::new(map_term(a, f)), Box::new(map_term(b, f))),
        Term::Pow(a, b) => Term::Pow(Box::new(map_term(a, f)), Box::new(map_term(b, f))),
    }
}

// ---------------------------------------------------------------------------
// α-equivalence
// ---------------------------------------------------------------------------

#[derive(Default)]
struct AlphaEnv {
    left: Vec<(Ident, usize)>,
    right: Vec<(Ident, usize)>,
    next: usize,
}

impl AlphaEnv {
    fn push(&mut self, a: &Ident, b: &Ident) {
        self.left.push((a.clone(), self.next));
        self.right.push((b.clone(), self.next));
        self.next += 1;
    }

    fn pop(&mut self) {
        self.left.pop();
        self.right.pop();
    }

    fn lookup(side: &[(Ident, usize)], x: &Ident) -> Option<usize> {
        side.iter().rev().find(|(n, _)| n == x).map(|(_, i)| *i)
    }

    fn var_eq(&self, a: &Ident, b: &Ident) -> bool {
        match (
            Self::lookup(&self.left, a),
            Self::lookup(&self.right, b),
        ) {
            (Some(i), Some(j)) => i == j,
            (None, None) => a == b,
            _ => false,
        }
    }
}

pub fn alpha_eq_term(a: &Term, b: &Term) -> bool {
    ae_term(a, b, &mut AlphaEnv::default())
}

pub fn alpha_eq_prop(a: &Prop, b: &Prop) -> bool {
    ae_prop(a, b, &mut AlphaEnv::default())
}

pub fn alpha_eq_assertion(a: &Assertion, b: &Assertion) -> bool {
    ae_assertion(a, b, &mut AlphaEnv::default())
}

fn ae_term(a: &Term, b: &Term, env: &mut AlphaEnv) -> bool {
    use Term::*;
    match (a, b) {
        (Var(x), Var(y)) => env.var_eq(x, y),
        (AdvVar(x), AdvVar(y)) => x == y,
        (Star, Star) | (Zero, Zero) | (True, True) | (False, False) | (Skip, Skip) => true,
        (Succ(x), Succ(y)) => ae_term(x, y, env),
        (Lam(x, tx, bx), Lam(y, ty, by)) => {
            if tx != ty {
                return false;
            }
            env.push(x, y);
            let r = ae_term(bx, by, env);
            env.pop();
            r
        }
        (App(f, u), App(g, v)) => ae_term(f, g, env) && ae_term(u, v, env),
        (Pair(x1, x2), Pair(y1, y2)) => ae_term(x1, y1, env) && ae_term(x2, y2, env),
        (Proj1(x), Proj1(y)) | (Proj2(x), Proj2(y)) => ae_term(x, y, env),
        (Case(s1, a1, b1), Case(s2, a2, b2)) => {
            ae_term(s1, s2, env) && ae_term(a1, a2, env) && ae_term(b1, b2, env)
        }
        (CaseNat(s1, arms1, d1), CaseNat(s2, arms2, d2)) => {
            ae_term(s1, s2, env)
                && arms1.len() == arms2.len()
                && arms1.iter().zip(arms2).all(|(x, y)| ae_term(x, y, env))
                && match (d1, d2) {
                    (None, None) => true,
                    (Some(x), Some(y)) => ae_term(x, y, env),
                    _ => false,
                }
        }
        (Read(l1), Read(l2)) => l1 == l2,
        (Write(l1, x), Write(l2, y)) => l1 == l2 && ae_term(x, y, env),
        (UnitM(x), UnitM(y)) => ae_term(x, y, env),
        (LetM(x, t1, u1), LetM(y, t2, u2)) => {
            if !ae_term(t1, t2, env) {
                return false;
            }
            env.push(x, y);
            let r = ae_term(u1, u2, env);
            env.pop();
            r
        }
        (MFold(a1, b1, c1), MFold(a2, b2, c2)) => {
            ae_term(a1, a2, env) && ae_term(b1, b2, env) && ae_term(c1, c2, env)
        }
        (Sample(d1, a1), Sample(d2, a2)) => {
            d1 == d2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| ae_term(x, y, env))
        }
        (Select(m1, l1), Select(m2, l2)) => l1 == l2 && ae_term(m1, m2, env),
        (Store(m1, l1, v1), Store(m2, l2, v2)) => {
            l1 == l2 && ae_term(m1, m2, env) && ae_term(v1, v2, env)
        }
        (SelArr(m1, a1, i1), SelArr(m2, a2, i2)) => {
            a1 == a2 && ae_term(m1, m2, env) && ae_term(i1, i2, env)
        }
        (CardDom(m1, a1), CardDom(m2, a2))
        | (CardIm(m1, a1), CardIm(m2, a2))
        | (SumArr(m1, a1), SumArr(m2, a2)) => a1 == a2 && ae_term(m1, m2, env),
        (RatLit(x), RatLit(y)) => x == y,
        (Add(x1, x2), Add(y1, y2))
        | (Sub(x1, x2), Sub(y1, y2))
        | (Mul(x1, x2), Mul(y1, y2))
        | (Pow(x1, x2), Pow(y1, y2)) => ae_term(x1, y1, env) && ae_term(x2, y2, env),
        (Count(k1, x, p1), Count(k2, y, p2)) => {
            if k1 != k2 {
                return false;
            }
            env.push(x, y);
            let r = ae_prop(p1, p2, env);
            env.pop();
            r
        }
        (IvExpr(p1), IvExpr(p2)) => ae_prop(p1, p2, env),
        _ => false,
    }
}

fn ae_prop(a: &Prop, b: &Prop, env: &mut AlphaEnv) -> bool {
    use Prop::*;
    match (a, b) {
        (True, True) | (False, False) => true,
        (Cmp(o1, x1, x2), Cmp(o2, y1, y2)) => {
            o1 == o2 && ae_term(x1, y1, env) && ae_term(x2, y2, env)
        }
        (InSet(x, s1), InSet(y, s2)) => s1 == s2 && ae_term(x, y, env),
        (InDom(x1, m1, a1), InDom(x2, m2, a2)) | (InIm(x1, m1, a1), InIm(x2, m2, a2)) => {
            a1 == a2 && ae_term(x1, x2, env) && ae_term(m1, m2, env)
        }
        (And(x1, x2), And(y1, y2)) | (Or(x1, x2), Or(y1, y2)) | (Imp(x1, x2), Imp(y1, y2)) => {
            ae_prop(x1, y1, env) && ae_prop(x2, y2, env)
        }
        (Not(x), Not(y)) => ae_prop(x, y, env),
        (Forall(x, tx, p1), Forall(y, ty, p2)) | (Exists(x, tx, p1), Exists(y, ty, p2)) => {
            if tx != ty {
                return false;
            }
            env.push(x, y);
            let r = ae_prop(p1, p2, env);
            env.pop();
            r
        }
        _ => false,
    }
}

fn ae_assertion(a: &Assertion, b: &Assertion, env: &mut AlphaEnv) -> bool {
    use Assertion::*;
    match (a, b) {
        (Top, Top) | (Bot, Bot) => true,
        (Q(x), Q(y)) => ae_term(x, y, env),
        (Inj(x), Inj(y)) | (Iv(x), Iv(y)) => ae_prop(x, y, env),
        (Meet(x1, x2), Meet(y1, y2))
        | (Join(x1, x2), Join(y1, y2))
        | (Plus(x1, x2), Plus(y1, y2)) => ae_assertion(x1, y1, env) && ae_assertion(x2, y2, env),
        (Scale(q1, x), Scale(q2, y)) => q1 == q2 && ae_assertion(x, y, env),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam(x: &str, body: Term) -> Term {
        Term::Lam(x.to_string(), Type::Val, Box::new(body))
    }

    #[test]
    fn subst_no_free_occurrence() {
        // (λx. x)[y ↦ t] = λx. x
        let t = lam("x", Term::var("x"));
        let s = Subst::one("y", Term::nat_lit(3));
        assert_eq!(s.apply_term(&t), t);
    }

    #[test]
    fn subst_capture_avoiding() {
        // (λy. x)[x ↦ y]  must rename the binder
        let t = lam("y", Term::var("x"));
        let s = Subst::one("x", Term::var("y"));
        let r = s.apply_term(&t);
        match &r {
            Term::Lam(b, _, body) => {
                assert_ne!(b, "y");
                assert_eq!(**body, Term::var("y"));
            }
            _ => panic!("expected lambda"),
        }
        // free(result) = free(t) \ {x} ∪ free(replacement)
        assert_eq!(
            free_vars_term(&r),
            ["y".to_string()].into_iter().collect()
        );
    }

    #[test]
    fn alpha_equivalence_basic() {
        let a = lam("x", Term::var("x"));
        let b = lam("y", Term::var("y"));
        assert!(alpha_eq_term(&a, &b));
        let c = lam("x", Term::var("z"));
        let d = lam("y", Term::var("z"));
        assert!(alpha_eq_term(&c, &d));
        assert!(!alpha_eq_term(&a, &c));
    }

    #[test]
    fn open_adversary_substitution_rejected() {
        let t = Term::AdvVar("A".into());
        let open = Term::var("x");
        assert!(matches!(
            subst_adv(&t, "A", &open),
            Err(SubstError::OpenAdversaryReplacement(..))
        ));
        let closed = lam("x", Term::var("x"));
        assert_eq!(subst_adv(&t, "A", &closed).unwrap(), closed);
    }
}
