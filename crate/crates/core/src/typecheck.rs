//! The type-and-effect checker for judgments `Ξ; Δ; Γ ⊢ t : τ`, subtyping,
//! and memory-expression typing.
//!
//! Checking is algorithmic: types are inferred bottom-up and subsumption is
//! applied at application/let boundaries, so checking is syntax-directed and
//! deterministic. Branching constructs take the least upper bound of their
//! arms.

use crate::config::{Program, ProgramConfig};
use crate::syntax::ast::*;
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Serialize, PartialEq)]
pub enum TypeError {
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("unknown adversary variable '{0}'")]
    UnknownAdversary(String),
    #[error("type mismatch in {context}: expected {expected}, found {actual}")]
    Mismatch {
        context: String,
        expected: String,
        actual: String,
    },
    #[error("effect escape in {context}: computed effect {{{computed}}} is not contained in declared effect {{{declared}}}")]
    EffectEscape {
        context: String,
        computed: String,
        declared: String,
    },
    #[error("cost overflow in {context}: computed cost {computed} exceeds declared cost {declared}")]
    CostOverflow {
        context: String,
        computed: u64,
        declared: u64,
    },
    #[error("region variable '{0}' is not in scope")]
    RegionVarNotInScope(String),
    #[error("the oracle argument's effect {{{0}}} must be a concrete location set (no region variables)")]
    OracleEffectNotConcrete(String),
    #[error("adversary argument mismatch for '{adv}': {msg}")]
    AdversaryArgMismatch { adv: String, msg: String },
    #[error("adversary '{adv}' has an unsupported type shape: {msg}")]
    AdversaryTypeShape { adv: String, msg: String },
    #[error("cannot apply a non-function of type {0}")]
    NotAFunction(String),
    #[error("expected a monadic computation in {context}, found {actual}")]
    NotMonadic { context: String, actual: String },
    #[error("mfold iteration count must have a bounded natural type, found {0}")]
    UnboundedFold(String),
    #[error("match does not cover all values of {scrutinee} (needs {needed} arms or a default)")]
    CaseNotCovering { scrutinee: String, needed: u64 },
    #[error("numeral {0} exceeds the configured value domain (config error, not a type error)")]
    NumeralOutOfRange(u64),
    #[error("branches have incompatible types: {0} vs {1}")]
    NoJoin(String, String),
    #[error("assertion-only expression form used in a program: {0}")]
    AssertionFormInProgram(String),
    #[error("distribution '{0}' applied to wrong arguments: {1}")]
    BadSampleArgs(String, String),
    #[error("memory expression error: {0}")]
    MemExpr(String),
}

type TResult<T> = Result<T, TypeError>;

/// The typing contexts `Ξ; Δ; Γ`.
#[derive(Clone, Debug, Default)]
pub struct Contexts {
    pub xi: Vec<Ident>,
    pub gamma: Vec<(Ident, Type)>,
}

impl Contexts {
    pub fn new() -> Self {
        Contexts::default()
    }

    pub fn with_gamma(gamma: Vec<(Ident, Type)>) -> Self {
        Contexts {
            xi: Vec::new(),
            gamma,
        }
    }

    pub fn lookup(&self, x: &str) -> Option<&Type> {
        self.gamma.iter().rev().find(|(n, _)| n == x).map(|(_, t)| t)
    }

    fn extended(&self, x: &str, ty: Type) -> Contexts {
        let mut c = self.clone();
        c.gamma.push((x.to_string(), ty));
        c
    }

    fn with_region(&self, v: &str) -> Contexts {
        let mut c = self.clone();
        c.xi.push(v.to_string());
        c
    }
}

pub struct Checker<'a> {
    pub cfg: &'a ProgramConfig,
}

impl<'a> Checker<'a> {
    pub fn new(cfg: &'a ProgramConfig) -> Self {
        Checker { cfg }
    }

    fn pr(&self, ty: &Type) -> String {
        crate::syntax::print::Printer::new(self.cfg).ty(ty)
    }

    fn pr_eff(&self, e: &Effect) -> String {
        crate::syntax::print::Printer::new(self.cfg).eff(e)
    }

    /// `Val` behaves as `nat[V-1]` throughout subtyping and joins.
    fn canon(&self, ty: &Type) -> Type {
        match ty {
            Type::Val => Type::Nat(Some(self.cfg.val_bound())),
            _ => ty.clone(),
        }
    }

    // -----------------------------------------------------------------
    // subtyping
    // -----------------------------------------------------------------

    pub fn subtype(&self, a: &Type, b: &Type) -> bool {
        use Type::*;
        match (&self.canon(a), &self.canon(b)) {
            (Base(x), Base(y)) => x == y,
            (Bool, Bool) | (Unit, Unit) | (Mem, Mem) => true,
            (Nat(x), Nat(y)) => match (x, y) {
                (_, None) => true,
                (None, Some(_)) => false,
                (Some(k), Some(k2)) => k <= k2,
            },
            (Arrow(a1, b1), Arrow(a2, b2)) => self.subtype(a2, a1) && self.subtype(b1, b2),
            (Prod(a1, b1), Prod(a2, b2)) => self.subtype(a1, a2) && self.subtype(b1, b2),
            (Monadic(e1, k1, t1), Monadic(e2, k2, t2)) => {
                e1.subset_of(e2) && k1 <= k2 && self.subtype(t1, t2)
            }
            (Forall(v1, t1), Forall(v2, t2)) => {
                if v1 == v2 {
                    self.subtype(t1, t2)
                } else {
                    let fresh = format!("{v1}#{v2}");
                    self.subtype(
                        &rename_region(t1, v1, &fresh),
                        &rename_region(t2, v2, &fresh),
                    )
                }
            }
            _ => false,
        }
    }

    /// Effect containment under all region instantiations, decided
    /// componentwise.
    pub fn effect_subset(&self, a: &Effect, b: &Effect) -> bool {
        a.subset_of(b)
    }

    /// Least upper bound of two types, when one exists.
    pub fn join(&self, a: &Type, b: &Type) -> Option<Type> {
        use Type::*;
        if a == b {
            return Some(a.clone());
        }
        match (&self.canon(a), &self.canon(b)) {
            (Nat(x), Nat(y)) => Some(Nat(match (x, y) {
                (Some(k1), Some(k2)) => Some(*k1.max(k2)),
                _ => None,
            })),
            (Monadic(e1, k1, t1), Monadic(e2, k2, t2)) => Some(Type::monadic(
                e1.union(e2),
                *k1.max(k2),
                self.join(t1, t2)?,
            )),
            (Prod(a1, b1), Prod(a2, b2)) => Some(Prod(
                Box::new(self.join(a1, a2)?),
                Box::new(self.join(b1, b2)?),
            )),
            (Arrow(a1, b1), Arrow(a2, b2)) => Some(Type::arrow(
                self.meet(a1, a2)?,
                self.join(b1, b2)?,
            )),
            (x, y) if self.subtype(&x.clone(), &y.clone()) => Some(y.clone()),
            (x, y) if self.subtype(&y.clone(), &x.clone()) => Some(x.clone()),
            _ => None,
        }
    }

    fn meet(&self, a: &Type, b: &Type) -> Option<Type> {
        use Type::*;
        if a == b {
            return Some(a.clone());
        }
        match (&self.canon(a), &self.canon(b)) {
            (Nat(x), Nat(y)) => Some(Nat(match (x, y) {
                (Some(k1), Some(k2)) => Some(*k1.min(k2)),
                (Some(k), None) | (None, Some(k)) => Some(*k),
                (None, None) => None,
            })),
            (x, y) if self.subtype(&x.clone(), &y.clone()) => Some(x.clone()),
            (x, y) if self.subtype(&y.clone(), &x.clone()) => Some(y.clone()),
            _ => None,
        }
    }

    fn type_wf(&self, ctx: &Contexts, ty: &Type) -> TResult<()> {
        for v in ty.free_region_vars() {
            if !ctx.xi.contains(&v) {
                return Err(TypeError::RegionVarNotInScope(v));
            }
        }
        Ok(())
    }

    // -----------------------------------------------------------------
    // inference
    // -----------------------------------------------------------------

    pub fn infer(&self, ctx: &Contexts, t: &Term) -> TResult<Type> {
        use Term::*;
        match t {
            Var(x) => ctx
                .lookup(x)
                .cloned()
                .ok_or_else(|| TypeError::UnknownVariable(x.clone())),
            AdvVar(a) => self
                .cfg
                .adversaries
                .get(a)
                .cloned()
                .ok_or_else(|| TypeError::UnknownAdversary(a.clone())),
            Star => Ok(Type::Unit),
            Zero => Ok(Type::Nat(Some(0))),
            Succ(inner) => {
                let ty = self.infer(ctx, inner)?;
                match self.canon(&ty) {
                    Type::Nat(Some(k)) => Ok(Type::Nat(Some(k + 1))),
                    Type::Nat(None) => Ok(Type::Nat(None)),
                    other => Err(TypeError::Mismatch {
                        context: "S".into(),
                        expected: "nat".into(),
                        actual: self.pr(&other),
                    }),
                }
            }
            True | False => Ok(Type::Bool),
            Lam(x, ty, body) => {
                self.type_wf(ctx, ty)?;
                let inner = self.infer(&ctx.extended(x, ty.clone()), body)?;
                Ok(Type::arrow(ty.clone(), inner))
            }
            App(f, a) => {
                if let AdvVar(name) = f.as_ref() {
                    return self.infer_adv_app(ctx, name, a);
                }
                let fty = self.infer(ctx, f)?;
                match fty {
                    Type::Arrow(dom, cod) => {
                        self.check(ctx, a, &dom)?;
                        Ok(*cod)
                    }
                    other => Err(TypeError::NotAFunction(self.pr(&other))),
                }
            }
            Pair(a, b) => Ok(Type::Prod(
                Box::new(self.infer(ctx, a)?),
                Box::new(self.infer(ctx, b)?),
            )),
            Proj1(p) => match self.infer(ctx, p)? {
                Type::Prod(a, _) => Ok(*a),
                other => Err(TypeError::Mismatch {
                    context: "fst".into(),
                    expected: "product".into(),
                    actual: self.pr(&other),
                }),
            },
            Proj2(p) => match self.infer(ctx, p)? {
                Type::Prod(_, b) => Ok(*b),
                other => Err(TypeError::Mismatch {
                    context: "snd".into(),
                    expected: "product".into(),
                    actual: self.pr(&other),
                }),
            },
            Case(b, t1, t2) => {
                self.check(ctx, b, &Type::Bool)?;
                let ty1 = self.infer(ctx, t1)?;
                let ty2 = self.infer(ctx, t2)?;
                self.join(&ty1, &ty2)
                    .ok_or_else(|| TypeError::NoJoin(self.pr(&ty1), self.pr(&ty2)))
            }
            CaseNat(s, arms, default) => {
                let sty = self.infer(ctx, s)?;
                let bound = match self.canon(&sty) {
                    Type::Nat(b) => b,
                    other => {
                        return Err(TypeError::Mismatch {
                            context: "match".into(),
                            expected: "nat".into(),
                            actual: self.pr(&other),
                        })
                    }
                };
                match (bound, default) {
                    (Some(k), None) if (arms.len() as u64) < k + 1 => {
                        return Err(TypeError::CaseNotCovering {
                            scrutinee: self.pr(&sty),
                            needed: k + 1,
                        })
                    }
                    (None, None) => {
                        return Err(TypeError::CaseNotCovering {
                            scrutinee: self.pr(&sty),
                            needed: u64::MAX,
                        })
                    }
                    _ => {}
                }
                let mut out: Option<Type> = None;
                for arm in arms.iter().chain(default.as_deref()) {
                    let ty = self.infer(ctx, arm)?;
                    out = Some(match out {
                        None => ty,
                        Some(acc) => self
                            .join(&acc, &ty)
                            .ok_or_else(|| TypeError::NoJoin(self.pr(&acc), self.pr(&ty)))?,
                    });
                }
                Ok(out.expect("match has at least one arm"))
            }
            Read(l) => Ok(Type::monadic(Effect::single(*l), 0, Type::Val)),
            Write(l, v) => {
                // numerals beyond the configured value domain are a config
                // error, not a type error
                if let Some(n) = v.as_nat_lit() {
                    if n >= self.cfg.value_count {
                        return Err(TypeError::NumeralOutOfRange(n));
                    }
                }
                self.check(ctx, v, &Type::Val)?;
                Ok(Type::monadic(Effect::single(*l), 0, Type::Unit))
            }
            Skip => Ok(Type::monadic(Effect::empty(), 0, Type::Unit)),
            UnitM(v) => {
                let ty = self.infer(ctx, v)?;
                Ok(Type::monadic(Effect::empty(), 0, ty))
            }
            LetM(x, bound, body) => {
                let bty = self.infer(ctx, bound)?;
                let Type::Monadic(e1, k1, inner) = bty else {
                    return Err(TypeError::NotMonadic {
                        context: format!("let {x} = …"),
                        actual: self.pr(&bty),
                    });
                };
                let body_ty = self.infer(&ctx.extended(x, (*inner).clone()), body)?;
                let Type::Monadic(e2, k2, result) = body_ty else {
                    return Err(TypeError::NotMonadic {
                        context: "let body".into(),
                        actual: self.pr(&body_ty),
                    });
                };
                let effect = e1.union(&e2).union(&eff(&inner));
                Ok(Type::monadic(effect, k1 + k2, *result))
            }
            MFold(n, base, step) => {
                let nty = self.infer(ctx, n)?;
                let k_bound = match self.canon(&nty) {
                    Type::Nat(Some(k)) => k,
                    Type::Nat(None) => return Err(TypeError::UnboundedFold(self.pr(&nty))),
                    other => {
                        return Err(TypeError::Mismatch {
                            context: "mfold".into(),
                            expected: "nat".into(),
                            actual: self.pr(&other),
                        })
                    }
                };
                let base_ty = self.infer(ctx, base)?;
                let Type::Monadic(e1, k1, tau1) = base_ty else {
                    return Err(TypeError::NotMonadic {
                        context: "mfold base".into(),
                        actual: self.pr(&base_ty),
                    });
                };
                let step_ty = self.infer(ctx, step)?;
                let Type::Arrow(dom, cod) = step_ty else {
                    return Err(TypeError::NotAFunction(self.pr(&step_ty)));
                };
                let Type::Monadic(e2, k2, tau2) = *cod else {
                    return Err(TypeError::NotMonadic {
                        context: "mfold step".into(),
                        actual: "non-monadic codomain".into(),
                    });
                };
                let tau = self
                    .join(&tau1, &tau2)
                    .ok_or_else(|| TypeError::NoJoin(self.pr(&tau1), self.pr(&tau2)))?;
                if !self.subtype(&tau, &dom) {
                    return Err(TypeError::Mismatch {
                        context: "mfold step argument".into(),
                        expected: self.pr(&dom),
                        actual: self.pr(&tau),
                    });
                }
                Ok(Type::monadic(e1.union(&e2), k1 + k_bound * k2, tau))
            }
            Sample(d, args) => self.infer_sample(ctx, d, args),
            Select(..) | Store(..) | SelArr(..) | CardDom(..) | CardIm(..) | SumArr(..)
            | RatLit(..) | Add(..) | Sub(..) | Mul(..) | Pow(..) | Count(..) | IvExpr(..) => {
                Err(TypeError::AssertionFormInProgram(format!("{t:?}")))
            }
        }
    }

    fn infer_sample(&self, ctx: &Contexts, d: &str, args: &[Term]) -> TResult<Type> {
        use crate::config::DistKind;
        let kind = self.cfg.dists.get(d).ok_or_else(|| {
            TypeError::BadSampleArgs(d.to_string(), "undeclared distribution".into())
        })?;
        let check_nat_arg = |arg: &Term| -> TResult<Option<u64>> {
            let ty = self.infer(ctx, arg)?;
            match self.canon(&ty) {
                Type::Nat(b) => Ok(b),
                other => Err(TypeError::BadSampleArgs(
                    d.to_string(),
                    format!("size argument must be a natural, found {}", self.pr(&other)),
                )),
            }
        };
        match kind {
            DistKind::Uniform => {
                if args.len() != 1 {
                    return Err(TypeError::BadSampleArgs(
                        d.to_string(),
                        "uniform expects one size argument".into(),
                    ));
                }
                let bound = check_nat_arg(&args[0])?;
                let result = self.uniform_result(&args[0], bound, d)?;
                Ok(Type::monadic(Effect::empty(), 0, result))
            }
            DistKind::UniformExcluding => {
                if args.is_empty() {
                    return Err(TypeError::BadSampleArgs(
                        d.to_string(),
                        "uniform_excluding expects a size argument".into(),
                    ));
                }
                let bound = check_nat_arg(&args[0])?;
                for a in &args[1..] {
                    let ty = self.infer(ctx, a)?;
                    if !matches!(self.canon(&ty), Type::Nat(_)) {
                        return Err(TypeError::BadSampleArgs(
                            d.to_string(),
                            format!(
                                "excluded values must be naturals, found {}",
                                self.pr(&ty)
                            ),
                        ));
                    }
                }
                let result = self.uniform_result(&args[0], bound, d)?;
                Ok(Type::monadic(Effect::empty(), 0, result))
            }
        }
    }

    fn uniform_result(&self, size_arg: &Term, bound: Option<u64>, d: &str) -> TResult<Type> {
        if let Some(n) = size_arg.as_nat_lit() {
            if n == 0 {
                return Err(TypeError::BadSampleArgs(
                    d.to_string(),
                    "uniform over an empty range".into(),
                ));
            }
            if n > self.cfg.value_count {
                return Err(TypeError::NumeralOutOfRange(n));
            }
            return Ok(Type::Nat(Some(n - 1)));
        }
        match bound {
            Some(b) => Ok(Type::Nat(Some(b.saturating_sub(1)))),
            None => Ok(Type::Nat(None)),
        }
    }

    /// The Adv rule: `A t` where `Δ(A) = ∀α.(σ → T_{α,k₀}τ) → T_{α∪Σ,k'}τ'`.
    fn infer_adv_app(&self, ctx: &Contexts, name: &str, arg: &Term) -> TResult<Type> {
        let adv_ty = self
            .cfg
            .adversaries
            .get(name)
            .ok_or_else(|| TypeError::UnknownAdversary(name.to_string()))?;
        let shape = AdvShape::of(adv_ty, self.cfg).map_err(|msg| TypeError::AdversaryTypeShape {
            adv: name.to_string(),
            msg,
        })?;
        let arg_ty = self.infer(ctx, arg)?;
        let Type::Arrow(dom, cod) = &arg_ty else {
            return Err(TypeError::AdversaryArgMismatch {
                adv: name.to_string(),
                msg: format!("oracle must be a function, found {}", self.pr(&arg_ty)),
            });
        };
        let Type::Monadic(sigma_prime, k_arg, tau_arg) = cod.as_ref() else {
            return Err(TypeError::AdversaryArgMismatch {
                adv: name.to_string(),
                msg: "oracle must return a monadic computation".into(),
            });
        };
        if !sigma_prime.vars.is_empty() {
            return Err(TypeError::OracleEffectNotConcrete(
                self.pr_eff(sigma_prime),
            ));
        }
        if !self.subtype(&shape.sigma, dom) {
            return Err(TypeError::AdversaryArgMismatch {
                adv: name.to_string(),
                msg: format!(
                    "oracle domain {} does not accept {}",
                    self.pr(dom),
                    self.pr(&shape.sigma)
                ),
            });
        }
        if *k_arg > shape.oracle_cost {
            return Err(TypeError::CostOverflow {
                context: format!("oracle argument of '{name}'"),
                computed: *k_arg,
                declared: shape.oracle_cost,
            });
        }
        if !self.subtype(tau_arg, &shape.tau) {
            return Err(TypeError::AdversaryArgMismatch {
                adv: name.to_string(),
                msg: format!(
                    "oracle result {} is not a subtype of {}",
                    self.pr(tau_arg),
                    self.pr(&shape.tau)
                ),
            });
        }
        Ok(Type::monadic(
            shape.sigma_adv.union(sigma_prime),
            shape.cost,
            shape.tau_prime.clone(),
        ))
    }

    /// Check `t` against an expected type; classifies effect- and
    /// cost-related failures.
    pub fn check(&self, ctx: &Contexts, t: &Term, expected: &Type) -> TResult<Type> {
        // Implicit region generalization: checking against ∀α.τ checks the
        // body with α in scope (the term language has no former for it).
        if let Type::Forall(v, inner) = expected {
            for (x, ty) in &ctx.gamma {
                if ty.free_region_vars().contains(v) {
                    return Err(TypeError::Mismatch {
                        context: format!("region generalization over '{v}'"),
                        expected: "no free occurrence in Γ".into(),
                        actual: format!("'{v}' free in the type of '{x}'"),
                    });
                }
            }
            return self.check(&ctx.with_region(v), t, inner);
        }
        let actual = self.infer(ctx, t)?;
        if self.subtype(&actual, expected) {
            return Ok(actual);
        }
        // produce the most specific error
        if let (Type::Monadic(ea, ka, ia), Type::Monadic(ee, ke, ie)) = (&actual, expected) {
            if self.subtype(ia, ie) {
                if !self.effect_subset(ea, ee) {
                    return Err(TypeError::EffectEscape {
                        context: printed_head(t),
                        computed: self.pr_eff(ea),
                        declared: self.pr_eff(ee),
                    });
                }
                if ka > ke {
                    return Err(TypeError::CostOverflow {
                        context: printed_head(t),
                        computed: *ka,
                        declared: *ke,
                    });
                }
            }
        }
        Err(TypeError::Mismatch {
            context: printed_head(t),
            expected: self.pr(expected),
            actual: self.pr(&actual),
        })
    }

    // -----------------------------------------------------------------
    // memory expressions (assertion side)
    // -----------------------------------------------------------------

    /// Typing for memory expressions: `m[a] : Val` when `m : Mem`,
    /// `m[a↦v] : Mem` when `m : Mem`, `v : Val`. Arithmetic forms are
    /// numeric; this is the well-formedness discipline for assertions.
    pub fn check_mem_expr(&self, ctx: &Contexts, e: &Term) -> TResult<Type> {
        use Term::*;
        match e {
            Select(m, _) => {
                let mty = self.infer_mem(ctx, m)?;
                if mty != Type::Mem {
                    return Err(TypeError::MemExpr(format!(
                        "selection from a non-memory of type {}",
                        self.pr(&mty)
                    )));
                }
                Ok(Type::Val)
            }
            Store(m, _, v) => {
                let mty = self.infer_mem(ctx, m)?;
                if mty != Type::Mem {
                    return Err(TypeError::MemExpr(format!(
                        "store into a non-memory of type {}",
                        self.pr(&mty)
                    )));
                }
                let vty = self.infer_mem(ctx, v)?;
                if !self.subtype(&vty, &Type::Val) {
                    return Err(TypeError::MemExpr(format!(
                        "stored value has type {}",
                        self.pr(&vty)
                    )));
                }
                Ok(Type::Mem)
            }
            SelArr(m, _, idx) => {
                let mty = self.infer_mem(ctx, m)?;
                if mty != Type::Mem {
                    return Err(TypeError::MemExpr("indexing a non-memory".into()));
                }
                let ity = self.infer_mem(ctx, idx)?;
                if !matches!(self.canon(&ity), Type::Nat(_)) {
                    return Err(TypeError::MemExpr("array index must be a natural".into()));
                }
                Ok(Type::Val)
            }
            CardDom(m, _) | CardIm(m, _) | SumArr(m, _) => {
                let mty = self.infer_mem(ctx, m)?;
                if mty != Type::Mem {
                    return Err(TypeError::MemExpr("aggregate over a non-memory".into()));
                }
                Ok(Type::Nat(None))
            }
            RatLit(_) => Ok(Type::Nat(None)),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Pow(a, b) => {
                for side in [a, b] {
                    let ty = self.infer_mem(ctx, side)?;
                    if !matches!(self.canon(&ty), Type::Nat(_)) {
                        return Err(TypeError::MemExpr(format!(
                            "arithmetic over a non-numeric of type {}",
                            self.pr(&ty)
                        )));
                    }
                }
                Ok(Type::Nat(None))
            }
            Count(..) | IvExpr(..) => Ok(Type::Nat(None)),
            _ => self.infer(ctx, e),
        }
    }

    fn infer_mem(&self, ctx: &Contexts, e: &Term) -> TResult<Type> {
        self.check_mem_expr(ctx, e)
    }
}

fn printed_head(t: &Term) -> String {
    let head = match t {
        Term::LetM(..) => "let",
        Term::UnitM(..) => "unit",
        Term::Read(..) => "read",
        Term::Write(..) => "write",
        Term::Case(..) => "if",
        Term::CaseNat(..) => "match",
        Term::MFold(..) => "mfold",
        Term::App(..) => "application",
        Term::Lam(..) => "fun",
        Term::Sample(..) => "sample",
        _ => "term",
    };
    head.to_string()
}

fn rename_region(ty: &Type, old: &str, new: &str) -> Type {
    match ty {
        Type::Base(_) | Type::Bool | Type::Nat(_) | Type::Mem | Type::Unit | Type::Val => {
            ty.clone()
        }
        Type::Arrow(a, b) => Type::arrow(rename_region(a, old, new), rename_region(b, old, new)),
        Type::Prod(a, b) => Type::Prod(
            Box::new(rename_region(a, old, new)),
            Box::new(rename_region(b, old, new)),
        ),
        Type::Monadic(e, k, t) => {
            let mut e2 = e.clone();
            if e2.vars.remove(old) {
                e2.vars.insert(new.to_string());
            }
            Type::Monadic(e2, *k, Box::new(rename_region(t, old, new)))
        }
        Type::Forall(v, t) => {
            if v == old {
                ty.clone()
            } else {
                Type::Forall(v.clone(), Box::new(rename_region(t, old, new)))
            }
        }
    }
}

/// The decomposed shape of an adversary's declared type
/// `∀α.(σ → T_{α,k₀}τ) → T_{α∪Σ,k}τ'`.
pub struct AdvShape {
    pub region: Ident,
    pub sigma: Type,
    pub oracle_cost: u64,
    pub tau: Type,
    /// The adversary's own footprint Σ (excluding α).
    pub sigma_adv: Effect,
    pub cost: u64,
    pub tau_prime: Type,
}

impl AdvShape {
    pub fn of(ty: &Type, _cfg: &ProgramConfig) -> Result<AdvShape, String> {
        let Type::Forall(region, inner) = ty else {
            return Err("expected a ∀-quantified type".into());
        };
        let Type::Arrow(oracle, result) = inner.as_ref() else {
            return Err("expected a function under the quantifier".into());
        };
        let Type::Arrow(sigma, oracle_cod) = oracle.as_ref() else {
            return Err("oracle argument must be a function".into());
        };
        let Type::Monadic(oracle_eff, oracle_cost, tau) = oracle_cod.as_ref() else {
            return Err("oracle argument must return a monadic computation".into());
        };
        if !(oracle_eff.locs.is_empty()
            && oracle_eff.vars.len() == 1
            && oracle_eff.vars.contains(region))
        {
            return Err(format!(
                "oracle effect must be exactly the quantified region '{region}'"
            ));
        }
        let Type::Monadic(res_eff, cost, tau_prime) = result.as_ref() else {
            return Err("adversary result must be a monadic computation".into());
        };
        if !res_eff.vars.contains(region) {
            return Err(format!(
                "adversary result effect must include the quantified region '{region}'"
            ));
        }
        let mut sigma_adv = res_eff.clone();
        sigma_adv.vars.remove(region);
        Ok(AdvShape {
            region: region.clone(),
            sigma: (**sigma).clone(),
            oracle_cost: *oracle_cost,
            tau: (**tau).clone(),
            sigma_adv,
            cost: *cost,
            tau_prime: (**tau_prime).clone(),
        })
    }
}

/// Type-check every definition of a program against its declared type.
pub fn typecheck_program(program: &Program) -> Result<(), (String, TypeError)> {
    let checker = Checker::new(&program.config);
    for def in &program.defs {
        let ctx = Contexts::new();
        checker
            .check(&ctx, &def.body, &def.ty)
            .map_err(|e| (def.name.clone(), e))?;
    }
    Ok(())
}

/// Instantiate an adversary variable with a closed term of the declared
/// type (the Adv-Inst rule): checks closedness and the type, then
/// substitutes.
pub fn adv_instantiate(
    cfg: &ProgramConfig,
    term: &Term,
    adv: &str,
    replacement: &Term,
) -> Result<Term, String> {
    let adv_ty = cfg
        .adversaries
        .get(adv)
        .ok_or_else(|| format!("unknown adversary '{adv}'"))?;
    let checker = Checker::new(cfg);
    checker
        .check(&Contexts::new(), replacement, adv_ty)
        .map_err(|e| format!("adversary instantiation for '{adv}': {e}"))?;
    crate::syntax::subst::subst_adv(term, adv, replacement).map_err(|e| e.to_string())
}

/// Free region variables check plus nonnegative-grade invariants for a
/// type in a grading context.
pub fn type_well_formed(cfg: &ProgramConfig, xi: &[Ident], ty: &Type) -> TResult<()> {
    let checker = Checker::new(cfg);
    let mut ctx = Contexts::new();
    ctx.xi = xi.to_vec();
    checker.type_wf(&ctx, ty)
}

/// Collect the concrete locations a term can touch: its static effect after
/// instantiating region variables with ∅, plus every location syntactically
/// read or written (used by the oracle's footprint restriction).
pub fn term_location_footprint(t: &Term) -> BTreeSet<LocId> {
    let mut out = BTreeSet::new();
    t.visit(&mut |s| match s {
        Term::Read(l) | Term::Write(l, _) | Term::Select(_, l) | Term::Store(_, l, _) => {
            out.insert(*l);
        }
        _ => {}
    });
    out
}
