//! The three logic instances and the two assertion semantics.
//!
//! Assertions have one abstract syntax and two interpretations: the Boolean
//! lattice {⊥,⊤} (union-bound and relational logics) and the extended
//! nonnegative rationals [0,∞] with REVERSED order (expectation logic),
//! where ⊤ ↦ 0, ⊥ ↦ ∞, ⊓ ↦ sup, ⊔ ↦ inf, ⟨φ⟩ ↦ 0/∞ and [φ] ↦ 1/0.

use crate::config::ProgramConfig;
use crate::rat::{rat_u64, ExtRat};
use crate::semantics::{Env, Interp, Memory, Value};
use crate::syntax::ast::*;
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LogicMode {
    Ubl,
    Exp,
    Rpl,
}

impl LogicMode {
    pub fn parse(s: &str) -> Option<LogicMode> {
        match s {
            "ubl" => Some(LogicMode::Ubl),
            "exp" => Some(LogicMode::Exp),
            "rpl" => Some(LogicMode::Rpl),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LogicMode::Ubl => "ubl",
            LogicMode::Exp => "exp",
            LogicMode::Rpl => "rpl",
        }
    }

    pub fn is_relational(&self) -> bool {
        matches!(self, LogicMode::Rpl)
    }

    pub fn is_quantitative(&self) -> bool {
        matches!(self, LogicMode::Exp)
    }

    /// The rule names admitted by each instance. The shared template rules
    /// appear in several instances; the sampling and adversary rules are
    /// instance-specific. AND-POST-U is union-bound only: its grade addition
    /// is the union bound, which is not sound for expectation suprema or
    /// coupling intersections.
    pub fn allows_rule(&self, rule: &str) -> bool {
        const SHARED_UNARY: &[&str] = &[
            "UNIT-U", "MLET-U", "READ-U", "WRITE-U", "MCASE-U", "MCASEN-U", "MFOLD-U",
            "CONSEQ-U", "OR-PRE-U",
        ];
        const RELATIONAL: &[&str] = &[
            "UNIT-R", "MLET-R", "READ-R", "WRITE-R", "MCASE-R", "MCASEN-R", "L-UNIT-R",
            "L-MLET-R", "R-UNIT-R", "R-MLET-R", "CONSEQ-U", "OR-PRE-U", "SAMPLE-R", "ADV-R",
        ];
        match self {
            LogicMode::Ubl => {
                SHARED_UNARY.contains(&rule)
                    || matches!(rule, "AND-POST-U" | "SAMPLE-UBL" | "ADV-U")
            }
            LogicMode::Exp => {
                SHARED_UNARY.contains(&rule) || matches!(rule, "LIN-EXP" | "UNIF-EXP" | "ADV-U")
            }
            LogicMode::Rpl => RELATIONAL.contains(&rule),
        }
    }

    /// Well-formedness of an assertion in this instance: the quantitative
    /// connectives are rejected by the Boolean instances.
    pub fn assertion_wf(&self, a: &Assertion) -> Result<(), String> {
        if self.is_quantitative() {
            return Ok(());
        }
        let mut bad = None;
        walk_assertion(a, &mut |node| {
            if bad.is_none()
                && matches!(
                    node,
                    Assertion::Q(_) | Assertion::Iv(_) | Assertion::Plus(..) | Assertion::Scale(..)
                )
            {
                bad = Some(format!("{node:?}"));
            }
        });
        match bad {
            None => Ok(()),
            Some(b) => Err(format!(
                "quantitative assertion connective in {} mode: {b}",
                self.name()
            )),
        }
    }
}

fn walk_assertion(a: &Assertion, f: &mut impl FnMut(&Assertion)) {
    f(a);
    match a {
        Assertion::Meet(x, y) | Assertion::Join(x, y) | Assertion::Plus(x, y) => {
            walk_assertion(x, f);
            walk_assertion(y, f);
        }
        Assertion::Scale(_, x) => walk_assertion(x, f),
        _ => {}
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SemError {
    #[error("evaluation: {0}")]
    Eval(#[from] crate::semantics::EvalError),
    #[error("expected a numeric value, found {0}")]
    NotNumeric(String),
    #[error("array index {0} out of range")]
    IndexOutOfRange(u64),
    #[error("quantitative atom evaluated to a negative value {0}")]
    NegativeQuantity(String),
    #[error("pow with a non-integer exponent")]
    NonIntegerExponent,
    #[error("pow of zero with a negative exponent")]
    ZeroToNegative,
    #[error("quantifier over type {0} is not enumerable (must be admitted)")]
    NotEnumerable(String),
    #[error("quantitative connective evaluated under a Boolean semantics")]
    QuantInBool,
    #[error("comparison of non-first-order values")]
    HigherOrderCompare,
}

type SResult<T> = Result<T, SemError>;

/// Evaluation context for assertion expressions: a variable environment
/// binding program variables and the distinguished assertion variables
/// (memories as `Value::MemV`).
pub struct AssertEval<'a> {
    pub cfg: &'a ProgramConfig,
    interp: Interp<'a>,
}

/// Either a runtime value or an extended rational (from arithmetic forms).
#[derive(Clone, Debug)]
pub enum XVal {
    V(Value),
    Q(ExtRat),
}

impl XVal {
    fn as_extrat(&self) -> SResult<ExtRat> {
        match self {
            XVal::Q(q) => Ok(q.clone()),
            XVal::V(Value::Nat(n)) => Ok(ExtRat::Fin(rat_u64(*n))),
            other => Err(SemError::NotNumeric(format!("{other:?}"))),
        }
    }

    fn numeric(&self) -> bool {
        matches!(self, XVal::Q(_) | XVal::V(Value::Nat(_)))
    }
}

impl<'a> AssertEval<'a> {
    pub fn new(cfg: &'a ProgramConfig) -> Self {
        AssertEval {
            cfg,
            interp: Interp::new(cfg),
        }
    }

    pub fn expr(&self, env: &Env, e: &Term) -> SResult<XVal> {
        use Term::*;
        match e {
            Select(m, l) => {
                let mem = self.mem_of(env, m)?;
                Ok(XVal::V(Value::Nat(mem.get(*l))))
            }
            Store(m, l, v) => {
                let mem = self.mem_of(env, m)?;
                let val = self.nat_of(env, v)?;
                Ok(XVal::V(Value::MemV(mem.updated(*l, val))))
            }
            SelArr(m, arr, idx) => {
                let mem = self.mem_of(env, m)?;
                let i = self.nat_of(env, idx)?;
                let cells = &self.cfg.array(*arr).cells;
                let cell = cells
                    .get(i as usize)
                    .ok_or(SemError::IndexOutOfRange(i))?;
                Ok(XVal::V(Value::Nat(mem.get(*cell))))
            }
            CardDom(m, arr) => {
                let mem = self.mem_of(env, m)?;
                let sentinel = self.cfg.sentinel();
                let n = self
                    .cfg
                    .array(*arr)
                    .cells
                    .iter()
                    .filter(|c| mem.get(**c) != sentinel)
                    .count();
                Ok(XVal::V(Value::Nat(n as u64)))
            }
            CardIm(m, arr) => {
                let mem = self.mem_of(env, m)?;
                let sentinel = self.cfg.sentinel();
                let vals: BTreeSet<u64> = self
                    .cfg
                    .array(*arr)
                    .cells
                    .iter()
                    .map(|c| mem.get(*c))
                    .filter(|v| *v != sentinel)
                    .collect();
                Ok(XVal::V(Value::Nat(vals.len() as u64)))
            }
            SumArr(m, arr) => {
                let mem = self.mem_of(env, m)?;
                let n: u64 = self
                    .cfg
                    .array(*arr)
                    .cells
                    .iter()
                    .map(|c| mem.get(*c))
                    .sum();
                Ok(XVal::V(Value::Nat(n)))
            }
            RatLit(q) => Ok(XVal::Q(ExtRat::Fin(q.clone()))),
            Add(a, b) => {
                let x = self.expr(env, a)?.as_extrat()?;
                let y = self.expr(env, b)?.as_extrat()?;
                Ok(XVal::Q(x + y))
            }
            Sub(a, b) => {
                let x = self.expr(env, a)?.as_extrat()?;
                let y = self.expr(env, b)?.as_extrat()?;
                Ok(XVal::Q(x - y))
            }
            Mul(a, b) => {
                let x = self.expr(env, a)?.as_extrat()?;
                let y = self.expr(env, b)?.as_extrat()?;
                Ok(XVal::Q(x * y))
            }
            Pow(a, b) => {
                let base = self.expr(env, a)?.as_extrat()?;
                let exp = self.expr(env, b)?.as_extrat()?;
                let ExtRat::Fin(base) = base else {
                    return Ok(XVal::Q(ExtRat::Inf));
                };
                let ExtRat::Fin(exp) = exp else {
                    return Err(SemError::NonIntegerExponent);
                };
                if !exp.is_integer() {
                    return Err(SemError::NonIntegerExponent);
                }
                let e: i64 = num_traits::ToPrimitive::to_i64(exp.numer())
                    .ok_or(SemError::NonIntegerExponent)?;
                match crate::rat::rat_pow(&base, e) {
                    Some(r) => Ok(XVal::Q(ExtRat::Fin(r))),
                    None => Err(SemError::ZeroToNegative),
                }
            }
            Count(bound, x, p) => {
                let mut n = 0u64;
                for v in 0..*bound {
                    let env2 = env.extended(x, Value::Nat(v));
                    if self.prop(&env2, p)? {
                        n += 1;
                    }
                }
                Ok(XVal::V(Value::Nat(n)))
            }
            IvExpr(p) => Ok(XVal::Q(if self.prop(env, p)? {
                ExtRat::one()
            } else {
                ExtRat::zero()
            })),
            // program terms evaluate with the pure evaluator
            other => {
                let mut calls = 0;
                Ok(XVal::V(self.interp.eval(other, env, &mut calls)?))
            }
        }
    }

    fn mem_of(&self, env: &Env, e: &Term) -> SResult<Memory> {
        match self.expr(env, e)? {
            XVal::V(Value::MemV(m)) => Ok(m),
            other => Err(SemError::NotNumeric(format!("expected memory, got {other:?}"))),
        }
    }

    fn nat_of(&self, env: &Env, e: &Term) -> SResult<u64> {
        match self.expr(env, e)? {
            XVal::V(Value::Nat(n)) => Ok(n),
            XVal::Q(ExtRat::Fin(q)) if q.is_integer() && !num_traits::Signed::is_negative(&q) => {
                Ok(num_traits::ToPrimitive::to_u64(q.numer())
                    .ok_or_else(|| SemError::NotNumeric("overflow".into()))?)
            }
            other => Err(SemError::NotNumeric(format!("{other:?}"))),
        }
    }

    pub fn prop(&self, env: &Env, p: &Prop) -> SResult<bool> {
        use Prop::*;
        match p {
            True => Ok(true),
            False => Ok(false),
            Cmp(op, a, b) => {
                let x = self.expr(env, a)?;
                let y = self.expr(env, b)?;
                if x.numeric() || y.numeric() {
                    let x = x.as_extrat()?;
                    let y = y.as_extrat()?;
                    Ok(match op {
                        CmpOp::Eq => x == y,
                        CmpOp::Ne => x != y,
                        CmpOp::Le => x <= y,
                        CmpOp::Lt => x < y,
                    })
                } else {
                    let (XVal::V(x), XVal::V(y)) = (&x, &y) else {
                        return Err(SemError::NotNumeric("mixed comparison".into()));
                    };
                    if matches!(x, Value::Closure(_) | Value::Comp(..))
                        || matches!(y, Value::Closure(_) | Value::Comp(..))
                    {
                        return Err(SemError::HigherOrderCompare);
                    }
                    match op {
                        CmpOp::Eq => Ok(x == y),
                        CmpOp::Ne => Ok(x != y),
                        _ => Err(SemError::NotNumeric("ordered comparison of non-numerics".into())),
                    }
                }
            }
            InSet(e, set) => {
                let n = self.nat_of(env, e)?;
                Ok(set.contains(&n))
            }
            InDom(e, m, arr) => {
                let i = self.nat_of(env, e)?;
                let mem = self.mem_of(env, m)?;
                let cells = &self.cfg.array(*arr).cells;
                let cell = cells.get(i as usize).ok_or(SemError::IndexOutOfRange(i))?;
                Ok(mem.get(*cell) != self.cfg.sentinel())
            }
            InIm(e, m, arr) => {
                let v = self.nat_of(env, e)?;
                let mem = self.mem_of(env, m)?;
                if v == self.cfg.sentinel() {
                    return Ok(false);
                }
                Ok(self
                    .cfg
                    .array(*arr)
                    .cells
                    .iter()
                    .any(|c| mem.get(*c) == v))
            }
            And(a, b) => Ok(self.prop(env, a)? && self.prop(env, b)?),
            Or(a, b) => Ok(self.prop(env, a)? || self.prop(env, b)?),
            Imp(a, b) => Ok(!self.prop(env, a)? || self.prop(env, b)?),
            Not(a) => Ok(!self.prop(env, a)?),
            Forall(x, ty, body) => {
                for v in self.enumerate_type(ty)? {
                    if !self.prop(&env.extended(x, v), body)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Exists(x, ty, body) => {
                for v in self.enumerate_type(ty)? {
                    if self.prop(&env.extended(x, v), body)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    /// Boolean assertion semantics: ⊓ = ∧, ⊔ = ∨, ⟨φ⟩ = φ.
    pub fn bool_sem(&self, env: &Env, a: &Assertion) -> SResult<bool> {
        use Assertion::*;
        match a {
            Top => Ok(true),
            Bot => Ok(false),
            Inj(p) => self.prop(env, p),
            Meet(x, y) => Ok(self.bool_sem(env, x)? && self.bool_sem(env, y)?),
            Join(x, y) => Ok(self.bool_sem(env, x)? || self.bool_sem(env, y)?),
            Q(_) | Iv(_) | Plus(..) | Scale(..) => Err(SemError::QuantInBool),
        }
    }

    /// Quantitative assertion semantics into [0,∞] with reversed order.
    pub fn quant_sem(&self, env: &Env, a: &Assertion) -> SResult<ExtRat> {
        use Assertion::*;
        match a {
            Top => Ok(ExtRat::zero()),
            Bot => Ok(ExtRat::Inf),
            Q(e) => {
                let q = self.expr(env, e)?.as_extrat()?;
                if q.is_negative() {
                    return Err(SemError::NegativeQuantity(q.to_string()));
                }
                Ok(q)
            }
            Inj(p) => Ok(if self.prop(env, p)? {
                ExtRat::zero()
            } else {
                ExtRat::Inf
            }),
            Iv(p) => Ok(if self.prop(env, p)? {
                ExtRat::one()
            } else {
                ExtRat::zero()
            }),
            // ∞ absorbs the sup and 0 the inf: skip the sibling when the
            // value is already decided
            Meet(x, y) => {
                let a = self.quant_sem(env, x)?;
                if a == ExtRat::Inf {
                    return Ok(ExtRat::Inf);
                }
                Ok(a.max(self.quant_sem(env, y)?))
            }
            Join(x, y) => {
                let a = self.quant_sem(env, x)?;
                if a.is_zero() {
                    return Ok(ExtRat::zero());
                }
                Ok(a.min(self.quant_sem(env, y)?))
            }
            Plus(x, y) => Ok(self.quant_sem(env, x)? + self.quant_sem(env, y)?),
            Scale(q, x) => Ok(ExtRat::Fin(q.clone()) * self.quant_sem(env, x)?),
        }
    }

    /// Enumerate the inhabitants of a finite first-order type.
    pub fn enumerate_type(&self, ty: &Type) -> SResult<Vec<Value>> {
        match ty {
            Type::Bool => Ok(vec![Value::Bool(false), Value::Bool(true)]),
            Type::Unit => Ok(vec![Value::Star]),
            Type::Nat(Some(k)) => Ok((0..=*k).map(Value::Nat).collect()),
            Type::Val => Ok((0..self.cfg.value_count).map(Value::Nat).collect()),
            Type::Mem => {
                let locs: Vec<LocId> = (0..self.cfg.num_locs() as u16).map(LocId).collect();
                Ok(crate::semantics::memories_over(
                    self.cfg,
                    &Memory::zeroed(self.cfg),
                    &locs,
                )
                .map(Value::MemV)
                .collect())
            }
            Type::Prod(a, b) => {
                let xs = self.enumerate_type(a)?;
                let ys = self.enumerate_type(b)?;
                let mut out = Vec::with_capacity(xs.len() * ys.len());
                for x in &xs {
                    for y in &ys {
                        out.push(Value::Pair(Box::new(x.clone()), Box::new(y.clone())));
                    }
                }
                Ok(out)
            }
            other => Err(SemError::NotEnumerable(format!("{other:?}"))),
        }
    }

    /// Size of a type's domain without materializing it.
    pub fn domain_size(&self, ty: &Type) -> Option<u64> {
        match ty {
            Type::Bool => Some(2),
            Type::Unit => Some(1),
            Type::Nat(Some(k)) => Some(k + 1),
            Type::Val => Some(self.cfg.value_count),
            Type::Mem => self
                .cfg
                .value_count
                .checked_pow(self.cfg.num_locs() as u32),
            Type::Prod(a, b) => self.domain_size(a)?.checked_mul(self.domain_size(b)?),
            _ => None,
        }
    }
}

/// The location footprint of an assertion: the set of locations its value
/// can depend on, or `None` for "the whole universe" (a raw memory value is
/// compared or embedded somewhere).
pub fn assertion_footprint(cfg: &ProgramConfig, a: &Assertion) -> Option<BTreeSet<LocId>> {
    let mut out = BTreeSet::new();
    let mut full = false;
    assertion_footprint_into(cfg, a, &mut out, &mut full);
    if full {
        None
    } else {
        Some(out)
    }
}

pub fn prop_footprint(cfg: &ProgramConfig, p: &Prop) -> Option<BTreeSet<LocId>> {
    let mut out = BTreeSet::new();
    let mut full = false;
    prop_footprint_into(cfg, p, &mut out, &mut full);
    if full {
        None
    } else {
        Some(out)
    }
}

fn assertion_footprint_into(
    cfg: &ProgramConfig,
    a: &Assertion,
    out: &mut BTreeSet<LocId>,
    full: &mut bool,
) {
    match a {
        Assertion::Top | Assertion::Bot => {}
        Assertion::Q(e) => expr_footprint(cfg, e, out, full),
        Assertion::Inj(p) | Assertion::Iv(p) => prop_footprint_into(cfg, p, out, full),
        Assertion::Meet(x, y) | Assertion::Join(x, y) | Assertion::Plus(x, y) => {
            assertion_footprint_into(cfg, x, out, full);
            assertion_footprint_into(cfg, y, out, full);
        }
        Assertion::Scale(_, x) => assertion_footprint_into(cfg, x, out, full),
    }
}

fn walk_prop_exprs(p: &Prop, f: &mut impl FnMut(&Term)) {
    match p {
        Prop::True | Prop::False => {}
        Prop::Cmp(_, a, b) => {
            f(a);
            f(b);
        }
        Prop::InSet(a, _) => f(a),
        Prop::InDom(a, m, _) | Prop::InIm(a, m, _) => {
            f(a);
            f(m);
        }
        Prop::And(a, b) | Prop::Or(a, b) | Prop::Imp(a, b) => {
            walk_prop_exprs(a, f);
            walk_prop_exprs(b, f);
        }
        Prop::Not(a) => walk_prop_exprs(a, f),
        Prop::Forall(_, _, body) | Prop::Exists(_, _, body) => walk_prop_exprs(body, f),
    }
}

/// Footprint-aware prop walk: array-membership atoms contribute the array's
/// cells and treat their memory argument as a base rather than a raw value.
fn prop_footprint_into(
    cfg: &ProgramConfig,
    p: &Prop,
    out: &mut BTreeSet<LocId>,
    full: &mut bool,
) {
    match p {
        Prop::True | Prop::False => {}
        Prop::Cmp(_, a, b) => {
            expr_footprint(cfg, a, out, full);
            expr_footprint(cfg, b, out, full);
        }
        Prop::InSet(a, _) => expr_footprint(cfg, a, out, full),
        Prop::InDom(a, m, arr) | Prop::InIm(a, m, arr) => {
            out.extend(cfg.array(*arr).cells.iter().copied());
            expr_footprint(cfg, a, out, full);
            mem_base_footprint(cfg, m, out, full);
        }
        Prop::And(a, b) | Prop::Or(a, b) | Prop::Imp(a, b) => {
            prop_footprint_into(cfg, a, out, full);
            prop_footprint_into(cfg, b, out, full);
        }
        Prop::Not(a) => prop_footprint_into(cfg, a, out, full),
        Prop::Forall(_, _, body) | Prop::Exists(_, _, body) => {
            prop_footprint_into(cfg, body, out, full)
        }
    }
}

/// Accumulate the locations an expression reads; sets `full` when a raw
/// memory value escapes into a position where its whole contents matter.
fn expr_footprint(cfg: &ProgramConfig, e: &Term, out: &mut BTreeSet<LocId>, full: &mut bool) {
    use Term::*;
    match e {
        Select(m, l) => {
            out.insert(*l);
            mem_base_footprint(cfg, m, out, full);
        }
        Store(m, l, v) => {
            // a stored memory escaping as a value: treat the store loc as
            // read and recurse
            out.insert(*l);
            mem_base_footprint(cfg, m, out, full);
            expr_footprint(cfg, v, out, full);
        }
        SelArr(m, arr, idx) => {
            out.extend(cfg.array(*arr).cells.iter().copied());
            mem_base_footprint(cfg, m, out, full);
            expr_footprint(cfg, idx, out, full);
        }
        CardDom(m, arr) | CardIm(m, arr) | SumArr(m, arr) => {
            out.extend(cfg.array(*arr).cells.iter().copied());
            mem_base_footprint(cfg, m, out, full);
        }
        RatLit(_) => {}
        Add(a, b) | Sub(a, b) | Mul(a, b) | Pow(a, b) => {
            expr_footprint(cfg, a, out, full);
            expr_footprint(cfg, b, out, full);
        }
        Count(_, _, p) | IvExpr(p) => prop_footprint_into(cfg, p, out, full),
        Var(name) if is_mem_var(name) => {
            // raw memory compared as a value
            *full = true;
        }
        other => other.visit(&mut |t| match t {
            Term::Read(l) | Term::Write(l, _) => {
                out.insert(*l);
            }
            Term::Var(name) if is_mem_var(name) => *full = true,
            _ => {}
        }),
    }
}

/// The base of a memory expression contributes no footprint of its own
/// (it is a memory variable or a store chain handled structurally).
fn mem_base_footprint(
    cfg: &ProgramConfig,
    m: &Term,
    out: &mut BTreeSet<LocId>,
    full: &mut bool,
) {
    match m {
        Term::Var(_) => {}
        Term::Store(inner, l, v) => {
            out.insert(*l);
            mem_base_footprint(cfg, inner, out, full);
            expr_footprint(cfg, v, out, full);
        }
        other => expr_footprint(cfg, other, out, full),
    }
}

fn is_mem_var(name: &str) -> bool {
    matches!(name, "s" | "s1" | "s2")
}

// ---------------------------------------------------------------------------
// compiled Boolean assertions (allocation-free hot path for enumeration)
// ---------------------------------------------------------------------------

/// A compiled environment-free Boolean assertion over a fixed list of memory
/// variables, evaluated directly against raw memories. Only the fragment
/// needed by enumeration-heavy obligations compiles; everything else falls
/// back to the generic evaluator.
pub enum CompiledBool {
    True,
    False,
    Cmp(CmpOp, CompiledNum, CompiledNum),
    MemEq(usize, usize),
    InIm(CompiledNum, usize, ArrayId),
    InDom(CompiledNum, usize, ArrayId),
    InSet(CompiledNum, BTreeSet<u64>),
    And(Box<CompiledBool>, Box<CompiledBool>),
    Or(Box<CompiledBool>, Box<CompiledBool>),
    Not(Box<CompiledBool>),
}

pub enum CompiledNum {
    Lit(i128),
    Sel(usize, LocId),
    CardDom(usize, ArrayId),
    CardIm(usize, ArrayId),
    Sum(usize, ArrayId),
    Add(Box<CompiledNum>, Box<CompiledNum>),
    Sub(Box<CompiledNum>, Box<CompiledNum>),
    Mul(Box<CompiledNum>, Box<CompiledNum>),
}

pub struct MemCompiler<'a> {
    cfg: &'a ProgramConfig,
    mem_vars: Vec<Ident>,
}

impl<'a> MemCompiler<'a> {
    pub fn new(cfg: &'a ProgramConfig, mem_vars: &[Ident]) -> Self {
        MemCompiler {
            cfg,
            mem_vars: mem_vars.to_vec(),
        }
    }

    fn mem_index(&self, t: &Term) -> Option<usize> {
        match t {
            Term::Var(x) => self.mem_vars.iter().position(|m| m == x),
            _ => None,
        }
    }

    pub fn assertion(&self, a: &Assertion) -> Option<CompiledBool> {
        match a {
            Assertion::Top => Some(CompiledBool::True),
            Assertion::Bot => Some(CompiledBool::False),
            Assertion::Inj(p) => self.prop(p),
            Assertion::Meet(x, y) => Some(CompiledBool::And(
                Box::new(self.assertion(x)?),
                Box::new(self.assertion(y)?),
            )),
            Assertion::Join(x, y) => Some(CompiledBool::Or(
                Box::new(self.assertion(x)?),
                Box::new(self.assertion(y)?),
            )),
            _ => None,
        }
    }

    pub fn prop(&self, p: &Prop) -> Option<CompiledBool> {
        match p {
            Prop::True => Some(CompiledBool::True),
            Prop::False => Some(CompiledBool::False),
            Prop::Cmp(op, a, b) => {
                // raw memory equality
                if let (Some(i), Some(j)) = (self.mem_index(a), self.mem_index(b)) {
                    return match op {
                        CmpOp::Eq => Some(CompiledBool::MemEq(i, j)),
                        CmpOp::Ne => Some(CompiledBool::Not(Box::new(CompiledBool::MemEq(i, j)))),
                        _ => None,
                    };
                }
                Some(CompiledBool::Cmp(*op, self.num(a)?, self.num(b)?))
            }
            Prop::InSet(e, set) => Some(CompiledBool::InSet(self.num(e)?, set.clone())),
            Prop::InIm(e, m, arr) => {
                Some(CompiledBool::InIm(self.num(e)?, self.mem_index(m)?, *arr))
            }
            Prop::InDom(e, m, arr) => {
                Some(CompiledBool::InDom(self.num(e)?, self.mem_index(m)?, *arr))
            }
            Prop::And(a, b) => Some(CompiledBool::And(
                Box::new(self.prop(a)?),
                Box::new(self.prop(b)?),
            )),
            Prop::Or(a, b) => Some(CompiledBool::Or(
                Box::new(self.prop(a)?),
                Box::new(self.prop(b)?),
            )),
            Prop::Imp(a, b) => Some(CompiledBool::Or(
                Box::new(CompiledBool::Not(Box::new(self.prop(a)?))),
                Box::new(self.prop(b)?),
            )),
            Prop::Not(a) => Some(CompiledBool::Not(Box::new(self.prop(a)?))),
            Prop::Forall(..) | Prop::Exists(..) => None,
        }
    }

    fn num(&self, t: &Term) -> Option<CompiledNum> {
        match t {
            Term::RatLit(q) => {
                if q.is_integer() {
                    num_traits::ToPrimitive::to_i128(q.numer()).map(CompiledNum::Lit)
                } else {
                    None
                }
            }
            Term::Zero | Term::Succ(_) => t.as_nat_lit().map(|n| CompiledNum::Lit(n as i128)),
            Term::Select(m, l) => Some(CompiledNum::Sel(self.mem_index(m)?, *l)),
            Term::CardDom(m, arr) => Some(CompiledNum::CardDom(self.mem_index(m)?, *arr)),
            Term::CardIm(m, arr) => Some(CompiledNum::CardIm(self.mem_index(m)?, *arr)),
            Term::SumArr(m, arr) => Some(CompiledNum::Sum(self.mem_index(m)?, *arr)),
            Term::Add(a, b) => Some(CompiledNum::Add(
                Box::new(self.num(a)?),
                Box::new(self.num(b)?),
            )),
            Term::Sub(a, b) => Some(CompiledNum::Sub(
                Box::new(self.num(a)?),
                Box::new(self.num(b)?),
            )),
            Term::Mul(a, b) => Some(CompiledNum::Mul(
                Box::new(self.num(a)?),
                Box::new(self.num(b)?),
            )),
            _ => None,
        }
    }
}

impl CompiledBool {
    pub fn eval(&self, cfg: &ProgramConfig, mems: &[&Memory]) -> bool {
        match self {
            CompiledBool::True => true,
            CompiledBool::False => false,
            CompiledBool::Cmp(op, a, b) => {
                let x = a.eval(cfg, mems);
                let y = b.eval(cfg, mems);
                match op {
                    CmpOp::Eq => x == y,
                    CmpOp::Ne => x != y,
                    CmpOp::Le => x <= y,
                    CmpOp::Lt => x < y,
                }
            }
            CompiledBool::MemEq(i, j) => mems[*i] == mems[*j],
            CompiledBool::InIm(e, m, arr) => {
                let v = e.eval(cfg, mems);
                if v < 0 || v as u64 == cfg.sentinel() {
                    return false;
                }
                let v = v as u64;
                cfg.array(*arr).cells.iter().any(|c| mems[*m].get(*c) == v)
            }
            CompiledBool::InDom(e, m, arr) => {
                let i = e.eval(cfg, mems);
                if i < 0 {
                    return false;
                }
                match cfg.array(*arr).cells.get(i as usize) {
                    Some(c) => mems[*m].get(*c) != cfg.sentinel(),
                    None => false,
                }
            }
            CompiledBool::InSet(e, set) => {
                let v = e.eval(cfg, mems);
                v >= 0 && set.contains(&(v as u64))
            }
            CompiledBool::And(a, b) => a.eval(cfg, mems) && b.eval(cfg, mems),
            CompiledBool::Or(a, b) => a.eval(cfg, mems) || b.eval(cfg, mems),
            CompiledBool::Not(a) => !a.eval(cfg, mems),
        }
    }
}

impl CompiledBool {
    /// True when every numeric leaf is an array aggregate or a literal (no
    /// cell selections, no raw memory equality): such factors evaluate
    /// against incrementally maintained array statistics.
    pub fn card_only(&self) -> bool {
        match self {
            CompiledBool::True | CompiledBool::False => true,
            CompiledBool::Cmp(_, a, b) => a.card_only() && b.card_only(),
            CompiledBool::MemEq(..) | CompiledBool::InIm(..) | CompiledBool::InDom(..) => false,
            CompiledBool::InSet(a, _) => a.card_only(),
            CompiledBool::And(a, b) | CompiledBool::Or(a, b) => a.card_only() && b.card_only(),
            CompiledBool::Not(a) => a.card_only(),
        }
    }

    pub fn eval_stats(&self, stats: &ArrayStats) -> bool {
        match self {
            CompiledBool::True => true,
            CompiledBool::False => false,
            CompiledBool::Cmp(op, a, b) => {
                let x = a.eval_stats(stats);
                let y = b.eval_stats(stats);
                match op {
                    CmpOp::Eq => x == y,
                    CmpOp::Ne => x != y,
                    CmpOp::Le => x <= y,
                    CmpOp::Lt => x < y,
                }
            }
            CompiledBool::InSet(a, set) => {
                let v = a.eval_stats(stats);
                v >= 0 && set.contains(&(v as u64))
            }
            CompiledBool::And(a, b) => a.eval_stats(stats) && b.eval_stats(stats),
            CompiledBool::Or(a, b) => a.eval_stats(stats) || b.eval_stats(stats),
            CompiledBool::Not(a) => !a.eval_stats(stats),
            _ => unreachable!("card_only checked before eval_stats"),
        }
    }
}

/// Incrementally maintained per-array statistics for a single memory swept
/// in odometer order.
pub struct ArrayStats {
    /// cell index (position in the odometer footprint) → array index or none
    cell_to_array: Vec<Option<u16>>,
    sentinel: u64,
    /// per array: (dom, im, sum, value counts)
    dom: Vec<i128>,
    im: Vec<i128>,
    sum: Vec<i128>,
    counts: Vec<[u32; 256]>,
}

impl ArrayStats {
    pub fn new(cfg: &ProgramConfig, footprint: &[LocId]) -> ArrayStats {
        let mut cell_to_array = vec![None; footprint.len()];
        for (pos, l) in footprint.iter().enumerate() {
            for (ai, arr) in cfg.arrays.iter().enumerate() {
                if arr.cells.contains(l) {
                    cell_to_array[pos] = Some(ai as u16);
                }
            }
        }
        let n = cfg.arrays.len();
        let mut s = ArrayStats {
            cell_to_array,
            sentinel: cfg.sentinel(),
            dom: vec![0; n],
            im: vec![0; n],
            sum: vec![0; n],
            counts: vec![[0u32; 256]; n],
        };
        // all-zero initial memory: every footprint cell holds 0
        for pos in 0..s.cell_to_array.len() {
            s.apply(pos, u64::MAX, 0);
        }
        s
    }

    /// Record that the footprint cell at `pos` changed `old → new`
    /// (old = u64::MAX means "was untracked", used for initialization).
    #[inline]
    pub fn apply(&mut self, pos: usize, old: u64, new: u64) {
        let Some(ai) = self.cell_to_array[pos] else {
            return;
        };
        let ai = ai as usize;
        if old != u64::MAX {
            if old != self.sentinel {
                self.dom[ai] -= 1;
                self.sum[ai] -= old as i128;
                self.counts[ai][old as usize] -= 1;
                if self.counts[ai][old as usize] == 0 {
                    self.im[ai] -= 1;
                }
            } else {
                self.sum[ai] -= old as i128;
            }
        }
        if new != self.sentinel {
            self.dom[ai] += 1;
            self.sum[ai] += new as i128;
            if self.counts[ai][new as usize] == 0 {
                self.im[ai] += 1;
            }
            self.counts[ai][new as usize] += 1;
        } else {
            self.sum[ai] += new as i128;
        }
    }
}

impl CompiledNum {
    fn card_only(&self) -> bool {
        match self {
            CompiledNum::Lit(_) => true,
            CompiledNum::Sel(..) => false,
            CompiledNum::CardDom(m, _) | CompiledNum::CardIm(m, _) | CompiledNum::Sum(m, _) => {
                *m == 0
            }
            CompiledNum::Add(a, b) | CompiledNum::Sub(a, b) | CompiledNum::Mul(a, b) => {
                a.card_only() && b.card_only()
            }
        }
    }

    fn eval_stats(&self, stats: &ArrayStats) -> i128 {
        match self {
            CompiledNum::Lit(n) => *n,
            CompiledNum::CardDom(_, arr) => stats.dom[arr.0 as usize],
            CompiledNum::CardIm(_, arr) => stats.im[arr.0 as usize],
            CompiledNum::Sum(_, arr) => stats.sum[arr.0 as usize],
            CompiledNum::Add(a, b) => a.eval_stats(stats) + b.eval_stats(stats),
            CompiledNum::Sub(a, b) => a.eval_stats(stats) - b.eval_stats(stats),
            CompiledNum::Mul(a, b) => a.eval_stats(stats) * b.eval_stats(stats),
            CompiledNum::Sel(..) => unreachable!("card_only checked before eval_stats"),
        }
    }

    fn eval(&self, cfg: &ProgramConfig, mems: &[&Memory]) -> i128 {
        match self {
            CompiledNum::Lit(n) => *n,
            CompiledNum::Sel(m, l) => mems[*m].get(*l) as i128,
            CompiledNum::CardDom(m, arr) => {
                let sentinel = cfg.sentinel();
                cfg.array(*arr)
                    .cells
                    .iter()
                    .filter(|c| mems[*m].get(**c) != sentinel)
                    .count() as i128
            }
            CompiledNum::CardIm(m, arr) => {
                let sentinel = cfg.sentinel();
                let mut seen = [false; 256];
                let mut count = 0i128;
                for c in &cfg.array(*arr).cells {
                    let v = mems[*m].get(*c);
                    if v != sentinel && !seen[v as usize] {
                        seen[v as usize] = true;
                        count += 1;
                    }
                }
                count
            }
            CompiledNum::Sum(m, arr) => cfg
                .array(*arr)
                .cells
                .iter()
                .map(|c| mems[*m].get(*c) as i128)
                .sum(),
            CompiledNum::Add(a, b) => a.eval(cfg, mems) + b.eval(cfg, mems),
            CompiledNum::Sub(a, b) => a.eval(cfg, mems) - b.eval(cfg, mems),
            CompiledNum::Mul(a, b) => a.eval(cfg, mems) * b.eval(cfg, mems),
        }
    }
}
