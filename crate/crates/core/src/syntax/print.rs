//! Pretty-printing.
//!
//! Program terms and types print in the `.hop` surface syntax; assertions,
//! propositions and expressions print in the S-expression syntax used by
//! `.proof` scripts. Both printers are inverses of the corresponding parsers
//! on ASTs (round-trip tested).

use crate::config::ProgramConfig;
use crate::rat::fmt_rat;
use crate::syntax::ast::*;

pub struct Printer<'a> {
    pub cfg: &'a ProgramConfig,
}

impl<'a> Printer<'a> {
    pub fn new(cfg: &'a ProgramConfig) -> Self {
        Printer { cfg }
    }

    pub fn ty(&self, t: &Type) -> String {
        self.ty_prec(t, 0)
    }

    // precedence: 0 arrow, 1 product, 2 atom
    fn ty_prec(&self, t: &Type, prec: u8) -> String {
        match t {
            Type::Base(b) => b.clone(),
            Type::Bool => "bool".into(),
            Type::Nat(Some(k)) => format!("nat[{k}]"),
            Type::Nat(None) => "nat[inf]".into(),
            Type::Mem => "mem".into(),
            Type::Unit => "unit".into(),
            Type::Val => "val".into(),
            Type::Arrow(a, b) => {
                let s = format!("{} -> {}", self.ty_prec(a, 1), self.ty_prec(b, 0));
                if prec > 0 {
                    format!("({s})")
                } else {
                    s
                }
            }
            Type::Prod(a, b) => {
                let s = format!("{} * {}", self.ty_prec(a, 2), self.ty_prec(b, 1));
                if prec > 1 {
                    format!("({s})")
                } else {
                    s
                }
            }
            Type::Monadic(eff, k, inner) => {
                format!("T[{}; {k}] {}", self.eff(eff), self.ty_prec(inner, 2))
            }
            Type::Forall(v, inner) => {
                let s = format!("forall {v}. {}", self.ty_prec(inner, 0));
                if prec > 0 {
                    format!("({s})")
                } else {
                    s
                }
            }
        }
    }

    pub fn eff(&self, e: &Effect) -> String {
        let mut parts: Vec<String> = Vec::new();
        // Print whole arrays compactly when all cells are present.
        let mut covered: std::collections::BTreeSet<LocId> = std::collections::BTreeSet::new();
        for arr in &self.cfg.arrays {
            if !arr.cells.is_empty() && arr.cells.iter().all(|c| e.locs.contains(c)) {
                parts.push(arr.name.clone());
                covered.extend(arr.cells.iter().copied());
            }
        }
        for l in &e.locs {
            if !covered.contains(l) {
                parts.push(self.cfg.loc_name(*l).to_string());
            }
        }
        parts.extend(e.vars.iter().cloned());
        parts.join(", ")
    }

    /// Surface syntax for program terms.
    pub fn term(&self, t: &Term) -> String {
        self.term_prec(t, 0)
    }

    // precedence: 0 statement/let, 1 eq, 2 application, 3 atom
    fn term_prec(&self, t: &Term, prec: u8) -> String {
        if let Some(n) = t.as_nat_lit() {
            return n.to_string();
        }
        match t {
            Term::Var(x) => x.clone(),
            Term::AdvVar(a) => a.clone(),
            Term::Star => "*".into(),
            Term::True => "true".into(),
            Term::False => "false".into(),
            Term::Skip => "skip".into(),
            Term::Zero => "0".into(),
            Term::Succ(a) => self.wrap(prec, 2, format!("S {}", self.term_prec(a, 3))),
            Term::Lam(x, ty, b) => self.wrap(
                prec,
                0,
                format!("fun {x} : {} => {}", self.ty(ty), self.term_prec(b, 0)),
            ),
            Term::App(f, a) => self.wrap(
                prec,
                2,
                format!("{} {}", self.term_prec(f, 2), self.term_prec(a, 3)),
            ),
            Term::Pair(a, b) => format!("({}, {})", self.term_prec(a, 0), self.term_prec(b, 0)),
            Term::Proj1(a) => self.wrap(prec, 2, format!("fst {}", self.term_prec(a, 3))),
            Term::Proj2(a) => self.wrap(prec, 2, format!("snd {}", self.term_prec(a, 3))),
            Term::Case(b, t1, t2) => self.wrap(
                prec,
                0,
                format!(
                    "if {} then {} else {}",
                    self.term_prec(b, 1),
                    self.term_prec(t1, 0),
                    self.term_prec(t2, 0)
                ),
            ),
            Term::CaseNat(s, arms, d) => {
                let mut body: Vec<String> = arms
                    .iter()
                    .enumerate()
                    .map(|(i, a)| format!("{i} => {}", self.term_prec(a, 0)))
                    .collect();
                if let Some(d) = d {
                    body.push(format!("_ => {}", self.term_prec(d, 0)));
                }
                self.wrap(
                    prec,
                    2,
                    format!("match {} {{ {} }}", self.term_prec(s, 3), body.join(" | ")),
                )
            }
            Term::Read(l) => self.wrap(prec, 2, format!("read {}", self.cfg.loc_name(*l))),
            Term::Write(l, v) => self.wrap(
                prec,
                2,
                format!("write {} {}", self.cfg.loc_name(*l), self.term_prec(v, 3)),
            ),
            Term::UnitM(a) => self.wrap(prec, 2, format!("unit {}", self.term_prec(a, 3))),
            Term::LetM(x, t1, t2) => self.wrap(
                prec,
                0,
                format!(
                    "let {x} = {} in {}",
                    self.term_prec(t1, 1),
                    self.term_prec(t2, 0)
                ),
            ),
            Term::MFold(n, t1, t2) => self.wrap(
                prec,
                2,
                format!(
                    "mfold {} {} {}",
                    self.term_prec(n, 3),
                    self.term_prec(t1, 3),
                    self.term_prec(t2, 3)
                ),
            ),
            Term::Sample(d, args) => {
                let args = args
                    .iter()
                    .map(|a| self.term_prec(a, 0))
                    .collect::<Vec<_>>()
                    .join(", ");
                self.wrap(prec, 2, format!("sample {d}({args})"))
            }
            // Assertion-only forms print as S-expressions.
            _ => self.expr_sexpr(t),
        }
    }

    fn wrap(&self, ctx: u8, mine: u8, s: String) -> String {
        if ctx > mine {
            format!("({s})")
        } else {
            s
        }
    }

    /// S-expression form of any term/expression.
    pub fn expr_sexpr(&self, t: &Term) -> String {
        if let Some(n) = t.as_nat_lit() {
            return n.to_string();
        }
        match t {
            Term::Var(x) => x.clone(),
            Term::AdvVar(a) => format!("(adv {a})"),
            Term::Star => "star".into(),
            Term::Zero => "0".into(),
            Term::True => "true".into(),
            Term::False => "false".into(),
            Term::Skip => "skip".into(),
            Term::Succ(a) => format!("(succ {})", self.expr_sexpr(a)),
            Term::Lam(x, ty, b) => {
                format!("(fun ({x} {}) {})", self.ty_sexpr(ty), self.expr_sexpr(b))
            }
            Term::App(f, a) => format!("(app {} {})", self.expr_sexpr(f), self.expr_sexpr(a)),
            Term::Pair(a, b) => format!("(pair {} {})", self.expr_sexpr(a), self.expr_sexpr(b)),
            Term::Proj1(a) => format!("(fst {})", self.expr_sexpr(a)),
            Term::Proj2(a) => format!("(snd {})", self.expr_sexpr(a)),
            Term::Case(b, t1, t2) => format!(
                "(if {} {} {})",
                self.expr_sexpr(b),
                self.expr_sexpr(t1),
                self.expr_sexpr(t2)
            ),
            Term::CaseNat(s, arms, d) => {
                let arms = arms
                    .iter()
                    .map(|a| self.expr_sexpr(a))
                    .collect::<Vec<_>>()
                    .join(" ");
                match d {
                    Some(d) => format!(
                        "(match {} (arms {arms}) (default {}))",
                        self.expr_sexpr(s),
                        self.expr_sexpr(d)
                    ),
                    None => format!("(match {} (arms {arms}))", self.expr_sexpr(s)),
                }
            }
            Term::Read(l) => format!("(read {})", self.cfg.loc_name(*l)),
            Term::Write(l, v) => format!("(write {} {})", self.cfg.loc_name(*l), self.expr_sexpr(v)),
            Term::UnitM(a) => format!("(unit {})", self.expr_sexpr(a)),
            Term::LetM(x, t1, t2) => format!(
                "(let {x} {} {})",
                self.expr_sexpr(t1),
                self.expr_sexpr(t2)
            ),
            Term::MFold(n, t1, t2) => format!(
                "(mfold {} {} {})",
                self.expr_sexpr(n),
                self.expr_sexpr(t1),
                self.expr_sexpr(t2)
            ),
            Term::Sample(d, args) => {
                let args = args
                    .iter()
                    .map(|a| self.expr_sexpr(a))
                    .collect::<Vec<_>>()
                    .join(" ");
                if args.is_empty() {
                    format!("(sample {d})")
                } else {
                    format!("(sample {d} {args})")
                }
            }
            Term::Select(m, l) => format!("(at {} {})", self.expr_sexpr(m), self.cfg.loc_name(*l)),
            Term::Store(m, l, v) => format!(
                "(upd {} {} {})",
                self.expr_sexpr(m),
                self.cfg.loc_name(*l),
                self.expr_sexpr(v)
            ),
            Term::SelArr(m, arr, i) => format!(
                "(idx {} {} {})",
                self.expr_sexpr(m),
                self.cfg.array(*arr).name,
                self.expr_sexpr(i)
            ),
            Term::CardDom(m, arr) => {
                format!("(card-dom {} {})", self.expr_sexpr(m), self.cfg.array(*arr).name)
            }
            Term::CardIm(m, arr) => {
                format!("(card-im {} {})", self.expr_sexpr(m), self.cfg.array(*arr).name)
            }
            Term::SumArr(m, arr) => {
                format!("(sum {} {})", self.expr_sexpr(m), self.cfg.array(*arr).name)
            }
            Term::RatLit(q) => fmt_rat(q),
            Term::Add(a, b) => format!("(+ {} {})", self.expr_sexpr(a), self.expr_sexpr(b)),
            Term::Sub(a, b) => format!("(- {} {})", self.expr_sexpr(a), self.expr_sexpr(b)),
            Term::Mul(a, b) => format!("(* {} {})", self.expr_sexpr(a), self.expr_sexpr(b)),
            Term::Pow(a, b) => format!("(pow {} {})", self.expr_sexpr(a), self.expr_sexpr(b)),
            Term::Count(k, x, p) => format!("(count ({x} {k}) {})", self.prop_sexpr(p)),
            Term::IvExpr(p) => format!("(ivx {})", self.prop_sexpr(p)),
        }
    }

    pub fn ty_sexpr(&self, t: &Type) -> String {
        match t {
            Type::Base(b) => format!("(base {b})"),
            Type::Bool => "bool".into(),
            Type::Nat(Some(k)) => format!("(nat {k})"),
            Type::Nat(None) => "(nat inf)".into(),
            Type::Mem => "mem".into(),
            Type::Unit => "unit".into(),
            Type::Val => "val".into(),
            Type::Arrow(a, b) => format!("(-> {} {})", self.ty_sexpr(a), self.ty_sexpr(b)),
            Type::Prod(a, b) => format!("(prod {} {})", self.ty_sexpr(a), self.ty_sexpr(b)),
            Type::Monadic(e, k, inner) => {
                let mut items: Vec<String> = e.locs.iter().map(|l| self.cfg.loc_name(*l).to_string()).collect();
                items.extend(e.vars.iter().cloned());
                format!("(T (eff {}) {k} {})", items.join(" "), self.ty_sexpr(inner))
            }
            Type::Forall(v, inner) => format!("(forall {v} {})", self.ty_sexpr(inner)),
        }
    }

    pub fn prop_sexpr(&self, p: &Prop) -> String {
        match p {
            Prop::True => "true".into(),
            Prop::False => "false".into(),
            Prop::Cmp(op, a, b) => {
                let o = match op {
                    CmpOp::Eq => "=",
                    CmpOp::Ne => "!=",
                    CmpOp::Le => "<=",
                    CmpOp::Lt => "<",
                };
                format!("({o} {} {})", self.expr_sexpr(a), self.expr_sexpr(b))
            }
            Prop::InSet(a, s) => {
                let items = s.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ");
                format!("(in {} (set {items}))", self.expr_sexpr(a))
            }
            Prop::InDom(a, m, arr) => format!(
                "(in-dom {} {} {})",
                self.expr_sexpr(a),
                self.expr_sexpr(m),
                self.cfg.array(*arr).name
            ),
            Prop::InIm(a, m, arr) => format!(
                "(in-im {} {} {})",
                self.expr_sexpr(a),
                self.expr_sexpr(m),
                self.cfg.array(*arr).name
            ),
            Prop::And(a, b) => format!("(and {} {})", self.prop_sexpr(a), self.prop_sexpr(b)),
            Prop::Or(a, b) => format!("(or {} {})", self.prop_sexpr(a), self.prop_sexpr(b)),
            Prop::Imp(a, b) => format!("(imp {} {})", self.prop_sexpr(a), self.prop_sexpr(b)),
            Prop::Not(a) => format!("(not {})", self.prop_sexpr(a)),
            Prop::Forall(x, ty, b) => {
                format!("(all ({x} {}) {})", self.ty_sexpr(ty), self.prop_sexpr(b))
            }
            Prop::Exists(x, ty, b) => {
                format!("(ex ({x} {}) {})", self.ty_sexpr(ty), self.prop_sexpr(b))
            }
        }
    }

    pub fn assertion_sexpr(&self, a: &Assertion) -> String {
        match a {
            Assertion::Top => "top".into(),
            Assertion::Bot => "bot".into(),
            Assertion::Q(e) => format!("(qx {})", self.expr_sexpr(e)),
            Assertion::Inj(p) => format!("(angle {})", self.prop_sexpr(p)),
            Assertion::Iv(p) => format!("(iv {})", self.prop_sexpr(p)),
            Assertion::Meet(a, b) => format!(
                "(meet {} {})",
                self.assertion_sexpr(a),
                self.assertion_sexpr(b)
            ),
            Assertion::Join(a, b) => format!(
                "(join {} {})",
                self.assertion_sexpr(a),
                self.assertion_sexpr(b)
            ),
            Assertion::Plus(a, b) => format!(
                "(plus {} {})",
                self.assertion_sexpr(a),
                self.assertion_sexpr(b)
            ),
            Assertion::Scale(q, a) => {
                format!("(scale {} {})", fmt_rat(q), self.assertion_sexpr(a))
            }
        }
    }
}
