//! Normalization of memory expressions and assertions used by the proof
//! kernel's schema matching.
//!
//! The rewrite system:
//!   - `m[a↦t][a] → t` and `m[a↦t][b] → m[b]` for `a ≠ b`;
//!   - array selection at a literal index resolves to the cell's location;
//!   - stores to locations outside an array commute past that array's
//!     `card-dom` / `card-im` / `sum` / computed selection;
//!   - numeric literals fold (`Zero`/`Succ` chains become rational literals
//!     in assertion positions, constant arithmetic is evaluated);
//!   - assertion unit laws: `⟨⊤⟩ ≡ ⊤`, `⊤ ⊓ P ≡ P`, `P ⊔ ⊥ ≡ P`,
//!     `⊤ + P ≡ P`, `1·P ≡ P`, `q·⊤ ≡ ⊤` — all valid in both the Boolean
//!     and the reversed-[0,∞] interpretation.
//!
//! Store/select redexes strictly decrease size and the remaining rules
//! terminate on a simple measure; rules do not overlap, so normal forms are
//! unique. Assertion equality in rule schemas is α-equivalence of normal
//! forms.

use crate::config::ProgramConfig;
use crate::rat::Rat;
use crate::syntax::ast::*;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn normalize_expr(cfg: &ProgramConfig, t: &Term) -> Term {
    use Term::*;
    match t {
        // Numerals become canonical rational literals in assertion positions.
        Zero => RatLit(Rat::zero()),
        Succ(a) => {
            let a = normalize_expr(cfg, a);
            match a {
                RatLit(q) => RatLit(q + Rat::one()),
                other => Add(Box::new(other), Box::new(RatLit(Rat::one()))),
            }
        }
        Select(m, l) => {
            let m = normalize_expr(cfg, m);
            match m {
                Store(inner, l2, v) => {
                    if l2 == *l {
                        *v
                    } else {
                        normalize_expr(cfg, &Select(inner, *l))
                    }
                }
                other => Select(Box::new(other), *l),
            }
        }
        Store(m, l, v) => Store(
            Box::new(normalize_expr(cfg, m)),
            *l,
            Box::new(normalize_expr(cfg, v)),
        ),
        SelArr(m, arr, idx) => {
            let idx = normalize_expr(cfg, idx);
            if let Some(n) = expr_nat_value(&idx) {
                let cells = &cfg.array(*arr).cells;
                if (n as usize) < cells.len() {
                    return normalize_expr(cfg, &Select(m.clone(), cells[n as usize]));
                }
            }
            let m = normalize_expr(cfg, m);
            let m = strip_foreign_stores(cfg, &m, *arr);
            SelArr(Box::new(m), *arr, Box::new(idx))
        }
        CardDom(m, arr) => norm_array_agg(cfg, m, *arr, |m| CardDom(m, *arr)),
        CardIm(m, arr) => norm_array_agg(cfg, m, *arr, |m| CardIm(m, *arr)),
        SumArr(m, arr) => norm_array_agg(cfg, m, *arr, |m| SumArr(m, *arr)),
        Add(a, b) => fold2(cfg, a, b, |x, y| x + y, Add),
        Sub(a, b) => fold2(cfg, a, b, |x, y| x - y, Sub),
        Mul(a, b) => {
            let a = normalize_expr(cfg, a);
            let b = normalize_expr(cfg, b);
            match (&a, &b) {
                (RatLit(x), RatLit(y)) => RatLit(x * y),
                (RatLit(x), _) if x.is_one() => b,
                (_, RatLit(y)) if y.is_one() => a,
                (RatLit(x), _) if x.is_zero() => RatLit(Rat::zero()),
                (_, RatLit(y)) if y.is_zero() => RatLit(Rat::zero()),
                _ => Mul(Box::new(a), Box::new(b)),
            }
        }
        Pow(a, b) => {
            let a = normalize_expr(cfg, a);
            let b = normalize_expr(cfg, b);
            if let (RatLit(base), RatLit(e)) = (&a, &b) {
                if e.denom().is_one() {
                    if let Some(exp) = e.numer().to_i64() {
                        if let Some(r) = crate::rat::rat_pow(base, exp) {
                            return RatLit(r);
                        }
                    }
                }
            }
            Pow(Box::new(a), Box::new(b))
        }
        Count(k, x, p) => Count(*k, x.clone(), Box::new(normalize_prop(cfg, p))),
        IvExpr(p) => {
            let p = normalize_prop(cfg, p);
            match p {
                Prop::True => RatLit(Rat::one()),
                Prop::False => RatLit(Rat::zero()),
                p => IvExpr(Box::new(p)),
            }
        }
        Var(_) | AdvVar(_) | Star | True | False | Skip | Read(_) | RatLit(_) => t.clone(),
        // Program-term forms inside assertion expressions are left intact
        // except for recursing into their assertion-relevant children.
        Lam(x, ty, b) => Lam(x.clone(), ty.clone(), Box::new(normalize_expr(cfg, b))),
        App(a, b) => Term::app(normalize_expr(cfg, a), normalize_expr(cfg, b)),
        Pair(a, b) => Pair(
            Box::new(normalize_expr(cfg, a)),
            Box::new(normalize_expr(cfg, b)),
        ),
        Proj1(a) => Proj1(Box::new(normalize_expr(cfg, a))),
        Proj2(a) => Proj2(Box::new(normalize_expr(cfg, a))),
        Case(a, b, c) => Case(
            Box::new(normalize_expr(cfg, a)),
            Box::new(normalize_expr(cfg, b)),
            Box::new(normalize_expr(cfg, c)),
        ),
        CaseNat(s, arms, d) => CaseNat(
            Box::new(normalize_expr(cfg, s)),
            arms.iter().map(|a| normalize_expr(cfg, a)).collect(),
            d.as_ref().map(|d| Box::new(normalize_expr(cfg, d))),
        ),
        Write(l, a) => Write(*l, Box::new(normalize_expr(cfg, a))),
        UnitM(a) => UnitM(Box::new(normalize_expr(cfg, a))),
        LetM(x, a, b) => LetM(
            x.clone(),
            Box::new(normalize_expr(cfg, a)),
            Box::new(normalize_expr(cfg, b)),
        ),
        MFold(a, b, c) => MFold(
            Box::new(normalize_expr(cfg, a)),
            Box::new(normalize_expr(cfg, b)),
            Box::new(normalize_expr(cfg, c)),
        ),
        Sample(d, args) => Sample(
            d.clone(),
            args.iter().map(|a| normalize_expr(cfg, a)).collect(),
        ),
    }
}

fn norm_array_agg(
    cfg: &ProgramConfig,
    m: &Term,
    arr: ArrayId,
    rebuild: impl Fn(Box<Term>) -> Term,
) -> Term {
    let m = normalize_expr(cfg, m);
    rebuild(Box::new(strip_foreign_stores(cfg, &m, arr)))
}

/// Remove stores to locations outside the array from a store chain: the
/// aggregate's value cannot depend on them.
fn strip_foreign_stores(cfg: &ProgramConfig, m: &Term, arr: ArrayId) -> Term {
    match m {
        Term::Store(base, l, v) => {
            let base = strip_foreign_stores(cfg, base, arr);
            if cfg.array(arr).cells.contains(l) {
                Term::Store(Box::new(base), *l, v.clone())
            } else {
                base
            }
        }
        other => other.clone(),
    }
}

fn fold2(
    cfg: &ProgramConfig,
    a: &Term,
    b: &Term,
    op: impl Fn(&Rat, &Rat) -> Rat,
    rebuild: impl Fn(Box<Term>, Box<Term>) -> Term,
) -> Term {
    let a = normalize_expr(cfg, a);
    let b = normalize_expr(cfg, b);
    match (&a, &b) {
        (Term::RatLit(x), Term::RatLit(y)) => Term::RatLit(op(x, y)),
        _ => rebuild(Box::new(a), Box::new(b)),
    }
}

/// A normalized expression's literal natural value, when it is one.
pub fn expr_nat_value(t: &Term) -> Option<u64> {
    match t {
        Term::RatLit(q) if q.denom().is_one() && !q.is_negative() => q.numer().to_u64(),
        _ => t.as_nat_lit(),
    }
}

pub fn normalize_prop(cfg: &ProgramConfig, p: &Prop) -> Prop {
    use Prop::*;
    match p {
        True | False => p.clone(),
        Cmp(op, a, b) => {
            let a = normalize_expr(cfg, a);
            let b = normalize_expr(cfg, b);
            if let (Term::RatLit(x), Term::RatLit(y)) = (&a, &b) {
                let holds = match op {
                    CmpOp::Eq => x == y,
                    CmpOp::Ne => x != y,
                    CmpOp::Le => x <= y,
                    CmpOp::Lt => x < y,
                };
                return if holds { True } else { False };
            }
            Cmp(*op, Box::new(a), Box::new(b))
        }
        InSet(a, s) => {
            let a = normalize_expr(cfg, a);
            if let Some(n) = expr_nat_value(&a) {
                return if s.contains(&n) { True } else { False };
            }
            InSet(Box::new(a), s.clone())
        }
        InDom(a, m, arr) => InDom(
            Box::new(normalize_expr(cfg, a)),
            Box::new(normalize_expr(cfg, m)),
            *arr,
        ),
        InIm(a, m, arr) => InIm(
            Box::new(normalize_expr(cfg, a)),
            Box::new(normalize_expr(cfg, m)),
            *arr,
        ),
        And(a, b) => {
            let a = normalize_prop(cfg, a);
            let b = normalize_prop(cfg, b);
            match (&a, &b) {
                (True, _) => b,
                (_, True) => a,
                (False, _) | (_, False) => False,
                _ => And(Box::new(a), Box::new(b)),
            }
        }
        Or(a, b) => {
            let a = normalize_prop(cfg, a);
            let b = normalize_prop(cfg, b);
            match (&a, &b) {
                (False, _) => b,
                (_, False) => a,
                (True, _) | (_, True) => True,
                _ => Or(Box::new(a), Box::new(b)),
            }
        }
        Imp(a, b) => {
            let a = normalize_prop(cfg, a);
            let b = normalize_prop(cfg, b);
            match (&a, &b) {
                (False, _) | (_, True) => True,
                (True, _) => b,
                _ => Imp(Box::new(a), Box::new(b)),
            }
        }
        Not(a) => {
            let a = normalize_prop(cfg, a);
            match a {
                True => False,
                False => True,
                a => Not(Box::new(a)),
            }
        }
        Forall(x, ty, body) => Forall(x.clone(), ty.clone(), Box::new(normalize_prop(cfg, body))),
        Exists(x, ty, body) => Exists(x.clone(), ty.clone(), Box::new(normalize_prop(cfg, body))),
    }
}

pub fn normalize_assertion(cfg: &ProgramConfig, a: &Assertion) -> Assertion {
    use Assertion::*;
    match a {
        Top | Bot => a.clone(),
        Q(e) => {
            let e = normalize_expr(cfg, e);
            match &e {
                Term::RatLit(q) if q.is_zero() => Top,
                _ => Q(Box::new(e)),
            }
        }
        Inj(p) => {
            let p = normalize_prop(cfg, p);
            match p {
                Prop::True => Top,
                Prop::False => Bot,
                p => Inj(Box::new(p)),
            }
        }
        Iv(p) => {
            let p = normalize_prop(cfg, p);
            match p {
                Prop::True => Q(Box::new(Term::RatLit(Rat::one()))),
                Prop::False => Top,
                p => Iv(Box::new(p)),
            }
        }
        Meet(x, y) => {
            let x = normalize_assertion(cfg, x);
            let y = normalize_assertion(cfg, y);
            match (&x, &y) {
                (Top, _) => y,
                (_, Top) => x,
                (Bot, _) | (_, Bot) => Bot,
                _ => Meet(Box::new(x), Box::new(y)),
            }
        }
        Join(x, y) => {
            let x = normalize_assertion(cfg, x);
            let y = normalize_assertion(cfg, y);
            match (&x, &y) {
                (Bot, _) => y,
                (_, Bot) => x,
                (Top, _) | (_, Top) => Top,
                _ => Join(Box::new(x), Box::new(y)),
            }
        }
        Plus(x, y) => {
            let x = normalize_assertion(cfg, x);
            let y = normalize_assertion(cfg, y);
            match (&x, &y) {
                (Top, _) => y,
                (_, Top) => x,
                _ => Plus(Box::new(x), Box::new(y)),
            }
        }
        Scale(q, x) => {
            let x = normalize_assertion(cfg, x);
            if q.is_one() {
                return x;
            }
            if matches!(x, Top) {
                return Top;
            }
            if q.is_zero() {
                return Top;
            }
            Scale(q.clone(), Box::new(x))
        }
    }
}

/// Assertion equality used by rule schemas: α-equivalence of normal forms.
pub fn assertions_match(cfg: &ProgramConfig, a: &Assertion, b: &Assertion) -> bool {
    crate::syntax::subst::alpha_eq_assertion(
        &normalize_assertion(cfg, a),
        &normalize_assertion(cfg, b),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat_int;

    fn cfg() -> ProgramConfig {
        let mut c = ProgramConfig::new();
        c.add_loc("a");
        c.add_loc("b");
        c.add_array("L", 2);
        c.value_count = 4;
        c
    }

    #[test]
    fn store_select_redexes() {
        let c = cfg();
        let a = c.loc_id("a").unwrap();
        let b = c.loc_id("b").unwrap();
        let s = Term::var("s");
        // s[a↦t][a] → t
        let e = Term::select(Term::store(s.clone(), a, Term::nat_lit(3)), a);
        assert_eq!(normalize_expr(&c, &e), Term::RatLit(rat_int(3)));
        // s[a↦t][b] → s[b]
        let e = Term::select(Term::store(s.clone(), a, Term::nat_lit(3)), b);
        assert_eq!(normalize_expr(&c, &e), Term::select(s.clone(), b));
    }

    #[test]
    fn literal_array_index_resolves() {
        let c = cfg();
        let arr = c.array_id("L").unwrap();
        let cell1 = c.array(arr).cells[1];
        let e = Term::SelArr(Box::new(Term::var("s")), arr, Box::new(Term::nat_lit(1)));
        assert_eq!(normalize_expr(&c, &e), Term::select(Term::var("s"), cell1));
    }

    #[test]
    fn stores_outside_array_commute() {
        let c = cfg();
        let a = c.loc_id("a").unwrap();
        let arr = c.array_id("L").unwrap();
        let e = Term::CardDom(
            Box::new(Term::store(Term::var("s"), a, Term::nat_lit(0))),
            arr,
        );
        assert_eq!(
            normalize_expr(&c, &e),
            Term::CardDom(Box::new(Term::var("s")), arr)
        );
        // A store to a cell of L must NOT commute.
        let cell0 = c.array(arr).cells[0];
        let e = Term::CardDom(
            Box::new(Term::store(Term::var("s"), cell0, Term::nat_lit(0))),
            arr,
        );
        assert!(matches!(normalize_expr(&c, &e), Term::CardDom(..)));
    }

    #[test]
    fn unit_laws() {
        let c = cfg();
        let p = Assertion::inj(Prop::eq(Term::var("x"), Term::nat_lit(1)));
        let top_meet = Assertion::meet(Assertion::inj(Prop::True), p.clone());
        assert!(assertions_match(&c, &top_meet, &p));
        let bot_join = Assertion::join(p.clone(), Assertion::Bot);
        assert!(assertions_match(&c, &bot_join, &p));
        let one_scale = Assertion::Scale(rat_int(1), Box::new(p.clone()));
        assert!(assertions_match(&c, &one_scale, &p));
    }

    #[test]
    fn normalization_idempotent_on_samples() {
        let c = cfg();
        let a = c.loc_id("a").unwrap();
        let exprs = vec![
            Term::select(Term::store(Term::var("s"), a, Term::var("z")), a),
            Term::Add(Box::new(Term::nat_lit(2)), Box::new(Term::nat_lit(3))),
            Term::Pow(
                Box::new(Term::RatLit(crate::rat::rat(3, 4))),
                Box::new(Term::Sub(
                    Box::new(Term::nat_lit(1)),
                    Box::new(Term::nat_lit(3)),
                )),
            ),
        ];
        for e in exprs {
            let n1 = normalize_expr(&c, &e);
            let n2 = normalize_expr(&c, &n1);
            assert_eq!(n1, n2, "normalize not idempotent on {e:?}");
        }
    }
}
