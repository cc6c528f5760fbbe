//! A small S-expression reader plus converters into types, terms,
//! propositions and assertions. `.proof` scripts and qatom bodies use this
//! syntax.

use crate::config::ProgramConfig;
use crate::rat::parse_rat;
use crate::syntax::ast::*;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("sexpr: {0}")]
pub struct SexprError(pub String);

type SResult<T> = Result<T, SexprError>;

fn err<T>(msg: impl Into<String>) -> SResult<T> {
    Err(SexprError(msg.into()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum SExp {
    Atom(String),
    List(Vec<SExp>),
}

impl SExp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            SExp::Atom(s) => Some(s),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[SExp]> {
        match self {
            SExp::List(l) => Some(l),
            _ => None,
        }
    }

    /// `(head ...)` → the tail when the head matches.
    pub fn tagged(&self, head: &str) -> Option<&[SExp]> {
        match self {
            SExp::List(l) if !l.is_empty() && l[0].atom() == Some(head) => Some(&l[1..]),
            _ => None,
        }
    }

    pub fn head(&self) -> Option<&str> {
        match self {
            SExp::List(l) if !l.is_empty() => l[0].atom(),
            _ => None,
        }
    }
}

pub fn read_all(text: &str) -> SResult<Vec<SExp>> {
    let mut toks = tokenize(text)?;
    toks.reverse();
    let mut out = Vec::new();
    while !toks.is_empty() {
        out.push(read_one(&mut toks)?);
    }
    Ok(out)
}

pub fn read_single(text: &str) -> SResult<SExp> {
    let all = read_all(text)?;
    match all.len() {
        1 => Ok(all.into_iter().next().unwrap()),
        n => err(format!("expected one expression, found {n}")),
    }
}

fn tokenize(text: &str) -> SResult<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            ';' => {
                // comment to end of line
                for d in chars.by_ref() {
                    if d == '\n' {
                        break;
                    }
                }
            }
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

fn read_one(toks: &mut Vec<String>) -> SResult<SExp> {
    match toks.pop() {
        None => err("unexpected end of input"),
        Some(t) if t == "(" => {
            let mut items = Vec::new();
            loop {
                match toks.last().map(|s| s.as_str()) {
                    None => return err("missing ')'"),
                    Some(")") => {
                        toks.pop();
                        return Ok(SExp::List(items));
                    }
                    _ => items.push(read_one(toks)?),
                }
            }
        }
        Some(t) if t == ")" => err("unexpected ')'"),
        Some(t) => Ok(SExp::Atom(t)),
    }
}

// ---------------------------------------------------------------------------
// converters
// ---------------------------------------------------------------------------

pub fn parse_type(s: &SExp, cfg: &ProgramConfig) -> SResult<Type> {
    if let Some(a) = s.atom() {
        return match a {
            "unit" => Ok(Type::Unit),
            "bool" => Ok(Type::Bool),
            "val" => Ok(Type::Val),
            "mem" => Ok(Type::Mem),
            other => err(format!("unknown type '{other}'")),
        };
    }
    let l = s.list().unwrap();
    let head = s
        .head()
        .ok_or_else(|| SexprError("empty type form".into()))?;
    match head {
        "nat" => {
            if l.len() != 2 {
                return err("(nat K) expects one argument");
            }
            match l[1].atom() {
                Some("inf") => Ok(Type::Nat(None)),
                Some(n) => Ok(Type::Nat(Some(
                    n.parse().map_err(|_| SexprError("bad nat bound".into()))?,
                ))),
                None => err("bad nat bound"),
            }
        }
        "->" => {
            if l.len() != 3 {
                return err("(-> a b) expects two arguments");
            }
            Ok(Type::arrow(parse_type(&l[1], cfg)?, parse_type(&l[2], cfg)?))
        }
        "prod" => {
            if l.len() != 3 {
                return err("(prod a b) expects two arguments");
            }
            Ok(Type::Prod(
                Box::new(parse_type(&l[1], cfg)?),
                Box::new(parse_type(&l[2], cfg)?),
            ))
        }
        "T" => {
            if l.len() != 4 {
                return err("(T (eff ...) k τ) expects three arguments");
            }
            let eff_items = l[1]
                .tagged("eff")
                .ok_or_else(|| SexprError("expected (eff ...)".into()))?;
            let mut eff = Effect::empty();
            for item in eff_items {
                let name = item
                    .atom()
                    .ok_or_else(|| SexprError("effect items are names".into()))?;
                if let Some(loc) = cfg.loc_id(name) {
                    eff.locs.insert(loc);
                } else if let Some(arr) = cfg.array_id(name) {
                    eff.locs.extend(cfg.array(arr).cells.iter().copied());
                } else {
                    eff.vars.insert(name.to_string());
                }
            }
            let k = l[2]
                .atom()
                .and_then(|a| a.parse().ok())
                .ok_or_else(|| SexprError("bad cost".into()))?;
            Ok(Type::monadic(eff, k, parse_type(&l[3], cfg)?))
        }
        "forall" => {
            if l.len() != 3 {
                return err("(forall v τ) expects two arguments");
            }
            let v = l[1]
                .atom()
                .ok_or_else(|| SexprError("bad region variable".into()))?;
            Ok(Type::Forall(v.to_string(), Box::new(parse_type(&l[2], cfg)?)))
        }
        "base" => {
            if l.len() != 2 {
                return err("(base name) expects one argument");
            }
            Ok(Type::Base(l[1].atom().unwrap_or_default().to_string()))
        }
        other => err(format!("unknown type form '{other}'")),
    }
}

/// Parse a term / memory expression.
pub fn parse_expr(s: &SExp, cfg: &ProgramConfig) -> SResult<Term> {
    if let Some(a) = s.atom() {
        return match a {
            "star" => Ok(Term::Star),
            "skip" => Ok(Term::Skip),
            "true" => Ok(Term::True),
            "false" => Ok(Term::False),
            _ => {
                if let Ok(n) = a.parse::<u64>() {
                    return Ok(Term::nat_lit(n));
                }
                if a.contains('/') {
                    if let Some(q) = parse_rat(a) {
                        return Ok(Term::RatLit(q));
                    }
                }
                if cfg.adversaries.contains_key(a) {
                    return Ok(Term::AdvVar(a.to_string()));
                }
                Ok(Term::Var(a.to_string()))
            }
        };
    }
    let l = s.list().unwrap();
    let head = s
        .head()
        .ok_or_else(|| SexprError("empty expression form".into()))?;
    let args = &l[1..];
    let arity = |n: usize| -> SResult<()> {
        if args.len() == n {
            Ok(())
        } else {
            err(format!("'{head}' expects {n} argument(s), got {}", args.len()))
        }
    };
    match head {
        "adv" => {
            arity(1)?;
            Ok(Term::AdvVar(atom_of(&args[0])?.to_string()))
        }
        "succ" => {
            arity(1)?;
            Ok(Term::Succ(Box::new(parse_expr(&args[0], cfg)?)))
        }
        "fun" => {
            arity(2)?;
            let (x, ty) = binder_of(&args[0], cfg)?;
            Ok(Term::Lam(x, ty, Box::new(parse_expr(&args[1], cfg)?)))
        }
        "app" => {
            if args.len() < 2 {
                return err("(app f a ...) expects at least two arguments");
            }
            let mut t = parse_expr(&args[0], cfg)?;
            for a in &args[1..] {
                t = Term::app(t, parse_expr(a, cfg)?);
            }
            Ok(t)
        }
        "pair" => {
            arity(2)?;
            Ok(Term::Pair(
                Box::new(parse_expr(&args[0], cfg)?),
                Box::new(parse_expr(&args[1], cfg)?),
            ))
        }
        "fst" => {
            arity(1)?;
            Ok(Term::Proj1(Box::new(parse_expr(&args[0], cfg)?)))
        }
        "snd" => {
            arity(1)?;
            Ok(Term::Proj2(Box::new(parse_expr(&args[0], cfg)?)))
        }
        "if" => {
            arity(3)?;
            Ok(Term::Case(
                Box::new(parse_expr(&args[0], cfg)?),
                Box::new(parse_expr(&args[1], cfg)?),
                Box::new(parse_expr(&args[2], cfg)?),
            ))
        }
        "match" => {
            if args.len() < 2 {
                return err("(match e (arms ...) (default d)?)");
            }
            let scrut = parse_expr(&args[0], cfg)?;
            let arms_s = args[1]
                .tagged("arms")
                .ok_or_else(|| SexprError("expected (arms ...)".into()))?;
            let arms = arms_s
                .iter()
                .map(|a| parse_expr(a, cfg))
                .collect::<SResult<Vec<_>>>()?;
            let default = match args.get(2) {
                None => None,
                Some(d) => {
                    let inner = d
                        .tagged("default")
                        .ok_or_else(|| SexprError("expected (default d)".into()))?;
                    if inner.len() != 1 {
                        return err("(default d) expects one argument");
                    }
                    Some(Box::new(parse_expr(&inner[0], cfg)?))
                }
            };
            Ok(Term::CaseNat(Box::new(scrut), arms, default))
        }
        "read" => {
            arity(1)?;
            Ok(Term::Read(loc_of(&args[0], cfg)?))
        }
        "write" => {
            arity(2)?;
            Ok(Term::Write(
                loc_of(&args[0], cfg)?,
                Box::new(parse_expr(&args[1], cfg)?),
            ))
        }
        "unit" => {
            arity(1)?;
            Ok(Term::unit_m(parse_expr(&args[0], cfg)?))
        }
        "let" => {
            arity(3)?;
            let x = atom_of(&args[0])?;
            Ok(Term::LetM(
                x.to_string(),
                Box::new(parse_expr(&args[1], cfg)?),
                Box::new(parse_expr(&args[2], cfg)?),
            ))
        }
        "mfold" => {
            arity(3)?;
            Ok(Term::MFold(
                Box::new(parse_expr(&args[0], cfg)?),
                Box::new(parse_expr(&args[1], cfg)?),
                Box::new(parse_expr(&args[2], cfg)?),
            ))
        }
        "sample" => {
            if args.is_empty() {
                return err("(sample d args...)");
            }
            let d = atom_of(&args[0])?;
            if !cfg.dists.contains_key(d) {
                return err(format!("unknown distribution symbol '{d}'"));
            }
            let rest = args[1..]
                .iter()
                .map(|a| parse_expr(a, cfg))
                .collect::<SResult<Vec<_>>>()?;
            Ok(Term::Sample(d.to_string(), rest))
        }
        "at" => {
            arity(2)?;
            Ok(Term::Select(
                Box::new(parse_expr(&args[0], cfg)?),
                loc_of(&args[1], cfg)?,
            ))
        }
        "upd" => {
            arity(3)?;
            Ok(Term::Store(
                Box::new(parse_expr(&args[0], cfg)?),
                loc_of(&args[1], cfg)?,
                Box::new(parse_expr(&args[2], cfg)?),
            ))
        }
        "idx" => {
            arity(3)?;
            Ok(Term::SelArr(
                Box::new(parse_expr(&args[0], cfg)?),
                array_of(&args[1], cfg)?,
                Box::new(parse_expr(&args[2], cfg)?),
            ))
        }
        "card-dom" => {
            arity(2)?;
            Ok(Term::CardDom(
                Box::new(parse_expr(&args[0], cfg)?),
                array_of(&args[1], cfg)?,
            ))
        }
        "card-im" => {
            arity(2)?;
            Ok(Term::CardIm(
                Box::new(parse_expr(&args[0], cfg)?),
                array_of(&args[1], cfg)?,
            ))
        }
        "sum" => {
            arity(2)?;
            Ok(Term::SumArr(
                Box::new(parse_expr(&args[0], cfg)?),
                array_of(&args[1], cfg)?,
            ))
        }
        "+" | "add" => fold_arith(args, cfg, |a, b| Term::Add(Box::new(a), Box::new(b))),
        "-" | "sub" => {
            arity(2)?;
            Ok(Term::Sub(
                Box::new(parse_expr(&args[0], cfg)?),
                Box::new(parse_expr(&args[1], cfg)?),
            ))
        }
        "*" | "mul" => fold_arith(args, cfg, |a, b| Term::Mul(Box::new(a), Box::new(b))),
        "pow" => {
            arity(2)?;
            Ok(Term::Pow(
                Box::new(parse_expr(&args[0], cfg)?),
                Box::new(parse_expr(&args[1], cfg)?),
            ))
        }
        "rat" | "div" => {
            arity(2)?;
            let p = parse_expr(&args[0], cfg)?;
            let q = parse_expr(&args[1], cfg)?;
            match (p.as_nat_lit(), q.as_nat_lit()) {
                (Some(p), Some(q)) if q != 0 => {
                    Ok(Term::RatLit(crate::rat::rat(p as i64, q as i64)))
                }
                _ => err("(rat p q) expects numeral arguments with q ≠ 0"),
            }
        }
        "eqv" | "nev" => {
            arity(2)?;
            let lhs = parse_expr(&args[0], cfg)?;
            let rhs = parse_expr(&args[1], cfg)?;
            Ok(crate::syntax::parser::desugar_eq(cfg, lhs, rhs, head == "eqv"))
        }
        "count" => {
            arity(2)?;
            let (x, bound) = count_binder_of(&args[0])?;
            Ok(Term::Count(bound, x, Box::new(parse_prop(&args[1], cfg)?)))
        }
        "ivx" => {
            arity(1)?;
            Ok(Term::IvExpr(Box::new(parse_prop(&args[0], cfg)?)))
        }
        other => {
            // qatom application: (F arg...)
            if let Some((params, body)) = cfg.qatoms.get(other).cloned() {
                if args.len() != params.len() {
                    return err(format!(
                        "qatom '{other}' expects {} argument(s)",
                        params.len()
                    ));
                }
                let mut subst = crate::syntax::subst::Subst::new();
                for (p, a) in params.iter().zip(args) {
                    subst.insert(p, parse_expr(a, cfg)?);
                }
                return Ok(subst.apply_term(&body));
            }
            err(format!("unknown expression form '{other}'"))
        }
    }
}

fn fold_arith(
    args: &[SExp],
    cfg: &ProgramConfig,
    mk: impl Fn(Term, Term) -> Term,
) -> SResult<Term> {
    if args.len() < 2 {
        return err("arithmetic expects at least two arguments");
    }
    let mut out = parse_expr(&args[0], cfg)?;
    for a in &args[1..] {
        out = mk(out, parse_expr(a, cfg)?);
    }
    Ok(out)
}

fn atom_of(s: &SExp) -> SResult<&str> {
    s.atom().ok_or_else(|| SexprError("expected an atom".into()))
}

fn loc_of(s: &SExp, cfg: &ProgramConfig) -> SResult<LocId> {
    let name = atom_of(s)?;
    cfg.loc_id(name)
        .ok_or_else(|| SexprError(format!("unknown location '{name}'")))
}

fn array_of(s: &SExp, cfg: &ProgramConfig) -> SResult<ArrayId> {
    let name = atom_of(s)?;
    cfg.array_id(name)
        .ok_or_else(|| SexprError(format!("unknown array '{name}'")))
}

fn binder_of(s: &SExp, cfg: &ProgramConfig) -> SResult<(String, Type)> {
    let l = s
        .list()
        .ok_or_else(|| SexprError("expected (x type)".into()))?;
    if l.len() != 2 {
        return err("expected (x type)");
    }
    Ok((atom_of(&l[0])?.to_string(), parse_type(&l[1], cfg)?))
}

fn count_binder_of(s: &SExp) -> SResult<(String, u64)> {
    let l = s
        .list()
        .ok_or_else(|| SexprError("expected (x bound)".into()))?;
    if l.len() != 2 {
        return err("expected (x bound)");
    }
    let bound = atom_of(&l[1])?
        .parse()
        .map_err(|_| SexprError("bad count bound".into()))?;
    Ok((atom_of(&l[0])?.to_string(), bound))
}

pub fn parse_prop(s: &SExp, cfg: &ProgramConfig) -> SResult<Prop> {
    if let Some(a) = s.atom() {
        return match a {
            "true" => Ok(Prop::True),
            "false" => Ok(Prop::False),
            other => err(format!("unknown proposition '{other}'")),
        };
    }
    let l = s.list().unwrap();
    let head = s
        .head()
        .ok_or_else(|| SexprError("empty proposition form".into()))?;
    let args = &l[1..];
    let cmp = |op: CmpOp| -> SResult<Prop> {
        if args.len() != 2 {
            return err(format!("'{head}' expects two arguments"));
        }
        Ok(Prop::Cmp(
            op,
            Box::new(parse_expr(&args[0], cfg)?),
            Box::new(parse_expr(&args[1], cfg)?),
        ))
    };
    match head {
        "=" | "==" => cmp(CmpOp::Eq),
        "!=" | "ne" => cmp(CmpOp::Ne),
        "<=" | "le" => cmp(CmpOp::Le),
        "<" | "lt" => cmp(CmpOp::Lt),
        "in" => {
            if args.len() != 2 {
                return err("(in e (set ...)) expects two arguments");
            }
            let e = parse_expr(&args[0], cfg)?;
            let items = args[1]
                .tagged("set")
                .ok_or_else(|| SexprError("expected (set n ...)".into()))?;
            let mut set = BTreeSet::new();
            for i in items {
                set.insert(
                    atom_of(i)?
                        .parse::<u64>()
                        .map_err(|_| SexprError("bad set element".into()))?,
                );
            }
            Ok(Prop::InSet(Box::new(e), set))
        }
        "in-dom" => {
            if args.len() != 3 {
                return err("(in-dom e m L)");
            }
            Ok(Prop::InDom(
                Box::new(parse_expr(&args[0], cfg)?),
                Box::new(parse_expr(&args[1], cfg)?),
                array_of(&args[2], cfg)?,
            ))
        }
        "in-im" => {
            if args.len() != 3 {
                return err("(in-im e m L)");
            }
            Ok(Prop::InIm(
                Box::new(parse_expr(&args[0], cfg)?),
                Box::new(parse_expr(&args[1], cfg)?),
                array_of(&args[2], cfg)?,
            ))
        }
        "and" | "or" | "imp" => {
            if args.len() < 2 {
                return err(format!("'{head}' expects at least two arguments"));
            }
            let mut props = args
                .iter()
                .map(|a| parse_prop(a, cfg))
                .collect::<SResult<Vec<_>>>()?;
            let mut out = props.pop().unwrap();
            while let Some(p) = props.pop() {
                out = match head {
                    "and" => Prop::And(Box::new(p), Box::new(out)),
                    "or" => Prop::Or(Box::new(p), Box::new(out)),
                    _ => Prop::Imp(Box::new(p), Box::new(out)),
                };
            }
            Ok(out)
        }
        "not" => {
            if args.len() != 1 {
                return err("(not p)");
            }
            Ok(Prop::Not(Box::new(parse_prop(&args[0], cfg)?)))
        }
        "all" | "ex" => {
            if args.len() != 2 {
                return err(format!("({head} (x type) p)"));
            }
            let (x, ty) = binder_of(&args[0], cfg)?;
            let body = parse_prop(&args[1], cfg)?;
            Ok(if head == "all" {
                Prop::Forall(x, ty, Box::new(body))
            } else {
                Prop::Exists(x, ty, Box::new(body))
            })
        }
        other => err(format!("unknown proposition form '{other}'")),
    }
}

pub fn parse_assertion(s: &SExp, cfg: &ProgramConfig) -> SResult<Assertion> {
    if let Some(a) = s.atom() {
        return match a {
            "top" => Ok(Assertion::Top),
            "bot" => Ok(Assertion::Bot),
            other => err(format!("unknown assertion '{other}'")),
        };
    }
    let l = s.list().unwrap();
    let head = s
        .head()
        .ok_or_else(|| SexprError("empty assertion form".into()))?;
    let args = &l[1..];
    match head {
        "qx" => {
            if args.len() != 1 {
                return err("(qx e)");
            }
            Ok(Assertion::q(parse_expr(&args[0], cfg)?))
        }
        "angle" => {
            if args.len() != 1 {
                return err("(angle p)");
            }
            Ok(Assertion::inj(parse_prop(&args[0], cfg)?))
        }
        "iv" => {
            if args.len() != 1 {
                return err("(iv p)");
            }
            Ok(Assertion::Iv(Box::new(parse_prop(&args[0], cfg)?)))
        }
        "meet" | "join" | "plus" => {
            if args.len() < 2 {
                return err(format!("'{head}' expects at least two arguments"));
            }
            let mut items = args
                .iter()
                .map(|a| parse_assertion(a, cfg))
                .collect::<SResult<Vec<_>>>()?;
            let mut out = items.pop().unwrap();
            while let Some(a) = items.pop() {
                out = match head {
                    "meet" => Assertion::meet(a, out),
                    "join" => Assertion::join(a, out),
                    _ => Assertion::Plus(Box::new(a), Box::new(out)),
                };
            }
            Ok(out)
        }
        "scale" => {
            if args.len() != 2 {
                return err("(scale q A)");
            }
            let q = atom_of(&args[0])?;
            let q = parse_rat(q).ok_or_else(|| SexprError("bad scale factor".into()))?;
            Ok(Assertion::Scale(q, Box::new(parse_assertion(&args[1], cfg)?)))
        }
        other => err(format!("unknown assertion form '{other}'")),
    }
}

pub fn parse_expr_str(text: &str, cfg: &ProgramConfig) -> SResult<Term> {
    parse_expr(&read_single(text)?, cfg)
}

pub fn parse_assertion_str(text: &str, cfg: &ProgramConfig) -> SResult<Assertion> {
    parse_assertion(&read_single(text)?, cfg)
}

pub fn parse_prop_str(text: &str, cfg: &ProgramConfig) -> SResult<Prop> {
    parse_prop(&read_single(text)?, cfg)
}

pub fn parse_type_str(text: &str, cfg: &ProgramConfig) -> SResult<Type> {
    parse_type(&read_single(text)?, cfg)
}

pub fn parse_term_str(text: &str, cfg: &ProgramConfig) -> SResult<Term> {
    parse_expr_str(text, cfg)
}
