//! Lexer and recursive-descent parser for `.hop` program files.
//!
//! A program file is a header (locations, arrays, value domain, distribution
//! and adversary declarations, named assertion expressions) followed by
//! `def` items. Syntactic sugar is desugared here:
//!
//!   - `x = t; u`       →  `let x = unit t in u`
//!   - `l := t` (final) →  `let _ = unit * in write l t`
//!   - `l := t; u`      →  `let _ = write l t in u`
//!   - `t; u`           →  `let _ = t in u`
//!   - `inc l`          →  `let y = read l in match y {…saturating writes…}`
//!   - `L[e]` access    →  `match e { i => read/write L[i] … }` (literal
//!                         indices resolve directly to the cell)
//!   - `t == u`, `t != u` → bounded-nat match trees with boolean leaves

use crate::config::{Def, DistKind, Program, ProgramConfig};
use crate::syntax::ast::*;
use crate::syntax::sexpr;
use crate::syntax::subst::Subst;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

type PResult<T> = Result<T, ParseError>;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(u64),
    Semi,
    Colon,
    Comma,
    Dot,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Eq,
    EqEq,
    NotEq,
    Assign,
    Arrow,
    FatArrow,
    Star,
    Pipe,
    Underscore,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "'{s}'"),
            Tok::Num(n) => return write!(f, "'{n}'"),
            Tok::Semi => "';'",
            Tok::Colon => "':'",
            Tok::Comma => "','",
            Tok::Dot => "'.'",
            Tok::LParen => "'('",
            Tok::RParen => "')'",
            Tok::LBracket => "'['",
            Tok::RBracket => "']'",
            Tok::LBrace => "'{'",
            Tok::RBrace => "'}'",
            Tok::Eq => "'='",
            Tok::EqEq => "'=='",
            Tok::NotEq => "'!='",
            Tok::Assign => "':='",
            Tok::Arrow => "'->'",
            Tok::FatArrow => "'=>'",
            Tok::Star => "'*'",
            Tok::Pipe => "'|'",
            Tok::Underscore => "'_'",
            Tok::Eof => "end of input",
        };
        write!(f, "{s}")
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.pos).copied();
        if let Some(c) = c {
            self.pos += 1;
            if c == b'\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn tokens(mut self) -> PResult<Vec<(Tok, usize, usize)>> {
        let mut out = Vec::new();
        loop {
            loop {
                match self.peek() {
                    Some(c) if c.is_ascii_whitespace() => {
                        self.bump();
                    }
                    Some(b'#') => {
                        while let Some(c) = self.peek() {
                            if c == b'\n' {
                                break;
                            }
                            self.bump();
                        }
                    }
                    _ => break,
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else {
                out.push((Tok::Eof, line, col));
                return Ok(out);
            };
            let tok = match c {
                b';' => {
                    self.bump();
                    Tok::Semi
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b'.' => {
                    self.bump();
                    Tok::Dot
                }
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b'[' => {
                    self.bump();
                    Tok::LBracket
                }
                b']' => {
                    self.bump();
                    Tok::RBracket
                }
                b'{' => {
                    self.bump();
                    Tok::LBrace
                }
                b'}' => {
                    self.bump();
                    Tok::RBrace
                }
                b'|' => {
                    self.bump();
                    Tok::Pipe
                }
                b'*' => {
                    self.bump();
                    Tok::Star
                }
                b'=' => {
                    self.bump();
                    match self.peek() {
                        Some(b'=') => {
                            self.bump();
                            Tok::EqEq
                        }
                        Some(b'>') => {
                            self.bump();
                            Tok::FatArrow
                        }
                        _ => Tok::Eq,
                    }
                }
                b'!' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::NotEq
                    } else {
                        return Err(self.error("expected '=' after '!'"));
                    }
                }
                b':' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Assign
                    } else {
                        Tok::Colon
                    }
                }
                b'-' => {
                    if self.peek2() == Some(b'>') {
                        self.bump();
                        self.bump();
                        Tok::Arrow
                    } else {
                        return Err(self.error("unexpected '-'"));
                    }
                }
                b'_' if !matches!(self.peek2(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') =>
                {
                    self.bump();
                    Tok::Underscore
                }
                c if c.is_ascii_digit() => {
                    let mut n: u64 = 0;
                    while let Some(d) = self.peek() {
                        if d.is_ascii_digit() {
                            n = n
                                .checked_mul(10)
                                .and_then(|n| n.checked_add((d - b'0') as u64))
                                .ok_or_else(|| self.error("numeral too large"))?;
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Num(n)
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let mut s = String::new();
                    while let Some(d) = self.peek() {
                        if d.is_ascii_alphanumeric() || d == b'_' {
                            s.push(d as char);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Ident(s)
                }
                other => {
                    return Err(self.error(format!("unexpected character '{}'", other as char)))
                }
            };
            out.push((tok, line, col));
        }
    }
}

enum Stmt {
    PureBind(String, Term),
    Assign(Term),
    Expr(Term),
}

enum LValue {
    Loc(LocId),
    Cell(ArrayId, Term),
}

const KEYWORDS: &[&str] = &[
    "locations", "array", "values", "dist", "adversary", "qatom", "def", "let", "in", "unit",
    "read", "write", "skip", "sample", "if", "then", "else", "match", "mfold", "fun", "forall",
    "inc", "true", "false", "fst", "snd", "S", "T", "nat", "bool", "val", "mem",
];

/// Keywords that can begin a term.
const TERM_HEAD_KEYWORDS: &[&str] = &[
    "let", "unit", "read", "write", "skip", "sample", "if", "match", "mfold", "fun", "inc",
    "true", "false", "fst", "snd", "S",
];

pub struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    pub cfg: ProgramConfig,
    region_scope: Vec<Ident>,
    defs: Vec<Def>,
    fresh: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    fn here(&self) -> (usize, usize) {
        let (_, l, c) = self.toks[self.pos];
        (l, c)
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {t}, found {}", self.peek())))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{kw}', found {}", self.peek())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {other}"))),
        }
    }

    fn binder(&mut self) -> PResult<String> {
        if *self.peek() == Tok::Underscore {
            self.bump();
            return Ok("_".to_string());
        }
        let name = self.ident()?;
        if special::is_special(&name) {
            return Err(self.error(format!("'{name}' is reserved for assertions")));
        }
        if KEYWORDS.contains(&name.as_str()) {
            return Err(self.error(format!("'{name}' is a keyword")));
        }
        Ok(name)
    }

    fn num(&mut self) -> PResult<u64> {
        match *self.peek() {
            Tok::Num(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.error(format!("expected number, found {}", self.peek()))),
        }
    }

    fn fresh_var(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{base}{}", self.fresh)
    }

    // ---------------------------------------------------------------
    // header
    // ---------------------------------------------------------------

    fn header_item(&mut self) -> PResult<bool> {
        if self.eat_kw("locations") {
            while let Tok::Ident(name) = self.peek().clone() {
                self.bump();
                if self.cfg.loc_id(&name).is_some() {
                    return Err(self.error(format!("duplicate location '{name}'")));
                }
                self.cfg.add_loc(&name);
            }
            self.expect(Tok::Semi)?;
            Ok(true)
        } else if self.eat_kw("array") {
            let name = self.ident()?;
            self.expect(Tok::Colon)?;
            let len = self.num()?;
            if len == 0 {
                return Err(self.error("array length must be positive"));
            }
            if self.cfg.array_id(&name).is_some() || self.cfg.loc_id(&name).is_some() {
                return Err(self.error(format!("duplicate array '{name}'")));
            }
            self.cfg.add_array(&name, len);
            self.expect(Tok::Semi)?;
            Ok(true)
        } else if self.eat_kw("values") {
            self.expect_kw("nat")?;
            let n = self.num()?;
            self.cfg.value_count = n;
            self.expect(Tok::Semi)?;
            Ok(true)
        } else if self.eat_kw("dist") {
            let name = self.ident()?;
            self.expect(Tok::Colon)?;
            let kind = self.ident()?;
            let kind = match kind.as_str() {
                "uniform" => DistKind::Uniform,
                "uniform_excluding" => DistKind::UniformExcluding,
                other => return Err(self.error(format!("unknown distribution kind '{other}'"))),
            };
            self.cfg.dists.insert(name, kind);
            self.expect(Tok::Semi)?;
            Ok(true)
        } else if self.eat_kw("adversary") {
            let name = self.ident()?;
            self.expect(Tok::Colon)?;
            let ty = self.type_expr()?;
            self.cfg.adversaries.insert(name, ty);
            self.expect(Tok::Semi)?;
            Ok(true)
        } else if self.eat_kw("qatom") {
            let name = self.ident()?;
            self.expect(Tok::LParen)?;
            let mut params = vec![self.ident()?];
            while *self.peek() == Tok::Comma {
                self.bump();
                params.push(self.ident()?);
            }
            self.expect(Tok::RParen)?;
            self.expect(Tok::Eq)?;
            let body = self.sexpr_island()?;
            let expr = sexpr::parse_expr_str(&body, &self.cfg)
                .map_err(|e| self.error(format!("in qatom body: {e}")))?;
            self.cfg.qatoms.insert(name, (params, expr));
            self.expect(Tok::Semi)?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Reassemble an S-expression from the token stream up to a `;` at paren
    /// depth zero (qatom bodies). Arithmetic uses the word forms `add`,
    /// `sub`, `mul`, `pow`, `rat` here since the `.hop` lexer has no `-`/`/`.
    fn sexpr_island(&mut self) -> PResult<String> {
        let mut depth = 0usize;
        let mut parts: Vec<String> = Vec::new();
        loop {
            if depth == 0 && *self.peek() == Tok::Semi {
                break;
            }
            match self.peek().clone() {
                Tok::LParen => {
                    depth += 1;
                    parts.push("(".into());
                    self.bump();
                }
                Tok::RParen => {
                    if depth == 0 {
                        return Err(self.error("unbalanced ')' in expression"));
                    }
                    depth -= 1;
                    parts.push(")".into());
                    self.bump();
                }
                Tok::Eof => return Err(self.error("unexpected end of file in expression")),
                Tok::Ident(s) => {
                    parts.push(s);
                    self.bump();
                }
                Tok::Num(n) => {
                    parts.push(n.to_string());
                    self.bump();
                }
                Tok::Star => {
                    parts.push("*".into());
                    self.bump();
                }
                Tok::Eq => {
                    parts.push("=".into());
                    self.bump();
                }
                Tok::NotEq => {
                    parts.push("!=".into());
                    self.bump();
                }
                Tok::Underscore => {
                    parts.push("_".into());
                    self.bump();
                }
                other => return Err(self.error(format!("unexpected {other} in expression"))),
            }
        }
        Ok(parts.join(" "))
    }

    // ---------------------------------------------------------------
    // types
    // ---------------------------------------------------------------

    pub fn type_expr(&mut self) -> PResult<Type> {
        if self.eat_kw("forall") {
            let v = self.binder()?;
            self.expect(Tok::Dot)?;
            self.region_scope.push(v.clone());
            let inner = self.type_expr()?;
            self.region_scope.pop();
            return Ok(Type::Forall(v, Box::new(inner)));
        }
        let lhs = self.type_prod()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.type_expr()?;
            Ok(Type::arrow(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn type_prod(&mut self) -> PResult<Type> {
        let lhs = self.type_atom()?;
        if *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.type_prod()?;
            Ok(Type::Prod(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn type_atom(&mut self) -> PResult<Type> {
        if *self.peek() == Tok::LParen {
            self.bump();
            let t = self.type_expr()?;
            self.expect(Tok::RParen)?;
            return Ok(t);
        }
        if self.eat_kw("bool") {
            return Ok(Type::Bool);
        }
        if self.eat_kw("unit") {
            return Ok(Type::Unit);
        }
        if self.eat_kw("val") {
            return Ok(Type::Val);
        }
        if self.eat_kw("mem") {
            return Ok(Type::Mem);
        }
        if self.eat_kw("nat") {
            self.expect(Tok::LBracket)?;
            let bound = if self.eat_kw("inf") {
                None
            } else {
                Some(self.num()?)
            };
            self.expect(Tok::RBracket)?;
            return Ok(Type::Nat(bound));
        }
        if self.eat_kw("T") {
            self.expect(Tok::LBracket)?;
            let eff = self.effect_items()?;
            self.expect(Tok::Semi)?;
            let k = self.num()?;
            self.expect(Tok::RBracket)?;
            let inner = self.type_atom()?;
            return Ok(Type::monadic(eff, k, inner));
        }
        match self.peek().clone() {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                Ok(Type::Base(name))
            }
            other => Err(self.error(format!("expected a type, found {other}"))),
        }
    }

    fn effect_items(&mut self) -> PResult<Effect> {
        let mut eff = Effect::empty();
        if *self.peek() == Tok::Semi {
            return Ok(eff);
        }
        loop {
            let name = self.ident()?;
            self.add_effect_item(&mut eff, &name)?;
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        Ok(eff)
    }

    fn add_effect_item(&mut self, eff: &mut Effect, name: &str) -> PResult<()> {
        if let Some(l) = self.cfg.loc_id(name) {
            eff.locs.insert(l);
        } else if let Some(a) = self.cfg.array_id(name) {
            eff.locs.extend(self.cfg.array(a).cells.iter().copied());
        } else if self.region_scope.iter().any(|v| v == name) {
            eff.vars.insert(name.to_string());
        } else {
            return Err(self.error(format!(
                "unknown location, array or region variable '{name}'"
            )));
        }
        Ok(())
    }

    // ---------------------------------------------------------------
    // terms
    // ---------------------------------------------------------------

    fn lvalue(&mut self) -> PResult<LValue> {
        let name = self.ident()?;
        if let Some(arr) = self.cfg.array_id(&name) {
            self.expect(Tok::LBracket)?;
            let idx = self.stmt_seq()?;
            self.expect(Tok::RBracket)?;
            Ok(LValue::Cell(arr, idx))
        } else if let Some(l) = self.cfg.loc_id(&name) {
            Ok(LValue::Loc(l))
        } else {
            Err(self.error(format!("unknown location or array '{name}'")))
        }
    }

    pub fn term(&mut self) -> PResult<Term> {
        self.stmt_seq()
    }

    fn stmt_seq(&mut self) -> PResult<Term> {
        let first = self.stmt()?;
        if *self.peek() == Tok::Semi
            && !matches!(self.peek2(), Tok::Eof | Tok::RParen | Tok::RBrace)
        {
            self.bump();
            let rest = self.stmt_seq()?;
            return Ok(match first {
                Stmt::PureBind(x, t) => Term::LetM(x, Box::new(Term::unit_m(t)), Box::new(rest)),
                Stmt::Assign(t) | Stmt::Expr(t) => Term::let_m("_", t, rest),
            });
        }
        match first {
            Stmt::PureBind(_, _) => Err(self.error("binding must be followed by ';' and a body")),
            Stmt::Assign(t) => Ok(Term::LetM(
                "_".into(),
                Box::new(Term::unit_m(Term::Star)),
                Box::new(t),
            )),
            Stmt::Expr(t) => Ok(t),
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        if let (Tok::Ident(name), Tok::Eq) = (self.peek().clone(), self.peek2().clone()) {
            if !KEYWORDS.contains(&name.as_str()) && !special::is_special(&name) {
                self.bump();
                self.bump();
                let t = self.eq_term()?;
                return Ok(Stmt::PureBind(name, t));
            }
        }
        if let Tok::Ident(name) = self.peek().clone() {
            if self.cfg.loc_id(&name).is_some() || self.cfg.array_id(&name).is_some() {
                let save = self.pos;
                if let Ok(lv) = self.lvalue() {
                    if *self.peek() == Tok::Assign {
                        self.bump();
                        let t = self.eq_term()?;
                        let write = self.build_write(lv, t);
                        return Ok(Stmt::Assign(write));
                    }
                }
                self.pos = save;
            }
        }
        Ok(Stmt::Expr(self.bind_term()?))
    }

    fn build_write(&mut self, lv: LValue, t: Term) -> Term {
        match lv {
            LValue::Loc(l) => Term::Write(l, Box::new(t)),
            LValue::Cell(arr, idx) => self.build_cell_write(arr, idx, t),
        }
    }

    fn build_cell_write(&mut self, arr: ArrayId, idx: Term, val: Term) -> Term {
        let cells = self.cfg.array(arr).cells.clone();
        if let Some(n) = idx.as_nat_lit() {
            if (n as usize) < cells.len() {
                return Term::Write(cells[n as usize], Box::new(val));
            }
        }
        let arms = cells
            .iter()
            .map(|c| Term::Write(*c, Box::new(val.clone())))
            .collect();
        Term::CaseNat(Box::new(idx), arms, None)
    }

    fn build_cell_read(&mut self, arr: ArrayId, idx: Term) -> Term {
        let cells = self.cfg.array(arr).cells.clone();
        if let Some(n) = idx.as_nat_lit() {
            if (n as usize) < cells.len() {
                return Term::Read(cells[n as usize]);
            }
        }
        let arms = cells.iter().map(|c| Term::Read(*c)).collect();
        Term::CaseNat(Box::new(idx), arms, None)
    }

    fn bind_term(&mut self) -> PResult<Term> {
        if self.eat_kw("let") {
            let x = self.binder()?;
            self.expect(Tok::Eq)?;
            let t = self.term_no_seq()?;
            self.expect_kw("in")?;
            let u = self.stmt_seq()?;
            return Ok(Term::LetM(x, Box::new(t), Box::new(u)));
        }
        if self.eat_kw("fun") {
            let x = self.binder()?;
            self.expect(Tok::Colon)?;
            let ty = self.type_expr()?;
            self.expect(Tok::FatArrow)?;
            let body = self.stmt_seq()?;
            return Ok(Term::Lam(x, ty, Box::new(body)));
        }
        if self.eat_kw("if") {
            let b = self.eq_term()?;
            self.expect_kw("then")?;
            let t1 = self.term_no_seq()?;
            self.expect_kw("else")?;
            let t2 = self.term_no_seq()?;
            return Ok(Term::Case(Box::new(b), Box::new(t1), Box::new(t2)));
        }
        self.eq_term()
    }

    /// A term that stops at a statement-level `;`; braces allow sequencing.
    fn term_no_seq(&mut self) -> PResult<Term> {
        if *self.peek() == Tok::LBrace {
            self.bump();
            let t = self.stmt_seq()?;
            self.expect(Tok::RBrace)?;
            return Ok(t);
        }
        self.bind_term()
    }

    fn eq_term(&mut self) -> PResult<Term> {
        let lhs = self.app_term()?;
        match self.peek().clone() {
            Tok::EqEq => {
                self.bump();
                let rhs = self.app_term()?;
                Ok(self.build_eq(lhs, rhs, true))
            }
            Tok::NotEq => {
                self.bump();
                let rhs = self.app_term()?;
                Ok(self.build_eq(lhs, rhs, false))
            }
            _ => Ok(lhs),
        }
    }

    fn build_eq(&mut self, lhs: Term, rhs: Term, positive: bool) -> Term {
        desugar_eq(&self.cfg, lhs, rhs, positive)
    }

    fn app_term(&mut self) -> PResult<Term> {
        if self.eat_kw("unit") {
            let t = self.atom()?;
            return Ok(Term::unit_m(t));
        }
        if self.eat_kw("read") {
            let lv = self.lvalue()?;
            return Ok(match lv {
                LValue::Loc(l) => Term::Read(l),
                LValue::Cell(arr, idx) => self.build_cell_read(arr, idx),
            });
        }
        if self.eat_kw("write") {
            let lv = self.lvalue()?;
            let t = self.atom()?;
            return Ok(self.build_write(lv, t));
        }
        if self.eat_kw("sample") {
            let name = self.ident()?;
            if !self.cfg.dists.contains_key(&name) {
                return Err(self.error(format!("unknown distribution symbol '{name}'")));
            }
            self.expect(Tok::LParen)?;
            let mut args = Vec::new();
            if *self.peek() != Tok::RParen {
                args.push(self.stmt_seq()?);
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.stmt_seq()?);
                }
            }
            self.expect(Tok::RParen)?;
            return Ok(Term::Sample(name, args));
        }
        if self.eat_kw("inc") {
            let lv = self.lvalue()?;
            return Ok(self.build_inc(lv));
        }
        if self.eat_kw("mfold") {
            let n = self.atom()?;
            let t1 = self.atom()?;
            let t2 = self.atom()?;
            return Ok(Term::MFold(Box::new(n), Box::new(t1), Box::new(t2)));
        }
        if self.eat_kw("S") {
            let t = self.atom()?;
            return Ok(Term::Succ(Box::new(t)));
        }
        if self.is_kw("fst") || self.is_kw("snd") {
            let first = self.eat_kw("fst");
            if !first {
                self.bump();
            }
            let t = self.atom()?;
            return Ok(if first {
                Term::Proj1(Box::new(t))
            } else {
                Term::Proj2(Box::new(t))
            });
        }
        if self.eat_kw("match") {
            let s = self.atom()?;
            self.expect(Tok::LBrace)?;
            let mut arms: Vec<(Option<u64>, Term)> = Vec::new();
            loop {
                let key = if *self.peek() == Tok::Underscore {
                    self.bump();
                    None
                } else {
                    Some(self.num()?)
                };
                self.expect(Tok::FatArrow)?;
                let body = self.term_no_seq()?;
                arms.push((key, body));
                if *self.peek() == Tok::Pipe {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(Tok::RBrace)?;
            let mut default = None;
            let mut indexed = Vec::new();
            for (key, body) in arms {
                match key {
                    Some(n) => {
                        if n as usize != indexed.len() {
                            return Err(self.error("match arms must cover 0,1,2,… in order"));
                        }
                        indexed.push(body);
                    }
                    None => default = Some(Box::new(body)),
                }
            }
            if indexed.is_empty() && default.is_none() {
                return Err(self.error("match needs at least one arm"));
            }
            return Ok(Term::CaseNat(Box::new(s), indexed, default));
        }
        if self.eat_kw("true") {
            return Ok(Term::True);
        }
        if self.eat_kw("false") {
            return Ok(Term::False);
        }
        if self.eat_kw("skip") {
            return Ok(Term::Skip);
        }
        // plain application chain
        let mut t = self.atom()?;
        loop {
            match self.peek() {
                Tok::Ident(name)
                    if !KEYWORDS.contains(&name.as_str())
                        || matches!(name.as_str(), "true" | "false" | "skip") =>
                {
                    let a = self.atom()?;
                    t = Term::app(t, a);
                }
                Tok::Num(_) | Tok::LParen | Tok::Star => {
                    let a = self.atom()?;
                    t = Term::app(t, a);
                }
                _ => break,
            }
        }
        Ok(t)
    }

    fn build_inc(&mut self, lv: LValue) -> Term {
        let v = self.cfg.value_count;
        let y = self.fresh_var("y");
        let (read, cells_for_write): (Term, Vec<LocId>) = match &lv {
            LValue::Loc(l) => (Term::Read(*l), vec![*l]),
            LValue::Cell(arr, idx) => {
                let r = self.build_cell_read(*arr, idx.clone());
                (r, self.cfg.array(*arr).cells.clone())
            }
        };
        let write_value = |t: Term| -> Term {
            match &lv {
                LValue::Loc(l) => Term::Write(*l, Box::new(t)),
                LValue::Cell(_, idx) => {
                    if let Some(n) = idx.as_nat_lit() {
                        if (n as usize) < cells_for_write.len() {
                            return Term::Write(cells_for_write[n as usize], Box::new(t));
                        }
                    }
                    let arms = cells_for_write
                        .iter()
                        .map(|c| Term::Write(*c, Box::new(t.clone())))
                        .collect();
                    Term::CaseNat(Box::new(idx.clone()), arms, None)
                }
            }
        };
        let arms = (0..v)
            .map(|i| write_value(Term::nat_lit((i + 1).min(v - 1))))
            .collect();
        Term::LetM(
            y.clone(),
            Box::new(read),
            Box::new(Term::CaseNat(Box::new(Term::var(&y)), arms, None)),
        )
    }

    fn atom(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Star => {
                self.bump();
                Ok(Term::Star)
            }
            Tok::Num(n) => {
                self.bump();
                Ok(Term::nat_lit(n))
            }
            Tok::LParen => {
                self.bump();
                if *self.peek() == Tok::RParen {
                    self.bump();
                    return Ok(Term::Star);
                }
                let t = self.stmt_seq()?;
                if *self.peek() == Tok::Comma {
                    self.bump();
                    let u = self.stmt_seq()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Term::Pair(Box::new(t), Box::new(u)));
                }
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::LBrace => {
                self.bump();
                let t = self.stmt_seq()?;
                self.expect(Tok::RBrace)?;
                Ok(t)
            }
            Tok::Ident(name) => {
                if TERM_HEAD_KEYWORDS.contains(&name.as_str()) {
                    return self.bind_term();
                }
                if KEYWORDS.contains(&name.as_str()) {
                    return Err(self.error(format!("expected a term, found '{name}'")));
                }
                self.bump();
                if let Some(def) = self.defs.iter().find(|d| d.name == name) {
                    return Ok(def.body.clone());
                }
                if self.cfg.adversaries.contains_key(&name) {
                    return Ok(Term::AdvVar(name));
                }
                if self.cfg.loc_id(&name).is_some() {
                    return Err(self.error(format!(
                        "location '{name}' used as a value (use 'read {name}')"
                    )));
                }
                if let Some(arr) = self.cfg.array_id(&name) {
                    self.expect(Tok::LBracket)?;
                    let idx = self.stmt_seq()?;
                    self.expect(Tok::RBracket)?;
                    return Ok(self.build_cell_read(arr, idx));
                }
                Ok(Term::Var(name))
            }
            other => Err(self.error(format!("expected a term, found {other}"))),
        }
    }

    // ---------------------------------------------------------------
    // defs / program
    // ---------------------------------------------------------------

    fn def_item(&mut self) -> PResult<Def> {
        self.expect_kw("def")?;
        let name = self.binder()?;
        if self.defs.iter().any(|d| d.name == name) {
            return Err(self.error(format!("duplicate def '{name}'")));
        }
        let mut params: Vec<(String, Type)> = Vec::new();
        while *self.peek() == Tok::LParen {
            self.bump();
            let x = self.binder()?;
            self.expect(Tok::Colon)?;
            let ty = self.type_expr()?;
            self.expect(Tok::RParen)?;
            params.push((x, ty));
        }
        self.expect(Tok::Colon)?;
        let result_ty = self.type_expr()?;
        self.expect(Tok::Eq)?;
        let body = self.term()?;
        let mut term = body;
        let mut ty = result_ty;
        for (x, pty) in params.into_iter().rev() {
            ty = Type::arrow(pty.clone(), ty);
            term = Term::Lam(x, pty, Box::new(term));
        }
        Ok(Def {
            name,
            ty,
            body: term,
        })
    }

    /// Pre-scan the current def's tokens for `forall` binders so that region
    /// variables may appear in parameter annotations before the result type.
    fn prescan_region_vars(&self) -> Vec<String> {
        let mut vars = Vec::new();
        let mut i = self.pos + 1;
        while i + 1 < self.toks.len() {
            match &self.toks[i].0 {
                Tok::Ident(s) if s == "def" => break,
                Tok::Ident(s) if s == "forall" => {
                    if let Tok::Ident(v) = &self.toks[i + 1].0 {
                        vars.push(v.clone());
                    }
                }
                _ => {}
            }
            i += 1;
        }
        vars
    }
}

fn eq_literal(scrutinee: Term, n: u64, yes: Term, no: Term) -> Term {
    let mut arms = vec![no.clone(); n as usize];
    arms.push(yes);
    Term::CaseNat(Box::new(scrutinee), arms, Some(Box::new(no)))
}

/// Term-level equality test over bounded naturals: a match tree with
/// boolean leaves (`t == u` / `t != u` in the surface syntax, `eqv`/`nev`
/// in S-expressions).
pub fn desugar_eq(cfg: &ProgramConfig, lhs: Term, rhs: Term, positive: bool) -> Term {
    let yes = if positive { Term::True } else { Term::False };
    let no = if positive { Term::False } else { Term::True };
    match (lhs.as_nat_lit(), rhs.as_nat_lit()) {
        (_, Some(n)) => eq_literal(lhs, n, yes, no),
        (Some(n), _) => eq_literal(rhs, n, yes, no),
        _ => {
            let v = cfg.value_count;
            let arms = (0..v)
                .map(|j| eq_literal(lhs.clone(), j, yes.clone(), no.clone()))
                .collect();
            Term::CaseNat(Box::new(rhs), arms, Some(Box::new(no)))
        }
    }
}

/// Parse a whole `.hop` program file.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        cfg: ProgramConfig::new(),
        region_scope: Vec::new(),
        defs: Vec::new(),
        fresh: 0,
    };
    while p.header_item()? {}
    p.cfg
        .validate()
        .map_err(|e| p.error(format!("invalid configuration: {e}")))?;
    while p.is_kw("def") {
        let rvs = p.prescan_region_vars();
        let depth = p.region_scope.len();
        p.region_scope.extend(rvs);
        let def = p.def_item()?;
        p.region_scope.truncate(depth);
        p.defs.push(def);
    }
    if *p.peek() != Tok::Eof {
        return Err(p.error(format!("unexpected {}", p.peek())));
    }
    Ok(Program {
        config: p.cfg,
        defs: p.defs,
    })
}

/// Parse a single term against an existing configuration; definitions from
/// `defs` are in scope and inline. Unknown identifiers inside effect
/// brackets resolve as region variables.
pub fn parse_term_with(cfg: &ProgramConfig, defs: &[Def], text: &str) -> Result<Term, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut vars = Vec::new();
    for (t, _, _) in &toks {
        if let Tok::Ident(s) = t {
            if cfg.loc_id(s).is_none()
                && cfg.array_id(s).is_none()
                && !KEYWORDS.contains(&s.as_str())
            {
                vars.push(s.clone());
            }
        }
    }
    let mut p = Parser {
        toks,
        pos: 0,
        cfg: cfg.clone(),
        region_scope: vars,
        defs: defs.to_vec(),
        fresh: 0,
    };
    let t = p.term()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error(format!("unexpected {}", p.peek())));
    }
    Ok(t)
}

/// Parse a type against an existing configuration. Unknown identifiers in
/// effect positions are treated as region variables.
pub fn parse_type_with(cfg: &ProgramConfig, text: &str) -> Result<Type, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut vars = Vec::new();
    for (t, _, _) in &toks {
        if let Tok::Ident(s) = t {
            if cfg.loc_id(s).is_none()
                && cfg.array_id(s).is_none()
                && !KEYWORDS.contains(&s.as_str())
            {
                vars.push(s.clone());
            }
        }
    }
    let mut p = Parser {
        toks,
        pos: 0,
        cfg: cfg.clone(),
        region_scope: vars,
        defs: Vec::new(),
        fresh: 0,
    };
    let t = p.type_expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error(format!("unexpected {}", p.peek())));
    }
    Ok(t)
}

/// Substitute def references inside terms parsed from S-expressions.
pub fn inline_defs(term: &Term, defs: &[Def]) -> Term {
    let mut subst = Subst::new();
    for d in defs {
        subst.insert(&d.name, d.body.clone());
    }
    subst.apply_term(term)
}
