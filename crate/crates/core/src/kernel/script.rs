//! Loading `.proof` scripts: an S-expression tree of rule applications.
//!
//! ```text
//! (proof
//!   (logic ubl)
//!   (goal (gamma (x (nat 7)) …)?
//!         (psi φ…)?
//!         (pre A) (term t) (type τ) (post A) (delta d))        ; unary
//!   ; or (left t) (type τ) (right u) (type2 σ) for quadruples
//!   (derivation (RULE (meta name sexp)… (ob label mode)… child…)))
//! ```

use super::{Judgment, ProofNode, RelJudgment, UnaryJudgment};
use crate::config::Program;
use crate::discharge::DischargeMode;
use crate::logics::LogicMode;
use crate::rat::{ExtRat, Rat};
use crate::syntax::ast::{Ident, Type};
use crate::syntax::parser::inline_defs;
use crate::syntax::sexpr::{self, SExp};
use num_traits::Zero;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("proof script: {0}")]
pub struct ScriptError(pub String);

type SResult<T> = Result<T, ScriptError>;

fn err<T>(msg: impl Into<String>) -> SResult<T> {
    Err(ScriptError(msg.into()))
}

pub struct ProofScript {
    pub mode: LogicMode,
    pub goal: Judgment,
    /// Declared conclusion type(s): left, and right for quadruples.
    pub goal_types: (Type, Option<Type>),
    pub root: ProofNode,
}

pub fn load_script(text: &str, program: &Program) -> SResult<ProofScript> {
    let top = sexpr::read_single(text).map_err(|e| ScriptError(e.to_string()))?;
    let items = top
        .tagged("proof")
        .ok_or_else(|| ScriptError("expected (proof ...)".into()))?;
    let mut mode = None;
    let mut goal = None;
    let mut derivation = None;
    for item in items {
        match item.head() {
            Some("logic") => {
                let name = item.tagged("logic").and_then(|l| l.first()).and_then(|s| s.atom());
                mode = name.and_then(LogicMode::parse);
                if mode.is_none() {
                    return err("bad (logic ubl|exp|rpl)");
                }
            }
            Some("goal") => goal = Some(item.tagged("goal").unwrap().to_vec()),
            Some("derivation") => {
                let d = item.tagged("derivation").unwrap();
                if d.len() != 1 {
                    return err("(derivation node) expects one node");
                }
                derivation = Some(parse_node(&d[0])?);
            }
            other => return err(format!("unknown proof section {other:?}")),
        }
    }
    let mode = mode.ok_or_else(|| ScriptError("missing (logic ...)".into()))?;
    let goal_items = goal.ok_or_else(|| ScriptError("missing (goal ...)".into()))?;
    let root = derivation.ok_or_else(|| ScriptError("missing (derivation ...)".into()))?;
    let (goal, goal_types) = parse_goal(&goal_items, mode, program)?;
    Ok(ProofScript {
        mode,
        goal,
        goal_types,
        root,
    })
}

fn parse_goal(
    items: &[SExp],
    mode: LogicMode,
    program: &Program,
) -> SResult<(Judgment, (Type, Option<Type>))> {
    let cfg = &program.config;
    let mut gamma: Vec<(Ident, Type)> = Vec::new();
    let mut psi = Vec::new();
    let mut pre = None;
    let mut post = None;
    let mut left = None;
    let mut right = None;
    let mut ty1 = None;
    let mut ty2 = None;
    let mut delta = None;
    let mut eps = Rat::zero();
    for item in items {
        let head = item
            .head()
            .ok_or_else(|| ScriptError("goal items are tagged lists".into()))?;
        let args = item.list().unwrap();
        let one = || -> SResult<&SExp> {
            if args.len() != 2 {
                return err(format!("({head} ...) expects one argument"));
            }
            Ok(&args[1])
        };
        match head {
            "gamma" => {
                for b in &args[1..] {
                    let l = b
                        .list()
                        .ok_or_else(|| ScriptError("gamma entries are (x type)".into()))?;
                    if l.len() != 2 {
                        return err("gamma entries are (x type)");
                    }
                    let x = l[0]
                        .atom()
                        .ok_or_else(|| ScriptError("bad gamma name".into()))?;
                    let ty = sexpr::parse_type(&l[1], cfg).map_err(|e| ScriptError(e.to_string()))?;
                    gamma.push((x.to_string(), ty));
                }
            }
            "psi" => {
                for p in &args[1..] {
                    psi.push(sexpr::parse_prop(p, cfg).map_err(|e| ScriptError(e.to_string()))?);
                }
            }
            "pre" => {
                pre = Some(
                    sexpr::parse_assertion(one()?, cfg).map_err(|e| ScriptError(e.to_string()))?,
                )
            }
            "post" => {
                post = Some(
                    sexpr::parse_assertion(one()?, cfg).map_err(|e| ScriptError(e.to_string()))?,
                )
            }
            "term" | "left" => {
                let t = sexpr::parse_expr(one()?, cfg).map_err(|e| ScriptError(e.to_string()))?;
                left = Some(inline_defs(&t, &program.defs));
            }
            "right" => {
                let t = sexpr::parse_expr(one()?, cfg).map_err(|e| ScriptError(e.to_string()))?;
                right = Some(inline_defs(&t, &program.defs));
            }
            "type" => {
                ty1 = Some(
                    sexpr::parse_type(one()?, cfg).map_err(|e| ScriptError(e.to_string()))?,
                )
            }
            "type2" => {
                ty2 = Some(
                    sexpr::parse_type(one()?, cfg).map_err(|e| ScriptError(e.to_string()))?,
                )
            }
            "delta" => {
                let a = one()?
                    .atom()
                    .and_then(ExtRat::parse)
                    .ok_or_else(|| ScriptError("bad delta".into()))?;
                delta = Some(a);
            }
            "eps" => {
                let a = one()?
                    .atom()
                    .and_then(crate::rat::parse_rat)
                    .ok_or_else(|| ScriptError("bad eps".into()))?;
                eps = a;
            }
            other => return err(format!("unknown goal item '{other}'")),
        }
    }
    let pre = pre.ok_or_else(|| ScriptError("goal missing (pre ...)".into()))?;
    let post = post.ok_or_else(|| ScriptError("goal missing (post ...)".into()))?;
    let left = left.ok_or_else(|| ScriptError("goal missing (term ...)".into()))?;
    let delta = delta.ok_or_else(|| ScriptError("goal missing (delta ...)".into()))?;
    let ty1 = ty1.ok_or_else(|| ScriptError("goal missing (type ...)".into()))?;
    if mode.is_relational() {
        let right = right.ok_or_else(|| ScriptError("relational goal missing (right ...)".into()))?;
        let ty2 = ty2.ok_or_else(|| ScriptError("relational goal missing (type2 ...)".into()))?;
        Ok((
            Judgment::Rel(RelJudgment {
                gamma,
                psi,
                pre,
                left,
                right,
                post,
                eps,
                delta,
            }),
            (ty1, Some(ty2)),
        ))
    } else {
        if right.is_some() {
            return err("unary goal has a (right ...) term");
        }
        Ok((
            Judgment::Unary(UnaryJudgment {
                gamma,
                psi,
                pre,
                term: left,
                post,
                delta,
            }),
            (ty1, None),
        ))
    }
}

fn parse_node(s: &SExp) -> SResult<ProofNode> {
    let items = s
        .list()
        .ok_or_else(|| ScriptError("a proof node is a list".into()))?;
    let rule = items
        .first()
        .and_then(|s| s.atom())
        .ok_or_else(|| ScriptError("a proof node starts with a rule name".into()))?;
    let mut meta = BTreeMap::new();
    let mut ob_modes = BTreeMap::new();
    let mut children = Vec::new();
    for item in &items[1..] {
        match item.head() {
            Some("meta") => {
                let m = item.tagged("meta").unwrap();
                if m.len() != 2 {
                    return err("(meta name value)");
                }
                let name = m[0]
                    .atom()
                    .ok_or_else(|| ScriptError("bad meta name".into()))?;
                meta.insert(name.to_string(), m[1].clone());
            }
            Some("ob") => {
                let o = item.tagged("ob").unwrap();
                if o.len() != 2 {
                    return err("(ob label mode)");
                }
                let label = o[0]
                    .atom()
                    .ok_or_else(|| ScriptError("bad obligation label".into()))?;
                let mode = match &o[1] {
                    SExp::Atom(a) if a == "eval" => DischargeMode::Eval,
                    SExp::Atom(a) if a == "arith" => DischargeMode::Arith,
                    other => match other.tagged("admit") {
                        Some([SExp::Atom(name)]) => DischargeMode::Admit(name.clone()),
                        _ => return err("obligation mode is eval, arith, or (admit name)"),
                    },
                };
                ob_modes.insert(label.to_string(), mode);
            }
            _ => children.push(parse_node(item)?),
        }
    }
    Ok(ProofNode {
        rule: rule.to_string(),
        meta,
        ob_modes,
        children,
    })
}

/// Substitute definition names inside every term metavariable? Terms inside
/// metas are rare; rules parse them against the raw config, so proof scripts
/// reference defs only in the goal terms.
pub fn _doc() {}
