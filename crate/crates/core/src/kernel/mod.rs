//! The shared proof-checking template for generalized Hoare triples
//! `{P} t : T_{Σ,k}τ {{Q}}_δ` and relational quadruples, parameterized by
//! the logic instance.
//!
//! Checking is top-down: the proof script supplies rule names and
//! metavariable bindings; the kernel recomputes each premise's judgment from
//! the rule schema, matches term and assertion shapes (up to memory-
//! expression normalization and α-equivalence), verifies the grade
//! arithmetic, and discharges side obligations through the evaluation
//! engine. A second, independent bottom-up pass recomputes the minimal
//! grade of every node and re-verifies monotonicity.

pub mod rules;
pub mod script;

use crate::config::ProgramConfig;
use crate::discharge::{DischargeError, DischargeMode, Engine, Obligation, Outcome};
use crate::logics::LogicMode;
use crate::rat::{ExtRat, Rat};
use crate::syntax::ast::*;
use crate::syntax::sexpr::SExp;
use crate::typecheck::TypeError;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Debug)]
pub struct UnaryJudgment {
    pub gamma: Vec<(Ident, Type)>,
    pub psi: Vec<Prop>,
    pub pre: Assertion,
    pub term: Term,
    pub post: Assertion,
    pub delta: ExtRat,
}

#[derive(Clone, Debug)]
pub struct RelJudgment {
    pub gamma: Vec<(Ident, Type)>,
    pub psi: Vec<Prop>,
    pub pre: Assertion,
    pub left: Term,
    pub right: Term,
    pub post: Assertion,
    /// The ε component of the relational grade is typed but pinned to 0 in
    /// the shipped instance.
    pub eps: Rat,
    pub delta: ExtRat,
}

#[derive(Clone, Debug)]
pub enum Judgment {
    Unary(UnaryJudgment),
    Rel(RelJudgment),
}

impl Judgment {
    pub fn delta(&self) -> &ExtRat {
        match self {
            Judgment::Unary(u) => &u.delta,
            Judgment::Rel(r) => &r.delta,
        }
    }

    pub fn gamma(&self) -> &[(Ident, Type)] {
        match self {
            Judgment::Unary(u) => &u.gamma,
            Judgment::Rel(r) => &r.gamma,
        }
    }

    pub fn pre(&self) -> &Assertion {
        match self {
            Judgment::Unary(u) => &u.pre,
            Judgment::Rel(r) => &r.pre,
        }
    }

    pub fn post(&self) -> &Assertion {
        match self {
            Judgment::Unary(u) => &u.post,
            Judgment::Rel(r) => &r.post,
        }
    }
}

/// One rule application as written in a proof script.
#[derive(Clone, Debug)]
pub struct ProofNode {
    pub rule: String,
    pub meta: BTreeMap<String, SExp>,
    /// Per-obligation discharge-mode overrides, by label.
    pub ob_modes: BTreeMap<String, DischargeMode>,
    pub children: Vec<ProofNode>,
}

/// A checked node: the conclusion the kernel established for it plus the
/// outcomes of its side obligations.
#[derive(Debug)]
pub struct CheckedNode {
    pub rule: String,
    pub conclusion: Judgment,
    pub obligations: Vec<ObResult>,
    pub children: Vec<CheckedNode>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ObResult {
    pub label: String,
    pub outcome: Outcome,
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("rule {rule} is not part of the {mode} instance")]
    RuleNotAllowed { rule: String, mode: &'static str },
    #[error("unknown rule '{0}'")]
    UnknownRule(String),
    #[error("{rule}: term shape mismatch: expected {expected}")]
    RuleShapeMismatch { rule: String, expected: String },
    #[error("{rule}: grade arithmetic violation: stated {stated} but the rule requires at least {needed}")]
    GradeArithmetic {
        rule: String,
        needed: String,
        stated: String,
    },
    #[error("{rule}: {which} does not match the rule schema.\n  expected (normal form): {expected}\n  actual   (normal form): {actual}")]
    AssertionMismatch {
        rule: String,
        which: &'static str,
        expected: String,
        actual: String,
    },
    #[error("{rule}: metavariable scope violation: '{var}' {msg}")]
    MetavarScope {
        rule: String,
        var: String,
        msg: String,
    },
    #[error("obligation '{label}' failed: {detail}")]
    UndischargedObligation { label: String, detail: String },
    #[error("synchronization premise failed in {rule}: {detail}")]
    SyncFailed { rule: String, detail: String },
    #[error("Safe condition failed for '{label}': {counterexample}")]
    SafeFailed {
        label: String,
        counterexample: String,
    },
    #[error("adversary rule: {which} must be a non-monadic type")]
    MonadicAdversaryType { which: &'static str },
    #[error("adversary rules require a singleton adversary context (found {0} entries)")]
    AdvContextNotSingleton(usize),
    #[error("adversary type error: {0}")]
    AdvShape(String),
    #[error("the adversary's oracle argument must have cost exactly 1, found {0}")]
    OracleCostNotOne(u64),
    #[error("sampling rule requires a literal finite size argument")]
    NonFiniteSample,
    #[error("sampling grade {0} is outside [0,1]")]
    InvalidSampleGrade(String),
    #[error("relational grade ε must be 0 in the shipped instance, found {0}")]
    EpsNonZero(String),
    #[error("{rule}: missing metavariable '{name}'")]
    MissingMeta { rule: String, name: String },
    #[error("{rule}: bad metavariable '{name}': {msg}")]
    BadMeta {
        rule: String,
        name: String,
        msg: String,
    },
    #[error("{rule}: expected {expected} premises, found {found}")]
    PremiseCount {
        rule: String,
        expected: String,
        found: usize,
    },
    #[error("type error: {0}")]
    Type(#[from] TypeError),
    #[error("discharge error on '{label}': {err}")]
    Discharge {
        label: String,
        err: DischargeError,
    },
    #[error("assertion not admissible in this instance: {0}")]
    AssertionWf(String),
    #[error("proof script error: {0}")]
    Script(String),
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub rule_count: u64,
    pub obligations_checked: u64,
    pub admitted: Vec<AdmittedLemma>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AdmittedLemma {
    pub name: String,
    pub label: String,
}

pub struct Kernel<'a> {
    pub cfg: &'a ProgramConfig,
    pub mode: LogicMode,
    pub engine: Engine<'a>,
    pub checker: crate::typecheck::Checker<'a>,
}

impl<'a> Kernel<'a> {
    pub fn new(cfg: &'a ProgramConfig, mode: LogicMode) -> Self {
        Kernel {
            cfg,
            mode,
            engine: Engine::new(cfg),
            checker: crate::typecheck::Checker::new(cfg),
        }
    }

    /// Check a full derivation against a goal judgment. The conclusion term
    /// must already have been type-checked by the caller at the goal type.
    pub fn check_proof(
        &self,
        goal: &Judgment,
        root: &ProofNode,
    ) -> Result<(CheckedNode, CheckReport), KernelError> {
        self.wf_judgment(goal)?;
        let checked = self.check_node(goal, root, "root")?;
        let mut report = CheckReport {
            rule_count: 0,
            obligations_checked: 0,
            admitted: Vec::new(),
        };
        collect_report(&checked, "root", &mut report);
        self.recompute_grades(&checked)?;
        Ok((checked, report))
    }

    fn wf_judgment(&self, j: &Judgment) -> Result<(), KernelError> {
        for a in [j.pre(), j.post()] {
            self.mode
                .assertion_wf(a)
                .map_err(KernelError::AssertionWf)?;
        }
        if let Judgment::Rel(r) = j {
            if !r.eps.eq(&Rat::from_integer(0.into())) {
                return Err(KernelError::EpsNonZero(crate::rat::fmt_rat(&r.eps)));
            }
        }
        Ok(())
    }

    pub(crate) fn check_node(
        &self,
        j: &Judgment,
        node: &ProofNode,
        path: &str,
    ) -> Result<CheckedNode, KernelError> {
        if !self.mode.allows_rule(&node.rule) {
            return Err(KernelError::RuleNotAllowed {
                rule: node.rule.clone(),
                mode: self.mode.name(),
            });
        }
        self.wf_judgment(j)?;
        let step = rules::apply_rule(self, j, node)?;
        // discharge this node's obligations
        let mut results = Vec::new();
        for (label, check) in step.obligations {
            let started = std::time::Instant::now();
            let outcome = self.run_obligation(&label, check, node).map_err(|e| {
                match e {
                    KernelError::Discharge { label, err } => KernelError::Discharge {
                        label: format!("{path}/{label}"),
                        err,
                    },
                    other => other,
                }
            })?;
            if std::env::var("HOPLOG_DEBUG_OBS").is_ok() {
                eprintln!(
                    "[ob] {path}/{label}: {:?} in {:.3}s",
                    outcome,
                    started.elapsed().as_secs_f64()
                );
            }
            if let Outcome::Failed(detail) = &outcome {
                if label.starts_with("sync") {
                    return Err(KernelError::SyncFailed {
                        rule: node.rule.clone(),
                        detail: detail.clone(),
                    });
                }
                if label.starts_with("safe") {
                    return Err(KernelError::SafeFailed {
                        label: label.clone(),
                        counterexample: detail.clone(),
                    });
                }
                return Err(KernelError::UndischargedObligation {
                    label: format!("{path}/{label}"),
                    detail: detail.clone(),
                });
            }
            results.push(ObResult {
                label,
                outcome,
            });
        }
        if node.children.len() != step.premises.len() {
            return Err(KernelError::PremiseCount {
                rule: node.rule.clone(),
                expected: step.premises.len().to_string(),
                found: node.children.len(),
            });
        }
        let mut children = Vec::new();
        for (i, (cj, cnode)) in step.premises.iter().zip(&node.children).enumerate() {
            let cpath = format!("{path}/{}:{}", i, cnode.rule);
            children.push(self.check_node(cj, cnode, &cpath)?);
        }
        Ok(CheckedNode {
            rule: node.rule.clone(),
            conclusion: j.clone(),
            obligations: results,
            children,
        })
    }

    fn run_obligation(
        &self,
        label: &str,
        check: ObCheck,
        node: &ProofNode,
    ) -> Result<Outcome, KernelError> {
        let mode = node
            .ob_modes
            .get(label)
            .cloned()
            .unwrap_or(DischargeMode::Eval);
        match check {
            ObCheck::Engine(mut ob) => {
                ob.label = label.to_string();
                ob.mode = mode;
                let report = self
                    .engine
                    .discharge(&ob)
                    .map_err(|err| KernelError::Discharge {
                        label: label.to_string(),
                        err,
                    })?;
                Ok(report.outcome)
            }
            ObCheck::Safe {
                assertion,
                sigma,
                mode: safe_mode,
            } => {
                if let DischargeMode::Admit(name) = mode {
                    return Ok(Outcome::Admitted(name));
                }
                match crate::discharge::check_safe(
                    self.cfg,
                    &assertion,
                    &sigma,
                    safe_mode,
                    self.engine.cap,
                ) {
                    Ok(crate::discharge::SafeOutcome::Ok) => Ok(Outcome::Ok),
                    Ok(crate::discharge::SafeOutcome::Failed(cex)) => Ok(Outcome::Failed(cex)),
                    Err(DischargeError::DomainTooLarge { .. }) => {
                        // per the design ledger: too-large Safe checks
                        // downgrade to admitted, never silently accepted
                        Ok(Outcome::Admitted(format!("{label}:too-large")))
                    }
                    Err(err) => Err(KernelError::Discharge {
                        label: label.to_string(),
                        err,
                    }),
                }
            }
        }
    }

    /// Independent bottom-up pass: the conclusion grade of every node must
    /// dominate the instance-specific combination of its children's grades.
    fn recompute_grades(&self, node: &CheckedNode) -> Result<(), KernelError> {
        self.min_grade(node).map(|_| ())
    }

    fn min_grade(&self, node: &CheckedNode) -> Result<ExtRat, KernelError> {
        let kids: Vec<ExtRat> = node
            .children
            .iter()
            .map(|c| self.min_grade(c))
            .collect::<Result<_, _>>()?;
        let computed = rules::combine_grades(self, node, &kids)?;
        if *node.conclusion.delta() < computed {
            return Err(KernelError::GradeArithmetic {
                rule: node.rule.clone(),
                needed: computed.to_string(),
                stated: node.conclusion.delta().to_string(),
            });
        }
        Ok(computed)
    }
}

pub(crate) enum ObCheck {
    Engine(Obligation),
    Safe {
        assertion: Assertion,
        sigma: Effect,
        mode: crate::discharge::SafeMode,
    },
}

/// What a rule application yields: the premises to recurse into and the side
/// obligations to discharge.
pub(crate) struct RuleStep {
    pub premises: Vec<Judgment>,
    pub obligations: Vec<(String, ObCheck)>,
}

fn collect_report(node: &CheckedNode, path: &str, report: &mut CheckReport) {
    report.rule_count += 1;
    for ob in &node.obligations {
        report.obligations_checked += 1;
        if let Outcome::Admitted(name) = &ob.outcome {
            report.admitted.push(AdmittedLemma {
                name: name.clone(),
                label: format!("{path}/{}", ob.label),
            });
        }
    }
    for (i, c) in node.children.iter().enumerate() {
        collect_report(c, &format!("{path}/{}:{}", i, c.rule), report);
    }
}
