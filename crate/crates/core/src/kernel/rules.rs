//! Per-rule schema validation: term-shape matching, premise-judgment
//! computation, grade arithmetic and side-obligation construction.

use super::{Judgment, Kernel, KernelError, ObCheck, ProofNode, RelJudgment, RuleStep, UnaryJudgment};
use crate::discharge::{DischargeMode, ObKind, Obligation, SafeMode};
use crate::rat::{rat_u64, ExtRat, Rat};
use crate::syntax::ast::*;
use crate::syntax::norm::{assertions_match, normalize_assertion};
use crate::syntax::sexpr::{self, SExp};
use crate::syntax::subst::{free_vars_assertion, free_vars_term, Subst};
use crate::typecheck::{AdvShape, Contexts};
use num_traits::{One, Signed, Zero};

type KResult<T> = Result<T, KernelError>;

pub(crate) fn apply_rule(k: &Kernel, j: &Judgment, node: &ProofNode) -> KResult<RuleStep> {
    match node.rule.as_str() {
        "UNIT-U" => unit_u(k, expect_unary(j, node)?, node),
        "MLET-U" => mlet_u(k, expect_unary(j, node)?, node),
        "READ-U" => read_u(k, expect_unary(j, node)?, node),
        "WRITE-U" => write_u(k, expect_unary(j, node)?, node),
        "MCASE-U" => mcase_u(k, expect_unary(j, node)?, node),
        "MCASEN-U" => mcasen_u(k, expect_unary(j, node)?, node),
        "MFOLD-U" => mfold_u(k, expect_unary(j, node)?, node),
        "CONSEQ-U" => conseq(k, j, node),
        "OR-PRE-U" => or_pre(k, j, node),
        "AND-POST-U" => and_post(k, expect_unary(j, node)?, node),
        "SAMPLE-UBL" => sample_ubl(k, expect_unary(j, node)?, node),
        "LIN-EXP" => lin_exp(k, expect_unary(j, node)?, node),
        "UNIF-EXP" => unif_exp(k, expect_unary(j, node)?, node),
        "ADV-U" => adv_u(k, expect_unary(j, node)?, node),
        "UNIT-R" => unit_r(k, expect_rel(j, node)?, node),
        "MLET-R" => mlet_r(k, expect_rel(j, node)?, node),
        "READ-R" => read_r(k, expect_rel(j, node)?, node),
        "WRITE-R" => write_r(k, expect_rel(j, node)?, node),
        "MCASE-R" => mcase_r(k, expect_rel(j, node)?, node),
        "MCASEN-R" => mcasen_r(k, expect_rel(j, node)?, node),
        "L-UNIT-R" => one_sided_unit(k, expect_rel(j, node)?, node, true),
        "R-UNIT-R" => one_sided_unit(k, expect_rel(j, node)?, node, false),
        "L-MLET-R" => one_sided_mlet(k, expect_rel(j, node)?, node, true),
        "R-MLET-R" => one_sided_mlet(k, expect_rel(j, node)?, node, false),
        "SAMPLE-R" => sample_r(k, expect_rel(j, node)?, node),
        "ADV-R" => adv_r(k, expect_rel(j, node)?, node),
        other => Err(KernelError::UnknownRule(other.to_string())),
    }
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

fn expect_unary<'j>(j: &'j Judgment, node: &ProofNode) -> KResult<&'j UnaryJudgment> {
    match j {
        Judgment::Unary(u) => Ok(u),
        Judgment::Rel(_) => Err(KernelError::RuleShapeMismatch {
            rule: node.rule.clone(),
            expected: "a unary judgment".into(),
        }),
    }
}

fn expect_rel<'j>(j: &'j Judgment, node: &ProofNode) -> KResult<&'j RelJudgment> {
    match j {
        Judgment::Rel(r) => Ok(r),
        Judgment::Unary(_) => Err(KernelError::RuleShapeMismatch {
            rule: node.rule.clone(),
            expected: "a relational judgment".into(),
        }),
    }
}

fn shape_err(node: &ProofNode, expected: &str) -> KernelError {
    KernelError::RuleShapeMismatch {
        rule: node.rule.clone(),
        expected: expected.to_string(),
    }
}

fn grade_err(node: &ProofNode, needed: impl std::fmt::Display, stated: &ExtRat) -> KernelError {
    KernelError::GradeArithmetic {
        rule: node.rule.clone(),
        needed: needed.to_string(),
        stated: stated.to_string(),
    }
}

impl<'a> Kernel<'a> {
    fn meta(&self, node: &ProofNode, name: &str) -> KResult<SExp> {
        node.meta
            .get(name)
            .cloned()
            .ok_or_else(|| KernelError::MissingMeta {
                rule: node.rule.clone(),
                name: name.to_string(),
            })
    }

    fn meta_assertion(&self, node: &ProofNode, name: &str) -> KResult<Assertion> {
        let s = self.meta(node, name)?;
        let a = sexpr::parse_assertion(&s, self.cfg).map_err(|e| KernelError::BadMeta {
            rule: node.rule.clone(),
            name: name.to_string(),
            msg: e.to_string(),
        })?;
        self.mode
            .assertion_wf(&a)
            .map_err(KernelError::AssertionWf)?;
        Ok(a)
    }

    fn meta_assertion_list(&self, node: &ProofNode, name: &str) -> KResult<Vec<Assertion>> {
        let s = self.meta(node, name)?;
        let items = s.list().ok_or_else(|| KernelError::BadMeta {
            rule: node.rule.clone(),
            name: name.to_string(),
            msg: "expected a list".into(),
        })?;
        items
            .iter()
            .map(|i| {
                let a = sexpr::parse_assertion(i, self.cfg).map_err(|e| KernelError::BadMeta {
                    rule: node.rule.clone(),
                    name: name.to_string(),
                    msg: e.to_string(),
                })?;
                self.mode
                    .assertion_wf(&a)
                    .map_err(KernelError::AssertionWf)?;
                Ok(a)
            })
            .collect()
    }

    fn meta_prop(&self, node: &ProofNode, name: &str) -> KResult<Prop> {
        let s = self.meta(node, name)?;
        sexpr::parse_prop(&s, self.cfg).map_err(|e| KernelError::BadMeta {
            rule: node.rule.clone(),
            name: name.to_string(),
            msg: e.to_string(),
        })
    }

    fn meta_grade(&self, node: &ProofNode, name: &str) -> KResult<ExtRat> {
        let s = self.meta(node, name)?;
        let a = s.atom().ok_or_else(|| KernelError::BadMeta {
            rule: node.rule.clone(),
            name: name.to_string(),
            msg: "expected a rational or inf".into(),
        })?;
        let g = ExtRat::parse(a).ok_or_else(|| KernelError::BadMeta {
            rule: node.rule.clone(),
            name: name.to_string(),
            msg: "expected a rational or inf".into(),
        })?;
        if g.is_negative() {
            return Err(KernelError::BadMeta {
                rule: node.rule.clone(),
                name: name.to_string(),
                msg: "grades are nonnegative".into(),
            });
        }
        Ok(g)
    }

    fn meta_grade_list(&self, node: &ProofNode, name: &str) -> KResult<Vec<ExtRat>> {
        let s = self.meta(node, name)?;
        let items = s.list().ok_or_else(|| KernelError::BadMeta {
            rule: node.rule.clone(),
            name: name.to_string(),
            msg: "expected a list of grades".into(),
        })?;
        items
            .iter()
            .map(|i| {
                i.atom()
                    .and_then(ExtRat::parse)
                    .filter(|g| !g.is_negative())
                    .ok_or_else(|| KernelError::BadMeta {
                        rule: node.rule.clone(),
                        name: name.to_string(),
                        msg: "expected nonnegative rationals".into(),
                    })
            })
            .collect()
    }

    fn meta_rat(&self, node: &ProofNode, name: &str) -> KResult<Rat> {
        match self.meta_grade(node, name)? {
            ExtRat::Fin(r) => Ok(r),
            ExtRat::Inf => Err(KernelError::BadMeta {
                rule: node.rule.clone(),
                name: name.to_string(),
                msg: "must be finite".into(),
            }),
        }
    }

    /// Match a judgment assertion against the shape a rule requires.
    fn match_assertion(
        &self,
        node: &ProofNode,
        which: &'static str,
        actual: &Assertion,
        expected: &Assertion,
    ) -> KResult<()> {
        if assertions_match(self.cfg, actual, expected) {
            Ok(())
        } else {
            let pr = crate::syntax::print::Printer::new(self.cfg);
            Err(KernelError::AssertionMismatch {
                rule: node.rule.clone(),
                which,
                expected: pr.assertion_sexpr(&normalize_assertion(self.cfg, expected)),
                actual: pr.assertion_sexpr(&normalize_assertion(self.cfg, actual)),
            })
        }
    }

    /// Inner value type of a monadic term in a context.
    fn inner_type(&self, gamma: &[(Ident, Type)], term: &Term) -> KResult<Type> {
        let ctx = Contexts::with_gamma(gamma.to_vec());
        let ty = self.checker.infer(&ctx, term)?;
        match ty {
            Type::Monadic(_, _, inner) => Ok(*inner),
            other => Err(KernelError::Type(crate::typecheck::TypeError::NotMonadic {
                context: "proof term".into(),
                actual: crate::syntax::print::Printer::new(self.cfg).ty(&other),
            })),
        }
    }

    fn entail_ob(
        &self,
        gamma: Vec<(Ident, Type)>,
        psi: Vec<Prop>,
        lhs: Assertion,
        rhs: Assertion,
    ) -> ObCheck {
        ObCheck::Engine(Obligation {
            label: String::new(),
            gamma,
            psi,
            kind: ObKind::Entail {
                lhs,
                rhs,
                quant: self.mode.is_quantitative(),
            },
            mode: DischargeMode::Eval,
        })
    }
}

fn asub(a: &Assertion, pairs: &[(&str, Term)]) -> Assertion {
    let mut s = Subst::new();
    for (x, t) in pairs {
        s.insert(x, t.clone());
    }
    s.apply_assertion(a)
}

fn with_mem(gamma: &[(Ident, Type)]) -> Vec<(Ident, Type)> {
    let mut g = gamma.to_vec();
    g.push(("s".into(), Type::Mem));
    g
}

fn with_mems2(gamma: &[(Ident, Type)]) -> Vec<(Ident, Type)> {
    let mut g = gamma.to_vec();
    g.push(("s1".into(), Type::Mem));
    g.push(("s2".into(), Type::Mem));
    g
}

fn uj(base: &UnaryJudgment, pre: Assertion, term: Term, post: Assertion, delta: ExtRat) -> Judgment {
    Judgment::Unary(UnaryJudgment {
        gamma: base.gamma.clone(),
        psi: base.psi.clone(),
        pre,
        term,
        post,
        delta,
    })
}

fn rj(base: &RelJudgment, pre: Assertion, left: Term, right: Term, post: Assertion, delta: ExtRat) -> Judgment {
    Judgment::Rel(RelJudgment {
        gamma: base.gamma.clone(),
        psi: base.psi.clone(),
        pre,
        left,
        right,
        post,
        eps: Rat::zero(),
        delta,
    })
}

// ---------------------------------------------------------------------------
// unary monadic rules
// ---------------------------------------------------------------------------

fn unit_u(k: &Kernel, j: &UnaryJudgment, node: &ProofNode) -> KResult<RuleStep> {
    // skip is unit ⋆
    let inner: Term = match &j.term {
        Term::UnitM(inner) => (**inner).clone(),
        Term::Skip => Term::Star,
        _ => return Err(shape_err(node, "unit t")),
    };
    let inner = &Box::new(inner);
    let phi = match node.meta.get("phi") {
        Some(_) => k.meta_prop(node, "phi")?,
        None => Prop::True,
    };
    let expected_post = Assertion::meet(Assertion::inj(phi.clone()), j.pre.clone());
    k.match_assertion(node, "postcondition", &j.post, &expected_post)?;
    let mut obligations = Vec::new();
    if phi != Prop::True {
        let fact = Subst::one("v", (**inner).clone()).apply_prop(&phi);
        obligations.push((
            "value-fact".to_string(),
            ObCheck::Engine(Obligation {
                label: String::new(),
                gamma: with_mem(&j.gamma),
                psi: j.psi.clone(),
                kind: ObKind::Fact(fact),
                mode: DischargeMode::Eval,
            }),
        ));
    }
    Ok(RuleStep {
        premises: vec![],
        obligations,
    })
}

fn mlet_u(k: &Kernel, j: &UnaryJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let Term::LetM(x, bound, body) = &j.term else {
        return Err(shape_err(node, "let x = t in u"));
    };
    let q = k.meta_assertion(node, "q")?;
    let d1 = k.meta_grade(node, "d1")?;
    let d2 = k.meta_grade(node, "d2")?;
    let needed = d1.clone() + d2.clone();
    if j.delta < needed {
        return Err(grade_err(node, &needed, &j.delta));
    }
    if free_vars_assertion(&j.post).contains(x) {
        return Err(KernelError::MetavarScope {
            rule: node.rule.clone(),
            var: x.clone(),
            msg: "is bound by the let but free in the postcondition".into(),
        });
    }
    let tau = k.inner_type(&j.gamma, bound)?;
    let child1 = uj(j, j.pre.clone(), (**bound).clone(), q.clone(), d1);
    let mut gamma2 = j.gamma.clone();
    gamma2.push((x.clone(), tau));
    let child2 = Judgment::Unary(UnaryJudgment {
        gamma: gamma2,
        psi: j.psi.clone(),
        pre: asub(&q, &[("v", Term::var(x))]),
        term: (**body).clone(),
        post: j.post.clone(),
        delta: d2,
    });
    Ok(RuleStep {
        premises: vec![child1, child2],
        obligations: vec![],
    })
}

fn read_u(k: &Kernel, j: &UnaryJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let Term::Read(a) = &j.term else {
        return Err(shape_err(node, "read a"));
    };
    let expected_pre = asub(&j.post, &[("v", Term::select(Term::var("s"), *a))]);
    k.match_assertion(node, "precondition", &j.pre, &expected_pre)?;
    Ok(RuleStep {
        premises: vec![],
        obligations: vec![],
    })
}

fn write_u(k: &Kernel, j: &UnaryJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let Term::Write(a, value) = &j.term else {
        return Err(shape_err(node, "write a t"));
    };
    let ctx = Contexts::with_gamma(j.gamma.clone());
    k.checker.check(&ctx, value, &Type::Val)?;
    let expected_pre = asub(
        &j.post,
        &[("s", Term::store(Term::var("s"), *a, (**value).clone()))],
    );
    k.match_assertion(node, "precondition", &j.pre, &expected_pre)?;
    Ok(RuleStep {
        premises: vec![],
        obligations: vec![],
    })
}

fn mcase_u(k: &Kernel, j: &UnaryJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let Term::Case(b, t1, t2) = &j.term else {
        return Err(shape_err(node, "if b then t1 else t2"));
    };
    let ctx = Contexts::with_gamma(j.gamma.clone());
    k.checker.check(&ctx, b, &Type::Bool)?;
    let p1 = k.meta_assertion(node, "p1")?;
    let p2 = k.meta_assertion(node, "p2")?;
    let expected_pre = Assertion::join(
        Assertion::meet(Assertion::inj(Prop::guard(b, true)), p1.clone()),
        Assertion::meet(Assertion::inj(Prop::guard(b, false)), p2.clone()),
    );
    k.match_assertion(node, "precondition", &j.pre, &expected_pre)?;
    let mut j1 = UnaryJudgment {
        gamma: j.gamma.clone(),
        psi: j.psi.clone(),
        pre: p1,
        term: (**t1).clone(),
        post: j.post.clone(),
        delta: j.delta.clone(),
    };
    j1.psi.push(Prop::guard(b, true));
    let mut j2 = UnaryJudgment {
        gamma: j.gamma.clone(),
        psi: j.psi.clone(),
        pre: p2,
        term: (**t2).clone(),
        post: j.post.clone(),
        delta: j.delta.clone(),
    };
    j2.psi.push(Prop::guard(b, false));
    Ok(RuleStep {
        premises: vec![Judgment::Unary(j1), Judgment::Unary(j2)],
        obligations: vec![],
    })
}

fn mcasen_u(k: &Kernel, j: &UnaryJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let Term::CaseNat(scrut, arms, default) = &j.term else {
        return Err(shape_err(node, "match e { 0 => … }"));
    };
    let ps = k.meta_assertion_list(node, "ps")?;
    let expected_count = arms.len() + usize::from(default.is_some());
    if ps.len() != expected_count {
        return Err(KernelError::BadMeta {
            rule: node.rule.clone(),
            name: "ps".into(),
            msg: format!("expected {expected_count} assertions, found {}", ps.len()),
        });
    }
    let mut disjuncts = Vec::new();
    let mut premises = Vec::new();
    for (i, (arm, p)) in arms.iter().zip(&ps).enumerate() {
        let guard = Prop::eq((**scrut).clone(), Term::nat_lit(i as u64));
        disjuncts.push(Assertion::meet(Assertion::inj(guard.clone()), p.clone()));
        let mut cj = UnaryJudgment {
            gamma: j.gamma.clone(),
            psi: j.psi.clone(),
            pre: p.clone(),
            term: arm.clone(),
            post: j.post.clone(),
            delta: j.delta.clone(),
        };
        cj.psi.push(guard);
        premises.push(Judgment::Unary(cj));
    }
    if let Some(d) = default {
        let p = &ps[arms.len()];
        let mut guard = Prop::True;
        for i in 0..arms.len() {
            let ne = Prop::Cmp(
                CmpOp::Ne,
                Box::new((**scrut).clone()),
                Box::new(Term::nat_lit(i as u64)),
            );
            guard = if matches!(guard, Prop::True) {
                ne
            } else {
                Prop::and(guard, ne)
            };
        }
        disjuncts.push(Assertion::meet(Assertion::inj(guard.clone()), p.clone()));
        let mut cj = UnaryJudgment {
            gamma: j.gamma.clone(),
            psi: j.psi.clone(),
            pre: p.clone(),
            term: (**d).clone(),
            post: j.post.clone(),
            delta: j.delta.clone(),
        };
        cj.psi.push(guard);
        premises.push(Judgment::Unary(cj));
    }
    let expected_pre = Assertion::join_all(disjuncts);
    k.match_assertion(node, "precondition", &j.pre, &expected_pre)?;
    Ok(RuleStep {
        premises,
        obligations: vec![],
    })
}

fn mfold_u(k: &Kernel, j: &UnaryJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let Term::MFold(n, base, step) = &j.term else {
        return Err(shape_err(node, "mfold n t (fun x => u)"));
    };
    let Term::Lam(x, _, body) = step.as_ref() else {
        return Err(shape_err(node, "mfold's step must be a literal function"));
    };
    let ctx = Contexts::with_gamma(j.gamma.clone());
    let nty = k.checker.infer(&ctx, n)?;
    let bound = match nty {
        Type::Nat(Some(kk)) => kk,
        _ => {
            return Err(KernelError::Type(
                crate::typecheck::TypeError::UnboundedFold(
                    crate::syntax::print::Printer::new(k.cfg).ty(&nty),
                ),
            ))
        }
    };
    let d_base = k.meta_grade(node, "dbase")?;
    let d_step = k.meta_grade(node, "dstep")?;
    let needed = d_base.clone() + ExtRat::Fin(rat_u64(bound)) * d_step.clone();
    if j.delta < needed {
        return Err(grade_err(node, &needed, &j.delta));
    }
    let tau = k.inner_type(&j.gamma, &j.term)?;
    let mut j1 = UnaryJudgment {
        gamma: j.gamma.clone(),
        psi: j.psi.clone(),
        pre: j.pre.clone(),
        term: (**base).clone(),
        post: j.post.clone(),
        delta: d_base,
    };
    j1.psi.push(Prop::eq((**n).clone(), Term::nat_lit(0)));
    let mut gamma2 = j.gamma.clone();
    gamma2.push((x.clone(), tau));
    let mut j2 = UnaryJudgment {
        gamma: gamma2,
        psi: j.psi.clone(),
        pre: asub(&j.post, &[("v", Term::var(x))]),
        term: (**body).clone(),
        post: j.post.clone(),
        delta: d_step,
    };
    j2.psi.push(Prop::Cmp(
        CmpOp::Ne,
        Box::new((**n).clone()),
        Box::new(Term::nat_lit(0)),
    ));
    Ok(RuleStep {
        premises: vec![Judgment::Unary(j1), Judgment::Unary(j2)],
        obligations: vec![],
    })
}

// ---------------------------------------------------------------------------
// structural rules (shared across instances)
// ---------------------------------------------------------------------------

fn conseq(k: &Kernel, j: &Judgment, node: &ProofNode) -> KResult<RuleStep> {
    let p2 = k.meta_assertion(node, "pre2")?;
    let q2 = k.meta_assertion(node, "post2")?;
    let d2 = k.meta_grade(node, "d2")?;
    if *j.delta() < d2 {
        return Err(grade_err(node, &d2, j.delta()));
    }
    match j {
        Judgment::Unary(u) => {
            let tau = k.inner_type(&u.gamma, &u.term)?;
            let pre_gamma = with_mem(&u.gamma);
            let mut post_gamma = with_mem(&u.gamma);
            post_gamma.push(("v".into(), tau));
            let obligations = vec![
                (
                    "pre".to_string(),
                    k.entail_ob(pre_gamma, u.psi.clone(), u.pre.clone(), p2.clone()),
                ),
                (
                    "post".to_string(),
                    k.entail_ob(post_gamma, u.psi.clone(), q2.clone(), u.post.clone()),
                ),
            ];
            Ok(RuleStep {
                premises: vec![uj(u, p2, u.term.clone(), q2, d2)],
                obligations,
            })
        }
        Judgment::Rel(r) => {
            let tau1 = k.inner_type(&r.gamma, &r.left)?;
            let tau2 = k.inner_type(&r.gamma, &r.right)?;
            let pre_gamma = with_mems2(&r.gamma);
            let mut post_gamma = with_mems2(&r.gamma);
            post_gamma.push(("v1".into(), tau1));
            post_gamma.push(("v2".into(), tau2));
            let obligations = vec![
                (
                    "pre".to_string(),
                    k.entail_ob(pre_gamma, r.psi.clone(), r.pre.clone(), p2.clone()),
                ),
                (
                    "post".to_string(),
                    k.entail_ob(post_gamma, r.psi.clone(), q2.clone(), r.post.clone()),
                ),
            ];
            Ok(RuleStep {
                premises: vec![rj(r, p2, r.left.clone(), r.right.clone(), q2, d2)],
                obligations,
            })
        }
    }
}

fn or_pre(k: &Kernel, j: &Judgment, node: &ProofNode) -> KResult<RuleStep> {
    let p1 = k.meta_assertion(node, "pre1")?;
    let p2 = k.meta_assertion(node, "pre2")?;
    let expected = Assertion::join(p1.clone(), p2.clone());
    match j {
        Judgment::Unary(u) => {
            k.match_assertion(node, "precondition", &u.pre, &expected)?;
            Ok(RuleStep {
                premises: vec![
                    uj(u, p1, u.term.clone(), u.post.clone(), u.delta.clone()),
                    uj(u, p2, u.term.clone(), u.post.clone(), u.delta.clone()),
                ],
                obligations: vec![],
            })
        }
        Judgment::Rel(r) => {
            k.match_assertion(node, "precondition", &r.pre, &expected)?;
            Ok(RuleStep {
                premises: vec![
                    rj(r, p1, r.left.clone(), r.right.clone(), r.post.clone(), r.delta.clone()),
                    rj(r, p2, r.left.clone(), r.right.clone(), r.post.clone(), r.delta.clone()),
                ],
                obligations: vec![],
            })
        }
    }
}

fn and_post(k: &Kernel, j: &UnaryJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let q1 = k.meta_assertion(node, "post1")?;
    let q2 = k.meta_assertion(node, "post2")?;
    let d1 = k.meta_grade(node, "d1")?;
    let d2 = k.meta_grade(node, "d2")?;
    let needed = d1.clone() + d2.clone();
    if j.delta < needed {
        return Err(grade_err(node, &needed, &j.delta));
    }
    let expected = Assertion::meet(q1.clone(), q2.clone());
    k.match_assertion(node, "postcondition", &j.post, &expected)?;
    Ok(RuleStep {
        premises: vec![
            uj(j, j.pre.clone(), j.term.clone(), q1, d1),
            uj(j, j.pre.clone(), j.term.clone(), q2, d2),
        ],
        obligations: vec![],
    })
}

// ---------------------------------------------------------------------------
// sampling rules
// ---------------------------------------------------------------------------

fn sample_size(k: &Kernel, node: &ProofNode, t: &Term) -> KResult<u64> {
    let Term::Sample(name, args) = t else {
        return Err(shape_err(node, "a sampling term"));
    };
    let kind = k.cfg.dists.get(name);
    if !matches!(kind, Some(crate::config::DistKind::Uniform)) {
        return Err(shape_err(node, "a uniform sampling"));
    }
    match args.first().and_then(|a| a.as_nat_lit()) {
        Some(n) if n > 0 => Ok(n),
        _ => Err(KernelError::NonFiniteSample),
    }
}

fn sample_ubl(k: &Kernel, j: &UnaryJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let domain = sample_size(k, node, &j.term)?;
    let phi = k.meta_prop(node, "phi")?;
    let keep = k.meta_rat(node, "keep")?;
    if keep.is_negative() || keep > Rat::one() {
        return Err(KernelError::InvalidSampleGrade(crate::rat::fmt_rat(&keep)));
    }
    let needed = ExtRat::Fin(Rat::one() - keep.clone());
    if j.delta < needed {
        return Err(grade_err(node, &needed, &j.delta));
    }
    let expected_post = Assertion::meet(j.pre.clone(), Assertion::inj(phi.clone()));
    k.match_assertion(node, "postcondition", &j.post, &expected_post)?;
    let ob = Obligation {
        label: String::new(),
        gamma: with_mem(&j.gamma),
        psi: j.psi.clone(),
        kind: ObKind::FractionEq {
            pre: j.pre.clone(),
            domain,
            var: "v".into(),
            phi,
            delta: keep,
        },
        mode: DischargeMode::Eval,
    };
    Ok(RuleStep {
        premises: vec![],
        obligations: vec![("frac".to_string(), ObCheck::Engine(ob))],
    })
}

fn lin_exp(k: &Kernel, j: &UnaryJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let p1 = k.meta_assertion(node, "pre1")?;
    let p2 = k.meta_assertion(node, "pre2")?;
    let q1 = k.meta_assertion(node, "post1")?;
    let q2 = k.meta_assertion(node, "post2")?;
    let d1 = k.meta_grade(node, "d1")?;
    let d2 = k.meta_grade(node, "d2")?;
    let needed = d1.clone() + d2.clone();
    if j.delta < needed {
        return Err(grade_err(node, &needed, &j.delta));
    }
    let expected_pre = Assertion::Plus(Box::new(p1.clone()), Box::new(p2.clone()));
    let expected_post = Assertion::Plus(Box::new(q1.clone()), Box::new(q2.clone()));
    k.match_assertion(node, "precondition", &j.pre, &expected_pre)?;
    k.match_assertion(node, "postcondition", &j.post, &expected_post)?;
    Ok(RuleStep {
        premises: vec![
            uj(j, p1, j.term.clone(), q1, d1),
            uj(j, p2, j.term.clone(), q2, d2),
        ],
        obligations: vec![],
    })
}

fn unif_exp(k: &Kernel, j: &UnaryJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let domain = sample_size(k, node, &j.term)?;
    // U = the full range: the sampled value drops out and any state-only
    // pre-expectation carries through unchanged
    if node.meta.contains_key("carry") {
        let p = k.meta_assertion(node, "carry")?;
        if free_vars_assertion(&p).contains("v") {
            return Err(KernelError::MetavarScope {
                rule: node.rule.clone(),
                var: "v".into(),
                msg: "the carried pre-expectation must not mention the result".into(),
            });
        }
        k.match_assertion(node, "precondition", &j.pre, &p)?;
        k.match_assertion(node, "postcondition", &j.post, &p)?;
        return Ok(RuleStep {
            premises: vec![],
            obligations: vec![],
        });
    }
    let uphi = k.meta_prop(node, "uphi")?;
    let base = match node.meta.get("base") {
        Some(s) => sexpr::parse_expr(s, k.cfg).map_err(|e| KernelError::BadMeta {
            rule: node.rule.clone(),
            name: "base".into(),
            msg: e.to_string(),
        })?,
        None => Term::RatLit(Rat::one()),
    };
    let count = Term::Count(domain, "v".into(), Box::new(uphi.clone()));
    let frac = Term::Mul(
        Box::new(count),
        Box::new(Term::RatLit(Rat::one() / rat_u64(domain))),
    );
    let expected_pre = Assertion::q(Term::Mul(Box::new(frac), Box::new(base.clone())));
    let expected_post = Assertion::q(Term::Mul(
        Box::new(Term::IvExpr(Box::new(uphi))),
        Box::new(base),
    ));
    k.match_assertion(node, "precondition", &j.pre, &expected_pre)?;
    k.match_assertion(node, "postcondition", &j.post, &expected_post)?;
    Ok(RuleStep {
        premises: vec![],
        obligations: vec![],
    })
}

fn sample_r(k: &Kernel, j: &RelJudgment, node: &ProofNode) -> KResult<RuleStep> {
    if !matches!(j.left, Term::Sample(..)) || !matches!(j.right, Term::Sample(..)) {
        return Err(shape_err(node, "two sampling terms"));
    }
    let ratio = k.meta_rat(node, "ratio")?;
    if ratio.is_negative() || ratio > Rat::one() {
        return Err(KernelError::InvalidSampleGrade(crate::rat::fmt_rat(&ratio)));
    }
    let needed = ExtRat::Fin(ratio.clone());
    if j.delta < needed {
        return Err(grade_err(node, &needed, &j.delta));
    }
    let expected_post = Assertion::meet(
        Assertion::inj(Prop::eq(Term::var("v1"), Term::var("v2"))),
        j.pre.clone(),
    );
    k.match_assertion(node, "postcondition", &j.post, &expected_post)?;
    let ob = Obligation {
        label: String::new(),
        gamma: with_mems2(&j.gamma),
        psi: j.psi.clone(),
        kind: ObKind::SampleRatio {
            pre: j.pre.clone(),
            left: j.left.clone(),
            right: j.right.clone(),
            delta: ratio,
        },
        mode: DischargeMode::Eval,
    };
    Ok(RuleStep {
        premises: vec![],
        obligations: vec![("ratio".to_string(), ObCheck::Engine(ob))],
    })
}

// ---------------------------------------------------------------------------
// adversary rules
// ---------------------------------------------------------------------------

struct AdvParts {
    shape: AdvShape,
    k_calls: u64,
}

fn adv_shape(k: &Kernel, node: &ProofNode, adv: &str) -> KResult<AdvParts> {
    if k.cfg.adversaries.len() != 1 {
        return Err(KernelError::AdvContextNotSingleton(k.cfg.adversaries.len()));
    }
    let adv_ty = k
        .cfg
        .adversaries
        .get(adv)
        .ok_or_else(|| KernelError::AdvShape(format!("unknown adversary '{adv}'")))?;
    let shape = AdvShape::of(adv_ty, k.cfg).map_err(KernelError::AdvShape)?;
    if shape.oracle_cost != 1 {
        return Err(KernelError::OracleCostNotOne(shape.oracle_cost));
    }
    if !shape.sigma.non_monadic() {
        return Err(KernelError::MonadicAdversaryType { which: "σ" });
    }
    if !shape.tau.non_monadic() {
        return Err(KernelError::MonadicAdversaryType { which: "τ" });
    }
    if !shape.tau_prime.non_monadic() {
        return Err(KernelError::MonadicAdversaryType { which: "τ'" });
    }
    if !shape.sigma_adv.vars.is_empty() {
        return Err(KernelError::AdvShape(
            "the adversary's own footprint must be concrete".into(),
        ));
    }
    let k_calls = shape.cost;
    let _ = node;
    Ok(AdvParts { shape, k_calls })
}

/// The invariant family and per-call grades: a single `inv`/`d` pair is the
/// constant family (one premise, grade k·δ); `invs`/`ds` give the indexed
/// family (k premises, grade Σδᵢ).
fn adv_family(
    k: &Kernel,
    node: &ProofNode,
    calls: u64,
) -> KResult<(Vec<Assertion>, Vec<ExtRat>, bool)> {
    if node.meta.contains_key("invs") {
        let invs = k.meta_assertion_list(node, "invs")?;
        let ds = k.meta_grade_list(node, "ds")?;
        if invs.len() != (calls + 1) as usize {
            return Err(KernelError::BadMeta {
                rule: node.rule.clone(),
                name: "invs".into(),
                msg: format!("expected {} invariants for {calls} calls", calls + 1),
            });
        }
        if ds.len() != calls as usize {
            return Err(KernelError::BadMeta {
                rule: node.rule.clone(),
                name: "ds".into(),
                msg: format!("expected {calls} grades"),
            });
        }
        Ok((invs, ds, false))
    } else {
        let inv = k.meta_assertion(node, "inv")?;
        let d = k.meta_grade(node, "d")?;
        Ok((vec![inv; (calls + 1) as usize], vec![d; calls as usize], true))
    }
}

fn adv_u(k: &Kernel, j: &UnaryJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let (adv, x, body) = match &j.term {
        Term::App(f, arg) => match (f.as_ref(), arg.as_ref()) {
            (Term::AdvVar(a), Term::Lam(x, _, body)) => (a.clone(), x.clone(), (**body).clone()),
            _ => return Err(shape_err(node, "A (fun x => t)")),
        },
        _ => return Err(shape_err(node, "A (fun x => t)")),
    };
    if !j.gamma.is_empty() {
        return Err(shape_err(node, "an empty variable context Γ"));
    }
    let parts = adv_shape(k, node, &adv)?;
    let calls = parts.k_calls;
    let (invs, ds, constant) = adv_family(k, node, calls)?;
    for (i, inv) in invs.iter().enumerate() {
        let fv = free_vars_assertion(inv);
        if let Some(bad) = fv.iter().find(|v| *v != "s") {
            return Err(KernelError::MetavarScope {
                rule: node.rule.clone(),
                var: bad.clone(),
                msg: format!("invariant {i} must be a predicate over the state only"),
            });
        }
    }
    k.match_assertion(node, "precondition", &j.pre, &invs[0])?;
    k.match_assertion(node, "postcondition", &j.post, &invs[calls as usize])?;
    let total: ExtRat = ds
        .iter()
        .fold(ExtRat::zero(), |acc, d| acc + d.clone());
    if j.delta < total {
        return Err(grade_err(node, &total, &j.delta));
    }
    let safe_mode = if k.mode.is_quantitative() {
        SafeMode::UnaryQuant
    } else {
        SafeMode::UnaryBool
    };
    let mut obligations = Vec::new();
    let distinct = if constant { 1 } else { invs.len() };
    for (i, inv) in invs.iter().take(distinct).enumerate() {
        obligations.push((
            format!("safe-{i}"),
            ObCheck::Safe {
                assertion: inv.clone(),
                sigma: parts.shape.sigma_adv.clone(),
                mode: safe_mode,
            },
        ));
    }
    if !constant {
        for i in 0..calls as usize {
            obligations.push((
                format!("mono-{i}"),
                k.entail_ob(
                    with_mem(&j.gamma),
                    j.psi.clone(),
                    invs[i].clone(),
                    invs[i + 1].clone(),
                ),
            ));
        }
    }
    let premise_count = if constant { 1 } else { calls as usize };
    let mut premises = Vec::new();
    for i in 0..premise_count {
        premises.push(Judgment::Unary(UnaryJudgment {
            gamma: vec![(x.clone(), parts.shape.sigma.clone())],
            psi: j.psi.clone(),
            pre: invs[i].clone(),
            term: body.clone(),
            post: invs[i + 1].clone(),
            delta: ds[i].clone(),
        }));
    }
    Ok(RuleStep {
        premises,
        obligations,
    })
}

/// Structural extensional equality at a type.
pub fn eq_tau(ty: &Type, lhs: Term, rhs: Term) -> Result<Prop, KernelError> {
    match ty {
        Type::Base(_) | Type::Bool | Type::Nat(_) | Type::Unit | Type::Val | Type::Mem => {
            Ok(Prop::eq(lhs, rhs))
        }
        Type::Prod(a, b) => {
            let first = eq_tau(
                a,
                Term::Proj1(Box::new(lhs.clone())),
                Term::Proj1(Box::new(rhs.clone())),
            )?;
            let second = eq_tau(b, Term::Proj2(Box::new(lhs)), Term::Proj2(Box::new(rhs)))?;
            Ok(Prop::and(first, second))
        }
        Type::Arrow(a, b) => {
            let args = eq_tau(a, Term::var("y1"), Term::var("y2"))?;
            let results = eq_tau(b, Term::app(lhs, Term::var("y1")), Term::app(rhs, Term::var("y2")))?;
            Ok(Prop::Forall(
                "y1".into(),
                (**a).clone(),
                Box::new(Prop::Forall(
                    "y2".into(),
                    (**a).clone(),
                    Box::new(Prop::Imp(Box::new(args), Box::new(results))),
                )),
            ))
        }
        Type::Monadic(..) | Type::Forall(..) => Err(KernelError::MonadicAdversaryType {
            which: "extensional equality operand",
        }),
    }
}

fn adv_r(k: &Kernel, j: &RelJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let decompose = |t: &Term| -> Option<(String, String, Term)> {
        match t {
            Term::App(f, arg) => match (f.as_ref(), arg.as_ref()) {
                (Term::AdvVar(a), Term::Lam(x, _, body)) => {
                    Some((a.clone(), x.clone(), (**body).clone()))
                }
                _ => None,
            },
            _ => None,
        }
    };
    let Some((a1, x1, b1)) = decompose(&j.left) else {
        return Err(shape_err(node, "A (fun x1 => t1) on the left"));
    };
    let Some((a2, x2, b2)) = decompose(&j.right) else {
        return Err(shape_err(node, "A (fun x2 => t2) on the right"));
    };
    if a1 != a2 {
        return Err(shape_err(node, "the same adversary on both sides"));
    }
    if !j.gamma.is_empty() {
        return Err(shape_err(node, "an empty variable context Γ"));
    }
    // the two oracle bodies must not capture each other's argument
    if free_vars_term(&b2).contains(&x1) && x1 != x2 {
        return Err(KernelError::MetavarScope {
            rule: node.rule.clone(),
            var: x1.clone(),
            msg: "is free in the right oracle body".into(),
        });
    }
    if free_vars_term(&b1).contains(&x2) && x1 != x2 {
        return Err(KernelError::MetavarScope {
            rule: node.rule.clone(),
            var: x2.clone(),
            msg: "is free in the left oracle body".into(),
        });
    }
    // α-rename if the two sides use the same binder
    let (x2, b2) = if x1 == x2 {
        let fresh = format!("{x2}_r");
        (
            fresh.clone(),
            Subst::one(&x2, Term::var(&fresh)).apply_term(&b2),
        )
    } else {
        (x2, b2)
    };
    let parts = adv_shape(k, node, &a1)?;
    let calls = parts.k_calls;
    let (invs, ds, constant) = adv_family(k, node, calls)?;
    for (i, inv) in invs.iter().enumerate() {
        let fv = free_vars_assertion(inv);
        if let Some(bad) = fv.iter().find(|v| *v != "s1" && *v != "s2") {
            return Err(KernelError::MetavarScope {
                rule: node.rule.clone(),
                var: bad.clone(),
                msg: format!("invariant {i} must be a relation over the two states only"),
            });
        }
    }
    k.match_assertion(node, "precondition", &j.pre, &invs[0])?;
    let eq_result = eq_tau(&parts.shape.tau_prime, Term::var("v1"), Term::var("v2"))?;
    let expected_post = Assertion::meet(
        Assertion::inj(eq_result),
        invs[calls as usize].clone(),
    );
    k.match_assertion(node, "postcondition", &j.post, &expected_post)?;
    let total: ExtRat = ds
        .iter()
        .fold(ExtRat::zero(), |acc, d| acc + d.clone());
    if j.delta < total {
        return Err(grade_err(node, &total, &j.delta));
    }
    let mut obligations = Vec::new();
    let distinct = if constant { 1 } else { invs.len() };
    for (i, inv) in invs.iter().take(distinct).enumerate() {
        obligations.push((
            format!("safe-{i}"),
            ObCheck::Safe {
                assertion: inv.clone(),
                sigma: parts.shape.sigma_adv.clone(),
                mode: SafeMode::Relational,
            },
        ));
    }
    if !constant {
        for i in 0..calls as usize {
            obligations.push((
                format!("mono-{i}"),
                k.entail_ob(
                    with_mems2(&j.gamma),
                    j.psi.clone(),
                    invs[i].clone(),
                    invs[i + 1].clone(),
                ),
            ));
        }
    }
    let eq_arg = eq_tau(&parts.shape.sigma, Term::var(&x1), Term::var(&x2))?;
    let eq_step = eq_tau(&parts.shape.tau, Term::var("v1"), Term::var("v2"))?;
    let premise_count = if constant { 1 } else { calls as usize };
    let mut premises = Vec::new();
    for i in 0..premise_count {
        premises.push(Judgment::Rel(RelJudgment {
            gamma: vec![
                (x1.clone(), parts.shape.sigma.clone()),
                (x2.clone(), parts.shape.sigma.clone()),
            ],
            psi: {
                let mut psi = j.psi.clone();
                psi.push(eq_arg.clone());
                psi
            },
            pre: invs[i].clone(),
            left: b1.clone(),
            right: b2.clone(),
            post: Assertion::meet(Assertion::inj(eq_step.clone()), invs[i + 1].clone()),
            eps: Rat::zero(),
            delta: ds[i].clone(),
        }));
    }
    Ok(RuleStep {
        premises,
        obligations,
    })
}

// ---------------------------------------------------------------------------
// relational monadic rules
// ---------------------------------------------------------------------------

fn unit_r(k: &Kernel, j: &RelJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let unwrap_unit = |t: &Term| -> Option<Term> {
        match t {
            Term::UnitM(a) => Some((**a).clone()),
            Term::Skip => Some(Term::Star),
            _ => None,
        }
    };
    let (Some(a1), Some(a2)) = (unwrap_unit(&j.left), unwrap_unit(&j.right)) else {
        return Err(shape_err(node, "unit t1 ~ unit t2"));
    };
    let (a1, a2) = (&Box::new(a1), &Box::new(a2));
    let phi = match node.meta.get("phi") {
        Some(_) => k.meta_prop(node, "phi")?,
        None => Prop::True,
    };
    let expected_post = Assertion::meet(Assertion::inj(phi.clone()), j.pre.clone());
    k.match_assertion(node, "postcondition", &j.post, &expected_post)?;
    let mut obligations = Vec::new();
    if phi != Prop::True {
        let mut s = Subst::new();
        s.insert("v1", (**a1).clone());
        s.insert("v2", (**a2).clone());
        obligations.push((
            "value-fact".to_string(),
            ObCheck::Engine(Obligation {
                label: String::new(),
                gamma: with_mems2(&j.gamma),
                psi: j.psi.clone(),
                kind: ObKind::Fact(s.apply_prop(&phi)),
                mode: DischargeMode::Eval,
            }),
        ));
    }
    Ok(RuleStep {
        premises: vec![],
        obligations,
    })
}

fn one_sided_unit(k: &Kernel, j: &RelJudgment, node: &ProofNode, left: bool) -> KResult<RuleStep> {
    let (unit_side, other_side, vn_active, vn_skip) = if left {
        (&j.left, &j.right, "v1", "v2")
    } else {
        (&j.right, &j.left, "v2", "v1")
    };
    let Term::UnitM(a) = unit_side else {
        return Err(shape_err(node, "a unit on the active side"));
    };
    if !matches!(other_side, Term::Skip) {
        return Err(shape_err(node, "skip on the passive side"));
    }
    let phi = match node.meta.get("phi") {
        Some(_) => k.meta_prop(node, "phi")?,
        None => Prop::True,
    };
    let expected_post = Assertion::meet(Assertion::inj(phi.clone()), j.pre.clone());
    k.match_assertion(node, "postcondition", &j.post, &expected_post)?;
    let mut obligations = Vec::new();
    if phi != Prop::True {
        let mut s = Subst::new();
        s.insert(vn_active, (**a).clone());
        s.insert(vn_skip, Term::Star);
        obligations.push((
            "value-fact".to_string(),
            ObCheck::Engine(Obligation {
                label: String::new(),
                gamma: with_mems2(&j.gamma),
                psi: j.psi.clone(),
                kind: ObKind::Fact(s.apply_prop(&phi)),
                mode: DischargeMode::Eval,
            }),
        ));
    }
    Ok(RuleStep {
        premises: vec![],
        obligations,
    })
}

fn mlet_r(k: &Kernel, j: &RelJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let (Term::LetM(x1, t1, u1), Term::LetM(x2, t2, u2)) = (&j.left, &j.right) else {
        return Err(shape_err(node, "let on both sides"));
    };
    let q = k.meta_assertion(node, "q")?;
    let d1 = k.meta_grade(node, "d1")?;
    let d2 = k.meta_grade(node, "d2")?;
    let needed = d1.clone() + d2.clone();
    if j.delta < needed {
        return Err(grade_err(node, &needed, &j.delta));
    }
    // distinct binder names across the two sides (α-rename the right side
    // when they clash)
    let (x2r, u2r) = if x1 == x2 {
        let fresh = format!("{x2}_r");
        (
            fresh.clone(),
            Subst::one(x2, Term::var(&fresh)).apply_term(u2),
        )
    } else {
        (x2.clone(), (**u2).clone())
    };
    for v in [x1, &x2r] {
        if free_vars_assertion(&j.post).contains(v) {
            return Err(KernelError::MetavarScope {
                rule: node.rule.clone(),
                var: v.clone(),
                msg: "is bound by the let but free in the postcondition".into(),
            });
        }
    }
    let tau1 = k.inner_type(&j.gamma, t1)?;
    let tau2 = k.inner_type(&j.gamma, t2)?;
    let child1 = rj(j, j.pre.clone(), (**t1).clone(), (**t2).clone(), q.clone(), d1);
    let mut gamma2 = j.gamma.clone();
    gamma2.push((x1.clone(), tau1));
    gamma2.push((x2r.clone(), tau2));
    let child2 = Judgment::Rel(RelJudgment {
        gamma: gamma2,
        psi: j.psi.clone(),
        pre: asub(&q, &[("v1", Term::var(x1)), ("v2", Term::var(&x2r))]),
        left: (**u1).clone(),
        right: u2r,
        post: j.post.clone(),
        eps: Rat::zero(),
        delta: d2,
    });
    Ok(RuleStep {
        premises: vec![child1, child2],
        obligations: vec![],
    })
}

fn one_sided_mlet(k: &Kernel, j: &RelJudgment, node: &ProofNode, left: bool) -> KResult<RuleStep> {
    let q = k.meta_assertion(node, "q")?;
    let d1 = k.meta_grade(node, "d1")?;
    let d2 = k.meta_grade(node, "d2")?;
    let needed = d1.clone() + d2.clone();
    if j.delta < needed {
        return Err(grade_err(node, &needed, &j.delta));
    }
    let (let_side, passive) = if left {
        (&j.left, &j.right)
    } else {
        (&j.right, &j.left)
    };
    let Term::LetM(x, bound, body) = let_side else {
        return Err(shape_err(node, "a let on the active side"));
    };
    if free_vars_assertion(&j.post).contains(x) {
        return Err(KernelError::MetavarScope {
            rule: node.rule.clone(),
            var: x.clone(),
            msg: "is bound by the let but free in the postcondition".into(),
        });
    }
    let tau = k.inner_type(&j.gamma, bound)?;
    let passive_var = if left { "x2_skip" } else { "x1_skip" };
    let (child1, mid_pre, c2_left, c2_right) = if left {
        (
            rj(j, j.pre.clone(), (**bound).clone(), Term::Skip, q.clone(), d1),
            asub(&q, &[("v1", Term::var(x)), ("v2", Term::Star)]),
            (**body).clone(),
            passive.clone(),
        )
    } else {
        (
            rj(j, j.pre.clone(), Term::Skip, (**bound).clone(), q.clone(), d1),
            asub(&q, &[("v2", Term::var(x)), ("v1", Term::Star)]),
            passive.clone(),
            (**body).clone(),
        )
    };
    let mut gamma2 = j.gamma.clone();
    gamma2.push((x.clone(), tau));
    gamma2.push((passive_var.into(), Type::Unit));
    let child2 = Judgment::Rel(RelJudgment {
        gamma: gamma2,
        psi: j.psi.clone(),
        pre: mid_pre,
        left: c2_left,
        right: c2_right,
        post: j.post.clone(),
        eps: Rat::zero(),
        delta: d2,
    });
    Ok(RuleStep {
        premises: vec![child1, child2],
        obligations: vec![],
    })
}

fn read_r(k: &Kernel, j: &RelJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let (Term::Read(a1), Term::Read(a2)) = (&j.left, &j.right) else {
        return Err(shape_err(node, "read ~ read"));
    };
    let expected_pre = asub(
        &j.post,
        &[
            ("v1", Term::select(Term::var("s1"), *a1)),
            ("v2", Term::select(Term::var("s2"), *a2)),
        ],
    );
    k.match_assertion(node, "precondition", &j.pre, &expected_pre)?;
    Ok(RuleStep {
        premises: vec![],
        obligations: vec![],
    })
}

fn write_r(k: &Kernel, j: &RelJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let (Term::Write(a1, u1), Term::Write(a2, u2)) = (&j.left, &j.right) else {
        return Err(shape_err(node, "write ~ write"));
    };
    let ctx = Contexts::with_gamma(j.gamma.clone());
    k.checker.check(&ctx, u1, &Type::Val)?;
    k.checker.check(&ctx, u2, &Type::Val)?;
    let expected_pre = asub(
        &j.post,
        &[
            ("s1", Term::store(Term::var("s1"), *a1, (**u1).clone())),
            ("s2", Term::store(Term::var("s2"), *a2, (**u2).clone())),
        ],
    );
    k.match_assertion(node, "precondition", &j.pre, &expected_pre)?;
    Ok(RuleStep {
        premises: vec![],
        obligations: vec![],
    })
}

fn mcase_r(k: &Kernel, j: &RelJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let (Term::Case(b1, t11, t12), Term::Case(b2, t21, t22)) = (&j.left, &j.right) else {
        return Err(shape_err(node, "if ~ if"));
    };
    let p1 = k.meta_assertion(node, "p1")?;
    let p2 = k.meta_assertion(node, "p2")?;
    let expected_pre = Assertion::join(
        Assertion::meet(Assertion::inj(Prop::guard(b1, true)), p1.clone()),
        Assertion::meet(Assertion::inj(Prop::guard(b1, false)), p2.clone()),
    );
    k.match_assertion(node, "precondition", &j.pre, &expected_pre)?;
    // synchronization: the two computations take the same branch
    let sync = (
        "sync".to_string(),
        k.entail_ob(
            with_mems2(&j.gamma),
            j.psi.clone(),
            j.pre.clone(),
            Assertion::inj(Prop::eq((**b1).clone(), (**b2).clone())),
        ),
    );
    let mut c1 = RelJudgment {
        gamma: j.gamma.clone(),
        psi: j.psi.clone(),
        pre: p1,
        left: (**t11).clone(),
        right: (**t21).clone(),
        post: j.post.clone(),
        eps: Rat::zero(),
        delta: j.delta.clone(),
    };
    c1.psi.push(Prop::guard(b1, true));
    c1.psi.push(Prop::guard(b2, true));
    let mut c2 = RelJudgment {
        gamma: j.gamma.clone(),
        psi: j.psi.clone(),
        pre: p2,
        left: (**t12).clone(),
        right: (**t22).clone(),
        post: j.post.clone(),
        eps: Rat::zero(),
        delta: j.delta.clone(),
    };
    c2.psi.push(Prop::guard(b1, false));
    c2.psi.push(Prop::guard(b2, false));
    Ok(RuleStep {
        premises: vec![Judgment::Rel(c1), Judgment::Rel(c2)],
        obligations: vec![sync],
    })
}

fn mcasen_r(k: &Kernel, j: &RelJudgment, node: &ProofNode) -> KResult<RuleStep> {
    let (Term::CaseNat(e1, arms1, d1), Term::CaseNat(e2, arms2, d2)) = (&j.left, &j.right) else {
        return Err(shape_err(node, "match ~ match"));
    };
    if arms1.len() != arms2.len() || d1.is_some() != d2.is_some() {
        return Err(shape_err(node, "matches with the same arm structure"));
    }
    let ps = k.meta_assertion_list(node, "ps")?;
    let expected_count = arms1.len() + usize::from(d1.is_some());
    if ps.len() != expected_count {
        return Err(KernelError::BadMeta {
            rule: node.rule.clone(),
            name: "ps".into(),
            msg: format!("expected {expected_count} assertions"),
        });
    }
    let sync = (
        "sync".to_string(),
        k.entail_ob(
            with_mems2(&j.gamma),
            j.psi.clone(),
            j.pre.clone(),
            Assertion::inj(Prop::eq((**e1).clone(), (**e2).clone())),
        ),
    );
    let mut disjuncts = Vec::new();
    let mut premises = Vec::new();
    for (i, ((arm1, arm2), p)) in arms1.iter().zip(arms2).zip(&ps).enumerate() {
        let g1 = Prop::eq((**e1).clone(), Term::nat_lit(i as u64));
        let g2 = Prop::eq((**e2).clone(), Term::nat_lit(i as u64));
        disjuncts.push(Assertion::meet(Assertion::inj(g1.clone()), p.clone()));
        let mut cj = RelJudgment {
            gamma: j.gamma.clone(),
            psi: j.psi.clone(),
            pre: p.clone(),
            left: arm1.clone(),
            right: arm2.clone(),
            post: j.post.clone(),
            eps: Rat::zero(),
            delta: j.delta.clone(),
        };
        cj.psi.push(g1);
        cj.psi.push(g2);
        premises.push(Judgment::Rel(cj));
    }
    if let (Some(da1), Some(da2)) = (d1, d2) {
        let p = &ps[arms1.len()];
        let mut g1 = Prop::True;
        let mut g2 = Prop::True;
        for i in 0..arms1.len() {
            let ne1 = Prop::Cmp(
                CmpOp::Ne,
                Box::new((**e1).clone()),
                Box::new(Term::nat_lit(i as u64)),
            );
            let ne2 = Prop::Cmp(
                CmpOp::Ne,
                Box::new((**e2).clone()),
                Box::new(Term::nat_lit(i as u64)),
            );
            g1 = if matches!(g1, Prop::True) { ne1 } else { Prop::and(g1, ne1) };
            g2 = if matches!(g2, Prop::True) { ne2 } else { Prop::and(g2, ne2) };
        }
        disjuncts.push(Assertion::meet(Assertion::inj(g1.clone()), p.clone()));
        let mut cj = RelJudgment {
            gamma: j.gamma.clone(),
            psi: j.psi.clone(),
            pre: p.clone(),
            left: (**da1).clone(),
            right: (**da2).clone(),
            post: j.post.clone(),
            eps: Rat::zero(),
            delta: j.delta.clone(),
        };
        cj.psi.push(g1);
        cj.psi.push(g2);
        premises.push(Judgment::Rel(cj));
    }
    let expected_pre = Assertion::join_all(disjuncts);
    k.match_assertion(node, "precondition", &j.pre, &expected_pre)?;
    Ok(RuleStep {
        premises,
        obligations: vec![sync],
    })
}

// ---------------------------------------------------------------------------
// independent grade recomputation
// ---------------------------------------------------------------------------

pub(crate) fn combine_grades(
    k: &Kernel,
    node: &super::CheckedNode,
    kids: &[ExtRat],
) -> KResult<ExtRat> {
    let sum = || {
        kids.iter()
            .fold(ExtRat::zero(), |acc, g| acc + g.clone())
    };
    let max = || {
        kids.iter()
            .fold(ExtRat::zero(), |acc, g| acc.max(g.clone()))
    };
    Ok(match node.rule.as_str() {
        // leaves: the stated grade was validated against the rule's own
        // side conditions
        "UNIT-U" | "READ-U" | "WRITE-U" | "SAMPLE-UBL" | "UNIF-EXP" | "UNIT-R" | "READ-R"
        | "WRITE-R" | "L-UNIT-R" | "R-UNIT-R" | "SAMPLE-R" => node.conclusion.delta().clone(),
        "MLET-U" | "MLET-R" | "L-MLET-R" | "R-MLET-R" | "LIN-EXP" | "AND-POST-U" => sum(),
        "MCASE-U" | "MCASEN-U" | "MCASE-R" | "MCASEN-R" | "OR-PRE-U" | "CONSEQ-U" => max(),
        "MFOLD-U" => {
            let Judgment::Unary(u) = &node.conclusion else {
                return Err(KernelError::Script("mfold on a relational node".into()));
            };
            let Term::MFold(n, _, _) = &u.term else {
                return Err(KernelError::Script("mfold node without mfold term".into()));
            };
            let ctx = Contexts::with_gamma(u.gamma.clone());
            let bound = match k.checker.infer(&ctx, n)? {
                Type::Nat(Some(b)) => b,
                _ => return Err(KernelError::Script("unbounded mfold".into())),
            };
            kids[0].clone() + ExtRat::Fin(rat_u64(bound)) * kids[1].clone()
        }
        "ADV-U" | "ADV-R" => {
            let adv = k.cfg.adversaries.values().next();
            let calls = adv
                .and_then(|ty| AdvShape::of(ty, k.cfg).ok())
                .map(|s| s.cost)
                .unwrap_or(0);
            if kids.len() == 1 {
                ExtRat::Fin(rat_u64(calls)) * kids[0].clone()
            } else {
                sum()
            }
        }
        _ => sum(),
    })
}
