//! Proof certificates: the checked conclusion, grade, admitted obligations
//! and input hashes, with a stable serialization (re-checking the same
//! inputs reproduces the certificate byte-for-byte).

use crate::config::Program;
use crate::kernel::script::ProofScript;
use crate::kernel::{AdmittedLemma, CheckReport, Judgment, Kernel, KernelError};
use crate::logics::LogicMode;
use crate::syntax::print::Printer;
use crate::typecheck::{typecheck_program, Checker, Contexts};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Certificate {
    pub version: u32,
    pub logic: String,
    pub program_sha256: String,
    pub config_sha256: String,
    pub conclusion: ConclusionSummary,
    pub rule_count: u64,
    pub obligations_checked: u64,
    pub admitted: Vec<AdmittedLemma>,
}

#[derive(Debug, Serialize)]
pub struct ConclusionSummary {
    pub pre: String,
    pub term: String,
    pub term_right: Option<String>,
    pub ty: String,
    pub ty_right: Option<String>,
    pub post: String,
    pub grade: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckProofError {
    #[error("definition '{0}' fails to type-check: {1}")]
    Def(String, crate::typecheck::TypeError),
    #[error("the conclusion term does not type-check at the stated type: {0}")]
    Conclusion(crate::typecheck::TypeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Check a proof script against a program: type-check the program and the
/// conclusion, run the kernel, and produce the certificate.
pub fn check_proof(
    program: &Program,
    program_source: &str,
    script: &ProofScript,
) -> Result<(Certificate, CheckReport), CheckProofError> {
    typecheck_program(program).map_err(|(name, e)| CheckProofError::Def(name, e))?;
    let cfg = &program.config;
    let checker = Checker::new(cfg);
    let ctx = Contexts::with_gamma(script.goal.gamma().to_vec());
    match &script.goal {
        Judgment::Unary(u) => {
            checker
                .check(&ctx, &u.term, &script.goal_types.0)
                .map_err(CheckProofError::Conclusion)?;
        }
        Judgment::Rel(r) => {
            checker
                .check(&ctx, &r.left, &script.goal_types.0)
                .map_err(CheckProofError::Conclusion)?;
            let ty2 = script
                .goal_types
                .1
                .as_ref()
                .expect("relational goals carry two types");
            checker
                .check(&ctx, &r.right, ty2)
                .map_err(CheckProofError::Conclusion)?;
        }
    }
    let kernel = Kernel::new(cfg, script.mode);
    let (_checked, report) = kernel.check_proof(&script.goal, &script.root)?;
    let certificate = build_certificate(program, program_source, script, &report);
    Ok((certificate, report))
}

fn build_certificate(
    program: &Program,
    program_source: &str,
    script: &ProofScript,
    report: &CheckReport,
) -> Certificate {
    let cfg = &program.config;
    let pr = Printer::new(cfg);
    let conclusion = match &script.goal {
        Judgment::Unary(u) => ConclusionSummary {
            pre: pr.assertion_sexpr(&u.pre),
            term: pr.term(&u.term),
            term_right: None,
            ty: pr.ty(&script.goal_types.0),
            ty_right: None,
            post: pr.assertion_sexpr(&u.post),
            grade: u.delta.to_string(),
        },
        Judgment::Rel(r) => ConclusionSummary {
            pre: pr.assertion_sexpr(&r.pre),
            term: pr.term(&r.left),
            term_right: Some(pr.term(&r.right)),
            ty: pr.ty(&script.goal_types.0),
            ty_right: script.goal_types.1.as_ref().map(|t| pr.ty(t)),
            post: pr.assertion_sexpr(&r.post),
            grade: format!("(0, {})", r.delta),
        },
    };
    let config_json =
        serde_json::to_string(cfg).expect("config serialization is infallible");
    Certificate {
        version: 1,
        logic: script.mode.name().to_string(),
        program_sha256: sha256_hex(program_source.as_bytes()),
        config_sha256: sha256_hex(config_json.as_bytes()),
        conclusion,
        rule_count: report.rule_count,
        obligations_checked: report.obligations_checked,
        admitted: report.admitted.clone(),
    }
}

pub fn certificate_json(cert: &Certificate) -> String {
    serde_json::to_string_pretty(cert).expect("certificate serialization is infallible")
}

/// The mode of a logic by CLI name, as used by `check-proof --logic`.
pub fn parse_logic(name: &str) -> Option<LogicMode> {
    LogicMode::parse(name)
}
