//! The obligation discharge engine: exact enumeration of entailments, HOL
//! facts, sampling side conditions, and the Safe/RSafe checks.
//!
//! Evaluation is exact; `eval` mode enumerates every instantiation of the
//! obligation's context (variables over finite domains, the distinguished
//! memory variables over the obligation's location footprint). The raw
//! instantiation product is bounded by the configured cap.
//!
//! Two exactness-preserving strategies keep the large table-shaped
//! obligations (10^7–10^8 raw memories) inside the acceptance-time budgets:
//!
//!   1. memory-first enumeration — hypothesis meet-factors that mention no
//!      environment variable are evaluated once per memory assignment (in
//!      parallel), and only surviving memories enter the environment phase;
//!   2. incremental environment pruning — environment variables are bound
//!      one at a time and every hypothesis factor is evaluated as soon as
//!      its variables are bound, cutting vacuous branches immediately
//!      (hypothesis factors like `w = s[a]` pin their variable to a single
//!      value instead of multiplying the search space).

use crate::config::ProgramConfig;
use crate::logics::{assertion_footprint, prop_footprint, AssertEval, SemError};
use crate::rat::{rat_u64, ExtRat, Rat};
use crate::semantics::{Env, Interp, Memory, Value};
use crate::syntax::ast::*;
use crate::syntax::norm::normalize_assertion;
use crate::syntax::subst::{alpha_eq_assertion, free_vars_assertion, free_vars_prop, free_vars_term};
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum DischargeMode {
    Eval,
    Arith,
    Admit(String),
}

#[derive(Clone, Debug)]
pub struct Obligation {
    /// Stable label (rule-specific): used to address discharge-mode
    /// overrides from proof scripts and reported in certificates.
    pub label: String,
    pub gamma: Vec<(Ident, Type)>,
    pub psi: Vec<Prop>,
    pub kind: ObKind,
    pub mode: DischargeMode,
}

#[derive(Clone, Debug)]
pub enum ObKind {
    /// `Γ|Ψ ⊢ lhs ⇛ rhs`; `quant` selects the reversed-[0,∞] reading
    /// (lhs ≥ rhs pointwise) instead of the Boolean one.
    Entail {
        lhs: Assertion,
        rhs: Assertion,
        quant: bool,
    },
    /// `Γ|Ψ ⊢ φ`.
    Fact(Prop),
    /// Under `pre`: `|{x ∈ {0..domain-1} | φ}| / domain = delta` (the
    /// SAMPLE-UBL side condition).
    FractionEq {
        pre: Assertion,
        domain: u64,
        var: Ident,
        phi: Prop,
        delta: Rat,
    },
    /// Under `pre` (relational): one sampling's support is contained in the
    /// other's and `delta = 1 − |small|/|big|` (the SAMPLE-R side condition).
    SampleRatio {
        pre: Assertion,
        left: Term,
        right: Term,
        delta: Rat,
    },
}

#[derive(Debug, Error)]
pub enum DischargeError {
    #[error("domain too large: {needed} instantiations exceed the cap {cap} (admit the obligation or raise the cap)")]
    DomainTooLarge { needed: u128, cap: u64 },
    #[error("cannot enumerate the domain of '{0}' (admit the obligation)")]
    NotEnumerable(String),
    #[error("evaluation failed: {0}")]
    Sem(#[from] SemError),
    #[error("arith mode requires a closed obligation, but '{0}' is free")]
    ArithNotClosed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Outcome {
    Ok,
    Admitted(String),
    Failed(String),
}

pub struct EngineReport {
    pub outcome: Outcome,
    pub instantiations: u128,
}

pub struct Engine<'a> {
    pub cfg: &'a ProgramConfig,
    pub cap: u64,
    /// Survivor sets keyed by (env-free factors, footprint, mode): the same
    /// invariant hypothesis recurs across a derivation's obligations, so the
    /// expensive memory pass is shared.
    survivor_cache: std::sync::Mutex<
        std::collections::HashMap<String, std::sync::Arc<Vec<(u128, Option<ExtRat>)>>>,
    >,
}

const MEM_VAR_NAMES: [&str; 3] = ["s", "s1", "s2"];

/// One hypothesis item: a meet-factor of the entailment hypothesis or a Ψ
/// assumption, with its free variables.
enum HypItem {
    Factor(Assertion, BTreeSet<Ident>),
    Psi(Prop, BTreeSet<Ident>),
}

impl HypItem {
    fn vars(&self) -> &BTreeSet<Ident> {
        match self {
            HypItem::Factor(_, v) | HypItem::Psi(_, v) => v,
        }
    }
}

impl<'a> Engine<'a> {
    pub fn new(cfg: &'a ProgramConfig) -> Self {
        Engine {
            cfg,
            cap: cfg.effective_cap(),
            survivor_cache: std::sync::Mutex::new(std::collections::HashMap::new()),
        }
    }

    pub fn discharge(&self, ob: &Obligation) -> Result<EngineReport, DischargeError> {
        match &ob.mode {
            DischargeMode::Admit(name) => Ok(EngineReport {
                outcome: Outcome::Admitted(name.clone()),
                instantiations: 0,
            }),
            DischargeMode::Arith => {
                if !ob.gamma.is_empty() || !self.free_vars_of(ob).is_empty() {
                    return Err(DischargeError::ArithNotClosed(
                        ob.gamma
                            .first()
                            .map(|(n, _)| n.clone())
                            .or_else(|| self.free_vars_of(ob).into_iter().next())
                            .unwrap_or_default(),
                    ));
                }
                self.run_eval(ob)
            }
            DischargeMode::Eval => self.run_eval(ob),
        }
    }

    fn free_vars_of(&self, ob: &Obligation) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        match &ob.kind {
            ObKind::Entail { lhs, rhs, .. } => {
                out.extend(free_vars_assertion(lhs));
                out.extend(free_vars_assertion(rhs));
            }
            ObKind::Fact(p) => out.extend(free_vars_prop(p)),
            ObKind::FractionEq { pre, phi, var, .. } => {
                out.extend(free_vars_assertion(pre));
                let mut inner = free_vars_prop(phi);
                inner.remove(var);
                out.extend(inner);
            }
            ObKind::SampleRatio {
                pre, left, right, ..
            } => {
                out.extend(free_vars_assertion(pre));
                out.extend(free_vars_term(left));
                out.extend(free_vars_term(right));
            }
        }
        for p in &ob.psi {
            out.extend(free_vars_prop(p));
        }
        for (x, _) in &ob.gamma {
            out.remove(x);
        }
        for v in MEM_VAR_NAMES {
            out.remove(v);
        }
        out.remove("v");
        out.remove("v1");
        out.remove("v2");
        out
    }

    /// Location footprint of everything the obligation evaluates; `None`
    /// means the whole universe.
    fn footprint(&self, ob: &Obligation) -> Option<BTreeSet<LocId>> {
        let mut out = BTreeSet::new();
        let mut ok = true;
        let mut join = |fp: Option<BTreeSet<LocId>>, ok: &mut bool| match fp {
            None => *ok = false,
            Some(f) => out.extend(f),
        };
        match &ob.kind {
            ObKind::Entail { lhs, rhs, .. } => {
                join(assertion_footprint(self.cfg, lhs), &mut ok);
                join(assertion_footprint(self.cfg, rhs), &mut ok);
            }
            ObKind::Fact(p) => join(prop_footprint(self.cfg, p), &mut ok),
            ObKind::FractionEq { pre, phi, .. } => {
                join(assertion_footprint(self.cfg, pre), &mut ok);
                join(prop_footprint(self.cfg, phi), &mut ok);
            }
            ObKind::SampleRatio { pre, .. } => {
                join(assertion_footprint(self.cfg, pre), &mut ok);
            }
        }
        for p in &ob.psi {
            join(prop_footprint(self.cfg, p), &mut ok);
        }
        if ok {
            Some(out)
        } else {
            None
        }
    }

    fn run_eval(&self, ob: &Obligation) -> Result<EngineReport, DischargeError> {
        // fast path: syntactically trivial entailments
        if let ObKind::Entail { lhs, rhs, .. } = &ob.kind {
            let l = normalize_assertion(self.cfg, lhs);
            let r = normalize_assertion(self.cfg, rhs);
            if alpha_eq_assertion(&l, &r)
                || matches!(l, Assertion::Bot)
                || matches!(r, Assertion::Top)
            {
                return Ok(EngineReport {
                    outcome: Outcome::Ok,
                    instantiations: 0,
                });
            }
        }

        let ev = AssertEval::new(self.cfg);
        let mem_vars: Vec<Ident> = ob
            .gamma
            .iter()
            .filter(|(n, t)| *t == Type::Mem && MEM_VAR_NAMES.contains(&n.as_str()))
            .map(|(n, _)| n.clone())
            .collect();
        let env_vars: Vec<(Ident, Type)> = ob
            .gamma
            .iter()
            .filter(|(n, t)| !(*t == Type::Mem && MEM_VAR_NAMES.contains(&n.as_str())))
            .cloned()
            .collect();

        let footprint: Vec<LocId> = match self.footprint(ob) {
            Some(f) => f.into_iter().collect(),
            None => (0..self.cfg.num_locs() as u16).map(LocId).collect(),
        };

        let v = self.cfg.value_count as u128;
        let mem_total: u128 = v.pow((footprint.len() * mem_vars.len()) as u32);
        let mut env_domains: Vec<Vec<Value>> = Vec::new();
        let mut env_total: u128 = 1;
        for (name, ty) in &env_vars {
            let dom = ev
                .enumerate_type(ty)
                .map_err(|_| DischargeError::NotEnumerable(name.clone()))?;
            env_total = env_total.saturating_mul(dom.len() as u128);
            env_domains.push(dom);
        }
        let raw = mem_total.saturating_mul(env_total);
        if raw > self.cap as u128 {
            return Err(DischargeError::DomainTooLarge {
                needed: raw,
                cap: self.cap,
            });
        }

        // hypothesis items and the leaf check, per obligation kind
        let (hyp, quant): (&Assertion, bool) = match &ob.kind {
            ObKind::Entail { lhs, quant, .. } => (lhs, *quant),
            ObKind::Fact(_) => (&Assertion::Top, false),
            ObKind::FractionEq { pre, .. } => (pre, false),
            ObKind::SampleRatio { pre, .. } => (pre, false),
        };
        let env_names: BTreeSet<Ident> = env_vars.iter().map(|(n, _)| n.clone()).collect();
        let factors = meet_factors(hyp);
        let mut free_factors: Vec<&Assertion> = Vec::new();
        let mut items: Vec<HypItem> = Vec::new();
        for f in &factors {
            let vars: BTreeSet<Ident> = free_vars_assertion(f)
                .intersection(&env_names)
                .cloned()
                .collect();
            if vars.is_empty() {
                free_factors.push(f);
            } else {
                items.push(HypItem::Factor((*f).clone(), vars));
            }
        }
        for p in &ob.psi {
            let vars: BTreeSet<Ident> = free_vars_prop(p)
                .intersection(&env_names)
                .cloned()
                .collect();
            items.push(HypItem::Psi(p.clone(), vars));
        }

        // pass 1: surviving memory assignments (parallel)
        let survivors = self.survivors(&ev, &mem_vars, &footprint, &free_factors, quant)?;

        // pass 2: pruned environment walk per survivor
        let outcome = self.pass2(
            &ev, ob, &mem_vars, &footprint, &env_vars, &env_domains, &items, &survivors, quant,
        )?;
        Ok(EngineReport {
            outcome,
            instantiations: raw,
        })
    }

    fn decode_mems(
        &self,
        idx: u128,
        mem_vars: &[Ident],
        footprint: &[LocId],
    ) -> Vec<(Ident, Memory)> {
        let v = self.cfg.value_count as u128;
        let mut idx = idx;
        let mut out = Vec::with_capacity(mem_vars.len());
        for name in mem_vars {
            let mut m = Memory::zeroed(self.cfg);
            for l in footprint {
                m.set(*l, (idx % v) as u64);
                idx /= v;
            }
            out.push((name.clone(), m));
        }
        out
    }

    fn bind_mems(env: &Env, mems: &[(Ident, Memory)]) -> Env {
        let mut e = env.clone();
        for (name, m) in mems {
            e = e.extended(name, Value::MemV(m.clone()));
        }
        e
    }

    /// The memory assignments on which the environment-free part of the
    /// hypothesis can hold; in quantitative mode a survivor carries the sup
    /// of its environment-free factors (∞ prunes: the entailment is vacuous).
    ///
    /// Results are cached per factor set; Boolean factor sets that fit the
    /// compiled fragment run allocation-free.
    fn survivors(
        &self,
        _ev: &AssertEval,
        mem_vars: &[Ident],
        footprint: &[LocId],
        free_factors: &[&Assertion],
        quant: bool,
    ) -> Result<std::sync::Arc<Vec<(u128, Option<ExtRat>)>>, SemError> {
        let pr = crate::syntax::print::Printer::new(self.cfg);
        let mut parts: Vec<String> = free_factors
            .iter()
            .map(|f| pr.assertion_sexpr(&normalize_assertion(self.cfg, f)))
            .collect();
        parts.sort();
        parts.dedup();
        let prefix = format!("{quant}|{:?}|{:?}|", mem_vars, footprint);
        let key = format!("{prefix}{}", parts.join("&"));
        if let Some(hit) = self.survivor_cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        // subsumption: a cached survivor set for a SUBSET of our factors is a
        // sound starting point — re-filter it with the remaining factors
        if !quant {
            let candidate: Option<(Vec<String>, std::sync::Arc<Vec<(u128, Option<ExtRat>)>>)> = {
                let cache = self.survivor_cache.lock().unwrap();
                cache
                    .iter()
                    .filter_map(|(k, v)| {
                        let rest = k.strip_prefix(&prefix)?;
                        let cached: Vec<String> =
                            rest.split('&').map(|s| s.to_string()).collect();
                        if !cached.is_empty()
                            && cached.iter().all(|c| parts.contains(c))
                            && cached.len() < parts.len()
                        {
                            Some((cached, v.clone()))
                        } else {
                            None
                        }
                    })
                    .min_by_key(|(_, v)| v.len())
            };
            if let Some((cached_parts, base)) = candidate {
                let remaining: Vec<&Assertion> = free_factors
                    .iter()
                    .copied()
                    .filter(|f| {
                        let s = pr.assertion_sexpr(&normalize_assertion(self.cfg, f));
                        !cached_parts.contains(&s)
                    })
                    .collect();
                let ev2 = AssertEval::new(self.cfg);
                let mut out = Vec::new();
                for (idx, _) in base.iter() {
                    let mems = self.decode_mems(*idx, mem_vars, footprint);
                    let env = Self::bind_mems(&Env::empty(), &mems);
                    let mut ok = true;
                    for f in &remaining {
                        if !ev2.bool_sem(&env, f)? {
                            ok = false;
                            break;
                        }
                    }
                    if ok {
                        out.push((*idx, None));
                    }
                }
                let out = std::sync::Arc::new(out);
                self.survivor_cache
                    .lock()
                    .unwrap()
                    .insert(key, out.clone());
                return Ok(out);
            }
        }
        let v = self.cfg.value_count as u128;
        let mem_total: u128 = v.pow((footprint.len() * mem_vars.len()) as u32);
        let compiled: Option<Vec<crate::logics::CompiledBool>> = if quant {
            None
        } else {
            let compiler = crate::logics::MemCompiler::new(self.cfg, mem_vars);
            free_factors
                .iter()
                .map(|f| compiler.assertion(f))
                .collect()
        };
        let chunk: u128 = 1 << 16;
        let n_chunks = mem_total.div_ceil(chunk).max(1);
        let results: Result<Vec<Vec<(u128, Option<ExtRat>)>>, SemError> = (0..n_chunks)
            .into_par_iter()
            .map(|ci| {
                let lo = ci * chunk;
                let hi = ((ci + 1) * chunk).min(mem_total);
                let mut out = Vec::new();
                if let Some(cs) = &compiled {
                    // purely aggregate factors sweep the space with O(1)
                    // incremental statistics
                    if mem_vars.len() == 1 && cs.iter().all(|c| c.card_only()) {
                        let mut digits: Vec<u64> = Vec::with_capacity(footprint.len());
                        let mut rem = lo;
                        for _ in footprint {
                            digits.push((rem % v) as u64);
                            rem /= v;
                        }
                        let mut stats = crate::logics::ArrayStats::new(self.cfg, footprint);
                        for (pos, d) in digits.iter().enumerate() {
                            if *d != 0 {
                                stats.apply(pos, 0, *d);
                            }
                        }
                        let mut idx = lo;
                        loop {
                            if cs.iter().all(|c| c.eval_stats(&stats)) {
                                out.push((idx, None));
                            }
                            idx += 1;
                            if idx >= hi {
                                break;
                            }
                            // odometer increment with incremental updates
                            let mut pos = 0;
                            loop {
                                let old = digits[pos];
                                if old as u128 + 1 < v {
                                    digits[pos] = old + 1;
                                    stats.apply(pos, old, old + 1);
                                    break;
                                }
                                digits[pos] = 0;
                                stats.apply(pos, old, 0);
                                pos += 1;
                            }
                        }
                        return Ok(out);
                    }
                    // allocation-free path
                    let mut bufs: Vec<Memory> =
                        mem_vars.iter().map(|_| Memory::zeroed(self.cfg)).collect();
                    for idx in lo..hi {
                        let mut rem = idx;
                        for buf in bufs.iter_mut() {
                            for l in footprint {
                                buf.set(*l, (rem % v) as u64);
                                rem /= v;
                            }
                        }
                        let refs: Vec<&Memory> = bufs.iter().collect();
                        if cs.iter().all(|c| c.eval(self.cfg, &refs)) {
                            out.push((idx, None));
                        }
                    }
                    return Ok(out);
                }
                let ev = AssertEval::new(self.cfg);
                for idx in lo..hi {
                    let mems = self.decode_mems(idx, mem_vars, footprint);
                    let env = Self::bind_mems(&Env::empty(), &mems);
                    if quant {
                        let mut sup = ExtRat::zero();
                        for f in free_factors {
                            sup = sup.max(ev.quant_sem(&env, f)?);
                            if sup == ExtRat::Inf {
                                break;
                            }
                        }
                        if sup != ExtRat::Inf {
                            out.push((idx, Some(sup)));
                        }
                    } else {
                        let mut ok = true;
                        for f in free_factors {
                            if !ev.bool_sem(&env, f)? {
                                ok = false;
                                break;
                            }
                        }
                        if ok {
                            out.push((idx, None));
                        }
                    }
                }
                Ok(out)
            })
            .collect();
        let out = std::sync::Arc::new(
            results?
                .into_iter()
                .flatten()
                .collect::<Vec<(u128, Option<ExtRat>)>>(),
        );
        self.survivor_cache
            .lock()
            .unwrap()
            .insert(key, out.clone());
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn pass2(
        &self,
        _ev: &AssertEval,
        ob: &Obligation,
        mem_vars: &[Ident],
        footprint: &[LocId],
        env_vars: &[(Ident, Type)],
        env_domains: &[Vec<Value>],
        items: &[HypItem],
        survivors: &[(u128, Option<ExtRat>)],
        quant: bool,
    ) -> Result<Outcome, DischargeError> {
        // schedule: after binding variable i, evaluate the items whose
        // variables are all bound
        let order: Vec<Ident> = env_vars.iter().map(|(n, _)| n.clone()).collect();
        let mut schedule: Vec<Vec<usize>> = vec![Vec::new(); env_vars.len() + 1];
        for (ii, item) in items.iter().enumerate() {
            let last = order
                .iter()
                .rposition(|n| item.vars().contains(n))
                .map(|p| p + 1)
                .unwrap_or(0);
            schedule[last].push(ii);
        }

        let chunk = 1usize << 10;
        let n_chunks = survivors.len().div_ceil(chunk).max(1);
        let results: Result<Vec<Option<String>>, DischargeError> = (0..n_chunks)
            .into_par_iter()
            .map(|ci| {
                let ev = AssertEval::new(self.cfg);
                let lo = ci * chunk;
                let hi = ((ci + 1) * chunk).min(survivors.len());
                for (idx, base_sup) in &survivors[lo..hi] {
                    let mems = self.decode_mems(*idx, mem_vars, footprint);
                    let env = Self::bind_mems(&Env::empty(), &mems);
                    // items with no env vars (Ψ over memories only)
                    let mut sup = base_sup.clone().unwrap_or_else(ExtRat::zero);
                    let mut skip = false;
                    for &ii in &schedule[0] {
                        match &items[ii] {
                            HypItem::Factor(a, _) => {
                                if quant {
                                    sup = sup.max(ev.quant_sem(&env, a)?);
                                    if sup == ExtRat::Inf {
                                        skip = true;
                                    }
                                } else if !ev.bool_sem(&env, a)? {
                                    skip = true;
                                }
                            }
                            HypItem::Psi(p, _) => {
                                if !ev.prop(&env, p)? {
                                    skip = true;
                                }
                            }
                        }
                        if skip {
                            break;
                        }
                    }
                    if skip {
                        continue;
                    }
                    if let Some(cex) = self.walk_env(
                        &ev, ob, &env, &mems, 0, env_vars, env_domains, items, &schedule, sup,
                        quant,
                    )? {
                        return Ok(Some(cex));
                    }
                }
                Ok(None)
            })
            .collect();
        for r in results? {
            if let Some(cex) = r {
                return Ok(Outcome::Failed(cex));
            }
        }
        Ok(Outcome::Ok)
    }

    /// Recursive environment enumeration with eager hypothesis pruning.
    #[allow(clippy::too_many_arguments)]
    fn walk_env(
        &self,
        ev: &AssertEval,
        ob: &Obligation,
        env: &Env,
        mems: &[(Ident, Memory)],
        depth: usize,
        env_vars: &[(Ident, Type)],
        env_domains: &[Vec<Value>],
        items: &[HypItem],
        schedule: &[Vec<usize>],
        sup: ExtRat,
        quant: bool,
    ) -> Result<Option<String>, DischargeError> {
        if depth == env_vars.len() {
            return self.leaf_check(ev, ob, env, mems, sup, quant);
        }
        let (name, _) = &env_vars[depth];
        'vals: for val in &env_domains[depth] {
            let env2 = env.extended(name, val.clone());
            let mut sup2 = sup.clone();
            for &ii in &schedule[depth + 1] {
                match &items[ii] {
                    HypItem::Factor(a, _) => {
                        if quant {
                            sup2 = sup2.max(ev.quant_sem(&env2, a)?);
                            if sup2 == ExtRat::Inf {
                                continue 'vals;
                            }
                        } else if !ev.bool_sem(&env2, a)? {
                            continue 'vals;
                        }
                    }
                    HypItem::Psi(p, _) => {
                        if !ev.prop(&env2, p)? {
                            continue 'vals;
                        }
                    }
                }
            }
            if let Some(cex) = self.walk_env(
                ev,
                ob,
                &env2,
                mems,
                depth + 1,
                env_vars,
                env_domains,
                items,
                schedule,
                sup2,
                quant,
            )? {
                return Ok(Some(cex));
            }
        }
        Ok(None)
    }

    fn leaf_check(
        &self,
        ev: &AssertEval,
        ob: &Obligation,
        env: &Env,
        mems: &[(Ident, Memory)],
        sup: ExtRat,
        quant: bool,
    ) -> Result<Option<String>, DischargeError> {
        match &ob.kind {
            ObKind::Entail { rhs, .. } => {
                if quant {
                    let rhs_val = ev.quant_sem(env, rhs)?;
                    if sup < rhs_val {
                        return Ok(Some(format!(
                            "lhs = {sup} < rhs = {rhs_val} at {}",
                            render_point(self.cfg, mems)
                        )));
                    }
                } else if !ev.bool_sem(env, rhs)? {
                    return Ok(Some(format!(
                        "hypothesis holds but conclusion fails at {}",
                        render_point(self.cfg, mems)
                    )));
                }
                Ok(None)
            }
            ObKind::Fact(p) => {
                if !ev.prop(env, p)? {
                    return Ok(Some(format!(
                        "fact fails at {}",
                        render_point(self.cfg, mems)
                    )));
                }
                Ok(None)
            }
            ObKind::FractionEq {
                domain,
                var,
                phi,
                delta,
                ..
            } => {
                if *domain == 0 {
                    return Ok(Some("empty sampling domain".into()));
                }
                let mut count = 0u64;
                for x in 0..*domain {
                    if ev.prop(&env.extended(var, Value::Nat(x)), phi)? {
                        count += 1;
                    }
                }
                let frac = rat_u64(count) / rat_u64(*domain);
                if frac != *delta {
                    return Ok(Some(format!(
                        "fraction is {} ≠ {} at {}",
                        crate::rat::fmt_rat(&frac),
                        crate::rat::fmt_rat(delta),
                        render_point(self.cfg, mems)
                    )));
                }
                Ok(None)
            }
            ObKind::SampleRatio {
                left,
                right,
                delta,
                ..
            } => {
                let interp = Interp::new(self.cfg);
                let support_of = |t: &Term| -> Result<BTreeSet<u64>, SemError> {
                    let Term::Sample(name, args) = t else {
                        return Err(SemError::NotNumeric("not a sampling term".into()));
                    };
                    let mut calls = 0;
                    let mut vals = Vec::new();
                    for a in args {
                        match interp.eval(a, env, &mut calls)? {
                            Value::Nat(n) => vals.push(n),
                            other => return Err(SemError::NotNumeric(format!("{other:?}"))),
                        }
                    }
                    Ok(interp
                        .dist_support(name, &vals)
                        .map_err(SemError::Eval)?
                        .into_iter()
                        .collect())
                };
                let sl = support_of(left)?;
                let sr = support_of(right)?;
                let (small, big) = if sl.is_subset(&sr) {
                    (&sl, &sr)
                } else if sr.is_subset(&sl) {
                    (&sr, &sl)
                } else {
                    return Ok(Some(format!(
                        "neither sampling set contains the other at {}",
                        render_point(self.cfg, mems)
                    )));
                };
                let expected =
                    Rat::one() - rat_u64(small.len() as u64) / rat_u64(big.len() as u64);
                if expected != *delta {
                    return Ok(Some(format!(
                        "statistical distance between samplings is {} ≠ {} at {}",
                        crate::rat::fmt_rat(&expected),
                        crate::rat::fmt_rat(delta),
                        render_point(self.cfg, mems)
                    )));
                }
                Ok(None)
            }
        }
    }
}

/// Flatten a meet tree into its factors.
pub fn meet_factors(a: &Assertion) -> Vec<&Assertion> {
    let mut out = Vec::new();
    fn walk<'x>(a: &'x Assertion, out: &mut Vec<&'x Assertion>) {
        match a {
            Assertion::Meet(x, y) => {
                walk(x, out);
                walk(y, out);
            }
            other => out.push(other),
        }
    }
    walk(a, &mut out);
    out
}

fn render_point(cfg: &ProgramConfig, mems: &[(Ident, Memory)]) -> String {
    mems.iter()
        .map(|(n, m)| format!("{n}: [{}]", m.render(cfg)))
        .collect::<Vec<_>>()
        .join(", ")
}

// ---------------------------------------------------------------------------
// Safe / RSafe
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SafeMode {
    UnaryBool,
    UnaryQuant,
    Relational,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SafeOutcome {
    Ok,
    Failed(String),
}

/// Decide `P ∈ Safe(Σ)` (or RSafe): exact enumeration, with sound fast
/// paths (a unary assertion whose footprint avoids Σ cannot depend on it; a
/// relational one that contains literal memory equality and otherwise avoids
/// Σ is synchronized by construction).
pub fn check_safe(
    cfg: &ProgramConfig,
    assertion: &Assertion,
    sigma: &Effect,
    mode: SafeMode,
    cap: u64,
) -> Result<SafeOutcome, DischargeError> {
    if !sigma.vars.is_empty() {
        return Err(DischargeError::NotEnumerable(format!(
            "Safe over region variables {:?} (instantiate first)",
            sigma.vars
        )));
    }
    let ev = AssertEval::new(cfg);
    let fp = assertion_footprint(cfg, assertion);
    match mode {
        SafeMode::UnaryBool | SafeMode::UnaryQuant => {
            if let Some(f) = &fp {
                if f.iter().all(|l| !sigma.locs.contains(l)) {
                    return Ok(SafeOutcome::Ok);
                }
            }
            let f: Vec<LocId> = match fp {
                Some(f) => f.into_iter().collect(),
                None => (0..cfg.num_locs() as u16).map(LocId).collect(),
            };
            let outside: Vec<LocId> = f
                .iter()
                .copied()
                .filter(|l| !sigma.locs.contains(l))
                .collect();
            let inside: Vec<LocId> = f
                .iter()
                .copied()
                .filter(|l| sigma.locs.contains(l))
                .collect();
            let v = cfg.value_count as u128;
            let raw = v.pow(outside.len() as u32) * v.pow(inside.len() as u32);
            if raw > cap as u128 {
                return Err(DischargeError::DomainTooLarge { needed: raw, cap });
            }
            let base = Memory::zeroed(cfg);
            for m_out in crate::semantics::memories_over(cfg, &base, &outside) {
                let mut first: Option<(Memory, SafeVal)> = None;
                for m in crate::semantics::memories_over(cfg, &m_out, &inside) {
                    let env = Env::empty().extended("s", Value::MemV(m.clone()));
                    let val = match mode {
                        SafeMode::UnaryBool => SafeVal::B(ev.bool_sem(&env, assertion)?),
                        _ => SafeVal::Q(ev.quant_sem(&env, assertion)?),
                    };
                    match &first {
                        None => first = Some((m, val)),
                        Some((m0, v0)) => {
                            if *v0 != val {
                                return Ok(SafeOutcome::Failed(format!(
                                    "m1 = [{}], m2 = [{}] agree outside the region but the assertion differs",
                                    m0.render(cfg),
                                    m.render(cfg)
                                )));
                            }
                        }
                    }
                }
            }
            Ok(SafeOutcome::Ok)
        }
        SafeMode::Relational => {
            // fast path: a meet containing literal s1 = s2 whose remaining
            // factors avoid Σ
            let factors = meet_factors(assertion);
            let has_mem_eq = factors.iter().any(|f| {
                matches!(f, Assertion::Inj(p) if matches!(&**p,
                    Prop::Cmp(CmpOp::Eq, a, b)
                        if matches!((a.as_ref(), b.as_ref()),
                            (Term::Var(x), Term::Var(y)) if x == "s1" && y == "s2")))
            });
            if has_mem_eq {
                let others_clear = factors.iter().all(|f| {
                    if let Some(fp) = assertion_footprint(cfg, &(*f).clone()) {
                        fp.iter().all(|l| !sigma.locs.contains(l))
                    } else {
                        // the full-footprint factor is the equality itself:
                        // writing the same value to both sides preserves it
                        matches!(f, Assertion::Inj(p) if matches!(&**p,
                            Prop::Cmp(CmpOp::Eq, a, b)
                                if matches!((a.as_ref(), b.as_ref()),
                                    (Term::Var(x), Term::Var(y)) if x == "s1" && y == "s2")))
                    }
                });
                if others_clear {
                    return Ok(SafeOutcome::Ok);
                }
            }
            let f: Vec<LocId> = {
                let mut set: BTreeSet<LocId> = match fp {
                    Some(f) => f,
                    None => (0..cfg.num_locs() as u16).map(LocId).collect(),
                };
                set.extend(sigma.locs.iter().copied());
                set.into_iter().collect()
            };
            let v = cfg.value_count as u128;
            let per_side = v.pow(f.len() as u32);
            let raw = per_side
                .saturating_mul(per_side)
                .saturating_mul(sigma.locs.len().max(1) as u128)
                .saturating_mul(v);
            if raw > cap as u128 {
                return Err(DischargeError::DomainTooLarge { needed: raw, cap });
            }
            let base = Memory::zeroed(cfg);
            let holds = |ev: &AssertEval, m1: &Memory, m2: &Memory| -> Result<bool, SemError> {
                let env = Env::empty()
                    .extended("s1", Value::MemV(m1.clone()))
                    .extended("s2", Value::MemV(m2.clone()));
                ev.bool_sem(&env, assertion)
            };
            let chunk: u128 = 1 << 12;
            let n_chunks = per_side.div_ceil(chunk).max(1);
            let sigma_locs: Vec<LocId> = sigma.locs.iter().copied().collect();
            let results: Result<Vec<Option<String>>, SemError> = (0..n_chunks)
                .into_par_iter()
                .map(|ci| {
                    let ev = AssertEval::new(cfg);
                    let lo = ci * chunk;
                    let hi = ((ci + 1) * chunk).min(per_side);
                    let decode = |mut idx: u128| {
                        let mut m = base.clone();
                        for l in &f {
                            m.set(*l, (idx % v) as u64);
                            idx /= v;
                        }
                        m
                    };
                    for i1 in lo..hi {
                        let m1 = decode(i1);
                        for i2 in 0..per_side {
                            let m2 = decode(i2);
                            if !holds(&ev, &m1, &m2)? {
                                continue;
                            }
                            for l in &sigma_locs {
                                if m1.get(*l) != m2.get(*l) {
                                    return Ok(Some(format!(
                                        "related memories m1 = [{}], m2 = [{}] differ at region location {}",
                                        m1.render(cfg),
                                        m2.render(cfg),
                                        cfg.loc_name(*l)
                                    )));
                                }
                                for val in 0..cfg.value_count {
                                    if !holds(&ev, &m1.updated(*l, val), &m2.updated(*l, val))? {
                                        return Ok(Some(format!(
                                            "writing {val} to {} breaks the relation between m1 = [{}] and m2 = [{}]",
                                            cfg.loc_name(*l),
                                            m1.render(cfg),
                                            m2.render(cfg)
                                        )));
                                    }
                                }
                            }
                        }
                    }
                    Ok(None)
                })
                .collect();
            for r in results? {
                if let Some(cex) = r {
                    return Ok(SafeOutcome::Failed(cex));
                }
            }
            Ok(SafeOutcome::Ok)
        }
    }
}

#[derive(PartialEq)]
enum SafeVal {
    B(bool),
    Q(ExtRat),
}
