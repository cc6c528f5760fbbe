//! Independent semantic validation of checked judgments: the finite-support
//! liftings (union bound, expectation, approximate relational coupling), the
//! stateful triple/quadruple validator, and the randomized lifting-law and
//! monad-law suites.
//!
//! No floating point anywhere: probabilities, expectations and flows are
//! exact rationals.

use crate::config::ProgramConfig;
use crate::logics::{assertion_footprint, AssertEval, LogicMode, SemError};
use crate::rat::{rat_u64, ExtRat, Rat};
use crate::semantics::{dist_bind, expectation, Dist, Env, Interp, Memory, Value};
use crate::syntax::ast::*;
use crate::typecheck::term_location_footprint;
use num_traits::{One, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("evaluation: {0}")]
    Eval(#[from] crate::semantics::EvalError),
    #[error("assertion evaluation: {0}")]
    Sem(#[from] SemError),
    #[error("memory space too large: {needed} initial assignments exceed the cap {cap}")]
    TooLarge { needed: u128, cap: u64 },
    #[error("triple result is not first-order: {0}")]
    NonFirstOrder(String),
}

// ---------------------------------------------------------------------------
// liftings on finite distributions
// ---------------------------------------------------------------------------

/// Union-bound lifting: Pr_{x∼d}[Q(x)] ≥ 1 − δ.
pub fn check_union_bound<T: Ord + Clone>(
    d: &Dist<T>,
    q: impl Fn(&T) -> bool,
    delta: &ExtRat,
) -> bool {
    match delta {
        ExtRat::Inf => true,
        ExtRat::Fin(delta) => {
            let pr = d.pr(q);
            pr >= Rat::one() - delta
        }
    }
}

/// Expectation lifting: Σ d(x)·Q(x) ≤ bound.
pub fn check_expectation<T: Ord + Clone>(
    d: &Dist<T>,
    q: impl Fn(&T) -> ExtRat,
    bound: &ExtRat,
) -> bool {
    expectation(d, q) <= *bound
}

/// Statistical distance Σ_x max(0, d1(x) − d2(x)) — equals the maximum over
/// events of the probability difference.
pub fn statistical_distance<T: Ord + Clone>(d1: &Dist<T>, d2: &Dist<T>) -> Rat {
    let mut out = Rat::zero();
    for (x, p) in d1.iter() {
        let q = d2.prob(x);
        if *p > q {
            out += p - q;
        }
    }
    out
}

/// A coupling witness: joint weights over outcome pairs.
pub struct LiftingWitness<T, U> {
    pub exists: bool,
    pub coupling: Option<Vec<((T, U), Rat)>>,
}

/// Existence of a sub-probability coupling witnessing the δ-approximate
/// relational lifting (ε = 0), decided by a maximum-flow formulation:
/// source→left with capacity d1, R-edges unbounded, right→sink with capacity
/// d2; the lifting exists iff max flow ≥ 1 − δ.
pub fn check_approx_lifting<T: Ord + Clone, U: Ord + Clone>(
    d1: &Dist<T>,
    d2: &Dist<U>,
    rel: impl Fn(&T, &U) -> bool,
    delta: &Rat,
) -> LiftingWitness<T, U> {
    let threshold = Rat::one() - delta;
    if threshold <= Rat::zero() {
        return LiftingWitness {
            exists: true,
            coupling: Some(Vec::new()),
        };
    }
    let left: Vec<&T> = d1.support().collect();
    let right: Vec<&U> = d2.support().collect();
    let n = left.len();
    let m = right.len();
    // nodes: 0 = source, 1..=n left, n+1..=n+m right, n+m+1 sink
    let sink = n + m + 1;
    let mut g = FlowGraph::new(sink + 1);
    for (i, x) in left.iter().enumerate() {
        g.add_edge(0, 1 + i, d1.prob(x));
    }
    for (j, y) in right.iter().enumerate() {
        g.add_edge(1 + n + j, sink, d2.prob(y));
    }
    let unbounded = Rat::from_integer(2.into());
    let mut middle: Vec<(usize, usize, usize)> = Vec::new();
    for (i, x) in left.iter().enumerate() {
        for (j, y) in right.iter().enumerate() {
            if rel(x, y) {
                let e = g.add_edge(1 + i, 1 + n + j, unbounded.clone());
                middle.push((i, j, e));
            }
        }
    }
    let flow = g.max_flow(0, sink);
    if flow >= threshold {
        let coupling = middle
            .into_iter()
            .filter_map(|(i, j, e)| {
                let f = g.flow_on(e);
                if f.is_zero() {
                    None
                } else {
                    Some(((left[i].clone(), right[j].clone()), f))
                }
            })
            .collect();
        LiftingWitness {
            exists: true,
            coupling: Some(coupling),
        }
    } else {
        LiftingWitness {
            exists: false,
            coupling: None,
        }
    }
}

/// Brute-force reference for the approximate lifting: exhaustive check of
/// the finite-witness condition ∀S ⊆ supp(d1): d1(S) ≤ d2(R(S)) + δ.
pub fn check_approx_lifting_bruteforce<T: Ord + Clone, U: Ord + Clone>(
    d1: &Dist<T>,
    d2: &Dist<U>,
    rel: impl Fn(&T, &U) -> bool,
    delta: &Rat,
) -> bool {
    let left: Vec<&T> = d1.support().collect();
    let right: Vec<&U> = d2.support().collect();
    assert!(left.len() <= 20, "brute-force oracle is exponential");
    for mask in 0u32..(1 << left.len()) {
        let mut mass1 = Rat::zero();
        let mut image: Vec<bool> = vec![false; right.len()];
        for (i, x) in left.iter().enumerate() {
            if mask & (1 << i) != 0 {
                mass1 += d1.prob(x);
                for (j, y) in right.iter().enumerate() {
                    if rel(x, y) {
                        image[j] = true;
                    }
                }
            }
        }
        let mut mass2 = Rat::zero();
        for (j, y) in right.iter().enumerate() {
            if image[j] {
                mass2 += d2.prob(y);
            }
        }
        if mass1 > mass2 + delta {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// exact-rational max flow (Edmonds–Karp)
// ---------------------------------------------------------------------------

struct FlowGraph {
    // edge: (to, cap, flow); adj: node -> edge indices (paired with reverse)
    edges: Vec<(usize, Rat, Rat)>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(n: usize) -> Self {
        FlowGraph {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    /// Returns the index of the forward edge.
    fn add_edge(&mut self, from: usize, to: usize, cap: Rat) -> usize {
        let e = self.edges.len();
        self.edges.push((to, cap, Rat::zero()));
        self.edges.push((from, Rat::zero(), Rat::zero()));
        self.adj[from].push(e);
        self.adj[to].push(e + 1);
        e
    }

    fn residual(&self, e: usize) -> Rat {
        let (_, cap, flow) = &self.edges[e];
        cap - flow
    }

    fn flow_on(&self, e: usize) -> Rat {
        self.edges[e].2.clone()
    }

    fn max_flow(&mut self, s: usize, t: usize) -> Rat {
        let mut total = Rat::zero();
        loop {
            // BFS for a shortest augmenting path
            let mut prev: Vec<Option<usize>> = vec![None; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            let mut queue = std::collections::VecDeque::new();
            seen[s] = true;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &e in &self.adj[u] {
                    let (to, _, _) = self.edges[e];
                    if !seen[to] && self.residual(e) > Rat::zero() {
                        seen[to] = true;
                        prev[to] = Some(e);
                        queue.push_back(to);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            // bottleneck
            let mut bottleneck: Option<Rat> = None;
            let mut v = t;
            while v != s {
                let e = prev[v].unwrap();
                let r = self.residual(e);
                bottleneck = Some(match bottleneck {
                    None => r,
                    Some(b) => b.min(r),
                });
                v = self.edges[e ^ 1].0;
            }
            let aug = bottleneck.unwrap();
            let mut v = t;
            while v != s {
                let e = prev[v].unwrap();
                self.edges[e].2 += &aug;
                self.edges[e ^ 1].2 -= &aug;
                v = self.edges[e ^ 1].0;
            }
            total += aug;
        }
    }
}

// ---------------------------------------------------------------------------
// triple / quadruple validation
// ---------------------------------------------------------------------------

pub struct ValidateRequest {
    pub mode: LogicMode,
    pub pre: Assertion,
    pub post: Assertion,
    /// δ (the relational instance's ε is pinned to 0).
    pub grade: ExtRat,
    /// Closed program (adversaries already instantiated).
    pub left: Term,
    pub right: Option<Term>,
    /// Optional extra Boolean restriction on initial memories.
    pub restrict: Option<Assertion>,
}

#[derive(Debug, Serialize)]
pub struct ValidateReport {
    pub memories_enumerated: u128,
    pub memories_checked: u64,
    pub failures: Vec<String>,
    pub admitted_lemmas_falsified: Vec<String>,
    /// UBL: the largest failure probability seen (exact rational, printed).
    pub worst_failure_probability: Option<String>,
    /// RPL: the largest statistical distance between output distributions.
    pub max_statistical_distance: Option<String>,
    pub footprint: Vec<String>,
}

fn value_first_order(v: &Value) -> bool {
    match v {
        Value::Star | Value::Bool(_) | Value::Nat(_) | Value::MemV(_) => true,
        Value::Pair(a, b) => value_first_order(a) && value_first_order(b),
        Value::Closure(_) | Value::Comp(..) => false,
    }
}

/// Validate a checked judgment against the exact semantics: for every
/// initial memory satisfying the precondition (every memory, for the
/// expectation instance), run the program(s) and apply the matching lifting
/// check at the stated grade.
pub fn validate_triple(
    cfg: &ProgramConfig,
    req: &ValidateRequest,
) -> Result<ValidateReport, OracleError> {
    let cap = cfg.effective_cap();
    // Locations that matter: anything the programs touch or the assertions
    // read; everything else is pinned to 0.
    let mut fp: BTreeSet<LocId> = term_location_footprint(&req.left);
    if let Some(r) = &req.right {
        fp.extend(term_location_footprint(r));
    }
    let mut full = false;
    for a in [Some(&req.pre), Some(&req.post), req.restrict.as_ref()]
        .into_iter()
        .flatten()
    {
        match assertion_footprint(cfg, a) {
            Some(f) => fp.extend(f),
            None => full = true,
        }
    }
    let footprint: Vec<LocId> = if full {
        (0..cfg.num_locs() as u16).map(LocId).collect()
    } else {
        fp.into_iter().collect()
    };

    let v = cfg.value_count as u128;
    let mems_per_side = v.pow(footprint.len() as u32);
    let relational = req.mode.is_relational();
    let enumerated = if relational {
        mems_per_side * mems_per_side
    } else {
        mems_per_side
    };
    if enumerated > cap as u128 {
        return Err(OracleError::TooLarge {
            needed: enumerated,
            cap,
        });
    }

    // pass 1: initial memories (or pairs) satisfying the precondition
    let chunk: u128 = 1 << 16;
    let n_chunks = enumerated.div_ceil(chunk);
    let decode = |idx: u128| -> (Memory, Option<Memory>) {
        let mut m1 = Memory::zeroed(cfg);
        let mut rem = idx;
        for l in &footprint {
            m1.set(*l, (rem % v) as u64);
            rem /= v;
        }
        if relational {
            let mut m2 = Memory::zeroed(cfg);
            for l in &footprint {
                m2.set(*l, (rem % v) as u64);
                rem /= v;
            }
            (m1, Some(m2))
        } else {
            (m1, None)
        }
    };
    let quantitative = req.mode.is_quantitative();
    let mut filters: Vec<&Assertion> = Vec::new();
    if let Some(r) = &req.restrict {
        filters.push(r);
    }
    if !quantitative {
        filters.push(&req.pre);
    }
    let mem_var_names: Vec<Ident> = if relational {
        vec!["s1".into(), "s2".into()]
    } else {
        vec!["s".into()]
    };
    let compiler = crate::logics::MemCompiler::new(cfg, &mem_var_names);
    let compiled: Option<Vec<crate::logics::CompiledBool>> =
        filters.iter().map(|f| compiler.assertion(f)).collect();
    let survivors: Result<Vec<Vec<u128>>, SemError> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk;
            let hi = ((ci + 1) * chunk).min(enumerated);
            let mut out = Vec::new();
            if let Some(cs) = &compiled {
                if !relational && cs.iter().all(|c| c.card_only()) {
                    // O(1) incremental sweep over array statistics
                    let mut digits: Vec<u64> = Vec::with_capacity(footprint.len());
                    let mut rem = lo;
                    for _ in &footprint {
                        digits.push((rem % v) as u64);
                        rem /= v;
                    }
                    let mut stats = crate::logics::ArrayStats::new(cfg, &footprint);
                    for (pos, d) in digits.iter().enumerate() {
                        if *d != 0 {
                            stats.apply(pos, 0, *d);
                        }
                    }
                    let mut idx = lo;
                    loop {
                        if cs.iter().all(|c| c.eval_stats(&stats)) {
                            out.push(idx);
                        }
                        idx += 1;
                        if idx >= hi {
                            break;
                        }
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
                for idx in lo..hi {
                    let (m1, m2) = decode(idx);
                    let refs: Vec<&Memory> = match &m2 {
                        Some(m2) => vec![&m1, m2],
                        None => vec![&m1],
                    };
                    if cs.iter().all(|c| c.eval(cfg, &refs)) {
                        out.push(idx);
                    }
                }
                return Ok(out);
            }
            let ev = AssertEval::new(cfg);
            for idx in lo..hi {
                let (m1, m2) = decode(idx);
                let env = bind_initial(&m1, &m2);
                let mut keep = true;
                for f in &filters {
                    if !ev.bool_sem(&env, f)? {
                        keep = false;
                        break;
                    }
                }
                if keep {
                    out.push(idx);
                }
            }
            Ok(out)
        })
        .collect();
    let survivors: Vec<u128> = survivors?.into_iter().flatten().collect();

    struct PerMemory {
        failure: Option<String>,
        fail_prob: Option<Rat>,
        sd: Option<Rat>,
    }

    let per_memory = |idx: u128| -> Result<PerMemory, OracleError> {
        let interp = Interp::new(cfg);
        let ev = AssertEval::new(cfg);
        let mut out = PerMemory {
            failure: None,
            fail_prob: None,
            sd: None,
        };
        let (m1, m2) = decode(idx);
        let env0 = bind_initial(&m1, &m2);
        let d1 = interp.run(&req.left, &m1)?;
        for (val, _) in d1.support() {
            if !value_first_order(val) {
                return Err(OracleError::NonFirstOrder(format!("{val:?}")));
            }
        }
        match req.mode {
            LogicMode::Ubl => {
                let mut fail_mass = Rat::zero();
                for ((val, mem), p) in d1.iter() {
                    let env = env0
                        .extended("s", Value::MemV(mem.clone()))
                        .extended("v", val.clone());
                    if !ev.bool_sem(&env, &req.post)? {
                        fail_mass += p;
                    }
                }
                let ok = match &req.grade {
                    ExtRat::Inf => true,
                    ExtRat::Fin(d) => fail_mass <= *d,
                };
                if !ok {
                    out.failure = Some(format!(
                        "memory [{}]: failure probability {} exceeds grade {}",
                        m1.render(cfg),
                        crate::rat::fmt_rat(&fail_mass),
                        req.grade
                    ));
                }
                out.fail_prob = Some(fail_mass);
            }
            LogicMode::Exp => {
                let pre_val = ev.quant_sem(&env0, &req.pre)?;
                let bound = pre_val + req.grade.clone();
                let mut expectation_acc = ExtRat::zero();
                for ((val, mem), p) in d1.iter() {
                    let env = env0
                        .extended("s", Value::MemV(mem.clone()))
                        .extended("v", val.clone());
                    let q = ev.quant_sem(&env, &req.post)?;
                    expectation_acc = expectation_acc + ExtRat::Fin(p.clone()) * q;
                }
                if expectation_acc > bound {
                    out.failure = Some(format!(
                        "memory [{}]: post-expectation {} exceeds bound {}",
                        m1.render(cfg),
                        expectation_acc,
                        bound
                    ));
                }
            }
            LogicMode::Rpl => {
                let m2 = m2.as_ref().expect("relational validation needs a pair");
                let right = req.right.as_ref().expect("relational validation needs two programs");
                let d2 = interp.run(right, m2)?;
                for (val, _) in d2.support() {
                    if !value_first_order(val) {
                        return Err(OracleError::NonFirstOrder(format!("{val:?}")));
                    }
                }
                let sd = statistical_distance(&d1, &d2);
                let delta = match &req.grade {
                    ExtRat::Inf => Rat::one(),
                    ExtRat::Fin(d) => d.clone(),
                };
                let rel = |a: &(Value, Memory), b: &(Value, Memory)| -> bool {
                    let env = env0
                        .extended("s1", Value::MemV(a.1.clone()))
                        .extended("v1", a.0.clone())
                        .extended("s2", Value::MemV(b.1.clone()))
                        .extended("v2", b.0.clone());
                    ev.bool_sem(&env, &req.post).unwrap_or(false)
                };
                let witness = check_approx_lifting(&d1, &d2, rel, &delta);
                if !witness.exists {
                    out.failure = Some(format!(
                        "memories [{}] ~ [{}]: no {}-approximate coupling for the postcondition",
                        m1.render(cfg),
                        m2.render(cfg),
                        crate::rat::fmt_rat(&delta)
                    ));
                }
                out.sd = Some(sd);
            }
        }
        Ok(out)
    };

    let results: Result<Vec<PerMemory>, OracleError> = survivors
        .par_iter()
        .map(|idx| per_memory(*idx))
        .collect();
    let mut failures = Vec::new();
    let mut worst_fail: Option<Rat> = None;
    let mut max_sd: Option<Rat> = None;
    for r in results? {
        if let Some(f) = r.failure {
            failures.push(f);
        }
        if let Some(p) = r.fail_prob {
            if worst_fail.as_ref().map_or(true, |w| p > *w) {
                worst_fail = Some(p);
            }
        }
        if let Some(sd) = r.sd {
            if max_sd.as_ref().map_or(true, |w| sd > *w) {
                max_sd = Some(sd);
            }
        }
    }

    Ok(ValidateReport {
        memories_enumerated: enumerated,
        memories_checked: survivors.len() as u64,
        failures,
        admitted_lemmas_falsified: Vec::new(),
        worst_failure_probability: worst_fail.as_ref().map(crate::rat::fmt_rat),
        max_statistical_distance: max_sd.as_ref().map(crate::rat::fmt_rat),
        footprint: footprint
            .iter()
            .map(|l| cfg.loc_name(*l).to_string())
            .collect(),
    })
}

fn bind_initial(m1: &Memory, m2: &Option<Memory>) -> Env {
    match m2 {
        None => Env::empty().extended("s", Value::MemV(m1.clone())),
        Some(m2) => Env::empty()
            .extended("s1", Value::MemV(m1.clone()))
            .extended("s2", Value::MemV(m2.clone())),
    }
}

// ---------------------------------------------------------------------------
// randomized law suites
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct LawReport {
    pub cases: u64,
    pub violations: Vec<String>,
}

fn random_dist(rng: &mut StdRng, universe: u64) -> Dist<u64> {
    let n = rng.gen_range(1..=universe.min(4)) as usize;
    let mut outcomes: Vec<u64> = (0..universe).collect();
    for i in (1..outcomes.len()).rev() {
        let j = rng.gen_range(0..=i);
        outcomes.swap(i, j);
    }
    outcomes.truncate(n);
    let weights: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=6)).collect();
    let total: u64 = weights.iter().sum();
    Dist::from_weighted(
        outcomes
            .into_iter()
            .zip(weights)
            .map(|(x, w)| (x, rat_u64(w) / rat_u64(total))),
    )
}

fn random_pred(rng: &mut StdRng, universe: u64) -> Vec<bool> {
    (0..universe).map(|_| rng.gen_bool(0.5)).collect()
}

fn random_quantity(rng: &mut StdRng, universe: u64) -> Vec<ExtRat> {
    (0..universe)
        .map(|_| {
            if rng.gen_bool(0.05) {
                ExtRat::Inf
            } else {
                ExtRat::Fin(rat_u64(rng.gen_range(0..8)) / rat_u64(rng.gen_range(1..4)))
            }
        })
        .collect()
}

fn random_grade(rng: &mut StdRng) -> Rat {
    rat_u64(rng.gen_range(0..5)) / rat_u64(8)
}

/// Property-test the graded-lifting laws (grade monotonicity, unit,
/// bind-composition, strength) for the selected lifting, on randomized
/// finite instances.
pub fn check_lifting_laws(mode: LogicMode, trials: u64, seed: u64) -> LawReport {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let universe = 6u64;
    for case in 0..trials {
        match mode {
            LogicMode::Ubl => {
                let d = random_dist(&mut rng, universe);
                let q = random_pred(&mut rng, universe);
                let qf = |x: &u64| q[*x as usize];
                let delta = ExtRat::Fin(random_grade(&mut rng));
                let delta2 = delta.clone() + ExtRat::Fin(random_grade(&mut rng));
                // monotonicity
                if check_union_bound(&d, qf, &delta) && !check_union_bound(&d, qf, &delta2) {
                    violations.push(format!("ubl monotonicity case {case}"));
                }
                // unit at grade 0
                let x = rng.gen_range(0..universe);
                if qf(&x) && !check_union_bound(&Dist::point(x), qf, &ExtRat::zero()) {
                    violations.push(format!("ubl unit case {case}"));
                }
                // bind: dd ⊨ lift_e{d' ⊨ lift_e' Q} ⇒ μ(dd) ⊨ lift_{e+e'}Q
                let inner: Vec<Dist<u64>> =
                    (0..3).map(|_| random_dist(&mut rng, universe)).collect();
                let outer = random_dist(&mut rng, 3);
                let e = ExtRat::Fin(random_grade(&mut rng));
                let e2 = ExtRat::Fin(random_grade(&mut rng));
                let inner_ok = |i: &u64| check_union_bound(&inner[*i as usize], qf, &e2);
                if check_union_bound(&outer, inner_ok, &e) {
                    let mixture = dist_bind(&outer, |i| inner[*i as usize].clone());
                    if !check_union_bound(&mixture, qf, &(e.clone() + e2.clone())) {
                        violations.push(format!("ubl bind case {case}"));
                    }
                }
                // strength: pairing with a satisfied Boolean fact preserves
                // the lifted predicate
                let c = rng.gen_range(0..universe);
                let paired = d.map(|y| (c, *y));
                if check_union_bound(&d, qf, &delta)
                    && !check_union_bound(&paired, |(a, b)| *a == c && qf(b), &delta)
                {
                    violations.push(format!("ubl strength case {case}"));
                }
            }
            LogicMode::Exp => {
                let d = random_dist(&mut rng, universe);
                let q = random_quantity(&mut rng, universe);
                let qf = |x: &u64| q[*x as usize].clone();
                let e_val = expectation(&d, qf);
                let delta = ExtRat::Fin(random_grade(&mut rng));
                // monotonicity in the bound
                if !check_expectation(&d, qf, &(e_val.clone() + delta.clone())) {
                    violations.push(format!("exp monotonicity case {case}"));
                }
                // unit: E over a point is the value itself
                let x = rng.gen_range(0..universe);
                if !check_expectation(&Dist::point(x), qf, &qf(&x)) {
                    violations.push(format!("exp unit case {case}"));
                }
                // bind composition: targets g with slack e', outer bound b+e
                let inner: Vec<Dist<u64>> =
                    (0..3).map(|_| random_dist(&mut rng, universe)).collect();
                let outer = random_dist(&mut rng, 3);
                let e = ExtRat::Fin(random_grade(&mut rng));
                let e2 = ExtRat::Fin(random_grade(&mut rng));
                let g: Vec<ExtRat> = inner
                    .iter()
                    .map(|di| expectation(di, qf))
                    .collect();
                // premises hold by construction with slack 0 ≤ e', b = E[g]
                let b = expectation(&outer, |i| g[*i as usize].clone());
                let mixture = dist_bind(&outer, |i| inner[*i as usize].clone());
                if !check_expectation(&mixture, qf, &(b + e + e2)) {
                    violations.push(format!("exp bind case {case}"));
                }
                // strength with a Boolean fact (0-valued component): pairing
                // cannot raise the expectation bound
                let c = rng.gen_range(0..universe);
                let paired = d.map(|y| (c, *y));
                let pair_q = |(a, b): &(u64, u64)| {
                    if *a == c {
                        qf(b)
                    } else {
                        ExtRat::Inf
                    }
                };
                if !check_expectation(&paired, pair_q, &e_val) {
                    violations.push(format!("exp strength case {case}"));
                }
            }
            LogicMode::Rpl => {
                let d1 = random_dist(&mut rng, universe);
                // derive d2 as a perturbation so couplings exist often
                let d2 = random_dist(&mut rng, universe);
                let sd = statistical_distance(&d1, &d2);
                let eq = |a: &u64, b: &u64| a == b;
                // coupling characterization of SD + monotonicity
                let w = check_approx_lifting(&d1, &d2, eq, &sd);
                if !w.exists {
                    violations.push(format!("rpl sd-coupling case {case}"));
                }
                let more = &sd + random_grade(&mut rng);
                if !check_approx_lifting(&d1, &d2, eq, &more).exists {
                    violations.push(format!("rpl monotonicity case {case}"));
                }
                // unit: related points are coupled at grade 0
                let x = rng.gen_range(0..universe);
                if !check_approx_lifting(&Dist::point(x), &Dist::point(x), eq, &Rat::zero())
                    .exists
                {
                    violations.push(format!("rpl unit case {case}"));
                }
                // bind: per-point couplings at e' compose with an outer
                // coupling at e
                let f1: Vec<Dist<u64>> =
                    (0..universe).map(|_| random_dist(&mut rng, universe)).collect();
                let f2: Vec<Dist<u64>> = f1
                    .iter()
                    .map(|d| {
                        if rng.gen_bool(0.5) {
                            d.clone()
                        } else {
                            random_dist(&mut rng, universe)
                        }
                    })
                    .collect();
                let e2 = (0..universe)
                    .map(|x| statistical_distance(&f1[x as usize], &f2[x as usize]))
                    .fold(Rat::zero(), |a, b| if a > b { a } else { b });
                let b1 = dist_bind(&d1, |x| f1[*x as usize].clone());
                let b2 = dist_bind(&d2, |x| f2[*x as usize].clone());
                if !check_approx_lifting(&b1, &b2, eq, &(&sd + &e2)).exists {
                    violations.push(format!("rpl bind case {case}"));
                }
                // strength: pairing both sides with related constants
                let c = rng.gen_range(0..universe);
                let p1 = d1.map(|y| (c, *y));
                let p2 = d2.map(|y| (c, *y));
                let rel_pair =
                    |a: &(u64, u64), b: &(u64, u64)| a.0 == b.0 && a.1 == b.1;
                if !check_approx_lifting(&p1, &p2, rel_pair, &sd).exists {
                    violations.push(format!("rpl strength case {case}"));
                }
            }
        }
    }
    LawReport {
        cases: trials,
        violations,
    }
}

/// Randomized monad-law suite: left/right unit and associativity of the
/// probabilistic state monad, by exact distribution equality on generated
/// small programs.
pub fn check_monad_laws(trials: u64, seed: u64) -> LawReport {
    let src = "
locations a b;
values nat 3;
dist unif : uniform;
";
    let program = crate::syntax::parser::parse_program(src).expect("monad-law config");
    let cfg = program.config;
    let interp = Interp::new(&cfg);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let loc_a = cfg.loc_id("a").unwrap();
    let loc_b = cfg.loc_id("b").unwrap();

    fn gen_value(rng: &mut StdRng, vars: &[String]) -> Term {
        if !vars.is_empty() && rng.gen_bool(0.5) {
            Term::var(&vars[rng.gen_range(0..vars.len())])
        } else {
            Term::nat_lit(rng.gen_range(0..3))
        }
    }

    fn gen_comp(
        rng: &mut StdRng,
        vars: &mut Vec<String>,
        depth: u32,
        locs: (LocId, LocId),
    ) -> Term {
        let choice = if depth == 0 {
            rng.gen_range(0..4)
        } else {
            rng.gen_range(0..6)
        };
        match choice {
            0 => Term::unit_m(gen_value(rng, vars)),
            1 => Term::Read(if rng.gen_bool(0.5) { locs.0 } else { locs.1 }),
            2 => Term::LetM(
                "w".into(),
                Box::new(Term::Write(
                    if rng.gen_bool(0.5) { locs.0 } else { locs.1 },
                    Box::new(gen_value(rng, vars)),
                )),
                Box::new(Term::unit_m(gen_value(rng, vars))),
            ),
            3 => Term::Sample("unif".into(), vec![Term::nat_lit(rng.gen_range(2..=3))]),
            4 => {
                let t1 = gen_comp(rng, vars, depth - 1, locs);
                let x = format!("x{}", vars.len());
                vars.push(x.clone());
                let t2 = gen_comp(rng, vars, depth - 1, locs);
                vars.pop();
                Term::LetM(x, Box::new(t1), Box::new(t2))
            }
            _ => {
                let scrut = gen_value(rng, vars);
                let arms = (0..3)
                    .map(|_| gen_comp(rng, vars, depth - 1, locs))
                    .collect();
                Term::CaseNat(Box::new(scrut), arms, None)
            }
        }
    }

    for case in 0..trials {
        let mut vars = Vec::new();
        let t = gen_comp(&mut rng, &mut vars, 2, (loc_a, loc_b));
        vars.push("x".into());
        let u = gen_comp(&mut rng, &mut vars, 2, (loc_a, loc_b));
        vars.push("y".into());
        let w = {
            // w must not mention x for the associativity law
            let mut only_y = vec!["y".to_string()];
            gen_comp(&mut rng, &mut only_y, 1, (loc_a, loc_b))
        };
        vars.clear();
        let value = Term::nat_lit(rng.gen_range(0..3));
        let mem = Memory::constant(&cfg, rng.gen_range(0..3) as u8);

        // left unit: let x = unit v in u  ≡  u[x := v]
        let lhs = Term::let_m("x", Term::unit_m(value.clone()), u.clone());
        let rhs = crate::syntax::subst::Subst::one("x", value.clone()).apply_term(&u);
        match (interp.run(&lhs, &mem), interp.run(&rhs, &mem)) {
            (Ok(a), Ok(b)) if a == b => {}
            other => violations.push(format!("left unit case {case}: {other:?}")),
        }

        // right unit: let x = t in unit x ≡ t
        let lhs = Term::let_m("x", t.clone(), Term::unit_m(Term::var("x")));
        match (interp.run(&lhs, &mem), interp.run(&t, &mem)) {
            (Ok(a), Ok(b)) if a == b => {}
            other => violations.push(format!("right unit case {case}: {other:?}")),
        }

        // associativity: let y = (let x = t in u) in w ≡ let x = t in let y = u in w
        let lhs = Term::let_m("y", Term::let_m("x", t.clone(), u.clone()), w.clone());
        let rhs = Term::let_m("x", t.clone(), Term::let_m("y", u.clone(), w.clone()));
        match (interp.run(&lhs, &mem), interp.run(&rhs, &mem)) {
            (Ok(a), Ok(b)) if a == b => {}
            other => violations.push(format!("associativity case {case}: {other:?}")),
        }
    }
    LawReport {
        cases: trials,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    #[test]
    fn union_bound_basics() {
        let d = Dist::uniform((0u64..8).collect::<Vec<_>>());
        assert!(check_union_bound(&d, |x| *x != 0, &ExtRat::Fin(rat(1, 8))));
        assert!(check_union_bound(&d, |_| true, &ExtRat::zero()));
        let p = Dist::point(3u64);
        assert!(!check_union_bound(&p, |x| *x == 0, &ExtRat::Fin(rat(1, 2))));
    }

    #[test]
    fn expectation_basics() {
        let p = Dist::point(3u64);
        assert!(check_expectation(&p, |x| ExtRat::Fin(rat_u64(*x)), &ExtRat::Fin(rat_u64(3))));
        let d = Dist::uniform((0u64..4).collect::<Vec<_>>());
        assert!(!check_expectation(
            &d,
            |x| ExtRat::Fin(rat_u64(*x)),
            &ExtRat::Fin(rat_u64(1))
        ));
        let with_inf = |x: &u64| if *x == 0 { ExtRat::Inf } else { ExtRat::zero() };
        assert!(check_expectation(&d, with_inf, &ExtRat::Inf));
    }

    #[test]
    fn statistical_distance_values() {
        let d = Dist::uniform((0u64..2).collect::<Vec<_>>());
        assert_eq!(statistical_distance(&d, &d), Rat::zero());
        let d4 = Dist::uniform((0u64..4).collect::<Vec<_>>());
        assert_eq!(statistical_distance(&d, &d4), rat(1, 2));
    }

    #[test]
    fn coupling_matches_sd_for_equality() {
        let d = Dist::uniform((0u64..2).collect::<Vec<_>>());
        let d4 = Dist::uniform((0u64..4).collect::<Vec<_>>());
        let sd = statistical_distance(&d, &d4);
        assert!(check_approx_lifting(&d, &d4, |a, b| a == b, &sd).exists);
        let less = &sd - rat(1, 100);
        assert!(!check_approx_lifting(&d, &d4, |a, b| a == b, &less).exists);
        // total relation couples at 0
        assert!(check_approx_lifting(&d, &d4, |_, _| true, &Rat::zero()).exists);
    }
}
