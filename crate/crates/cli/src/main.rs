//! `hoplog` — type-check programs, check proof derivations in the three
//! program logics, run programs under the exact semantics, and validate
//! checked judgments against the semantic oracle.

mod corpus;

use clap::{Parser, Subcommand};
use hoplog_core::certificate::{certificate_json, check_proof};
use hoplog_core::config::CAP_ENV;
use hoplog_core::kernel::script::load_script;
use hoplog_core::kernel::Judgment;
use hoplog_core::logics::LogicMode;
use hoplog_core::oracle::{check_lifting_laws, check_monad_laws, validate_triple, ValidateRequest};
use hoplog_core::semantics::{Interp, Memory};
use hoplog_core::syntax::parser::parse_program;
use hoplog_core::syntax::print::Printer;
use hoplog_core::typecheck::{adv_instantiate, typecheck_program, Checker, Contexts};
use hoplog_core::Program;
use std::path::PathBuf;
use std::process::ExitCode;

const SEED_DEFAULT: u64 = 0x4089_77ce;

#[derive(Parser)]
#[command(
    name = "hoplog",
    version,
    about = "verification toolkit for higher-order probabilistic stateful programs"
)]
struct Cli {
    /// Override the enumeration cap (also HOPLOG_CAP).
    #[arg(long, global = true)]
    cap: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Type-check the definitions of a program file.
    Typecheck {
        file: PathBuf,
        /// Check a single definition only.
        #[arg(long)]
        def: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Check a proof derivation and emit a certificate.
    CheckProof {
        program: PathBuf,
        proof: PathBuf,
        /// Logic instance (must match the script's declaration).
        #[arg(long)]
        logic: Option<String>,
        /// Where to write the certificate.
        #[arg(long, default_value = "certificate.json")]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run a definition from a given initial memory.
    Run {
        program: PathBuf,
        #[arg(long)]
        def: String,
        /// Initial memory, e.g. 'a=0,b=1' (unassigned locations are 0).
        #[arg(long, default_value = "")]
        memory: String,
        /// Instantiate an adversary first: --adversary A=defname.
        #[arg(long)]
        adversary: Option<String>,
        #[arg(long)]
        trace: bool,
    },
    /// Check a proof, then validate its conclusion against the oracle.
    Validate {
        program: PathBuf,
        proof: PathBuf,
        #[arg(long)]
        logic: Option<String>,
        /// Adversary instantiations, e.g. --adversary A=advdef (repeatable).
        #[arg(long)]
        adversary: Vec<String>,
        /// Extra Boolean restriction on initial memories (assertion S-expr).
        #[arg(long)]
        restrict: Option<String>,
        /// Enumerate initial memories exhaustively (the default; accepted
        /// for scripting compatibility).
        #[arg(long)]
        exhaustive: bool,
        #[arg(long)]
        json: bool,
    },
    /// Run the randomized lifting-law and monad-law suites.
    Selftest {
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 100)]
        program_trials: u64,
        #[arg(long, default_value_t = SEED_DEFAULT)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            e.print().ok();
            return ExitCode::from(2);
        }
    };
    if let Some(cap) = cli.cap {
        std::env::set_var(CAP_ENV, cap.to_string());
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn read(path: &PathBuf) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_program(path: &PathBuf) -> Result<(Program, String), String> {
    let src = read(path)?;
    let program = parse_program(&src).map_err(|e| format!("{}:{e}", path.display()))?;
    Ok((program, src))
}

fn dispatch(cmd: Command) -> Result<(), String> {
    match cmd {
        Command::Typecheck { file, def, json } => {
            let (program, _) = load_program(&file)?;
            let result: Result<(), (String, hoplog_core::typecheck::TypeError)> = match def {
                Some(name) => {
                    let d = program
                        .def(&name)
                        .ok_or_else(|| format!("no definition named '{name}'"))?;
                    let checker = Checker::new(&program.config);
                    checker
                        .check(&Contexts::new(), &d.body, &d.ty)
                        .map(|_| ())
                        .map_err(|e| (name.clone(), e))
                }
                None => typecheck_program(&program),
            };
            match result {
                Ok(()) => {
                    if json {
                        println!("{}", serde_json::json!({"ok": true}));
                    } else {
                        println!("ok: {} definition(s) type-check", program.defs.len());
                    }
                    Ok(())
                }
                Err((name, e)) => {
                    if json {
                        println!(
                            "{}",
                            serde_json::json!({"ok": false, "def": name, "error": e.to_string()})
                        );
                    }
                    Err(format!("definition '{name}': {e}"))
                }
            }
        }
        Command::CheckProof {
            program,
            proof,
            logic,
            out,
            json,
        } => {
            let (prog, src) = load_program(&program)?;
            let script_src = read(&proof)?;
            let script = load_script(&script_src, &prog).map_err(|e| e.to_string())?;
            check_logic_flag(&logic, script.mode)?;
            let (cert, report) = check_proof(&prog, &src, &script).map_err(|e| e.to_string())?;
            let body = certificate_json(&cert);
            std::fs::write(&out, &body).map_err(|e| format!("{}: {e}", out.display()))?;
            if json {
                println!("{body}");
            } else {
                println!(
                    "ok: {} rules, {} obligations checked, {} admitted — certificate written to {}",
                    report.rule_count,
                    report.obligations_checked,
                    report.admitted.len(),
                    out.display()
                );
                for a in &report.admitted {
                    println!("  admitted: {} ({})", a.name, a.label);
                }
            }
            Ok(())
        }
        Command::Run {
            program,
            def,
            memory,
            adversary,
            trace,
        } => {
            let (prog, _) = load_program(&program)?;
            let d = prog
                .def(&def)
                .ok_or_else(|| format!("no definition named '{def}'"))?;
            let mut term = d.body.clone();
            if let Some(spec) = adversary {
                term = instantiate(&prog, &term, &spec)?;
            }
            let cfg = &prog.config;
            let mut mem = Memory::zeroed(cfg);
            for item in memory.split(',').filter(|s| !s.is_empty()) {
                let (loc, val) = item
                    .split_once('=')
                    .ok_or_else(|| format!("bad memory assignment '{item}'"))?;
                let l = cfg
                    .loc_id(loc.trim())
                    .ok_or_else(|| format!("unknown location '{loc}'"))?;
                let v: u64 = val
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad value '{val}'"))?;
                if v >= cfg.value_count {
                    return Err(format!("value {v} outside the declared domain"));
                }
                mem.set(l, v);
            }
            if trace {
                let pr = Printer::new(cfg);
                eprintln!("term: {}", pr.term(&term));
                eprintln!("initial memory: [{}]", mem.render(cfg));
            }
            let interp = Interp::new(cfg);
            let dist = interp.run(&term, &mem).map_err(|e| e.to_string())?;
            println!("value, memory, probability");
            for ((v, m), p) in dist.iter() {
                println!(
                    "{}, [{}], {}",
                    render_value(v),
                    m.render(cfg),
                    hoplog_core::rat::fmt_rat(p)
                );
            }
            Ok(())
        }
        Command::Validate {
            program,
            proof,
            logic,
            adversary,
            restrict,
            exhaustive: _,
            json,
        } => {
            let (prog, src) = load_program(&program)?;
            let script_src = read(&proof)?;
            let script = load_script(&script_src, &prog).map_err(|e| e.to_string())?;
            check_logic_flag(&logic, script.mode)?;
            let (cert, report) = check_proof(&prog, &src, &script).map_err(|e| e.to_string())?;
            let cfg = &prog.config;
            let restrict = match restrict {
                None => None,
                Some(r) => Some(
                    hoplog_core::syntax::sexpr::parse_assertion_str(&r, cfg)
                        .map_err(|e| e.to_string())?,
                ),
            };
            let (mut left, mut right) = match &script.goal {
                Judgment::Unary(u) => (u.term.clone(), None),
                Judgment::Rel(r) => (r.left.clone(), Some(r.right.clone())),
            };
            for spec in &adversary {
                left = instantiate(&prog, &left, spec)?;
                if let Some(r) = right.take() {
                    right = Some(instantiate(&prog, &r, spec)?);
                }
            }
            let req = ValidateRequest {
                mode: script.mode,
                pre: script.goal.pre().clone(),
                post: script.goal.post().clone(),
                grade: script.goal.delta().clone(),
                left,
                right,
                restrict,
            };
            let mut vreport = validate_triple(cfg, &req).map_err(|e| e.to_string())?;
            if !vreport.failures.is_empty() {
                vreport.admitted_lemmas_falsified =
                    report.admitted.iter().map(|a| a.name.clone()).collect();
            }
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "certificate": serde_json::from_str::<serde_json::Value>(&certificate_json(&cert)).unwrap(),
                        "validation": vreport,
                    }))
                    .unwrap()
                );
            } else {
                println!(
                    "checked: {} rules, {} admitted; validated {} initial assignment(s) over footprint [{}]",
                    report.rule_count,
                    report.admitted.len(),
                    vreport.memories_checked,
                    vreport.footprint.join(", ")
                );
                if let Some(w) = &vreport.worst_failure_probability {
                    println!("worst failure probability: {w}");
                }
                if let Some(sd) = &vreport.max_statistical_distance {
                    println!("max statistical distance: {sd}");
                }
                for f in &vreport.failures {
                    println!("FAILURE: {f}");
                }
                if !vreport.admitted_lemmas_falsified.is_empty() {
                    println!(
                        "admitted lemmas falsified: {}",
                        vreport.admitted_lemmas_falsified.join(", ")
                    );
                }
            }
            if vreport.failures.is_empty() {
                Ok(())
            } else {
                Err("oracle validation reported failures".into())
            }
        }
        Command::Selftest {
            trials,
            program_trials,
            seed,
        } => {
            let mut ok = true;
            for mode in [LogicMode::Ubl, LogicMode::Exp, LogicMode::Rpl] {
                let report = check_lifting_laws(mode, trials, seed);
                let status = if report.violations.is_empty() {
                    "ok"
                } else {
                    "FAILED"
                };
                println!(
                    "lifting laws [{}]: {} cases, {} violations — {status}",
                    mode.name(),
                    report.cases,
                    report.violations.len()
                );
                for v in report.violations.iter().take(5) {
                    println!("  violation: {v}");
                }
                ok &= report.violations.is_empty();
            }
            let report = check_monad_laws(program_trials, seed);
            let status = if report.violations.is_empty() {
                "ok"
            } else {
                "FAILED"
            };
            println!(
                "monad laws: {} programs, {} violations — {status}",
                report.cases,
                report.violations.len()
            );
            ok &= report.violations.is_empty();
            if ok {
                Ok(())
            } else {
                Err("selftest found violations".into())
            }
        }
    }
}

fn render_value(v: &hoplog_core::semantics::Value) -> String {
    use hoplog_core::semantics::Value;
    match v {
        Value::Star => "*".into(),
        Value::Bool(b) => b.to_string(),
        Value::Nat(n) => n.to_string(),
        Value::Pair(a, b) => format!("({}, {})", render_value(a), render_value(b)),
        Value::MemV(_) => "<memory>".into(),
        Value::Closure(_) | Value::Comp(..) => "<closure>".into(),
    }
}

fn check_logic_flag(flag: &Option<String>, declared: LogicMode) -> Result<(), String> {
    if let Some(l) = flag {
        let requested = LogicMode::parse(l).ok_or_else(|| format!("unknown logic '{l}'"))?;
        if requested != declared {
            return Err(format!(
                "--logic {l} does not match the script's declared logic {}",
                declared.name()
            ));
        }
    }
    Ok(())
}

fn instantiate(
    prog: &Program,
    term: &hoplog_core::syntax::ast::Term,
    spec: &str,
) -> Result<hoplog_core::syntax::ast::Term, String> {
    let (adv, defname) = spec
        .split_once('=')
        .ok_or_else(|| format!("bad adversary spec '{spec}' (use A=defname)"))?;
    let d = prog
        .def(defname.trim())
        .ok_or_else(|| format!("no definition named '{defname}'"))?;
    adv_instantiate(&prog.config, term, adv.trim(), &d.body)
}
