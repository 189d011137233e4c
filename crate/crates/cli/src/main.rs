//! Command-line entry point binding all frontends.
//!
//! Exit codes: 0 when the asked property holds (or a solution/script was
//! produced), 1 when it does not hold (or the script is unsat), 2 on
//! usage errors, 3 on resource or environment errors.

use clap::{Parser, Subcommand, ValueEnum};
use fixgame_core::error::Error;
use fixgame_core::eqsys::{solve_kleene, Equation, EquationSystem};
use fixgame_core::game::{
    a_moves, a_moves_reduced, play, selection_moves, suggest_existential_move, Outcome, Player,
    Position,
};
use fixgame_core::lattice::{Bits, Lattice, PowersetLattice};
use fixgame_core::latticed::{
    parse_mv_equation_body, parse_mv_formula, parse_mvts, Mvts, ValuationLattice,
};
use fixgame_core::mucalc::{model_check, parse_equation_body, parse_formula, parse_kts, KripkeStructure};
use fixgame_core::pm::{solve_measure, Backend, Mode, Order, SymbolicMoves};
use fixgame_core::{cpflow, smtreal, Lifted, Sign};
use serde_json::json;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "fixgame", version, about = "Solvers for systems of fixpoint equations over lattices")]
struct Cli {
    /// Emit a machine-readable JSON envelope on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Model-check a μ-calculus formula on a Kripke structure.
    Mc {
        /// Kripke structure file (states/edges/label lines).
        kts: PathBuf,
        /// Formula, e.g. "nu x2. ((mu x1. (p \/ <>x1)) /\ []x2)".
        formula: String,
        /// State to check.
        #[arg(long)]
        state: String,
        /// Also print the witnessing progress measure.
        #[arg(long)]
        dump_measure: bool,
    },
    /// Solve an equation-system file with the nested Kleene solver.
    Solve {
        /// Equation file referencing a Kripke structure or an MVTS.
        eqs: PathBuf,
    },
    /// Check whether a basis element is below a solution component.
    Check {
        eqs: PathBuf,
        /// Basis element: "{a}" over a Kripke powerset, "a:p" over an MVTS.
        #[arg(long)]
        basis: String,
        /// Equation index, 1-based.
        #[arg(long)]
        index: usize,
    },
    /// Play the fixpoint game against the machine.
    Play {
        eqs: PathBuf,
        /// Start position, e.g. "{a},2".
        #[arg(long)]
        position: String,
        /// Which side the human plays.
        #[arg(long, value_enum)]
        human: Side,
        /// Scripted option numbers (one per line) instead of stdin.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Step cap before the play is declared undecided.
        #[arg(long, default_value_t = 10_000)]
        cap: usize,
    },
    /// Constant propagation for a while program.
    Cp {
        /// Program file.
        file: PathBuf,
        /// Constancy query "x=7@4": is x constantly 7 at block 4?
        #[arg(long)]
        query: Option<String>,
        /// Solve by progress measure instead of Kleene iteration.
        #[arg(long)]
        measure: bool,
    },
    /// Model-check a latticed μ-calculus formula on an MVTS.
    Mvmc {
        mvts: PathBuf,
        /// Formula, e.g. "mu z. (downset(p) \/ <>z)".
        formula: String,
        #[arg(long)]
        state: String,
        /// Truth degree: product names generating a downset, e.g. "p q".
        #[arg(long)]
        degree: String,
    },
    /// Emit (and optionally run) the SMT encoding of a real-valued system.
    Smt {
        /// Real equation file.
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: SmtMode,
        /// Value to check (check mode), e.g. "3/4".
        #[arg(long)]
        value: Option<String>,
        /// Equation index to query, 1-based.
        #[arg(long, default_value_t = 1)]
        index: usize,
        /// External solver command; the script path is appended.
        #[arg(long)]
        solver: Option<String>,
        /// Solver timeout in seconds.
        #[arg(long, default_value_t = 60)]
        timeout: u64,
        /// Write the script here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Side {
    Exists,
    Forall,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SmtMode {
    Check,
    Opt,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Config(_) | Error::Contract(_) => 2,
        Error::SizeGuard(_) | Error::Resource(_) | Error::Environment(_) | Error::Io(_) => 3,
    }
}

fn dispatch(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Cmd::Mc { kts, formula, state, dump_measure } => {
            cmd_mc(&kts, &formula, &state, dump_measure, cli.json)
        }
        Cmd::Solve { eqs } => cmd_solve(&eqs, cli.json),
        Cmd::Check { eqs, basis, index } => cmd_check(&eqs, &basis, index, cli.json),
        Cmd::Play { eqs, position, human, script, cap } => {
            cmd_play(&eqs, &position, human, script.as_deref(), cap, cli.json)
        }
        Cmd::Cp { file, query, measure } => cmd_cp(&file, query.as_deref(), measure, cli.json),
        Cmd::Mvmc { mvts, formula, state, degree } => {
            cmd_mvmc(&mvts, &formula, &state, &degree, cli.json)
        }
        Cmd::Smt { file, mode, value, index, solver, timeout, out } => cmd_smt(
            &file,
            mode,
            value.as_deref(),
            index,
            solver.as_deref(),
            timeout,
            out.as_deref(),
            cli.json,
        ),
    }
}

// ---------------------------------------------------------------------
// mc

fn cmd_mc(
    kts: &Path,
    formula: &str,
    state: &str,
    dump_measure: bool,
    json: bool,
) -> Result<u8, Error> {
    let kripke = parse_kts(&std::fs::read_to_string(kts)?)?;
    let phi = parse_formula(formula)?;
    let result = model_check(&kripke, &phi, state)?;
    let verdict = if result.holds { "holds" } else { "does not hold" };
    if json {
        println!(
            "{}",
            json!({
                "command": "mc",
                "formula": formula,
                "state": state,
                "holds": result.holds,
                "measure": if dump_measure {
                    Some(result.measure.dump(&result.system.lattice))
                } else {
                    None
                },
            })
        );
    } else {
        println!("{verdict}");
        if dump_measure {
            print!("{}", result.measure.dump(&result.system.lattice));
        }
    }
    Ok(if result.holds { 0 } else { 1 })
}

// ---------------------------------------------------------------------
// equation files

enum Loaded {
    Powerset(EquationSystem<PowersetLattice>, #[allow(dead_code)] KripkeStructure),
    Mv(EquationSystem<ValuationLattice>, Mvts),
}

fn load_eqs(path: &Path) -> Result<Loaded, Error> {
    let text = std::fs::read_to_string(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut model: Option<(String, PathBuf)> = None;
    let mut headers: Vec<(String, Sign, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("kripke:") {
            model = Some(("kripke".into(), dir.join(rest.trim())));
        } else if let Some(rest) = line.strip_prefix("mvts:") {
            model = Some(("mvts".into(), dir.join(rest.trim())));
        } else if let Some((lhs, rhs)) = line.split_once("=mu") {
            headers.push((lhs.trim().into(), Sign::Mu, rhs.trim().into()));
        } else if let Some((lhs, rhs)) = line.split_once("=nu") {
            headers.push((lhs.trim().into(), Sign::Nu, rhs.trim().into()));
        } else {
            return Err(Error::parse(
                lineno + 1,
                1,
                "expected 'kripke: file', 'mvts: file' or '<var> =mu|=nu <body>'",
            ));
        }
    }
    let (kind, model_path) = model.ok_or_else(|| {
        Error::Config("equation file must reference a model via 'kripke:' or 'mvts:'".into())
    })?;
    let names: Vec<String> = headers.iter().map(|(n, _, _)| n.clone()).collect();
    let model_text = std::fs::read_to_string(&model_path)?;
    if kind == "kripke" {
        let kripke = parse_kts(&model_text)?;
        let equations = headers
            .iter()
            .map(|(name, sign, body)| {
                Ok(Equation {
                    name: name.clone(),
                    sign: *sign,
                    rhs: parse_equation_body(body, &kripke, &names)?,
                })
            })
            .collect::<Result<Vec<_>, Error>>()?;
        Ok(Loaded::Powerset(EquationSystem::new(kripke.lattice(), equations), kripke))
    } else {
        let mvts = parse_mvts(&model_text)?;
        let equations = headers
            .iter()
            .map(|(name, sign, body)| {
                Ok(Equation {
                    name: name.clone(),
                    sign: *sign,
                    rhs: parse_mv_equation_body(body, &mvts, &names)?,
                })
            })
            .collect::<Result<Vec<_>, Error>>()?;
        Ok(Loaded::Mv(EquationSystem::new(mvts.valuation_lattice(), equations), mvts))
    }
}

fn parse_powerset_elem(lat: &PowersetLattice, text: &str) -> Result<Bits, Error> {
    let inner = text.trim();
    let inner = inner.strip_prefix('{').and_then(|s| s.strip_suffix('}')).unwrap_or(inner);
    let mut set = Bits::EMPTY;
    for name in inner.split(|c: char| c == ',' || c.is_whitespace()) {
        if name.is_empty() {
            continue;
        }
        let i = lat
            .state_index(name)
            .ok_or_else(|| Error::Config(format!("unknown state {name:?}")))?;
        set.insert(i);
    }
    Ok(set)
}

fn parse_mv_basis(mvts: &Mvts, text: &str) -> Result<Vec<Bits>, Error> {
    let (state, product) = text
        .split_once(':')
        .ok_or_else(|| Error::Config("mv basis elements look like 'state:product'".into()))?;
    let x = mvts
        .state_index(state.trim())
        .ok_or_else(|| Error::Config(format!("unknown state {state:?}")))?;
    let p = mvts
        .lattice
        .poset()
        .index(product.trim())
        .ok_or_else(|| Error::Config(format!("unknown product {product:?}")))?;
    Ok(mvts.valuation_lattice().at(x, mvts.lattice.poset().down(p)))
}

// ---------------------------------------------------------------------
// solve / check

fn cmd_solve(eqs: &Path, json: bool) -> Result<u8, Error> {
    match load_eqs(eqs)? {
        Loaded::Powerset(sys, _) => {
            let sol = solve_kleene(&sys);
            print_solution(&sys, &sol, json);
        }
        Loaded::Mv(sys, _) => {
            let sol = solve_kleene(&sys);
            print_solution(&sys, &sol, json);
        }
    }
    Ok(0)
}

fn print_solution<L: Lattice>(sys: &EquationSystem<L>, sol: &[L::Elem], json: bool) {
    if json {
        let entries: serde_json::Map<String, serde_json::Value> = sys
            .equations
            .iter()
            .zip(sol.iter())
            .map(|(eq, v)| (eq.name.clone(), json!(sys.lattice.fmt_elem(v))))
            .collect();
        println!("{}", json!({"command": "solve", "solution": entries}));
    } else {
        for (eq, v) in sys.equations.iter().zip(sol.iter()) {
            println!("{} = {}", eq.name, sys.lattice.fmt_elem(v));
        }
    }
}

fn cmd_check(eqs: &Path, basis: &str, index: usize, json: bool) -> Result<u8, Error> {
    match load_eqs(eqs)? {
        Loaded::Powerset(sys, _) => {
            let b = parse_powerset_elem(&sys.lattice, basis)?;
            check_position(&sys, b, index, json)
        }
        Loaded::Mv(sys, mvts) => {
            let b = parse_mv_basis(&mvts, basis)?;
            check_position(&sys, b, index, json)
        }
    }
}

fn check_position<L: Lattice>(
    sys: &EquationSystem<L>,
    b: L::Elem,
    index: usize,
    json: bool,
) -> Result<u8, Error> {
    if index == 0 || index > sys.arity() {
        return Err(Error::Config(format!("index {index} out of range")));
    }
    if !sys.lattice.is_basis(&b) {
        return Err(Error::Config("not a basis element".into()));
    }
    let run = solve_measure(
        sys,
        Backend::Formula,
        Mode::Local(vec![(b.clone(), index - 1)]),
        Order::Fifo,
    )?;
    let value = run.measure.get(&b, index - 1).cloned().unwrap_or(Lifted::Star);
    let holds = !value.is_star();
    if json {
        println!(
            "{}",
            json!({
                "command": "check",
                "basis": sys.lattice.fmt_elem(&b),
                "index": index,
                "measure": value.to_string(),
                "holds": holds,
            })
        );
    } else {
        println!("{}\t{}\t{}", sys.lattice.fmt_elem(&b), index, value);
        println!("{}", if holds { "holds" } else { "does not hold" });
    }
    Ok(if holds { 0 } else { 1 })
}

// ---------------------------------------------------------------------
// play

struct MoveSource {
    script: Option<Vec<String>>,
    cursor: usize,
}

impl MoveSource {
    fn new(script: Option<&Path>) -> Result<Self, Error> {
        let script = match script {
            Some(path) => Some(
                std::fs::read_to_string(path)?
                    .lines()
                    .map(|l| l.trim().to_string())
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .collect(),
            ),
            None => None,
        };
        Ok(MoveSource { script, cursor: 0 })
    }

    /// Reads option numbers until one is within `1..=n`; 0 resigns.
    fn choose(&mut self, n: usize) -> Result<Option<usize>, Error> {
        loop {
            let line = match &self.script {
                Some(lines) => {
                    let line = lines.get(self.cursor).cloned().ok_or_else(|| {
                        Error::Config("script exhausted before the play ended".into())
                    })?;
                    self.cursor += 1;
                    println!("choose> {line}");
                    line
                }
                None => {
                    print!("choose> ");
                    std::io::stdout().flush()?;
                    let mut buf = String::new();
                    if std::io::stdin().lock().read_line(&mut buf)? == 0 {
                        return Ok(None);
                    }
                    buf.trim().to_string()
                }
            };
            match line.parse::<usize>() {
                Ok(0) => return Ok(None),
                Ok(k) if k <= n => return Ok(Some(k - 1)),
                _ => println!("invalid choice {line:?}: enter a number from 1 to {n} (0 resigns)"),
            }
        }
    }
}

fn cmd_play(
    eqs: &Path,
    position: &str,
    human: Side,
    script: Option<&Path>,
    cap: usize,
    json: bool,
) -> Result<u8, Error> {
    let (basis_text, index_text) = position
        .rsplit_once(',')
        .ok_or_else(|| Error::Config("positions look like '{a},2'".into()))?;
    let index: usize = index_text
        .trim()
        .parse()
        .map_err(|_| Error::Config("position index must be a number".into()))?;
    match load_eqs(eqs)? {
        Loaded::Powerset(sys, _) => {
            let b = parse_powerset_elem(&sys.lattice, basis_text)?;
            play_repl(&sys, b, index, human, script, cap, json)
        }
        Loaded::Mv(sys, mvts) => {
            let b = parse_mv_basis(&mvts, basis_text)?;
            play_repl(&sys, b, index, human, script, cap, json)
        }
    }
}

/// Line-oriented play loop: the engine prints the position and numbered
/// legal moves, the human answers with an option number; the machine
/// side plays from the least progress measure.
fn play_repl<L: Lattice>(
    sys: &EquationSystem<L>,
    b: L::Elem,
    index: usize,
    human: Side,
    script: Option<&Path>,
    cap: usize,
    json: bool,
) -> Result<u8, Error> {
    if index == 0 || index > sys.arity() {
        return Err(Error::Config(format!("index {index} out of range")));
    }
    if !sys.lattice.is_basis(&b) {
        return Err(Error::Config("not a basis element".into()));
    }
    let run = solve_measure(sys, Backend::Formula, Mode::Global, Order::Fifo)?;
    let measure = run.measure;
    let moves = SymbolicMoves::new();
    let source = std::cell::RefCell::new(MoveSource::new(script)?);
    let lat = sys.lattice.clone();

    let err: std::cell::RefCell<Option<Error>> = std::cell::RefCell::new(None);
    let outcome = {
        let mut exists_choice = |b2: &L::Elem, i2: usize| -> Option<Vec<L::Elem>> {
            println!("position ({},{}) — exists to move", lat.fmt_elem(b2), i2 + 1);
            if human == Side::Exists {
                let legal = match selection_moves(sys, &moves, b2, i2, 1 << 12) {
                    Ok(l) => l,
                    Err(e) => {
                        *err.borrow_mut() = Some(e);
                        return None;
                    }
                };
                if legal.is_empty() {
                    println!("no legal moves");
                    return None;
                }
                for (k, l) in legal.iter().enumerate() {
                    println!("  {}. {}", k + 1, fmt_tuple(&lat, l));
                }
                match source.borrow_mut().choose(legal.len()) {
                    Ok(Some(k)) => Some(legal[k].clone()),
                    Ok(None) => None,
                    Err(e) => {
                        *err.borrow_mut() = Some(e);
                        None
                    }
                }
            } else {
                match suggest_existential_move(sys, &moves, &measure, b2, i2, 1 << 12) {
                    Ok(Some(l)) => {
                        println!("machine exists plays {}", fmt_tuple(&lat, &l));
                        Some(l)
                    }
                    Ok(None) => {
                        println!("machine exists resigns (the position is lost)");
                        None
                    }
                    Err(e) => {
                        *err.borrow_mut() = Some(e);
                        None
                    }
                }
            }
        };
        let mut forall_choice = |l: &[L::Elem]| -> Option<(L::Elem, usize)> {
            println!("position {} — forall to move", fmt_tuple(&lat, l));
            let legal = a_moves(&lat, l);
            if legal.is_empty() {
                return None;
            }
            if human == Side::Forall {
                for (k, (b2, j)) in legal.iter().enumerate() {
                    println!("  {}. ({},{})", k + 1, lat.fmt_elem(b2), j + 1);
                }
                match source.borrow_mut().choose(legal.len()) {
                    Ok(Some(k)) => Some(legal[k].clone()),
                    Ok(None) => None,
                    Err(e) => {
                        *err.borrow_mut() = Some(e);
                        None
                    }
                }
            } else {
                // machine forall plays from the answers reduced to maximal
                // basis elements per index, preferring answers the measure
                // marks lost and otherwise pushing the measure up
                let reduced = a_moves_reduced(&lat, l);
                let choice = reduced
                    .iter()
                    .max_by(|(b1, j1), (b2, j2)| {
                        let v1 = measure.get(b1, *j1).cloned().unwrap_or(Lifted::Star);
                        let v2 = measure.get(b2, *j2).cloned().unwrap_or(Lifted::Star);
                        v1.cmp_lex(&v2).then_with(|| (b2, j2).cmp(&(b1, j1)))
                    })
                    .cloned();
                if let Some((b2, j)) = &choice {
                    println!("machine forall challenges ({},{})", lat.fmt_elem(b2), j + 1);
                }
                choice
            }
        };
        play(sys, Position::Exists(b, index - 1), &mut exists_choice, &mut forall_choice, cap)?
    };
    if let Some(e) = err.into_inner() {
        return Err(e);
    }

    let (line, code) = describe_outcome(&outcome.outcome);
    if json {
        println!(
            "{}",
            json!({
                "command": "play",
                "outcome": line,
                "steps": outcome.steps.len(),
            })
        );
    } else {
        println!("{line}");
    }
    Ok(code)
}

fn describe_outcome(outcome: &Outcome) -> (String, u8) {
    match outcome {
        Outcome::ForallStuck => ("exists wins (forall stuck)".into(), 0),
        Outcome::ExistsStuck => ("forall wins (exists stuck)".into(), 1),
        Outcome::Cycle { top_index, sign } => {
            let winner = match sign {
                Sign::Nu => Player::Exists,
                Sign::Mu => Player::Forall,
            };
            (
                format!(
                    "{winner} wins (cycle, highest index {} is {sign})",
                    top_index + 1
                ),
                if *sign == Sign::Nu { 0 } else { 1 },
            )
        }
        Outcome::Undecided => ("undecided (step cap reached)".into(), 3),
    }
}

fn fmt_tuple<L: Lattice>(lat: &L, l: &[L::Elem]) -> String {
    let parts: Vec<String> = l.iter().map(|e| lat.fmt_elem(e)).collect();
    format!("({})", parts.join(","))
}

// ---------------------------------------------------------------------
// cp

fn cmd_cp(file: &Path, query: Option<&str>, measure: bool, json: bool) -> Result<u8, Error> {
    let program = cpflow::parse_while(&std::fs::read_to_string(file)?)?;
    let eqs = cpflow::build_equations(&program);
    let sol = cpflow::solve_cp(&eqs);
    let lat = &eqs.system.lattice;

    if measure {
        let run = cpflow::solve_measure_cp(&eqs)?;
        print!("{}", run.measure.dump(lat));
    }

    let mut report: Vec<(String, String)> = Vec::new();
    for (i, v) in sol.iter().enumerate() {
        report.push((format!("rho{}", i + 1), lat.fmt_elem(v)));
    }

    let mut code = 0u8;
    let mut query_json = None;
    let mut transcript_text = None;
    if let Some(q) = query {
        let (var, value, block) = parse_query(q)?;
        let holds = cpflow::query_constant(&eqs, &var, value, block)?;
        let tree = cpflow::game_transcript(&eqs, &var, value, block)?;
        let transcript = cpflow::render_transcript(&eqs, &tree);
        code = if holds { 0 } else { 1 };
        query_json = Some(json!({
            "query": q,
            "holds": holds,
            "game_confirms": tree.exists_wins_all(),
        }));
        transcript_text = Some(transcript);
    }

    if json {
        let blocks: serde_json::Map<String, serde_json::Value> =
            report.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        println!(
            "{}",
            json!({
                "command": "cp",
                "solution": blocks,
                "query": query_json,
                "transcript": transcript_text,
            })
        );
    } else {
        for (k, v) in &report {
            println!("{k} = {v}");
        }
        if let Some(q) = query {
            println!(
                "query {q}: {}",
                if code == 0 { "holds" } else { "does not hold" }
            );
        }
        if let Some(t) = &transcript_text {
            print!("{t}");
        }
    }
    Ok(code)
}

/// `x=7@4` → (x, 7, 4).
fn parse_query(q: &str) -> Result<(String, i64, usize), Error> {
    let bad = || Error::Config(format!("queries look like \"x=7@4\", got {q:?}"));
    let (lhs, block) = q.split_once('@').ok_or_else(bad)?;
    let (var, value) = lhs.split_once('=').ok_or_else(bad)?;
    Ok((
        var.trim().to_string(),
        value.trim().parse().map_err(|_| bad())?,
        block.trim().parse().map_err(|_| bad())?,
    ))
}

// ---------------------------------------------------------------------
// mvmc

fn cmd_mvmc(
    mvts_path: &Path,
    formula: &str,
    state: &str,
    degree: &str,
    json: bool,
) -> Result<u8, Error> {
    let mvts = parse_mvts(&std::fs::read_to_string(mvts_path)?)?;
    let phi = parse_mv_formula(formula)?;
    let gens = degree
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|name| {
            mvts.lattice
                .poset()
                .index(name)
                .ok_or_else(|| Error::Config(format!("unknown product {name:?}")))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let d = mvts.lattice.downset_of(gens);
    let result = fixgame_core::latticed::mv_model_check(&mvts, &phi, state, &d)?;
    let verdict = if result.holds { "holds" } else { "does not hold" };
    if json {
        println!(
            "{}",
            json!({
                "command": "mvmc",
                "state": state,
                "degree": mvts.lattice.fmt_elem(&d),
                "holds": result.holds,
            })
        );
    } else {
        println!("{verdict} at degree {}", mvts.lattice.fmt_elem(&d));
    }
    Ok(if result.holds { 0 } else { 1 })
}

// ---------------------------------------------------------------------
// smt

#[allow(clippy::too_many_arguments)]
fn cmd_smt(
    file: &Path,
    mode: SmtMode,
    value: Option<&str>,
    index: usize,
    solver: Option<&str>,
    timeout: u64,
    out: Option<&Path>,
    json: bool,
) -> Result<u8, Error> {
    let sys = smtreal::parse_real_system(&std::fs::read_to_string(file)?)?;
    if index == 0 || index > sys.arity() {
        return Err(Error::Config(format!("index {index} out of range")));
    }
    let (params, warnings) = smtreal::derive_decrease_params(&sys);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let query = match mode {
        SmtMode::Check => {
            let v = value.ok_or_else(|| {
                Error::Config("check mode needs --value".into())
            })?;
            smtreal::Query::Check { index: index - 1, value: smtreal::parse_rat(v)? }
        }
        SmtMode::Opt => smtreal::Query::Optimize { index: index - 1 },
    };
    let script = smtreal::emit_smtlib(&sys, &params, &query)?;
    match out {
        Some(path) => {
            std::fs::write(path, &script)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            if !json && solver.is_none() {
                print!("{script}");
            }
        }
    }

    let mut verdict = None;
    let mut model = None;
    let mut code = 0u8;
    if let Some(cmd) = solver {
        let outcome =
            smtreal::run_external_solver(&script, cmd, Duration::from_secs(timeout))?;
        if let Some(w) = &outcome.warning {
            eprintln!("warning: {w}");
        }
        let v = match outcome.verdict {
            smtreal::SolverVerdict::Sat => {
                code = 0;
                "sat"
            }
            smtreal::SolverVerdict::Unsat => {
                code = 1;
                "unsat"
            }
            smtreal::SolverVerdict::Unknown => {
                code = 3;
                "unknown"
            }
        };
        verdict = Some(v.to_string());
        model = outcome.value.map(|r| r.to_string());
        if !json {
            match &model {
                Some(m) => println!("{v} (v = {m})"),
                None => println!("{v}"),
            }
        }
    }
    if json {
        println!(
            "{}",
            json!({
                "command": "smt",
                "script": if out.is_none() { Some(&script) } else { None },
                "verdict": verdict,
                "value": model,
                "warnings": warnings,
            })
        );
    }
    Ok(code)
}
