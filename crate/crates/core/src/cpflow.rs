//! Constant-propagation frontend: parses a small while fragment, emits
//! the all-ν equation system over flat environments, solves it, and
//! replays the fixpoint game for constancy queries.
//!
//! The analysis order is reversed with respect to the usual convention:
//! ⊥ means "not known constant" and the greatest solution is the most
//! precise sound one, so all equations carry ν. A constancy query
//! `x = z @ block` is the lattice question `⊥[x↦z] ⊑ ρ_block`, answered
//! either by the Kleene solution or by a game transcript in which the
//! machine existential player follows the solution.

use crate::error::{Error, Result};
use crate::eqsys::{Equation, EquationSystem, MonotoneOp, Sign, Term};
use crate::game::{selection_moves, verify_existential_strategy, PlayTree};
use crate::lattice::{FlatEnv, FlatEnvLattice, Lattice};
use crate::pm::{self, MoveFormula, SymbolicMoves};
use std::collections::BTreeMap;
use std::fmt;

// ---------------------------------------------------------------------
// Syntax

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    fn eval(self, a: i64, b: i64) -> Option<i64> {
        match self {
            BinOp::Add => a.checked_add(b),
            BinOp::Sub => a.checked_sub(b),
            BinOp::Mul => a.checked_mul(b),
        }
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinOp::Add => write!(f, "+"),
            BinOp::Sub => write!(f, "-"),
            BinOp::Mul => write!(f, "*"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Expr {
    Int(i64),
    Var(String),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    fn vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(x) => {
                if !out.contains(x) {
                    out.push(x.clone());
                }
            }
            Expr::Bin(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    fn literals(&self, out: &mut Vec<i64>) {
        match self {
            Expr::Int(n) => out.push(*n),
            Expr::Var(_) => {}
            Expr::Bin(_, a, b) => {
                a.literals(out);
                b.literals(out);
            }
        }
    }

    fn ops(&self, out: &mut Vec<BinOp>) {
        if let Expr::Bin(op, a, b) = self {
            if !out.contains(op) {
                out.push(*op);
            }
            a.ops(out);
            b.ops(out);
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Var(x) => write!(f, "{x}"),
            Expr::Bin(op, a, b) => write!(f, "({a}{op}{b})"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Stmt {
    Assign { block: usize, var: String, expr: Expr },
    /// `while * do ... od`; the condition is a block of its own.
    While { block: usize, body: Vec<Stmt> },
}

#[derive(Clone, Debug)]
pub struct WhileProgram {
    pub stmts: Vec<Stmt>,
    pub num_blocks: usize,
    pub vars: Vec<String>,
}

// ---------------------------------------------------------------------
// Parser

struct CpLexer {
    toks: Vec<(CpTok, usize, usize)>,
    pos: usize,
    end: (usize, usize),
}

#[derive(Clone, PartialEq, Eq, Debug)]
enum CpTok {
    Ident(String),
    Int(i64),
    Assign,
    Semi,
    Plus,
    Minus,
    Star,
    LPar,
    RPar,
    While,
    Do,
    Od,
}

impl CpLexer {
    fn new(text: &str) -> Result<CpLexer> {
        let mut toks = Vec::new();
        let mut line = 1usize;
        let mut col = 1usize;
        let mut it = text.chars().peekable();
        while let Some(&c) = it.peek() {
            let (l0, c0) = (line, col);
            let bump = |it: &mut std::iter::Peekable<std::str::Chars>,
                            line: &mut usize,
                            col: &mut usize| {
                let c = it.next().unwrap();
                if c == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
                c
            };
            if c.is_whitespace() {
                bump(&mut it, &mut line, &mut col);
                continue;
            }
            if c == '#' {
                while let Some(&c2) = it.peek() {
                    if c2 == '\n' {
                        break;
                    }
                    bump(&mut it, &mut line, &mut col);
                }
                continue;
            }
            if c.is_ascii_digit() {
                let mut n = String::new();
                while let Some(&c2) = it.peek() {
                    if c2.is_ascii_digit() {
                        n.push(bump(&mut it, &mut line, &mut col));
                    } else {
                        break;
                    }
                }
                let v: i64 = n
                    .parse()
                    .map_err(|_| Error::parse(l0, c0, "integer literal out of range"))?;
                toks.push((CpTok::Int(v), l0, c0));
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let mut w = String::new();
                while let Some(&c2) = it.peek() {
                    if c2.is_alphanumeric() || c2 == '_' {
                        w.push(bump(&mut it, &mut line, &mut col));
                    } else {
                        break;
                    }
                }
                let tok = match w.as_str() {
                    "while" => CpTok::While,
                    "do" => CpTok::Do,
                    "od" => CpTok::Od,
                    _ => CpTok::Ident(w),
                };
                toks.push((tok, l0, c0));
                continue;
            }
            match c {
                ':' => {
                    bump(&mut it, &mut line, &mut col);
                    if it.peek() == Some(&'=') {
                        bump(&mut it, &mut line, &mut col);
                        toks.push((CpTok::Assign, l0, c0));
                    } else {
                        return Err(Error::parse(l0, c0, "expected :="));
                    }
                }
                ';' => {
                    bump(&mut it, &mut line, &mut col);
                    toks.push((CpTok::Semi, l0, c0));
                }
                '+' => {
                    bump(&mut it, &mut line, &mut col);
                    toks.push((CpTok::Plus, l0, c0));
                }
                '-' => {
                    bump(&mut it, &mut line, &mut col);
                    toks.push((CpTok::Minus, l0, c0));
                }
                '*' => {
                    bump(&mut it, &mut line, &mut col);
                    toks.push((CpTok::Star, l0, c0));
                }
                '(' => {
                    bump(&mut it, &mut line, &mut col);
                    toks.push((CpTok::LPar, l0, c0));
                }
                ')' => {
                    bump(&mut it, &mut line, &mut col);
                    toks.push((CpTok::RPar, l0, c0));
                }
                other => {
                    return Err(Error::parse(l0, c0, format!("unexpected character {other:?}")))
                }
            }
        }
        Ok(CpLexer { toks, pos: 0, end: (line, col) })
    }

    fn peek(&self) -> Option<&CpTok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn next_tok(&mut self) -> Option<CpTok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|&(_, l, c)| (l, c)).unwrap_or(self.end)
    }

    fn expect(&mut self, t: CpTok, what: &str) -> Result<()> {
        let (l, c) = self.here();
        match self.next_tok() {
            Some(tok) if tok == t => Ok(()),
            _ => Err(Error::parse(l, c, format!("expected {what}"))),
        }
    }
}

/// Parses the while fragment; blocks are numbered in source order
/// starting at 1, depth-first (a `while` condition gets its number
/// before the body blocks).
pub fn parse_while(text: &str) -> Result<WhileProgram> {
    let mut lx = CpLexer::new(text)?;
    let mut counter = 0usize;
    let stmts = parse_stmts(&mut lx, &mut counter)?;
    if lx.peek().is_some() {
        let (l, c) = lx.here();
        return Err(Error::parse(l, c, "trailing input after program"));
    }
    let mut vars = Vec::new();
    collect_vars(&stmts, &mut vars);
    Ok(WhileProgram { stmts, num_blocks: counter, vars })
}

fn parse_stmts(lx: &mut CpLexer, counter: &mut usize) -> Result<Vec<Stmt>> {
    let mut stmts = vec![parse_stmt(lx, counter)?];
    while lx.peek() == Some(&CpTok::Semi) {
        lx.next_tok();
        stmts.push(parse_stmt(lx, counter)?);
    }
    Ok(stmts)
}

fn parse_stmt(lx: &mut CpLexer, counter: &mut usize) -> Result<Stmt> {
    let (l, c) = lx.here();
    match lx.next_tok() {
        Some(CpTok::Ident(var)) => {
            lx.expect(CpTok::Assign, "':='")?;
            let expr = parse_expr(lx)?;
            *counter += 1;
            Ok(Stmt::Assign { block: *counter, var, expr })
        }
        Some(CpTok::While) => {
            lx.expect(CpTok::Star, "'*' as the loop condition")?;
            *counter += 1;
            let block = *counter;
            lx.expect(CpTok::Do, "'do'")?;
            let body = parse_stmts(lx, counter)?;
            lx.expect(CpTok::Od, "'od'")?;
            Ok(Stmt::While { block, body })
        }
        _ => Err(Error::parse(l, c, "expected an assignment or 'while'")),
    }
}

fn parse_expr(lx: &mut CpLexer) -> Result<Expr> {
    let mut acc = parse_factor(lx)?;
    loop {
        let op = match lx.peek() {
            Some(CpTok::Plus) => BinOp::Add,
            Some(CpTok::Minus) => BinOp::Sub,
            _ => break,
        };
        lx.next_tok();
        let rhs = parse_factor(lx)?;
        acc = Expr::Bin(op, Box::new(acc), Box::new(rhs));
    }
    Ok(acc)
}

fn parse_factor(lx: &mut CpLexer) -> Result<Expr> {
    let mut acc = parse_atom(lx)?;
    while lx.peek() == Some(&CpTok::Star) {
        lx.next_tok();
        let rhs = parse_atom(lx)?;
        acc = Expr::Bin(BinOp::Mul, Box::new(acc), Box::new(rhs));
    }
    Ok(acc)
}

fn parse_atom(lx: &mut CpLexer) -> Result<Expr> {
    let (l, c) = lx.here();
    match lx.next_tok() {
        Some(CpTok::Int(n)) => Ok(Expr::Int(n)),
        Some(CpTok::Ident(x)) => Ok(Expr::Var(x)),
        Some(CpTok::LPar) => {
            let e = parse_expr(lx)?;
            lx.expect(CpTok::RPar, "')'")?;
            Ok(e)
        }
        _ => Err(Error::parse(l, c, "expected an expression")),
    }
}

fn collect_vars(stmts: &[Stmt], out: &mut Vec<String>) {
    for s in stmts {
        match s {
            Stmt::Assign { var, expr, .. } => {
                if !out.contains(var) {
                    out.push(var.clone());
                }
                let mut vs = Vec::new();
                expr.vars(&mut vs);
                for v in vs {
                    if !out.contains(&v) {
                        out.push(v);
                    }
                }
            }
            Stmt::While { body, .. } => collect_vars(body, out),
        }
    }
}

// ---------------------------------------------------------------------
// Abstract evaluation and the update operator

/// Abstract evaluation of an expression in a non-⊤ environment: any
/// UNDEF operand (or arithmetic overflow) makes the result UNDEF.
pub fn abstract_eval(lat: &FlatEnvLattice, expr: &Expr, env: &FlatEnv) -> Option<i64> {
    let FlatEnv::Env(slots) = env else {
        // callers handle the ⊤ case before evaluating
        return None;
    };
    match expr {
        Expr::Int(n) => Some(*n),
        Expr::Var(x) => slots[lat.var_index(x)?],
        Expr::Bin(op, a, b) => {
            let va = abstract_eval(lat, a, env)?;
            let vb = abstract_eval(lat, b, env)?;
            op.eval(va, vb)
        }
    }
}

/// Cap on the case-split fan-out of a single update move formula.
const SPLIT_CAP: usize = 4096;

/// The transfer function `ρ ↦ ρ[x ↦ eval(e, ρ)]`, with `⊤[x↦z] = ⊤`.
#[derive(Clone, Debug)]
pub struct UpdateOp {
    pub var: String,
    pub expr: Expr,
}

impl MonotoneOp<FlatEnvLattice> for UpdateOp {
    fn name(&self) -> String {
        format!("[{}->{}]", self.var, self.expr)
    }

    fn arity(&self) -> usize {
        1
    }

    fn apply(&self, lat: &FlatEnvLattice, args: &[FlatEnv]) -> FlatEnv {
        match &args[0] {
            FlatEnv::Top => FlatEnv::Top,
            env @ FlatEnv::Env(slots) => {
                let value = abstract_eval(lat, &self.expr, env);
                let mut out = slots.clone();
                if let Some(k) = lat.var_index(&self.var) {
                    out[k] = value;
                }
                FlatEnv::Env(out)
            }
        }
    }

    /// Case split on whether `b` reads the updated variable. When it
    /// does, the move set is a union of upsets of point environments
    /// forcing `eval(e, ρ) = z`; when no such environment exists the
    /// only move is ⊤, represented as `Unsupported`.
    fn symbolic_move(&self, lat: &FlatEnvLattice, b: &FlatEnv) -> Option<MoveFormula<FlatEnv>> {
        let FlatEnv::Env(slots) = b else { return None };
        let (var, value) = slots
            .iter()
            .enumerate()
            .find_map(|(k, v)| v.map(|z| (k, z)))?;
        if lat.vars()[var] != self.var {
            return Some(MoveFormula::Atom(b.clone(), 0));
        }
        let mut assignments = Vec::new();
        if !target_assignments(lat, &self.expr, value, &mut assignments) {
            return None;
        }
        if assignments.is_empty() {
            return Some(MoveFormula::Unsupported);
        }
        Some(MoveFormula::Or(
            assignments
                .into_iter()
                .map(|a| {
                    MoveFormula::And(
                        a.into_iter()
                            .map(|(v, z)| {
                                let k = lat.var_index(&v).expect("declared variable");
                                MoveFormula::Atom(lat.point(k, z), 0)
                            })
                            .collect(),
                    )
                })
                .collect(),
        ))
    }
}

/// Collects variable assignments under which `expr` evaluates to
/// `target`, propagating targets through inverse arithmetic; a factor
/// with unknowns on both sides ranges over the declared universe.
/// Returns false when the fan-out exceeds the cap.
fn target_assignments(
    lat: &FlatEnvLattice,
    expr: &Expr,
    target: i64,
    out: &mut Vec<BTreeMap<String, i64>>,
) -> bool {
    fn merge(
        a: &BTreeMap<String, i64>,
        b: &BTreeMap<String, i64>,
    ) -> Option<BTreeMap<String, i64>> {
        let mut out = a.clone();
        for (k, v) in b {
            match out.get(k) {
                Some(w) if w != v => return None,
                _ => {
                    out.insert(k.clone(), *v);
                }
            }
        }
        Some(out)
    }
    fn go(
        lat: &FlatEnvLattice,
        expr: &Expr,
        target: i64,
        out: &mut Vec<BTreeMap<String, i64>>,
    ) -> bool {
        match expr {
            Expr::Int(n) => {
                if *n == target {
                    out.push(BTreeMap::new());
                }
                true
            }
            Expr::Var(x) => {
                let mut m = BTreeMap::new();
                m.insert(x.clone(), target);
                out.push(m);
                true
            }
            Expr::Bin(op, a, b) => {
                // candidate values for the left operand: exact when one
                // side is a literal, otherwise the declared universe
                let pairs: Vec<(i64, i64)> = match (&**a, &**b) {
                    (Expr::Int(n), _) => invert_right(*op, *n, target).into_iter().collect(),
                    (_, Expr::Int(n)) => invert_left(*op, *n, target).into_iter().collect(),
                    _ => lat
                        .universe()
                        .iter()
                        .flat_map(|&t1| {
                            invert_free(*op, t1, target, lat).into_iter().map(move |t2| (t1, t2))
                        })
                        .collect(),
                };
                for (t1, t2) in pairs {
                    let mut left = Vec::new();
                    let mut right = Vec::new();
                    if !go(lat, a, t1, &mut left) || !go(lat, b, t2, &mut right) {
                        return false;
                    }
                    for la in &left {
                        for rb in &right {
                            if let Some(m) = merge(la, rb) {
                                out.push(m);
                            }
                            if out.len() > SPLIT_CAP {
                                return false;
                            }
                        }
                    }
                }
                true
            }
        }
    }
    let ok = go(lat, expr, target, out);
    out.sort();
    out.dedup();
    ok
}

/// `n op t2 = target`: solve for `t2`.
fn invert_right(op: BinOp, n: i64, target: i64) -> Vec<(i64, i64)> {
    match op {
        BinOp::Add => target.checked_sub(n).map(|t2| (n, t2)).into_iter().collect(),
        BinOp::Sub => n.checked_sub(target).map(|t2| (n, t2)).into_iter().collect(),
        BinOp::Mul => {
            if n == 0 {
                // 0 * t2 = target has every t2 as a witness when target
                // is 0; the unconstrained case is folded into 0 itself
                if target == 0 {
                    vec![(0, 0)]
                } else {
                    vec![]
                }
            } else if target % n == 0 {
                vec![(n, target / n)]
            } else {
                vec![]
            }
        }
    }
}

/// `t1 op n = target`: solve for `t1`.
fn invert_left(op: BinOp, n: i64, target: i64) -> Vec<(i64, i64)> {
    match op {
        BinOp::Add => target.checked_sub(n).map(|t1| (t1, n)).into_iter().collect(),
        BinOp::Sub => target.checked_add(n).map(|t1| (t1, n)).into_iter().collect(),
        BinOp::Mul => {
            if n == 0 {
                if target == 0 {
                    vec![(0, 0)]
                } else {
                    vec![]
                }
            } else if target % n == 0 {
                vec![(target / n, n)]
            } else {
                vec![]
            }
        }
    }
}

/// Both operands unknown: the left value ranges over the universe.
fn invert_free(op: BinOp, t1: i64, target: i64, _lat: &FlatEnvLattice) -> Vec<i64> {
    match op {
        BinOp::Add => target.checked_sub(t1).into_iter().collect(),
        BinOp::Sub => t1.checked_sub(target).into_iter().collect(),
        BinOp::Mul => {
            if t1 == 0 {
                if target == 0 {
                    vec![0]
                } else {
                    vec![]
                }
            } else if target % t1 == 0 {
                vec![target / t1]
            } else {
                vec![]
            }
        }
    }
}

// ---------------------------------------------------------------------
// Flow equations

/// The all-ν flow system of a program, plus the universe bookkeeping.
pub struct FlowEquations {
    pub program: WhileProgram,
    pub system: EquationSystem<FlatEnvLattice>,
    pub universe_truncated: bool,
}

/// Cap on the derived integer universe.
pub const UNIVERSE_CAP: usize = 10_000;

/// Work budget for the closure iteration; a closure that cannot finish a
/// round within the budget is treated like one that exceeds the value
/// cap.
const UNIVERSE_OP_BUDGET: usize = 2_000_000;

/// Closes the program literals under the program's operators, stopping
/// at the cap. Returns the universe and whether it was truncated.
pub fn value_universe(program: &WhileProgram, cap: usize) -> (Vec<i64>, bool) {
    let mut lits = Vec::new();
    let mut ops = Vec::new();
    fn walk(stmts: &[Stmt], lits: &mut Vec<i64>, ops: &mut Vec<BinOp>) {
        for s in stmts {
            match s {
                Stmt::Assign { expr, .. } => {
                    expr.literals(lits);
                    expr.ops(ops);
                }
                Stmt::While { body, .. } => walk(body, lits, ops),
            }
        }
    }
    walk(&program.stmts, &mut lits, &mut ops);
    lits.sort_unstable();
    lits.dedup();

    let mut universe: std::collections::HashSet<i64> = lits.iter().copied().collect();
    let mut frontier: Vec<i64> = lits;
    let mut budget = UNIVERSE_OP_BUDGET;
    let mut truncated = false;
    'closure: while !frontier.is_empty() {
        // one round: combine the new values with everything seen so far
        let olds: Vec<i64> = universe.iter().copied().collect();
        let mut fresh: Vec<i64> = Vec::new();
        let round_cost = 2 * frontier.len() * olds.len() * ops.len();
        if round_cost > budget {
            truncated = true;
            break;
        }
        budget -= round_cost;
        for &a in &frontier {
            for &b in &olds {
                for op in &ops {
                    for v in [op.eval(a, b), op.eval(b, a)].into_iter().flatten() {
                        if universe.insert(v) {
                            fresh.push(v);
                            if universe.len() > cap {
                                truncated = true;
                                break 'closure;
                            }
                        }
                    }
                }
            }
        }
        frontier = fresh;
    }
    let mut out: Vec<i64> = universe.into_iter().collect();
    out.sort_unstable();
    out.truncate(cap);
    (out, truncated)
}

/// Derives the flow equations: one ν-equation per block entry, built
/// from the control flow with function-update transfers and meets at
/// join points.
pub fn build_equations(program: &WhileProgram) -> FlowEquations {
    let (universe, truncated) = value_universe(program, UNIVERSE_CAP);
    let lat = FlatEnvLattice::new(program.vars.clone(), universe).with_truncated_universe(truncated);

    // control-flow edges (from_block, transfer, to_block)
    #[derive(Clone)]
    enum Transfer {
        Identity,
        Update(String, Expr),
    }
    fn entry(stmt: &Stmt) -> usize {
        match stmt {
            Stmt::Assign { block, .. } | Stmt::While { block, .. } => *block,
        }
    }
    fn exits(stmt: &Stmt) -> Vec<(usize, Transfer)> {
        match stmt {
            Stmt::Assign { block, var, expr } => {
                vec![(*block, Transfer::Update(var.clone(), expr.clone()))]
            }
            Stmt::While { block, .. } => vec![(*block, Transfer::Identity)],
        }
    }
    fn collect(
        stmts: &[Stmt],
        edges: &mut Vec<(usize, Transfer, usize)>,
    ) -> Vec<(usize, Transfer)> {
        let mut incoming: Vec<(usize, Transfer)> = Vec::new();
        for stmt in stmts {
            for (from, t) in incoming.drain(..) {
                edges.push((from, t, entry(stmt)));
            }
            if let Stmt::While { block, body } = stmt {
                edges.push((*block, Transfer::Identity, entry(&body[0])));
                for (from, t) in collect(body, edges) {
                    edges.push((from, t, *block));
                }
            }
            incoming = exits(stmt);
        }
        incoming
    }
    let mut edges = Vec::new();
    let _program_exits = collect(&program.stmts, &mut edges);

    let mut equations = Vec::new();
    for block in 1..=program.num_blocks {
        let mut parts: Vec<Term<FlatEnvLattice>> = Vec::new();
        if block == 1 {
            parts.push(Term::Const(lat.bottom()));
        }
        let mut incoming: Vec<&(usize, Transfer, usize)> =
            edges.iter().filter(|(_, _, to)| *to == block).collect();
        incoming.sort_by_key(|(from, _, _)| *from);
        for (from, transfer, _) in incoming {
            let src = Term::Var(from - 1);
            parts.push(match transfer {
                Transfer::Identity => src,
                Transfer::Update(var, expr) => Term::apply(
                    UpdateOp { var: var.clone(), expr: expr.clone() },
                    vec![src],
                ),
            });
        }
        let rhs = if parts.len() == 1 { parts.pop().unwrap() } else { Term::Meet(parts) };
        equations.push(Equation { name: format!("rho{block}"), sign: Sign::Nu, rhs });
    }
    FlowEquations {
        program: program.clone(),
        system: EquationSystem::new(lat, equations),
        universe_truncated: truncated,
    }
}

/// Renders an equation right-hand side in the flow notation, e.g.
/// `rho2[x->rho2(y)+1] /\ rho4[y->rho4(x)+rho4(y)]`.
pub fn render_flow_term(eqs: &FlowEquations, term: &Term<FlatEnvLattice>) -> String {
    fn go(eqs: &FlowEquations, t: &Term<FlatEnvLattice>) -> String {
        match t {
            Term::Const(c) => eqs.system.lattice.fmt_elem(c),
            Term::Var(i) => format!("rho{}", i + 1),
            Term::Meet(ts) => {
                ts.iter().map(|t| go(eqs, t)).collect::<Vec<_>>().join(" /\\ ")
            }
            Term::Join(ts) => {
                ts.iter().map(|t| go(eqs, t)).collect::<Vec<_>>().join(" \\/ ")
            }
            Term::Apply(op, ts) => format!("{}{}", go(eqs, &ts[0]), op.0.name()),
        }
    }
    go(eqs, term)
}

/// Solves the all-ν system by simultaneous greatest-fixpoint iteration
/// from ⊤; agrees with the nested solver because the system has a single
/// sign.
pub fn solve_cp(eqs: &FlowEquations) -> Vec<FlatEnv> {
    let sys = &eqs.system;
    let lat = &sys.lattice;
    let mut cur = vec![lat.top(); sys.arity()];
    loop {
        let next: Vec<FlatEnv> = sys
            .equations
            .iter()
            .map(|eq| crate::eqsys::eval_term(lat, &eq.rhs, &cur))
            .collect();
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// `⊥[var↦value] ⊑ ρ_block`?
pub fn query_constant(eqs: &FlowEquations, var: &str, value: i64, block: usize) -> Result<bool> {
    let lat = &eqs.system.lattice;
    let k = lat
        .var_index(var)
        .ok_or_else(|| Error::Config(format!("unknown variable {var:?}")))?;
    if block == 0 || block > eqs.system.arity() {
        return Err(Error::Config(format!("block {block} out of range")));
    }
    let sol = solve_cp(eqs);
    Ok(lat.leq(&lat.point(k, value), &sol[block - 1]))
}

/// Plays the fixpoint game from `(⊥[var↦value], block)` with the
/// machine existential player following the Kleene solution, exploring
/// every (reduced) universal answer.
pub fn game_transcript(
    eqs: &FlowEquations,
    var: &str,
    value: i64,
    block: usize,
) -> Result<PlayTree<FlatEnv>> {
    let sys = &eqs.system;
    let lat = &sys.lattice;
    let k = lat
        .var_index(var)
        .ok_or_else(|| Error::Config(format!("unknown variable {var:?}")))?;
    if block == 0 || block > sys.arity() {
        return Err(Error::Config(format!("block {block} out of range")));
    }
    let sol = solve_cp(eqs);
    let moves = SymbolicMoves::new();
    let mut strategy = |b: &FlatEnv, i: usize| -> Option<Vec<FlatEnv>> {
        let candidates = selection_moves(sys, &moves, b, i, 1 << 12).ok()?;
        candidates
            .into_iter()
            .find(|l| l.iter().zip(sol.iter()).all(|(a, s)| lat.leq(a, s)))
    };
    verify_existential_strategy(sys, &mut strategy, (lat.point(k, value), block - 1), 100_000, true)
}

/// Renders a play tree as an indented transcript.
pub fn render_transcript(eqs: &FlowEquations, tree: &PlayTree<FlatEnv>) -> String {
    let lat = &eqs.system.lattice;
    let mut out = String::new();
    fn go(
        lat: &FlatEnvLattice,
        tree: &PlayTree<FlatEnv>,
        indent: usize,
        out: &mut String,
    ) {
        let pad = "  ".repeat(indent);
        match tree {
            PlayTree::Stuck { b, index } => {
                out.push_str(&format!(
                    "{pad}({},{}) exists is stuck: forall wins\n",
                    lat.fmt_elem(b),
                    index + 1
                ));
            }
            PlayTree::Repeat { top_index, sign } => {
                let winner = if *sign == Sign::Nu { "exists" } else { "forall" };
                out.push_str(&format!(
                    "{pad}position repeats: cycle with highest index {} ({}), {winner} wins\n",
                    top_index + 1,
                    sign
                ));
            }
            PlayTree::Capped => {
                out.push_str(&format!("{pad}exploration cap reached: undecided\n"));
            }
            PlayTree::Exists { b, index, tuple, after } => {
                let parts: Vec<String> = tuple.iter().map(|e| lat.fmt_elem(e)).collect();
                out.push_str(&format!(
                    "{pad}({},{}) exists plays ({})\n",
                    lat.fmt_elem(b),
                    index + 1,
                    parts.join(",")
                ));
                match after {
                    crate::game::AfterMove::TupleRepeat { top_index, sign } => {
                        let winner = if *sign == Sign::Nu { "exists" } else { "forall" };
                        out.push_str(&format!(
                            "{pad}  tuple repeats: cycle with highest index {} ({}), {winner} \
                             wins\n",
                            top_index + 1,
                            sign
                        ));
                    }
                    crate::game::AfterMove::Answers(answers) => {
                        if answers.is_empty() {
                            out.push_str(&format!("{pad}  forall is stuck: exists wins\n"));
                        }
                        for ((b2, j), sub) in answers {
                            out.push_str(&format!(
                                "{pad}  forall challenges ({},{})\n",
                                lat.fmt_elem(b2),
                                j + 1
                            ));
                            go(lat, sub, indent + 2, out);
                        }
                    }
                }
            }
        }
    }
    go(lat, tree, 0, &mut out);
    out
}

/// Progress-measure solving is available on this lattice only when the
/// declared universe is complete; the default pipeline is Kleene plus
/// the game.
pub fn solve_measure_cp(eqs: &FlowEquations) -> Result<pm::MeasureRun<FlatEnvLattice>> {
    if eqs.universe_truncated {
        return Err(Error::Resource(
            "value universe was truncated at the cap; the full basis cannot be enumerated — \
             use the Kleene pipeline instead"
                .into(),
        ));
    }
    pm::solve_measure(&eqs.system, pm::Backend::Formula, pm::Mode::Global, pm::Order::Fifo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqsys::solve_kleene;

    pub(crate) const FIG_PROGRAM: &str = "\
y := 6;
x := y + 1;
while * do
  y := x + y
od
";

    #[test]
    fn parse_fig_program() {
        let p = parse_while(FIG_PROGRAM).unwrap();
        assert_eq!(p.num_blocks, 4);
        assert_eq!(p.vars, vec!["y", "x"]);
        match &p.stmts[2] {
            Stmt::While { block, body } => {
                assert_eq!(*block, 3);
                assert!(matches!(&body[0], Stmt::Assign { block: 4, .. }));
            }
            other => panic!("unexpected stmt {other:?}"),
        }
    }

    #[test]
    fn single_assignment_has_one_block() {
        let p = parse_while("x := 1").unwrap();
        assert_eq!(p.num_blocks, 1);
        let eqs = build_equations(&p);
        assert_eq!(eqs.system.arity(), 1);
        // entry block only: ρ1 = ⊥
        assert!(matches!(&eqs.system.equations[0].rhs, Term::Const(c) if *c == eqs.system.lattice.bottom()));
    }

    #[test]
    fn nested_whiles_number_depth_first() {
        let p = parse_while("x := 1; while * do while * do x := 2 od; x := 3 od").unwrap();
        // blocks: 1 assign, 2 outer-while, 3 inner-while, 4 assign, 5 assign
        assert_eq!(p.num_blocks, 5);
        match &p.stmts[1] {
            Stmt::While { block: 2, body } => {
                assert!(matches!(&body[0], Stmt::While { block: 3, .. }));
                assert!(matches!(&body[1], Stmt::Assign { block: 5, .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fig_equations_have_expected_shape() {
        let p = parse_while(FIG_PROGRAM).unwrap();
        let eqs = build_equations(&p);
        assert_eq!(eqs.system.arity(), 4);
        assert!(eqs.system.equations.iter().all(|e| e.sign == Sign::Nu));
        assert_eq!(render_flow_term(&eqs, &eqs.system.equations[0].rhs), "bot");
        assert_eq!(
            render_flow_term(&eqs, &eqs.system.equations[1].rhs),
            "rho1[y->6]"
        );
        assert_eq!(
            render_flow_term(&eqs, &eqs.system.equations[2].rhs),
            "rho2[x->(y+1)] /\\ rho4[y->(x+y)]"
        );
        assert_eq!(render_flow_term(&eqs, &eqs.system.equations[3].rhs), "rho3");
    }

    #[test]
    fn fig_solution_matches_analysis() {
        let p = parse_while(FIG_PROGRAM).unwrap();
        let eqs = build_equations(&p);
        let lat = &eqs.system.lattice;
        let sol = solve_cp(&eqs);
        let y = lat.var_index("y").unwrap();
        let x = lat.var_index("x").unwrap();
        assert_eq!(sol[0], lat.bottom());
        assert_eq!(sol[1], lat.point(y, 6));
        assert_eq!(sol[2], lat.point(x, 7));
        assert_eq!(sol[3], lat.point(x, 7));
        // agreement with the nested solver
        assert_eq!(sol, solve_kleene(&eqs.system));
    }

    #[test]
    fn straight_line_transfer() {
        let p = parse_while("y := 6; x := y + 1").unwrap();
        let eqs = build_equations(&p);
        assert_eq!(render_flow_term(&eqs, &eqs.system.equations[1].rhs), "rho1[y->6]");
    }

    #[test]
    fn queries() {
        let p = parse_while(FIG_PROGRAM).unwrap();
        let eqs = build_equations(&p);
        assert!(query_constant(&eqs, "x", 7, 4).unwrap());
        assert!(!query_constant(&eqs, "y", 6, 4).unwrap());
        assert!(query_constant(&eqs, "y", 6, 2).unwrap());
        assert!(!query_constant(&eqs, "x", 8, 4).unwrap());
    }

    #[test]
    fn fig_transcript_follows_the_paper() {
        let p = parse_while(FIG_PROGRAM).unwrap();
        let eqs = build_equations(&p);
        let lat = &eqs.system.lattice;
        let x = lat.var_index("x").unwrap();
        let y = lat.var_index("y").unwrap();
        let tree = game_transcript(&eqs, "x", 7, 4).unwrap();
        assert!(tree.exists_wins_all());
        // root: (⊥[x↦7],4) plays (⊥,⊥,⊥[x↦7],⊥)
        let PlayTree::Exists { tuple, after, .. } = &tree else { panic!() };
        assert_eq!(
            *tuple,
            vec![lat.bottom(), lat.bottom(), lat.point(x, 7), lat.bottom()]
        );
        let crate::game::AfterMove::Answers(answers) = after else { panic!() };
        assert_eq!(answers.len(), 1);
        assert_eq!(answers[0].0, (lat.point(x, 7), 2));
        // next: (⊥[x↦7],3) plays (⊥,⊥[y↦6],⊥,⊥[x↦7])
        let PlayTree::Exists { tuple, after, .. } = &answers[0].1 else { panic!() };
        assert_eq!(
            *tuple,
            vec![lat.bottom(), lat.point(y, 6), lat.bottom(), lat.point(x, 7)]
        );
        let crate::game::AfterMove::Answers(answers) = after else { panic!() };
        // both ∀-branches of the transcript
        assert_eq!(answers.len(), 2);
        assert_eq!(answers[0].0, (lat.point(y, 6), 1));
        assert_eq!(answers[1].0, (lat.point(x, 7), 3));
        // branch 1: (⊥[y↦6],2) plays ⊥-tuple, ∀ stuck
        let PlayTree::Exists { tuple, after, .. } = &answers[0].1 else { panic!() };
        assert!(tuple.iter().all(|e| *e == lat.bottom()));
        let crate::game::AfterMove::Answers(sub) = after else { panic!() };
        assert!(sub.is_empty());
        // branch 2: revisiting (⊥[x↦7],4) closes a ν-cycle
        match &answers[1].1 {
            PlayTree::Repeat { top_index, sign } => {
                assert_eq!(*top_index, 3);
                assert_eq!(*sign, Sign::Nu);
            }
            other => panic!("expected a cycle, got {other:?}"),
        }
    }

    #[test]
    fn losing_query_loses_the_game() {
        let p = parse_while(FIG_PROGRAM).unwrap();
        let eqs = build_equations(&p);
        let tree = game_transcript(&eqs, "y", 6, 4).unwrap();
        assert!(!tree.exists_wins_all());
    }

    #[test]
    fn universe_closure_truncates_at_cap() {
        let p = parse_while(FIG_PROGRAM).unwrap();
        let (universe, truncated) = value_universe(&p, 50);
        assert!(truncated);
        assert!(universe.len() <= 50);
        assert!(universe.contains(&6));
        assert!(universe.contains(&1));
        assert!(universe.contains(&7));
    }

    #[test]
    fn abstract_eval_monotone_spot_check() {
        let p = parse_while(FIG_PROGRAM).unwrap();
        let eqs = build_equations(&p);
        let lat = &eqs.system.lattice;
        let y = lat.var_index("y").unwrap();
        let lo = lat.bottom();
        let hi = lat.point(y, 6);
        let expr = Expr::Bin(BinOp::Add, Box::new(Expr::Var("y".into())), Box::new(Expr::Int(1)));
        let vlo = abstract_eval(lat, &expr, &lo);
        let vhi = abstract_eval(lat, &expr, &hi);
        assert!(vlo.is_none() || vlo == vhi);
        assert_eq!(vhi, Some(7));
    }

    #[test]
    fn measure_mode_requires_complete_universe() {
        let p = parse_while(FIG_PROGRAM).unwrap();
        let eqs = build_equations(&p);
        assert!(eqs.universe_truncated);
        assert!(matches!(solve_measure_cp(&eqs), Err(Error::Resource(_))));
        // a loop-free program with a tiny universe can run the measure
        let p2 = parse_while("x := 1").unwrap();
        let eqs2 = build_equations(&p2);
        assert!(!eqs2.universe_truncated);
        let run = solve_measure_cp(&eqs2).unwrap();
        let sol = pm::measure_to_solution(&eqs2.system, &run.measure);
        assert_eq!(sol, solve_cp(&eqs2));
    }
}
