//! Fixpoint equation systems over the real interval [0,1] with
//! piecewise-linear right-hand sides: the modified fixpoint game with its
//! stopping condition, the well-founded decrease predicate, SMT-LIB
//! script emission and optional external-solver orchestration.
//!
//! All arithmetic in this module is exact rational; floating point never
//! enters emitted scripts. The modified game unrolls to a finite tree (a
//! node is a leaf as soon as its index repeats with no larger index in
//! between), so a single first-order formula per start index captures
//! the winning condition of the existential player.

use crate::error::{Error, Result};
use crate::eqsys::Sign;
use num::rational::BigRational;
use num::{BigInt, One, Signed, Zero};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

pub type Rat = BigRational;

fn rat(n: i64, d: i64) -> Rat {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `p/q`, `n`, or a decimal like `0.75` into an exact rational.
pub fn parse_rat(text: &str) -> Result<Rat> {
    let t = text.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad_rat(t))?;
        let q: i64 = q.trim().parse().map_err(|_| bad_rat(t))?;
        if q == 0 {
            return Err(bad_rat(t));
        }
        return Ok(rat(p, q));
    }
    if let Some((int, frac)) = t.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int: i64 = int.trim().parse().map_err(|_| bad_rat(t))?;
        let digits = frac.trim();
        let scale = 10i64.checked_pow(digits.len() as u32).ok_or_else(|| bad_rat(t))?;
        let frac: i64 = digits.parse().map_err(|_| bad_rat(t))?;
        let magnitude = rat(int.abs(), 1) + rat(frac, scale);
        return Ok(if neg { -magnitude } else { magnitude });
    }
    let n: i64 = t.parse().map_err(|_| bad_rat(t))?;
    Ok(rat(n, 1))
}

fn bad_rat(t: &str) -> Error {
    Error::Config(format!("not a rational literal: {t:?}"))
}

// ---------------------------------------------------------------------
// Piecewise-linear functions

/// A monotone piecewise-linear map on [0,1] with left-closed pieces:
/// piece `i` is `x ↦ p_i·x + q_i` on `[t_i, t_{i+1})`, the last piece on
/// `[t_{r-1}, 1]`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PiecewiseLinear {
    /// `0 = t_0 < t_1 < … < t_r = 1`.
    pub breakpoints: Vec<Rat>,
    /// One `(p, q)` per piece; `pieces.len() + 1 == breakpoints.len()`.
    pub pieces: Vec<(Rat, Rat)>,
}

impl PiecewiseLinear {
    pub fn new(breakpoints: Vec<Rat>, pieces: Vec<(Rat, Rat)>) -> Result<Self> {
        if breakpoints.len() != pieces.len() + 1 || pieces.is_empty() {
            return Err(Error::Contract("piece and breakpoint counts do not line up".into()));
        }
        if breakpoints[0] != Rat::zero() || *breakpoints.last().unwrap() != Rat::one() {
            return Err(Error::Contract("breakpoints must start at 0 and end at 1".into()));
        }
        for w in breakpoints.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Contract("breakpoints must be strictly increasing".into()));
            }
        }
        let pl = PiecewiseLinear { breakpoints, pieces };
        // monotone: non-negative slopes and non-decreasing across breaks
        for (i, (p, q)) in pl.pieces.iter().enumerate() {
            if p < &Rat::zero() {
                return Err(Error::Contract("negative slope breaks monotonicity".into()));
            }
            let lo = &pl.breakpoints[i];
            let hi = &pl.breakpoints[i + 1];
            let at_lo = p * lo + q;
            let at_hi = p * hi + q;
            if at_lo < Rat::zero() || at_hi > Rat::one() {
                return Err(Error::Contract("piece leaves the interval [0,1]".into()));
            }
            if i + 1 < pl.pieces.len() {
                let (p2, q2) = &pl.pieces[i + 1];
                if at_hi > p2 * hi + q2 {
                    return Err(Error::Contract(
                        "value drops across a breakpoint; function is not monotone".into(),
                    ));
                }
            }
        }
        Ok(pl)
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        let mut piece = self.pieces.len() - 1;
        for i in 0..self.pieces.len() {
            if x < &self.breakpoints[i + 1] {
                piece = i;
                break;
            }
        }
        let (p, q) = &self.pieces[piece];
        p * x + q
    }

    /// The least fixpoint, found as the least prefixpoint: within each
    /// piece `p·x + q ≤ x` is a half-line, and the smallest admissible
    /// point over all pieces is the least fixpoint by Knaster-Tarski.
    pub fn least_fixpoint(&self) -> Rat {
        let mut best: Option<Rat> = None;
        for (i, (p, q)) in self.pieces.iter().enumerate() {
            let lo = self.breakpoints[i].clone();
            let hi = self.breakpoints[i + 1].clone();
            let last = i + 1 == self.pieces.len();
            // q ≤ (1 − p)·x
            let one_minus_p = Rat::one() - p;
            let candidate = if one_minus_p.is_zero() {
                if q <= &Rat::zero() {
                    Some(lo.clone())
                } else {
                    None
                }
            } else if one_minus_p.is_positive() {
                let bound = q / &one_minus_p;
                let x = if bound <= lo { lo.clone() } else { bound };
                let inside = x >= lo && (x < hi || (last && x <= hi));
                inside.then_some(x)
            } else {
                // slope above 1: prefixpoints form a lower segment
                let bound = q / &one_minus_p;
                (lo <= bound).then_some(lo.clone())
            };
            if let Some(x) = candidate {
                if best.as_ref().is_none_or(|b| x < *b) {
                    best = Some(x);
                }
            }
        }
        // a monotone self-map of [0,1] always has 1 as a prefixpoint
        best.unwrap_or_else(Rat::one)
    }
}

// ---------------------------------------------------------------------
// Terms and systems

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum RealTerm {
    Var(usize),
    Const(Rat),
    Pw(PiecewiseLinear, Box<RealTerm>),
    Min(Vec<RealTerm>),
    Max(Vec<RealTerm>),
}

impl RealTerm {
    pub fn eval(&self, env: &[Rat]) -> Rat {
        match self {
            RealTerm::Var(i) => env[*i].clone(),
            RealTerm::Const(c) => c.clone(),
            RealTerm::Pw(pl, arg) => pl.eval(&arg.eval(env)),
            RealTerm::Min(ts) => {
                ts.iter().map(|t| t.eval(env)).min().expect("min of nothing")
            }
            RealTerm::Max(ts) => {
                ts.iter().map(|t| t.eval(env)).max().expect("max of nothing")
            }
        }
    }

    fn mentioned_vars(&self, out: &mut Vec<usize>) {
        match self {
            RealTerm::Var(i) => {
                if !out.contains(i) {
                    out.push(*i);
                }
            }
            RealTerm::Const(_) => {}
            RealTerm::Pw(_, arg) => arg.mentioned_vars(out),
            RealTerm::Min(ts) | RealTerm::Max(ts) => {
                for t in ts {
                    t.mentioned_vars(out);
                }
            }
        }
    }

    fn collect_pieces<'a>(&'a self, out: &mut Vec<&'a PiecewiseLinear>) {
        match self {
            RealTerm::Pw(pl, arg) => {
                out.push(pl);
                arg.collect_pieces(out);
            }
            RealTerm::Min(ts) | RealTerm::Max(ts) => {
                for t in ts {
                    t.collect_pieces(out);
                }
            }
            _ => {}
        }
    }
}

#[derive(Clone, Debug)]
pub struct RealEquation {
    pub name: String,
    pub sign: Sign,
    pub rhs: RealTerm,
}

/// Equations over [0,1] with monotone piecewise-linear/min/max bodies.
#[derive(Clone, Debug)]
pub struct RealEquationSystem {
    pub equations: Vec<RealEquation>,
}

impl RealEquationSystem {
    pub fn arity(&self) -> usize {
        self.equations.len()
    }
}

// ---------------------------------------------------------------------
// Parsing

/// Parses the line-oriented format
///
/// ```text
/// x1 =mu pw([0,1/2): 1/4 + 1/2*x1 ; [1/2,1]: 3/8 + 1/2*x1)
/// x2 =nu min(x1, 3/4)
/// ```
pub fn parse_real_system(text: &str) -> Result<RealEquationSystem> {
    let mut headers: Vec<(String, Sign, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (lhs, sign, rhs) = if let Some((l, r)) = line.split_once("=mu") {
            (l, Sign::Mu, r)
        } else if let Some((l, r)) = line.split_once("=nu") {
            (l, Sign::Nu, r)
        } else {
            return Err(Error::parse(lineno + 1, 1, "expected '<var> =mu|=nu <term>'"));
        };
        headers.push((lhs.trim().to_string(), sign, rhs.trim().to_string()));
    }
    let names: Vec<String> = headers.iter().map(|(n, _, _)| n.clone()).collect();
    let equations = headers
        .iter()
        .map(|(name, sign, body)| {
            let rhs = TermParser { text: body.as_bytes(), pos: 0, names: &names }.parse_top()?;
            Ok(RealEquation { name: name.clone(), sign: *sign, rhs })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RealEquationSystem { equations })
}

struct TermParser<'a> {
    text: &'a [u8],
    pos: usize,
    names: &'a [String],
}

impl TermParser<'_> {
    fn parse_top(&mut self) -> Result<RealTerm> {
        let t = self.parse_term()?;
        self.skip_ws();
        if self.pos != self.text.len() {
            return Err(self.fail("trailing input after term"));
        }
        Ok(t)
    }

    fn fail(&self, msg: &str) -> Error {
        Error::parse(1, self.pos + 1, msg)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && (self.text[self.pos] as char).is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text.get(self.pos).map(|&b| b as char)
    }

    fn eat(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.fail(&format!("expected {c:?}")))
        }
    }

    fn word(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.text.len() {
            let c = self.text[self.pos] as char;
            if c.is_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        String::from_utf8_lossy(&self.text[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<Rat> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some('-') {
            self.pos += 1;
        }
        while self.pos < self.text.len() {
            let c = self.text[self.pos] as char;
            if c.is_ascii_digit() || c == '/' || c == '.' {
                self.pos += 1;
            } else {
                break;
            }
        }
        parse_rat(&String::from_utf8_lossy(&self.text[start..self.pos]))
    }

    fn parse_term(&mut self) -> Result<RealTerm> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == '-' => Ok(RealTerm::Const(self.number()?)),
            Some(c) if c.is_alphabetic() => {
                let save = self.pos;
                let w = self.word();
                match w.as_str() {
                    "pw" => self.parse_pw(),
                    "min" => Ok(RealTerm::Min(self.parse_args()?)),
                    "max" => Ok(RealTerm::Max(self.parse_args()?)),
                    _ => {
                        let idx = self.names.iter().position(|n| *n == w).ok_or_else(|| {
                            Error::parse(1, save + 1, format!("unknown variable {w:?}"))
                        })?;
                        Ok(RealTerm::Var(idx))
                    }
                }
            }
            _ => Err(self.fail("expected a term")),
        }
    }

    fn parse_args(&mut self) -> Result<Vec<RealTerm>> {
        self.eat('(')?;
        let mut args = vec![self.parse_term()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            args.push(self.parse_term()?);
        }
        self.eat(')')?;
        Ok(args)
    }

    /// `pw([0,1/2): 1/4 + 1/2*x1 ; [1/2,1]: 3/8 + 1/2*x1)`
    fn parse_pw(&mut self) -> Result<RealTerm> {
        self.eat('(')?;
        let mut breakpoints: Vec<Rat> = Vec::new();
        let mut pieces: Vec<(Rat, Rat)> = Vec::new();
        let mut var: Option<usize> = None;
        loop {
            self.eat('[')?;
            let lo = self.number()?;
            self.eat(',')?;
            let hi = self.number()?;
            let closed = match self.peek() {
                Some(')') => {
                    self.pos += 1;
                    false
                }
                Some(']') => {
                    self.pos += 1;
                    true
                }
                _ => return Err(self.fail("expected ')' or ']' closing the piece interval")),
            };
            self.eat(':')?;
            let (p, q, piece_var) = self.parse_affine()?;
            if let Some(pv) = piece_var {
                match var {
                    None => var = Some(pv),
                    Some(v) if v == pv => {}
                    Some(_) => {
                        return Err(self.fail("pieces must all mention the same variable"))
                    }
                }
            }
            if breakpoints.is_empty() {
                breakpoints.push(lo);
            } else if *breakpoints.last().unwrap() != lo {
                return Err(self.fail("pieces must be contiguous"));
            }
            breakpoints.push(hi);
            pieces.push((p, q));
            match self.peek() {
                Some(';') => {
                    self.pos += 1;
                    if closed {
                        return Err(self.fail("only the last piece may be right-closed"));
                    }
                }
                Some(')') => {
                    self.pos += 1;
                    if !closed {
                        return Err(self.fail("the last piece must be right-closed"));
                    }
                    break;
                }
                _ => return Err(self.fail("expected ';' or ')' after a piece")),
            }
        }
        let var = var.ok_or_else(|| self.fail("piecewise function must mention a variable"))?;
        let pl = PiecewiseLinear::new(breakpoints, pieces)?;
        Ok(RealTerm::Pw(pl, Box::new(RealTerm::Var(var))))
    }

    /// Affine body `q + p*x` in any order of summands.
    fn parse_affine(&mut self) -> Result<(Rat, Rat, Option<usize>)> {
        let mut p = Rat::zero();
        let mut q = Rat::zero();
        let mut var: Option<usize> = None;
        loop {
            let (coef, v) = self.parse_summand()?;
            match v {
                None => q += coef,
                Some(idx) => {
                    if var.is_some() && var != Some(idx) {
                        return Err(self.fail("a piece may mention one variable only"));
                    }
                    var = Some(idx);
                    p += coef;
                }
            }
            if self.peek() == Some('+') {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok((p, q, var))
    }

    fn parse_summand(&mut self) -> Result<(Rat, Option<usize>)> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == '-' => {
                let coef = self.number()?;
                if self.peek() == Some('*') {
                    self.pos += 1;
                    let save = self.pos;
                    let w = self.word();
                    let idx = self.names.iter().position(|n| *n == w).ok_or_else(|| {
                        Error::parse(1, save + 1, format!("unknown variable {w:?}"))
                    })?;
                    Ok((coef, Some(idx)))
                } else {
                    Ok((coef, None))
                }
            }
            Some(c) if c.is_alphabetic() => {
                let save = self.pos;
                let w = self.word();
                let idx = self.names.iter().position(|n| *n == w).ok_or_else(|| {
                    Error::parse(1, save + 1, format!("unknown variable {w:?}"))
                })?;
                Ok((Rat::one(), Some(idx)))
            }
            _ => Err(self.fail("expected a summand")),
        }
    }
}

// ---------------------------------------------------------------------
// The decrease predicate

/// Constants of the well-founded decrease predicate: thresholds
/// `a_0 = 0 < a_1 < … < a_ℓ` and a ratio `c ∈ (0,1]`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DecreaseParams {
    pub thresholds: Vec<Rat>,
    pub ratio: Rat,
}

/// Exact evaluation of the three-clause decrease definition.
pub fn decrease_holds(params: &DecreaseParams, v: &Rat, b: &Rat, l: &Rat) -> bool {
    let a = &params.thresholds;
    let c = &params.ratio;
    if a.iter().any(|ai| ai == l) {
        return true;
    }
    let last = a.last().expect("thresholds contain 0");
    if last <= b && b - l >= c * (v - b) {
        return true;
    }
    for w in a.windows(2) {
        if &w[0] <= b && b < &w[1] && b - l >= c * (&w[1] - b) {
            return true;
        }
    }
    false
}

/// Derives decrease parameters from the system: thresholds are all
/// breakpoints of all piecewise maps (excluding 1), the ratio is
/// `min_i (1 − p_i)/p_i` over pieces with slope in (0,1), clamped to 1.
/// A slope ≥ 1 on a piece of a μ-equation yields a completeness warning;
/// correctness is unaffected.
pub fn derive_decrease_params(sys: &RealEquationSystem) -> (DecreaseParams, Vec<String>) {
    let mut thresholds = vec![Rat::zero()];
    let mut ratio = Rat::one();
    let mut warnings = Vec::new();
    for eq in &sys.equations {
        let mut pls = Vec::new();
        eq.rhs.collect_pieces(&mut pls);
        for pl in pls {
            for t in &pl.breakpoints {
                if *t < Rat::one() && !thresholds.contains(t) {
                    thresholds.push(t.clone());
                }
            }
            for (p, _) in &pl.pieces {
                if p >= &Rat::one() {
                    if eq.sign == Sign::Mu {
                        warnings.push(format!(
                            "equation {} has a piece with slope >= 1; the decrease \
                             predicate may be incomplete there",
                            eq.name
                        ));
                    }
                } else if p.is_positive() {
                    let candidate = (Rat::one() - p) / p;
                    if candidate < ratio {
                        ratio = candidate;
                    }
                }
            }
        }
    }
    thresholds.sort();
    (DecreaseParams { thresholds, ratio }, warnings)
}

// ---------------------------------------------------------------------
// Game trees

/// The finite unrolling of the modified game: a node carries the current
/// equation index, a child with index `k` is a leaf iff `k` occurred on
/// the path above with no larger index in between. Universal index
/// choices are restricted to the variables the current equation
/// mentions; on unmentioned components the existential player commits to
/// 0, which makes the omitted branches vacuous.
#[derive(Clone, Debug)]
pub struct GameTree {
    pub index: usize,
    pub children: Vec<GameTreeChild>,
}

#[derive(Clone, Debug)]
pub enum GameTreeChild {
    Leaf(usize),
    Node(GameTree),
}

impl GameTree {
    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|c| match c {
                GameTreeChild::Leaf(_) => 1,
                GameTreeChild::Node(n) => n.node_count(),
            })
            .sum::<usize>()
    }

    pub fn leaf_count(&self) -> usize {
        self.children
            .iter()
            .map(|c| match c {
                GameTreeChild::Leaf(_) => 1,
                GameTreeChild::Node(n) => n.leaf_count(),
            })
            .sum()
    }
}

/// Is a move to `k` a stop, given the indices on the path from the root?
fn is_repeat(path: &[usize], k: usize) -> bool {
    for &j in path.iter().rev() {
        if j == k {
            return true;
        }
        if j > k {
            return false;
        }
    }
    false
}

pub const GAME_TREE_NODE_CAP: usize = 100_000;

pub fn build_game_tree(sys: &RealEquationSystem, start: usize) -> Result<GameTree> {
    if start >= sys.arity() {
        return Err(Error::Config(format!("start index {start} out of range")));
    }
    let mentioned: Vec<Vec<usize>> = sys
        .equations
        .iter()
        .map(|eq| {
            let mut vs = Vec::new();
            eq.rhs.mentioned_vars(&mut vs);
            vs.sort_unstable();
            vs
        })
        .collect();
    let mut budget = GAME_TREE_NODE_CAP;
    let mut path = vec![start];
    build_node(start, &mentioned, &mut path, &mut budget)
}

fn build_node(
    index: usize,
    mentioned: &[Vec<usize>],
    path: &mut Vec<usize>,
    budget: &mut usize,
) -> Result<GameTree> {
    if *budget == 0 {
        return Err(Error::Resource(format!(
            "game tree exceeds the cap of {GAME_TREE_NODE_CAP} nodes"
        )));
    }
    *budget -= 1;
    let mut children = Vec::new();
    for &k in &mentioned[index] {
        if is_repeat(path, k) {
            children.push(GameTreeChild::Leaf(k));
        } else {
            path.push(k);
            children.push(GameTreeChild::Node(build_node(k, mentioned, path, budget)?));
            path.pop();
        }
    }
    Ok(GameTree { index, children })
}

// ---------------------------------------------------------------------
// SMT-LIB emission

/// Renders an exact rational as SMT-LIB real syntax.
fn rat_smt(r: &Rat) -> String {
    let (neg, r) = if r.is_negative() { (true, -r) } else { (false, r.clone()) };
    let body = if r.denom().is_one() {
        format!("{}.0", r.numer())
    } else {
        format!("(/ {} {})", r.numer(), r.denom())
    };
    if neg {
        format!("(- {body})")
    } else {
        body
    }
}

fn term_smt(t: &RealTerm, args: &[String], fresh: &mut usize, out: &mut String) {
    match t {
        RealTerm::Var(i) => out.push_str(&args[*i]),
        RealTerm::Const(c) => out.push_str(&rat_smt(c)),
        RealTerm::Min(ts) => fold_minmax(ts, "<=", args, fresh, out),
        RealTerm::Max(ts) => fold_minmax(ts, ">=", args, fresh, out),
        RealTerm::Pw(pl, arg) => {
            let name = format!("t{}", *fresh);
            *fresh += 1;
            let mut inner = String::new();
            term_smt(arg, args, fresh, &mut inner);
            let _ = write!(out, "(let (({name} {inner})) ");
            let mut closing = 1;
            for (i, (p, q)) in pl.pieces.iter().enumerate() {
                let body = affine_smt(p, q, &name);
                if i + 1 == pl.pieces.len() {
                    out.push_str(&body);
                } else {
                    let _ = write!(out, "(ite (< {name} {}) {body} ", rat_smt(&pl.breakpoints[i + 1]));
                    closing += 1;
                }
            }
            out.push_str(&")".repeat(closing));
        }
    }
}

fn affine_smt(p: &Rat, q: &Rat, var: &str) -> String {
    if p.is_zero() {
        rat_smt(q)
    } else if q.is_zero() {
        format!("(* {} {var})", rat_smt(p))
    } else {
        format!("(+ {} (* {} {var}))", rat_smt(q), rat_smt(p))
    }
}

fn fold_minmax(ts: &[RealTerm], cmp: &str, args: &[String], fresh: &mut usize, out: &mut String) {
    if ts.len() == 1 {
        term_smt(&ts[0], args, fresh, out);
        return;
    }
    let mut parts = Vec::new();
    for t in ts {
        let mut s = String::new();
        term_smt(t, args, fresh, &mut s);
        parts.push(s);
    }
    let mut acc = parts.pop().unwrap();
    while let Some(next) = parts.pop() {
        acc = format!("(ite ({cmp} {next} {acc}) {next} {acc})");
    }
    out.push_str(&acc);
}

/// What the emitted script should assert.
#[derive(Clone, Debug)]
pub enum Query {
    /// Is `value` winnable at the given equation index?
    Check { index: usize, value: Rat },
    /// Ask the solver for the greatest winnable value at the index.
    Optimize { index: usize },
}

/// Emits a complete SMT-LIB v2 script for the modified game: function
/// and decrease definitions, a `win-game` predicate unrolling the game
/// tree with ∀-quantified challenges and ∃-quantified move tuples,
/// ν-leaves asserting `l_k ≤ v_k`, μ-leaves asserting
/// `l_k ≤ b_k ∧ decrease(v_k, b_k, l_k)`, and the asserts of the chosen
/// query mode. Output is byte-deterministic.
pub fn emit_smtlib(
    sys: &RealEquationSystem,
    params: &DecreaseParams,
    query: &Query,
) -> Result<String> {
    let m = sys.arity();
    let start = match query {
        Query::Check { index, .. } | Query::Optimize { index } => *index,
    };
    let tree = build_game_tree(sys, start)?;
    let mut out = String::new();
    out.push_str("; fixpoint equation system over [0,1], modified-game encoding\n");
    out.push_str("(set-logic LRA)\n\n");

    // one function definition per equation
    for (i, eq) in sys.equations.iter().enumerate() {
        let args: Vec<String> = (0..m).map(|j| format!("x{}", j + 1)).collect();
        let params_s: Vec<String> = args.iter().map(|a| format!("({a} Real)")).collect();
        let mut body = String::new();
        let mut fresh = 0usize;
        term_smt(&eq.rhs, &args, &mut fresh, &mut body);
        let _ = writeln!(out, "(define-fun f{} ({}) Real {})", i + 1, params_s.join(" "), body);
    }

    // the decrease predicate
    let mut clauses: Vec<String> = params
        .thresholds
        .iter()
        .map(|a| format!("(= l {})", rat_smt(a)))
        .collect();
    let c = rat_smt(&params.ratio);
    let last = rat_smt(params.thresholds.last().expect("thresholds contain 0"));
    clauses.push(format!("(and (<= {last} b) (>= (- b l) (* {c} (- v b))))"));
    for w in params.thresholds.windows(2) {
        clauses.push(format!(
            "(and (<= {} b) (< b {}) (>= (- b l) (* {c} (- {} b))))",
            rat_smt(&w[0]),
            rat_smt(&w[1]),
            rat_smt(&w[1])
        ));
    }
    let _ = writeln!(
        out,
        "(define-fun decrease ((v Real) (b Real) (l Real)) Bool\n  (or {}))\n",
        clauses.join("\n      ")
    );

    // the win-game predicate
    let mut body = String::new();
    let mut vcontext: HashMap<usize, (String, String)> = HashMap::new();
    emit_node(sys, &tree, "0", "v", &mut vcontext, &mut body, 2)?;
    let _ = writeln!(out, "(define-fun win-game ((v Real)) Bool\n{body})\n");

    match query {
        Query::Check { value, .. } => {
            let _ = writeln!(out, "(assert (win-game {}))", rat_smt(value));
            out.push_str("(check-sat)\n");
        }
        Query::Optimize { .. } => {
            out.push_str("(declare-const v Real)\n");
            out.push_str("(assert (win-game v))\n");
            out.push_str(
                "(assert (forall ((w Real))\n  (=> (and (<= 0.0 w) (<= w 1.0) (win-game w)) \
                 (<= w v))))\n",
            );
            out.push_str("(check-sat)\n");
            out.push_str("(get-model)\n");
        }
    }
    Ok(out)
}

/// Emits the subformula for a tree node whose index was just set to
/// `v_expr`: ∀ challenges `b`, ∃ answers with a tuple, then the children
/// are conjoined. `vcontext` maps indices to their current `(v, b)`
/// expressions.
#[allow(clippy::too_many_arguments)]
fn emit_node(
    sys: &RealEquationSystem,
    node: &GameTree,
    path: &str,
    v_expr: &str,
    vcontext: &mut HashMap<usize, (String, String)>,
    out: &mut String,
    indent: usize,
) -> Result<()> {
    let pad = " ".repeat(indent);
    let m = sys.arity();
    let b_name = format!("b{path}");
    let mut mentioned = Vec::new();
    sys.equations[node.index].rhs.mentioned_vars(&mut mentioned);
    mentioned.sort_unstable();

    let saved = vcontext.insert(node.index, (v_expr.to_string(), b_name.clone()));

    let _ = writeln!(out, "{pad}(forall (({b_name} Real))");
    let _ = writeln!(out, "{pad}  (=> (and (< 0.0 {b_name}) (< {b_name} {v_expr}))");

    // the existential tuple: mentioned components are quantified, the
    // rest are committed to 0
    let l_name = |k: usize| format!("l{path}_{}", k + 1);
    let tuple: Vec<String> = (0..m)
        .map(|k| if mentioned.contains(&k) { l_name(k) } else { "0.0".to_string() })
        .collect();
    if mentioned.is_empty() {
        // no move components to choose: only the application constraint
        let _ = writeln!(
            out,
            "{pad}    (>= (f{} {}) {b_name})))",
            node.index + 1,
            tuple.join(" ")
        );
        if let Some(s) = saved {
            vcontext.insert(node.index, s);
        } else {
            vcontext.remove(&node.index);
        }
        return Ok(());
    }
    let binders: Vec<String> = mentioned.iter().map(|&k| format!("({} Real)", l_name(k))).collect();
    let _ = writeln!(out, "{pad}    (exists ({})", binders.join(" "));
    let mut conj: Vec<String> = Vec::new();
    for &k in &mentioned {
        conj.push(format!("(<= 0.0 {})", l_name(k)));
        conj.push(format!("(<= {} 1.0)", l_name(k)));
    }
    conj.push(format!("(>= (f{} {}) {b_name})", node.index + 1, tuple.join(" ")));
    let _ = writeln!(out, "{pad}      (and {}", conj.join(" "));

    for child in &node.children {
        match child {
            GameTreeChild::Leaf(k) => {
                let (vk, bk) = vcontext
                    .get(k)
                    .cloned()
                    .expect("leaf index was set on the path");
                match sys.equations[*k].sign {
                    Sign::Nu => {
                        let _ = writeln!(out, "{pad}        (<= {} {vk})", l_name(*k));
                    }
                    Sign::Mu => {
                        let _ = writeln!(
                            out,
                            "{pad}        (and (<= {} {bk}) (decrease {vk} {bk} {}))",
                            l_name(*k),
                            l_name(*k)
                        );
                    }
                }
            }
            GameTreeChild::Node(sub) => {
                let child_path = format!("{path}_{}", sub.index + 1);
                emit_node(
                    sys,
                    sub,
                    &child_path,
                    &l_name(sub.index),
                    vcontext,
                    out,
                    indent + 8,
                )?;
            }
        }
    }
    let _ = writeln!(out, "{pad}      ))))");

    if let Some(s) = saved {
        vcontext.insert(node.index, s);
    } else {
        vcontext.remove(&node.index);
    }
    Ok(())
}

// ---------------------------------------------------------------------
// External solver

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SolverVerdict {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Clone, Debug)]
pub struct SolverOutcome {
    pub verdict: SolverVerdict,
    /// Model value of `v` in optimize mode, when the solver printed one
    /// we could parse.
    pub value: Option<Rat>,
    pub raw: String,
    pub warning: Option<String>,
}

pub const SOLVER_TIMEOUT: Duration = Duration::from_secs(60);

/// Invokes an external SMT solver on the script. The command is split on
/// whitespace and the script path is appended as the last argument.
pub fn run_external_solver(
    script: &str,
    solver_command: &str,
    timeout: Duration,
) -> Result<SolverOutcome> {
    let mut parts = solver_command.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| Error::Environment("empty solver command".into()))?;
    let args: Vec<&str> = parts.collect();

    let mut file = tempfile::Builder::new()
        .prefix("fixgame")
        .suffix(".smt2")
        .tempfile()?;
    file.write_all(script.as_bytes())?;
    let path = file.path().to_path_buf();

    let mut child = Command::new(program)
        .args(&args)
        .arg(&path)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Environment(format!("cannot run solver {program:?}: {e}")))?;

    let started = Instant::now();
    loop {
        match child.try_wait()? {
            Some(_) => break,
            None => {
                if started.elapsed() > timeout {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Ok(SolverOutcome {
                        verdict: SolverVerdict::Unknown,
                        value: None,
                        raw: String::new(),
                        warning: Some(format!("solver timed out after {timeout:?}")),
                    });
                }
                std::thread::sleep(Duration::from_millis(20));
            }
        }
    }
    let output = child.wait_with_output()?;
    let raw = format!(
        "{}{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let verdict = raw
        .lines()
        .find_map(|line| match line.trim() {
            "sat" => Some(SolverVerdict::Sat),
            "unsat" => Some(SolverVerdict::Unsat),
            "unknown" => Some(SolverVerdict::Unknown),
            _ => None,
        })
        .unwrap_or(SolverVerdict::Unknown);
    let (value, warning) = match parse_model_value(&raw, "v") {
        Some(v) => (Some(v), None),
        None if verdict == SolverVerdict::Sat && raw.contains("define-fun") => (
            None,
            Some("could not parse a rational model value; returning raw output".into()),
        ),
        None => (None, None),
    };
    Ok(SolverOutcome { verdict, value, raw, warning })
}

/// Extracts the value of a model constant from `(define-fun name () Real
/// <value>)`.
fn parse_model_value(raw: &str, name: &str) -> Option<Rat> {
    let needle = format!("define-fun {name} ");
    let at = raw.find(&needle)?;
    let rest = &raw[at..];
    // skip "define-fun name () Real"
    let real_at = rest.find("Real")?;
    let expr = rest[real_at + 4..].trim_start();
    parse_rat_sexpr(expr).map(|(v, _)| v)
}

/// Parses a rational-valued s-expression: numerals, decimals, `(/ a b)`
/// and `(- a)`.
fn parse_rat_sexpr(text: &str) -> Option<(Rat, usize)> {
    let t = text.trim_start();
    let offset = text.len() - t.len();
    if let Some(rest) = t.strip_prefix('(') {
        let rest = rest.trim_start();
        if let Some(args) = rest.strip_prefix('/') {
            let (a, used_a) = parse_rat_sexpr(args)?;
            let (b, used_b) = parse_rat_sexpr(&args[used_a..])?;
            let close = args[used_a + used_b..].find(')')?;
            let total = offset + (t.len() - rest.len()) + 1 + used_a + used_b + close + 1;
            if b.is_zero() {
                return None;
            }
            return Some((a / b, total));
        }
        if let Some(args) = rest.strip_prefix('-') {
            let (a, used) = parse_rat_sexpr(args)?;
            let close = args[used..].find(')')?;
            let total = offset + (t.len() - rest.len()) + 1 + used + close + 1;
            return Some((-a, total));
        }
        return None;
    }
    let end = t
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '/'))
        .unwrap_or(t.len());
    if end == 0 {
        return None;
    }
    let lit = &t[..end];
    parse_rat(lit).ok().map(|v| (v, offset + end))
}

// ---------------------------------------------------------------------
// A desk-scale win checker for single μ-equations

/// Decides (on a finite adversarial grid) whether the existential player
/// wins the modified check-mode game for a single piecewise-linear
/// μ-equation at value `v`. Used as the test oracle when no external
/// solver is available.
pub fn grid_win_check(
    pl: &PiecewiseLinear,
    params: &DecreaseParams,
    v: &Rat,
    grid: u32,
) -> bool {
    if !v.is_positive() {
        // ∀ has no challenge 0 < b < v
        return true;
    }
    // adversarial challenges: a grid over (0, v) plus points next to the
    // thresholds and breakpoints
    let mut challenges: Vec<Rat> = Vec::new();
    for k in 1..grid {
        challenges.push(v * rat(k as i64, grid as i64));
    }
    let eps = v * rat(1, 1000 * grid as i64);
    for t in params.thresholds.iter().chain(pl.breakpoints.iter()) {
        for cand in [t - &eps, t.clone(), t + &eps] {
            if cand.is_positive() && cand < *v {
                challenges.push(cand);
            }
        }
    }
    challenges.sort();
    challenges.dedup();

    'challenge: for b in &challenges {
        // candidate answers: thresholds below b, breakpoints, and the
        // minimal l on each piece with f(l) ≥ b
        let mut candidates: Vec<Rat> = params
            .thresholds
            .iter()
            .filter(|a| *a <= b)
            .cloned()
            .collect();
        for (i, (p, q)) in pl.pieces.iter().enumerate() {
            let lo = &pl.breakpoints[i];
            let hi = &pl.breakpoints[i + 1];
            candidates.push(lo.clone());
            if p.is_positive() {
                let needed = (b - q) / p;
                if needed >= *lo && needed <= *hi {
                    candidates.push(needed);
                }
            }
        }
        for l in &candidates {
            if l >= &Rat::zero()
                && l <= b
                && pl.eval(l) >= *b
                && decrease_holds(params, v, b, l)
            {
                continue 'challenge;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn discontinuous_system() -> RealEquationSystem {
        parse_real_system(
            "x1 =mu pw([0,1/2): 1/4 + 1/2*x1 ; [1/2,1]: 3/8 + 1/2*x1)\n",
        )
        .unwrap()
    }

    #[test]
    fn parse_and_eval_example() {
        let sys = discontinuous_system();
        let RealTerm::Pw(pl, _) = &sys.equations[0].rhs else { panic!() };
        assert_eq!(pl.eval(&rat(0, 1)), rat(1, 4));
        assert_eq!(pl.eval(&rat(1, 4)), rat(3, 8));
        // left-closed second piece
        assert_eq!(pl.eval(&rat(1, 2)), rat(5, 8));
        assert_eq!(pl.eval(&rat(1, 1)), rat(7, 8));
    }

    #[test]
    fn least_fixpoint_of_the_discontinuous_example() {
        let sys = discontinuous_system();
        let RealTerm::Pw(pl, _) = &sys.equations[0].rhs else { panic!() };
        assert_eq!(pl.least_fixpoint(), rat(3, 4));
    }

    #[test]
    fn decrease_examples() {
        // l = a_0 = 0 always decreases
        let p = DecreaseParams { thresholds: vec![rat(0, 1)], ratio: rat(1, 1) };
        assert!(decrease_holds(&p, &rat(1, 2), &rat(1, 4), &rat(0, 1)));
        // l = a_1 clause
        let p = DecreaseParams { thresholds: vec![rat(0, 1), rat(1, 2)], ratio: rat(1, 1) };
        assert!(decrease_holds(&p, &rat(3, 4), &rat(5, 8), &rat(1, 2)));
        // failing arithmetic clause: b − l = 0 < c·(v − b) = 1/2
        let p = DecreaseParams { thresholds: vec![rat(0, 1)], ratio: rat(1, 1) };
        assert!(!decrease_holds(&p, &rat(1, 1), &rat(1, 2), &rat(1, 2)));
    }

    #[test]
    fn derived_params_match_example() {
        let sys = discontinuous_system();
        let (params, warnings) = derive_decrease_params(&sys);
        assert_eq!(params.thresholds, vec![rat(0, 1), rat(1, 2)]);
        assert_eq!(params.ratio, rat(1, 1));
        assert!(warnings.is_empty());
    }

    #[test]
    fn derived_ratio_takes_the_minimum() {
        let sys = parse_real_system(
            "x1 =mu pw([0,1]: 1/4 + 1/2*x1)\nx2 =mu pw([0,1]: 1/4 + 2/3*x2)\n",
        )
        .unwrap();
        let (params, _) = derive_decrease_params(&sys);
        assert_eq!(params.ratio, rat(1, 2));
        // constant functions clamp to 1
        let sys = parse_real_system("x1 =mu 1/4\n").unwrap();
        let (params, _) = derive_decrease_params(&sys);
        assert_eq!(params.ratio, rat(1, 1));
        assert_eq!(params.thresholds, vec![rat(0, 1)]);
    }

    #[test]
    fn slope_one_warns_on_mu() {
        let sys = parse_real_system("x1 =mu pw([0,1]: x1)\n").unwrap();
        let (_, warnings) = derive_decrease_params(&sys);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn game_tree_shapes() {
        // m=1: root with one child leaf
        let sys = discontinuous_system();
        let t = build_game_tree(&sys, 0).unwrap();
        assert_eq!(t.index, 0);
        assert!(matches!(t.children.as_slice(), [GameTreeChild::Leaf(0)]));

        // m=2 with full mentions: the trees drawn for the modified game
        let sys2 = parse_real_system(
            "x1 =mu min(pw([0,1]: 1/4 + 1/2*x1), x2)\nx2 =nu max(x1, pw([0,1]: 1/2*x2))\n",
        )
        .unwrap();
        // start 2 (index 1): 2 → {1 → (1-leaf, 2-leaf), 2-leaf}
        let t2 = build_game_tree(&sys2, 1).unwrap();
        assert_eq!(t2.leaf_count(), 3);
        assert_eq!(t2.node_count(), 5);
        // start 1 (index 0): the extra level appears
        let t1 = build_game_tree(&sys2, 0).unwrap();
        assert_eq!(t1.leaf_count(), 4);
        assert_eq!(t1.node_count(), 7);
    }

    #[test]
    fn chain_systems_have_linear_trees() {
        // f_i mentions x_i and x_{i+1} only
        for m in 2..7usize {
            let mut lines = String::new();
            for i in 1..=m {
                let next = if i < m { i + 1 } else { i };
                lines.push_str(&format!(
                    "x{i} =mu min(pw([0,1]: 1/4 + 1/2*x{i}), x{next})\n"
                ));
            }
            let sys = parse_real_system(&lines).unwrap();
            let t = build_game_tree(&sys, 0).unwrap();
            assert!(
                t.node_count() <= 6 * m,
                "tree for m={m} has {} nodes",
                t.node_count()
            );
        }
    }

    #[test]
    fn emission_is_deterministic() {
        let sys = discontinuous_system();
        let (params, _) = derive_decrease_params(&sys);
        let a = emit_smtlib(&sys, &params, &Query::Optimize { index: 0 }).unwrap();
        let b = emit_smtlib(&sys, &params, &Query::Optimize { index: 0 }).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("(define-fun win-game ((v Real)) Bool"));
        assert!(a.contains("(assert (win-game v))"));
        assert!(a.contains("(get-model)"));
        let c = emit_smtlib(
            &sys,
            &params,
            &Query::Check { index: 0, value: rat(3, 4) },
        )
        .unwrap();
        assert!(c.contains("(assert (win-game (/ 3 4)))"));
        assert!(!c.contains("(get-model)"));
    }

    #[test]
    fn scripts_are_well_formed_sexpressions() {
        let sys2 = parse_real_system(
            "x1 =mu min(pw([0,1]: 1/4 + 1/2*x1), x2)\nx2 =nu max(x1, pw([0,1]: 1/2*x2))\n",
        )
        .unwrap();
        let (params, _) = derive_decrease_params(&sys2);
        for query in [
            Query::Optimize { index: 0 },
            Query::Optimize { index: 1 },
            Query::Check { index: 1, value: rat(1, 3) },
        ] {
            let script = emit_smtlib(&sys2, &params, &query).unwrap();
            let mut depth = 0i64;
            for c in script.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
                assert!(depth >= 0, "unbalanced parentheses");
            }
            assert_eq!(depth, 0, "unbalanced parentheses at the end");
        }
    }

    #[test]
    fn check_at_zero_is_vacuous() {
        let sys = discontinuous_system();
        let (params, _) = derive_decrease_params(&sys);
        let RealTerm::Pw(pl, _) = &sys.equations[0].rhs else { panic!() };
        assert!(grid_win_check(pl, &params, &rat(0, 1), 16));
    }

    #[test]
    fn grid_check_brackets_the_fixpoint() {
        let sys = discontinuous_system();
        let (params, _) = derive_decrease_params(&sys);
        let RealTerm::Pw(pl, _) = &sys.equations[0].rhs else { panic!() };
        assert!(grid_win_check(pl, &params, &rat(3, 4), 64));
        assert!(!grid_win_check(pl, &params, &(rat(3, 4) + rat(1, 100)), 64));
    }

    #[test]
    fn quantifier_depth_follows_tree_depth() {
        let sys2 = parse_real_system(
            "x1 =mu min(pw([0,1]: 1/4 + 1/2*x1), x2)\nx2 =nu max(x1, pw([0,1]: 1/2*x2))\n",
        )
        .unwrap();
        let (params, _) = derive_decrease_params(&sys2);
        let script = emit_smtlib(&sys2, &params, &Query::Check { index: 1, value: rat(1, 2) })
            .unwrap();
        // two levels of ∀ nesting for the three-leaf tree
        assert_eq!(script.matches("(forall ((b0 ").count(), 1);
        assert_eq!(script.matches("(forall ((b0_1 ").count(), 1);
    }

    #[test]
    fn model_value_parsing() {
        let raw = "sat\n(model\n  (define-fun v () Real (/ 3 4))\n)\n";
        assert_eq!(parse_model_value(raw, "v"), Some(rat(3, 4)));
        let raw = "sat\n((v 0.75))\n(define-fun v () Real 0.75)\n";
        assert_eq!(parse_model_value(raw, "v"), Some(rat(3, 4)));
        let raw = "sat\n(define-fun v () Real (- (/ 1 2)))\n";
        assert_eq!(parse_model_value(raw, "v"), Some(rat(-1, 2)));
    }

    #[test]
    fn missing_solver_is_an_environment_error() {
        let out = run_external_solver("(check-sat)\n", "definitely-not-a-solver-xyz", Duration::from_secs(5));
        assert!(matches!(out, Err(Error::Environment(_))));
    }

    #[test]
    fn descent_bound_from_the_well_foundedness_proof() {
        // greedy maximal chains under the arithmetic clause: each step
        // takes the largest legal l, the next challenge sits just below
        let params = DecreaseParams { thresholds: vec![rat(0, 1)], ratio: rat(1, 2) };
        let c = params.ratio.clone();
        for (num, den) in [(9i64, 10i64), (1, 2), (3, 4)] {
            let a = rat(1, 1); // clause target v
            let b0 = rat(num, den);
            let mut b = b0.clone();
            let mut steps = 0u32;
            let mut l = b.clone();
            while b.is_positive() {
                // tightest legal answer: b − l = c·(a − b)
                l = &b - &c * (&a - &b);
                if !l.is_positive() {
                    break;
                }
                // proof inequality: a − l ≥ (a − b0)·(1 + (steps+1)·c)
                let lhs = &a - &l;
                let rhs = (&a - &b0) * (Rat::one() + rat(steps as i64 + 1, 1) * &c);
                assert!(lhs >= rhs, "descent inequality failed at step {steps}");
                // ∀ replies just below l
                b = l.clone();
                steps += 1;
                assert!(steps < 10_000, "chain did not terminate");
            }
            let _ = l;
            // chain length bound from the proof: ceil(1/(c·(a−b0)))
            let bound = (Rat::one() / (&c * (&a - &b0))).ceil();
            assert!(
                rat(steps as i64, 1) <= bound,
                "chain of {steps} steps exceeds bound {bound}"
            );
        }
    }
}
