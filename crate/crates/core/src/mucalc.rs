//! μ-calculus frontend: formula and Kripke-structure parsing, translation
//! to equation systems and back, the direct Knaster-Tarski semantics used
//! as a test oracle, symbolic ∃-moves for the modal operators, and the
//! model-checking entry point.
//!
//! Equation order follows the quantification order read from right to
//! left, so the outermost fixpoint becomes the last (highest-index)
//! equation. Swapping equations changes solutions when fixpoints
//! alternate, so this ordering is part of the contract.

use crate::error::{Error, Result};
use crate::eqsys::{Equation, EquationSystem, MonotoneOp, Sign, Term};
use crate::lattice::{Bits, Lattice, PowersetLattice};
use crate::pm::{self, MoveFormula, SymbolicMoves};
use std::collections::HashMap;
use std::fmt;

// ---------------------------------------------------------------------
// Formulae

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum MuFormula {
    True,
    False,
    Prop(String),
    Var(String),
    And(Box<MuFormula>, Box<MuFormula>),
    Or(Box<MuFormula>, Box<MuFormula>),
    Diamond(Box<MuFormula>),
    Box(Box<MuFormula>),
    Fix(Sign, String, Box<MuFormula>),
}

impl fmt::Display for MuFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MuFormula::True => write!(f, "tt"),
            MuFormula::False => write!(f, "ff"),
            MuFormula::Prop(p) | MuFormula::Var(p) => write!(f, "{p}"),
            MuFormula::And(a, b) => write!(f, "({a} /\\ {b})"),
            MuFormula::Or(a, b) => write!(f, "({a} \\/ {b})"),
            MuFormula::Diamond(a) => write!(f, "<>{a}"),
            MuFormula::Box(a) => write!(f, "[]{a}"),
            MuFormula::Fix(s, x, a) => write!(f, "{s} {x}. {a}"),
        }
    }
}

impl MuFormula {
    pub fn free_vars(&self) -> Vec<String> {
        fn go(f: &MuFormula, bound: &mut Vec<String>, out: &mut Vec<String>) {
            match f {
                MuFormula::Var(x) => {
                    if !bound.contains(x) && !out.contains(x) {
                        out.push(x.clone());
                    }
                }
                MuFormula::And(a, b) | MuFormula::Or(a, b) => {
                    go(a, bound, out);
                    go(b, bound, out);
                }
                MuFormula::Diamond(a) | MuFormula::Box(a) => go(a, bound, out),
                MuFormula::Fix(_, x, a) => {
                    bound.push(x.clone());
                    go(a, bound, out);
                    bound.pop();
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Capture-free substitution of a closed-enough formula for a
    /// variable; bound variables are pairwise distinct after parsing,
    /// so no renaming is necessary here.
    pub fn subst(&self, x: &str, by: &MuFormula) -> MuFormula {
        match self {
            MuFormula::Var(y) if y == x => by.clone(),
            MuFormula::And(a, b) => {
                MuFormula::And(Box::new(a.subst(x, by)), Box::new(b.subst(x, by)))
            }
            MuFormula::Or(a, b) => {
                MuFormula::Or(Box::new(a.subst(x, by)), Box::new(b.subst(x, by)))
            }
            MuFormula::Diamond(a) => MuFormula::Diamond(Box::new(a.subst(x, by))),
            MuFormula::Box(a) => MuFormula::Box(Box::new(a.subst(x, by))),
            MuFormula::Fix(s, y, a) if y != x => {
                MuFormula::Fix(*s, y.clone(), Box::new(a.subst(x, by)))
            }
            other => other.clone(),
        }
    }
}

// ---------------------------------------------------------------------
// Lexer (shared with the latticed frontend)

#[derive(Clone, PartialEq, Eq, Debug)]
pub(crate) enum Tok {
    Ident(String),
    Tt,
    Ff,
    Mu,
    Nu,
    Dot,
    LPar,
    RPar,
    AndOp,
    OrOp,
    BoxOp,
    DiamondOp,
    Implies,
    Downset,
}

pub(crate) struct Lexer {
    pub toks: Vec<(Tok, usize, usize)>,
    pub pos: usize,
    end: (usize, usize),
}

impl Lexer {
    pub fn new(text: &str) -> Result<Lexer> {
        let mut toks = Vec::new();
        let mut line = 1usize;
        let mut col = 1usize;
        let mut chars = text.chars().peekable();
        while let Some(&c) = chars.peek() {
            let (l0, c0) = (line, col);
            let bump = |chars: &mut std::iter::Peekable<std::str::Chars>,
                            line: &mut usize,
                            col: &mut usize| {
                let c = chars.next().unwrap();
                if c == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
                c
            };
            if c.is_whitespace() {
                bump(&mut chars, &mut line, &mut col);
                continue;
            }
            if c == '#' {
                while let Some(&c2) = chars.peek() {
                    if c2 == '\n' {
                        break;
                    }
                    bump(&mut chars, &mut line, &mut col);
                }
                continue;
            }
            if c.is_alphanumeric() || c == '_' || c == '\'' {
                let mut word = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_alphanumeric() || c2 == '_' || c2 == '\'' {
                        word.push(bump(&mut chars, &mut line, &mut col));
                    } else {
                        break;
                    }
                }
                let tok = match word.as_str() {
                    "tt" => Tok::Tt,
                    "ff" => Tok::Ff,
                    "mu" => Tok::Mu,
                    "nu" => Tok::Nu,
                    "downset" => Tok::Downset,
                    _ => Tok::Ident(word),
                };
                toks.push((tok, l0, c0));
                continue;
            }
            match c {
                '.' => {
                    bump(&mut chars, &mut line, &mut col);
                    toks.push((Tok::Dot, l0, c0));
                }
                '(' => {
                    bump(&mut chars, &mut line, &mut col);
                    toks.push((Tok::LPar, l0, c0));
                }
                ')' => {
                    bump(&mut chars, &mut line, &mut col);
                    toks.push((Tok::RPar, l0, c0));
                }
                '/' => {
                    bump(&mut chars, &mut line, &mut col);
                    if chars.peek() == Some(&'\\') {
                        bump(&mut chars, &mut line, &mut col);
                        toks.push((Tok::AndOp, l0, c0));
                    } else {
                        return Err(Error::parse(l0, c0, "expected /\\"));
                    }
                }
                '\\' => {
                    bump(&mut chars, &mut line, &mut col);
                    if chars.peek() == Some(&'/') {
                        bump(&mut chars, &mut line, &mut col);
                        toks.push((Tok::OrOp, l0, c0));
                    } else {
                        return Err(Error::parse(l0, c0, "expected \\/"));
                    }
                }
                '[' => {
                    bump(&mut chars, &mut line, &mut col);
                    if chars.peek() == Some(&']') {
                        bump(&mut chars, &mut line, &mut col);
                        toks.push((Tok::BoxOp, l0, c0));
                    } else {
                        return Err(Error::parse(l0, c0, "expected []"));
                    }
                }
                '<' => {
                    bump(&mut chars, &mut line, &mut col);
                    if chars.peek() == Some(&'>') {
                        bump(&mut chars, &mut line, &mut col);
                        toks.push((Tok::DiamondOp, l0, c0));
                    } else {
                        return Err(Error::parse(l0, c0, "expected <>"));
                    }
                }
                '=' => {
                    bump(&mut chars, &mut line, &mut col);
                    if chars.peek() == Some(&'>') {
                        bump(&mut chars, &mut line, &mut col);
                        toks.push((Tok::Implies, l0, c0));
                    } else {
                        return Err(Error::parse(l0, c0, "expected =>"));
                    }
                }
                other => {
                    return Err(Error::parse(l0, c0, format!("unexpected character {other:?}")));
                }
            }
        }
        Ok(Lexer { toks, pos: 0, end: (line, col) })
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    pub fn next_tok(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|&(_, l, c)| (l, c)).unwrap_or(self.end)
    }

    pub fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        let (l, c) = self.here();
        match self.next_tok() {
            Some(t) if t == tok => Ok(()),
            _ => Err(Error::parse(l, c, format!("expected {what}"))),
        }
    }
}

/// Parses a μ-calculus formula. Prefix modalities bind tightest, then
/// `/\`, then `\/`; fixpoint bodies extend maximally to the right.
/// Bound variables are made pairwise distinct by priming clashing names.
pub fn parse_formula(text: &str) -> Result<MuFormula> {
    let mut lx = Lexer::new(text)?;
    let f = parse_disj(&mut lx)?;
    if lx.peek().is_some() {
        let (l, c) = lx.here();
        return Err(Error::parse(l, c, "trailing input after formula"));
    }
    Ok(alpha_rename(&f))
}

fn parse_disj(lx: &mut Lexer) -> Result<MuFormula> {
    let mut acc = parse_conj(lx)?;
    while lx.peek() == Some(&Tok::OrOp) {
        lx.next_tok();
        let rhs = parse_conj(lx)?;
        acc = MuFormula::Or(Box::new(acc), Box::new(rhs));
    }
    Ok(acc)
}

fn parse_conj(lx: &mut Lexer) -> Result<MuFormula> {
    let mut acc = parse_modal(lx)?;
    while lx.peek() == Some(&Tok::AndOp) {
        lx.next_tok();
        let rhs = parse_modal(lx)?;
        acc = MuFormula::And(Box::new(acc), Box::new(rhs));
    }
    Ok(acc)
}

fn parse_modal(lx: &mut Lexer) -> Result<MuFormula> {
    let (l, c) = lx.here();
    match lx.peek() {
        Some(Tok::BoxOp) => {
            lx.next_tok();
            Ok(MuFormula::Box(Box::new(parse_modal(lx)?)))
        }
        Some(Tok::DiamondOp) => {
            lx.next_tok();
            Ok(MuFormula::Diamond(Box::new(parse_modal(lx)?)))
        }
        Some(Tok::Mu) | Some(Tok::Nu) => {
            let sign = if lx.next_tok() == Some(Tok::Mu) { Sign::Mu } else { Sign::Nu };
            let (l2, c2) = lx.here();
            let var = match lx.next_tok() {
                Some(Tok::Ident(x)) => x,
                _ => return Err(Error::parse(l2, c2, "expected a variable after mu/nu")),
            };
            lx.expect(Tok::Dot, "'.' after fixpoint variable")?;
            let body = parse_disj(lx)?;
            Ok(MuFormula::Fix(sign, var, Box::new(body)))
        }
        Some(Tok::Tt) => {
            lx.next_tok();
            Ok(MuFormula::True)
        }
        Some(Tok::Ff) => {
            lx.next_tok();
            Ok(MuFormula::False)
        }
        Some(Tok::Ident(_)) => {
            if let Some(Tok::Ident(x)) = lx.next_tok() {
                // bound occurrences become variables in a later pass
                Ok(MuFormula::Var(x))
            } else {
                unreachable!()
            }
        }
        Some(Tok::LPar) => {
            lx.next_tok();
            let f = parse_disj(lx)?;
            lx.expect(Tok::RPar, "')'")?;
            Ok(f)
        }
        _ => Err(Error::parse(l, c, "expected a formula")),
    }
}

/// Makes bound variables pairwise distinct (priming clashing names with
/// deterministic fresh names) and classifies idents: occurrences bound by
/// an enclosing fixpoint are variables, free idents are propositions.
fn alpha_rename(f: &MuFormula) -> MuFormula {
    fn go(f: &MuFormula, env: &HashMap<String, String>, used: &mut Vec<String>) -> MuFormula {
        match f {
            MuFormula::Var(x) => match env.get(x) {
                Some(fresh) => MuFormula::Var(fresh.clone()),
                None => MuFormula::Prop(x.clone()),
            },
            MuFormula::Prop(p) => MuFormula::Prop(p.clone()),
            MuFormula::True => MuFormula::True,
            MuFormula::False => MuFormula::False,
            MuFormula::And(a, b) => {
                MuFormula::And(Box::new(go(a, env, used)), Box::new(go(b, env, used)))
            }
            MuFormula::Or(a, b) => {
                MuFormula::Or(Box::new(go(a, env, used)), Box::new(go(b, env, used)))
            }
            MuFormula::Diamond(a) => MuFormula::Diamond(Box::new(go(a, env, used))),
            MuFormula::Box(a) => MuFormula::Box(Box::new(go(a, env, used))),
            MuFormula::Fix(s, x, a) => {
                let mut fresh = x.clone();
                while used.contains(&fresh) {
                    fresh.push('\'');
                }
                used.push(fresh.clone());
                let mut env2 = env.clone();
                env2.insert(x.clone(), fresh.clone());
                MuFormula::Fix(*s, fresh, Box::new(go(a, &env2, used)))
            }
        }
    }
    go(f, &HashMap::new(), &mut Vec::new())
}

// ---------------------------------------------------------------------
// Kripke structures

#[derive(Clone, Debug)]
pub struct KripkeStructure {
    pub states: Vec<String>,
    /// `succs[s]` is the bitmask of successors of state `s`.
    pub succs: Vec<Bits>,
    pub labels: HashMap<String, Bits>,
}

impl KripkeStructure {
    pub fn lattice(&self) -> PowersetLattice {
        PowersetLattice::new(self.states.clone())
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }
}

/// Parses the line-oriented Kripke format:
///
/// ```text
/// states: a b
/// edges: a->a a->b b->b
/// label p: b
/// ```
///
/// `#` begins a comment line; tokens are whitespace-separated.
pub fn parse_kts(text: &str) -> Result<KripkeStructure> {
    let mut states: Vec<String> = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut labels: Vec<(String, Vec<String>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (head, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(lineno + 1, 1, "expected 'key: ...'"))?;
        let head = head.trim();
        let items: Vec<&str> = rest.split_whitespace().collect();
        if head == "states" {
            for s in items {
                states.push(s.to_string());
            }
        } else if head == "edges" {
            for e in items {
                let (from, to) = e.split_once("->").ok_or_else(|| {
                    Error::parse(lineno + 1, 1, format!("edge {e:?} must look like a->b"))
                })?;
                edges.push((from.to_string(), to.to_string()));
            }
        } else if let Some(prop) = head.strip_prefix("label") {
            let prop = prop.trim();
            if prop.is_empty() {
                return Err(Error::parse(lineno + 1, 1, "label line needs a proposition name"));
            }
            labels.push((prop.to_string(), items.iter().map(|s| s.to_string()).collect()));
        } else {
            return Err(Error::parse(lineno + 1, 1, format!("unknown section {head:?}")));
        }
    }
    if states.len() > 64 {
        return Err(Error::SizeGuard("at most 64 states are supported".into()));
    }
    let index = |name: &str, lineno: usize| -> Result<usize> {
        states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::parse(lineno, 1, format!("undeclared state {name:?}")))
    };
    let mut succs = vec![Bits::EMPTY; states.len()];
    for (from, to) in &edges {
        succs[index(from, 0)?].insert(index(to, 0)?);
    }
    let mut label_map = HashMap::new();
    for (prop, members) in labels {
        let mut set = Bits::EMPTY;
        for s in &members {
            set.insert(index(s, 0)?);
        }
        label_map.insert(prop, set);
    }
    Ok(KripkeStructure { states, succs, labels: label_map })
}

// ---------------------------------------------------------------------
// Modal operators

/// `◇X = { s | ∃ s→s'. s' ∈ X }`.
#[derive(Clone, Debug)]
pub struct DiamondOp {
    succs: Vec<Bits>,
}

impl DiamondOp {
    pub fn new(succs: Vec<Bits>) -> Self {
        DiamondOp { succs }
    }
}

impl MonotoneOp<PowersetLattice> for DiamondOp {
    fn name(&self) -> String {
        "diamond".into()
    }

    fn arity(&self) -> usize {
        1
    }

    fn apply(&self, lat: &PowersetLattice, args: &[Bits]) -> Bits {
        let x = args[0];
        let mut out = Bits::EMPTY;
        for s in 0..lat.num_states() {
            if !self.succs[s].intersection(&x).is_empty() {
                out.insert(s);
            }
        }
        out
    }

    fn symbolic_move(&self, _lat: &PowersetLattice, b: &Bits) -> Option<MoveFormula<Bits>> {
        let s = b.iter().next()?;
        Some(MoveFormula::Or(
            self.succs[s]
                .iter()
                .map(|s2| MoveFormula::Atom(Bits::singleton(s2), 0))
                .collect(),
        ))
    }
}

/// `□X = { s | ∀ s→s'. s' ∈ X }`.
#[derive(Clone, Debug)]
pub struct BoxOp {
    succs: Vec<Bits>,
}

impl BoxOp {
    pub fn new(succs: Vec<Bits>) -> Self {
        BoxOp { succs }
    }
}

impl MonotoneOp<PowersetLattice> for BoxOp {
    fn name(&self) -> String {
        "box".into()
    }

    fn arity(&self) -> usize {
        1
    }

    fn apply(&self, lat: &PowersetLattice, args: &[Bits]) -> Bits {
        let x = args[0];
        let mut out = Bits::EMPTY;
        for s in 0..lat.num_states() {
            if self.succs[s].subset_of(&x) {
                out.insert(s);
            }
        }
        out
    }

    fn symbolic_move(&self, _lat: &PowersetLattice, b: &Bits) -> Option<MoveFormula<Bits>> {
        let s = b.iter().next()?;
        Some(MoveFormula::And(
            self.succs[s]
                .iter()
                .map(|s2| MoveFormula::Atom(Bits::singleton(s2), 0))
                .collect(),
        ))
    }
}

// ---------------------------------------------------------------------
// Translation formula → system

/// Builds the equation system of a closed fixpoint formula over the
/// powerset lattice of `kripke`'s states. Non-fixpoint formulae are
/// wrapped as `mu fresh. φ` first. Variables are ordered by the textual
/// position of their quantifier, read from right to left, so the
/// outermost fixpoint is the last equation.
pub fn to_equation_system(
    formula: &MuFormula,
    kripke: &KripkeStructure,
) -> Result<EquationSystem<PowersetLattice>> {
    let free = formula.free_vars();
    if !free.is_empty() {
        return Err(Error::Contract(format!(
            "formula has free variables: {}",
            free.join(", ")
        )));
    }
    let wrapped;
    let formula = if matches!(formula, MuFormula::Fix(..)) {
        formula
    } else {
        let mut fresh = "x".to_string();
        let mut used = Vec::new();
        collect_fix_names(formula, &mut used);
        while used.contains(&fresh) {
            fresh.push('\'');
        }
        wrapped = MuFormula::Fix(Sign::Mu, fresh, Box::new(formula.clone()));
        &wrapped
    };

    // fixpoint subformulas in textual (pre-order) position
    let mut fixes: Vec<(Sign, String, MuFormula)> = Vec::new();
    collect_fixes(formula, &mut fixes);
    fixes.reverse(); // right-to-left: innermost-rightmost gets index 0
    let index: HashMap<String, usize> =
        fixes.iter().enumerate().map(|(i, (_, x, _))| (x.clone(), i)).collect();

    let lat = kripke.lattice();
    let equations = fixes
        .iter()
        .map(|(sign, name, body)| {
            Ok(Equation {
                name: name.clone(),
                sign: *sign,
                rhs: body_to_term(body, kripke, &lat, &index)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquationSystem::new(lat, equations))
}

fn collect_fix_names(f: &MuFormula, out: &mut Vec<String>) {
    match f {
        MuFormula::Fix(_, x, a) => {
            out.push(x.clone());
            collect_fix_names(a, out);
        }
        MuFormula::And(a, b) | MuFormula::Or(a, b) => {
            collect_fix_names(a, out);
            collect_fix_names(b, out);
        }
        MuFormula::Diamond(a) | MuFormula::Box(a) => collect_fix_names(a, out),
        _ => {}
    }
}

fn collect_fixes(f: &MuFormula, out: &mut Vec<(Sign, String, MuFormula)>) {
    match f {
        MuFormula::Fix(s, x, a) => {
            out.push((*s, x.clone(), (**a).clone()));
            collect_fixes(a, out);
        }
        MuFormula::And(a, b) | MuFormula::Or(a, b) => {
            collect_fixes(a, out);
            collect_fixes(b, out);
        }
        MuFormula::Diamond(a) | MuFormula::Box(a) => collect_fixes(a, out),
        _ => {}
    }
}

fn body_to_term(
    f: &MuFormula,
    kripke: &KripkeStructure,
    lat: &PowersetLattice,
    index: &HashMap<String, usize>,
) -> Result<Term<PowersetLattice>> {
    Ok(match f {
        MuFormula::True => Term::Const(lat.top()),
        MuFormula::False => Term::Const(lat.bottom()),
        // unlabelled propositions denote the empty set
        MuFormula::Prop(p) => {
            Term::Const(kripke.labels.get(p).copied().unwrap_or(Bits::EMPTY))
        }
        MuFormula::Var(x) => Term::Var(*index.get(x).ok_or_else(|| {
            Error::Contract(format!("unbound variable {x} in formula body"))
        })?),
        MuFormula::And(a, b) => Term::Meet(vec![
            body_to_term(a, kripke, lat, index)?,
            body_to_term(b, kripke, lat, index)?,
        ]),
        MuFormula::Or(a, b) => Term::Join(vec![
            body_to_term(a, kripke, lat, index)?,
            body_to_term(b, kripke, lat, index)?,
        ]),
        MuFormula::Diamond(a) => Term::apply(
            DiamondOp::new(kripke.succs.clone()),
            vec![body_to_term(a, kripke, lat, index)?],
        ),
        MuFormula::Box(a) => Term::apply(
            BoxOp::new(kripke.succs.clone()),
            vec![body_to_term(a, kripke, lat, index)?],
        ),
        // fixpoint subformulas are replaced by their variable
        MuFormula::Fix(_, x, _) => Term::Var(*index.get(x).ok_or_else(|| {
            Error::Contract(format!("unknown fixpoint variable {x}"))
        })?),
    })
}

/// Parses a fixpoint-free equation body (the textual equation-system
/// format) into a term: identifiers naming system variables become
/// variables, everything else is a proposition.
pub fn parse_equation_body(
    text: &str,
    kripke: &KripkeStructure,
    names: &[String],
) -> Result<Term<PowersetLattice>> {
    let parsed = parse_formula(text)?;
    fn reclassify(f: &MuFormula, names: &[String]) -> Result<MuFormula> {
        Ok(match f {
            MuFormula::Prop(p) if names.contains(p) => MuFormula::Var(p.clone()),
            MuFormula::Fix(..) => {
                return Err(Error::Config(
                    "equation bodies must be fixpoint-free".into(),
                ))
            }
            MuFormula::And(a, b) => MuFormula::And(
                Box::new(reclassify(a, names)?),
                Box::new(reclassify(b, names)?),
            ),
            MuFormula::Or(a, b) => MuFormula::Or(
                Box::new(reclassify(a, names)?),
                Box::new(reclassify(b, names)?),
            ),
            MuFormula::Diamond(a) => MuFormula::Diamond(Box::new(reclassify(a, names)?)),
            MuFormula::Box(a) => MuFormula::Box(Box::new(reclassify(a, names)?)),
            other => other.clone(),
        })
    }
    let body = reclassify(&parsed, names)?;
    let lat = kripke.lattice();
    let index: HashMap<String, usize> =
        names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    body_to_term(&body, kripke, &lat, &index)
}

// ---------------------------------------------------------------------
// Translation system → formulae

/// The inverse translation: the terms of each equation are converted back
/// to fixpoint-free formula bodies, then the inductive substitution
/// construction yields one closed formula per equation.
pub fn from_equation_system(
    sys: &EquationSystem<PowersetLattice>,
    kripke: &KripkeStructure,
) -> Result<Vec<MuFormula>> {
    let bodies: Vec<MuFormula> = sys
        .equations
        .iter()
        .map(|eq| term_to_formula(&eq.rhs, sys, kripke))
        .collect::<Result<_>>()?;
    let names: Vec<String> = sys.equations.iter().map(|e| e.name.clone()).collect();
    let mut phis: Vec<MuFormula> = Vec::new();
    for i in 0..sys.arity() {
        let mut body = bodies[i].clone();
        for (j, phi) in phis.iter().enumerate().take(i) {
            body = body.subst(&names[j], phi);
        }
        let phi_i = MuFormula::Fix(sys.equations[i].sign, names[i].clone(), Box::new(body));
        for prev in phis.iter_mut() {
            *prev = prev.subst(&names[i], &phi_i);
        }
        phis.push(phi_i);
    }
    Ok(phis)
}

fn term_to_formula(
    t: &Term<PowersetLattice>,
    sys: &EquationSystem<PowersetLattice>,
    kripke: &KripkeStructure,
) -> Result<MuFormula> {
    Ok(match t {
        Term::Var(i) => MuFormula::Var(sys.equations[*i].name.clone()),
        Term::Const(c) => {
            if *c == sys.lattice.top() {
                MuFormula::True
            } else if *c == sys.lattice.bottom() {
                MuFormula::False
            } else {
                let mut named: Vec<&String> = kripke
                    .labels
                    .iter()
                    .filter(|(_, set)| *set == c)
                    .map(|(p, _)| p)
                    .collect();
                named.sort();
                match named.first() {
                    Some(p) => MuFormula::Prop((*p).clone()),
                    None => {
                        return Err(Error::Config(format!(
                            "constant {} has no proposition name",
                            sys.lattice.fmt_elem(c)
                        )))
                    }
                }
            }
        }
        Term::Join(ts) => match ts.len() {
            0 => MuFormula::False,
            1 => term_to_formula(&ts[0], sys, kripke)?,
            _ => {
                let mut acc = term_to_formula(&ts[0], sys, kripke)?;
                for t2 in &ts[1..] {
                    acc = MuFormula::Or(Box::new(acc), Box::new(term_to_formula(t2, sys, kripke)?));
                }
                acc
            }
        },
        Term::Meet(ts) => match ts.len() {
            0 => MuFormula::True,
            1 => term_to_formula(&ts[0], sys, kripke)?,
            _ => {
                let mut acc = term_to_formula(&ts[0], sys, kripke)?;
                for t2 in &ts[1..] {
                    acc =
                        MuFormula::And(Box::new(acc), Box::new(term_to_formula(t2, sys, kripke)?));
                }
                acc
            }
        },
        Term::Apply(op, ts) => {
            let arg = term_to_formula(&ts[0], sys, kripke)?;
            match op.0.name().as_str() {
                "diamond" => MuFormula::Diamond(Box::new(arg)),
                "box" => MuFormula::Box(Box::new(arg)),
                other => {
                    return Err(Error::Config(format!(
                        "operator {other} is not a μ-calculus symbol"
                    )))
                }
            }
        }
    })
}

// ---------------------------------------------------------------------
// Direct semantics and model checking

/// Standard Knaster-Tarski semantics by naive iteration; the test oracle
/// for the equational routes.
pub fn direct_semantics(
    formula: &MuFormula,
    kripke: &KripkeStructure,
    env: &HashMap<String, Bits>,
) -> Result<Bits> {
    let lat = kripke.lattice();
    Ok(match formula {
        MuFormula::True => lat.top(),
        MuFormula::False => lat.bottom(),
        MuFormula::Prop(p) => kripke.labels.get(p).copied().unwrap_or(Bits::EMPTY),
        MuFormula::Var(x) => *env
            .get(x)
            .ok_or_else(|| Error::Contract(format!("unbound variable {x}")))?,
        MuFormula::And(a, b) => direct_semantics(a, kripke, env)?
            .intersection(&direct_semantics(b, kripke, env)?),
        MuFormula::Or(a, b) => {
            direct_semantics(a, kripke, env)?.union(&direct_semantics(b, kripke, env)?)
        }
        MuFormula::Diamond(a) => {
            let x = direct_semantics(a, kripke, env)?;
            DiamondOp::new(kripke.succs.clone()).apply(&lat, &[x])
        }
        MuFormula::Box(a) => {
            let x = direct_semantics(a, kripke, env)?;
            BoxOp::new(kripke.succs.clone()).apply(&lat, &[x])
        }
        MuFormula::Fix(sign, x, a) => {
            let mut cur = match sign {
                Sign::Mu => lat.bottom(),
                Sign::Nu => lat.top(),
            };
            loop {
                let mut env2 = env.clone();
                env2.insert(x.clone(), cur);
                let next = direct_semantics(a, kripke, &env2)?;
                if next == cur {
                    break cur;
                }
                cur = next;
            }
        }
    })
}

/// Symbolic ∃-moves for a system built by [`to_equation_system`]:
/// unions become disjunctions, intersections conjunctions, modal
/// operators expand over the transition relation, all composed
/// structurally.
pub fn symbolic_moves_mu(_sys: &EquationSystem<PowersetLattice>) -> SymbolicMoves<PowersetLattice> {
    SymbolicMoves::new()
}

/// The result of a model-checking run: the verdict plus the witnessing
/// progress measure (local mode from `({s}, m)`).
pub struct ModelCheck {
    pub holds: bool,
    pub system: EquationSystem<PowersetLattice>,
    pub measure: pm::ProgressMeasure<PowersetLattice>,
}

/// Checks whether `state` satisfies the closed formula: builds the
/// system, solves the measure locally from `({state}, m)` and reads the
/// verdict off the measure.
pub fn model_check(
    kripke: &KripkeStructure,
    formula: &MuFormula,
    state: &str,
) -> Result<ModelCheck> {
    let s = kripke
        .state_index(state)
        .ok_or_else(|| Error::Config(format!("unknown state {state:?}")))?;
    let sys = to_equation_system(formula, kripke)?;
    let m = sys.arity();
    let b = Bits::singleton(s);
    let run = pm::solve_measure(
        &sys,
        pm::Backend::Formula,
        pm::Mode::Local(vec![(b, m - 1)]),
        pm::Order::Fifo,
    )?;
    let holds = run.measure.get(&b, m - 1).is_some_and(|v| !v.is_star());
    Ok(ModelCheck { holds, system: sys, measure: run.measure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqsys::solve_kleene;

    pub(crate) const FIG1_KTS: &str = "\
# two states, p holds at b
states: a b
edges: a->a a->b b->b
label p: b
";

    fn running_formula() -> MuFormula {
        parse_formula("nu x2. ((mu x1. (p \\/ <>x1)) /\\ []x2)").unwrap()
    }

    #[test]
    fn parse_running_formula() {
        let f = running_formula();
        match &f {
            MuFormula::Fix(Sign::Nu, x2, body) => {
                assert_eq!(x2, "x2");
                match &**body {
                    MuFormula::And(l, r) => {
                        assert!(matches!(&**l, MuFormula::Fix(Sign::Mu, _, _)));
                        assert!(matches!(&**r, MuFormula::Box(_)));
                    }
                    other => panic!("unexpected body {other:?}"),
                }
            }
            other => panic!("unexpected formula {other:?}"),
        }
        assert_eq!(parse_formula("tt").unwrap(), MuFormula::True);
    }

    #[test]
    fn alpha_renaming_makes_bound_vars_distinct() {
        let f = parse_formula("mu x. (p \\/ <>nu x. x)").unwrap();
        let mut names = Vec::new();
        collect_fix_names(&f, &mut names);
        assert_eq!(names.len(), 2);
        assert_ne!(names[0], names[1]);
    }

    #[test]
    fn parse_kts_fig1() {
        let k = parse_kts(FIG1_KTS).unwrap();
        assert_eq!(k.states, vec!["a", "b"]);
        assert_eq!(k.succs, vec![Bits(0b11), Bits(0b10)]);
        assert_eq!(k.labels["p"], Bits(0b10));
    }

    #[test]
    fn translation_produces_fig1_system() {
        let k = parse_kts(FIG1_KTS).unwrap();
        let sys = to_equation_system(&running_formula(), &k).unwrap();
        assert_eq!(sys.arity(), 2);
        assert_eq!(sys.equations[0].sign, Sign::Mu);
        assert_eq!(sys.equations[1].sign, Sign::Nu);
        assert_eq!(sys.equations[0].name, "x1");
        assert_eq!(sys.equations[1].name, "x2");
        assert_eq!(solve_kleene(&sys), vec![Bits(0b11), Bits(0b11)]);
    }

    #[test]
    fn swapped_equations_change_the_solution() {
        // φ' = nu x2. ([]x2 /\ mu x1. ((p /\ <>x2) \/ <>x1))
        let k = parse_kts(FIG1_KTS).unwrap();
        let phi2 = parse_formula("nu x2. ([]x2 /\\ mu x1. ((p /\\ <>x2) \\/ <>x1))").unwrap();
        let sys = to_equation_system(&phi2, &k).unwrap();
        assert_eq!(solve_kleene(&sys), vec![Bits(0b11), Bits(0b11)]);
        // swapping the equations flips the solution to (∅, ∅)
        let mut swapped = sys.clone();
        swapped.equations.swap(0, 1);
        let remap = |t: &Term<PowersetLattice>| -> Term<PowersetLattice> {
            fn go(t: &Term<PowersetLattice>) -> Term<PowersetLattice> {
                match t {
                    Term::Var(0) => Term::Var(1),
                    Term::Var(_) => Term::Var(0),
                    Term::Const(c) => Term::Const(*c),
                    Term::Join(ts) => Term::Join(ts.iter().map(go).collect()),
                    Term::Meet(ts) => Term::Meet(ts.iter().map(go).collect()),
                    Term::Apply(op, ts) => {
                        Term::Apply(op.clone(), ts.iter().map(go).collect())
                    }
                }
            }
            go(t)
        };
        for eq in &mut swapped.equations {
            eq.rhs = remap(&eq.rhs);
        }
        assert_eq!(solve_kleene(&swapped), vec![Bits(0), Bits(0)]);
    }

    #[test]
    fn wrapping_non_fixpoint_formulae() {
        let k = parse_kts(FIG1_KTS).unwrap();
        let sys = to_equation_system(&parse_formula("mu x. tt").unwrap(), &k).unwrap();
        assert_eq!(sys.arity(), 1);
        let sys = to_equation_system(&parse_formula("<>tt").unwrap(), &k).unwrap();
        assert_eq!(sys.arity(), 1);
        assert_eq!(solve_kleene(&sys), vec![Bits(0b11)]);
    }

    #[test]
    fn direct_semantics_examples() {
        let k = parse_kts(FIG1_KTS).unwrap();
        let env = HashMap::new();
        assert_eq!(direct_semantics(&running_formula(), &k, &env).unwrap(), Bits(0b11));
        assert_eq!(
            direct_semantics(&parse_formula("<>tt").unwrap(), &k, &env).unwrap(),
            Bits(0b11)
        );
        assert_eq!(direct_semantics(&MuFormula::False, &k, &env).unwrap(), Bits(0));
    }

    #[test]
    fn roundtrip_preserves_semantics() {
        let k = parse_kts(FIG1_KTS).unwrap();
        let sys = to_equation_system(&running_formula(), &k).unwrap();
        let phis = from_equation_system(&sys, &k).unwrap();
        assert_eq!(phis.len(), 2);
        for phi in &phis {
            assert!(phi.free_vars().is_empty());
        }
        let env = HashMap::new();
        assert_eq!(direct_semantics(&phis[1], &k, &env).unwrap(), Bits(0b11));
        // single-equation system translates verbatim
        let single = to_equation_system(&parse_formula("mu z. (p \\/ <>z)").unwrap(), &k).unwrap();
        let phis = from_equation_system(&single, &k).unwrap();
        assert_eq!(phis.len(), 1);
        assert!(matches!(&phis[0], MuFormula::Fix(Sign::Mu, _, _)));
        // empty system
        let empty = EquationSystem::new(k.lattice(), vec![]);
        assert!(from_equation_system(&empty, &k).unwrap().is_empty());
    }

    #[test]
    fn model_check_examples() {
        let k = parse_kts(FIG1_KTS).unwrap();
        assert!(model_check(&k, &running_formula(), "a").unwrap().holds);
        let phi2 = parse_formula("nu x2. ([]x2 /\\ mu x1. ((p /\\ <>x2) \\/ <>x1))").unwrap();
        assert!(model_check(&k, &phi2, "a").unwrap().holds);
        let refuted = parse_formula("mu x. (p /\\ <>x)").unwrap();
        assert!(!model_check(&k, &refuted, "a").unwrap().holds);
        assert!(model_check(&k, &running_formula(), "zz").is_err());
    }

    #[test]
    fn moves_match_enumerated_move_sets() {
        use crate::game::e_moves;
        use crate::pm::{formula_semantics, term_moves};
        let k = parse_kts(FIG1_KTS).unwrap();
        let sys = to_equation_system(&running_formula(), &k).unwrap();
        for i in 0..sys.arity() {
            for b in sys.lattice.basis() {
                let formula = term_moves(&sys.lattice, &sys.equations[i].rhs, &b).unwrap();
                let mut sem = formula_semantics(&sys.lattice, 2, &formula, 1 << 12).unwrap();
                sem.sort();
                let mut moves = e_moves(&sys, &b, i, 1 << 12).unwrap();
                moves.sort();
                assert_eq!(sem, moves);
            }
        }
    }

    #[test]
    fn box_at_deadlock_state_gives_true_formula() {
        let k = parse_kts("states: a\nedges:\n").unwrap();
        let op = BoxOp::new(k.succs.clone());
        let f = op.symbolic_move(&k.lattice(), &Bits(0b1)).unwrap();
        assert!(f.is_true());
    }
}
