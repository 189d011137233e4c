//! Latticed μ-calculi over finite distributive truth lattices and
//! multi-valued transition systems, including the
//! conditional-transition-systems-with-upgrades instantiation.
//!
//! Formulae are evaluated in the lattice of valuations `L^S` (pointwise
//! order) where `L` is a downset lattice, distributive by construction.
//! The basis consists of the valuations `b_x` (join-irreducible `b` at
//! state `x`, ⊥ elsewhere), which are the join-irreducibles of `L^S`.

use crate::error::{Error, Result};
use crate::eqsys::{Equation, EquationSystem, MonotoneOp, Sign, Term};
use crate::lattice::{Bits, DownsetLattice, Lattice, Poset, ProductLattice};
use crate::mucalc::{Lexer, Tok};
use crate::pm::{self, MoveFormula};
use std::collections::HashMap;

pub type ValuationLattice = ProductLattice<DownsetLattice>;
pub type Valuation = Vec<Bits>;

/// A multi-valued transition system: states, a downset truth lattice and
/// a transition weight per state pair.
#[derive(Clone, Debug)]
pub struct Mvts {
    pub states: Vec<String>,
    pub lattice: DownsetLattice,
    /// `weights[x][y]` is the truth value of the transition `x → y`.
    pub weights: Vec<Vec<Bits>>,
}

impl Mvts {
    pub fn valuation_lattice(&self) -> ValuationLattice {
        ProductLattice::new(self.lattice.clone(), self.states.len())
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }
}

/// The lattice of downward-closed product sets for a poset of products
/// with upgrades (`p <= q` means `q` can be upgraded to `p`).
pub fn build_upgrade_lattice(poset: Poset) -> DownsetLattice {
    DownsetLattice::new(poset)
}

/// Residuation (relative pseudo-complement) in the truth lattice.
pub fn residuate(lat: &DownsetLattice, l: &Bits, m: &Bits) -> Bits {
    lat.residuate(l, m)
}

/// `(◇u)(x) = ⊔_y (R(x,y) ⊓ u(y))`.
pub fn diamond_mv(mvts: &Mvts, u: &Valuation) -> Valuation {
    let lat = &mvts.lattice;
    (0..mvts.states.len())
        .map(|x| {
            let parts: Vec<Bits> = (0..mvts.states.len())
                .map(|y| lat.meet2(&mvts.weights[x][y], &u[y]))
                .collect();
            lat.join(parts.iter())
        })
        .collect()
}

/// `(□u)(x) = ⊓_y (R(x,y) ⇒ u(y))`.
pub fn box_mv(mvts: &Mvts, u: &Valuation) -> Valuation {
    let lat = &mvts.lattice;
    (0..mvts.states.len())
        .map(|x| {
            let parts: Vec<Bits> = (0..mvts.states.len())
                .map(|y| lat.residuate(&mvts.weights[x][y], &u[y]))
                .collect();
            lat.meet(parts.iter())
        })
        .collect()
}

// ---------------------------------------------------------------------
// Semantic operators as registered monotone functions

fn basis_coordinate(lat: &ValuationLattice, b: &Valuation) -> Option<(usize, Bits)> {
    let bot = lat.inner().bottom();
    let mut found = None;
    for (x, v) in b.iter().enumerate() {
        if *v != bot {
            if found.is_some() {
                return None;
            }
            found = Some((x, *v));
        }
    }
    found
}

#[derive(Clone, Debug)]
struct MvDiamondOp {
    weights: Vec<Vec<Bits>>,
}

impl MonotoneOp<ValuationLattice> for MvDiamondOp {
    fn name(&self) -> String {
        "mv_diamond".into()
    }

    fn arity(&self) -> usize {
        1
    }

    fn apply(&self, lat: &ValuationLattice, args: &[Valuation]) -> Valuation {
        let u = &args[0];
        let inner = lat.inner();
        (0..lat.arity())
            .map(|x| {
                let parts: Vec<Bits> = (0..lat.arity())
                    .map(|y| inner.meet2(&self.weights[x][y], &u[y]))
                    .collect();
                inner.join(parts.iter())
            })
            .collect()
    }

    /// `ψ^◇_{b_x} = ⋁ { [b_y, 1] | b ⊑ R(x,y) }`.
    fn symbolic_move(&self, lat: &ValuationLattice, b: &Valuation) -> Option<MoveFormula<Valuation>> {
        let (x, v) = basis_coordinate(lat, b)?;
        let inner = lat.inner();
        Some(MoveFormula::Or(
            (0..lat.arity())
                .filter(|&y| inner.leq(&v, &self.weights[x][y]))
                .map(|y| MoveFormula::Atom(lat.at(y, v), 0))
                .collect(),
        ))
    }
}

#[derive(Clone, Debug)]
struct MvBoxOp {
    weights: Vec<Vec<Bits>>,
}

impl MonotoneOp<ValuationLattice> for MvBoxOp {
    fn name(&self) -> String {
        "mv_box".into()
    }

    fn arity(&self) -> usize {
        1
    }

    fn apply(&self, lat: &ValuationLattice, args: &[Valuation]) -> Valuation {
        let u = &args[0];
        let inner = lat.inner();
        (0..lat.arity())
            .map(|x| {
                let parts: Vec<Bits> = (0..lat.arity())
                    .map(|y| inner.residuate(&self.weights[x][y], &u[y]))
                    .collect();
                inner.meet(parts.iter())
            })
            .collect()
    }

    /// `ψ^□_{b_x} = ⋀ { [b'_y, 1] | b' ⊑ R(x,y), b' ⊑ b }`.
    fn symbolic_move(&self, lat: &ValuationLattice, b: &Valuation) -> Option<MoveFormula<Valuation>> {
        let (x, v) = basis_coordinate(lat, b)?;
        let inner = lat.inner();
        let mut conjuncts = Vec::new();
        for y in 0..lat.arity() {
            for b2 in inner.basis() {
                if inner.leq(&b2, &self.weights[x][y]) && inner.leq(&b2, &v) {
                    conjuncts.push(MoveFormula::Atom(lat.at(y, b2), 0));
                }
            }
        }
        Some(MoveFormula::And(conjuncts))
    }
}

/// `l ⇒ _` pointwise, with a constant left argument (residuation is only
/// monotone in its second argument).
#[derive(Clone, Debug)]
struct MvImpliesOp {
    constant: Bits,
}

impl MonotoneOp<ValuationLattice> for MvImpliesOp {
    fn name(&self) -> String {
        "mv_implies".into()
    }

    fn arity(&self) -> usize {
        1
    }

    fn apply(&self, lat: &ValuationLattice, args: &[Valuation]) -> Valuation {
        let u = &args[0];
        let inner = lat.inner();
        (0..lat.arity()).map(|x| inner.residuate(&self.constant, &u[x])).collect()
    }

    /// `ψ^⇒_{b_x} = ⋀ { [b'_x, 1] | b' ⊑ l, b' ⊑ b }`.
    fn symbolic_move(&self, lat: &ValuationLattice, b: &Valuation) -> Option<MoveFormula<Valuation>> {
        let (x, v) = basis_coordinate(lat, b)?;
        let inner = lat.inner();
        let conjuncts = inner
            .basis()
            .into_iter()
            .filter(|b2| inner.leq(b2, &self.constant) && inner.leq(b2, &v))
            .map(|b2| MoveFormula::Atom(lat.at(x, b2), 0))
            .collect();
        Some(MoveFormula::And(conjuncts))
    }
}

// ---------------------------------------------------------------------
// Formulae

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum MvFormula {
    True,
    False,
    Var(String),
    /// A constant truth value, given by downset generators.
    Const(Vec<String>),
    And(Box<MvFormula>, Box<MvFormula>),
    Or(Box<MvFormula>, Box<MvFormula>),
    Diamond(Box<MvFormula>),
    Box(Box<MvFormula>),
    /// `downset(..) => φ`.
    Implies(Vec<String>, Box<MvFormula>),
    Fix(Sign, String, Box<MvFormula>),
}

/// Parses a latticed formula: the μ-calculus grammar plus `downset(p q)`
/// constants and `downset(..) => φ` residuation.
pub fn parse_mv_formula(text: &str) -> Result<MvFormula> {
    let mut lx = Lexer::new(text)?;
    let f = parse_disj(&mut lx)?;
    if lx.peek().is_some() {
        let (l, c) = lx.here();
        return Err(Error::parse(l, c, "trailing input after formula"));
    }
    Ok(rename_bound(&f, &HashMap::new(), &mut Vec::new()))
}

fn parse_disj(lx: &mut Lexer) -> Result<MvFormula> {
    let mut acc = parse_conj(lx)?;
    while lx.peek() == Some(&Tok::OrOp) {
        lx.next_tok();
        let rhs = parse_conj(lx)?;
        acc = MvFormula::Or(Box::new(acc), Box::new(rhs));
    }
    Ok(acc)
}

fn parse_conj(lx: &mut Lexer) -> Result<MvFormula> {
    let mut acc = parse_modal(lx)?;
    while lx.peek() == Some(&Tok::AndOp) {
        lx.next_tok();
        let rhs = parse_modal(lx)?;
        acc = MvFormula::And(Box::new(acc), Box::new(rhs));
    }
    Ok(acc)
}

fn parse_modal(lx: &mut Lexer) -> Result<MvFormula> {
    let (l, c) = lx.here();
    match lx.peek() {
        Some(Tok::BoxOp) => {
            lx.next_tok();
            Ok(MvFormula::Box(Box::new(parse_modal(lx)?)))
        }
        Some(Tok::DiamondOp) => {
            lx.next_tok();
            Ok(MvFormula::Diamond(Box::new(parse_modal(lx)?)))
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
            Ok(MvFormula::Fix(sign, var, Box::new(body)))
        }
        Some(Tok::Tt) => {
            lx.next_tok();
            Ok(MvFormula::True)
        }
        Some(Tok::Ff) => {
            lx.next_tok();
            Ok(MvFormula::False)
        }
        Some(Tok::Downset) => {
            let gens = parse_downset_const(lx)?;
            if lx.peek() == Some(&Tok::Implies) {
                lx.next_tok();
                let rhs = parse_modal(lx)?;
                Ok(MvFormula::Implies(gens, Box::new(rhs)))
            } else {
                Ok(MvFormula::Const(gens))
            }
        }
        Some(Tok::Ident(_)) => {
            if let Some(Tok::Ident(x)) = lx.next_tok() {
                Ok(MvFormula::Var(x))
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

fn parse_downset_const(lx: &mut Lexer) -> Result<Vec<String>> {
    lx.expect(Tok::Downset, "downset")?;
    lx.expect(Tok::LPar, "'(' after downset")?;
    let mut gens = Vec::new();
    loop {
        match lx.next_tok() {
            Some(Tok::Ident(p)) => gens.push(p),
            Some(Tok::RPar) => break,
            _ => {
                let (l, c) = lx.here();
                return Err(Error::parse(l, c, "expected product name or ')'"));
            }
        }
    }
    Ok(gens)
}

fn rename_bound(
    f: &MvFormula,
    env: &HashMap<String, String>,
    used: &mut Vec<String>,
) -> MvFormula {
    match f {
        MvFormula::Var(x) => match env.get(x) {
            Some(fresh) => MvFormula::Var(fresh.clone()),
            // there are no propositions in the latticed grammar
            None => MvFormula::Var(x.clone()),
        },
        MvFormula::And(a, b) => MvFormula::And(
            Box::new(rename_bound(a, env, used)),
            Box::new(rename_bound(b, env, used)),
        ),
        MvFormula::Or(a, b) => MvFormula::Or(
            Box::new(rename_bound(a, env, used)),
            Box::new(rename_bound(b, env, used)),
        ),
        MvFormula::Diamond(a) => MvFormula::Diamond(Box::new(rename_bound(a, env, used))),
        MvFormula::Box(a) => MvFormula::Box(Box::new(rename_bound(a, env, used))),
        MvFormula::Implies(l, a) => {
            MvFormula::Implies(l.clone(), Box::new(rename_bound(a, env, used)))
        }
        MvFormula::Fix(s, x, a) => {
            let mut fresh = x.clone();
            while used.contains(&fresh) {
                fresh.push('\'');
            }
            used.push(fresh.clone());
            let mut env2 = env.clone();
            env2.insert(x.clone(), fresh.clone());
            MvFormula::Fix(*s, fresh, Box::new(rename_bound(a, &env2, used)))
        }
        other => other.clone(),
    }
}

// ---------------------------------------------------------------------
// MVTS parsing

/// Parses the MVTS format, an extension of the Kripke format:
///
/// ```text
/// products: p<=q r
/// states: a b
/// edge a->b : downset(p q)
/// ```
pub fn parse_mvts(text: &str) -> Result<Mvts> {
    let mut product_names: Vec<String> = Vec::new();
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut states: Vec<String> = Vec::new();
    let mut edges: Vec<(String, String, Vec<String>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (head, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(lineno + 1, 1, "expected 'key: ...'"))?;
        match head.trim() {
            "products" => {
                for tok in rest.split_whitespace() {
                    if let Some((lo, hi)) = tok.split_once("<=") {
                        for name in [lo, hi] {
                            if !product_names.iter().any(|n| n == name) {
                                product_names.push(name.to_string());
                            }
                        }
                        pairs.push((lo.to_string(), hi.to_string()));
                    } else if !product_names.iter().any(|n| n == tok) {
                        product_names.push(tok.to_string());
                    }
                }
            }
            "states" => {
                states.extend(rest.split_whitespace().map(|s| s.to_string()));
            }
            head if head.starts_with("edge") => {
                // "edge a->b : downset(p q)" splits at the first ':' into
                // "edge a->b" and "downset(p q)"
                let spec = head.strip_prefix("edge").unwrap_or("").trim();
                let (from, to) = spec.split_once("->").ok_or_else(|| {
                    Error::parse(lineno + 1, 1, "edge must look like 'edge a->b : downset(..)'")
                })?;
                let value = rest.trim();
                let gens = if value == "top" {
                    product_names.clone()
                } else {
                    let inner = value
                        .strip_prefix("downset(")
                        .and_then(|v| v.strip_suffix(')'))
                        .ok_or_else(|| {
                            Error::parse(lineno + 1, 1, "edge weight must be downset(..) or top")
                        })?;
                    inner.split_whitespace().map(|s| s.to_string()).collect()
                };
                edges.push((from.trim().to_string(), to.trim().to_string(), gens));
            }
            other => {
                return Err(Error::parse(lineno + 1, 1, format!("unknown section {other:?}")));
            }
        }
    }
    let pidx = |name: &str| -> Result<usize> {
        product_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("undeclared product {name:?}")))
    };
    let index_pairs: Vec<(usize, usize)> = pairs
        .iter()
        .map(|(lo, hi)| Ok((pidx(lo)?, pidx(hi)?)))
        .collect::<Result<_>>()?;
    let poset = Poset::new(product_names, &index_pairs);
    let lattice = DownsetLattice::new(poset);
    let sidx = |name: &str| -> Result<usize> {
        states
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("undeclared state {name:?}")))
    };
    let mut weights = vec![vec![Bits::EMPTY; states.len()]; states.len()];
    for (from, to, gens) in edges {
        let gens = gens
            .iter()
            .map(|g| lattice.poset().index(g).ok_or_else(|| {
                Error::Config(format!("undeclared product {g:?} in edge weight"))
            }))
            .collect::<Result<Vec<_>>>()?;
        let value = lattice.downset_of(gens);
        weights[sidx(&from)?][sidx(&to)?] = value;
    }
    Ok(Mvts { states, lattice, weights })
}

// ---------------------------------------------------------------------
// Translation and model checking

fn downset_const(mvts: &Mvts, gens: &[String]) -> Result<Bits> {
    let idx = gens
        .iter()
        .map(|g| {
            mvts.lattice
                .poset()
                .index(g)
                .ok_or_else(|| Error::Config(format!("undeclared product {g:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mvts.lattice.downset_of(idx))
}

/// Builds the equation system of a closed latticed formula over the
/// valuation lattice `L^S`, mirroring the powerset translation.
pub fn to_equation_system_mv(
    formula: &MvFormula,
    mvts: &Mvts,
) -> Result<EquationSystem<ValuationLattice>> {
    let wrapped;
    let formula = if matches!(formula, MvFormula::Fix(..)) {
        formula
    } else {
        wrapped = MvFormula::Fix(Sign::Mu, "x!".into(), Box::new(formula.clone()));
        &wrapped
    };
    let mut fixes: Vec<(Sign, String, MvFormula)> = Vec::new();
    collect_fixes(formula, &mut fixes);
    fixes.reverse();
    let index: HashMap<String, usize> =
        fixes.iter().enumerate().map(|(i, (_, x, _))| (x.clone(), i)).collect();
    let lat = mvts.valuation_lattice();
    let equations = fixes
        .iter()
        .map(|(sign, name, body)| {
            Ok(Equation {
                name: name.clone(),
                sign: *sign,
                rhs: body_to_term(body, mvts, &lat, &index)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquationSystem::new(lat, equations))
}

fn collect_fixes(f: &MvFormula, out: &mut Vec<(Sign, String, MvFormula)>) {
    match f {
        MvFormula::Fix(s, x, a) => {
            out.push((*s, x.clone(), (**a).clone()));
            collect_fixes(a, out);
        }
        MvFormula::And(a, b) | MvFormula::Or(a, b) => {
            collect_fixes(a, out);
            collect_fixes(b, out);
        }
        MvFormula::Diamond(a) | MvFormula::Box(a) | MvFormula::Implies(_, a) => {
            collect_fixes(a, out)
        }
        _ => {}
    }
}

fn body_to_term(
    f: &MvFormula,
    mvts: &Mvts,
    lat: &ValuationLattice,
    index: &HashMap<String, usize>,
) -> Result<Term<ValuationLattice>> {
    Ok(match f {
        MvFormula::True => Term::Const(lat.top()),
        MvFormula::False => Term::Const(lat.bottom()),
        MvFormula::Const(gens) => {
            let v = downset_const(mvts, gens)?;
            Term::Const(vec![v; lat.arity()])
        }
        MvFormula::Var(x) => Term::Var(*index.get(x).ok_or_else(|| {
            Error::Contract(format!("unbound variable {x} in formula"))
        })?),
        MvFormula::And(a, b) => Term::Meet(vec![
            body_to_term(a, mvts, lat, index)?,
            body_to_term(b, mvts, lat, index)?,
        ]),
        MvFormula::Or(a, b) => Term::Join(vec![
            body_to_term(a, mvts, lat, index)?,
            body_to_term(b, mvts, lat, index)?,
        ]),
        MvFormula::Diamond(a) => Term::apply(
            MvDiamondOp { weights: mvts.weights.clone() },
            vec![body_to_term(a, mvts, lat, index)?],
        ),
        MvFormula::Box(a) => Term::apply(
            MvBoxOp { weights: mvts.weights.clone() },
            vec![body_to_term(a, mvts, lat, index)?],
        ),
        MvFormula::Implies(gens, a) => Term::apply(
            MvImpliesOp { constant: downset_const(mvts, gens)? },
            vec![body_to_term(a, mvts, lat, index)?],
        ),
        MvFormula::Fix(_, x, _) => Term::Var(*index.get(x).ok_or_else(|| {
            Error::Contract(format!("unknown fixpoint variable {x}"))
        })?),
    })
}

/// Parses a fixpoint-free latticed equation body into a term over the
/// valuation lattice; identifiers must name system variables.
pub fn parse_mv_equation_body(
    text: &str,
    mvts: &Mvts,
    names: &[String],
) -> Result<Term<ValuationLattice>> {
    let parsed = parse_mv_formula(text)?;
    fn check_fixfree(f: &MvFormula) -> Result<()> {
        match f {
            MvFormula::Fix(..) => {
                Err(Error::Config("equation bodies must be fixpoint-free".into()))
            }
            MvFormula::And(a, b) | MvFormula::Or(a, b) => {
                check_fixfree(a)?;
                check_fixfree(b)
            }
            MvFormula::Diamond(a) | MvFormula::Box(a) | MvFormula::Implies(_, a) => {
                check_fixfree(a)
            }
            _ => Ok(()),
        }
    }
    check_fixfree(&parsed)?;
    let lat = mvts.valuation_lattice();
    let index: HashMap<String, usize> =
        names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    body_to_term(&parsed, mvts, &lat, &index)
}

/// Naive recursive semantics over `L^S`, the test oracle.
pub fn mv_semantics(
    formula: &MvFormula,
    mvts: &Mvts,
    env: &HashMap<String, Valuation>,
) -> Result<Valuation> {
    let lat = mvts.valuation_lattice();
    Ok(match formula {
        MvFormula::True => lat.top(),
        MvFormula::False => lat.bottom(),
        MvFormula::Const(gens) => vec![downset_const(mvts, gens)?; lat.arity()],
        MvFormula::Var(x) => env
            .get(x)
            .cloned()
            .ok_or_else(|| Error::Contract(format!("unbound variable {x}")))?,
        MvFormula::And(a, b) => {
            lat.meet2(&mv_semantics(a, mvts, env)?, &mv_semantics(b, mvts, env)?)
        }
        MvFormula::Or(a, b) => {
            lat.join2(&mv_semantics(a, mvts, env)?, &mv_semantics(b, mvts, env)?)
        }
        MvFormula::Diamond(a) => diamond_mv(mvts, &mv_semantics(a, mvts, env)?),
        MvFormula::Box(a) => box_mv(mvts, &mv_semantics(a, mvts, env)?),
        MvFormula::Implies(gens, a) => {
            let l = downset_const(mvts, gens)?;
            let u = mv_semantics(a, mvts, env)?;
            u.iter().map(|v| mvts.lattice.residuate(&l, v)).collect()
        }
        MvFormula::Fix(sign, x, a) => {
            let mut cur = match sign {
                Sign::Mu => lat.bottom(),
                Sign::Nu => lat.top(),
            };
            loop {
                let mut env2 = env.clone();
                env2.insert(x.clone(), cur.clone());
                let next = mv_semantics(a, mvts, &env2)?;
                if next == cur {
                    break cur;
                }
                cur = next;
            }
        }
    })
}

/// Symbolic moves for latticed systems come from the registered
/// operators; this is the same structural derivation as for the
/// powerset case.
pub fn symbolic_moves_mv(
    _sys: &EquationSystem<ValuationLattice>,
) -> pm::SymbolicMoves<ValuationLattice> {
    pm::SymbolicMoves::new()
}

pub struct MvModelCheck {
    pub holds: bool,
    pub system: EquationSystem<ValuationLattice>,
    pub measure: pm::ProgressMeasure<ValuationLattice>,
}

/// Does the formula hold at `state` to degree at least `degree`? The
/// degree decomposes into join-irreducibles `↓p`; the answer is the
/// conjunction of the measure verdicts at the positions `((↓p)_x, m)`.
pub fn mv_model_check(
    mvts: &Mvts,
    formula: &MvFormula,
    state: &str,
    degree: &Bits,
) -> Result<MvModelCheck> {
    let x = mvts
        .state_index(state)
        .ok_or_else(|| Error::Config(format!("unknown state {state:?}")))?;
    let sys = to_equation_system_mv(formula, mvts)?;
    let m = sys.arity();
    let lat = sys.lattice.clone();
    let starts: Vec<(Valuation, usize)> = mvts
        .lattice
        .decompose(degree)
        .into_iter()
        .map(|b| (lat.at(x, b), m - 1))
        .collect();
    if starts.is_empty() {
        // degree ⊥ holds vacuously
        let run = pm::solve_measure(&sys, pm::Backend::Formula, pm::Mode::Local(vec![]), pm::Order::Fifo)?;
        return Ok(MvModelCheck { holds: true, system: sys, measure: run.measure });
    }
    let run = pm::solve_measure(
        &sys,
        pm::Backend::Formula,
        pm::Mode::Local(starts.clone()),
        pm::Order::Fifo,
    )?;
    let holds = starts
        .iter()
        .all(|(b, i)| run.measure.get(b, *i).is_some_and(|v| !v.is_star()));
    Ok(MvModelCheck { holds, system: sys, measure: run.measure })
}
