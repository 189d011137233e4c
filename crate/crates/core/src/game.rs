//! The fixpoint game: positions, move enumeration, play engine, winner
//! determination and strategy extraction from a progress measure.
//!
//! Positions `(b, i)` belong to the existential player, who claims
//! `b ⊑ u_i` and answers with tuples `l` such that `b ⊑ f_i(l)`; tuples
//! belong to the universal player, who challenges with `(b', j)` for
//! `b' ≪ l_j`. Infinite plays are decided by the sign of the highest
//! index occurring infinitely often; the engine detects them by exact
//! position repetition, which is sound because positions are finitely
//! many and machine strategies are deterministic.

use crate::error::{Error, Result};
use crate::eqsys::{eval_term, EquationSystem, Sign};
use crate::lattice::ovec::sup;
use crate::lattice::{Lattice, Lifted};
use crate::pm::{enumerate_tuples, formula_to_moves, ProgressMeasure, SymbolicMoves};
use std::cmp::Ordering;
use std::fmt;

/// A choice provider for the existential player: given `(b, i)`, return
/// a move tuple or `None` to resign.
pub type ExistsChooser<'a, L> =
    dyn FnMut(&<L as Lattice>::Elem, usize) -> Option<Vec<<L as Lattice>::Elem>> + 'a;

/// A choice provider for the universal player: given the tuple played,
/// return a challenge `(b', j)` or `None` to resign.
pub type ForallChooser<'a, L> =
    dyn FnMut(&[<L as Lattice>::Elem]) -> Option<(<L as Lattice>::Elem, usize)> + 'a;

/// A game position: `(b, i)` owned by ∃ or a tuple owned by ∀.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Position<E> {
    Exists(E, usize),
    Forall(Vec<E>),
}

impl<E> Position<E> {
    pub fn render<L: Lattice<Elem = E>>(&self, lat: &L) -> String {
        match self {
            Position::Exists(b, i) => format!("({},{})", lat.fmt_elem(b), i + 1),
            Position::Forall(l) => {
                let parts: Vec<String> = l.iter().map(|e| lat.fmt_elem(e)).collect();
                format!("({})", parts.join(","))
            }
        }
    }
}

/// The full move set `E(b,i) = { l ∈ L^m | b ⊑ f_i(l) }`, by
/// enumeration. Only usable at desk scale; larger instances should play
/// from a selection.
pub fn e_moves<L: Lattice>(
    sys: &EquationSystem<L>,
    b: &L::Elem,
    i: usize,
    max_tuples: u128,
) -> Result<crate::pm::MoveList<L>> {
    let tuples = enumerate_tuples(&sys.lattice, sys.arity(), max_tuples)?;
    let lat = &sys.lattice;
    Ok(tuples
        .into_iter()
        .filter(|l| lat.leq(b, &eval_term(lat, &sys.equations[i].rhs, l)))
        .collect())
}

/// The universal player's moves `{ (b', j) | b' ∈ basis, b' ≪ l_j }`.
pub fn a_moves<L: Lattice>(lat: &L, l: &[L::Elem]) -> Vec<(L::Elem, usize)> {
    let mut out = Vec::new();
    for (j, lj) in l.iter().enumerate() {
        for b in lat.decompose(lj) {
            debug_assert!(lat.way_below(&b, lj));
            out.push((b, j));
        }
    }
    out
}

/// ∀-moves restricted to maximal basis elements per index; their
/// downward closure is the full answer set, which leaves the least
/// measure unchanged and shrinks branching.
pub fn a_moves_reduced<L: Lattice>(lat: &L, l: &[L::Elem]) -> Vec<(L::Elem, usize)> {
    let mut out = Vec::new();
    for (j, lj) in l.iter().enumerate() {
        let parts = lat.decompose(lj);
        for b in &parts {
            let dominated = parts
                .iter()
                .any(|b2| b2 != b && lat.leq(b, b2));
            if !dominated {
                out.push((b.clone(), j));
            }
        }
    }
    out
}

/// Candidate ∃-moves at `(b, i)` from the symbolic move formula.
pub fn selection_moves<L: Lattice>(
    sys: &EquationSystem<L>,
    moves: &SymbolicMoves<L>,
    b: &L::Elem,
    i: usize,
    cap: usize,
) -> Result<crate::pm::MoveList<L>> {
    let formula = moves.formula(sys, b, i)?;
    formula_to_moves(&sys.lattice, sys.arity(), &formula, cap)
}

/// The move prescribed by the least progress measure at `(b, i)`: among
/// the selection candidates, one minimising (under `⪯_i`) the supremum
/// over all universal answers of `R(b')(j) + δ`. Returns `None` when the
/// measure is ★ there, i.e. when the position is lost.
pub fn suggest_existential_move<L: Lattice>(
    sys: &EquationSystem<L>,
    moves: &SymbolicMoves<L>,
    measure: &ProgressMeasure<L>,
    b: &L::Elem,
    i: usize,
    cap: usize,
) -> Result<Option<Vec<L::Elem>>> {
    match measure.get(b, i) {
        None | Some(Lifted::Star) => return Ok(None),
        Some(_) => {}
    }
    let m = sys.arity();
    let sign = sys.sign(i);
    let height = sys.lattice.height();
    let candidates = selection_moves(sys, moves, b, i, cap)?;
    let mut best: Option<(Lifted, Vec<L::Elem>)> = None;
    for l in candidates {
        let answers: Vec<Lifted> = a_moves(&sys.lattice, &l)
            .into_iter()
            .map(|(b2, j)| {
                measure
                    .get(&b2, j)
                    .cloned()
                    .unwrap_or(Lifted::Star)
                    .add_delta(i, sign, height)
            })
            .collect();
        let worst = sup(m, answers.iter());
        let better = match &best {
            None => true,
            Some((w, _)) => worst.cmp_suffix(w, i) == Ordering::Less,
        };
        if better {
            best = Some((worst, l));
        }
    }
    Ok(best.map(|(_, l)| l))
}

/// Why a play ended.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Outcome {
    /// The universal player could not move.
    ForallStuck,
    /// The existential player could not (or would not) move.
    ExistsStuck,
    /// An exact position repetition closed a cycle; the winner is
    /// determined by the sign of the highest ∃-index inside the cycle.
    Cycle { top_index: usize, sign: Sign },
    /// The step cap was reached; no winner is guessed.
    Undecided,
}

impl Outcome {
    pub fn winner(&self) -> Option<Player> {
        match self {
            Outcome::ForallStuck => Some(Player::Exists),
            Outcome::ExistsStuck => Some(Player::Forall),
            Outcome::Cycle { sign, .. } => Some(match sign {
                Sign::Nu => Player::Exists,
                Sign::Mu => Player::Forall,
            }),
            Outcome::Undecided => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Player {
    Exists,
    Forall,
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::Exists => write!(f, "exists"),
            Player::Forall => write!(f, "forall"),
        }
    }
}

/// A finished (or capped) play: the visited positions in order, plus the
/// outcome.
#[derive(Clone, Debug)]
pub struct Play<E> {
    pub steps: Vec<Position<E>>,
    pub outcome: Outcome,
}

/// Default cap on play length.
pub const STEP_CAP: usize = 10_000;

/// Runs a single play from `start` with the given choice providers. A
/// provider returning `None` makes its player stuck; illegal moves are
/// rejected with a contract error (interactive frontends validate and
/// retry instead).
pub fn play<L: Lattice>(
    sys: &EquationSystem<L>,
    start: Position<L::Elem>,
    exists: &mut ExistsChooser<'_, L>,
    forall: &mut ForallChooser<'_, L>,
    step_cap: usize,
) -> Result<Play<L::Elem>> {
    let lat = &sys.lattice;
    let mut steps: Vec<Position<L::Elem>> = vec![start];
    loop {
        if steps.len() > step_cap {
            return Ok(Play { steps, outcome: Outcome::Undecided });
        }
        let current = steps.last().unwrap().clone();
        let next = match &current {
            Position::Exists(b, i) => match exists(b, *i) {
                None => return Ok(Play { steps, outcome: Outcome::ExistsStuck }),
                Some(l) => {
                    let fi = eval_term(lat, &sys.equations[*i].rhs, &l);
                    if !lat.leq(b, &fi) {
                        return Err(Error::Contract(format!(
                            "illegal existential move: {} ⋢ f_{}(move)",
                            lat.fmt_elem(b),
                            i + 1
                        )));
                    }
                    Position::Forall(l)
                }
            },
            Position::Forall(l) => {
                let legal = a_moves(lat, l);
                if legal.is_empty() {
                    return Ok(Play { steps, outcome: Outcome::ForallStuck });
                }
                match forall(l) {
                    None => return Ok(Play { steps, outcome: Outcome::ForallStuck }),
                    Some((b, j)) => {
                        if j >= sys.arity()
                            || !lat.is_basis(&b)
                            || !lat.way_below(&b, &l[j])
                        {
                            return Err(Error::Contract(
                                "illegal universal move: not a basis element way-below the \
                                 chosen component"
                                    .into(),
                            ));
                        }
                        Position::Exists(b, j)
                    }
                }
            }
        };
        if let Some(first) = steps.iter().position(|p| *p == next) {
            let top_index = steps[first..]
                .iter()
                .chain(std::iter::once(&next))
                .filter_map(|p| match p {
                    Position::Exists(_, i) => Some(*i),
                    Position::Forall(_) => None,
                })
                .max()
                .expect("a cycle passes through an existential position");
            steps.push(next);
            return Ok(Play {
                steps,
                outcome: Outcome::Cycle { top_index, sign: sys.sign(top_index) },
            });
        }
        steps.push(next);
    }
}

/// Exploration of every universal answer against a fixed existential
/// strategy. Each branch ends when a player is stuck or when the branch
/// repeats a position (cycle rule).
#[derive(Clone, Debug)]
pub enum PlayTree<E> {
    /// ∃ plays `tuple` and the game continues as described by `after`.
    Exists { b: E, index: usize, tuple: Vec<E>, after: AfterMove<E> },
    /// ∃ has no move at `(b, index)`.
    Stuck { b: E, index: usize },
    /// The branch closed a cycle at this ∃-position; the winner follows
    /// from the sign of the highest index inside the cycle.
    Repeat { top_index: usize, sign: Sign },
    /// Node budget exhausted.
    Capped,
}

/// What happened after an existential move.
#[derive(Clone, Debug)]
pub enum AfterMove<E> {
    /// One subtree per universal answer; an empty list means ∀ is stuck.
    Answers(Vec<((E, usize), PlayTree<E>)>),
    /// The played tuple itself repeated an earlier position.
    TupleRepeat { top_index: usize, sign: Sign },
}

impl<E> PlayTree<E> {
    /// True iff ∃ wins every branch of the tree.
    pub fn exists_wins_all(&self) -> bool {
        match self {
            PlayTree::Stuck { .. } | PlayTree::Capped => false,
            PlayTree::Repeat { sign, .. } => *sign == Sign::Nu,
            PlayTree::Exists { after, .. } => match after {
                AfterMove::TupleRepeat { sign, .. } => *sign == Sign::Nu,
                AfterMove::Answers(answers) => {
                    answers.iter().all(|(_, t)| t.exists_wins_all())
                }
            },
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            PlayTree::Exists { after: AfterMove::Answers(answers), .. } => {
                1 + answers.iter().map(|(_, t)| t.node_count()).sum::<usize>()
            }
            _ => 1,
        }
    }
}

/// Plays the fixed strategy against all universal answers (reduced to
/// maximal basis elements per index) and reports whether ∃ wins every
/// branch.
pub fn verify_existential_strategy<L: Lattice>(
    sys: &EquationSystem<L>,
    strategy: &mut ExistsChooser<'_, L>,
    start: (L::Elem, usize),
    node_cap: usize,
    reduced_answers: bool,
) -> Result<PlayTree<L::Elem>> {
    let mut budget = node_cap;
    let mut path: Vec<Position<L::Elem>> = Vec::new();
    explore(sys, strategy, start, &mut path, &mut budget, reduced_answers)
}

fn explore<L: Lattice>(
    sys: &EquationSystem<L>,
    strategy: &mut ExistsChooser<'_, L>,
    (b, i): (L::Elem, usize),
    path: &mut Vec<Position<L::Elem>>,
    budget: &mut usize,
    reduced_answers: bool,
) -> Result<PlayTree<L::Elem>> {
    if *budget == 0 {
        return Ok(PlayTree::Capped);
    }
    *budget -= 1;
    let here = Position::Exists(b.clone(), i);
    if let Some(tree) = close_cycle(sys, path, &here) {
        return Ok(tree);
    }
    let Some(tuple) = strategy(&b, i) else {
        return Ok(PlayTree::Stuck { b, index: i });
    };
    let lat = &sys.lattice;
    let fi = eval_term(lat, &sys.equations[i].rhs, &tuple);
    if !lat.leq(&b, &fi) {
        return Err(Error::Contract("strategy produced an illegal move".into()));
    }
    path.push(here);
    let fpos = Position::Forall(tuple.clone());
    if let Some(PlayTree::Repeat { top_index, sign }) = close_cycle(sys, path, &fpos) {
        path.pop();
        return Ok(PlayTree::Exists {
            b,
            index: i,
            tuple,
            after: AfterMove::TupleRepeat { top_index, sign },
        });
    }
    path.push(fpos);
    let legal = if reduced_answers {
        a_moves_reduced(lat, &tuple)
    } else {
        a_moves(lat, &tuple)
    };
    let mut answers = Vec::new();
    for (b2, j) in legal {
        let sub = explore(sys, strategy, (b2.clone(), j), path, budget, reduced_answers)?;
        answers.push(((b2, j), sub));
    }
    path.pop();
    path.pop();
    Ok(PlayTree::Exists { b, index: i, tuple, after: AfterMove::Answers(answers) })
}

fn close_cycle<L: Lattice>(
    sys: &EquationSystem<L>,
    path: &[Position<L::Elem>],
    next: &Position<L::Elem>,
) -> Option<PlayTree<L::Elem>> {
    let first = path.iter().position(|p| p == next)?;
    let top_index = path[first..]
        .iter()
        .filter_map(|p| match p {
            Position::Exists(_, i) => Some(*i),
            Position::Forall(_) => None,
        })
        .max()
        .expect("cycle passes through an existential position");
    Some(PlayTree::Repeat { top_index, sign: sys.sign(top_index) })
}
