//! Systems of fixpoint equations: term representation, evaluation,
//! substitution, and the nested Kleene solver used as the ground-truth
//! oracle throughout.
//!
//! Right-hand sides are terms, not opaque closures, so the measure and
//! frontend code can derive symbolic moves structurally.

use crate::lattice::Lattice;
use crate::pm::MoveFormula;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

/// Whether an equation takes the least (μ) or greatest (ν) solution.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Sign {
    Mu,
    Nu,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Mu => write!(f, "mu"),
            Sign::Nu => write!(f, "nu"),
        }
    }
}

/// A monotone operator registered by a frontend (modalities, function
/// update, residuation with a constant, ...).
///
/// `symbolic_move` returns the move formula of the operator seen as a
/// function of its own arguments: atoms refer to argument positions
/// `0..arity`, to be composed structurally over the argument terms.
pub trait MonotoneOp<L: Lattice>: Send + Sync {
    fn name(&self) -> String;
    fn arity(&self) -> usize;
    fn apply(&self, lat: &L, args: &[L::Elem]) -> L::Elem;
    fn symbolic_move(&self, lat: &L, b: &L::Elem) -> Option<MoveFormula<L::Elem>>;
}

/// Shared handle to a registered operator.
pub struct OpRef<L: Lattice>(pub Arc<dyn MonotoneOp<L>>);

impl<L: Lattice> Clone for OpRef<L> {
    fn clone(&self) -> Self {
        OpRef(Arc::clone(&self.0))
    }
}

impl<L: Lattice> fmt::Debug for OpRef<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.name())
    }
}

/// Expression tree over lattice constants, system variables (0-based)
/// and registered monotone operators. Empty `Join` is ⊥, empty `Meet`
/// is ⊤.
#[derive(Clone, Debug)]
pub enum Term<L: Lattice> {
    Const(L::Elem),
    Var(usize),
    Join(Vec<Term<L>>),
    Meet(Vec<Term<L>>),
    Apply(OpRef<L>, Vec<Term<L>>),
}

impl<L: Lattice> Term<L> {
    pub fn apply(op: impl MonotoneOp<L> + 'static, args: Vec<Term<L>>) -> Self {
        Term::Apply(OpRef(Arc::new(op)), args)
    }

    /// Largest variable index mentioned, plus one.
    pub fn max_arity(&self) -> usize {
        match self {
            Term::Const(_) => 0,
            Term::Var(i) => i + 1,
            Term::Join(ts) | Term::Meet(ts) => {
                ts.iter().map(|t| t.max_arity()).max().unwrap_or(0)
            }
            Term::Apply(_, ts) => ts.iter().map(|t| t.max_arity()).max().unwrap_or(0),
        }
    }

    /// Replaces `Var(i)` by a constant and shifts variables above `i`
    /// down by one.
    fn substitute(&self, i: usize, value: &L::Elem) -> Term<L> {
        match self {
            Term::Const(c) => Term::Const(c.clone()),
            Term::Var(j) => {
                if *j == i {
                    Term::Const(value.clone())
                } else if *j > i {
                    Term::Var(j - 1)
                } else {
                    Term::Var(*j)
                }
            }
            Term::Join(ts) => Term::Join(ts.iter().map(|t| t.substitute(i, value)).collect()),
            Term::Meet(ts) => Term::Meet(ts.iter().map(|t| t.substitute(i, value)).collect()),
            Term::Apply(op, ts) => {
                Term::Apply(op.clone(), ts.iter().map(|t| t.substitute(i, value)).collect())
            }
        }
    }
}

/// Bottom-up evaluation of a term under an environment for the system
/// variables.
pub fn eval_term<L: Lattice>(lat: &L, term: &Term<L>, env: &[L::Elem]) -> L::Elem {
    match term {
        Term::Const(c) => c.clone(),
        Term::Var(i) => env[*i].clone(),
        Term::Join(ts) => {
            let parts: Vec<L::Elem> = ts.iter().map(|t| eval_term(lat, t, env)).collect();
            lat.join(parts.iter())
        }
        Term::Meet(ts) => {
            let parts: Vec<L::Elem> = ts.iter().map(|t| eval_term(lat, t, env)).collect();
            lat.meet(parts.iter())
        }
        Term::Apply(op, ts) => {
            let args: Vec<L::Elem> = ts.iter().map(|t| eval_term(lat, t, env)).collect();
            op.0.apply(lat, &args)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Equation<L: Lattice> {
    pub name: String,
    pub sign: Sign,
    pub rhs: Term<L>,
}

/// An ordered list of equations `x_i =_{η_i} f_i(x_1..x_m)` over a
/// lattice. Index 0 is the innermost equation; the last equation is the
/// outermost one.
#[derive(Clone, Debug)]
pub struct EquationSystem<L: Lattice> {
    pub lattice: L,
    pub equations: Vec<Equation<L>>,
}

impl<L: Lattice> EquationSystem<L> {
    pub fn new(lattice: L, equations: Vec<Equation<L>>) -> Self {
        let m = equations.len();
        for eq in &equations {
            assert!(eq.rhs.max_arity() <= m, "term references variable out of range");
        }
        EquationSystem { lattice, equations }
    }

    pub fn arity(&self) -> usize {
        self.equations.len()
    }

    pub fn sign(&self, i: usize) -> Sign {
        self.equations[i].sign
    }

    /// `E[x_i := l]`: equation `i` removed, `x_i` replaced by the
    /// constant elsewhere, indices renumbered.
    pub fn substitute(&self, i: usize, value: &L::Elem) -> EquationSystem<L> {
        assert!(i < self.equations.len(), "substitute index out of range");
        let equations = self
            .equations
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, eq)| Equation {
                name: eq.name.clone(),
                sign: eq.sign,
                rhs: eq.rhs.substitute(i, value),
            })
            .collect();
        EquationSystem { lattice: self.lattice.clone(), equations }
    }
}

/// Nested Kleene solver computing the solution of the system.
///
/// The last equation is solved as the extremal fixpoint of the function
/// obtained by solving the first `m-1` equations parametrically;
/// stabilisation is detected by equality of consecutive iterates.
/// Parametric sub-solutions are memoised keyed by the tuple of
/// substituted constants.
pub fn solve_kleene<L: Lattice>(sys: &EquationSystem<L>) -> Vec<L::Elem> {
    let mut solver = KleeneSolver { sys, memo: HashMap::new() };
    solver.solve_prefix(sys.arity(), &[])
}

/// Memo key: (prefix length, substituted suffix constants).
type MemoKey<L> = (usize, Vec<<L as Lattice>::Elem>);

struct KleeneSolver<'a, L: Lattice> {
    sys: &'a EquationSystem<L>,
    memo: HashMap<MemoKey<L>, Vec<L::Elem>>,
}

impl<L: Lattice> KleeneSolver<'_, L> {
    /// Solves the first `k` equations with variables `k..m` fixed to
    /// `suffix` (so `suffix[0]` is the value of `x_k`).
    fn solve_prefix(&mut self, k: usize, suffix: &[L::Elem]) -> Vec<L::Elem> {
        if k == 0 {
            return vec![];
        }
        let key = (k, suffix.to_vec());
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        let lat = &self.sys.lattice;
        let eq = &self.sys.equations[k - 1];
        let mut x = match eq.sign {
            Sign::Mu => lat.bottom(),
            Sign::Nu => lat.top(),
        };
        loop {
            let mut inner_suffix = Vec::with_capacity(suffix.len() + 1);
            inner_suffix.push(x.clone());
            inner_suffix.extend_from_slice(suffix);
            let prefix = self.solve_prefix(k - 1, &inner_suffix);
            let mut env = prefix;
            env.push(x.clone());
            env.extend_from_slice(suffix);
            let fx = eval_term(lat, &eq.rhs, &env);
            if fx == x {
                break;
            }
            x = fx;
        }
        let mut inner_suffix = Vec::with_capacity(suffix.len() + 1);
        inner_suffix.push(x.clone());
        inner_suffix.extend_from_slice(suffix);
        let mut result = self.solve_prefix(k - 1, &inner_suffix);
        result.push(x);
        self.memo.insert(key, result.clone());
        result
    }
}

/// Whether `u = f(u)` componentwise.
pub fn is_pre_solution<L: Lattice>(sys: &EquationSystem<L>, u: &[L::Elem]) -> bool {
    assert_eq!(u.len(), sys.arity());
    sys.equations
        .iter()
        .zip(u.iter())
        .all(|(eq, ui)| eval_term(&sys.lattice, &eq.rhs, u) == *ui)
}

/// The parametric one-variable function `f_{i,l}` of the approximant
/// definition: solve the first `i` equations with suffix `l[i+1..]` and
/// `x_i` as parameter, then apply `f_i`.
fn approximant_fn<L: Lattice>(
    sys: &EquationSystem<L>,
    i: usize,
    l: &[L::Elem],
    x: &L::Elem,
) -> L::Elem {
    let mut solver = KleeneSolver { sys, memo: HashMap::new() };
    let mut suffix = vec![x.clone()];
    suffix.extend_from_slice(&l[i + 1..]);
    let prefix = solver.solve_prefix(i, &suffix);
    let mut env = prefix;
    env.push(x.clone());
    env.extend_from_slice(&l[i + 1..]);
    eval_term(&sys.lattice, &sys.equations[i].rhs, &env)
}

/// Whether `l` is a μ-approximant: ν-components are exact, μ-components
/// are Kleene under-approximations `f_{i,l}^k(⊥)` for some natural `k`.
pub fn check_mu_approximant<L: Lattice>(sys: &EquationSystem<L>, l: &[L::Elem]) -> bool {
    check_approximant(sys, l, Sign::Mu)
}

/// Dual of [`check_mu_approximant`].
pub fn check_nu_approximant<L: Lattice>(sys: &EquationSystem<L>, l: &[L::Elem]) -> bool {
    check_approximant(sys, l, Sign::Nu)
}

fn check_approximant<L: Lattice>(sys: &EquationSystem<L>, l: &[L::Elem], kind: Sign) -> bool {
    assert_eq!(l.len(), sys.arity());
    let lat = &sys.lattice;
    for i in 0..sys.arity() {
        let sign = sys.equations[i].sign;
        if sign == kind {
            // approximated side: l_i must be some finite iterate
            let start = match kind {
                Sign::Mu => lat.bottom(),
                Sign::Nu => lat.top(),
            };
            let mut x = start;
            let mut seen = false;
            loop {
                if x == l[i] {
                    seen = true;
                    break;
                }
                let fx = approximant_fn(sys, i, l, &x);
                if fx == x {
                    break;
                }
                x = fx;
            }
            if !seen {
                return false;
            }
        } else {
            // exact side: l_i must equal the extremal fixpoint
            let mut x = match sign {
                Sign::Mu => lat.bottom(),
                Sign::Nu => lat.top(),
            };
            loop {
                let fx = approximant_fn(sys, i, l, &x);
                if fx == x {
                    break;
                }
                x = fx;
            }
            if x != l[i] {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Bits, PowersetLattice};
    use crate::mucalc::{BoxOp, DiamondOp};

    /// The running system x1 =mu {b} ∪ ◇x1 ; x2 =nu x1 ∩ □x2 over the
    /// two-state structure a→a, a→b, b→b with p at b.
    pub(crate) fn running_system() -> EquationSystem<PowersetLattice> {
        let lat = PowersetLattice::new(vec!["a".into(), "b".into()]);
        let succs = vec![Bits(0b11), Bits(0b10)];
        let eq1 = Equation {
            name: "x1".into(),
            sign: Sign::Mu,
            rhs: Term::Join(vec![
                Term::Const(Bits(0b10)),
                Term::apply(DiamondOp::new(succs.clone()), vec![Term::Var(0)]),
            ]),
        };
        let eq2 = Equation {
            name: "x2".into(),
            sign: Sign::Nu,
            rhs: Term::Meet(vec![
                Term::Var(0),
                Term::apply(BoxOp::new(succs), vec![Term::Var(1)]),
            ]),
        };
        EquationSystem::new(lat, vec![eq1, eq2])
    }

    #[test]
    fn eval_diamond_example() {
        let sys = running_system();
        // {b} ∪ ◇{b} = {a,b} since a→b and b→b
        let env = vec![Bits(0b10), Bits(0)];
        let out = eval_term(&sys.lattice, &sys.equations[0].rhs, &env);
        assert_eq!(out, Bits(0b11));
    }

    #[test]
    fn empty_join_meet() {
        let lat = PowersetLattice::new(vec!["a".into()]);
        let join: Term<PowersetLattice> = Term::Join(vec![]);
        let meet: Term<PowersetLattice> = Term::Meet(vec![]);
        assert_eq!(eval_term(&lat, &join, &[]), lat.bottom());
        assert_eq!(eval_term(&lat, &meet, &[]), lat.top());
    }

    #[test]
    fn substitution_drops_equation() {
        let sys = running_system();
        let sub = sys.substitute(1, &Bits(0b11));
        assert_eq!(sub.arity(), 1);
        assert_eq!(sub.equations[0].name, "x1");
        let single = sub.substitute(0, &Bits(0));
        assert_eq!(single.arity(), 0);
    }

    #[test]
    fn substitution_commutes_with_renumbering() {
        let sys = running_system();
        let l = Bits(0b01);
        let l2 = Bits(0b10);
        let a = sys.substitute(1, &l).substitute(0, &l2);
        assert_eq!(a.arity(), 0);
    }

    #[test]
    fn running_solution_is_full() {
        let sys = running_system();
        let sol = solve_kleene(&sys);
        assert_eq!(sol, vec![Bits(0b11), Bits(0b11)]);
        assert!(is_pre_solution(&sys, &sol));
    }

    #[test]
    fn identity_fixpoints() {
        let lat = PowersetLattice::new(vec!["a".into(), "b".into()]);
        let nu = EquationSystem::new(
            lat.clone(),
            vec![Equation { name: "x".into(), sign: Sign::Nu, rhs: Term::Var(0) }],
        );
        assert_eq!(solve_kleene(&nu), vec![lat.top()]);
        let mu = EquationSystem::new(
            lat.clone(),
            vec![Equation { name: "x".into(), sign: Sign::Mu, rhs: Term::Var(0) }],
        );
        assert_eq!(solve_kleene(&mu), vec![lat.bottom()]);
    }

    #[test]
    fn non_solution_is_not_pre_solution() {
        let sys = running_system();
        // f1(∅,∅) = {b} ≠ ∅
        assert!(!is_pre_solution(&sys, &[Bits(0), Bits(0)]));
        let empty = EquationSystem::new(
            PowersetLattice::new(vec!["a".into()]),
            vec![],
        );
        assert!(is_pre_solution(&empty, &[]));
        assert_eq!(solve_kleene(&empty), Vec::<Bits>::new());
    }

    #[test]
    fn solution_is_approximant_both_ways() {
        let sys = running_system();
        let sol = solve_kleene(&sys);
        assert!(check_mu_approximant(&sys, &sol));
        assert!(check_nu_approximant(&sys, &sol));
    }

    #[test]
    fn bottom_tuple_is_mu_approximant_for_mu_signs() {
        let lat = PowersetLattice::new(vec!["a".into()]);
        let succs = vec![Bits(0b1)];
        let sys = EquationSystem::new(
            lat.clone(),
            vec![
                Equation {
                    name: "x1".into(),
                    sign: Sign::Mu,
                    rhs: Term::apply(DiamondOp::new(succs), vec![Term::Var(1)]),
                },
                Equation { name: "x2".into(), sign: Sign::Mu, rhs: Term::Var(0) },
            ],
        );
        let bots = vec![lat.bottom(), lat.bottom()];
        assert!(check_mu_approximant(&sys, &bots));
    }
}
