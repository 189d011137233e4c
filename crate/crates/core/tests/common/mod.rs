//! Shared random-instance generators for the integration suites.
#![allow(dead_code)] // each test target uses a different subset

use fixgame_core::eqsys::{Equation, EquationSystem};
use fixgame_core::lattice::{Bits, DownsetLattice, Lattice, Poset, PowersetLattice};
use fixgame_core::mucalc::{BoxOp, DiamondOp, KripkeStructure, MuFormula};
use fixgame_core::{Sign, Term};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

pub fn random_sign(rng: &mut ChaCha8Rng) -> Sign {
    if rng.gen_bool(0.5) {
        Sign::Mu
    } else {
        Sign::Nu
    }
}

/// A random system over a powerset lattice with up to 3 states and 3
/// equations; terms mix joins, meets, constants and modalities over a
/// random transition relation.
pub fn random_powerset_system(rng: &mut ChaCha8Rng) -> EquationSystem<PowersetLattice> {
    let n = rng.gen_range(1..=3usize);
    let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let lat = PowersetLattice::new(states);
    let succs: Vec<Bits> = (0..n).map(|_| Bits(rng.gen_range(0..(1u64 << n)))).collect();
    let m = rng.gen_range(1..=3usize);
    let equations = (0..m)
        .map(|i| Equation {
            name: format!("x{}", i + 1),
            sign: random_sign(rng),
            rhs: random_powerset_term(rng, n, &succs, m, 3),
        })
        .collect();
    EquationSystem::new(lat, equations)
}

fn random_powerset_term(
    rng: &mut ChaCha8Rng,
    n: usize,
    succs: &[Bits],
    m: usize,
    depth: usize,
) -> Term<PowersetLattice> {
    if depth == 0 || rng.gen_bool(0.3) {
        if rng.gen_bool(0.6) {
            Term::Var(rng.gen_range(0..m))
        } else {
            Term::Const(Bits(rng.gen_range(0..(1u64 << n))))
        }
    } else {
        match rng.gen_range(0..4) {
            0 => Term::Join(vec![
                random_powerset_term(rng, n, succs, m, depth - 1),
                random_powerset_term(rng, n, succs, m, depth - 1),
            ]),
            1 => Term::Meet(vec![
                random_powerset_term(rng, n, succs, m, depth - 1),
                random_powerset_term(rng, n, succs, m, depth - 1),
            ]),
            2 => Term::apply(
                DiamondOp::new(succs.to_vec()),
                vec![random_powerset_term(rng, n, succs, m, depth - 1)],
            ),
            _ => Term::apply(
                BoxOp::new(succs.to_vec()),
                vec![random_powerset_term(rng, n, succs, m, depth - 1)],
            ),
        }
    }
}

/// A random system over a downset lattice of a random poset with up to 3
/// join-irreducibles.
pub fn random_downset_system(rng: &mut ChaCha8Rng) -> EquationSystem<DownsetLattice> {
    let k = rng.gen_range(1..=3usize);
    let names: Vec<String> = (0..k).map(|i| format!("p{i}")).collect();
    let mut pairs = Vec::new();
    for lo in 0..k {
        for hi in (lo + 1)..k {
            if rng.gen_bool(0.4) {
                pairs.push((lo, hi));
            }
        }
    }
    let lat = DownsetLattice::new(Poset::new(names, &pairs));
    let m = rng.gen_range(1..=3usize);
    let equations = (0..m)
        .map(|i| Equation {
            name: format!("x{}", i + 1),
            sign: random_sign(rng),
            rhs: random_downset_term(rng, &lat, m, 3),
        })
        .collect();
    EquationSystem::new(lat, equations)
}

fn random_downset_term(
    rng: &mut ChaCha8Rng,
    lat: &DownsetLattice,
    m: usize,
    depth: usize,
) -> Term<DownsetLattice> {
    if depth == 0 || rng.gen_bool(0.35) {
        if rng.gen_bool(0.6) {
            Term::Var(rng.gen_range(0..m))
        } else {
            let gens: Vec<usize> =
                (0..lat.poset().len()).filter(|_| rng.gen_bool(0.4)).collect();
            Term::Const(lat.downset_of(gens))
        }
    } else if rng.gen_bool(0.5) {
        Term::Join(vec![
            random_downset_term(rng, lat, m, depth - 1),
            random_downset_term(rng, lat, m, depth - 1),
        ])
    } else {
        Term::Meet(vec![
            random_downset_term(rng, lat, m, depth - 1),
            random_downset_term(rng, lat, m, depth - 1),
        ])
    }
}

/// A random Kripke structure with up to `max_states` states and labels
/// for propositions `p` and `q`.
pub fn random_kripke(rng: &mut ChaCha8Rng, max_states: usize) -> KripkeStructure {
    let n = rng.gen_range(1..=max_states);
    let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let succs: Vec<Bits> = (0..n).map(|_| Bits(rng.gen_range(0..(1u64 << n)))).collect();
    let mut labels = HashMap::new();
    labels.insert("p".to_string(), Bits(rng.gen_range(0..(1u64 << n))));
    labels.insert("q".to_string(), Bits(rng.gen_range(0..(1u64 << n))));
    KripkeStructure { states, succs, labels }
}

/// A random closed formula of depth at most `depth` with at most
/// `fix_budget` fixpoint binders.
pub fn random_closed_formula(
    rng: &mut ChaCha8Rng,
    depth: usize,
    fix_budget: &mut usize,
    counter: &mut usize,
    scope: &mut Vec<String>,
) -> MuFormula {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..4) {
            0 => MuFormula::True,
            1 => MuFormula::False,
            2 => MuFormula::Prop(if rng.gen_bool(0.5) { "p" } else { "q" }.into()),
            _ => {
                if scope.is_empty() {
                    MuFormula::Prop("p".into())
                } else {
                    MuFormula::Var(scope[rng.gen_range(0..scope.len())].clone())
                }
            }
        };
    }
    match rng.gen_range(0..5) {
        0 => MuFormula::And(
            Box::new(random_closed_formula(rng, depth - 1, fix_budget, counter, scope)),
            Box::new(random_closed_formula(rng, depth - 1, fix_budget, counter, scope)),
        ),
        1 => MuFormula::Or(
            Box::new(random_closed_formula(rng, depth - 1, fix_budget, counter, scope)),
            Box::new(random_closed_formula(rng, depth - 1, fix_budget, counter, scope)),
        ),
        2 => MuFormula::Diamond(Box::new(random_closed_formula(
            rng,
            depth - 1,
            fix_budget,
            counter,
            scope,
        ))),
        3 => MuFormula::Box(Box::new(random_closed_formula(
            rng,
            depth - 1,
            fix_budget,
            counter,
            scope,
        ))),
        _ => {
            if *fix_budget == 0 {
                return random_closed_formula(rng, depth - 1, fix_budget, counter, scope);
            }
            *fix_budget -= 1;
            *counter += 1;
            let name = format!("v{counter}");
            scope.push(name.clone());
            let body = random_closed_formula(rng, depth - 1, fix_budget, counter, scope);
            scope.pop();
            MuFormula::Fix(random_sign(rng), name, Box::new(body))
        }
    }
}

/// Random environments `lo ⊑ hi` for monotonicity spot checks.
pub fn random_env_pair<L: Lattice>(
    rng: &mut ChaCha8Rng,
    lat: &L,
    m: usize,
) -> (Vec<L::Elem>, Vec<L::Elem>) {
    let elems = lat.elements();
    let mut lo = Vec::with_capacity(m);
    let mut hi = Vec::with_capacity(m);
    for _ in 0..m {
        let a = elems[rng.gen_range(0..elems.len())].clone();
        let b = elems[rng.gen_range(0..elems.len())].clone();
        hi.push(lat.join2(&a, &b));
        lo.push(a);
    }
    (lo, hi)
}
