//! Instance builders shared by the benchmarks.

use fixgame_core::eqsys::{Equation, EquationSystem};
use fixgame_core::lattice::{Bits, PowersetLattice};
use fixgame_core::mucalc::{BoxOp, DiamondOp};
use fixgame_core::{Sign, Term};

/// The running μ/ν shape over a ring of `n` states: a reachability
/// equation under an invariant equation. Height and basis both grow
/// with `n`.
pub fn ring_system(n: usize) -> EquationSystem<PowersetLattice> {
    let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let lat = PowersetLattice::new(states);
    let succs: Vec<Bits> = (0..n).map(|i| Bits::singleton((i + 1) % n)).collect();
    EquationSystem::new(
        lat,
        vec![
            Equation {
                name: "x1".into(),
                sign: Sign::Mu,
                rhs: Term::Join(vec![
                    Term::Const(Bits::singleton(0)),
                    Term::apply(DiamondOp::new(succs.clone()), vec![Term::Var(0)]),
                ]),
            },
            Equation {
                name: "x2".into(),
                sign: Sign::Nu,
                rhs: Term::Meet(vec![
                    Term::Var(0),
                    Term::apply(BoxOp::new(succs), vec![Term::Var(1)]),
                ]),
            },
        ],
    )
}

/// A while program with `k` sequential increments feeding one loop.
pub fn chained_program(k: usize) -> String {
    let mut out = String::from("a := 1;\n");
    for i in 0..k {
        out.push_str(&format!("b{i} := a + {i};\n"));
    }
    out.push_str("while * do\n  a := a + 1\nod\n");
    out
}
