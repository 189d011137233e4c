//! Flat constant-propagation environments: either ⊤ or a total map from
//! program variables to `Int ∪ {UNDEF}`, where UNDEF acts as the
//! per-variable bottom of a flat order and ⊤ sits above everything.
//!
//! The order is reversed with respect to the usual program-analysis
//! convention: ⊥ (all UNDEF) means "nothing known constant" and is the
//! least element, so the all-ν analysis computes the most precise sound
//! result as a greatest fixpoint.
//!
//! The true basis `⊥[x↦z]` with `z` ranging over all integers is
//! infinite; a declared finite value universe makes `basis()`
//! enumerable. Membership tests (`is_basis`, `decompose`) accept any
//! single-variable environment regardless of the declared universe, so
//! game play stays sound even when the universe was truncated.

use super::Lattice;
use std::fmt::Write as _;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum FlatEnv {
    /// Total map, one slot per declared variable; `None` is UNDEF.
    Env(Vec<Option<i64>>),
    Top,
}

#[derive(Clone, Debug)]
pub struct FlatEnvLattice {
    vars: Vec<String>,
    universe: Vec<i64>,
    universe_truncated: bool,
}

impl FlatEnvLattice {
    pub fn new(vars: Vec<String>, mut universe: Vec<i64>) -> Self {
        universe.sort_unstable();
        universe.dedup();
        FlatEnvLattice { vars, universe, universe_truncated: false }
    }

    /// Marks the declared universe as a truncation of the closure; basis
    /// enumeration is then incomplete and operations requiring the full
    /// basis must refuse to run.
    pub fn with_truncated_universe(mut self, truncated: bool) -> Self {
        self.universe_truncated = truncated;
        self
    }

    pub fn universe_truncated(&self) -> bool {
        self.universe_truncated
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn universe(&self) -> &[i64] {
        &self.universe
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// `⊥[x↦z]`.
    pub fn point(&self, var: usize, value: i64) -> FlatEnv {
        let mut slots = vec![None; self.vars.len()];
        slots[var] = Some(value);
        FlatEnv::Env(slots)
    }
}

impl Lattice for FlatEnvLattice {
    type Elem = FlatEnv;

    fn leq(&self, a: &FlatEnv, b: &FlatEnv) -> bool {
        match (a, b) {
            (_, FlatEnv::Top) => true,
            (FlatEnv::Top, FlatEnv::Env(_)) => false,
            (FlatEnv::Env(a), FlatEnv::Env(b)) => a
                .iter()
                .zip(b.iter())
                .all(|(x, y)| x.is_none() || x == y),
        }
    }

    fn bottom(&self) -> FlatEnv {
        FlatEnv::Env(vec![None; self.vars.len()])
    }

    fn top(&self) -> FlatEnv {
        FlatEnv::Top
    }

    fn join2(&self, a: &FlatEnv, b: &FlatEnv) -> FlatEnv {
        match (a, b) {
            (FlatEnv::Top, _) | (_, FlatEnv::Top) => FlatEnv::Top,
            (FlatEnv::Env(a), FlatEnv::Env(b)) => {
                let mut out = Vec::with_capacity(a.len());
                for (x, y) in a.iter().zip(b.iter()) {
                    match (x, y) {
                        (None, v) => out.push(*v),
                        (v, None) => out.push(*v),
                        (Some(p), Some(q)) if p == q => out.push(Some(*p)),
                        // conflicting constants have no common upper bound
                        // below top
                        _ => return FlatEnv::Top,
                    }
                }
                FlatEnv::Env(out)
            }
        }
    }

    fn meet2(&self, a: &FlatEnv, b: &FlatEnv) -> FlatEnv {
        match (a, b) {
            (FlatEnv::Top, x) | (x, FlatEnv::Top) => x.clone(),
            (FlatEnv::Env(a), FlatEnv::Env(b)) => FlatEnv::Env(
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| if x == y { *x } else { None })
                    .collect(),
            ),
        }
    }

    fn basis(&self) -> Vec<FlatEnv> {
        let mut out = Vec::with_capacity(self.vars.len() * self.universe.len());
        for var in 0..self.vars.len() {
            for &z in &self.universe {
                out.push(self.point(var, z));
            }
        }
        out
    }

    fn is_basis(&self, e: &FlatEnv) -> bool {
        match e {
            FlatEnv::Top => false,
            FlatEnv::Env(slots) => slots.iter().filter(|s| s.is_some()).count() == 1,
        }
    }

    fn decompose(&self, l: &FlatEnv) -> Vec<FlatEnv> {
        match l {
            FlatEnv::Top => self.basis(),
            FlatEnv::Env(slots) => slots
                .iter()
                .enumerate()
                .filter_map(|(var, v)| v.map(|z| self.point(var, z)))
                .collect(),
        }
    }

    fn height(&self) -> u64 {
        self.vars.len() as u64 + 1
    }

    fn carrier_size(&self) -> Option<u128> {
        let per_var = self.universe.len() as u128 + 1;
        let mut size = 1u128;
        for _ in 0..self.vars.len() {
            size = size.checked_mul(per_var)?;
        }
        size.checked_add(1)
    }

    fn elements(&self) -> Vec<FlatEnv> {
        let mut out = vec![FlatEnv::Env(vec![None; self.vars.len()])];
        for var in 0..self.vars.len() {
            let mut next = Vec::new();
            for e in &out {
                let FlatEnv::Env(slots) = e else { unreachable!() };
                for &z in &self.universe {
                    let mut s = slots.clone();
                    s[var] = Some(z);
                    next.push(FlatEnv::Env(s));
                }
            }
            out.extend(next);
        }
        out.push(FlatEnv::Top);
        out.sort();
        out.dedup();
        out
    }

    fn fmt_elem(&self, e: &FlatEnv) -> String {
        match e {
            FlatEnv::Top => "top".into(),
            FlatEnv::Env(slots) => {
                if slots.iter().all(|s| s.is_none()) {
                    return "bot".into();
                }
                let mut s = String::from("bot[");
                let mut first = true;
                for (var, v) in slots.iter().enumerate() {
                    if let Some(z) = v {
                        if !first {
                            s.push(',');
                        }
                        let _ = write!(s, "{}->{}", self.vars[var], z);
                        first = false;
                    }
                }
                s.push(']');
                s
            }
        }
    }
}
