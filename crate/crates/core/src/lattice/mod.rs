//! Lattice abstraction and the concrete finite lattices used by the
//! frontends, plus the ordinal-vector orders used by progress measures.
//!
//! The engine targets finite lattices only. On those every element is
//! compact, so the way-below relation restricted to basis elements
//! coincides with the lattice order; [`Lattice::way_below`] is kept as a
//! named operation so the game and measure code reads as intended.

mod downset;
mod flatenv;
pub mod ovec;
mod powerset;
mod product;

pub use downset::{DownsetLattice, Poset};
pub use flatenv::{FlatEnv, FlatEnvLattice};
pub use ovec::{min_trunc, Lifted, OrdinalVector};
pub use powerset::PowersetLattice;
pub use product::ProductLattice;

use std::fmt::Debug;
use std::hash::Hash;

/// A finite complete lattice with a distinguished basis (excluding bottom).
///
/// Elements are immutable values with structural equality and a canonical
/// `Ord` used for deterministic set iteration; the canonical order is
/// unrelated to the lattice order `leq`.
pub trait Lattice: Clone {
    type Elem: Clone + Eq + Ord + Hash + Debug;

    /// The lattice order.
    fn leq(&self, a: &Self::Elem, b: &Self::Elem) -> bool;

    fn bottom(&self) -> Self::Elem;
    fn top(&self) -> Self::Elem;

    fn join2(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn meet2(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;

    /// Join of a finite family; empty join is bottom.
    fn join<'a, I>(&self, elems: I) -> Self::Elem
    where
        Self::Elem: 'a,
        I: IntoIterator<Item = &'a Self::Elem>,
    {
        elems.into_iter().fold(self.bottom(), |acc, e| self.join2(&acc, e))
    }

    /// Meet of a finite family; empty meet is top.
    fn meet<'a, I>(&self, elems: I) -> Self::Elem
    where
        Self::Elem: 'a,
        I: IntoIterator<Item = &'a Self::Elem>,
    {
        elems.into_iter().fold(self.top(), |acc, e| self.meet2(&acc, e))
    }

    /// The chosen basis, in canonical order. Never contains bottom.
    fn basis(&self) -> Vec<Self::Elem>;

    /// Whether `e` is a member of the chosen basis.
    fn is_basis(&self, e: &Self::Elem) -> bool;

    /// Way-below restricted to basis elements on the left. All lattices
    /// here are finite, hence algebraic with a compact basis, and the
    /// relation coincides with `leq`.
    fn way_below(&self, b: &Self::Elem, l: &Self::Elem) -> bool {
        self.leq(b, l)
    }

    /// All basis elements below `l`; the join of the result is `l`.
    fn decompose(&self, l: &Self::Elem) -> Vec<Self::Elem> {
        self.basis().into_iter().filter(|b| self.leq(b, l)).collect()
    }

    /// Length in strict covers of the longest strictly ascending chain.
    fn height(&self) -> u64;

    /// Number of elements of the carrier, when it fits in a `u128`.
    fn carrier_size(&self) -> Option<u128>;

    /// Every element of the carrier, in canonical order. Callers must
    /// check `carrier_size` first; this is an enumeration for oracles and
    /// small instances, not a data structure.
    fn elements(&self) -> Vec<Self::Elem>;

    /// Render an element using the lattice's naming context.
    fn fmt_elem(&self, e: &Self::Elem) -> String;
}

/// Bitmask-backed set over a ground collection of at most 64 items.
///
/// Used for powerset elements (over states) and downset elements (over a
/// poset of join-irreducibles). The interpretation of bit positions is
/// owned by the lattice.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Bits(pub u64);

impl Bits {
    pub const EMPTY: Bits = Bits(0);

    pub fn singleton(i: usize) -> Bits {
        Bits(1u64 << i)
    }

    pub fn full(n: usize) -> Bits {
        assert!(n <= 64, "ground set larger than 64");
        if n == 64 {
            Bits(!0)
        } else {
            Bits((1u64 << n) - 1)
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0 & (1u64 << i) != 0
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1u64 << i;
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn subset_of(&self, other: &Bits) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(&self, other: &Bits) -> Bits {
        Bits(self.0 | other.0)
    }

    pub fn intersection(&self, other: &Bits) -> Bits {
        Bits(self.0 & other.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..64).filter(move |i| self.contains(*i))
    }
}
