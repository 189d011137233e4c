//! Finite distributive lattices presented by Birkhoff duality: elements
//! are the downward-closed subsets of a finite poset of join-irreducibles,
//! stored as bitmasks.

use super::{Bits, Lattice};

/// A finite partial order, given by names and the reflexive-transitive
/// closure of a set of `p <= q` pairs.
#[derive(Clone, Debug)]
pub struct Poset {
    names: Vec<String>,
    /// `below[k]` is the bitmask of all `j` with `j <= k` (including `k`).
    below: Vec<Bits>,
}

impl Poset {
    /// Builds a poset from element names and `(lower, upper)` pairs,
    /// closing under reflexivity and transitivity.
    pub fn new(names: Vec<String>, pairs: &[(usize, usize)]) -> Self {
        let n = names.len();
        assert!(n <= 64, "poset supports at most 64 elements");
        let mut below: Vec<Bits> = (0..n).map(Bits::singleton).collect();
        for &(lo, hi) in pairs {
            assert!(lo < n && hi < n);
            below[hi].insert(lo);
        }
        // transitive closure
        loop {
            let mut changed = false;
            for k in 0..n {
                let mut acc = below[k];
                for j in below[k].iter() {
                    acc = acc.union(&below[j]);
                }
                if acc != below[k] {
                    below[k] = acc;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        Poset { names, below }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|s| s == name)
    }

    /// `↓p` as a bitmask.
    pub fn down(&self, p: usize) -> Bits {
        self.below[p]
    }

    pub fn le(&self, p: usize, q: usize) -> bool {
        self.below[q].contains(p)
    }
}

#[derive(Clone, Debug)]
pub struct DownsetLattice {
    poset: Poset,
}

impl DownsetLattice {
    pub fn new(poset: Poset) -> Self {
        DownsetLattice { poset }
    }

    pub fn poset(&self) -> &Poset {
        &self.poset
    }

    pub fn is_downclosed(&self, e: &Bits) -> bool {
        e.iter().all(|p| self.poset.down(p).subset_of(e))
    }

    /// Downward closure of a set of generators.
    pub fn downset_of<I: IntoIterator<Item = usize>>(&self, gens: I) -> Bits {
        let mut out = Bits::EMPTY;
        for p in gens {
            out = out.union(&self.poset.down(p));
        }
        out
    }

    /// The relative pseudo-complement `l ⇒ m`, the join of all `l'` with
    /// `l ⊓ l' ⊑ m`. On a downset lattice it is `{ p | ↓p ∩ l ⊆ m }`,
    /// which agrees with the enumeration of the whole carrier.
    pub fn residuate(&self, l: &Bits, m: &Bits) -> Bits {
        let mut out = Bits::EMPTY;
        for p in 0..self.poset.len() {
            if self.poset.down(p).intersection(l).subset_of(m) {
                out.insert(p);
            }
        }
        debug_assert!(self.is_downclosed(&out));
        out
    }
}

impl Lattice for DownsetLattice {
    type Elem = Bits;

    fn leq(&self, a: &Bits, b: &Bits) -> bool {
        a.subset_of(b)
    }

    fn bottom(&self) -> Bits {
        Bits::EMPTY
    }

    fn top(&self) -> Bits {
        Bits::full(self.poset.len())
    }

    fn join2(&self, a: &Bits, b: &Bits) -> Bits {
        a.union(b)
    }

    fn meet2(&self, a: &Bits, b: &Bits) -> Bits {
        a.intersection(b)
    }

    /// `{ ↓p | p ∈ P }`: exactly the join-irreducibles.
    fn basis(&self) -> Vec<Bits> {
        (0..self.poset.len()).map(|p| self.poset.down(p)).collect()
    }

    fn is_basis(&self, e: &Bits) -> bool {
        e.iter().any(|p| self.poset.down(p) == *e)
    }

    fn decompose(&self, l: &Bits) -> Vec<Bits> {
        l.iter().map(|p| self.poset.down(p)).collect()
    }

    fn height(&self) -> u64 {
        self.poset.len() as u64
    }

    fn carrier_size(&self) -> Option<u128> {
        if self.poset.len() > 32 {
            return None;
        }
        Some(self.elements().len() as u128)
    }

    fn elements(&self) -> Vec<Bits> {
        let n = self.poset.len();
        assert!(n <= 32, "downset enumeration capped at 32 irreducibles");
        (0..(1u64 << n))
            .map(Bits)
            .filter(|e| self.is_downclosed(e))
            .collect()
    }

    fn fmt_elem(&self, e: &Bits) -> String {
        let mut s = String::from("down(");
        let mut first = true;
        for p in e.iter() {
            if !first {
                s.push(' ');
            }
            s.push_str(&self.poset.names[p]);
            first = false;
        }
        s.push(')');
        s
    }
}
