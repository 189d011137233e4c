//! Powerset lattice over a finite set of named states, elements as
//! bitmasks. Capped at 64 states; the engine is meant for desk-scale
//! verification problems.

use super::{Bits, Lattice};

#[derive(Clone, Debug)]
pub struct PowersetLattice {
    states: Vec<String>,
}

impl PowersetLattice {
    pub fn new(states: Vec<String>) -> Self {
        assert!(states.len() <= 64, "powerset lattice supports at most 64 states");
        PowersetLattice { states }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn singleton(&self, i: usize) -> Bits {
        assert!(i < self.states.len());
        Bits::singleton(i)
    }

    pub fn set_of<I: IntoIterator<Item = usize>>(&self, members: I) -> Bits {
        let mut b = Bits::EMPTY;
        for i in members {
            assert!(i < self.states.len());
            b.insert(i);
        }
        b
    }
}

impl Lattice for PowersetLattice {
    type Elem = Bits;

    fn leq(&self, a: &Bits, b: &Bits) -> bool {
        a.subset_of(b)
    }

    fn bottom(&self) -> Bits {
        Bits::EMPTY
    }

    fn top(&self) -> Bits {
        Bits::full(self.states.len())
    }

    fn join2(&self, a: &Bits, b: &Bits) -> Bits {
        a.union(b)
    }

    fn meet2(&self, a: &Bits, b: &Bits) -> Bits {
        a.intersection(b)
    }

    fn basis(&self) -> Vec<Bits> {
        (0..self.states.len()).map(Bits::singleton).collect()
    }

    fn is_basis(&self, e: &Bits) -> bool {
        e.len() == 1 && e.subset_of(&self.top())
    }

    fn decompose(&self, l: &Bits) -> Vec<Bits> {
        l.iter().map(Bits::singleton).collect()
    }

    fn height(&self) -> u64 {
        self.states.len() as u64
    }

    fn carrier_size(&self) -> Option<u128> {
        Some(1u128 << self.states.len())
    }

    fn elements(&self) -> Vec<Bits> {
        let n = self.states.len();
        (0..(1u64 << n)).map(Bits).collect()
    }

    fn fmt_elem(&self, e: &Bits) -> String {
        let mut s = String::from("{");
        let mut first = true;
        for i in e.iter() {
            if !first {
                s.push(',');
            }
            s.push_str(&self.states[i]);
            first = false;
        }
        s.push('}');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> PowersetLattice {
        PowersetLattice::new(vec!["a".into(), "b".into()])
    }

    #[test]
    fn leq_is_subset() {
        let l = two();
        let a = l.singleton(0);
        let ab = l.top();
        assert!(l.leq(&a, &ab));
        assert!(!l.leq(&ab, &a));
    }

    #[test]
    fn way_below_equals_leq_on_basis() {
        let l = two();
        let a = l.singleton(0);
        assert!(l.way_below(&a, &l.top()));
        assert!(!l.way_below(&a, &l.bottom()));
    }

    #[test]
    fn decompose_is_singletons() {
        let l = two();
        assert_eq!(l.decompose(&l.top()), vec![l.singleton(0), l.singleton(1)]);
        assert!(l.decompose(&l.bottom()).is_empty());
    }

    #[test]
    fn formatting() {
        let l = two();
        assert_eq!(l.fmt_elem(&l.top()), "{a,b}");
        assert_eq!(l.fmt_elem(&l.bottom()), "{}");
    }
}
