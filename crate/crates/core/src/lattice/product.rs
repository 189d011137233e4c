//! Finite powers `L^n` with the pointwise order. Used as the lattice of
//! valuations `S → L` in latticed μ-calculi; the basis is the family
//! `b_x` (inner basis element `b` at position `x`, ⊥ elsewhere), which
//! are the join-irreducibles of `L^n` whenever the inner basis consists
//! of join-irreducibles.

use super::Lattice;

#[derive(Clone, Debug)]
pub struct ProductLattice<L: Lattice> {
    inner: L,
    arity: usize,
}

impl<L: Lattice> ProductLattice<L> {
    pub fn new(inner: L, arity: usize) -> Self {
        ProductLattice { inner, arity }
    }

    pub fn inner(&self) -> &L {
        &self.inner
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// `b_x`: inner element `b` at position `x`, ⊥ elsewhere.
    pub fn at(&self, x: usize, b: L::Elem) -> Vec<L::Elem> {
        assert!(x < self.arity);
        let mut v = vec![self.inner.bottom(); self.arity];
        v[x] = b;
        v
    }
}

impl<L: Lattice> Lattice for ProductLattice<L> {
    type Elem = Vec<L::Elem>;

    fn leq(&self, a: &Self::Elem, b: &Self::Elem) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| self.inner.leq(x, y))
    }

    fn bottom(&self) -> Self::Elem {
        vec![self.inner.bottom(); self.arity]
    }

    fn top(&self) -> Self::Elem {
        vec![self.inner.top(); self.arity]
    }

    fn join2(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        a.iter().zip(b.iter()).map(|(x, y)| self.inner.join2(x, y)).collect()
    }

    fn meet2(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        a.iter().zip(b.iter()).map(|(x, y)| self.inner.meet2(x, y)).collect()
    }

    fn basis(&self) -> Vec<Self::Elem> {
        let mut out = Vec::new();
        for x in 0..self.arity {
            for b in self.inner.basis() {
                out.push(self.at(x, b));
            }
        }
        out
    }

    fn is_basis(&self, e: &Self::Elem) -> bool {
        let mut found = false;
        for (x, v) in e.iter().enumerate() {
            if *v != self.inner.bottom() {
                if found || !self.inner.is_basis(&e[x]) {
                    return false;
                }
                found = true;
            }
        }
        found
    }

    fn decompose(&self, l: &Self::Elem) -> Vec<Self::Elem> {
        let mut out = Vec::new();
        for (x, v) in l.iter().enumerate() {
            for b in self.inner.decompose(v) {
                out.push(self.at(x, b));
            }
        }
        out
    }

    fn height(&self) -> u64 {
        self.inner.height() * self.arity as u64
    }

    fn carrier_size(&self) -> Option<u128> {
        let inner = self.inner.carrier_size()?;
        let mut size = 1u128;
        for _ in 0..self.arity {
            size = size.checked_mul(inner)?;
        }
        Some(size)
    }

    fn elements(&self) -> Vec<Self::Elem> {
        let inner = self.inner.elements();
        let mut out: Vec<Self::Elem> = vec![vec![]];
        for _ in 0..self.arity {
            let mut next = Vec::with_capacity(out.len() * inner.len());
            for v in &out {
                for e in &inner {
                    let mut w = v.clone();
                    w.push(e.clone());
                    next.push(w);
                }
            }
            out = next;
        }
        out
    }

    fn fmt_elem(&self, e: &Self::Elem) -> String {
        let parts: Vec<String> = e.iter().map(|v| self.inner.fmt_elem(v)).collect();
        format!("({})", parts.join(", "))
    }
}
