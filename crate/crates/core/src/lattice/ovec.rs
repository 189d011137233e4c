//! Ordinal vectors specialised to naturals, with the lexicographic and
//! truncated lexicographic orders, and the lifted variant with a greatest
//! element ★.
//!
//! The last component is the most significant one in all comparisons.
//! Indices into vectors are 0-based throughout the crate; `i` in
//! [`Lifted::cmp_suffix`] and [`min_trunc`] means "compare components
//! `i..m` only".

use crate::eqsys::Sign;
use std::cmp::Ordering;
use std::fmt;

/// An m-tuple of naturals bounded (in intent) by the lattice height.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct OrdinalVector(pub Vec<u64>);

impl OrdinalVector {
    pub fn zero(m: usize) -> Self {
        OrdinalVector(vec![0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Lexicographic comparison, last component most significant.
    pub fn cmp_lex(&self, other: &OrdinalVector) -> Ordering {
        self.cmp_suffix(other, 0)
    }

    /// Lexicographic comparison restricted to components `i..m`.
    pub fn cmp_suffix(&self, other: &OrdinalVector, i: usize) -> Ordering {
        debug_assert_eq!(self.0.len(), other.0.len());
        for k in (i..self.0.len()).rev() {
            match self.0[k].cmp(&other.0[k]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }

    /// Copy with all components below `i` zeroed.
    pub fn truncated(&self, i: usize) -> OrdinalVector {
        let mut v = self.0.clone();
        for slot in v.iter_mut().take(i) {
            *slot = 0;
        }
        OrdinalVector(v)
    }
}

impl fmt::Display for OrdinalVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// An ordinal vector or the distinguished top ★, the value lattice of
/// progress measures.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Lifted {
    Finite(OrdinalVector),
    Star,
}

impl Lifted {
    pub fn zero(m: usize) -> Self {
        Lifted::Finite(OrdinalVector::zero(m))
    }

    pub fn is_star(&self) -> bool {
        matches!(self, Lifted::Star)
    }

    /// Full lexicographic comparison; ★ is the greatest element.
    pub fn cmp_lex(&self, other: &Lifted) -> Ordering {
        self.cmp_suffix(other, 0)
    }

    /// Comparison under the truncated order on components `i..m`; ★ is
    /// greatest under every truncation.
    pub fn cmp_suffix(&self, other: &Lifted, i: usize) -> Ordering {
        match (self, other) {
            (Lifted::Star, Lifted::Star) => Ordering::Equal,
            (Lifted::Star, Lifted::Finite(_)) => Ordering::Greater,
            (Lifted::Finite(_), Lifted::Star) => Ordering::Less,
            (Lifted::Finite(a), Lifted::Finite(b)) => a.cmp_suffix(b, i),
        }
    }

    /// `v + δ_i^η`, saturating to ★ when the incremented component would
    /// exceed `height`. For ν the delta is the null vector. ★ absorbs.
    ///
    /// Saturation cannot change the least measure: its entries are bounded
    /// by the lattice height, so a sum past the bound can never be the
    /// value of a winning position.
    pub fn add_delta(&self, i: usize, sign: Sign, height: u64) -> Lifted {
        match self {
            Lifted::Star => Lifted::Star,
            Lifted::Finite(v) => match sign {
                Sign::Nu => Lifted::Finite(v.clone()),
                Sign::Mu => {
                    if v.0[i] + 1 > height {
                        Lifted::Star
                    } else {
                        let mut w = v.clone();
                        w.0[i] += 1;
                        Lifted::Finite(w)
                    }
                }
            },
        }
    }

    /// Copy with components below `i` zeroed; ★ stays ★.
    pub fn truncated(&self, i: usize) -> Lifted {
        match self {
            Lifted::Star => Lifted::Star,
            Lifted::Finite(v) => Lifted::Finite(v.truncated(i)),
        }
    }
}

impl fmt::Display for Lifted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lifted::Star => write!(f, "★"),
            Lifted::Finite(v) => write!(f, "{v}"),
        }
    }
}

/// `min_{⪯_i}` of a set: the ⪯-least suffix `i..m` among the non-★
/// members, with components below `i` zeroed. The minimum of the empty
/// set (or of `{★}` alone) is ★.
pub fn min_trunc<'a, I>(i: usize, set: I) -> Lifted
where
    I: IntoIterator<Item = &'a Lifted>,
{
    let mut best: Option<&OrdinalVector> = None;
    for v in set {
        if let Lifted::Finite(v) = v {
            match best {
                None => best = Some(v),
                Some(b) => {
                    if v.cmp_suffix(b, i) == Ordering::Less {
                        best = Some(v);
                    }
                }
            }
        }
    }
    match best {
        None => Lifted::Star,
        Some(v) => Lifted::Finite(v.truncated(i)),
    }
}

/// Supremum with respect to ⪯ of a finite family of lifted vectors of
/// length `m`. The empty supremum is the all-zero vector (the bottom of
/// the lifted lattice); any ★ member makes the result ★.
pub fn sup<'a, I>(m: usize, set: I) -> Lifted
where
    I: IntoIterator<Item = &'a Lifted>,
{
    let mut best = Lifted::zero(m);
    for v in set {
        if v.cmp_lex(&best) == Ordering::Greater {
            best = v.clone();
        }
        if best.is_star() {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(parts: &[u64]) -> Lifted {
        Lifted::Finite(OrdinalVector(parts.to_vec()))
    }

    #[test]
    fn lex_last_component_most_significant() {
        // (6,1,4,7) ≺_2 (5,2,4,7) and (6,1,4,7) =_3 (5,2,4,7), 1-based in
        // the usual notation; indices here are 0-based.
        let a = v(&[6, 1, 4, 7]);
        let b = v(&[5, 2, 4, 7]);
        assert_eq!(a.cmp_suffix(&b, 1), Ordering::Less);
        assert_eq!(a.cmp_suffix(&b, 2), Ordering::Equal);
        // on the full order the second component still decides
        assert_eq!(a.cmp_lex(&b), Ordering::Less);
        assert_eq!(v(&[1, 0]).cmp_lex(&v(&[0, 1])), Ordering::Less);
    }

    #[test]
    fn min_trunc_examples() {
        let set = [v(&[6, 1, 4, 7]), v(&[5, 2, 4, 7])];
        assert_eq!(min_trunc(1, &set), v(&[0, 1, 4, 7]));
        assert_eq!(min_trunc(2, &set), v(&[0, 0, 4, 7]));
        assert_eq!(min_trunc(2, []), Lifted::Star);
        assert_eq!(min_trunc(0, [&Lifted::Star].into_iter().cloned().collect::<Vec<_>>().iter()), Lifted::Star);
    }

    #[test]
    fn add_delta_examples() {
        assert_eq!(v(&[0, 0]).add_delta(0, Sign::Mu, 2), v(&[1, 0]));
        assert_eq!(v(&[2, 0]).add_delta(0, Sign::Mu, 2), Lifted::Star);
        assert_eq!(Lifted::Star.add_delta(1, Sign::Nu, 2), Lifted::Star);
        assert_eq!(v(&[1, 1]).add_delta(1, Sign::Nu, 2), v(&[1, 1]));
    }

    #[test]
    fn sup_rules() {
        assert_eq!(sup(2, []), v(&[0, 0]));
        assert_eq!(sup(2, &[v(&[1, 0]), v(&[0, 1])]), v(&[0, 1]));
        assert_eq!(sup(2, &[v(&[1, 0]), Lifted::Star]), Lifted::Star);
    }
}
