use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Largest torus dimension supported by the bitmask representation.
pub const MAX_DIM: usize = 16;

/// Strictly increasing set of coordinate axes, stored as a bitmask.
///
/// Axes are 0-based. `dx_I` for `I = {i_1 < ... < i_p}` is the basis form
/// `dx_{i_1} ∧ ... ∧ dx_{i_p}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex(u32);

impl MultiIndex {
    pub fn new(axes: &[usize]) -> Result<Self> {
        let mut bits = 0u32;
        for (pos, &a) in axes.iter().enumerate() {
            if a >= MAX_DIM || (pos > 0 && axes[pos - 1] >= a) {
                return Err(Error::InvalidMultiIndex(axes.to_vec()));
            }
            bits |= 1 << a;
        }
        Ok(MultiIndex(bits))
    }

    pub const fn empty() -> Self {
        MultiIndex(0)
    }

    pub const fn from_bits(bits: u32) -> Self {
        MultiIndex(bits)
    }

    pub fn axis(a: usize) -> Self {
        assert!(a < MAX_DIM);
        MultiIndex(1 << a)
    }

    /// `dx_0 ∧ ... ∧ dx_{n-1}`.
    pub fn top(n: usize) -> Self {
        MultiIndex(((1u64 << n) - 1) as u32)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub const fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, a: usize) -> bool {
        self.0 & (1 << a) != 0
    }

    pub fn axes(self) -> Vec<usize> {
        (0..MAX_DIM).filter(|&a| self.contains(a)).collect()
    }

    pub fn fits(self, n: usize) -> bool {
        n >= 32 || self.0 >> n == 0
    }

    pub fn complement(self, n: usize) -> Self {
        MultiIndex(Self::top(n).0 & !self.0)
    }

    pub fn shifted(self, offset: usize) -> Self {
        MultiIndex(self.0 << offset)
    }

    /// `dx_I ∧ dx_J = sign · dx_{I ∪ J}`, or `None` when the sets overlap.
    pub fn wedge(self, other: Self) -> Option<(i32, Self)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        // Transpositions: pairs (i in I, j in J) with i > j.
        let mut swaps = 0u32;
        let mut rest = other.0;
        while rest != 0 {
            let j = rest.trailing_zeros();
            rest &= rest - 1;
            swaps += (self.0 >> (j + 1)).count_ones();
        }
        let sign = if swaps % 2 == 0 { 1 } else { -1 };
        Some((sign, MultiIndex(self.0 | other.0)))
    }

    /// All multi-indices of degree `p` in dimension `n`, lexicographic.
    pub fn of_degree(n: usize, p: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(p);
        fn rec(start: usize, n: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
            if cur.len() == p {
                out.push(MultiIndex(cur.iter().fold(0, |b, &a| b | (1 << a))));
                return;
            }
            for a in start..n {
                if n - a < p - cur.len() {
                    break;
                }
                cur.push(a);
                rec(a + 1, n, p, cur, out);
                cur.pop();
            }
        }
        rec(0, n, p, &mut current, &mut out);
        out
    }

    /// All multi-indices in dimension `n`, ordered by degree then lexicographically.
    pub fn all(n: usize) -> Vec<Self> {
        (0..=n).flat_map(|p| Self::of_degree(n, p)).collect()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.axes().cmp(&other.axes()))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return write!(f, "1");
        }
        write!(f, "dx")?;
        for a in self.axes() {
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted() {
        assert!(MultiIndex::new(&[1, 0]).is_err());
        assert!(MultiIndex::new(&[1, 1]).is_err());
        assert!(MultiIndex::new(&[0, 2]).is_ok());
    }

    #[test]
    fn wedge_signs() {
        let d = MultiIndex::axis;
        assert_eq!(d(0).wedge(d(1)), Some((1, MultiIndex::new(&[0, 1]).unwrap())));
        assert_eq!(d(1).wedge(d(0)), Some((-1, MultiIndex::new(&[0, 1]).unwrap())));
        assert_eq!(d(0).wedge(d(0)), None);
        let i = MultiIndex::new(&[1, 3]).unwrap();
        let j = MultiIndex::new(&[0, 2]).unwrap();
        // dx1 dx3 dx0 dx2 -> dx0 dx1 dx2 dx3 needs 3 transpositions
        assert_eq!(i.wedge(j).unwrap().0, -1);
    }

    #[test]
    fn counts() {
        assert_eq!(MultiIndex::all(4).len(), 16);
        assert_eq!(MultiIndex::of_degree(5, 2).len(), 10);
        let all = MultiIndex::all(3);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
    }
}
