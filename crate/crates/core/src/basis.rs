//! Graded multi-index basis.
//!
//! States are ordered by degree; inside a degree layer by descending first
//! component, then recursively on the remaining components. For k=2 this is
//! (0,0),(1,0),(0,1),(2,0),(1,1),(0,2),…  — a graded lexicographic order.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(k: usize) -> Self {
        MultiIndex(vec![0; k])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

/// `C(n, r)` with overflow detection.
pub(crate) fn binomial(n: usize, r: usize) -> Option<usize> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

/// Number of states with `|α| < n` in `k` modes: `C(n−1+k, k)`.
pub fn graded_basis_size(k: usize, n: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidArgument("mode count k must be ≥ 1".into()));
    }
    if n == 0 {
        return Ok(0);
    }
    let top = (n - 1).checked_add(k).ok_or(Error::Overflow { k, n })?;
    binomial(top, k).ok_or(Error::Overflow { k, n })
}

/// Number of states of exact degree `deg`: `C(deg+k−1, k−1)`.
pub(crate) fn layer_size(k: usize, deg: usize) -> usize {
    binomial(deg + k - 1, k - 1).expect("layer size overflow")
}

/// Index offset of the first state of degree `deg` (unchecked variant).
pub(crate) fn offset(k: usize, deg: usize) -> usize {
    graded_basis_size(k, deg).expect("basis size overflow")
}

/// Position of `alpha` in the graded order.
pub fn rank(alpha: &[u32]) -> usize {
    let k = alpha.len();
    let deg: usize = alpha.iter().map(|&a| a as usize).sum();
    offset(k, deg) + rank_in_layer(alpha, deg)
}

fn rank_in_layer(alpha: &[u32], deg: usize) -> usize {
    // Components with larger α_1 come first; count states preceding alpha.
    let k = alpha.len();
    if k == 1 {
        return 0;
    }
    let a1 = alpha[0] as usize;
    // states with first component > a1: Σ_{f=a1+1}^{deg} layer_size(k-1, deg-f)
    //   = number of (k-1)-tuples with degree < deg-a1 = graded_basis_size(k-1, deg-a1)
    offset(k - 1, deg - a1) + rank_in_layer(&alpha[1..], deg - a1)
}

/// Inverse of [`rank`].
pub fn unrank(k: usize, mut index: usize) -> MultiIndex {
    let mut deg = 0;
    loop {
        let s = layer_size(k, deg);
        if index < s {
            break;
        }
        index -= s;
        deg += 1;
    }
    let mut out = Vec::with_capacity(k);
    let mut rem = deg;
    for m in 0..k {
        if m == k - 1 {
            out.push(rem as u32);
            break;
        }
        // choose first component f from rem downwards
        let mut f = rem;
        loop {
            let s = layer_size(k - m - 1, rem - f);
            if index < s {
                break;
            }
            index -= s;
            f -= 1;
        }
        out.push(f as u32);
        rem -= f;
    }
    MultiIndex(out)
}

/// All states of exact degree `deg`, in basis order.
pub fn layer(k: usize, deg: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(layer_size(k, deg));
    let mut cur = vec![0u32; k];
    fill_layer(&mut cur, 0, deg, &mut out);
    out
}

fn fill_layer(cur: &mut Vec<u32>, pos: usize, rem: usize, out: &mut Vec<MultiIndex>) {
    let k = cur.len();
    if pos == k - 1 {
        cur[pos] = rem as u32;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for f in (0..=rem).rev() {
        cur[pos] = f as u32;
        fill_layer(cur, pos + 1, rem - f, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes() {
        assert_eq!(graded_basis_size(1, 5).unwrap(), 5);
        assert_eq!(graded_basis_size(2, 3).unwrap(), 6);
        assert_eq!(graded_basis_size(3, 1).unwrap(), 1);
        assert_eq!(graded_basis_size(4, 0).unwrap(), 0);
        assert!(matches!(graded_basis_size(40, usize::MAX / 2), Err(Error::Overflow { .. })));
    }

    #[test]
    fn k2_order() {
        let all: Vec<_> = (0..6).map(|i| unrank(2, i).0).collect();
        assert_eq!(all, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn layers_concatenate_to_order() {
        for k in 1..=4 {
            let mut idx = 0;
            for d in 0..6 {
                for a in layer(k, d) {
                    assert_eq!(rank(&a.0), idx);
                    idx += 1;
                }
            }
            assert_eq!(idx, graded_basis_size(k, 6).unwrap());
        }
    }

    // Brute-force count oracle.
    fn count_brute(k: usize, n: usize) -> usize {
        fn rec(k: usize, budget: usize) -> usize {
            if k == 0 {
                return 1;
            }
            (0..=budget).map(|a| rec(k - 1, budget - a)).sum()
        }
        if n == 0 {
            0
        } else {
            rec(k, n - 1)
        }
    }

    proptest! {
        #[test]
        fn size_matches_enumeration(k in 1usize..5, n in 0usize..9) {
            prop_assert_eq!(graded_basis_size(k, n).unwrap(), count_brute(k, n));
        }

        #[test]
        fn rank_roundtrip(k in 1usize..5, i in 0usize..500) {
            let a = unrank(k, i);
            prop_assert_eq!(rank(&a.0), i);
        }
    }
}
