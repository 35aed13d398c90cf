//! Banded operators on the graded basis.

use crate::basis::{self, graded_basis_size, MultiIndex};
use crate::error::{Error, Result};
use crate::ncpoly::{GenKind, Generator, JacobiSpec, NcPoly, Word};
use crate::vector::GradedVector;
use crate::C64;
use nalgebra::DMatrix;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub(crate) enum Action {
    Words(Vec<(C64, Word)>),
    Jacobi(JacobiSpec),
}

/// Exact banded action on basis states, with band order `d`: every matrix
/// element `⟨β|S|α⟩` with `||β|−|α|| > d` vanishes and some element at shift
/// `d` does not.
#[derive(Clone)]
pub struct GradedOperator {
    k: usize,
    band_order: usize,
    hermitian: bool,
    label: String,
    action: Arc<Action>,
}

impl fmt::Debug for GradedOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GradedOperator")
            .field("label", &self.label)
            .field("k", &self.k)
            .field("band_order", &self.band_order)
            .field("hermitian", &self.hermitian)
            .finish()
    }
}

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Applies one generator (`q = (a+a†)/√2`, `p = (a−a†)/(i√2)`) to a state.
fn apply_generator(g: Generator, alpha: &[u32], c: C64, out: &mut Vec<(Vec<u32>, C64)>) {
    let ai = alpha[g.mode];
    let (down, up) = match g.kind {
        // coefficient of a and of a†
        GenKind::Q => (C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)),
        GenKind::P => (C64::new(0.0, -FRAC_1_SQRT_2), C64::new(0.0, FRAC_1_SQRT_2)),
    };
    if ai > 0 {
        let mut b = alpha.to_vec();
        b[g.mode] -= 1;
        out.push((b, c * (down * (ai as f64).sqrt())));
    }
    let mut b = alpha.to_vec();
    b[g.mode] += 1;
    out.push((b, c * (up * ((ai + 1) as f64).sqrt())));
}

fn merge(mut v: Vec<(Vec<u32>, C64)>) -> Vec<(Vec<u32>, C64)> {
    v.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<(Vec<u32>, C64)> = Vec::with_capacity(v.len());
    for (s, c) in v {
        match out.last_mut() {
            Some((t, acc)) if *t == s => *acc += c,
            _ => out.push((s, c)),
        }
    }
    out
}

/// `w|α⟩` for a word, rightmost generator first.
pub(crate) fn apply_word(word: &[Generator], alpha: &[u32]) -> Vec<(Vec<u32>, C64)> {
    let mut cur = vec![(alpha.to_vec(), C64::new(1.0, 0.0))];
    for g in word.iter().rev() {
        let mut next = Vec::with_capacity(cur.len() * 2);
        for (s, c) in &cur {
            apply_generator(*g, s, *c, &mut next);
        }
        cur = merge(next);
    }
    cur
}

impl GradedOperator {
    pub(crate) fn from_words(k: usize, terms: Vec<(C64, Word)>, hermitian: bool, label: String) -> Self {
        let mut op = GradedOperator { k, band_order: 0, hermitian, label, action: Arc::new(Action::Words(terms)) };
        op.band_order = op.detect_band_order();
        op
    }

    pub(crate) fn from_jacobi(spec: JacobiSpec, label: String) -> Result<Self> {
        let mut nonzero = false;
        for n in 1..=256 {
            if spec.b_at(n)? != ZERO {
                nonzero = true;
                break;
            }
        }
        // validate the diagonal near the start as well
        for n in 1..=256 {
            spec.a_at(n)?;
        }
        Ok(GradedOperator { k: 1, band_order: nonzero as usize, hermitian: true, label, action: Arc::new(Action::Jacobi(spec)) })
    }

    pub fn identity(k: usize) -> Self {
        Self::from_words(k, vec![(C64::new(1.0, 0.0), Vec::new())], true, "1".into())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn band_order(&self) -> usize {
        self.band_order
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn jacobi(&self) -> Option<&JacobiSpec> {
        match &*self.action {
            Action::Jacobi(s) => Some(s),
            _ => None,
        }
    }

    /// True for operators whose basis action is tridiagonal in the Jacobi sense
    /// (k = 1, band order ≤ 1).
    pub fn is_tridiagonal(&self) -> bool {
        self.k == 1 && self.band_order <= 1
    }

    /// Largest word length for word operators, 1 for Jacobi operators.
    fn nominal_order(&self) -> usize {
        match &*self.action {
            Action::Words(t) => t.iter().map(|(_, w)| w.len()).max().unwrap_or(0),
            Action::Jacobi(_) => 1,
        }
    }

    /// The column `S|α⟩` as (state, amplitude) pairs in basis order, exact
    /// zeros removed.
    pub fn column(&self, alpha: &[u32]) -> Result<Vec<(MultiIndex, C64)>> {
        if alpha.len() != self.k {
            return Err(Error::ModeMismatch { expected: self.k, got: alpha.len() });
        }
        let mut out: Vec<(Vec<u32>, C64)> = match &*self.action {
            Action::Words(terms) => {
                let mut acc = Vec::new();
                for (c, w) in terms {
                    acc.extend(apply_word(w, alpha).into_iter().map(|(s, a)| (s, a * c)));
                }
                merge(acc)
            }
            Action::Jacobi(spec) => {
                // column for e_{D+1}: b̄_D e_D + a_{D+1} e_{D+1} + b_{D+1} e_{D+2}
                let d = alpha[0] as usize;
                let mut v = Vec::with_capacity(3);
                if d >= 1 {
                    v.push((vec![d as u32 - 1], spec.b_at(d)?.conj()));
                }
                v.push((vec![d as u32], C64::new(spec.a_at(d + 1)?, 0.0)));
                v.push((vec![d as u32 + 1], spec.b_at(d + 1)?));
                v
            }
        };
        out.retain(|(_, c)| c.re != 0.0 || c.im != 0.0);
        let mut out: Vec<(MultiIndex, C64)> = out.into_iter().map(|(s, c)| (MultiIndex(s), c)).collect();
        out.sort_by_key(|(s, _)| basis::rank(&s.0));
        Ok(out)
    }

    /// Column with rank indices instead of states.
    pub fn column_ranked(&self, alpha: &[u32]) -> Result<Vec<(usize, C64)>> {
        Ok(self.column(alpha)?.into_iter().map(|(s, c)| (basis::rank(&s.0), c)).collect())
    }

    pub fn matrix_element(&self, beta: &[u32], alpha: &[u32]) -> Result<C64> {
        Ok(self.column(alpha)?.into_iter().find(|(s, _)| s.0 == beta).map(|(_, c)| c).unwrap_or(ZERO))
    }

    pub fn apply(&self, v: &GradedVector) -> Result<GradedVector> {
        if v.k() != self.k {
            return Err(Error::ModeMismatch { expected: self.k, got: v.k() });
        }
        let top = match v.max_degree() {
            None => return Ok(GradedVector::zeros(self.k)),
            Some(t) => t,
        };
        let size = graded_basis_size(self.k, top + self.band_order + 1)?;
        let mut out = vec![ZERO; size];
        for deg in 0..=top {
            let lo = basis::offset(self.k, deg);
            for (j, alpha) in basis::layer(self.k, deg).into_iter().enumerate() {
                let x = v.get_index(lo + j);
                if x == ZERO {
                    continue;
                }
                for (s, c) in self.column(&alpha.0)? {
                    let dd = s.degree();
                    // the band-order contract is exact
                    assert!(dd.abs_diff(deg) <= self.band_order, "band order violated by {:?} -> {:?}", alpha.0, s.0);
                    out[basis::rank(&s.0)] += c * x;
                }
            }
        }
        Ok(GradedVector::from_dense(self.k, out))
    }

    /// Finite section over the states with `|α| < n`.
    pub fn truncate(&self, n: usize) -> Result<DMatrix<C64>> {
        let dim = graded_basis_size(self.k, n)?;
        if dim > 1 << 26 {
            return Err(Error::Overflow { k: self.k, n });
        }
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for deg in 0..n {
            let lo = basis::offset(self.k, deg);
            for (j, alpha) in basis::layer(self.k, deg).into_iter().enumerate() {
                for (r, c) in self.column_ranked(&alpha.0)? {
                    if r < dim {
                        m[(r, lo + j)] = c;
                    }
                }
            }
        }
        Ok(m)
    }

    /// Tight band order. Word operators are probed on a grid of generic
    /// states (all components ≥ word length, so no ladder truncation at 0),
    /// where a non-cancelled shift shows up as a non-zero matrix element.
    fn detect_band_order(&self) -> usize {
        let l = self.nominal_order();
        if l == 0 {
            return 0;
        }
        let lo = l as u32;
        let axis: Vec<u32> = if self.k <= 2 { (lo..=2 * lo + 1).collect() } else { vec![lo, lo + 1, 2 * lo + 1] };
        let mut best = 0;
        let mut idx = vec![0usize; self.k];
        loop {
            let alpha: Vec<u32> = idx.iter().map(|&i| axis[i]).collect();
            let deg: usize = alpha.iter().map(|&a| a as usize).sum();
            let col = self.column(&alpha).expect("word action cannot fail");
            let scale = col.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max);
            for (s, c) in &col {
                if c.norm() > 1e-12 * scale {
                    best = best.max(s.degree().abs_diff(deg));
                }
            }
            // odometer over the grid
            let mut m = 0;
            loop {
                if m == self.k {
                    return best;
                }
                idx[m] += 1;
                if idx[m] < axis.len() {
                    break;
                }
                idx[m] = 0;
                m += 1;
            }
        }
    }
}

impl NcPoly {
    /// `S|α⟩` evaluated directly from the polynomial, bypassing compilation.
    pub fn apply_to_state(&self, alpha: &[u32]) -> Vec<(Vec<u32>, C64)> {
        let mut acc = Vec::new();
        for (c, w) in self.terms() {
            acc.extend(apply_word(w, alpha).into_iter().map(|(s, a)| (s, a * c)));
        }
        merge(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::{compile, compile_jacobi, parse_ncpoly};
    use proptest::prelude::*;

    fn op(s: &str, k: usize) -> GradedOperator {
        compile(&parse_ncpoly(s, k).unwrap()).unwrap()
    }

    #[test]
    fn q_on_ground_state() {
        let q = op("q", 1);
        let h0 = GradedVector::basis_state(&MultiIndex(vec![0]));
        let out = q.apply(&h0).unwrap();
        assert_eq!(out.max_degree(), Some(1));
        assert_eq!(out.get(&[1]), C64::new(FRAC_1_SQRT_2, 0.0));
        assert_eq!(out.get(&[0]), ZERO);
    }

    #[test]
    fn identity_is_identity() {
        let v = GradedVector::from_dense(2, (0..10).map(|i| C64::new(i as f64, -1.0)).collect());
        assert_eq!(GradedOperator::identity(2).apply(&v).unwrap(), v);
        let t = GradedOperator::identity(3).truncate(3).unwrap();
        assert_eq!(t, DMatrix::identity(10, 10));
    }

    #[test]
    fn truncations() {
        let h = op("p^2 + q^2", 1).truncate(4).unwrap();
        let mut want = DMatrix::from_element(4, 4, ZERO);
        for i in 0..4 {
            want[(i, i)] = C64::new(2.0 * i as f64 + 1.0, 0.0);
        }
        assert!((h - want).iter().all(|c| c.norm() < 1e-14));

        let free = compile_jacobi(&JacobiSpec::from_rules("0", "1").unwrap()).unwrap();
        let t = free.truncate(3).unwrap();
        let one = C64::new(1.0, 0.0);
        let want = DMatrix::from_row_slice(3, 3, &[ZERO, one, ZERO, one, ZERO, one, ZERO, one, ZERO]);
        assert_eq!(t, want);
    }

    #[test]
    fn band_orders() {
        assert_eq!(op("p*q*p", 1).band_order(), 3);
        assert_eq!(op("p^2 - q^4", 1).band_order(), 4);
        assert_eq!(op("p^2 + q^2", 1).band_order(), 0);
        assert_eq!(op("p1*q2 + q2*p1", 2).band_order(), 2);
        let diag = compile_jacobi(&JacobiSpec::from_rules("n", "0").unwrap()).unwrap();
        assert_eq!(diag.band_order(), 0);
    }

    fn vec_strategy(k: usize, len: usize) -> impl Strategy<Value = GradedVector> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..len)
            .prop_map(move |v| GradedVector::from_dense(k, v.into_iter().map(|(a, b)| C64::new(a, b)).collect()))
    }

    proptest! {
        #[test]
        fn hermitian_pairing(u in vec_strategy(2, 30), v in vec_strategy(2, 30),
                             which in 0usize..4) {
            let polys = ["p1*q1*p1 + q2^3", "p1^2 - q2^4 + p1*q2 + q2*p1", "q1*q2*q1", "p1^2*q2^2 + q2^2*p1^2"];
            let s = op(polys[which], 2);
            let su = s.apply(&u).unwrap();
            let sv = s.apply(&v).unwrap();
            let lhs = su.inner(&v).unwrap();
            let rhs = u.inner(&sv).unwrap();
            let scale = su.norm() * v.norm() + u.norm() * sv.norm();
            prop_assert!((lhs - rhs).norm() <= 1e-10 * scale.max(1e-300));
            // band-order contract
            if let (Some(a), Some(b)) = (u.max_degree(), su.max_degree()) {
                prop_assert!(b <= a + s.band_order());
            }
        }
    }
}
