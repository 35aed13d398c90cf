//! Vectors over the graded basis.

use crate::basis::{self, offset, MultiIndex};
use crate::error::{Error, Result};
use crate::C64;
use std::fmt;
use std::sync::Arc;

/// Finitely supported vector, stored densely in graded order.
///
/// The amplitude buffer always ends on a full degree layer, and the top
/// layer is non-zero (trailing zero layers are trimmed), so `max_degree`
/// is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedVector {
    k: usize,
    layers: usize,
    amps: Vec<C64>,
}

impl GradedVector {
    pub fn zeros(k: usize) -> Self {
        assert!(k >= 1, "mode count must be positive");
        GradedVector { k, layers: 0, amps: Vec::new() }
    }

    /// Builds from amplitudes in basis order; pads to a full layer and trims.
    pub fn from_dense(k: usize, mut amps: Vec<C64>) -> Self {
        assert!(k >= 1, "mode count must be positive");
        let mut deg = 0;
        while offset(k, deg) < amps.len() {
            deg += 1;
        }
        amps.resize(offset(k, deg), C64::new(0.0, 0.0));
        let mut v = GradedVector { k, layers: deg, amps };
        v.trim();
        v
    }

    pub fn basis_state(alpha: &MultiIndex) -> Self {
        let mut v = Self::zeros(alpha.k());
        v.set(alpha, C64::new(1.0, 0.0));
        v
    }

    pub fn from_entries(k: usize, entries: impl IntoIterator<Item = (MultiIndex, C64)>) -> Self {
        let mut v = Self::zeros(k);
        for (a, c) in entries {
            assert_eq!(a.k(), k, "mode-count mismatch");
            let cur = v.get(&a.0);
            v.set(&a, cur + c);
        }
        v
    }

    fn trim(&mut self) {
        while let Some(d) = self.max_degree() {
            let lo = offset(self.k, d);
            if self.amps[lo..].iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                self.amps.truncate(lo);
                self.layers = d;
            } else {
                break;
            }
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Highest degree carrying a non-zero amplitude; `None` for the zero vector.
    pub fn max_degree(&self) -> Option<usize> {
        self.layers.checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn get(&self, alpha: &[u32]) -> C64 {
        let i = basis::rank(alpha);
        self.amps.get(i).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn get_index(&self, i: usize) -> C64 {
        self.amps.get(i).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn set(&mut self, alpha: &MultiIndex, value: C64) {
        let i = basis::rank(&alpha.0);
        if i >= self.amps.len() {
            if value == C64::new(0.0, 0.0) {
                return;
            }
            let deg = alpha.degree();
            self.amps.resize(offset(self.k, deg + 1), C64::new(0.0, 0.0));
            self.layers = deg + 1;
        }
        self.amps[i] = value;
        self.trim();
    }

    /// Non-zero entries in basis order.
    pub fn entries(&self) -> impl Iterator<Item = (MultiIndex, C64)> + '_ {
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .map(move |(i, c)| (basis::unrank(self.k, i), *c))
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `⟨self, other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &GradedVector) -> Result<C64> {
        self.check_k(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn check_k(&self, other: &GradedVector) -> Result<()> {
        if self.k != other.k {
            return Err(Error::ModeMismatch { expected: self.k, got: other.k });
        }
        Ok(())
    }

    pub fn scaled(&self, s: C64) -> GradedVector {
        let mut v = GradedVector { k: self.k, layers: self.layers, amps: self.amps.iter().map(|c| c * s).collect() };
        v.trim();
        v
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: C64, other: &GradedVector) -> Result<GradedVector> {
        self.check_k(other)?;
        let n = self.amps.len().max(other.amps.len());
        let amps = (0..n).map(|i| self.get_index(i) + s * other.get_index(i)).collect();
        Ok(GradedVector::from_dense(self.k, amps))
    }

    /// `P_n v`: keeps degrees `< n`.
    pub fn project_below(&self, n: usize) -> GradedVector {
        let cut = offset(self.k, n).min(self.amps.len());
        GradedVector::from_dense(self.k, self.amps[..cut].to_vec())
    }

    /// `Σ|v_α|²` over each degree layer, for degrees `0..=max_degree`.
    pub fn degree_masses(&self) -> Vec<f64> {
        match self.max_degree() {
            None => Vec::new(),
            Some(top) => (0..=top)
                .map(|d| self.amps[offset(self.k, d)..offset(self.k, d + 1)].iter().map(|c| c.norm_sqr()).sum())
                .collect(),
        }
    }

    /// Amplitudes for degrees in `lo..hi` (zero-padded beyond the support).
    pub fn degree_slice(&self, lo: usize, hi: usize) -> Vec<C64> {
        let (a, b) = (offset(self.k, lo), offset(self.k, hi));
        (a..b).map(|i| self.get_index(i)).collect()
    }
}

impl fmt::Display for GradedVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries().map(|(a, c)| format!("({}{:+}i)|{:?}⟩", c.re, c.im, a.0)).collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

type Rule = Arc<dyn Fn(&[u32]) -> C64 + Send + Sync>;

/// ℓ² vector given by a coefficient rule, with an analytic (or bounded)
/// total norm so truncations can report an honest tail bound.
#[derive(Clone)]
pub struct RuleVector {
    pub k: usize,
    pub name: String,
    rule: Rule,
    norm_sq: f64,
}

impl fmt::Debug for RuleVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RuleVector").field("k", &self.k).field("name", &self.name).finish()
    }
}

/// Truncated rule vector together with the mass left beyond the horizon.
#[derive(Clone, Debug)]
pub struct Materialized {
    pub vector: GradedVector,
    pub horizon: usize,
    pub tail_bound: f64,
}

impl RuleVector {
    /// `rule` must produce a vector whose squared norm is exactly `norm_sq`.
    pub fn new(k: usize, name: impl Into<String>, norm_sq: f64, rule: impl Fn(&[u32]) -> C64 + Send + Sync + 'static) -> Self {
        RuleVector { k, name: name.into(), rule: Arc::new(rule), norm_sq }
    }

    /// Unit vector with `x_α ∝ 2^{−|α|}`. Each degree layer `D` has
    /// `C(D+k−1,k−1)` states, so `Σ 4^{−|α|} = (4/3)^k`.
    pub fn geometric(k: usize) -> Self {
        let total = (4.0f64 / 3.0).powi(k as i32);
        let s = total.sqrt();
        RuleVector::new(k, "geometric", 1.0, move |a| {
            let d: u32 = a.iter().sum();
            C64::new(0.5f64.powi(d as i32) / s, 0.0)
        })
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn eval(&self, alpha: &[u32]) -> C64 {
        (self.rule)(alpha)
    }

    /// Keeps degrees `< horizon`.
    pub fn materialize(&self, horizon: usize) -> Materialized {
        let mut amps = Vec::with_capacity(offset(self.k, horizon));
        for d in 0..horizon {
            for a in basis::layer(self.k, d) {
                amps.push(self.eval(&a.0));
            }
        }
        let vector = GradedVector::from_dense(self.k, amps);
        let tail_bound = (self.norm_sq - vector.norm_sq()).max(0.0);
        Materialized { vector, horizon, tail_bound }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn trims_top_layers() {
        let v = GradedVector::from_dense(2, vec![c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert_eq!(v.max_degree(), Some(0));
        assert_eq!(v.amps().len(), 1);
        assert!(GradedVector::from_dense(1, vec![c(0.0); 4]).is_zero());
    }

    #[test]
    fn set_get_and_degree_masses() {
        let mut v = GradedVector::zeros(2);
        v.set(&MultiIndex(vec![1, 1]), c(2.0));
        assert_eq!(v.max_degree(), Some(2));
        assert_eq!(v.get(&[1, 1]), c(2.0));
        assert_eq!(v.degree_masses(), vec![0.0, 0.0, 4.0]);
        v.set(&MultiIndex(vec![1, 1]), c(0.0));
        assert!(v.is_zero());
    }

    #[test]
    fn geometric_probe_tail() {
        let g = RuleVector::geometric(2);
        let m = g.materialize(30);
        assert!((m.vector.norm_sq() + m.tail_bound - 1.0).abs() < 1e-14);
        assert!(m.tail_bound < 1e-12);
    }

    proptest! {
        #[test]
        fn projections_nest(vals in proptest::collection::vec(-1.0f64..1.0, 1..40), i in 0usize..10, j in 0usize..10) {
            let v = GradedVector::from_dense(2, vals.into_iter().map(c).collect());
            let (i, j) = (i.min(j), i.max(j));
            let a = v.project_below(i).norm();
            let b = v.project_below(j).norm();
            prop_assert!(a <= b + 1e-15 && b <= v.norm() + 1e-15);
        }
    }
}
