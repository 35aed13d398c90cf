//! Noncommutative polynomials in canonical pairs `p_i, q_i`, the coefficient
//! expression language for Jacobi matrices, and compilation to operators.

mod compile;
mod jacobi;
mod parse;
mod seqexpr;

pub use compile::{compile, compile_forced, compile_jacobi};
pub use jacobi::{Coefficients, JacobiSpec};
pub use parse::parse_ncpoly;
pub use seqexpr::SeqExpr;

use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GenKind {
    P,
    Q,
}

/// A canonical generator; `mode` is zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Generator {
    pub kind: GenKind,
    pub mode: usize,
}

impl Generator {
    pub fn p(mode: usize) -> Self {
        Generator { kind: GenKind::P, mode }
    }
    pub fn q(mode: usize) -> Self {
        Generator { kind: GenKind::Q, mode }
    }
}

pub type Word = Vec<Generator>;

/// Canonical noncommutative polynomial: like words merged, zero terms dropped,
/// terms sorted by (length, word).
#[derive(Clone, Debug, PartialEq)]
pub struct NcPoly {
    pub k: usize,
    terms: Vec<(C64, Word)>,
}

fn word_key(w: &Word) -> (usize, Word) {
    (w.len(), w.clone())
}

impl NcPoly {
    pub fn new(k: usize, terms: impl IntoIterator<Item = (C64, Word)>) -> Self {
        let mut map: BTreeMap<(usize, Word), C64> = BTreeMap::new();
        for (c, w) in terms {
            *map.entry(word_key(&w)).or_insert(C64::new(0.0, 0.0)) += c;
        }
        let terms = map.into_iter().filter(|(_, c)| c.re != 0.0 || c.im != 0.0).map(|((_, w), c)| (c, w)).collect();
        NcPoly { k, terms }
    }

    pub fn zero(k: usize) -> Self {
        NcPoly { k, terms: Vec::new() }
    }

    pub fn scalar(k: usize, c: C64) -> Self {
        NcPoly::new(k, [(c, Vec::new())])
    }

    pub fn generator(k: usize, g: Generator) -> Self {
        NcPoly::new(k, [(C64::new(1.0, 0.0), vec![g])])
    }

    pub fn terms(&self) -> &[(C64, Word)] {
        &self.terms
    }

    /// Maximum word length.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(_, w)| w.len()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &NcPoly) -> NcPoly {
        NcPoly::new(self.k, self.terms.iter().chain(other.terms.iter()).cloned())
    }

    pub fn scale(&self, s: C64) -> NcPoly {
        NcPoly::new(self.k, self.terms.iter().map(|(c, w)| (c * s, w.clone())))
    }

    pub fn mul(&self, other: &NcPoly) -> NcPoly {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (c1, w1) in &self.terms {
            for (c2, w2) in &other.terms {
                let mut w = w1.clone();
                w.extend_from_slice(w2);
                out.push((c1 * c2, w));
            }
        }
        NcPoly::new(self.k, out)
    }

    pub fn pow(&self, e: u32) -> NcPoly {
        let mut acc = NcPoly::scalar(self.k, C64::new(1.0, 0.0));
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Reverse every word and conjugate every coefficient.
    pub fn formal_adjoint(&self) -> NcPoly {
        NcPoly::new(
            self.k,
            self.terms.iter().map(|(c, w)| (c.conj(), w.iter().rev().copied().collect())),
        )
    }

    pub fn is_symmetric(&self) -> bool {
        self.formal_adjoint() == *self
    }

    /// Terms whose adjoint partner is missing or has a different coefficient.
    pub fn asymmetric_terms(&self) -> Vec<(C64, Word)> {
        let adj = self.formal_adjoint();
        self.terms.iter().filter(|t| !adj.terms.contains(t)).cloned().collect()
    }

    fn fmt_gen(&self, g: &Generator) -> String {
        let letter = match g.kind {
            GenKind::P => 'p',
            GenKind::Q => 'q',
        };
        if self.k == 1 {
            letter.to_string()
        } else {
            format!("{}{}", letter, g.mode + 1)
        }
    }
}

fn fmt_scalar(c: C64) -> String {
    // Round-trippable: `{:?}` on f64 prints the shortest exact representation.
    if c.im == 0.0 {
        format!("{:?}", c.re)
    } else {
        format!("({:?}{}{:?}i)", c.re, if c.im < 0.0 { "-" } else { "+" }, c.im.abs())
    }
}

impl fmt::Display for NcPoly {
    /// Prints in the parser's grammar so that parse(print(P)) == P.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(c, w)| {
                let mut factors = vec![fmt_scalar(*c)];
                factors.extend(w.iter().map(|g| self.fmt_gen(g)));
                format!("({})", factors.join("*"))
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(s: &str, k: usize) -> NcPoly {
        parse_ncpoly(s, k).unwrap()
    }

    #[test]
    fn adjoint_examples() {
        let pqp = poly("p*q*p", 1);
        assert!(pqp.is_symmetric());
        let ipq = poly("(0+1i)*p*q", 1);
        assert_eq!(ipq.formal_adjoint(), poly("(0-1i)*q*p", 1));
        assert!(!ipq.is_symmetric());
        assert!(poly("p*q + q*p", 1).is_symmetric());
    }

    #[test]
    fn print_parse_roundtrip() {
        for (s, k) in [("p*q*p", 1), ("p^2 - q^4", 1), ("p1*p1 + q2*q2", 2), ("(0.5-2i)*p1*q2 + 3", 2), ("0", 1)] {
            let p = poly(s, k);
            assert_eq!(poly(&p.to_string(), k), p, "{s} -> {p}");
        }
    }
}
