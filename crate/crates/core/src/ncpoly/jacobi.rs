use super::SeqExpr;
use crate::error::{Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};

/// A coefficient sequence indexed from 1: either a rule or a dense array.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficients {
    Rule { re: SeqExpr, im: Option<SeqExpr> },
    Array(Vec<C64>),
}

impl Coefficients {
    pub fn rule(re: &str) -> Result<Self> {
        Ok(Coefficients::Rule { re: SeqExpr::parse(re)?, im: None })
    }

    /// Value at index `n ≥ 1`. Arrays are zero beyond their length.
    pub fn at(&self, n: usize) -> Result<C64> {
        debug_assert!(n >= 1);
        match self {
            Coefficients::Rule { re, im } => {
                let r = re.eval(n)?;
                let i = match im {
                    Some(e) => e.eval(n)?,
                    None => 0.0,
                };
                Ok(C64::new(r, i))
            }
            Coefficients::Array(v) => Ok(v.get(n - 1).copied().unwrap_or(C64::new(0.0, 0.0))),
        }
    }

    /// `|value|` at a real index, for rules queried far beyond `usize`.
    pub fn abs_at_f(&self, n: f64) -> Result<f64> {
        match self {
            Coefficients::Rule { re, im } => {
                let r = re.eval_f(n)?;
                let i = match im {
                    Some(e) => e.eval_f(n)?,
                    None => 0.0,
                };
                Ok(r.hypot(i))
            }
            Coefficients::Array(v) => Ok(if n >= 1.0 && ((n as usize) - 1) < v.len() { v[n as usize - 1].norm() } else { 0.0 }),
        }
    }

    pub fn bind(&self, name: &str, value: f64) -> Self {
        match self {
            Coefficients::Rule { re, im } => Coefficients::Rule { re: re.bind(name, value), im: im.as_ref().map(|e| e.bind(name, value)) },
            a => a.clone(),
        }
    }

    pub fn params(&self) -> Vec<String> {
        match self {
            Coefficients::Rule { re, im } => {
                let mut p = re.params();
                if let Some(e) = im {
                    for x in e.params() {
                        if !p.contains(&x) {
                            p.push(x);
                        }
                    }
                }
                p
            }
            Coefficients::Array(_) => Vec::new(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Coefficients::Rule { re, im: None } => re.to_string(),
            Coefficients::Rule { re, im: Some(i) } => format!("({re}) + i({i})"),
            Coefficients::Array(v) => format!("array[{}]", v.len()),
        }
    }
}

/// Tridiagonal symmetric matrix data: real diagonal `a_n`, complex
/// off-diagonal `b_n`, both indexed from 1.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiSpec {
    pub a: Coefficients,
    pub b: Coefficients,
    /// Array length, or `None` for rules.
    pub length_hint: Option<usize>,
    /// Index shift: entry `n` of this spec is entry `n + offset` of the data.
    pub offset: usize,
}

/// Serializable summary for reports.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct JacobiSummary {
    pub a: String,
    pub b: String,
}

impl JacobiSpec {
    pub fn from_rules(a: &str, b: &str) -> Result<Self> {
        Ok(JacobiSpec { a: Coefficients::rule(a)?, b: Coefficients::rule(b)?, length_hint: None, offset: 0 })
    }

    pub fn from_arrays(a: Vec<f64>, b: Vec<C64>) -> Self {
        let len = a.len().max(b.len());
        JacobiSpec {
            a: Coefficients::Array(a.into_iter().map(|x| C64::new(x, 0.0)).collect()),
            b: Coefficients::Array(b),
            length_hint: Some(len),
            offset: 0,
        }
    }

    /// Diagonal entry; the imaginary part is rejected since `a_n ∈ ℝ`.
    pub fn a_at(&self, n: usize) -> Result<f64> {
        let v = self.a.at(n + self.offset)?;
        if v.im != 0.0 {
            return Err(Error::Eval { n, msg: "diagonal entries must be real".into() });
        }
        Ok(v.re)
    }

    pub fn b_at(&self, n: usize) -> Result<C64> {
        self.b.at(n + self.offset)
    }

    pub fn b_abs_at_f(&self, n: f64) -> Result<f64> {
        self.b.abs_at_f(n + self.offset as f64)
    }

    pub fn bind(&self, name: &str, value: f64) -> Self {
        JacobiSpec { a: self.a.bind(name, value), b: self.b.bind(name, value), length_hint: self.length_hint, offset: self.offset }
    }

    pub fn summary(&self) -> JacobiSummary {
        JacobiSummary { a: self.a.describe(), b: self.b.describe() }
    }

    /// Indices `n < limit` with `b_n = 0`: the couplings at which the matrix
    /// splits into a direct sum.
    pub fn zero_couplings(&self, limit: usize) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for n in 1..limit {
            if self.b_at(n)? == C64::new(0.0, 0.0) {
                out.push(n);
            }
        }
        Ok(out)
    }

    /// The block after the last zero coupling below `limit`, re-indexed from
    /// 1, with the offset it starts at. Finite leading blocks are selfadjoint
    /// matrices and carry no deficiency; the infinite tail block governs.
    pub fn tail_block(&self, limit: usize) -> Result<(usize, JacobiSpec)> {
        let start = self.zero_couplings(limit)?.last().copied().unwrap_or(0);
        let mut block = self.clone();
        block.offset += start;
        block.length_hint = self.length_hint.map(|l| l.saturating_sub(start));
        Ok((start, block))
    }
}
