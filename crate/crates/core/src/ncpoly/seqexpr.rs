//! Coefficient-sequence expressions: `n`, numeric literals, named parameters,
//! `+ - * / ^`, and the functions `sqrt`, `log`, `exp`, `abs`.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    N,
    Param(String),
    Neg(Box<Node>),
    Bin(u8, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sqrt,
    Log,
    Exp,
    Abs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeqExpr {
    source: String,
    root: Node,
    bound: BTreeMap<String, f64>,
}

impl fmt::Display for SeqExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl SeqExpr {
    pub fn parse(text: &str) -> Result<SeqExpr> {
        let mut p = P { s: text.as_bytes(), pos: 0 };
        let root = p.sum()?;
        p.ws();
        if p.pos < p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(SeqExpr { source: text.to_string(), root, bound: BTreeMap::new() })
    }

    pub fn constant(v: f64) -> SeqExpr {
        SeqExpr { source: format!("{v:?}"), root: Node::Num(v), bound: BTreeMap::new() }
    }

    /// Names of parameters other than `n`.
    pub fn params(&self) -> Vec<String> {
        fn walk(n: &Node, out: &mut Vec<String>) {
            match n {
                Node::Param(s) => {
                    if !out.contains(s) {
                        out.push(s.clone())
                    }
                }
                Node::Neg(a) | Node::Call(_, a) => walk(a, out),
                Node::Bin(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out.retain(|p| !self.bound.contains_key(p));
        out
    }

    pub fn bind(&self, name: &str, value: f64) -> SeqExpr {
        let mut e = self.clone();
        e.bound.insert(name.to_string(), value);
        e
    }

    /// Evaluates at index `n`; the index is real so rules can be queried far
    /// beyond the integer range.
    pub fn eval_f(&self, n: f64) -> Result<f64> {
        let v = self.go(&self.root, n)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval { n: n as usize, msg: format!("`{}` is not finite ({v})", self.source) })
        }
    }

    pub fn eval(&self, n: usize) -> Result<f64> {
        self.eval_f(n as f64)
    }

    fn go(&self, node: &Node, n: f64) -> Result<f64> {
        Ok(match node {
            Node::Num(v) => *v,
            Node::N => n,
            Node::Param(s) => *self
                .bound
                .get(s)
                .ok_or_else(|| Error::Eval { n: n as usize, msg: format!("unbound parameter `{s}`") })?,
            Node::Neg(a) => -self.go(a, n)?,
            Node::Bin(op, a, b) => {
                let (x, y) = (self.go(a, n)?, self.go(b, n)?);
                match op {
                    b'+' => x + y,
                    b'-' => x - y,
                    b'*' => x * y,
                    b'/' => x / y,
                    _ => {
                        // Integer powers stay exact for negative bases.
                        if y.fract() == 0.0 && y.abs() <= 64.0 {
                            x.powi(y as i32)
                        } else {
                            x.powf(y)
                        }
                    }
                }
            }
            Node::Call(f, a) => {
                let x = self.go(a, n)?;
                match f {
                    Func::Sqrt => x.sqrt(),
                    Func::Log => x.ln(),
                    Func::Exp => x.exp(),
                    Func::Abs => x.abs(),
                }
            }
        })
    }
}

struct P<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> P<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.into() }
    }
    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }
    fn eat(&mut self, c: u8) -> bool {
        self.ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Node> {
        let mut acc = self.product()?;
        loop {
            if self.eat(b'+') {
                acc = Node::Bin(b'+', Box::new(acc), Box::new(self.product()?));
            } else if self.eat(b'-') {
                acc = Node::Bin(b'-', Box::new(acc), Box::new(self.product()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn product(&mut self) -> Result<Node> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = Node::Bin(b'*', Box::new(acc), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                acc = Node::Bin(b'/', Box::new(acc), Box::new(self.unary()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    // Right associative; binds tighter than unary minus on its left: -n^2 = -(n^2).
    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(b'^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        self.ws();
        let start = self.pos;
        match self.s.get(self.pos).copied() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
                    self.pos += 1;
                }
                if matches!(self.s.get(self.pos), Some(b'e') | Some(b'E')) {
                    let save = self.pos;
                    self.pos += 1;
                    if matches!(self.s.get(self.pos), Some(b'+') | Some(b'-')) {
                        self.pos += 1;
                    }
                    let d0 = self.pos;
                    while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                    if self.pos == d0 {
                        self.pos = save;
                    }
                }
                let txt = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                txt.parse().map(Node::Num).map_err(|_| Error::Parse { pos: start, msg: format!("bad number `{txt}`") })
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap().to_string();
                let func = match name.as_str() {
                    "sqrt" => Some(Func::Sqrt),
                    "log" | "ln" => Some(Func::Log),
                    "exp" => Some(Func::Exp),
                    "abs" => Some(Func::Abs),
                    _ => None,
                };
                if let Some(f) = func {
                    if !self.eat(b'(') {
                        return Err(self.err("expected '(' after function name"));
                    }
                    let arg = self.sum()?;
                    if !self.eat(b')') {
                        return Err(self.err("expected ')'"));
                    }
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                Ok(if name == "n" { Node::N } else { Node::Param(name) })
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, n: usize) -> f64 {
        SeqExpr::parse(s).unwrap().eval(n).unwrap()
    }

    #[test]
    fn arithmetic() {
        assert_eq!(ev("n^2", 7), 49.0);
        assert_eq!(ev("-n^2", 3), -9.0);
        assert_eq!(ev("2^3^2", 1), 512.0);
        assert_eq!(ev("sqrt((n+1)/2)", 7), 2.0);
        assert_eq!(ev("n*log(n+1)^2", 1), 2f64.ln().powi(2));
        assert_eq!(ev("1e3/n", 10), 100.0);
        assert_eq!(ev("0", 10), 0.0);
    }

    #[test]
    fn params() {
        let e = SeqExpr::parse("n^alpha").unwrap();
        assert_eq!(e.params(), vec!["alpha".to_string()]);
        assert!(e.eval(2).is_err());
        let b = e.bind("alpha", 0.5);
        assert!(b.params().is_empty());
        assert_eq!(b.eval(4).unwrap(), 2.0);
    }

    #[test]
    fn errors() {
        assert!(SeqExpr::parse("n +").is_err());
        assert!(SeqExpr::parse("sqrt n").is_err());
        assert!(matches!(SeqExpr::parse("1/(n-1)").unwrap().eval(1), Err(Error::Eval { n: 1, .. })));
    }
}
