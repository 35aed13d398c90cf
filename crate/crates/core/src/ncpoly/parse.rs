//! Recursive-descent parser for polynomial expressions.
//!
//! ```text
//! expr   := ['-'] term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := atom ('^' int)*
//! atom   := number | '(' re ('+'|'-') [im] 'i' ')' | gen | '(' expr ')'
//! gen    := ('p'|'q') [index]        index optional only when k = 1
//! ```

use super::{Generator, NcPoly};
use crate::error::{Error, Result};
use crate::C64;

pub fn parse_ncpoly(text: &str, k: usize) -> Result<NcPoly> {
    if k == 0 {
        return Err(Error::InvalidArgument("mode count k must be ≥ 1".into()));
    }
    let mut p = Parser { s: text.as_bytes(), pos: 0, k };
    let e = p.expr()?;
    p.ws();
    if p.pos < p.s.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    k: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<NcPoly> {
        let neg = self.eat(b'-');
        let mut acc = self.term()?;
        if neg {
            acc = acc.scale(C64::new(-1.0, 0.0));
        }
        loop {
            if self.eat(b'+') {
                acc = acc.add(&self.term()?);
            } else if self.eat(b'-') {
                acc = acc.add(&self.term()?.scale(C64::new(-1.0, 0.0)));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<NcPoly> {
        let mut acc = self.factor()?;
        while self.eat(b'*') {
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<NcPoly> {
        let mut base = self.atom()?;
        while self.eat(b'^') {
            self.ws();
            let start = self.pos;
            let e = self.digits().ok_or_else(|| self.err("expected integer exponent"))?;
            let e: u32 = e.parse().map_err(|_| Error::Parse { pos: start, msg: "exponent too large".into() })?;
            if e > 64 {
                return Err(Error::Parse { pos: start, msg: "exponent above 64".into() });
            }
            base = base.pow(e);
        }
        Ok(base)
    }

    fn digits(&mut self) -> Option<String> {
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        (self.pos > start).then(|| String::from_utf8_lossy(&self.s[start..self.pos]).into_owned())
    }

    /// Unsigned decimal literal with optional fraction and exponent.
    fn number(&mut self) -> Option<f64> {
        let start = self.pos;
        let int = self.digits();
        let mut frac = false;
        if self.s.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            frac = self.digits().is_some();
        }
        if int.is_none() && !frac {
            self.pos = start;
            return None;
        }
        if matches!(self.s.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.s.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if self.digits().is_none() {
                self.pos = save;
            }
        }
        std::str::from_utf8(&self.s[start..self.pos]).ok()?.parse().ok()
    }

    /// Tries `( [-]re (+|-) [im] i )`; rewinds on mismatch.
    fn complex_literal(&mut self) -> Option<C64> {
        let save = self.pos;
        let res = (|| {
            self.eat(b'(').then_some(())?;
            let sign_re = if self.eat(b'-') { -1.0 } else { 1.0 };
            self.ws();
            let re = self.number()?;
            let sign_im = if self.eat(b'+') {
                1.0
            } else if self.eat(b'-') {
                -1.0
            } else {
                return None;
            };
            self.ws();
            let im = self.number().unwrap_or(1.0);
            self.eat(b'i').then_some(())?;
            self.eat(b')').then_some(())?;
            Some(C64::new(sign_re * re, sign_im * im))
        })();
        if res.is_none() {
            self.pos = save;
        }
        res
    }

    fn atom(&mut self) -> Result<NcPoly> {
        match self.peek() {
            Some(b'(') => {
                if let Some(c) = self.complex_literal() {
                    return Ok(NcPoly::scalar(self.k, c));
                }
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c @ (b'p' | b'q')) => {
                let start = self.pos;
                self.pos += 1;
                let mode = match self.digits() {
                    Some(d) => {
                        let i: usize = d.parse().map_err(|_| Error::Parse { pos: start, msg: "bad index".into() })?;
                        if i == 0 || i > self.k {
                            return Err(Error::IndexOutOfRange { index: i, k: self.k });
                        }
                        i - 1
                    }
                    None if self.k == 1 => 0,
                    None => return Err(Error::Parse { pos: start, msg: "generator index required when k > 1".into() }),
                };
                let g = if c == b'p' { Generator::p(mode) } else { Generator::q(mode) };
                Ok(NcPoly::generator(self.k, g))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let v = self.number().ok_or_else(|| self.err("malformed number"))?;
                Ok(NcPoly::scalar(self.k, C64::new(v, 0.0)))
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}
