//! Parser for conductor expressions.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr  := INT | INT sign INT '*' 'sqrt' '(' INT ')'
//!        | '(' INT sign INT '*' 'sqrt' '(' INT ')' ')' '/' '2'
//! sign  := '+' | '-'
//! ```
//!
//! The first integer may carry a leading minus sign.

use rug::{Integer, Rational};

use crate::error::{Error, Result};

/// A parsed expression `p + q*sqrt(radicand)` with rational `p`, `q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdealExpr {
    pub p: Rational,
    pub q: Rational,
    /// `None` for a bare integer.
    pub radicand: Option<Integer>,
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        // columns are 1-based positions in the original string
        let chars = src
            .chars()
            .enumerate()
            .filter(|(_, c)| !c.is_whitespace())
            .map(|(i, c)| (i + 1, c))
            .collect();
        Cursor { chars, pos: 0, src }
    }

    fn column(&self) -> usize {
        self.chars.get(self.pos).map(|&(i, _)| i).unwrap_or(self.src.chars().count() + 1)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { position: self.column(), message: message.into() })
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => self.err(format!("expected '{c}', found '{x}'")),
            None => self.err(format!("expected '{c}', found end of input")),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<()> {
        for c in word.chars() {
            self.expect(c)?;
        }
        Ok(())
    }

    fn int(&mut self, allow_sign: bool) -> Result<Integer> {
        let mut text = String::new();
        if allow_sign && self.peek() == Some('-') {
            text.push('-');
            self.pos += 1;
        }
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            text.push(c);
            self.pos += 1;
        }
        if text.is_empty() || text == "-" {
            return match self.peek() {
                Some(c) => self.err(format!("expected an integer, found '{c}'")),
                None => self.err("expected an integer, found end of input"),
            };
        }
        Ok(text.parse::<Integer>().expect("digits parse as an integer"))
    }

    fn sign(&mut self) -> Result<i32> {
        match self.peek() {
            Some('+') => {
                self.pos += 1;
                Ok(1)
            }
            Some('-') => {
                self.pos += 1;
                Ok(-1)
            }
            Some(c) => self.err(format!("expected '+' or '-', found '{c}'")),
            None => self.err("expected '+' or '-', found end of input"),
        }
    }

    /// `INT sign INT * sqrt(INT)` after the leading integer has been read.
    fn surd_tail(&mut self, first: Integer) -> Result<(Integer, Integer, Integer)> {
        let s = self.sign()?;
        let coef = self.int(false)? * s;
        self.expect('*')?;
        self.keyword("sqrt")?;
        self.expect('(')?;
        let col = self.column();
        let radicand = self.int(false)?;
        if radicand <= 1 {
            return Err(Error::Parse { position: col, message: "radicand must exceed 1".into() });
        }
        self.expect(')')?;
        Ok((first, coef, radicand))
    }

    fn finish(&self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(c) => self.err(format!("unexpected trailing '{c}'")),
        }
    }
}

/// Parses a conductor expression; see the module docs for the grammar.
pub fn parse_ideal_expr(src: &str) -> Result<IdealExpr> {
    let mut cur = Cursor::new(src);
    if cur.peek().is_none() {
        return cur.err("empty expression");
    }
    if cur.peek() == Some('(') {
        cur.pos += 1;
        let first = cur.int(true)?;
        let (p, q, r) = cur.surd_tail(first)?;
        cur.expect(')')?;
        cur.expect('/')?;
        let col = cur.column();
        let den = cur.int(false)?;
        if den != 2 {
            return Err(Error::Parse { position: col, message: "only division by 2 is allowed".into() });
        }
        cur.finish()?;
        return Ok(IdealExpr {
            p: Rational::from((p, 2)),
            q: Rational::from((q, 2)),
            radicand: Some(r),
        });
    }
    let first = cur.int(true)?;
    if cur.peek().is_none() {
        return Ok(IdealExpr { p: Rational::from(first), q: Rational::new(), radicand: None });
    }
    let (p, q, r) = cur.surd_tail(first)?;
    cur.finish()?;
    Ok(IdealExpr { p: Rational::from(p), q: Rational::from(q), radicand: Some(r) })
}
