//! A small expression grammar for scalar nonlinearities over `{u, ux}` with
//! `+`, `-`, `*`, integer powers and real constants, expanded into a sparse
//! bivariate polynomial with symbolic first and second derivatives.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("unexpected character `{0}` at byte {1}")]
    UnexpectedChar(char, usize),
    #[error("unexpected token `{0}` at byte {1}")]
    UnexpectedToken(String, usize),
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("exponent must be a nonnegative integer, got `{0}`")]
    BadExponent(String),
    #[error("unknown symbol `{0}` (expected `u` or `ux`)")]
    UnknownSymbol(String),
}

/// Sparse polynomial `Σ c · u^a · ux^b` with exact rational-free arithmetic
/// on `f64` coefficients. Terms are keyed by `(a, b)`, so printing and
/// serialization are deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<(u32, u32), f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::default();
        p.add_term(c, 0, 0);
        p
    }

    pub fn var_u() -> Self {
        let mut p = Self::default();
        p.add_term(1.0, 1, 0);
        p
    }

    pub fn var_ux() -> Self {
        let mut p = Self::default();
        p.add_term(1.0, 0, 1);
        p
    }

    pub fn add_term(&mut self, c: f64, pu: u32, pux: u32) {
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry((pu, pux)).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&(pu, pux));
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(a, b), &c) in &other.terms {
            out.add_term(c, a, b);
        }
        out
    }

    pub fn neg(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(&k, &c)| (k, -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::default();
        for (&(a1, b1), &c1) in &self.terms {
            for (&(a2, b2), &c2) in &other.terms {
                out.add_term(c1 * c2, a1 + a2, b1 + b2);
            }
        }
        out
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut out = Self::constant(1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(_, &c)| c * s != 0.0)
                .map(|(&k, &c)| (k, c * s))
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree in `(u, ux)` jointly.
    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|&(a, b)| (a + b) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn depends_on_ux(&self) -> bool {
        self.terms.keys().any(|&(_, b)| b > 0)
    }

    pub fn eval(&self, u: f64, ux: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(a, b), &c)| c * u.powi(a as i32) * ux.powi(b as i32))
            .sum()
    }

    pub fn d_du(&self) -> Self {
        let mut out = Self::default();
        for (&(a, b), &c) in &self.terms {
            if a > 0 {
                out.add_term(c * a as f64, a - 1, b);
            }
        }
        out
    }

    pub fn d_dux(&self) -> Self {
        let mut out = Self::default();
        for (&(a, b), &c) in &self.terms {
            if b > 0 {
                out.add_term(c * b as f64, a, b - 1);
            }
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(a, b), &c) in &self.terms {
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
                first = false;
            } else {
                write!(f, "{}", if c < 0.0 { " - " } else { " + " })?;
            }
            let mag = c.abs();
            let mut wrote = false;
            if (mag - 1.0).abs() > 0.0 || (a == 0 && b == 0) {
                write!(f, "{mag}")?;
                wrote = true;
            }
            for (sym, p) in [("u", a), ("ux", b)] {
                if p > 0 {
                    if wrote {
                        write!(f, "*")?;
                    }
                    write!(f, "{sym}")?;
                    if p > 1 {
                        write!(f, "^{p}")?;
                    }
                    wrote = true;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Sym(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                out.push((Token::Minus, i));
                i += 1;
            }
            '*' | '·' => {
                out.push((Token::Star, i));
                i += c.len_utf8();
            }
            '^' => {
                out.push((Token::Caret, i));
                i += 1;
            }
            '(' => {
                out.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                out.push((Token::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_digit() || d == '.' {
                        i += 1;
                    } else if (d == 'e' || d == 'E')
                        && i + 1 < bytes.len()
                        && ((bytes[i + 1] as char).is_ascii_digit()
                            || bytes[i + 1] == b'+'
                            || bytes[i + 1] == b'-')
                    {
                        i += 2;
                    } else {
                        break;
                    }
                }
                let text = &src[start..i];
                let v = text
                    .parse::<f64>()
                    .map_err(|_| ExprError::UnexpectedToken(text.to_string(), start))?;
                out.push((Token::Num(v), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Token::Sym(src[start..i].to_string()), start));
            }
            other => return Err(ExprError::UnexpectedChar(other, i)),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<(Token, usize)> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Polynomial, ExprError> {
        let mut acc = self.term()?;
        while let Some(tok) = self.peek() {
            match tok {
                Token::Plus => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Token::Minus => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial, ExprError> {
        let mut acc = self.unary()?;
        while let Some(Token::Star) = self.peek() {
            self.pos += 1;
            acc = acc.mul(&self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Polynomial, ExprError> {
        if let Some(Token::Minus) = self.peek() {
            self.pos += 1;
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<Polynomial, ExprError> {
        let base = self.atom()?;
        if let Some(Token::Caret) = self.peek() {
            self.pos += 1;
            match self.next() {
                Some((Token::Num(v), _)) => {
                    if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
                        return Err(ExprError::BadExponent(v.to_string()));
                    }
                    Ok(base.powi(v as u32))
                }
                Some((t, pos)) => Err(ExprError::UnexpectedToken(format!("{t:?}"), pos)),
                None => Err(ExprError::UnexpectedEnd),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Polynomial, ExprError> {
        match self.next() {
            Some((Token::Num(v), _)) => Ok(Polynomial::constant(v)),
            Some((Token::Sym(s), _)) => match s.as_str() {
                "u" => Ok(Polynomial::var_u()),
                "ux" => Ok(Polynomial::var_ux()),
                _ => Err(ExprError::UnknownSymbol(s)),
            },
            Some((Token::LParen, _)) => {
                let inner = self.expr()?;
                match self.next() {
                    Some((Token::RParen, _)) => Ok(inner),
                    Some((t, pos)) => Err(ExprError::UnexpectedToken(format!("{t:?}"), pos)),
                    None => Err(ExprError::UnexpectedEnd),
                }
            }
            Some((t, pos)) => Err(ExprError::UnexpectedToken(format!("{t:?}"), pos)),
            None => Err(ExprError::UnexpectedEnd),
        }
    }
}

impl FromStr for Polynomial {
    type Err = ExprError;

    fn from_str(src: &str) -> Result<Self, Self::Err> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let poly = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            let (t, pos) = &parser.tokens[parser.pos];
            return Err(ExprError::UnexpectedToken(format!("{t:?}"), *pos));
        }
        Ok(poly)
    }
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
