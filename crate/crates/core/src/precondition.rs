//! Boolean preconditions attached to catalog responses.
//!
//! Expressions are written in a small infix language:
//!
//! ```text
//! expr    := and ( "||" and )*
//! and     := unary ( "&&" unary )*
//! unary   := "!" unary | primary
//! primary := "true" | "false" | ident | "(" expr ")"
//! ident   := [a-z_][a-z0-9_]*
//! ```
//!
//! Facts that are absent from the fact map evaluate to `false`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named boolean facts describing the vehicle and its surroundings.
pub type Facts = BTreeMap<String, bool>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PreconditionExpr {
    Literal(bool),
    Fact(String),
    Not(Box<PreconditionExpr>),
    And(Box<PreconditionExpr>, Box<PreconditionExpr>),
    Or(Box<PreconditionExpr>, Box<PreconditionExpr>),
}

impl PreconditionExpr {
    pub const TRUE: PreconditionExpr = PreconditionExpr::Literal(true);

    pub fn fact(name: impl Into<String>) -> Self {
        Self::Fact(name.into())
    }

    pub fn negate(inner: PreconditionExpr) -> Self {
        Self::Not(Box::new(inner))
    }

    pub fn and(lhs: PreconditionExpr, rhs: PreconditionExpr) -> Self {
        Self::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: PreconditionExpr, rhs: PreconditionExpr) -> Self {
        Self::Or(Box::new(lhs), Box::new(rhs))
    }

    /// Evaluates the expression. Unknown facts read as `false`.
    pub fn evaluate(&self, facts: &Facts) -> bool {
        match self {
            Self::Literal(value) => *value,
            Self::Fact(name) => facts.get(name).copied().unwrap_or(false),
            Self::Not(inner) => !inner.evaluate(facts),
            Self::And(lhs, rhs) => lhs.evaluate(facts) && rhs.evaluate(facts),
            Self::Or(lhs, rhs) => lhs.evaluate(facts) || rhs.evaluate(facts),
        }
    }

    /// Fact names referenced anywhere in the expression, sorted and deduplicated.
    pub fn fact_names(&self) -> Vec<&str> {
        fn walk<'a>(expr: &'a PreconditionExpr, out: &mut Vec<&'a str>) {
            match expr {
                PreconditionExpr::Literal(_) => {}
                PreconditionExpr::Fact(name) => out.push(name),
                PreconditionExpr::Not(inner) => walk(inner, out),
                PreconditionExpr::And(lhs, rhs) | PreconditionExpr::Or(lhs, rhs) => {
                    walk(lhs, out);
                    walk(rhs, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Self::Or(..) => 1,
            Self::And(..) => 2,
            Self::Not(_) => 3,
            Self::Literal(_) | Self::Fact(_) => 4,
        }
    }
}

/// Convenience wrapper around [`PreconditionExpr::evaluate`].
pub fn evaluate_precondition(expr: &PreconditionExpr, facts: &Facts) -> bool {
    expr.evaluate(facts)
}

impl fmt::Display for PreconditionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Parenthesise a child when it binds looser than its parent. Right
        // operands of equal precedence are parenthesised as well so that
        // printing and re-parsing yields the same (left-associative) tree.
        fn child(f: &mut fmt::Formatter<'_>, expr: &PreconditionExpr, min_prec: u8) -> fmt::Result {
            if expr.precedence() < min_prec {
                write!(f, "({expr})")
            } else {
                write!(f, "{expr}")
            }
        }
        match self {
            Self::Literal(value) => write!(f, "{value}"),
            Self::Fact(name) => f.write_str(name),
            Self::Not(inner) => {
                f.write_str("!")?;
                child(f, inner, 3)
            }
            Self::And(lhs, rhs) => {
                child(f, lhs, 2)?;
                f.write_str(" && ")?;
                child(f, rhs, 3)
            }
            Self::Or(lhs, rhs) => {
                child(f, lhs, 1)?;
                f.write_str(" || ")?;
                child(f, rhs, 2)
            }
        }
    }
}

impl From<PreconditionExpr> for String {
    fn from(expr: PreconditionExpr) -> Self {
        expr.to_string()
    }
}

impl TryFrom<String> for PreconditionExpr {
    type Error = Error;

    fn try_from(source: String) -> Result<Self> {
        source.parse()
    }
}

impl FromStr for PreconditionExpr {
    type Err = Error;

    fn from_str(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            end: source.len(),
        };
        let expr = parser.or_expr()?;
        match parser.peek() {
            None => Ok(expr),
            Some((at, token)) => Err(syntax(*at, format!("unexpected {token}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    True,
    False,
    Not,
    And,
    Or,
    LParen,
    RParen,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(name) => write!(f, "identifier `{name}`"),
            Token::True => f.write_str("`true`"),
            Token::False => f.write_str("`false`"),
            Token::Not => f.write_str("`!`"),
            Token::And => f.write_str("`&&`"),
            Token::Or => f.write_str("`||`"),
            Token::LParen => f.write_str("`(`"),
            Token::RParen => f.write_str("`)`"),
        }
    }
}

fn syntax(position: usize, message: impl Into<String>) -> Error {
    Error::PreconditionSyntax {
        position,
        message: message.into(),
    }
}

fn tokenize(source: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'!' => {
                tokens.push((i, Token::Not));
                i += 1;
            }
            b'(' => {
                tokens.push((i, Token::LParen));
                i += 1;
            }
            b')' => {
                tokens.push((i, Token::RParen));
                i += 1;
            }
            b'&' | b'|' => {
                if bytes.get(i + 1) != Some(&c) {
                    return Err(syntax(i, format!("expected `{0}{0}`", c as char)));
                }
                tokens.push((i, if c == b'&' { Token::And } else { Token::Or }));
                i += 2;
            }
            b'a'..=b'z' | b'_' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i], b'a'..=b'z' | b'0'..=b'9' | b'_') {
                    i += 1;
                }
                let word = &source[start..i];
                let token = match word {
                    "true" => Token::True,
                    "false" => Token::False,
                    _ => Token::Ident(word.to_owned()),
                };
                tokens.push((start, token));
            }
            _ => {
                let ch = source[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, format!("unexpected character {ch:?}")));
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [(usize, Token)],
    pos: usize,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&(usize, Token)> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, token: &Token) -> bool {
        if matches!(self.peek(), Some((_, t)) if t == token) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn or_expr(&mut self) -> Result<PreconditionExpr> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Token::Or) {
            let rhs = self.and_expr()?;
            lhs = PreconditionExpr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<PreconditionExpr> {
        let mut lhs = self.unary()?;
        while self.eat(&Token::And) {
            let rhs = self.unary()?;
            lhs = PreconditionExpr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<PreconditionExpr> {
        if self.eat(&Token::Not) {
            return Ok(PreconditionExpr::negate(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<PreconditionExpr> {
        let Some((at, token)) = self.tokens.get(self.pos).cloned() else {
            return Err(syntax(self.end, "unexpected end of expression"));
        };
        self.pos += 1;
        match token {
            Token::True => Ok(PreconditionExpr::Literal(true)),
            Token::False => Ok(PreconditionExpr::Literal(false)),
            Token::Ident(name) => Ok(PreconditionExpr::Fact(name)),
            Token::LParen => {
                let inner = self.or_expr()?;
                if !self.eat(&Token::RParen) {
                    let at = self.peek().map_or(self.end, |(at, _)| *at);
                    return Err(syntax(at, "expected `)`"));
                }
                Ok(inner)
            }
            other => Err(syntax(at, format!("unexpected {other}"))),
        }
    }
}
