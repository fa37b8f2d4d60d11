//! Small expression grammar for constraint definitions.
//!
//! Hypothesis files describe constraint components as strings over a fixed
//! grammar: variables `x1..xn` (with `x` accepted as an alias for `x1`),
//! decimal constants, `+`, `-`, `*`, parentheses, and `^` with non-negative
//! integer exponents. Examples: `0.5 - x1`, `1 - x1^2`, `x1*x2 - 0.25`.
//!
//! Expressions are parsed once into an AST and evaluated pointwise when a
//! constraint is tabulated on a grid or queried at an off-grid observation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unexpected character {0:?} at byte {1}")]
    UnexpectedChar(char, usize),
    #[error("unexpected token {0:?}")]
    UnexpectedToken(String),
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("invalid number {0:?}")]
    InvalidNumber(String),
    #[error("unknown identifier {0:?} (variables are x1..xn)")]
    UnknownIdentifier(String),
    #[error("exponent must be a non-negative integer literal, got {0:?}")]
    BadExponent(String),
}

/// Parsed constraint expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    /// Zero-based variable index: `x1` is `Var(0)`.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    /// Parses an expression from its string form.
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.parse_sum()?;
        match parser.peek() {
            None => Ok(expr),
            Some(tok) => Err(ExprError::UnexpectedToken(format!("{tok:?}"))),
        }
    }

    /// Evaluates at a point. Variable indices beyond `x.len()` are a caller
    /// contract violation.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => {
                assert!(
                    *i < x.len(),
                    "expression references x{} but the point has dimension {}",
                    i + 1,
                    x.len()
                );
                x[*i]
            }
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Pow(e, k) => e.eval(x).powi(*k as i32),
        }
    }

    /// Largest variable index referenced, plus one; 0 for constant expressions.
    pub fn dimension(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(e) | Expr::Pow(e, _) => e.dimension(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.dimension().max(b.dimension())
            }
        }
    }

    /// Builds `sum_j coeffs[j] * exprs[j]` as an AST. Used to recombine
    /// constraint components linearly.
    pub fn linear_combination(coeffs: &[f64], exprs: &[Expr]) -> Expr {
        assert_eq!(coeffs.len(), exprs.len());
        let mut acc: Option<Expr> = None;
        for (&c, e) in coeffs.iter().zip(exprs) {
            if c == 0.0 {
                continue;
            }
            let term = Expr::Mul(Box::new(Expr::Const(c)), Box::new(e.clone()));
            acc = Some(match acc {
                None => term,
                Some(prev) => Expr::Add(Box::new(prev), Box::new(term)),
            });
        }
        acc.unwrap_or(Expr::Const(0.0))
    }

    /// Convenience: the affine form `mu - x1`.
    pub fn mean_constraint(mu: f64) -> Expr {
        Expr::Sub(Box::new(Expr::Const(mu)), Box::new(Expr::Var(0)))
    }

    /// Convenience: the slack form `1 - x1^2`.
    pub fn unit_second_moment_slack() -> Expr {
        Expr::Sub(
            Box::new(Expr::Const(1.0)),
            Box::new(Expr::Pow(Box::new(Expr::Var(0)), 2)),
        )
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Pow(e, k) => write!(f, "({e})^{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Var(usize),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ExprError> {
    let mut tokens = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '^' => {
                tokens.push(Token::Caret);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // scientific notation: 1e-3, 2.5E+4
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| ExprError::InvalidNumber(text.to_string()))?;
                tokens.push(Token::Num(value));
            }
            'x' | 'X' => {
                let start = i;
                i += 1;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                let text = &src[start..i];
                if text.len() == 1 {
                    // bare `x` is shorthand for `x1`
                    tokens.push(Token::Var(0));
                } else {
                    let idx: usize = text[1..]
                        .parse()
                        .map_err(|_| ExprError::UnknownIdentifier(text.to_string()))?;
                    if idx == 0 {
                        return Err(ExprError::UnknownIdentifier(text.to_string()));
                    }
                    tokens.push(Token::Var(idx - 1));
                }
            }
            _ => return Err(ExprError::UnexpectedChar(c, i)),
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn parse_sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_product()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    let rhs = self.parse_product()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    let rhs = self.parse_product()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_unary()?;
        while matches!(self.peek(), Some(Token::Star)) {
            self.pos += 1;
            let rhs = self.parse_unary()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, ExprError> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.pos += 1;
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ExprError> {
        let base = self.parse_atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.pos += 1;
            match self.next() {
                Some(Token::Num(v)) => {
                    if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
                        return Err(ExprError::BadExponent(format!("{v}")));
                    }
                    Ok(Expr::Pow(Box::new(base), v as u32))
                }
                Some(tok) => Err(ExprError::BadExponent(format!("{tok:?}"))),
                None => Err(ExprError::UnexpectedEnd),
            }
        } else {
            Ok(base)
        }
    }

    fn parse_atom(&mut self) -> Result<Expr, ExprError> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::Var(i)) => Ok(Expr::Var(i)),
            Some(Token::LParen) => {
                let inner = self.parse_sum()?;
                match self.next() {
                    Some(Token::RParen) => Ok(inner),
                    Some(tok) => Err(ExprError::UnexpectedToken(format!("{tok:?}"))),
                    None => Err(ExprError::UnexpectedEnd),
                }
            }
            Some(tok) => Err(ExprError::UnexpectedToken(format!("{tok:?}"))),
            None => Err(ExprError::UnexpectedEnd),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src).unwrap().eval(x)
    }

    #[test]
    fn constants_and_variables() {
        assert_eq!(eval("0.5", &[9.0]), 0.5);
        assert_eq!(eval("x1", &[3.0]), 3.0);
        assert_eq!(eval("x", &[3.0]), 3.0);
        assert_eq!(eval("x2", &[1.0, 7.0]), 7.0);
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("0.5 - x1", &[0.2]), 0.3);
        assert_eq!(eval("1 - x1^2", &[3.0]), -8.0);
        assert_eq!(eval("2*x1 + 3*x2", &[1.0, 2.0]), 8.0);
        assert_eq!(eval("-x1^2", &[2.0]), -4.0); // unary minus binds looser than ^
        assert_eq!(eval("(1 - x1)^2", &[3.0]), 4.0);
        assert_eq!(eval("2 - 3 - 4", &[]), -5.0); // left associative
        assert_eq!(eval("1e-3 + 2", &[]), 2.001);
    }

    #[test]
    fn dimension_tracks_highest_variable() {
        assert_eq!(Expr::parse("1").unwrap().dimension(), 0);
        assert_eq!(Expr::parse("x1 + x3").unwrap().dimension(), 3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("y1").is_err());
        assert!(Expr::parse("x1 ^ 0.5").is_err());
        assert!(Expr::parse("x1 ^ -2").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 2").is_err());
    }

    #[test]
    fn linear_combination_matches_manual_evaluation() {
        let exprs = vec![Expr::parse("x1").unwrap(), Expr::parse("1 - x1^2").unwrap()];
        let combo = Expr::linear_combination(&[2.0, -0.5], &exprs);
        let x = [0.3];
        let expected = 2.0 * 0.3 - 0.5 * (1.0 - 0.09);
        assert!((combo.eval(&x) - expected).abs() < 1e-15);
    }

    #[test]
    fn mean_constraint_helper() {
        let e = Expr::mean_constraint(0.5);
        assert_eq!(e.eval(&[0.2]), 0.3);
        let s = Expr::unit_second_moment_slack();
        assert_eq!(s.eval(&[2.0]), -3.0);
    }
}
