//! Arithmetic expressions in one variable `s`, used to pass profiles on the
//! command line.
//!
//! Grammar (version 1):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | atom
//! atom   := number | 's' | '(' expr ')'
//! number := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]
//! ```
//!
//! Whitespace is ignored. Evaluation also returns the exact derivative in `s`.

use crate::error::{Error, Result};

pub const GRAMMAR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { chars: src.chars().filter(|c| !c.is_whitespace()).collect(), pos: 0 };
        if p.chars.is_empty() {
            return Err(Error::Parse("empty expression".into()));
        }
        let e = p.expr()?;
        if p.pos != p.chars.len() {
            return Err(Error::Parse(format!("unexpected '{}' at position {}", p.chars[p.pos], p.pos)));
        }
        Ok(e)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.eval_dual(s).0
    }

    /// Value and derivative at `s` (forward-mode dual numbers).
    pub fn eval_dual(&self, s: f64) -> (f64, f64) {
        match self {
            Expr::Num(v) => (*v, 0.0),
            Expr::Var => (s, 1.0),
            Expr::Neg(e) => {
                let (v, d) = e.eval_dual(s);
                (-v, -d)
            }
            Expr::Bin(op, a, b) => {
                let (u, du) = a.eval_dual(s);
                let (v, dv) = b.eval_dual(s);
                match op {
                    Op::Add => (u + v, du + dv),
                    Op::Sub => (u - v, du - dv),
                    Op::Mul => (u * v, du * v + u * dv),
                    Op::Div => (u / v, (du * v - u * dv) / (v * v)),
                }
            }
        }
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { Op::Add } else { Op::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { Op::Mul } else { Op::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some('s') => {
                self.pos += 1;
                Ok(Expr::Var)
            }
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(Error::Parse(format!("expected ')' at position {}", self.pos)));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) => Err(Error::Parse(format!("unexpected '{c}' at position {}", self.pos))),
            None => Err(Error::Parse("unexpected end of expression".into())),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Parser| {
            while p.peek().is_some_and(|c| c.is_ascii_digit()) {
                p.pos += 1;
            }
        };
        digits(self);
        if self.peek() == Some('.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            digits(self);
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| Error::Parse(format!("bad number '{text}' at position {start}")))
    }
}
