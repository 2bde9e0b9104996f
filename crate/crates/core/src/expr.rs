//! A small arithmetic expression language over the variables `x1`, `x2`, `t`.
//!
//! Grammar: `+ - * /`, `^` (right associative), unary minus, parentheses,
//! decimal literals.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X1,
    X2,
    T,
    Neg(Box<Expr>),
    /// Natural log; produced only by differentiation of general powers.
    Ln(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.sum()?;
        if p.pos != p.tokens.len() {
            return Err(Error::invalid(format!("unexpected token {:?} in '{src}'", p.tokens[p.pos])));
        }
        Ok(e)
    }

    pub fn eval(&self, x1: f64, x2: f64, t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X1 => x1,
            Expr::X2 => x2,
            Expr::T => t,
            Expr::Neg(e) => -e.eval(x1, x2, t),
            Expr::Ln(e) => e.eval(x1, x2, t).ln(),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x1, x2, t), b.eval(x1, x2, t));
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                    Op::Pow => a.powf(b),
                }
            }
        }
    }

    /// Symbolic partial derivative with respect to `x1` (0), `x2` (1) or `t` (2).
    pub fn diff(&self, var: usize) -> Expr {
        use Expr::*;
        let bx = Box::new;
        match self {
            Num(_) => Num(0.0),
            X1 => Num(if var == 0 { 1.0 } else { 0.0 }),
            X2 => Num(if var == 1 { 1.0 } else { 0.0 }),
            T => Num(if var == 2 { 1.0 } else { 0.0 }),
            Neg(e) => Neg(bx(e.diff(var))),
            Ln(e) => Bin(Op::Div, bx(e.diff(var)), e.clone()),
            Bin(op, a, b) => {
                let (da, db) = (a.diff(var), b.diff(var));
                match op {
                    Op::Add => Bin(Op::Add, bx(da), bx(db)),
                    Op::Sub => Bin(Op::Sub, bx(da), bx(db)),
                    Op::Mul => Bin(
                        Op::Add,
                        bx(Bin(Op::Mul, bx(da), b.clone())),
                        bx(Bin(Op::Mul, a.clone(), bx(db))),
                    ),
                    Op::Div => Bin(
                        Op::Div,
                        bx(Bin(
                            Op::Sub,
                            bx(Bin(Op::Mul, bx(da), b.clone())),
                            bx(Bin(Op::Mul, a.clone(), bx(db))),
                        )),
                        bx(Bin(Op::Mul, b.clone(), b.clone())),
                    ),
                    Op::Pow => match **b {
                        // d(a^k) = k a^(k-1) da for constant exponents
                        Num(k) => Bin(
                            Op::Mul,
                            bx(Bin(Op::Mul, bx(Num(k)), bx(Bin(Op::Pow, a.clone(), bx(Num(k - 1.0)))))),
                            bx(da),
                        ),
                        // a^b = exp(b ln a)
                        _ => Bin(
                            Op::Mul,
                            bx(self.clone()),
                            bx(Bin(
                                Op::Add,
                                bx(Bin(Op::Mul, bx(db), bx(Ln(a.clone())))),
                                bx(Bin(Op::Div, bx(Bin(Op::Mul, b.clone(), bx(da))), a.clone())),
                            )),
                        ),
                    },
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Var(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{s}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Tok::Var(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::invalid(format!("unexpected character '{c}' in '{src}'")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut e = self.product()?;
        loop {
            if self.eat('+') {
                e = Expr::Bin(Op::Add, Box::new(e), Box::new(self.product()?));
            } else if self.eat('-') {
                e = Expr::Bin(Op::Sub, Box::new(e), Box::new(self.product()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        loop {
            if self.eat('*') {
                e = Expr::Bin(Op::Mul, Box::new(e), Box::new(self.unary()?));
            } else if self.eat('/') {
                e = Expr::Bin(Op::Div, Box::new(e), Box::new(self.unary()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tokens.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Var(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "x1" => Ok(Expr::X1),
                    "x2" => Ok(Expr::X2),
                    "t" => Ok(Expr::T),
                    _ => Err(Error::invalid(format!("unknown variable '{name}'"))),
                }
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(')') {
                    return Err(Error::invalid("missing ')'"));
                }
                Ok(e)
            }
            Some(t) => Err(Error::invalid(format!("unexpected token {t:?}"))),
            None => Err(Error::invalid("unexpected end of expression")),
        }
    }
}
