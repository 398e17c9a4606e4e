//! A small recursive-descent parser for closed-form expressions in `t` and `u`.
//!
//! Grammar (lowest to highest precedence): `+ -`, `* /`, unary minus, `^`
//! (right associative), atoms. Atoms are numbers, `t`, `u`, `pi`, `e`,
//! parenthesised expressions and calls to `exp`, `log`/`ln`, `sqrt`, `abs`.
//! The typographic operators `×`, `÷` and `−` are accepted as aliases.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{message} at column {column} in `{source_text}`")]
pub struct ParseError {
    pub message: String,
    pub column: usize,
    pub source_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    T,
    U,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, t: f64, u: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::T => t,
            Node::U => u,
            Node::Neg(a) => -a.eval(t, u),
            Node::Add(a, b) => a.eval(t, u) + b.eval(t, u),
            Node::Sub(a, b) => a.eval(t, u) - b.eval(t, u),
            Node::Mul(a, b) => a.eval(t, u) * b.eval(t, u),
            Node::Div(a, b) => a.eval(t, u) / b.eval(t, u),
            Node::Pow(a, b) => {
                let base = a.eval(t, u);
                match **b {
                    Node::Num(n) if n.fract() == 0.0 && n.abs() <= 64.0 => base.powi(n as i32),
                    _ => base.powf(b.eval(t, u)),
                }
            }
            Node::Call(f, a) => {
                let x = a.eval(t, u);
                match f {
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    Func::Sqrt => x.sqrt(),
                    Func::Abs => x.abs(),
                }
            }
        }
    }

    fn uses(&self, var: &Node) -> bool {
        match self {
            Node::Num(_) => false,
            Node::T | Node::U => self == var,
            Node::Neg(a) | Node::Call(_, a) => a.uses(var),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.uses(var) || b.uses(var)
            }
        }
    }
}

/// A parsed expression. Keeps its source text so it can be echoed back.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let mut p = Parser { chars: source.chars().collect(), pos: 0, source };
        let root = p.sum()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error(format!("unexpected `{}`", p.chars[p.pos])));
        }
        Ok(Expr { root, source: source.to_string() })
    }

    /// Parses an expression that must not reference `t` or `u` and evaluates it.
    pub fn constant(source: &str) -> Result<f64, ParseError> {
        let e = Self::parse(source)?;
        if e.root.uses(&Node::T) || e.root.uses(&Node::U) {
            return Err(ParseError {
                message: "constant expression may not reference t or u".into(),
                column: 1,
                source_text: source.to_string(),
            });
        }
        Ok(e.eval(0.0, 0.0))
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        self.root.eval(t, u)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    source: &'a str,
}

impl Parser<'_> {
    fn error(&self, message: String) -> ParseError {
        ParseError { message, column: self.pos + 1, source_text: self.source.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Some('-' | '−') => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some('*' | '×') => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some('/' | '÷') => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some('-' | '−') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression".into())),
            Some('(') => {
                self.pos += 1;
                let inner = self.sum()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`".into()));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() => self.word(),
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        while self.pos < self.chars.len() && (self.chars[self.pos].is_ascii_digit() || self.chars[self.pos] == '.') {
            self.pos += 1;
        }
        if self.pos < self.chars.len() && matches!(self.chars[self.pos], 'e' | 'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.chars.len() && matches!(self.chars[self.pos], '+' | '-') {
                self.pos += 1;
            }
            if self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
                while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.error(format!("malformed number `{text}`"))
        })
    }

    fn word(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        while self.pos < self.chars.len() && (self.chars[self.pos].is_alphanumeric() || self.chars[self.pos] == '_') {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        let func = match name.as_str() {
            "t" => return Ok(Node::T),
            "u" => return Ok(Node::U),
            "pi" | "π" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => {
                self.pos = start;
                return Err(self.error(format!("unknown identifier `{name}`")));
            }
        };
        if !self.eat('(') {
            return Err(self.error(format!("expected `(` after `{name}`")));
        }
        let arg = self.sum()?;
        if !self.eat(')') {
            return Err(self.error("expected `)`".into()));
        }
        Ok(Node::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, t: f64, u: f64) -> f64 {
        Expr::parse(s).unwrap().eval(t, u)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0, 0.0), -4.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("2^-1", 0.0, 0.0), 0.5);
    }

    #[test]
    fn variables_functions_and_unicode() {
        assert!((ev("12*(31/28*t + 25/28)*u^3", 1.0, 0.5) - 3.0).abs() < 1e-15);
        assert!((ev("exp(log(3))", 0.0, 0.0) - 3.0).abs() < 1e-15);
        assert!((ev("ln(2+sqrt(5))", 0.0, 0.0) - (2.0 + 5f64.sqrt()).ln()).abs() < 1e-15);
        assert_eq!(ev("3 × 4 ÷ 6 − 1", 0.0, 0.0), 1.0);
        assert_eq!(ev("abs(t - u)", 0.25, 1.0), 0.75);
        assert!((ev("-2*pi", 0.0, 0.0) + 2.0 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(ev("1.5e3 + e - e", 0.0, 0.0), 1500.0);
    }

    #[test]
    fn errors_point_at_the_problem() {
        let err = Expr::parse("2 * (t + 1").unwrap_err();
        assert!(err.message.contains(")"));
        let err = Expr::parse("foo(t)").unwrap_err();
        assert_eq!(err.column, 1);
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::constant("t + 1").is_err());
        assert_eq!(Expr::constant("2^10").unwrap(), 1024.0);
    }
}
