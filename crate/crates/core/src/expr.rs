//! Small arithmetic expression language for loads, thresholds and kernels.
//!
//! Grammar: `+ - * / ^` (with `^` right-associative and binding tighter
//! than unary minus), parentheses, numbers, the constant `pi`, the
//! variables `t x z`, and the functions `sin cos exp sqrt abs` (one
//! argument) and `max min` (two arguments).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{Scalar, ScalarFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
    Z,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::Z => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Max,
    Min,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "max" => Func::Max,
            "min" => Func::Min,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Max | Func::Min => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Arc<Node>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Expression(format!("bad number '{text}' at column {}", start + 1)))?;
            out.push((start, Token::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(src[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Token::Op(c)));
            i += 1;
        } else {
            return Err(Error::Expression(format!(
                "unexpected character '{c}' at column {}",
                i + 1
            )));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    allowed: &'a [Var],
    src_len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.src_len, |(c, _)| *c) + 1
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.eat(op) {
            Ok(())
        } else {
            Err(Error::Expression(format!(
                "expected '{op}' at column {}",
                self.column()
            )))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node> {
        let col = self.column();
        match self.tokens.get(self.pos).cloned() {
            Some((_, Token::Num(v))) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some((_, Token::Op('('))) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some((_, Token::Ident(name))) => {
                self.pos += 1;
                if let Some(f) = Func::lookup(&name) {
                    self.expect('(')?;
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != f.arity() {
                        return Err(Error::Expression(format!(
                            "{name} takes {} argument(s), got {} at column {col}",
                            f.arity(),
                            args.len()
                        )));
                    }
                    return Ok(Node::Call(f, args));
                }
                let var = match name.as_str() {
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "t" => Var::T,
                    "x" => Var::X,
                    "z" => Var::Z,
                    _ => return Err(Error::Expression(format!("unknown name '{name}' at column {col}"))),
                };
                if !self.allowed.contains(&var) {
                    let allowed: Vec<&str> = self.allowed.iter().map(|v| v.name()).collect();
                    return Err(Error::Expression(format!(
                        "variable '{name}' is not available here (allowed: {})",
                        allowed.join(", ")
                    )));
                }
                Ok(Node::Var(var))
            }
            Some((_, Token::Op(c))) => Err(Error::Expression(format!("unexpected '{c}' at column {col}"))),
            None => Err(Error::Expression("unexpected end of expression".into())),
        }
    }
}

fn eval<T: Scalar>(node: &Node, vars: &[(Var, T)]) -> T {
    match node {
        Node::Num(v) => T::lit(*v),
        Node::Var(v) => vars.iter().find(|(k, _)| k == v).map_or(T::zero(), |(_, x)| *x),
        Node::Neg(a) => -eval(a, vars),
        Node::Add(a, b) => eval(a, vars) + eval(b, vars),
        Node::Sub(a, b) => eval(a, vars) - eval(b, vars),
        Node::Mul(a, b) => eval(a, vars) * eval(b, vars),
        Node::Div(a, b) => eval(a, vars) / eval(b, vars),
        Node::Pow(a, b) => {
            let (a, b) = (eval(a, vars), eval(b, vars));
            if b == b.round() && b.abs() <= T::lit(64.0) {
                a.powi(b.to_f64_lossy() as i32)
            } else {
                a.powf(b)
            }
        }
        Node::Call(f, args) => {
            let x = eval(&args[0], vars);
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Sqrt => x.sqrt(),
                Func::Abs => x.abs(),
                Func::Max => x.max(eval(&args[1], vars)),
                Func::Min => x.min(eval(&args[1], vars)),
            }
        }
    }
}

fn mentions(node: &Node, var: Var) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var(v) => *v == var,
        Node::Neg(a) => mentions(a, var),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            mentions(a, var) || mentions(b, var)
        }
        Node::Call(_, args) => args.iter().any(|a| mentions(a, var)),
    }
}

impl Expr {
    /// Parses `src`, accepting only the listed variables.
    pub fn parse(src: &str, allowed: &[Var]) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            allowed,
            src_len: src.len(),
        };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!("trailing input at column {}", p.column())));
        }
        Ok(Self {
            source: src.to_string(),
            root: Arc::new(root),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn mentions(&self, var: Var) -> bool {
        mentions(&self.root, var)
    }

    pub fn eval<T: Scalar>(&self, vars: &[(Var, T)]) -> T {
        eval(&self.root, vars)
    }

    /// Function of a single variable.
    pub fn to_fn<T: Scalar>(&self, var: Var) -> ScalarFn<T> {
        let root = self.root.clone();
        ScalarFn::new(move |v: T| eval(&root, &[(var, v)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: &[Var] = &[Var::T, Var::X, Var::Z];

    fn ev(src: &str, t: f64) -> f64 {
        Expr::parse(src, ALL).unwrap().eval(&[(Var::T, t)])
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0), -4.0);
        assert_eq!(ev("(1 - 2) - 3", 0.0), -4.0);
        assert_eq!(ev("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(ev("2e-1 * 10", 0.0), 2.0);
    }

    #[test]
    fn functions_and_variables() {
        assert!((ev("2*sin(pi*t)", 0.5) - 2.0).abs() < 1e-15);
        assert_eq!(ev("max(0.2, 1 - 0.5*t)", 4.0), 0.2);
        assert_eq!(ev("min(t, 1)", 3.0), 1.0);
        assert_eq!(ev("exp(0) + cos(0) + abs(-1) + sqrt(4)", 0.0), 5.0);
    }

    #[test]
    fn errors_are_reported() {
        assert!(Expr::parse("1 +", ALL).is_err());
        assert!(Expr::parse("foo(1)", ALL).is_err());
        assert!(Expr::parse("max(1)", ALL).is_err());
        assert!(Expr::parse("(1", ALL).is_err());
        assert!(Expr::parse("1 $ 2", ALL).is_err());
        assert!(Expr::parse("z", &[Var::T]).is_err());
        assert!(Expr::parse("1 2", ALL).is_err());
    }

    #[test]
    fn single_variable_closure() {
        let f = Expr::parse("1 - 0.3*z", &[Var::Z]).unwrap().to_fn::<f32>(Var::Z);
        assert!((f.call(1.0) - 0.7).abs() < 1e-6);
    }
}
