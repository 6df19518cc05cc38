//! A small arithmetic-expression interpreter for user-supplied potentials.
//!
//! Variables: `t`, `T` (period), `pi`, `u1 … uN` (`u` aliases `u1` when
//! `N = 1`), and `r = |u|`. Functions: `sin cos tan sinh cosh tanh exp log
//! sqrt abs sign pow min max`. `^` is right-associative and binds tighter
//! than unary minus.

use std::fmt;

use crate::error::{Error, Result};
use crate::potential::Potential;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sign,
    Pow,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "sinh" => (Func::Sinh, 1),
            "cosh" => (Func::Cosh, 1),
            "tanh" => (Func::Tanh, 1),
            "exp" => (Func::Exp, 1),
            "log" | "ln" => (Func::Log, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "sign" => (Func::Sign, 1),
            "pow" => (Func::Pow, 2),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Time,
    Period,
    Comp(usize),
    Radius,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Parsed expression over `(t, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
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
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number `{text}` in `{src}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character `{c}` in `{src}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    dim: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn err(&self, msg: impl fmt::Display) -> Error {
        Error::Expression(format!("{msg} in `{}`", self.src))
    }

    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_op() {
            Some('-') => {
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

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self.toks.get(self.pos).cloned().ok_or_else(|| self.err("unexpected end"))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op(c) => Err(self.err(format!("unexpected `{c}`"))),
            Tok::Ident(name) => {
                if self.peek_op() == Some('(') {
                    let (func, arity) =
                        Func::lookup(&name).ok_or_else(|| self.err(format!("unknown function `{name}`")))?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek_op() == Some(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != arity {
                        return Err(self.err(format!("`{name}` takes {arity} argument(s)")));
                    }
                    return Ok(Node::Call(func, args));
                }
                self.variable(&name)
            }
        }
    }

    fn variable(&self, name: &str) -> Result<Node> {
        match name {
            "t" => Ok(Node::Time),
            "T" => Ok(Node::Period),
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            "r" => Ok(Node::Radius),
            "u" if self.dim == 1 => Ok(Node::Comp(0)),
            _ => {
                if let Some(idx) = name.strip_prefix('u').and_then(|s| s.parse::<usize>().ok()) {
                    if (1..=self.dim).contains(&idx) {
                        return Ok(Node::Comp(idx - 1));
                    }
                    return Err(self.err(format!("component `{name}` outside u1..u{}", self.dim)));
                }
                Err(self.err(format!("unknown variable `{name}`")))
            }
        }
    }
}

impl Node {
    fn eval(&self, t: f64, period: f64, u: &[f64], r: f64) -> f64 {
        let ev = |n: &Node| n.eval(t, period, u, r);
        match self {
            Node::Num(v) => *v,
            Node::Time => t,
            Node::Period => period,
            Node::Comp(i) => u[*i],
            Node::Radius => r,
            Node::Neg(a) => -ev(a),
            Node::Add(a, b) => ev(a) + ev(b),
            Node::Sub(a, b) => ev(a) - ev(b),
            Node::Mul(a, b) => ev(a) * ev(b),
            Node::Div(a, b) => ev(a) / ev(b),
            Node::Pow(a, b) => pow(ev(a), ev(b)),
            Node::Call(f, args) => {
                let x = ev(&args[0]);
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Sinh => x.sinh(),
                    Func::Cosh => x.cosh(),
                    Func::Tanh => x.tanh(),
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    Func::Sqrt => x.sqrt(),
                    Func::Abs => x.abs(),
                    Func::Sign => {
                        if x == 0.0 {
                            0.0
                        } else {
                            x.signum()
                        }
                    }
                    Func::Pow => pow(x, ev(&args[1])),
                    Func::Min => x.min(ev(&args[1])),
                    Func::Max => x.max(ev(&args[1])),
                }
            }
        }
    }

    fn uses_time(&self) -> bool {
        match self {
            Node::Time => true,
            Node::Num(_) | Node::Period | Node::Comp(_) | Node::Radius => false,
            Node::Neg(a) => a.uses_time(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.uses_time() || b.uses_time()
            }
            Node::Call(_, args) => args.iter().any(Node::uses_time),
        }
    }
}

fn pow(base: f64, exp: f64) -> f64 {
    if exp.fract() == 0.0 && exp.abs() < 64.0 {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    }
}

impl Expr {
    /// Parses `src` for loops in `ℝ^dim`.
    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        let toks = tokenize(src)?;
        if toks.is_empty() {
            return Err(Error::Expression("empty expression".into()));
        }
        let mut p = Parser { toks, pos: 0, dim, src };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Self { root, source: src.to_string() })
    }

    pub fn eval(&self, t: f64, period: f64, u: &[f64]) -> f64 {
        let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.root.eval(t, period, u, r)
    }

    pub fn uses_time(&self) -> bool {
        self.root.uses_time()
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// Potential given by expression strings; the gradient falls back to central
/// differences of `W` when not supplied.
#[derive(Debug, Clone)]
pub struct ExprPotential {
    value: Expr,
    gradient: Option<Vec<Expr>>,
    dim: usize,
    period: f64,
    even: bool,
}

impl ExprPotential {
    pub fn new(value: &str, gradient: Option<&[String]>, dim: usize, period: f64, even: bool) -> Result<Self> {
        let value = Expr::parse(value, dim)?;
        let gradient = match gradient {
            Some(g) => {
                if g.len() != dim {
                    return Err(Error::Expression(format!(
                        "gradient needs {dim} components, got {}",
                        g.len()
                    )));
                }
                Some(g.iter().map(|s| Expr::parse(s, dim)).collect::<Result<Vec<_>>>()?)
            }
            None => None,
        };
        Ok(Self { value, gradient, dim, period, even })
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }
}

impl Potential for ExprPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: f64, u: &[f64]) -> f64 {
        self.value.eval(t, self.period, u)
    }

    fn gradient(&self, t: f64, u: &[f64], out: &mut [f64]) {
        if let Some(g) = &self.gradient {
            for (o, e) in out.iter_mut().zip(g) {
                *o = e.eval(t, self.period, u);
            }
            return;
        }
        let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-6 * (1.0 + r);
        let mut x = u.to_vec();
        for a in 0..self.dim {
            x[a] = u[a] + h;
            let fp = self.value(t, &x);
            x[a] = u[a] - h;
            let fm = self.value(t, &x);
            x[a] = u[a];
            out[a] = (fp - fm) / (2.0 * h);
        }
    }

    fn is_even(&self) -> bool {
        self.even
    }

    fn is_autonomous(&self) -> bool {
        !self.value.uses_time() && self.gradient.as_ref().is_none_or(|g| g.iter().all(|e| !e.uses_time()))
    }

    fn name(&self) -> String {
        self.value.source.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_functions() {
        let e = Expr::parse("1 + 2*3^2 - -4/2", 1).unwrap();
        assert_eq!(e.eval(0.0, 1.0, &[0.0]), 1.0 + 18.0 + 2.0);
        let e = Expr::parse("-2^2", 1).unwrap();
        assert_eq!(e.eval(0.0, 1.0, &[0.0]), -4.0);
        let e = Expr::parse("2^3^2", 1).unwrap();
        assert_eq!(e.eval(0.0, 1.0, &[0.0]), 512.0);
        let e = Expr::parse("max(u1, u2) + pow(r, 2) + cos(2*pi*t/T)", 2).unwrap();
        assert!((e.eval(0.0, 2.0, &[3.0, 4.0]) - (4.0 + 25.0 + 1.0)).abs() < 1e-12);
        assert!(e.uses_time());
        assert_eq!(Expr::parse("1.5e-3*u", 1).unwrap().eval(0.0, 1.0, &[2.0]), 3e-3);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "1 +", "foo(1)", "u3", "(1", "sin(1, 2)", "2 $ 3", "x"] {
            assert!(Expr::parse(bad, 2).is_err(), "{bad}");
        }
    }

    #[test]
    fn fd_gradient_matches_analytic() {
        let w = ExprPotential::new("0.25*r^4 + 0.1*u1*u2", None, 2, 1.0, false).unwrap();
        let mut g = [0.0; 2];
        w.gradient(0.0, &[0.5, -1.5], &mut g);
        let r2 = 0.25 + 2.25;
        assert!((g[0] - (r2 * 0.5 + 0.1 * -1.5)).abs() < 1e-8);
        assert!((g[1] - (r2 * -1.5 + 0.1 * 0.5)).abs() < 1e-8);
        assert!(w.is_autonomous());
    }
}
