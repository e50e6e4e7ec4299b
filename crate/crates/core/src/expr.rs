//! Coefficient expressions used in config files.
//!
//! Grammar (whitespace between tokens is ignored):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! number  := digits ('.' digits?)? (('e' | 'E') ('+' | '-')? digits)?
//! ```
//!
//! Variables: `t`, `x`, `s`, `eps`. Constants: `pi`, `e`. Functions: `sin`,
//! `cos`, `tan`, `exp`, `log`, `sqrt`, `abs`, `tanh`, `min`, `max`, `pow`.
//! `^` is right associative and binds tighter than unary minus, so `-2^2 = -4`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    T,
    X,
    S,
    Eps,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Min,
    Max,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "log" => (Func::Log, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "tanh" => (Func::Tanh, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "pow" => (Func::Pow, 2),
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Values bound to the variables during evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Env {
    pub t: f64,
    pub x: f64,
    pub s: f64,
    pub eps: f64,
}

/// A parsed expression together with its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    src: String,
    root: Node,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src, pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Expr {
            src: src.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn eval(&self, env: &Env) -> f64 {
        eval(&self.root, env)
    }

    pub fn uses(&self, v: Var) -> bool {
        uses(&self.root, v)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.src)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Expr::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn uses(n: &Node, v: Var) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(w) => *w == v,
        Node::Neg(a) => uses(a, v),
        Node::Bin(_, a, b) => uses(a, v) || uses(b, v),
        Node::Call(_, args) => args.iter().any(|a| uses(a, v)),
    }
}

fn eval(n: &Node, env: &Env) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::T) => env.t,
        Node::Var(Var::X) => env.x,
        Node::Var(Var::S) => env.s,
        Node::Var(Var::Eps) => env.eps,
        Node::Neg(a) => -eval(a, env),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, env), eval(b, env));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], env);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Tanh => a.tanh(),
                Func::Min => a.min(eval(&args[1], env)),
                Func::Max => a.max(eval(&args[1], env)),
                Func::Pow => a.powf(eval(&args[1], env)),
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Bin('+', Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Bin('-', Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Bin('*', Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Bin('/', Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let name = &self.src[start..self.pos];
                if let Some((f, arity)) = Func::lookup(name) {
                    if !self.eat('(') {
                        return Err(self.err(&format!("expected '(' after function '{name}'")));
                    }
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    if !self.eat(')') {
                        return Err(self.err("expected ')' or ','"));
                    }
                    if args.len() != arity {
                        return Err(Error::Parse {
                            pos: start,
                            msg: format!("'{name}' takes {arity} argument(s), got {}", args.len()),
                        });
                    }
                    return Ok(Node::Call(f, args));
                }
                Ok(match name {
                    "t" => Node::Var(Var::T),
                    "x" => Node::Var(Var::X),
                    "s" => Node::Var(Var::S),
                    "eps" => Node::Var(Var::Eps),
                    "pi" => Node::Num(std::f64::consts::PI),
                    "e" => Node::Num(std::f64::consts::E),
                    _ => {
                        return Err(Error::Parse {
                            pos: start,
                            msg: format!("unknown identifier '{name}'"),
                        })
                    }
                })
            }
            Some(c) => Err(self.err(&format!("unexpected character '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let digits = |p: &mut usize| {
            let s = *p;
            while *p < bytes.len() && bytes[*p].is_ascii_digit() {
                *p += 1;
            }
            *p - s
        };
        let mut p = self.pos;
        let mut n = digits(&mut p);
        if p < bytes.len() && bytes[p] == b'.' {
            p += 1;
            n += digits(&mut p);
        }
        if n == 0 {
            return Err(self.err("malformed number"));
        }
        if p < bytes.len() && (bytes[p] == b'e' || bytes[p] == b'E') {
            let mut q = p + 1;
            if q < bytes.len() && (bytes[q] == b'+' || bytes[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) > 0 {
                p = q;
            }
        }
        self.pos = p;
        self.src[start..p]
            .parse::<f64>()
            .map(Node::Num)
            .map_err(|_| Error::Parse {
                pos: start,
                msg: "malformed number".into(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, env: Env) -> f64 {
        Expr::parse(src).unwrap().eval(&env)
    }

    #[test]
    fn precedence_and_associativity() {
        let e = Env::default();
        assert_eq!(ev("1 + 2 * 3", e), 7.0);
        assert_eq!(ev("(1 + 2) * 3", e), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", e), 512.0);
        assert_eq!(ev("-2^2", e), -4.0);
        assert_eq!(ev("8 / 4 / 2", e), 1.0);
        assert_eq!(ev("10 - 4 - 3", e), 3.0);
        assert_eq!(ev("2e-1 + .5 + 3.", e), 3.7);
    }

    #[test]
    fn variables_and_functions() {
        let env = Env {
            t: 0.5,
            x: 0.25,
            s: -1.0,
            eps: 0.1,
        };
        let v = ev("2 + sin(t)*cos(pi*x) + eps*x", env);
        let expect = 2.0 + 0.5f64.sin() * (std::f64::consts::PI * 0.25).cos() + 0.1 * 0.25;
        assert!((v - expect).abs() < 1e-15);
        assert_eq!(ev("tanh(s)", env), (-1f64).tanh());
        assert_eq!(ev("pow(2, 10)", env), 1024.0);
        assert_eq!(ev("max(abs(s), sqrt(4))", env), 2.0);
        let e = Expr::parse("x + eps").unwrap();
        assert!(e.uses(Var::Eps) && e.uses(Var::X) && !e.uses(Var::T));
    }

    #[test]
    fn errors_carry_positions() {
        let cases = [
            ("1 +", 3),
            ("foo(1)", 0),
            ("2 * (t + 1", 10),
            ("sin 1", 4),
            ("1 $ 2", 2),
            ("pow(1)", 0),
            ("", 0),
        ];
        for (src, pos) in cases {
            match Expr::parse(src) {
                Err(Error::Parse { pos: p, .. }) => assert_eq!(p, pos, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn round_trips_through_serde() {
        let e = Expr::parse("1 + t").unwrap();
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, "\"1 + t\"");
        let back: Expr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
        assert!(serde_json::from_str::<Expr>("\"1 +\"").is_err());
    }
}
