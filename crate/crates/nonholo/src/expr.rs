//! A small mathematical expression language.
//!
//! Scenario files define Lagrangians, constraints, metric coefficients and
//! potentials as strings in this language. Evaluation is generic over the
//! scalar algebra, so the same expression runs on plain `f64` and on
//! second-order jets.
//!
//! Grammar (standard precedence, `^` right-associative and binding
//! tighter than unary minus):
//!
//! ```text
//! expr  := mul (('+' | '-') mul)*
//! mul   := unary (('*' | '/') unary)*
//! unary := '-' unary | pow
//! pow   := atom ('^' unary)?
//! atom  := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! Functions: `sqrt`, `sin`, `cos`, `tan`, `exp`, `log`, `abs`. `abs` is
//! accepted but non-smooth; see [`Expr::uses_abs`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply<S: Scalar>(self, x: S) -> Result<S> {
        Ok(match self {
            Func::Sqrt => x.sqrt()?,
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => x.ln()?,
            Func::Abs => x.abs(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Abstract syntax tree of an expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Name(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, start));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                let mut end = self.pos;
                while end < self.src.len()
                    && (self.src[end].is_ascii_digit() || self.src[end] == b'.')
                {
                    end += 1;
                }
                // optional exponent
                if end < self.src.len() && (self.src[end] == b'e' || self.src[end] == b'E') {
                    let mut e = end + 1;
                    if e < self.src.len() && (self.src[e] == b'+' || self.src[e] == b'-') {
                        e += 1;
                    }
                    if e < self.src.len() && self.src[e].is_ascii_digit() {
                        while e < self.src.len() && self.src[e].is_ascii_digit() {
                            e += 1;
                        }
                        end = e;
                    }
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                let v: f64 = text.parse().map_err(|_| Error::Parse {
                    offset: start,
                    msg: format!("invalid number `{text}`"),
                })?;
                self.pos = end;
                return Ok((Tok::Num(v), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut end = self.pos;
                while end < self.src.len()
                    && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
                {
                    end += 1;
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                self.pos = end;
                return Ok((Tok::Ident(text.to_string()), start));
            }
            other => {
                return Err(Error::Parse {
                    offset: start,
                    msg: format!("unexpected character `{}`", other as char),
                })
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    tok_off: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self> {
        let mut lexer = Lexer::new(src);
        let (tok, tok_off) = lexer.next()?;
        Ok(Parser { lexer, tok, tok_off })
    }

    fn bump(&mut self) -> Result<()> {
        let (tok, off) = self.lexer.next()?;
        self.tok = tok;
        self.tok_off = off;
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.mul()?;
        loop {
            let op = match self.tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump()?;
            let rhs = self.mul()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn mul(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.tok == Tok::Minus {
            self.bump()?;
            let inner = self.unary()?;
            // Fold a negated literal so `-2` round-trips as one node.
            return Ok(match inner {
                Expr::Num(v) => Expr::Num(-v),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.pow()
    }

    fn pow(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.tok == Tok::Caret {
            self.bump()?;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) => {
                let off = self.tok_off;
                self.bump()?;
                if self.tok == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| Error::UnknownFunction(name.clone()))?;
                    self.bump()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::RParen {
                        return Err(Error::Parse {
                            offset: self.tok_off,
                            msg: "expected `)`".into(),
                        });
                    }
                    self.bump()?;
                    Ok(Expr::Call(func, Box::new(arg)))
                } else if Func::from_name(&name).is_some() {
                    Err(Error::Parse {
                        offset: off,
                        msg: format!("function `{name}` requires an argument list"),
                    })
                } else {
                    Ok(Expr::Name(name))
                }
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                if self.tok != Tok::RParen {
                    return Err(Error::Parse {
                        offset: self.tok_off,
                        msg: "expected `)`".into(),
                    });
                }
                self.bump()?;
                Ok(inner)
            }
            _ => Err(Error::Parse {
                offset: self.tok_off,
                msg: format!("unexpected token {:?}", self.tok),
            }),
        }
    }
}

/// Parse a source string into an [`Expr`].
pub fn parse(source: &str) -> Result<Expr> {
    if source.trim().is_empty() {
        return Err(Error::Parse {
            offset: 0,
            msg: "empty expression".into(),
        });
    }
    let mut p = Parser::new(source)?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(Error::Parse {
            offset: p.tok_off,
            msg: format!("trailing input {:?}", p.tok),
        });
    }
    Ok(e)
}

fn prec(e: &Expr) -> u8 {
    match e {
        // A negative literal prints with a leading minus, so it binds
        // like a unary minus.
        Expr::Num(v) if v.is_sign_negative() => 3,
        Expr::Num(_) | Expr::Name(_) | Expr::Call(..) => 5,
        Expr::Bin(BinOp::Pow, ..) => 4,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Mul, ..) | Expr::Bin(BinOp::Div, ..) => 2,
        Expr::Bin(BinOp::Add, ..) | Expr::Bin(BinOp::Sub, ..) => 1,
    }
}

fn print_into(e: &Expr, min_prec: u8, out: &mut String) {
    let needs_parens = prec(e) < min_prec;
    if needs_parens {
        out.push('(');
    }
    match e {
        Expr::Num(v) => {
            use fmt::Write;
            write!(out, "{v}").unwrap();
        }
        Expr::Name(n) => out.push_str(n),
        Expr::Neg(inner) => {
            out.push('-');
            print_into(inner, 3, out);
        }
        Expr::Bin(op, l, r) => {
            let (sym, lp, rp) = match op {
                BinOp::Add => ("+", 1, 2),
                BinOp::Sub => ("-", 1, 2),
                BinOp::Mul => ("*", 2, 3),
                BinOp::Div => ("/", 2, 3),
                BinOp::Pow => ("^", 5, 3),
            };
            print_into(l, lp, out);
            out.push_str(sym);
            print_into(r, rp, out);
        }
        Expr::Call(f, arg) => {
            out.push_str(f.name());
            out.push('(');
            print_into(arg, 0, out);
            out.push(')');
        }
    }
    if needs_parens {
        out.push(')');
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        print_into(self, 0, &mut s);
        f.write_str(&s)
    }
}

impl Expr {
    /// Evaluate with a name-resolving environment.
    pub fn eval<S: Scalar>(&self, env: &impl Fn(&str) -> Option<S>) -> Result<S> {
        match self {
            Expr::Num(v) => Ok(S::constant(*v)),
            Expr::Name(n) => env(n).ok_or_else(|| Error::UnboundName(n.clone())),
            Expr::Neg(inner) => Ok(-inner.eval(env)?),
            Expr::Bin(op, l, r) => {
                let a = l.eval(env)?;
                let b = r.eval(env)?;
                Ok(match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.pow(&b)?,
                })
            }
            Expr::Call(f, arg) => f.apply(arg.eval(env)?),
        }
    }

    /// All names referenced by the expression.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_names(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_names(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Name(n) => out.push(n.clone()),
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_names(out),
            Expr::Bin(_, l, r) => {
                l.collect_names(out);
                r.collect_names(out);
            }
        }
    }

    /// Whether the (non-smooth) `abs` function appears anywhere.
    pub fn uses_abs(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Name(_) => false,
            Expr::Neg(e) => e.uses_abs(),
            Expr::Call(f, e) => *f == Func::Abs || e.uses_abs(),
            Expr::Bin(_, l, r) => l.uses_abs() || r.uses_abs(),
        }
    }

    /// Bind names to value slots and fold parameters into constants.
    pub fn compile(
        &self,
        vars: &BTreeMap<String, usize>,
        params: &BTreeMap<String, f64>,
    ) -> Result<Compiled> {
        let node = self.compile_node(vars, params)?;
        Ok(Compiled {
            node,
            uses_abs: self.uses_abs(),
        })
    }

    fn compile_node(
        &self,
        vars: &BTreeMap<String, usize>,
        params: &BTreeMap<String, f64>,
    ) -> Result<Node> {
        Ok(match self {
            Expr::Num(v) => Node::Const(*v),
            Expr::Name(n) => {
                if let Some(&slot) = vars.get(n) {
                    Node::Slot(slot)
                } else if let Some(&v) = params.get(n) {
                    Node::Const(v)
                } else {
                    return Err(Error::UnboundName(n.clone()));
                }
            }
            Expr::Neg(e) => match e.compile_node(vars, params)? {
                Node::Const(v) => Node::Const(-v),
                node => Node::Neg(Box::new(node)),
            },
            Expr::Bin(op, l, r) => {
                let a = l.compile_node(vars, params)?;
                let b = r.compile_node(vars, params)?;
                if let (Node::Const(x), Node::Const(y)) = (&a, &b) {
                    let folded = match op {
                        BinOp::Add => x + y,
                        BinOp::Sub => x - y,
                        BinOp::Mul => x * y,
                        BinOp::Div => x / y,
                        BinOp::Pow => f64::powf(*x, *y),
                    };
                    if folded.is_finite() {
                        return Ok(Node::Const(folded));
                    }
                }
                match op {
                    BinOp::Add => Node::Add(Box::new(a), Box::new(b)),
                    BinOp::Sub => Node::Sub(Box::new(a), Box::new(b)),
                    BinOp::Mul => Node::Mul(Box::new(a), Box::new(b)),
                    BinOp::Div => Node::Div(Box::new(a), Box::new(b)),
                    BinOp::Pow => match b {
                        Node::Const(c) if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 => {
                            Node::Powi(Box::new(a), c as i32)
                        }
                        Node::Const(c) => Node::Powf(Box::new(a), c),
                        b => Node::Pow(Box::new(a), Box::new(b)),
                    },
                }
            }
            Expr::Call(f, arg) => Node::Call(*f, Box::new(arg.compile_node(vars, params)?)),
        })
    }
}

#[derive(Clone, Debug)]
enum Node {
    Const(f64),
    Slot(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Powi(Box<Node>, i32),
    Powf(Box<Node>, f64),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// An expression with names resolved to slots, ready for repeated
/// evaluation against a flat value buffer.
#[derive(Clone, Debug)]
pub struct Compiled {
    node: Node,
    uses_abs: bool,
}

impl Compiled {
    pub fn uses_abs(&self) -> bool {
        self.uses_abs
    }

    pub fn eval<S: Scalar>(&self, slots: &[S]) -> Result<S> {
        eval_node(&self.node, slots)
    }
}

fn eval_node<S: Scalar>(node: &Node, slots: &[S]) -> Result<S> {
    Ok(match node {
        Node::Const(v) => S::constant(*v),
        Node::Slot(i) => slots[*i].clone(),
        Node::Neg(e) => -eval_node(e, slots)?,
        Node::Add(a, b) => eval_node(a, slots)? + eval_node(b, slots)?,
        Node::Sub(a, b) => eval_node(a, slots)? - eval_node(b, slots)?,
        Node::Mul(a, b) => eval_node(a, slots)? * eval_node(b, slots)?,
        Node::Div(a, b) => eval_node(a, slots)? / eval_node(b, slots)?,
        Node::Powi(a, n) => eval_node(a, slots)?.powi(*n),
        Node::Powf(a, c) => eval_node(a, slots)?.powf(*c)?,
        Node::Pow(a, b) => {
            let base = eval_node(a, slots)?;
            let e = eval_node(b, slots)?;
            base.pow(&e)?
        }
        Node::Call(f, a) => f.apply(eval_node(a, slots)?)?,
    })
}
