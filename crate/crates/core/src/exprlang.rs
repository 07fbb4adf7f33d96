//! Complex-valued arithmetic expressions for user-defined coupling functions.
//!
//! Grammar, lowest precedence first:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'i' | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus and associates to the right, so `-a^b^c` is `-(a^(b^c))`.
//! The identifier `i` is always the imaginary unit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::{principal_arg, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { offset: usize, name: String },
    #[error("function `{name}` at offset {offset} takes {expected} argument(s), got {found}")]
    Arity {
        offset: usize,
        name: String,
        expected: usize,
        found: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::UnknownFunction { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of zero")]
    LogOfZero,
    #[error("argument of zero")]
    ArgOfZero,
    #[error("variable `{0}` is not bound")]
    Unbound(String),
    #[error("bindings do not match the declared parameters: {0}")]
    BindingMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Arg,
    Re,
    Im,
    Conj,
}

impl Func {
    const ALL: [Func; 11] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
        Func::Arg,
        Func::Re,
        Func::Im,
        Func::Conj,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Arg => "arg",
            Func::Re => "re",
            Func::Im => "im",
            Func::Conj => "conj",
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Imag,
    Var(String),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with the parameter names it was declared against.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    params: Vec<String>,
}

/// Variable bindings: exactly one complex value per declared parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Bindings<T: Real> {
    values: BTreeMap<String, Complex<T>>,
}

impl<T: Real> Bindings<T> {
    pub fn new() -> Self {
        Self {
            values: BTreeMap::new(),
        }
    }

    pub fn from_real<'a, I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, T)>,
    {
        let values = pairs
            .into_iter()
            .map(|(k, v)| (k.to_string(), Complex::new(v, T::zero())))
            .collect();
        Self { values }
    }

    pub fn set(&mut self, name: &str, value: Complex<T>) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<Complex<T>> {
        self.values.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Copy with `name` shifted by a real offset.
    fn shifted(&self, name: &str, delta: T) -> Self {
        let mut out = self.clone();
        if let Some(v) = out.values.get_mut(name) {
            v.re = v.re + delta;
        }
        out
    }
}

impl<T: Real> Default for Bindings<T> {
    fn default() -> Self {
        Self::new()
    }
}

pub fn parse(text: &str, vars: &[&str]) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        vars,
    };
    if parser.tokens.is_empty() {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let root = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError::Syntax {
            offset: tok.offset,
            message: format!("unexpected `{}`", tok.kind),
        });
    }
    Ok(Expr {
        root,
        params: vars.iter().map(|s| s.to_string()).collect(),
    })
}

pub fn eval<T: Real>(e: &Expr, b: &Bindings<T>) -> Result<Complex<T>, EvalError> {
    e.eval(b)
}

/// Result of a numeric derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative<T: Real> {
    pub value: Complex<T>,
    /// False when the second differences at steps h and h/2 fail to shrink, i.e. a kink.
    pub smooth: bool,
}

/// Central difference with one level of Richardson extrapolation (steps `h` and `h/2`).
pub fn richardson<T, E, F>(f: F, x: T, h: T) -> Result<Derivative<T>, E>
where
    T: Real,
    F: Fn(T) -> Result<Complex<T>, E>,
{
    let two = T::lit(2.0);
    let half = h / two;
    let f0 = f(x)?;
    let fp = f(x + h)?;
    let fm = f(x - h)?;
    let fp2 = f(x + half)?;
    let fm2 = f(x - half)?;
    let d1 = (fp - fm) / (two * h);
    let d2 = (fp2 - fm2) / h;
    let value = (d2 * T::lit(4.0) - d1) / T::lit(3.0);

    let curv1 = (fp - f0 * two + fm) / h;
    let curv2 = (fp2 - f0 * two + fm2) / half;
    let scale = T::one().max(value.norm()).max(f0.norm());
    let kink = curv2.norm() > T::lit(0.75) * curv1.norm() && curv1.norm() > T::tol(1e-6) * scale;
    Ok(Derivative {
        value,
        smooth: !kink,
    })
}

pub fn diff_fd<T: Real>(
    e: &Expr,
    b: &Bindings<T>,
    var: &str,
    h: T,
) -> Result<Derivative<T>, EvalError> {
    let x0 = b
        .get(var)
        .ok_or_else(|| EvalError::Unbound(var.to_string()))?
        .re;
    richardson(|x| e.eval(&b.shifted(var, x - x0)), x0, h)
}

/// Default differentiation step `1e-5 · max(1, |x|)`.
pub fn default_step<T: Real>(x: T) -> T {
    T::lit(1e-5) * T::one().max(x.abs())
}

impl Expr {
    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    /// Variables that actually occur in the tree.
    pub fn variables(&self) -> BTreeSet<String> {
        fn walk(n: &Node, out: &mut BTreeSet<String>) {
            match n {
                Node::Var(v) => {
                    out.insert(v.clone());
                }
                Node::Neg(a) | Node::Call(_, a) => walk(a, out),
                Node::Bin(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Node::Num(_) | Node::Imag => {}
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn eval<T: Real>(&self, b: &Bindings<T>) -> Result<Complex<T>, EvalError> {
        for p in &self.params {
            if b.get(p).is_none() {
                return Err(EvalError::BindingMismatch(format!("missing `{p}`")));
            }
        }
        if let Some(extra) = b.names().find(|n| !self.params.iter().any(|p| p == n)) {
            return Err(EvalError::BindingMismatch(format!("undeclared `{extra}`")));
        }
        eval_node(&self.root, b)
    }
}

// Clears negative zeros so branch cuts of sqrt/ln/arg follow the principal convention.
fn canon<T: Real>(z: Complex<T>) -> Complex<T> {
    Complex::new(z.re + T::zero(), z.im + T::zero())
}

fn is_zero<T: Real>(z: Complex<T>) -> bool {
    z.re == T::zero() && z.im == T::zero()
}

fn eval_node<T: Real>(n: &Node, b: &Bindings<T>) -> Result<Complex<T>, EvalError> {
    Ok(match n {
        Node::Num(x) => Complex::new(T::lit(*x), T::zero()),
        Node::Imag => Complex::new(T::zero(), T::one()),
        Node::Var(v) => b.get(v).ok_or_else(|| EvalError::Unbound(v.clone()))?,
        Node::Neg(a) => canon(-eval_node(a, b)?),
        Node::Bin(op, l, r) => {
            let x = eval_node(l, b)?;
            let y = eval_node(r, b)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if is_zero(y) {
                        return Err(EvalError::DivisionByZero);
                    }
                    x / y
                }
                BinOp::Pow => pow(x, y)?,
            }
        }
        Node::Call(f, a) => {
            let z = canon(eval_node(a, b)?);
            match f {
                Func::Sin => z.sin(),
                Func::Cos => z.cos(),
                Func::Tan => z.tan(),
                Func::Exp => z.exp(),
                Func::Ln => {
                    if is_zero(z) {
                        return Err(EvalError::LogOfZero);
                    }
                    Complex::new(z.norm().ln(), principal_arg(z))
                }
                Func::Sqrt => z.sqrt(),
                Func::Abs => Complex::new(z.norm(), T::zero()),
                Func::Arg => {
                    if is_zero(z) {
                        return Err(EvalError::ArgOfZero);
                    }
                    Complex::new(principal_arg(z), T::zero())
                }
                Func::Re => Complex::new(z.re, T::zero()),
                Func::Im => Complex::new(z.im, T::zero()),
                Func::Conj => z.conj(),
            }
        }
    })
}

fn pow<T: Real>(base: Complex<T>, exp: Complex<T>) -> Result<Complex<T>, EvalError> {
    let base = canon(base);
    if exp.im == T::zero() && exp.re.fract() == T::zero() && exp.re.abs() <= T::lit(64.0) {
        let n = exp.re.to_i32().expect("small integer exponent");
        if n < 0 && is_zero(base) {
            return Err(EvalError::DivisionByZero);
        }
        return Ok(base.powi(n));
    }
    if is_zero(base) {
        return if exp.re > T::zero() {
            Ok(Complex::new(T::zero(), T::zero()))
        } else {
            Err(EvalError::DivisionByZero)
        };
    }
    let ln = Complex::new(base.norm().ln(), principal_arg(base));
    Ok((exp * ln).exp())
}

impl fmt::Display for Node {
    /// Fully parenthesized; reparsing yields a structurally identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(x) => write!(f, "{x:?}"),
            Node::Imag => write!(f, "i"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Sym(char),
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Num(x) => write!(f, "{x}"),
            TokKind::Ident(s) => write!(f, "{s}"),
            TokKind::Sym(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        if ch.is_ascii_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == b'.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let value: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{lit}`"),
            })?;
            if !value.is_finite() {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("number `{lit}` is not finite"),
                });
            }
            out.push(Token {
                kind: TokKind::Num(value),
                offset: start,
            });
        } else if ch.is_ascii_alphabetic() || ch == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(text[start..i].to_string()),
                offset: start,
            });
        } else if b"+-*/^(),".contains(&ch) {
            out.push(Token {
                kind: TokKind::Sym(ch as char),
                offset: i,
            });
            i += 1;
        } else {
            let c = text[i..].chars().next().unwrap_or('?');
            return Err(ParseError::Syntax {
                offset: i,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_sym(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Sym(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn expect(&mut self, sym: char) -> Result<(), ParseError> {
        if self.peek_sym() == Some(sym) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected `{sym}`")))
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        let message = match self.peek() {
            Some(t) => format!("{what}, found `{}`", t.kind),
            None => format!("{what}, found end of input"),
        };
        ParseError::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.peek_sym() == Some('-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek_sym() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected("expected an operand"));
        };
        match tok.kind {
            TokKind::Num(x) => {
                self.pos += 1;
                Ok(Node::Num(x))
            }
            TokKind::Sym('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            TokKind::Ident(name) => {
                self.pos += 1;
                if self.peek_sym() == Some('(') {
                    return self.call(&name, tok.offset);
                }
                if name == "i" {
                    Ok(Node::Imag)
                } else if self.vars.contains(&name.as_str()) {
                    Ok(Node::Var(name))
                } else {
                    Err(ParseError::UnknownIdentifier {
                        offset: tok.offset,
                        name,
                    })
                }
            }
            TokKind::Sym(_) => Err(self.unexpected("expected an operand")),
        }
    }

    fn call(&mut self, name: &str, offset: usize) -> Result<Node, ParseError> {
        let func = Func::lookup(name).ok_or_else(|| ParseError::UnknownFunction {
            offset,
            name: name.to_string(),
        })?;
        self.expect('(')?;
        let mut args = Vec::new();
        if self.peek_sym() != Some(')') {
            args.push(self.expr()?);
            while self.peek_sym() == Some(',') {
                self.pos += 1;
                args.push(self.expr()?);
            }
        }
        self.expect(')')?;
        if args.len() != 1 {
            return Err(ParseError::Arity {
                offset,
                name: name.to_string(),
                expected: 1,
                found: args.len(),
            });
        }
        Ok(Node::Call(func, Box::new(args.pop().expect("one argument"))))
    }
}
