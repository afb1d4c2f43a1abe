//! Piecewise analytic expressions in one variable.
//!
//! Grammar (pieces separated by `;` or newlines):
//!
//! ```text
//! piecewise := piece ( (';' | '\n') piece )*
//! piece     := 'on' guard ':' expr  |  expr
//! guard     := ('(' | '[') bound ',' bound (')' | ']')
//! bound     := '-'? 'inf' | constant expression
//! expr      := term (('+' | '-') term)*
//! term      := unary (('*' | '/') unary)*
//! unary     := '-' unary | power
//! power     := atom ('^' unary)?
//! atom      := number | 'x' | 'e' | 'exp' '(' expr ')' | 'log' '(' expr ')' | '(' expr ')'
//! ```
//!
//! A bare expression without a guard covers the whole line. Adjacent pieces
//! must agree at shared endpoints.

use std::f64::consts::E;
use std::fmt;

use crate::error::{Error, Result};
use crate::funcrep::{merge_knots, Evaluate, Extension, GridFunction, Interval};

/// Seam continuity tolerance, relative to the magnitude of the values.
pub const SEAM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: f64) -> Result<f64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(Error::MathDomain(format!("division by zero at x = {x}")));
                }
                a.eval(x)? / d
            }
            Expr::Pow(a, b) => {
                let (base, p) = (a.eval(x)?, b.eval(x)?);
                if base == 0.0 && p < 0.0 {
                    return Err(Error::MathDomain(format!("0 raised to {p} at x = {x}")));
                }
                if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
                    base.powi(p as i32)
                } else if base < 0.0 {
                    return Err(Error::MathDomain(format!(
                        "negative base {base} with non-integer exponent {p} at x = {x}"
                    )));
                } else {
                    base.powf(p)
                }
            }
            Expr::Exp(a) => a.eval(x)?.exp(),
            Expr::Log(a) => {
                let u = a.eval(x)?;
                if u <= 0.0 {
                    return Err(Error::MathDomain(format!("log of {u} at x = {x}")));
                }
                u.ln()
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::MathDomain(format!("non-finite value at x = {x}")))
        }
    }

    pub fn has_var(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var => true,
            Expr::Neg(a) | Expr::Exp(a) | Expr::Log(a) => a.has_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.has_var() || b.has_var()
            }
        }
    }

    /// Replaces every occurrence of `x` by `with`.
    pub fn substitute(&self, with: &Expr) -> Expr {
        let s = |e: &Expr| Box::new(e.substitute(with));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var => with.clone(),
            Expr::Neg(a) => Expr::Neg(s(a)),
            Expr::Add(a, b) => Expr::Add(s(a), s(b)),
            Expr::Sub(a, b) => Expr::Sub(s(a), s(b)),
            Expr::Mul(a, b) => Expr::Mul(s(a), s(b)),
            Expr::Div(a, b) => Expr::Div(s(a), s(b)),
            Expr::Pow(a, b) => Expr::Pow(s(a), s(b)),
            Expr::Exp(a) => Expr::Exp(s(a)),
            Expr::Log(a) => Expr::Log(s(a)),
        }
    }

    /// Constant folding plus the log/exp cancellations that hold on the
    /// positive reals: `log(exp u) = u`, `exp(log u) = u`,
    /// `log(u^p) = p*log(u)`, `log(c) = ln c`.
    #[allow(clippy::redundant_guards)]
    pub fn simplify(&self) -> Expr {
        use Expr::*;
        match self {
            Const(_) | Var => self.clone(),
            Neg(a) => match a.simplify() {
                Const(c) => Const(-c),
                Neg(inner) => *inner,
                s => Neg(Box::new(s)),
            },
            Add(a, b) => match (a.simplify(), b.simplify()) {
                (Const(p), Const(q)) => Const(p + q),
                (Const(z), s) | (s, Const(z)) if z == 0.0 => s,
                (p, q) => Add(Box::new(p), Box::new(q)),
            },
            Sub(a, b) => match (a.simplify(), b.simplify()) {
                (Const(p), Const(q)) => Const(p - q),
                (s, Const(z)) if z == 0.0 => s,
                (p, q) => Sub(Box::new(p), Box::new(q)),
            },
            Mul(a, b) => match (a.simplify(), b.simplify()) {
                (Const(p), Const(q)) => Const(p * q),
                (Const(z), _) | (_, Const(z)) if z == 0.0 => Const(0.0),
                (Const(o), s) | (s, Const(o)) if o == 1.0 => s,
                (p, q) => Mul(Box::new(p), Box::new(q)),
            },
            Div(a, b) => match (a.simplify(), b.simplify()) {
                (Const(p), Const(q)) if q != 0.0 => Const(p / q),
                (s, Const(o)) if o == 1.0 => s,
                (p, q) => Div(Box::new(p), Box::new(q)),
            },
            Pow(a, b) => match (a.simplify(), b.simplify()) {
                (Const(p), Const(q)) if p > 0.0 => Const(p.powf(q)),
                (s, Const(o)) if o == 1.0 => s,
                (Pow(inner, p), q) => Pow(inner, Box::new(Mul(p, Box::new(q)).simplify())),
                (p, q) => Pow(Box::new(p), Box::new(q)),
            },
            Exp(a) => match a.simplify() {
                Const(c) => Const(c.exp()),
                Log(inner) => *inner,
                s => Exp(Box::new(s)),
            },
            Log(a) => match a.simplify() {
                Const(c) if c > 0.0 => Const(c.ln()),
                Exp(inner) => *inner,
                Pow(base, p) if !p.has_var() => {
                    Mul(p, Box::new(Log(base).simplify())).simplify()
                }
                s => Log(Box::new(s)),
            },
        }
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(c) if *c < 0.0 => 3,
        _ => 5,
    }
}

fn fmt_const(c: f64) -> String {
    if c == E {
        "e".to_string()
    } else {
        format!("{c}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if prec(e) < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Const(c) => f.write_str(&fmt_const(*c)),
            Expr::Var => f.write_str("x"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                // keep `-(2)` distinct from the literal `-2`
                if matches!(**a, Expr::Const(_)) {
                    write!(f, "({a})")
                } else {
                    wrap(f, a, 3)
                }
            }
            Expr::Add(a, b) => {
                wrap(f, a, 1)?;
                f.write_str(" + ")?;
                wrap(f, b, 2)
            }
            Expr::Sub(a, b) => {
                wrap(f, a, 1)?;
                f.write_str(" - ")?;
                wrap(f, b, 2)
            }
            Expr::Mul(a, b) => {
                wrap(f, a, 2)?;
                f.write_str("*")?;
                wrap(f, b, 3)
            }
            Expr::Div(a, b) => {
                wrap(f, a, 2)?;
                f.write_str("/")?;
                wrap(f, b, 3)
            }
            Expr::Pow(a, b) => {
                wrap(f, a, 5)?;
                f.write_str("^")?;
                wrap(f, b, 4)
            }
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
        }
    }
}

/// Interval over the extended reals with open/closed ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guard {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Guard {
    pub fn whole_line() -> Self {
        Guard {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }
}

fn fmt_bound(b: f64) -> String {
    if b == f64::INFINITY {
        "inf".into()
    } else if b == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        fmt_const(b)
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            fmt_bound(self.lo),
            fmt_bound(self.hi),
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub guard: Guard,
    pub body: Expr,
}

/// Ordered list of guarded expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseExpr {
    pieces: Vec<Piece>,
}

impl PiecewiseExpr {
    /// Validates ordering, overlap and seam continuity.
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Syntax {
                offset: 0,
                message: "expression has no pieces".into(),
            });
        }
        for p in &pieces {
            if !(p.guard.lo < p.guard.hi) {
                return Err(Error::Syntax {
                    offset: 0,
                    message: format!("empty guard {}", p.guard),
                });
            }
        }
        for w in pieces.windows(2) {
            let (l, r) = (&w[0], &w[1]);
            if r.guard.lo < l.guard.hi {
                return Err(Error::GuardOverlap { at: r.guard.lo });
            }
            if r.guard.lo == l.guard.hi && r.guard.lo.is_finite() {
                let at = r.guard.lo;
                if !(l.guard.hi_closed || r.guard.lo_closed) {
                    continue;
                }
                let (left, right) = match (l.body.eval(at), r.body.eval(at)) {
                    (Ok(a), Ok(b)) => (a, b),
                    _ => continue,
                };
                if (left - right).abs() > SEAM_TOL * left.abs().max(right.abs()).max(1.0) {
                    return Err(Error::DiscontinuousSeam { at, left, right });
                }
            }
        }
        Ok(PiecewiseExpr { pieces })
    }

    pub fn single(body: Expr) -> Self {
        PiecewiseExpr {
            pieces: vec![Piece {
                guard: Guard::whole_line(),
                body,
            }],
        }
    }

    pub fn identity() -> Self {
        PiecewiseExpr::single(Expr::Var)
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_expression(text)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Finite guard endpoints shared by or bounding pieces.
    pub fn seams(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| [p.guard.lo, p.guard.hi])
            .filter(|v| v.is_finite())
            .collect();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s
    }

    /// Union hull of the guards.
    pub fn covered(&self) -> (f64, f64) {
        (self.pieces[0].guard.lo, self.pieces[self.pieces.len() - 1].guard.hi)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let piece = self
            .pieces
            .iter()
            .find(|p| p.guard.contains(x))
            .ok_or_else(|| {
                let (lo, hi) = self.covered();
                Error::OutOfDomain { x, lo, hi }
            })?;
        piece.body.eval(x)
    }

    /// Maps every piece body through `f`, keeping guards.
    pub fn map_bodies(&self, f: impl Fn(&Expr) -> Expr) -> PiecewiseExpr {
        PiecewiseExpr {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    guard: p.guard,
                    body: f(&p.body),
                })
                .collect(),
        }
    }

    /// Rebuilds from pieces whose guards were transformed by the caller,
    /// skipping validation of seams (already validated upstream).
    pub(crate) fn from_pieces_unchecked(pieces: Vec<Piece>) -> Self {
        PiecewiseExpr { pieces }
    }

    /// Samples onto a grid over `interval`, inserting every seam that falls
    /// strictly inside.
    pub fn sample(&self, interval: Interval, knot_count: usize, extension: Extension) -> Result<GridFunction> {
        let uniform = interval.linspace(knot_count.max(2));
        let seams: Vec<f64> = self
            .seams()
            .into_iter()
            .filter(|&s| s > interval.lo && s < interval.hi)
            .collect();
        let mut knots = merge_knots(&[&uniform, &seams]);
        // drop uniform knots that crowd a seam closer than rounding level
        let tol = 1e-12 * interval.width();
        knots = knots
            .iter()
            .enumerate()
            .filter(|&(i, &k)| {
                seams.contains(&k)
                    || !seams.iter().any(|&s| (s - k).abs() < tol)
                    || i == 0
                    || i + 1 == knots.len()
            })
            .map(|(_, &k)| k)
            .collect();
        GridFunction::from_samples(knots, |x| self.eval(x), extension)
    }
}

impl Evaluate for PiecewiseExpr {
    fn eval(&self, x: f64) -> Result<f64> {
        PiecewiseExpr::eval(self, x)
    }
}

impl fmt::Display for PiecewiseExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.pieces.iter().enumerate() {
            if i > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "on {}: {}", p.guard, p.body)?;
        }
        Ok(())
    }
}

pub fn parse_expression(text: &str) -> Result<PiecewiseExpr> {
    let mut pieces = Vec::new();
    let mut offset = 0;
    for chunk in text.split([';', '\n']) {
        let start = offset;
        offset += chunk.len() + 1;
        if chunk.trim().is_empty() {
            continue;
        }
        let mut p = Parser::new(chunk, start);
        pieces.push(p.piece()?);
    }
    PiecewiseExpr::new(pieces)
}

/// Parses a constant expression such as `3/4`, `e` or `-inf`.
pub fn parse_constant(text: &str) -> Result<f64> {
    let mut p = Parser::new(text, 0);
    let v = p.bound()?;
    p.expect_end()?;
    Ok(v)
}

/// Parses a single expression in `x`.
pub fn parse_body(text: &str) -> Result<Expr> {
    let mut p = Parser::new(text, 0);
    let e = p.expr()?;
    p.expect_end()?;
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn new(src: &str, base: usize) -> Self {
        let mut toks = Vec::new();
        let bytes: Vec<char> = src.chars().collect();
        let mut i = 0;
        let mut byte_pos = 0;
        let mut positions = Vec::with_capacity(bytes.len() + 1);
        for c in &bytes {
            positions.push(byte_pos);
            byte_pos += c.len_utf8();
        }
        positions.push(byte_pos);
        while i < bytes.len() {
            let c = bytes[i];
            let at = base + positions[i];
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.') {
                    i += 1;
                }
                // exponent part, only when followed by a digit or sign+digit
                if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == '+' || bytes[j] == '-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = bytes[start..i].iter().collect();
                match s.parse::<f64>() {
                    Ok(v) => toks.push((Tok::Num(v), at)),
                    Err(_) => toks.push((Tok::Sym('?'), at)),
                }
            } else if c.is_alphabetic() {
                let start = i;
                while i < bytes.len() && bytes[i].is_alphanumeric() {
                    i += 1;
                }
                toks.push((Tok::Ident(bytes[start..i].iter().collect()), at));
            } else {
                toks.push((Tok::Sym(c), at));
                i += 1;
            }
        }
        Parser {
            toks,
            pos: 0,
            end: base + byte_pos,
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|&(_, o)| o).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            self.err("unexpected trailing input")
        }
    }

    fn piece(&mut self) -> Result<Piece> {
        let guard = if self.peek() == Some(&Tok::Ident("on".into())) {
            self.pos += 1;
            let g = self.guard()?;
            self.expect_sym(':')?;
            g
        } else {
            Guard::whole_line()
        };
        let body = self.expr()?;
        self.expect_end()?;
        Ok(Piece { guard, body })
    }

    fn guard(&mut self) -> Result<Guard> {
        let lo_closed = match self.peek() {
            Some(Tok::Sym('[')) => true,
            Some(Tok::Sym('(')) => false,
            _ => return self.err("expected `(` or `[` to open a guard"),
        };
        self.pos += 1;
        let lo = self.bound()?;
        self.expect_sym(',')?;
        let hi = self.bound()?;
        let hi_closed = match self.peek() {
            Some(Tok::Sym(']')) => true,
            Some(Tok::Sym(')')) => false,
            _ => return self.err("expected `)` or `]` to close a guard"),
        };
        self.pos += 1;
        if lo.is_infinite() && lo_closed || hi.is_infinite() && hi_closed {
            return self.err("infinite guard ends must be open");
        }
        Ok(Guard {
            lo,
            hi,
            lo_closed,
            hi_closed,
        })
    }

    fn bound(&mut self) -> Result<f64> {
        let save = self.pos;
        let neg = self.eat_sym('-');
        if self.peek() == Some(&Tok::Ident("inf".into())) {
            self.pos += 1;
            return Ok(if neg { f64::NEG_INFINITY } else { f64::INFINITY });
        }
        self.pos = save;
        let start = self.offset();
        let e = self.expr()?;
        if e.has_var() {
            return Err(Error::Syntax {
                offset: start,
                message: "constant expected, found an expression in x".into(),
            });
        }
        e.eval(0.0).map_err(|err| Error::Syntax {
            offset: start,
            message: err.to_string(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_sym('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_sym('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_sym('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_sym('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_sym('-') {
            // a minus directly on a literal is a negative literal
            if let Some(Tok::Num(v)) = self.peek().cloned() {
                if self.toks.get(self.pos + 1).map(|(t, _)| t) != Some(&Tok::Sym('^')) {
                    self.pos += 1;
                    return Ok(Expr::Const(-v));
                }
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat_sym('^') {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "x" => Ok(Expr::Var),
                    "e" => Ok(Expr::Const(E)),
                    "exp" | "log" => {
                        self.expect_sym('(')?;
                        let inner = self.expr()?;
                        self.expect_sym(')')?;
                        Ok(if name == "exp" {
                            Expr::Exp(Box::new(inner))
                        } else {
                            Expr::Log(Box::new(inner))
                        })
                    }
                    other => {
                        self.pos -= 1;
                        self.err(format!("unknown identifier `{other}`"))
                    }
                }
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_sym(')')?;
                Ok(inner)
            }
            Some(Tok::Sym(c)) => self.err(format!("unexpected `{c}`")),
            None => self.err("unexpected end of input"),
        }
    }
}
