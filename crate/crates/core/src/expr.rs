//! Scalar complex-analytic expressions in one variable `s`.
//!
//! Grammar (whitespace insignificant, ASCII tokens):
//!
//! ```text
//! expr   := term { ("+"|"-") term } ;
//! term   := factor { ("*"|"/") factor } ;
//! factor := base [ "^" integer ] ;
//! base   := number | "i" | "s" | "pi" | "euler" | ident "(" expr ")" | "(" expr ")" | "-" factor ;
//! ident  := "sqrt" | "log" | "exp" | "sinh" | "cosh" | "tanh" ;
//! ```
//!
//! `sqrt` and `log` are principal branches with `Arg s` in `(-pi, pi]`.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

pub type Complex = Complex64;

/// Denominators with modulus below this are reported as a pole hit.
pub const POLE_TOLERANCE: f64 = 1e-300;
/// Intermediate values with modulus above this are reported as overflow.
pub const OVERFLOW_THRESHOLD: f64 = 1e150;

/// Why an evaluation produced no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error)]
pub enum EvalFailure {
    #[error("pole hit")]
    PoleHit,
    #[error("branch cut hit")]
    BranchCutHit,
    #[error("overflow")]
    Overflow,
    #[error("invalid (non-finite intermediate)")]
    Invalid,
}

pub type EvalOutcome = Result<Complex, EvalFailure>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Log,
    Exp,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Log => "log",
            Func::Exp => "exp",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "log" => Func::Log,
            "exp" => Func::Exp,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Complex),
    Var,
    ImagUnit,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Apply(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: expected one of {}", expected.join(", "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
    },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdent { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdent { offset, .. } => *offset,
        }
    }
}

/// Principal argument in `(-pi, pi]`; a negative real with signed zero
/// imaginary part lands on `+pi`.
pub fn principal_arg(z: Complex) -> f64 {
    if z.im == 0.0 && z.re < 0.0 {
        std::f64::consts::PI
    } else {
        z.im.atan2(z.re)
    }
}

fn on_upper_cut_edge(z: Complex) -> Complex {
    if z.im == 0.0 {
        Complex::new(z.re, 0.0)
    } else {
        z
    }
}

/// Principal square root `exp(Log(z)/2)`.
pub fn principal_sqrt(z: Complex) -> Complex {
    on_upper_cut_edge(z).sqrt()
}

/// Principal logarithm `log|z| + i Arg z`.
pub fn principal_log(z: Complex) -> Complex {
    Complex::new(z.norm().ln(), principal_arg(z))
}

fn check(v: Complex) -> EvalOutcome {
    if v.re.is_nan() || v.im.is_nan() {
        Err(EvalFailure::Invalid)
    } else if v.re.is_infinite() || v.im.is_infinite() || v.norm() > OVERFLOW_THRESHOLD {
        Err(EvalFailure::Overflow)
    } else {
        Ok(v)
    }
}

fn divide(num: Complex, den: Complex) -> EvalOutcome {
    if den.norm() < POLE_TOLERANCE {
        return Err(EvalFailure::PoleHit);
    }
    check(num / den)
}

/// `tanh` via `(1 - e^{-2w})/(1 + e^{-2w})` on the side where the exponential decays.
fn stable_tanh(w: Complex) -> Complex {
    if w.re < 0.0 {
        return -stable_tanh(-w);
    }
    let e = (-2.0 * w).exp();
    (1.0 - e) / (1.0 + e)
}

fn apply(func: Func, x: Complex) -> EvalOutcome {
    let v = match func {
        Func::Sqrt => principal_sqrt(x),
        Func::Log => {
            if x.norm() < POLE_TOLERANCE {
                return Err(EvalFailure::PoleHit);
            }
            principal_log(x)
        }
        Func::Exp => x.exp(),
        Func::Sinh => x.sinh(),
        Func::Cosh => x.cosh(),
        Func::Tanh => stable_tanh(x),
    };
    if !(v.re.is_finite() && v.im.is_finite()) && func != Func::Log {
        // inf * 0 inside exp/sinh/cosh shows up as NaN
        return Err(EvalFailure::Overflow);
    }
    check(v)
}

impl Expr {
    pub fn constant(re: f64) -> Expr {
        Expr::Const(Complex::new(re, 0.0))
    }

    /// Evaluate at `s` with principal branches.
    pub fn eval(&self, s: Complex) -> EvalOutcome {
        match self {
            Expr::Const(c) => check(*c),
            Expr::Var => check(s),
            Expr::ImagUnit => Ok(Complex::i()),
            Expr::Add(a, b) => check(a.eval(s)? + b.eval(s)?),
            Expr::Sub(a, b) => check(a.eval(s)? - b.eval(s)?),
            Expr::Mul(a, b) => check(a.eval(s)? * b.eval(s)?),
            Expr::Div(a, b) => {
                let num = a.eval(s)?;
                divide(num, b.eval(s)?)
            }
            Expr::Neg(a) => Ok(-a.eval(s)?),
            Expr::Pow(a, k) => {
                let base = a.eval(s)?;
                if *k < 0 {
                    divide(Complex::new(1.0, 0.0), check(base.powi(-*k))?)
                } else {
                    check(base.powi(*k))
                }
            }
            Expr::Apply(f, a) => apply(*f, a.eval(s)?),
        }
    }

    /// Complex conjugate of [`Expr::eval`]; failures pass through.
    pub fn conj_eval(&self, s: Complex) -> EvalOutcome {
        self.eval(s).map(|v| v.conj())
    }

    /// True when every constant in the tree is real.
    pub fn has_real_constants(&self) -> bool {
        match self {
            Expr::Const(c) => c.im == 0.0,
            Expr::Var => true,
            Expr::ImagUnit => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.has_real_constants() && b.has_real_constants()
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Apply(_, a) => a.has_real_constants(),
        }
    }
}

// Printing is fully parenthesized; `parse(to_string())` evaluates identically.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.im == 0.0 {
                    write_real(f, c.re)
                } else {
                    f.write_str("(")?;
                    write_real(f, c.re)?;
                    f.write_str("+")?;
                    write_real(f, c.im)?;
                    f.write_str("*i)")
                }
            }
            Expr::Var => f.write_str("s"),
            Expr::ImagUnit => f.write_str("i"),
            Expr::Add(a, b) => write!(f, "({a}+{b})"),
            Expr::Sub(a, b) => write!(f, "({a}-{b})"),
            Expr::Mul(a, b) => write!(f, "({a}*{b})"),
            Expr::Div(a, b) => write!(f, "({a}/{b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Pow(a, k) => {
                if *k < 0 {
                    write!(f, "(1/({a})^{})", -(*k as i64))
                } else {
                    write!(f, "(({a})^{k})")
                }
            }
            Expr::Apply(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

fn write_real(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if x < 0.0 || (x == 0.0 && x.is_sign_negative()) {
        write!(f, "(-{:e})", -x)
    } else {
        write!(f, "{x:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
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

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => return self.number(start),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self
                    .src
                    .get(self.pos)
                    .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
                return Ok((Tok::Ident(name.to_string()), start));
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: vec!["token".into()],
                })
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let digits = |lx: &mut Self| {
            let from = lx.pos;
            while lx.src.get(lx.pos).is_some_and(u8::is_ascii_digit) {
                lx.pos += 1;
            }
            lx.pos - from
        };
        let mut count = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return Err(ParseError::Syntax {
                offset: start,
                expected: vec!["digit".into()],
            });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // `2e` is not an exponent; leave `e...` for the identifier lexer.
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        text.parse::<f64>()
            .map(|v| (Tok::Num(v), start))
            .map_err(|_| ParseError::Syntax {
                offset: start,
                expected: vec!["number".into()],
            })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

fn expected(offset: usize, what: &[&str]) -> ParseError {
    ParseError::Syntax {
        offset,
        expected: what.iter().map(|s| s.to_string()).collect(),
    }
}

const BASE_START: &[&str] = &["number", "i", "s", "pi", "euler", "function", "(", "-"];

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Plus => {
                    self.bump()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.tok {
                Tok::Star => {
                    self.bump()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.tok != Tok::Caret {
            return Ok(base);
        }
        self.bump()?;
        let negative = if self.tok == Tok::Minus {
            self.bump()?;
            true
        } else {
            false
        };
        match self.tok {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                self.bump()?;
                let k = v as i32;
                Ok(Expr::Pow(Box::new(base), if negative { -k } else { k }))
            }
            _ => Err(expected(self.at, &["integer"])),
        }
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::constant(v))
            }
            Tok::Minus => {
                // `-s^2` is `-(s^2)`: the exponent binds tighter than negation
                self.bump()?;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                self.close()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let at = self.at;
                match name.as_str() {
                    "i" => {
                        self.bump()?;
                        Ok(Expr::ImagUnit)
                    }
                    "s" => {
                        self.bump()?;
                        Ok(Expr::Var)
                    }
                    "pi" => {
                        self.bump()?;
                        Ok(Expr::constant(std::f64::consts::PI))
                    }
                    "euler" => {
                        self.bump()?;
                        Ok(Expr::constant(std::f64::consts::E))
                    }
                    other => {
                        let func =
                            Func::from_name(other).ok_or_else(|| ParseError::UnknownIdent {
                                offset: at,
                                name: other.to_string(),
                            })?;
                        self.bump()?;
                        if self.tok != Tok::LParen {
                            return Err(expected(self.at, &["("]));
                        }
                        self.bump()?;
                        let arg = self.expr()?;
                        self.close()?;
                        Ok(Expr::Apply(func, Box::new(arg)))
                    }
                }
            }
            _ => Err(expected(self.at, BASE_START)),
        }
    }

    fn close(&mut self) -> Result<(), ParseError> {
        if self.tok != Tok::RParen {
            return Err(expected(self.at, &[")", "+", "-", "*", "/", "^"]));
        }
        self.bump()
    }
}

/// Parse an expression in `s`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        lexer: Lexer {
            src: text.as_bytes(),
            pos: 0,
        },
        tok: Tok::End,
        at: 0,
    };
    parser.bump()?;
    let e = parser.expr()?;
    if parser.tok != Tok::End {
        return Err(expected(
            parser.at,
            &["+", "-", "*", "/", "^", "end of input"],
        ));
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
