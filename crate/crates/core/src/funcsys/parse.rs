//! Infix expression parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := base ('^' uint)?
//! base   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Unary minus sits below `^`, so `-x^2` reads as `-(x^2)`. A quotient of two
//! literals such as `1/3` becomes a single constant with a sound enclosure.

use thiserror::Error;

use crate::interval::Interval;

use super::expr::Expr;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, Interval),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn location(&self, pos: usize) -> (usize, usize) {
        let before = &self.src[..pos];
        let line = before.matches('\n').count() + 1;
        let col = before.rfind('\n').map_or(pos, |i| pos - i - 1) + 1;
        (line, col)
    }

    fn error(&self, pos: usize, message: impl Into<String>) -> ParseError {
        let (line, col) = self.location(pos);
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if start >= bytes.len() {
            return Ok((Tok::End, start));
        }
        let c = bytes[start];
        if c.is_ascii_digit() || c == b'.' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut e = end + 1;
                if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                    e += 1;
                }
                if e < bytes.len() && bytes[e].is_ascii_digit() {
                    while e < bytes.len() && bytes[e].is_ascii_digit() {
                        e += 1;
                    }
                    end = e;
                }
            }
            let text = &self.src[start..end];
            let value: f64 = text
                .parse()
                .map_err(|_| self.error(start, format!("malformed number '{text}'")))?;
            if !value.is_finite() {
                return Err(self.error(start, format!("number out of range '{text}'")));
            }
            self.pos = end;
            return Ok((Tok::Num(value, literal_enclosure(text, value)), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        if b"+-*/^()".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Op(c as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(self.error(start, format!("unexpected character '{ch}'")))
    }
}

/// Tight enclosure of the real number written as `text`, whose nearest
/// double is `value`.
fn literal_enclosure(text: &str, value: f64) -> Interval {
    if decimal_is_exact(text, value) {
        Interval::point(value)
    } else {
        Interval::new(value.next_down(), value.next_up())
    }
}

/// Whether the decimal literal `text` denotes exactly the double `value`.
/// Answers `false` whenever the check would overflow.
fn decimal_is_exact(text: &str, value: f64) -> bool {
    let (mant, exp) = match text.find(['e', 'E']) {
        Some(i) => match text[i + 1..].parse::<i32>() {
            Ok(e) => (&text[..i], e),
            Err(_) => return false,
        },
        None => (text, 0),
    };
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    let digits: String = format!("{int_part}{frac_part}");
    let digits = digits.trim_start_matches('0');
    let mut dec_exp = exp - frac_part.len() as i32;
    if digits.is_empty() {
        return value == 0.0;
    }
    let trimmed = digits.trim_end_matches('0');
    dec_exp += (digits.len() - trimmed.len()) as i32;
    let Ok(mut m) = trimmed.parse::<u128>() else {
        return false;
    };
    if value == 0.0 {
        return false;
    }
    // value = s * 2^q with s odd
    let bits = value.abs().to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut s, mut q) = if raw_exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), raw_exp - 1075)
    };
    let tz = s.trailing_zeros();
    s >>= tz;
    q += tz as i32;
    let mut s = s as u128;
    // Compare s * 2^q with m * 10^dec_exp = m * 5^dec_exp * 2^dec_exp.
    let mut pow2 = q;
    if dec_exp >= 0 {
        for _ in 0..dec_exp {
            m = match m.checked_mul(5) {
                Some(v) => v,
                None => return false,
            };
        }
        pow2 -= dec_exp;
    } else {
        for _ in 0..(-dec_exp) {
            s = match s.checked_mul(5) {
                Some(v) => v,
                None => return false,
            };
        }
        pow2 -= dec_exp;
    }
    // Now s * 2^pow2 == m must hold, with s odd.
    let mz = m.trailing_zeros() as i32;
    let m_odd = m >> mz;
    m_odd == s && mz == pow2
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    tok_pos: usize,
    vars: &'a [String],
}

impl<'a> Parser<'a> {
    fn advance(&mut self) -> Result<(), ParseError> {
        let (t, p) = self.lex.next()?;
        self.tok = t;
        self.tok_pos = p;
        Ok(())
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        self.lex.error(self.tok_pos, message)
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.tok == Tok::Op(c) {
            self.advance()
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Op('+') => {
                    self.advance()?;
                    lhs = Expr::add(lhs, self.term()?);
                }
                Tok::Op('-') => {
                    self.advance()?;
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Tok::Op('*') => {
                    self.advance()?;
                    lhs = Expr::mul(lhs, self.unary()?);
                }
                Tok::Op('/') => {
                    let at = self.tok_pos;
                    self.advance()?;
                    let rhs = self.unary()?;
                    lhs = match (lhs.as_const(), rhs.as_const()) {
                        (Some(a), Some(b)) => Expr::const_quotient(a, b)
                            .map_err(|_| self.lex.error(at, "division by zero"))?,
                        _ => Expr::div(lhs, rhs),
                    };
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Op('-') {
            self.advance()?;
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.tok != Tok::Op('^') {
            return Ok(base);
        }
        self.advance()?;
        match self.tok {
            Tok::Num(v, _) if v.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&v) => {
                self.advance()?;
                Ok(Expr::pow(base, v as u32))
            }
            _ => Err(self.error("exponent must be a non-negative integer literal")),
        }
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v, enc) => {
                self.advance()?;
                Ok(if enc.is_point() {
                    Expr::constant(v)
                } else {
                    Expr::constant_enclosed(v, enc)
                })
            }
            Tok::Ident(name) => {
                let at = self.tok_pos;
                self.advance()?;
                if self.tok == Tok::Op('(') {
                    let f: fn(Expr) -> Expr = match name.as_str() {
                        "sin" => Expr::sin,
                        "cos" => Expr::cos,
                        "exp" => Expr::exp,
                        "log" => Expr::log,
                        "sqrt" => Expr::sqrt,
                        _ => return Err(self.lex.error(at, format!("unknown function '{name}'"))),
                    };
                    self.advance()?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(f(arg));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Expr::var(i)),
                    None => Err(self.lex.error(at, format!("unknown identifier '{name}'"))),
                }
            }
            Tok::Op('(') => {
                self.advance()?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::End => Err(self.error("unexpected end of input")),
            Tok::Op(c) => Err(self.error(format!("unexpected '{c}'"))),
        }
    }
}

/// Parses one expression over the named variables.
pub fn parse_expr(text: &str, vars: &[String]) -> Result<Expr, ParseError> {
    let mut p = Parser {
        lex: Lexer { src: text, pos: 0 },
        tok: Tok::End,
        tok_pos: 0,
        vars,
    };
    p.advance()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}
