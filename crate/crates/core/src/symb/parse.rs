//! Infix grammar for expression literals.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' exponent)?
//! exponent:= ['-'] integer | '(' ['-'] integer ')'
//! primary := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! Functions: `sin cos exp log ln tan sinh cosh tanh`. The hyperbolic and
//! `tan` forms expand into `exp`, `sin` and `cos`. `pi` is a constant unless
//! it names a coordinate.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::expr::{Expr, Node};
use super::num::Num;
use crate::error::ParseError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Num),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
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
            let text = &src[start..i];
            out.push((start, Tok::Num(parse_number(text).ok_or_else(|| ParseError::new(start, "malformed number"))?)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(ParseError::new(i, "unexpected character"));
        }
    }
    Ok(out)
}

/// Decimal literal to an exact rational when it fits, else a float.
fn parse_number(text: &str) -> Option<Num> {
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(k) => (&text[..k], text[k + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(k) => (&mantissa[..k], &mantissa[k + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if frac_part.contains('.') {
        return None;
    }
    let float = text.parse::<f64>().ok()?;
    let digits: String = int_part.chars().chain(frac_part.chars()).collect();
    let scale = exp - frac_part.len() as i32;
    let exact = (|| {
        let mut n: i64 = digits.parse().ok()?;
        let mut d: i64 = 1;
        if scale >= 0 {
            for _ in 0..scale {
                n = n.checked_mul(10)?;
            }
        } else {
            for _ in 0..(-scale) {
                d = d.checked_mul(10)?;
            }
        }
        Some(Num::ratio(n, d))
    })();
    Some(exact.unwrap_or(Num::float(float)))
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    names: &'a [String],
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.len)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(ParseError::new(self.offset(), match c {
                ')' => "expected ')'",
                '(' => "expected '('",
                _ => "unexpected token",
            }))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = alloc::vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                let t = self.term()?;
                terms.push(Expr::raw(Node::Mul(alloc::vec![Expr::int(-1), t])));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::raw(Node::Add(terms)) })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                let r = self.unary()?;
                acc = Expr::raw(Node::Mul(alloc::vec![acc, r]));
            } else if self.eat('/') {
                let r = self.unary()?;
                acc = Expr::raw(Node::Div(acc, r));
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            let e = self.unary()?;
            return Ok(Expr::raw(Node::Mul(alloc::vec![Expr::int(-1), e])));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn integer_exponent(&mut self) -> Result<i32, ParseError> {
        let at = self.offset();
        let paren = self.eat('(');
        let neg = self.eat('-');
        let n = match self.peek() {
            Some(Tok::Num(n)) => match n.as_ratio() {
                Some((p, 1)) => i32::try_from(p).map_err(|_| ParseError::new(at, "exponent too large"))?,
                _ => return Err(ParseError::new(at, "exponent must be an integer")),
            },
            _ => return Err(ParseError::new(at, "exponent must be an integer")),
        };
        self.pos += 1;
        if paren {
            self.expect(')')?;
        }
        Ok(if neg { -n } else { n })
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat('^') {
            let n = self.integer_exponent()?;
            return Ok(Expr::raw(Node::Pow(base, n)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Expr::num(n))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(i) = self.names.iter().position(|n| *n == name) {
                    return Ok(Expr::coord(i));
                }
                if self.peek() == Some(&Tok::Op('(')) {
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return apply_function(&name, arg).ok_or_else(|| ParseError::new(at, "unknown function"));
                }
                match name.as_str() {
                    "pi" => Ok(Expr::float(core::f64::consts::PI)),
                    _ => Err(ParseError::new(at, "unknown coordinate name")),
                }
            }
            _ => Err(ParseError::new(at, "expected a number, name or '('")),
        }
    }
}

fn apply_function(name: &str, a: Expr) -> Option<Expr> {
    let exp = |e: Expr| Expr::raw(Node::Exp(e));
    let neg = |e: Expr| Expr::raw(Node::Mul(alloc::vec![Expr::int(-1), e]));
    Some(match name {
        "sin" => Expr::raw(Node::Sin(a)),
        "cos" => Expr::raw(Node::Cos(a)),
        "exp" => exp(a),
        "log" | "ln" => Expr::raw(Node::Log(a)),
        "tan" => Expr::raw(Node::Div(Expr::raw(Node::Sin(a.clone())), Expr::raw(Node::Cos(a)))),
        "sinh" => Expr::raw(Node::Mul(alloc::vec![
            Expr::ratio(1, 2),
            Expr::raw(Node::Add(alloc::vec![exp(a.clone()), neg(exp(neg(a)))])),
        ])),
        "cosh" => Expr::raw(Node::Mul(alloc::vec![
            Expr::ratio(1, 2),
            Expr::raw(Node::Add(alloc::vec![exp(a.clone()), exp(neg(a))])),
        ])),
        // tanh u = 1 - 2 / (exp(2u) + 1)
        "tanh" => {
            let e2 = exp(Expr::raw(Node::Mul(alloc::vec![Expr::int(2), a])));
            let den = Expr::raw(Node::Add(alloc::vec![e2, Expr::one()]));
            Expr::raw(Node::Add(alloc::vec![
                Expr::one(),
                Expr::raw(Node::Mul(alloc::vec![Expr::int(-2), Expr::raw(Node::Pow(den, -1))])),
            ]))
        }
        _ => return None,
    })
}

/// Parses `src` against the coordinate names of a chart; the result is simplified.
pub fn parse(src: &str, names: &[String]) -> Result<Expr, ParseError> {
    Ok(parse_raw(src, names)?.simplify())
}

/// Parses without simplifying.
pub fn parse_raw(src: &str, names: &[String]) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    if toks.is_empty() {
        return Err(ParseError::new(0, "empty expression"));
    }
    let mut p = Parser {
        toks,
        pos: 0,
        names,
        len: src.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(ParseError::new(p.offset(), "trailing input"));
    }
    Ok(e)
}
