use alloc::format;
use alloc::string::String;
use core::fmt;

use super::expr::{Expr, Node};

/// Infix rendering of an expression with named coordinates. The output
/// re-parses with [`crate::symb::parse`] to the same normal form.
pub struct Pretty<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl Expr {
    pub fn pretty<'a>(&'a self, names: &'a [String]) -> Pretty<'a> {
        Pretty { expr: self, names }
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(c) => {
            if c.is_negative() {
                PREC_UNARY
            } else if c.as_ratio().is_some_and(|(_, d)| d != 1) {
                PREC_MUL
            } else {
                PREC_ATOM
            }
        }
        Node::Coord(_) | Node::Sin(_) | Node::Cos(_) | Node::Exp(_) | Node::Log(_) => PREC_ATOM,
        Node::Pow(..) => PREC_POW,
        Node::Mul(xs) => {
            if xs.first().and_then(Expr::as_const).is_some_and(|c| c.is_negative()) {
                PREC_UNARY
            } else {
                PREC_MUL
            }
        }
        Node::Div(..) => PREC_MUL,
        Node::Add(_) => PREC_ADD,
    }
}

impl<'a> Pretty<'a> {
    fn sub(&self, e: &'a Expr) -> Pretty<'a> {
        Pretty {
            expr: e,
            names: self.names,
        }
    }

    fn write_wrapped(&self, f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
        if precedence(e) < min {
            write!(f, "({})", self.sub_owned(e))
        } else {
            write!(f, "{}", self.sub_owned(e))
        }
    }

    fn sub_owned(&self, e: &Expr) -> String {
        format!("{}", Pretty { expr: e, names: self.names })
    }

    fn coord_name(&self, i: usize) -> String {
        match self.names.get(i) {
            Some(n) => n.clone(),
            None => format!("x{i}"),
        }
    }
}

impl fmt::Display for Pretty<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr.node() {
            Node::Const(c) => write!(f, "{c}"),
            Node::Coord(i) => write!(f, "{}", self.coord_name(*i)),
            Node::Add(xs) => {
                if xs.is_empty() {
                    return write!(f, "0");
                }
                for (k, x) in xs.iter().enumerate() {
                    let neg = precedence(x) == PREC_UNARY;
                    if k == 0 {
                        self.write_wrapped(f, x, PREC_ADD)?;
                    } else if neg {
                        // print "a - b" instead of "a + -b"
                        let s = self.sub_owned(x);
                        write!(f, " - {}", s.strip_prefix('-').unwrap_or(&s))?;
                    } else {
                        write!(f, " + ")?;
                        self.write_wrapped(f, x, PREC_ADD)?;
                    }
                }
                Ok(())
            }
            Node::Mul(xs) => {
                if xs.is_empty() {
                    return write!(f, "1");
                }
                let mut rest = &xs[..];
                if let Some(c) = xs[0].as_const() {
                    if xs.len() > 1 {
                        if c.is_one() {
                            rest = &xs[1..];
                        } else if c.neg().is_one() {
                            write!(f, "-")?;
                            rest = &xs[1..];
                        }
                    }
                }
                for (k, x) in rest.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    let min = if k == 0 && x.as_const().is_some() { PREC_UNARY } else { PREC_POW };
                    self.write_wrapped(f, x, min)?;
                }
                Ok(())
            }
            Node::Pow(b, n) => {
                self.write_wrapped(f, b, PREC_ATOM)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Node::Div(a, b) => {
                self.write_wrapped(f, a, PREC_MUL)?;
                write!(f, "/")?;
                self.write_wrapped(f, b, PREC_POW)
            }
            Node::Sin(a) => write!(f, "sin({})", self.sub(a)),
            Node::Cos(a) => write!(f, "cos({})", self.sub(a)),
            Node::Exp(a) => write!(f, "exp({})", self.sub(a)),
            Node::Log(a) => write!(f, "log({})", self.sub(a)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pretty(&[]))
    }
}
