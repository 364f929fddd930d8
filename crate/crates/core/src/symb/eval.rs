use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::Float;

use super::expr::{Expr, Node};
use crate::error::DomainError;

pub(crate) fn powi(mut base: f64, n: i32) -> f64 {
    let neg = n < 0;
    let mut e = n.unsigned_abs();
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        e >>= 1;
        if e > 0 {
            base *= base;
        }
    }
    if neg {
        1.0 / acc
    } else {
        acc
    }
}

fn checked_recip(v: f64) -> Result<f64, DomainError> {
    if v == 0.0 {
        Err(DomainError::DivisionByZero)
    } else {
        Ok(1.0 / v)
    }
}

fn checked_ln(v: f64) -> Result<f64, DomainError> {
    if v <= 0.0 || v.is_nan() {
        Err(DomainError::LogNonPositive(v))
    } else {
        Ok(v.ln())
    }
}

fn checked_pow(base: f64, n: i32) -> Result<f64, DomainError> {
    if n < 0 && base == 0.0 {
        Err(DomainError::DivisionByZero)
    } else {
        Ok(powi(base, n))
    }
}

impl Expr {
    /// IEEE double evaluation at a point of the chart.
    pub fn eval(&self, p: &[f64]) -> Result<f64, DomainError> {
        Ok(match self.node() {
            Node::Const(c) => c.to_f64(),
            Node::Coord(i) => *p.get(*i).ok_or(DomainError::MissingCoordinate(*i))?,
            Node::Add(xs) => {
                let mut s = 0.0;
                for x in xs {
                    s += x.eval(p)?;
                }
                s
            }
            Node::Mul(xs) => {
                let mut s = 1.0;
                for x in xs {
                    s *= x.eval(p)?;
                }
                s
            }
            Node::Pow(b, n) => checked_pow(b.eval(p)?, *n)?,
            Node::Div(a, b) => a.eval(p)? * checked_recip(b.eval(p)?)?,
            Node::Sin(a) => a.eval(p)?.sin(),
            Node::Cos(a) => a.eval(p)?.cos(),
            Node::Exp(a) => a.eval(p)?.exp(),
            Node::Log(a) => checked_ln(a.eval(p)?)?,
        })
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Const(f64),
    Coord(usize),
    Add(usize, usize),
    Mul(usize, usize),
    Pow(usize, i32),
    Div(usize, usize),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Log(usize),
}

/// A list of expressions flattened into one straight-line program with
/// shared subexpressions evaluated once.
#[derive(Clone, Debug)]
pub struct Program {
    ops: Vec<Op>,
    outputs: Vec<usize>,
}

struct Builder {
    ops: Vec<Op>,
    memo: BTreeMap<Expr, usize>,
}

impl Builder {
    fn push(&mut self, op: Op) -> usize {
        self.ops.push(op);
        self.ops.len() - 1
    }

    fn emit(&mut self, e: &Expr) -> usize {
        if let Some(&r) = self.memo.get(e) {
            return r;
        }
        let r = match e.node() {
            Node::Const(c) => self.push(Op::Const(c.to_f64())),
            Node::Coord(i) => self.push(Op::Coord(*i)),
            Node::Add(xs) | Node::Mul(xs) => {
                let is_add = matches!(e.node(), Node::Add(_));
                let mut acc = self.emit(&xs[0]);
                for x in &xs[1..] {
                    let r = self.emit(x);
                    acc = self.push(if is_add { Op::Add(acc, r) } else { Op::Mul(acc, r) });
                }
                acc
            }
            Node::Pow(b, n) => {
                let r = self.emit(b);
                self.push(Op::Pow(r, *n))
            }
            Node::Div(a, b) => {
                let (ra, rb) = (self.emit(a), self.emit(b));
                self.push(Op::Div(ra, rb))
            }
            Node::Sin(a) => {
                let r = self.emit(a);
                self.push(Op::Sin(r))
            }
            Node::Cos(a) => {
                let r = self.emit(a);
                self.push(Op::Cos(r))
            }
            Node::Exp(a) => {
                let r = self.emit(a);
                self.push(Op::Exp(r))
            }
            Node::Log(a) => {
                let r = self.emit(a);
                self.push(Op::Log(r))
            }
        };
        self.memo.insert(e.clone(), r);
        r
    }
}

impl Program {
    pub fn compile(exprs: &[Expr]) -> Program {
        let mut b = Builder {
            ops: Vec::new(),
            memo: BTreeMap::new(),
        };
        let outputs = exprs
            .iter()
            .map(|e| {
                if let Node::Add(xs) | Node::Mul(xs) = e.node() {
                    if xs.is_empty() {
                        let z = if matches!(e.node(), Node::Add(_)) { 0.0 } else { 1.0 };
                        return b.push(Op::Const(z));
                    }
                }
                b.emit(e)
            })
            .collect();
        Program {
            ops: b.ops,
            outputs,
        }
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn scratch(&self) -> Vec<f64> {
        alloc::vec![0.0; self.ops.len()]
    }

    /// Evaluate all outputs at `p` into `out`, using `regs` as workspace
    /// (see [`Program::scratch`]).
    pub fn eval_into(&self, p: &[f64], regs: &mut [f64], out: &mut [f64]) -> Result<(), DomainError> {
        for (k, op) in self.ops.iter().enumerate() {
            let v = match *op {
                Op::Const(c) => c,
                Op::Coord(i) => *p.get(i).ok_or(DomainError::MissingCoordinate(i))?,
                Op::Add(a, b) => regs[a] + regs[b],
                Op::Mul(a, b) => regs[a] * regs[b],
                Op::Pow(a, n) => checked_pow(regs[a], n)?,
                Op::Div(a, b) => regs[a] * checked_recip(regs[b])?,
                Op::Sin(a) => regs[a].sin(),
                Op::Cos(a) => regs[a].cos(),
                Op::Exp(a) => regs[a].exp(),
                Op::Log(a) => checked_ln(regs[a])?,
            };
            regs[k] = v;
        }
        for (o, &r) in out.iter_mut().zip(&self.outputs) {
            *o = regs[r];
        }
        Ok(())
    }

    /// Convenience allocation-per-call evaluation.
    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>, DomainError> {
        let mut regs = self.scratch();
        let mut out = alloc::vec![0.0; self.outputs.len()];
        self.eval_into(p, &mut regs, &mut out)?;
        Ok(out)
    }
}

/// Reusable evaluator bundling a program with its workspace.
#[derive(Clone, Debug)]
pub struct Evaluator {
    program: Program,
    regs: Vec<f64>,
    out: Vec<f64>,
}

impl Evaluator {
    pub fn new(exprs: &[Expr]) -> Evaluator {
        let program = Program::compile(exprs);
        let regs = program.scratch();
        let out = alloc::vec![0.0; program.outputs()];
        Evaluator { program, regs, out }
    }

    pub fn eval(&mut self, p: &[f64]) -> Result<&[f64], DomainError> {
        self.program.eval_into(p, &mut self.regs, &mut self.out)?;
        Ok(&self.out)
    }

    pub fn eval1(&mut self, p: &[f64]) -> Result<f64, DomainError> {
        Ok(self.eval(p)?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn cos_at_zero() {
        assert_eq!(Expr::coord(0).cos().eval(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn sin_squared_at_half_pi() {
        let e = Expr::coord(0).sin().square();
        assert!((e.eval(&[PI / 2.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sin_squared_double_angle() {
        let e = (Expr::int(2) * Expr::coord(0)).sin().square();
        assert!((e.eval(&[PI / 4.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let x = Expr::coord(0);
        assert_eq!(x.recip().eval(&[0.0]), Err(DomainError::DivisionByZero));
        assert!(matches!(x.ln().eval(&[-1.0]), Err(DomainError::LogNonPositive(_))));
        let prog = Program::compile(&[x.ln()]);
        assert!(prog.eval(&[0.0]).is_err());
    }

    #[test]
    fn compiled_matches_tree() {
        let x = Expr::coord(0);
        let y = Expr::coord(1);
        let e = (&x * &y).sin() + x.exp() / (y.square() + Expr::one()) - x.cos().powi(3);
        let prog = Program::compile(&[e.clone(), e.clone() * Expr::int(2)]);
        let p = [0.3, -1.2];
        let v = prog.eval(&p).unwrap();
        assert!((v[0] - e.eval(&p).unwrap()).abs() < 1e-14);
        assert!((v[1] - 2.0 * v[0]).abs() < 1e-14);
    }
}
