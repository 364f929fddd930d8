//! Normal form: a sum of monomials with numeric coefficients.
//!
//! A monomial is a sorted list of `(atom, exponent)` pairs. Atoms are
//! coordinates, `sin`/`cos`/`log` of normalized arguments, a single merged
//! `exp` factor, and multi-term sums raised to negative powers (kept with a
//! leading coefficient of one). Positive integer powers of sums are expanded.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::Float;

use super::expr::{Expr, Node};
use super::num::Num;

type Monomial = Vec<(Expr, i32)>;

#[derive(Clone, Default)]
struct Poly {
    terms: BTreeMap<Monomial, Num>,
}

impl Poly {
    fn constant(c: Num) -> Poly {
        let mut p = Poly::default();
        if !c.is_zero() {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    fn atom(a: Expr) -> Poly {
        let mut p = Poly::default();
        p.terms.insert(alloc::vec![(a, 1)], Num::ONE);
        p
    }

    fn add_term(&mut self, m: Monomial, c: Num) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                let s = v.add(c);
                if s.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *v = s;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    fn add(mut self, other: Poly) -> Poly {
        if self.terms.len() < other.terms.len() {
            return other.add(self);
        }
        for (m, c) in other.terms {
            self.add_term(m, c);
        }
        self
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let (m, extra) = mul_monomials(ma, mb);
                out.add_term(m, ca.mul(*cb).mul(extra));
            }
        }
        out
    }

    fn pow(&self, n: u32) -> Poly {
        let mut acc = Poly::constant(Num::ONE);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    fn single(&self) -> Option<(&Monomial, Num)> {
        if self.terms.len() == 1 {
            self.terms.iter().next().map(|(m, c)| (m, *c))
        } else {
            None
        }
    }

    fn as_const(&self) -> Option<Num> {
        if self.terms.is_empty() {
            return Some(Num::ZERO);
        }
        match self.single() {
            Some((m, c)) if m.is_empty() => Some(c),
            _ => None,
        }
    }

    fn scale(mut self, c: Num) -> Poly {
        if c.is_zero() {
            return Poly::default();
        }
        for v in self.terms.values_mut() {
            *v = v.mul(c);
        }
        self.terms.retain(|_, v| !v.is_zero());
        self
    }

    fn to_expr(&self) -> Expr {
        if self.terms.is_empty() {
            return Expr::zero();
        }
        let mut addends: Vec<Expr> = self
            .terms
            .iter()
            .map(|(m, c)| monomial_expr(m, *c))
            .collect();
        if addends.len() == 1 {
            addends.pop().unwrap()
        } else {
            Expr::normal(Node::Add(addends))
        }
    }
}

fn monomial_expr(m: &Monomial, c: Num) -> Expr {
    let mut factors = Vec::with_capacity(m.len() + 1);
    if !c.is_one() || m.is_empty() {
        factors.push(Expr::num(c));
    }
    for (a, e) in m {
        if *e == 1 {
            factors.push(a.clone());
        } else {
            factors.push(Expr::normal(Node::Pow(a.clone(), *e)));
        }
    }
    if factors.len() == 1 {
        factors.pop().unwrap()
    } else {
        Expr::normal(Node::Mul(factors))
    }
}

fn push_factor(out: &mut Monomial, atom: &Expr, e: i32, exp_arg: &mut Option<Poly>) {
    if let Node::Exp(arg) = atom.node() {
        let p = to_poly(arg).scale(Num::int(e as i64));
        *exp_arg = Some(match exp_arg.take() {
            Some(q) => q.add(p),
            None => p,
        });
    } else {
        out.push((atom.clone(), e));
    }
}

/// Product of two monomials; exp atoms merge into one, which may fold to a
/// numeric factor (returned separately).
fn mul_monomials(a: &Monomial, b: &Monomial) -> (Monomial, Num) {
    let mut out: Monomial = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut exp_arg: Option<Poly> = None;
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            push_factor(&mut out, &a[i].0, a[i].1, &mut exp_arg);
            i += 1;
        } else if i >= a.len() || b[j].0 < a[i].0 {
            push_factor(&mut out, &b[j].0, b[j].1, &mut exp_arg);
            j += 1;
        } else {
            let e = a[i].1 + b[j].1;
            if matches!(a[i].0.node(), Node::Exp(_)) {
                push_factor(&mut out, &a[i].0, a[i].1, &mut exp_arg);
                push_factor(&mut out, &b[j].0, b[j].1, &mut exp_arg);
            } else if e != 0 {
                out.push((a[i].0.clone(), e));
            }
            i += 1;
            j += 1;
        }
    }
    let mut extra = Num::ONE;
    if let Some(arg) = exp_arg {
        match arg.as_const() {
            Some(c) if c.is_zero() => {}
            Some(c) => extra = Num::float(c.to_f64().exp()),
            None => {
                let atom = Expr::normal(Node::Exp(arg.to_expr()));
                let pos = out.partition_point(|(x, _)| *x < atom);
                out.insert(pos, (atom, 1));
            }
        }
    }
    (out, extra)
}

/// Inverse of a single monomial raised to `n < 0`.
fn monomial_pow(m: &Monomial, c: Num, n: i32) -> Poly {
    let coef = match c.powi(n) {
        Some(v) => v,
        None => return Poly::atom(Expr::normal(Node::Pow(Expr::zero(), n))),
    };
    let mut acc = Poly::constant(coef);
    for (atom, e) in m {
        let k = e * n;
        let factor = match atom.node() {
            Node::Exp(arg) => {
                let p = to_poly(arg).scale(Num::int(k as i64));
                exp_poly(p)
            }
            Node::Add(_) if k > 0 => to_poly(atom).pow(k as u32),
            _ => {
                let mut p = Poly::default();
                p.terms.insert(alloc::vec![(atom.clone(), k)], Num::ONE);
                p
            }
        };
        acc = acc.mul(&factor);
    }
    acc
}

fn exp_poly(arg: Poly) -> Poly {
    match arg.as_const() {
        Some(c) if c.is_zero() => Poly::constant(Num::ONE),
        Some(c) => Poly::constant(Num::float(c.to_f64().exp())),
        None => Poly::atom(Expr::normal(Node::Exp(arg.to_expr()))),
    }
}

fn negative_power(base: Poly, n: i32) -> Poly {
    debug_assert!(n < 0);
    if base.terms.is_empty() {
        return Poly::atom(Expr::normal(Node::Pow(Expr::zero(), n)));
    }
    if let Some((m, c)) = base.single() {
        let m = m.clone();
        return monomial_pow(&m, c, n);
    }
    // Normalize the sum so its leading coefficient is one.
    let lead = *base.terms.values().next().unwrap();
    let inv = lead.recip().unwrap_or(Num::ONE);
    let normalized = base.scale(inv);
    let atom = normalized.to_expr();
    let mut p = Poly::default();
    p.terms
        .insert(alloc::vec![(atom, n)], lead.powi(n).unwrap_or(Num::ONE));
    p
}

fn unary_atom(arg: &Expr, node_of: fn(Expr) -> Node, fold: fn(f64) -> f64) -> Poly {
    let a = arg.simplify();
    if let Some(c) = a.as_const() {
        return Poly::constant(Num::float(fold(c.to_f64())));
    }
    Poly::atom(Expr::normal(node_of(a)))
}

fn to_poly(e: &Expr) -> Poly {
    match e.node() {
        Node::Const(c) => Poly::constant(*c),
        Node::Coord(_) => Poly::atom(e.clone()),
        Node::Add(xs) => xs.iter().fold(Poly::default(), |acc, x| acc.add(to_poly(x))),
        Node::Mul(xs) => {
            let mut acc = Poly::constant(Num::ONE);
            for x in xs {
                if acc.terms.is_empty() {
                    break;
                }
                acc = acc.mul(&to_poly(x));
            }
            acc
        }
        Node::Pow(b, n) => {
            let n = *n;
            if n == 0 {
                return Poly::constant(Num::ONE);
            }
            if e.is_normal() {
                // normal-form powers are atoms already
                if let Node::Add(_) = b.node() {
                    let mut p = Poly::default();
                    p.terms.insert(alloc::vec![(b.clone(), n)], Num::ONE);
                    return p;
                }
            }
            let base = to_poly(b);
            if n > 0 {
                base.pow(n as u32)
            } else {
                negative_power(base, n)
            }
        }
        Node::Div(a, b) => {
            let num = to_poly(a);
            if num.terms.is_empty() {
                return num;
            }
            num.mul(&negative_power(to_poly(b), -1))
        }
        Node::Sin(a) => {
            if e.is_normal() {
                return Poly::atom(e.clone());
            }
            let a = a.simplify();
            match a.as_const() {
                Some(c) if c.is_zero() => Poly::default(),
                _ => unary_atom(&a, Node::Sin, <f64 as Float>::sin),
            }
        }
        Node::Cos(a) => {
            if e.is_normal() {
                return Poly::atom(e.clone());
            }
            let a = a.simplify();
            match a.as_const() {
                Some(c) if c.is_zero() => Poly::constant(Num::ONE),
                _ => unary_atom(&a, Node::Cos, <f64 as Float>::cos),
            }
        }
        Node::Log(a) => {
            if e.is_normal() {
                return Poly::atom(e.clone());
            }
            let a = a.simplify();
            match a.as_const() {
                Some(c) if c.is_one() => Poly::default(),
                // log of a non-positive constant stays symbolic so evaluation reports it
                Some(c) if c.to_f64() <= 0.0 => Poly::atom(Expr::normal(Node::Log(a))),
                _ => unary_atom(&a, Node::Log, <f64 as Float>::ln),
            }
        }
        Node::Exp(a) => {
            if e.is_normal() {
                return Poly::atom(e.clone());
            }
            exp_poly(to_poly(a))
        }
    }
}

impl Expr {
    /// Normal form: flattened sums and products, folded constants, merged
    /// like terms and like factors. Idempotent.
    pub fn simplify(&self) -> Expr {
        if self.is_normal() {
            return self.clone();
        }
        to_poly(self).to_expr()
    }

    /// Coefficient-weighted term count, a rough size measure of the normal form.
    pub fn term_count(&self) -> usize {
        match self.simplify().node() {
            Node::Add(xs) => xs.len(),
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::coord(0)
    }

    #[test]
    fn zero_times_anything() {
        let e = Expr::raw(Node::Mul(alloc::vec![Expr::zero(), x()]));
        assert_eq!(e.simplify(), Expr::zero());
    }

    #[test]
    fn add_zero() {
        let e = Expr::raw(Node::Add(alloc::vec![x(), Expr::zero()]));
        assert_eq!(e.simplify(), x());
    }

    #[test]
    fn like_terms_merge() {
        let two_x = Expr::raw(Node::Mul(alloc::vec![Expr::int(2), x()]));
        let three_x = Expr::raw(Node::Mul(alloc::vec![Expr::int(3), x()]));
        let e = Expr::raw(Node::Add(alloc::vec![two_x, three_x]));
        let five_x = Expr::int(5) * x();
        assert_eq!(e.simplify(), five_x);
        assert!(matches!(five_x.node(), Node::Mul(v) if v.len() == 2));
    }

    #[test]
    fn like_factors_merge_and_cancel() {
        let s = x().sin();
        assert_eq!(&s * &s, s.powi(2));
        assert_eq!(s.powi(2) / s.powi(2), Expr::one());
        assert_eq!(x().exp() * (-x()).exp(), Expr::one());
    }

    #[test]
    fn sums_in_denominators_are_normalized() {
        let a = Expr::one() / (Expr::int(2) * x() + Expr::int(2));
        let b = Expr::ratio(1, 2) / (x() + Expr::one());
        assert_eq!(a, b);
    }

    #[test]
    fn transcendental_constants_fold() {
        assert_eq!(Expr::zero().sin(), Expr::zero());
        assert_eq!(Expr::zero().cos(), Expr::one());
        assert_eq!(Expr::one().ln(), Expr::zero());
        let c = Expr::one().sin();
        assert!(!c.as_const().unwrap().is_exact());
    }

    #[test]
    fn expansion() {
        let e = (x() + Expr::one()).powi(2);
        let expect = x().powi(2) + Expr::int(2) * x() + Expr::one();
        assert_eq!(e, expect);
    }
}
