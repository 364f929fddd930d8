use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::{Add, Div, Mul, Neg, Sub};

use super::num::Num;

/// One node of an expression tree.
#[derive(Clone, Debug)]
pub enum Node {
    Const(Num),
    /// Index into the chart's coordinate tuple.
    Coord(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, i32),
    Div(Expr, Expr),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
    Log(Expr),
}

#[derive(Debug)]
struct Inner {
    node: Node,
    normal: bool,
}

/// Immutable, cheaply clonable scalar expression over chart coordinates.
///
/// Arithmetic operators return simplified expressions; use [`Expr::raw`] to
/// build a tree without normalization.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Inner>);

impl Expr {
    /// Wraps a node without simplifying it.
    pub fn raw(node: Node) -> Expr {
        Expr(Arc::new(Inner { node, normal: false }))
    }

    pub(crate) fn normal(node: Node) -> Expr {
        Expr(Arc::new(Inner { node, normal: true }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    /// True when the expression is known to be in simplified normal form.
    pub fn is_normal(&self) -> bool {
        self.0.normal
    }

    pub fn num(n: Num) -> Expr {
        Expr::normal(Node::Const(n))
    }

    pub fn int(v: i64) -> Expr {
        Expr::num(Num::int(v))
    }

    pub fn ratio(p: i64, q: i64) -> Expr {
        Expr::num(Num::ratio(p, q))
    }

    pub fn float(v: f64) -> Expr {
        Expr::num(Num::float(v))
    }

    pub fn zero() -> Expr {
        Expr::num(Num::ZERO)
    }

    pub fn one() -> Expr {
        Expr::num(Num::ONE)
    }

    pub fn coord(i: usize) -> Expr {
        Expr::normal(Node::Coord(i))
    }

    pub fn sin(&self) -> Expr {
        Expr::raw(Node::Sin(self.clone())).simplify()
    }

    pub fn cos(&self) -> Expr {
        Expr::raw(Node::Cos(self.clone())).simplify()
    }

    pub fn exp(&self) -> Expr {
        Expr::raw(Node::Exp(self.clone())).simplify()
    }

    pub fn ln(&self) -> Expr {
        Expr::raw(Node::Log(self.clone())).simplify()
    }

    pub fn powi(&self, n: i32) -> Expr {
        Expr::raw(Node::Pow(self.clone(), n)).simplify()
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    pub fn square(&self) -> Expr {
        self.powi(2)
    }

    /// Sum of a list of expressions, simplified once.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let v: Vec<Expr> = terms.into_iter().collect();
        match v.len() {
            0 => Expr::zero(),
            1 => v.into_iter().next().unwrap().simplify(),
            _ => Expr::raw(Node::Add(v)).simplify(),
        }
    }

    /// Product of a list of expressions, simplified once.
    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let v: Vec<Expr> = factors.into_iter().collect();
        match v.len() {
            0 => Expr::one(),
            1 => v.into_iter().next().unwrap().simplify(),
            _ => Expr::raw(Node::Mul(v)).simplify(),
        }
    }

    pub fn as_const(&self) -> Option<Num> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Structurally the constant zero (after simplification).
    pub fn is_const_zero(&self) -> bool {
        self.simplify().as_const().is_some_and(|c| c.is_zero())
    }

    pub fn is_const(&self) -> bool {
        !self.any_coord()
    }

    fn any_coord(&self) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Coord(_) => true,
            Node::Add(xs) | Node::Mul(xs) => xs.iter().any(Expr::any_coord),
            Node::Pow(b, _) => b.any_coord(),
            Node::Div(a, b) => a.any_coord() || b.any_coord(),
            Node::Sin(a) | Node::Cos(a) | Node::Exp(a) | Node::Log(a) => a.any_coord(),
        }
    }

    /// Whether coordinate `i` occurs anywhere in the tree.
    pub fn depends_on(&self, i: usize) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Coord(j) => *j == i,
            Node::Add(xs) | Node::Mul(xs) => xs.iter().any(|x| x.depends_on(i)),
            Node::Pow(b, _) => b.depends_on(i),
            Node::Div(a, b) => a.depends_on(i) || b.depends_on(i),
            Node::Sin(a) | Node::Cos(a) | Node::Exp(a) | Node::Log(a) => a.depends_on(i),
        }
    }

    /// Highest coordinate index used plus one (0 for constants).
    pub fn arity(&self) -> usize {
        match self.node() {
            Node::Const(_) => 0,
            Node::Coord(j) => j + 1,
            Node::Add(xs) | Node::Mul(xs) => xs.iter().map(Expr::arity).max().unwrap_or(0),
            Node::Pow(b, _) => b.arity(),
            Node::Div(a, b) => a.arity().max(b.arity()),
            Node::Sin(a) | Node::Cos(a) | Node::Exp(a) | Node::Log(a) => a.arity(),
        }
    }

    /// Every subexpression that ends up in a denominator: bases of negative
    /// powers and right operands of divisions.
    pub fn denominators(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        self.collect_denominators(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_denominators(&self, out: &mut Vec<Expr>) {
        match self.node() {
            Node::Const(_) | Node::Coord(_) => {}
            Node::Add(xs) | Node::Mul(xs) => xs.iter().for_each(|x| x.collect_denominators(out)),
            Node::Pow(b, n) => {
                if *n < 0 {
                    out.push(b.clone());
                }
                b.collect_denominators(out);
            }
            Node::Div(a, b) => {
                out.push(b.clone());
                a.collect_denominators(out);
                b.collect_denominators(out);
            }
            Node::Log(a) => {
                // log has a pole where its argument vanishes
                out.push(a.clone());
                a.collect_denominators(out);
            }
            Node::Sin(a) | Node::Cos(a) | Node::Exp(a) => a.collect_denominators(out),
        }
    }

    /// Number of nodes, counting shared subtrees once per occurrence.
    pub fn size(&self) -> usize {
        1 + match self.node() {
            Node::Const(_) | Node::Coord(_) => 0,
            Node::Add(xs) | Node::Mul(xs) => xs.iter().map(Expr::size).sum(),
            Node::Pow(b, _) => b.size(),
            Node::Div(a, b) => a.size() + b.size(),
            Node::Sin(a) | Node::Cos(a) | Node::Exp(a) | Node::Log(a) => a.size(),
        }
    }

    /// Replace coordinate `i` by `with` everywhere, then simplify.
    pub fn substitute(&self, i: usize, with: &Expr) -> Expr {
        self.subst_raw(i, with).simplify()
    }

    fn subst_raw(&self, i: usize, with: &Expr) -> Expr {
        if !self.depends_on(i) {
            return self.clone();
        }
        let node = match self.node() {
            Node::Const(_) => unreachable!(),
            Node::Coord(_) => return with.clone(),
            Node::Add(xs) => Node::Add(xs.iter().map(|x| x.subst_raw(i, with)).collect()),
            Node::Mul(xs) => Node::Mul(xs.iter().map(|x| x.subst_raw(i, with)).collect()),
            Node::Pow(b, n) => Node::Pow(b.subst_raw(i, with), *n),
            Node::Div(a, b) => Node::Div(a.subst_raw(i, with), b.subst_raw(i, with)),
            Node::Sin(a) => Node::Sin(a.subst_raw(i, with)),
            Node::Cos(a) => Node::Cos(a.subst_raw(i, with)),
            Node::Exp(a) => Node::Exp(a.subst_raw(i, with)),
            Node::Log(a) => Node::Log(a.subst_raw(i, with)),
        };
        Expr::raw(node)
    }

    fn rank(&self) -> u8 {
        match self.node() {
            Node::Const(_) => 0,
            Node::Coord(_) => 1,
            Node::Sin(_) => 2,
            Node::Cos(_) => 3,
            Node::Exp(_) => 4,
            Node::Log(_) => 5,
            Node::Pow(..) => 6,
            Node::Div(..) => 7,
            Node::Mul(_) => 8,
            Node::Add(_) => 9,
        }
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Expr) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        let r = self.rank().cmp(&other.rank());
        if r != Ordering::Equal {
            return r;
        }
        match (self.node(), other.node()) {
            (Node::Const(a), Node::Const(b)) => a.total_cmp(b),
            (Node::Coord(a), Node::Coord(b)) => a.cmp(b),
            (Node::Add(a), Node::Add(b)) | (Node::Mul(a), Node::Mul(b)) => {
                a.len().cmp(&b.len()).then_with(|| a.cmp(b))
            }
            (Node::Pow(a, n), Node::Pow(b, m)) => a.cmp(b).then(n.cmp(m)),
            (Node::Div(a, b), Node::Div(c, d)) => a.cmp(c).then_with(|| b.cmp(d)),
            (Node::Sin(a), Node::Sin(b))
            | (Node::Cos(a), Node::Cos(b))
            | (Node::Exp(a), Node::Exp(b))
            | (Node::Log(a), Node::Log(b)) => a.cmp(b),
            _ => unreachable!("rank equality implies matching variants"),
        }
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Expr) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Expr {}

impl From<i64> for Expr {
    fn from(v: i64) -> Expr {
        Expr::int(v)
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::float(v)
    }
}

impl From<Num> for Expr {
    fn from(v: Num) -> Expr {
        Expr::num(v)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, |$a:ident, $b:ident| $body:expr) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let ($a, $b) = (self, rhs);
                $body
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let ($a, $b) = (self, rhs.clone());
                $body
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let ($a, $b) = (self.clone(), rhs);
                $body
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let ($a, $b) = (self.clone(), rhs.clone());
                $body
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::raw(Node::Add(alloc::vec![a, b])).simplify());
binop!(Mul, mul, |a, b| Expr::raw(Node::Mul(alloc::vec![a, b])).simplify());
binop!(Sub, sub, |a, b| {
    let nb = Expr::raw(Node::Mul(alloc::vec![Expr::int(-1), b]));
    Expr::raw(Node::Add(alloc::vec![a, nb])).simplify()
});
binop!(Div, div, |a, b| Expr::raw(Node::Div(a, b)).simplify());

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::raw(Node::Mul(alloc::vec![Expr::int(-1), self])).simplify()
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -(self.clone())
    }
}
