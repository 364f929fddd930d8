use alloc::vec::Vec;

use super::expr::{Expr, Node};

impl Expr {
    /// Exact partial derivative with respect to coordinate `i`, simplified.
    pub fn diff(&self, i: usize) -> Expr {
        self.diff_raw(i).simplify()
    }

    /// Mixed partial `∂^α` for a multi-index given as per-axis counts.
    pub fn diff_multi(&self, alpha: &[u32]) -> Expr {
        let mut e = self.clone();
        for (axis, &k) in alpha.iter().enumerate() {
            for _ in 0..k {
                if e.is_const_zero() {
                    return Expr::zero();
                }
                e = e.diff(axis);
            }
        }
        e.simplify()
    }

    fn diff_raw(&self, i: usize) -> Expr {
        if !self.depends_on(i) {
            return Expr::zero();
        }
        match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Coord(j) => {
                if *j == i {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(xs) => Expr::raw(Node::Add(
                xs.iter()
                    .filter(|x| x.depends_on(i))
                    .map(|x| x.diff_raw(i))
                    .collect(),
            )),
            Node::Mul(xs) => {
                let mut addends = Vec::new();
                for (k, xk) in xs.iter().enumerate() {
                    if !xk.depends_on(i) {
                        continue;
                    }
                    let mut factors = Vec::with_capacity(xs.len());
                    factors.push(xk.diff_raw(i));
                    factors.extend(
                        xs.iter()
                            .enumerate()
                            .filter(|(j, _)| *j != k)
                            .map(|(_, x)| x.clone()),
                    );
                    addends.push(Expr::raw(Node::Mul(factors)));
                }
                Expr::raw(Node::Add(addends))
            }
            Node::Pow(b, n) => Expr::raw(Node::Mul(alloc::vec![
                Expr::int(*n as i64),
                Expr::raw(Node::Pow(b.clone(), n - 1)),
                b.diff_raw(i),
            ])),
            Node::Div(a, b) => {
                // (a/b)' = a'/b - a b' / b^2
                let first = Expr::raw(Node::Mul(alloc::vec![
                    a.diff_raw(i),
                    Expr::raw(Node::Pow(b.clone(), -1)),
                ]));
                let second = Expr::raw(Node::Mul(alloc::vec![
                    Expr::int(-1),
                    a.clone(),
                    b.diff_raw(i),
                    Expr::raw(Node::Pow(b.clone(), -2)),
                ]));
                Expr::raw(Node::Add(alloc::vec![first, second]))
            }
            Node::Sin(a) => Expr::raw(Node::Mul(alloc::vec![
                Expr::raw(Node::Cos(a.clone())),
                a.diff_raw(i),
            ])),
            Node::Cos(a) => Expr::raw(Node::Mul(alloc::vec![
                Expr::int(-1),
                Expr::raw(Node::Sin(a.clone())),
                a.diff_raw(i),
            ])),
            Node::Exp(a) => Expr::raw(Node::Mul(alloc::vec![self.clone(), a.diff_raw(i)])),
            Node::Log(a) => Expr::raw(Node::Mul(alloc::vec![
                a.diff_raw(i),
                Expr::raw(Node::Pow(a.clone(), -1)),
            ])),
        }
    }
}
