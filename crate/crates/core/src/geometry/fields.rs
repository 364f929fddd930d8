use alloc::vec::Vec;

use super::metric::Metric;
use crate::symb::Expr;

pub type ScalarField = Expr;

/// Components `X^i` in the coordinate frame.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField(pub Vec<Expr>);

impl VectorField {
    pub fn zero(n: usize) -> VectorField {
        VectorField(alloc::vec![Expr::zero(); n])
    }

    /// Coordinate field `∂_i`.
    pub fn coordinate(n: usize, i: usize) -> VectorField {
        let mut v = VectorField::zero(n);
        v.0[i] = Expr::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.0
    }

    /// `X(f) = X^i ∂_i f`.
    pub fn apply(&self, f: &Expr) -> Expr {
        Expr::sum(self.0.iter().enumerate().map(|(i, x)| x * f.diff(i)))
    }
}

/// Connection symbols `Γ^i_jk`, stored densely.
#[derive(Clone, Debug)]
pub struct Christoffel {
    n: usize,
    gamma: Vec<Expr>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> &Expr {
        &self.gamma[(i * self.n + j) * self.n + k]
    }
}

/// `Γ^i_jk = ½ g^{il}(∂_j g_lk + ∂_k g_jl − ∂_l g_jk)`; only `j ≤ k` is
/// computed and mirrored, so the symmetry is exact.
pub fn christoffel(metric: &Metric) -> Christoffel {
    let n = metric.dim();
    let g = metric.g();
    let inv = metric.inverse();
    // dg[l][j][k] = ∂_l g_jk
    let dg: Vec<Vec<Vec<Expr>>> = (0..n)
        .map(|l| (0..n).map(|j| (0..n).map(|k| g[j][k].diff(l)).collect()).collect())
        .collect();
    let mut gamma = alloc::vec![Expr::zero(); n * n * n];
    let half = Expr::ratio(1, 2);
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let e = Expr::sum((0..n).map(|l| {
                    let bracket = &dg[j][l][k] + &dg[k][j][l] - &dg[l][j][k];
                    &inv[i][l] * bracket
                })) * &half;
                gamma[(i * n + j) * n + k] = e.clone();
                gamma[(i * n + k) * n + j] = e;
            }
        }
    }
    Christoffel { n, gamma }
}

/// `(grad f)^i = g^{ij} ∂_j f`.
pub fn grad(f: &Expr, metric: &Metric) -> VectorField {
    let n = metric.dim();
    let df: Vec<Expr> = (0..n).map(|j| f.diff(j)).collect();
    let inv = metric.inverse();
    VectorField((0..n).map(|i| Expr::sum((0..n).map(|j| &inv[i][j] * &df[j]))).collect())
}

/// `div X = |g|^{-1/2} ∂_i(|g|^{1/2} X^i) = ∂_i X^i + w_i X^i`.
pub fn div(x: &VectorField, metric: &Metric) -> Expr {
    let w = metric.log_density_grad();
    Expr::sum(x.0.iter().enumerate().flat_map(|(i, xi)| [xi.diff(i), xi * &w[i]]))
}

pub fn laplacian(f: &Expr, metric: &Metric) -> Expr {
    div(&grad(f, metric), metric)
}

/// `g_ij X^i Y^j`.
pub fn inner(x: &VectorField, y: &VectorField, metric: &Metric) -> Expr {
    let g = metric.g();
    let n = metric.dim();
    Expr::sum((0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| &g[i][j] * &x.0[i] * &y.0[j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Chart;
    use crate::symb::parse;
    use crate::tol::Tolerances;
    use alloc::sync::Arc;

    fn sphere() -> Metric {
        let c = Chart::sphere2(1e-3, &Tolerances::default());
        let s2 = parse("sin(theta)^2", c.names()).unwrap();
        Metric::new(c, alloc::vec![alloc::vec![Expr::one(), Expr::zero()], alloc::vec![Expr::zero(), s2]]).unwrap()
    }

    fn circle() -> Metric {
        Metric::flat(Chart::circle(&Tolerances::default()))
    }

    fn same(m: &Metric, a: &Expr, src: &str) -> bool {
        let c: &Arc<Chart> = m.chart();
        c.is_zero(&(a - parse(src, c.names()).unwrap()))
    }

    #[test]
    fn flat_torus_has_no_christoffel_symbols() {
        let m = Metric::flat(Chart::torus2(&Tolerances::default()));
        let gm = christoffel(&m);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert!(gm.get(i, j, k).is_const_zero());
                }
            }
        }
    }

    #[test]
    fn sphere_christoffel() {
        let m = sphere();
        let gm = christoffel(&m);
        assert!(same(&m, gm.get(0, 1, 1), "-sin(theta)*cos(theta)"));
        assert!(same(&m, gm.get(1, 0, 1), "cos(theta)/sin(theta)"));
        assert_eq!(gm.get(1, 0, 1), gm.get(1, 1, 0));
        assert!(gm.get(0, 0, 0).is_const_zero());
    }

    #[test]
    fn gradients() {
        let m = circle();
        assert!(grad(&Expr::int(3), &m).0[0].is_const_zero());
        let f = Expr::coord(0).cos();
        assert!(same(&m, &grad(&f, &m).0[0], "-sin(theta)"));
        let s = sphere();
        let g = grad(&f, &s);
        assert!(same(&s, &g.0[0], "-sin(theta)"));
        assert!(g.0[1].is_const_zero());
    }

    #[test]
    fn divergences() {
        let m = circle();
        assert!(div(&VectorField::coordinate(1, 0), &m).is_const_zero());
        let plane = Metric::flat(Chart::euclidean(2, 10.0, &Tolerances::default()).unwrap());
        let x = VectorField(alloc::vec![Expr::coord(0), Expr::zero()]);
        assert_eq!(div(&x, &plane), Expr::one());
        let s = sphere();
        assert!(same(&s, &div(&VectorField::coordinate(2, 0), &s), "cos(theta)/sin(theta)"));
    }

    #[test]
    fn laplacians() {
        let f = Expr::coord(0).cos();
        let m = circle();
        assert!(laplacian(&Expr::int(5), &m).is_const_zero());
        assert!(same(&m, &laplacian(&f, &m), "-cos(theta)"));
        let s = sphere();
        assert!(same(&s, &laplacian(&f, &s), "-2*cos(theta)"));
    }

    #[test]
    fn inner_products() {
        let f = Expr::coord(0).cos();
        let m = circle();
        let g = grad(&f, &m);
        assert!(inner(&g, &VectorField::zero(1), &m).is_const_zero());
        assert!(same(&m, &inner(&g, &g, &m), "sin(theta)^2"));
        let s = sphere();
        let g = grad(&f, &s);
        assert!(same(&s, &inner(&g, &g, &s), "sin(theta)^2"));
    }
}
