use alloc::vec::Vec;

use super::system::FilteringSystem;
use crate::diffop::DiffOp;
use crate::error::{Error, Result};
use crate::geometry::Metric;
use crate::symb::Expr;

/// Largest residual tolerated by the double-bracket identity.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// `A_h(f) = ⟨grad h, grad f⟩ = g^{ij} ∂_i h ∂_j f`.
pub fn a_h(h: &Expr, f: &Expr, metric: &Metric) -> Expr {
    let n = metric.dim();
    let inv = metric.inverse();
    let dh: Vec<Expr> = (0..n).map(|i| h.diff(i)).collect();
    let df: Vec<Expr> = (0..n).map(|j| f.diff(j)).collect();
    Expr::sum((0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| &inv[i][j] * &dh[i] * &df[j]))
}

/// `Q f = ⟨grad f, grad f⟩`.
pub fn q_op(f: &Expr, metric: &Metric) -> Expr {
    a_h(f, f, metric)
}

#[derive(Clone, Debug)]
pub struct BracketCheck {
    /// `[[L0, f·], f·]` as computed by operator algebra.
    pub operator: DiffOp,
    pub q: Expr,
    /// Largest sampled deviation of the operator from multiplication by `Q f`.
    pub residual: f64,
}

/// Computes `[[L0, f·], f·]` and compares it with multiplication by `Q f`
/// at the chart's zero-test points.
pub fn bracket_identity_check(sys: &FilteringSystem, f: &Expr) -> Result<BracketCheck> {
    let chart = sys.chart().clone();
    let mf = DiffOp::mult(chart.clone(), f.clone());
    let operator = sys.l0().commutator(&mf)?.commutator(&mf)?;
    let q = q_op(f, sys.metric());
    let expected = DiffOp::mult(chart, q.clone());
    let residual = operator.residual(&expected)?;
    if !(residual <= IDENTITY_TOLERANCE) {
        return Err(Error::IdentityViolation { residual });
    }
    Ok(BracketCheck { operator, q, residual })
}

/// `H_0 = h^j, H_{i+1} = Q H_i`, returning `n + 1` fields.
pub fn q_sequence(sys: &FilteringSystem, j: usize, n: usize) -> Result<Vec<Expr>> {
    let h = sys.observation(j)?.clone();
    let chart = sys.chart();
    let mut out = alloc::vec![h];
    for i in 0..n {
        let next = q_op(&out[i], sys.metric());
        if chart.is_zero(&next) {
            return Err(if i == 0 { Error::ConstantObservation(j) } else { Error::DegenerateField });
        }
        out.push(next);
    }
    if n == 0 && chart.is_zero(&q_op(&out[0], sys.metric())) {
        return Err(Error::ConstantObservation(j));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Chart, VectorField};
    use crate::symb::parse;
    use crate::tol::Tolerances;

    fn circle_sys(h: &str) -> FilteringSystem {
        let tol = Tolerances::default();
        let c = Chart::circle(&tol);
        let h = parse(h, c.names()).unwrap();
        FilteringSystem::new(Metric::flat(c), VectorField::zero(1), alloc::vec![h], tol).unwrap()
    }

    fn same(sys: &FilteringSystem, e: &Expr, s: &str) -> bool {
        let c = sys.chart();
        c.is_zero(&(e - parse(s, c.names()).unwrap()))
    }

    #[test]
    fn q_examples() {
        let sys = circle_sys("cos(theta)");
        let m = sys.metric();
        assert!(q_op(&Expr::int(4), m).is_const_zero());
        assert!(same(&sys, &q_op(&parse("cos(theta)", m.chart().names()).unwrap(), m), "sin(theta)^2"));
        assert!(same(&sys, &q_op(&parse("sin(theta)^2", m.chart().names()).unwrap(), m), "sin(2*theta)^2"));
    }

    #[test]
    fn a_h_examples() {
        let sys = circle_sys("cos(theta)");
        let m = sys.metric();
        let h = &sys.observations()[0];
        assert!(a_h(h, &Expr::int(2), m).is_const_zero());
        assert!(same(&sys, &a_h(h, h, m), "sin(theta)^2"));
        assert!(same(&sys, &a_h(h, &Expr::coord(0).sin(), m), "-sin(theta)*cos(theta)"));
    }

    #[test]
    fn bracket_identity_examples() {
        let sys = circle_sys("cos(theta)");
        let r = bracket_identity_check(&sys, &Expr::int(3)).unwrap();
        assert!(r.operator.is_zero());
        assert_eq!(r.residual, 0.0);
        let r = bracket_identity_check(&sys, &sys.observations()[0]).unwrap();
        assert!(same(&sys, &r.operator.as_multiplication().unwrap(), "sin(theta)^2"));
        assert!(r.residual < 1e-9);

        let tol = Tolerances::default();
        let t = Chart::torus2(&tol);
        let f = parse("cos(x) + sin(y)", t.names()).unwrap();
        let sys = FilteringSystem::new(Metric::flat(t.clone()), VectorField::zero(2), alloc::vec![f.clone()], tol)
            .unwrap();
        let r = bracket_identity_check(&sys, &f).unwrap();
        let want = parse("sin(x)^2 + cos(y)^2", t.names()).unwrap();
        assert!(t.is_zero(&(r.operator.as_multiplication().unwrap() - want)));
    }

    #[test]
    fn sequences() {
        let sys = circle_sys("cos(theta)");
        let s = q_sequence(&sys, 0, 2).unwrap();
        assert_eq!(s.len(), 3);
        assert!(same(&sys, &s[1], "sin(theta)^2"));
        assert!(same(&sys, &s[2], "sin(2*theta)^2"));
        assert!(matches!(q_sequence(&circle_sys("2"), 0, 2), Err(Error::ConstantObservation(0))));
        assert!(matches!(q_sequence(&sys, 1, 2), Err(Error::NoSuchObservation { index: 1, count: 1 })));

        let tol = Tolerances::default();
        let t = Chart::torus2(&tol);
        let f = parse("cos(x)", t.names()).unwrap();
        let sys = FilteringSystem::new(Metric::flat(t.clone()), VectorField::zero(2), alloc::vec![f], tol).unwrap();
        let s = q_sequence(&sys, 0, 1).unwrap();
        assert!(t.is_zero(&(&s[1] - parse("sin(x)^2", t.names()).unwrap())));
    }
}
