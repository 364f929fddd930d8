use alloc::sync::Arc;

use proptest::prelude::*;

use super::Expr;
use crate::geometry::Chart;
use crate::rng::CounterRng;
use crate::testgen::arb_expr;
use crate::tol::Tolerances;

fn unit_box() -> Arc<Chart> {
    Chart::euclidean(2, 1.0, &Tolerances::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diff_is_linear(e1 in arb_expr(2), e2 in arb_expr(2), a in -5i64..5, b in -5i64..5, i in 0usize..2) {
        let c = unit_box();
        let (a, b) = (Expr::int(a), Expr::int(b));
        let lhs = (&a * &e1 + &b * &e2).diff(i);
        let rhs = &a * e1.diff(i) + &b * e2.diff(i);
        prop_assert!(c.is_zero(&(lhs - rhs)));
    }

    #[test]
    fn product_rule(e1 in arb_expr(2), e2 in arb_expr(2), i in 0usize..2) {
        let c = unit_box();
        let lhs = (&e1 * &e2).diff(i);
        let rhs = e1.diff(i) * &e2 + &e1 * e2.diff(i);
        prop_assert!(c.is_zero(&(lhs - rhs)));
    }

    #[test]
    fn simplify_is_idempotent(e in arb_expr(2)) {
        let s = e.simplify();
        prop_assert_eq!(s.simplify(), s);
    }

    #[test]
    fn simplify_preserves_values(e in arb_expr(2), seed in 0u64..1_000_000) {
        let rng = CounterRng::new(seed, 0);
        let p = [rng.uniform(0) * 2.0 - 1.0, rng.uniform(1) * 2.0 - 1.0];
        let v = e.eval(&p).unwrap();
        let w = e.simplify().eval(&p).unwrap();
        prop_assert!((v - w).abs() < 1e-12, "{} vs {} for {}", v, w, e);
    }
}
