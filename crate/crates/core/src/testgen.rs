//! Random smooth expressions and operators for property tests.

use alloc::sync::Arc;
use alloc::vec::Vec;

use proptest::prelude::*;

use crate::diffop::{DiffOp, MultiIndex};
use crate::geometry::Chart;
use crate::rng::CounterRng;
use crate::symb::{Expr, Node};

/// Unsimplified smooth trees (no division, no log) over `n` coordinates.
pub fn arb_expr(n: usize) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-4i64..=4, 1i64..=3).prop_map(|(p, q)| Expr::ratio(p, q)),
        (0..n).prop_map(Expr::coord),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(|v| Expr::raw(Node::Add(v))),
            prop::collection::vec(inner.clone(), 2..3).prop_map(|v| Expr::raw(Node::Mul(v))),
            (inner.clone(), 0i32..3).prop_map(|(b, k)| Expr::raw(Node::Pow(b, k))),
            inner.clone().prop_map(|a| Expr::raw(Node::Sin(a))),
            inner.clone().prop_map(|a| Expr::raw(Node::Cos(a))),
            inner.prop_map(|a| Expr::raw(Node::Exp(Expr::raw(Node::Mul(alloc::vec![a, Expr::ratio(1, 8)]))))),
        ]
    })
}

/// Random trigonometric polynomial `Σ c_t f_t(k_t · x + p_t)` with small
/// integer frequencies; smooth and periodic on every builtin chart.
pub fn trig_field(rng: &CounterRng, base: u64, n: usize, terms: usize) -> Expr {
    let mut k = base * 1000;
    let mut next = || {
        k += 1;
        rng.uniform(k)
    };
    let mut out = Vec::new();
    for _ in 0..terms {
        let c = Expr::ratio((next() * 9.0) as i64 - 4, 1 + (next() * 3.0) as i64);
        let mut arg = Vec::new();
        for i in 0..n {
            let f = (next() * 5.0) as i64 - 2;
            arg.push(Expr::int(f) * Expr::coord(i));
        }
        arg.push(Expr::ratio((next() * 7.0) as i64, 4));
        let a = Expr::sum(arg);
        out.push(if next() < 0.5 { c * a.sin() } else { c * a.cos() });
    }
    Expr::sum(out)
}

/// Random operator of order at most `max_order` with trig coefficients.
pub fn random_op(chart: &Arc<Chart>, rng: &CounterRng, base: u64, max_order: u32) -> DiffOp {
    let n = chart.dim();
    let terms = MultiIndex::all_up_to(n, max_order)
        .into_iter()
        .enumerate()
        .map(|(j, a)| (a, trig_field(rng, base * 64 + j as u64, n, 2)));
    DiffOp::from_terms(chart.clone(), terms)
}
