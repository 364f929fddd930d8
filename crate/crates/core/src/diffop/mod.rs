//! Differential operators `Σ c_α ∂^α` with function coefficients written on
//! the left, their composition, commutators and formal adjoints.

mod multi;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

pub use multi::MultiIndex;

use crate::error::{Error, Result};
use crate::geometry::{Chart, Metric, VectorField};
use crate::symb::{Evaluator, Expr, Node};

/// Operator order with `−∞` for the zero operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    NegInfinity,
    Finite(u32),
}

impl Order {
    pub fn finite(self) -> Option<u32> {
        match self {
            Order::NegInfinity => None,
            Order::Finite(k) => Some(k),
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::NegInfinity => f.write_str("-inf"),
            Order::Finite(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiffOp {
    chart: Arc<Chart>,
    terms: BTreeMap<MultiIndex, Expr>,
}

type Pending = BTreeMap<MultiIndex, Vec<Expr>>;

fn binomial(n: u32, k: u32) -> i64 {
    let mut r = 1i64;
    for i in 0..k {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

impl DiffOp {
    pub fn zero(chart: Arc<Chart>) -> DiffOp {
        DiffOp {
            chart,
            terms: BTreeMap::new(),
        }
    }

    /// Builds an operator from `(α, c_α)` pairs, summing repeated indices
    /// and pruning coefficients that pass the zero test.
    pub fn from_terms<I: IntoIterator<Item = (MultiIndex, Expr)>>(chart: Arc<Chart>, terms: I) -> DiffOp {
        let mut pending: Pending = BTreeMap::new();
        for (a, c) in terms {
            assert_eq!(a.dim(), chart.dim(), "multi-index length must match the chart");
            pending.entry(a).or_default().push(c);
        }
        DiffOp::settle(chart, pending)
    }

    fn settle(chart: Arc<Chart>, pending: Pending) -> DiffOp {
        let mut terms = BTreeMap::new();
        for (a, cs) in pending {
            let c = if cs.len() == 1 { cs[0].simplify() } else { Expr::raw(Node::Add(cs)).simplify() };
            if !c.is_const_zero() && !chart.is_zero(&c) {
                terms.insert(a, c);
            }
        }
        DiffOp { chart, terms }
    }

    pub fn mult(chart: Arc<Chart>, f: Expr) -> DiffOp {
        let n = chart.dim();
        DiffOp::from_terms(chart, [(MultiIndex::zero(n), f)])
    }

    pub fn identity(chart: Arc<Chart>) -> DiffOp {
        DiffOp::mult(chart, Expr::one())
    }

    /// `∂_i`.
    pub fn partial(chart: Arc<Chart>, i: usize) -> DiffOp {
        let n = chart.dim();
        DiffOp::from_terms(chart, [(MultiIndex::unit(n, i), Expr::one())])
    }

    /// `X^i ∂_i`.
    pub fn vector_field(chart: Arc<Chart>, x: &VectorField) -> DiffOp {
        let n = chart.dim();
        DiffOp::from_terms(chart, x.0.iter().enumerate().map(|(i, c)| (MultiIndex::unit(n, i), c.clone())))
    }

    /// Laplace–Beltrami operator
    /// `g^{ij} ∂_i ∂_j + (∂_i g^{ij} + g^{ij} w_i) ∂_j`.
    pub fn laplace_beltrami(metric: &Metric) -> DiffOp {
        let chart = metric.chart().clone();
        let n = chart.dim();
        let inv = metric.inverse();
        let w = metric.log_density_grad();
        let mut terms = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut a = MultiIndex::unit(n, i);
                a.bump(j);
                terms.push((a, inv[i][j].clone()));
                terms.push((MultiIndex::unit(n, j), inv[i][j].diff(i)));
                terms.push((MultiIndex::unit(n, j), &inv[i][j] * &w[i]));
            }
        }
        DiffOp::from_terms(chart, terms)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Expr)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, a: &MultiIndex) -> Expr {
        self.terms.get(a).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn order(&self) -> Order {
        self.terms.keys().map(|a| a.order()).max().map_or(Order::NegInfinity, Order::Finite)
    }

    /// Coefficient of a multiplication operator, `None` if the operator has
    /// derivative terms.
    pub fn as_multiplication(&self) -> Option<Expr> {
        match self.order() {
            Order::NegInfinity => Some(Expr::zero()),
            Order::Finite(0) => Some(self.coefficient(&MultiIndex::zero(self.chart.dim()))),
            _ => None,
        }
    }

    /// Terms with `|α| = k`.
    pub fn homogeneous_part(&self, k: u32) -> DiffOp {
        DiffOp {
            chart: self.chart.clone(),
            terms: self.terms.iter().filter(|(a, _)| a.order() == k).map(|(a, c)| (a.clone(), c.clone())).collect(),
        }
    }

    fn same_chart(&self, other: &DiffOp) -> Result<()> {
        if Arc::ptr_eq(&self.chart, &other.chart) || *self.chart == *other.chart {
            Ok(())
        } else {
            Err(Error::ChartMismatch)
        }
    }

    pub fn apply(&self, f: &Expr) -> Expr {
        Expr::sum(self.terms.iter().map(|(a, c)| c * f.diff_multi(a.as_slice())))
    }

    fn linear(&self, other: &DiffOp, sign: i64) -> Result<DiffOp> {
        self.same_chart(other)?;
        let mut pending: Pending = BTreeMap::new();
        for (a, c) in &self.terms {
            pending.entry(a.clone()).or_default().push(c.clone());
        }
        for (a, c) in &other.terms {
            let c = if sign == 1 { c.clone() } else { -c };
            pending.entry(a.clone()).or_default().push(c);
        }
        Ok(DiffOp::settle(self.chart.clone(), pending))
    }

    pub fn add(&self, other: &DiffOp) -> Result<DiffOp> {
        self.linear(other, 1)
    }

    pub fn sub(&self, other: &DiffOp) -> Result<DiffOp> {
        self.linear(other, -1)
    }

    /// `f · D`.
    pub fn scale(&self, f: &Expr) -> DiffOp {
        DiffOp::from_terms(self.chart.clone(), self.terms.iter().map(|(a, c)| (a.clone(), f * c)))
    }

    pub fn neg(&self) -> DiffOp {
        self.scale(&Expr::int(-1))
    }

    /// Leibniz expansion of `self ∘ other` into `pending`, multiplied by
    /// `sign`.
    fn compose_into(&self, other: &DiffOp, sign: i64, pending: &mut Pending) {
        for (b, d) in &other.terms {
            let mut derivs: BTreeMap<MultiIndex, Expr> = BTreeMap::new();
            for (a, c) in &self.terms {
                for g in a.sub_indices() {
                    let dd = derivs.entry(g.clone()).or_insert_with(|| d.diff_multi(g.as_slice())).clone();
                    if dd.is_const_zero() {
                        continue;
                    }
                    let k = sign * a.binomial(&g, binomial);
                    let out = a.minus(&g).plus(b);
                    let term = Expr::raw(Node::Mul(alloc::vec![Expr::int(k), c.clone(), dd]));
                    pending.entry(out).or_default().push(term);
                }
            }
        }
    }

    pub fn compose(&self, other: &DiffOp) -> Result<DiffOp> {
        self.same_chart(other)?;
        let mut pending = BTreeMap::new();
        self.compose_into(other, 1, &mut pending);
        Ok(DiffOp::settle(self.chart.clone(), pending))
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &DiffOp) -> Result<DiffOp> {
        self.same_chart(other)?;
        let mut pending = BTreeMap::new();
        self.compose_into(other, 1, &mut pending);
        other.compose_into(self, -1, &mut pending);
        Ok(DiffOp::settle(self.chart.clone(), pending))
    }

    /// Formal adjoint with respect to `dω = √|g| dx`:
    /// `c ∂^α ↦ (−1)^{|α|} Π_i (∂_i + w_i)^{α_i} ∘ c`.
    pub fn adjoint(&self, metric: &Metric) -> Result<DiffOp> {
        if *metric.chart().as_ref() != *self.chart {
            return Err(Error::ChartMismatch);
        }
        let chart = self.chart.clone();
        let n = chart.dim();
        let w = metric.log_density_grad();
        let shifted: Vec<DiffOp> = (0..n)
            .map(|i| {
                DiffOp::from_terms(
                    chart.clone(),
                    [(MultiIndex::unit(n, i), Expr::one()), (MultiIndex::zero(n), w[i].clone())],
                )
            })
            .collect();
        let mut conj: BTreeMap<MultiIndex, DiffOp> = BTreeMap::new();
        let mut pending: Pending = BTreeMap::new();
        for (a, c) in &self.terms {
            let p = match conj.get(a) {
                Some(p) => p.clone(),
                None => {
                    let mut p = DiffOp::identity(chart.clone());
                    for (i, &k) in a.as_slice().iter().enumerate() {
                        for _ in 0..k {
                            p = shifted[i].compose(&p)?;
                        }
                    }
                    conj.insert(a.clone(), p.clone());
                    p
                }
            };
            let sign = if a.order() % 2 == 0 { 1 } else { -1 };
            p.compose_into(&DiffOp::mult(chart.clone(), c.clone()), sign, &mut pending);
        }
        Ok(DiffOp::settle(chart, pending))
    }

    /// Coefficientwise equality under the chart's zero test.
    pub fn approx_eq(&self, other: &DiffOp) -> bool {
        self.sub(other).map(|d| d.is_zero()).unwrap_or(false)
    }

    /// Largest sampled coefficient magnitude of `self − other` over the
    /// chart's zero-test points.
    pub fn residual(&self, other: &DiffOp) -> Result<f64> {
        self.same_chart(other)?;
        let keys: Vec<&MultiIndex> = self.terms.keys().chain(other.terms.keys()).collect();
        let mut worst = 0.0f64;
        for a in keys {
            let d = self.coefficient(a) - other.coefficient(a);
            worst = worst.max(self.chart.zero_residual(&d));
        }
        Ok(worst)
    }

    /// Coefficients evaluated at `points`: one row per point, one column per
    /// multi-index in `indices`.
    pub fn sample(&self, indices: &[MultiIndex], points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let exprs: Vec<Expr> = indices.iter().map(|a| self.coefficient(a)).collect();
        let mut ev = Evaluator::new(&exprs);
        let mut out = Vec::with_capacity(points.len());
        for p in points {
            out.push(ev.eval(p)?.to_vec());
        }
        Ok(out)
    }

    pub fn pretty(&self) -> String {
        if self.terms.is_empty() {
            return String::from("0");
        }
        let names = self.chart.names();
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(a, c)| {
                let mut s = format!("({})", c.pretty(names));
                for (i, &k) in a.as_slice().iter().enumerate() {
                    match k {
                        0 => {}
                        1 => s.push_str(&format!("*d_{}", names[i])),
                        _ => s.push_str(&format!("*d_{}^{}", names[i], k)),
                    }
                }
                s
            })
            .collect();
        parts.join(" + ")
    }
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}
