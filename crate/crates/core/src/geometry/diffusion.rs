use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::chart::Chart;
use super::fields::VectorField;
use super::metric::{adjugate, check_square, det, first_indefinite_point, is_symmetric, Matrix, Metric};
use crate::diffop::{DiffOp, MultiIndex, Order};
use crate::error::{Error, Result};
use crate::symb::Expr;

/// Generator `L = ½ a_ij ∂_i ∂_j + b_i ∂_i` of a diffusion on a chart.
#[derive(Clone, Debug)]
pub struct DiffusionSpec {
    chart: Arc<Chart>,
    a: Matrix,
    drift: Vec<Expr>,
}

impl DiffusionSpec {
    /// Checks that `A` is symmetric and positive definite at every
    /// zero-test point.
    pub fn new(chart: Arc<Chart>, a: Matrix, drift: Vec<Expr>) -> Result<DiffusionSpec> {
        let n = chart.dim();
        check_square(&a, n)?;
        if drift.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: drift.len() });
        }
        let a: Matrix = a.iter().map(|r| r.iter().map(Expr::simplify).collect()).collect();
        if !is_symmetric(&a) {
            return Err(Error::NonDegeneracyViolation("diffusion matrix is not symmetric".to_string()));
        }
        for e in a.iter().flatten().chain(&drift) {
            chart.check_denominators(e)?;
        }
        if let Some(k) = first_indefinite_point(&chart, &a) {
            return Err(Error::NonDegeneracyViolation(format!(
                "diffusion matrix is not positive definite at {:?}",
                chart.zero_points()[k]
            )));
        }
        Ok(DiffusionSpec { chart, a, drift })
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn drift(&self) -> &[Expr] {
        &self.drift
    }

    /// `½ a_ij ∂_i ∂_j`.
    pub fn second_order_part(&self) -> DiffOp {
        let n = self.chart.dim();
        let mut terms = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut a = MultiIndex::unit(n, i);
                a.bump(j);
                terms.push((a, &self.a[i][j] * Expr::ratio(1, 2)));
            }
        }
        DiffOp::from_terms(self.chart.clone(), terms)
    }

    pub fn generator(&self) -> DiffOp {
        let n = self.chart.dim();
        let first = self.drift.iter().enumerate().map(|(i, b)| (MultiIndex::unit(n, i), b.clone()));
        let second = self.second_order_part();
        DiffOp::from_terms(self.chart.clone(), second.terms().map(|(a, c)| (a.clone(), c.clone())).chain(first))
    }
}

/// Metric `g̃ = A⁻¹` whose half Laplacian carries the second-order part of
/// the generator, together with the first-order remainder `L − ½Δ_g̃`.
pub fn metric_from_diffusion(spec: &DiffusionSpec) -> Result<(Metric, VectorField)> {
    let chart = spec.chart.clone();
    let n = chart.dim();
    let d = det(&spec.a);
    let dinv = d.recip();
    let g: Matrix = adjugate(&spec.a).iter().map(|r| r.iter().map(|e| e * &dinv).collect()).collect();
    let metric = Metric::with_inverse(chart.clone(), g, spec.a.clone())?;
    let half_lap = DiffOp::laplace_beltrami(&metric).scale(&Expr::ratio(1, 2));
    let rest = spec.generator().sub(&half_lap)?;
    if rest.order() > Order::Finite(1) || !rest.homogeneous_part(0).is_zero() {
        let residual = rest.homogeneous_part(2).residual(&DiffOp::zero(chart.clone()))?;
        return Err(Error::IdentityViolation { residual });
    }
    let f = VectorField((0..n).map(|i| rest.coefficient(&MultiIndex::unit(n, i))).collect());
    Ok((metric, f))
}
