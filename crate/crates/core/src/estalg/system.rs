use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::diffop::DiffOp;
use crate::error::{Error, Result};
use crate::geometry::{metric_from_diffusion, Chart, DiffusionSpec, Metric, VectorField};
use crate::symb::Expr;
use crate::tol::Tolerances;

/// State diffusion `L = ½Δ_g + F` on a chart, observed through
/// `dY = h(X) dt + dV` with unit observation noise.
#[derive(Clone, Debug)]
pub struct FilteringSystem {
    metric: Metric,
    drift: VectorField,
    h: Vec<Expr>,
    tol: Tolerances,
    l: DiffOp,
    l_star: DiffOp,
    l0: DiffOp,
}

impl FilteringSystem {
    pub fn new(metric: Metric, drift: VectorField, h: Vec<Expr>, tol: Tolerances) -> Result<FilteringSystem> {
        let chart = metric.chart().clone();
        let n = chart.dim();
        if drift.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: drift.dim() });
        }
        let h: Vec<Expr> = h.iter().map(Expr::simplify).collect();
        for e in drift.0.iter().chain(&h) {
            chart.check_denominators(e)?;
            if e.arity() > n {
                return Err(Error::InvalidArgument(format!("expression uses coordinate {} outside the chart", e.arity() - 1)));
            }
        }
        let half = Expr::ratio(1, 2);
        let l = DiffOp::laplace_beltrami(&metric).scale(&half).add(&DiffOp::vector_field(chart.clone(), &drift))?;
        let l_star = l.adjoint(&metric)?;
        let potential = Expr::sum(h.iter().map(Expr::square)) * &half;
        let l0 = l_star.sub(&DiffOp::mult(chart, potential))?;
        Ok(FilteringSystem {
            metric,
            drift,
            h,
            tol,
            l,
            l_star,
            l0,
        })
    }

    /// Normalizes a non-degenerate generator to `½Δ_g̃ + F` first.
    pub fn from_diffusion(spec: &DiffusionSpec, h: Vec<Expr>, tol: Tolerances) -> Result<FilteringSystem> {
        let (metric, drift) = metric_from_diffusion(spec)?;
        FilteringSystem::new(metric, drift, h, tol)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.metric.chart()
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn drift(&self) -> &VectorField {
        &self.drift
    }

    pub fn observations(&self) -> &[Expr] {
        &self.h
    }

    pub fn observation(&self, j: usize) -> Result<&Expr> {
        self.h.get(j).ok_or(Error::NoSuchObservation {
            index: j,
            count: self.h.len(),
        })
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// The state generator `L`.
    pub fn generator(&self) -> &DiffOp {
        &self.l
    }

    pub fn generator_adjoint(&self) -> &DiffOp {
        &self.l_star
    }

    /// `L0 = L* − ½ Σ (h^i)²`.
    pub fn l0(&self) -> &DiffOp {
        &self.l0
    }

    /// Multiplication by `h^i`.
    pub fn l_i(&self, i: usize) -> Result<DiffOp> {
        Ok(DiffOp::mult(self.chart().clone(), self.observation(i)?.clone()))
    }
}

pub fn build_l0(sys: &FilteringSystem) -> DiffOp {
    sys.l0().clone()
}
