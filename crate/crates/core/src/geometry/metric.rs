use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

use super::chart::Chart;
use crate::error::{Error, Result};
use crate::symb::{Evaluator, Expr};

pub type Matrix = Vec<Vec<Expr>>;

/// Determinant by cofactor expansion along the first row.
pub fn det(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    match n {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0],
        _ => Expr::sum((0..n).map(|j| {
            let c = &m[0][j] * det(&minor(m, 0, j));
            if j % 2 == 0 {
                c
            } else {
                -c
            }
        })),
    }
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Matrix {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| r.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, e)| e.clone()).collect())
        .collect()
}

/// Transposed cofactor matrix, so that `m · adj(m) = det(m) I`.
pub fn adjugate(m: &[Vec<Expr>]) -> Matrix {
    let n = m.len();
    if n == 1 {
        return alloc::vec![alloc::vec![Expr::one()]];
    }
    let mut out = alloc::vec![alloc::vec![Expr::zero(); n]; n];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            let c = det(&minor(m, j, i));
            *e = if (i + j) % 2 == 0 { c } else { -c };
        }
    }
    out
}

fn matmul(a: &[Vec<Expr>], b: &[Vec<Expr>]) -> Matrix {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| Expr::sum((0..n).map(|k| &a[i][k] * &b[k][j]))).collect())
        .collect()
}

/// Symbolic inverse through the adjugate, verified by the sampled residual
/// `g · g⁻¹ − I`.
pub fn inverse_metric(chart: &Chart, g: &[Vec<Expr>]) -> Result<Matrix> {
    let d = det(g);
    if chart.is_zero(&d) {
        return Err(Error::SingularMetric("determinant vanishes identically".to_string()));
    }
    let dinv = d.recip();
    let inv: Matrix = adjugate(g).iter().map(|r| r.iter().map(|e| e * &dinv).collect()).collect();
    check_inverse(chart, g, &inv)?;
    Ok(inv)
}

fn check_inverse(chart: &Chart, g: &[Vec<Expr>], inv: &[Vec<Expr>]) -> Result<()> {
    let prod = matmul(g, inv);
    for (i, row) in prod.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            let r = if i == j { e - Expr::one() } else { e.clone() };
            let res = chart.zero_residual(&r.simplify());
            if !(res < chart.zero_tolerance()) {
                return Err(Error::SingularMetric(format!("inverse residual {res:e} at entry ({i}, {j})")));
            }
        }
    }
    Ok(())
}

pub(crate) fn check_square(m: &[Vec<Expr>], n: usize) -> Result<()> {
    if m.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.len() });
    }
    for r in m {
        if r.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: r.len() });
        }
    }
    Ok(())
}

pub(crate) fn is_symmetric(m: &[Vec<Expr>]) -> bool {
    (0..m.len()).all(|i| (0..i).all(|j| m[i][j] == m[j][i]))
}

/// Index of the first zero-test point where `m` fails a Cholesky
/// factorization, if any.
pub(crate) fn first_indefinite_point(chart: &Chart, m: &[Vec<Expr>]) -> Option<usize> {
    let n = m.len();
    let flat: Vec<Expr> = m.iter().flatten().cloned().collect();
    let mut ev = Evaluator::new(&flat);
    for (k, p) in chart.zero_points().iter().enumerate() {
        let ok = match ev.eval(p) {
            Ok(v) if v.iter().all(|x| x.is_finite()) => DMatrix::from_row_slice(n, n, v).cholesky().is_some(),
            _ => false,
        };
        if !ok {
            return Some(k);
        }
    }
    None
}

/// Riemannian metric `g_ij` on a chart with its cached inverse, determinant
/// and the log-density gradient `w_i = ∂_i log √|g|`.
#[derive(Clone, Debug)]
pub struct Metric {
    chart: Arc<Chart>,
    g: Matrix,
    inv: Matrix,
    det: Expr,
    w: Vec<Expr>,
}

impl Metric {
    pub fn new(chart: Arc<Chart>, g: Matrix) -> Result<Metric> {
        let g = Self::validate(&chart, g)?;
        let inv = inverse_metric(&chart, &g)?;
        let d = det(&g);
        let half_inv = d.recip() * Expr::ratio(1, 2);
        let w = (0..chart.dim()).map(|i| d.diff(i) * &half_inv).collect();
        Ok(Metric { chart, g, inv, det: d, w })
    }

    /// Metric whose inverse is already known (for instance the coefficient
    /// matrix of a diffusion); avoids inverting the inverse symbolically.
    pub fn with_inverse(chart: Arc<Chart>, g: Matrix, inv: Matrix) -> Result<Metric> {
        let g = Self::validate(&chart, g)?;
        check_square(&inv, chart.dim())?;
        let inv: Matrix = inv.iter().map(|r| r.iter().map(Expr::simplify).collect()).collect();
        check_inverse(&chart, &g, &inv)?;
        let d_inv = det(&inv);
        let half_inv = d_inv.recip() * Expr::ratio(-1, 2);
        let w = (0..chart.dim()).map(|i| d_inv.diff(i) * &half_inv).collect();
        Ok(Metric {
            chart,
            g,
            inv,
            det: d_inv.recip(),
            w,
        })
    }

    /// Euclidean metric `δ_ij` in the chart coordinates.
    pub fn flat(chart: Arc<Chart>) -> Metric {
        let n = chart.dim();
        let id: Matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect())
            .collect();
        Metric {
            chart,
            g: id.clone(),
            inv: id,
            det: Expr::one(),
            w: alloc::vec![Expr::zero(); n],
        }
    }

    fn validate(chart: &Chart, g: Matrix) -> Result<Matrix> {
        check_square(&g, chart.dim())?;
        let g: Matrix = g.iter().map(|r| r.iter().map(Expr::simplify).collect()).collect();
        if !is_symmetric(&g) {
            return Err(Error::InvalidArgument("metric matrix is not symmetric".to_string()));
        }
        for e in g.iter().flatten() {
            chart.check_denominators(e)?;
        }
        if let Some(k) = first_indefinite_point(chart, &g) {
            return Err(Error::SingularMetric(format!(
                "not positive definite at {:?}",
                chart.zero_points()[k]
            )));
        }
        Ok(g)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }

    pub fn inverse(&self) -> &Matrix {
        &self.inv
    }

    /// `det g` as an expression.
    pub fn det(&self) -> &Expr {
        &self.det
    }

    /// `w_i = ∂_i log √|g|`, so that `div X = ∂_i X^i + w_i X^i`.
    pub fn log_density_grad(&self) -> &[Expr] {
        &self.w
    }

    pub fn is_flat_density(&self) -> bool {
        self.w.iter().all(Expr::is_const_zero)
    }

    /// `√|g|` at a point.
    pub fn volume_density(&self, p: &[f64]) -> Result<f64> {
        Ok(self.det.eval(p)?.abs().sqrt())
    }

    /// Human-readable matrix rows.
    pub fn describe(&self) -> Vec<String> {
        self.g
            .iter()
            .map(|r| {
                let cells: Vec<String> = r.iter().map(|e| format!("{}", e.pretty(self.chart.names()))).collect();
                format!("[{}]", cells.join(", "))
            })
            .collect()
    }
}
