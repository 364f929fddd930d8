use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{Chart, Metric, Point};
use crate::symb::{Expr, Program};
use crate::tol::Tolerances;

use super::qseq::q_op;

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPoint {
    pub point: Point,
    /// `f` at the point.
    pub value: f64,
    /// `‖grad f‖_g` at the point.
    pub grad_norm: f64,
}

#[derive(Clone, Debug, Default)]
pub struct CriticalSearch {
    pub points: Vec<CriticalPoint>,
    /// Converged points that fell inside the excluded chart margin.
    pub rejected: Vec<Point>,
}

/// Seeds per axis used when none is requested: 512 on one- and
/// two-dimensional periodic charts, 256 on other two-dimensional charts.
pub fn default_seeds(chart: &Chart) -> usize {
    match chart.dim() {
        1 => 512,
        2 if chart.axes().iter().all(|a| a.periodic) => 512,
        2 => 256,
        3 => 48,
        _ => 16,
    }
}

/// Compiled `∂f`, `∂²f` and `Q f` of one scalar field.
struct Derivatives {
    n: usize,
    prog: Program,
    regs: Vec<f64>,
    out: Vec<f64>,
}

impl Derivatives {
    fn new(f: &Expr, metric: &Metric) -> Derivatives {
        let n = metric.dim();
        let mut exprs: Vec<Expr> = (0..n).map(|i| f.diff(i)).collect();
        for i in 0..n {
            for j in 0..n {
                exprs.push(exprs[i].diff(j));
            }
        }
        exprs.push(q_op(f, metric));
        exprs.push(f.clone());
        let prog = Program::compile(&exprs);
        let regs = prog.scratch();
        Derivatives {
            n,
            out: alloc::vec![0.0; exprs.len()],
            prog,
            regs,
        }
    }

    fn eval(&mut self, p: &[f64]) -> Result<()> {
        self.prog.eval_into(p, &mut self.regs, &mut self.out)?;
        Ok(())
    }

    fn grad(&self) -> &[f64] {
        &self.out[..self.n]
    }

    fn hessian(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.out[self.n..self.n + self.n * self.n])
    }

    fn grad_norm(&self) -> f64 {
        self.out[self.n + self.n * self.n].max(0.0).sqrt()
    }

    fn value(&self) -> f64 {
        self.out[self.n + self.n * self.n + 1]
    }

    fn sq(&self) -> f64 {
        self.grad().iter().map(|g| g * g).sum()
    }
}

fn grid_nodes(chart: &Chart, per_axis: usize) -> Vec<Vec<f64>> {
    (0..chart.dim())
        .map(|i| {
            let (lo, hi) = chart.interior(i);
            let h = (hi - lo) / per_axis as f64;
            (0..per_axis).map(|k| lo + (k as f64 + 0.5) * h).collect()
        })
        .collect()
}

/// Grid points where `|∂f|²` is no larger than at any grid neighbour.
fn seeds(chart: &Chart, d: &mut Derivatives, per_axis: usize) -> Result<Vec<Point>> {
    let n = chart.dim();
    let axes = grid_nodes(chart, per_axis);
    let total = per_axis.pow(n as u32);
    let mut s = alloc::vec![0.0; total];
    let mut idx = alloc::vec![0usize; n];
    let point = |idx: &[usize]| -> Point { idx.iter().enumerate().map(|(a, &k)| axes[a][k]).collect() };
    for v in s.iter_mut() {
        d.eval(&point(&idx))?;
        *v = d.sq();
        for a in (0..n).rev() {
            idx[a] += 1;
            if idx[a] < per_axis {
                break;
            }
            idx[a] = 0;
        }
    }
    let flat = |idx: &[usize]| idx.iter().fold(0, |acc, &k| acc * per_axis + k);
    let mut out = Vec::new();
    let mut idx = alloc::vec![0usize; n];
    for k in 0..total {
        let here = s[k];
        let mut is_min = here.is_finite();
        for a in 0..n {
            for step in [-1isize, 1] {
                let j = idx[a] as isize + step;
                let j = if chart.axes()[a].periodic {
                    j.rem_euclid(per_axis as isize) as usize
                } else if j < 0 || j >= per_axis as isize {
                    continue;
                } else {
                    j as usize
                };
                let mut nb = idx.clone();
                nb[a] = j;
                if s[flat(&nb)] < here {
                    is_min = false;
                }
            }
        }
        if is_min {
            out.push(point(&idx));
        }
        for a in (0..n).rev() {
            idx[a] += 1;
            if idx[a] < per_axis {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(out)
}

/// Newton on `∂f = 0`, falling back to Levenberg–Marquardt steps whenever
/// the Newton step fails to reduce `|∂f|`.
fn refine(chart: &Chart, d: &mut Derivatives, mut x: Point) -> Result<Point> {
    let n = chart.dim();
    d.eval(&x)?;
    let mut cur = d.sq();
    for _ in 0..100 {
        if cur == 0.0 {
            break;
        }
        let g = DVector::from_column_slice(d.grad());
        let h = d.hessian();
        let mut accepted = false;
        let mut candidates: Vec<DVector<f64>> = Vec::new();
        if let Some(step) = h.clone().lu().solve(&(-&g)) {
            candidates.push(step);
        }
        let hth = h.transpose() * &h;
        let scale = hth.diagonal().max().max(1e-300);
        let mut lambda = 1e-8 * scale;
        for _ in 0..24 {
            let a = &hth + DMatrix::identity(n, n) * lambda;
            if let Some(step) = a.lu().solve(&(-(h.transpose() * &g))) {
                candidates.push(step);
            }
            lambda *= 10.0;
        }
        for step in candidates {
            if !step.iter().all(|v| v.is_finite()) {
                continue;
            }
            let mut y: Point = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            chart.wrap(&mut y);
            if d.eval(&y).is_err() {
                continue;
            }
            let next = d.sq();
            if next < cur {
                let moved = step.norm();
                x = y;
                cur = next;
                accepted = true;
                if moved <= 1e-15 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                    return Ok(x);
                }
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    Ok(x)
}

/// Critical points of `f` in the margin-shrunk chart, seeded from a grid and
/// refined by Newton iteration.
pub fn critical_point_search(
    f: &Expr,
    metric: &Metric,
    tol: &Tolerances,
    seeds_per_axis: Option<usize>,
) -> Result<CriticalSearch> {
    let chart = metric.chart().clone();
    if chart.is_zero(&q_op(f, metric)) {
        return Err(Error::DegenerateField);
    }
    let per_axis = seeds_per_axis.unwrap_or_else(|| default_seeds(&chart)).max(2);
    let mut d = Derivatives::new(f, metric);
    let mut found: Vec<CriticalPoint> = Vec::new();
    let mut rejected: Vec<Point> = Vec::new();
    for s in seeds(&chart, &mut d, per_axis)? {
        let x = refine(&chart, &mut d, s)?;
        if d.eval(&x).is_err() {
            continue;
        }
        let gn = d.grad_norm();
        if !(gn < tol.crit) {
            continue;
        }
        if !chart.contains(&x) {
            if !rejected.iter().any(|r| chart.distance(r, &x) < tol.dedup) {
                rejected.push(x);
            }
            continue;
        }
        let cp = CriticalPoint {
            value: d.value(),
            grad_norm: gn,
            point: x,
        };
        match found.iter_mut().find(|c| chart.distance(&c.point, &cp.point) < tol.dedup) {
            Some(c) if c.grad_norm > cp.grad_norm => *c = cp,
            Some(_) => {}
            None => found.push(cp),
        }
    }
    found.sort_by(|a, b| lex(&a.point, &b.point));
    if found.is_empty() && !chart.is_compact() {
        return Err(Error::NoCriticalPointFound);
    }
    Ok(CriticalSearch { points: found, rejected })
}

pub fn critical_points(f: &Expr, metric: &Metric, tol: &Tolerances) -> Result<Vec<CriticalPoint>> {
    let s = critical_point_search(f, metric, tol, None)?;
    if s.points.is_empty() {
        return Err(Error::NoCriticalPointFound);
    }
    Ok(s.points)
}

pub(crate) fn lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}
