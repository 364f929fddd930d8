use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::diffop::{DiffOp, Order};
use crate::error::{Error, Result};
use crate::geometry::{Chart, Metric, Point};
use crate::symb::{Expr, Program};

/// Smallest number of grid nodes per axis.
pub const MIN_GRID: usize = 32;

const GHOST: usize = usize::MAX;

/// Tensor grid over a chart. Periodic axes carry `N` nodes `lo + kΔ` with
/// wrap-around neighbours; other axes carry `N` interior nodes with
/// zero-valued ghosts on both ends of the margin-shrunk box.
#[derive(Clone, Debug)]
pub struct Grid {
    chart: Arc<Chart>,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    coords: Vec<Vec<f64>>,
    nodes: Vec<Point>,
    weights: Arc<[f64]>,
    /// `minus[a][k]`, `plus[a][k]`: neighbour of node `k` along axis `a`.
    minus: Vec<Vec<usize>>,
    plus: Vec<Vec<usize>>,
}

impl Grid {
    pub fn new(metric: &Metric, shape: &[usize]) -> Result<Grid> {
        let chart = metric.chart().clone();
        let n = chart.dim();
        if shape.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: shape.len() });
        }
        if let Some(&bad) = shape.iter().find(|&&s| s < MIN_GRID) {
            return Err(Error::ResolutionTooLow(bad));
        }
        let mut spacing = Vec::with_capacity(n);
        let mut coords = Vec::with_capacity(n);
        for (i, &s) in shape.iter().enumerate() {
            let (lo, hi) = chart.interior(i);
            if chart.axes()[i].periodic {
                let h = (hi - lo) / s as f64;
                spacing.push(h);
                coords.push((0..s).map(|k| lo + k as f64 * h).collect::<Vec<_>>());
            } else {
                let h = (hi - lo) / (s + 1) as f64;
                spacing.push(h);
                coords.push((0..s).map(|k| lo + (k + 1) as f64 * h).collect::<Vec<_>>());
            }
        }
        let total: usize = shape.iter().product();
        let cell: f64 = spacing.iter().product();
        let mut strides = alloc::vec![1usize; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut minus = alloc::vec![Vec::with_capacity(total); n];
        let mut plus = alloc::vec![Vec::with_capacity(total); n];
        for k in 0..total {
            let idx: Vec<usize> = (0..n).map(|a| (k / strides[a]) % shape[a]).collect();
            let p: Point = idx.iter().enumerate().map(|(a, &i)| coords[a][i]).collect();
            weights.push(cell * metric.volume_density(&p)?);
            nodes.push(p);
            for a in 0..n {
                let periodic = chart.axes()[a].periodic;
                let (i, s) = (idx[a], shape[a]);
                let base = k - i * strides[a];
                let m = if i > 0 {
                    base + (i - 1) * strides[a]
                } else if periodic {
                    base + (s - 1) * strides[a]
                } else {
                    GHOST
                };
                let q = if i + 1 < s {
                    base + (i + 1) * strides[a]
                } else if periodic {
                    base
                } else {
                    GHOST
                };
                minus[a].push(m);
                plus[a].push(q);
            }
        }
        Ok(Grid {
            chart,
            shape: shape.to_vec(),
            spacing,
            coords,
            nodes,
            weights: weights.into(),
            minus,
            plus,
        })
    }

    /// The same resolution on every axis.
    pub fn uniform(metric: &Metric, n: usize) -> Result<Grid> {
        Grid::new(metric, &alloc::vec![n; metric.dim()])
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn coords(&self, axis: usize) -> &[f64] {
        &self.coords[axis]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// `√|g|` times the cell volume at every node.
    pub fn weights(&self) -> &Arc<[f64]> {
        &self.weights
    }

    /// Values of several expressions at every node, one vector per expression.
    pub fn eval_many(&self, exprs: &[Expr]) -> Result<Vec<Vec<f64>>> {
        let prog = Program::compile(exprs);
        let mut regs = prog.scratch();
        let mut out = alloc::vec![0.0; exprs.len()];
        let mut cols = alloc::vec![Vec::with_capacity(self.len()); exprs.len()];
        for p in &self.nodes {
            prog.eval_into(p, &mut regs, &mut out)?;
            for (c, v) in cols.iter_mut().zip(&out) {
                c.push(*v);
            }
        }
        Ok(cols)
    }

    pub fn eval(&self, e: &Expr) -> Result<Vec<f64>> {
        Ok(self.eval_many(core::slice::from_ref(e))?.pop().expect("one column"))
    }

    #[inline]
    fn at(u: &[f64], k: usize) -> f64 {
        if k == GHOST {
            0.0
        } else {
            u[k]
        }
    }

    #[inline]
    fn step(&self, a: usize, k: usize, up: bool) -> usize {
        if k == GHOST {
            GHOST
        } else if up {
            self.plus[a][k]
        } else {
            self.minus[a][k]
        }
    }

    /// Wraps values onto a density snapshot at time `time`.
    pub fn field(&self, values: Vec<f64>, time: f64) -> DensityField {
        DensityField {
            shape: self.shape.clone(),
            values,
            weights: self.weights.clone(),
            time,
        }
    }
}

/// A differential operator of order at most two discretized with
/// second-order central differences on a [`Grid`].
#[derive(Clone, Debug)]
pub struct GridOp {
    zeroth: Option<Vec<f64>>,
    first: Vec<(usize, Vec<f64>)>,
    second: Vec<(usize, usize, Vec<f64>)>,
}

impl GridOp {
    pub fn new(grid: &Grid, op: &DiffOp) -> Result<GridOp> {
        if !Arc::ptr_eq(grid.chart(), op.chart()) && **grid.chart() != **op.chart() {
            return Err(Error::ChartMismatch);
        }
        if op.order() > Order::Finite(2) {
            return Err(Error::InvalidArgument(alloc::format!(
                "grid operators need order at most 2, got {}",
                op.order()
            )));
        }
        let n = grid.chart().dim();
        let mut zeroth = None;
        let mut first = Vec::new();
        let mut second = Vec::new();
        for (alpha, c) in op.terms() {
            let vals = grid.eval(c)?;
            let axes: Vec<usize> = (0..n).flat_map(|i| core::iter::repeat_n(i, alpha.as_slice()[i] as usize)).collect();
            match axes.as_slice() {
                [] => zeroth = Some(vals),
                [i] => first.push((*i, vals)),
                [i, j] => second.push((*i, *j, vals)),
                _ => unreachable!("order checked above"),
            }
        }
        Ok(GridOp { zeroth, first, second })
    }

    pub fn is_zero(&self) -> bool {
        self.zeroth.is_none() && self.first.is_empty() && self.second.is_empty()
    }

    /// `out += s · (D u)`.
    pub fn apply_add(&self, grid: &Grid, u: &[f64], s: f64, out: &mut [f64]) {
        if let Some(c) = &self.zeroth {
            for k in 0..u.len() {
                out[k] += s * c[k] * u[k];
            }
        }
        for (a, c) in &self.first {
            let inv = s / (2.0 * grid.spacing[*a]);
            for k in 0..u.len() {
                let d = Grid::at(u, grid.plus[*a][k]) - Grid::at(u, grid.minus[*a][k]);
                out[k] += inv * c[k] * d;
            }
        }
        for (a, b, c) in &self.second {
            if a == b {
                let inv = s / (grid.spacing[*a] * grid.spacing[*a]);
                for k in 0..u.len() {
                    let d = Grid::at(u, grid.plus[*a][k]) - 2.0 * u[k] + Grid::at(u, grid.minus[*a][k]);
                    out[k] += inv * c[k] * d;
                }
            } else {
                let inv = s / (4.0 * grid.spacing[*a] * grid.spacing[*b]);
                for k in 0..u.len() {
                    let (ap, am) = (grid.plus[*a][k], grid.minus[*a][k]);
                    let d = Grid::at(u, grid.step(*b, ap, true)) - Grid::at(u, grid.step(*b, ap, false))
                        - Grid::at(u, grid.step(*b, am, true))
                        + Grid::at(u, grid.step(*b, am, false));
                    out[k] += inv * c[k] * d;
                }
            }
        }
    }

    /// `out = D u`.
    pub fn apply(&self, grid: &Grid, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        self.apply_add(grid, u, 1.0, out);
    }

    /// Largest Gershgorin row sum over the nodes of the diffusion matrix
    /// `a` read off the second-order part (`a_ii = 2c_ii`, `a_ij = c_ij`).
    pub fn diffusion_bound(&self, n: usize, len: usize) -> f64 {
        let mut best = 0.0f64;
        for k in 0..len {
            let mut rows = alloc::vec![0.0f64; n];
            for (a, b, c) in &self.second {
                if a == b {
                    rows[*a] += 2.0 * c[k].abs();
                } else {
                    rows[*a] += c[k].abs();
                    rows[*b] += c[k].abs();
                }
            }
            best = rows.into_iter().fold(best, f64::max);
        }
        best
    }
}

/// Grid values of `σ` or `u` at one time, with the node weights needed to
/// integrate against `dω`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub weights: Arc<[f64]>,
    pub time: f64,
}

impl DensityField {
    /// `Σ values · weights`.
    pub fn mass(&self) -> f64 {
        self.values.iter().zip(self.weights.iter()).map(|(v, w)| v * w).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Probability density `σ / ∫σ dω` at the nodes.
    pub fn normalized(&self) -> Result<Vec<f64>> {
        let m = self.mass();
        if !(m.abs() > 0.0) || !m.is_finite() {
            return Err(Error::ZeroMass);
        }
        Ok(self.values.iter().map(|v| v / m).collect())
    }

    /// `∫ |p − q| dω` between the normalized densities.
    pub fn l1_distance(&self, other: &DensityField) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        let (p, q) = (self.normalized()?, other.normalized()?);
        Ok(p.iter().zip(&q).zip(self.weights.iter()).map(|((a, b), w)| (a - b).abs() * w).sum())
    }
}
