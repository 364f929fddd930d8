use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use super::grid::{DensityField, Grid};
use crate::error::{Error, Result};
use crate::geometry::{Chart, Point};
use crate::symb::{Expr, Program};

/// `π(φ) = Σ φ σ w / Σ σ w` for each `φ`.
pub fn conditional_stats(field: &DensityField, grid: &Grid, phis: &[Expr]) -> Result<Vec<f64>> {
    let p = field.normalized()?;
    let cols = grid.eval_many(phis)?;
    Ok(cols
        .iter()
        .map(|c| c.iter().zip(&p).zip(field.weights.iter()).map(|((f, q), w)| f * q * w).sum())
        .collect())
}

/// Weighted average of each `φ` over a particle cloud.
pub fn particle_stats(points: &[Point], weights: &[f64], phis: &[Expr]) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroMass);
    }
    let prog = Program::compile(phis);
    let mut regs = prog.scratch();
    let mut v = alloc::vec![0.0; phis.len()];
    let mut acc = alloc::vec![0.0; phis.len()];
    for (p, w) in points.iter().zip(weights) {
        prog.eval_into(p, &mut regs, &mut v)?;
        acc.iter_mut().zip(&v).for_each(|(a, x)| *a += w * x);
    }
    Ok(acc.into_iter().map(|a| a / total).collect())
}

/// `atan2(π(sin), π(cos))`.
pub fn circular_mean(mean_sin: f64, mean_cos: f64) -> f64 {
    mean_sin.atan2(mean_cos)
}

/// Shortest signed difference between two angles.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let tau = core::f64::consts::TAU;
    let d = (a - b) % tau;
    if d > core::f64::consts::PI {
        d - tau
    } else if d < -core::f64::consts::PI {
        d + tau
    } else {
        d
    }
}

/// Per-axis summary of a conditional law. Periodic axes report the circular
/// mean and the circular variance `1 − R`; other axes the mean and variance.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

fn moment_phis(chart: &Chart) -> Vec<Expr> {
    let mut out = Vec::new();
    for (i, a) in chart.axes().iter().enumerate() {
        let x = Expr::coord(i);
        if a.periodic {
            out.push(x.sin());
            out.push(x.cos());
        } else {
            out.push(x.square());
            out.push(x);
        }
    }
    out
}

fn moments_from(chart: &Chart, raw: &[f64]) -> Moments {
    let mut mean = Vec::with_capacity(chart.dim());
    let mut variance = Vec::with_capacity(chart.dim());
    for (i, a) in chart.axes().iter().enumerate() {
        let (p, q) = (raw[2 * i], raw[2 * i + 1]);
        if a.periodic {
            mean.push(circular_mean(p, q));
            variance.push(1.0 - p.hypot(q));
        } else {
            mean.push(q);
            variance.push(p - q * q);
        }
    }
    Moments { mean, variance }
}

pub fn density_moments(field: &DensityField, grid: &Grid) -> Result<Moments> {
    let chart = grid.chart();
    Ok(moments_from(chart, &conditional_stats(field, grid, &moment_phis(chart))?))
}

pub fn particle_moments(chart: &Chart, points: &[Point], weights: &[f64]) -> Result<Moments> {
    Ok(moments_from(chart, &particle_stats(points, weights, &moment_phis(chart))?))
}

/// Per-time conditional summaries from one filtering method.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterReport {
    pub method: String,
    pub times: Vec<f64>,
    pub moments: Vec<Moments>,
    /// Unnormalized mass per time (the weight sum for particle filters).
    pub masses: Vec<f64>,
    pub settings: Vec<(String, f64)>,
    /// Cross-validation distances filled in by the caller.
    pub distances: Vec<(String, f64)>,
    pub resamplings: usize,
}

impl FilterReport {
    pub fn from_densities(method: &str, grid: &Grid, fields: &[DensityField]) -> Result<FilterReport> {
        Ok(FilterReport {
            method: method.into(),
            times: fields.iter().map(|f| f.time).collect(),
            moments: fields.iter().map(|f| density_moments(f, grid)).collect::<Result<_>>()?,
            masses: fields.iter().map(DensityField::mass).collect(),
            settings: Vec::new(),
            distances: Vec::new(),
            resamplings: 0,
        })
    }

    /// Largest difference of the per-axis means over the common time grid,
    /// taken the short way round on periodic axes.
    pub fn max_mean_distance(&self, other: &FilterReport, chart: &Chart) -> Result<f64> {
        if self.times.len() != other.times.len() {
            return Err(Error::DimensionMismatch { expected: self.times.len(), got: other.times.len() });
        }
        let mut worst = 0.0f64;
        for (a, b) in self.moments.iter().zip(&other.moments) {
            for (i, ax) in chart.axes().iter().enumerate() {
                let d = if ax.periodic {
                    angle_difference(a.mean[i], b.mean[i])
                } else {
                    a.mean[i] - b.mean[i]
                };
                worst = worst.max(d.abs());
            }
        }
        Ok(worst)
    }
}
