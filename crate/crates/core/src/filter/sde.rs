use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

use crate::diffop::MultiIndex;
use crate::error::{Error, Result};
use crate::estalg::FilteringSystem;
use crate::geometry::{Chart, Point};
use crate::rng::{streams, CounterRng};
use crate::symb::{Expr, Program};

/// Source of the Gaussian increments. `Zero` switches the noise off.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Noise {
    #[default]
    Gaussian,
    Zero,
}

pub const EULER_MARUYAMA: &str = "euler-maruyama";

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    pub seed: u64,
    pub scheme: &'static str,
}

impl SamplePath {
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// `Y_k` at every time node with `Y_0 = 0`, plus the increments that
/// produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationPath {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub increments: Vec<Vec<f64>>,
}

impl ObservationPath {
    /// Builds a path from prescribed values.
    pub fn from_values(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<ObservationPath> {
        if times.len() < 2 || values.len() != times.len() {
            return Err(Error::InvalidArgument("observation path needs matching times and values".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("observation times must increase".into()));
        }
        let m = values[0].len();
        if let Some(v) = values.iter().find(|v| v.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: v.len() });
        }
        let increments = values
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
            .collect();
        Ok(ObservationPath { times, values, increments })
    }

    /// Number of observation channels.
    pub fn channels(&self) -> usize {
        self.values[0].len()
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty path")
    }

    /// Piecewise-linear interpolation, clamped to the path's time range.
    pub fn value_at(&self, t: f64, out: &mut [f64]) {
        let ts = &self.times;
        let k = match ts.partition_point(|&s| s <= t) {
            0 => 0,
            p if p >= ts.len() => ts.len() - 2,
            p => p - 1,
        };
        let s = ((t - ts[k]) / (ts[k + 1] - ts[k])).clamp(0.0, 1.0);
        for (i, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.values[k][i], self.values[k + 1][i]);
            *o = a + s * (b - a);
        }
    }
}

/// Coefficients of the Itô SDE whose generator is `L`: drift from the
/// first-order part, diffusion matrix `A = g⁻¹` from the second-order part.
#[derive(Clone, Debug)]
pub struct Dynamics {
    chart: Arc<Chart>,
    drift: Program,
    diffusion: Program,
    /// Cholesky factor of `A` when `A` is constant.
    fixed: Option<Vec<f64>>,
}

impl Dynamics {
    pub fn new(sys: &FilteringSystem) -> Result<Dynamics> {
        let chart = sys.chart().clone();
        let n = chart.dim();
        let l = sys.generator();
        let drift: Vec<Expr> = (0..n).map(|i| l.coefficient(&MultiIndex::unit(n, i))).collect();
        let mut a = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let c = l.coefficient(&MultiIndex::unit(n, i).plus(&MultiIndex::unit(n, j)));
                a.push(if i == j { c * Expr::int(2) } else { c });
            }
        }
        let fixed = if a.iter().all(|e| e.as_const().is_some()) {
            let vals: Vec<f64> = a.iter().map(|e| e.as_const().unwrap().to_f64()).collect();
            Some(cholesky(n, &vals, 0.0)?)
        } else {
            None
        };
        Ok(Dynamics {
            chart,
            drift: Program::compile(&drift),
            diffusion: Program::compile(&a),
            fixed,
        })
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    /// Workspace for [`Dynamics::step`].
    pub fn workspace(&self) -> Workspace {
        let n = self.chart.dim();
        Workspace {
            regs_drift: self.drift.scratch(),
            regs_diff: self.diffusion.scratch(),
            b: alloc::vec![0.0; n],
            a: alloc::vec![0.0; n * n],
        }
    }

    /// One Euler–Maruyama step `x += b dt + σ ξ √dt` with `σσᵀ = A`, then a
    /// periodic wrap. Fails if a non-periodic coordinate leaves the box.
    pub fn step(&self, x: &mut [f64], dt: f64, xi: &[f64], ws: &mut Workspace, time: f64) -> Result<()> {
        let n = x.len();
        self.drift.eval_into(x, &mut ws.regs_drift, &mut ws.b)?;
        let owned;
        let chol: &[f64] = match &self.fixed {
            Some(c) => c,
            None => {
                self.diffusion.eval_into(x, &mut ws.regs_diff, &mut ws.a)?;
                owned = cholesky(n, &ws.a, time)?;
                &owned
            }
        };
        let sq = dt.sqrt();
        for i in 0..n {
            let noise: f64 = (0..=i).map(|j| chol[i * n + j] * xi[j]).sum();
            x[i] += ws.b[i] * dt + noise * sq;
        }
        self.chart.wrap(x);
        if !self.chart.contains(x) {
            return Err(Error::StepOutOfDomain { time: time + dt });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Workspace {
    regs_drift: Vec<f64>,
    regs_diff: Vec<f64>,
    b: Vec<f64>,
    a: Vec<f64>,
}

/// Row-major lower Cholesky factor of an `n × n` matrix.
fn cholesky(n: usize, a: &[f64], time: f64) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, a);
    let l = m.cholesky().ok_or_else(|| {
        Error::NonDegeneracyViolation(alloc::format!("diffusion matrix not positive definite at t = {time}"))
    })?;
    let l = l.l();
    Ok((0..n * n).map(|k| l[(k / n, k % n)]).collect())
}

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("time step must be positive, got {dt}")));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("horizon must be positive, got {t_end}")));
    }
    Ok(((t_end / dt).round() as usize).max(1))
}

/// Euler–Maruyama path of the state diffusion on the grid `k·dt`.
/// Draw `i` of step `k` is normal number `k·n + i` of the state-noise stream.
pub fn simulate_state(sys: &FilteringSystem, x0: &[f64], t_end: f64, dt: f64, seed: u64, noise: Noise) -> Result<SamplePath> {
    let steps = step_count(t_end, dt)?;
    let dyn_ = Dynamics::new(sys)?;
    let chart = sys.chart();
    let n = chart.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
    }
    let mut x = x0.to_vec();
    chart.wrap(&mut x);
    if !chart.contains(&x) {
        return Err(Error::StepOutOfDomain { time: 0.0 });
    }
    let rng = CounterRng::new(seed, streams::STATE_NOISE);
    let mut ws = dyn_.workspace();
    let mut xi = alloc::vec![0.0; n];
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x.clone());
    for k in 0..steps {
        for (i, z) in xi.iter_mut().enumerate() {
            *z = match noise {
                Noise::Gaussian => rng.normal((k * n + i) as u64),
                Noise::Zero => 0.0,
            };
        }
        dyn_.step(&mut x, dt, &xi, &mut ws, k as f64 * dt)?;
        times.push((k + 1) as f64 * dt);
        states.push(x.clone());
    }
    Ok(SamplePath {
        times,
        states,
        seed,
        scheme: EULER_MARUYAMA,
    })
}

/// `ΔY_k = h(X_{t_k}) Δt + √Δt ξ_k`, with `ξ` from the observation-noise stream.
pub fn simulate_observation(path: &SamplePath, h: &[Expr], seed: u64, noise: Noise) -> Result<ObservationPath> {
    let m = h.len();
    let prog = Program::compile(h);
    let mut regs = prog.scratch();
    let mut hv = alloc::vec![0.0; m];
    let rng = CounterRng::new(seed, streams::OBSERVATION_NOISE);
    let mut values = Vec::with_capacity(path.times.len());
    let mut increments = Vec::with_capacity(path.times.len() - 1);
    let mut y = alloc::vec![0.0; m];
    values.push(y.clone());
    for k in 0..path.times.len() - 1 {
        let dt = path.times[k + 1] - path.times[k];
        prog.eval_into(&path.states[k], &mut regs, &mut hv)?;
        let dy: Vec<f64> = (0..m)
            .map(|i| {
                let xi = match noise {
                    Noise::Gaussian => rng.normal((k * m + i) as u64),
                    Noise::Zero => 0.0,
                };
                hv[i] * dt + dt.sqrt() * xi
            })
            .collect();
        y.iter_mut().zip(&dy).for_each(|(a, b)| *a += b);
        values.push(y.clone());
        increments.push(dy);
    }
    Ok(ObservationPath {
        times: path.times.clone(),
        values,
        increments,
    })
}
