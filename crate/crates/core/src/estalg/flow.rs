use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

use super::certificate::Verdict;
use super::critical::critical_points;
use super::qseq::a_h;
use super::system::FilteringSystem;
use crate::error::{Error, Result};
use crate::geometry::{grad, Chart, Metric, Point};
use crate::symb::{Evaluator, Expr};

/// Cutoff, relative to its peak, of `A_h h` along the flow that delimits the
/// sampled time window.
pub const SUPPORT_CUTOFF: f64 = 1e-3;
/// Half-width of the central difference used for the derivative identity.
pub const FD_STEP: f64 = 1e-4;
/// Largest accepted derivative-identity residual.
pub const IDENTITY_RESIDUAL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
}

/// RK4 integrator of `γ' = grad h`.
pub struct GradientFlow {
    chart: alloc::sync::Arc<Chart>,
    field: Evaluator,
    norm: Evaluator,
}

impl GradientFlow {
    pub fn new(h: &Expr, metric: &Metric) -> GradientFlow {
        GradientFlow {
            chart: metric.chart().clone(),
            field: Evaluator::new(&grad(h, metric).0),
            norm: Evaluator::new(&[a_h(h, h, metric)]),
        }
    }

    /// `‖grad h‖²_g` at `p`.
    pub fn speed_sq(&mut self, p: &[f64]) -> Result<f64> {
        Ok(self.norm.eval1(p)?)
    }

    fn rhs(&mut self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.field.eval(p)?.to_vec())
    }

    /// One classical RK4 step of size `dt` (negative steps run backwards).
    pub fn step(&mut self, p: &[f64], dt: f64) -> Result<Point> {
        let add = |p: &[f64], k: &[f64], s: f64| -> Point { p.iter().zip(k).map(|(a, b)| a + s * b).collect() };
        let k1 = self.rhs(p)?;
        let k2 = self.rhs(&add(p, &k1, dt / 2.0))?;
        let k3 = self.rhs(&add(p, &k2, dt / 2.0))?;
        let k4 = self.rhs(&add(p, &k3, dt))?;
        let mut out: Point = (0..p.len())
            .map(|i| p[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        self.chart.wrap(&mut out);
        Ok(out)
    }

    /// Point reached from `p` after time `t`, using steps of at most `dt`.
    pub fn advance(&mut self, p: &[f64], t: f64, dt: f64) -> Result<Point> {
        let steps = (t.abs() / dt).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut x = p.to_vec();
        for k in 0..steps {
            x = self.step(&x, h)?;
            if !self.chart.contains(&x) {
                return Err(Error::StepOutOfDomain { time: (k + 1) as f64 * h });
            }
        }
        Ok(x)
    }
}

/// Samples the gradient flow of `h` from `x0` over `t_span` with step `dt`.
/// A start at a critical point gives the constant trajectory.
pub fn gradient_flow(h: &Expr, metric: &Metric, x0: &[f64], t_span: (f64, f64), dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("flow step must be positive".into()));
    }
    let mut flow = GradientFlow::new(h, metric);
    let (t0, t1) = t_span;
    let steps = ((t1 - t0).abs() / dt).ceil() as usize;
    let h_step = if steps == 0 { 0.0 } else { (t1 - t0) / steps as f64 };
    let mut times = alloc::vec![t0];
    let mut points = alloc::vec![x0.to_vec()];
    let fixed = flow.speed_sq(x0)?.max(0.0).sqrt() < 1e-14;
    let mut x = x0.to_vec();
    for k in 1..=steps {
        let t = t0 + k as f64 * h_step;
        if !fixed {
            x = flow.step(&x, h_step)?;
            if !metric.chart().contains(&x) {
                return Err(Error::StepOutOfDomain { time: t });
            }
        }
        times.push(t);
        points.push(x.clone());
    }
    Ok(Trajectory { times, points })
}

#[derive(Clone, Debug)]
pub struct FlowCertificate {
    pub observation: usize,
    /// Point of the connecting flow taken as `t = 0` (largest `A_h h`).
    pub anchor: Point,
    /// Critical points joined by the flow.
    pub from: Point,
    pub to: Point,
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    /// `M[n−1][k] = A_h^n h(γ(t_k))` for `n = 1..N`.
    pub matrix: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub relative_sigma_min: f64,
    pub derivative_residual: f64,
    pub verdict: Verdict,
}

/// First flow, in critical-value order, launched from a slightly perturbed
/// non-maximal critical point that ends at a different critical point.
fn connecting_flow(flow: &mut GradientFlow, chart: &Chart, crit: &[Point]) -> Option<(Point, Point, Point)> {
    let n = chart.dim();
    let eps = 1e-4;
    let dt = 1e-2;
    for c in crit {
        for dir in 0..2 * n {
            let mut x = c.clone();
            x[dir / 2] += if dir % 2 == 0 { eps } else { -eps };
            chart.wrap(&mut x);
            let mut best: Option<(f64, Point)> = None;
            let mut ok = true;
            for _ in 0..40_000 {
                match flow.step(&x, dt) {
                    Ok(y) if chart.contains(&y) => x = y,
                    _ => {
                        ok = false;
                        break;
                    }
                }
                let s = match flow.speed_sq(&x) {
                    Ok(s) => s,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                };
                if best.as_ref().is_none_or(|(b, _)| s > *b) {
                    best = Some((s, x.clone()));
                }
                if s < 1e-24 {
                    break;
                }
            }
            if !ok {
                continue;
            }
            let Some(end) = crit.iter().find(|q| chart.distance(q, &x) < 1e-3) else { continue };
            if chart.distance(end, c) > 1e-3 {
                if let Some((s, anchor)) = best {
                    if s > 0.0 {
                        return Some((c.clone(), end.clone(), anchor));
                    }
                }
            }
        }
    }
    None
}

/// Time after which `A_h h` along the flow from `anchor` stays under the
/// support cutoff, searched in direction `sign`.
fn support_end(flow: &mut GradientFlow, anchor: &[f64], peak: f64, sign: f64) -> Result<f64> {
    let dt = 1e-3;
    let mut x = anchor.to_vec();
    let mut t = 0.0;
    while t < 200.0 {
        x = flow.step(&x, sign * dt)?;
        t += dt;
        if flow.speed_sq(&x)? < SUPPORT_CUTOFF * peak {
            return Ok(sign * t);
        }
    }
    Ok(sign * t)
}

/// Samples `A_h^n h^j` along a connecting gradient flow of `h^j` at `k`
/// Chebyshev times and checks that the rows are linearly independent.
pub fn certificate_flow(sys: &FilteringSystem, j: usize, n: usize, k: usize) -> Result<FlowCertificate> {
    if n == 0 || k < 2 * n {
        return Err(Error::InvalidArgument("flow certificate needs N ≥ 1 and K ≥ 2N".into()));
    }
    let h = sys.observation(j)?.clone();
    let metric = sys.metric();
    let chart = sys.chart().clone();
    let tol = sys.tolerances();
    let crit: Vec<Point> = match critical_points(&h, metric, tol) {
        Ok(c) => {
            let mut c = c;
            c.sort_by(|a, b| a.value.total_cmp(&b.value));
            c.into_iter().map(|c| c.point).collect()
        }
        Err(Error::DegenerateField) => return Err(Error::ConstantObservation(j)),
        Err(Error::NoCriticalPointFound) => return Err(Error::FlowNotFound),
        Err(e) => return Err(e),
    };
    let mut flow = GradientFlow::new(&h, metric);
    let (from, to, anchor) = connecting_flow(&mut flow, &chart, &crit).ok_or(Error::FlowNotFound)?;
    let peak = flow.speed_sq(&anchor)?;
    let t_minus = support_end(&mut flow, &anchor, peak, -1.0)?;
    let t_plus = support_end(&mut flow, &anchor, peak, 1.0)?;

    let mut rows = alloc::vec![a_h(&h, &h, metric)];
    for _ in 1..=n {
        let last = rows.last().expect("nonempty");
        rows.push(a_h(&h, last, metric));
    }
    let mut ev = Evaluator::new(&rows);
    let mid = 0.5 * (t_minus + t_plus);
    let half = 0.5 * (t_plus - t_minus);
    let times: Vec<f64> = (0..k)
        .map(|i| mid - half * ((2 * i + 1) as f64 * core::f64::consts::PI / (2 * k) as f64).cos())
        .collect();
    let mut points = Vec::with_capacity(k);
    let mut matrix = alloc::vec![alloc::vec![0.0; k]; n];
    let mut residual = 0.0f64;
    for (c, &t) in times.iter().enumerate() {
        let p = flow.advance(&anchor, t, 1e-3)?;
        let vals = ev.eval(&p)?.to_vec();
        for r in 0..n {
            matrix[r][c] = vals[r];
        }
        let plus = flow.step(&p, FD_STEP)?;
        let minus = flow.step(&p, -FD_STEP)?;
        let vp = ev.eval(&plus)?.to_vec();
        let vm = ev.eval(&minus)?.to_vec();
        for r in 0..n {
            let fd = (vp[r] - vm[r]) / (2.0 * FD_STEP);
            let scale = vals[r + 1].abs().max(1.0);
            residual = residual.max((fd - vals[r + 1]).abs() / scale);
        }
        points.push(p);
    }
    let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
    let sv = DMatrix::from_row_slice(n, k, &flat).singular_values();
    let mut singular_values: Vec<f64> = sv.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let top = singular_values[0];
    let relative = if top > 0.0 { singular_values[n - 1] / top } else { 0.0 };
    let verdict = if relative > tol.rank { Verdict::InfiniteDimensional } else { Verdict::RankDeficient };
    Ok(FlowCertificate {
        observation: j,
        anchor,
        from,
        to,
        times,
        points,
        matrix,
        singular_values,
        relative_sigma_min: relative,
        derivative_residual: residual,
        verdict,
    })
}
