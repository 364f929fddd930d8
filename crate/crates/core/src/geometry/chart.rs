use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::rng::{streams, CounterRng};
use crate::symb::{Evaluator, Expr};
use crate::tol::Tolerances;

pub type Point = Vec<f64>;

const ZERO_TEST_SEED: u64 = 0x5EED_0F_2E80;

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn new(name: &str, lower: f64, upper: f64, periodic: bool) -> Axis {
        Axis {
            name: name.to_string(),
            lower,
            upper,
            periodic,
        }
    }

    pub fn period(&self) -> f64 {
        self.upper - self.lower
    }
}

/// A single coordinate chart: a box of coordinates, some of them periodic,
/// with a margin cut away from the ends of non-periodic axes (coordinate
/// singularities such as the poles of a spherical chart live there).
#[derive(Clone, Debug)]
pub struct Chart {
    name: String,
    axes: Vec<Axis>,
    names: Vec<String>,
    margin: f64,
    compact: bool,
    zero_tol: f64,
    zero_points: Vec<Point>,
}

impl Chart {
    pub fn new(name: &str, axes: Vec<Axis>, margin: f64, compact: bool, tol: &Tolerances) -> Result<Arc<Chart>> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("a chart needs at least one coordinate".to_string()));
        }
        if !(margin >= 0.0) {
            return Err(Error::InvalidArgument(format!("chart margin must be non-negative, got {margin}")));
        }
        for a in &axes {
            let width = if a.periodic { a.upper - a.lower } else { a.upper - a.lower - 2.0 * margin };
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::InvalidArgument(format!("coordinate {} has an empty interval", a.name)));
            }
        }
        let names = axes.iter().map(|a| a.name.clone()).collect();
        let mut chart = Chart {
            name: name.to_string(),
            axes,
            names,
            margin,
            compact,
            zero_tol: tol.zero,
            zero_points: Vec::new(),
        };
        let rng = CounterRng::new(ZERO_TEST_SEED, streams::ZERO_TEST);
        chart.zero_points = (0..tol.zero_samples).map(|k| chart.sample(&rng, k as u64)).collect();
        Ok(Arc::new(chart))
    }

    /// The unit circle, `theta` in `[0, 2π)`.
    pub fn circle(tol: &Tolerances) -> Arc<Chart> {
        Chart::new("circle", alloc::vec![Axis::new("theta", 0.0, core::f64::consts::TAU, true)], 0.0, true, tol)
            .expect("valid builtin chart")
    }

    /// Flat 2-torus with both angles in `[0, 2π)`.
    pub fn torus2(tol: &Tolerances) -> Arc<Chart> {
        let tau = core::f64::consts::TAU;
        Chart::new(
            "torus2",
            alloc::vec![Axis::new("x", 0.0, tau, true), Axis::new("y", 0.0, tau, true)],
            0.0,
            true,
            tol,
        )
        .expect("valid builtin chart")
    }

    /// Spherical chart `(theta, phi)` with the pole neighbourhoods of width
    /// `margin` excluded.
    pub fn sphere2(margin: f64, tol: &Tolerances) -> Arc<Chart> {
        Chart::new(
            "sphere2",
            alloc::vec![
                Axis::new("theta", 0.0, core::f64::consts::PI, false),
                Axis::new("phi", 0.0, core::f64::consts::TAU, true),
            ],
            margin,
            true,
            tol,
        )
        .expect("valid builtin chart")
    }

    /// `[-half_width, half_width]^n` as a truncation of `R^n`.
    pub fn euclidean(n: usize, half_width: f64, tol: &Tolerances) -> Result<Arc<Chart>> {
        let names: Vec<String> = match n {
            1 => alloc::vec!["x".to_string()],
            2 => alloc::vec!["x".to_string(), "y".to_string()],
            3 => alloc::vec!["x".to_string(), "y".to_string(), "z".to_string()],
            _ => (1..=n).map(|i| format!("x{i}")).collect(),
        };
        let axes = names.iter().map(|s| Axis::new(s, -half_width, half_width, false)).collect();
        Chart::new(&format!("euclidean:{n}"), axes, 0.0, false, tol)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn is_compact(&self) -> bool {
        self.compact
    }

    pub fn zero_tolerance(&self) -> f64 {
        self.zero_tol
    }

    pub fn zero_points(&self) -> &[Point] {
        &self.zero_points
    }

    /// Usable interval of axis `i`: the full period for periodic axes, the
    /// margin-shrunk box otherwise.
    pub fn interior(&self, i: usize) -> (f64, f64) {
        let a = &self.axes[i];
        if a.periodic {
            (a.lower, a.upper)
        } else {
            (a.lower + self.margin, a.upper - self.margin)
        }
    }

    /// Uniform draw from the interior; point number `k` of the given stream.
    pub fn sample(&self, rng: &CounterRng, k: u64) -> Point {
        let n = self.dim() as u64;
        (0..self.dim())
            .map(|i| {
                let (lo, hi) = self.interior(i);
                lo + (hi - lo) * rng.uniform(k * n + i as u64)
            })
            .collect()
    }

    /// Map periodic coordinates back into their fundamental interval.
    pub fn wrap(&self, p: &mut [f64]) {
        for (x, a) in p.iter_mut().zip(&self.axes) {
            if a.periodic {
                let period = a.period();
                let mut r = (*x - a.lower) % period;
                if r < 0.0 {
                    r += period;
                }
                *x = a.lower + r;
            }
        }
    }

    /// Coordinate distance, measured the short way round on periodic axes.
    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((x, y), a) in p.iter().zip(q).zip(&self.axes) {
            let mut d = (x - y).abs();
            if a.periodic {
                let period = a.period();
                d %= period;
                d = d.min(period - d);
            }
            s += d * d;
        }
        s.sqrt()
    }

    /// Inside the margin-shrunk box (periodic axes always qualify).
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().enumerate().all(|(i, &x)| {
                if self.axes[i].periodic {
                    x.is_finite()
                } else {
                    let (lo, hi) = self.interior(i);
                    x >= lo && x <= hi
                }
            })
    }

    /// Largest absolute value of `e` over the zero-test points; infinite if
    /// evaluation fails somewhere.
    pub fn zero_residual(&self, e: &Expr) -> f64 {
        if let Some(c) = e.as_const() {
            return c.abs_f64();
        }
        let mut ev = Evaluator::new(core::slice::from_ref(e));
        let mut worst = 0.0f64;
        for p in &self.zero_points {
            match ev.eval1(p) {
                Ok(v) if v.is_finite() => worst = worst.max(v.abs()),
                _ => return f64::INFINITY,
            }
        }
        worst
    }

    /// Sampled zero test: true iff `|e| < τ_zero` at every zero-test point.
    /// One-sided: a `true` answer may be wrong for functions that vanish on
    /// all sample points without vanishing identically.
    pub fn is_zero(&self, e: &Expr) -> bool {
        let s = e.simplify();
        if let Some(c) = s.as_const() {
            return c.abs_f64() < self.zero_tol;
        }
        self.zero_residual(&s) < self.zero_tol
    }

    /// Every denominator of `e` must be nonzero somewhere.
    pub fn check_denominators(&self, e: &Expr) -> Result<()> {
        for d in e.denominators() {
            if self.is_zero(&d) {
                return Err(Error::InvalidArgument(format!(
                    "denominator {} vanishes identically",
                    d.pretty(&self.names)
                )));
            }
        }
        Ok(())
    }
}

impl PartialEq for Chart {
    fn eq(&self, other: &Chart) -> bool {
        self.name == other.name && self.axes == other.axes && self.margin == other.margin
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symb::parse;

    #[test]
    fn pythagorean_identity_is_zero() {
        let c = Chart::circle(&Tolerances::default());
        let e = parse("sin(theta)^2 + cos(theta)^2 - 1", c.names()).unwrap();
        assert_ne!(e, Expr::zero());
        assert!(c.is_zero(&e));
        assert!(c.zero_residual(&e) < 1e-12);
    }

    #[test]
    fn cos_is_not_zero() {
        let c = Chart::circle(&Tolerances::default());
        assert!(!c.is_zero(&Expr::coord(0).cos()));
        assert!(c.is_zero(&Expr::zero()));
    }

    #[test]
    fn wrapping_and_distance() {
        let c = Chart::torus2(&Tolerances::default());
        let mut p = alloc::vec![-0.5, 7.0];
        c.wrap(&mut p);
        assert!((p[0] - (core::f64::consts::TAU - 0.5)).abs() < 1e-12);
        assert!((p[1] - (7.0 - core::f64::consts::TAU)).abs() < 1e-12);
        let d = c.distance(&[0.1, 0.0], &[core::f64::consts::TAU - 0.1, 0.0]);
        assert!((d - 0.2).abs() < 1e-12);
    }

    #[test]
    fn sphere_samples_avoid_poles() {
        let c = Chart::sphere2(1e-3, &Tolerances::default());
        for p in c.zero_points() {
            assert!(p[0] >= 1e-3 && p[0] <= core::f64::consts::PI - 1e-3);
            assert!(c.contains(p));
        }
        assert!(!c.contains(&[1e-4, 0.0]));
    }
}
