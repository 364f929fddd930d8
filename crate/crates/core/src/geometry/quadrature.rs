use alloc::vec::Vec;

use super::chart::Point;
use super::metric::Metric;
use crate::error::{Error, Result};
use crate::symb::{Evaluator, Expr};

pub const MIN_RESOLUTION: usize = 8;

/// Tensor-product rule for `∫ f dω` over the margin-shrunk chart box:
/// midpoint nodes on periodic axes, composite Simpson on the others.
/// Weights already include `√|g|`.
#[derive(Clone, Debug)]
pub struct Quadrature {
    nodes: Vec<Point>,
    weights: Vec<f64>,
}

/// One-dimensional rule for axis `i` at the given resolution.
pub fn axis_rule(lo: f64, hi: f64, periodic: bool, resolution: usize) -> (Vec<f64>, Vec<f64>) {
    if periodic {
        let h = (hi - lo) / resolution as f64;
        let x = (0..resolution).map(|k| lo + (k as f64 + 0.5) * h).collect();
        (x, alloc::vec![h; resolution])
    } else {
        let m = resolution + resolution % 2;
        let h = (hi - lo) / m as f64;
        let x = (0..=m).map(|k| lo + k as f64 * h).collect();
        let w = (0..=m)
            .map(|k| {
                let c = if k == 0 || k == m {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        (x, w)
    }
}

impl Quadrature {
    pub fn new(metric: &Metric, resolution: usize) -> Result<Quadrature> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::ResolutionTooLow(resolution));
        }
        let chart = metric.chart();
        let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..chart.dim())
            .map(|i| {
                let (lo, hi) = chart.interior(i);
                axis_rule(lo, hi, chart.axes()[i].periodic, resolution)
            })
            .collect();
        let total: usize = rules.iter().map(|r| r.0.len()).product();
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = alloc::vec![0usize; rules.len()];
        for _ in 0..total {
            let p: Point = idx.iter().zip(&rules).map(|(&k, r)| r.0[k]).collect();
            let w: f64 = idx.iter().zip(&rules).map(|(&k, r)| r.1[k]).product();
            weights.push(w * metric.volume_density(&p)?);
            nodes.push(p);
            // odometer, last axis fastest
            for a in (0..idx.len()).rev() {
                idx[a] += 1;
                if idx[a] < rules[a].0.len() {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(Quadrature { nodes, weights })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: &Expr) -> Result<f64> {
        let mut ev = Evaluator::new(core::slice::from_ref(f));
        let mut s = 0.0;
        for (p, w) in self.nodes.iter().zip(&self.weights) {
            s += w * ev.eval1(p)?;
        }
        Ok(s)
    }

    /// Integrates several expressions in one pass.
    pub fn integrate_many(&self, fs: &[Expr]) -> Result<Vec<f64>> {
        let mut ev = Evaluator::new(fs);
        let mut s = alloc::vec![0.0; fs.len()];
        for (p, w) in self.nodes.iter().zip(&self.weights) {
            for (acc, v) in s.iter_mut().zip(ev.eval(p)?) {
                *acc += w * v;
            }
        }
        Ok(s)
    }

    /// `∫ φ dω` for a pointwise closure.
    pub fn integrate_with<F: FnMut(&[f64]) -> Result<f64>>(&self, mut f: F) -> Result<f64> {
        let mut s = 0.0;
        for (p, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(p)?;
        }
        Ok(s)
    }
}

/// `∫ f √|g| dx` over the margin-shrunk chart.
pub fn integrate(f: &Expr, metric: &Metric, resolution: usize) -> Result<f64> {
    Quadrature::new(metric, resolution)?.integrate(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Chart;
    use crate::symb::parse;
    use crate::tol::Tolerances;
    use core::f64::consts::PI;
    use num_traits::Float;

    #[test]
    fn circle_integrals() {
        let m = Metric::flat(Chart::circle(&Tolerances::default()));
        assert!((integrate(&Expr::one(), &m, 16).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!(integrate(&Expr::coord(0).cos(), &m, 16).unwrap().abs() < 1e-12);
        assert_eq!(integrate(&Expr::one(), &m, 4), Err(Error::ResolutionTooLow(4)));
    }

    #[test]
    fn sphere_area_with_margin() {
        let eps = 1e-3;
        let c = Chart::sphere2(eps, &Tolerances::default());
        let s2 = parse("sin(theta)^2", c.names()).unwrap();
        let m = Metric::new(c, alloc::vec![alloc::vec![Expr::one(), Expr::zero()], alloc::vec![Expr::zero(), s2]])
            .unwrap();
        let area = integrate(&Expr::one(), &m, 64).unwrap();
        assert!((area - 4.0 * PI * eps.cos()).abs() < 1e-5, "{area}");
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let m = Metric::flat(Chart::euclidean(1, 1.0, &Tolerances::default()).unwrap());
        let f = parse("x^3 + x^2", &[alloc::string::String::from("x")]).unwrap();
        assert!((integrate(&f, &m, 9).unwrap() - 2.0 / 3.0).abs() < 1e-13);
    }
}
