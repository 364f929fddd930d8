use alloc::vec::Vec;

use num_traits::Float;

use super::grid::Grid;
use super::sde::{Dynamics, ObservationPath};
use super::stats::{particle_moments, FilterReport};
use crate::error::{Error, Result};
use crate::estalg::FilteringSystem;
use crate::geometry::Point;
use crate::rng::{streams, CounterRng};
use crate::symb::Program;

/// Smallest accepted particle count.
pub const MIN_PARTICLES: usize = 1000;
/// Largest tolerated spread of the log-weights.
pub const MAX_LOG_SPREAD: f64 = 700.0;

/// Initial law of the particle cloud.
#[derive(Clone, Copy, Debug)]
pub enum Prior<'a> {
    Dirac(&'a [f64]),
    /// Piecewise-constant density given by node values on a grid.
    Grid { grid: &'a Grid, values: &'a [f64] },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParticleSettings {
    pub particles: usize,
    pub seed: u64,
    /// Euler–Maruyama substeps per observation interval.
    pub substeps: usize,
}

impl ParticleSettings {
    pub fn new(particles: usize, seed: u64) -> ParticleSettings {
        ParticleSettings { particles, seed, substeps: 1 }
    }
}

fn initial_cloud(prior: Prior<'_>, n: usize, rng: &CounterRng, dim: usize) -> Result<Vec<Point>> {
    match prior {
        Prior::Dirac(x) => {
            if x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
            }
            Ok(alloc::vec![x.to_vec(); n])
        }
        Prior::Grid { grid, values } => {
            if values.len() != grid.len() {
                return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
            }
            let mut cdf = Vec::with_capacity(values.len());
            let mut acc = 0.0;
            for (v, w) in values.iter().zip(grid.weights().iter()) {
                if *v < 0.0 {
                    return Err(Error::InvalidArgument("prior density must be non-negative".into()));
                }
                acc += v * w;
                cdf.push(acc);
            }
            if !(acc > 0.0) {
                return Err(Error::ZeroMass);
            }
            let chart = grid.chart();
            let stride = (dim + 1) as u64;
            Ok((0..n)
                .map(|p| {
                    let base = p as u64 * stride;
                    let u = rng.uniform(base) * acc;
                    let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                    let mut x: Point = grid.nodes()[k]
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c + (rng.uniform(base + 1 + i as u64) - 0.5) * grid.spacing()[i])
                        .collect();
                    chart.wrap(&mut x);
                    for (i, xi) in x.iter_mut().enumerate() {
                        if !chart.axes()[i].periodic {
                            let (lo, hi) = chart.interior(i);
                            *xi = xi.clamp(lo, hi);
                        }
                    }
                    x
                })
                .collect())
        }
    }
}

/// Systematic resampling with one uniform offset; returns parent indices.
fn systematic(weights: &[f64], offset: f64) -> Vec<usize> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut j = 0;
    for i in 0..n {
        let target = (offset + i as f64) / n as f64 * total;
        while cum < target && j + 1 < n {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    out
}

/// Bootstrap particle filter: propagate with the state dynamics, reweight by
/// `h(x)·ΔY − ½|h(x)|² Δt`, resample systematically when the effective
/// sample size drops below `N/2`.
pub fn particle_filter(
    sys: &FilteringSystem,
    y: &ObservationPath,
    prior: Prior<'_>,
    settings: &ParticleSettings,
) -> Result<FilterReport> {
    let n = settings.particles;
    if n < MIN_PARTICLES {
        return Err(Error::InvalidArgument(alloc::format!(
            "particle filter needs at least {MIN_PARTICLES} particles, got {n}"
        )));
    }
    if settings.substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be positive".into()));
    }
    let m = sys.observations().len();
    if y.channels() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.channels() });
    }
    let chart = sys.chart().clone();
    let dim = chart.dim();
    let dynamics = Dynamics::new(sys)?;
    let h = Program::compile(sys.observations());
    let mut regs = h.scratch();
    let mut hv = alloc::vec![0.0; m];
    let init_rng = CounterRng::new(settings.seed, streams::PARTICLE_INIT);
    let noise = CounterRng::new(settings.seed, streams::PARTICLE_NOISE);
    let resample_rng = CounterRng::new(settings.seed, streams::RESAMPLING);

    let mut xs = initial_cloud(prior, n, &init_rng, dim)?;
    let mut logw = alloc::vec![0.0; n];
    let mut w = alloc::vec![1.0; n];
    let mut report = FilterReport {
        method: "particle".into(),
        times: alloc::vec![y.times[0]],
        moments: alloc::vec![particle_moments(&chart, &xs, &w)?],
        masses: alloc::vec![n as f64],
        settings: alloc::vec![
            ("particles".into(), n as f64),
            ("seed".into(), settings.seed as f64),
            ("substeps".into(), settings.substeps as f64),
        ],
        distances: Vec::new(),
        resamplings: 0,
    };
    let mut ws = dynamics.workspace();
    let mut xi = alloc::vec![0.0; dim];
    let mut draw: u64 = 0;
    for k in 0..y.times.len() - 1 {
        let span = y.times[k + 1] - y.times[k];
        let dy = &y.increments[k];
        for (x, lw) in xs.iter().zip(logw.iter_mut()) {
            h.eval_into(x, &mut regs, &mut hv)?;
            *lw += hv.iter().zip(dy).map(|(a, b)| a * b).sum::<f64>()
                - 0.5 * hv.iter().map(|a| a * a).sum::<f64>() * span;
        }
        let (lo, hi) = logw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        if !(hi - lo <= MAX_LOG_SPREAD) {
            return Err(Error::WeightCollapse { spread: hi - lo });
        }
        for (wi, lw) in w.iter_mut().zip(&logw) {
            *wi = (lw - hi).exp();
        }
        let (s1, s2) = w.iter().fold((0.0, 0.0), |(a, b), v| (a + v, b + v * v));
        if s1 * s1 / s2 < 0.5 * n as f64 {
            let parents = systematic(&w, resample_rng.uniform(k as u64));
            xs = parents.iter().map(|&j| xs[j].clone()).collect();
            logw.iter_mut().for_each(|v| *v = 0.0);
            w.iter_mut().for_each(|v| *v = 1.0);
            report.resamplings += 1;
        }
        let dt = span / settings.substeps as f64;
        for s in 0..settings.substeps {
            let t = y.times[k] + s as f64 * dt;
            for (p, x) in xs.iter_mut().enumerate() {
                let base = ((draw * n as u64) + p as u64) * dim as u64;
                for (i, z) in xi.iter_mut().enumerate() {
                    *z = noise.normal(base + i as u64);
                }
                dynamics.step(x, dt, &xi, &mut ws, t)?;
            }
            draw += 1;
        }
        report.times.push(y.times[k + 1]);
        report.moments.push(particle_moments(&chart, &xs, &w)?);
        report.masses.push(w.iter().sum::<f64>() * (hi.exp()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::sde::{simulate_observation, simulate_state, Noise};
    use crate::geometry::{Chart, Metric, VectorField};
    use crate::symb::{parse, Expr};
    use crate::tol::Tolerances;

    #[test]
    fn systematic_resampling() {
        assert_eq!(systematic(&[0.0, 1.0, 0.0, 1.0], 0.5), alloc::vec![1, 1, 3, 3]);
        assert_eq!(systematic(&[1.0; 4], 0.5), alloc::vec![0, 1, 2, 3]);
    }

    #[test]
    fn no_observation_means_uniform_weights() {
        let tol = Tolerances::default();
        let c = Chart::circle(&tol);
        let sys = FilteringSystem::new(Metric::flat(c), VectorField::zero(1), alloc::vec![Expr::int(0)], tol).unwrap();
        let path = simulate_state(&sys, &[1.0], 0.2, 1e-2, 0, Noise::Gaussian).unwrap();
        let y = simulate_observation(&path, sys.observations(), 1, Noise::Gaussian).unwrap();
        let r = particle_filter(&sys, &y, Prior::Dirac(&[1.0]), &ParticleSettings::new(1000, 3)).unwrap();
        assert_eq!(r.resamplings, 0);
        assert!(r.masses.iter().all(|m| *m == 1000.0));
    }

    #[test]
    fn too_few_particles() {
        let tol = Tolerances::default();
        let c = Chart::circle(&tol);
        let sys = FilteringSystem::new(Metric::flat(c), VectorField::zero(1), alloc::vec![Expr::int(0)], tol).unwrap();
        let y = ObservationPath::from_values(alloc::vec![0.0, 1.0], alloc::vec![alloc::vec![0.0]; 2]).unwrap();
        assert!(matches!(
            particle_filter(&sys, &y, Prior::Dirac(&[0.0]), &ParticleSettings::new(10, 0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn grid_prior_sampling_matches_density() {
        let tol = Tolerances::default();
        let c = Chart::circle(&tol);
        let g = Grid::uniform(&Metric::flat(c.clone()), 128).unwrap();
        let v = g.eval(&parse("exp(2*cos(theta-1))", c.names()).unwrap()).unwrap();
        let rng = CounterRng::new(9, streams::PARTICLE_INIT);
        let xs = initial_cloud(Prior::Grid { grid: &g, values: &v }, 20_000, &rng, 1).unwrap();
        let pm = particle_moments(&c, &xs, &alloc::vec![1.0; xs.len()]).unwrap();
        let dm = super::super::stats::density_moments(&g.field(v, 0.0), &g).unwrap();
        assert!((pm.mean[0] - dm.mean[0]).abs() < 0.03);
    }

    #[test]
    fn seeded_determinism() {
        let tol = Tolerances::default();
        let c = Chart::circle(&tol);
        let h = parse("cos(theta)", c.names()).unwrap();
        let sys = FilteringSystem::new(Metric::flat(c), VectorField::zero(1), alloc::vec![h], tol).unwrap();
        let path = simulate_state(&sys, &[1.0], 0.3, 1e-2, 0, Noise::Gaussian).unwrap();
        let y = simulate_observation(&path, sys.observations(), 1, Noise::Gaussian).unwrap();
        let s = ParticleSettings::new(2000, 5);
        let a = particle_filter(&sys, &y, Prior::Dirac(&[1.0]), &s).unwrap();
        let b = particle_filter(&sys, &y, Prior::Dirac(&[1.0]), &s).unwrap();
        assert_eq!(a, b);
    }
}
