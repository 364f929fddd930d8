use estalg_core::estalg::FilteringSystem;
use estalg_core::filter::{
    conditional_stats, kalman_bucy, particle_filter, particle_stats, simulate_observation, simulate_state, solve_robust_dmz,
    Grid, LinearModel, Noise, ParticleSettings, PdeSettings, Prior,
};
use estalg_core::geometry::{Chart, Metric, VectorField};
use estalg_core::rng::{streams, CounterRng};
use estalg_core::symb::parse;
use estalg_core::Tolerances;
use proptest::prelude::*;

fn line_ou() -> FilteringSystem {
    let tol = Tolerances::default();
    let r = Chart::euclidean(1, 10.0, &tol).unwrap();
    let f = VectorField(vec![parse("-x/2", r.names()).unwrap()]);
    FilteringSystem::new(Metric::flat(r.clone()), f, vec![parse("x", r.names()).unwrap()], tol).unwrap()
}

#[test]
fn particle_filter_tracks_kalman_bucy() {
    let sys = line_ou();
    let (m0, p0) = (0.5, 0.25);
    let path = simulate_state(&sys, &[m0], 1.0, 1e-3, 3, Noise::Gaussian).unwrap();
    let y = simulate_observation(&path, sys.observations(), 4, Noise::Gaussian).unwrap();
    let grid = Grid::uniform(sys.metric(), 801).unwrap();
    let prior: Vec<f64> = grid.nodes().iter().map(|p| (-(p[0] - m0).powi(2) / (2.0 * p0)).exp()).collect();
    let pf = particle_filter(&sys, &y, Prior::Grid { grid: &grid, values: &prior }, &ParticleSettings::new(100_000, 5)).unwrap();
    let kb = kalman_bucy(&LinearModel { a: -0.5, c: 1.0, m0, p0 }, &y).unwrap();
    let worst = pf
        .moments
        .iter()
        .zip(&kb.moments)
        .map(|(a, b)| (a.mean[0] - b.mean[0]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.02, "{worst}");
}

#[test]
fn grid_and_particle_estimators_agree() {
    let tol = Tolerances::default();
    let c = Chart::circle(&tol);
    let metric = Metric::flat(c.clone());
    let grid = Grid::uniform(&metric, 256).unwrap();
    let dens: Vec<f64> = grid.nodes().iter().map(|p| (2.0 * (p[0] - 0.7).cos()).exp()).collect();
    let phis = vec![parse("cos(theta)", c.names()).unwrap(), parse("sin(theta)^2", c.names()).unwrap()];
    let exact = conditional_stats(&grid.field(dens.clone(), 0.0), &grid, &phis).unwrap();

    // inverse-CDF draws from the same density
    let rng = CounterRng::new(1, streams::PARTICLE_INIT);
    let w = grid.weights();
    let mut cdf = Vec::new();
    let mut acc = 0.0;
    for (d, wi) in dens.iter().zip(w.iter()) {
        acc += d * wi;
        cdf.push(acc);
    }
    let n = 40_000;
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let u = rng.uniform(k) * acc;
            let i = cdf.partition_point(|&x| x <= u).min(cdf.len() - 1);
            vec![grid.nodes()[i][0]]
        })
        .collect();
    let mc = particle_stats(&pts, &vec![1.0; n as usize], &phis).unwrap();
    for (a, b) in exact.iter().zip(&mc) {
        // both integrands are bounded by 1, so 4/√n is a loose 4σ bound
        assert!((a - b).abs() < 4.0 / (n as f64).sqrt(), "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn positivity_without_observations(mu in 0.0f64..6.0, kappa in 0.5f64..8.0) {
        let tol = Tolerances::default();
        let c = Chart::circle(&tol);
        let sys = FilteringSystem::new(Metric::flat(c.clone()), VectorField::zero(1), vec![parse("0", c.names()).unwrap()], tol).unwrap();
        let grid = Grid::uniform(sys.metric(), 64).unwrap();
        let init: Vec<f64> = grid.nodes().iter().map(|p| (kappa * (p[0] - mu).cos()).exp()).collect();
        let path = simulate_state(&sys, &[mu], 0.2, 1e-2, 0, Noise::Gaussian).unwrap();
        let y = simulate_observation(&path, sys.observations(), 0, Noise::Gaussian).unwrap();
        let sol = solve_robust_dmz(&sys, &y, &grid, &init, &PdeSettings::new(1e-3)).unwrap();
        let m0 = sol.sigma[0].mass();
        for f in &sol.sigma {
            prop_assert!(f.values.iter().all(|v| *v > 0.0));
            prop_assert!((f.mass() - m0).abs() < 1e-6 * m0);
        }
    }

    #[test]
    fn seeded_runs_are_bit_identical(seed in any::<u64>()) {
        let sys = line_ou();
        let a = simulate_state(&sys, &[0.1], 0.1, 1e-3, seed, Noise::Gaussian).unwrap();
        let b = simulate_state(&sys, &[0.1], 0.1, 1e-3, seed, Noise::Gaussian).unwrap();
        prop_assert_eq!(&a, &b);
        let ya = simulate_observation(&a, sys.observations(), seed ^ 1, Noise::Gaussian).unwrap();
        let pa = particle_filter(&sys, &ya, Prior::Dirac(&[0.1]), &ParticleSettings::new(1000, seed)).unwrap();
        let pb = particle_filter(&sys, &ya, Prior::Dirac(&[0.1]), &ParticleSettings::new(1000, seed)).unwrap();
        prop_assert_eq!(pa, pb);
    }
}
