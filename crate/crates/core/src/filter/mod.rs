//! Numerical filters used to validate the algebra: SDE paths, the robust
//! and direct Zakai solvers, a bootstrap particle filter and Kalman–Bucy.

mod davis;
mod grid;
mod kalman;
mod particle;
mod pde;
mod sde;
mod stats;

pub use davis::{davis_coefficients, DavisCoefficients};
pub use grid::{DensityField, Grid, GridOp, MIN_GRID};
pub use kalman::{kalman_bucy, LinearModel};
pub use particle::{particle_filter, ParticleSettings, Prior, MAX_LOG_SPREAD, MIN_PARTICLES};
pub use pde::{solve_robust_dmz, solve_zakai_direct, stability_bound, PdeSettings, RobustSolution, Stepper, STABILITY_FACTOR};
pub use sde::{simulate_observation, simulate_state, Dynamics, Noise, ObservationPath, SamplePath, Workspace, EULER_MARUYAMA};
pub use stats::{
    angle_difference, circular_mean, conditional_stats, density_moments, particle_moments, particle_stats, FilterReport,
    Moments,
};
