use alloc::vec::Vec;

use num_traits::Float;

use super::davis::davis_coefficients;
use super::grid::{DensityField, Grid, GridOp};
use super::sde::ObservationPath;
use crate::error::{Error, Result};
use crate::estalg::FilteringSystem;

/// `dt ≤ STABILITY_FACTOR · min Δx² / max |a|`.
pub const STABILITY_FACTOR: f64 = 0.2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Stepper {
    #[default]
    Rk4,
    Heun,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdeSettings {
    pub dt: f64,
    /// Time stepper of the robust solver. The direct solver always uses Heun.
    pub stepper: Stepper,
}

impl PdeSettings {
    pub fn new(dt: f64) -> PdeSettings {
        PdeSettings { dt, stepper: Stepper::Rk4 }
    }
}

/// Largest admissible PDE step for `L0` on `grid`.
pub fn stability_bound(grid: &Grid, l0: &GridOp) -> f64 {
    let a = l0.diffusion_bound(grid.chart().dim(), grid.len());
    let dx2 = grid.spacing().iter().map(|h| h * h).fold(f64::INFINITY, f64::min);
    if a > 0.0 {
        STABILITY_FACTOR * dx2 / a
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug)]
pub struct RobustSolution {
    /// `u` at every observation time.
    pub u: Vec<DensityField>,
    /// `σ = exp(Σ hⁱ Yⁱ) u` at the same times.
    pub sigma: Vec<DensityField>,
}

struct Setup {
    l0: GridOp,
    substeps: Vec<usize>,
    h: Vec<Vec<f64>>,
}

fn setup(sys: &FilteringSystem, y: &ObservationPath, grid: &Grid, initial: &[f64], dt: f64, l0: GridOp) -> Result<Setup> {
    if initial.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: initial.len() });
    }
    let m = sys.observations().len();
    if y.channels() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.channels() });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("PDE step must be positive, got {dt}")));
    }
    let bound = stability_bound(grid, &l0);
    if dt > bound {
        return Err(Error::StabilityViolation { dt, bound });
    }
    let mut substeps = Vec::with_capacity(y.times.len() - 1);
    for w in y.times.windows(2) {
        let span = w[1] - w[0];
        let k = (span / dt).round().max(1.0);
        if (k * dt - span).abs() > 1e-9 * span {
            return Err(Error::InvalidArgument(alloc::format!(
                "PDE step {dt} does not divide the observation step {span}"
            )));
        }
        substeps.push(k as usize);
    }
    let h = grid.eval_many(sys.observations())?;
    Ok(Setup { l0, substeps, h })
}

fn check(v: &[f64], time: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteDensity { time })
    }
}

fn gauge(h: &[Vec<f64>], y: &[f64], u: &[f64], sign: f64) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(k, v)| {
            let s: f64 = h.iter().zip(y).map(|(hi, yi)| hi[k] * yi).sum();
            (sign * s).exp() * v
        })
        .collect()
}

/// Method-of-lines solver of the robust equation
/// `∂u/∂t = L0 u + Σ Yⁱ B_i u + ½ Σ YⁱYʲ C_ij u`
/// with `Y` interpolated linearly between observation times. Snapshots are
/// taken at every observation time.
pub fn solve_robust_dmz(
    sys: &FilteringSystem,
    y: &ObservationPath,
    grid: &Grid,
    initial: &[f64],
    settings: &PdeSettings,
) -> Result<RobustSolution> {
    let davis = davis_coefficients(sys)?;
    let l0 = GridOp::new(grid, &davis.l0)?;
    let st = setup(sys, y, grid, initial, settings.dt, l0)?;
    let b: Vec<GridOp> = davis.b.iter().map(|op| GridOp::new(grid, op)).collect::<Result<_>>()?;
    let c: Vec<Vec<GridOp>> = davis
        .c
        .iter()
        .map(|row| row.iter().map(|op| GridOp::new(grid, op)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let m = b.len();
    let len = grid.len();
    let mut yt = alloc::vec![0.0; m];
    let mut rhs = |t: f64, u: &[f64], out: &mut [f64]| {
        st.l0.apply(grid, u, out);
        y.value_at(t, &mut yt);
        for i in 0..m {
            if !b[i].is_zero() && yt[i] != 0.0 {
                b[i].apply_add(grid, u, yt[i], out);
            }
            for j in 0..m {
                if !c[i][j].is_zero() && yt[i] * yt[j] != 0.0 {
                    c[i][j].apply_add(grid, u, 0.5 * yt[i] * yt[j], out);
                }
            }
        }
    };
    let mut u = gauge(&st.h, &y.values[0], initial, -1.0);
    let mut us = Vec::with_capacity(y.times.len());
    let mut sigmas = Vec::with_capacity(y.times.len());
    let snapshot = |u: &[f64], k: usize, us: &mut Vec<DensityField>, sigmas: &mut Vec<DensityField>| -> Result<()> {
        let t = y.times[k];
        let s = gauge(&st.h, &y.values[k], u, 1.0);
        check(u, t)?;
        check(&s, t)?;
        us.push(grid.field(u.to_vec(), t));
        sigmas.push(grid.field(s, t));
        Ok(())
    };
    snapshot(&u, 0, &mut us, &mut sigmas)?;
    let mut ws = [alloc::vec![0.0; len], alloc::vec![0.0; len], alloc::vec![0.0; len], alloc::vec![0.0; len], alloc::vec![0.0; len]];
    for (k, &n) in st.substeps.iter().enumerate() {
        let t0 = y.times[k];
        let dt = (y.times[k + 1] - t0) / n as f64;
        for s in 0..n {
            let t = t0 + s as f64 * dt;
            match settings.stepper {
                Stepper::Rk4 => rk4(&mut rhs, t, dt, &mut u, &mut ws),
                Stepper::Heun => heun(&mut rhs, t, dt, &mut u, &mut ws),
            }
        }
        snapshot(&u, k + 1, &mut us, &mut sigmas)?;
    }
    Ok(RobustSolution { u: us, sigma: sigmas })
}

fn rk4<F: FnMut(f64, &[f64], &mut [f64])>(f: &mut F, t: f64, dt: f64, u: &mut [f64], ws: &mut [Vec<f64>; 5]) {
    let [k1, k2, k3, k4, tmp] = ws;
    f(t, u, k1);
    for i in 0..u.len() {
        tmp[i] = u[i] + 0.5 * dt * k1[i];
    }
    f(t + 0.5 * dt, tmp, k2);
    for i in 0..u.len() {
        tmp[i] = u[i] + 0.5 * dt * k2[i];
    }
    f(t + 0.5 * dt, tmp, k3);
    for i in 0..u.len() {
        tmp[i] = u[i] + dt * k3[i];
    }
    f(t + dt, tmp, k4);
    for i in 0..u.len() {
        u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

fn heun<F: FnMut(f64, &[f64], &mut [f64])>(f: &mut F, t: f64, dt: f64, u: &mut [f64], ws: &mut [Vec<f64>; 5]) {
    let [k1, k2, _, _, tmp] = ws;
    f(t, u, k1);
    for i in 0..u.len() {
        tmp[i] = u[i] + dt * k1[i];
    }
    f(t + dt, tmp, k2);
    for i in 0..u.len() {
        u[i] = u[i] + 0.5 * dt * (k1[i] + k2[i]);
    }
}

/// Heun scheme for the Stratonovich equation `dσ = L0 σ dt + Σ hⁱ σ ∘ dYⁱ`,
/// snapshots at every observation time.
pub fn solve_zakai_direct(
    sys: &FilteringSystem,
    y: &ObservationPath,
    grid: &Grid,
    initial: &[f64],
    settings: &PdeSettings,
) -> Result<Vec<DensityField>> {
    let l0 = GridOp::new(grid, sys.l0())?;
    let st = setup(sys, y, grid, initial, settings.dt, l0)?;
    let len = grid.len();
    let m = st.h.len();
    let mut sigma = initial.to_vec();
    check(&sigma, 0.0)?;
    let mut out = Vec::with_capacity(y.times.len());
    out.push(grid.field(sigma.clone(), y.times[0]));
    let (mut k1, mut k2, mut n1, mut n2, mut tmp) =
        (alloc::vec![0.0; len], alloc::vec![0.0; len], alloc::vec![0.0; len], alloc::vec![0.0; len], alloc::vec![0.0; len]);
    let (mut ya, mut yb) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
    let noise = |dy: &[f64], s: &[f64], out: &mut [f64]| {
        for k in 0..s.len() {
            let g: f64 = st.h.iter().zip(dy).map(|(hi, d)| hi[k] * d).sum();
            out[k] = g * s[k];
        }
    };
    for (k, &n) in st.substeps.iter().enumerate() {
        let t0 = y.times[k];
        let dt = (y.times[k + 1] - t0) / n as f64;
        for s in 0..n {
            let t = t0 + s as f64 * dt;
            y.value_at(t, &mut ya);
            y.value_at(t + dt, &mut yb);
            let dy: Vec<f64> = yb.iter().zip(&ya).map(|(b, a)| b - a).collect();
            st.l0.apply(grid, &sigma, &mut k1);
            noise(&dy, &sigma, &mut n1);
            for i in 0..len {
                tmp[i] = sigma[i] + dt * k1[i] + n1[i];
            }
            st.l0.apply(grid, &tmp, &mut k2);
            noise(&dy, &tmp, &mut n2);
            for i in 0..len {
                sigma[i] = sigma[i] + 0.5 * dt * (k1[i] + k2[i]) + 0.5 * (n1[i] + n2[i]);
            }
        }
        let t = y.times[k + 1];
        check(&sigma, t)?;
        out.push(grid.field(sigma.clone(), t));
    }
    Ok(out)
}
