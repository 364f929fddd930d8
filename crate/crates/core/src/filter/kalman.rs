use alloc::vec::Vec;

use super::sde::ObservationPath;
use super::stats::{FilterReport, Moments};
use crate::error::{Error, Result};

/// Scalar system `dX = aX dt + dW`, `dY = cX dt + dV`, prior `N(m0, P0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearModel {
    pub a: f64,
    pub c: f64,
    pub m0: f64,
    pub p0: f64,
}

/// Kalman–Bucy mean and variance, integrated with RK4 on each observation
/// interval with `dY/dt` frozen at `ΔY/Δt`.
pub fn kalman_bucy(model: &LinearModel, y: &ObservationPath) -> Result<FilterReport> {
    if y.channels() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: y.channels() });
    }
    if !(model.p0 >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("prior variance must be non-negative, got {}", model.p0)));
    }
    let LinearModel { a, c, .. } = *model;
    let (mut m, mut p) = (model.m0, model.p0);
    let mut moments = Vec::with_capacity(y.times.len());
    moments.push(Moments { mean: alloc::vec![m], variance: alloc::vec![p] });
    for k in 0..y.times.len() - 1 {
        let dt = y.times[k + 1] - y.times[k];
        let rate = y.increments[k][0] / dt;
        let f = |m: f64, p: f64| (a * m + p * c * (rate - c * m), 2.0 * a * p + 1.0 - c * c * p * p);
        let (m1, p1) = f(m, p);
        let (m2, p2) = f(m + 0.5 * dt * m1, p + 0.5 * dt * p1);
        let (m3, p3) = f(m + 0.5 * dt * m2, p + 0.5 * dt * p2);
        let (m4, p4) = f(m + dt * m3, p + dt * p3);
        m += dt / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
        p += dt / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
        moments.push(Moments { mean: alloc::vec![m], variance: alloc::vec![p] });
    }
    Ok(FilterReport {
        method: "kalman-bucy".into(),
        times: y.times.clone(),
        masses: alloc::vec![1.0; moments.len()],
        moments,
        settings: alloc::vec![
            ("a".into(), a),
            ("c".into(), c),
            ("m0".into(), model.m0),
            ("p0".into(), model.p0),
        ],
        distances: Vec::new(),
        resamplings: 0,
    })
}
