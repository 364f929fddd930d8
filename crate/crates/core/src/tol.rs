//! Numerical thresholds that turn "zero" and "nonzero" into decisions.

use alloc::format;

use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Absolute threshold of the sampled zero test.
    pub zero: f64,
    /// Number of interior sample points of the zero test.
    pub zero_samples: usize,
    /// Relative numerical-rank threshold.
    pub rank: f64,
    /// Metric norm of the gradient accepted at a critical point.
    pub crit: f64,
    /// Largest below-diagonal entry of a triangular certificate.
    pub tri: f64,
    /// Smallest admissible diagonal entry of a certificate.
    pub diag: f64,
    /// Distance under which two critical points are the same.
    pub dedup: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            zero: 1e-10,
            zero_samples: 64,
            rank: 1e-8,
            crit: 1e-10,
            tri: 1e-8,
            diag: 1e-6,
            dedup: 1e-6,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 7] = ["zero", "zero_samples", "rank", "crit", "tri", "diag", "dedup"];

    /// Override one tolerance by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {name} must be positive, got {value}")));
        }
        match name {
            "zero" => self.zero = value,
            "zero_samples" => {
                if value.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!("zero_samples must be an integer, got {value}")));
                }
                self.zero_samples = value as usize
            }
            "rank" => self.rank = value,
            "crit" => self.crit = value,
            "tri" => self.tri = value,
            "diag" => self.diag = value,
            "dedup" => self.dedup = value,
            _ => return Err(Error::InvalidArgument(format!("unknown tolerance {name}"))),
        }
        Ok(())
    }
}
