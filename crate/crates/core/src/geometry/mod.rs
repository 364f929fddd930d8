//! Riemannian structure on a single coordinate chart.

mod chart;
mod diffusion;
mod fields;
mod metric;
mod quadrature;

pub use chart::{Axis, Chart, Point};
pub use diffusion::{metric_from_diffusion, DiffusionSpec};
pub use fields::{christoffel, div, grad, inner, laplacian, Christoffel, ScalarField, VectorField};
pub use metric::{adjugate, det, inverse_metric, Matrix, Metric};
pub use quadrature::{axis_rule, integrate, Quadrature, MIN_RESOLUTION};
