//! Estimation algebras: construction of `L0`, the `Q` recursion, bracket
//! closure probes and the two certificates of infinite dimension.

mod certificate;
mod critical;
mod flow;
mod probe;
mod qseq;
mod system;

pub use certificate::{certificate_compact, Certificate, Verdict, TIE_TOLERANCE};
pub use critical::{critical_point_search, critical_points, default_seeds, CriticalPoint, CriticalSearch};
pub use flow::{certificate_flow, gradient_flow, FlowCertificate, GradientFlow, Trajectory, FD_STEP, IDENTITY_RESIDUAL, SUPPORT_CUTOFF};
pub use probe::{dimension_probe, BasisElement, Bound, BracketLogEntry, ProbeResult, ProbeSettings, ProbeStatus, SpanTester};
pub use qseq::{a_h, bracket_identity_check, q_op, q_sequence, BracketCheck, IDENTITY_TOLERANCE};
pub use system::{build_l0, FilteringSystem};
