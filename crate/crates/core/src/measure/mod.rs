//! Invariant measures on the cross-section and the `L^p` isometry check.

pub mod chart;
pub mod norm;
pub mod probe;

pub use chart::{jacobian_factor, ChartPoint, CoordKind, JacobianFactorization, SectionChart, SectionMeasure};
pub use norm::{apply_d, norm_check, Estimate, NormMethod, NormParams, NormReport, SampleRecord};
pub use probe::{lambda_probe, LambdaProbeReport, ProbeParams, ProbePoint};
