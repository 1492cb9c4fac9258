//! One-parameter matrix groups `t -> e^{tA}` acting on `R^n`: spectral
//! structure, isotropy and cross-sections, invariant measures, and
//! solvability of the dilation equation `sum_k c_k phi(e^{t_k A} x) = 0`.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dilation;
pub mod error;
pub mod functions;
pub mod matrix;
pub mod measure;
pub mod orbit;
pub mod sampling;
pub mod serde_complex;
pub mod spectral;

pub use dilation::{
    build_witness, certify_independence, decide, necessary_coefficient_checks, restrict_to_orbit,
    CertificateOutcome, DilationEquation, IndependenceCertificate, Verdict, Witness,
};
pub use error::{Error, ErrorKind, Result};
pub use functions::{FunctionInfo, Phi, TestFunction};
pub use matrix::{CMatrix, Complex64, SquareMatrix};
pub use measure::{
    apply_d, jacobian_factor, lambda_probe, norm_check, LambdaProbeReport, NormParams,
    NormReport, ProbeParams, SectionMeasure,
};
pub use orbit::{
    build_cross_section, classify_isotropy, isotropy_of, verify_cross_section, CrossSection,
    IsotropyClass,
};
pub use spectral::{complexify, det_exp, flow, matrix_exp, StructuredForm};
