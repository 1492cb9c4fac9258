//! Solvability of dilation equations, lattice witnesses, independence
//! certificates and orbit restrictions.

pub mod certificate;
pub mod equation;
pub mod restriction;
pub mod verdict;
pub mod witness;

pub use certificate::{certify_independence, CertificateOutcome, IndependenceCertificate, DEFAULT_TUPLES};
pub use equation::{necessary_coefficient_checks, CoefficientCheck, CoefficientCondition, DilationEquation};
pub use restriction::{restrict_to_orbit, OrbitRestriction};
pub use verdict::{decide, NecessaryCondition, Reason, Verdict, DEFAULT_WITNESS_SAMPLES};
pub use witness::{adapted_shape, build_witness, Witness};
