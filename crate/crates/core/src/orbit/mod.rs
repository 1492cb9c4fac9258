//! Isotropy, orbit types and cross-sections of the flow.

pub mod isotropy;
pub mod section;
pub mod verify;

pub use isotropy::{
    classify_isotropy, fundamental_period, isotropy_of, rotation_speeds, verify_period,
    IsotropyClass, OrbitClass, PeriodCheck,
};
pub use section::{
    build_cross_section, CrossSection, OmegaPredicate, OmegaTest, SectionCase, SectionFormula,
};
pub use verify::{verify_cross_section, VerificationReport};
