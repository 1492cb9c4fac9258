//! Solvability verdicts for `sum_k c_k phi(e^{t_k A} x) = 0` in `L^p(R^n)`.

use serde::{Deserialize, Serialize};

use crate::dilation::equation::DilationEquation;
use crate::dilation::witness::{build_witness, Witness};
use crate::error::{Error, Result};
use crate::orbit::IsotropyClass;
use crate::spectral::structured::StructuredForm;

pub const TRACE_TOL: f64 = 1e-12;
pub const DEFAULT_WITNESS_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reason {
    /// `c phi(e^{tA} x) = 0` forces `phi = 0`.
    SingleTerm,
    /// Free action with `trace A = 0`.
    TracelessFreeAction,
    /// Free action with two terms.
    TwoTermFreeAction,
}

impl Reason {
    pub fn statement(&self) -> &'static str {
        match self {
            Reason::SingleTerm => "a single dilate of phi vanishes only if phi does",
            Reason::TracelessFreeAction => {
                "trace(A) = 0 and the action is free: no nontrivial L^p solution"
            }
            Reason::TwoTermFreeAction => {
                "two-term equation under a free action: no nontrivial L^p solution"
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all_fields = "camelCase")]
pub enum NecessaryCondition {
    /// `Lambda_phi` is Lebesgue-null.
    LambdaNull,
    /// No continuous solution exists, so any solution is discontinuous.
    Discontinuous,
    /// `sum c_k = 0` when `phi(0) != 0`; `sum c_k |det e^{-t_k A}| = 0` when
    /// `phi >= 0` and `p = 1`.
    CoefficientConstraints { det_weighted_applicable: bool },
}

impl NecessaryCondition {
    pub fn statement(&self) -> &'static str {
        match self {
            NecessaryCondition::LambdaNull => "any solution has m(Lambda_phi) = 0",
            NecessaryCondition::Discontinuous => "any nonzero solution is discontinuous",
            NecessaryCondition::CoefficientConstraints { .. } => {
                "sum c_k = 0 if phi(0) != 0; sum c_k |det e^{-t_k A}| = 0 if phi >= 0 and p = 1"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all_fields = "camelCase")]
pub enum Verdict {
    IdentityGroupTrivial,
    NoNontrivialSolution { reasons: Vec<Reason> },
    SolutionExists { witness: Box<Witness> },
    Undetermined { necessary_conditions: Vec<NecessaryCondition> },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::IdentityGroupTrivial => "IdentityGroupTrivial",
            Verdict::NoNontrivialSolution { .. } => "NoNontrivialSolution",
            Verdict::SolutionExists { .. } => "SolutionExists",
            Verdict::Undetermined { .. } => "Undetermined",
        }
    }
}

fn expected_isotropy(form: &StructuredForm) -> &'static str {
    if form.is_zero() {
        "FullLine"
    } else if form.has_nilpotent_part() || form.has_nonzero_real_part() {
        "Trivial"
    } else {
        "Lattice"
    }
}

fn isotropy_kind(iso: &IsotropyClass) -> &'static str {
    match iso {
        IsotropyClass::Trivial => "Trivial",
        IsotropyClass::Lattice { .. } => "Lattice",
        IsotropyClass::FullLine => "FullLine",
    }
}

/// Decision ladder. `witness_samples` and `seed` control the lattice witness check.
pub fn decide(
    eq: &DilationEquation,
    form: &StructuredForm,
    isotropy: &IsotropyClass,
    witness_samples: usize,
    seed: u64,
) -> Result<Verdict> {
    let a = eq.a();
    if (a.as_matrix() - form.generator().as_matrix()).norm() > 1e-12 * a.norm().max(1.0) {
        return Err(Error::InconsistentInputs(
            "structured form was computed for a different matrix".into(),
        ));
    }
    let expected = expected_isotropy(form);
    if expected != isotropy_kind(isotropy) {
        return Err(Error::InconsistentInputs(format!(
            "isotropy {} disagrees with the spectral form ({expected})",
            isotropy.name()
        )));
    }
    if form.is_zero() {
        return Ok(Verdict::IdentityGroupTrivial);
    }
    if eq.m() == 1 {
        return Ok(Verdict::NoNontrivialSolution {
            reasons: vec![Reason::SingleTerm],
        });
    }
    match isotropy {
        IsotropyClass::Lattice { .. } => Ok(Verdict::SolutionExists {
            witness: Box::new(build_witness(form, isotropy, witness_samples, seed)?),
        }),
        IsotropyClass::FullLine => Err(Error::InconsistentInputs(
            "full-line isotropy with a nonzero generator".into(),
        )),
        IsotropyClass::Trivial => {
            let traceless = a.trace().abs() <= TRACE_TOL * a.norm().max(1.0);
            let mut reasons = Vec::new();
            if traceless {
                reasons.push(Reason::TracelessFreeAction);
            }
            if eq.m() == 2 {
                reasons.push(Reason::TwoTermFreeAction);
            }
            if reasons.is_empty() {
                Ok(Verdict::Undetermined {
                    necessary_conditions: vec![
                        NecessaryCondition::LambdaNull,
                        NecessaryCondition::Discontinuous,
                        NecessaryCondition::CoefficientConstraints {
                            det_weighted_applicable: eq.p() == 1.0,
                        },
                    ],
                })
            } else {
                Ok(Verdict::NoNontrivialSolution { reasons })
            }
        }
    }
}
