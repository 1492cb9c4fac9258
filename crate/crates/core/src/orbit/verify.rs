//! Sampled checks of the cross-section properties.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dist2, norm2, SquareMatrix};
use crate::orbit::section::{CrossSection, SectionCase};
use crate::sampling::{draw_rng, standard_normal_vec};

/// Tolerance for orbit constancy, equivariance and idempotence (relative).
pub const PROPERTY_TOL: f64 = 1e-8;
/// Range of the shift `s` applied to each sample.
pub const SHIFT_RANGE: f64 = 3.0;
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport {
    pub samples: usize,
    pub seed: u64,
    /// Draws discarded because they fell within the margin of the excluded set.
    pub redraws: usize,
    /// `max |F(sigma(v))| / kappa^d` with `kappa = 1 + ‖e^{t_v A}‖ ‖v‖` and `d` the degree of `F`.
    pub max_section_residual: f64,
    /// `max ‖sigma(e^{sA} v) - sigma(v)‖ / (1 + ‖sigma(v)‖)`.
    pub max_orbit_constancy: f64,
    /// `max |t_{e^{sA} v} - (t_v - s)| / (1 + |t_v|)`.
    pub max_time_equivariance: f64,
    /// `max ‖sigma(sigma(v)) - sigma(v)‖ / (1 + ‖sigma(v)‖)`.
    pub max_idempotence: f64,
    pub omega_invariance_failures: usize,
    pub section_tolerance: f64,
    pub property_tolerance: f64,
}

struct Outcome {
    v: Vec<f64>,
    s: f64,
    redraws: usize,
    section: f64,
    constancy: f64,
    equivariance: f64,
    idempotence: f64,
    omega_flip: bool,
}

fn sample(cs: &CrossSection, seed: u64, index: u64) -> Result<Outcome> {
    let mut rng = draw_rng(seed, index);
    let n = cs.dim();
    let mut redraws = 0;
    let v = loop {
        let v = standard_normal_vec(&mut rng, n);
        if cs.omega().contains(&v) {
            break v;
        }
        redraws += 1;
        if redraws >= MAX_REDRAWS {
            return Err(Error::OutsideOmega {
                condition: format!("{} draws fell outside {}", MAX_REDRAWS, cs.omega().description),
            });
        }
    };
    let s = rng.random_range(-SHIFT_RANGE..=SHIFT_RANGE);
    let (t, sigma) = cs.section(&v)?;
    let degree = match cs.case() {
        SectionCase::ImaginaryNonDiagonalizable => 2,
        _ => 1,
    };
    let kappa = 1.0 + cs.flow().exp(t)?.norm() * norm2(&v);
    let moved = cs.flow().apply(s, &v)?;
    let omega_flip = cs.omega().contains(&moved) != cs.omega().contains(&v);
    let (t_moved, sigma_moved) = cs.section(&moved)?;
    let (_, sigma_twice) = cs.section(&sigma)?;
    let scale = 1.0 + norm2(&sigma);
    Ok(Outcome {
        section: cs.f_value(&sigma).abs() / kappa.powi(degree),
        constancy: dist2(&sigma_moved, &sigma) / scale,
        equivariance: (t_moved - (t - s)).abs() / (1.0 + t.abs()),
        idempotence: dist2(&sigma_twice, &sigma) / scale,
        omega_flip,
        v,
        s,
        redraws,
    })
}

/// Draws `v ~ N(0, I)` restricted to Omega and `s` uniform in `[-3, 3]`,
/// one deterministic stream per sample index.
pub fn verify_cross_section(
    cs: &CrossSection,
    a: &SquareMatrix,
    sample_count: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if sample_count == 0 {
        return Err(Error::InvalidInput("sample count must be >= 1".into()));
    }
    if (a.as_matrix() - cs.form().generator().as_matrix()).norm() > 1e-12 * a.norm().max(1.0) {
        return Err(Error::InconsistentInputs(
            "cross-section was built for a different matrix".into(),
        ));
    }
    let outcomes: Vec<Outcome> = (0..sample_count as u64)
        .into_par_iter()
        .map(|i| sample(cs, seed, i))
        .collect::<Result<_>>()?;

    let mut report = VerificationReport {
        samples: sample_count,
        seed,
        redraws: 0,
        max_section_residual: 0.0,
        max_orbit_constancy: 0.0,
        max_time_equivariance: 0.0,
        max_idempotence: 0.0,
        omega_invariance_failures: 0,
        section_tolerance: 1e-9,
        property_tolerance: PROPERTY_TOL,
    };
    for o in &outcomes {
        report.redraws += o.redraws;
        report.max_section_residual = report.max_section_residual.max(o.section);
        report.max_orbit_constancy = report.max_orbit_constancy.max(o.constancy);
        report.max_time_equivariance = report.max_time_equivariance.max(o.equivariance);
        report.max_idempotence = report.max_idempotence.max(o.idempotence);
        report.omega_invariance_failures += o.omega_flip as usize;
    }
    for o in &outcomes {
        let checks = [
            ("F(sigma(v)) = 0", o.section, report.section_tolerance),
            ("sigma(e^{sA}v) = sigma(v)", o.constancy, PROPERTY_TOL),
            ("t_{e^{sA}v} = t_v - s", o.equivariance, PROPERTY_TOL),
            ("sigma(sigma(v)) = sigma(v)", o.idempotence, PROPERTY_TOL),
        ];
        for (property, residual, tol) in checks {
            if !(residual <= tol) {
                return Err(Error::PropertyViolation {
                    property: property.into(),
                    point: o.v.clone(),
                    time: o.s,
                    residual,
                });
            }
        }
        if o.omega_flip {
            return Err(Error::PropertyViolation {
                property: "Omega is invariant under the flow".into(),
                point: o.v.clone(),
                time: o.s,
                residual: f64::NAN,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::isotropy::isotropy_of;
    use crate::orbit::section::build_cross_section;
    use crate::spectral::structured::complexify;
    use crate::spectral::DEFAULT_CLUSTER_TOL;

    fn check(rows: &[Vec<f64>]) -> VerificationReport {
        let a = SquareMatrix::from_rows(rows).unwrap();
        let (_, form) = complexify(&a, DEFAULT_CLUSTER_TOL).unwrap();
        let (iso, _) = isotropy_of(&form).unwrap();
        let cs = build_cross_section(&form, &iso).unwrap();
        verify_cross_section(&cs, &a, 300, 7).unwrap()
    }

    #[test]
    fn canonical_cases_pass() {
        check(&[vec![0.0, 0.0], vec![1.0, 0.0]]);
        check(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        let r = check(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, -1.0, 0.0],
        ]);
        assert_eq!(r.samples, 300);
    }

    #[test]
    fn report_is_deterministic() {
        let rows = [vec![0.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(check(&rows), check(&rows));
    }
}
