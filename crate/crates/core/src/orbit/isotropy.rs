//! Isotropy groups `G_v` and orbit types.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::spectral::expm::Flow;
use crate::spectral::rational::{
    lcm, rationally_related, RationalRelation, Relatedness, DEFAULT_MAX_DENOMINATOR,
    DEFAULT_RATIO_TOL,
};
use crate::spectral::structured::StructuredForm;

/// `‖e^{TA} - I‖` allowed for an accepted period.
pub const PERIOD_CLOSURE_TOL: f64 = 1e-8;
/// `‖e^{tA} - I‖` required strictly inside `(T/100, T - T/100)`.
pub const PERIOD_GAP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum IsotropyClass {
    Trivial,
    Lattice { period: f64 },
    FullLine,
}

impl IsotropyClass {
    pub fn orbit_class(&self) -> OrbitClass {
        match self {
            IsotropyClass::Trivial => OrbitClass::Line,
            IsotropyClass::Lattice { .. } => OrbitClass::Circle,
            IsotropyClass::FullLine => OrbitClass::Point,
        }
    }

    pub fn name(&self) -> String {
        match self {
            IsotropyClass::Trivial => "Trivial".into(),
            IsotropyClass::Lattice { period } => format!("Lattice({period})"),
            IsotropyClass::FullLine => "FullLine".into(),
        }
    }
}

/// Orbit type of a generic point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitClass {
    Point,
    Line,
    Circle,
}

/// Positive imaginary parts of the upper complex blocks, one per block.
pub fn rotation_speeds(form: &StructuredForm) -> Vec<f64> {
    form.upper_blocks().iter().map(|b| b.eigenvalue.im).collect()
}

/// Smallest `t > 0` with `t beta_j` in `2 pi Z` for all `j`.
pub fn fundamental_period(relation: &RationalRelation) -> f64 {
    let l = relation.ratios.iter().fold(1u64, |acc, r| lcm(acc, r.den));
    2.0 * PI / relation.generator.abs() * l as f64
}

fn is_pure_rotation(form: &StructuredForm) -> bool {
    !form.is_zero() && !form.has_nilpotent_part() && !form.has_nonzero_real_part()
}

/// Isotropy of generic points. `relation` is required only when the
/// spectrum is purely imaginary and the form is diagonalizable.
pub fn classify_isotropy(
    form: &StructuredForm,
    relation: Option<&RationalRelation>,
) -> Result<IsotropyClass> {
    if form.is_zero() {
        return Ok(IsotropyClass::FullLine);
    }
    if form.has_nilpotent_part() || form.has_nonzero_real_part() {
        return Ok(IsotropyClass::Trivial);
    }
    let relation = relation.ok_or(Error::NotRationallyRelated {
        worst_ratio: f64::NAN,
    })?;
    let speeds = rotation_speeds(form);
    let consistent = speeds.len() == relation.betas.len()
        && speeds.iter().zip(&relation.betas).all(|(s, b)| {
            (s.abs() - b.abs()).abs() <= 1e-9 * s.abs().max(1.0)
        });
    if !consistent {
        return Err(Error::InconsistentInputs(format!(
            "rational relation speeds {:?} do not match the spectrum {:?}",
            relation.betas, speeds
        )));
    }
    Ok(IsotropyClass::Lattice {
        period: fundamental_period(relation),
    })
}

/// Computes the rational relation with default bounds when one is needed,
/// then classifies.
pub fn isotropy_of(form: &StructuredForm) -> Result<(IsotropyClass, Option<RationalRelation>)> {
    if !is_pure_rotation(form) {
        return Ok((classify_isotropy(form, None)?, None));
    }
    match rationally_related(
        &rotation_speeds(form),
        DEFAULT_RATIO_TOL,
        DEFAULT_MAX_DENOMINATOR,
    )? {
        Relatedness::Related(r) => Ok((classify_isotropy(form, Some(&r))?, Some(r))),
        Relatedness::NotRelated { ratio, .. } => {
            Err(Error::NotRationallyRelated { worst_ratio: ratio })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PeriodCheck {
    pub period: f64,
    pub closure_residual: f64,
    /// Smallest `‖e^{tA} - I‖_F` over the interior grid.
    pub interior_min: f64,
    pub grid_points: usize,
    pub minimal: bool,
}

/// Checks `e^{TA} = I` and the absence of a shorter period on a grid
/// over `(T/100, T - T/100)`.
pub fn verify_period(a: &SquareMatrix, period: f64, grid_points: usize) -> Result<PeriodCheck> {
    let flow = Flow::new(a);
    let n = a.dim();
    let ident = nalgebra::DMatrix::<f64>::identity(n, n);
    let closure_residual = (flow.exp(period)? - &ident).norm();
    let lo = period / 100.0;
    let hi = period - period / 100.0;
    let residual = |t: f64| -> Result<f64> { Ok((flow.exp(t)? - &ident).norm()) };
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| {
            if grid_points == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (grid_points - 1) as f64
            }
        })
        .collect();
    let values = grid.iter().map(|&t| residual(t)).collect::<Result<Vec<f64>>>()?;
    let mut interior_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    // refine every grid-local minimum by golden-section search
    for i in 0..grid.len() {
        let left = if i > 0 { values[i - 1] } else { f64::INFINITY };
        let right = values.get(i + 1).copied().unwrap_or(f64::INFINITY);
        if values[i] > left || values[i] > right {
            continue;
        }
        let (mut a, mut b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if residual(c)? < residual(d)? {
                b = d;
            } else {
                a = c;
            }
        }
        interior_min = interior_min.min(residual(0.5 * (a + b))?);
    }
    Ok(PeriodCheck {
        period,
        closure_residual,
        interior_min,
        grid_points,
        minimal: closure_residual <= PERIOD_CLOSURE_TOL && interior_min > PERIOD_GAP,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::rational::Ratio;
    use crate::spectral::structured::complexify;
    use crate::spectral::DEFAULT_CLUSTER_TOL;

    fn form_of(rows: &[Vec<f64>]) -> StructuredForm {
        complexify(&SquareMatrix::from_rows(rows).unwrap(), DEFAULT_CLUSTER_TOL)
            .unwrap()
            .1
    }

    fn relation(generator: f64, ratios: &[(i64, u64)]) -> RationalRelation {
        RationalRelation {
            generator,
            betas: ratios
                .iter()
                .map(|&(p, q)| generator * p as f64 / q as f64)
                .collect(),
            ratios: ratios.iter().map(|&(num, den)| Ratio { num, den }).collect(),
            max_denominator: DEFAULT_MAX_DENOMINATOR,
            tolerance: DEFAULT_RATIO_TOL,
        }
    }

    #[test]
    fn periods_from_relations() {
        assert!((fundamental_period(&relation(1.0, &[(1, 1)])) - 2.0 * PI).abs() < 1e-15);
        assert!((fundamental_period(&relation(2.0, &[(1, 1), (3, 2)])) - 2.0 * PI).abs() < 1e-15);
        assert!((fundamental_period(&relation(0.5, &[(1, 1)])) - 4.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_is_full_line() {
        let f = form_of(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let (iso, _) = isotropy_of(&f).unwrap();
        assert_eq!(iso, IsotropyClass::FullLine);
        assert_eq!(iso.orbit_class(), OrbitClass::Point);
    }

    #[test]
    fn rotation_is_lattice() {
        let f = form_of(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let (iso, rel) = isotropy_of(&f).unwrap();
        assert!(rel.is_some());
        match iso {
            IsotropyClass::Lattice { period } => {
                assert!((period - 2.0 * PI).abs() < 1e-12);
                let check = verify_period(f.generator(), period, 100).unwrap();
                assert!(check.minimal, "{check:?}");
            }
            other => panic!("expected lattice, got {other:?}"),
        }
    }

    #[test]
    fn expanding_and_sheared_are_trivial() {
        let f = form_of(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert_eq!(classify_isotropy(&f, None).unwrap(), IsotropyClass::Trivial);
        let g = form_of(&[vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(classify_isotropy(&g, None).unwrap(), IsotropyClass::Trivial);
    }

    #[test]
    fn rotation_without_relation_is_refused() {
        let f = form_of(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert!(matches!(
            classify_isotropy(&f, None),
            Err(Error::NotRationallyRelated { .. })
        ));
    }

    #[test]
    fn irrational_speeds_are_refused() {
        let s = 2f64.sqrt();
        let f = form_of(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, s],
            vec![0.0, 0.0, -s, 0.0],
        ]);
        assert!(matches!(isotropy_of(&f), Err(Error::NotRationallyRelated { .. })));
    }

    #[test]
    fn half_period_is_not_minimal() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let check = verify_period(&a, 4.0 * PI, 100).unwrap();
        assert!(!check.minimal);
    }
}
