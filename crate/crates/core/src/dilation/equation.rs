//! The equation `sum_k c_k phi(e^{t_k A} x) = 0` and coefficient conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::FunctionInfo;
use crate::matrix::{Complex64, SquareMatrix};
use crate::spectral::det_exp;

/// Minimum gap between distinct times.
pub const TIME_GAP: f64 = 1e-12;
/// Relative tolerance for the coefficient identities.
pub const COEFFICIENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DilationEquation {
    a: SquareMatrix,
    times: Vec<f64>,
    coefficients: Option<Vec<Complex64>>,
    p: f64,
}

impl DilationEquation {
    pub fn new(
        a: SquareMatrix,
        times: Vec<f64>,
        coefficients: Option<Vec<Complex64>>,
        p: f64,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidInput("at least one time is required".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("times must be finite".into()));
        }
        let mut sorted = times.clone();
        sorted.sort_by(f64::total_cmp);
        if let Some(w) = sorted.windows(2).find(|w| w[1] - w[0] <= TIME_GAP) {
            return Err(Error::InvalidInput(format!(
                "times {} and {} are not distinct",
                w[0], w[1]
            )));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidInput(format!("p must lie in [1, inf), got {p}")));
        }
        if let Some(c) = &coefficients {
            if c.len() != times.len() {
                return Err(Error::InvalidInput(format!(
                    "{} coefficients for {} times",
                    c.len(),
                    times.len()
                )));
            }
            if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidInput("coefficients must be finite".into()));
            }
        }
        Ok(DilationEquation {
            a,
            times,
            coefficients,
            p,
        })
    }

    pub fn a(&self) -> &SquareMatrix {
        &self.a
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn coefficients(&self) -> Option<&[Complex64]> {
        self.coefficients.as_deref()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn m(&self) -> usize {
        self.times.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefficientCondition {
    /// `sum c_k = 0`
    SumZero,
    /// `sum c_k |det e^{-t_k A}| = 0`
    DetWeightedSumZero,
    /// `|c_2 / c_1| = |det e^{(t_2 - t_1) A}|^{1/p}`
    TwoTermRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoefficientCheck {
    pub condition: CoefficientCondition,
    pub applicable: bool,
    /// `None` when the condition is skipped.
    pub satisfied: Option<bool>,
    pub residual: f64,
    pub tolerance: f64,
    pub note: String,
}

fn check(condition: CoefficientCondition, applicable: bool, residual: f64, scale: f64, note: &str) -> CoefficientCheck {
    let tolerance = COEFFICIENT_TOL * scale.max(1.0);
    CoefficientCheck {
        condition,
        applicable,
        satisfied: applicable.then_some(residual <= tolerance),
        residual,
        tolerance,
        note: note.into(),
    }
}

/// Necessary conditions on `c` for a nonzero solution with the given properties.
/// Inapplicable conditions keep their residual but report `satisfied = None`.
pub fn necessary_coefficient_checks(
    c: &[Complex64],
    eq: &DilationEquation,
    info: &FunctionInfo,
) -> Result<Vec<CoefficientCheck>> {
    if c.len() != eq.m() {
        return Err(Error::InvalidInput(format!(
            "{} coefficients for {} times",
            c.len(),
            eq.m()
        )));
    }
    let scale: f64 = c.iter().map(|z| z.norm()).sum();
    let sum: Complex64 = c.iter().sum();
    let weights: Vec<f64> = eq.times.iter().map(|&t| det_exp(&eq.a, -t).abs()).collect();
    let weighted: Complex64 = c.iter().zip(&weights).map(|(z, w)| z * *w).sum();
    let weighted_scale: f64 = c.iter().zip(&weights).map(|(z, w)| z.norm() * w).sum();
    let positive = info.nonnegative && !info.identically_zero;
    let mut out = vec![
        check(
            CoefficientCondition::SumZero,
            info.value_at_zero != 0.0,
            sum.norm(),
            scale,
            "needed when phi(0) != 0",
        ),
        check(
            CoefficientCondition::DetWeightedSumZero,
            positive && eq.p == 1.0,
            weighted.norm(),
            weighted_scale,
            "needed when phi >= 0, phi != 0 and p = 1",
        ),
    ];
    if eq.m() == 2 && c[0].norm() > 0.0 {
        let target = det_exp(&eq.a, eq.times[1] - eq.times[0]).abs().powf(1.0 / eq.p);
        let ratio = c[1].norm() / c[0].norm();
        out.push(check(
            CoefficientCondition::TwoTermRatio,
            true,
            (ratio - target).abs(),
            target,
            "needed for any nonzero solution with two terms",
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn info(value_at_zero: f64, nonnegative: bool) -> FunctionInfo {
        FunctionInfo {
            value_at_zero,
            nonnegative,
            identically_zero: false,
            continuous: true,
            decays: true,
        }
    }

    fn cs(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    #[test]
    fn rejects_repeated_times_and_bad_p() {
        let a = SquareMatrix::identity(1);
        assert!(DilationEquation::new(a.clone(), vec![0.0, 0.0], None, 1.0).is_err());
        assert!(DilationEquation::new(a.clone(), vec![0.0, 1.0], None, 0.5).is_err());
        assert!(DilationEquation::new(a.clone(), vec![0.0, 1.0], None, f64::INFINITY).is_err());
        assert!(DilationEquation::new(a, vec![0.0, 1.0], Some(cs(&[1.0])), 1.0).is_err());
    }

    #[test]
    fn traceless_two_term_conditions_hold() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let eq = DilationEquation::new(a, vec![0.0, 1.0], None, 1.0).unwrap();
        let checks = necessary_coefficient_checks(&cs(&[1.0, -1.0]), &eq, &info(1.0, true)).unwrap();
        assert_eq!(checks.len(), 3);
        assert!(checks.iter().all(|c| c.satisfied == Some(true)), "{checks:?}");
    }

    #[test]
    fn sum_violation_detected() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let eq = DilationEquation::new(a, vec![0.0, 1.0], None, 2.0).unwrap();
        let checks = necessary_coefficient_checks(&cs(&[1.0, 1.0]), &eq, &info(1.0, true)).unwrap();
        assert_eq!(checks[0].satisfied, Some(false));
        assert_eq!(checks[1].satisfied, None);
    }

    #[test]
    fn one_dimensional_weighted_sum() {
        let a = SquareMatrix::identity(1);
        let l2 = 2f64.ln();
        let eq = DilationEquation::new(a, vec![0.0, l2, 2.0 * l2], None, 1.0).unwrap();
        let checks = necessary_coefficient_checks(&cs(&[1.0, -1.0, -2.0]), &eq, &info(1.0, true)).unwrap();
        assert_eq!(checks[0].satisfied, Some(false));
        assert!((checks[0].residual - 2.0).abs() < 1e-15);
        assert_eq!(checks[1].satisfied, Some(true));
    }
}
