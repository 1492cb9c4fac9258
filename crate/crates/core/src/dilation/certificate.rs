//! Linear-independence certificates: a nonsingular sample matrix
//! `X_ij = phi(e^{t_i A} u_j)` proves the translates are independent.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dilation::equation::DilationEquation;
use crate::error::{Error, Result};
use crate::functions::Phi;
use crate::matrix::mul_vec;
use crate::sampling::{draw_rng, standard_normal_vec, substream};
use crate::spectral::expm::Flow;

pub const DEFAULT_TUPLES: usize = 200;
pub const SIGMA_MIN_RATIO: f64 = 1e-8;
pub const MAX_CONDITION: f64 = 1e8;
pub const POINT_SCALE: f64 = 2.0;
const CERTIFICATE_STREAM: u64 = 31;
const BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndependenceCertificate {
    pub sample_points: Vec<Vec<f64>>,
    /// Rows indexed by time, columns by sample point.
    pub x: Vec<Vec<f64>>,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
    pub condition_number: f64,
    /// Zero-based index of the accepted tuple.
    pub draw_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all_fields = "camelCase")]
pub enum CertificateOutcome {
    Certified(IndependenceCertificate),
    Inconclusive {
        attempts: usize,
        best_smallest_singular_value: f64,
        best_ratio: f64,
    },
}

impl CertificateOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, CertificateOutcome::Certified(_))
    }
}

struct Candidate {
    points: Vec<Vec<f64>>,
    x: DMatrix<f64>,
    sigma_min: f64,
    sigma_max: f64,
}

impl Candidate {
    fn accepted(&self) -> bool {
        self.sigma_min > SIGMA_MIN_RATIO * self.sigma_max && self.sigma_max < MAX_CONDITION * self.sigma_min
    }

    fn ratio(&self) -> f64 {
        if self.sigma_max > 0.0 {
            self.sigma_min / self.sigma_max
        } else {
            0.0
        }
    }
}

fn candidate(phi: &Phi, exps: &[DMatrix<f64>], stream: u64, index: usize) -> Result<Candidate> {
    let m = exps.len();
    let n = phi.dim();
    let mut rng = draw_rng(stream, index as u64);
    let points: Vec<Vec<f64>> = (0..m)
        .map(|_| standard_normal_vec(&mut rng, n).into_iter().map(|x| POINT_SCALE * x).collect())
        .collect();
    let mut x = DMatrix::zeros(m, m);
    for (i, e) in exps.iter().enumerate() {
        for (j, u) in points.iter().enumerate() {
            x[(i, j)] = phi.eval_checked(&mul_vec(e, u))?;
        }
    }
    let sv = x.clone().singular_values();
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let sigma_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Candidate {
        points,
        x,
        sigma_min,
        sigma_max,
    })
}

/// Searches up to `budget` tuples; the first accepted tuple by draw index wins.
pub fn certify_independence(
    phi: &Phi,
    eq: &DilationEquation,
    budget: usize,
    seed: u64,
) -> Result<CertificateOutcome> {
    if phi.dim() != eq.a().dim() {
        return Err(Error::InconsistentInputs(format!(
            "function dimension {} differs from matrix dimension {}",
            phi.dim(),
            eq.a().dim()
        )));
    }
    let flow = Flow::new(eq.a());
    let exps = eq.times().iter().map(|&t| flow.exp(t)).collect::<Result<Vec<_>>>()?;
    let stream = substream(seed, CERTIFICATE_STREAM);
    let mut best = (0.0f64, 0.0f64);
    let mut start = 0;
    while start < budget {
        let end = (start + BATCH).min(budget);
        let batch: Vec<Candidate> = (start..end)
            .into_par_iter()
            .map(|i| candidate(phi, &exps, stream, i))
            .collect::<Result<_>>()?;
        for (k, c) in batch.into_iter().enumerate() {
            if c.accepted() {
                return Ok(CertificateOutcome::Certified(IndependenceCertificate {
                    sample_points: c.points,
                    x: c.x.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    smallest_singular_value: c.sigma_min,
                    largest_singular_value: c.sigma_max,
                    condition_number: c.sigma_max / c.sigma_min,
                    draw_index: start + k,
                }));
            }
            if c.ratio() > best.1 || (best.1 == 0.0 && c.sigma_min > best.0) {
                best = (c.sigma_min, c.ratio());
            }
        }
        start = end;
    }
    Ok(CertificateOutcome::Inconclusive {
        attempts: budget,
        best_smallest_singular_value: best.0,
        best_ratio: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::TestFunction;
    use crate::matrix::SquareMatrix;

    #[test]
    fn gaussian_translates_are_certified() {
        let l2 = 2f64.ln();
        let eq = DilationEquation::new(SquareMatrix::diagonal(&[1.0, -1.0]), vec![0.0, l2, 2.0 * l2], None, 2.0).unwrap();
        let phi = Phi::new(TestFunction::Gaussian { center: None, scale: 1.0 }, 2).unwrap();
        match certify_independence(&phi, &eq, DEFAULT_TUPLES, 1).unwrap() {
            CertificateOutcome::Certified(c) => {
                assert!(c.smallest_singular_value > 1e-6, "{c:?}");
                // independent oracle: the determinant of the stored matrix is nonzero
                let x = DMatrix::from_fn(3, 3, |i, j| c.x[i][j]);
                assert!(x.determinant().abs() > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_function_is_inconclusive() {
        let eq = DilationEquation::new(SquareMatrix::diagonal(&[1.0, -1.0]), vec![0.0, 1.0], None, 1.0).unwrap();
        let phi = Phi::new(TestFunction::Zero, 2).unwrap();
        let out = certify_independence(&phi, &eq, 50, 1).unwrap();
        assert_eq!(
            out,
            CertificateOutcome::Inconclusive { attempts: 50, best_smallest_singular_value: 0.0, best_ratio: 0.0 }
        );
    }

    #[test]
    fn rotated_disk_is_never_certified() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let eq = DilationEquation::new(a, vec![0.0, 1.0], None, 1.0).unwrap();
        let phi = Phi::new(TestFunction::BallIndicator { shape_matrix: None }, 2).unwrap();
        assert!(!certify_independence(&phi, &eq, 2000, 9).unwrap().is_certified());
    }
}
