//! Lattice-regime witness: the indicator of a flow-invariant ellipsoid solves
//! `phi(x) - phi(e^{A} x) = 0`.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{Phi, TestFunction};
use crate::matrix::{mul_vec, norm2, spectral_norm, Complex64};
use crate::orbit::IsotropyClass;
use crate::sampling::{draw_rng, substream};
use crate::spectral::expm::Flow;
use crate::spectral::structured::{Half, StructuredForm};

/// Relative drift of `‖P^{-1} x‖` along the flow tolerated for an adapted norm.
pub const ADAPTED_NORM_TOL: f64 = 1e-9;
pub const WITNESS_TIME: f64 = 1.0;
const WITNESS_STREAM: u64 = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Witness {
    /// Rows of `P`; the witness is the indicator of `{‖P^{-1} v‖ <= 1}`.
    pub shape_matrix: Vec<Vec<f64>>,
    pub coefficients: [f64; 2],
    pub times: [f64; 2],
    pub period: f64,
    pub samples: usize,
    pub seed: u64,
    /// `max |phi(v) - phi(e^{t* A} v)|` over the samples.
    pub max_residual: f64,
    /// `max |‖P^{-1} e^{t* A} v‖ - ‖P^{-1} v‖| / ‖P^{-1} v‖`.
    pub max_norm_drift: f64,
    /// Same residual for the Euclidean unit ball.
    pub euclidean_max_residual: f64,
    pub euclidean_violations: usize,
}

impl Witness {
    pub fn function(&self) -> TestFunction {
        TestFunction::BallIndicator {
            shape_matrix: Some(self.shape_matrix.clone()),
        }
    }
}

/// Columns `(Re s, Im s)` for each upper eigenvector `s`, with the phase fixed
/// so that the last significant entry of `s` is `i`; real blocks keep their
/// basis columns.
pub fn adapted_shape(form: &StructuredForm) -> DMatrix<f64> {
    let n = form.dim();
    let s = form.similarity();
    let basis = form.basis();
    let mut p = DMatrix::zeros(n, n);
    let mut col = 0;
    for slot in form.blocks() {
        match slot.half {
            Half::Real => {
                for j in slot.offset..slot.offset + slot.block.size {
                    p.set_column(col, &basis.column(j));
                    col += 1;
                }
            }
            Half::Upper => {
                for j in slot.offset..slot.offset + slot.block.size {
                    let v: Vec<Complex64> = s.column(j).iter().copied().collect();
                    let big = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
                    let anchor = v.iter().rev().find(|z| z.norm() > 1e-8 * big).copied().unwrap_or(Complex64::new(1.0, 0.0));
                    let phase = Complex64::new(0.0, 1.0) / anchor;
                    for (i, z) in v.iter().enumerate() {
                        let w = z * phase;
                        p[(i, col)] = w.re;
                        p[(i, col + 1)] = w.im;
                    }
                    col += 2;
                }
            }
            Half::Conjugate => {}
        }
    }
    p
}

fn is_inside(inv: &DMatrix<f64>, x: &[f64]) -> (bool, f64) {
    let r = norm2(&mul_vec(inv, x));
    (r <= 1.0, r)
}

/// Builds the adapted-ellipsoid witness and checks it on `sample_count`
/// points drawn uniformly from a box covering both the ellipsoid and the unit ball.
pub fn build_witness(
    form: &StructuredForm,
    isotropy: &IsotropyClass,
    sample_count: usize,
    seed: u64,
) -> Result<Witness> {
    let period = match isotropy {
        IsotropyClass::Lattice { period } => *period,
        other => {
            return Err(Error::NotLattice {
                isotropy: other.name(),
            })
        }
    };
    if form.has_nilpotent_part() || form.has_nonzero_real_part() || form.is_zero() {
        return Err(Error::InconsistentInputs(
            "lattice isotropy requires a nonzero diagonalizable imaginary spectrum".into(),
        ));
    }
    let n = form.dim();
    let p = adapted_shape(form);
    let inv = p.clone().try_inverse().ok_or(Error::AdaptedNormFailure {
        residual: f64::INFINITY,
    })?;
    let phi = Phi::new(
        TestFunction::BallIndicator {
            shape_matrix: Some(to_rows(&p)),
        },
        n,
    )?;
    let flow = Flow::new(form.generator());
    let e = flow.exp(WITNESS_TIME)?;
    let half_width = 1.5 * spectral_norm(&p).max(1.0);
    let stream = substream(seed, WITNESS_STREAM);

    let per_sample: Vec<(f64, f64, bool)> = (0..sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = draw_rng(stream, i);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-half_width..half_width)).collect();
            let moved = mul_vec(&e, &v);
            let residual = (phi.eval(&v) - phi.eval(&moved)).abs();
            let (_, r0) = is_inside(&inv, &v);
            let (_, r1) = is_inside(&inv, &moved);
            let drift = (r1 - r0).abs() / r0.max(f64::MIN_POSITIVE);
            let euclid = (norm2(&v) <= 1.0) != (norm2(&moved) <= 1.0);
            (residual, drift, euclid)
        })
        .collect();

    let max_residual = per_sample.iter().map(|s| s.0).fold(0.0, f64::max);
    let max_norm_drift = per_sample.iter().map(|s| s.1).fold(0.0, f64::max);
    let euclidean_violations = per_sample.iter().filter(|s| s.2).count();
    if max_norm_drift > ADAPTED_NORM_TOL || max_residual != 0.0 {
        return Err(Error::AdaptedNormFailure {
            residual: max_norm_drift.max(max_residual),
        });
    }
    Ok(Witness {
        shape_matrix: to_rows(&p),
        coefficients: [1.0, -1.0],
        times: [0.0, WITNESS_TIME],
        period,
        samples: sample_count,
        seed,
        max_residual,
        max_norm_drift,
        euclidean_max_residual: if euclidean_violations > 0 { 1.0 } else { 0.0 },
        euclidean_violations,
    })
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SquareMatrix;
    use crate::orbit::isotropy_of;
    use crate::spectral::structured::complexify;
    use crate::spectral::DEFAULT_CLUSTER_TOL;

    fn witness(rows: &[Vec<f64>]) -> Witness {
        let a = SquareMatrix::from_rows(rows).unwrap();
        let (_, form) = complexify(&a, DEFAULT_CLUSTER_TOL).unwrap();
        let (iso, _) = isotropy_of(&form).unwrap();
        build_witness(&form, &iso, 2000, 4).unwrap()
    }

    fn close(p: &[Vec<f64>], q: &[[f64; 2]]) -> bool {
        p.iter().zip(q).all(|(r, s)| r.iter().zip(s).all(|(a, b)| (a - b).abs() < 1e-9))
    }

    #[test]
    fn rotation_uses_the_unit_disk() {
        let w = witness(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert!(close(&w.shape_matrix, &[[1.0, 0.0], [0.0, 1.0]]), "{:?}", w.shape_matrix);
        assert_eq!(w.max_residual, 0.0);
        assert_eq!(w.euclidean_violations, 0);
    }

    #[test]
    fn sheared_rotation_needs_the_adapted_ellipsoid() {
        // S rot S^{-1} with S = [[1, 1], [0, 1]]
        let w = witness(&[vec![-1.0, 2.0], vec![-1.0, 1.0]]);
        assert!(close(&w.shape_matrix, &[[1.0, 1.0], [0.0, 1.0]]), "{:?}", w.shape_matrix);
        assert_eq!(w.max_residual, 0.0);
        assert!(w.euclidean_violations > 0);
    }

    #[test]
    fn trivial_isotropy_is_refused() {
        let a = SquareMatrix::diagonal(&[1.0, -1.0]);
        let (_, form) = complexify(&a, DEFAULT_CLUSTER_TOL).unwrap();
        assert!(matches!(
            build_witness(&form, &IsotropyClass::Trivial, 10, 0),
            Err(Error::NotLattice { .. })
        ));
    }
}
