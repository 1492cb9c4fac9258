//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (degrees 3, 5, 7, 9, 13 selected by the 1-norm of the scaled argument).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{mul_vec, SquareMatrix};
use crate::spectral::eigen::max_abs_real_part;

/// Exponent bound above which `e^{tA}` is refused.
pub const OVERFLOW_EXPONENT: f64 = 700.0;

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
];
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Raw exponential of a real matrix, no overflow guard.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = one_norm(a);
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    for (m, theta) in THETA {
        if norm <= theta {
            return pade_low(a, m);
        }
    }
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s);
    let mut r = pade13(&scaled);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn solve_pade(u: DMatrix<f64>, v: DMatrix<f64>) -> DMatrix<f64> {
    let p = &v + &u;
    let q = &v - &u;
    q.lu().solve(&p).expect("Padé denominator is nonsingular for scaled arguments")
}

fn pade_low(a: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let b: &[f64] = match m {
        3 => &B3,
        5 => &B5,
        7 => &B7,
        _ => &B9,
    };
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    // even powers I, A^2, A^4, ...
    let mut powers = vec![ident.clone(), a2.clone()];
    while powers.len() <= m / 2 {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u_inner = DMatrix::<f64>::zeros(n, n);
    let mut v = DMatrix::<f64>::zeros(n, n);
    for k in 0..=m / 2 {
        u_inner += &powers[k] * b[2 * k + 1];
        v += &powers[k] * b[2 * k];
    }
    solve_pade(a * u_inner, v)
}

fn pade13(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let b = &B13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let w1 = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let w2 = &a6 * &w1 + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let u = a * w2;
    let z1 = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * &z1 + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    solve_pade(u, v)
}

/// A generator with its spectral abscissa magnitude cached, for repeated
/// evaluation of `e^{tA}` at many `t`.
#[derive(Debug, Clone)]
pub struct Flow {
    generator: SquareMatrix,
    growth: f64,
}

impl Flow {
    pub fn new(a: &SquareMatrix) -> Self {
        // Fall back to the Frobenius norm (an upper bound) if Schur fails.
        let growth = max_abs_real_part(a).unwrap_or_else(|_| a.norm());
        Flow {
            generator: a.clone(),
            growth,
        }
    }

    pub fn generator(&self) -> &SquareMatrix {
        &self.generator
    }

    /// `max |Re(lambda)|` over the spectrum.
    pub fn growth_rate(&self) -> f64 {
        self.growth
    }

    pub fn check(&self, t: f64) -> Result<()> {
        let exponent = t.abs() * self.growth;
        if exponent > OVERFLOW_EXPONENT || !t.is_finite() {
            return Err(Error::OverflowRisk { exponent });
        }
        Ok(())
    }

    pub fn exp(&self, t: f64) -> Result<DMatrix<f64>> {
        self.check(t)?;
        Ok(expm(&(self.generator.as_matrix() * t)))
    }

    pub fn apply(&self, t: f64, v: &[f64]) -> Result<Vec<f64>> {
        Ok(mul_vec(&self.exp(t)?, v))
    }

    pub fn evaluate(&self, t: f64, v: &[f64]) -> Result<FlowEvaluation> {
        Ok(FlowEvaluation {
            t,
            input: v.to_vec(),
            output: self.apply(t, v)?,
        })
    }
}

/// `ξ(t, v) = e^{tA} v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FlowEvaluation {
    pub t: f64,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

/// `e^{tA}`, refusing when `t * max|Re(lambda)| > 700`.
pub fn matrix_exp(a: &SquareMatrix, t: f64) -> Result<SquareMatrix> {
    Ok(SquareMatrix::new(Flow::new(a).exp(t)?).expect("exponential of a finite matrix is finite"))
}

pub fn flow(a: &SquareMatrix, t: f64, v: &[f64]) -> Result<FlowEvaluation> {
    if v.len() != a.dim() {
        return Err(Error::InvalidInput(format!(
            "vector has length {}, expected {}",
            v.len(),
            a.dim()
        )));
    }
    Flow::new(a).evaluate(t, v)
}

/// `det e^{tA} = exp(t trace A)`.
pub fn det_exp(a: &SquareMatrix, t: f64) -> f64 {
    (t * a.trace()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn coupled_a() -> SquareMatrix {
        SquareMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, -1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let e = matrix_exp(&coupled_a(), 0.0).unwrap();
        assert_eq!(e, SquareMatrix::identity(4));
    }

    #[test]
    fn diagonal_scalar_exponentials() {
        let a = SquareMatrix::diagonal(&[1.0, -1.0]);
        let e = matrix_exp(&a, 2f64.ln()).unwrap();
        assert_relative_eq!(e.as_matrix()[(0, 0)], 2.0, epsilon = 1e-14);
        assert_relative_eq!(e.as_matrix()[(1, 1)], 0.5, epsilon = 1e-14);
        assert_eq!(e.as_matrix()[(0, 1)], 0.0);
    }

    #[test]
    fn coupled_flow_closed_form_at_pi_over_three() {
        let t = std::f64::consts::FRAC_PI_3;
        let out = flow(&coupled_a(), t, &[1.0, 0.0, 0.0, 0.0]).unwrap().output;
        // (cos t, -sin t, t cos t, -t sin t)
        let expected = [t.cos(), -t.sin(), t * t.cos(), -t * t.sin()];
        for (o, e) in out.iter().zip(expected) {
            assert_relative_eq!(*o, e, epsilon = 1e-13);
        }
        assert_relative_eq!(out[2], 0.523_598_775_598_298_8, epsilon = 1e-12);
        assert_relative_eq!(out[3], -0.906_899_682_117_108_9, epsilon = 1e-12);
    }

    #[test]
    fn inverse_product_is_identity_for_large_norm() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 7.0], vec![-7.0, 0.5]]).unwrap();
        let e = matrix_exp(&a, 3.0).unwrap();
        let f = matrix_exp(&a, -3.0).unwrap();
        let prod = e.as_matrix() * f.as_matrix();
        assert!((prod - DMatrix::identity(2, 2)).norm() < 1e-9);
    }

    #[test]
    fn refuses_overflow() {
        let a = SquareMatrix::diagonal(&[2.0, 0.0]);
        assert!(matches!(
            matrix_exp(&a, 400.0),
            Err(Error::OverflowRisk { .. })
        ));
        assert!(matrix_exp(&a, 300.0).is_ok());
    }

    #[test]
    fn det_exp_matches_trace() {
        assert_eq!(det_exp(&coupled_a(), 1.234), 1.0);
        let a = SquareMatrix::diagonal(&[1.0, 2.0]);
        assert_relative_eq!(det_exp(&a, 1.0), 20.085_536_923_187_668, epsilon = 1e-12);
    }
}
