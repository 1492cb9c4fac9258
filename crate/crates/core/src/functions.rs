//! Built-in test functions `phi` and sampled grid functions, with the
//! metadata the samplers and verdict logic need.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{mul_vec, norm2};
use crate::sampling::standard_normal_vec;

/// Widening applied to envelopes fitted from function metadata.
const ENVELOPE_WIDENING: f64 = 1.1;

/// A multilinearly interpolated function on a box, zero outside it.
/// `values` is row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GridFunction {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn validate(&self) -> Result<()> {
        let n = self.lower.len();
        if n == 0 || self.upper.len() != n || self.shape.len() != n {
            return Err(Error::InvalidInput(
                "grid lower/upper/shape must have equal nonzero length".into(),
            ));
        }
        if self.shape.iter().any(|&s| s < 2) {
            return Err(Error::InvalidInput("grid needs at least 2 nodes per axis".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidInput("grid needs lower < upper on every axis".into()));
        }
        let count: usize = self.shape.iter().product();
        if self.values.len() != count {
            return Err(Error::InvalidInput(format!(
                "grid has {} values, shape requires {count}",
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("grid values must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for d in 0..n {
            if !(x[d] >= self.lower[d] && x[d] <= self.upper[d]) {
                return 0.0;
            }
            let cells = (self.shape[d] - 1) as f64;
            let pos = (x[d] - self.lower[d]) / (self.upper[d] - self.lower[d]) * cells;
            let i = (pos.floor() as usize).min(self.shape[d] - 2);
            base[d] = i;
            frac[d] = pos - i as f64;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            let mut flat = 0;
            for d in 0..n {
                let bit = (corner >> d) & 1;
                weight *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
                flat = flat * self.shape[d] + base[d] + bit;
            }
            if weight != 0.0 {
                total += weight * self.values[flat];
            }
        }
        total
    }
}

fn unit_scale() -> f64 {
    1.0
}

/// Selectable test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "camelCase")]
pub enum TestFunction {
    /// `exp(-‖x - c‖^2 / scale^2)`
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// `exp(-‖x - c‖ / scale)`
    Exponential {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// Indicator of `{x : ‖P^{-1} x‖ <= 1}`; `P = I` when omitted.
    #[serde(rename_all = "camelCase")]
    BallIndicator {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shape_matrix: Option<Vec<Vec<f64>>>,
    },
    /// `prod_i x_i^{e_i}`
    CoordinatePolynomial { exponents: Vec<u32> },
    /// `‖x‖^a` on `‖x‖ <= cutoff`, zero outside.
    RadialPower { exponent: f64, cutoff: f64 },
    Zero,
    Grid(GridFunction),
}

impl TestFunction {
    pub fn label(&self) -> &'static str {
        match self {
            TestFunction::Gaussian { .. } => "gaussian",
            TestFunction::Exponential { .. } => "exponential",
            TestFunction::BallIndicator { .. } => "ballIndicator",
            TestFunction::CoordinatePolynomial { .. } => "coordinatePolynomial",
            TestFunction::RadialPower { .. } => "radialPower",
            TestFunction::Zero => "zero",
            TestFunction::Grid(_) => "grid",
        }
    }
}

/// Facts about `phi` used by the coefficient checks and samplers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FunctionInfo {
    pub value_at_zero: f64,
    pub nonnegative: bool,
    pub identically_zero: bool,
    pub continuous: bool,
    /// `phi(x) -> 0` as `‖x‖ -> infinity`.
    pub decays: bool,
}

/// Radial law of `‖x - c‖` for a rotationally symmetric envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialLaw {
    /// density `rate^n r^{n-1} e^{-rate r} / Gamma(n)`
    Gamma { rate: f64 },
    /// density proportional to `r^power` on `[0, cutoff]`, `power > -1`
    Power { power: f64, cutoff: f64 },
}

/// Importance-sampling proposal on `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    Gaussian { center: Vec<f64>, scale: f64 },
    Radial { center: Vec<f64>, law: RadialLaw },
    /// Uniform on `{P y : ‖y‖ <= 1}`.
    Ellipsoid { shape: DMatrix<f64>, inverse: DMatrix<f64> },
    /// Uniform on a box.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

/// `ln Gamma(k / 2)` for a positive integer `k`.
pub fn ln_gamma_half(k: u32) -> f64 {
    assert!(k > 0);
    let (mut acc, mut j) = if k.is_multiple_of(2) { (0.0, 2) } else { (0.5 * PI.ln(), 1) };
    // Gamma(j/2 + 1) = (j/2) Gamma(j/2)
    while j < k {
        acc += (j as f64 / 2.0).ln();
        j += 2;
    }
    acc
}

/// `ln` of the surface area of the unit sphere in `R^n`.
fn ln_sphere_area(n: usize) -> f64 {
    (2.0f64).ln() + 0.5 * n as f64 * PI.ln() - ln_gamma_half(n as u32)
}

fn ln_ball_volume(n: usize) -> f64 {
    0.5 * n as f64 * PI.ln() - ln_gamma_half(n as u32 + 2)
}

fn unit_direction<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let z = standard_normal_vec(rng, n);
        let r = norm2(&z);
        if r > 1e-300 {
            return z.iter().map(|x| x / r).collect();
        }
    }
}

impl Envelope {
    pub fn dim(&self) -> usize {
        match self {
            Envelope::Gaussian { center, .. } | Envelope::Radial { center, .. } => center.len(),
            Envelope::Ellipsoid { shape, .. } => shape.nrows(),
            Envelope::Box { lower, .. } => lower.len(),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.dim();
        match self {
            Envelope::Gaussian { center, scale } => standard_normal_vec(rng, n)
                .iter()
                .zip(center)
                .map(|(z, c)| c + scale * z)
                .collect(),
            Envelope::Radial { center, law } => {
                let dir = unit_direction(rng, n);
                let r = match *law {
                    RadialLaw::Gamma { rate } => Gamma::new(n as f64, 1.0 / rate)
                        .expect("gamma parameters are positive")
                        .sample(rng),
                    RadialLaw::Power { power, cutoff } => {
                        cutoff * rng.random::<f64>().powf(1.0 / (power + 1.0))
                    }
                };
                dir.iter().zip(center).map(|(d, c)| c + r * d).collect()
            }
            Envelope::Ellipsoid { shape, .. } => {
                let dir = unit_direction(rng, n);
                let r = rng.random::<f64>().powf(1.0 / n as f64);
                let y: Vec<f64> = dir.iter().map(|d| d * r).collect();
                mul_vec(shape, &y)
            }
            Envelope::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                .collect(),
        }
    }

    /// `ln q(x)`; `-inf` outside the support.
    pub fn ln_density(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        match self {
            Envelope::Gaussian { center, scale } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                -0.5 * n as f64 * (2.0 * PI * scale * scale).ln() - d2 / (2.0 * scale * scale)
            }
            Envelope::Radial { center, law } => {
                let r = x
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let nf = n as f64;
                let ln_radial = match *law {
                    RadialLaw::Gamma { rate } => {
                        nf * rate.ln() + (nf - 1.0) * r.ln() - rate * r
                            - ln_gamma_half(2 * n as u32)
                    }
                    RadialLaw::Power { power, cutoff } => {
                        if r > cutoff {
                            return f64::NEG_INFINITY;
                        }
                        (power + 1.0).ln() + power * r.ln() - (power + 1.0) * cutoff.ln()
                    }
                };
                ln_radial - ln_sphere_area(n) - (nf - 1.0) * r.ln()
            }
            Envelope::Ellipsoid { shape, inverse } => {
                let y = mul_vec(inverse, x);
                if norm2(&y) > 1.0 {
                    return f64::NEG_INFINITY;
                }
                -(shape.determinant().abs().ln() + ln_ball_volume(n))
            }
            Envelope::Box { lower, upper } => {
                if x.iter().zip(lower.iter().zip(upper)).any(|(v, (l, u))| v < l || v > u) {
                    return f64::NEG_INFINITY;
                }
                -lower.iter().zip(upper).map(|(l, u)| (u - l).ln()).sum::<f64>()
            }
        }
    }

    /// Rough `(location, scale)` per coordinate, for fitting other samplers.
    pub fn center(&self) -> Vec<f64> {
        match self {
            Envelope::Gaussian { center, .. } | Envelope::Radial { center, .. } => center.clone(),
            Envelope::Ellipsoid { shape, .. } => vec![0.0; shape.nrows()],
            Envelope::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect()
            }
        }
    }
}

/// A test function validated against a dimension.
#[derive(Debug, Clone)]
pub struct Phi {
    def: TestFunction,
    n: usize,
    center: Vec<f64>,
    shape: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

fn check_center(center: &Option<Vec<f64>>, n: usize) -> Result<Vec<f64>> {
    match center {
        None => Ok(vec![0.0; n]),
        Some(c) if c.len() == n && c.iter().all(|x| x.is_finite()) => Ok(c.clone()),
        Some(c) => Err(Error::InvalidInput(format!(
            "center has length {}, expected {n} finite entries",
            c.len()
        ))),
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("scale must be positive, got {scale}")))
    }
}

impl Phi {
    pub fn new(def: TestFunction, n: usize) -> Result<Self> {
        let mut center = vec![0.0; n];
        let mut shape = None;
        match &def {
            TestFunction::Gaussian { center: c, scale } | TestFunction::Exponential { center: c, scale } => {
                check_scale(*scale)?;
                center = check_center(c, n)?;
            }
            TestFunction::BallIndicator { shape_matrix } => {
                let p = match shape_matrix {
                    None => DMatrix::identity(n, n),
                    Some(rows) => {
                        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                            return Err(Error::InvalidInput(format!(
                                "shape matrix must be {n}x{n}"
                            )));
                        }
                        DMatrix::from_fn(n, n, |i, j| rows[i][j])
                    }
                };
                let inv = p.clone().try_inverse().ok_or_else(|| {
                    Error::InvalidInput("shape matrix must be invertible".into())
                })?;
                shape = Some((p, inv));
            }
            TestFunction::CoordinatePolynomial { exponents } => {
                if exponents.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "{} exponents given, expected {n}",
                        exponents.len()
                    )));
                }
            }
            TestFunction::RadialPower { exponent, cutoff } => {
                if !exponent.is_finite() || !(*cutoff > 0.0) || !cutoff.is_finite() {
                    return Err(Error::InvalidInput(
                        "radial power needs a finite exponent and positive cutoff".into(),
                    ));
                }
            }
            TestFunction::Zero => {}
            TestFunction::Grid(g) => {
                g.validate()?;
                if g.dim() != n {
                    return Err(Error::InvalidInput(format!(
                        "grid has dimension {}, expected {n}",
                        g.dim()
                    )));
                }
            }
        }
        Ok(Phi {
            def,
            n,
            center,
            shape,
        })
    }

    pub fn definition(&self) -> &TestFunction {
        &self.def
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let dist = || {
            x.iter()
                .zip(&self.center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        match &self.def {
            TestFunction::Gaussian { scale, .. } => (-dist() / (scale * scale)).exp(),
            TestFunction::Exponential { scale, .. } => (-dist().sqrt() / scale).exp(),
            TestFunction::BallIndicator { .. } => {
                let (_, inv) = self.shape.as_ref().unwrap();
                if norm2(&mul_vec(inv, x)) <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::CoordinatePolynomial { exponents } => x
                .iter()
                .zip(exponents)
                .map(|(v, &e)| v.powi(e as i32))
                .product(),
            TestFunction::RadialPower { exponent, cutoff } => {
                let r = norm2(x);
                if r <= *cutoff {
                    r.powf(*exponent)
                } else {
                    0.0
                }
            }
            TestFunction::Zero => 0.0,
            TestFunction::Grid(g) => g.eval(x),
        }
    }

    /// `phi(x)`, refusing non-finite values.
    pub fn eval_checked(&self, x: &[f64]) -> Result<f64> {
        let v = self.eval(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::EvaluationFailure { point: x.to_vec() })
        }
    }

    pub fn info(&self) -> FunctionInfo {
        let zero = vec![0.0; self.n];
        let value_at_zero = self.eval(&zero);
        let (nonnegative, identically_zero, continuous, decays) = match &self.def {
            TestFunction::Gaussian { .. } | TestFunction::Exponential { .. } => {
                (true, false, true, true)
            }
            TestFunction::BallIndicator { .. } => (true, false, false, true),
            TestFunction::CoordinatePolynomial { exponents } => (
                exponents.iter().all(|e| e % 2 == 0),
                false,
                true,
                false,
            ),
            TestFunction::RadialPower { .. } => (true, false, false, true),
            TestFunction::Zero => (true, true, true, true),
            TestFunction::Grid(g) => {
                let zero_everywhere = g.values.iter().all(|&v| v == 0.0);
                let boundary_zero = grid_boundary_zero(g);
                (
                    g.values.iter().all(|&v| v >= 0.0),
                    zero_everywhere,
                    boundary_zero,
                    true,
                )
            }
        };
        FunctionInfo {
            value_at_zero,
            nonnegative,
            identically_zero,
            continuous,
            decays,
        }
    }

    /// Refuses functions whose `p`-th power is not integrable on `R^n`.
    pub fn check_integrable(&self, p: f64) -> Result<()> {
        match &self.def {
            TestFunction::CoordinatePolynomial { .. } => {
                Err(Error::NotIntegrable(self.def.label().into()))
            }
            TestFunction::RadialPower { exponent, .. } if exponent * p <= -(self.n as f64) => {
                Err(Error::NotIntegrable(format!(
                    "radialPower with exponent {exponent} at p = {p}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Proposal for `|phi|^p`, fitted from the function's parameters.
    pub fn envelope(&self, p: f64) -> Result<Envelope> {
        self.check_integrable(p)?;
        let n = self.n;
        Ok(match &self.def {
            TestFunction::Gaussian { scale, .. } => Envelope::Gaussian {
                center: self.center.clone(),
                scale: ENVELOPE_WIDENING * scale / (2.0 * p).sqrt(),
            },
            TestFunction::Exponential { scale, .. } => Envelope::Radial {
                center: self.center.clone(),
                law: RadialLaw::Gamma {
                    rate: p / (ENVELOPE_WIDENING * scale),
                },
            },
            TestFunction::BallIndicator { .. } => {
                let (shape, inverse) = self.shape.clone().unwrap();
                Envelope::Ellipsoid { shape, inverse }
            }
            TestFunction::RadialPower { exponent, cutoff } => Envelope::Radial {
                center: vec![0.0; n],
                law: RadialLaw::Power {
                    power: n as f64 - 1.0 + exponent * p,
                    cutoff: *cutoff,
                },
            },
            TestFunction::Zero => Envelope::Gaussian {
                center: vec![0.0; n],
                scale: 1.0,
            },
            TestFunction::Grid(g) => Envelope::Box {
                lower: g.lower.clone(),
                upper: g.upper.clone(),
            },
            TestFunction::CoordinatePolynomial { .. } => unreachable!("rejected above"),
        })
    }
}

fn grid_boundary_zero(g: &GridFunction) -> bool {
    let n = g.dim();
    let mut idx = vec![0usize; n];
    for &v in &g.values {
        let on_boundary = idx.iter().zip(&g.shape).any(|(&i, &s)| i == 0 || i == s - 1);
        if on_boundary && v != 0.0 {
            return false;
        }
        for d in (0..n).rev() {
            idx[d] += 1;
            if idx[d] < g.shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::draw_rng;

    #[test]
    fn half_integer_gamma() {
        assert!((ln_gamma_half(1) - PI.sqrt().ln()).abs() < 1e-15);
        assert!((ln_gamma_half(2)).abs() < 1e-15);
        assert!((ln_gamma_half(10) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma_half(5) - (0.75 * PI.sqrt()).ln()).abs() < 1e-14);
    }

    #[test]
    fn builtins_evaluate() {
        let g = Phi::new(TestFunction::Gaussian { center: None, scale: 1.0 }, 2).unwrap();
        assert!((g.eval(&[1.0, 1.0]) - (-2f64).exp()).abs() < 1e-15);
        let b = Phi::new(TestFunction::BallIndicator { shape_matrix: None }, 2).unwrap();
        assert_eq!(b.eval(&[0.6, 0.8]), 1.0);
        assert_eq!(b.eval(&[0.6, 0.81]), 0.0);
        let c = Phi::new(TestFunction::CoordinatePolynomial { exponents: vec![2, 1] }, 2).unwrap();
        assert_eq!(c.eval(&[3.0, -2.0]), -18.0);
        assert!(matches!(c.envelope(1.0), Err(Error::NotIntegrable(_))));
        let r = Phi::new(TestFunction::RadialPower { exponent: -0.5, cutoff: 2.0 }, 2).unwrap();
        assert!((r.eval(&[0.0, 4.0 / 4.0]) - 1.0).abs() < 1e-15);
        assert_eq!(r.eval(&[3.0, 0.0]), 0.0);
    }

    #[test]
    fn grid_interpolates_bilinearly() {
        let g = GridFunction {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 2.0],
            shape: vec![2, 3],
            values: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        };
        g.validate().unwrap();
        // f(x, y) = 3x + y on the nodes
        assert!((g.eval(&[0.5, 0.5]) - 2.0).abs() < 1e-15);
        assert!((g.eval(&[1.0, 2.0]) - 5.0).abs() < 1e-15);
        assert_eq!(g.eval(&[1.5, 0.0]), 0.0);
    }

    fn mc_mass(env: &Envelope, f: impl Fn(&[f64]) -> f64, count: u64) -> f64 {
        let mut total = 0.0;
        for i in 0..count {
            let x = env.sample(&mut draw_rng(3, i));
            total += f(&x) / env.ln_density(&x).exp();
        }
        total / count as f64
    }

    #[test]
    fn envelope_densities_integrate_functions() {
        // integral of exp(-|x|) over R^2 is 2 pi
        let e = Phi::new(TestFunction::Exponential { center: None, scale: 1.0 }, 2).unwrap();
        let env = e.envelope(1.0).unwrap();
        let est = mc_mass(&env, |x| e.eval(x), 20_000);
        assert!((est - 2.0 * PI).abs() < 0.05 * 2.0 * PI, "{est}");
        // area of the ellipse with semi-axes 2 and 1
        let b = Phi::new(
            TestFunction::BallIndicator {
                shape_matrix: Some(vec![vec![2.0, 0.0], vec![0.0, 1.0]]),
            },
            2,
        )
        .unwrap();
        let env = b.envelope(1.0).unwrap();
        let est = mc_mass(&env, |x| b.eval(x), 1000);
        assert!((est - 2.0 * PI).abs() < 1e-9);
        // integral of |x|^{-1/2} over the disk of radius 2 is 2 pi * 2^{3/2} / (3/2)
        let r = Phi::new(TestFunction::RadialPower { exponent: -0.5, cutoff: 2.0 }, 2).unwrap();
        let env = r.envelope(1.0).unwrap();
        let est = mc_mass(&env, |x| r.eval(x), 1000);
        let exact = 2.0 * PI * 2f64.powf(1.5) / 1.5;
        assert!((est - exact).abs() < 1e-9 * exact);
    }
}
