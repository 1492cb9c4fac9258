//! Rational-relatedness of rotation speeds via continued-fraction convergents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DENOMINATOR: u64 = 1_000_000;
pub const DEFAULT_RATIO_TOL: f64 = 1e-12;

/// A reduced fraction `num / den` with `den >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Ratio {
    pub num: i64,
    pub den: u64,
}

impl Ratio {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// `beta_j = (num_j / den_j) * generator` for every input speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RationalRelation {
    pub generator: f64,
    pub betas: Vec<f64>,
    pub ratios: Vec<Ratio>,
    pub max_denominator: u64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Relatedness {
    Related(RationalRelation),
    NotRelated {
        /// Index into the input of the first ratio with no admissible convergent.
        index: usize,
        ratio: f64,
        /// Closest convergent with denominator within bound, and its error.
        best: Ratio,
        best_error: f64,
    },
}

/// Continued-fraction convergents of `x`, computed exactly on the binary
/// value of `x`, until the denominator would exceed `max_den`.
pub fn convergents(x: f64, max_den: u64) -> Vec<Ratio> {
    let mut out = Vec::new();
    if !x.is_finite() {
        return out;
    }
    // x = num / den exactly
    let Some((mut num, mut den)) = exact_fraction(x) else {
        return float_convergents(x, max_den);
    };
    let (mut p0, mut q0, mut p1, mut q1): (i128, i128, i128, i128) = (0, 1, 1, 0);
    while den != 0 {
        let a = num.div_euclid(den);
        let r = num.rem_euclid(den);
        let p2 = a * p1 + p0;
        let q2 = a * q1 + q0;
        if q2 > max_den as i128 || p2.abs() > i64::MAX as i128 {
            break;
        }
        out.push(Ratio {
            num: p2 as i64,
            den: q2 as u64,
        });
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        num = den;
        den = r;
    }
    out
}

fn exact_fraction(x: f64) -> Option<(i128, i128)> {
    if x == 0.0 {
        return Some((0, 1));
    }
    let bits = x.to_bits();
    let sign: i128 = if bits >> 63 == 0 { 1 } else { -1 };
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i128;
    let (mant, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1i128 << 52), exp - 1075)
    };
    if e >= 0 {
        if e > 70 {
            return None;
        }
        Some((sign * (mant << e), 1))
    } else {
        if -e > 120 {
            return None;
        }
        let mut num = mant;
        let mut den: i128 = 1i128 << (-e);
        while num % 2 == 0 && den > 1 {
            num /= 2;
            den /= 2;
        }
        Some((sign * num, den))
    }
}

fn float_convergents(x: f64, max_den: u64) -> Vec<Ratio> {
    let mut out = Vec::new();
    let (mut p0, mut q0, mut p1, mut q1) = (0f64, 1f64, 1f64, 0f64);
    let mut y = x;
    for _ in 0..64 {
        let a = y.floor();
        let p2 = a * p1 + p0;
        let q2 = a * q1 + q0;
        if q2 > max_den as f64 || p2.abs() > i64::MAX as f64 {
            break;
        }
        out.push(Ratio {
            num: p2 as i64,
            den: q2 as u64,
        });
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = y - a;
        if frac == 0.0 {
            break;
        }
        y = 1.0 / frac;
    }
    out
}

/// Decides whether all `betas` are rational multiples of `betas[0]` with
/// denominators at most `max_den` and `|beta_j - (p/q) beta_0| <= tol |beta_0|`.
pub fn rationally_related(betas: &[f64], tol: f64, max_den: u64) -> Result<Relatedness> {
    if betas.is_empty() {
        return Err(Error::InvalidInput("rationally_related needs at least one value".into()));
    }
    if let Some(b) = betas.iter().find(|b| **b == 0.0 || !b.is_finite()) {
        return Err(Error::InvalidInput(format!("speeds must be finite and nonzero, got {b}")));
    }
    if max_den < 1 || !(tol >= 0.0) {
        return Err(Error::InvalidInput("need max_den >= 1 and tol >= 0".into()));
    }
    let generator = betas[0];
    let mut ratios = Vec::with_capacity(betas.len());
    for (j, &b) in betas.iter().enumerate() {
        let r = b / generator;
        let conv = convergents(r, max_den);
        let hit = conv.iter().find(|c| (r - c.value()).abs() <= tol);
        match hit {
            Some(c) => ratios.push(*c),
            None => {
                let best = conv
                    .iter()
                    .min_by(|a, b| (r - a.value()).abs().total_cmp(&(r - b.value()).abs()))
                    .copied()
                    .unwrap_or(Ratio { num: 0, den: 1 });
                return Ok(Relatedness::NotRelated {
                    index: j,
                    ratio: r,
                    best,
                    best_error: (r - best.value()).abs(),
                });
            }
        }
    }
    Ok(Relatedness::Related(RationalRelation {
        generator,
        betas: betas.to_vec(),
        ratios,
        max_denominator: max_den,
        tolerance: tol,
    }))
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn related(betas: &[f64]) -> RationalRelation {
        match rationally_related(betas, DEFAULT_RATIO_TOL, DEFAULT_MAX_DENOMINATOR).unwrap() {
            Relatedness::Related(r) => r,
            other => panic!("expected related, got {other:?}"),
        }
    }

    #[test]
    fn integers_are_related() {
        let r = related(&[2.0, 3.0]);
        assert_eq!(r.ratios, vec![Ratio { num: 1, den: 1 }, Ratio { num: 3, den: 2 }]);
        assert_eq!(r.generator, 2.0);
    }

    #[test]
    fn single_value_is_related() {
        let r = related(&[5.0]);
        assert_eq!(r.ratios, vec![Ratio { num: 1, den: 1 }]);
    }

    #[test]
    fn sqrt_two_is_not_related() {
        // Pell denominators 470832 -> 1136689 jump past 1e6 while the error
        // at 470832 is still ~1.6e-12.
        let out = rationally_related(&[1.0, 2f64.sqrt()], 1e-12, 1_000_000).unwrap();
        match out {
            Relatedness::NotRelated { index, best, best_error, .. } => {
                assert_eq!(index, 1);
                assert_eq!(best.den, 470_832);
                assert!(best_error > 1e-12 && best_error < 2e-12);
            }
            other => panic!("expected NotRelated, got {other:?}"),
        }
    }

    #[test]
    fn negative_speeds_reduce() {
        let r = related(&[-0.5, 1.5]);
        assert_eq!(r.ratios[1], Ratio { num: -3, den: 1 });
    }

    #[test]
    fn convergents_are_reduced() {
        for c in convergents(std::f64::consts::PI, 100_000) {
            assert_eq!(gcd(c.num.unsigned_abs(), c.den), 1);
        }
    }

    #[test]
    fn rejects_zero_speed() {
        assert!(rationally_related(&[1.0, 0.0], 1e-12, 10).is_err());
    }
}
