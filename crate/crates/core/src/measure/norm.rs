//! The operator `D` and the comparison `‖phi‖_{L^p(R^n)}` vs `‖D phi‖_{L^p(R x Sigma)}`.
//!
//! The left side is importance-sampled from the function's envelope. The right
//! side is sampled in `(t, chart)` coordinates from an explicit product
//! proposal whose location and scale are fitted on a pilot of envelope draws
//! mapped through `x -> (-t_x, chart(sigma(x)))`; the proposal never uses the
//! Jacobian, so the two estimates are independent.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{Envelope, Phi, RadialLaw};
use crate::matrix::norm2;
use crate::measure::chart::{ChartPoint, CoordKind, SectionMeasure};
use crate::sampling::{draw_rng, pairwise_sum, substream};

pub const DEFAULT_PILOT: usize = 2000;
pub const DEFAULT_QUADRATURE_NODES: usize = 96;
/// Minimum effective sample size as a fraction of the sample count.
pub const MIN_ESS_FRACTION: f64 = 0.01;

const LHS_STREAM: u64 = 1;
const RHS_STREAM: u64 = 2;
const PILOT_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NormMethod {
    MonteCarlo,
    /// Tensor Gauss-Legendre on mapped half-lines; `n <= 2` only.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormParams {
    pub method: NormMethod,
    pub count: usize,
    pub seed: u64,
    pub pilot: usize,
    pub quadrature_nodes: usize,
}

impl NormParams {
    pub fn monte_carlo(count: usize, seed: u64) -> Self {
        NormParams {
            method: NormMethod::MonteCarlo,
            count,
            seed,
            pilot: DEFAULT_PILOT,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        }
    }

    pub fn quadrature(seed: u64) -> Self {
        NormParams {
            method: NormMethod::Quadrature,
            count: 0,
            seed,
            pilot: DEFAULT_PILOT,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        }
    }
}

/// An estimate of `∫ |g|^p` and of the corresponding norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Estimate {
    pub integral: f64,
    pub integral_stderr: f64,
    pub norm: f64,
    pub stderr: f64,
    /// Effective sample size (Monte Carlo only).
    pub ess: Option<f64>,
}

impl Estimate {
    fn from_integral(integral: f64, integral_stderr: f64, p: f64, ess: Option<f64>) -> Self {
        let norm = integral.max(0.0).powf(1.0 / p);
        let stderr = if integral > 0.0 {
            integral_stderr * norm / (p * integral)
        } else {
            integral_stderr.powf(1.0 / p)
        };
        Estimate {
            integral,
            integral_stderr,
            norm,
            stderr,
            ess,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormReport {
    pub method: NormMethod,
    pub p: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `sqrt(se_lhs^2 + se_rhs^2)` on the norms.
    pub combined_stderr: f64,
    /// `|lhs - rhs| / lhs` on the norms (0 when both vanish).
    pub relative_difference: f64,
    pub calibration: f64,
    /// Right-side draws discarded because `e^{tA}` would overflow.
    pub truncated: usize,
    pub proposal: RhsProposal,
}

/// Per-sample dump row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleRecord {
    pub side: &'static str,
    pub index: usize,
    pub point: Vec<f64>,
    pub value: f64,
}

/// Location and scale of each right-side proposal factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RhsProposal {
    pub t_location: f64,
    pub t_scale: f64,
    pub coords: Vec<(CoordKind, f64, f64)>,
    pub sheets: bool,
    pub pilot_points: usize,
}

fn median_and_half_iqr(mut xs: Vec<f64>) -> (f64, f64) {
    xs.sort_by(f64::total_cmp);
    let q = |f: f64| {
        let pos = f * (xs.len() - 1) as f64;
        let i = pos.floor() as usize;
        let j = (i + 1).min(xs.len() - 1);
        xs[i] + (pos - i as f64) * (xs[j] - xs[i])
    };
    let med = q(0.5);
    let half = 0.5 * (q(0.75) - q(0.25));
    (med, half.max(1e-3 * (1.0 + med.abs())))
}

impl RhsProposal {
    fn fit(measure: &SectionMeasure, env: &Envelope, phi: &Phi, pilot: usize, seed: u64) -> Result<Self> {
        let cs = measure.section();
        let chart = measure.chart();
        let stream = substream(seed, PILOT_STREAM);
        let mut ts = Vec::new();
        let mut us: Vec<Vec<f64>> = vec![Vec::new(); chart.dim()];
        for i in 0..pilot as u64 {
            let x = env.sample(&mut draw_rng(stream, i));
            if phi.eval(&x) == 0.0 || !cs.omega().contains(&x) {
                continue;
            }
            let Ok((t, sigma)) = cs.section(&x) else { continue };
            let cp = chart.from_point(&sigma);
            ts.push(-t);
            for (d, v) in cp.u.iter().enumerate() {
                us[d].push(*v);
            }
        }
        let pilot_points = ts.len();
        let (t_location, t_scale) = if pilot_points >= 10 {
            median_and_half_iqr(ts)
        } else {
            (0.0, 1.0)
        };
        let coords = chart
            .kinds()
            .iter()
            .zip(us)
            .map(|(&k, vals)| match k {
                CoordKind::Angle => (k, PI, PI),
                CoordKind::Real if vals.len() >= 10 => {
                    let (m, s) = median_and_half_iqr(vals);
                    (k, m, s)
                }
                CoordKind::Real => (k, 0.0, 1.0),
            })
            .collect();
        Ok(RhsProposal {
            t_location,
            t_scale,
            coords,
            sheets: chart.has_sheets(),
            pilot_points,
        })
    }

    /// Draws `(t, chart point)` and returns `ln q`.
    fn sample<R: Rng>(&self, rng: &mut R) -> (f64, ChartPoint, f64) {
        // |t - loc| / scale = e^Y - 1 with Y ~ Lomax(1): tails ~ 1 / (|t| ln^2 |t|)
        let u: f64 = rng.random();
        let y = u / (1.0 - u);
        let x = y.exp() - 1.0;
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let t = self.t_location + sign * self.t_scale * x;
        let mut ln_q = -(2.0 * self.t_scale).ln() - (1.0 + x).ln() - 2.0 * (1.0 + y).ln();
        let mut coords = Vec::with_capacity(self.coords.len());
        for &(kind, loc, scale) in &self.coords {
            match kind {
                CoordKind::Angle => {
                    coords.push(TAU * rng.random::<f64>());
                    ln_q -= TAU.ln();
                }
                CoordKind::Real => {
                    let z = (PI * (rng.random::<f64>() - 0.5)).tan();
                    coords.push(loc + scale * z);
                    ln_q -= (PI * scale * (1.0 + z * z)).ln();
                }
            }
        }
        let mut sheet = 1.0;
        if self.sheets {
            if rng.random::<bool>() {
                sheet = -1.0;
            }
            ln_q -= 2f64.ln();
        }
        (t, ChartPoint { sheet, u: coords }, ln_q)
    }
}

/// `D phi(w, t) = phi(e^{tA} w) (|det e^{tA}| f(w))^{1/p}`.
pub fn apply_d(phi: &Phi, measure: &SectionMeasure, p: f64, w: &[f64], t: f64) -> Result<f64> {
    check_p(p)?;
    let cs = measure.section();
    let r = cs.f_value(w).abs();
    if r > 1e-9 * (1.0 + norm2(w)) {
        return Err(Error::InvalidInput(format!(
            "w = {w:?} is not on the cross-section (|F(w)| = {r:.3e})"
        )));
    }
    let value = phi.eval_checked(&cs.flow().apply(t, w)?)?;
    let factor = (t * cs.form().generator().trace()).exp() * measure.f(w);
    Ok(value * factor.powf(1.0 / p))
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("p must lie in [1, inf), got {p}")))
    }
}

/// `|D phi(w, t)|^p` in chart coordinates, or `None` when the flow would overflow.
fn rhs_integrand(phi: &Phi, measure: &SectionMeasure, p: f64, t: f64, cp: &ChartPoint) -> Result<Option<(Vec<f64>, f64)>> {
    let cs = measure.section();
    let Some(w) = measure.chart().to_point(cp) else {
        return Ok(Some((vec![f64::NAN; cs.dim()], 0.0)));
    };
    let x = match cs.flow().apply(t, &w) {
        Ok(x) => x,
        Err(Error::OverflowRisk { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Ok(None);
    }
    let v = phi.eval_checked(&x)?.abs();
    if v == 0.0 {
        return Ok(Some((x, 0.0)));
    }
    let ln = p * v.ln() + t * cs.form().generator().trace() + measure.f(&w).ln();
    Ok(Some((x, ln.exp())))
}

fn summarize(weights: &[f64], p: f64, count: usize, check_ess: bool) -> Result<Estimate> {
    let n = weights.len() as f64;
    let sum = pairwise_sum(weights);
    let mean = sum / n;
    let dev: Vec<f64> = weights.iter().map(|w| (w - mean) * (w - mean)).collect();
    let var = if weights.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let sum_sq = pairwise_sum(&sq);
    let ess = if sum_sq > 0.0 { sum * sum / sum_sq } else { 0.0 };
    if check_ess && sum > 0.0 && ess < MIN_ESS_FRACTION * count as f64 {
        return Err(Error::EnvelopeMismatch { ess, count });
    }
    Ok(Estimate::from_integral(mean, (var / n).sqrt(), p, Some(ess)))
}

/// Compares both norms; returns per-sample records when `dump` is set.
pub fn norm_check(
    phi: &Phi,
    measure: &SectionMeasure,
    p: f64,
    params: &NormParams,
    dump: bool,
) -> Result<(NormReport, Option<Vec<SampleRecord>>)> {
    check_p(p)?;
    let env = phi.envelope(p)?;
    let proposal = RhsProposal::fit(measure, &env, phi, params.pilot, params.seed)?;
    match params.method {
        NormMethod::MonteCarlo => monte_carlo(phi, measure, p, params, &env, proposal, dump),
        NormMethod::Quadrature => {
            let report = quadrature(phi, measure, p, params, &env, proposal)?;
            Ok((report, None))
        }
    }
}

fn monte_carlo(
    phi: &Phi,
    measure: &SectionMeasure,
    p: f64,
    params: &NormParams,
    env: &Envelope,
    proposal: RhsProposal,
    dump: bool,
) -> Result<(NormReport, Option<Vec<SampleRecord>>)> {
    let count = params.count;
    if count < 2 {
        return Err(Error::InvalidInput("Monte Carlo needs at least 2 samples".into()));
    }
    let lhs_stream = substream(params.seed, LHS_STREAM);
    let rhs_stream = substream(params.seed, RHS_STREAM);
    let zero = phi.info().identically_zero;

    let lhs: Vec<(Vec<f64>, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let x = env.sample(&mut draw_rng(lhs_stream, i as u64));
            let v = phi.eval_checked(&x)?.abs();
            let w = if v == 0.0 {
                0.0
            } else {
                (p * v.ln() - env.ln_density(&x)).exp()
            };
            Ok((x, w))
        })
        .collect::<Result<_>>()?;
    let rhs: Vec<(Option<Vec<f64>>, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = draw_rng(rhs_stream, i as u64);
            let (t, cp, ln_q) = proposal.sample(&mut rng);
            if !t.is_finite() {
                return Ok((None, 0.0));
            }
            Ok(match rhs_integrand(phi, measure, p, t, &cp)? {
                None => (None, 0.0),
                Some((x, v)) => (Some(x), if v == 0.0 { 0.0 } else { (v.ln() - ln_q).exp() }),
            })
        })
        .collect::<Result<_>>()?;

    let lhs_w: Vec<f64> = lhs.iter().map(|(_, w)| *w).collect();
    let rhs_w: Vec<f64> = rhs.iter().map(|(_, w)| *w).collect();
    let truncated = rhs.iter().filter(|(x, _)| x.is_none()).count();
    let lhs_est = summarize(&lhs_w, p, count, !zero)?;
    let rhs_est = summarize(&rhs_w, p, count, !zero)?;
    let records = dump.then(|| {
        let mut out = Vec::with_capacity(2 * count);
        for (i, (x, w)) in lhs.into_iter().enumerate() {
            out.push(SampleRecord { side: "lhs", index: i, point: x, value: w });
        }
        for (i, (x, w)) in rhs.into_iter().enumerate() {
            let point = x.unwrap_or_else(|| vec![f64::NAN; measure.section().dim()]);
            out.push(SampleRecord { side: "rhs", index: i, point, value: w });
        }
        out
    });
    Ok((
        finish(params, p, count, lhs_est, rhs_est, measure, truncated, proposal),
        records,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    params: &NormParams,
    p: f64,
    count: usize,
    lhs: Estimate,
    rhs: Estimate,
    measure: &SectionMeasure,
    truncated: usize,
    proposal: RhsProposal,
) -> NormReport {
    let relative_difference = if lhs.norm > 0.0 {
        (lhs.norm - rhs.norm).abs() / lhs.norm
    } else if rhs.norm == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    NormReport {
        method: params.method,
        p,
        sample_count: count,
        seed: params.seed,
        lhs,
        rhs,
        combined_stderr: lhs.stderr.hypot(rhs.stderr),
        relative_difference,
        calibration: measure.calibration(),
        truncated,
        proposal,
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 + x), 0.5 * w));
    }
    out
}

/// Nodes `(x, weight)` for `∫_R g` through `x = c ± s y / (1 - y)`.
fn real_line_nodes(c: f64, s: f64, gl: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(2 * gl.len());
    for &(y, w) in gl {
        let off = s * y / (1.0 - y);
        let jac = s / ((1.0 - y) * (1.0 - y));
        out.push((c + off, w * jac));
        out.push((c - off, w * jac));
    }
    out
}

fn envelope_hint(env: &Envelope) -> (Vec<f64>, f64) {
    match env {
        Envelope::Gaussian { center, scale } => (center.clone(), *scale),
        Envelope::Radial { center, law } => (
            center.clone(),
            match *law {
                RadialLaw::Gamma { rate } => 1.0 / rate,
                RadialLaw::Power { cutoff, .. } => 0.5 * cutoff,
            },
        ),
        Envelope::Ellipsoid { shape, .. } => (
            vec![0.0; shape.nrows()],
            0.5 * crate::matrix::spectral_norm(shape),
        ),
        Envelope::Box { lower, upper } => (
            env.center(),
            0.25 * lower
                .iter()
                .zip(upper)
                .map(|(l, u)| u - l)
                .fold(0.0, f64::max),
        ),
    }
}

fn tensor_sum(axes: &[Vec<(f64, f64)>], mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
    let dims = axes.len();
    let mut idx = vec![0usize; dims];
    let mut terms = Vec::new();
    let mut point = vec![0.0; dims];
    if axes.iter().any(|a| a.is_empty()) {
        return Ok(0.0);
    }
    loop {
        let mut weight = 1.0;
        for d in 0..dims {
            point[d] = axes[d][idx[d]].0;
            weight *= axes[d][idx[d]].1;
        }
        let v = f(&point)?;
        if v != 0.0 {
            terms.push(weight * v);
        }
        let mut d = 0;
        loop {
            if d == dims {
                return Ok(pairwise_sum(&terms));
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn quadrature_pass(
    phi: &Phi,
    measure: &SectionMeasure,
    p: f64,
    env: &Envelope,
    proposal: &RhsProposal,
    nodes: usize,
) -> Result<(f64, f64, usize)> {
    let gl = gauss_legendre(nodes);
    let (center, scale) = envelope_hint(env);
    let lhs_axes: Vec<Vec<(f64, f64)>> = center
        .iter()
        .map(|&c| real_line_nodes(c, scale, &gl))
        .collect();
    let lhs = tensor_sum(&lhs_axes, |x| Ok(phi.eval_checked(x)?.abs().powf(p)))?;

    let angle_nodes: Vec<(f64, f64)> = gl.iter().map(|&(y, w)| (TAU * y, TAU * w)).collect();
    let mut rhs_axes = vec![real_line_nodes(proposal.t_location, proposal.t_scale, &gl)];
    for &(kind, loc, s) in &proposal.coords {
        rhs_axes.push(match kind {
            CoordKind::Angle => angle_nodes.clone(),
            CoordKind::Real => real_line_nodes(loc, s, &gl),
        });
    }
    let sheets: &[f64] = if proposal.sheets { &[1.0, -1.0] } else { &[1.0] };
    let mut rhs = 0.0;
    let mut truncated = 0;
    for &sheet in sheets {
        rhs += tensor_sum(&rhs_axes, |z| {
            let cp = ChartPoint {
                sheet,
                u: z[1..].to_vec(),
            };
            Ok(match rhs_integrand(phi, measure, p, z[0], &cp)? {
                Some((_, v)) => v,
                None => {
                    truncated += 1;
                    0.0
                }
            })
        })?;
    }
    Ok((lhs, rhs, truncated))
}

fn quadrature(
    phi: &Phi,
    measure: &SectionMeasure,
    p: f64,
    params: &NormParams,
    env: &Envelope,
    proposal: RhsProposal,
) -> Result<NormReport> {
    let n = measure.section().dim();
    if n > 2 {
        return Err(Error::InvalidInput(format!(
            "quadrature is limited to n <= 2, got n = {n}"
        )));
    }
    let nodes = params.quadrature_nodes.max(4);
    let (lhs, rhs, truncated) = quadrature_pass(phi, measure, p, env, &proposal, nodes)?;
    let (lhs_half, rhs_half, _) = quadrature_pass(phi, measure, p, env, &proposal, nodes / 2)?;
    let lhs_est = Estimate::from_integral(lhs, (lhs - lhs_half).abs(), p, None);
    let rhs_est = Estimate::from_integral(rhs, (rhs - rhs_half).abs(), p, None);
    Ok(finish(params, p, nodes, lhs_est, rhs_est, measure, truncated, proposal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::TestFunction;
    use crate::matrix::SquareMatrix;
    use crate::orbit::{build_cross_section, isotropy_of};
    use crate::spectral::structured::complexify;
    use crate::spectral::DEFAULT_CLUSTER_TOL;

    fn measure(rows: &[Vec<f64>]) -> SectionMeasure {
        let a = SquareMatrix::from_rows(rows).unwrap();
        let (_, form) = complexify(&a, DEFAULT_CLUSTER_TOL).unwrap();
        let (iso, _) = isotropy_of(&form).unwrap();
        SectionMeasure::new(&build_cross_section(&form, &iso).unwrap()).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = gauss_legendre(8);
        let s: f64 = gl.iter().map(|(x, w)| w * x.powi(7)).sum();
        assert!((s - 0.125).abs() < 1e-14);
        let total: f64 = gl.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn apply_d_in_one_dimension() {
        let m = measure(&[vec![1.0]]);
        let phi = Phi::new(TestFunction::Exponential { center: None, scale: 1.0 }, 1).unwrap();
        let v = apply_d(&phi, &m, 1.0, &[1.0], 0.0).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-9);
        let zero = Phi::new(TestFunction::Zero, 1).unwrap();
        assert_eq!(apply_d(&zero, &m, 1.0, &[1.0], 0.3).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_one_dimension() {
        let m = measure(&[vec![1.0]]);
        let phi = Phi::new(TestFunction::Exponential { center: None, scale: 1.0 }, 1).unwrap();
        let (r, _) = norm_check(&phi, &m, 1.0, &NormParams::quadrature(1), false).unwrap();
        assert!((r.lhs.norm - 2.0).abs() < 1e-3, "{r:?}");
        assert!((r.rhs.norm - 2.0).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn zero_function_has_zero_norms() {
        let m = measure(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        let phi = Phi::new(TestFunction::Zero, 2).unwrap();
        let (r, _) = norm_check(&phi, &m, 2.0, &NormParams::monte_carlo(1000, 5), false).unwrap();
        assert_eq!((r.lhs.norm, r.rhs.norm), (0.0, 0.0));
    }

    #[test]
    fn monte_carlo_small_run_agrees() {
        let m = measure(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        let phi = Phi::new(TestFunction::Gaussian { center: None, scale: 1.0 }, 2).unwrap();
        let (r, dump) = norm_check(&phi, &m, 2.0, &NormParams::monte_carlo(20_000, 9), true).unwrap();
        assert!(
            (r.lhs.norm - r.rhs.norm).abs() <= 4.0 * r.combined_stderr,
            "{r:?}"
        );
        assert_eq!(dump.unwrap().len(), 40_000);
    }
}
