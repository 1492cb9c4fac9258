//! HEURISTIC probe of `Lambda_phi`, the points whose orbit restriction lies in
//! `C_0`, `L^p` or the compactly supported functions.
//!
//! Membership cannot be decided from samples. Each restriction is evaluated on
//! a uniform grid over `[-T, T]` and tested three ways: tail below `1e-6` of
//! the peak outside `[-T/2, T/2]`, `L^p` mass ratio between the full and half
//! window below `1.001`, and exact zeros outside the half window. For free
//! actions undecided points get a doubled window, up to `max_doublings` times.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::Phi;
use crate::matrix::{mul_vec, norm2};
use crate::orbit::{IsotropyClass, OmegaPredicate};
use crate::sampling::{draw_rng, substream};
use crate::spectral::expm::Flow;
use crate::spectral::structured::StructuredForm;

pub const TAIL_FRACTION: f64 = 1e-6;
pub const MASS_RATIO_TOL: f64 = 1.001;
/// Ratio above which a still-undecided restriction counts as non-decaying.
pub const GROWING_MASS_RATIO: f64 = 1.9;
const ESCAPE_NORM: f64 = 1e100;
const MAX_ATTEMPTS: usize = 100;
const PROBE_STREAM: u64 = 11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeParams {
    pub v_count: usize,
    pub window: f64,
    pub grid: usize,
    pub seed: u64,
    pub max_doublings: usize,
}

impl ProbeParams {
    pub fn new(v_count: usize, seed: u64) -> Self {
        ProbeParams {
            v_count,
            window: 20.0,
            grid: 4001,
            seed,
            max_doublings: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbePoint {
    pub v: Vec<f64>,
    pub window: f64,
    pub peak: f64,
    pub tail_ratio: f64,
    pub mass_ratio: f64,
    pub c0: bool,
    pub lp: bool,
    pub compact: bool,
    pub in_lambda: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LambdaProbeReport {
    pub label: String,
    pub isotropy: IsotropyClass,
    pub p: f64,
    pub seed: u64,
    pub probed: usize,
    /// Draws rejected for falling outside `supp(phi) ∩ Omega`.
    pub excluded: usize,
    pub in_lambda: usize,
    pub fraction: f64,
    pub c0_count: usize,
    pub lp_count: usize,
    pub compact_count: usize,
    pub max_window: f64,
    pub grid: usize,
    pub tail_fraction: f64,
    pub mass_ratio_tol: f64,
    pub caveat: String,
    pub points: Vec<ProbePoint>,
}

/// `|phi(e^{tA} v)|` on `t_i = -T + i dt`, marching `x -> e^{±dt A} x` from `t = 0`.
fn restriction_values(phi: &Phi, flow: &Flow, v: &[f64], window: f64, grid: usize) -> Result<Vec<f64>> {
    let half = grid / 2;
    let dt = window / half as f64;
    let forward = flow.exp(dt)?;
    let backward = flow.exp(-dt)?;
    let decays = phi.info().decays;
    let mut values = vec![0.0; 2 * half + 1];
    values[half] = phi.eval_checked(v)?.abs();
    for (step, dir) in [(&forward, 1isize), (&backward, -1isize)] {
        let mut x = v.to_vec();
        for i in 1..=half {
            x = mul_vec(step, &x);
            let idx = (half as isize + dir * i as isize) as usize;
            if norm2(&x) > ESCAPE_NORM {
                let fill = if decays { 0.0 } else { f64::INFINITY };
                let range: Vec<usize> = (i..=half)
                    .map(|j| (half as isize + dir * j as isize) as usize)
                    .collect();
                for j in range {
                    values[j] = fill;
                }
                break;
            }
            values[idx] = phi.eval_checked(&x)?.abs();
        }
    }
    Ok(values)
}

struct Classification {
    peak: f64,
    tail_ratio: f64,
    mass_ratio: f64,
    c0: bool,
    lp: bool,
    compact: bool,
}

fn classify(values: &[f64], p: f64) -> Classification {
    let half = values.len() / 2;
    let inner = half / 2;
    let peak = values.iter().copied().fold(0.0, f64::max);
    let mut tail = 0.0f64;
    let (mut inner_mass, mut full_mass) = (0.0, 0.0);
    for (i, &g) in values.iter().enumerate() {
        let offset = i.abs_diff(half);
        let m = g.powf(p);
        full_mass += m;
        if offset <= inner {
            inner_mass += m;
        } else {
            tail = tail.max(g);
        }
    }
    let tail_ratio = if peak > 0.0 { tail / peak } else { 0.0 };
    let mass_ratio = if inner_mass > 0.0 { full_mass / inner_mass } else { f64::INFINITY };
    Classification {
        peak,
        tail_ratio,
        mass_ratio,
        c0: peak.is_finite() && tail_ratio < TAIL_FRACTION,
        lp: mass_ratio.is_finite() && mass_ratio < MASS_RATIO_TOL,
        compact: tail == 0.0,
    }
}

fn probe_point(
    phi: &Phi,
    flow: &Flow,
    v: Vec<f64>,
    p: f64,
    params: &ProbeParams,
    adaptive: bool,
) -> Result<ProbePoint> {
    let mut window = params.window;
    let mut doublings = 0;
    loop {
        let c = classify(&restriction_values(phi, flow, &v, window, params.grid)?, p);
        let decided = c.c0 || c.lp || c.compact;
        if decided || !adaptive || doublings == params.max_doublings {
            if !decided && adaptive && c.mass_ratio < GROWING_MASS_RATIO {
                return Err(Error::WindowTooSmall {
                    window,
                    mass_ratio: c.mass_ratio,
                });
            }
            return Ok(ProbePoint {
                v,
                window,
                peak: c.peak,
                tail_ratio: c.tail_ratio,
                mass_ratio: c.mass_ratio,
                c0: c.c0,
                lp: c.lp,
                compact: c.compact,
                in_lambda: decided,
            });
        }
        window *= 2.0;
        doublings += 1;
    }
}

/// Samples `v` from the envelope of `|phi|^p` restricted to `supp(phi) ∩ Omega`
/// and reports the fraction whose restriction passes any of the three tests.
pub fn lambda_probe(
    phi: &Phi,
    form: &StructuredForm,
    isotropy: &IsotropyClass,
    omega: &OmegaPredicate,
    p: f64,
    params: &ProbeParams,
) -> Result<LambdaProbeReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!("p must lie in [1, inf), got {p}")));
    }
    if params.v_count == 0 || params.grid < 5 || !(params.window > 0.0) {
        return Err(Error::InvalidInput(
            "probe needs v_count >= 1, grid >= 5 and a positive window".into(),
        ));
    }
    if phi.dim() != form.dim() {
        return Err(Error::InconsistentInputs(format!(
            "function dimension {} differs from matrix dimension {}",
            phi.dim(),
            form.dim()
        )));
    }
    let env = phi.envelope(p)?;
    let flow = Flow::new(form.generator());
    let adaptive = matches!(isotropy, IsotropyClass::Trivial);
    let stream = substream(params.seed, PROBE_STREAM);
    let results: Vec<(usize, Option<ProbePoint>)> = (0..params.v_count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = draw_rng(stream, i);
            for attempt in 0..MAX_ATTEMPTS {
                let v = env.sample(&mut rng);
                if phi.eval_checked(&v)? != 0.0 && omega.contains(&v) {
                    return Ok((attempt, Some(probe_point(phi, &flow, v, p, params, adaptive)?)));
                }
            }
            Ok((MAX_ATTEMPTS, None))
        })
        .collect::<Result<_>>()?;

    let excluded = results.iter().map(|(e, _)| e).sum();
    let points: Vec<ProbePoint> = results.into_iter().filter_map(|(_, pt)| pt).collect();
    let probed = points.len();
    let in_lambda = points.iter().filter(|pt| pt.in_lambda).count();
    Ok(LambdaProbeReport {
        label: "HEURISTIC".into(),
        isotropy: *isotropy,
        p,
        seed: params.seed,
        probed,
        excluded,
        in_lambda,
        fraction: if probed > 0 { in_lambda as f64 / probed as f64 } else { 0.0 },
        c0_count: points.iter().filter(|pt| pt.c0).count(),
        lp_count: points.iter().filter(|pt| pt.lp).count(),
        compact_count: points.iter().filter(|pt| pt.compact).count(),
        max_window: points.iter().map(|pt| pt.window).fold(0.0, f64::max),
        grid: params.grid,
        tail_fraction: TAIL_FRACTION,
        mass_ratio_tol: MASS_RATIO_TOL,
        caveat: "finite grid and window: membership in Lambda is inferred, not proven".into(),
        points,
    })
}
