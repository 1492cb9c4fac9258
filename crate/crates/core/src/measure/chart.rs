//! Global charts of Sigma in adapted coordinates `y = R^{-1} x` and the
//! Jacobian of `xi(t, w) = e^{tA} w` in `(t, chart)` coordinates.
//!
//! Case 1 drops the pivot coordinate. Case 2 keeps the other coordinates and
//! parametrizes `|z_k| = 1` by a sheet sign (real eigenvalue) or an angle.
//! Case 3 writes `z_k = i s z_{k-1} / |z_{k-1}|` and keeps `s`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{mul_vec, norm2};
use crate::orbit::section::{CrossSection, SectionCase};
use crate::spectral::structured::Half;

/// Relative central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Largest acceptable condition number of the chart Jacobian.
pub const MAX_CHART_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CoordKind {
    Real,
    /// Angle in `[0, 2 pi)`.
    Angle,
}

/// A chart point: continuous coordinates plus the sheet sign (always `1`
/// unless the chart has two sheets).
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub sheet: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pivot {
    Drop(usize),
    Sheets(usize),
    Angle(usize, usize),
    Shear { prev: (usize, usize), pivot: (usize, usize) },
}

#[derive(Debug, Clone)]
pub struct SectionChart {
    pivot: Pivot,
    keep: Vec<usize>,
    kinds: Vec<CoordKind>,
    basis: DMatrix<f64>,
    basis_inv: DMatrix<f64>,
}

/// Adapted-coordinate indices of iota-coordinate `j` (0-based): one real
/// index or a `(re, im)` pair.
fn y_indices(cs: &CrossSection, j: usize) -> (usize, Option<usize>) {
    let emb = cs.form().embedding();
    if j < emb.p {
        (j, None)
    } else {
        let r = emb.p + 2 * (j - emb.p);
        (r, Some(r + 1))
    }
}

impl SectionChart {
    pub fn new(cs: &CrossSection) -> Self {
        let n = cs.dim();
        let k0 = cs.pivot() - 1;
        let real_pivot = cs.block().half == Half::Real;
        let pivot = match cs.case() {
            SectionCase::NilpotentZeroBlock => Pivot::Drop(y_indices(cs, k0).0),
            SectionCase::NonzeroRealPart if real_pivot => Pivot::Sheets(y_indices(cs, k0).0),
            SectionCase::NonzeroRealPart => {
                let (a, b) = y_indices(cs, k0);
                Pivot::Angle(a, b.unwrap())
            }
            SectionCase::ImaginaryNonDiagonalizable => {
                let (a, b) = y_indices(cs, k0 - 1);
                let (c, d) = y_indices(cs, k0);
                Pivot::Shear {
                    prev: (a, b.unwrap()),
                    pivot: (c, d.unwrap()),
                }
            }
        };
        let removed: Vec<usize> = match pivot {
            Pivot::Drop(i) | Pivot::Sheets(i) => vec![i],
            Pivot::Angle(a, b) => vec![a, b],
            Pivot::Shear { pivot: (c, d), .. } => vec![c, d],
        };
        let keep: Vec<usize> = (0..n).filter(|i| !removed.contains(i)).collect();
        let mut kinds = Vec::with_capacity(n - 1);
        match pivot {
            Pivot::Angle(..) => kinds.push(CoordKind::Angle),
            Pivot::Shear { .. } => kinds.push(CoordKind::Real),
            _ => {}
        }
        kinds.extend(keep.iter().map(|_| CoordKind::Real));
        SectionChart {
            pivot,
            keep,
            kinds,
            basis: cs.form().basis().clone(),
            basis_inv: cs.form().basis_inverse().clone(),
        }
    }

    /// Number of continuous chart coordinates (`n - 1`).
    pub fn dim(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[CoordKind] {
        &self.kinds
    }

    pub fn has_sheets(&self) -> bool {
        matches!(self.pivot, Pivot::Sheets(_))
    }

    fn special(&self) -> usize {
        self.kinds.len() - self.keep.len()
    }

    /// Adapted coordinates of a chart point; `None` on the excluded set of Case 3.
    pub fn to_adapted(&self, cp: &ChartPoint) -> Option<Vec<f64>> {
        let n = self.keep.len() + match self.pivot {
            Pivot::Drop(_) | Pivot::Sheets(_) => 1,
            _ => 2,
        };
        let mut y = vec![0.0; n];
        let off = self.special();
        for (slot, &i) in self.keep.iter().enumerate() {
            y[i] = cp.u[off + slot];
        }
        match self.pivot {
            Pivot::Drop(i) => y[i] = 0.0,
            Pivot::Sheets(i) => y[i] = cp.sheet,
            Pivot::Angle(a, b) => {
                y[a] = cp.u[0].cos();
                y[b] = cp.u[0].sin();
            }
            Pivot::Shear { prev: (a, b), pivot: (c, d) } => {
                let m = y[a].hypot(y[b]);
                if m == 0.0 {
                    return None;
                }
                let s = cp.u[0];
                y[c] = -s * y[b] / m;
                y[d] = s * y[a] / m;
            }
        }
        Some(y)
    }

    pub fn to_point(&self, cp: &ChartPoint) -> Option<Vec<f64>> {
        self.to_adapted(cp).map(|y| mul_vec(&self.basis, &y))
    }

    /// Inverse chart for a point of Sigma.
    pub fn from_point(&self, w: &[f64]) -> ChartPoint {
        let y = mul_vec(&self.basis_inv, w);
        let mut u = Vec::with_capacity(self.dim());
        let mut sheet = 1.0;
        match self.pivot {
            Pivot::Drop(_) => {}
            Pivot::Sheets(i) => sheet = if y[i] < 0.0 { -1.0 } else { 1.0 },
            Pivot::Angle(a, b) => u.push(y[b].atan2(y[a]).rem_euclid(std::f64::consts::TAU)),
            Pivot::Shear { prev: (a, b), pivot: (c, d) } => {
                let m = y[a].hypot(y[b]);
                // Im(z_k conj(z_{k-1})) / |z_{k-1}|
                u.push((y[d] * y[a] - y[c] * y[b]) / m);
            }
        }
        u.extend(self.keep.iter().map(|&i| y[i]));
        ChartPoint { sheet, u }
    }
}

/// `|det J_xi(t, w)|` by central differences in `(t, u)`.
pub fn flow_jacobian_det(cs: &CrossSection, chart: &SectionChart, cp: &ChartPoint, t: f64) -> Result<(f64, f64)> {
    let n = cs.dim();
    let flow = cs.flow();
    let w = chart.to_point(cp).ok_or_else(|| Error::ChartFailure {
        point: cp.u.clone(),
        condition: f64::INFINITY,
    })?;
    let mut j = DMatrix::<f64>::zeros(n, n);
    let h = FD_STEP * (1.0 + t.abs());
    let plus = flow.apply(t + h, &w)?;
    let minus = flow.apply(t - h, &w)?;
    for r in 0..n {
        j[(r, 0)] = (plus[r] - minus[r]) / (2.0 * h);
    }
    let e = flow.exp(t)?;
    for c in 0..chart.dim() {
        let h = FD_STEP * (1.0 + cp.u[c].abs());
        let mut up = cp.clone();
        let mut down = cp.clone();
        up.u[c] += h;
        down.u[c] -= h;
        let (Some(a), Some(b)) = (chart.to_point(&up), chart.to_point(&down)) else {
            return Err(Error::ChartFailure {
                point: w.clone(),
                condition: f64::INFINITY,
            });
        };
        let col: Vec<f64> = a.iter().zip(&b).map(|(p, q)| (p - q) / (2.0 * h)).collect();
        let moved = mul_vec(&e, &col);
        for r in 0..n {
            j[(r, c + 1)] = moved[r];
        }
    }
    let sv = j.clone().singular_values();
    let smax = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let smin = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    Ok((j.determinant().abs(), condition))
}

/// A cross-section together with its chart and the calibration constant
/// relating the closed-form factor to the chart Jacobian.
#[derive(Debug, Clone)]
pub struct SectionMeasure {
    cs: CrossSection,
    chart: SectionChart,
    calibration: f64,
    reference: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JacobianFactorization {
    pub w: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `|det J_xi(t, w)|` per grid time.
    pub det_samples: Vec<f64>,
    /// `|det J_xi(t, w)| / |det e^{tA}|` per grid time.
    pub ratios: Vec<f64>,
    /// Mean of the ratios.
    pub f: f64,
    pub relative_variance: f64,
    /// Unscaled closed form at `w`.
    pub closed_form: f64,
    pub calibration: f64,
    /// `|f - calibration * closed_form| / (calibration * closed_form)`.
    pub closed_form_error: f64,
    pub chart_condition: f64,
}

impl SectionMeasure {
    pub fn new(cs: &CrossSection) -> Result<Self> {
        let chart = SectionChart::new(cs);
        let n = cs.dim();
        let mut reference = None;
        for attempt in 0..8 {
            let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * (attempt * (i + 1)) as f64).collect();
            let x = mul_vec(cs.form().basis(), &y);
            if cs.omega().contains(&x) {
                reference = Some(cs.section(&x)?.1);
                break;
            }
        }
        let reference = reference.ok_or_else(|| Error::ChartFailure {
            point: vec![],
            condition: f64::INFINITY,
        })?;
        let cp = chart.from_point(&reference);
        let (det, condition) = flow_jacobian_det(cs, &chart, &cp, 0.0)?;
        if !(condition <= MAX_CHART_CONDITION) {
            return Err(Error::ChartFailure {
                point: reference,
                condition,
            });
        }
        let calibration = det / cs.jacobian_closed_form(&reference);
        Ok(SectionMeasure {
            cs: cs.clone(),
            chart,
            calibration,
            reference,
        })
    }

    pub fn section(&self) -> &CrossSection {
        &self.cs
    }

    pub fn chart(&self) -> &SectionChart {
        &self.chart
    }

    pub fn calibration(&self) -> f64 {
        self.calibration
    }

    pub fn reference_point(&self) -> &[f64] {
        &self.reference
    }

    /// Calibrated factor `f(w)`.
    pub fn f(&self, w: &[f64]) -> f64 {
        self.calibration * self.cs.jacobian_closed_form(w)
    }

    fn require_on_section(&self, w: &[f64]) -> Result<()> {
        let r = self.cs.f_value(w).abs();
        if r > 1e-9 * (1.0 + norm2(w)) || !self.cs.omega().contains(w) {
            return Err(Error::InvalidInput(format!(
                "w = {w:?} is not on the cross-section (|F(w)| = {r:.3e})"
            )));
        }
        Ok(())
    }

    pub fn jacobian_factor(&self, w: &[f64], t_grid: &[f64]) -> Result<JacobianFactorization> {
        if t_grid.is_empty() {
            return Err(Error::InvalidInput("t grid must be nonempty".into()));
        }
        self.require_on_section(w)?;
        let cp = self.chart.from_point(w);
        let trace = self.cs.form().generator().trace();
        let mut det_samples = Vec::with_capacity(t_grid.len());
        let mut ratios = Vec::with_capacity(t_grid.len());
        let mut chart_condition = 0.0_f64;
        for &t in t_grid {
            let (det, cond) = flow_jacobian_det(&self.cs, &self.chart, &cp, t)?;
            if t == t_grid[0] {
                chart_condition = cond;
            }
            det_samples.push(det);
            ratios.push(det / (t * trace).exp());
        }
        let (_, c0) = flow_jacobian_det(&self.cs, &self.chart, &cp, 0.0)?;
        chart_condition = chart_condition.max(c0);
        if !(c0 <= MAX_CHART_CONDITION) {
            return Err(Error::ChartFailure {
                point: w.to_vec(),
                condition: c0,
            });
        }
        let m = ratios.len() as f64;
        let f = ratios.iter().sum::<f64>() / m;
        let var = ratios.iter().map(|r| (r - f) * (r - f)).sum::<f64>() / m;
        let closed_form = self.cs.jacobian_closed_form(w);
        let target = self.calibration * closed_form;
        Ok(JacobianFactorization {
            w: w.to_vec(),
            t_grid: t_grid.to_vec(),
            det_samples,
            ratios,
            f,
            relative_variance: var / (f * f),
            closed_form,
            calibration: self.calibration,
            closed_form_error: (f - target).abs() / target,
            chart_condition,
        })
    }
}

/// Builds the chart and calibration for `cs` and factors the Jacobian at `w`.
pub fn jacobian_factor(cs: &CrossSection, w: &[f64], t_grid: &[f64]) -> Result<JacobianFactorization> {
    SectionMeasure::new(cs)?.jacobian_factor(w, t_grid)
}
