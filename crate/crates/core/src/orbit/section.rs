//! Cross-sections of free actions.
//!
//! All three constructions work in iota-coordinates `z = S^{-1} x`. Within a
//! lower bidiagonal block the first coordinate evolves as `e^{lambda t} z`,
//! the second as `e^{lambda t}(z_2 + t z_1)`, which is all the cases need.
//!
//! For a free action one of the cases always applies: `N = 0` together with
//! a spectrum in `iR` would make the isotropy a lattice or the full line, so
//! either some eigenvalue has a nonzero real part (Case 2) or some block is
//! non-trivial with eigenvalue `0` (Case 1) or in `iR*` (Case 3).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{norm2, Complex64};
use crate::orbit::isotropy::IsotropyClass;
use crate::spectral::eigen::canonical_order;
use crate::spectral::expm::Flow;
use crate::spectral::structured::{BlockSlot, Half, StructuredForm};

/// Points whose excluded coordinate is within this distance of zero are rejected.
pub const OMEGA_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectionCase {
    #[serde(rename = "Case1_NilpotentZeroBlock")]
    NilpotentZeroBlock,
    #[serde(rename = "Case2_NonzeroRealPart")]
    NonzeroRealPart,
    #[serde(rename = "Case3_ImaginaryNonDiagonalizable")]
    ImaginaryNonDiagonalizable,
}

impl SectionCase {
    pub fn tag(&self) -> &'static str {
        match self {
            SectionCase::NilpotentZeroBlock => "Case1_NilpotentZeroBlock",
            SectionCase::NonzeroRealPart => "Case2_NonzeroRealPart",
            SectionCase::ImaginaryNonDiagonalizable => "Case3_ImaginaryNonDiagonalizable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OmegaTest {
    pub inside: bool,
    /// Smallest modulus among the constrained coordinates.
    pub distance: f64,
}

/// `Omega = {x : z_i(x) != 0 for every listed i}` with a rejection margin.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OmegaPredicate {
    pub description: String,
    /// 1-based iota-coordinate indices.
    pub coordinates: Vec<usize>,
    pub margin: f64,
    #[serde(skip_serializing)]
    rows: Vec<Vec<Complex64>>,
}

fn iota_row(form: &StructuredForm, index: usize) -> Vec<Complex64> {
    form.similarity_inverse().row(index).iter().copied().collect()
}

fn dot(row: &[Complex64], x: &[f64]) -> Complex64 {
    row.iter().zip(x).map(|(r, &v)| r * v).sum()
}

impl OmegaPredicate {
    fn nonzero(form: &StructuredForm, indices: &[usize]) -> Self {
        let names: Vec<String> = indices.iter().map(|i| format!("z_{} != 0", i + 1)).collect();
        OmegaPredicate {
            description: if names.is_empty() {
                "all points".into()
            } else {
                names.join(" and ")
            },
            coordinates: indices.iter().map(|i| i + 1).collect(),
            margin: OMEGA_MARGIN,
            rows: indices.iter().map(|&i| iota_row(form, i)).collect(),
        }
    }

    /// Points with every upper iota-coordinate nonzero: on this set the
    /// isotropy of a pure-rotation flow is the full period lattice.
    pub fn lattice(form: &StructuredForm) -> Self {
        let indices: Vec<usize> = form
            .blocks()
            .iter()
            .filter(|s| s.half == Half::Upper)
            .flat_map(|s| s.offset..s.offset + s.block.size)
            .collect();
        Self::nonzero(form, &indices)
    }

    pub fn test(&self, x: &[f64]) -> OmegaTest {
        let distance = self
            .rows
            .iter()
            .map(|r| dot(r, x).norm())
            .fold(f64::INFINITY, f64::min);
        OmegaTest {
            inside: distance > self.margin,
            distance,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.test(x).inside
    }

    fn require(&self, x: &[f64]) -> Result<()> {
        let t = self.test(x);
        if t.inside {
            Ok(())
        } else {
            Err(Error::OutsideOmega {
                condition: format!(
                    "{} violated: |z| = {:.3e} is within {:.0e} of zero",
                    self.description, t.distance, self.margin
                ),
            })
        }
    }
}

/// `F` written in the original real coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SectionFormula {
    /// `F(v) = c . v`
    Linear { coefficients: Vec<f64> },
    /// `F(v) = |a . v + i b . v| - 1`
    Modulus { real: Vec<f64>, imag: Vec<f64> },
    /// `F(v) = v^T Q v` with symmetric `Q`.
    Quadratic { matrix: Vec<Vec<f64>> },
}

fn fmt_coef(c: f64) -> String {
    let s = format!("{:.12}", c.abs());
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn render_terms(terms: &[(f64, String)]) -> String {
    let scale = terms.iter().fold(0.0_f64, |m, (c, _)| m.max(c.abs()));
    let mut out = String::new();
    for (c, name) in terms {
        if c.abs() <= 1e-12 * scale.max(1.0) {
            continue;
        }
        let mag = fmt_coef(*c);
        let body = if mag == "1" { name.clone() } else { format!("{mag}*{name}") };
        if out.is_empty() {
            if *c < 0.0 {
                out.push('-');
            }
        } else {
            out.push_str(if *c < 0.0 { " - " } else { " + " });
        }
        out.push_str(&body);
    }
    if out.is_empty() {
        "0".into()
    } else {
        out
    }
}

fn linear_terms(c: &[f64]) -> Vec<(f64, String)> {
    c.iter()
        .enumerate()
        .map(|(i, &c)| (c, format!("v{}", i + 1)))
        .collect()
}

impl SectionFormula {
    /// Monomial coefficients `(i, j, c)` with `i <= j` (0-based) of a quadratic form.
    pub fn monomials(&self) -> Vec<(usize, usize, f64)> {
        match self {
            SectionFormula::Quadratic { matrix } => {
                let n = matrix.len();
                let mut out = Vec::new();
                for i in 0..n {
                    for j in i..n {
                        let c = if i == j { matrix[i][i] } else { matrix[i][j] + matrix[j][i] };
                        out.push((i, j, c));
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }

    pub fn evaluate(&self, v: &[f64]) -> f64 {
        let lin = |c: &[f64]| c.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        match self {
            SectionFormula::Linear { coefficients } => lin(coefficients),
            SectionFormula::Modulus { real, imag } => lin(real).hypot(lin(imag)) - 1.0,
            SectionFormula::Quadratic { matrix } => matrix
                .iter()
                .enumerate()
                .map(|(i, row)| v[i] * lin(row))
                .sum(),
        }
    }

    pub fn render(&self) -> String {
        let body = match self {
            SectionFormula::Linear { coefficients } => render_terms(&linear_terms(coefficients)),
            SectionFormula::Modulus { real, imag } => {
                let scale = imag.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
                if scale == 0.0 {
                    format!("|{}| - 1", render_terms(&linear_terms(real)))
                } else {
                    format!(
                        "sqrt(({})^2 + ({})^2) - 1",
                        render_terms(&linear_terms(real)),
                        render_terms(&linear_terms(imag))
                    )
                }
            }
            SectionFormula::Quadratic { .. } => {
                let terms: Vec<(f64, String)> = self
                    .monomials()
                    .into_iter()
                    .map(|(i, j, c)| {
                        let name = if i == j {
                            format!("v{}^2", i + 1)
                        } else {
                            format!("v{}*v{}", i + 1, j + 1)
                        };
                        (c, name)
                    })
                    .collect();
                render_terms(&terms)
            }
        };
        format!("F(v) = {body}")
    }
}

/// `Sigma = {x in Omega : F(x) = 0}` together with its section time and
/// Jacobian factor.
#[derive(Debug, Clone)]
pub struct CrossSection {
    case: SectionCase,
    pivot: usize,
    slot: BlockSlot,
    omega: OmegaPredicate,
    row_prev: Option<Vec<Complex64>>,
    row_pivot: Vec<Complex64>,
    form: StructuredForm,
    flow: Flow,
}

fn first_slot(slots: &[BlockSlot], pred: impl Fn(&BlockSlot) -> bool) -> Option<BlockSlot> {
    slots.iter().filter(|s| pred(s)).copied().min_by(|a, b| {
        match canonical_order(a.block.eigenvalue, a.block.size, b.block.eigenvalue, b.block.size) {
            Ordering::Equal => a.offset.cmp(&b.offset),
            o => o,
        }
    })
}

/// Picks the case by precedence and builds `F`, `Omega`, `t_v` and `f`.
pub fn build_cross_section(form: &StructuredForm, isotropy: &IsotropyClass) -> Result<CrossSection> {
    if *isotropy != IsotropyClass::Trivial {
        return Err(Error::NotFree {
            isotropy: isotropy.name(),
        });
    }
    let slots = form.blocks();
    let zero = Complex64::new(0.0, 0.0);
    let (case, slot, pivot0) = if let Some(s) = first_slot(&slots, |s| {
        s.half == Half::Real && s.block.eigenvalue == zero && s.block.size >= 2
    }) {
        (SectionCase::NilpotentZeroBlock, s, s.offset + 1)
    } else if let Some(s) = first_slot(&slots, |s| {
        s.half != Half::Conjugate && s.block.eigenvalue.re != 0.0
    }) {
        (SectionCase::NonzeroRealPart, s, s.offset)
    } else if let Some(s) = first_slot(&slots, |s| {
        s.half == Half::Upper && s.block.eigenvalue.re == 0.0 && s.block.size >= 2
    }) {
        (SectionCase::ImaginaryNonDiagonalizable, s, s.offset + 1)
    } else {
        return Err(Error::InconsistentInputs(
            "trivial isotropy claimed but the form has no nilpotent or expanding block".into(),
        ));
    };
    let (omega, row_prev) = match case {
        SectionCase::NonzeroRealPart => (OmegaPredicate::nonzero(form, &[pivot0]), None),
        _ => (
            OmegaPredicate::nonzero(form, &[pivot0 - 1]),
            Some(iota_row(form, pivot0 - 1)),
        ),
    };
    Ok(CrossSection {
        case,
        pivot: pivot0 + 1,
        slot,
        omega,
        row_prev,
        row_pivot: iota_row(form, pivot0),
        form: form.clone(),
        flow: Flow::new(form.generator()),
    })
}

impl CrossSection {
    pub fn case(&self) -> SectionCase {
        self.case
    }

    /// 1-based pivot row `k` in iota-coordinates.
    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn block(&self) -> BlockSlot {
        self.slot
    }

    pub fn eigenvalue(&self) -> Complex64 {
        self.slot.block.eigenvalue
    }

    pub fn omega(&self) -> &OmegaPredicate {
        &self.omega
    }

    pub fn form(&self) -> &StructuredForm {
        &self.form
    }

    pub fn flow(&self) -> &Flow {
        &self.flow
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    /// `(z_{k-1}, z_k)`; the first entry is `None` in Case 2.
    pub fn pivot_coordinates(&self, x: &[f64]) -> (Option<Complex64>, Complex64) {
        (
            self.row_prev.as_ref().map(|r| dot(r, x)),
            dot(&self.row_pivot, x),
        )
    }

    /// `F` evaluated through the iota-coordinates.
    pub fn f_value(&self, x: &[f64]) -> f64 {
        let (prev, zk) = self.pivot_coordinates(x);
        match self.case {
            SectionCase::NilpotentZeroBlock => zk.re,
            SectionCase::NonzeroRealPart => zk.norm() - 1.0,
            SectionCase::ImaginaryNonDiagonalizable => (zk * prev.unwrap().conj()).re,
        }
    }

    /// `F` in iota-coordinates, for reports.
    pub fn iota_formula(&self) -> String {
        let k = self.pivot;
        match self.case {
            SectionCase::NilpotentZeroBlock => format!("F(z) = z_{k}"),
            SectionCase::NonzeroRealPart => format!("F(z) = |z_{k}| - 1"),
            SectionCase::ImaginaryNonDiagonalizable => {
                format!("F(z) = Re(z_{k} conj(z_{}))", k - 1)
            }
        }
    }

    /// `F` composed with iota, in the original coordinates.
    pub fn formula(&self) -> SectionFormula {
        let re: Vec<f64> = self.row_pivot.iter().map(|z| z.re).collect();
        let im: Vec<f64> = self.row_pivot.iter().map(|z| z.im).collect();
        match self.case {
            SectionCase::NilpotentZeroBlock => SectionFormula::Linear { coefficients: re },
            SectionCase::NonzeroRealPart => SectionFormula::Modulus { real: re, imag: im },
            SectionCase::ImaginaryNonDiagonalizable => {
                let prev = self.row_prev.as_ref().unwrap();
                let n = re.len();
                let mut q = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        let v = re[i] * prev[j].re + im[i] * prev[j].im;
                        q[i][j] += 0.5 * v;
                        q[j][i] += 0.5 * v;
                    }
                }
                SectionFormula::Quadratic { matrix: q }
            }
        }
    }

    /// The unique `t` with `F(e^{tA} x) = 0`.
    pub fn section_time(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "point has length {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        self.omega.require(x)?;
        let (prev, zk) = self.pivot_coordinates(x);
        Ok(match self.case {
            SectionCase::NilpotentZeroBlock => -zk.re / prev.unwrap().re,
            SectionCase::NonzeroRealPart => -zk.norm().ln() / self.eigenvalue().re,
            SectionCase::ImaginaryNonDiagonalizable => {
                let p = prev.unwrap();
                -(zk * p.conj()).re / p.norm_sqr()
            }
        })
    }

    /// `(t_v, sigma(v) = e^{t_v A} v)`.
    pub fn section(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let t = self.section_time(x)?;
        Ok((t, self.flow.apply(t, x)?))
    }

    /// Closed form of the Jacobian factor at `w` on Sigma, up to the constant
    /// fixed by the chart: `|z_{k-1}|` in Cases 1 and 3, `|lambda|` in Case 2.
    pub fn jacobian_closed_form(&self, w: &[f64]) -> f64 {
        match self.case {
            SectionCase::NonzeroRealPart => self.eigenvalue().norm(),
            _ => self.pivot_coordinates(w).0.unwrap().norm(),
        }
    }

    /// Residual tolerance for `F(sigma(v))`.
    pub fn section_tolerance(&self, x: &[f64]) -> f64 {
        1e-9 * (1.0 + norm2(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SquareMatrix;
    use crate::orbit::isotropy::isotropy_of;
    use crate::spectral::structured::complexify;
    use crate::spectral::DEFAULT_CLUSTER_TOL;

    fn section_of(rows: &[Vec<f64>]) -> CrossSection {
        let a = SquareMatrix::from_rows(rows).unwrap();
        let (_, form) = complexify(&a, DEFAULT_CLUSTER_TOL).unwrap();
        let (iso, _) = isotropy_of(&form).unwrap();
        build_cross_section(&form, &iso).unwrap()
    }

    fn coupled_rows() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, -1.0, 0.0],
        ]
    }

    #[test]
    fn nilpotent_case() {
        let cs = section_of(&[vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(cs.case(), SectionCase::NilpotentZeroBlock);
        assert_eq!(cs.pivot(), 2);
        assert_eq!(cs.omega().description, "z_1 != 0");
        let (t, s) = cs.section(&[1.0, 5.0]).unwrap();
        assert!((t + 5.0).abs() < 1e-14);
        assert!((s[0] - 1.0).abs() < 1e-14 && s[1].abs() < 1e-13);
        assert_eq!(cs.formula().render(), "F(v) = v2");
        assert!(matches!(cs.section_time(&[0.0, 1.0]), Err(Error::OutsideOmega { .. })));
    }

    #[test]
    fn expanding_case() {
        let cs = section_of(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert_eq!(cs.case(), SectionCase::NonzeroRealPart);
        assert_eq!(cs.pivot(), 1);
        let (t, s) = cs.section(&[2.0, 3.0]).unwrap();
        assert!((t + 2f64.ln()).abs() < 1e-14);
        assert!((s[0] - 1.0).abs() < 1e-13 && (s[1] - 6.0).abs() < 1e-12);
        assert_eq!(cs.formula().render(), "F(v) = |v1| - 1");
    }

    #[test]
    fn coupled_rotation_is_case_three() {
        let cs = section_of(&coupled_rows());
        assert_eq!(cs.case(), SectionCase::ImaginaryNonDiagonalizable);
        assert_eq!(cs.pivot(), 2);
        assert_eq!(cs.formula().render(), "F(v) = v1*v3 + v2*v4");
        let (t, s) = cs.section(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((t + 1.0).abs() < 1e-14);
        assert!(cs.f_value(&s).abs() < 1e-10);
    }

    #[test]
    fn formula_agrees_with_iota_evaluation() {
        let cs = section_of(&coupled_rows());
        let f = cs.formula();
        for v in [[0.3, -1.0, 2.0, 0.5], [1.0, 2.0, 3.0, 4.0]] {
            assert!((f.evaluate(&v) - cs.f_value(&v)).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_action_has_no_section() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let (_, form) = complexify(&a, DEFAULT_CLUSTER_TOL).unwrap();
        let (iso, _) = isotropy_of(&form).unwrap();
        assert!(matches!(
            build_cross_section(&form, &iso),
            Err(Error::NotFree { .. })
        ));
        let omega = OmegaPredicate::lattice(&form);
        assert!(omega.contains(&[1.0, 0.0]));
        assert!(!omega.contains(&[0.0, 0.0]));
    }

    #[test]
    fn expanding_precedes_imaginary() {
        // rotation with a nilpotent coupling plus an expanding direction
        let cs = section_of(&[
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, -1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.5],
        ]);
        assert_eq!(cs.case(), SectionCase::NonzeroRealPart);
        assert_eq!(cs.eigenvalue(), Complex64::new(0.5, 0.0));
    }

    #[test]
    fn complex_expanding_block() {
        let cs = section_of(&[vec![0.5, 2.0], vec![-2.0, 0.5]]);
        assert_eq!(cs.case(), SectionCase::NonzeroRealPart);
        let v = [3.0, -1.0];
        let (_, s) = cs.section(&v).unwrap();
        assert!(cs.f_value(&s).abs() < 1e-12);
        assert!(cs.formula().render().starts_with("F(v) = sqrt("));
    }
}
