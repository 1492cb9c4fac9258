//! Orbit restrictions `t -> phi(e^{tA} v)`.

use crate::error::{Error, Result};
use crate::functions::Phi;
use crate::matrix::SquareMatrix;
use crate::spectral::expm::Flow;

#[derive(Debug, Clone)]
pub struct OrbitRestriction<'a> {
    phi: &'a Phi,
    flow: Flow,
    v: Vec<f64>,
}

impl<'a> OrbitRestriction<'a> {
    pub fn base_point(&self) -> &[f64] {
        &self.v
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.phi.eval_checked(&self.flow.apply(t, &self.v)?)
    }

    pub fn eval_grid(&self, ts: &[f64]) -> Result<Vec<f64>> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }

    /// Restriction at `e^{sA} v`, which equals `t -> self(t + s)`.
    pub fn shifted(&self, s: f64) -> Result<OrbitRestriction<'a>> {
        Ok(OrbitRestriction {
            phi: self.phi,
            flow: self.flow.clone(),
            v: self.flow.apply(s, &self.v)?,
        })
    }
}

pub fn restrict_to_orbit<'a>(phi: &'a Phi, a: &SquareMatrix, v: &[f64]) -> Result<OrbitRestriction<'a>> {
    if v.len() != a.dim() || phi.dim() != a.dim() {
        return Err(Error::InconsistentInputs(format!(
            "point of length {} and function of dimension {} for a {}x{} matrix",
            v.len(),
            phi.dim(),
            a.dim(),
            a.dim()
        )));
    }
    Ok(OrbitRestriction {
        phi,
        flow: Flow::new(a),
        v: v.to_vec(),
    })
}
