//! `{re, im}` serialization for complex scalars and lists of them.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::matrix::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReIm {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<Complex64> for ReIm {
    fn from(z: Complex64) -> Self {
        ReIm { re: z.re, im: z.im }
    }
}

impl From<ReIm> for Complex64 {
    fn from(z: ReIm) -> Self {
        Complex64::new(z.re, z.im)
    }
}

pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    ReIm::from(*z).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
    ReIm::deserialize(d).map(Complex64::from)
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(zs: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        zs.iter().map(|&z| ReIm::from(z)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        Ok(Vec::<ReIm>::deserialize(d)?.into_iter().map(Complex64::from).collect())
    }
}
