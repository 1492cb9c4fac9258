use serde::{Deserialize, Serialize};

use crate::matrix::{CMatrix, Complex64};

/// The coordinate embedding `iota: R^{p+q} -> C^{p+q}`,
///
/// `(v_1..v_p, w_1..w_q) -> (v_1..v_p, w_1 + i w_2, .., w_{q-1} + i w_q, w_1 - i w_2, .., w_{q-1} - i w_q)`.
///
/// Coordinate `p + q/2 + j` of an image is the conjugate of coordinate `p + j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComplexEmbedding {
    pub p: usize,
    pub q: usize,
}

impl ComplexEmbedding {
    pub fn new(p: usize, q: usize) -> Self {
        assert!(q.is_multiple_of(2), "complex-pair coordinate count must be even");
        ComplexEmbedding { p, q }
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    pub fn pairs(&self) -> usize {
        self.q / 2
    }

    pub fn is_identity(&self) -> bool {
        self.q == 0
    }

    pub fn forward(&self, y: &[f64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.dim());
        let mut z: Vec<Complex64> = Vec::with_capacity(self.dim());
        z.extend(y[..self.p].iter().map(|&x| Complex64::new(x, 0.0)));
        let upper: Vec<Complex64> = (0..self.pairs())
            .map(|j| Complex64::new(y[self.p + 2 * j], y[self.p + 2 * j + 1]))
            .collect();
        z.extend(upper.iter().copied());
        z.extend(upper.iter().map(|w| w.conj()));
        z
    }

    /// Inverse on the image; the conjugate half is ignored.
    pub fn inverse(&self, z: &[Complex64]) -> Vec<f64> {
        assert_eq!(z.len(), self.dim());
        let mut y = Vec::with_capacity(self.dim());
        y.extend(z[..self.p].iter().map(|w| w.re));
        for j in 0..self.pairs() {
            let w = z[self.p + j];
            y.push(w.re);
            y.push(w.im);
        }
        y
    }

    /// Matrix `M` with `iota(y) = M y`.
    pub fn matrix(&self) -> CMatrix {
        let n = self.dim();
        let h = self.pairs();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..self.p {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        for j in 0..h {
            let (a, b) = (self.p + 2 * j, self.p + 2 * j + 1);
            m[(self.p + j, a)] = Complex64::new(1.0, 0.0);
            m[(self.p + j, b)] = Complex64::new(0.0, 1.0);
            m[(self.p + h + j, a)] = Complex64::new(1.0, 0.0);
            m[(self.p + h + j, b)] = Complex64::new(0.0, -1.0);
        }
        m
    }

    /// `M^{-1}`.
    pub fn inverse_matrix(&self) -> CMatrix {
        let n = self.dim();
        let h = self.pairs();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..self.p {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        for j in 0..h {
            let (a, b) = (self.p + 2 * j, self.p + 2 * j + 1);
            let (u, c) = (self.p + j, self.p + h + j);
            m[(a, u)] = Complex64::new(0.5, 0.0);
            m[(a, c)] = Complex64::new(0.5, 0.0);
            m[(b, u)] = Complex64::new(0.0, -0.5);
            m[(b, c)] = Complex64::new(0.0, 0.5);
        }
        m
    }

    /// True when the conjugate half is bit-exactly the conjugate of the upper half.
    pub fn has_conjugate_pattern(&self, z: &[Complex64]) -> bool {
        let h = self.pairs();
        z[..self.p].iter().all(|w| w.im == 0.0)
            && (0..h).all(|j| z[self.p + h + j] == z[self.p + j].conj())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_pair_layout() {
        let e = ComplexEmbedding::new(0, 4);
        let z = e.forward(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            z,
            vec![
                Complex64::new(1.0, 2.0),
                Complex64::new(3.0, 4.0),
                Complex64::new(1.0, -2.0),
                Complex64::new(3.0, -4.0)
            ]
        );
        assert!(e.has_conjugate_pattern(&z));
        assert_eq!(e.inverse(&z), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matrix_and_inverse_agree() {
        let e = ComplexEmbedding::new(1, 2);
        let prod = e.matrix() * e.inverse_matrix();
        assert!((prod - CMatrix::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn real_spectrum_embedding_is_identity() {
        let e = ComplexEmbedding::new(3, 0);
        assert!(e.is_identity());
        assert_eq!(e.matrix(), CMatrix::identity(3, 3));
    }
}
