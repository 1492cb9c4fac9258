//! The complexified `D + N` form of a generator.
//!
//! Coordinates are laid out as `[real blocks | upper complex blocks | conjugate blocks]`.
//! Each elementary block is lower bidiagonal: eigenvalue on the diagonal, ones on the
//! sub-diagonal. A real basis `R` (so `x = R y`) brings `A` to the real form whose
//! complexification through [`ComplexEmbedding`] is `J`; the complex similarity is
//! `S = R M^{-1}` with `M` the matrix of the embedding, so `A = S J S^{-1}`.

use std::cmp::Ordering;

use nalgebra::{ComplexField, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, Complex64, SquareMatrix};
use crate::spectral::eigen::{canonical_order, eigen_decompose, EigenStructure, RANK_TOL};
use crate::spectral::embedding::ComplexEmbedding;

/// Numerically computed forms are refused above this basis condition number.
pub const MAX_BASIS_CONDITION: f64 = 1e12;
/// Relative reconstruction residual allowed for a form.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JordanBlock {
    #[serde(with = "crate::serde_complex")]
    pub eigenvalue: Complex64,
    pub size: usize,
}

impl JordanBlock {
    pub fn new(eigenvalue: Complex64, size: usize) -> Self {
        JordanBlock { eigenvalue, size }
    }

    pub fn real(lambda: f64, size: usize) -> Self {
        JordanBlock::new(Complex64::new(lambda, 0.0), size)
    }

    pub fn has_nilpotent_part(&self) -> bool {
        self.size > 1
    }

    fn order(&self, other: &Self) -> Ordering {
        canonical_order(self.eigenvalue, self.size, other.eigenvalue, other.size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Half {
    Real,
    Upper,
    Conjugate,
}

/// A block together with its position in iota-coordinates (0-based offset).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockSlot {
    pub block: JordanBlock,
    pub offset: usize,
    pub half: Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FormSource {
    UserProvided,
    NumericallyComputed,
}

#[derive(Debug, Clone)]
pub struct StructuredForm {
    generator: SquareMatrix,
    real_blocks: Vec<JordanBlock>,
    upper_blocks: Vec<JordanBlock>,
    embedding: ComplexEmbedding,
    basis: DMatrix<f64>,
    basis_inv: DMatrix<f64>,
    similarity: CMatrix,
    similarity_inv: CMatrix,
    jordan: CMatrix,
    source: FormSource,
    condition: f64,
    residual: f64,
}

fn jordan_matrix(blocks: &[BlockSlot], n: usize) -> CMatrix {
    let mut j = CMatrix::zeros(n, n);
    for s in blocks {
        for i in 0..s.block.size {
            let lambda = match s.half {
                Half::Conjugate => s.block.eigenvalue.conj(),
                _ => s.block.eigenvalue,
            };
            j[(s.offset + i, s.offset + i)] = lambda;
            if i > 0 {
                j[(s.offset + i, s.offset + i - 1)] = Complex64::new(1.0, 0.0);
            }
        }
    }
    j
}

fn layout(real: &[JordanBlock], upper: &[JordanBlock]) -> Vec<BlockSlot> {
    let mut slots = Vec::with_capacity(real.len() + 2 * upper.len());
    let mut offset = 0;
    for b in real {
        slots.push(BlockSlot { block: *b, offset, half: Half::Real });
        offset += b.size;
    }
    for b in upper {
        slots.push(BlockSlot { block: *b, offset, half: Half::Upper });
        offset += b.size;
    }
    for b in upper {
        slots.push(BlockSlot { block: *b, offset, half: Half::Conjugate });
        offset += b.size;
    }
    slots
}

/// `e^{t B}` for one lower bidiagonal Jordan block.
pub fn exp_jordan_block(lambda: Complex64, size: usize, t: f64) -> CMatrix {
    let scale = (lambda * t).exp();
    let mut m = CMatrix::zeros(size, size);
    let mut coef = 1.0;
    for d in 0..size {
        if d > 0 {
            coef *= t / d as f64;
        }
        for i in d..size {
            m[(i, i - d)] = scale * coef;
        }
    }
    m
}

impl StructuredForm {
    fn assemble(
        generator: Option<&SquareMatrix>,
        real_blocks: Vec<JordanBlock>,
        upper_blocks: Vec<JordanBlock>,
        basis: DMatrix<f64>,
        source: FormSource,
    ) -> Result<Self> {
        for b in &real_blocks {
            if b.eigenvalue.im != 0.0 || b.size == 0 || !b.eigenvalue.re.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "real block must have a finite real eigenvalue and size >= 1, got {b:?}"
                )));
            }
        }
        for b in &upper_blocks {
            if !(b.eigenvalue.im > 0.0) || b.size == 0 || !b.eigenvalue.re.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "complex block must have Im(lambda) > 0 and size >= 1, got {b:?}"
                )));
            }
        }
        let p: usize = real_blocks.iter().map(|b| b.size).sum();
        let q: usize = 2 * upper_blocks.iter().map(|b| b.size).sum::<usize>();
        let n = p + q;
        if n == 0 || basis.nrows() != n || basis.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "blocks span dimension {n} but basis is {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        let embedding = ComplexEmbedding::new(p, q);
        let sv = basis.clone().singular_values();
        let smax = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
        let smin = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        let basis_inv = basis
            .clone()
            .try_inverse()
            .filter(|_| condition.is_finite())
            .ok_or(Error::DefectiveFormUnresolved { condition })?;

        let slots = layout(&real_blocks, &upper_blocks);
        let jordan = jordan_matrix(&slots, n);
        let m = embedding.matrix();
        let m_inv = embedding.inverse_matrix();
        let basis_c = basis.map(|x| Complex64::new(x, 0.0));
        let basis_inv_c = basis_inv.map(|x| Complex64::new(x, 0.0));
        let similarity = &basis_c * &m_inv;
        let similarity_inv = &m * &basis_inv_c;
        let real_form = (&m_inv * &jordan * &m).map(|z| z.re);
        let derived = &basis * real_form * &basis_inv;

        let (generator, residual) = match generator {
            Some(a) => {
                if a.dim() != n {
                    return Err(Error::InvalidInput(format!(
                        "generator has dimension {}, blocks span {n}",
                        a.dim()
                    )));
                }
                ((*a).clone(), (a.as_matrix() - &derived).norm())
            }
            None => (
                SquareMatrix::new(derived).map_err(|e| Error::InvalidInput(e.to_string()))?,
                0.0,
            ),
        };
        Ok(StructuredForm {
            generator,
            real_blocks,
            upper_blocks,
            embedding,
            basis,
            basis_inv,
            similarity,
            similarity_inv,
            jordan,
            source,
            condition,
            residual,
        })
    }

    /// A user-provided form; the generator is `R (iota^{-1} J iota) R^{-1}`.
    /// `basis = None` means `R = I`.
    pub fn from_blocks(
        real_blocks: Vec<JordanBlock>,
        upper_blocks: Vec<JordanBlock>,
        basis: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n: usize = real_blocks.iter().map(|b| b.size).sum::<usize>()
            + 2 * upper_blocks.iter().map(|b| b.size).sum::<usize>();
        let basis = basis.unwrap_or_else(|| DMatrix::identity(n, n));
        Self::assemble(None, real_blocks, upper_blocks, basis, FormSource::UserProvided)
    }

    /// A user-provided form for a given generator; refused if it does not reproduce `a`.
    pub fn user_provided(
        a: &SquareMatrix,
        real_blocks: Vec<JordanBlock>,
        upper_blocks: Vec<JordanBlock>,
        basis: DMatrix<f64>,
    ) -> Result<Self> {
        let form = Self::assemble(Some(a), real_blocks, upper_blocks, basis, FormSource::UserProvided)?;
        if form.residual > RESIDUAL_TOL * a.norm() {
            return Err(Error::InconsistentInputs(format!(
                "structured form does not reproduce the matrix (residual {:.3e})",
                form.residual
            )));
        }
        Ok(form)
    }

    pub fn generator(&self) -> &SquareMatrix {
        &self.generator
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn embedding(&self) -> ComplexEmbedding {
        self.embedding
    }

    pub fn real_blocks(&self) -> &[JordanBlock] {
        &self.real_blocks
    }

    pub fn upper_blocks(&self) -> &[JordanBlock] {
        &self.upper_blocks
    }

    /// All blocks in iota-coordinate order with their offsets.
    pub fn blocks(&self) -> Vec<BlockSlot> {
        layout(&self.real_blocks, &self.upper_blocks)
    }

    pub fn jordan(&self) -> &CMatrix {
        &self.jordan
    }

    pub fn similarity(&self) -> &CMatrix {
        &self.similarity
    }

    pub fn similarity_inverse(&self) -> &CMatrix {
        &self.similarity_inv
    }

    /// Real basis `R` with `x = R y`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn basis_inverse(&self) -> &DMatrix<f64> {
        &self.basis_inv
    }

    pub fn source(&self) -> FormSource {
        self.source
    }

    /// Condition number of the real basis.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `||A - S J S^{-1}||_F`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `D = 0` and `N = 0`.
    pub fn is_zero(&self) -> bool {
        self.real_blocks
            .iter()
            .chain(&self.upper_blocks)
            .all(|b| b.eigenvalue == Complex64::new(0.0, 0.0) && b.size == 1)
    }

    pub fn has_nilpotent_part(&self) -> bool {
        self.real_blocks
            .iter()
            .chain(&self.upper_blocks)
            .any(|b| b.has_nilpotent_part())
    }

    pub fn has_nonzero_real_part(&self) -> bool {
        self.real_blocks
            .iter()
            .chain(&self.upper_blocks)
            .any(|b| b.eigenvalue.re != 0.0)
    }

    /// Adapted real coordinates `y = R^{-1} x`.
    pub fn to_adapted(&self, x: &[f64]) -> Vec<f64> {
        crate::matrix::mul_vec(&self.basis_inv, x)
    }

    pub fn from_adapted(&self, y: &[f64]) -> Vec<f64> {
        crate::matrix::mul_vec(&self.basis, y)
    }

    /// `iota(R^{-1} x)`; carries the exact conjugate pattern.
    pub fn to_iota(&self, x: &[f64]) -> Vec<Complex64> {
        self.embedding.forward(&self.to_adapted(x))
    }

    pub fn from_iota(&self, z: &[Complex64]) -> Vec<f64> {
        self.from_adapted(&self.embedding.inverse(z))
    }

    /// `e^{tA} x` evaluated blockwise through `e^{tJ}`.
    pub fn flow_closed_form(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let z = self.to_iota(x);
        let mut out = z.clone();
        for slot in self.blocks() {
            if slot.half == Half::Conjugate {
                continue;
            }
            let e = exp_jordan_block(slot.block.eigenvalue, slot.block.size, t);
            let seg = DVector::from_column_slice(&z[slot.offset..slot.offset + slot.block.size]);
            let moved = e * seg;
            for i in 0..slot.block.size {
                out[slot.offset + i] = moved[i];
            }
        }
        self.from_iota(&out)
    }

    /// `e^{tJ}` for the full form.
    pub fn exp_jordan(&self, t: f64) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for slot in self.blocks() {
            let lambda = match slot.half {
                Half::Conjugate => slot.block.eigenvalue.conj(),
                _ => slot.block.eigenvalue,
            };
            let e = exp_jordan_block(lambda, slot.block.size, t);
            m.view_mut((slot.offset, slot.offset), (slot.block.size, slot.block.size))
                .copy_from(&e);
        }
        m
    }
}

/// Orthonormal basis of the `count` right singular vectors with smallest
/// singular values, plus the singular values in ascending order.
fn smallest_right_singular<T: ComplexField<RealField = f64>>(
    m: &DMatrix<T>,
    count: usize,
) -> (DMatrix<T>, Vec<f64>) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let sv: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let cols: Vec<DVector<T>> = idx[..count]
        .iter()
        .map(|&i| v_t.row(i).adjoint().into_owned())
        .collect();
    let basis = if cols.is_empty() {
        DMatrix::zeros(m.ncols(), 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    (basis, sv)
}

fn null_space<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, threshold: f64) -> DMatrix<T> {
    let (_, sv) = smallest_right_singular(m, 0);
    let k = sv.iter().filter(|&&s| s <= threshold).count();
    smallest_right_singular(m, k).0
}

/// Orthonormal basis for the column span (rank by relative threshold).
fn orthonormal_span<T: ComplexField<RealField = f64>>(w: &DMatrix<T>) -> DMatrix<T> {
    if w.ncols() == 0 {
        return w.clone();
    }
    let svd = w.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
    let cols: Vec<DVector<T>> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax.max(1e-300))
        .map(|i| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(w.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn hstack<T: ComplexField<RealField = f64>>(parts: &[&DMatrix<T>], rows: usize) -> DMatrix<T> {
    let cols: Vec<DVector<T>> = parts
        .iter()
        .flat_map(|m| (0..m.ncols()).map(move |j| m.column(j).into_owned()))
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(rows, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Jordan chains `[x, Bx, .., B^{k-1}x]` of the nilpotent restriction of `b`
/// to its `m`-dimensional generalized kernel, lifted back to the full space.
/// Each top vector is orthogonal to `ker B^{k-1}`, and each chain is scaled so
/// its eigenvector end has norm `end_norm`.
fn jordan_chains<T: ComplexField<RealField = f64>>(
    b: &DMatrix<T>,
    m: usize,
    end_norm: f64,
) -> Result<Vec<Vec<DVector<T>>>> {
    let n = b.nrows();
    let mut power = DMatrix::<T>::identity(n, n);
    for _ in 0..m {
        power = &power * b;
    }
    let (g, sv) = smallest_right_singular(&power, m);
    // the generalized kernel must be separated from the rest of the spectrum
    if m < n {
        let inside = sv[m - 1];
        let outside = sv[m];
        if !(outside > 1e3 * inside.max(f64::EPSILON * outside)) {
            return Err(Error::DefectiveFormUnresolved {
                condition: outside / inside.max(f64::MIN_POSITIVE),
            });
        }
    }
    // nilpotent restriction C with B G = G C
    let c = g.adjoint() * b * &g;
    let c_norm = c.norm().max(1.0);

    let mut kernels: Vec<DMatrix<T>> = vec![DMatrix::zeros(m, 0)];
    let mut c_power = DMatrix::<T>::identity(m, m);
    while kernels.last().unwrap().ncols() < m {
        if kernels.len() > m {
            return Err(Error::DefectiveFormUnresolved { condition: f64::INFINITY });
        }
        c_power = &c_power * &c;
        let level = kernels.len() as i32;
        let k = null_space(&c_power, RANK_TOL * c_norm.powi(level));
        if k.ncols() < kernels.last().unwrap().ncols() {
            return Err(Error::DefectiveFormUnresolved { condition: f64::INFINITY });
        }
        kernels.push(k);
    }
    let depth = kernels.len() - 1;
    let ge: Vec<usize> = (0..=depth + 1)
        .map(|j| {
            if j == 0 || j > depth {
                0
            } else {
                kernels[j].ncols() - kernels[j - 1].ncols()
            }
        })
        .collect();
    if ge[1..=depth].windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::DefectiveFormUnresolved { condition: f64::INFINITY });
    }

    let apply_power = |x: &DVector<T>, k: usize| {
        let mut y = x.clone();
        for _ in 0..k {
            y = &c * y;
        }
        y
    };
    // chains in the restricted coordinates, by (length, top vector)
    let mut chosen: Vec<(usize, DVector<T>)> = Vec::new();
    for j in (1..=depth).rev() {
        let exact = ge[j] - ge[j + 1];
        if exact == 0 {
            continue;
        }
        let extras: Vec<DVector<T>> = chosen
            .iter()
            .filter(|(len, _)| *len > j)
            .map(|(len, x)| apply_power(x, len - j))
            .collect();
        let extras_m = if extras.is_empty() {
            DMatrix::zeros(m, 0)
        } else {
            DMatrix::from_columns(&extras)
        };
        let w = orthonormal_span(&hstack(&[&kernels[j - 1], &extras_m], m));
        let kj = &kernels[j];
        let projected = kj - &w * (w.adjoint() * kj);
        let svd = projected.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        for &i in idx.iter().take(exact) {
            if svd.singular_values[i] < 1e-6 {
                return Err(Error::DefectiveFormUnresolved {
                    condition: 1.0 / svd.singular_values[i].max(f64::MIN_POSITIVE),
                });
            }
            chosen.push((j, u.column(i).into_owned()));
        }
    }

    let mut chains = Vec::with_capacity(chosen.len());
    for (len, x) in chosen {
        let mut vecs: Vec<DVector<T>> = (0..len).map(|k| &g * apply_power(&x, k)).collect();
        let end = vecs.last().unwrap().clone();
        let end_len = end.norm();
        if !(end_len > 0.0) {
            return Err(Error::DefectiveFormUnresolved { condition: f64::INFINITY });
        }
        // phase: the first entry within 1e-9 of the largest modulus becomes real positive
        let big = end.iter().fold(0.0_f64, |a, z| a.max(z.clone().modulus()));
        let pivot = end
            .iter()
            .find(|z| (*z).clone().modulus() >= big * (1.0 - 1e-9))
            .unwrap()
            .clone();
        let phase = pivot.clone().conjugate().unscale(pivot.modulus());
        let factor = phase.scale(end_norm / end_len);
        for v in vecs.iter_mut() {
            *v *= factor.clone();
        }
        chains.push(vecs);
    }
    Ok(chains)
}

/// Computes the embedding and a numerically derived `D + N` form of `a`.
pub fn complexify(a: &SquareMatrix, tol: f64) -> Result<(ComplexEmbedding, StructuredForm)> {
    let spectrum = eigen_decompose(a, tol)?;
    complexify_with(a, &spectrum)
}

pub fn complexify_with(
    a: &SquareMatrix,
    spectrum: &EigenStructure,
) -> Result<(ComplexEmbedding, StructuredForm)> {
    let n = a.dim();
    let mut real: Vec<(JordanBlock, Vec<DVector<f64>>)> = Vec::new();
    let mut upper: Vec<(JordanBlock, Vec<DVector<Complex64>>)> = Vec::new();
    for cluster in &spectrum.clusters {
        let lambda = cluster.eigenvalue;
        if lambda.im == 0.0 {
            let b = a.as_matrix() - DMatrix::<f64>::identity(n, n) * lambda.re;
            for chain in jordan_chains(&b, cluster.algebraic, 1.0)? {
                real.push((JordanBlock::new(lambda, chain.len()), chain));
            }
        } else if lambda.im > 0.0 {
            let b = a.to_complex() - CMatrix::identity(n, n) * lambda;
            for chain in jordan_chains(&b, cluster.algebraic, std::f64::consts::FRAC_1_SQRT_2)? {
                upper.push((JordanBlock::new(lambda, chain.len()), chain));
            }
        }
    }
    real.sort_by(|x, y| x.0.order(&y.0));
    upper.sort_by(|x, y| x.0.order(&y.0));

    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    for (_, chain) in &real {
        cols.extend(chain.iter().cloned());
    }
    for (_, chain) in &upper {
        for s in chain {
            cols.push(s.map(|z| 2.0 * z.re));
            cols.push(s.map(|z| -2.0 * z.im));
        }
    }
    if cols.len() != n {
        return Err(Error::DefectiveFormUnresolved { condition: f64::INFINITY });
    }
    let basis = DMatrix::from_columns(&cols);
    let form = StructuredForm::assemble(
        Some(a),
        real.iter().map(|(b, _)| *b).collect(),
        upper.iter().map(|(b, _)| *b).collect(),
        basis,
        FormSource::NumericallyComputed,
    )?;
    if form.condition > MAX_BASIS_CONDITION || form.residual > RESIDUAL_TOL * a.norm() {
        return Err(Error::DefectiveFormUnresolved {
            condition: form.condition,
        });
    }
    Ok((form.embedding, form))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigen::DEFAULT_CLUSTER_TOL;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

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
    fn coupled_rotation_complexifies_to_lower_bidiagonal_form() {
        let (emb, form) = complexify(&coupled_a(), DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!((emb.p, emb.q), (0, 4));
        let mut expected = CMatrix::zeros(4, 4);
        expected[(0, 0)] = c(0.0, 1.0);
        expected[(1, 0)] = c(1.0, 0.0);
        expected[(1, 1)] = c(0.0, 1.0);
        expected[(2, 2)] = c(0.0, -1.0);
        expected[(3, 2)] = c(1.0, 0.0);
        expected[(3, 3)] = c(0.0, -1.0);
        assert!((form.jordan() - expected).norm() < 1e-12);
        let recon = form.similarity() * form.jordan() * form.similarity_inverse();
        assert!((recon.map(|z| z.re) - coupled_a().as_matrix()).norm() < 1e-12);
    }

    #[test]
    fn rotation_has_diagonal_form() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let (_, form) = complexify(&a, DEFAULT_CLUSTER_TOL).unwrap();
        let j_prime = form.similarity_inverse() * a.to_complex() * form.similarity();
        let mut expected = CMatrix::zeros(2, 2);
        expected[(0, 0)] = c(0.0, 1.0);
        expected[(1, 1)] = c(0.0, -1.0);
        assert!((j_prime - expected).norm() < 1e-12);
    }

    #[test]
    fn real_spectrum_gives_identity_embedding() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let (emb, form) = complexify(&a, DEFAULT_CLUSTER_TOL).unwrap();
        assert!(emb.is_identity());
        assert_eq!(form.real_blocks(), &[JordanBlock::real(0.0, 2)]);
        assert!((form.basis() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn mixed_blocks_with_repeated_eigenvalue() {
        // J = diag(J_2(1), J_1(1)) conjugated by a well-conditioned basis
        let form = StructuredForm::from_blocks(
            vec![JordanBlock::real(1.0, 2), JordanBlock::real(1.0, 1)],
            vec![],
            Some(DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.0, 1.0, 0.3, 0.2, 0.0, 1.0])),
        )
        .unwrap();
        let a = form.generator().clone();
        let (_, computed) = complexify(&a, DEFAULT_CLUSTER_TOL).unwrap();
        let mut sizes: Vec<usize> = computed.real_blocks().iter().map(|b| b.size).collect();
        sizes.sort();
        assert_eq!(sizes, vec![1, 2]);
        assert!(computed.residual() < 1e-10);
    }

    #[test]
    fn closed_form_flow_matches_jordan_exponential() {
        let (_, form) = complexify(&coupled_a(), DEFAULT_CLUSTER_TOL).unwrap();
        let x = [0.3, -1.2, 0.7, 2.0];
        let out = form.flow_closed_form(1.7, &x);
        let t: f64 = 1.7;
        let (v1, v2, v3, v4) = (x[0], x[1], x[2], x[3]);
        let expected = [
            v1 * t.cos() + v2 * t.sin(),
            v2 * t.cos() - v1 * t.sin(),
            (v3 + t * v1) * t.cos() + (t * v2 + v4) * t.sin(),
            (v4 + t * v2) * t.cos() - (v3 + t * v1) * t.sin(),
        ];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-12);
        }
    }

    #[test]
    fn user_form_must_reproduce_matrix() {
        let a = SquareMatrix::diagonal(&[1.0, 2.0]);
        let bad = StructuredForm::user_provided(
            &a,
            vec![JordanBlock::real(1.0, 1), JordanBlock::real(3.0, 1)],
            vec![],
            DMatrix::identity(2, 2),
        );
        assert!(matches!(bad, Err(Error::InconsistentInputs(_))));
    }
}
