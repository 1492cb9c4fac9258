//! Clustered eigenstructure of a real matrix.

use std::cmp::Ordering;

use nalgebra::linalg::Schur;
use nalgebra::{ComplexField, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, Complex64, SquareMatrix};

const SCHUR_MAX_ITER: usize = 10_000;

/// Default relative clustering tolerance (multiplied by `max(||A||, 1)`).
///
/// Eigenvalues of an `m x m` Jordan block move by `O(eps^{1/m})` under
/// rounding, so exact-spectrum comparisons at `1e-9` would split them.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;

/// Relative singular-value threshold for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EigenCluster {
    #[serde(with = "crate::serde_complex")]
    pub eigenvalue: Complex64,
    pub algebraic: usize,
    pub geometric: usize,
    pub real_part_zero: bool,
    pub imag_part_zero: bool,
}

impl EigenCluster {
    pub fn is_defective(&self) -> bool {
        self.geometric < self.algebraic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EigenStructure {
    pub clusters: Vec<EigenCluster>,
    pub diagonalizable: bool,
    pub clustering_tolerance: f64,
}

impl EigenStructure {
    pub fn dimension(&self) -> usize {
        self.clusters.iter().map(|c| c.algebraic).sum()
    }

    /// Clusters with strictly positive imaginary part.
    pub fn upper(&self) -> impl Iterator<Item = &EigenCluster> {
        self.clusters.iter().filter(|c| c.eigenvalue.im > 0.0)
    }

    pub fn real(&self) -> impl Iterator<Item = &EigenCluster> {
        self.clusters.iter().filter(|c| c.imag_part_zero)
    }
}

/// Ordering used whenever a "first" block or cluster must be picked:
/// nonzero real part first, then non-real before real, then by modulus,
/// then by decreasing real and imaginary part.
pub fn canonical_order(a: Complex64, a_size: usize, b: Complex64, b_size: usize) -> Ordering {
    let key = |z: Complex64| (z.re == 0.0, z.im == 0.0);
    key(a)
        .cmp(&key(b))
        .then(a.norm().total_cmp(&b.norm()))
        .then(a_size.cmp(&b_size))
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

/// Raw eigenvalues (with multiplicity) from a real Schur decomposition.
pub fn eigenvalues(a: &SquareMatrix) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(a.as_matrix().clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or(
        Error::NonConvergence {
            iterations: SCHUR_MAX_ITER,
        },
    )?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

pub fn max_abs_real_part(a: &SquareMatrix) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .fold(0.0_f64, |m, z| m.max(z.re.abs())))
}

/// Number of singular values of `b` at or below `threshold`.
pub fn nullity<T: ComplexField<RealField = f64>>(b: &DMatrix<T>, threshold: f64) -> usize {
    b.clone()
        .singular_values()
        .iter()
        .filter(|&&s| s <= threshold)
        .count()
}

pub(crate) fn cluster_threshold(a: &SquareMatrix, tol: f64) -> f64 {
    tol * a.norm().max(1.0)
}

/// Clusters eigenvalues within `tol * max(||A||, 1)` (single linkage), snaps
/// near-zero real and imaginary parts to exact zeros, and pairs non-real
/// clusters with exact conjugates.
pub fn eigen_decompose(a: &SquareMatrix, tol: f64) -> Result<EigenStructure> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("clustering tolerance must be > 0, got {tol}")));
    }
    let raw = eigenvalues(a)?;
    let thr = cluster_threshold(a, tol);

    // single-linkage clustering via union-find
    let n = raw.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let next = p[j];
            p[j] = r;
            j = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (raw[i] - raw[j]).norm() <= thr {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    let mut root_index: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_index[r] {
            Some(g) => groups[g].push(raw[i]),
            None => {
                root_index[r] = Some(groups.len());
                groups.push(vec![raw[i]]);
            }
        }
    }

    let snap = |z: Complex64| {
        Complex64::new(
            if z.re.abs() <= thr { 0.0 } else { z.re },
            if z.im.abs() <= thr { 0.0 } else { z.im },
        )
    };
    let mut centres: Vec<(Complex64, usize)> = groups
        .iter()
        .map(|g| {
            let sum: Complex64 = g.iter().sum();
            (snap(sum / g.len() as f64), g.len())
        })
        .collect();

    // exact conjugate pairing
    let mut paired: Vec<(Complex64, usize)> = Vec::new();
    let mut used = vec![false; centres.len()];
    for i in 0..centres.len() {
        let (z, m) = centres[i];
        if used[i] || z.im < 0.0 {
            continue;
        }
        used[i] = true;
        if z.im == 0.0 {
            paired.push((z, m));
            continue;
        }
        let partner = (0..centres.len())
            .filter(|&j| !used[j] && centres[j].0.im < 0.0)
            .min_by(|&j, &k| {
                (centres[j].0 - z.conj())
                    .norm()
                    .total_cmp(&(centres[k].0 - z.conj()).norm())
            })
            .filter(|&j| centres[j].1 == m)
            .ok_or_else(|| {
                Error::InconsistentInputs(format!(
                    "eigenvalue cluster {z} (multiplicity {m}) has no conjugate partner"
                ))
            })?;
        used[partner] = true;
        let mean = (z + centres[partner].0.conj()) / 2.0;
        paired.push((mean, m));
        paired.push((mean.conj(), m));
    }
    if let Some(j) = (0..centres.len()).find(|&j| !used[j]) {
        return Err(Error::InconsistentInputs(format!(
            "eigenvalue cluster {} has no conjugate partner",
            centres[j].0
        )));
    }
    centres = paired;

    let rank_thr = RANK_TOL * a.norm().max(1.0);
    let mut clusters: Vec<EigenCluster> = centres
        .into_iter()
        .map(|(z, m)| {
            let geometric = if z.im == 0.0 {
                let b = a.as_matrix() - DMatrix::<f64>::identity(a.dim(), a.dim()) * z.re;
                nullity(&b, rank_thr)
            } else {
                let b: CMatrix = a.to_complex() - CMatrix::identity(a.dim(), a.dim()) * z;
                nullity(&b, rank_thr)
            };
            EigenCluster {
                eigenvalue: z,
                algebraic: m,
                geometric: geometric.clamp(1, m),
                real_part_zero: z.re == 0.0,
                imag_part_zero: z.im == 0.0,
            }
        })
        .collect();
    clusters.sort_by(|x, y| canonical_order(x.eigenvalue, 0, y.eigenvalue, 0));
    let diagonalizable = clusters.iter().all(|c| !c.is_defective());
    Ok(EigenStructure {
        clusters,
        diagonalizable,
        clustering_tolerance: thr,
    })
}
