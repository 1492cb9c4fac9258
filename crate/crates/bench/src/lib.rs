//! Generators for benchmark inputs.

use dilind_core::SquareMatrix;

/// The 4x4 generator with a nilpotent coupling between two rotations.
pub fn coupled_rotation() -> SquareMatrix {
    SquareMatrix::from_rows(&[
        vec![0.0, 1.0, 0.0, 0.0],
        vec![-1.0, 0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 1.0],
        vec![0.0, 1.0, -1.0, 0.0],
    ])
    .expect("fixed matrix is valid")
}

/// Block diagonal generator with `k` planar rotations at speeds `1..=k`.
pub fn rotations(k: usize) -> SquareMatrix {
    let n = 2 * k;
    let mut rows = vec![vec![0.0; n]; n];
    for j in 0..k {
        let b = (j + 1) as f64;
        rows[2 * j][2 * j + 1] = b;
        rows[2 * j + 1][2 * j] = -b;
    }
    SquareMatrix::from_rows(&rows).expect("rotation generator is valid")
}

/// `diag(1, .., 1)` plus a subdiagonal shear: a single expanding Jordan block.
pub fn expanding_block(n: usize) -> SquareMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        rows[i][i] = 1.0;
        if i > 0 {
            rows[i][i - 1] = 1.0;
        }
    }
    SquareMatrix::from_rows(&rows).expect("block generator is valid")
}
