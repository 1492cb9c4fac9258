use dilind_core::functions::{Phi, TestFunction};
use dilind_core::measure::SectionMeasure;
use dilind_core::spectral::{JordanBlock, DEFAULT_CLUSTER_TOL};
use dilind_core::{
    apply_d, build_cross_section, complexify, det_exp, isotropy_of, matrix_exp, restrict_to_orbit,
    Complex64, Error, IsotropyClass, SquareMatrix, StructuredForm,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn bounded_matrix() -> impl Strategy<Value = SquareMatrix> {
    (1usize..=6)
        .prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0f64..1.0, n * n), 0.0f64..2.0))
        .prop_map(|(n, entries, target)| {
            let m = DMatrix::from_row_slice(n, n, &entries);
            let norm = m.norm();
            let m = if norm > 0.0 { m * (target / norm) } else { m };
            SquareMatrix::new(m).unwrap()
        })
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

/// Real blocks with eigenvalues in [-1, 1] and at most one upper block, in a
/// perturbed basis.
fn block_spec() -> impl Strategy<Value = StructuredForm> {
    let real = prop::collection::vec((-4i32..=4, 1usize..=2), 0..=2);
    let upper = prop::option::of((-4i32..=4, 1i32..=3, 1usize..=2));
    (real, upper)
        .prop_filter("nonempty", |(r, u)| !r.is_empty() || u.is_some())
        .prop_flat_map(|(real, upper)| {
            let n: usize = real.iter().map(|b| b.1).sum::<usize>() + upper.map_or(0, |u| 2 * u.2);
            (Just(real), Just(upper), prop::collection::vec(-0.3f64..0.3, n * n))
        })
        .prop_map(|(real, upper, pert)| {
            let real: Vec<JordanBlock> = real
                .into_iter()
                .map(|(l, s)| JordanBlock::real(l as f64 / 4.0, s))
                .collect();
            let upper: Vec<JordanBlock> = upper
                .into_iter()
                .map(|(re, im, s)| JordanBlock::new(Complex64::new(re as f64 / 4.0, im as f64 / 2.0), s))
                .collect();
            let n = (pert.len() as f64).sqrt() as usize;
            let basis = DMatrix::identity(n, n) + DMatrix::from_row_slice(n, n, &pert);
            StructuredForm::from_blocks(real, upper, Some(basis)).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponential_group_law(a in bounded_matrix(), s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let lhs = matrix_exp(&a, s + t).unwrap();
        let rhs = matrix_exp(&a, s).unwrap().as_matrix() * matrix_exp(&a, t).unwrap().as_matrix();
        prop_assert!(rel(lhs.as_matrix(), &rhs) <= 1e-8);
        let inv = matrix_exp(&a, -t).unwrap().as_matrix() * matrix_exp(&a, t).unwrap().as_matrix();
        prop_assert!(rel(&DMatrix::identity(a.dim(), a.dim()), &inv) <= 1e-8);
    }

    #[test]
    fn determinant_is_exponential_of_trace(a in bounded_matrix(), t in -3.0f64..3.0) {
        let det = matrix_exp(&a, t).unwrap().as_matrix().determinant();
        let expected = det_exp(&a, t);
        prop_assert!((det - expected).abs() <= 1e-8 * expected.abs());
    }

    #[test]
    fn complexified_form_conjugates_back(a in bounded_matrix()) {
        match complexify(&a, DEFAULT_CLUSTER_TOL) {
            Ok((_, form)) => {
                let back = form.similarity() * form.jordan() * form.similarity_inverse();
                let err = (back.map(|z| z.re) - a.as_matrix()).norm();
                let imag = back.map(|z| z.im).norm();
                let scale = a.norm().max(1.0) * form.condition().max(1.0);
                prop_assert!(err <= 1e-10 * scale && imag <= 1e-10 * scale, "err {err:e} imag {imag:e}");
                let x: Vec<f64> = (0..a.dim()).map(|i| (i as f64 * 0.7).sin() + 0.1).collect();
                let y = form.from_iota(&form.to_iota(&x));
                let d: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                prop_assert!(d <= 1e-10 * form.condition().max(1.0));
            }
            Err(Error::DefectiveFormUnresolved { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn cross_section_is_equivariant(form in block_spec(), seed in 0u64..1000) {
        let (iso, _) = match isotropy_of(&form) {
            Ok(r) => r,
            Err(Error::NotRationallyRelated { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        if iso != IsotropyClass::Trivial {
            return Ok(());
        }
        let cs = build_cross_section(&form, &iso).unwrap();
        let a = form.generator();
        let s_inv = form.similarity_inverse().map(|z| z.norm()).norm();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..40 {
            let v: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            if !cs.omega().contains(&v) {
                continue;
            }
            let s = rng.random_range(-3.0..3.0);
            let moved = matrix_exp(a, s).unwrap().apply(&v);
            prop_assert!(cs.omega().contains(&moved));
            // section times with |t| max|Re λ| > 700 are refused, not computed
            let ((t, sigma), (t_moved, sigma_moved)) = match (cs.section(&v), cs.section(&moved)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(Error::OverflowRisk { .. }), _) | (_, Err(Error::OverflowRisk { .. })) => continue,
                (Err(e), _) | (_, Err(e)) => return Err(TestCaseError::fail(e.to_string())),
            };
            // the pivot modulus is flow-invariant; once rounding in sigma swamps it,
            // sigma no longer determines its orbit numerically
            let pivot = cs.pivot_coordinates(&v).0.map_or(1.0, |p| p.norm());
            if f64::EPSILON * s_inv * norm2(&sigma) > 1e-3 * pivot {
                continue;
            }
            let (_, sigma_twice) = cs.section(&sigma).unwrap();
            // rounding in z_k(sigma) is divided by |z_{k-1}(sigma)| to give a time error
            let sn = norm2(&sigma);
            let amp = match cs.pivot_coordinates(&sigma).0 {
                Some(prev) => 1.0 + a.norm() * s_inv * sn * (sn + norm2(&v)) / (prev.norm() * (1.0 + sn)),
                None => 1.0 + a.norm() * s_inv * (sn + norm2(&v)),
            };
            let tol = 1e-8 + 256.0 * f64::EPSILON * amp;
            prop_assert!(dist(&sigma_moved, &sigma) / (1.0 + sn) <= tol);
            prop_assert!(dist(&sigma_twice, &sigma) / (1.0 + sn) <= tol);
            prop_assert!((t_moved - (t - s)).abs() / (1.0 + t.abs()) <= tol);
        }
    }

    #[test]
    fn restriction_translates(v in prop::collection::vec(-2.0f64..2.0, 2), s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let phi = Phi::new(TestFunction::Gaussian { center: Some(vec![0.3, -0.2]), scale: 1.5 }, 2).unwrap();
        let a = SquareMatrix::from_rows(&[vec![0.5, 1.0], vec![-1.0, 0.2]]).unwrap();
        let r = restrict_to_orbit(&phi, &a, &v).unwrap();
        let shifted = r.shifted(s).unwrap();
        prop_assert!((shifted.eval(t).unwrap() - r.eval(t + s).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn d_vanishes_exactly_where_phi_does(w2 in -3.0f64..3.0, sheet in prop::bool::ANY, t in -2.0f64..2.0) {
        let a = SquareMatrix::diagonal(&[1.0, -1.0]);
        let (_, form) = complexify(&a, DEFAULT_CLUSTER_TOL).unwrap();
        let (iso, _) = isotropy_of(&form).unwrap();
        let measure = SectionMeasure::new(&build_cross_section(&form, &iso).unwrap()).unwrap();
        let w = [if sheet { 1.0 } else { -1.0 }, w2];
        let phi = Phi::new(TestFunction::BallIndicator { shape_matrix: None }, 2).unwrap();
        let d = apply_d(&phi, &measure, 1.0, &w, t).unwrap();
        let inside = phi.eval(&matrix_exp(&a, t).unwrap().apply(&w)) != 0.0;
        prop_assert_eq!(d != 0.0, inside);
        prop_assert!(d >= 0.0);
    }
}
