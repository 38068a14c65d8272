//! Property tests for the structural invariants: norm axioms, structure
//! preservation under the matrix calculus, serialization round trips,
//! and the homological residual on random Hermitian Fourier data.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qho_kam::homological::{divisor, solve_homological};
use qho_kam::matrix_spaces::{
    alpha_norm, comm_with_n, difference, mat_mul, op_norm, parse_text, write_text, MatrixStructure,
    TruncMatrix,
};
use qho_kam::perturbation::FourierMatrix;

fn complex_entries(dim: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    proptest::collection::vec(
        (
            proptest::num::f64::NORMAL.prop_map(|x| x % 10.0),
            proptest::num::f64::NORMAL.prop_map(|x| x % 10.0),
        ),
        dim * dim,
    )
    .prop_map(move |vals| {
        DMatrix::from_fn(dim, dim, |i, j| {
            let (re, im) = vals[i * dim + j];
            Complex64::new(re, im)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermitize_then_calculus_preserves_structure(entries in complex_entries(8)) {
        let h = TruncMatrix::hermitize(entries);
        let dh = difference(&h).unwrap();
        prop_assert_eq!(dh.structure(), MatrixStructure::Hermitian);
        let c = comm_with_n(&h);
        prop_assert_eq!(c.structure(), MatrixStructure::AntiHermitian);
        // verified, not just flagged
        let dev = c.add(&c.adjoint()).max_abs_entry();
        prop_assert!(dev <= 1e-12 * (1.0 + c.max_abs_entry()));
    }

    #[test]
    fn alpha_norm_axioms(entries in complex_entries(7), alpha in 0.0f64..1.0) {
        let a = TruncMatrix::general(entries.clone());
        let b = TruncMatrix::general(entries.map(|z| z * Complex64::new(0.5, 0.25)));
        // homogeneity under scaling
        let scaled = a.scale(Complex64::new(3.0, 0.0));
        prop_assert!((alpha_norm(&scaled, alpha) - 3.0 * alpha_norm(&a, alpha)).abs()
            <= 1e-9 * (1.0 + alpha_norm(&a, alpha)));
        // triangle inequality
        let sum = a.add(&b);
        prop_assert!(alpha_norm(&sum, alpha)
            <= alpha_norm(&a, alpha) + alpha_norm(&b, alpha) + 1e-9);
        // alpha = 0 is the sup of entry magnitudes
        prop_assert!((alpha_norm(&a, 0.0) - a.max_abs_entry()).abs() <= 1e-12);
    }

    #[test]
    fn op_norm_submultiplicative(ea in complex_entries(6), eb in complex_entries(6)) {
        let a = TruncMatrix::general(ea);
        let b = TruncMatrix::general(eb);
        let ab = mat_mul(&a, &b);
        prop_assert!(op_norm(&ab) <= op_norm(&a) * op_norm(&b) * (1.0 + 1e-8) + 1e-12);
    }

    #[test]
    fn text_roundtrip_exact(entries in complex_entries(5), alpha in 0.0f64..1.0) {
        let m = TruncMatrix::hermitize(entries);
        let text = write_text(&m, alpha);
        let (back, alpha2) = parse_text(&text).unwrap();
        prop_assert_eq!(alpha.to_bits(), alpha2.to_bits());
        prop_assert_eq!(m.entries(), back.entries());
    }

    #[test]
    fn divisor_antisymmetry(
        w in 0.0f64..std::f64::consts::TAU,
        k in -20i32..20,
        i in 1usize..200,
        j in 1usize..200,
    ) {
        let li = (2 * i - 1) as f64;
        let lj = (2 * j - 1) as f64;
        let d1 = divisor(&[w], &[k], li, lj);
        let d2 = divisor(&[w], &[-k], lj, li);
        prop_assert!((d1 + d2).abs() <= 1e-12 * (1.0 + d1.abs()));
    }

    #[test]
    fn homological_residual_on_random_hermitian_data(
        entries in complex_entries(6),
        w in 0.31f64..0.35,
        scale in 1e-6f64..1e-2,
    ) {
        // random Hermitian mode pair (k, -k) plus a Hermitian average,
        // solved at a frequency bounded away from the low resonances
        let dim = 6;
        let base = TruncMatrix::hermitize(entries);
        let max = base.max_abs_entry().max(1e-12);
        let m1 = base.scale(Complex64::new(scale / max, 0.0));
        let mut pf = FourierMatrix::new(1, 2, 5);
        pf.insert(vec![0], m1.clone());
        pf.insert(vec![1], m1.scale(Complex64::new(0.5, 0.0)));
        pf.insert(vec![-1], m1.scale(Complex64::new(0.5, 0.0)).adjoint());
        let a = TruncMatrix::oscillator_diagonal(dim);
        let sol = solve_homological(&a, &pf, &[w], 2.0).unwrap();
        prop_assert!(sol.residual_norm <= 1e-12 * sol.residual_scale.max(1e-300));
        // S anti-Hermitian as a θ-function at a real angle
        let s = sol.s.resynthesize(&[1.234]);
        let dev = s.add(&s.adjoint()).max_abs_entry();
        prop_assert!(dev <= 1e-13 * (1.0 + s.max_abs_entry()));
        // Ã is the diagonal of the zero mode
        for i in 1..=dim {
            let want = pf.coeff(&[0]).unwrap().entry(i, i).re;
            prop_assert!((sol.a_tilde.entry(i, i).re - want).abs() <= 1e-15);
        }
    }
}
