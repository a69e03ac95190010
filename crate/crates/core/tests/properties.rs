//! Property tests for the combinatorial and algebraic invariants.

use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::Arc;

use torus_olp::laurent::LaurentPolynomial;
use torus_olp::longilex::{enumerate_shell, shell_size, LongilexBasis, MultiIndex};
use torus_olp::measure::{polynomial_weight_oracle, FourierOracle, GridOracle, HaarOracle};

fn arb_poly(max_dim: usize, box_radius: i64) -> impl Strategy<Value = LaurentPolynomial> {
    (1..=max_dim).prop_flat_map(move |dim| {
        proptest::collection::vec(
            (
                proptest::collection::vec(-box_radius..=box_radius, dim),
                -2.0f64..2.0,
                -2.0f64..2.0,
            ),
            1..6,
        )
        .prop_map(move |terms| {
            LaurentPolynomial::from_terms(
                dim,
                terms
                    .into_iter()
                    .map(|(alpha, re, im)| (MultiIndex(alpha), Complex64::new(re, im))),
            )
        })
    })
}

/// Append the axis vertices `(+-l(L)) e_a` to the support, which forces
/// nicety by the opposed-vertices sufficient condition.
fn make_nice(poly: &LaurentPolynomial) -> LaurentPolynomial {
    let ell = poly.longitude().unwrap_or(1).max(1) as i64;
    let dim = poly.dim();
    let mut out = poly.clone();
    for a in 1..=dim {
        for sign in [1i64, -1] {
            let mut v = vec![0i64; dim];
            v[a - 1] = sign * ell;
            out = out
                .add(&LaurentPolynomial::monomial(
                    dim,
                    MultiIndex(v),
                    Complex64::new(1.0, 0.0),
                ))
                .unwrap();
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shell_enumeration_is_sorted_and_sized(dim in 1usize..=4, k in 0u32..=7) {
        let shell = enumerate_shell(dim, k);
        prop_assert_eq!(shell.len() as u64, shell_size(dim, k));
        prop_assert!(shell.windows(2).all(|w| w[0] < w[1]));
        for (i, alpha) in shell.iter().enumerate() {
            prop_assert_eq!(alpha.longitude(), k);
            prop_assert_eq!(&shell[shell.len() - 1 - i], &alpha.neg());
        }
    }

    #[test]
    fn longitude_subadditive(a in arb_poly(3, 3), b in arb_poly(3, 3)) {
        prop_assume!(a.dim() == b.dim());
        prop_assume!(!a.is_zero() && !b.is_zero());
        let prod = a.multiply(&b).unwrap();
        prop_assume!(!prod.is_zero());
        prop_assert!(prod.longitude().unwrap() <= a.longitude().unwrap() + b.longitude().unwrap());
    }

    #[test]
    fn nicety_routes_agree(poly in arb_poly(3, 3)) {
        prop_assume!(!poly.is_zero());
        prop_assert_eq!(poly.is_nice().unwrap().nice, poly.nicety_oracle().unwrap());
    }

    #[test]
    fn nice_products_are_nice_with_additive_longitude(a in arb_poly(2, 2), b in arb_poly(2, 2)) {
        prop_assume!(a.dim() == b.dim());
        prop_assume!(!a.is_zero() && !b.is_zero());
        let na = make_nice(&a);
        let nb = make_nice(&b);
        prop_assume!(na.is_nice().unwrap().nice && nb.is_nice().unwrap().nice);
        let prod = na.multiply(&nb).unwrap();
        prop_assert!(!prod.is_zero());
        prop_assert_eq!(
            prod.longitude().unwrap(),
            na.longitude().unwrap() + nb.longitude().unwrap()
        );
        prop_assert!(prod.is_nice().unwrap().nice);
    }

    #[test]
    fn torus_real_weights_evaluate_real(poly in arb_poly(2, 2), t1 in 0.0f64..6.28, t2 in 0.0f64..6.28) {
        prop_assume!(!poly.is_zero());
        // symmetrize to make it torus-real: L + conj-reflected L
        let reflected = LaurentPolynomial::from_terms(
            poly.dim(),
            poly.terms().map(|(a, c)| (a.neg(), c.conj())),
        );
        let sym = poly.add(&reflected).unwrap();
        prop_assume!(sym.is_torus_real());
        let theta = vec![t1, t2][..poly.dim()].to_vec();
        prop_assert!(sym.evaluate_angles(&theta).im.abs() < 1e-12);
    }

    #[test]
    fn chi_entries_pair_to_reciprocals(k in 1u32..=4, t1 in 0.0f64..6.28, t2 in 0.0f64..6.28) {
        let basis = LongilexBasis::new(2, k);
        let z = [Complex64::from_polar(1.0, t1), Complex64::from_polar(1.0, t2)];
        let chi = basis.chi(&z).unwrap();
        for alpha in basis.iter() {
            let i = basis.global_index(alpha).unwrap();
            let j = basis.global_index(&alpha.neg()).unwrap();
            prop_assert!((chi[i] * chi[j] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn grid_oracle_agrees_with_exact_convolution(poly in arb_poly(2, 2)) {
        prop_assume!(poly.dim() == 2 && !poly.is_zero());
        // symmetrized positive weight: |coeffs| dominated by a constant
        let reflected = LaurentPolynomial::from_terms(
            2,
            poly.terms().map(|(a, c)| (a.neg(), c.conj())),
        );
        let sym = poly.add(&reflected).unwrap();
        prop_assume!(!sym.is_zero());
        let bulk: f64 = sym.terms().map(|(_, c)| c.norm()).sum();
        let weight = sym
            .add(&LaurentPolynomial::constant(2, Complex64::new(2.0 * bulk + 1.0, 0.0)))
            .unwrap();
        let exact = polynomial_weight_oracle(Arc::new(HaarOracle::new(2)), &weight).unwrap();
        let w = weight.clone();
        let grid = GridOracle::new(
            2,
            GridOracle::default_grid_size(3),
            Arc::new(move |th: &[f64]| w.evaluate_angles(th)),
            true,
            true,
        );
        let basis = LongilexBasis::new(2, 3);
        for alpha in basis.iter() {
            let d = (grid.coeff(alpha).unwrap() - exact.coeff(alpha).unwrap()).norm();
            prop_assert!(d < 1e-12, "alpha {:?} differs by {}", alpha, d);
        }
    }
}
