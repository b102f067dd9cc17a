use proptest::prelude::*;

use serrin_core::geometry::{christoffel, geodesic_distance, reflect, riemannian_hessian, Point, SpaceForm};
use serrin_core::io::{fmt9, parse_key_values, write_report};
use serrin_core::linalg::SymMatrix;
use serrin_core::pucci::{
    k_matrix, k_spectrum_closed_form, pucci_minus, pucci_oracle, pucci_plus, OracleMode, PucciParams,
};

fn sym(n: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-5.0f64..5.0, n * n)
        .prop_map(move |v| SymMatrix::from_fn(n, |i, j| v[i.min(j) * n + i.max(j)]))
}

fn params() -> impl Strategy<Value = PucciParams> {
    (0.1f64..3.0, 1.0f64..8.0, 0.0f64..2.0).prop_map(|(l, r, k)| PucciParams::new(l, l * r, k).unwrap())
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-10 * (1.0 + scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pucci_homogeneity_and_duality(m in sym(4), p in params(), t in 0.0f64..10.0) {
        let s = m.frobenius_norm();
        prop_assert!(close(pucci_minus(&m.scale(t), &p), t * pucci_minus(&m, &p), t * s));
        prop_assert!(close(pucci_minus(&m, &p), -pucci_plus(&m.neg(), &p), s));
        prop_assert!(pucci_minus(&m, &p) <= pucci_plus(&m, &p) + 1e-12 * (1.0 + s));
    }

    #[test]
    fn pucci_sub_and_superadditive(a in sym(3), b in sym(3), p in params()) {
        let s = a.frobenius_norm() + b.frobenius_norm();
        let ab = pucci_minus(&a.add(&b), &p);
        prop_assert!(pucci_minus(&a, &p) + pucci_minus(&b, &p) <= ab + 1e-10 * (1.0 + s));
        prop_assert!(ab <= pucci_minus(&a, &p) + pucci_plus(&b, &p) + 1e-10 * (1.0 + s));
    }

    #[test]
    fn pucci_is_monotone_in_psd_direction(a in sym(3), v in prop::collection::vec(-2.0f64..2.0, 3), p in params()) {
        let psd = SymMatrix::from_fn(3, |i, j| v[i] * v[j]);
        let s = a.frobenius_norm() + psd.frobenius_norm();
        prop_assert!(pucci_minus(&a.add(&psd), &p) >= pucci_minus(&a, &p) - 1e-10 * (1.0 + s));
        // λ|P| ≤ M⁻(A + P) − M⁻(A) ≤ Λ|P| for P ⪰ 0
        let gain = pucci_minus(&a.add(&psd), &p) - pucci_minus(&a, &p);
        prop_assert!(gain <= p.big_lambda * psd.trace() + 1e-10 * (1.0 + s));
        prop_assert!(gain >= p.lambda * psd.trace() - 1e-10 * (1.0 + s));
    }

    #[test]
    fn random_only_oracle_never_undercuts(m in sym(3), p in params(), seed in any::<u64>()) {
        let sampled = pucci_oracle(&m, &p, 64, seed, OracleMode::RandomOnly).unwrap();
        prop_assert!(sampled >= pucci_minus(&m, &p) - 1e-10 * (1.0 + m.frobenius_norm()));
    }

    #[test]
    fn k_spectrum_matches_eigenvalues(g in prop::collection::vec(-10.0f64..10.0, 2..7)) {
        let closed = k_spectrum_closed_form(&g).unwrap();
        let numeric = k_matrix(&g).eigenvalues();
        let scale = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for (a, b) in closed.eigenvalues.iter().zip(&numeric.eigenvalues) {
            prop_assert!(close(*a, *b, scale), "{:?} vs {:?}", closed, numeric);
        }
    }

    #[test]
    fn reflection_is_an_involutive_isometry(
        s in -2.0f64..2.0,
        a in prop::collection::vec(-3.0f64..3.0, 1),
        b in prop::collection::vec(-3.0f64..3.0, 1),
        ha in 0.05f64..4.0,
        hb in 0.05f64..4.0,
    ) {
        let space = SpaceForm::hyperbolic(2).unwrap();
        let x = Point::new(vec![a[0], ha]).unwrap();
        let y = Point::new(vec![b[0], hb]).unwrap();
        prop_assert_eq!(reflect(s, &reflect(s, &x)).coords()[1], x.coords()[1]);
        prop_assert!((reflect(s, &reflect(s, &x)).coords()[0] - x.coords()[0]).abs() < 1e-14);
        let d = geodesic_distance(&space, &x, &y).unwrap();
        let dr = geodesic_distance(&space, &reflect(s, &x), &reflect(s, &y)).unwrap();
        prop_assert!((d - dr).abs() <= 1e-12 * (1.0 + d));
        prop_assert!((d - geodesic_distance(&space, &y, &x).unwrap()).abs() <= 1e-14 * (1.0 + d));
    }

    #[test]
    fn christoffel_symbols_are_symmetric(x in prop::collection::vec(-2.0f64..2.0, 3), last in 0.1f64..3.0) {
        let p = Point::new(vec![x[0], x[1], last]).unwrap();
        for space in [SpaceForm::hyperbolic(3).unwrap(), SpaceForm::sphere(3).unwrap()] {
            let g = christoffel(&space, &p).unwrap();
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        prop_assert_eq!(g.get(k, i, j), g.get(k, j, i));
                    }
                }
            }
        }
    }

    #[test]
    fn riemannian_hessian_is_linear(
        g1 in prop::collection::vec(-3.0f64..3.0, 2),
        g2 in prop::collection::vec(-3.0f64..3.0, 2),
        h1 in sym(2),
        h2 in sym(2),
        t in -3.0f64..3.0,
        x2 in 0.2f64..3.0,
    ) {
        let space = SpaceForm::hyperbolic(2).unwrap();
        let x = Point::new(vec![0.3, x2]).unwrap();
        let g: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + t * b).collect();
        let lhs = riemannian_hessian(&space, &x, &g, &h1.add(&h2.scale(t))).unwrap();
        let rhs = riemannian_hessian(&space, &x, &g1, &h1).unwrap().add(&riemannian_hessian(&space, &x, &g2, &h2).unwrap().scale(t));
        prop_assert!(lhs.sub(&rhs).frobenius_norm() <= 1e-10 * (1.0 + lhs.frobenius_norm()));
    }

    #[test]
    fn fmt9_keeps_nine_significant_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = fmt9(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-9 * x.abs(), "{} -> {}", x, fmt9(x));
    }

    #[test]
    fn report_roundtrip(values in prop::collection::vec(-1e6f64..1e6, 1..8)) {
        let entries: Vec<(String, String)> = values.iter().enumerate().map(|(i, v)| (format!("key_{i}"), fmt9(*v))).collect();
        let mut buf = Vec::new();
        write_report(&mut buf, &entries).unwrap();
        prop_assert_eq!(parse_key_values(std::str::from_utf8(&buf).unwrap()).unwrap(), entries);
    }
}
