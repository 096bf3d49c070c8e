use devissage::minkowski::*;
use proptest::prelude::*;

fn close(a: &MinkowskiVector, b: &MinkowskiVector, tol: f64) -> bool {
    let scale = a.euclidean_norm().max(b.euclidean_norm()).max(1.0);
    a.sub(b).euclidean_norm() <= tol * scale
}

fn vectors(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, d + 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn translations_compose(h1 in prop::collection::vec(-5.0..5.0f64, 3), h2 in prop::collection::vec(-5.0..5.0f64, 3)) {
        let sum: Vec<f64> = h1.iter().zip(&h2).map(|(a, b)| a + b).collect();
        let product = translation_matrix(&h1).mul(&translation_matrix(&h2));
        let direct = translation_matrix(&sum);
        prop_assert!(product.max_abs_diff(&direct) <= 1e-12 * direct.max_abs_entry());
    }

    #[test]
    fn boosts_compose(a in -5.0..5.0f64, b in -5.0..5.0f64) {
        let product = boost_matrix(a, 3).mul(&boost_matrix(b, 3));
        let direct = boost_matrix(a + b, 3);
        prop_assert!(product.max_abs_diff(&direct) <= 1e-12 * direct.max_abs_entry());
    }

    #[test]
    fn group_elements_preserve_the_form(h in prop::collection::vec(-3.0..3.0f64, 2), a in -3.0..3.0f64,
                                         x in vectors(3), y in vectors(3)) {
        let m = translation_matrix(&h).mul(&boost_matrix(a, 3));
        prop_assert!(m.isometry_defect() <= 1e-12 * m.max_abs_entry().powi(2));
        let x = MinkowskiVector::new(x).unwrap();
        let y = MinkowskiVector::new(y).unwrap();
        let before = x.lorentz(&y).unwrap();
        let after = m.apply(&x).lorentz(&m.apply(&y)).unwrap();
        let scale = m.apply(&x).euclidean_norm() * m.apply(&y).euclidean_norm();
        prop_assert!((before - after).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn chart_stays_on_sheet(alpha in -20.0..20.0f64, h in prop::collection::vec(-1e3..1e3f64, 3)) {
        let p = iwasawa_point(&IwasawaCoords { alpha, h });
        let v = p.vector();
        let parts = lightlike_decompose(v);
        let q = parts.lorentz(&parts);
        prop_assert!(v.components()[0] > 0.0);
        prop_assert!((q - 1.0).abs() <= 1e-12 * v.euclidean_norm().powi(2).max(1.0));
    }

    #[test]
    fn lightlike_roundtrip(x in vectors(4)) {
        let v = MinkowskiVector::new(x).unwrap();
        prop_assert!(close(&lightlike_recompose(&lightlike_decompose(&v)), &v, 1e-15));
    }

    #[test]
    fn stereographic_light_ray(h in prop::collection::vec(-50.0..50.0f64, 2)) {
        // T_h(e_0 + e_1) = (1 + |h|²)(e_0 + θ(h)).
        let d = h.len() + 1;
        let ray = MinkowskiVector::basis(d, 0).add(&MinkowskiVector::basis(d, 1));
        let image = translation_matrix(&h).apply(&ray);
        let h2: f64 = h.iter().map(|x| x * x).sum();
        let mut expected = vec![1.0];
        expected.extend(stereographic(&h));
        let expected = MinkowskiVector::new(expected).unwrap().scale(1.0 + h2);
        prop_assert!(close(&image, &expected, 1e-12));
        let theta = stereographic(&h);
        let norm: f64 = theta.iter().map(|x| x * x).sum();
        prop_assert!((norm - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn chart_is_translation_covariant(alpha in -5.0..5.0f64, h in prop::collection::vec(-5.0..5.0f64, 2),
                                      g in prop::collection::vec(-5.0..5.0f64, 2)) {
        let moved: Vec<f64> = h.iter().zip(&g).map(|(a, b)| a + b).collect();
        let lhs = translation_matrix(&g).apply(iwasawa_point(&IwasawaCoords { alpha, h }).vector());
        let rhs = iwasawa_point(&IwasawaCoords { alpha, h: moved });
        prop_assert!(close(&lhs, rhs.vector(), 1e-12));
    }
}
