use geomq::adapted::{area_ratio_exact, det_expansion_order, vq_numeric_fd, FdOptions, OffsetFrame};
use geomq::geometry::{curvature_forms, normal_frame, registry, Chart, FormSet};
use geomq::potentials::{
    compare_potentials, vq_codim1, vq_dacosta_2d, vq_general_invariant, vq_general_paper,
};
use geomq::random;
use geomq::solver::{
    layer_operator, layer_spectrum_curve, shell_radial_operator, surface_operator, surface_spectrum,
    ThinLayerScenario,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn forms_strategy() -> impl Strategy<Value = FormSet> {
    (1usize..=3, 1usize..=3)
        .prop_flat_map(|(m, codim)| prop::collection::vec(prop::collection::vec(-1.0f64..1.0, m * m), codim).prop_map(move |raw| (m, raw)))
        .prop_map(|(m, raw)| {
            let forms = raw
                .into_iter()
                .map(|v| {
                    let a = DMatrix::from_vec(m, m, v);
                    (&a + a.transpose()) * 0.5
                })
                .collect();
            FormSet::new(forms).unwrap()
        })
}

fn invariants(chart: &Chart, u: &[f64]) -> (f64, f64, f64) {
    let k = curvature_forms(chart, u).unwrap().principal.unwrap();
    (vq_codim1(&k), k[0] * k[1], (k[0] + k[1]).abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn curvature_invariants_survive_rigid_motions(seed in any::<u64>(), motion in any::<u64>(), x in -0.3f64..0.3, y in -0.3f64..0.3) {
        let chart = registry::build(&format!("random_quadric:seed={seed}")).unwrap();
        let mut rng = random::stream(motion, 0);
        let q = random::rotation(&mut rng, 3);
        let t = DVector::from_fn(3, |_, _| random::uniform(&mut rng, -5.0, 5.0));
        let moved = chart.rigidly_moved(&q, &t).unwrap();
        let (a, b) = (invariants(&chart, &[x, y]), invariants(&moved, &[x, y]));
        prop_assert!((a.0 - b.0).abs() <= 1e-7 && (a.1 - b.1).abs() <= 1e-7 && (a.2 - b.2).abs() <= 1e-7);
    }

    #[test]
    fn curve_potential_ignores_parametrization(c in -0.6f64..0.6, s in 0.0f64..6.28, b in 0.3f64..1.5) {
        let ellipse = registry::build(&format!("ellipse:a=1,b={b}")).unwrap();
        let reparam = Chart::from_fn("reparam", 1, 2, move |s: &[f64]| {
            let t = s[0] + c * s[0].sin();
            DVector::from_vec(vec![t.cos(), b * t.sin()])
        }).unwrap();
        let t = s + c * s.sin();
        let a = vq_general_invariant(&curvature_forms(&ellipse, &[t]).unwrap().forms);
        let r = vq_general_invariant(&curvature_forms(&reparam, &[s]).unwrap().forms);
        prop_assert!((a - r).abs() <= 1e-7 * a.abs().max(1.0), "{a} {r}");
    }

    #[test]
    fn potentials_are_even_in_each_normal(forms in forms_strategy(), alpha in 0usize..3) {
        let alpha = alpha % forms.codim();
        let a = compare_potentials(&forms);
        let b = compare_potentials(&forms.with_flipped(alpha));
        for ((n, x), (_, y)) in a.paths().iter().zip(b.paths().iter()) {
            prop_assert!((x - y).abs() <= 1e-9, "{n}: {x} {y}");
        }
    }

    #[test]
    fn potentials_scale_quadratically(forms in forms_strategy(), c in 0.1f64..3.0) {
        let v = vq_general_invariant(&forms);
        let w = vq_general_invariant(&forms.scaled(c));
        prop_assert!((w - c * c * v).abs() <= 1e-12 * (1.0 + w.abs()));
        let p = vq_general_paper(&forms);
        prop_assert!((vq_general_paper(&forms.scaled(c)) - c * c * p).abs() <= 1e-12 * (1.0 + p.abs()));
    }

    #[test]
    fn invariant_form_ignores_tangent_basis(forms in forms_strategy(), seed in any::<u64>()) {
        let q = random::rotation(&mut random::stream(seed, 0), forms.dim());
        let rotated = forms.conjugated(&q);
        prop_assert!((vq_general_invariant(&rotated) - vq_general_invariant(&forms)).abs() <= 1e-12);
    }

    #[test]
    fn two_dimensional_closed_forms_agree(k1 in -3.0f64..3.0, k2 in -3.0f64..3.0) {
        prop_assert!((vq_dacosta_2d(k1, k2) - vq_codim1(&[k1, k2])).abs() <= 1e-12);
        let forms = FormSet::diagonal(&[vec![k1, k2]]).unwrap();
        prop_assert!((vq_general_paper(&forms) - vq_general_invariant(&forms)).abs() <= 1e-12);
    }

    #[test]
    fn numeric_path_tracks_the_invariant(forms in forms_strategy()) {
        let v = vq_numeric_fd(&forms, FdOptions::default()).unwrap().value;
        prop_assert!((v - vq_general_invariant(&forms)).abs() <= 1e-6);
    }

    #[test]
    fn diagonal_determinant_residual_is_third_order(k in prop::collection::vec(0.2f64..2.0, 2), sign in prop::bool::ANY) {
        // Same signs keep the cubic coefficient 2 k1 k2 (k1 + k2) away from zero.
        let s = if sign { 1.0 } else { -1.0 };
        let forms = FormSet::diagonal(&[vec![s * k[0], s * k[1]]]).unwrap();
        let order = det_expansion_order(&forms, &[1.0], &[1e-3, 2e-3, 4e-3, 8e-3]).unwrap();
        prop_assert!(order.slope.unwrap() >= 2.7, "{order:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn area_ratio_round_trips(seed in any::<u64>(), eps in -0.15f64..0.15) {
        let chart = registry::build(&format!("random_quadric:seed={seed}")).unwrap();
        let u = [0.05, -0.1];
        let offset = OffsetFrame::new(chart.clone(), vec![eps]).unwrap();
        let forward = offset.area_ratio(&u).unwrap();
        let moved = offset.to_chart(&u).unwrap();
        // The offset normal is parallel to the base normal; undo the push along it.
        let orient = normal_frame(&moved, &u).unwrap().column(0).dot(&normal_frame(&chart, &u).unwrap().column(0)).signum();
        let back = area_ratio_exact(&moved, &u, &[-orient * eps]).unwrap();
        prop_assert!((forward * back - 1.0).abs() <= 1e-6, "{forward} {back}");
    }

    #[test]
    fn assembled_operators_are_symmetric(b in 0.4f64..1.0, width in 0.05f64..0.9, nt in 32usize..48, nw in 16usize..24, l in 0usize..5) {
        // Largest curvature of the ellipse is 1/b^2; stay inside delta k < 1/2.
        let delta = width * 0.5 * b * b;
        let ellipse = registry::build(&format!("ellipse:a=1,b={b}")).unwrap();
        prop_assert!(surface_operator(&ellipse, true, nt).unwrap().relative_asymmetry() <= 1e-12);
        prop_assert!(layer_operator(&ellipse, delta, nt, nw).unwrap().relative_asymmetry() <= 1e-12);
        prop_assert!(shell_radial_operator(1.0, delta, l, nw).unwrap().relative_asymmetry() <= 1e-12);
    }

    #[test]
    fn layer_eigenvectors_have_unit_norm(b in 0.5f64..1.0, delta in 0.02f64..0.08) {
        let ellipse = registry::build(&format!("ellipse:a=1,b={b}")).unwrap();
        let s = ThinLayerScenario::new(ellipse, delta).grid(32, 16).eigenvalues(3).check_grid(false);
        let result = layer_spectrum_curve(&s).unwrap();
        for w in &result.wavefunctions {
            prop_assert!((w.norm_squared() - 1.0).abs() <= 1e-10);
        }
    }
}

/// `log2(|E_n - E_2n| / |E_2n - E_4n|)`.
fn observed_order(levels: [f64; 3]) -> f64 {
    ((levels[0] - levels[1]).abs() / (levels[1] - levels[2]).abs()).log2()
}

#[test]
fn surface_grid_order_is_two() {
    let ellipse = registry::build("ellipse:a=1,b=0.6").unwrap();
    let e: Vec<Vec<f64>> = [64, 128, 256]
        .iter()
        .map(|&n| surface_spectrum(&ellipse, true, n, 4).unwrap().eigenvalues)
        .collect();
    for i in 0..4 {
        let p = observed_order([e[0][i], e[1][i], e[2][i]]);
        assert!(p >= 1.8, "level {i}: order {p}");
    }
}

#[test]
fn layer_grid_order_is_two() {
    let ellipse = registry::build("ellipse:a=1,b=0.6").unwrap();
    let e: Vec<Vec<f64>> = [(32, 16), (64, 32), (128, 64)]
        .iter()
        .map(|&(nt, nw)| {
            let s = ThinLayerScenario::new(ellipse.clone(), 0.05).grid(nt, nw).eigenvalues(3).check_grid(false);
            layer_spectrum_curve(&s).unwrap().subtracted.unwrap()
        })
        .collect();
    for i in 0..3 {
        let p = observed_order([e[0][i], e[1][i], e[2][i]]);
        assert!(p >= 1.8, "level {i}: order {p}");
    }
}

#[test]
fn potential_reports_are_reproducible() {
    let run = || {
        let reports: Vec<_> = random::form_suite(42, 10).iter().map(compare_potentials).collect();
        serde_json::to_string(&reports).unwrap()
    };
    assert_eq!(run(), run());
}
