use proptest::prelude::*;
use tfnn_core::features::check_injectivity;
use tfnn_core::kst::{
    build_ostrand_deep_narrow, fit_outer_functions, kolmogorov_features, ostrand_features_finite, sprecher_psi,
    FeatureMode,
};
use tfnn_core::{Activation, Metric, ProductSpace, SampledCompactSet};

const OUTER_XY_RESIDUAL: f64 = 0.019482647273775175;

fn cube_grid(per_axis: usize) -> SampledCompactSet {
    SampledCompactSet::grid(0.0, 1.0, per_axis, 2, Metric::Euclidean).unwrap()
}

#[test]
fn every_boolean_function_of_two_bits_is_exact() {
    let space = ProductSpace::finite(&[2, 2]).unwrap();
    let set = space.grid(2).unwrap();
    let features = ostrand_features_finite(&space).unwrap();
    assert_eq!(features.len(), 1);
    assert!(check_injectivity(&features.map(), &set).unwrap().injective);
    for table in 0u32..16 {
        let g: Vec<f64> = set
            .points()
            .iter()
            .map(|p| ((table >> (2 * p[0] as u32 + p[1] as u32)) & 1) as f64)
            .collect();
        let fit = fit_outer_functions(&g, &features, &set, 4).unwrap();
        assert_eq!(fit.residual, 0.0, "table {table:04b}");
        for (p, want) in set.points().iter().zip(&g) {
            assert_eq!(fit.eval(&features, p).unwrap(), *want);
        }
        let rows: Vec<Vec<f64>> = g.iter().map(|&v| vec![v]).collect();
        let (net, report, _) =
            build_ostrand_deep_narrow(&rows, &set, &space, &Activation::Relu, 0.01, FeatureMode::Finite, 0).unwrap();
        assert!(report.achieved_error <= 0.01, "table {table:04b}: {:e}", report.achieved_error);
        assert!(report.achieved_error <= 1e-9, "table {table:04b}: {:e}", report.achieved_error);
        assert!(net.width() <= 4, "table {table:04b}: width {}", net.width());
    }
}

#[test]
fn three_by_two_labels_separate() {
    let space = ProductSpace::finite(&[3, 2]).unwrap();
    let set = space.grid(3).unwrap();
    assert_eq!(set.len(), 6);
    let features = ostrand_features_finite(&space).unwrap();
    let mut values: Vec<f64> = set.points().iter().map(|p| features.features[0].eval(p).unwrap()).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    assert_eq!(values.len(), 6);
}

#[test]
fn sprecher_inner_function_is_monotone_on_thousandths() {
    assert_eq!(sprecher_psi(0.0, 10, 4), 0.0);
    assert_eq!(sprecher_psi(1.0, 10, 4), 1.0);
    for depth in [3, 4] {
        for k in 0..1000 {
            let a = sprecher_psi(k as f64 / 1000.0, 10, depth);
            let b = sprecher_psi((k + 1) as f64 / 1000.0, 10, depth);
            assert!(a <= b, "depth {depth}, k {k}: {a} > {b}");
        }
    }
}

#[test]
fn feature_counts_follow_the_dimension() {
    for d in 1..=3 {
        let grid = SampledCompactSet::grid(0.0, 1.0, 5, d, Metric::Euclidean).unwrap();
        let fs = kolmogorov_features(d, FeatureMode::MonotonePl { seed: 0 }, &grid).unwrap();
        assert_eq!(fs.len(), 2 * d + 1);
        assert_eq!(fs.total_dim(), d);
    }
}

#[test]
fn monotone_features_separate_the_grid() {
    let set = cube_grid(33);
    let fs = kolmogorov_features(2, FeatureMode::MonotonePl { seed: 0 }, &set).unwrap();
    assert_eq!(fs.len(), 5);
    let report = check_injectivity(&fs.map(), &set).unwrap();
    assert!(report.injective);
    let mut images = fs.map().eval_all(set.points()).unwrap();
    images.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    images.dedup();
    assert_eq!(images.len(), 1089);
}

#[test]
fn outer_fit_of_product_matches_oracle() {
    let set = cube_grid(33);
    let fs = kolmogorov_features(2, FeatureMode::MonotonePl { seed: 0 }, &set).unwrap();
    let xy: Vec<f64> = set.points().iter().map(|p| p[0] * p[1]).collect();
    let fit = fit_outer_functions(&xy, &fs, &set, 64).unwrap();
    assert!(fit.residual <= 0.05);
    assert!((fit.residual - OUTER_XY_RESIDUAL).abs() <= 1e-9, "{:e}", fit.residual);
}

#[test]
fn constant_target_uses_the_first_outer_function() {
    let set = cube_grid(9);
    let fs = kolmogorov_features(2, FeatureMode::MonotonePl { seed: 3 }, &set).unwrap();
    let fit = fit_outer_functions(&vec![1.5; set.len()], &fs, &set, 16).unwrap();
    assert_eq!(fit.residual, 0.0);
    assert!(fit.outer.iter().skip(1).all(|h| h.is_constant() && h.eval(0.5) == 0.0));
}

#[test]
fn cube_deep_narrow_sin_cos() {
    let set = cube_grid(33);
    let g: Vec<Vec<f64>> = set.points().iter().map(|p| vec![(3.0 * p[0]).sin() + (2.0 * p[1]).cos()]).collect();
    let (net, report, fs) = build_ostrand_deep_narrow(
        &g,
        &set,
        &ProductSpace::cube(2),
        &Activation::Relu,
        0.1,
        FeatureMode::MonotonePl { seed: 0 },
        0,
    )
    .unwrap();
    assert_eq!(fs.len(), 5);
    assert!(report.achieved_error <= 0.1, "{:e}", report.achieved_error);
    assert!(net.width() <= 8);
    assert_eq!(report.big_m, Some(2));
}

proptest! {
    #[test]
    fn sum_features_add_their_inner_functions(x in 0.0f64..=1.0, y in 0.0f64..=1.0, seed in 0u64..4) {
        let set = cube_grid(5);
        let modes = [FeatureMode::MonotonePl { seed }, FeatureMode::Sprecher { gamma: 10, depth: 3 }];
        for mode in modes {
            let fs = match kolmogorov_features(2, mode, &set) {
                Ok(fs) => fs,
                Err(_) => continue,
            };
            for (q, f) in fs.features.iter().enumerate() {
                let direct = f.eval(&[x, y]).unwrap();
                let summed = fs.psis[0][q].eval(x).unwrap() + fs.psis[1][q].eval(y).unwrap();
                prop_assert!((direct - summed).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sprecher_is_monotone_at_random_pairs(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(sprecher_psi(lo, 10, 4) <= sprecher_psi(hi, 10, 4));
    }
}
