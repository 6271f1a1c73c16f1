use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfnn_core::builders::{
    build_deep_narrow, build_functional_net, build_lcs_shallow, build_shallow_universal, compose_via_embedding,
    decompose, register_network, EuclideanNet, FunctionalOptions, ShallowOptions,
};
use tfnn_core::domain::{linspace, FunctionClassV, MemberFamily};
use tfnn_core::features::{check_injectivity, make_coordinate_family, make_direction_family};
use tfnn_core::{Activation, Error, Feature, FeatureVectorMap, Metric, SampledCompactSet};

type Target = Box<dyn Fn(&[f64]) -> f64>;

const XY_TANH_ERROR: f64 = 8.467403380922528e-3;
const SQUARE_INTEGRAL_ERROR: f64 = 3.8650706454609863e-3;

fn column(set: &SampledCompactSet, g: impl Fn(&[f64]) -> f64) -> Vec<Vec<f64>> {
    set.points().iter().map(|p| vec![g(p)]).collect()
}

fn sup_error(net: &impl Fn(&[f64]) -> Vec<f64>, set: &SampledCompactSet, targets: &[Vec<f64>]) -> f64 {
    set.points()
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            net(p)
                .iter()
                .zip(t)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

#[test]
fn abs_sum_is_four_relus() {
    let set = SampledCompactSet::grid(-1.0, 1.0, 33, 2, Metric::Euclidean).unwrap();
    let g = column(&set, |p| p[0].abs() + p[1].abs());
    let (net, report) = build_shallow_universal(
        &g,
        &set,
        &make_coordinate_family(2),
        &Activation::Relu,
        1e-6,
        &ShallowOptions::default(),
    )
    .unwrap();
    assert!(report.achieved_error <= 1e-10, "{:e}", report.achieved_error);
    assert_eq!(net.width(), 4);
    assert_eq!(report.width, 4);
    assert!(!report.budget_exceeded);
}

#[test]
fn constant_vector_target_is_exact() {
    let set = SampledCompactSet::grid(0.0, 1.0, 9, 2, Metric::Euclidean).unwrap();
    let g: Vec<Vec<f64>> = set.points().iter().map(|_| vec![2.5, -0.75]).collect();
    let (net, report) = build_shallow_universal(
        &g,
        &set,
        &make_coordinate_family(2),
        &Activation::Tanh,
        1e-3,
        &ShallowOptions::default(),
    )
    .unwrap();
    assert!(report.achieved_error <= 1e-14, "{:e}", report.achieved_error);
    assert!(net.width() <= 2);
    assert!(net.in_weights.iter().all(|&w| w == 0.0));
}

#[test]
fn product_with_diagonal_directions_and_tanh() {
    let set = SampledCompactSet::grid(0.0, 1.0, 17, 2, Metric::Euclidean).unwrap();
    let g = column(&set, |p| p[0] * p[1]);
    let family = make_direction_family(2, &[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
    let (net, report) =
        build_shallow_universal(&g, &set, &family, &Activation::Tanh, 0.05, &ShallowOptions::default()).unwrap();
    assert!(report.achieved_error <= 0.05);
    assert!(!report.budget_exceeded);
    assert!((report.achieved_error - XY_TANH_ERROR).abs() <= 1e-9, "{:e}", report.achieved_error);
    assert_eq!(net.width(), 33);
    let measured = sup_error(&|p| net.eval(p).unwrap(), &set, &g);
    assert!((measured - report.achieved_error).abs() <= 1e-12);
}

#[test]
fn decompositions_of_simple_targets() {
    let set = SampledCompactSet::grid(-1.0, 1.0, 9, 2, Metric::Euclidean).unwrap();
    let coords = make_coordinate_family(2);
    let sum: Vec<f64> = set.points().iter().map(|p| p[0] + p[1]).collect();
    let d = decompose(&sum, &set, &coords, 8).unwrap();
    assert!(d.residual <= 1e-10);
    assert_eq!(d.terms.len(), 2);

    let flat = vec![0.3; set.len()];
    let d = decompose(&flat, &set, &coords, 8).unwrap();
    assert_eq!(d.residual, 0.0);
    assert_eq!(d.terms.iter().filter(|t| !t.u.is_constant()).count(), 0);

    let grid = SampledCompactSet::grid(0.0, 1.0, 17, 2, Metric::Euclidean).unwrap();
    let xy: Vec<f64> = grid.points().iter().map(|p| p[0] * p[1]).collect();
    let family = make_direction_family(2, &[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
    let d = decompose(&xy, &grid, &family, 64).unwrap();
    assert!(d.residual <= 2e-3, "{:e}", d.residual);
}

#[test]
fn flag_free_runs_respect_their_budget() {
    let set = SampledCompactSet::grid(-1.0, 1.0, 13, 2, Metric::Euclidean).unwrap();
    let targets: Vec<(Target, f64)> = vec![
        (Box::new(|p| (2.0 * p[0]).sin() + p[1] * p[1]), 0.05),
        (Box::new(|p| (p[0] - 0.3).abs() - (p[1] + 0.1).max(0.0)), 0.01),
        (Box::new(|p| (p[0] + p[1]).exp()), 0.02),
    ];
    let family = make_direction_family(2, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
    for activation in [Activation::Relu, Activation::Tanh, Activation::Sigmoid] {
        for (g, eps) in &targets {
            let rows = column(&set, g);
            let (net, report) =
                build_shallow_universal(&rows, &set, &family, &activation, *eps, &ShallowOptions::default()).unwrap();
            if !report.budget_exceeded {
                assert!(report.achieved_error <= *eps, "{activation:?}: {:e}", report.achieved_error);
            }
            assert_eq!(report.width, net.width());
        }
    }
}

#[test]
fn max_of_linear_members_via_exponential_dictionary() {
    let class = FunctionClassV::on_unit_interval(MemberFamily::Linear, (0.0, 1.0), 33).unwrap();
    let set = class.sample(33).unwrap();
    let g = column(&set, |u| u.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let base = vec![Feature::trapezoid(&class.domain_grid)];
    let (_, report) = build_lcs_shallow(
        &g,
        &set,
        &base,
        &[-1.0, 1.0],
        true,
        &Activation::Tanh,
        0.05,
        &ShallowOptions::default(),
    )
    .unwrap();
    assert!(report.achieved_error <= 0.05, "{:e}", report.achieved_error);
}

#[test]
fn exponential_of_a_functional_is_a_dictionary_member() {
    let class = FunctionClassV::on_unit_interval(MemberFamily::Sine, (0.0, 2.0), 33).unwrap();
    let set = class.sample(21).unwrap();
    let ell = Feature::trapezoid(&class.domain_grid);
    let family = vec![Feature::exponential(ell.clone(), 1.0)];
    let g: Vec<f64> = set.points().iter().map(|u| ell.eval(u).unwrap().exp()).collect();
    let d = decompose(&g, &set, &family, 8).unwrap();
    assert!(d.residual <= 1e-12, "{:e}", d.residual);

    let rows = column(&set, |u| ell.eval(u).unwrap());
    let (_, report) =
        build_shallow_universal(&rows, &set, std::slice::from_ref(&ell), &Activation::Relu, 1e-6, &ShallowOptions::default())
            .unwrap();
    assert!(report.achieved_error <= 1e-6, "{:e}", report.achieved_error);
}

#[test]
fn functional_point_evaluation_target() {
    let class = FunctionClassV::on_unit_interval(MemberFamily::Sine, (0.0, 2.0), 65).unwrap();
    let set = class.sample(41).unwrap();
    let targets: Vec<f64> = set.points().iter().map(|u| u[5]).collect();
    let opts = FunctionalOptions {
        family: Some(vec![Feature::point_eval(5)]),
        ..FunctionalOptions::default()
    };
    let (net, report) = build_functional_net(&targets, &class, &set, &Activation::Tanh, 1e-3, 9, &opts).unwrap();
    assert!(report.achieved_error <= 1e-3, "{:e}", report.achieved_error);
    let sub = report.substitution.unwrap();
    assert!(sub.nodes.contains(&5));
    assert_eq!(sub.perturbation, 0.0);
    assert!(net.width() >= 1);
}

#[test]
fn trapezoid_on_affine_members_substitutes_exactly() {
    let class = FunctionClassV::on_unit_interval(MemberFamily::Linear, (0.0, 1.0), 65).unwrap();
    let set = class.sample(33).unwrap();
    let ell = Feature::trapezoid(&class.domain_grid);
    let targets: Vec<f64> = set.points().iter().map(|u| ell.eval(u).unwrap()).collect();
    let opts = FunctionalOptions {
        family: Some(vec![ell]),
        ..FunctionalOptions::default()
    };
    let (_, report) = build_functional_net(&targets, &class, &set, &Activation::Tanh, 0.01, 3, &opts).unwrap();
    let sub = report.substitution.unwrap();
    assert!(sub.perturbation <= 1e-14, "{:e}", sub.perturbation);
    assert!(sub.deltas.iter().all(|&d| d <= 1e-14));
    assert!(report.achieved_error <= 0.01);
}

#[test]
fn square_integral_over_nine_nodes() {
    let class = FunctionClassV::on_unit_interval(MemberFamily::Sine, (0.0, 2.0), 65).unwrap();
    let set = class.sample(41).unwrap();
    let trap = Feature::trapezoid(&class.domain_grid);
    let targets: Vec<f64> = set
        .points()
        .iter()
        .map(|u| trap.eval(&u.iter().map(|v| v * v).collect::<Vec<_>>()).unwrap())
        .collect();
    let (net, report) =
        build_functional_net(&targets, &class, &set, &Activation::Tanh, 0.05, 9, &FunctionalOptions::default())
            .unwrap();
    assert!(report.achieved_error <= 0.05);
    assert!(!report.budget_exceeded);
    assert!((report.achieved_error - SQUARE_INTEGRAL_ERROR).abs() <= 1e-9, "{:e}", report.achieved_error);
    let sub = report.substitution.unwrap();
    assert!(sub.nodes.len() <= 9);
    assert!(sub.perturbation <= sub.perturbation_bound);
    let used: Vec<usize> = net
        .features
        .iter()
        .flat_map(|f| match &f.kind {
            tfnn_core::features::FeatureKind::Quadrature { indices, .. } => indices.clone(),
            tfnn_core::features::FeatureKind::PointEval { index } => vec![*index],
            _ => panic!("unexpected feature {f}"),
        })
        .collect();
    assert!(used.iter().all(|i| sub.nodes.contains(i)));
}

#[test]
fn substitution_bound_holds_across_runs() {
    for (family, range, activation) in [
        (MemberFamily::Sine, (0.0, 2.0), Activation::Tanh),
        (MemberFamily::Cosine, (0.0, 3.0), Activation::Sigmoid),
        (MemberFamily::Exp, (-1.0, 1.0), Activation::Softplus),
        (MemberFamily::Linear, (-1.0, 1.0), Activation::Relu),
    ] {
        let class = FunctionClassV::on_unit_interval(family, range, 33).unwrap();
        let set = class.sample(21).unwrap();
        let targets: Vec<f64> = set.points().iter().map(|u| u.iter().map(|v| v.abs()).sum::<f64>() / 33.0).collect();
        for k in [2, 5] {
            let (_, report) =
                build_functional_net(&targets, &class, &set, &activation, 0.05, k, &FunctionalOptions::default())
                    .unwrap();
            let sub = report.substitution.unwrap();
            assert!(sub.perturbation <= sub.perturbation_bound, "{family:?} k={k}");
        }
    }
}

#[test]
fn embedding_composition_reproduces_samples() {
    let set = SampledCompactSet::grid(-1.0, 1.0, 11, 2, Metric::Euclidean).unwrap();
    let g = column(&set, |p| (3.0 * p[0]).sin() * p[1]);
    let (comp, report) = compose_via_embedding(&g, &set, &FeatureVectorMap::identity(2)).unwrap();
    assert!(report.injective);
    for (p, t) in set.points().iter().zip(&g) {
        assert_eq!(&comp.eval(p), t);
    }
    let cube = FeatureVectorMap::new(
        (0..2)
            .map(|i| Feature::custom(set.points(), &set.points().iter().map(|p| p[i].powi(3) + 2.0 * p[i]).collect::<Vec<_>>()))
            .collect(),
    );
    let (comp, _) = compose_via_embedding(&g, &set, &cube).unwrap();
    for (p, t) in set.points().iter().zip(&g) {
        let y = cube.eval(p).unwrap();
        assert_eq!(&comp.eval(&y), t);
    }
}

#[test]
fn square_map_is_not_injective() {
    let pts: Vec<Vec<f64>> = linspace(-1.0, 1.0, 9).into_iter().map(|t| vec![t]).collect();
    let set = SampledCompactSet::new(pts, Metric::Euclidean, 0.0).unwrap();
    let squares: Vec<f64> = set.points().iter().map(|p| p[0] * p[0]).collect();
    let map = FeatureVectorMap::new(vec![Feature::custom(set.points(), &squares)]);
    let g = column(&set, |p| p[0]);
    let err = compose_via_embedding(&g, &set, &map).unwrap_err();
    let Error::InjectivityFailure { first, second } = err else {
        panic!("unexpected error {err:?}");
    };
    let (a, b) = (set.points()[first][0], set.points()[second][0]);
    assert_eq!(a, -b);
    assert_ne!(a, b);
    let report = check_injectivity(&map, &set).unwrap();
    assert_eq!(report.witness, Some((first, second)));
}

fn random_psi(rng: &mut ChaCha8Rng, activation: Activation) -> EuclideanNet {
    let mut draw = || rng.gen_range(-1.0..1.0);
    EuclideanNet {
        activation,
        weights: (0..8).map(|_| vec![draw(), draw()]).collect(),
        thetas: (0..8).map(|_| draw()).collect(),
        coeffs: (0..8).map(|_| vec![draw()]).collect(),
        constant: vec![draw()],
    }
}

#[test]
fn relu_register_network_is_exact() {
    let set = SampledCompactSet::grid(-1.0, 1.0, 33, 2, Metric::Euclidean).unwrap();
    let map = FeatureVectorMap::identity(2);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let psi = random_psi(&mut rng, Activation::Relu);
        let net = register_network(&psi, &map, &set, 1e-3, None).unwrap();
        assert_eq!(net.width(), 5);
        assert_eq!(net.depth(), 8);
        let dev = sup_error(&|p| net.eval(p).unwrap(), &set, &set.points().iter().map(|p| psi.eval(p)).collect::<Vec<_>>());
        assert!(dev <= 1e-9, "{dev:e}");
    }
}

#[test]
fn tanh_register_network_meets_the_remainder_bound() {
    let set = SampledCompactSet::grid(-1.0, 1.0, 33, 2, Metric::Euclidean).unwrap();
    let map = FeatureVectorMap::identity(2);
    let h = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..5 {
        let psi = random_psi(&mut rng, Activation::Tanh);
        let net = register_network(&psi, &map, &set, h, None).unwrap();
        assert_eq!(net.width(), 5);

        let mut acc_range: f64 = 0.0;
        for p in set.points() {
            let mut acc = 0.0;
            for ((w, th), c) in psi.weights.iter().zip(&psi.thetas).zip(&psi.coeffs) {
                acc += c[0] * (w[0] * p[0] + w[1] * p[1] - th).tanh();
                acc_range = acc_range.max(acc.abs());
            }
        }
        let per_pass = |range: f64| h * h * range.max(1.0) / 3.0;
        let registers: f64 = psi
            .weights
            .iter()
            .zip(&psi.coeffs)
            .enumerate()
            .map(|(i, (w, c))| c[0].abs() * w.iter().map(|a| a.abs() * (i + 1) as f64 * per_pass(1.0)).sum::<f64>())
            .sum();
        let bound = (registers + 9.0 * per_pass(acc_range)) * 1.01;

        let targets: Vec<Vec<f64>> = set.points().iter().map(|p| psi.eval(p)).collect();
        let dev = sup_error(&|p| net.eval(p).unwrap(), &set, &targets);
        assert!(dev <= bound, "{dev:e} > {bound:e}");
        assert!(dev <= 1e-3);
    }
}

#[test]
fn deep_narrow_sin_cos() {
    let set = SampledCompactSet::grid(0.0, 1.0, 33, 2, Metric::Euclidean).unwrap();
    let g = column(&set, |p| (3.0 * p[0]).sin() + (2.0 * p[1]).cos());
    let (net, report) = build_deep_narrow(&g, &set, &FeatureVectorMap::identity(2), &Activation::Relu, 0.1, 0).unwrap();
    assert!(report.achieved_error <= 0.1, "{:e}", report.achieved_error);
    assert!(!report.budget_exceeded);
    assert!(net.width() <= 5);
    assert_eq!(report.width, net.width());
    assert_eq!(report.depth, net.depth());
    let measured = sup_error(&|p| net.eval(p).unwrap(), &set, &g);
    assert!((measured - report.achieved_error).abs() <= 1e-12);
}

#[test]
fn deep_narrow_width_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (n, m, activation) in [
        (1, 1, Activation::Relu),
        (2, 2, Activation::Tanh),
        (3, 1, Activation::LeakyRelu(0.1)),
        (2, 1, Activation::Sigmoid),
    ] {
        let set = SampledCompactSet::grid(0.0, 1.0, if n == 3 { 5 } else { 9 }, n, Metric::Euclidean).unwrap();
        let phases: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..3.0)).collect();
        let g: Vec<Vec<f64>> = set
            .points()
            .iter()
            .map(|p| phases.iter().map(|ph| (p.iter().sum::<f64>() + ph).sin()).collect())
            .collect();
        let (net, report) = build_deep_narrow(&g, &set, &FeatureVectorMap::identity(n), &activation, 0.2, 1).unwrap();
        assert!(net.width() <= n + m + 2, "{activation:?}: width {}", net.width());
        assert_eq!(report.width, net.width());
    }
}
