use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfnn_core::domain::linspace;
use tfnn_core::network::{embed_shallow_as_deep, embed_shallow_as_deep_with_step, AffineLayer, FeatureLayer};
use tfnn_core::{Activation, DeepTfnn, Feature, Network, ShallowTfnn};

fn random_shallow(rng: &mut ChaCha8Rng, r: usize, m: usize, a: Activation) -> ShallowTfnn {
    let features = (0..r).map(|i| Feature::coordinate(i % 2)).collect();
    let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let w = draw(r);
    let th = draw(r);
    let out = (0..m).map(|_| draw(r)).collect();
    let b = draw(m);
    ShallowTfnn::new(features, w, th, out, b, a).unwrap()
}

fn random_points(rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect()
}

#[test]
fn shallow_matches_straight_line_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = random_shallow(&mut rng, 2, 1, Activation::Tanh);
    for x in random_points(&mut rng, 10) {
        let h0 = (net.in_weights[0] * x[0] - net.in_biases[0]).tanh();
        let h1 = (net.in_weights[1] * x[1] - net.in_biases[1]).tanh();
        let want = net.out_matrix[0][0] * h0 + net.out_matrix[0][1] * h1 - net.out_bias[0];
        let got = net.eval(&x).unwrap()[0];
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn depth_three_relu_by_hand() {
    let relu = |t: f64| t.max(0.0);
    let fl = FeatureLayer {
        features: vec![Feature::coordinate(0), Feature::coordinate(1)],
        weights: vec![1.5, -0.5],
        biases: vec![0.25, -0.75],
    };
    let l1 = AffineLayer::new(vec![vec![1.0, -2.0], vec![0.5, 0.5], vec![-1.0, 1.0]], vec![0.1, -0.2, 0.3]).unwrap();
    let l2 = AffineLayer::new(vec![vec![1.0, 1.0, 1.0], vec![-1.0, 2.0, 0.5]], vec![0.0, 0.5]).unwrap();
    let l3 = AffineLayer::new(vec![vec![2.0, -1.0], vec![0.5, 0.25]], vec![-0.5, 0.125]).unwrap();
    let out = AffineLayer::new(vec![vec![1.0, -3.0]], vec![0.75]).unwrap();
    let net = DeepTfnn::new(fl, vec![l1, l2, l3], out, Activation::Relu).unwrap();
    assert_eq!(net.depth(), 3);
    assert_eq!(net.width(), 3);
    for x in [[0.0, 0.0], [1.0, -1.0], [-0.3, 0.8], [0.9, 0.9], [-1.0, -0.2]] {
        let y0 = [relu(1.5 * x[0] - 0.25), relu(-0.5 * x[1] + 0.75)];
        let y1 = [
            relu(y0[0] - 2.0 * y0[1] - 0.1),
            relu(0.5 * y0[0] + 0.5 * y0[1] + 0.2),
            relu(-y0[0] + y0[1] - 0.3),
        ];
        let y2 = [relu(y1[0] + y1[1] + y1[2]), relu(-y1[0] + 2.0 * y1[1] + 0.5 * y1[2] - 0.5)];
        let y3 = [relu(2.0 * y2[0] - y2[1] + 0.5), relu(0.5 * y2[0] + 0.25 * y2[1] - 0.125)];
        let want = y3[0] - 3.0 * y3[1] - 0.75;
        let got = net.eval(&x).unwrap()[0];
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn zero_hidden_layers_reduce_to_shallow() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = random_shallow(&mut rng, 4, 2, Activation::Sigmoid);
    let deep = net.as_deep();
    for x in random_points(&mut rng, 10) {
        assert_eq!(deep.eval(&x).unwrap(), net.eval(&x).unwrap());
    }
}

#[test]
fn all_zero_weights_give_a_constant() {
    let fl = FeatureLayer {
        features: vec![Feature::coordinate(0); 2],
        weights: vec![0.0, 0.0],
        biases: vec![0.3, -0.1],
    };
    let hidden = vec![AffineLayer::new(vec![vec![0.0, 0.0]; 2], vec![1.0, -1.0]).unwrap()];
    let out = AffineLayer::new(vec![vec![0.0, 0.0]], vec![2.0]).unwrap();
    let net = DeepTfnn::new(fl, hidden, out, Activation::Tanh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let first = net.eval(&[0.0, 0.0]).unwrap();
    for x in random_points(&mut rng, 10) {
        assert_eq!(net.eval(&x).unwrap(), first);
    }
}

#[test]
fn relu_embedding_is_exact_at_depths_one_and_three() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = random_shallow(&mut rng, 6, 1, Activation::Relu);
    let grid: Vec<Vec<f64>> = linspace(-1.0, 1.0, 10)
        .iter()
        .flat_map(|&a| linspace(-1.0, 1.0, 10).into_iter().map(move |b| vec![a, b]))
        .collect();
    for depth in [1, 3] {
        let deep = embed_shallow_as_deep(&net, depth, 4.0).unwrap();
        assert_eq!(deep.depth(), depth);
        for x in &grid {
            let d = (deep.eval(x).unwrap()[0] - net.eval(x).unwrap()[0]).abs();
            assert!(d <= 1e-14, "depth {depth}: {d}");
        }
    }
}

#[test]
fn tanh_embedding_deviation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = random_shallow(&mut rng, 6, 1, Activation::Tanh);
    let deep = embed_shallow_as_deep_with_step(&net, 3, 1.0, 1e-3).unwrap();
    let grid: Vec<Vec<f64>> = linspace(-1.0, 1.0, 10)
        .iter()
        .flat_map(|&a| linspace(-1.0, 1.0, 10).into_iter().map(move |b| vec![a, b]))
        .collect();
    let dev = grid
        .iter()
        .map(|x| (deep.eval(x).unwrap()[0] - net.eval(x).unwrap()[0]).abs())
        .fold(0.0, f64::max);
    assert!(dev <= 1e-5, "{dev}");
}

#[test]
fn file_round_trip_on_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let shallow = random_shallow(&mut rng, 5, 2, Activation::Softplus);
    let deep = embed_shallow_as_deep_with_step(&shallow, 2, 3.0, 1e-3).unwrap();
    for net in [Network::from(shallow), Network::from(deep)] {
        let text = net.to_json();
        let back = Network::from_json(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_json(), text);
        for x in random_points(&mut rng, 100) {
            let a = net.eval(&x).unwrap();
            let b = back.eval(&x).unwrap();
            assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}

proptest! {
    #[test]
    fn round_trip_preserves_every_weight(
        w in prop::collection::vec(-1e6f64..1e6, 3),
        th in prop::collection::vec(-1e3f64..1e3, 3),
        out in prop::collection::vec(-1e-9f64..1e-9, 3),
        b in -1e300f64..1e300,
    ) {
        let net = ShallowTfnn::new(
            vec![Feature::coordinate(0), Feature::point_eval(1), Feature::trapezoid(&[0.0, 0.3, 1.0])],
            w, th, vec![out], vec![b], Activation::LeakyRelu(0.1),
        ).unwrap();
        let net = Network::from(net);
        prop_assert_eq!(Network::from_json(&net.to_json()).unwrap(), net);
    }

    #[test]
    fn width_is_the_largest_layer(k0 in 1usize..6, ks in prop::collection::vec(1usize..6, 0..4)) {
        let fl = FeatureLayer {
            features: vec![Feature::coordinate(0); k0],
            weights: vec![1.0; k0],
            biases: vec![0.0; k0],
        };
        let mut prev = k0;
        let mut hidden = Vec::new();
        for &k in &ks {
            hidden.push(AffineLayer::zeros(k, prev));
            prev = k;
        }
        let net = DeepTfnn::new(fl, hidden, AffineLayer::zeros(1, prev), Activation::Relu).unwrap();
        prop_assert_eq!(net.width(), ks.iter().copied().fold(k0, usize::max));
        prop_assert_eq!(net.depth(), ks.len());
    }
}
