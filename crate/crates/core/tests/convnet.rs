use afif4::convnet::{
    accuracy, forward, gradient_check, gradient_check_params, gradient_check_state, load_network, sample_loss, save_network,
    train, NetworkSpec, NetworkState, TrainConfig,
};
use afif4::imagecore::{resize, Gender, ImageBuffer};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(size: usize, ch: usize, seed: u64) -> ImageBuffer<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageBuffer::new(size, size, ch, (0..size * size * ch).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// 16x16 bar images (horizontal = MALE, vertical = FEMALE) upsampled to the tiny input.
fn bar_task(n: usize, seed: u64) -> Vec<(ImageBuffer<f64>, Gender)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { Gender::Male } else { Gender::Female };
            let pos = rng.random_range(3..13usize);
            let small = ImageBuffer::from_fn(16, 16, 3, |x, y, _| {
                let t = if label == Gender::Male { y } else { x };
                if t.abs_diff(pos) <= 1 { 0.9 } else { 0.1 }
            })
            .unwrap();
            (resize(&small, 32, 32).unwrap(), label)
        })
        .collect()
}

#[test]
fn small_conv_net_gradients() {
    let spec = NetworkSpec::tiny_topology(16, 1);
    assert!(spec.parameter_count().unwrap() <= 10_000);
    let err = gradient_check(&spec, &random_image(16, 1, 3), Gender::Female, 1e-5).unwrap();
    assert!(err < 1e-3, "max relative error {err}");
}

#[test]
fn tiny_preset_spot_check() {
    let net = NetworkState::<f64>::random(NetworkSpec::afif4_tiny(), 1.0, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let probes: Vec<usize> = (0..1500).map(|_| rng.random_range(0..net.parameter_count())).collect();
    let r = gradient_check_params(&net, &random_image(32, 3, 4), Gender::Male, 1e-5, &probes).unwrap();
    assert!(r.max_relative_error < 1e-3, "{r:?}");
    assert!(gradient_check_state(&net, &random_image(32, 3, 4), Gender::Male, 1e-5).is_err());
}

#[test]
fn fully_connected_gradients() {
    let spec: NetworkSpec = "in=6x6x1 fc=12 relu fc=8 relu fc=2 softmax".parse().unwrap();
    let err = gradient_check(&spec, &random_image(6, 1, 5), Gender::Male, 1e-4).unwrap();
    assert!(err < 1e-5, "max relative error {err}");
}

#[test]
fn degenerate_zero_case_is_finite() {
    let net = NetworkState::<f64>::zeros(NetworkSpec::tiny_topology(12, 1)).unwrap();
    let zero = ImageBuffer::filled(12, 12, 1, 0.0).unwrap();
    let r = gradient_check_state(&net, &zero, Gender::Male, 1e-5).unwrap();
    assert!(r.max_relative_error.is_finite());
}

#[test]
fn gradient_check_rejects_bad_step() {
    let spec = NetworkSpec::tiny_topology(12, 1);
    assert!(gradient_check(&spec, &random_image(12, 1, 1), Gender::Male, 1e-2).is_err());
    assert!(gradient_check(&spec, &random_image(12, 1, 1), Gender::Male, 1e-8).is_err());
}

#[test]
fn zero_learning_rate_is_identity() {
    let net = NetworkState::<f64>::random(NetworkSpec::afif4_tiny(), 1.0, 2).unwrap();
    let cfg = TrainConfig { learning_rate: 0.0, iterations: 5, ..TrainConfig::default() };
    let out = train(&net, &bar_task(8, 1), &cfg).unwrap();
    assert!(out.params().iter().zip(net.params()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn training_is_deterministic() {
    let net = NetworkState::<f64>::random(NetworkSpec::afif4_tiny(), 1.0, 2).unwrap();
    let cfg = TrainConfig { iterations: 20, seed: 9, ..TrainConfig::default() };
    let data = bar_task(16, 2);
    let a = train(&net, &data, &cfg).unwrap();
    let b = train(&net, &data, &cfg).unwrap();
    assert_eq!(a, b);
    let c = train(&net, &data, &TrainConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn one_small_step_lowers_the_loss() {
    for seed in 0..5 {
        let net = NetworkState::<f64>::random(NetworkSpec::afif4_tiny(), 1.0, seed).unwrap();
        let sample = bar_task(1, seed + 50);
        let before = sample_loss(&net, &sample[0].0, sample[0].1).unwrap();
        let cfg = TrainConfig { learning_rate: 1e-4, iterations: 1, batch_size: 1, momentum: 0.0, ..TrainConfig::default() };
        let after_net = train(&net, &sample, &cfg).unwrap();
        let after = sample_loss(&after_net, &sample[0].0, sample[0].1).unwrap();
        assert!(after < before, "seed {seed}: {before} -> {after}");
    }
}

#[test]
fn divergence_names_the_iteration() {
    let net = NetworkState::<f64>::random(NetworkSpec::afif4_tiny(), 1.0, 1).unwrap();
    let cfg = TrainConfig { learning_rate: 1e150, iterations: 50, ..TrainConfig::default() };
    match train(&net, &bar_task(8, 3), &cfg) {
        Err(afif4::convnet::NetError::Diverged { iteration }) => assert!(iteration < 50),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn saved_network_predicts_identically() {
    let net = NetworkState::<f64>::random(NetworkSpec::afif4_tiny(), 1.0, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("n.afnn");
    save_network(&net, &path).unwrap();
    let back: NetworkState<f64> = load_network(&path).unwrap();
    let x = random_image(32, 3, 8);
    assert_eq!(forward(&net, &x).unwrap(), forward(&back, &x).unwrap());
}

#[test]
fn short_training_beats_chance_on_bars() {
    let data = bar_task(32, 5);
    let net = NetworkState::<f64>::random(NetworkSpec::afif4_tiny(), 1.0, 5).unwrap();
    let trained = train(&net, &data, &TrainConfig { iterations: 200, seed: 5, ..TrainConfig::default() }).unwrap();
    assert!(accuracy(&trained, &data).unwrap() > 0.8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn softmax_is_a_distribution(seed in 0u64..1000, scale in 0.1f64..3.0) {
        let net = NetworkState::<f64>::random(NetworkSpec::tiny_topology(12, 3), scale, seed).unwrap();
        let p = forward(&net, &random_image(12, 3, seed ^ 0xff)).unwrap();
        prop_assert!(p[0] >= 0.0 && p[1] >= 0.0);
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
    }
}
