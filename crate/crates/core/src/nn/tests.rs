use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{self, batchnorm_train, lstm_cache_gates, lstm_forward, maxpool_forward};
use super::*;

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

#[test]
fn two_layer_dense_gradients() {
    let spec = NetworkSpec::new(
        vec![4],
        vec![LayerSpec::dense(6, Activation::Sigmoid), LayerSpec::dense(1, Activation::Sigmoid)],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = Network::new(spec, 5).unwrap();
    let x = random_tensor(&[8, 4], &mut rng, -1.0, 1.0);
    let y = Tensor::new(vec![8, 1], (0..8).map(|i| (i % 2) as f64).collect()).unwrap();
    let report = grad_check(&net, &x, &y, Loss::Bce, 1e-5).unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn conv_pool_gradients_tie_free() {
    let spec = NetworkSpec::new(
        vec![9, 2],
        vec![
            LayerSpec::Conv1D { filters: 3, kernel_size: 3, activation: Activation::Linear },
            LayerSpec::MaxPool1D { pool_size: 2 },
            LayerSpec::Flatten,
            LayerSpec::dense(1, Activation::Sigmoid),
        ],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = Network::new(spec, 9).unwrap();
    let x = random_tensor(&[4, 18], &mut rng, -1.0, 1.0);
    let y = Tensor::new(vec![4, 1], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let report = grad_check(&net, &x, &y, Loss::Bce, 1e-5).unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn lstm_sequence_gradients() {
    let spec =
        NetworkSpec::new(vec![5, 2], vec![LayerSpec::Lstm { units: 4 }, LayerSpec::dense(1, Activation::Sigmoid)]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = Network::new(spec, 4).unwrap();
    let x = random_tensor(&[3, 10], &mut rng, -1.0, 1.0);
    let y = Tensor::new(vec![3, 1], vec![1.0, 0.0, 1.0]).unwrap();
    let report = grad_check(&net, &x, &y, Loss::Bce, 1e-5).unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn dropout_gradients_reuse_mask() {
    let spec = NetworkSpec::new(
        vec![5],
        vec![
            LayerSpec::dense(8, Activation::Sigmoid),
            LayerSpec::Dropout { rate: 0.4 },
            LayerSpec::dense(1, Activation::Sigmoid),
        ],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = Network::new(spec, 2).unwrap();
    let x = random_tensor(&[6, 5], &mut rng, -1.0, 1.0);
    let y = Tensor::new(vec![6, 1], vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
    let report = grad_check(&net, &x, &y, Loss::Bce, 1e-5).unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn dropout_expectation_is_identity() {
    let spec = NetworkSpec::new(vec![4], vec![LayerSpec::Dropout { rate: 0.3 }]);
    let mut net = Network::new(spec, 0).unwrap();
    let x = Tensor::new(vec![1, 4], vec![1.0, -2.0, 0.5, 3.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let trials = 20_000;
    let mut sum = [0.0; 4];
    for _ in 0..trials {
        let y = net.forward_train(&x, &mut rng).unwrap();
        sum.iter_mut().zip(y.data()).for_each(|(s, v)| *s += v);
    }
    for (s, &want) in sum.iter().zip(x.data()) {
        let mean = s / trials as f64;
        assert!((mean - want).abs() <= 0.01 * want.abs(), "{mean} vs {want}");
    }
    assert_eq!(net.infer(&x).unwrap(), x);
}

#[test]
fn batchnorm_running_stats_drive_inference() {
    let spec = NetworkSpec::new(vec![2], vec![LayerSpec::BatchNorm { momentum: 0.0, epsilon: 1e-9 }]);
    let mut net = Network::new(spec, 0).unwrap();
    let x = Tensor::new(vec![2, 2], vec![1.0, 10.0, 3.0, 30.0]).unwrap();
    net.forward_train(&x, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let stats = net.running_stats()[0].as_ref().unwrap();
    assert_eq!(stats.mean, vec![2.0, 20.0]);
    assert_eq!(stats.var, vec![1.0, 100.0]);
    let y = net.infer(&Tensor::new(vec![1, 2], vec![2.0, 30.0]).unwrap()).unwrap();
    assert!((y.data()[0]).abs() < 1e-9 && (y.data()[1] - 1.0).abs() < 1e-6);
}

#[test]
fn lstm_sequence_reduces_to_cell_equations() {
    // One unit, one feature, one step with hand-set weights.
    let spec = NetworkSpec::new(vec![1, 1], vec![LayerSpec::Lstm { units: 1 }]);
    let params = vec![
        Tensor::new(vec![1, 4], vec![0.5, -0.5, 1.0, 2.0]).unwrap(),
        Tensor::new(vec![1, 4], vec![0.0; 4]).unwrap(),
        Tensor::new(vec![4], vec![0.0, 0.0, 0.0, 0.0]).unwrap(),
    ];
    let net = Network::from_parts(spec, params, vec![None]).unwrap();
    let h = net.infer(&Tensor::new(vec![1, 1], vec![1.0]).unwrap()).unwrap();
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let c = sig(0.5) * 1.0f64.tanh();
    let want = sig(2.0) * c.tanh();
    assert!((h.data()[0] - want).abs() < 1e-15);
}

fn arb_seed() -> impl Strategy<Value = u64> {
    0u64..10_000
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn maxpool_picks_window_maximum(seed in arb_seed(), steps in 2usize..12, channels in 1usize..4, pool in 1usize..4) {
        prop_assume!(steps >= pool);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&[2, steps, channels], &mut rng, -5.0, 5.0);
        let (y, _) = maxpool_forward(&x, pool);
        let out_steps = steps / pool;
        for n in 0..2 {
            for t in 0..out_steps {
                for c in 0..channels {
                    let window_max = (0..pool)
                        .map(|j| x.data()[(n * steps + t * pool + j) * channels + c])
                        .fold(f64::NEG_INFINITY, f64::max);
                    prop_assert_eq!(y.data()[(n * out_steps + t) * channels + c], window_max);
                }
            }
        }
    }

    #[test]
    fn batchnorm_standardizes(seed in arb_seed(), batch in 2usize..20, channels in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&[batch, channels], &mut rng, -50.0, 50.0);
        let gamma = Tensor::filled(&[channels], 1.0);
        let beta = Tensor::zeros(&[channels]);
        let (_, xhat, ..) = batchnorm_train(&x, &gamma, &beta, 1e-12);
        for c in 0..channels {
            let col: Vec<f64> = xhat.chunks_exact(channels).map(|r| r[c]).collect();
            let mean = col.iter().sum::<f64>() / batch as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / batch as f64;
            prop_assert!(mean.abs() < 1e-6);
            prop_assert!((var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn lstm_gates_in_range(seed in arb_seed()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units = 3;
        let x = random_tensor(&[2, 6, 2], &mut rng, -4.0, 4.0);
        // |z| <= 17.5 keeps tanh and sigmoid strictly inside their ranges in f64.
        let w = random_tensor(&[2, 4 * units], &mut rng, -1.5, 1.5);
        let u = random_tensor(&[units, 4 * units], &mut rng, -1.5, 1.5);
        let b = random_tensor(&[4 * units], &mut rng, -1.0, 1.0);
        let (_, cache) = lstm_forward(&x, &w, &u, &b, true);
        for row in lstm_cache_gates(cache.as_ref().unwrap()).chunks_exact(4 * units) {
            for k in 0..units {
                for gate in [0, 1, 3] {
                    let v = row[gate * units + k];
                    prop_assert!(v > 0.0 && v < 1.0);
                }
                let g = row[2 * units + k];
                prop_assert!(g > -1.0 && g < 1.0);
            }
        }
    }

    #[test]
    fn training_steps_are_deterministic(seed in arb_seed()) {
        let spec = NetworkSpec::new(
            vec![6],
            vec![LayerSpec::dense(5, Activation::Relu), LayerSpec::Dropout { rate: 0.2 }, LayerSpec::dense(1, Activation::Sigmoid)],
        );
        let run = || {
            let mut net = Network::new(spec.clone(), seed).unwrap();
            let mut opt = AdamState::new(net.params(), AdamConfig::default());
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let mut data_rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
            for _ in 0..5 {
                let x = random_tensor(&[4, 6], &mut data_rng, 0.0, 1.0);
                let y = Tensor::new(vec![4, 1], vec![0.0, 1.0, 0.0, 1.0]).unwrap();
                let p = net.forward_train(&x, &mut rng).unwrap();
                let (_, g) = Loss::Bce.evaluate(&p, &y).unwrap();
                let grads = net.backward(&g).unwrap();
                opt.step(net.params_mut(), &grads).unwrap();
            }
            net.params().iter().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect::<Vec<u64>>()
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn dropout_mask_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mask = layers::dropout_mask(100_000, 0.25, &mut rng);
    let dropped = mask.iter().filter(|&&m| m == 0.0).count() as f64 / mask.len() as f64;
    assert!((dropped - 0.25).abs() < 0.01);
    assert!(mask.iter().all(|&m| m == 0.0 || (m - 1.0 / 0.75).abs() < 1e-15));
}
